//! Integrate the reference system on the mode grid and in the continuum
//! limit, and compare both against the closed-form amplitudes.

use std::time::Instant;

use lambda_cavity::oracle::Amplitude;
use lambda_cavity::{integrate, AmplitudeState, CoefficientTable, IntegratorConfig, SystemParams};

fn main() -> lambda_cavity::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2048);
    let p = SystemParams::reference_case().with_modes(k)?;
    let table = CoefficientTable::new(&p)?;

    for cfg in [IntegratorConfig::new(0.95), IntegratorConfig::continuum(0.95)] {
        let start = Instant::now();
        let traj = integrate(&p, &cfg.with_sample_interval(1e-3), &AmplitudeState::initial(k))?;
        let secs = start.elapsed().as_secs_f64();
        println!("{:?}: K = {k}, step = {:.3e}, {secs:.1} s", traj.scheme, traj.step);
        for a in Amplitude::ALL {
            let (mut worst, mut at) = (0.0f64, 0.0);
            for (t, v) in traj.t.iter().zip(&traj.atoms) {
                let exact = table.atoms(*t)?[a.index()];
                let dev = (v[a.index()].norm() - exact.norm()).abs();
                if dev > worst {
                    worst = dev;
                    at = *t;
                }
            }
            println!("  |{}|  max deviation {worst:.3e} at t = {at:.3}", a.name());
        }
        println!("  max |norm − 1| = {:.3e}", traj.max_norm_deviation());
    }
    Ok(())
}
