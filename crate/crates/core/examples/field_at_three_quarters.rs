//! Field intensity at z = 3/4 with the detector atom removed, from the
//! closed form and from a probed integration, with and without the scatterer.

use lambda_cavity::{integrate, AmplitudeState, CoefficientTable, IntegratorConfig, SystemParams};

fn main() -> lambda_cavity::Result<()> {
    let p = SystemParams::new(4.0, 64.0, 0.0, 32.0, 0.0)?;
    let bare = p.with_rates(4.0, 0.0, 0.0)?;
    let table = CoefficientTable::new(&p)?;
    let cfg = IntegratorConfig::continuum(0.99).with_sample_interval(0.01).with_probes(&[0.75]);
    let traj = integrate(&p, &cfg, &AmplitudeState::initial(p.n_modes))?;
    let empty = integrate(&bare, &cfg, &AmplitudeState::initial(p.n_modes))?;
    let (with, without) = (traj.intensity(0), empty.intensity(0));
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "closed", "oracle", "empty");
    for (i, t) in traj.t.iter().enumerate().step_by(5) {
        let closed = table.analytic_signal(*t, true)?.norm_sqr();
        println!("{t:>6.2} {closed:>12.5e} {:>12.5e} {:>12.5e}", with[i], without[i]);
    }
    Ok(())
}
