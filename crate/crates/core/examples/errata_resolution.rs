//! Decide between the candidate readings of the doubtful coefficients by
//! scoring each against a continuum-limit integration.
//!
//! Each suspect is switched to every reading in turn with the others held at
//! their corrected forms; the score is the worst amplitude error over the
//! window where the closed form holds.

use lambda_cavity::analytic::{c3_vacuum, VALIDITY_LIMIT};
use lambda_cavity::{integrate, AmplitudeState, CoefficientTable, IntegratorConfig, Reading, Readings, Suspect, SystemParams};

const READINGS: [Reading; 3] = [Reading::AsPrinted, Reading::Alternate, Reading::Corrected];

fn main() -> lambda_cavity::Result<()> {
    let delta: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(19.2);
    let atoms = SystemParams::new(4.0, 64.0, 1024.0, 20.0, delta)?;
    let field = atoms.with_rates(4.0, 64.0, 0.0)?;
    let cfg = |t| IntegratorConfig::continuum(t).with_step(1.0 / 32_000.0).with_sample_interval(1e-3);
    let a = integrate(&atoms, &cfg(0.999), &AmplitudeState::initial(atoms.n_modes))?;
    let e = integrate(&field, &cfg(0.999).with_probes(&[0.75]), &AmplitudeState::initial(field.n_modes))?;

    println!("delta = {delta}");
    for s in Suspect::ALL {
        print!("{s:?}:");
        for r in READINGS {
            if r == Reading::Alternate && !s.has_alternate() {
                continue;
            }
            let readings = Readings::default().with(s, r);
            let mut worst = 0.0f64;
            if s == Suspect::FieldFast {
                let table = CoefficientTable::with_readings(&field, readings)?;
                for (t, v) in e.t.iter().zip(&e.field[0]) {
                    if *t < VALIDITY_LIMIT {
                        worst = worst.max((std::f64::consts::SQRT_2 * v - table.analytic_signal(*t, true)?).norm());
                    }
                }
            } else {
                let table = CoefficientTable::with_readings(&atoms, readings)?;
                for (t, v) in a.t.iter().zip(&a.atoms) {
                    let x = table.atoms(*t)?;
                    // c2 and d pick up the reflected source pulse at t = 3/4
                    for j in (0..4).filter(|j| *t < 0.75 || j % 2 == 0) {
                        worst = worst.max((v[j] - x[j]).norm());
                    }
                    let split = c3_vacuum(&atoms, *t) + table.c3_scattered(*t)?;
                    worst = worst.max((v[2] - split).norm());
                }
            }
            print!("  {r:?} {worst:.2e}");
        }
        println!();
    }
    Ok(())
}
