//! Detector excitation probability for several detunings next to the
//! empty-cavity baseline, with centre-of-gravity arrival times.

use lambda_cavity::analytic::c3_vacuum;
use lambda_cavity::delays::delay_c3;
use lambda_cavity::{CoefficientTable, SystemParams};

fn main() -> lambda_cavity::Result<()> {
    let f = 1e-2;
    for x in [0.0, 0.25, 0.5, 1.0] {
        let p = SystemParams::new(4.0, 64.0, 1024.0, 32.0, x * 64.0)?;
        let table = CoefficientTable::new(&p)?;
        let d = delay_c3(&table, f)?;
        println!("delta = {x} g2: arrival {:.5} vs {:.5}, delay {:+.3e}", d.arrival_with, d.arrival_without, d.delay);
        for t in [0.52, 0.6, 0.7, 0.8, 0.9] {
            let with = c3_vacuum(&p, t) + f * table.c3_scattered(t)?;
            println!("  t = {t:.2}  {:.5e}  {:.5e}", with.norm_sqr(), c3_vacuum(&p, t).norm_sqr());
        }
    }
    Ok(())
}
