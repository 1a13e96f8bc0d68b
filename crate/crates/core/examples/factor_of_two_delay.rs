//! Quantum detector delay against the classical group delay of a slab with
//! the same scattering strength, across the transparency window.

use lambda_cavity::delays::{delay_c3_closed_form, delay_c3_first_order, limit_extrapolation};
use lambda_cavity::semiclassical::group_delay_shape;
use lambda_cavity::{CoefficientTable, SystemParams};

fn main() -> lambda_cavity::Result<()> {
    let (g2, wr, f) = (64.0, 32.0, 1e-2);
    let ratios = [4e-3, 2e-3, 1e-3];
    println!("{:>8} {:>12} {:>12} {:>12} {:>8}", "d/g2", "classical", "closed", "extrap", "ratio");
    for i in 0..=8 {
        let x = -0.9 + 0.225 * i as f64;
        let p = SystemParams::new(4.0, g2, 1024.0, wr, x * g2)?;
        let classical = 2.0 * f * g2 * group_delay_shape(g2, wr, x * g2)?;
        let closed = delay_c3_closed_form(g2, wr, x * g2, f)?;
        let ex = limit_extrapolation(|q, f| Ok(delay_c3_first_order(&CoefficientTable::new(q)?, f)?.delay), &p, f, &ratios)?;
        println!("{x:>8.3} {classical:>12.4e} {closed:>12.4e} {:>12.4e} {:>8.5}", ex.value, ex.value / classical);
    }
    Ok(())
}
