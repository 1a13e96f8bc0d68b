//! Susceptibility shape and thin-slab transmission across the EIT window.

use lambda_cavity::semiclassical::{susceptibility_shape, transmit_thin_slab, SlabForm, SlabMedium};
use lambda_cavity::C64;

fn main() -> lambda_cavity::Result<()> {
    let (gamma, wr) = (64.0, 32.0);
    let slab = SlabMedium::new(0.05, gamma, wr)?;
    println!("{:>8} {:>12} {:>12} {:>10} {:>12}", "d/g", "re chi", "im chi", "|T|", "delay");
    for i in 0..=20 {
        let x = -1.0 + 0.1 * i as f64;
        let chi = susceptibility_shape(x * gamma, gamma, wr)?;
        let t = transmit_thin_slab(C64::from(1.0), &slab, x * gamma, SlabForm::Exact)?;
        println!("{x:>8.2} {:>12.4e} {:>12.4e} {:>10.6} {:>12.4e}", chi.re, chi.im, t.norm(), slab.group_delay(x * gamma)?);
    }
    Ok(())
}
