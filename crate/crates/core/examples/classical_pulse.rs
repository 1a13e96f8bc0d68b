//! Exponential pulse through a thin EIT slab: Fourier synthesis against the
//! residue closed form.

use lambda_cavity::semiclassical::{classical_scattered_pulse, classical_transmit_fft, exponential_turn_on, FftGrid, SlabMedium};

fn main() -> lambda_cavity::Result<()> {
    let (g1, delta) = (4.0, 10.0);
    let medium = SlabMedium::new(0.1, 64.0, 20.0)?;
    let grid = FftGrid::resolving(g1, &medium, delta);
    let env = exponential_turn_on(&grid, g1);
    let out = classical_transmit_fft(&medium, delta, &env, &grid)?;
    println!("grid: {} samples, dt = {:.3e}", grid.n, grid.dt);
    println!("{:>8} {:>24} {:>24}", "t-z/c", "fft", "residue");
    let times = grid.times();
    for target in [-0.1, 0.0, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
        let i = times.iter().position(|t| *t >= target - 0.5 * grid.dt).unwrap();
        let t = times[i];
        let res = classical_scattered_pulse(&medium, g1, delta, t)?;
        let fft = out[i] - env[i];
        println!("{t:>8.4} {:>11.3e}{:+.3e}i {:>11.3e}{:+.3e}i", fft.re, fft.im, res.re, res.im);
    }
    Ok(())
}
