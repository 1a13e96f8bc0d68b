//! Classical reference theory for a thin EIT slab.
//!
//! All pulse work is done on the baseband envelope, i.e. with the optical
//! carrier removed, which is the same frame the quantum amplitudes live in.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::analytic::DEGENERATE_OFFSET;
use crate::error::{Error, Result};
use crate::model::{branch_sqrt_discriminant, classify_discriminant, Discriminant, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabMedium {
    /// Dimensionless scattering strength `NΔz|d|²ω/(ħε₀cγ)`.
    pub xi: f64,
    /// Decay rate of the excited level into the probe ground state.
    pub gamma: f64,
    pub omega_r: f64,
    /// Carrier frequency; informational only.
    pub omega_ac: Option<f64>,
}

impl SlabMedium {
    pub fn new(xi: f64, gamma: f64, omega_r: f64) -> Result<Self> {
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::Config(format!("xi = {xi} must be finite and >= 0")));
        }
        if !(gamma.is_finite() && gamma >= 0.0 && omega_r.is_finite() && omega_r >= 0.0) {
            return Err(Error::Config("gamma and omega_r must be finite and >= 0".into()));
        }
        Ok(SlabMedium { xi, gamma, omega_r, omega_ac: None })
    }

    /// `2NΔz|d|²ω/(ħε₀c) = 2ξγ`, the dimensional scale of the group delay.
    pub fn group_delay_prefactor(&self) -> f64 {
        2.0 * self.xi * self.gamma
    }

    /// Group delay including its prefactor.
    pub fn group_delay(&self, delta: f64) -> Result<f64> {
        Ok(self.group_delay_prefactor() * group_delay_shape(self.gamma, self.omega_r, delta)?)
    }

    /// First-order transmission factor `1 + iξ(δγ/2)/(ω_R²/4 − δ² − iδγ/2)`.
    pub fn transmission(&self, delta: f64) -> Result<C64> {
        Ok(1.0 + I * self.xi * (self.gamma / 2.0) * susceptibility_shape(delta, self.gamma, self.omega_r)?)
    }
}

/// `δ/(ω_R²/4 − δ² − iδγ/2)`, the susceptibility in units of `N|d|²/(ħε₀)`.
pub fn susceptibility_shape(delta: f64, gamma: f64, omega_r: f64) -> Result<C64> {
    if omega_r == 0.0 {
        // two-level limit; the δ in numerator and denominator cancels
        let den = C64::new(-delta, -gamma / 2.0);
        if den.norm() == 0.0 {
            return Err(Error::Singular("δ = 0 with γ = 0 and ω_R = 0".into()));
        }
        return Ok(1.0 / den);
    }
    if delta == 0.0 {
        return Ok(C64::default());
    }
    let den = C64::new(omega_r * omega_r / 4.0 - delta * delta, -delta * gamma / 2.0);
    if den.norm() <= 1e-15 * (omega_r * omega_r + delta * delta) {
        return Err(Error::Singular(format!("δ = {delta} = ±ω_R/2 with γ = 0")));
    }
    Ok(delta / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlabForm {
    /// `E e^{iξ(γ/2)χ}`.
    Exact,
    FirstOrder,
}

pub fn transmit_thin_slab(field_in: C64, medium: &SlabMedium, delta: f64, form: SlabForm) -> Result<C64> {
    let x = I * medium.xi * (medium.gamma / 2.0) * susceptibility_shape(delta, medium.gamma, medium.omega_r)?;
    Ok(match form {
        SlabForm::Exact => field_in * x.exp(),
        SlabForm::FirstOrder => field_in * (1.0 + x),
    })
}

/// `(ω_R²+4δ²)[(ω_R²−4δ²)² − 4γ²δ²] / [(ω_R²−4δ²)² + 4γ²δ²]²`.
pub fn group_delay_shape(gamma: f64, omega_r: f64, delta: f64) -> Result<f64> {
    let w2 = omega_r * omega_r;
    let a = w2 - 4.0 * delta * delta;
    let b = 4.0 * gamma * gamma * delta * delta;
    let den = a * a + b;
    if !(den > 0.0) {
        return Err(Error::Singular("group-delay denominator vanishes".into()));
    }
    Ok((w2 + 4.0 * delta * delta) * (a * a - b) / (den * den))
}

/// Scattered field behind the slab in units of the incident amplitude.
///
/// The incident envelope is `Θ(T) e^{−γ₁T/2}` with `T = t − z/c`. The result
/// is the sum of the residues at the source pole and the two medium poles.
pub fn classical_scattered_pulse(medium: &SlabMedium, gamma1: f64, delta: f64, t_minus_zc: f64) -> Result<C64> {
    if t_minus_zc < 0.0 || medium.xi == 0.0 {
        return Ok(C64::default());
    }
    let w = medium.omega_r;
    if medium.gamma > 0.0 && classify_discriminant(medium.gamma, w) == Discriminant::Degenerate {
        let hi = residue_sum(medium, w * (1.0 + DEGENERATE_OFFSET), gamma1, delta, t_minus_zc)?;
        let lo = residue_sum(medium, w * (1.0 - DEGENERATE_OFFSET), gamma1, delta, t_minus_zc)?;
        return Ok(0.5 * (hi + lo));
    }
    residue_sum(medium, w, gamma1, delta, t_minus_zc)
}

/// Carrier factor `e^{−iω₁t}` for callers that want the optical field.
pub fn with_carrier(envelope: C64, omega1: f64, t: f64) -> C64 {
    envelope * (-I * omega1 * t).exp()
}

fn residue_sum(m: &SlabMedium, omega_r: f64, gamma1: f64, delta: f64, tt: f64) -> Result<C64> {
    let g = m.gamma;
    let r = branch_sqrt_discriminant(g, omega_r);
    let q = |nu: C64| omega_r * omega_r / 4.0 - (nu + delta).powi(2) - I * (nu + delta) * g / 2.0;
    let scale = g + omega_r + gamma1 + delta.abs();
    let nu_a = C64::new(0.0, -gamma1 / 2.0);
    let qa = q(nu_a);
    if qa.norm() < 1e-12 * scale * scale {
        return Err(Error::Singular("source pole coincides with a medium pole".into()));
    }
    let mut res = (-I * nu_a * tt).exp() * (nu_a + delta) / (-I * qa);
    if r.norm() < 1e-12 * scale {
        return Err(Error::Degenerate("medium poles coincide".into()));
    }
    let up = -I * (g - r) / 4.0;
    let um = -I * (g + r) / 4.0;
    for (a, b) in [(up, um), (um, up)] {
        let nu = a - delta;
        let den = (gamma1 / 2.0 - I * nu) * (-(a - b));
        if den.norm() < 1e-12 * scale * scale {
            return Err(Error::Singular("source pole coincides with a medium pole".into()));
        }
        res += (-I * nu * tt).exp() * a / den;
    }
    Ok(m.xi * g / 2.0 * res)
}

/// Uniform time grid for the Fourier path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FftGrid {
    pub n: usize,
    pub dt: f64,
    /// Time of sample 0 relative to the pulse turn-on.
    pub t_start: f64,
}

impl FftGrid {
    /// `2¹⁶` samples spanning `64/γ₁` with one eighth of the span before turn-on.
    pub fn default_for(gamma1: f64) -> Self {
        Self::with_span(1 << 16, 64.0 / gamma1)
    }

    pub fn with_span(n: usize, span: f64) -> Self {
        FftGrid { n, dt: span / n as f64, t_start: -span / 8.0 }
    }

    /// Smallest power-of-two grid over 20 amplitude e-folds of the slowest
    /// decay (source or medium pole) that samples the fastest time scale at
    /// least 32 times.
    pub fn resolving(gamma1: f64, medium: &SlabMedium, delta: f64) -> Self {
        let q = medium.gamma * medium.gamma / 16.0 - medium.omega_r * medium.omega_r / 4.0;
        let slow_pole = if q > 0.0 { medium.gamma / 4.0 - q.sqrt() } else { medium.gamma / 4.0 };
        let slowest = if slow_pole > 1e-9 { slow_pole.min(gamma1 / 2.0) } else { gamma1 / 2.0 };
        let span = 20.0 / slowest;
        let fastest = medium.gamma.max(medium.omega_r).max(delta.abs()).max(gamma1);
        let mut n = 1usize << 12;
        while span / n as f64 * fastest > 1.0 / 32.0 && n < 1 << 24 {
            n <<= 1;
        }
        Self::with_span(n, span)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.t_start + i as f64 * self.dt).collect()
    }
}

/// `Θ(T) e^{−γ₁T/2}` sampled on `grid`, with the turn-on sample set to ½.
pub fn exponential_turn_on(grid: &FftGrid, gamma1: f64) -> Vec<C64> {
    grid.times()
        .into_iter()
        .map(|t| {
            if t.abs() < 0.5 * grid.dt {
                C64::from(0.5)
            } else if t < 0.0 {
                C64::default()
            } else {
                C64::from((-gamma1 * t / 2.0).exp())
            }
        })
        .collect()
}

/// Propagate a sampled envelope through the slab in the frequency domain.
///
/// The envelope must be carrier-free and decay below `1e-6` of its peak
/// inside the grid.
pub fn classical_transmit_fft(medium: &SlabMedium, delta: f64, envelope: &[C64], grid: &FftGrid) -> Result<Vec<C64>> {
    let n = envelope.len();
    if n != grid.n || !n.is_power_of_two() {
        return Err(Error::Config(format!("grid length {n} must be a power of two matching the grid")));
    }
    let peak = envelope.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    if peak == 0.0 || medium.xi == 0.0 {
        return Ok(envelope.to_vec());
    }
    let tail = envelope[n - n / 64..].iter().fold(0.0f64, |m, x| m.max(x.norm()));
    if tail > 1e-6 * peak {
        return Err(Error::Aliasing(format!("envelope tail {:.3e} of peak does not decay inside the grid", tail / peak)));
    }
    let fastest = medium.gamma.max(medium.omega_r).max(delta.abs());
    if grid.dt * fastest > 0.5 {
        return Err(Error::Aliasing(format!(
            "dt = {} under-resolves the medium time scale 1/{fastest}",
            grid.dt
        )));
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = envelope.to_vec();
    fwd.process(&mut buf);
    // bin j synthesises e^{+iΩ_j t}, i.e. a probe offset ν = −Ω_j from the carrier
    for (j, x) in buf.iter_mut().enumerate() {
        let jj = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        let omega = 2.0 * PI * jj / (n as f64 * grid.dt);
        *x *= medium.transmission(delta - omega)?;
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.into_iter().map(|x| x * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shape_examples() {
        assert_eq!(susceptibility_shape(0.0, 64.0, 32.0).unwrap(), C64::default());
        let v = susceptibility_shape(16.0, 64.0, 32.0).unwrap();
        assert!((v - C64::new(0.0, 1.0 / 32.0)).norm() < 1e-15);
        let far = susceptibility_shape(1e6, 64.0, 32.0).unwrap();
        assert!((far.re * 1e6 + 1.0).abs() < 1e-3);
        assert!(matches!(susceptibility_shape(16.0, 0.0, 32.0), Err(Error::Singular(_))));
    }

    #[test]
    fn slab_examples() {
        let m = SlabMedium::new(0.01, 64.0, 32.0).unwrap();
        let e = C64::new(0.3, -0.7);
        for form in [SlabForm::Exact, SlabForm::FirstOrder] {
            assert_eq!(transmit_thin_slab(e, &m, 0.0, form).unwrap(), e);
            let m0 = SlabMedium::new(0.0, 64.0, 32.0).unwrap();
            assert_eq!(transmit_thin_slab(e, &m0, 5.0, form).unwrap(), e);
        }
        let t = transmit_thin_slab(C64::from(1.0), &m, 16.0, SlabForm::FirstOrder).unwrap();
        assert!((t - C64::from(0.99)).norm() < 1e-15);
    }

    #[test]
    fn group_delay_examples() {
        assert!((group_delay_shape(64.0, 32.0, 0.0).unwrap() - 1.0 / 1024.0).abs() < 1e-18);
        assert!(group_delay_shape(64.0, 4.0, 0.0).unwrap() > group_delay_shape(64.0, 8.0, 0.0).unwrap());
        let g = 64.0;
        for root in [g * (2f64.sqrt() - 1.0) / 4.0, g * (2f64.sqrt() + 1.0) / 4.0] {
            let a = group_delay_shape(g, g / 2.0, root * (1.0 - 1e-6)).unwrap();
            let b = group_delay_shape(g, g / 2.0, root * (1.0 + 1e-6)).unwrap();
            assert!(a * b < 0.0);
        }
        assert!(group_delay_shape(64.0, 32.0, 1e5).unwrap().abs() < 1e-9);
        assert!(group_delay_shape(64.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn residue_causal_and_zero_strength() {
        let m = SlabMedium::new(0.1, 64.0, 20.0).unwrap();
        assert_eq!(classical_scattered_pulse(&m, 4.0, 3.0, -1e-9).unwrap(), C64::default());
        let m0 = SlabMedium::new(0.0, 64.0, 20.0).unwrap();
        assert_eq!(classical_scattered_pulse(&m0, 4.0, 3.0, 0.2).unwrap(), C64::default());
        // continuous turn-on
        assert!(classical_scattered_pulse(&m, 4.0, 3.0, 0.0).unwrap().norm() < 1e-14);
    }

    #[test]
    fn first_residue_matches_steady_term() {
        let (g1, g, w, dl) = (4.0, 64.0, 20.0, 3.0);
        let m = SlabMedium::new(1.0, g, w).unwrap();
        // late times: only the source pole survives
        let tt = 40.0;
        let v = classical_scattered_pulse(&m, g1, dl, tt).unwrap();
        let d1 = C64::new(g1 * g1 - g1 * g - 4.0 * dl * dl + w * w, 2.0 * dl * (2.0 * g1 - g));
        let expect = g * C64::new(g1, 2.0 * dl) / d1 * (-g1 * tt / 2.0f64).exp();
        assert!((v - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn fft_identity_for_empty_medium() {
        let grid = FftGrid::with_span(1 << 12, 16.0);
        let x = exponential_turn_on(&grid, 4.0);
        let m = SlabMedium::new(0.0, 64.0, 32.0).unwrap();
        let y = classical_transmit_fft(&m, 1.0, &x, &grid).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_rejects_unresolved_envelopes() {
        let m = SlabMedium::new(0.01, 64.0, 32.0).unwrap();
        let grid = FftGrid::with_span(1 << 10, 1.0);
        let x = exponential_turn_on(&grid, 4.0);
        assert!(matches!(classical_transmit_fft(&m, 1.0, &x, &grid), Err(Error::Aliasing(_))));
        let grid = FftGrid::with_span(1 << 8, 64.0);
        let x = exponential_turn_on(&grid, 4.0);
        assert!(matches!(classical_transmit_fft(&m, 1.0, &x, &grid), Err(Error::Aliasing(_))));
    }

    #[test]
    fn fft_shift_equivariance() {
        let m = SlabMedium::new(0.05, 64.0, 32.0).unwrap();
        let grid = FftGrid::with_span(1 << 13, 16.0);
        let x = exponential_turn_on(&grid, 4.0);
        let y = classical_transmit_fft(&m, 5.0, &x, &grid).unwrap();
        let s = 37;
        let xs: Vec<C64> = (0..grid.n).map(|i| if i >= s { x[i - s] } else { C64::default() }).collect();
        let ys = classical_transmit_fft(&m, 5.0, &xs, &grid).unwrap();
        for i in s..grid.n - s {
            assert!((ys[i] - y[i - s]).norm() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn passive_medium(dl in -500.0..500.0f64, g in 0.01..200.0f64, w in 0.0..200.0f64) {
            let chi = susceptibility_shape(dl, g, w).unwrap();
            prop_assert!(chi.im >= 0.0);
        }

        #[test]
        fn transparency_exact(re in -10.0..10.0f64, im in -10.0..10.0f64, xi in 0.0..1.0f64, g in 0.1..100.0f64, w in 0.1..100.0f64) {
            let m = SlabMedium::new(xi, g, w).unwrap();
            let e = C64::new(re, im);
            for form in [SlabForm::Exact, SlabForm::FirstOrder] {
                prop_assert_eq!(transmit_thin_slab(e, &m, 0.0, form).unwrap().norm(), e.norm());
            }
        }

        #[test]
        fn group_delay_even(dl in 0.0..300.0f64, g in 0.1..100.0f64, w in 0.1..100.0f64) {
            let a = group_delay_shape(g, w, dl).unwrap();
            let b = group_delay_shape(g, w, -dl).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
