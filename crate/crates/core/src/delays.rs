//! Temporal centre-of-gravity delays.
//!
//! Every signal the delays are built from is a Θ-gated sum of complex
//! exponentials, so the moment integrals have closed forms:
//!
//! ```text
//! ∫₀^∞ τⁿ A_i Ā_j e^{(s_i + s̄_j)τ} dτ = A_i Ā_j n! / (−(s_i + s̄_j))ⁿ⁺¹
//! ```
//!
//! Adaptive quadrature is kept only as an independent check.

use serde::{Deserialize, Serialize};

use crate::analytic::CoefficientTable;
use crate::error::{Error, Result};
use crate::model::{SystemParams, C64};
use crate::semiclassical::group_delay_shape;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSum {
    /// `(prefactor, exponent)` pairs.
    pub terms: Vec<(C64, C64)>,
    /// Turn-on time.
    pub t0: f64,
}

impl ExponentialSum {
    pub fn new(t0: f64, terms: Vec<(C64, C64)>) -> Self {
        ExponentialSum { terms, t0 }
    }

    /// Value at absolute time `t` (zero before `t0`).
    pub fn eval(&self, t: f64) -> C64 {
        let tau = t - self.t0;
        if tau < 0.0 {
            return C64::default();
        }
        self.eval_tau(tau)
    }

    fn eval_tau(&self, tau: f64) -> C64 {
        self.terms.iter().map(|(a, s)| a * (s * tau).exp()).sum()
    }

    pub fn scaled(&self, a: C64) -> Self {
        ExponentialSum::new(self.t0, self.terms.iter().map(|(b, s)| (a * b, *s)).collect())
    }

    /// Concatenation; both sums must share `t0`.
    pub fn plus(&self, other: &ExponentialSum) -> Result<Self> {
        if self.t0 != other.t0 {
            return Err(Error::Config(format!(
                "turn-on times differ: {} vs {}",
                self.t0, other.t0
            )));
        }
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(ExponentialSum::new(self.t0, terms))
    }

    /// Smallest decay rate of `|·|²` over all terms.
    fn slowest_rate(&self) -> f64 {
        self.terms.iter().map(|(_, s)| -2.0 * s.re).fold(f64::INFINITY, f64::min)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `Re ∫₀^∞ τⁿ a(τ) b̄(τ) dτ`, both measured from their common `t0`.
pub fn cross_moment(a: &ExponentialSum, b: &ExponentialSum, n: u32) -> Result<f64> {
    if a.t0 != b.t0 {
        return Err(Error::Config("cross moment of sums with different turn-on".into()));
    }
    let nf = factorial(n);
    let mut acc = C64::default();
    for (ai, si) in &a.terms {
        for (bj, sj) in &b.terms {
            let s = si + sj.conj();
            if !(s.re < 0.0) {
                return Err(Error::Divergent(format!("Re(s_i + s̄_j) = {} ≥ 0", s.re)));
            }
            acc += ai * bj.conj() * nf / (-s).powu(n + 1);
        }
    }
    Ok(acc.re)
}

/// `∫₀^∞ τⁿ |Σ A_i e^{s_i τ}|² dτ`.
pub fn exact_moment(sum: &ExponentialSum, n: u32) -> Result<f64> {
    cross_moment(sum, sum, n)
}

/// First moment over zeroth, reported as an absolute time.
pub fn center_of_gravity(sum: &ExponentialSum) -> Result<f64> {
    let m0 = exact_moment(sum, 0)?;
    if !(m0 > 0.0) {
        return Err(Error::Divergent("signal has zero weight".into()));
    }
    Ok(sum.t0 + exact_moment(sum, 1)? / m0)
}

/// Fraction of `∫|·|²` lying beyond absolute time `t_cut`.
pub fn weight_beyond(sum: &ExponentialSum, t_cut: f64) -> Result<f64> {
    let m0 = exact_moment(sum, 0)?;
    let tau = (t_cut - sum.t0).max(0.0);
    let mut tail = C64::default();
    for (ai, si) in &sum.terms {
        for (aj, sj) in &sum.terms {
            let s = si + sj.conj();
            tail += ai * aj.conj() * (s * tau).exp() / (-s);
        }
    }
    Ok(tail.re / m0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022935322010529225,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

/// `∫τⁿ (Σ|A_i| e^{Re s_i τ})² dτ`, an upper bound on the moment integrand.
fn moment_envelope(sum: &ExponentialSum, n: u32) -> f64 {
    let nf = factorial(n);
    let mut acc = 0.0;
    for (ai, si) in &sum.terms {
        for (aj, sj) in &sum.terms {
            acc += ai.norm() * aj.norm() * nf / (-(si.re + sj.re)).powi(n as i32 + 1);
        }
    }
    acc
}

/// Moment by adaptive Gauss–Kronrod quadrature, truncated where the
/// intensity envelope has fallen below `1e-12` of its starting value.
pub fn quadrature_moment(sum: &ExponentialSum, n: u32, rel_tol: f64) -> Result<f64> {
    let slow = sum.slowest_rate();
    if sum.terms.is_empty() || !(slow > 0.0) {
        return Err(Error::Divergent("non-decaying term".into()));
    }
    let fast = sum.terms.iter().map(|(_, s)| s.norm()).fold(slow, f64::max);
    let t_end = (n as f64 * (1.0 + (n as f64 / slow).ln().max(0.0)) + 12.0 * 10f64.ln()) / slow;
    let f = |tau: f64| tau.powi(n as i32) * sum.eval_tau(tau).norm_sqr();
    // geometric panels resolve the fast start and the slow tail alike
    let mut edges = vec![0.0];
    let mut x = 1.0 / fast;
    while x < t_end {
        edges.push(x);
        x *= 1.5;
    }
    edges.push(t_end);
    let tol = rel_tol * 1e-2 * moment_envelope(sum, n) / edges.len() as f64;
    Ok(edges.windows(2).map(|w| adaptive(&f, w[0], w[1], tol, 40)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMethod {
    Quadrature,
    ExactMoments,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub arrival_with: f64,
    pub arrival_without: f64,
    pub delay: f64,
    pub method: DelayMethod,
    pub f_used: f64,
    /// Share of the scatterer-present weight that lies past the validity window.
    pub weight_beyond_window: f64,
}

fn report(
    with: &ExponentialSum,
    without: &ExponentialSum,
    f: f64,
    method: DelayMethod,
) -> Result<DelayReport> {
    let a = center_of_gravity(with)?;
    let b = center_of_gravity(without)?;
    Ok(DelayReport {
        arrival_with: a,
        arrival_without: b,
        delay: a - b,
        method,
        f_used: f,
        weight_beyond_window: weight_beyond(with, crate::analytic::VALIDITY_LIMIT)?,
    })
}

fn check_f(f: f64) -> Result<()> {
    if !(f.is_finite() && f >= 0.0) {
        return Err(Error::Config(format!("forward fraction {f} must be finite and >= 0")));
    }
    Ok(())
}

/// Detector delay from `c3 = c3⁰ + f c3ˢ`.
pub fn delay_c3(table: &CoefficientTable, f: f64) -> Result<DelayReport> {
    check_f(f)?;
    let vac = table.c3_vacuum_sum();
    let with = vac.plus(&table.c3_scattered_sum().scaled(C64::from(f)))?;
    report(&with, &vac, f, DelayMethod::ExactMoments)
}

/// First order in `f`:
/// `2f [⟨τ Re c3⁰ c̄3ˢ⟩/⟨|c3⁰|²⟩ − ⟨τ|c3⁰|²⟩⟨Re c3⁰ c̄3ˢ⟩/⟨|c3⁰|²⟩²]`.
pub fn delay_c3_first_order(table: &CoefficientTable, f: f64) -> Result<DelayReport> {
    check_f(f)?;
    let vac = table.c3_vacuum_sum();
    let sc = table.c3_scattered_sum();
    let m0 = exact_moment(&vac, 0)?;
    let m1 = exact_moment(&vac, 1)?;
    let x0 = cross_moment(&vac, &sc, 0)?;
    let x1 = cross_moment(&vac, &sc, 1)?;
    let delay = 2.0 * f * (x1 / m0 - m1 * x0 / (m0 * m0));
    let without = vac.t0 + m1 / m0;
    let with = vac.plus(&sc.scaled(C64::from(f)))?;
    Ok(DelayReport {
        arrival_with: without + delay,
        arrival_without: without,
        delay,
        method: DelayMethod::ExactMoments,
        f_used: f,
        weight_beyond_window: weight_beyond(&with, crate::analytic::VALIDITY_LIMIT)?,
    })
}

/// `4fγ₂(ω_R²+4δ²)[(ω_R²−4δ²)² − 4γ₂²δ²] / [(ω_R²−4δ²)² + 4γ₂²δ²]²`, the
/// `γ₃ → ∞` then `γ₁ → 0` limit.
pub fn delay_c3_closed_form(gamma2: f64, omega_r: f64, delta: f64, f: f64) -> Result<f64> {
    Ok(4.0 * f * gamma2 * group_delay_shape(gamma2, omega_r, delta)?)
}

/// Centre-of-gravity delay of `|Ẽ|²` at `z = 3/4`, detector absent.
pub fn delay_field_intensity(table: &CoefficientTable, f: f64) -> Result<DelayReport> {
    check_f(f)?;
    let vac = table.field_sum(false);
    let with = vac.plus(&table.field_scattered_sum().scaled(C64::from(f)))?;
    report(&with, &vac, f, DelayMethod::ExactMoments)
}

/// Same as [`delay_c3`] but with every moment from quadrature.
pub fn delay_c3_quadrature(table: &CoefficientTable, f: f64, rel_tol: f64) -> Result<DelayReport> {
    check_f(f)?;
    let vac = table.c3_vacuum_sum();
    let with = vac.plus(&table.c3_scattered_sum().scaled(C64::from(f)))?;
    let cog = |s: &ExponentialSum| -> Result<f64> {
        Ok(s.t0 + quadrature_moment(s, 1, rel_tol)? / quadrature_moment(s, 0, rel_tol)?)
    };
    let a = cog(&with)?;
    let b = cog(&vac)?;
    Ok(DelayReport {
        arrival_with: a,
        arrival_without: b,
        delay: a - b,
        method: DelayMethod::Quadrature,
        f_used: f,
        weight_beyond_window: weight_beyond(&with, crate::analytic::VALIDITY_LIMIT)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    /// Gap between the last two Richardson estimates (or last two raw values).
    pub residual: f64,
    pub ratios: Vec<f64>,
    pub estimates: Vec<f64>,
}

/// Richardson extrapolation of a delay to `γ₁/γ₂ → 0`, `γ₃/γ₂ → ∞`.
///
/// For each ratio `ε` the delay is evaluated at `γ₁ = εγ₂`, `γ₃ = γ₂/ε`; the
/// leading error is linear in `ε`.
pub fn limit_extrapolation<F>(
    delay_fn: F,
    params: &SystemParams,
    f: f64,
    ratios: &[f64],
) -> Result<Extrapolation>
where
    F: Fn(&SystemParams, f64) -> Result<f64>,
{
    if ratios.len() < 2 {
        return Err(Error::Config("need at least two ratios".into()));
    }
    if ratios.windows(2).any(|w| !(w[1] < w[0]) || w[1] <= 0.0) {
        return Err(Error::Config("ratios must be positive and strictly decreasing".into()));
    }
    let g2 = params.gamma2;
    let estimates = ratios
        .iter()
        .map(|&e| delay_fn(&params.with_rates(e * g2, g2, g2 / e)?, f))
        .collect::<Result<Vec<f64>>>()?;
    let rich: Vec<f64> = ratios
        .windows(2)
        .zip(estimates.windows(2))
        .map(|(e, d)| d[1] + e[1] * (d[1] - d[0]) / (e[0] - e[1]))
        .collect();
    let value = *rich.last().unwrap();
    let residual = if rich.len() >= 2 {
        (rich[rich.len() - 1] - rich[rich.len() - 2]).abs()
    } else {
        (estimates[1] - estimates[0]).abs()
    };
    let steps: Vec<f64> = estimates.windows(2).map(|d| (d[1] - d[0]).abs()).collect();
    let scale = estimates.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if steps.windows(2).any(|w| w[1] > w[0] && w[1] > 1e-12 * scale) || !value.is_finite() {
        return Err(Error::NonConvergent(format!("successive estimates {estimates:?}")));
    }
    Ok(Extrapolation { value, residual, ratios: ratios.to_vec(), estimates })
}

/// Closed-form delay paired with the classical group delay at the same `f = ξ`.
pub fn factor_of_two_ratio(gamma2: f64, omega_r: f64, delta: f64) -> Result<f64> {
    let q = delay_c3_closed_form(gamma2, omega_r, delta, 1.0)?;
    let c = 2.0 * gamma2 * group_delay_shape(gamma2, omega_r, delta)?;
    Ok(q / c)
}
