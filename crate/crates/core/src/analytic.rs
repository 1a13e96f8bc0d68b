//! Closed-form amplitudes for the default three-atom geometry.
//!
//! The expressions keep only the first excitation of the scatterer and the
//! detector, so they are valid for `0 ≤ t < 1`. Coefficients are labelled
//! `F1 … F23` as in the usual presentation of this solution.
//!
//! A handful of the printed coefficients do not reproduce the Schrödinger
//! dynamics. Each of those has a [`Reading`] switch so the literal and the
//! corrected forms can be compared against the numeric oracle.

use serde::{Deserialize, Serialize};

use crate::delays::ExponentialSum;
use crate::error::{Error, Result};
use crate::model::{branch_sqrt_discriminant, Discriminant, SystemParams, C64};

/// Upper end of the first-excitation window.
pub const VALIDITY_LIMIT: f64 = 1.0;

/// Relative offset used on either side of a degenerate `ω_R`.
pub const DEGENERATE_OFFSET: f64 = 1e-6;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reading {
    /// Literal transcription of the printed formula.
    AsPrinted,
    /// The second candidate for a garbled denominator or prefactor
    /// (only `F2` and `F10` have one; elsewhere it equals `AsPrinted`).
    Alternate,
    /// Form that reproduces the integrated Schrödinger equations.
    Corrected,
}

/// Coefficients whose printed form is in doubt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suspect {
    F1,
    F2,
    F10,
    F21,
    F23,
    /// Fast-exponent term of the scattered analytic signal.
    FieldFast,
}

impl Suspect {
    pub const ALL: [Suspect; 6] =
        [Suspect::F1, Suspect::F2, Suspect::F10, Suspect::F21, Suspect::F23, Suspect::FieldFast];

    /// Whether a distinct alternate reading exists.
    pub fn has_alternate(self) -> bool {
        matches!(self, Suspect::F2 | Suspect::F10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readings {
    pub f1: Reading,
    pub f2: Reading,
    pub f10: Reading,
    pub f21: Reading,
    pub f23: Reading,
    pub field_fast: Reading,
}

impl Default for Readings {
    fn default() -> Self {
        Self::uniform(Reading::Corrected)
    }
}

impl Readings {
    pub fn uniform(r: Reading) -> Self {
        Readings { f1: r, f2: r, f10: r, f21: r, f23: r, field_fast: r }
    }

    pub fn as_printed() -> Self {
        Self::uniform(Reading::AsPrinted)
    }

    pub fn get(&self, s: Suspect) -> Reading {
        match s {
            Suspect::F1 => self.f1,
            Suspect::F2 => self.f2,
            Suspect::F10 => self.f10,
            Suspect::F21 => self.f21,
            Suspect::F23 => self.f23,
            Suspect::FieldFast => self.field_fast,
        }
    }

    pub fn with(mut self, s: Suspect, r: Reading) -> Self {
        let slot = match s {
            Suspect::F1 => &mut self.f1,
            Suspect::F2 => &mut self.f2,
            Suspect::F10 => &mut self.f10,
            Suspect::F21 => &mut self.f21,
            Suspect::F23 => &mut self.f23,
            Suspect::FieldFast => &mut self.field_fast,
        };
        *slot = r;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    PaperFormula,
    /// Degenerate discriminant: amplitudes are averaged over two nearby `ω_R`.
    LimitFormula,
}

/// Coefficients for one value of `ω_R`.
#[derive(Debug, Clone)]
struct Branch {
    r: C64,
    /// γ₂ − r, computed without cancellation.
    g2mr: C64,
    /// e1, slow, fast, e3.
    exps: [C64; 4],
    ap: C64,
    am: C64,
    /// Index 1..=23; 15..=19 left at zero (they depend on `k`).
    f: [C64; 24],
    /// Scattered analytic-signal coefficients on e1, slow, fast.
    field: [C64; 3],
}

#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub params: SystemParams,
    pub readings: Readings,
    pub provenance: Provenance,
    pub s_slow: C64,
    pub s_fast: C64,
    sigma: f64,
    branches: Vec<Branch>,
}

fn check(v: C64, scale: f64, what: &str) -> Result<C64> {
    if !(v.norm() > SINGULAR_TOL * scale) {
        return Err(Error::Singular(format!("{what} vanishes")));
    }
    Ok(v)
}

fn exponents(p: &SystemParams, r: C64) -> (C64, C64, C64) {
    let g2mr = gamma2_minus_root(p.gamma2, p.omega_r, r);
    let slow = -g2mr / 4.0 + I * p.delta;
    let fast = -(p.gamma2 + r) / 4.0 + I * p.delta;
    (g2mr, slow, fast)
}

/// `γ₂ − √(γ₂² − 4ω_R²)` written as `4ω_R²/(γ₂ + √…)`.
fn gamma2_minus_root(gamma2: f64, omega_r: f64, r: C64) -> C64 {
    let den = gamma2 + r;
    if den.norm() == 0.0 {
        C64::default()
    } else {
        4.0 * omega_r * omega_r / den
    }
}

impl Branch {
    fn new(p: &SystemParams, omega_r: f64, rd: &Readings) -> Result<Branch> {
        let (g1, g2, g3, dl) = (p.gamma1, p.gamma2, p.gamma3, p.delta);
        let wr = omega_r;
        let q = SystemParams { omega_r: wr, ..*p };
        let r = branch_sqrt_discriminant(g2, wr);
        let (g2mr, slow, fast) = exponents(&q, r);
        let exps = [C64::from(-g1 / 2.0), slow, fast, C64::from(-g3 / 2.0)];
        let scale = g1 + g2 + g3 + wr + dl.abs();
        let sq = scale * scale;

        let mut f = [C64::default(); 24];
        let mut field = [C64::default(); 3];
        let mut out = Branch { r, g2mr, exps, ap: C64::default(), am: C64::default(), f, field };
        if g1 == 0.0 {
            return Ok(out);
        }
        let s13 = (g1 * g3).sqrt();
        let c30 = if g3 == 0.0 {
            C64::default()
        } else {
            C64::from(s13 / check(C64::from(g1 - g3), scale, "γ₁ − γ₃")?.re)
        };
        if g2 == 0.0 {
            f[8] = c30;
            f[11] = -c30;
            out.f = f;
            return Ok(out);
        }
        let s12 = (g1 * g2).sqrt();
        let wr2 = wr * wr;
        let dl2 = dl * dl;

        let d1 = check(
            C64::new(g1 * g1 - g1 * g2 - 4.0 * dl2 + wr2, 2.0 * dl * (2.0 * g1 - g2)),
            sq,
            "γ₁² − γ₁γ₂ − 4δ² + ω_R² + 2iδ(2γ₁ − γ₂)",
        )?;
        let d1b = C64::new(g1 * g1 - g1 * g2 - 4.0 * dl2 + wr2, dl * (2.0 * g1 - g2));
        let n1 = C64::new(g1 * g1 - 2.0 * g1 * g2 - 4.0 * dl2 + wr2, 4.0 * dl * (g1 - g2));
        let r = check(r, scale, "√(γ₂² − 4ω_R²)")?;
        let ap = check(2.0 * g1 - g2mr + 4.0 * I * dl, scale, "2γ₁ − γ₂ + √… + 4iδ")?;
        let am = check(g2 + r - 2.0 * g1 - 4.0 * I * dl, scale, "−2γ₁ + γ₂ + √… − 4iδ")?;
        let g2pr = g2 + r;

        f[1] = g1 * g2 * C64::new(-g1 * g1 + 4.0 * dl2 + wr2, -4.0 * g1 * dl)
            / match rd.f1 {
                Reading::Corrected => d1 * d1,
                _ => d1,
            };
        f[2] = match rd.f2 {
            Reading::Corrected => g1 * n1 / (2.0 * d1),
            Reading::Alternate => g1 * d1 * n1 / (2.0 * d1),
            Reading::AsPrinted => g1 * d1 * n1 / (2.0 * check(d1b, sq, "printed F2 denominator")?),
        };
        f[3] = -2.0 * g1 * g2 * g2mr / (r * ap * ap);
        f[4] = 2.0 * g1 * g2 * g2pr / (r * am * am);
        f[5] = s12 * C64::new(g1, 2.0 * dl) / d1;
        f[6] = s12 * g2mr / (r * ap);
        f[7] = s12 * g2pr / (r * am);
        f[12] = I * s12 * wr / d1;
        f[13] = I * 2.0 * s12 * wr / (r * ap);
        f[14] = I * 2.0 * s12 * wr / (r * am);

        field[0] = g2 * C64::new(g1, 2.0 * dl) / d1;
        field[1] = g2 * g2mr / (r * ap);
        field[2] = g2 * g2pr / (r * am);
        if rd.field_fast != Reading::Corrected {
            field[2] = -field[2];
        }

        if g3 > 0.0 {
            let bp = check(2.0 * g3 - g2mr + 4.0 * I * dl, scale, "−γ₂ + 2γ₃ + √… + 4iδ")?;
            let bm = check(g2 + r - 2.0 * g3 - 4.0 * I * dl, scale, "γ₂ − 2γ₃ + √… − 4iδ")?;
            let d3 = check(
                C64::new(g3 * g3 - g2 * g3 - 4.0 * dl2 + wr2, 2.0 * dl * (2.0 * g3 - g2)),
                sq,
                "γ₃² − γ₂γ₃ − 4δ² + ω_R² + 2iδ(2γ₃ − γ₂)",
            )?;
            f[8] = 4.0 * s13 * C64::new(g1 * g1 - 4.0 * dl2 + wr2, 4.0 * g1 * dl)
                / ((g3 - g1) * ap * am);
            f[9] = -2.0 * s13 * g2 * g2mr / (r * ap * bp);
            let pre10 = match rd.f10 {
                Reading::Corrected => 2.0 * s13,
                Reading::Alternate => 4.0 * s13,
                Reading::AsPrinted => 2.0 * (2.0 * g1 * g3).sqrt(),
            };
            f[10] = pre10 * g2 * g2pr / (r * am * bm);
            f[11] = -4.0 * s13 * C64::new(g3, 2.0 * dl + wr) * C64::new(g3, 2.0 * dl - wr)
                / ((g3 - g1) * bp * bm);

            f[20] = c30 * g2 * C64::new(g1, 2.0 * dl) / d1;
            let sign21 = if rd.f21 == Reading::Corrected { -1.0 } else { 1.0 };
            f[21] = sign21 * 2.0 * s13 / r * g2 * g2mr / (ap * bp);
            f[22] = 2.0 * s13 / r * g2 * g2pr / (am * bm);
            let sign23 = if rd.f23 == Reading::Corrected { -1.0 } else { 1.0 };
            f[23] = sign23 * c30 * g2 * C64::new(g3, 2.0 * dl) / d3;
        }
        out.ap = ap;
        out.am = am;
        out.f = f;
        out.field = field;
        Ok(out)
    }

    fn e(&self, i: usize, tau: f64) -> C64 {
        (self.exps[i] * tau).exp()
    }

    fn c1_echo(&self, tau: f64) -> C64 {
        let f = &self.f;
        self.e(0, tau) * (f[1] + tau * f[2]) + self.e(1, tau) * f[3] + self.e(2, tau) * f[4]
    }

    fn c2(&self, tau: f64) -> C64 {
        let f = &self.f;
        self.e(0, tau) * f[5] + self.e(1, tau) * f[6] + self.e(2, tau) * f[7]
    }

    fn c3(&self, tau: f64) -> C64 {
        let f = &self.f;
        self.e(0, tau) * f[8] + self.e(1, tau) * f[9] + self.e(2, tau) * f[10] + self.e(3, tau) * f[11]
    }

    fn c3s(&self, tau: f64) -> C64 {
        let f = &self.f;
        self.e(0, tau) * f[20]
            + self.e(1, tau) * f[21]
            + self.e(2, tau) * f[22]
            + self.e(3, tau) * f[23]
    }

    fn d(&self, tau: f64) -> C64 {
        let f = &self.f;
        self.e(0, tau) * f[12] + self.e(1, tau) * f[13] + self.e(2, tau) * f[14]
    }

    fn field_scattered(&self, tau: f64) -> C64 {
        (0..3).map(|i| self.e(i, tau) * self.field[i]).sum()
    }

    /// F15 … F19 for mode `k`.
    fn bk_factors(&self, p: &SystemParams, k: i64) -> Result<[C64; 5]> {
        let (g1, g2, dl) = (p.gamma1, p.gamma2, p.delta);
        let kp = k as f64 * std::f64::consts::PI;
        let scale = g1 + g2 + p.gamma3 + p.omega_r + dl.abs() + kp.abs();
        let mut out = [C64::default(); 5];
        if g1 == 0.0 {
            return Ok(out);
        }
        let den15 = check(C64::new(g1, -2.0 * kp), scale, "γ₁ − 2ikπ")?;
        out[0] = 2.0 * I / den15;
        if g2 == 0.0 {
            return Ok(out);
        }
        let s12 = (g1 * g2).sqrt();
        let (r, ap, am) = (self.r, self.ap, self.am);
        let u = dl + kp;
        // −γ₂ + r + 4iu and γ₂ + r − 4iu
        let pk = check(-self.g2mr + 4.0 * I * u, scale, "−γ₂ + √… + 4i(δ + kπ)")?;
        let mk = check(g2 + r - 4.0 * I * u, scale, "γ₂ + √… − 4i(δ + kπ)")?;
        out[1] = -I * 8.0 * s12 * C64::new(g1, 2.0 * dl) / (den15 * ap * am);
        out[2] = -16.0 * s12 * u / (den15 * pk * mk);
        out[3] = -I * 4.0 * s12 * self.g2mr / (r * pk * ap);
        out[4] = I * 4.0 * s12 * (g2 + r) / (r * mk * am);
        Ok(out)
    }
}

fn check_window(t: f64) -> Result<()> {
    if !(0.0..VALIDITY_LIMIT).contains(&t) {
        return Err(Error::OutOfWindow { t, limit: VALIDITY_LIMIT });
    }
    Ok(())
}

fn step(x: f64) -> bool {
    x >= 0.0
}

impl CoefficientTable {
    pub fn new(params: &SystemParams) -> Result<Self> {
        Self::with_readings(params, Readings::default())
    }

    pub fn with_readings(params: &SystemParams, readings: Readings) -> Result<Self> {
        params.validate()?;
        if !params.has_default_geometry() {
            return Err(Error::Config(
                "closed-form amplitudes exist only for atoms at 0.25, 0.5, 0.75".into(),
            ));
        }
        let degenerate = params.gamma2 > 0.0 && params.discriminant() == Discriminant::Degenerate;
        let (provenance, branches) = if degenerate {
            let mut bs = Vec::with_capacity(2);
            for s in [1.0 + DEGENERATE_OFFSET, 1.0 - DEGENERATE_OFFSET] {
                bs.push(Branch::new(params, params.omega_r * s, &readings)?);
            }
            (Provenance::LimitFormula, bs)
        } else {
            (Provenance::PaperFormula, vec![Branch::new(params, params.omega_r, &readings)?])
        };
        let r = branch_sqrt_discriminant(params.gamma2, params.omega_r);
        let (_, s_slow, s_fast) = exponents(params, r);
        Ok(CoefficientTable {
            params: *params,
            readings,
            provenance,
            s_slow,
            s_fast,
            sigma: params.parity(),
            branches,
        })
    }

    /// `F_i` for `i ∈ 1..=23` except the mode-dependent `15..=19`.
    ///
    /// Individual coefficients are not defined on the degenerate branch.
    pub fn coefficient(&self, i: usize) -> Result<C64> {
        if !(1..=23).contains(&i) || (15..=19).contains(&i) {
            return Err(Error::IndexOutOfRange(format!(
                "F{i} is not a mode-independent coefficient (use bk_coefficients)"
            )));
        }
        self.single()?;
        Ok(self.branches[0].f[i])
    }

    /// F15 … F19 for mode `k`.
    pub fn bk_coefficients(&self, k: i64) -> Result<[C64; 5]> {
        self.single()?;
        self.branches[0].bk_factors(&self.params, k)
    }

    /// Coefficients of `e1`, slow and fast terms in the scattered analytic signal.
    pub fn field_coefficients(&self) -> Result<[C64; 3]> {
        self.single()?;
        Ok(self.branches[0].field)
    }

    fn single(&self) -> Result<()> {
        if self.provenance == Provenance::LimitFormula {
            return Err(Error::Degenerate(
                "individual coefficients diverge; amplitudes use the averaged limit".into(),
            ));
        }
        Ok(())
    }

    /// `[−γ₁/2, s_slow, s_fast, −γ₃/2]`.
    pub fn exponents(&self) -> [C64; 4] {
        [C64::from(-self.params.gamma1 / 2.0), self.s_slow, self.s_fast, C64::from(-self.params.gamma3 / 2.0)]
    }

    fn mean(&self, f: impl Fn(&Branch) -> C64) -> C64 {
        let n = self.branches.len() as f64;
        self.branches.iter().map(f).sum::<C64>() / n
    }

    pub fn amp_c1(&self, t: f64) -> Result<C64> {
        check_window(t)?;
        let direct = C64::from((-self.params.gamma1 * t / 2.0).exp());
        let tau = t - 0.5;
        Ok(if step(tau) { direct + self.mean(|b| b.c1_echo(tau)) } else { direct })
    }

    pub fn amp_c2(&self, t: f64) -> Result<C64> {
        check_window(t)?;
        let tau = t - 0.25;
        Ok(if step(tau) { self.sigma * self.mean(|b| b.c2(tau)) } else { C64::default() })
    }

    pub fn amp_c3(&self, t: f64) -> Result<C64> {
        check_window(t)?;
        let tau = t - 0.5;
        Ok(if step(tau) { self.mean(|b| b.c3(tau)) } else { C64::default() })
    }

    pub fn amp_d(&self, t: f64) -> Result<C64> {
        check_window(t)?;
        let tau = t - 0.25;
        Ok(if step(tau) { self.sigma * self.mean(|b| b.d(tau)) } else { C64::default() })
    }

    /// `[c1, c2, c3, d]` at `t`.
    pub fn atoms(&self, t: f64) -> Result<[C64; 4]> {
        Ok([self.amp_c1(t)?, self.amp_c2(t)?, self.amp_c3(t)?, self.amp_d(t)?])
    }

    /// Photon amplitude in mode `k`.
    ///
    /// Only the direct emission and the first scattering by atom 2 are kept.
    /// Contributions from the detector and from the source's own echo start
    /// at `t = 1/2` and are not part of this expression.
    pub fn amp_bk(&self, t: f64, k: i64) -> Result<C64> {
        check_window(t)?;
        let p = &self.params;
        if k.unsigned_abs() as usize > p.n_modes {
            return Err(Error::IndexOutOfRange(format!("mode {k} outside ±{}", p.n_modes)));
        }
        let g1k = crate::model::coupling_constant(p, 1, k)?;
        let g2k = crate::model::coupling_constant(p, 2, k)?;
        let kp = k as f64 * std::f64::consts::PI;
        let e1 = |tau: f64| C64::from((-p.gamma1 * tau / 2.0).exp());
        let ek = |tau: f64| (-I * kp * tau).exp();
        let mut acc = C64::default();
        for b in &self.branches {
            let f = b.bk_factors(p, k)?;
            let mut v = (e1(t) - ek(t)) * g1k * f[0];
            let tau = t - 0.25;
            if step(tau) && g2k != 0.0 {
                let inner =
                    e1(tau) * f[1] + ek(tau) * f[2] + b.e(1, tau) * f[3] + b.e(2, tau) * f[4];
                v += self.sigma * g2k * inner;
            }
            acc += v;
        }
        Ok(acc / self.branches.len() as f64)
    }

    pub fn c3_scattered(&self, t: f64) -> Result<C64> {
        check_window(t)?;
        let tau = t - 0.5;
        Ok(if step(tau) { self.mean(|b| b.c3s(tau)) } else { C64::default() })
    }

    /// Analytic signal at `z = 3/4` in units of `√(ħω₁/ε₀V)`, detector absent.
    pub fn analytic_signal(&self, t: f64, with_scatterer: bool) -> Result<C64> {
        check_window(t)?;
        let tau = t - 0.5;
        if !step(tau) {
            return Ok(C64::default());
        }
        let g1 = self.params.gamma1;
        let mut bracket = C64::from((-g1 * tau / 2.0).exp());
        if with_scatterer {
            bracket += self.mean(|b| b.field_scattered(tau));
        }
        Ok(-I * (g1 / 2.0).sqrt() * bracket)
    }

    /// `c3⁰` as an exponential sum about `t0 = 1/2`.
    pub fn c3_vacuum_sum(&self) -> ExponentialSum {
        let p = &self.params;
        let c30 = vacuum_prefactor(p);
        ExponentialSum::new(0.5, vec![(C64::from(c30), C64::from(-p.gamma1 / 2.0)), (C64::from(-c30), C64::from(-p.gamma3 / 2.0))])
    }

    /// `c3ˢ` as an exponential sum about `t0 = 1/2`.
    pub fn c3_scattered_sum(&self) -> ExponentialSum {
        let w = 1.0 / self.branches.len() as f64;
        let mut terms = Vec::new();
        for b in &self.branches {
            for (i, fi) in [20, 21, 22, 23].into_iter().enumerate() {
                if b.f[fi] != C64::default() {
                    terms.push((b.f[fi] * w, b.exps[i]));
                }
            }
        }
        ExponentialSum::new(0.5, terms)
    }

    /// Bracketed part of the analytic signal: vacuum term plus optional scattering.
    pub fn field_sum(&self, with_scatterer: bool) -> ExponentialSum {
        let g1 = self.params.gamma1;
        let pre = -I * (g1 / 2.0).sqrt();
        let mut terms = vec![(pre, C64::from(-g1 / 2.0))];
        if with_scatterer {
            terms.extend(self.field_scattered_sum().terms);
        }
        ExponentialSum::new(0.5, terms)
    }

    /// Scattered part of the analytic signal, prefactor included.
    pub fn field_scattered_sum(&self) -> ExponentialSum {
        let g1 = self.params.gamma1;
        let pre = -I * (g1 / 2.0).sqrt();
        let w = 1.0 / self.branches.len() as f64;
        let mut terms = Vec::new();
        for b in &self.branches {
            for i in 0..3 {
                if b.field[i] != C64::default() {
                    terms.push((pre * b.field[i] * w, b.exps[i]));
                }
            }
        }
        ExponentialSum::new(0.5, terms)
    }
}

fn vacuum_prefactor(p: &SystemParams) -> f64 {
    if p.gamma1 == 0.0 || p.gamma3 == 0.0 {
        0.0
    } else {
        (p.gamma1 * p.gamma3).sqrt() / (p.gamma1 - p.gamma3)
    }
}

/// Detector amplitude with no scatterer present.
///
/// Valid for all `t ≥ 0` up to wall echoes. Falls back to the confluent
/// limit when `γ₁ ≈ γ₃`.
pub fn c3_vacuum(params: &SystemParams, t: f64) -> C64 {
    let tau = t - 0.5;
    if !step(tau) {
        return C64::default();
    }
    let (g1, g3) = (params.gamma1, params.gamma3);
    if g1 == 0.0 || g3 == 0.0 {
        return C64::default();
    }
    let v = if (g1 - g3).abs() < 1e-9 * g1.max(g3) {
        let g = 0.5 * (g1 + g3);
        -(g1 * g3).sqrt() * tau / 2.0 * (-g * tau / 2.0).exp()
    } else {
        (g1 * g3).sqrt() / (g1 - g3) * ((-g1 * tau / 2.0).exp() - (-g3 * tau / 2.0).exp())
    };
    C64::from(v)
}
