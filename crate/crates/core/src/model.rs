//! Units, parameter records, the cavity mode grid and coupling constants.
//!
//! Everything is expressed with `L/c = 1` and `ħ = 1`. Times are in units of
//! the cavity transit time; rates and frequencies in units of `c/L`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Fundamental mode spacing `Δ = π c/L`.
pub const MODE_SPACING: f64 = PI;

/// Relative threshold on `|γ₂² − 4ω_R²|` below which the discriminant is
/// treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-9;

pub const DEFAULT_POSITIONS: [f64; 3] = [0.25, 0.5, 0.75];
pub const DEFAULT_MODES: usize = 2048;

/// Smallest multiple of four at or above `1.5 K`.
pub fn default_k0(n_modes: usize) -> i64 {
    4 * ((1.5 * n_modes as f64) / 4.0).ceil() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub omega_r: f64,
    pub delta: f64,
    /// Atom positions as fractions of the cavity length.
    pub z: [f64; 3],
    pub k0: i64,
    /// Half-width `K` of the mode grid, `k ∈ [−K, K]`.
    pub n_modes: usize,
    pub forward_fraction_f: f64,
}

impl SystemParams {
    /// Default geometry and a `K = 2048` grid.
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64, omega_r: f64, delta: f64) -> Result<Self> {
        let p = SystemParams {
            gamma1,
            gamma2,
            gamma3,
            omega_r,
            delta,
            z: DEFAULT_POSITIONS,
            k0: default_k0(DEFAULT_MODES),
            n_modes: DEFAULT_MODES,
            forward_fraction_f: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// γ₁ = 4, γ₂ = 64, γ₃ = 1024, ω_R = 32, δ = 0.
    pub fn reference_case() -> Self {
        Self::new(4.0, 64.0, 1024.0, 32.0, 0.0).expect("valid")
    }

    /// Change `K`; `k0` is reset to its default for the new grid.
    pub fn with_modes(mut self, n_modes: usize) -> Result<Self> {
        self.n_modes = n_modes;
        self.k0 = default_k0(n_modes);
        self.validate()?;
        Ok(self)
    }

    pub fn with_k0(mut self, k0: i64) -> Result<Self> {
        self.k0 = k0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_positions(mut self, z: [f64; 3]) -> Result<Self> {
        self.z = z;
        self.validate()?;
        Ok(self)
    }

    pub fn with_forward_fraction(mut self, f: f64) -> Result<Self> {
        self.forward_fraction_f = f;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rates(mut self, gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        self.gamma1 = gamma1;
        self.gamma2 = gamma2;
        self.gamma3 = gamma3;
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega_r(mut self, omega_r: f64) -> Result<Self> {
        self.omega_r = omega_r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("omega_r", self.omega_r),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("delta must be finite".into()));
        }
        if self.n_modes < 1 {
            return Err(Error::Config("n_modes must be >= 1".into()));
        }
        for (j, &zj) in self.z.iter().enumerate() {
            if !(zj > 0.0 && zj < 1.0) {
                return Err(Error::Config(format!("z{} = {zj} must lie in (0, 1)", j + 1)));
            }
        }
        if self.k0.rem_euclid(4) != 0 {
            return Err(Error::Config(format!("k0 = {} is not divisible by 4", self.k0)));
        }
        if self.k0 <= self.n_modes as i64 {
            return Err(Error::Config(format!(
                "k0 = {} must exceed n_modes = {}",
                self.k0, self.n_modes
            )));
        }
        let f = self.forward_fraction_f;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("forward fraction f = {f} must lie in (0, 1]")));
        }
        Ok(())
    }

    pub fn gammas(&self) -> [f64; 3] {
        [self.gamma1, self.gamma2, self.gamma3]
    }

    /// Coupling amplitudes `Ω_j = √γ_j`.
    pub fn couplings(&self) -> [f64; 3] {
        [self.gamma1.sqrt(), self.gamma2.sqrt(), self.gamma3.sqrt()]
    }

    /// `(−1)^{k0/4}`: the phase picked up over a quarter cavity length.
    pub fn parity(&self) -> f64 {
        if (self.k0 / 4).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn has_default_geometry(&self) -> bool {
        self.z == DEFAULT_POSITIONS
    }

    pub fn discriminant(&self) -> Discriminant {
        classify_discriminant(self.gamma2, self.omega_r)
    }
}

/// `γ = |Ω|²` with `L/c = 1`.
pub fn decay_rate_from_coupling(omega: f64) -> f64 {
    omega * omega
}

/// Principal square root of `γ₂² − 4ω_R²`.
///
/// Every closed-form expression in the crate goes through this function, so
/// the branch is fixed in one place: negative discriminants give `+i√(4ω_R² − γ₂²)`.
pub fn branch_sqrt_discriminant(gamma2: f64, omega_r: f64) -> C64 {
    let disc = gamma2 * gamma2 - 4.0 * omega_r * omega_r;
    if disc >= 0.0 {
        C64::new(disc.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-disc).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discriminant {
    /// Overdamped: real square root, two real decay rates at δ = 0.
    Real,
    /// Underdamped: imaginary square root.
    Imaginary,
    Degenerate,
}

pub fn classify_discriminant(gamma2: f64, omega_r: f64) -> Discriminant {
    let a = gamma2 * gamma2;
    let b = 4.0 * omega_r * omega_r;
    let disc = a - b;
    if disc.abs() <= DEGENERATE_TOL * a.max(b) {
        Discriminant::Degenerate
    } else if disc > 0.0 {
        Discriminant::Real
    } else {
        Discriminant::Imaginary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    pub delta_spacing: f64,
    pub k_indices: Vec<i64>,
    pub rotating_frame_freqs: Vec<f64>,
}

impl ModeGrid {
    pub fn new(n_modes: usize) -> Self {
        let k = n_modes as i64;
        let k_indices: Vec<i64> = (-k..=k).collect();
        let rotating_frame_freqs = k_indices.iter().map(|&k| k as f64 * MODE_SPACING).collect();
        ModeGrid { delta_spacing: MODE_SPACING, k_indices, rotating_frame_freqs }
    }

    pub fn len(&self) -> usize {
        self.k_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_indices.is_empty()
    }

    /// Position of mode `k` in the storage order.
    pub fn index_of(&self, k: i64) -> Option<usize> {
        let half = (self.k_indices.len() / 2) as i64;
        (k.abs() <= half).then(|| (k + half) as usize)
    }
}

/// `sin(n π z)` with the integer part of `n z` removed first, so large mode
/// numbers do not lose phase accuracy.
pub fn mode_sine(n: i64, z: f64) -> f64 {
    (PI * reduced_phase(n, z)).sin()
}

/// `n z mod 2`, computed without forming the large product for dyadic `z`.
pub(crate) fn reduced_phase(n: i64, z: f64) -> f64 {
    let p = (n as f64) * z;
    p - 2.0 * (p / 2.0).floor()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    pub omega: [f64; 3],
    /// `g[j][i]` for atom `j` and mode storage index `i`.
    pub g: [Vec<f64>; 3],
}

impl CouplingTable {
    pub fn new(params: &SystemParams, grid: &ModeGrid) -> Self {
        let omega = params.couplings();
        let g = std::array::from_fn(|j| {
            grid.k_indices
                .iter()
                .map(|&k| omega[j] * mode_sine(params.k0 + k, params.z[j]))
                .collect()
        });
        CouplingTable { omega, g }
    }
}

/// `g_{jk} = Ω_j sin[(k0 + k) π z_j]` for `j ∈ {1, 2, 3}`.
///
/// The coupling is real for standing-wave modes.
pub fn coupling_constant(params: &SystemParams, j: usize, k: i64) -> Result<f64> {
    if !(1..=3).contains(&j) {
        return Err(Error::IndexOutOfRange(format!("atom index {j} not in 1..=3")));
    }
    if k.unsigned_abs() as usize > params.n_modes {
        return Err(Error::IndexOutOfRange(format!(
            "mode index {k} outside [-{0}, {0}]",
            params.n_modes
        )));
    }
    let omega = params.couplings()[j - 1];
    Ok(omega * mode_sine(params.k0 + k, params.z[j - 1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    pub t: f64,
    pub c1: C64,
    pub c2: C64,
    pub c3: C64,
    pub d: C64,
    /// Photon amplitudes in mode storage order (`k = −K … K`).
    pub b: Vec<C64>,
}

impl AmplitudeState {
    /// Source atom excited, everything else empty.
    pub fn initial(n_modes: usize) -> Self {
        AmplitudeState {
            t: 0.0,
            c1: C64::new(1.0, 0.0),
            c2: C64::default(),
            c3: C64::default(),
            d: C64::default(),
            b: vec![C64::default(); 2 * n_modes + 1],
        }
    }

    pub fn zeros(n_modes: usize) -> Self {
        let mut s = Self::initial(n_modes);
        s.c1 = C64::default();
        s
    }

    pub fn atoms(&self) -> [C64; 4] {
        [self.c1, self.c2, self.c3, self.d]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.atoms().iter().map(|c| c.norm_sqr()).sum::<f64>()
            + self.b.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn scale(&self, a: C64) -> Self {
        AmplitudeState {
            t: self.t,
            c1: self.c1 * a,
            c2: self.c2 * a,
            c3: self.c3 * a,
            d: self.d * a,
            b: self.b.iter().map(|b| b * a).collect(),
        }
    }
}
