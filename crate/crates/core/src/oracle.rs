//! Direct integration of the coupled Schrödinger equations.
//!
//! Two engines share one interface:
//!
//! * [`Scheme::IntegratingFactorRk4`] steps the truncated mode grid
//!   `k ∈ [−K, K]`. The free rotation `e^{−ikπt}` of every photon amplitude is
//!   applied exactly (Lawson RK4), so only the couplings are discretised.
//! * [`Scheme::ContinuumDelay`] is the `K → ∞` limit of the same system. The
//!   mode sums collapse onto retarded atomic amplitudes and the equations
//!   become linear delay-differential equations with no finite-`K` ringing.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AmplitudeState, CouplingTable, ModeGrid, SystemParams, C64, MODE_SPACING};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest allowed `step · max(KΔ, γ₃)` for the fixed-step scheme.
pub const MAX_STEP_PRODUCT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    IntegratingFactorRk4,
    ContinuumDelay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Fixed step; `None` picks the scheme default.
    pub step: Option<f64>,
    pub t_end: f64,
    /// Spacing of stored samples; rounded to a whole number of steps.
    pub sample_interval: Option<f64>,
    /// Positions at which the mode sum `Σ_k b_k sin[(k0+k)πz]` is recorded.
    pub probes: Vec<f64>,
}

impl IntegratorConfig {
    pub fn new(t_end: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::IntegratingFactorRk4,
            step: None,
            t_end,
            sample_interval: None,
            probes: Vec::new(),
        }
    }

    pub fn continuum(t_end: f64) -> Self {
        IntegratorConfig { scheme: Scheme::ContinuumDelay, ..Self::new(t_end) }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = Some(h);
        self
    }

    pub fn with_sample_interval(mut self, dt: f64) -> Self {
        self.sample_interval = Some(dt);
        self
    }

    pub fn with_probes(mut self, z: &[f64]) -> Self {
        self.probes = z.to_vec();
        self
    }
}

fn fastest_rate(params: &SystemParams) -> f64 {
    params
        .gamma1
        .max(params.gamma2)
        .max(params.gamma3)
        .max(params.omega_r)
        .max(params.delta.abs())
}

/// Default step of a scheme: `0.1/max(KΔ, γ)` on the mode grid, and at most
/// `1/8000` (a divisor of the quarter-length transit) for the delay scheme.
pub fn default_step(params: &SystemParams, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::IntegratingFactorRk4 => {
            0.1 / (params.n_modes as f64 * MODE_SPACING).max(fastest_rate(params))
        }
        Scheme::ContinuumDelay => {
            let n = (2.5 * fastest_rate(params)).ceil().max(2000.0);
            0.25 / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    C1,
    C2,
    C3,
    D,
}

impl Amplitude {
    pub const ALL: [Amplitude; 4] = [Amplitude::C1, Amplitude::C2, Amplitude::C3, Amplitude::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Amplitude::C1 => "c1",
            Amplitude::C2 => "c2",
            Amplitude::C3 => "c3",
            Amplitude::D => "d",
        }
    }
}

/// Sampled complex observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub step: f64,
    pub t: Vec<f64>,
    /// `[c1, c2, c3, d]` per sample.
    pub atoms: Vec<[C64; 4]>,
    /// Total norm on the mode grid; atomic population only for the delay scheme.
    pub norm: Vec<f64>,
    pub probes: Vec<f64>,
    /// `field[p][i]`: mode sum at probe `p`, sample `i`.
    pub field: Vec<Vec<C64>>,
    /// State at the last sample; `b` is empty for the delay scheme.
    pub final_state: AmplitudeState,
}

impl Trajectory {
    pub fn series(&self, which: Amplitude) -> TimeSeries {
        TimeSeries { t: self.t.clone(), values: self.atoms.iter().map(|a| a[which.index()]).collect() }
    }

    /// `⟨Ê²⟩ = 2|Σ_k b_k sin[(k0+k)πz]|²` in units of `ħω₁/(ε₀V)`.
    pub fn intensity(&self, probe: usize) -> Vec<f64> {
        self.field[probe].iter().map(|s| 2.0 * s.norm_sqr()).collect()
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.norm.iter().fold(0.0f64, |m, n| m.max((n - 1.0).abs()))
    }
}

/// Time derivative of the full state on the mode grid.
pub fn rhs(params: &SystemParams, state: &AmplitudeState) -> Result<AmplitudeState> {
    let grid = ModeGrid::new(params.n_modes);
    if state.b.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: state.b.len() });
    }
    let eng = ModeEngine::new(params, &grid, &[]);
    let mut u = pack(state);
    let mut out = vec![C64::default(); u.len()];
    eng.nonlinear(&u, &mut out);
    // add back the diagonal part handled by the integrating factor
    for (o, (x, l)) in out.iter_mut().zip(u.iter_mut().zip(&eng.lin)) {
        *o += *l * *x;
    }
    Ok(unpack(state.t, &out))
}

fn pack(s: &AmplitudeState) -> Vec<C64> {
    let mut u = Vec::with_capacity(4 + s.b.len());
    u.extend_from_slice(&s.atoms());
    u.extend_from_slice(&s.b);
    u
}

fn unpack(t: f64, u: &[C64]) -> AmplitudeState {
    AmplitudeState { t, c1: u[0], c2: u[1], c3: u[2], d: u[3], b: u[4..].to_vec() }
}

struct ModeEngine {
    g: [Vec<f64>; 3],
    /// Diagonal generator: 0, iδ, 0, iδ, −ikπ…
    lin: Vec<C64>,
    omega_r: f64,
    probe_sines: Vec<Vec<f64>>,
}

impl ModeEngine {
    fn new(params: &SystemParams, grid: &ModeGrid, probes: &[f64]) -> Self {
        let table = CouplingTable::new(params, grid);
        let mut lin = vec![C64::default(), I * params.delta, C64::default(), I * params.delta];
        lin.extend(grid.rotating_frame_freqs.iter().map(|w| -I * *w));
        let probe_sines = probes
            .iter()
            .map(|&z| {
                grid.k_indices.iter().map(|&k| crate::model::mode_sine(params.k0 + k, z)).collect()
            })
            .collect();
        ModeEngine { g: table.g, lin, omega_r: params.omega_r, probe_sines }
    }

    /// Coupling part of the generator.
    fn nonlinear(&self, u: &[C64], out: &mut [C64]) {
        let (c1, c2, c3, d) = (u[0], u[1], u[2], u[3]);
        let b = &u[4..];
        let (g1, g2, g3) = (&self.g[0], &self.g[1], &self.g[2]);
        let mut s = [C64::default(); 3];
        let ob = &mut out[4..];
        for i in 0..b.len() {
            let bi = b[i];
            s[0] += bi * g1[i];
            s[1] += bi * g2[i];
            s[2] += bi * g3[i];
            let drive = c1 * g1[i] + c2 * g2[i] + c3 * g3[i];
            ob[i] = C64::new(drive.im, -drive.re);
        }
        let mi = |z: C64| C64::new(z.im, -z.re);
        out[0] = mi(s[0]);
        out[1] = mi(s[1] + d * (self.omega_r / 2.0));
        out[2] = mi(s[2]);
        out[3] = mi(c2 * (self.omega_r / 2.0));
    }

    fn probe(&self, u: &[C64]) -> Vec<C64> {
        let b = &u[4..];
        self.probe_sines.iter().map(|s| b.iter().zip(s).map(|(x, y)| x * y).sum()).collect()
    }
}

struct Sampling {
    h: f64,
    per_sample: usize,
    n_samples: usize,
}

fn sampling(h_max: f64, config: &IntegratorConfig) -> Result<Sampling> {
    if !(config.t_end.is_finite() && config.t_end > 0.0) {
        return Err(Error::Config(format!("t_end = {} must be positive", config.t_end)));
    }
    let interval = match config.sample_interval {
        Some(dt) if dt.is_finite() && dt > 0.0 => dt,
        Some(dt) => return Err(Error::Config(format!("sample interval {dt} must be positive"))),
        None => h_max.max(1e-3),
    };
    let per_sample = (interval / h_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = interval / per_sample as f64;
    let n_samples = (config.t_end / interval - 1e-9).ceil().max(1.0) as usize;
    Ok(Sampling { h, per_sample, n_samples })
}

fn check_probes(probes: &[f64]) -> Result<()> {
    for &z in probes {
        if !(z > 0.0 && z < 1.0) {
            return Err(Error::Config(format!("probe position {z} must lie in (0, 1)")));
        }
    }
    Ok(())
}

/// Integrate from `initial` to `config.t_end`.
pub fn integrate(params: &SystemParams, config: &IntegratorConfig, initial: &AmplitudeState) -> Result<Trajectory> {
    params.validate()?;
    check_probes(&config.probes)?;
    match config.scheme {
        Scheme::IntegratingFactorRk4 => integrate_modes(params, config, initial),
        Scheme::ContinuumDelay => integrate_continuum(params, config, initial),
    }
}

fn integrate_modes(params: &SystemParams, config: &IntegratorConfig, initial: &AmplitudeState) -> Result<Trajectory> {
    let grid = ModeGrid::new(params.n_modes);
    if initial.b.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: initial.b.len() });
    }
    let stiff = (params.n_modes as f64 * MODE_SPACING).max(params.gamma3);
    let h_max = match config.step {
        Some(h) if h > 0.0 && h * stiff <= MAX_STEP_PRODUCT => h,
        Some(h) => {
            return Err(Error::Config(format!(
                "step {h} gives step·max(KΔ, γ₃) = {:.3} > {MAX_STEP_PRODUCT}",
                h * stiff
            )))
        }
        None => default_step(params, Scheme::IntegratingFactorRk4),
    };
    let sm = sampling(h_max, config)?;
    let h = sm.h;
    let eng = ModeEngine::new(params, &grid, &config.probes);
    let e1: Vec<C64> = eng.lin.iter().map(|l| (l * h).exp()).collect();
    let eh: Vec<C64> = eng.lin.iter().map(|l| (l * (h / 2.0)).exp()).collect();

    let n = 4 + grid.len();
    let mut u = pack(initial);
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n]);
    let mut tmp = vec![C64::default(); n];

    let mut traj = Trajectory {
        scheme: Scheme::IntegratingFactorRk4,
        step: h,
        t: Vec::with_capacity(sm.n_samples + 1),
        atoms: Vec::with_capacity(sm.n_samples + 1),
        norm: Vec::with_capacity(sm.n_samples + 1),
        probes: config.probes.clone(),
        field: vec![Vec::with_capacity(sm.n_samples + 1); config.probes.len()],
        final_state: initial.clone(),
    };
    let t0 = initial.t;
    let record = |traj: &mut Trajectory, t: f64, u: &[C64]| -> Result<()> {
        let norm: f64 = u.iter().map(|x| x.norm_sqr()).sum();
        if !norm.is_finite() {
            return Err(Error::NonFinite(t));
        }
        traj.t.push(t);
        traj.atoms.push([u[0], u[1], u[2], u[3]]);
        traj.norm.push(norm);
        for (p, v) in eng.probe(u).into_iter().enumerate() {
            traj.field[p].push(v);
        }
        Ok(())
    };
    record(&mut traj, t0, &u)?;
    let mut steps = 0usize;
    for s in 1..=sm.n_samples {
        for _ in 0..sm.per_sample {
            eng.nonlinear(&u, &mut k1);
            for i in 0..n {
                tmp[i] = eh[i] * (u[i] + k1[i] * (h / 2.0));
            }
            eng.nonlinear(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = eh[i] * u[i] + k2[i] * (h / 2.0);
            }
            eng.nonlinear(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = e1[i] * u[i] + eh[i] * k3[i] * h;
            }
            eng.nonlinear(&tmp, &mut k4);
            for i in 0..n {
                u[i] = e1[i] * u[i]
                    + (e1[i] * k1[i] + eh[i] * (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
            steps += 1;
        }
        record(&mut traj, t0 + steps as f64 * h, &u)?;
        let _ = s;
    }
    traj.final_state = unpack(t0 + steps as f64 * h, &u);
    Ok(traj)
}

/// One retarded coupling: `ċ_l ∋ −w c_j(t − τ)`.
#[derive(Debug, Clone, Copy)]
struct Delay {
    l: usize,
    j: usize,
    tau: f64,
    w: C64,
}

fn k0_phase(k0: i64, tau: f64) -> C64 {
    let x = PI * ((k0 as f64 * tau).rem_euclid(2.0));
    C64::new(x.cos(), x.sin())
}

/// Retarded images of `z_j` seen from `z`: direct paths carry `+`, paths via
/// one extra wall reflection carry `−`.
fn images(z: f64, zj: f64, t_end: f64, mut push: impl FnMut(f64, f64)) {
    let m_max = t_end.ceil() as i64 + 2;
    for m in -m_max..=m_max {
        for s in [1.0, -1.0] {
            for (x, sign) in [(z - zj, 1.0), (z + zj, -1.0)] {
                let tau = s * x - 2.0 * m as f64;
                if tau > 1e-12 && tau <= t_end + 1e-12 {
                    push(tau, sign);
                }
            }
        }
    }
}

fn merge(mut v: Vec<Delay>) -> Vec<Delay> {
    v.sort_by(|a, b| (a.l, a.j).cmp(&(b.l, b.j)).then(a.tau.total_cmp(&b.tau)));
    let mut out: Vec<Delay> = Vec::with_capacity(v.len());
    for d in v {
        match out.last_mut() {
            Some(p) if p.l == d.l && p.j == d.j && (p.tau - d.tau).abs() < 1e-12 => p.w += d.w,
            _ => out.push(d),
        }
    }
    out.retain(|d| d.w.norm() > 0.0);
    out
}

fn atom_delays(params: &SystemParams, t_end: f64) -> Vec<Delay> {
    let om = params.couplings();
    let mut v = Vec::new();
    for l in 0..3 {
        for j in 0..3 {
            let w0 = om[l] * om[j] / 2.0;
            if w0 == 0.0 {
                continue;
            }
            images(params.z[l], params.z[j], t_end, |tau, sign| {
                v.push(Delay { l, j, tau, w: sign * w0 * k0_phase(params.k0, tau) });
            });
        }
    }
    merge(v)
}

/// Coefficients for the mode sum at `z`: `Σ_k b_k sin[(k0+k)πz] = Σ w c_j(t − τ)`.
fn field_delays(params: &SystemParams, z: f64, t_end: f64) -> Vec<Delay> {
    let om = params.couplings();
    let mut v = Vec::new();
    for j in 0..3 {
        if om[j] == 0.0 {
            continue;
        }
        images(z, params.z[j], t_end, |tau, sign| {
            v.push(Delay { l: 0, j, tau, w: -I * sign * (om[j] / 2.0) * k0_phase(params.k0, tau) });
        });
    }
    merge(v)
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Left,
    Right,
}

struct History {
    h: f64,
    y: Vec<[C64; 4]>,
    /// Right derivative at each node.
    fr: Vec<[C64; 4]>,
    /// Left derivative at each node.
    fl: Vec<[C64; 4]>,
}

impl History {
    /// Component `j` at time `s ≤ current node`, zero before `t = 0`.
    fn at(&self, s: f64, j: usize, side: Side) -> C64 {
        let mut x = s / self.h;
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        if x < 0.0 || (x == 0.0 && side == Side::Left) {
            return C64::default();
        }
        let mut m = x.floor();
        let mut th = x - m;
        if th < 1e-9 {
            th = 0.0;
        } else if th > 1.0 - 1e-9 {
            m += 1.0;
            th = 0.0;
        }
        let m = m as usize;
        if th == 0.0 {
            return self.y[m][j];
        }
        let (t2, t3) = (th * th, th * th * th);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + th;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        self.y[m][j] * h00
            + self.fr[m][j] * (h10 * self.h)
            + self.y[m + 1][j] * h01
            + self.fl[m + 1][j] * (h11 * self.h)
    }
}

struct DelayEngine {
    a: [[C64; 4]; 4],
    delays: Vec<Delay>,
}

impl DelayEngine {
    fn rhs(&self, y: &[C64; 4], t: f64, side: Side, hist: &History) -> [C64; 4] {
        let mut f = [C64::default(); 4];
        for (l, fl) in f.iter_mut().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                *fl += self.a[l][j] * yj;
            }
        }
        for d in &self.delays {
            f[d.l] -= d.w * hist.at(t - d.tau, d.j, side);
        }
        f
    }
}

fn axpy(y: &[C64; 4], a: f64, x: &[C64; 4]) -> [C64; 4] {
    std::array::from_fn(|i| y[i] + x[i] * a)
}

fn integrate_continuum(params: &SystemParams, config: &IntegratorConfig, initial: &AmplitudeState) -> Result<Trajectory> {
    if initial.b.iter().any(|b| b.norm() != 0.0) {
        return Err(Error::Config("the delay scheme starts from an empty field".into()));
    }
    for (p, &z) in config.probes.iter().enumerate() {
        if params.z.iter().zip(params.couplings()).any(|(&zj, om)| om > 0.0 && (zj - z).abs() < 1e-12) {
            return Err(Error::Config(format!("probe {p} sits on an atom")));
        }
    }
    let fastest = fastest_rate(params);
    let h_max = match config.step {
        Some(h) if h > 0.0 && h * fastest <= MAX_STEP_PRODUCT => h,
        Some(h) => return Err(Error::Config(format!("step {h} too large for rate {fastest}"))),
        None => default_step(params, Scheme::ContinuumDelay),
    };
    let sm = sampling(h_max, config)?;
    let h = sm.h;
    let t_end = sm.n_samples as f64 * sm.per_sample as f64 * h;
    let delays = atom_delays(params, t_end);
    if let Some(d) = delays.iter().find(|d| d.tau < h * (1.0 - 1e-9)) {
        return Err(Error::Config(format!("shortest retardation {} is below the step {h}", d.tau)));
    }
    let probes: Vec<Vec<Delay>> = config.probes.iter().map(|&z| field_delays(params, z, t_end)).collect();

    let (g1, g2, g3, dl, wr) = (params.gamma1, params.gamma2, params.gamma3, params.delta, params.omega_r);
    let z = C64::default();
    let a = [
        [C64::from(-g1 / 2.0), z, z, z],
        [z, C64::new(-g2 / 2.0, dl), z, -I * (wr / 2.0)],
        [z, z, C64::from(-g3 / 2.0), z],
        [z, -I * (wr / 2.0), z, I * dl],
    ];
    let eng = DelayEngine { a, delays };
    let n_steps = sm.n_samples * sm.per_sample;
    let mut hist = History {
        h,
        y: Vec::with_capacity(n_steps + 1),
        fr: Vec::with_capacity(n_steps + 1),
        fl: Vec::with_capacity(n_steps + 1),
    };
    hist.y.push(initial.atoms());
    hist.fl.push([C64::default(); 4]);

    let mut traj = Trajectory {
        scheme: Scheme::ContinuumDelay,
        step: h,
        t: Vec::with_capacity(sm.n_samples + 1),
        atoms: Vec::with_capacity(sm.n_samples + 1),
        norm: Vec::with_capacity(sm.n_samples + 1),
        probes: config.probes.clone(),
        field: vec![Vec::with_capacity(sm.n_samples + 1); config.probes.len()],
        final_state: initial.clone(),
    };
    let record = |traj: &mut Trajectory, i: usize, hist: &History| -> Result<()> {
        let t = i as f64 * h;
        let y = hist.y[i];
        let norm: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        if !norm.is_finite() {
            return Err(Error::NonFinite(t));
        }
        traj.t.push(initial.t + t);
        traj.atoms.push(y);
        traj.norm.push(norm);
        for (p, ds) in probes.iter().enumerate() {
            let v: C64 = ds.iter().map(|d| d.w * hist.at(t - d.tau, d.j, Side::Right)).sum();
            traj.field[p].push(v);
        }
        Ok(())
    };
    record(&mut traj, 0, &hist)?;
    for i in 0..n_steps {
        let t = i as f64 * h;
        let y = hist.y[i];
        let k1 = eng.rhs(&y, t, Side::Right, &hist);
        hist.fr.push(k1);
        let k2 = eng.rhs(&axpy(&y, h / 2.0, &k1), t + h / 2.0, Side::Right, &hist);
        let k3 = eng.rhs(&axpy(&y, h / 2.0, &k2), t + h / 2.0, Side::Right, &hist);
        let k4 = eng.rhs(&axpy(&y, h, &k3), t + h, Side::Left, &hist);
        let next: [C64; 4] = std::array::from_fn(|c| y[c] + (k1[c] + (k2[c] + k3[c]) * 2.0 + k4[c]) * (h / 6.0));
        hist.y.push(next);
        let fl = eng.rhs(&next, t + h, Side::Left, &hist);
        hist.fl.push(fl);
        if (i + 1) % sm.per_sample == 0 {
            record(&mut traj, i + 1, &hist)?;
        }
    }
    let last = *hist.y.last().unwrap();
    traj.final_state = AmplitudeState {
        t: initial.t + n_steps as f64 * h,
        c1: last[0],
        c2: last[1],
        c3: last[2],
        d: last[3],
        b: Vec::new(),
    };
    Ok(traj)
}

/// `⟨Ê²⟩ = 2|Σ_k b_k sin[(k0+k)πz]|²`, vacuum term dropped.
pub fn field_intensity(params: &SystemParams, state: &AmplitudeState, z: f64) -> Result<f64> {
    check_probes(&[z])?;
    let grid = ModeGrid::new(params.n_modes);
    if state.b.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: state.b.len() });
    }
    let s: C64 = grid
        .k_indices
        .iter()
        .zip(&state.b)
        .map(|(&k, b)| b * crate::model::mode_sine(params.k0 + k, z))
        .sum();
    Ok(2.0 * s.norm_sqr())
}

/// One basis function `(t − t0)^power · e^{s (t − t0)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub exponent: C64,
    pub power: u32,
}

impl BasisTerm {
    pub fn exp(exponent: C64) -> Self {
        BasisTerm { exponent, power: 0 }
    }

    fn eval(&self, tau: f64) -> C64 {
        (self.exponent * tau).exp() * tau.powi(self.power as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub prefactors: Vec<C64>,
    /// `‖model − data‖₂` over the window samples.
    pub residual: f64,
    /// `‖data‖₂` over the same samples.
    pub data_norm: f64,
    pub samples: usize,
}

impl Fit {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.data_norm
    }
}

/// Linear least squares for `Σ A_i (t−t0)^{n_i} e^{s_i (t − t0)}` on the open window.
pub fn fit_exponent_prefactors(series: &TimeSeries, basis: &[BasisTerm], t0: f64, window: (f64, f64)) -> Result<Fit> {
    if basis.is_empty() {
        return Err(Error::Config("empty basis".into()));
    }
    if !(window.0 < window.1) {
        return Err(Error::Config(format!("window {window:?} is empty")));
    }
    for (i, a) in basis.iter().enumerate() {
        for b in &basis[i + 1..] {
            let scale = a.exponent.norm().max(b.exponent.norm()).max(1.0);
            if a.power == b.power && (a.exponent - b.exponent).norm() <= 1e-8 * scale {
                return Err(Error::IllConditioned(format!(
                    "exponents {} and {} nearly coincide",
                    a.exponent, b.exponent
                )));
            }
        }
    }
    let pts: Vec<(f64, C64)> = series
        .t
        .iter()
        .zip(&series.values)
        .filter(|(t, _)| **t > window.0 && **t < window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    let (m, n) = (pts.len(), basis.len());
    if m < 2 * n {
        return Err(Error::IllConditioned(format!("{m} samples for {n} unknowns")));
    }
    let mut a = DMatrix::<C64>::zeros(m, n);
    let y = DVector::<C64>::from_iterator(m, pts.iter().map(|p| p.1));
    for (r, (t, _)) in pts.iter().enumerate() {
        for (c, b) in basis.iter().enumerate() {
            a[(r, c)] = b.eval(t - t0);
        }
    }
    let norms: Vec<f64> = (0..n).map(|c| a.column(c).norm()).collect();
    if norms.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::IllConditioned("basis function vanishes or overflows on the window".into()));
    }
    let mut scaled = a.clone();
    for c in 0..n {
        scaled.column_mut(c).unscale_mut(norms[c]);
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-13 * smax) {
        return Err(Error::IllConditioned(format!("condition number {:.3e}", smax / smin)));
    }
    let x = svd.solve(&y, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let prefactors: Vec<C64> = (0..n).map(|c| x[c] / norms[c]).collect();
    let resid = &a * DVector::from_column_slice(&prefactors) - &y;
    Ok(Fit { prefactors, residual: resid.norm(), data_norm: y.norm(), samples: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(g1: f64, g2: f64, g3: f64, wr: f64, dl: f64, k: usize) -> SystemParams {
        SystemParams::new(g1, g2, g3, wr, dl).unwrap().with_modes(k).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = small(4.0, 64.0, 1024.0, 16.0, 0.0, 16);
        let z = AmplitudeState::zeros(16);
        let r = rhs(&p, &z).unwrap();
        assert_eq!(r.norm_sqr(), 0.0);

        let s = AmplitudeState::initial(16);
        let r = rhs(&p, &s).unwrap();
        let grid = ModeGrid::new(16);
        for (i, &k) in grid.k_indices.iter().enumerate() {
            let g = crate::model::coupling_constant(&p, 1, k).unwrap();
            assert!((r.b[i] - (-I * g)).norm() < 1e-15);
        }
        assert_eq!(r.atoms(), [C64::default(); 4]);

        let q = small(4.0, 64.0, 1024.0, 0.0, 0.0, 16);
        let mut s = AmplitudeState::zeros(16);
        s.d = C64::from(1.0);
        assert_eq!(rhs(&q, &s).unwrap().norm_sqr(), 0.0);

        let bad = AmplitudeState::zeros(8);
        assert!(matches!(rhs(&p, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn step_guard() {
        let p = small(4.0, 64.0, 1024.0, 16.0, 0.0, 64);
        let cfg = IntegratorConfig::new(0.1).with_step(0.01);
        assert!(matches!(integrate(&p, &cfg, &AmplitudeState::initial(64)), Err(Error::Config(_))));
        let cfg = IntegratorConfig::new(0.1);
        assert!(matches!(integrate(&p, &cfg, &AmplitudeState::initial(32)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn linear_in_initial_state() {
        let p = small(4.0, 64.0, 256.0, 16.0, 3.0, 32);
        let cfg = IntegratorConfig::new(0.3).with_sample_interval(0.05);
        let s = AmplitudeState::initial(32);
        let a = C64::new(0.3, -0.4);
        let x = integrate(&p, &cfg, &s).unwrap();
        let y = integrate(&p, &cfg, &s.scale(a)).unwrap();
        for (u, v) in x.atoms.iter().zip(&y.atoms) {
            for c in 0..4 {
                assert!((u[c] * a - v[c]).norm() <= 1e-12 * (u[c] * a).norm().max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn small_grid_conserves_norm() {
        let p = small(4.0, 64.0, 256.0, 16.0, 3.0, 64);
        let cfg = IntegratorConfig::new(1.0).with_sample_interval(0.01);
        let x = integrate(&p, &cfg, &AmplitudeState::initial(64)).unwrap();
        assert!(x.max_norm_deviation() < 1e-9, "{}", x.max_norm_deviation());
        assert_eq!(x.t.len(), 101);
        assert!((x.t[100] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn continuum_matches_vacuum_law() {
        let p = SystemParams::new(4.0, 0.0, 1024.0, 0.0, 0.0).unwrap();
        let cfg = IntegratorConfig::continuum(0.9).with_sample_interval(0.01).with_probes(&[0.6]);
        let x = integrate(&p, &cfg, &AmplitudeState::initial(p.n_modes)).unwrap();
        for (t, a) in x.t.iter().zip(&x.atoms) {
            if *t < 0.5 {
                assert!((a[0].re - (-2.0 * t).exp()).abs() < 1e-10);
                assert_eq!(a[2], C64::default());
            } else {
                let v = crate::analytic::c3_vacuum(&p, *t);
                assert!((a[2] - v).norm() < 1e-6, "{t}: {} vs {}", a[2], v);
            }
        }
        // field at 0.6 from the source at 0.25 arrives at 0.35
        let i = x.t.iter().position(|t| (t - 0.36).abs() < 1e-9).unwrap();
        let e = x.intensity(0)[i];
        assert!((e - 2.0 * (-4.0 * 0.01f64).exp()).abs() < 1e-8, "{e}");
        assert_eq!(x.intensity(0)[30], 0.0);
    }

    #[test]
    fn delay_table_defaults() {
        let p = SystemParams::reference_case();
        let d = atom_delays(&p, 0.95);
        let min = d.iter().map(|d| d.tau).fold(f64::INFINITY, f64::min);
        assert!((min - 0.25).abs() < 1e-12);
        // self-echo of the source via the nearby wall
        let echo = d.iter().find(|d| d.l == 0 && d.j == 0 && (d.tau - 0.5).abs() < 1e-12).unwrap();
        assert!((echo.w - C64::from(-2.0)).norm() < 1e-12);
    }

    #[test]
    fn synthetic_fit_is_exact() {
        let ex = [C64::new(-2.0, 0.0), C64::new(-20.0, 8.0), C64::new(-300.0, 0.0)];
        let a = [C64::new(1.0, 0.5), C64::new(-0.3, 0.2), C64::new(0.7, -0.1)];
        let t: Vec<f64> = (0..2000).map(|i| 0.5 + i as f64 * 2.5e-4).collect();
        let v = t.iter().map(|&t| (0..3).map(|i| a[i] * (ex[i] * (t - 0.5)).exp()).sum()).collect();
        let s = TimeSeries { t, values: v };
        let basis: Vec<BasisTerm> = ex.iter().map(|&e| BasisTerm::exp(e)).collect();
        let fit = fit_exponent_prefactors(&s, &basis, 0.5, (0.5, 0.95)).unwrap();
        for i in 0..3 {
            assert!((fit.prefactors[i] - a[i]).norm() < 1e-10);
        }
        let one = TimeSeries {
            t: s.t.clone(),
            values: s.t.iter().map(|&t| (ex[0] * (t - 0.5)).exp()).collect(),
        };
        let fit = fit_exponent_prefactors(&one, &basis[..2], 0.5, (0.5, 0.95)).unwrap();
        assert!(fit.prefactors[1].norm() < 1e-10);
        let dup = [BasisTerm::exp(ex[0]), BasisTerm::exp(ex[0] * (1.0 + 1e-12))];
        assert!(matches!(fit_exponent_prefactors(&s, &dup, 0.5, (0.5, 0.95)), Err(Error::IllConditioned(_))));
    }
}
