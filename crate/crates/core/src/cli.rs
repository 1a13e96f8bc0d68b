//! `lambda-cavity` command-line front end.
//!
//! ```text
//! lambda-cavity <command> [--config FILE] [--out PATH] [--format csv|json]
//!               [--units gamma2|cavity] [param overrides]
//! ```
//!
//! A config file is TOML with a `[params]` table shared by every command and
//! one table per command (`[lineshape]`, `[simulate]`, `[detector]`,
//! `[delay-scan]`, `[field]`). Flags always win over the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{c3_vacuum, CoefficientTable, VALIDITY_LIMIT};
use crate::delays::{delay_c3, delay_c3_closed_form, delay_c3_first_order, limit_extrapolation};
use crate::error::{Error, Result};
use crate::model::{AmplitudeState, SystemParams, C64};
use crate::oracle::{default_step, field_intensity, integrate, IntegratorConfig, Scheme, Trajectory};
use crate::semiclassical::{group_delay_shape, susceptibility_shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// How rates and detunings on the command line are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Multiples of γ₂ (γ₂ itself stays in c/L).
    Gamma2,
    /// Raw c/L.
    #[default]
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Oracle,
    Both,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Oracle => "oracle",
            Engine::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    /// Truncated mode grid, integrating-factor RK4.
    Modes,
    /// Infinite mode grid as a delay-differential system.
    Continuum,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Modes => Scheme::IntegratingFactorRk4,
            SchemeArg::Continuum => Scheme::ContinuumDelay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Parser)]
#[command(name = "lambda-cavity", version, about = "Single-photon EIT in a three-atom multimode cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML file with a [params] table and per-command tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (a directory for `detector`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    #[command(flatten)]
    pub params: ParamOverrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Real and imaginary parts of the susceptibility shape against δ/γ₂.
    Lineshape(LineshapeArgs),
    /// Atomic amplitudes against time.
    Simulate(SimulateArgs),
    /// Detector probability for a set of detunings plus the empty-cavity baseline.
    Detector(DetectorArgs),
    /// Classical and quantum delays across a detuning sweep.
    DelayScan(DelayScanArgs),
    /// Field intensity at z = 3/4 against time, or a snapshot against z.
    Field(FieldArgs),
}

/// Physical parameters; each one overrides the config file.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    #[arg(long, global = true)]
    pub gamma1: Option<f64>,
    #[arg(long, global = true)]
    pub gamma2: Option<f64>,
    #[arg(long, global = true)]
    pub gamma3: Option<f64>,
    #[arg(long, global = true)]
    pub omega_r: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Half-width K of the mode grid.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    #[arg(long, global = true)]
    pub k0: Option<i64>,
    /// Atom positions z1,z2,z3 as fractions of L.
    #[arg(long, global = true, value_delimiter = ',', num_args = 3)]
    pub positions: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub forward_fraction: Option<f64>,
}

impl ParamOverrides {
    fn or(self, base: ParamOverrides) -> ParamOverrides {
        ParamOverrides {
            gamma1: self.gamma1.or(base.gamma1),
            gamma2: self.gamma2.or(base.gamma2),
            gamma3: self.gamma3.or(base.gamma3),
            omega_r: self.omega_r.or(base.omega_r),
            delta: self.delta.or(base.delta),
            modes: self.modes.or(base.modes),
            k0: self.k0.or(base.k0),
            positions: self.positions.or(base.positions),
            forward_fraction: self.forward_fraction.or(base.forward_fraction),
        }
    }

    /// Resolve against `defaults` (already in c/L).
    fn resolve(&self, defaults: SystemParams, units: Units) -> Result<SystemParams> {
        let g2 = self.gamma2.unwrap_or(defaults.gamma2);
        let scale = |v: Option<f64>, d: f64| match (v, units) {
            (Some(x), Units::Gamma2) => x * g2,
            (Some(x), Units::Cavity) => x,
            (None, _) => d,
        };
        let mut p = SystemParams::new(
            scale(self.gamma1, defaults.gamma1),
            g2,
            scale(self.gamma3, defaults.gamma3),
            scale(self.omega_r, defaults.omega_r),
            scale(self.delta, defaults.delta),
        )?;
        if let Some(k) = self.modes {
            p = p.with_modes(k)?;
        }
        if let Some(k0) = self.k0 {
            p = p.with_k0(k0)?;
        }
        if let Some(z) = &self.positions {
            let z: [f64; 3] = z
                .as_slice()
                .try_into()
                .map_err(|_| Error::Config(format!("need three positions, got {}", z.len())))?;
            p = p.with_positions(z)?;
        }
        if let Some(f) = self.forward_fraction {
            p = p.with_forward_fraction(f)?;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineshapeArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub delta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub scale: Option<AxisScale>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Sample spacing.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Integrator step; scheme default when absent.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorArgs {
    /// Detunings (γ₂ units with --units gamma2).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayScanArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub delta_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub scale: Option<AxisScale>,
    /// Decreasing γ₁/γ₂ ratios for the limit extrapolation (γ₃ = γ₂/ratio).
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldArgs {
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Snapshot mode: number of z points on (0, 1).
    #[arg(long)]
    pub z_scan: Option<usize>,
    /// Snapshot time for --z-scan.
    #[arg(long)]
    pub at: Option<f64>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub format: Option<Format>,
    pub units: Option<Units>,
    pub out: Option<PathBuf>,
    pub params: ParamOverrides,
    pub lineshape: LineshapeArgs,
    pub simulate: SimulateArgs,
    pub detector: DetectorArgs,
    #[serde(rename = "delay-scan")]
    pub delay_scan: DelayScanArgs,
    pub field: FieldArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

macro_rules! merge_args {
    ($a:expr, $b:expr, $ty:ident { $($f:ident),* }) => {
        $ty { $($f: $a.$f.clone().or($b.$f.clone())),* }
    };
}

/// One swept axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: AxisScale,
}

impl SweepAxis {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::Config(format!("sweep over {} needs at least 2 points, got {}", self.name, self.count)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Config(format!("sweep over {} has empty range [{}, {}]", self.name, self.min, self.max)));
        }
        let n = (self.count - 1) as f64;
        match self.scale {
            AxisScale::Linear => Ok((0..self.count).map(|i| self.min + (self.max - self.min) * i as f64 / n).collect()),
            AxisScale::Log => {
                if self.min <= 0.0 {
                    return Err(Error::Config(format!("log sweep over {} needs min > 0", self.name)));
                }
                let (a, b) = (self.min.ln(), self.max.ln());
                Ok((0..self.count).map(|i| (a + (b - a) * i as f64 / n).exp()).collect())
            }
        }
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub params: SystemParams,
    pub units: Units,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub sweep: Option<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

/// Header lines, column names and rows of one output file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(meta: Vec<(String, String)>, columns: &[&str]) -> Self {
        Table { meta, columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x:.16e}"),
                    Cell::Text(t) => t.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        use serde_json::{Map, Value};
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|c| match c {
                            Cell::Num(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
                            Cell::Text(t) => Value::String(t.clone()),
                            Cell::Empty => Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = serde_json::json!({ "meta": meta, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("json value serialises");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// A rendered table and where it goes (`None`: stdout).
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
    pub table: Table,
}

fn param_meta(cfg: &RunConfig) -> Vec<(String, String)> {
    let p = &cfg.params;
    let mut m = vec![
        ("lambda-cavity".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("command".to_string(), cfg.command.to_string()),
        ("units".to_string(), format!("{:?}", cfg.units).to_lowercase()),
    ];
    let kv = [
        ("gamma1", format!("{:e}", p.gamma1)),
        ("gamma2", format!("{:e}", p.gamma2)),
        ("gamma3", format!("{:e}", p.gamma3)),
        ("omega_r", format!("{:e}", p.omega_r)),
        ("delta", format!("{:e}", p.delta)),
        ("z", format!("{},{},{}", p.z[0], p.z[1], p.z[2])),
        ("k0", p.k0.to_string()),
        ("K", p.n_modes.to_string()),
        ("forward_fraction_f", format!("{:e}", p.forward_fraction_f)),
    ];
    m.extend(kv.into_iter().map(|(k, v)| (k.to_string(), v)));
    if let Some(ax) = &cfg.sweep {
        m.push((
            "sweep".to_string(),
            format!("{} {:?} [{}, {}] x {}", ax.name, ax.scale, ax.min, ax.max, ax.count).to_lowercase(),
        ));
    }
    m
}

fn push_meta(m: &mut Vec<(String, String)>, k: &str, v: impl ToString) {
    m.push((k.to_string(), v.to_string()));
}

fn user_scale(units: Units, gamma2: f64) -> f64 {
    match units {
        Units::Gamma2 => gamma2,
        Units::Cavity => 1.0,
    }
}

/// Parse, run and write; returns the process exit code.
pub fn main_from_env() -> i32 {
    let cli = Cli::parse();
    match run(cli).and_then(|outs| write_outputs(&outs)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lambda-cavity: {e}");
            e.exit_code()
        }
    }
}

fn write_outputs(outs: &[Output]) -> Result<()> {
    use std::io::Write;
    for o in outs {
        let text = o.table.render(o.format);
        match &o.path {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
    }
    Ok(())
}

/// Resolve flags against the config file and run the command.
pub fn run(cli: Cli) -> Result<Vec<Output>> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let units = cli.units.or(file.units).unwrap_or_default();
    let format = cli.format.or(file.format).unwrap_or_default();
    let out = cli.out.clone().or(file.out.clone());
    let overrides = cli.params.clone().or(file.params.clone());
    let base = |defaults: SystemParams, command: &'static str| -> Result<RunConfig> {
        Ok(RunConfig { command, params: overrides.resolve(defaults, units)?, units, format, out: out.clone(), sweep: None })
    };
    let reference = SystemParams::reference_case();
    let mut outs = match cli.command {
        Command::Lineshape(a) => {
            let a = merge_args!(a, file.lineshape, LineshapeArgs { delta_min, delta_max, count, scale });
            cmd_lineshape(&base(reference, "lineshape")?, &a)?
        }
        Command::Simulate(a) => {
            let a = merge_args!(a, file.simulate, SimulateArgs { engine, scheme, t_end, dt, step });
            cmd_simulate(&base(reference, "simulate")?, &a)?
        }
        Command::Detector(a) => {
            let a = merge_args!(a, file.detector, DetectorArgs { deltas, t_end, dt });
            cmd_detector(&base(reference, "detector")?, &a)?
        }
        Command::DelayScan(a) => {
            let a = merge_args!(a, file.delay_scan, DelayScanArgs { delta_min, delta_max, count, scale, ratios });
            cmd_delay_scan(&base(reference, "delay-scan")?, &a)?
        }
        Command::Field(a) => {
            let a = merge_args!(a, file.field, FieldArgs { engine, scheme, t_end, dt, step, z_scan, at });
            let defaults = reference.with_rates(reference.gamma1, reference.gamma2, 0.0)?;
            cmd_field(&base(defaults, "field")?, &a)?
        }
    };
    for o in &mut outs {
        o.format = format;
    }
    Ok(outs)
}

/// `delta_over_gamma, re_chi_shape, im_chi_shape`; γ is γ₂.
pub fn cmd_lineshape(cfg: &RunConfig, a: &LineshapeArgs) -> Result<Vec<Output>> {
    let p = &cfg.params;
    if p.gamma2 <= 0.0 {
        return Err(Error::Config("lineshape needs gamma2 > 0".into()));
    }
    let axis = SweepAxis {
        name: "delta_over_gamma".into(),
        min: a.delta_min.unwrap_or(-1.0),
        max: a.delta_max.unwrap_or(1.0),
        count: a.count.unwrap_or(401),
        scale: a.scale.unwrap_or_default(),
    };
    let xs = axis.values()?;
    let cfg = RunConfig { sweep: Some(axis), ..cfg.clone() };
    let rows = xs
        .par_iter()
        .map(|&x| {
            let chi = susceptibility_shape(x * p.gamma2, p.gamma2, p.omega_r)?;
            Ok(vec![Cell::Num(x), Cell::Num(chi.re), Cell::Num(chi.im)])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(param_meta(&cfg), &["delta_over_gamma", "re_chi_shape", "im_chi_shape"]);
    t.rows = rows;
    Ok(vec![Output { format: Format::Csv, path: cfg.out.clone(), table: t }])
}

fn sample_times(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Config(format!("t_end = {t_end} must be positive")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt = {dt} must be positive")));
    }
    let n = (t_end / dt - 1e-9).ceil() as usize;
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

fn run_oracle(p: &SystemParams, scheme: Scheme, t_end: f64, dt: f64, step: Option<f64>, probes: &[f64]) -> Result<Trajectory> {
    let mut ic = IntegratorConfig { scheme, step, t_end, sample_interval: Some(dt), probes: probes.to_vec() };
    if ic.step.is_none() {
        ic.step = Some(default_step(p, scheme).min(dt));
    }
    integrate(p, &ic, &AmplitudeState::initial(p.n_modes))
}

fn oracle_meta(m: &mut Vec<(String, String)>, traj: &Trajectory) {
    let scheme = match traj.scheme {
        Scheme::IntegratingFactorRk4 => "modes",
        Scheme::ContinuumDelay => "continuum",
    };
    push_meta(m, "scheme", scheme);
    push_meta(m, "step", format!("{:e}", traj.step));
}

/// `t, abs_c1, abs_c2, abs_c3, abs_d, norm, engine[, deviation]`.
pub fn cmd_simulate(cfg: &RunConfig, a: &SimulateArgs) -> Result<Vec<Output>> {
    let p = &cfg.params;
    let engine = a.engine.unwrap_or(Engine::Oracle);
    let t_end = a.t_end.unwrap_or(0.95);
    let dt = a.dt.unwrap_or(1e-3);
    let times = sample_times(t_end, dt)?;
    let table = match engine {
        Engine::Oracle => None,
        _ => Some(CoefficientTable::new(p)?),
    };
    if engine == Engine::Analytic && t_end >= VALIDITY_LIMIT {
        return Err(Error::OutOfWindow { t: t_end, limit: VALIDITY_LIMIT });
    }
    let mut meta = param_meta(cfg);
    push_meta(&mut meta, "engine", engine.name());
    let mut columns = vec!["t", "abs_c1", "abs_c2", "abs_c3", "abs_d", "norm", "engine"];
    let mut rows = Vec::with_capacity(times.len());
    match engine {
        Engine::Analytic => {
            push_meta(&mut meta, "norm", "atomic population |c1|^2+|c2|^2+|c3|^2+|d|^2");
            let table = table.as_ref().unwrap();
            for &t in &times {
                let v = table.atoms(t)?;
                let pop: f64 = v.iter().map(|c| c.norm_sqr()).sum();
                let mut row = vec![Cell::Num(t)];
                row.extend(v.iter().map(|c| Cell::Num(c.norm())));
                row.extend([Cell::Num(pop), Cell::Text("analytic".into())]);
                rows.push(row);
            }
        }
        Engine::Oracle | Engine::Both => {
            let traj = run_oracle(p, a.scheme.unwrap_or(SchemeArg::Modes).into(), t_end, dt, a.step, &[])?;
            oracle_meta(&mut meta, &traj);
            if traj.scheme == Scheme::ContinuumDelay {
                push_meta(&mut meta, "norm", "atomic population only");
            }
            if engine == Engine::Both {
                columns.push("deviation");
                push_meta(&mut meta, "deviation", "max over c1,c2,c3,d of ||oracle|-|analytic||; empty for t >= 1");
            }
            for (i, &t) in traj.t.iter().enumerate() {
                let v = traj.atoms[i];
                let mut row = vec![Cell::Num(t)];
                row.extend(v.iter().map(|c| Cell::Num(c.norm())));
                row.extend([Cell::Num(traj.norm[i]), Cell::Text(engine.name().into())]);
                if engine == Engine::Both {
                    if t < VALIDITY_LIMIT {
                        let e = table.as_ref().unwrap().atoms(t)?;
                        let dev = (0..4).map(|j| (v[j].norm() - e[j].norm()).abs()).fold(0.0, f64::max);
                        row.push(Cell::Num(dev));
                    } else {
                        row.push(Cell::Empty);
                    }
                }
                rows.push(row);
            }
        }
    }
    let mut t = Table::new(meta, &columns);
    t.rows = rows;
    Ok(vec![Output { format: Format::Csv, path: cfg.out.clone(), table: t }])
}

/// `t, prob_c3, prob_c3_vacuum` per detuning plus a baseline file; `--out` is a directory.
pub fn cmd_detector(cfg: &RunConfig, a: &DetectorArgs) -> Result<Vec<Output>> {
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("detector writes one file per detuning; pass --out DIR".into()))?;
    std::fs::create_dir_all(&dir)?;
    let p = &cfg.params;
    let scale = user_scale(cfg.units, p.gamma2);
    let deltas: Vec<f64> = match &a.deltas {
        Some(d) if d.is_empty() => return Err(Error::Config("empty detuning list".into())),
        Some(d) => d.iter().map(|x| x * scale).collect(),
        None => [0.0, 0.25, 0.5, 1.0].iter().map(|x| x * p.gamma2).collect(),
    };
    let t_end = a.t_end.unwrap_or(0.95);
    if t_end >= VALIDITY_LIMIT {
        return Err(Error::OutOfWindow { t: t_end, limit: VALIDITY_LIMIT });
    }
    let times = sample_times(t_end, a.dt.unwrap_or(2e-4))?;
    let f = p.forward_fraction_f;
    let ext = cfg.format.extension();

    let mut outs = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &dl)| {
            let q = p.with_delta(dl)?;
            let table = CoefficientTable::new(&q)?;
            let rep = delay_c3(&table, f)?;
            let mut meta = param_meta(&RunConfig { params: q, ..cfg.clone() });
            push_meta(&mut meta, "engine", "analytic");
            push_meta(&mut meta, "panel", format!("delta = {:e}", dl / scale));
            push_meta(&mut meta, "arrival_with", format!("{:e}", rep.arrival_with));
            push_meta(&mut meta, "arrival_without", format!("{:e}", rep.arrival_without));
            push_meta(&mut meta, "delay", format!("{:e}", rep.delay));
            let mut t = Table::new(meta, &["t", "prob_c3", "prob_c3_vacuum"]);
            for &s in &times {
                let v = c3_vacuum(&q, s);
                let c3 = v + table.c3_scattered(s)? * f;
                t.rows.push(vec![Cell::Num(s), Cell::Num(c3.norm_sqr()), Cell::Num(v.norm_sqr())]);
            }
            Ok(Output { format: Format::Csv, path: Some(dir.join(format!("detector_delta_{i}.{ext}"))), table: t })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut meta = param_meta(cfg);
    push_meta(&mut meta, "engine", "analytic");
    push_meta(&mut meta, "panel", "baseline (no scatterer)");
    let mut t = Table::new(meta, &["t", "prob_c3", "prob_c3_vacuum"]);
    for &s in &times {
        let v = c3_vacuum(p, s).norm_sqr();
        t.rows.push(vec![Cell::Num(s), Cell::Num(v), Cell::Num(v)]);
    }
    outs.push(Output { format: Format::Csv, path: Some(dir.join(format!("detector_baseline.{ext}"))), table: t });
    Ok(outs)
}

/// Default γ₁/γ₂ ratios of the limit extrapolation.
pub const DEFAULT_RATIOS: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// `delta, classical_shape, quantum_closed_form, quantum_extrapolated, ratio, status`.
///
/// `ratio` is the extrapolated quantum delay over the classical group delay
/// `2ξγ₂·shape` with `ξ = f`.
pub fn cmd_delay_scan(cfg: &RunConfig, a: &DelayScanArgs) -> Result<Vec<Output>> {
    let p = &cfg.params;
    if p.gamma2 <= 0.0 || p.omega_r <= 0.0 {
        return Err(Error::Config("delay-scan needs gamma2 > 0 and omega_r > 0".into()));
    }
    let scale = user_scale(cfg.units, p.gamma2);
    let axis = SweepAxis {
        name: "delta".into(),
        min: a.delta_min.unwrap_or(-p.gamma2 / scale),
        max: a.delta_max.unwrap_or(p.gamma2 / scale),
        count: a.count.unwrap_or(20),
        scale: a.scale.unwrap_or_default(),
    };
    let xs = axis.values()?;
    let ratios = a.ratios.clone().unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
    let f = p.forward_fraction_f;
    let (g2, wr) = (p.gamma2, p.omega_r);
    let cfg = RunConfig { sweep: Some(axis), ..cfg.clone() };

    let eval = |dl: f64| -> Result<[f64; 4]> {
        let shape = group_delay_shape(g2, wr, dl)?;
        let closed = delay_c3_closed_form(g2, wr, dl, f)?;
        let q = p.with_delta(dl)?;
        let ex = limit_extrapolation(
            |pp, ff| Ok(delay_c3_first_order(&CoefficientTable::new(pp)?, ff)?.delay),
            &q,
            f,
            &ratios,
        )?;
        let ratio = ex.value / (2.0 * f * g2 * shape);
        Ok([shape, closed, ex.value, ratio])
    };
    let rows: Vec<Vec<Cell>> = xs
        .par_iter()
        .map(|&x| {
            let dl = x * scale;
            let (res, status) = match eval(dl) {
                Err(Error::Singular(_)) | Err(Error::Degenerate(_)) => match eval(dl + 1e-9 * g2) {
                    Ok(v) => (Some(v), "perturbed".to_string()),
                    Err(e) => (None, status_of(&e)),
                },
                Ok(v) => (Some(v), "ok".to_string()),
                Err(e) => (None, status_of(&e)),
            };
            let mut row = vec![Cell::Num(x)];
            match res {
                Some(v) => row.extend(v.iter().map(|&y| Cell::Num(y))),
                None => row.extend((0..4).map(|_| Cell::Empty)),
            }
            row.push(Cell::Text(status));
            row
        })
        .collect();
    let mut meta = param_meta(&cfg);
    push_meta(&mut meta, "engine", "analytic");
    push_meta(&mut meta, "ratios", format!("{ratios:?}"));
    let mut t = Table::new(
        meta,
        &["delta", "classical_shape", "quantum_closed_form", "quantum_extrapolated", "ratio", "status"],
    );
    t.rows = rows;
    Ok(vec![Output { format: Format::Csv, path: cfg.out.clone(), table: t }])
}

fn status_of(e: &Error) -> String {
    match e {
        Error::Singular(_) => "singular".into(),
        Error::Degenerate(_) => "degenerate".into(),
        Error::NonConvergent(_) => "non-convergent".into(),
        Error::Divergent(_) => "divergent".into(),
        other => format!("error: {other}").replace(',', ";"),
    }
}

/// Probe position of the field command's time-series mode.
pub const FIELD_PROBE: f64 = 0.75;

/// `t, intensity_field_units, engine`, or `z, intensity_field_units, engine` with `--z-scan`.
pub fn cmd_field(cfg: &RunConfig, a: &FieldArgs) -> Result<Vec<Output>> {
    let p = &cfg.params;
    if p.gamma3 != 0.0 {
        return Err(Error::Config("field runs with the detector atom removed (gamma3 = 0)".into()));
    }
    let engine = a.engine.unwrap_or(Engine::Analytic);
    let scheme: Scheme = a.scheme.unwrap_or(SchemeArg::Modes).into();
    let mut meta = param_meta(cfg);
    push_meta(&mut meta, "engine", engine.name());

    if let Some(n) = a.z_scan {
        if n < 2 {
            return Err(Error::Config("z-scan needs at least 2 points".into()));
        }
        if engine != Engine::Oracle {
            return Err(Error::Config("z-scan is only available with --engine oracle".into()));
        }
        let at = a.at.ok_or_else(|| Error::Config("z-scan needs --at T".into()))?;
        let zs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        push_meta(&mut meta, "t", format!("{at:e}"));
        let mut t = Table::new(meta, &["z", "intensity_field_units", "engine"]);
        let vals: Vec<f64> = match scheme {
            Scheme::IntegratingFactorRk4 => {
                let traj = run_oracle(p, scheme, at, at, a.step, &[])?;
                oracle_meta(&mut t.meta, &traj);
                zs.iter().map(|&z| field_intensity(p, &traj.final_state, z)).collect::<Result<_>>()?
            }
            Scheme::ContinuumDelay => {
                let traj = run_oracle(p, scheme, at, at, a.step, &zs)?;
                oracle_meta(&mut t.meta, &traj);
                (0..n).map(|i| *traj.intensity(i).last().unwrap()).collect()
            }
        };
        for (z, v) in zs.iter().zip(vals) {
            t.rows.push(vec![Cell::Num(*z), Cell::Num(v), Cell::Text("oracle".into())]);
        }
        return Ok(vec![Output { format: Format::Csv, path: cfg.out.clone(), table: t }]);
    }

    let t_end = a.t_end.unwrap_or(0.95);
    let dt = a.dt.unwrap_or(1e-3);
    let times = sample_times(t_end, dt)?;
    let mut rows = Vec::new();
    if engine != Engine::Oracle {
        if t_end >= VALIDITY_LIMIT {
            return Err(Error::OutOfWindow { t: t_end, limit: VALIDITY_LIMIT });
        }
        if !p.has_default_geometry() {
            return Err(Error::Config("the analytic field needs the default atom positions".into()));
        }
        let table = CoefficientTable::new(p)?;
        for &s in &times {
            let e: C64 = table.analytic_signal(s, true)?;
            rows.push(vec![Cell::Num(s), Cell::Num(e.norm_sqr()), Cell::Text("analytic".into())]);
        }
    }
    if engine != Engine::Analytic {
        let traj = run_oracle(p, scheme, t_end, dt, a.step, &[FIELD_PROBE])?;
        oracle_meta(&mut meta, &traj);
        for (s, v) in traj.t.iter().zip(traj.intensity(0)) {
            rows.push(vec![Cell::Num(*s), Cell::Num(v), Cell::Text("oracle".into())]);
        }
    }
    push_meta(&mut meta, "z", FIELD_PROBE);
    let mut t = Table::new(meta, &["t", "intensity_field_units", "engine"]);
    t.rows = rows;
    Ok(vec![Output { format: Format::Csv, path: cfg.out.clone(), table: t }])
}
