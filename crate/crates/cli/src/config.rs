//! Experiment plans: TOML files, command-line flags and validation.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use muskat_core::integrator::{Formulation, Scheme, SolverConfig};
use muskat_core::spectral::{MollifierProfile, MollifierSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Kind {
    Single,
    DtSweep,
    DeltaSweep,
    EpsilonSweep,
    CornerFamily,
    DifferencePair,
    EquivalenceCheck,
}

impl Kind {
    fn needs_sweep(self) -> bool {
        !matches!(self, Kind::Single | Kind::EquivalenceCheck)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Preset {
    Flat,
    SingleMode,
    Random,
    Corner,
    ShiftedSnapshot,
}

/// Initial data and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub preset: Preset,
    pub n: usize,
    /// Amplitude of the single-mode and random presets.
    pub amplitude: f64,
    /// Wavenumber of the single-mode preset.
    pub mode: u32,
    /// Highest wavenumber of the random preset.
    pub kmax: usize,
    pub seed: u64,
    pub nu: f64,
    pub corner_eps: f64,
    /// Source of the shifted-snapshot preset.
    pub snapshot: Option<PathBuf>,
    /// Depth of the shift, > 0 (the data is evaluated at Im α' = −depth).
    pub shift_depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: Kind,
    pub base_config: SolverConfig,
    pub sweep_values: Vec<f64>,
    pub initial_data: InitialData,
    pub output_dir: PathBuf,
    /// Write a snapshot file every k steps (0 disables snapshot files).
    pub snapshot_cadence: usize,
}

/// Step size as given in a file: a number or "auto".
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum DtValue {
    Fixed(f64),
    Word(String),
}

/// Raw TOML contents; every key is optional and unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kind: Option<Kind>,
    preset: Option<Preset>,
    n: Option<usize>,
    dt: Option<DtValue>,
    t_end: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    mollifier: Option<MollifierProfile>,
    scheme: Option<Scheme>,
    formulation: Option<Formulation>,
    cfl_safety: Option<f64>,
    nu: Option<f64>,
    corner_eps: Option<f64>,
    amplitude: Option<f64>,
    mode: Option<u32>,
    kmax: Option<usize>,
    seed: Option<u64>,
    snapshot: Option<PathBuf>,
    shift_depth: Option<f64>,
    sweep_values: Option<Vec<f64>>,
    out: Option<PathBuf>,
    snapshot_every: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Rk4,
    Imex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormulationArg {
    G,
    Z,
    Both,
}

/// Simulator and experiment runner for the one-phase Muskat problem.
#[derive(Debug, Default, Parser)]
#[command(name = "muskat", version)]
pub struct Args {
    /// TOML plan; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Time step or "auto".
    #[arg(long)]
    pub dt: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pub formulation: Option<FormulationArg>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub corner_eps: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub mode: Option<u32>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    pub sweep_values: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub const DEFAULT_N: usize = 256;
pub const DEFAULT_OUT: &str = "muskat-out";

fn parse_dt(v: &DtValue) -> Result<Option<f64>, CliError> {
    match v {
        DtValue::Fixed(x) => Ok(Some(*x)),
        DtValue::Word(w) if w == "auto" => Ok(None),
        DtValue::Word(w) => w
            .parse::<f64>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("dt must be a number or \"auto\", got {w:?}"))),
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Builds a validated plan from an optional file and flag overrides.
pub fn parse_config(args: &Args) -> Result<ExperimentPlan, CliError> {
    let file = match &args.config {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    let dt = match &args.dt {
        Some(s) => parse_dt(&DtValue::Word(s.clone()))?,
        None => match &file.dt {
            Some(v) => parse_dt(v)?,
            None => None,
        },
    };
    let scheme = match args.scheme {
        Some(SchemeArg::Rk4) => Scheme::Rk4,
        Some(SchemeArg::Imex) => Scheme::Imex,
        None => file.scheme.unwrap_or_default(),
    };
    let formulation = match args.formulation {
        Some(FormulationArg::G) => Formulation::G,
        Some(FormulationArg::Z) => Formulation::Z,
        Some(FormulationArg::Both) => Formulation::Both,
        None => file.formulation.unwrap_or_default(),
    };
    let delta = args.delta.or(file.delta).unwrap_or(0.0);
    let profile = file.mollifier.unwrap_or_default();
    let mollifier = MollifierSpec::new(delta, profile).map_err(|_| CliError::Config("delta must be finite and >= 0".into()))?;
    let base_config = SolverConfig {
        epsilon: args.epsilon.or(file.epsilon).unwrap_or(0.0),
        mollifier,
        dt,
        t_end: args.t_end.or(file.t_end).unwrap_or(1.0),
        scheme,
        cfl_safety: file.cfl_safety.unwrap_or(0.5),
        formulation,
    };
    let initial_data = InitialData {
        preset: args.preset.or(file.preset).unwrap_or(Preset::Flat),
        n: args.n.or(file.n).unwrap_or(DEFAULT_N),
        amplitude: args.amplitude.or(file.amplitude).unwrap_or(1e-3),
        mode: args.mode.or(file.mode).unwrap_or(1),
        kmax: file.kmax.unwrap_or(6),
        seed: args.seed.or(file.seed).unwrap_or(0),
        nu: args.nu.or(file.nu).unwrap_or(0.4),
        corner_eps: args.corner_eps.or(file.corner_eps).unwrap_or(0.05),
        snapshot: file.snapshot,
        shift_depth: file.shift_depth.unwrap_or(0.05),
    };
    let plan = ExperimentPlan {
        kind: args.kind.or(file.kind).unwrap_or(Kind::Single),
        base_config,
        sweep_values: args.sweep_values.clone().or(file.sweep_values).unwrap_or_default(),
        initial_data,
        output_dir: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        snapshot_cadence: args.snapshot_every.or(file.snapshot_every).unwrap_or(0),
    };
    validate(&plan)?;
    Ok(plan)
}

fn fail<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

pub fn validate(plan: &ExperimentPlan) -> Result<(), CliError> {
    plan.base_config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let d = &plan.initial_data;
    if d.n < 8 || d.n % 2 != 0 {
        return fail("n must be even and at least 8");
    }
    if !(d.nu > 0.0 && d.nu < 1.0) {
        return fail("nu must lie in (0,1)");
    }
    if !(d.corner_eps > 0.0 && d.corner_eps.is_finite()) {
        return fail("corner_eps must be positive");
    }
    if !d.amplitude.is_finite() {
        return fail("amplitude must be finite");
    }
    if d.mode == 0 || d.mode as usize >= d.n / 2 {
        return fail("mode must lie in [1, n/2)");
    }
    if d.kmax == 0 {
        return fail("kmax must be at least 1");
    }
    if d.preset == Preset::ShiftedSnapshot {
        if d.snapshot.is_none() {
            return fail("preset shifted_snapshot needs a snapshot path");
        }
        if !(d.shift_depth > 0.0 && d.shift_depth.is_finite()) {
            return fail("shift_depth must be positive");
        }
    }
    if plan.kind.needs_sweep() && plan.sweep_values.is_empty() {
        return fail(format!("sweep_values must be non-empty for kind {:?}", plan.kind));
    }
    if plan.sweep_values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return fail("sweep_values must be positive and finite");
    }
    if plan.kind == Kind::DifferencePair && plan.sweep_values.len() != 2 {
        return fail("difference_pair needs exactly two sweep_values");
    }
    if plan.kind == Kind::CornerFamily && d.preset != Preset::Corner {
        return fail("corner_family needs preset corner");
    }
    if plan.base_config.formulation != Formulation::G && !(plan.base_config.epsilon == 0.0 && plan.base_config.mollifier.is_identity()) {
        return fail("the z formulation runs only with epsilon = delta = 0");
    }
    Ok(())
}

/// One child run of a sweep: the varied value and its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Child {
    pub label: String,
    pub value: f64,
    pub config: SolverConfig,
    pub initial_data: InitialData,
}

/// Child configurations of a plan. For the δ and ε sweeps the unregularized
/// reference (value 0) comes first.
pub fn children(plan: &ExperimentPlan) -> Vec<Child> {
    let base = &plan.base_config;
    let mk = |label: String, value: f64, config: SolverConfig, initial_data: InitialData| Child {
        label,
        value,
        config,
        initial_data,
    };
    let d = &plan.initial_data;
    match plan.kind {
        Kind::Single => vec![mk("run".into(), 0.0, base.clone(), d.clone())],
        Kind::DtSweep | Kind::EquivalenceCheck => {
            let values = if plan.sweep_values.is_empty() { vec![base.dt.unwrap_or(0.0)] } else { plan.sweep_values.clone() };
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let config = if v > 0.0 { SolverConfig { dt: Some(v), ..base.clone() } } else { base.clone() };
                    mk(format!("dt_{i}"), v, config, d.clone())
                })
                .collect()
        }
        Kind::DeltaSweep => std::iter::once(0.0)
            .chain(plan.sweep_values.iter().copied())
            .enumerate()
            .map(|(i, v)| {
                let mollifier = MollifierSpec { delta: v, ..base.mollifier };
                mk(format!("delta_{i}"), v, SolverConfig { mollifier, ..base.clone() }, d.clone())
            })
            .collect(),
        Kind::EpsilonSweep => std::iter::once(0.0)
            .chain(plan.sweep_values.iter().copied())
            .enumerate()
            .map(|(i, v)| mk(format!("epsilon_{i}"), v, SolverConfig { epsilon: v, ..base.clone() }, d.clone()))
            .collect(),
        Kind::CornerFamily | Kind::DifferencePair => plan
            .sweep_values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let data = if d.preset == Preset::Corner {
                    InitialData { corner_eps: v, ..d.clone() }
                } else {
                    InitialData { amplitude: v, ..d.clone() }
                };
                mk(format!("member_{i}"), v, base.clone(), data)
            })
            .collect(),
    }
}
