//! Time stepping for both formulations, the driver loop, and the particle flow.
//!
//! Both schemes are four-stage Lawson (integrating-factor) Runge–Kutta methods
//! u' = Lu + N(u) with a diagonal Fourier symbol L:
//!
//! - `Rk4`: L = 0, i.e. the classical explicit RK4 on the full right-hand side.
//! - `Imex`: L = εΔ − μ|∂| with μ the spatial mean of c² at the start of the
//!   step; the stiff constant-coefficient part is integrated exactly and the
//!   remainder explicitly.
//!
//! Every stage is projected: real fields lose their unpaired Nyquist mode, and
//! the complex-form fields are projected onto k ≤ 0, since the anti-holomorphic
//! modes are exponentially unstable under −ic²∂.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsError, DiagnosticsRecord};
use crate::model::{
    b1_spectral, b_from_c_squared, g_nonlinearity, GFormState, ModelError, State, ZFormState,
};
use crate::snapshot::{self, SnapshotError};
use crate::spectral::{
    abs_d, derivative, i_hilbert, mollify, norm_hs, second_derivative, MollifierSpec, SpectralField, C64,
};

/// Largest number of dt halvings before a step is declared failed.
pub const MAX_HALVINGS: u32 = 10;
/// Discrete H² threshold of the blow-up monitor.
pub const BLOWUP_H2: f64 = 1e6;
/// Smallest |Z_{,α'}| tolerated by the complex-form stepper.
pub const MIN_ZAP_STEP: f64 = 1e-6;
/// Largest relative growth of max|g| (or max|1/Z_{,α'}|) in one step.
pub const MAX_GROWTH: f64 = 1.1;

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("step rejected at t = {time} after {halvings} halvings: {reason}")]
    StepRejected { time: f64, halvings: u32, reason: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("particle flow lost monotonicity at t = {time} between seeds {index} and {next}")]
    NonMonotoneFlow { time: f64, index: usize, next: usize },
    #[error("trajectory cannot be replayed: {0}")]
    Replay(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
    Imex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    #[default]
    G,
    Z,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Artificial viscosity (coefficient of Δ).
    pub epsilon: f64,
    pub mollifier: MollifierSpec,
    /// Fixed step; `None` selects the CFL heuristic.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub cfl_safety: f64,
    pub formulation: Formulation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 0.0,
            mollifier: MollifierSpec::default(),
            dt: None,
            t_end: 1.0,
            scheme: Scheme::Rk4,
            cfl_safety: 0.5,
            formulation: Formulation::G,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::InvalidConfig(m.to_string()));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be finite and >= 0");
        }
        if !(self.mollifier.delta >= 0.0 && self.mollifier.delta.is_finite()) {
            return bad("delta must be finite and >= 0");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt must be positive and finite");
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and >= 0");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl_safety must lie in (0,1]");
        }
        Ok(())
    }

    /// Formal order of both schemes.
    pub fn order(&self) -> u32 {
        4
    }

    fn is_unmollified(&self) -> bool {
        self.epsilon == 0.0 && self.mollifier.is_identity()
    }
}

/// Vector-space operations needed by the stage combinations.
trait StageVector: Clone {
    fn axpy(&self, a: f64, x: &Self) -> Self;
    /// e^{Lτ} applied to the part of the state that carries the linear operator.
    fn propagate(&self, symbol: &dyn Fn(i64) -> f64, tau: f64) -> Self;
    fn project(&self) -> Self;
}

impl StageVector for SpectralField {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        SpectralField::axpy(self, C64::new(a, 0.0), x)
    }

    fn propagate(&self, symbol: &dyn Fn(i64) -> f64, tau: f64) -> Self {
        self.apply_symbol(|k| C64::new((symbol(k) * tau).exp(), 0.0), true)
    }

    fn project(&self) -> Self {
        self.without_nyquist()
    }
}

/// (1/Z_{,α'}, Z − α').
#[derive(Clone, Debug)]
struct ZPair {
    u: SpectralField,
    w: SpectralField,
}

impl StageVector for ZPair {
    fn axpy(&self, a: f64, x: &Self) -> Self {
        let a = C64::new(a, 0.0);
        ZPair { u: self.u.axpy(a, &x.u), w: self.w.axpy(a, &x.w) }
    }

    fn propagate(&self, symbol: &dyn Fn(i64) -> f64, tau: f64) -> Self {
        ZPair { u: self.u.propagate(symbol, tau), w: self.w.clone() }
    }

    fn project(&self) -> Self {
        ZPair { u: self.u.holomorphic_part(), w: self.w.holomorphic_part() }
    }
}

/// One Lawson RK4 step. Returns the new value and the four stage values
/// (at times t, t + h/2, t + h/2, t + h).
fn lawson_rk4<T: StageVector>(
    y0: &T,
    h: f64,
    symbol: Option<&dyn Fn(i64) -> f64>,
    rhs: &dyn Fn(&T) -> T,
) -> (T, [T; 4]) {
    let prop = |y: &T, tau: f64| match symbol {
        Some(s) => y.propagate(s, tau),
        None => y.clone(),
    };
    let k1 = rhs(y0);
    let y2 = prop(&y0.axpy(0.5 * h, &k1), 0.5 * h).project();
    let k2 = rhs(&y2);
    let e_y0 = prop(y0, 0.5 * h);
    let y3 = e_y0.axpy(0.5 * h, &k2).project();
    let k3 = rhs(&y3);
    let e2_y0 = prop(y0, h);
    let y4 = e2_y0.axpy(h, &prop(&k3, 0.5 * h)).project();
    let k4 = rhs(&y4);
    let mid = prop(&k2.axpy(1.0, &k3), 0.5 * h);
    let y1 = e2_y0
        .axpy(h / 6.0, &prop(&k1, h))
        .axpy(h / 3.0, &mid)
        .axpy(h / 6.0, &k4)
        .project();
    (y1, [y0.clone(), y2, y3, y4])
}

fn mean_c_squared_g(g: &SpectralField) -> f64 {
    c_squared_of_g(g).mean().re
}

fn c_squared_of_g(g: &SpectralField) -> SpectralField {
    i_hilbert(g).map_dealiased(|v| C64::new((-2.0 * v.re).exp(), 0.0), true)
}

/// Raw g step without acceptance checks; returns stage values.
fn raw_step_g(g: &SpectralField, cfg: &SolverConfig, h: f64) -> (SpectralField, [SpectralField; 4]) {
    let eps = cfg.epsilon;
    let moll = cfg.mollifier;
    match cfg.scheme {
        Scheme::Rk4 => {
            let rhs = move |y: &SpectralField| {
                let n = mollify(&g_nonlinearity(y), &moll);
                if eps > 0.0 {
                    n.axpy(C64::new(eps, 0.0), &second_derivative(y))
                } else {
                    n
                }
            };
            lawson_rk4(g, h, None, &rhs)
        }
        Scheme::Imex => {
            let mu = mean_c_squared_g(g);
            let symbol = move |k: i64| -eps * (k * k) as f64 - mu * k.abs() as f64;
            let rhs = move |y: &SpectralField| {
                mollify(&g_nonlinearity(y), &moll).axpy(C64::new(mu, 0.0), &abs_d(y))
            };
            lawson_rk4(g, h, Some(&symbol), &rhs)
        }
    }
}

fn z_rhs(p: &ZPair, mu: f64) -> ZPair {
    let i = C64::new(0.0, 1.0);
    let u = &p.u;
    let c2 = u.abs_sq();
    let b = b_from_c_squared(&c2);
    let b1 = b1_spectral(u);
    let du = derivative(u);
    let drift = b.to_complex().add(&c2.scale(i));
    let mut ru = b1.product(u).sub(&drift.product(&du));
    if mu != 0.0 {
        ru = ru.axpy(C64::new(mu, 0.0), &abs_d(u));
    }
    let zap = u.map_dealiased(|v| 1.0 / v, false).holomorphic_part();
    let velocity = u.scale(-i).add_constant(i).conj();
    let rw = velocity.sub(&b.product(&zap));
    ZPair { u: ru, w: rw }
}

fn raw_step_z(p: &ZPair, cfg: &SolverConfig, h: f64) -> (ZPair, [ZPair; 4]) {
    match cfg.scheme {
        Scheme::Rk4 => lawson_rk4(p, h, None, &|y: &ZPair| z_rhs(y, 0.0)),
        Scheme::Imex => {
            let mu = p.u.abs_sq().mean().re;
            let symbol = move |k: i64| -mu * k.abs() as f64;
            lawson_rk4(p, h, Some(&symbol), &|y: &ZPair| z_rhs(y, mu))
        }
    }
}

/// CFL heuristic dt = safety·min(Δα/max|b|, 1/(max c²·k_max + ε·k_max²)).
/// The ε term only applies to the explicit scheme.
pub fn nominal_dt(state: &State, cfg: &SolverConfig) -> f64 {
    if let Some(dt) = cfg.dt {
        return dt;
    }
    let grid = state.grid();
    let c2 = match state {
        State::G(s) => c_squared_of_g(s.g()),
        State::Z(z) => z.inv_zap().abs_sq(),
    };
    let b = b_from_c_squared(&c2);
    let kmax = grid.k_max() as f64;
    let mut rate = c2.max_abs() * kmax;
    if cfg.scheme == Scheme::Rk4 {
        rate += cfg.epsilon * kmax * kmax;
    }
    let transport = b.max_abs() / grid.spacing();
    cfg.cfl_safety / rate.max(transport).max(1e-300)
}

#[derive(Clone, Debug)]
pub struct StepOutcome<S> {
    pub state: S,
    /// Step actually taken.
    pub dt: f64,
    pub halvings: u32,
}

fn max_abs_growth_ok(old: f64, new: f64) -> bool {
    new <= MAX_GROWTH * old || new == 0.0
}

/// One accepted g step of size at most `dt`, halving on rejection.
pub fn advance_g(s: &GFormState, cfg: &SolverConfig, dt: f64) -> Result<StepOutcome<GFormState>, IntegratorError> {
    let old = s.g().max_abs();
    let mut h = dt;
    let mut reason = String::new();
    for halvings in 0..=MAX_HALVINGS {
        let (g, _) = raw_step_g(s.g(), cfg, h);
        if !g.is_finite() {
            reason = "non-finite values".into();
        } else if !max_abs_growth_ok(old, g.max_abs()) {
            reason = format!("max|g| grew from {old:e} to {:e}", g.max_abs());
        } else {
            let state = GFormState::new(g, s.time() + h)?;
            return Ok(StepOutcome { state, dt: h, halvings });
        }
        h *= 0.5;
    }
    Err(IntegratorError::StepRejected { time: s.time(), halvings: MAX_HALVINGS, reason })
}

fn check_z_supported(cfg: &SolverConfig) -> Result<(), IntegratorError> {
    if !cfg.is_unmollified() {
        return Err(IntegratorError::Unsupported(
            "the complex formulation integrates only the unmollified system (epsilon = delta = 0)".into(),
        ));
    }
    Ok(())
}

/// One accepted z step of size at most `dt`, halving on rejection.
pub fn advance_z(z: &ZFormState, cfg: &SolverConfig, dt: f64) -> Result<StepOutcome<ZFormState>, IntegratorError> {
    check_z_supported(cfg)?;
    let p = ZPair { u: z.inv_zap().clone(), w: z.z_minus_id().clone() };
    let old = z.inv_zap().max_abs();
    let mut h = dt;
    let mut reason = String::new();
    for halvings in 0..=MAX_HALVINGS {
        let (next, _) = raw_step_z(&p, cfg, h);
        if !next.u.is_finite() || !next.w.is_finite() {
            reason = "non-finite values".into();
        } else if !max_abs_growth_ok(old, next.u.max_abs()) {
            reason = format!("max|1/Z_alpha| grew from {old:e} to {:e}", next.u.max_abs());
        } else {
            match ZFormState::new(next.u, next.w, z.time() + h) {
                Ok(state) if state.zap().min_abs() >= MIN_ZAP_STEP => {
                    return Ok(StepOutcome { state, dt: h, halvings });
                }
                Ok(state) => reason = format!("min|Z_alpha| = {:e} below {MIN_ZAP_STEP:e}", state.zap().min_abs()),
                Err(e) => reason = e.to_string(),
            }
        }
        h *= 0.5;
    }
    Err(IntegratorError::StepRejected { time: z.time(), halvings: MAX_HALVINGS, reason })
}

/// One step of the configured size (or the CFL size when dt is automatic).
pub fn step_g(s: &GFormState, cfg: &SolverConfig) -> Result<GFormState, IntegratorError> {
    cfg.validate()?;
    let dt = nominal_dt(&State::G(s.clone()), cfg);
    Ok(advance_g(s, cfg, dt)?.state)
}

pub fn step_z(z: &ZFormState, cfg: &SolverConfig) -> Result<ZFormState, IntegratorError> {
    cfg.validate()?;
    let dt = nominal_dt(&State::Z(z.clone()), cfg);
    Ok(advance_z(z, cfg, dt)?.state)
}

fn advance(state: &State, cfg: &SolverConfig, dt: f64) -> Result<StepOutcome<State>, IntegratorError> {
    Ok(match state {
        State::G(s) => {
            let o = advance_g(s, cfg, dt)?;
            StepOutcome { state: State::G(o.state), dt: o.dt, halvings: o.halvings }
        }
        State::Z(z) => {
            let o = advance_z(z, cfg, dt)?;
            StepOutcome { state: State::Z(o.state), dt: o.dt, halvings: o.halvings }
        }
    })
}

/// Discrete H² size watched by the blow-up monitor.
pub fn blowup_measure(state: &State) -> f64 {
    match state {
        State::G(s) => norm_hs(s.g(), 2.0),
        State::Z(z) => {
            let one = C64::new(-1.0, 0.0);
            norm_hs(&z.zap().add_constant(one), 2.0) + norm_hs(&z.inv_zap().add_constant(one), 2.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUpSuspected(String),
    Failed(String),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub accepted_steps: usize,
    pub halvings: u32,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    /// Global step index (0 for the initial state of a fresh run).
    pub step: usize,
    /// Step size that produced this snapshot (0 for the first one).
    pub dt_taken: f64,
    pub state: State,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<DiagnosticsRecord>,
    pub status: RunStatus,
    pub metadata: RunMetadata,
    /// Accumulated dissipation term at the last step.
    pub m_dissipation: f64,
}

impl Trajectory {
    pub fn last_state(&self) -> &State {
        &self.snapshots.last().expect("trajectory is never empty").state
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.state.time()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct CheckpointSpec {
    pub every: usize,
    pub dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct IntegrateOptions {
    /// Keep every k-th accepted state (the last state is always kept).
    pub store_every: usize,
    pub diagnostics: bool,
    pub checkpoint: Option<CheckpointSpec>,
    pub seed: Option<u64>,
    /// Step index and dissipation accumulator to start from (non-zero when resuming).
    pub start_step: usize,
    pub m_dissipation_start: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            store_every: 1,
            diagnostics: true,
            checkpoint: None,
            seed: None,
            start_step: 0,
            m_dissipation_start: 0.0,
        }
    }
}

fn time_tolerance(t_end: f64) -> f64 {
    1e-12 * t_end.abs().max(1.0)
}

/// Runs from `initial` to `cfg.t_end`.
///
/// Numerical trouble does not produce an `Err`: the partial trajectory is
/// returned with a non-`Completed` status. `Err` is reserved for invalid input
/// and I/O failures.
pub fn integrate(initial: State, cfg: &SolverConfig, opts: &IntegrateOptions) -> Result<Trajectory, IntegratorError> {
    cfg.validate()?;
    if matches!(initial, State::Z(_)) {
        check_z_supported(cfg)?;
    }
    let clock = Instant::now();
    let mut state = initial;
    let mut step = opts.start_step;
    let mut accum = opts.m_dissipation_start;
    let mut snapshots = vec![Snapshot { step, dt_taken: 0.0, state: state.clone() }];
    let mut series = diagnostics::SeriesBuilder::new(opts.diagnostics);
    let mut status = RunStatus::Completed;
    let mut metadata = RunMetadata { seed: opts.seed, ..Default::default() };

    let mut diss_prev = match series.push(&state, accum) {
        Ok(d) => d,
        Err(e) => {
            status = RunStatus::Failed(format!("diagnostics failed on initial state: {e}"));
            0.0
        }
    };
    let tol = time_tolerance(cfg.t_end);
    while status == RunStatus::Completed && cfg.t_end - state.time() > tol {
        let t = state.time();
        let remaining = cfg.t_end - t;
        let nominal = nominal_dt(&state, cfg);
        let (h, lands) = if nominal >= remaining - tol { (remaining, true) } else { (nominal, false) };
        let outcome = match advance(&state, cfg, h) {
            Ok(o) => o,
            Err(IntegratorError::StepRejected { time, halvings, reason }) => {
                status = RunStatus::Failed(format!("step rejected at t = {time} after {halvings} halvings: {reason}"));
                break;
            }
            Err(e) => return Err(e),
        };
        metadata.halvings += outcome.halvings;
        let dt = outcome.dt;
        let new_time = if lands && outcome.halvings == 0 { cfg.t_end } else { t + dt };
        state = outcome.state.with_time(new_time);
        step += 1;
        metadata.accepted_steps += 1;

        let measure = blowup_measure(&state);
        if !(measure <= BLOWUP_H2) {
            status = RunStatus::BlowUpSuspected(format!("discrete H2 norm {measure:e} exceeds {BLOWUP_H2:e}"));
        }
        match series.push(&state, accum) {
            Ok(diss) => {
                accum += 0.5 * dt * (diss_prev + diss);
                series.set_last_accum(accum);
                diss_prev = diss;
            }
            Err(e) => status = RunStatus::Failed(format!("diagnostics failed at t = {new_time}: {e}")),
        }
        let keep = opts.store_every <= 1 || step % opts.store_every == 0 || status != RunStatus::Completed;
        let finished = cfg.t_end - new_time <= tol;
        if keep || finished {
            snapshots.push(Snapshot { step, dt_taken: dt, state: state.clone() });
        }
        if let Some(ck) = &opts.checkpoint {
            if ck.every > 0 && step % ck.every == 0 {
                write_checkpoint(&ck.dir, step, dt, accum, &state, cfg)?;
            }
        }
    }
    metadata.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(Trajectory { config: cfg.clone(), snapshots, records: series.finish(), status, metadata, m_dissipation: accum })
}

/// Path of the checkpoint written at `step`.
pub fn checkpoint_path(dir: &std::path::Path, step: usize) -> PathBuf {
    dir.join(format!("checkpoint_{step:08}.snap"))
}

fn write_checkpoint(
    dir: &std::path::Path,
    step: usize,
    dt: f64,
    accum: f64,
    state: &State,
    cfg: &SolverConfig,
) -> Result<(), IntegratorError> {
    std::fs::create_dir_all(dir).map_err(SnapshotError::from)?;
    let mut meta = serde_json::Map::new();
    meta.insert("step".into(), step.into());
    meta.insert("dt_taken_bits".into(), dt.to_bits().into());
    meta.insert("m_dissipation_bits".into(), accum.to_bits().into());
    meta.insert("m_dissipation".into(), serde_json::json!(accum));
    meta.insert("config".into(), serde_json::to_value(cfg).map_err(SnapshotError::from)?);
    snapshot::write_snapshot(&checkpoint_path(dir, step), state, &meta)?;
    Ok(())
}

/// Continues a run from a checkpoint file written by [`integrate`].
pub fn resume(path: &std::path::Path, cfg: &SolverConfig, opts: &IntegrateOptions) -> Result<Trajectory, IntegratorError> {
    let file = snapshot::read_snapshot(path)?;
    let step = file.metadata.get("step").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    let accum = file
        .metadata
        .get("m_dissipation_bits")
        .and_then(|v| v.as_u64())
        .map(f64::from_bits)
        .unwrap_or(0.0);
    let opts = IntegrateOptions { start_step: step, m_dissipation_start: accum, ..opts.clone() };
    integrate(file.state, cfg, &opts)
}

/// Characteristic curves h(α, t) and the accumulated rotation ∫ Im(D_{α'}Z_t)∘h.
#[derive(Clone, Debug)]
pub struct FlowSamples {
    pub seeds: Vec<f64>,
    pub times: Vec<f64>,
    /// positions[i][j] = h(seeds[j], times[i]).
    pub positions: Vec<Vec<f64>>,
    /// phase[i][j] = ∫₀^{t_i} Im(D_{α'}Z_t)(h(seeds[j], s), s) ds.
    pub phase: Vec<Vec<f64>>,
}

/// b and the rotation rate Im(D_{α'}Z_t) = ½∂(c²) of a state or stage.
fn flow_fields(state: &State) -> (SpectralField, SpectralField) {
    let c2 = match state {
        State::G(s) => c_squared_of_g(s.g()),
        State::Z(z) => z.inv_zap().abs_sq(),
    };
    (b_from_c_squared(&c2), derivative(&c2).scale_real(0.5))
}

fn stage_states(state: &State, cfg: &SolverConfig, h: f64) -> (State, [State; 4]) {
    let t = state.time();
    let times = [t, t + 0.5 * h, t + 0.5 * h, t + h];
    match state {
        State::G(s) => {
            let (y, st) = raw_step_g(s.g(), cfg, h);
            let mk = |g: &SpectralField, time: f64| State::G(GFormState::new(g.clone(), time).expect("real stage"));
            (mk(&y, t + h), [0, 1, 2, 3].map(|i| mk(&st[i], times[i])))
        }
        State::Z(z) => {
            let p = ZPair { u: z.inv_zap().clone(), w: z.z_minus_id().clone() };
            let (y, st) = raw_step_z(&p, cfg, h);
            let mk = |q: &ZPair, time: f64| {
                let zap = q.u.map_dealiased(|v| 1.0 / v, false).holomorphic_part();
                State::Z(ZFormState::from_parts(q.u.clone(), zap, q.w.clone(), time))
            };
            (mk(&y, t + h), [0, 1, 2, 3].map(|i| mk(&st[i], times[i])))
        }
    }
}

fn check_consecutive(traj: &Trajectory) -> Result<(), IntegratorError> {
    for w in traj.snapshots.windows(2) {
        if w[1].step != w[0].step + 1 {
            return Err(IntegratorError::Replay(format!(
                "snapshots {} and {} are not consecutive steps; store every step to track particles",
                w[0].step, w[1].step
            )));
        }
    }
    Ok(())
}

fn eval_re(f: &SpectralField, x: f64) -> f64 {
    f.eval(x).re
}

/// Integrates dh/dt = b(h, t), h(α, t₀) = α for the given seeds by replaying
/// the trajectory's steps with the same Runge–Kutta stages.
///
/// Seeds must be strictly increasing and span less than one period.
pub fn particle_flow(traj: &Trajectory, seeds: &[f64]) -> Result<FlowSamples, IntegratorError> {
    check_consecutive(traj)?;
    for w in seeds.windows(2) {
        if !(w[1] > w[0]) {
            return Err(IntegratorError::Replay("seeds must be strictly increasing".into()));
        }
    }
    if let (Some(a), Some(b)) = (seeds.first(), seeds.last()) {
        if b - a >= 2.0 * std::f64::consts::PI {
            return Err(IntegratorError::Replay("seeds must span less than one period".into()));
        }
    }
    let cfg = &traj.config;
    let mut h: Vec<f64> = seeds.to_vec();
    let mut phase = vec![0.0; seeds.len()];
    let mut out = FlowSamples {
        seeds: seeds.to_vec(),
        times: vec![traj.snapshots[0].state.time()],
        positions: vec![h.clone()],
        phase: vec![phase.clone()],
    };
    for w in traj.snapshots.windows(2) {
        let dt = w[1].dt_taken;
        let (_, stages) = stage_states(&w[0].state, cfg, dt);
        let fields: Vec<(SpectralField, SpectralField)> = stages.iter().map(flow_fields).collect();
        for j in 0..h.len() {
            let x0 = h[j];
            let k1 = eval_re(&fields[0].0, x0);
            let x2 = x0 + 0.5 * dt * k1;
            let k2 = eval_re(&fields[1].0, x2);
            let x3 = x0 + 0.5 * dt * k2;
            let k3 = eval_re(&fields[2].0, x3);
            let x4 = x0 + dt * k3;
            let k4 = eval_re(&fields[3].0, x4);
            let p1 = eval_re(&fields[0].1, x0);
            let p2 = eval_re(&fields[1].1, x2);
            let p3 = eval_re(&fields[2].1, x3);
            let p4 = eval_re(&fields[3].1, x4);
            h[j] = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            phase[j] += dt / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
        }
        let time = w[1].state.time();
        for j in 1..h.len() {
            if !(h[j] > h[j - 1]) {
                return Err(IntegratorError::NonMonotoneFlow { time, index: j - 1, next: j });
            }
        }
        if let (Some(a), Some(b)) = (h.first(), h.last()) {
            if b - a >= 2.0 * std::f64::consts::PI {
                return Err(IntegratorError::NonMonotoneFlow { time, index: h.len() - 1, next: 0 });
            }
        }
        out.times.push(time);
        out.positions.push(h.clone());
        out.phase.push(phase.clone());
    }
    Ok(out)
}

/// Largest |dh/dt − b(h, t)| at step midpoints, with dh/dt from the cubic
/// Hermite interpolant of the flow and b(·, t + dt/2) from a half step of the
/// field equation.
pub fn flow_midpoint_residual(traj: &Trajectory, flow: &FlowSamples) -> Result<f64, IntegratorError> {
    check_consecutive(traj)?;
    let cfg = &traj.config;
    let mut worst: f64 = 0.0;
    for (i, w) in traj.snapshots.windows(2).enumerate() {
        let dt = w[1].dt_taken;
        let (half, _) = stage_states(&w[0].state, cfg, 0.5 * dt);
        let (b0, _) = flow_fields(&w[0].state);
        let (b1, _) = flow_fields(&w[1].state);
        let (bm, _) = flow_fields(&half);
        for j in 0..flow.seeds.len() {
            let h0 = flow.positions[i][j];
            let h1 = flow.positions[i + 1][j];
            let v0 = eval_re(&b0, h0);
            let v1 = eval_re(&b1, h1);
            let hm = 0.5 * (h0 + h1) + dt * (v0 - v1) / 8.0;
            let slope = 1.5 * (h1 - h0) / dt - 0.25 * (v0 + v1);
            worst = worst.max((slope - eval_re(&bm, hm)).abs());
        }
    }
    Ok(worst)
}
