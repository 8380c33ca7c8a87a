//! Executes experiment plans and writes their artifacts.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use muskat_core::diagnostics::{difference_energy, max_principle_monitor, rigidity_check, write_csv};
use muskat_core::integrator::{integrate, nominal_dt, Formulation, IntegrateOptions, RunStatus, SolverConfig, Trajectory};
use muskat_core::model::{
    g_to_z, make_corner_data, random_band_limited, reciprocal, z_to_g, GFormState, State, ZFormState,
};
use muskat_core::snapshot::{read_snapshot, write_snapshot};
use muskat_core::spectral::{norm_hs, norm_l2, poisson_extend, Grid, SpectralField};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{children, Child, ExperimentPlan, InitialData, Kind, Preset};
use crate::CliError;

/// Offset of the angle-jump measurement in units of the corner smoothing width.
pub const JUMP_OFFSET_WIDTHS: f64 = 3.0;

/// Result of a plan: the summary written to disk and any numerical failures.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub summary: Value,
    pub failures: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Initial g for the given data.
pub fn initial_g(data: &InitialData) -> Result<GFormState, CliError> {
    let grid = Grid::new(data.n).map_err(|e| CliError::Config(e.to_string()))?;
    let g = match data.preset {
        Preset::Flat => GFormState::flat(&grid),
        Preset::SingleMode => {
            let (a, k) = (data.amplitude, data.mode as f64);
            GFormState::new(SpectralField::from_real_fn(&grid, |x| a * (k * x).cos()), 0.0).map_err(numerical)?
        }
        Preset::Random => {
            GFormState::new(random_band_limited(&grid, data.kmax, data.amplitude, data.seed), 0.0).map_err(numerical)?
        }
        Preset::Corner => make_corner_data(data.nu, data.corner_eps, &grid).map_err(|e| CliError::Config(e.to_string()))?,
        Preset::ShiftedSnapshot => {
            let path = data.snapshot.as_ref().expect("validated");
            let file = read_snapshot(path).map_err(|e| io_err(path, e))?;
            let z = file.state.to_z();
            let depth = -data.shift_depth;
            let zap = poisson_extend(&z.zap().resample(&grid), depth).map_err(numerical)?;
            let w = poisson_extend(&z.z_minus_id().resample(&grid), depth).map_err(numerical)?;
            let inv = reciprocal(&zap).map_err(numerical)?;
            let shifted = ZFormState::from_parts(inv, zap, w, 0.0);
            z_to_g(&shifted).map_err(numerical)?
        }
    };
    Ok(g)
}

fn status_str(s: &RunStatus) -> Value {
    serde_json::to_value(s).unwrap_or(Value::Null)
}

fn write_outputs(traj: &Trajectory, dir: &Path, cadence: usize) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv = dir.join("diagnostics.csv");
    let f = File::create(&csv).map_err(|e| io_err(&csv, e))?;
    write_csv(&traj.records, BufWriter::new(f)).map_err(|e| io_err(&csv, e))?;
    if cadence > 0 {
        let sdir = dir.join("snapshots");
        std::fs::create_dir_all(&sdir).map_err(|e| io_err(&sdir, e))?;
        let last = traj.snapshots.len() - 1;
        for (i, s) in traj.snapshots.iter().enumerate() {
            if s.step % cadence == 0 || i == last {
                let mut meta = Map::new();
                meta.insert("step".into(), s.step.into());
                meta.insert("dt_taken_bits".into(), s.dt_taken.to_bits().into());
                let p = sdir.join(format!("step_{:08}.snap", s.step));
                write_snapshot(&p, &s.state, &meta).map_err(|e| io_err(&p, e))?;
            }
        }
    }
    Ok(())
}

fn run_summary(traj: &Trajectory) -> Value {
    let cons = traj.records.iter().filter_map(|r| r.cons_residual).map(f64::abs).fold(0.0, f64::max);
    let b1_min = traj.records.iter().map(|r| r.b1_min).fold(f64::INFINITY, f64::min);
    let mut v = json!({
        "status": status_str(&traj.status),
        "final_time": traj.last_state().time(),
        "accepted_steps": traj.metadata.accepted_steps,
        "halvings": traj.metadata.halvings,
        "wall_time_s": traj.metadata.wall_time_s,
        "max_abs_cons_residual": cons,
        "min_b1": b1_min,
        "final_record": traj.records.last(),
    });
    if traj.config.epsilon == 0.0 && traj.config.mollifier.is_identity() {
        v["max_principle_violations"] = json!(max_principle_monitor(traj).len());
    }
    v
}

/// A finished child: its trajectories by formulation.
struct ChildRun {
    child: Child,
    g: Option<Trajectory>,
    z: Option<Trajectory>,
}

impl ChildRun {
    fn primary(&self) -> &Trajectory {
        self.g.as_ref().or(self.z.as_ref()).expect("at least one formulation")
    }

    fn failures(&self) -> Vec<String> {
        [&self.g, &self.z]
            .into_iter()
            .flatten()
            .filter(|t| t.status != RunStatus::Completed)
            .map(|t| format!("{}: {}", self.child.label, status_str(&t.status)))
            .collect()
    }
}

fn run_child(child: Child, dir: &Path, cadence: usize) -> Result<ChildRun, CliError> {
    let g0 = initial_g(&child.initial_data)?;
    // every step stays in memory so particle flows can be replayed
    let opts = IntegrateOptions { store_every: 1, seed: Some(child.initial_data.seed), ..Default::default() };
    let cfg = &child.config;
    let go = |state: State| integrate(state, cfg, &opts).map_err(|e| CliError::Numerical(e.to_string()));
    let (g, z) = match cfg.formulation {
        Formulation::G => (Some(go(State::G(g0))?), None),
        Formulation::Z => (None, Some(go(State::Z(g_to_z(&g0)))?)),
        Formulation::Both => (Some(go(State::G(g0.clone()))?), Some(go(State::Z(g_to_z(&g0)))?)),
    };
    match (&g, &z) {
        (Some(a), Some(b)) => {
            write_outputs(a, &dir.join("g"), cadence)?;
            write_outputs(b, &dir.join("z"), cadence)?;
        }
        (Some(t), None) | (None, Some(t)) => write_outputs(t, dir, cadence)?,
        (None, None) => unreachable!(),
    }
    Ok(ChildRun { child, g, z })
}

fn final_g(traj: &Trajectory) -> Result<SpectralField, CliError> {
    Ok(traj.last_state().to_g().map_err(numerical)?.g().clone())
}

/// L² gap between the g-run and the z-run of a child at the final time.
fn formulation_gap(run: &ChildRun) -> Result<Option<f64>, CliError> {
    match (&run.g, &run.z) {
        (Some(a), Some(b)) => Ok(Some(norm_l2(&final_g(a)?.sub(&final_g(b)?)))),
        _ => Ok(None),
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var("MUSKAT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&k| k > 0) {
        b = b.num_threads(k);
    }
    b.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Gives all members of a pair the same fixed step so their snapshots align.
fn align_pair_steps(plan: &ExperimentPlan, list: &mut [Child]) -> Result<(), CliError> {
    if plan.base_config.dt.is_some() {
        return Ok(());
    }
    let mut dt = f64::INFINITY;
    for c in list.iter() {
        let g = initial_g(&c.initial_data)?;
        dt = dt.min(nominal_dt(&State::G(g), &c.config));
    }
    for c in list.iter_mut() {
        c.config = SolverConfig { dt: Some(dt), ..c.config.clone() };
    }
    Ok(())
}

pub fn run(plan: &ExperimentPlan) -> Result<RunReport, CliError> {
    let out = &plan.output_dir;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut list = children(plan);
    if plan.kind == Kind::EquivalenceCheck {
        for c in &mut list {
            c.config.formulation = Formulation::Both;
        }
    }
    if plan.kind == Kind::DifferencePair {
        align_pair_steps(plan, &mut list)?;
    }
    let single = plan.kind == Kind::Single;
    let pool = thread_pool()?;
    let runs: Vec<ChildRun> = pool.install(|| {
        list.into_par_iter()
            .map(|c| {
                let dir = if single { out.clone() } else { out.join(&c.label) };
                run_child(c, &dir, plan.snapshot_cadence)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut failures: Vec<String> = runs.iter().flat_map(ChildRun::failures).collect();
    let mut child_json = Vec::new();
    for r in &runs {
        let mut v = json!({ "label": r.child.label, "value": r.child.value });
        if let Some(t) = &r.g {
            v["g"] = run_summary(t);
        }
        if let Some(t) = &r.z {
            v["z"] = run_summary(t);
        }
        if let Some(gap) = formulation_gap(r)? {
            v["formulation_gap_l2"] = json!(gap);
        }
        child_json.push(v);
    }

    let analysis = if failures.is_empty() {
        match analyse(plan, &runs, out) {
            Ok(a) => a,
            Err(CliError::Numerical(m)) => {
                failures.push(m.clone());
                json!({ "error": m })
            }
            Err(e) => return Err(e),
        }
    } else {
        Value::Null
    };

    let summary = json!({
        "plan": plan,
        "children": child_json,
        "analysis": analysis,
        "failures": failures,
    });
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(RunReport { summary, failures })
}

fn analyse(plan: &ExperimentPlan, runs: &[ChildRun], out: &Path) -> Result<Value, CliError> {
    Ok(match plan.kind {
        Kind::Single => json!({ "formulation_gap_l2": formulation_gap(&runs[0])? }),
        Kind::DtSweep => {
            let finals: Vec<SpectralField> = runs.iter().map(|r| final_g(r.primary())).collect::<Result<_, _>>()?;
            let dts: Vec<f64> = runs.iter().map(|r| r.child.value).collect();
            let diffs: Vec<f64> = finals.windows(2).map(|w| norm_l2(&w[0].sub(&w[1]))).collect();
            let orders: Vec<f64> = (1..diffs.len())
                .map(|i| (diffs[i - 1] / diffs[i]).ln() / (dts[i - 1] / dts[i]).ln())
                .collect();
            json!({ "dt": dts, "successive_differences_l2": diffs, "observed_orders": orders })
        }
        Kind::DeltaSweep | Kind::EpsilonSweep => {
            let reference = final_g(runs[0].primary())?;
            let values: Vec<f64> = runs[1..].iter().map(|r| r.child.value).collect();
            let gaps: Vec<f64> = runs[1..]
                .iter()
                .map(|r| Ok(norm_hs(&final_g(r.primary())?.sub(&reference), 1.0)))
                .collect::<Result<_, CliError>>()?;
            let slope = if values.len() >= 2 { Some(loglog_slope(&values, &gaps)) } else { None };
            let name = if plan.kind == Kind::DeltaSweep { "delta" } else { "epsilon" };
            json!({ "parameter": name, "values": values, "h1_gap_to_reference": gaps, "loglog_slope": slope })
        }
        Kind::CornerFamily => {
            let mut members = Vec::new();
            for r in runs {
                let eps = r.child.value;
                let rep = rigidity_check(r.primary(), PI, &[JUMP_OFFSET_WIDTHS * eps]).map_err(numerical)?;
                let last = rep.times.len() - 1;
                let path = out.join(&r.child.label).join("rigidity.json");
                let text = serde_json::to_string(&rep).map_err(|e| io_err(&path, e))?;
                std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
                members.push(json!({
                    "corner_eps": eps,
                    "tip_position": rep.tip_position[last],
                    "tip_velocity": rep.tip_velocity[last],
                    "tip_speed_error": rep.tip_speed_error[last],
                    "angle_jump_initial": rep.angle_jump[0],
                    "angle_jump_drift": rep.angle_jump_drift(),
                    "tip_rotation": rep.tip_rotation[last],
                    "min_inv_zap": rep.min_inv_zap[last],
                    "singular_proxy_size": rep.singular_proxy_size[last],
                    "max_identity_residual": rep.identity_residual.iter().cloned().fold(0.0, f64::max),
                }));
            }
            // members ordered by decreasing smoothing width
            let mut order: Vec<usize> = (0..members.len()).collect();
            order.sort_by(|&a, &b| runs[b].child.value.total_cmp(&runs[a].child.value));
            let series = |key: &str| -> Vec<f64> { order.iter().map(|&i| members[i][key].as_f64().unwrap_or(f64::NAN)).collect() };
            let speed = series("tip_speed_error");
            let drift = series("angle_jump_drift");
            let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
            json!({
                "members": members,
                "tip_speed_error_decreasing": decreasing(&speed),
                "angle_jump_drift_decreasing": decreasing(&drift),
                "tip_speed_reduction": speed.first().zip(speed.last()).map(|(a, b)| a / b),
                "jump_offset_widths": JUMP_OFFSET_WIDTHS,
            })
        }
        Kind::DifferencePair => {
            let pair = difference_energy(runs[0].primary(), runs[1].primary()).map_err(numerical)?;
            let path = out.join("difference.csv");
            let mut text = String::from("time,hhalf_term,integral_term,energy,running_sup,ratio\n");
            for i in 0..pair.times.len() {
                text.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    pair.times[i], pair.hhalf_term[i], pair.integral_term[i], pair.energy[i], pair.running_sup[i], pair.ratio[i]
                ));
            }
            std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            json!({
                "initial_term": pair.initial_term,
                "f0": pair.running_sup[0],
                "final_ratio": pair.ratio.last(),
                "max_ratio": pair.ratio.iter().cloned().fold(0.0, f64::max),
            })
        }
        Kind::EquivalenceCheck => {
            let dts: Vec<f64> = runs.iter().map(|r| r.primary().snapshots.get(1).map_or(0.0, |s| s.dt_taken)).collect();
            let gaps: Vec<f64> = runs.iter().map(|r| formulation_gap(r).map(|g| g.unwrap_or(f64::NAN))).collect::<Result<_, _>>()?;
            // C from gap ≈ C·dt⁴ by least squares in log space
            let logs: Vec<f64> = gaps.iter().zip(&dts).map(|(g, d)| g.max(1e-300).ln() - 4.0 * d.ln()).collect();
            let c = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
            let bounds: Vec<f64> = dts.iter().map(|d| (c * d.powi(4)).max(1e-6)).collect();
            let within = gaps.iter().zip(&bounds).all(|(g, b)| g <= b);
            json!({ "dt": dts, "gap_l2": gaps, "fitted_c": c, "bounds": bounds, "within_bounds": within })
        }
    })
}
