//! Energies, identity residuals, maximum-principle and rigidity monitors, and
//! the difference energy between two runs.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{particle_flow, Trajectory};
use crate::model::{b1_spectral, darcy_velocity, ModelError, State, ZFormState, MIN_ZAP};
use crate::spectral::{derivative, norm_hhalf, norm_hs, norm_l2, norm_sup, poisson_extend, SpectralField, C64};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("state too close to singular for this diagnostic (min |Z_alpha| = {0:e})")]
    NearSingular(f64),
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("particle flow failed: {0}")]
    Flow(String),
    #[error("h-tilde lost monotonicity at t = {0}")]
    NonMonotone(f64),
    #[error("need at least {0} records")]
    TooShort(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-step observables of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// ‖∂u‖² + ‖D²u‖² with u = 1/Z_{,α'} and D = u∂.
    pub m: f64,
    /// 2∫‖u·D²u‖²_{Ḣ½} dt accumulated by the trapezoid rule.
    pub m_dissipation_accum: f64,
    pub m1: f64,
    /// ‖g‖²_{Hⁿ} for n = 1, 2, 3.
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub hhalf_g: f64,
    /// Normalized residual of the g-weighted conservation law; `None` when
    /// fewer than three consecutive records exist.
    pub cons_residual: Option<f64>,
    pub g_min: f64,
    pub g_max: f64,
    pub f_max: f64,
    pub b1_min: f64,
}

pub const CSV_HEADER: &str =
    "time,M,M_dissipation_accum,M1,E1,E2,E3,hhalf_g,cons_residual,g_min,g_max,f_max,B1_min";

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.m,
            self.m_dissipation_accum,
            self.m1,
            self.e1,
            self.e2,
            self.e3,
            self.hhalf_g,
            self.g_min,
            self.g_max,
            self.f_max,
            self.b1_min,
        ]
        .iter()
        .all(|v| v.is_finite())
            && self.cons_residual.map_or(true, f64::is_finite)
    }
}

/// Writes one CSV row per record.
pub fn write_csv<W: Write>(records: &[DiagnosticsRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let cons = r.cons_residual.map(|v| format!("{v:.17e}")).unwrap_or_default();
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.time,
            r.m,
            r.m_dissipation_accum,
            r.m1,
            r.e1,
            r.e2,
            r.e3,
            r.hhalf_g,
            cons,
            r.g_min,
            r.g_max,
            r.f_max,
            r.b1_min
        )?;
    }
    Ok(())
}

fn check_regular(z: &ZFormState) -> Result<(), DiagnosticsError> {
    let m = z.zap().min_abs();
    if !(m >= MIN_ZAP) {
        return Err(DiagnosticsError::NearSingular(m));
    }
    Ok(())
}

/// D²u = u∂(u∂u).
fn d2(u: &SpectralField) -> SpectralField {
    let du = u.product(&derivative(u));
    u.product(&derivative(&du))
}

/// (‖∂u‖² + ‖D²u‖², 2‖u·D²u‖²_{Ḣ½}) with u = 1/Z_{,α'}.
pub fn energy_m(z: &ZFormState) -> Result<(f64, f64), DiagnosticsError> {
    check_regular(z)?;
    let u = z.inv_zap();
    let dd = d2(u);
    let inst = norm_l2(&derivative(u)).powi(2) + norm_l2(&dd).powi(2);
    let diss = 2.0 * norm_hhalf(&u.product(&dd)).powi(2);
    Ok((inst, diss))
}

/// Boundary form ‖∂u‖² + ‖D²u‖².
pub fn energy_m1(z: &ZFormState) -> Result<f64, DiagnosticsError> {
    Ok(energy_m(z)?.0)
}

/// Boundary energy compared with its values on interior lines Im z' = depth.
#[derive(Clone, Debug)]
pub struct M1Report {
    pub boundary: f64,
    /// (depth, value) ordered from deepest to shallowest.
    pub interior: Vec<(f64, f64)>,
    /// Interior values increase toward the boundary (within 1e−6).
    pub monotone: bool,
    /// max(interior) − boundary.
    pub sup_excess: f64,
}

/// Default interior depths −2⁻¹, …, −2⁻⁶.
pub fn default_depths() -> Vec<f64> {
    (1..=6).map(|k| -(0.5f64).powi(k)).collect()
}

/// Evaluates the 𝓜₁ integrand on horizontal lines inside the fluid via the
/// holomorphic (Poisson) extension of 1/Z_{,α'}.
pub fn energy_m1_interior(z: &ZFormState, depths: &[f64]) -> Result<M1Report, DiagnosticsError> {
    let boundary = energy_m1(z)?;
    let mut interior = Vec::with_capacity(depths.len());
    for &y in depths {
        let u = poisson_extend(z.inv_zap(), y).map_err(|e| DiagnosticsError::Mismatch(e.to_string()))?;
        let v = norm_l2(&derivative(&u)).powi(2) + norm_l2(&d2(&u)).powi(2);
        interior.push((y, v));
    }
    interior.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = interior.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-6);
    let sup = interior.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(M1Report { boundary, interior, monotone, sup_excess: sup - boundary })
}

/// Terms of the conservation law d/dt Q + S = 0 for one state, where
/// Q = ∫|Z_{,α'}|²g² and S = ∫|Z_{,α'}|²g²B₁ + 2‖g‖²_{Ḣ½}.
#[derive(Clone, Copy, Debug)]
pub struct ConservationTerms {
    pub time: f64,
    pub q: f64,
    pub sink: f64,
    /// max(1, 2‖g‖²_{Ḣ½}).
    pub scale: f64,
}

pub fn conservation_terms(state: &State) -> Result<ConservationTerms, DiagnosticsError> {
    let g = state.to_g()?;
    let z = state.to_z();
    let weight = g.f().map_dealiased(|v| C64::new((2.0 * v.re).exp(), 0.0), true);
    let wg2 = weight.product(&g.g().product(g.g()));
    let b1 = b1_spectral(z.inv_zap());
    let h = norm_hhalf(g.g()).powi(2);
    Ok(ConservationTerms {
        time: state.time(),
        q: 2.0 * PI * wg2.mean().re,
        sink: 2.0 * PI * wg2.product(&b1).mean().re + 2.0 * h,
        scale: (2.0 * h).max(1.0),
    })
}

/// Three-point derivative of q at position `at` (0, 1 or 2) of the window.
fn three_point_derivative(t: [f64; 3], q: [f64; 3], at: usize) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    let s = h1 + h2;
    match at {
        0 => -(2.0 * h1 + h2) / (h1 * s) * q[0] + s / (h1 * h2) * q[1] - h1 / (h2 * s) * q[2],
        1 => -h2 / (h1 * s) * q[0] + (h2 - h1) / (h1 * h2) * q[1] + h1 / (h2 * s) * q[2],
        _ => h2 / (h1 * s) * q[0] - s / (h1 * h2) * q[1] + (2.0 * h2 + h1) / (h2 * s) * q[2],
    }
}

fn residual_from_terms(w: [&ConservationTerms; 3], at: usize) -> f64 {
    let dq = three_point_derivative([w[0].time, w[1].time, w[2].time], [w[0].q, w[1].q, w[2].q], at);
    (dq + w[at].sink) / w[at].scale
}

/// Signed residual of the conservation law at the middle of three consecutive
/// states, using a central difference for the time derivative.
pub fn conservation_residual(window: [&State; 3]) -> Result<f64, DiagnosticsError> {
    let a = conservation_terms(window[0])?;
    let b = conservation_terms(window[1])?;
    let c = conservation_terms(window[2])?;
    Ok(residual_from_terms([&a, &b, &c], 1))
}

/// Per-step diagnostics without the time-derivative terms.
#[derive(Clone, Debug)]
pub struct Observables {
    pub record: DiagnosticsRecord,
    pub dissipation: f64,
    pub terms: ConservationTerms,
}

pub fn observe(state: &State, m_dissipation_accum: f64) -> Result<Observables, DiagnosticsError> {
    let g = state.to_g()?;
    let z = state.to_z();
    let (m, dissipation) = energy_m(&z)?;
    let b1 = b1_spectral(z.inv_zap());
    let b1_min = b1.real_values().into_iter().fold(f64::INFINITY, f64::min);
    let gf = g.g();
    let (_, g_min) = gf.refined_min();
    let (_, g_max) = gf.refined_max();
    let (_, f_max) = g.f().refined_max();
    let terms = conservation_terms(state)?;
    let record = DiagnosticsRecord {
        time: state.time(),
        m,
        m_dissipation_accum,
        m1: m,
        e1: norm_hs(gf, 1.0).powi(2),
        e2: norm_hs(gf, 2.0).powi(2),
        e3: norm_hs(gf, 3.0).powi(2),
        hhalf_g: norm_hhalf(gf),
        cons_residual: None,
        g_min,
        g_max,
        f_max,
        b1_min,
    };
    Ok(Observables { record, dissipation, terms })
}

/// Collects records step by step and fills in the conservation residuals.
pub(crate) struct SeriesBuilder {
    enabled: bool,
    records: Vec<DiagnosticsRecord>,
    terms: Vec<ConservationTerms>,
}

impl SeriesBuilder {
    pub(crate) fn new(enabled: bool) -> Self {
        SeriesBuilder { enabled, records: Vec::new(), terms: Vec::new() }
    }

    /// Returns the dissipation integrand of `state`.
    pub(crate) fn push(&mut self, state: &State, accum: f64) -> Result<f64, DiagnosticsError> {
        if !self.enabled {
            return Ok(0.0);
        }
        let obs = observe(state, accum)?;
        self.records.push(obs.record);
        self.terms.push(obs.terms);
        Ok(obs.dissipation)
    }

    pub(crate) fn set_last_accum(&mut self, accum: f64) {
        if let Some(r) = self.records.last_mut() {
            r.m_dissipation_accum = accum;
        }
    }

    pub(crate) fn finish(mut self) -> Vec<DiagnosticsRecord> {
        let n = self.terms.len();
        if n >= 3 {
            for i in 0..n {
                let (start, at) = match i {
                    0 => (0, 0),
                    i if i == n - 1 => (n - 3, 2),
                    i => (i - 1, 1),
                };
                let w = [&self.terms[start], &self.terms[start + 1], &self.terms[start + 2]];
                self.records[i].cons_residual = Some(residual_from_terms(w, at));
            }
        }
        self.records
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    /// min g must not decrease.
    GMin,
    /// max g must not increase.
    GMax,
    /// max f must not increase.
    FMax,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub time: f64,
    pub quantity: ExtremumKind,
    /// Amount by which the change exceeded the slack.
    pub magnitude: f64,
}

/// Per-step slack 10·(machine epsilon + dt^{order+1}).
pub fn max_principle_slack(dt: f64, order: u32) -> f64 {
    10.0 * (f64::EPSILON + dt.powi(order as i32 + 1))
}

/// Checks min g ↑, max g ↓ and max f ↓ between consecutive records. Meaningful
/// for unmollified runs only.
pub fn max_principle_monitor(traj: &Trajectory) -> Vec<Violation> {
    let order = traj.config.order();
    let mut out = Vec::new();
    for (i, w) in traj.records.windows(2).enumerate() {
        let slack = max_principle_slack(w[1].time - w[0].time, order);
        let checks = [
            (ExtremumKind::GMin, w[0].g_min - w[1].g_min),
            (ExtremumKind::GMax, w[1].g_max - w[0].g_max),
            (ExtremumKind::FMax, w[1].f_max - w[0].f_max),
        ];
        for (quantity, increase) in checks {
            if increase > slack {
                out.push(Violation { step: i + 1, time: w[1].time, quantity, magnitude: increase - slack });
            }
        }
    }
    out
}

/// Observables of a corner run along the characteristic through the tip.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RigidityReport {
    pub tip_alpha: f64,
    /// Offset σ used for the angle jump g(h(α₀−σ)) − g(h(α₀+σ)).
    pub jump_offset: f64,
    pub times: Vec<f64>,
    pub tip_position: Vec<f64>,
    /// Z_t at h(α₀, t) as (re, im).
    pub tip_velocity: Vec<(f64, f64)>,
    /// |Z_t(tip) + i|.
    pub tip_speed_error: Vec<f64>,
    /// |u ∂u| at the tip, u = 1/Z_{,α'}.
    pub tip_rotation: Vec<f64>,
    pub angle_jump: Vec<f64>,
    /// max over tracked α of |ω(h(α,t),t) − ω(α,0)·exp(i∫Im(D_{α'}Z_t)∘h ds)|.
    pub identity_residual: Vec<f64>,
    pub min_inv_zap: Vec<f64>,
    /// Grid points with |u| < 10·min|u|.
    pub singular_proxy_size: Vec<usize>,
}

impl RigidityReport {
    pub fn angle_jump_drift(&self) -> f64 {
        match (self.angle_jump.first(), self.angle_jump.last()) {
            (Some(a), Some(b)) => (b - a).abs(),
            _ => 0.0,
        }
    }
}

fn omega_at(zap: &SpectralField, x: f64) -> C64 {
    let v = zap.eval(x);
    v / v.norm()
}

/// Tracks the tip characteristic α₀ and the offsets α₀ ± σ, and evaluates the
/// rotation identity along every tracked characteristic.
///
/// `offsets` must be positive; the first one is used for the angle jump.
pub fn rigidity_check(traj: &Trajectory, tip_alpha: f64, offsets: &[f64]) -> Result<RigidityReport, DiagnosticsError> {
    let sigma = *offsets.first().ok_or(DiagnosticsError::TooShort(1))?;
    let mut seeds: Vec<f64> = offsets.iter().flat_map(|&s| [tip_alpha - s, tip_alpha + s]).collect();
    seeds.push(tip_alpha);
    seeds.sort_by(f64::total_cmp);
    seeds.dedup();
    let tip_idx = seeds.iter().position(|&s| s == tip_alpha).expect("tip seeded");
    let left = seeds.iter().position(|&s| s == tip_alpha - sigma).expect("left seeded");
    let right = seeds.iter().position(|&s| s == tip_alpha + sigma).expect("right seeded");
    let flow = particle_flow(traj, &seeds).map_err(|e| DiagnosticsError::Flow(e.to_string()))?;

    let z0 = traj.snapshots[0].state.to_z();
    let omega0: Vec<C64> = seeds.iter().map(|&a| omega_at(z0.zap(), a)).collect();
    let mut rep = RigidityReport {
        tip_alpha,
        jump_offset: sigma,
        times: Vec::new(),
        tip_position: Vec::new(),
        tip_velocity: Vec::new(),
        tip_speed_error: Vec::new(),
        tip_rotation: Vec::new(),
        angle_jump: Vec::new(),
        identity_residual: Vec::new(),
        min_inv_zap: Vec::new(),
        singular_proxy_size: Vec::new(),
    };
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let z = snap.state.to_z();
        let g = snap.state.to_g()?;
        let pos = &flow.positions[i];
        let tip = pos[tip_idx];
        let vt = darcy_velocity(&z).eval(tip);
        let u = z.inv_zap();
        let rot = u.product(&derivative(u)).eval(tip).norm();
        let jump = g.g().eval(pos[left]).re - g.g().eval(pos[right]).re;
        let resid = seeds
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let predicted = omega0[j] * C64::from_polar(1.0, flow.phase[i][j]);
                (omega_at(z.zap(), pos[j]) - predicted).norm()
            })
            .fold(0.0, f64::max);
        let min_u = u.min_abs();
        rep.times.push(snap.state.time());
        rep.tip_position.push(tip);
        rep.tip_velocity.push((vt.re, vt.im));
        rep.tip_speed_error.push((vt + C64::new(0.0, 1.0)).norm());
        rep.tip_rotation.push(rot);
        rep.angle_jump.push(jump);
        rep.identity_residual.push(resid);
        rep.min_inv_zap.push(min_u);
        rep.singular_proxy_size.push(u.values().iter().filter(|v| v.norm() < 10.0 * min_u).count());
    }
    Ok(rep)
}

/// Difference energy between two runs compared along h̃ = h_b∘h_a⁻¹.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DifferencePair {
    pub times: Vec<f64>,
    /// h̃ at the grid nodes, one row per snapshot.
    pub htilde: Vec<Vec<f64>>,
    /// ‖Δu‖²_{Ḣ½}.
    pub hhalf_term: Vec<f64>,
    /// (‖Δu(·,0)‖_∞ + ‖Δu(·,0)‖_{Ḣ½})².
    pub initial_term: f64,
    /// ∫₀ᵗ‖Δ(Du)‖²₂ ds.
    pub integral_term: Vec<f64>,
    pub energy: Vec<f64>,
    /// Running supremum 𝓕(t).
    pub running_sup: Vec<f64>,
    /// 𝓕(t)/max(𝓕(0), 1e−30).
    pub ratio: Vec<f64>,
}

/// Floor applied to 𝓕(0) in the stability ratio.
pub const RATIO_FLOOR: f64 = 1e-30;

/// Solves α + d(α) = target for α by Newton's method on the interpolant of
/// the periodic displacement d.
fn invert_flow(disp: &SpectralField, ddisp: &SpectralField, target: f64) -> f64 {
    let mut a = target - disp.eval(target).re;
    for _ in 0..50 {
        let r = a + disp.eval(a).re - target;
        let slope = 1.0 + ddisp.eval(a).re;
        let step = r / slope;
        a -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    a
}

/// Δf = f_a − f_b∘h̃ on the grid of `fa`, with h̃ sampled at the nodes.
pub fn delta_along(fa: &SpectralField, fb: &SpectralField, htilde: &[f64]) -> SpectralField {
    let v: Vec<C64> = fa.values().iter().zip(htilde).map(|(a, &x)| a - fb.eval(x)).collect();
    SpectralField::from_values(fa.grid(), v)
}

/// 𝓔(t) = ‖Δu‖²_{Ḣ½} + ‖Δu(·,0)‖²_{L∞∩Ḣ½} + ∫₀ᵗ‖Δ(Du)‖²₂ with Δf = f_a − f_b∘h̃.
pub fn difference_energy(run_a: &Trajectory, run_b: &Trajectory) -> Result<DifferencePair, DiagnosticsError> {
    let grid = run_a.snapshots[0].state.grid().clone();
    if run_b.snapshots[0].state.grid() != &grid {
        return Err(DiagnosticsError::Mismatch("different grids".into()));
    }
    let ta = run_a.times();
    let tb = run_b.times();
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(DiagnosticsError::Mismatch("different time stamps".into()));
    }
    let seeds = grid.nodes();
    let fa = particle_flow(run_a, &seeds).map_err(|e| DiagnosticsError::Flow(e.to_string()))?;
    let fb = particle_flow(run_b, &seeds).map_err(|e| DiagnosticsError::Flow(e.to_string()))?;

    let mut out = DifferencePair {
        times: ta.clone(),
        htilde: Vec::new(),
        hhalf_term: Vec::new(),
        initial_term: 0.0,
        integral_term: Vec::new(),
        energy: Vec::new(),
        running_sup: Vec::new(),
        ratio: Vec::new(),
    };
    let mut integral = 0.0;
    let mut prev_integrand = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..ta.len() {
        let za = run_a.snapshots[i].state.to_z();
        let zb = run_b.snapshots[i].state.to_z();
        let disp = |pos: &[f64]| {
            let d: Vec<f64> = pos.iter().zip(&seeds).map(|(h, a)| h - a).collect();
            SpectralField::from_real_values(&grid, &d)
        };
        let da = disp(&fa.positions[i]);
        let db = disp(&fb.positions[i]);
        let dda = derivative(&da);
        let htilde: Vec<f64> = seeds
            .iter()
            .map(|&x| {
                let a = invert_flow(&da, &dda, x);
                a + db.eval(a).re
            })
            .collect();
        if htilde.windows(2).any(|w| !(w[1] > w[0])) || htilde[htilde.len() - 1] - htilde[0] >= 2.0 * PI {
            return Err(DiagnosticsError::NonMonotone(ta[i]));
        }
        let ua = za.inv_zap();
        let ub = zb.inv_zap();
        let dua = ua.product(&derivative(ua));
        let dub = ub.product(&derivative(ub));
        let du = delta_along(ua, ub, &htilde);
        let ddu = delta_along(&dua, &dub, &htilde);
        if i == 0 {
            out.initial_term = (norm_sup(&du) + norm_hhalf(&du)).powi(2);
        }
        let integrand = norm_l2(&ddu).powi(2);
        if i > 0 {
            integral += 0.5 * (ta[i] - ta[i - 1]) * (prev_integrand + integrand);
        }
        prev_integrand = integrand;
        let hh = norm_hhalf(&du).powi(2);
        let e = hh + out.initial_term + integral;
        sup = sup.max(e);
        out.htilde.push(htilde);
        out.hhalf_term.push(hh);
        out.integral_term.push(integral);
        out.energy.push(e);
        out.running_sup.push(sup);
    }
    let f0 = out.running_sup[0].max(RATIO_FLOOR);
    out.ratio = out.running_sup.iter().map(|f| f / f0).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{g_to_z, GFormState};
    use crate::spectral::Grid;

    #[test]
    fn flat_energies_vanish() {
        let grid = Grid::new(32).unwrap();
        let z = ZFormState::flat(&grid);
        assert_eq!(energy_m(&z).unwrap(), (0.0, 0.0));
        assert_eq!(energy_m1(&z).unwrap(), 0.0);
    }

    #[test]
    fn single_mode_energy_matches_closed_form() {
        // small g = a cos: u ≈ 1 − a e^{−iα}, so ∂u ≈ i a e^{−iα} and D²u ≈ ∂²u
        let grid = Grid::new(64).unwrap();
        let a = 1e-5;
        let s = GFormState::new(SpectralField::from_real_fn(&grid, |x| a * x.cos()), 0.0).unwrap();
        let z = g_to_z(&s);
        let (m, _) = energy_m(&z).unwrap();
        let want = 2.0 * PI * a * a * 2.0;
        assert!(((m - want) / want).abs() < 1e-4);
    }

    #[test]
    fn interior_values_increase_toward_boundary() {
        let grid = Grid::new(128).unwrap();
        let s = GFormState::new(crate::model::random_band_limited(&grid, 6, 0.3, 1), 0.0).unwrap();
        let rep = energy_m1_interior(&g_to_z(&s), &default_depths()).unwrap();
        assert!(rep.monotone);
        assert!(rep.sup_excess <= 1e-6);
    }

    #[test]
    fn three_point_rules_are_exact_on_quadratics() {
        let t = [0.1, 0.25, 0.45];
        let q = t.map(|x| 3.0 * x * x - x + 2.0);
        for (at, x) in t.iter().enumerate() {
            assert!((three_point_derivative(t, q, at) - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = DiagnosticsRecord {
            time: 0.0,
            m: 0.0,
            m_dissipation_accum: 0.0,
            m1: 0.0,
            e1: 0.0,
            e2: 0.0,
            e3: 0.0,
            hhalf_g: 0.0,
            cons_residual: None,
            g_min: 0.0,
            g_max: 0.0,
            f_max: 0.0,
            b1_min: 0.0,
        };
        let mut buf = Vec::new();
        write_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 13);
    }
}
