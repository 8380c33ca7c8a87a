//! States and right-hand sides of the two equivalent interface formulations.
//!
//! The scalar form evolves the tangent angle g with f = iℍg, c = e^{−f} and
//! b = −iℍ(c²):
//!
//! ∂ₜg = −b∂g − c²|∂|g.
//!
//! The complex form evolves u = 1/Z_{,α'} in Eulerian form,
//!
//! ∂ₜu = −(b + ic²)∂u + B₁u,  with c² = |u|² and B₁ = −2 Im([ū, ℍ]∂u),
//!
//! together with Z − α'. The two are linked by Z_{,α'} = exp(i(𝕀 + ℍ)g).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::oracle::{self, DualEvaluation};
use crate::spectral::{abs_d, derivative, hilbert, i_hilbert, norm_l2, Grid, SpectralField, C64};

/// Smallest |Z_{,α'}| accepted by operations that need a logarithm or 1/u.
pub const MIN_ZAP: f64 = 1e-8;

/// Width of the broad return transition in [`make_corner_data`].
pub const CORNER_RETURN_WIDTH: f64 = 0.3;

const REALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("field expected to be real has imaginary part {0:e}")]
    NotReal(f64),
    #[error("|Z_alpha| = {0:e} is too close to zero for a continuous logarithm")]
    NearSingular(f64),
    #[error("1/Z_alpha vanishes or is not finite (min modulus {0:e})")]
    DegenerateInverse(f64),
    #[error("phase of Z_alpha winds {0} times around the origin")]
    NonzeroWinding(i64),
    #[error("nu must lie in (0,1), got {0}")]
    InvalidAngle(f64),
    #[error("corner regularization eps must be positive, got {0}")]
    InvalidCornerWidth(f64),
    #[error("non-finite values in state")]
    NonFinite,
}

/// Tangent-angle state g at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct GFormState {
    g: SpectralField,
    time: f64,
}

impl GFormState {
    /// Accepts fields whose imaginary part is below 1e−12; the result is tagged real.
    pub fn new(g: SpectralField, time: f64) -> Result<Self, ModelError> {
        if !g.is_finite() {
            return Err(ModelError::NonFinite);
        }
        let g = if g.is_real() {
            g
        } else {
            let im = g.max_imag();
            if im > REALITY_TOL {
                return Err(ModelError::NotReal(im));
            }
            g.re()
        };
        Ok(GFormState { g, time })
    }

    pub fn flat(grid: &Grid) -> Self {
        GFormState { g: SpectralField::zeros(grid, true), time: 0.0 }
    }

    pub fn g(&self) -> &SpectralField {
        &self.g
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    pub fn with_time(&self, time: f64) -> Self {
        GFormState { g: self.g.clone(), time }
    }

    /// f = iℍg = log|Z_{,α'}|.
    pub fn f(&self) -> SpectralField {
        i_hilbert(&self.g)
    }
}

/// Complex-form state: 1/Z_{,α'}, Z_{,α'} and Z − α'.
#[derive(Clone, Debug, PartialEq)]
pub struct ZFormState {
    inv_zap: SpectralField,
    zap: SpectralField,
    z_minus_id: SpectralField,
    time: f64,
}

impl ZFormState {
    /// Builds a state from 1/Z_{,α'}; Z_{,α'} is its dealiased reciprocal.
    pub fn new(inv_zap: SpectralField, z_minus_id: SpectralField, time: f64) -> Result<Self, ModelError> {
        let zap = reciprocal(&inv_zap)?;
        Ok(ZFormState { inv_zap: inv_zap.to_complex(), zap, z_minus_id: z_minus_id.to_complex(), time })
    }

    /// Assembles a state without recomputing the reciprocal.
    pub fn from_parts(inv_zap: SpectralField, zap: SpectralField, z_minus_id: SpectralField, time: f64) -> Self {
        ZFormState { inv_zap, zap, z_minus_id, time }
    }

    pub fn flat(grid: &Grid) -> Self {
        let one = SpectralField::constant(grid, C64::new(1.0, 0.0));
        ZFormState { inv_zap: one.clone(), zap: one, z_minus_id: SpectralField::zeros(grid, false), time: 0.0 }
    }

    pub fn inv_zap(&self) -> &SpectralField {
        &self.inv_zap
    }

    pub fn zap(&self) -> &SpectralField {
        &self.zap
    }

    pub fn z_minus_id(&self) -> &SpectralField {
        &self.z_minus_id
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &Grid {
        self.inv_zap.grid()
    }

    pub fn with_time(&self, time: f64) -> Self {
        ZFormState { time, ..self.clone() }
    }

    /// ω = Z_{,α'}/|Z_{,α'}| at the nodes.
    pub fn omega(&self) -> Vec<C64> {
        self.zap.values().iter().map(|z| z / z.norm()).collect()
    }

    /// |Z_{,α'}| at the nodes.
    pub fn abs_zap(&self) -> Vec<f64> {
        self.zap.values().iter().map(|z| z.norm()).collect()
    }

    /// Z(α') at the nodes.
    pub fn curve(&self) -> Vec<C64> {
        let grid = self.grid();
        self.z_minus_id.values().iter().enumerate().map(|(j, z)| z + grid.node(j)).collect()
    }
}

/// A state of either formulation.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    G(GFormState),
    Z(ZFormState),
}

impl State {
    pub fn time(&self) -> f64 {
        match self {
            State::G(s) => s.time(),
            State::Z(z) => z.time(),
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            State::G(s) => s.grid(),
            State::Z(z) => z.grid(),
        }
    }

    pub fn with_time(&self, time: f64) -> State {
        match self {
            State::G(s) => State::G(s.with_time(time)),
            State::Z(z) => State::Z(z.with_time(time)),
        }
    }

    /// Tag used in snapshot files and summaries.
    pub fn formulation_tag(&self) -> &'static str {
        match self {
            State::G(_) => "g",
            State::Z(_) => "z",
        }
    }

    pub fn to_g(&self) -> Result<GFormState, ModelError> {
        match self {
            State::G(s) => Ok(s.clone()),
            State::Z(z) => z_to_g(z),
        }
    }

    pub fn to_z(&self) -> ZFormState {
        match self {
            State::G(s) => g_to_z(s),
            State::Z(z) => z.clone(),
        }
    }
}

/// 1/u on a refined grid, projected onto k ≤ 0.
pub fn reciprocal(u: &SpectralField) -> Result<SpectralField, ModelError> {
    let m = u.min_abs();
    if !(m > 0.0) || !u.is_finite() {
        return Err(ModelError::DegenerateInverse(m));
    }
    Ok(u.map_dealiased(|v| 1.0 / v, false).holomorphic_part())
}

/// Derived coefficients of one state.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    /// c = 1/|Z_{,α'}|.
    pub c: SpectralField,
    pub b: SpectralField,
    pub b1: SpectralField,
    /// 𝒜 = 1/|Z_{,α'}|² = c².
    pub script_a: SpectralField,
}

/// c = exp(−iℍg), real and positive.
pub fn compute_c(s: &GFormState) -> Result<SpectralField, ModelError> {
    let exponent = hilbert(s.g()).scale(C64::new(0.0, -1.0));
    let im = exponent.max_imag();
    let scale = 1.0 + exponent.max_abs();
    if im > REALITY_TOL * scale {
        return Err(ModelError::NotReal(im));
    }
    Ok(exponent.map_dealiased(|v| C64::new(v.re.exp(), 0.0), true))
}

/// c² = exp(−2iℍg) evaluated directly rather than by squaring c.
pub fn compute_c_squared(s: &GFormState) -> SpectralField {
    s.f().map_dealiased(|v| C64::new((-2.0 * v.re).exp(), 0.0), true)
}

/// b = −iℍ(c²); the zero mode of b vanishes.
pub fn compute_b(c: &SpectralField) -> SpectralField {
    b_from_c_squared(&c.abs_sq())
}

pub fn b_from_c_squared(c2: &SpectralField) -> SpectralField {
    i_hilbert(c2).scale_real(-1.0)
}

/// B₁ = −2 Im([ū, ℍ]∂u) by spectral composition.
pub fn b1_spectral(u: &SpectralField) -> SpectralField {
    oracle::commutator_spectral(&u.conj(), u).im().scale_real(-2.0)
}

/// B₁ from the commutator form, cross-checked against the positive kernel
/// (1/π)∫|Δu|²/(4 sin²(Δα/2)).
pub fn compute_b1(z: &ZFormState) -> DualEvaluation {
    let u = z.inv_zap();
    let scale = u.max_abs() * norm_l2(&derivative(u));
    DualEvaluation::new(b1_spectral(u), oracle::squared_difference_quadrature(u), scale)
}

/// Coefficients of a complex-form state.
pub fn coefficients_z(z: &ZFormState) -> CoefficientSet {
    let u = z.inv_zap();
    let script_a = u.abs_sq();
    let c = u.map_dealiased(|v| C64::new(v.norm(), 0.0), true);
    CoefficientSet { b: b_from_c_squared(&script_a), b1: b1_spectral(u), c, script_a }
}

/// Coefficients of a scalar-form state (B₁ via the complex form).
pub fn coefficients_g(s: &GFormState) -> Result<CoefficientSet, ModelError> {
    let c = compute_c(s)?;
    let script_a = compute_c_squared(s);
    let z = g_to_z(s);
    Ok(CoefficientSet { b: b_from_c_squared(&script_a), b1: b1_spectral(z.inv_zap()), c, script_a })
}

/// −b∂g − c²|∂|g for a real field g.
pub fn g_nonlinearity(g: &SpectralField) -> SpectralField {
    let f = i_hilbert(g);
    let c2 = f.map_dealiased(|v| C64::new((-2.0 * v.re).exp(), 0.0), true);
    let b = b_from_c_squared(&c2);
    let transport = b.product(&derivative(g));
    let damping = c2.product(&abs_d(g));
    transport.add(&damping).scale_real(-1.0)
}

/// ∂ₜg of the unmollified system.
pub fn rhs_g(s: &GFormState) -> SpectralField {
    g_nonlinearity(s.g())
}

/// Eulerian ∂ₜ(1/Z_{,α'}) = −(b + ic²)∂u + B₁u.
pub fn rhs_invzap(z: &ZFormState) -> SpectralField {
    let u = z.inv_zap();
    let coeff = coefficients_z(z);
    invzap_rhs_with(u, &coeff)
}

pub(crate) fn invzap_rhs_with(u: &SpectralField, coeff: &CoefficientSet) -> SpectralField {
    let du = derivative(u);
    let drift = coeff.b.to_complex().add(&coeff.script_a.scale(C64::new(0.0, 1.0)));
    coeff.b1.product(u).sub(&drift.product(&du))
}

/// ∂ₜ(Z − α') = Z_t − bZ_{,α'} = −i + iū − bZ_{,α'}.
pub fn rhs_z_minus_id(z: &ZFormState, b: &SpectralField) -> SpectralField {
    darcy_velocity(z).sub(&b.product(z.zap()))
}

/// Z_t = conj(i − i·u).
pub fn darcy_velocity(z: &ZFormState) -> SpectralField {
    let i = C64::new(0.0, 1.0);
    z.inv_zap().scale(-i).add_constant(i).conj()
}

/// Z_{,α'} = exp(i(g + ℍg)), u = exp(−i(g + ℍg)), Z − α' = ∫(Z_{,α'} − 1) with zero mean.
pub fn g_to_z(s: &GFormState) -> ZFormState {
    let i = C64::new(0.0, 1.0);
    let g = s.g();
    // i(g + ℍg) = ig + f
    let exponent = g.to_complex().scale(i).add(&s.f());
    let zap = exponent.map_dealiased(|v| v.exp(), false).holomorphic_part();
    let inv_zap = exponent.map_dealiased(|v| (-v).exp(), false).holomorphic_part();
    let z_minus_id = antiderivative(&zap.add_constant(C64::new(-1.0, 0.0)));
    ZFormState { inv_zap, zap, z_minus_id, time: s.time() }
}

/// Mean-free antiderivative.
pub fn antiderivative(f: &SpectralField) -> SpectralField {
    let nyq = f.grid().k_max() as i64;
    f.apply_symbol(
        |k| if k == 0 || k.abs() == nyq { C64::new(0.0, 0.0) } else { C64::new(0.0, -1.0 / k as f64) },
        true,
    )
}

/// g = Im log Z_{,α'} on a continuous branch.
///
/// The phase is unwrapped along the grid starting at the node of largest
/// |Z_{,α'}|; the 2π ambiguity is fixed so that e^{i·mean(g)} matches the
/// phase of the zero mode of Z_{,α'}, which makes this the exact inverse of
/// [`g_to_z`].
pub fn z_to_g(z: &ZFormState) -> Result<GFormState, ModelError> {
    let vals = z.zap().values();
    let min = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(min >= MIN_ZAP) {
        return Err(ModelError::NearSingular(min));
    }
    let n = vals.len();
    let start = (0..n).fold(0, |best, j| if vals[j].norm() > vals[best].norm() { j } else { best });
    let mut g = vec![0.0; n];
    let mut phase = vals[start].arg();
    g[start] = phase;
    for step in 1..=n {
        let j = (start + step) % n;
        let prev = (start + step - 1) % n;
        phase += (vals[j] / vals[prev]).arg();
        if step < n {
            g[j] = phase;
        }
    }
    let winding = ((phase - g[start]) / (2.0 * PI)).round() as i64;
    if winding != 0 {
        return Err(ModelError::NonzeroWinding(winding));
    }
    let mean = g.iter().sum::<f64>() / n as f64;
    let target = z.zap().mean().arg();
    let shift = 2.0 * PI * ((target - mean) / (2.0 * PI)).round();
    for v in &mut g {
        *v += shift;
    }
    GFormState::new(SpectralField::from_real_values(z.grid(), &g), z.time())
}

/// Smoothed corner of interior angle νπ at α' = π.
///
/// g₀ is a periodic square wave of height (1−ν)π: a sharp downward step at π
/// of Gaussian width `eps`, and a broad upward return at 0 of width
/// [`CORNER_RETURN_WIDTH`]. Its mean is zero.
pub fn make_corner_data(nu: f64, eps: f64, grid: &Grid) -> Result<GFormState, ModelError> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(ModelError::InvalidAngle(nu));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ModelError::InvalidCornerWidth(eps));
    }
    let n = grid.n_points();
    let height = (1.0 - nu) * PI;
    let coeffs: Vec<C64> = (0..n)
        .map(|i| {
            let k = grid.wavenumber(i);
            if k == 0 || k.unsigned_abs() as usize == n / 2 {
                return C64::new(0.0, 0.0);
            }
            let kf = k as f64;
            let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
            let jump = (-0.5 * (eps * kf).powi(2)).exp();
            let ret = parity * (-0.5 * (CORNER_RETURN_WIDTH * kf).powi(2)).exp();
            // step profile centred at π, shifted into α coordinates by (−1)^k
            C64::new(0.0, parity * height * (jump - ret) / (2.0 * PI * kf))
        })
        .collect();
    GFormState::new(SpectralField::from_coeffs(grid, coeffs, true), 0.0)
}

/// Seeded real band-limited field Σ_{1≤k≤kmax} a_k cos(kα) + b_k sin(kα) with
/// a_k, b_k uniform in [−amp/k, amp/k].
pub fn random_band_limited(grid: &Grid, kmax: usize, amplitude: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_points();
    let kmax = kmax.min(n / 2 - 1);
    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    for k in 1..=kmax {
        let w = amplitude / k as f64;
        let a: f64 = rng.gen_range(-w..=w);
        let b: f64 = rng.gen_range(-w..=w);
        // a cos + b sin = ((a − ib)/2) e^{ikα} + c.c.
        let c = C64::new(0.5 * a, -0.5 * b);
        coeffs[k] = c;
        coeffs[n - k] = c.conj();
    }
    SpectralField::from_coeffs(grid, coeffs, true)
}

/// Seeded complex band-limited field with modes −kmax ≤ k ≤ 0 (holomorphic in
/// the lower half-plane), zero mode 1.
pub fn random_holomorphic(grid: &Grid, kmax: usize, amplitude: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_points();
    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    coeffs[0] = C64::new(1.0, 0.0);
    for k in 1..=kmax.min(n / 2 - 1) {
        let w = amplitude / (k * k) as f64;
        coeffs[n - k] = C64::new(rng.gen_range(-w..=w), rng.gen_range(-w..=w));
    }
    SpectralField::from_coeffs(grid, coeffs, false)
}
