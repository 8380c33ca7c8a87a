//! Periodic grid, FFT services and Fourier-multiplier operators on [0, 2π).
//!
//! Convention: f(α) = Σ_k f̂(k) e^{ikα} with k ∈ {−n/2, …, n/2−1}. Coefficients
//! are stored in FFT order (index i ↦ k = i for i < n/2, k = i − n otherwise).
//!
//! A [`SpectralField`] is canonical in its coefficients: the sample values are
//! always the inverse transform of the stored coefficients, so a field rebuilt
//! from its coefficients is bit-identical to the original.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size must be even and at least 8, got {0}")]
    InvalidGridSize(usize),
    #[error("fields live on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),
    #[error("poisson extension depth must be negative, got {0}")]
    NonNegativeDepth(f64),
    #[error("derivative exponent must be non-negative, got {0}")]
    NegativeExponent(f64),
    #[error("mollifier scale must be non-negative and finite, got {0}")]
    InvalidMollifierScale(f64),
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Samples → coefficients, normalized so that f̂(k) = (1/n) Σ_j f_j e^{−ikα_j}.
pub(crate) fn forward_transform(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    let mut buf = values.to_vec();
    plans(n).forward.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Coefficients → samples.
pub(crate) fn inverse_transform(coeffs: &[C64]) -> Vec<C64> {
    let mut buf = coeffs.to_vec();
    plans(coeffs.len()).inverse.process(&mut buf);
    buf
}

/// Wavenumber of FFT index `i` on an `n`-point grid.
pub fn wavenumber_of(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT index of wavenumber `k` on an `m`-point grid.
fn index_of(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// Equispaced periodic grid on [0, 2π).
#[derive(Clone)]
pub struct Grid {
    n: usize,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid({})", self.n)
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Eq for Grid {}

impl Grid {
    pub fn new(n_points: usize) -> Result<Self, SpectralError> {
        if n_points < 8 || n_points % 2 != 0 {
            return Err(SpectralError::InvalidGridSize(n_points));
        }
        // warm the plan cache
        plans(n_points);
        Ok(Grid { n: n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    pub fn wavenumber(&self, index: usize) -> i64 {
        wavenumber_of(index, self.n)
    }

    pub fn wavenumbers(&self) -> Vec<i64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// Largest resolved |k|.
    pub fn k_max(&self) -> usize {
        self.n / 2
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Padded size used for dealiased quadratic products (3/2 rule).
    fn product_size(&self) -> usize {
        let m = 3 * self.n / 2;
        m + m % 2
    }
}

/// Periodic samples plus Fourier coefficients of a real or complex function.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    values: Vec<C64>,
    coeffs: Vec<C64>,
    real: bool,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.real == other.real && self.coeffs == other.coeffs
    }
}

fn hermitian_symmetrize(coeffs: &mut [C64]) {
    let n = coeffs.len();
    coeffs[0].im = 0.0;
    coeffs[n / 2].im = 0.0;
    for i in 1..n / 2 {
        let a = coeffs[i];
        let b = coeffs[n - i].conj();
        let avg = (a + b) * 0.5;
        coeffs[i] = avg;
        coeffs[n - i] = avg.conj();
    }
}

impl SpectralField {
    /// Builds a field from coefficients in FFT order. Real fields are projected
    /// onto exact Hermitian symmetry.
    ///
    /// Panics if `coeffs.len()` differs from the grid size.
    pub fn from_coeffs(grid: &Grid, mut coeffs: Vec<C64>, real: bool) -> Self {
        assert_eq!(coeffs.len(), grid.n, "coefficient count must match grid");
        if real {
            hermitian_symmetrize(&mut coeffs);
        }
        let mut values = inverse_transform(&coeffs);
        if real {
            for v in &mut values {
                v.im = 0.0;
            }
        }
        SpectralField { grid: grid.clone(), values, coeffs, real }
    }

    pub fn from_values(grid: &Grid, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.n, "sample count must match grid");
        Self::from_coeffs(grid, forward_transform(&values), false)
    }

    pub fn from_real_values(grid: &Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.n, "sample count must match grid");
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_coeffs(grid, forward_transform(&v), true)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> Self {
        Self::from_values(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let v: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        Self::from_real_values(grid, &v)
    }

    /// Constant field built from an exact single-mode coefficient vector.
    pub fn constant(grid: &Grid, c: C64) -> Self {
        let mut coeffs = vec![ZERO; grid.n];
        coeffs[0] = c;
        Self::from_coeffs(grid, coeffs, false)
    }

    pub fn real_constant(grid: &Grid, c: f64) -> Self {
        let mut coeffs = vec![ZERO; grid.n];
        coeffs[0] = C64::new(c, 0.0);
        Self::from_coeffs(grid, coeffs, true)
    }

    pub fn zeros(grid: &Grid, real: bool) -> Self {
        Self::from_coeffs(grid, vec![ZERO; grid.n], real)
    }

    /// Single Fourier mode `amp·e^{ikα}`.
    pub fn mode(grid: &Grid, k: i64, amp: C64) -> Self {
        let mut coeffs = vec![ZERO; grid.n];
        coeffs[index_of(k, grid.n)] = amp;
        Self::from_coeffs(grid, coeffs, false)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_points(&self) -> usize {
        self.grid.n
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn imag_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.im).collect()
    }

    /// Spatial mean, i.e. the zero mode.
    pub fn mean(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn check_grid(&self, other: &SpectralField) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
    }

    /// Reinterprets the field as real by discarding imaginary parts of the samples.
    pub fn re(&self) -> SpectralField {
        let v: Vec<f64> = self.real_values();
        Self::from_real_values(&self.grid, &v)
    }

    /// Imaginary part of the samples as a real field.
    pub fn im(&self) -> SpectralField {
        let v: Vec<f64> = self.imag_values();
        Self::from_real_values(&self.grid, &v)
    }

    /// Promotes a real field to a complex-tagged one (same data).
    pub fn to_complex(&self) -> SpectralField {
        SpectralField { real: false, ..self.clone() }
    }

    pub fn conj(&self) -> SpectralField {
        if self.real {
            return self.clone();
        }
        let n = self.grid.n;
        let coeffs: Vec<C64> = (0..n).map(|i| self.coeffs[(n - i) % n].conj()).collect();
        Self::from_coeffs(&self.grid, coeffs, false)
    }

    pub fn scale(&self, a: C64) -> SpectralField {
        let coeffs = self.coeffs.iter().map(|c| c * a).collect();
        Self::from_coeffs(&self.grid, coeffs, self.real && a.im == 0.0)
    }

    pub fn scale_real(&self, a: f64) -> SpectralField {
        self.scale(C64::new(a, 0.0))
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        self.check_grid(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Self::from_coeffs(&self.grid, coeffs, self.real && other.real)
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.check_grid(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Self::from_coeffs(&self.grid, coeffs, self.real && other.real)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: C64, other: &SpectralField) -> SpectralField {
        self.check_grid(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + a * y).collect();
        Self::from_coeffs(&self.grid, coeffs, self.real && other.real && a.im == 0.0)
    }

    pub fn add_constant(&self, c: C64) -> SpectralField {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += c;
        Self::from_coeffs(&self.grid, coeffs, self.real && c.im == 0.0)
    }

    /// Applies a Fourier multiplier. `preserves_real` declares that the symbol
    /// maps Hermitian coefficient sequences to Hermitian ones.
    pub fn apply_symbol(&self, symbol: impl Fn(i64) -> C64, preserves_real: bool) -> SpectralField {
        let n = self.grid.n;
        let coeffs = (0..n).map(|i| self.coeffs[i] * symbol(wavenumber_of(i, n))).collect();
        Self::from_coeffs(&self.grid, coeffs, self.real && preserves_real)
    }

    /// Keeps only modes with k ≤ 0 (boundary values of functions holomorphic in
    /// the lower half-plane) and drops the unpaired Nyquist mode.
    pub fn holomorphic_part(&self) -> SpectralField {
        let nyq = self.grid.k_max() as i64;
        self.apply_symbol(|k| if k > 0 || -k == nyq { ZERO } else { C64::new(1.0, 0.0) }, false)
    }

    /// Drops the unpaired Nyquist mode.
    pub fn without_nyquist(&self) -> SpectralField {
        let mut coeffs = self.coeffs.clone();
        coeffs[self.grid.nyquist_index()] = ZERO;
        Self::from_coeffs(&self.grid, coeffs, self.real)
    }

    /// Dealiased product: both factors are zero-padded to 3n/2 points, multiplied
    /// and truncated back. The Nyquist mode of the result is dropped.
    pub fn product(&self, other: &SpectralField) -> SpectralField {
        self.check_grid(other);
        let m = self.grid.product_size();
        let a = padded_values(&self.coeffs, m);
        let b = padded_values(&other.coeffs, m);
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let coeffs = truncated_coeffs(&prod, self.grid.n);
        Self::from_coeffs(&self.grid, coeffs, self.real && other.real)
    }

    /// Dealiased |f|², a real field.
    pub fn abs_sq(&self) -> SpectralField {
        let m = self.grid.product_size();
        let a = padded_values(&self.coeffs, m);
        let prod: Vec<C64> = a.iter().map(|x| C64::new(x.norm_sqr(), 0.0)).collect();
        Self::from_coeffs(&self.grid, truncated_coeffs(&prod, self.grid.n), true)
    }

    /// Applies a pointwise nonlinearity on a 2n-point refinement, then truncates.
    /// `real_out` declares the result real (imaginary parts are discarded).
    pub fn map_dealiased(&self, func: impl Fn(C64) -> C64, real_out: bool) -> SpectralField {
        let m = 2 * self.grid.n;
        let vals = padded_values(&self.coeffs, m);
        let mapped: Vec<C64> = vals
            .into_iter()
            .map(|v| {
                let r = func(v);
                if real_out {
                    C64::new(r.re, 0.0)
                } else {
                    r
                }
            })
            .collect();
        Self::from_coeffs(&self.grid, truncated_coeffs(&mapped, self.grid.n), real_out)
    }

    /// Applies a pointwise function on the grid samples (no refinement).
    pub fn map_pointwise(&self, func: impl Fn(C64) -> C64, real_out: bool) -> SpectralField {
        let vals: Vec<C64> = self
            .values
            .iter()
            .map(|&v| {
                let r = func(v);
                if real_out {
                    C64::new(r.re, 0.0)
                } else {
                    r
                }
            })
            .collect();
        let coeffs = forward_transform(&vals);
        Self::from_coeffs(&self.grid, coeffs, real_out)
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn eval(&self, x: f64) -> C64 {
        let n = self.grid.n;
        let half = n / 2;
        let mut acc = self.coeffs[0];
        let step = C64::from_polar(1.0, x);
        let mut w = step;
        for k in 1..half {
            if k % 32 == 0 {
                w = C64::from_polar(1.0, k as f64 * x);
            }
            acc += self.coeffs[k] * w + self.coeffs[n - k] * w.conj();
            w *= step;
        }
        acc += self.coeffs[half] * (half as f64 * x).cos();
        acc
    }

    /// Resamples onto an `m`-point grid (zero-padding or truncation of modes).
    pub fn resample(&self, grid: &Grid) -> SpectralField {
        let m = grid.n;
        let n = self.grid.n;
        let mut coeffs = vec![ZERO; m];
        let kmax = (n.min(m) / 2) as i64;
        for i in 0..n {
            let k = wavenumber_of(i, n);
            if k.abs() < kmax {
                coeffs[index_of(k, m)] = self.coeffs[i];
            }
        }
        Self::from_coeffs(grid, coeffs, self.real)
    }

    /// Translate: returns α ↦ f(α + theta).
    pub fn shift(&self, theta: f64) -> SpectralField {
        let nyq = self.grid.k_max() as i64;
        self.apply_symbol(
            |k| if k.abs() == nyq { ZERO } else { C64::from_polar(1.0, k as f64 * theta) },
            true,
        )
    }

    /// Location and value of the continuum maximum of a real field, refined
    /// from the grid maximum by golden-section search on the interpolant.
    pub fn refined_max(&self) -> (f64, f64) {
        refine_extremum(self, 1.0)
    }

    /// Location and value of the continuum minimum of a real field.
    pub fn refined_min(&self) -> (f64, f64) {
        let (x, v) = refine_extremum(self, -1.0);
        (x, -v)
    }
}

fn refine_extremum(f: &SpectralField, sign: f64) -> (f64, f64) {
    let vals = f.real_values();
    let (j, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bj, bv), (j, &v)| if sign * v > bv { (j, sign * v) } else { (bj, bv) });
    let h = f.grid().spacing();
    let obj = |x: f64| sign * f.eval(x).re;
    let mut a = f.grid().node(j) - h;
    let mut b = f.grid().node(j) + h;
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = obj(c);
    let mut fd = obj(d);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = obj(d);
        }
    }
    let x = 0.5 * (a + b);
    let best = obj(x).max(sign * vals[j]);
    (x.rem_euclid(2.0 * PI), best)
}

/// Places the non-Nyquist modes of `coeffs` into an `m`-point spectrum and
/// returns its samples.
fn padded_values(coeffs: &[C64], m: usize) -> Vec<C64> {
    let n = coeffs.len();
    let mut padded = vec![ZERO; m];
    for (i, &c) in coeffs.iter().enumerate() {
        let k = wavenumber_of(i, n);
        if k.unsigned_abs() as usize != n / 2 {
            padded[index_of(k, m)] = c;
        }
    }
    inverse_transform(&padded)
}

/// Forward transform of `m` samples, keeping the non-Nyquist modes of an
/// `n`-point grid.
fn truncated_coeffs(values: &[C64], n: usize) -> Vec<C64> {
    let m = values.len();
    let full = forward_transform(values);
    let mut coeffs = vec![ZERO; n];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let k = wavenumber_of(i, n);
        if k.unsigned_abs() as usize != n / 2 {
            *c = full[index_of(k, m)];
        }
    }
    coeffs
}

/// Samples of the trigonometric interpolant at β_m = (m + ½)·2π/M.
pub(crate) fn midpoint_samples(f: &SpectralField, m_points: usize) -> Vec<C64> {
    let n = f.n_points();
    assert!(m_points >= n);
    let mut padded = vec![ZERO; m_points];
    for (i, &c) in f.coeffs().iter().enumerate() {
        let k = wavenumber_of(i, n);
        if k.unsigned_abs() as usize != n / 2 {
            padded[index_of(k, m_points)] = c * C64::from_polar(1.0, k as f64 * PI / m_points as f64);
        }
    }
    inverse_transform(&padded)
}

fn sgn(k: i64) -> f64 {
    (k.signum()) as f64
}

fn is_nyquist(f: &SpectralField, k: i64) -> bool {
    k.unsigned_abs() as usize == f.grid().k_max()
}

/// Hilbert transform, symbol −sgn(k). The unpaired Nyquist mode is annihilated.
pub fn hilbert(f: &SpectralField) -> SpectralField {
    f.apply_symbol(|k| if is_nyquist(f, k) { ZERO } else { C64::new(-sgn(k), 0.0) }, false)
}

/// iℍ, symbol −i·sgn(k); maps real fields to real fields.
pub fn i_hilbert(f: &SpectralField) -> SpectralField {
    f.apply_symbol(|k| if is_nyquist(f, k) { ZERO } else { C64::new(0.0, -sgn(k)) }, true)
}

/// ∂_α, symbol ik.
pub fn derivative(f: &SpectralField) -> SpectralField {
    f.apply_symbol(|k| if is_nyquist(f, k) { ZERO } else { I * k as f64 }, true)
}

/// ∂²_α, symbol −k².
pub fn second_derivative(f: &SpectralField) -> SpectralField {
    f.apply_symbol(|k| if is_nyquist(f, k) { ZERO } else { C64::new(-((k * k) as f64), 0.0) }, true)
}

/// |∂|^s, symbol |k|^s (identity for s = 0).
pub fn abs_derivative(f: &SpectralField, s: f64) -> Result<SpectralField, SpectralError> {
    if !(s >= 0.0) {
        return Err(SpectralError::NegativeExponent(s));
    }
    if s == 0.0 {
        return Ok(f.clone());
    }
    Ok(f.apply_symbol(
        |k| if k == 0 || is_nyquist(f, k) { ZERO } else { C64::new((k.abs() as f64).powf(s), 0.0) },
        true,
    ))
}

/// |∂| with s = 1.
pub fn abs_d(f: &SpectralField) -> SpectralField {
    f.apply_symbol(|k| if is_nyquist(f, k) { ZERO } else { C64::new(k.abs() as f64, 0.0) }, true)
}

/// Mollifier profile shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// Gaussian bump, symbol e^{−(δk)²/2}.
    #[default]
    Gaussian,
    /// (1 + cos(πx/δ))/(2δ) on |x| ≤ δ.
    RaisedCosine,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MollifierSpec {
    pub delta: f64,
    pub profile: MollifierProfile,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        MollifierSpec { delta: 0.0, profile: MollifierProfile::Gaussian }
    }
}

impl MollifierSpec {
    pub fn new(delta: f64, profile: MollifierProfile) -> Result<Self, SpectralError> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(SpectralError::InvalidMollifierScale(delta));
        }
        Ok(MollifierSpec { delta, profile })
    }

    pub fn gaussian(delta: f64) -> Result<Self, SpectralError> {
        Self::new(delta, MollifierProfile::Gaussian)
    }

    pub fn is_identity(&self) -> bool {
        self.delta == 0.0
    }

    /// φ̂_δ(k).
    pub fn symbol(&self, k: i64) -> f64 {
        if self.delta == 0.0 || k == 0 {
            return 1.0;
        }
        let xi = self.delta * k as f64;
        match self.profile {
            MollifierProfile::Gaussian => (-0.5 * xi * xi).exp(),
            MollifierProfile::RaisedCosine => raised_cosine_symbol(xi.abs()),
        }
    }
}

/// Fourier transform of (1 + cos πx)/2 on [−1, 1]: π² sin ξ / (ξ(π² − ξ²)).
fn raised_cosine_symbol(xi: f64) -> f64 {
    if xi < 1e-6 {
        return 1.0 - xi * xi * (1.0 / 6.0 - 1.0 / (PI * PI));
    }
    let d = PI - xi;
    if d.abs() < 1e-6 {
        // sin ξ / (π − ξ) → 1 at ξ = π
        let ratio = 1.0 - d * d / 6.0;
        return PI * PI * ratio / (xi * (PI + xi));
    }
    PI * PI * xi.sin() / (xi * (PI * PI - xi * xi))
}

/// J_δ f.
pub fn mollify(f: &SpectralField, m: &MollifierSpec) -> SpectralField {
    if m.is_identity() {
        return f.clone();
    }
    f.apply_symbol(|k| C64::new(m.symbol(k), 0.0), true)
}

/// Harmonic extension to Im z = depth < 0, symbol e^{−|k||depth|}.
pub fn poisson_extend(f: &SpectralField, depth: f64) -> Result<SpectralField, SpectralError> {
    if !(depth < 0.0) {
        return Err(SpectralError::NonNegativeDepth(depth));
    }
    let y = depth.abs();
    Ok(f.apply_symbol(|k| C64::new((-(k.abs() as f64) * y).exp(), 0.0), true))
}

fn weighted_norm(f: &SpectralField, weight: impl Fn(i64) -> f64) -> f64 {
    let n = f.n_points();
    let s: f64 = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| weight(wavenumber_of(i, n)) * c.norm_sqr())
        .sum();
    (2.0 * PI * s).sqrt()
}

/// ‖f‖_{L²(0,2π)}.
pub fn norm_l2(f: &SpectralField) -> f64 {
    weighted_norm(f, |_| 1.0)
}

/// Homogeneous Ḣ^{1/2} seminorm.
pub fn norm_hhalf(f: &SpectralField) -> f64 {
    weighted_norm(f, |k| k.abs() as f64)
}

/// Homogeneous Ḣ^s seminorm (zero mode excluded).
pub fn norm_hdot(f: &SpectralField, s: f64) -> f64 {
    weighted_norm(f, |k| if k == 0 { 0.0 } else { (k.abs() as f64).powf(2.0 * s) })
}

/// Inhomogeneous H^s norm, weight (1 + k²)^s.
pub fn norm_hs(f: &SpectralField, s: f64) -> f64 {
    weighted_norm(f, |k| (1.0 + (k * k) as f64).powf(s))
}

/// ‖f‖_∞ over the grid samples.
pub fn norm_sup(f: &SpectralField) -> f64 {
    f.max_abs()
}

/// ∫₀^{2π} f dα.
pub fn integral(f: &SpectralField) -> C64 {
    f.mean() * (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_rejects_odd_and_small() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(10).is_ok());
        let g = grid(16);
        assert_eq!(g.node(4), PI / 2.0);
        assert_eq!(g.wavenumbers()[8], -8);
    }

    #[test]
    fn hilbert_examples() {
        let g = grid(32);
        let f = SpectralField::from_real_fn(&g, f64::cos);
        let want = SpectralField::from_fn(&g, |a| C64::new(0.0, -a.sin()));
        assert!(max_diff(&hilbert(&f), &want) < 1e-14);
        let one = SpectralField::real_constant(&g, 1.0);
        assert_eq!(hilbert(&one).max_abs(), 0.0);
        let e = SpectralField::mode(&g, -1, C64::new(1.0, 0.0));
        assert!(max_diff(&hilbert(&e), &e) < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let g = grid(32);
        let s = SpectralField::from_real_fn(&g, f64::sin);
        let c = SpectralField::from_real_fn(&g, f64::cos);
        assert!(max_diff(&derivative(&s), &c) < 1e-14);
        assert!(derivative(&SpectralField::real_constant(&g, 3.0)).max_abs() == 0.0);
        let e3 = SpectralField::mode(&g, 3, C64::new(1.0, 0.0));
        assert!(max_diff(&derivative(&e3), &e3.scale(C64::new(0.0, 3.0))) < 1e-13);
    }

    #[test]
    fn abs_derivative_examples() {
        let g = grid(32);
        let c = SpectralField::from_real_fn(&g, f64::cos);
        assert!(max_diff(&abs_derivative(&c, 1.0).unwrap(), &c) < 1e-14);
        let s2 = SpectralField::from_real_fn(&g, |a| (2.0 * a).sin());
        assert!(max_diff(&abs_derivative(&s2, 1.0).unwrap(), &s2.scale_real(2.0)) < 1e-13);
        assert!(abs_derivative(&c, -1.0).is_err());
        assert_eq!(abs_derivative(&SpectralField::real_constant(&g, 1.0), 1.0).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn norms_of_cosine() {
        let g = grid(64);
        let c = SpectralField::from_real_fn(&g, f64::cos);
        assert!((norm_hhalf(&c) - PI.sqrt()).abs() < 1e-14);
        assert!((norm_l2(&c) - PI.sqrt()).abs() < 1e-14);
        assert_eq!(norm_hhalf(&SpectralField::real_constant(&g, 2.0)), 0.0);
        assert!((norm_hs(&c, 1.0) - (2.0 * PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn poisson_examples() {
        let g = grid(32);
        let e = SpectralField::mode(&g, -1, C64::new(1.0, 0.0));
        let p = poisson_extend(&e, -1.0).unwrap();
        assert!(max_diff(&p, &e.scale_real((-1f64).exp())) < 1e-15);
        let one = SpectralField::real_constant(&g, 1.0);
        assert!(max_diff(&poisson_extend(&one, -3.0).unwrap(), &one) < 1e-15);
        assert!(poisson_extend(&one, 0.0).is_err());
        let c = SpectralField::from_real_fn(&g, |a| (2.0 * a).cos() + a.sin());
        assert!(max_diff(&poisson_extend(&c, -1e-14).unwrap(), &c) < 1e-12);
    }

    #[test]
    fn mollifier_basics() {
        let g = grid(32);
        let c = SpectralField::from_real_fn(&g, |a| a.cos() + 0.5);
        assert_eq!(mollify(&c, &MollifierSpec::default()), c);
        let one = SpectralField::real_constant(&g, 4.0);
        for profile in [MollifierProfile::Gaussian, MollifierProfile::RaisedCosine] {
            let m = MollifierSpec::new(0.3, profile).unwrap();
            assert!(max_diff(&mollify(&one, &m), &one) < 1e-15);
            for k in -100..100 {
                let s = m.symbol(k);
                assert!(s.abs() <= 1.0 + 1e-15 && (s - m.symbol(-k)).abs() == 0.0);
            }
        }
        // continuity through the removable singularity
        let a = raised_cosine_symbol(PI - 1e-7);
        let b = raised_cosine_symbol(PI + 1e-3);
        assert!((a - 0.5).abs() < 1e-6 && (b - 0.5).abs() < 1e-3);
    }

    #[test]
    fn product_is_exact_for_band_limited() {
        let g = grid(16);
        let a = SpectralField::from_real_fn(&g, |x| (3.0 * x).cos());
        let b = SpectralField::from_real_fn(&g, |x| (4.0 * x).sin());
        let want = SpectralField::from_real_fn(&g, |x| 0.5 * ((7.0 * x).sin() + x.sin()));
        assert!(max_diff(&a.product(&b), &want) < 1e-14);
    }

    #[test]
    fn canonical_roundtrip_is_bit_exact() {
        let g = grid(24);
        let f = SpectralField::from_fn(&g, |x| C64::new(x.sin().exp(), (2.0 * x).cos()));
        let again = SpectralField::from_coeffs(&g, f.coeffs().to_vec(), false);
        assert_eq!(f.values(), again.values());
        let r = SpectralField::from_real_fn(&g, |x| (x.cos()).exp());
        let again = SpectralField::from_coeffs(&g, r.coeffs().to_vec(), true);
        assert_eq!(r.values(), again.values());
    }

    #[test]
    fn eval_matches_nodes_and_refined_extrema() {
        let g = grid(32);
        let f = SpectralField::from_real_fn(&g, |x| (x - 0.3).cos());
        for j in [0, 5, 17] {
            assert!((f.eval(g.node(j)).re - f.values()[j].re).abs() < 1e-13);
        }
        let (x, v) = f.refined_max();
        assert!((x - 0.3).abs() < 1e-6 && (v - 1.0).abs() < 1e-14);
        let (_, v) = f.refined_min();
        assert!((v + 1.0).abs() < 1e-14);
    }

    #[test]
    fn midpoint_samples_match_function() {
        let g = grid(16);
        let f = SpectralField::from_real_fn(&g, |x| (2.0 * x).sin());
        let s = midpoint_samples(&f, 32);
        for (m, v) in s.iter().enumerate() {
            let b = (m as f64 + 0.5) * 2.0 * PI / 32.0;
            assert!((v.re - (2.0 * b).sin()).abs() < 1e-14 && v.im.abs() < 1e-14);
        }
    }
}
