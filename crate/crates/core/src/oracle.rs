//! Brute-force quadrature of the periodic singular kernels.
//!
//! Targets are the grid nodes; sources sit at nodes shifted by half a spacing,
//! so no kernel is ever evaluated at coincidence. Source samples come from the
//! trigonometric interpolant. Each evaluation is done with M = n and M = 2n
//! sources; the finer result is returned and the L² difference between the
//! two is the error estimate.

use std::f64::consts::PI;

use crate::spectral::{self, midpoint_samples, norm_l2, C64, SpectralField};

/// Relative discrepancy above which a dual-path evaluation is flagged.
pub const DISCREPANCY_WARN: f64 = 1e-6;

/// Below this separation a difference quotient is replaced by the derivative.
pub const COINCIDENCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct KernelEvaluation {
    pub target: SpectralField,
    pub quadrature_error_estimate: f64,
}

/// Result of an operator computed both spectrally and by quadrature.
#[derive(Clone, Debug)]
pub struct DualEvaluation {
    /// Spectral composition (the authoritative value).
    pub value: SpectralField,
    pub quadrature: KernelEvaluation,
    /// ‖value − quadrature‖₂ relative to the larger of the two results and
    /// the operator's natural scale.
    pub discrepancy: f64,
    pub warning: bool,
}

impl DualEvaluation {
    pub(crate) fn new(value: SpectralField, quadrature: KernelEvaluation, scale: f64) -> Self {
        let gap = norm_l2(&value.sub(&quadrature.target));
        let denom = norm_l2(&value).max(norm_l2(&quadrature.target)).max(scale).max(1e-300);
        let discrepancy = gap / denom;
        DualEvaluation { warning: discrepancy > DISCREPANCY_WARN, value, quadrature, discrepancy }
    }
}

/// ‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, 1e−12).
pub fn relative_gap(a: &SpectralField, b: &SpectralField) -> f64 {
    let gap = norm_l2(&a.sub(b));
    gap / norm_l2(a).max(norm_l2(b)).max(1e-12)
}

/// Source samples for one quadrature level.
struct Sources {
    m: usize,
    /// α_j − β_m for target j = 0 and every source m; shifting the target by
    /// one node shifts the source index by M/n.
    offsets: Vec<f64>,
}

impl Sources {
    fn new(m: usize) -> Self {
        let offsets = (0..m).map(|s| -(s as f64 + 0.5) * 2.0 * PI / m as f64).collect();
        Sources { m, offsets }
    }

    /// Separation α_j − β_s wrapped into (−π, π).
    fn separation(&self, j: usize, s: usize, n: usize) -> f64 {
        let stride = self.m / n;
        let idx = (s + self.m - (j * stride) % self.m) % self.m;
        let x = self.offsets[idx];
        if x < -PI {
            x + 2.0 * PI
        } else {
            x
        }
    }
}

/// Runs `kernel(j, s, x)` summed over sources with weight 2π/M at both levels.
fn two_level(
    f: &SpectralField,
    level: impl Fn(usize) -> Box<dyn Fn(usize, usize, f64) -> C64>,
    prefactor: C64,
    real_out: bool,
) -> KernelEvaluation {
    let grid = f.grid();
    let n = grid.n_points();
    let mut results = Vec::with_capacity(2);
    for m in [n, 2 * n] {
        let src = Sources::new(m);
        let kernel = level(m);
        let w = 2.0 * PI / m as f64;
        let vals: Vec<C64> = (0..n)
            .map(|j| {
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..m {
                    acc += kernel(j, s, src.separation(j, s, n));
                }
                acc * w * prefactor
            })
            .collect();
        results.push(vals);
    }
    let h = grid.spacing();
    let est = results[0].iter().zip(&results[1]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * h;
    let fine = results.pop().expect("two levels");
    let target = if real_out {
        SpectralField::from_real_values(grid, &fine.iter().map(|v| v.re).collect::<Vec<_>>())
    } else {
        SpectralField::from_values(grid, fine)
    };
    KernelEvaluation { target, quadrature_error_estimate: est.sqrt() }
}

/// Difference quotient (a − b)/x with the derivative limit at coincidence.
fn quotient(a: C64, b: C64, x: f64, derivative: C64) -> C64 {
    if x.abs() < COINCIDENCE {
        derivative
    } else {
        (a - b) / x
    }
}

/// ℍf(α) = (1/(2πi)) p.v.∫ f(β) cot((α−β)/2) dβ.
pub fn pv_hilbert_quadrature(f: &SpectralField) -> KernelEvaluation {
    two_level(
        f,
        |m| {
            let fb = midpoint_samples(f, m);
            Box::new(move |_, s, x| fb[s] / (0.5 * x).tan())
        },
        C64::new(0.0, -1.0 / (2.0 * PI)),
        false,
    )
}

/// |∂|f(α) = (1/π)∫ (f(α) − f(β)) / (4 sin²((α−β)/2)) dβ.
pub fn abs_derivative_quadrature(f: &SpectralField) -> KernelEvaluation {
    let fa = f.values().to_vec();
    let real = f.is_real();
    two_level(
        f,
        move |m| {
            let fb = midpoint_samples(f, m);
            let fa = fa.clone();
            Box::new(move |j, s, x| {
                let sn = (0.5 * x).sin();
                (fa[j] - fb[s]) / (4.0 * sn * sn)
            })
        },
        C64::new(1.0 / PI, 0.0),
        real,
    )
}

/// Quadrature of [f, ℍ]∂g(α) = (1/(2πi))∫ (f(α) − f(β)) cot((α−β)/2) g′(β) dβ.
pub fn commutator_quadrature(f: &SpectralField, g: &SpectralField) -> KernelEvaluation {
    let fa = f.values().to_vec();
    let dg = spectral::derivative(g);
    two_level(
        f,
        move |m| {
            let fb = midpoint_samples(f, m);
            let gb = midpoint_samples(&dg, m);
            let fa = fa.clone();
            Box::new(move |j, s, x| (fa[j] - fb[s]) * gb[s] / (0.5 * x).tan())
        },
        C64::new(0.0, -1.0 / (2.0 * PI)),
        false,
    )
}

/// Spectral composition f·ℍ(∂g) − ℍ(f·∂g).
pub fn commutator_spectral(f: &SpectralField, g: &SpectralField) -> SpectralField {
    let dg = spectral::derivative(g);
    f.product(&spectral::hilbert(&dg)).sub(&spectral::hilbert(&f.product(&dg)))
}

/// [f, ℍ]∂g evaluated spectrally, with the kernel quadrature as a cross-check.
pub fn commutator_h(f: &SpectralField, g: &SpectralField) -> DualEvaluation {
    let scale = f.max_abs() * norm_l2(&spectral::derivative(g));
    DualEvaluation::new(commutator_spectral(f, g), commutator_quadrature(f, g), scale)
}

/// [f₁, f₂; f₃](α) = (1/(iπ))∫ Δf₁ Δf₂ / (4 sin²((α−β)/2)) f₃(β) dβ.
///
/// Symmetric in f₁ and f₂ bit for bit.
pub fn triple_bracket(f1: &SpectralField, f2: &SpectralField, f3: &SpectralField) -> KernelEvaluation {
    let a1 = f1.values().to_vec();
    let a2 = f2.values().to_vec();
    let d1 = spectral::derivative(f1).values().to_vec();
    let d2 = spectral::derivative(f2).values().to_vec();
    two_level(
        f1,
        move |m| {
            let b1 = midpoint_samples(f1, m);
            let b2 = midpoint_samples(f2, m);
            let b3 = midpoint_samples(f3, m);
            let (a1, a2, d1, d2) = (a1.clone(), a2.clone(), d1.clone(), d2.clone());
            Box::new(move |j, s, x| {
                let chord = 2.0 * (0.5 * x).sin();
                let q1 = quotient(a1[j], b1[s], chord, d1[j]);
                let q2 = quotient(a2[j], b2[s], chord, d2[j]);
                q1 * q2 * b3[s]
            })
        },
        C64::new(0.0, -1.0 / PI),
        false,
    )
}

/// Positive-kernel form (1/π)∫ |u(α) − u(β)|² / (4 sin²((α−β)/2)) dβ.
pub fn squared_difference_quadrature(u: &SpectralField) -> KernelEvaluation {
    let ua = u.values().to_vec();
    two_level(
        u,
        move |m| {
            let ub = midpoint_samples(u, m);
            let ua = ua.clone();
            Box::new(move |j, s, x| {
                let sn = (0.5 * x).sin();
                C64::new((ua[j] - ub[s]).norm_sqr() / (4.0 * sn * sn), 0.0)
            })
        },
        C64::new(1.0 / PI, 0.0),
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{abs_d, hilbert, Grid};

    #[test]
    fn hilbert_of_cos() {
        let g = Grid::new(64).unwrap();
        let f = SpectralField::from_real_fn(&g, f64::cos);
        let q = pv_hilbert_quadrature(&f);
        assert!(relative_gap(&q.target, &hilbert(&f)) < 1e-10);
        let one = SpectralField::real_constant(&g, 1.0);
        assert!(pv_hilbert_quadrature(&one).target.max_abs() < 1e-13);
    }

    #[test]
    fn abs_derivative_kernel_form() {
        let g = Grid::new(64).unwrap();
        let f = SpectralField::from_real_fn(&g, |x| (x.sin()).exp());
        let q = abs_derivative_quadrature(&f);
        assert!(relative_gap(&q.target, &abs_d(&f)) < 1e-10, "{}", relative_gap(&q.target, &abs_d(&f)));
    }

    #[test]
    fn commutator_with_constants_vanishes() {
        let g = Grid::new(32).unwrap();
        let c = SpectralField::real_constant(&g, 2.5);
        let s = SpectralField::from_real_fn(&g, f64::sin);
        assert!(commutator_h(&c, &s).value.max_abs() < 1e-14);
        assert!(commutator_h(&s, &c).value.max_abs() == 0.0);
    }

    #[test]
    fn commutator_dual_paths_agree() {
        let g = Grid::new(256).unwrap();
        let f = SpectralField::from_real_fn(&g, f64::cos);
        let s = SpectralField::from_real_fn(&g, f64::sin);
        let e = commutator_h(&f, &s);
        assert!(e.discrepancy < 1e-8 && !e.warning);
    }

    #[test]
    fn triple_bracket_symmetry_and_constants() {
        let g = Grid::new(32).unwrap();
        let a = SpectralField::from_real_fn(&g, |x| x.cos() + 0.2 * (3.0 * x).sin());
        let b = SpectralField::from_real_fn(&g, |x| (2.0 * x).sin());
        let c = SpectralField::from_real_fn(&g, |x| (x.sin()).exp());
        let ab = triple_bracket(&a, &b, &c).target;
        let ba = triple_bracket(&b, &a, &c).target;
        assert_eq!(ab.values(), ba.values());
        let k = SpectralField::real_constant(&g, 1.0);
        assert!(triple_bracket(&k, &b, &c).target.max_abs() < 1e-13);
        assert!(triple_bracket(&a, &k, &c).target.max_abs() < 1e-13);
    }
}
