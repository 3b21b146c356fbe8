//! Weighted squared-range localization as a generalized trust region
//! subproblem (GTRS).
//!
//! With `y = (x, alpha)` and `alpha = |x|^2`, squared ranges are linear in `y`:
//! row `i` of the design matrix is `(-2 a_i^T, 1)` and the target entry is
//! `d_i^2 - |a_i|^2`. The problem
//!
//! ```text
//! minimize |W (H y - h)|^2   subject to   y^T F y + 2 f^T y = 0
//! ```
//!
//! with `F = diag(1, 1, 0)` and `f = (0, 0, -1/2)` is solved exactly. For a
//! multiplier `lambda` the stationary point is
//! `y(lambda) = (G + lambda F)^-1 (H^T W^2 h - lambda f)` with `G = H^T W^2 H`,
//! and the optimum is the unique root of
//! `phi(lambda) = y^T F y + 2 f^T y` on `(-1 / lambda_max, inf)`, where
//! `phi` is strictly decreasing. The root is found by bisection.

use crate::geometry::Point;
use crate::linalg::{self, Mat3, Vec3};
use crate::{Error, Result, MIN_ANCHORS};

pub const CONSTRAINT_MATRIX: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
pub const CONSTRAINT_VECTOR: Vec3 = [0.0, 0.0, -0.5];

/// Bracket expansion gives up after this many doublings.
const MAX_DOUBLINGS: usize = 60;

/// Weighted linear system in `y = (x, y, alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GtrsSystem {
    /// Rows `(-2 a_x, -2 a_y, 1)`.
    pub design: Vec<Vec3>,
    /// Entries `d_i^2 - |a_i|^2`.
    pub observations: Vec<f64>,
    /// Diagonal of `W`, i.e. `sqrt(w_i)`.
    pub sqrt_weights: Vec<f64>,
}

impl GtrsSystem {
    /// The weights `w_i` themselves.
    pub fn weights(&self) -> Vec<f64> {
        self.sqrt_weights.iter().map(|s| s * s).collect()
    }

    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }

    /// `H^T W^T W H`.
    pub fn gram(&self) -> Mat3 {
        let mut g = linalg::ZERO3;
        for (row, s) in self.design.iter().zip(&self.sqrt_weights) {
            let w = s * s;
            for r in 0..3 {
                for c in 0..3 {
                    g[r][c] += w * row[r] * row[c];
                }
            }
        }
        g
    }

    /// `H^T W^T W h`.
    pub fn moment(&self) -> Vec3 {
        let mut b = [0.0; 3];
        for ((row, h), s) in self.design.iter().zip(&self.observations).zip(&self.sqrt_weights) {
            let w = s * s;
            for r in 0..3 {
                b[r] += w * row[r] * h;
            }
        }
        b
    }

    /// `|W (H y - h)|^2`.
    pub fn objective(&self, y: &Vec3) -> f64 {
        self.design
            .iter()
            .zip(&self.observations)
            .zip(&self.sqrt_weights)
            .map(|((row, h), s)| {
                let r = s * (linalg::dot(row, y) - h);
                r * r
            })
            .sum()
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> GtrsSystem {
        let root = factor.sqrt();
        GtrsSystem {
            sqrt_weights: self.sqrt_weights.iter().map(|s| s * root).collect(),
            ..self.clone()
        }
    }
}

/// `y^T F y + 2 f^T y`, which is `x^2 + y^2 - alpha`.
pub fn constraint_value(y: &Vec3) -> f64 {
    linalg::dot(y, &linalg::mat_vec(&CONSTRAINT_MATRIX, y)) + 2.0 * linalg::dot(&CONSTRAINT_VECTOR, y)
}

/// Inverse-range weights normalized to sum to one.
pub fn inverse_range_weights(d: &[f64]) -> Vec<f64> {
    let total: f64 = d.iter().map(|v| v.recip()).sum();
    d.iter().map(|v| v.recip() / total).collect()
}

fn check_inputs(anchors: &[Point], d: &[f64]) -> Result<()> {
    if anchors.len() != d.len() {
        return Err(Error::InvalidArgument(format!(
            "{} anchors but {} distances",
            anchors.len(),
            d.len()
        )));
    }
    if anchors.len() < MIN_ANCHORS {
        return Err(Error::Unlocalizable(format!(
            "need at least {MIN_ANCHORS} anchors, got {}",
            anchors.len()
        )));
    }
    if let Some(bad) = d.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("distances must be positive, got {bad}")));
    }
    Ok(())
}

/// Builds the weighted squared-range system for the given anchors and ranges.
pub fn build_system(anchors: &[Point], d: &[f64]) -> Result<GtrsSystem> {
    check_inputs(anchors, d)?;
    let system = GtrsSystem {
        design: anchors.iter().map(|a| [-2.0 * a.x, -2.0 * a.y, 1.0]).collect(),
        observations: anchors.iter().zip(d).map(|(a, di)| di * di - a.norm_sq()).collect(),
        sqrt_weights: inverse_range_weights(d).into_iter().map(f64::sqrt).collect(),
    };
    if linalg::cholesky(&system.gram()).is_none() {
        return Err(Error::DegenerateGeometry(
            "anchor layout leaves the squared-range system rank deficient (collinear anchors?)".into(),
        ));
    }
    Ok(system)
}

/// Largest eigenvalue of `G^-1/2 F G^-1/2`.
///
/// Computed as the largest eigenvalue of the congruent `L^-1 F L^-T` with
/// `G = L L^T`, which has the same spectrum.
pub fn max_generalized_eigenvalue(s: &GtrsSystem) -> Result<f64> {
    generalized_eigenvalue_of(&s.gram())
}

pub(crate) fn generalized_eigenvalue_of(gram: &Mat3) -> Result<f64> {
    let l = linalg::cholesky(gram)
        .ok_or_else(|| Error::DegenerateGeometry("normal matrix is not positive definite".into()))?;
    let li = linalg::lower_inverse(&l);
    let congruent = linalg::mat_mul(&linalg::mat_mul(&li, &CONSTRAINT_MATRIX), &linalg::transpose(&li));
    Ok(linalg::symmetric_eigenvalues(&congruent)[0].max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once `|phi| <= tol`.
    pub tol: f64,
    /// Bisection budget.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtrsSolution {
    /// `(x, y, alpha)`.
    pub y: Vec3,
    pub x: Point,
    pub lambda: f64,
    /// `phi(lambda)` at the returned multiplier, i.e. the constraint residual.
    pub phi_residual: f64,
    pub iterations: usize,
}

/// Multiplier-parametrized solver state.
///
/// With `G = L L^T` and `L^-1 F L^-T = V diag(mu) V^T`, the shifted inverse is
/// `(G + lambda F)^-1 = L^-T V diag(1 / (1 + lambda mu)) V^T L^-1`, which stays
/// well conditioned right up to the pole.
#[derive(Debug, Clone)]
pub struct Secular {
    lower_inv: Mat3,
    eigvals: Vec3,
    eigvecs: Mat3,
    moment: Vec3,
}

impl Secular {
    pub fn new(s: &GtrsSystem) -> Result<Self> {
        let gram = s.gram();
        let l = linalg::cholesky(&gram)
            .ok_or_else(|| Error::DegenerateGeometry("normal matrix is not positive definite".into()))?;
        let lower_inv = linalg::lower_inverse(&l);
        let congruent = linalg::mat_mul(
            &linalg::mat_mul(&lower_inv, &CONSTRAINT_MATRIX),
            &linalg::transpose(&lower_inv),
        );
        let (eigvals, eigvecs) = linalg::symmetric_eigen(&congruent);
        Ok(Self {
            lower_inv,
            eigvals,
            eigvecs,
            moment: s.moment(),
        })
    }

    /// `y(lambda)`, or `None` exactly at a pole.
    pub fn y(&self, lambda: f64) -> Option<Vec3> {
        let rhs = [
            self.moment[0] - lambda * CONSTRAINT_VECTOR[0],
            self.moment[1] - lambda * CONSTRAINT_VECTOR[1],
            self.moment[2] - lambda * CONSTRAINT_VECTOR[2],
        ];
        let w = linalg::mat_vec(&linalg::transpose(&self.eigvecs), &linalg::mat_vec(&self.lower_inv, &rhs));
        let mut scaled = [0.0; 3];
        for k in 0..3 {
            let denom = 1.0 + lambda * self.eigvals[k];
            if denom == 0.0 {
                return None;
            }
            scaled[k] = w[k] / denom;
        }
        let y = linalg::mat_vec(
            &linalg::transpose(&self.lower_inv),
            &linalg::mat_vec(&self.eigvecs, &scaled),
        );
        y.iter().all(|v| v.is_finite()).then_some(y)
    }

    /// `phi(lambda)`; `None` where `y(lambda)` is undefined.
    pub fn phi(&self, lambda: f64) -> Option<f64> {
        self.y(lambda).map(|y| constraint_value(&y))
    }
}

/// Evaluates `phi`, nudging `lambda` upward (into the interval) when the
/// shifted matrix is singular at the requested point.
fn phi_nudged(sec: &Secular, lambda: f64, nudge: f64) -> Option<(f64, f64, Vec3)> {
    let mut lam = lambda;
    for _ in 0..8 {
        if let Some(y) = sec.y(lam) {
            return Some((lam, constraint_value(&y), y));
        }
        lam += nudge;
    }
    None
}

/// Solves the constrained problem by bisection on `phi`.
pub fn solve(s: &GtrsSystem, opts: SolverOptions) -> Result<GtrsSolution> {
    let sec = Secular::new(s)?;
    let lam_max = generalized_eigenvalue_of(&s.gram())?;
    if lam_max <= 0.0 {
        return Err(Error::DegenerateGeometry("constraint has no curvature".into()));
    }
    let pole = -1.0 / lam_max;
    let eps = 1e-9 * (1.0 + pole.abs());
    let singular = || Error::NoRoot("shifted normal matrix stayed singular".into());

    let finish = |lambda: f64, phi: f64, y: Vec3, iterations: usize| GtrsSolution {
        y,
        x: Point::new(y[0], y[1]),
        lambda,
        phi_residual: phi,
        iterations,
    };

    let (mut lo, phi_lo, y_lo) = phi_nudged(&sec, pole + eps, eps).ok_or_else(singular)?;
    if phi_lo.abs() <= opts.tol || phi_lo < 0.0 {
        // root at (or numerically beyond) the pole: the degenerate case
        return Ok(finish(lo, phi_lo, y_lo, 0));
    }

    let mut hi = 1.0_f64.max(lo + 1.0);
    let mut doublings = 0;
    let (mut hi, phi_hi, y_hi) = loop {
        let (lam, phi, y) = phi_nudged(&sec, hi, eps).ok_or_else(singular)?;
        if phi.abs() <= opts.tol {
            return Ok(finish(lam, phi, y, 0));
        }
        if phi < 0.0 {
            break (lam, phi, y);
        }
        lo = lam;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoRoot(format!(
                "phi stayed positive up to lambda = {lam:e}"
            )));
        }
        hi = lam.abs().max(1.0) * 2.0;
    };

    let mut best = (hi, phi_hi, y_hi);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let (lam, phi, y) = phi_nudged(&sec, mid, eps).ok_or_else(singular)?;
        if phi.abs() < best.1.abs() {
            best = (lam, phi, y);
        }
        if phi.abs() <= opts.tol {
            break;
        }
        if phi > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
    }
    let (lambda, phi, y) = best;
    Ok(finish(lambda, phi, y, iterations))
}

/// Convenience: build the system and solve it with default options.
pub fn locate(anchors: &[Point], d: &[f64]) -> Result<GtrsSolution> {
    solve(&build_system(anchors, d)?, SolverOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square4() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(4.0, 0.0),
            Point::new(0.0, 4.0),
            Point::new(4.0, 4.0),
        ]
    }

    #[test]
    fn system_entries_by_hand() {
        let anchors = &square4()[..3];
        let r = 8.0_f64.sqrt();
        let s = build_system(anchors, &[r, r, r]).unwrap();
        assert_eq!(s.design, vec![[0.0, 0.0, 1.0], [-8.0, 0.0, 1.0], [0.0, -8.0, 1.0]]);
        let want = [8.0, -8.0, -8.0];
        for (got, w) in s.observations.iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
        for w in s.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let s = build_system(&square4(), &[1.0, 2.5, 7.0, 0.3]).unwrap();
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_anchors_are_degenerate() {
        let anchors = vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        assert!(matches!(
            build_system(&anchors, &[1.0, 1.0, 1.0]),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn too_few_anchors() {
        let anchors = &square4()[..2];
        assert!(matches!(build_system(anchors, &[1.0, 1.0]), Err(Error::Unlocalizable(_))));
        assert!(build_system(&square4(), &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn identity_gram_gives_unit_eigenvalue() {
        let ident = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!((generalized_eigenvalue_of(&ident).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noiseless_square_recovers_target() {
        let anchors = square4();
        let x = Point::new(1.0, 1.0);
        let d: Vec<f64> = anchors.iter().map(|a| a.distance(x)).collect();
        let sol = locate(&anchors, &d).unwrap();
        assert!(sol.x.distance(x) < 1e-6);
        assert!((sol.y[2] - sol.x.norm_sq()).abs() < 1e-6);
    }

    #[test]
    fn phi_decreases_across_bracket() {
        let anchors = square4();
        let s = build_system(&anchors, &[2.0, 3.1, 3.3, 4.9]).unwrap();
        let sec = Secular::new(&s).unwrap();
        let pole = -1.0 / max_generalized_eigenvalue(&s).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let lam = pole + 1e-3 * k as f64 * (1.0 + pole.abs());
            let phi = sec.phi(lam).unwrap();
            assert!(phi < prev);
            prev = phi;
        }
    }
}
