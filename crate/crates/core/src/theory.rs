//! Closed-form bounds on the probability that the threshold detector singles
//! out the attacker.
//!
//! Relative errors are modelled as `e_i = |y_i|` with independent
//! `y_i ~ N(mu_i, sigma_y^2)`, a folded normal. Detection of attacker `a`
//! means `e_a > max(tau, e_i for i != a)`, which has no closed form; it is
//! bracketed by
//!
//! - `LPD1`: union bound over the events `|y_a| < |y_i|` and `|y_a| <= tau`,
//! - `LPD2`: `P(e_a > tau) * prod_i P(e_i <= tau)`,
//! - `LP_D = max(LPD1, LPD2)`,
//! - `UP_D = P(e_a > tau)`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::geometry::Point;
use crate::measurement::median_distance;
use crate::{Error, Result};

/// Gaussian upper-tail probability `Q(z) = erfc(z / sqrt 2) / 2`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)`.
///
/// Rational initial guess (Acklam's inverse-normal approximation) refined with
/// Halley steps against `q_function`.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374614581253924e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const LOW: f64 = 0.02425;

    // Acklam approximates the lower-tail quantile; Q^-1(p) = -Phi^-1(p)
    let cdf = p;
    let z = if cdf < LOW {
        let q = (-2.0 * cdf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if cdf <= 1.0 - LOW {
        let q = cdf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - cdf).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = -z;
    for _ in 0..3 {
        // Halley on f(x) = Q(x) - p, f' = -pdf(x), f'' = x pdf(x)
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        let err = q_function(x) - p;
        let u = -err / pdf;
        x -= u / (1.0 - 0.5 * x * u);
    }
    Ok(x)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")))
    }
}

/// `P(|Y| > tau)` for `Y ~ N(mu, sigma^2)`.
pub fn prob_abs_greater(tau: f64, mu: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok((q_function((tau + mu) / sigma) + q_function((tau - mu) / sigma)).clamp(0.0, 1.0))
}

/// `P(|Y| <= tau)` for `Y ~ N(mu, sigma^2)`.
pub fn prob_abs_leq(tau: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be non-negative, got {tau}")));
    }
    Ok((1.0 - prob_abs_greater(tau, mu, sigma)?).clamp(0.0, 1.0))
}

/// `P(|y_a| < |y_i|)` for independent `y_a ~ N(mu_a, sigma^2)`,
/// `y_i ~ N(mu_i, sigma^2)`, via a pi/4 rotation of the joint plane.
pub fn prob_abs_less(mu_a: f64, mu_i: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let diff = (mu_a - mu_i) / SQRT_2 / sigma;
    let sum = (mu_a + mu_i) / SQRT_2 / sigma;
    let p = q_function(diff) * q_function(-sum) + q_function(-diff) * q_function(sum);
    Ok(p.clamp(0.0, 1.0))
}

/// Means of the normalized residuals `y_i`, their common deviation, the
/// attacker's index and the detection threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub mu: Vec<f64>,
    pub sigma_y: f64,
    pub attacker: usize,
    pub tau: f64,
}

impl ErrorStats {
    pub fn new(mu: Vec<f64>, sigma_y: f64, attacker: usize, tau: f64) -> Result<Self> {
        check_sigma(sigma_y)?;
        if attacker >= mu.len() {
            return Err(Error::InvalidArgument(format!(
                "attacker {attacker} out of range for {} anchors",
                mu.len()
            )));
        }
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be non-negative, got {tau}")));
        }
        Ok(Self {
            mu,
            sigma_y,
            attacker,
            tau,
        })
    }

    /// Statistics for one realized trial.
    ///
    /// `estimate` is the position the relative errors were measured against,
    /// `d` the per-anchor distances fed to the detector and `sigma` their
    /// noise deviation. The median of `d` normalizes both means and deviation.
    #[allow(clippy::too_many_arguments)]
    pub fn from_realization(
        target: Point,
        estimate: Point,
        anchors: &[Point],
        d: &[f64],
        attacker: usize,
        delta: f64,
        sigma: f64,
        tau: f64,
    ) -> Result<Self> {
        if anchors.len() != d.len() {
            return Err(Error::InvalidArgument("anchors and distances differ in length".into()));
        }
        let m_d = median_distance(d)?;
        if !(m_d > 0.0) {
            return Err(Error::InvalidArgument("median distance must be positive".into()));
        }
        let mu = anchors
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let bias = if i == attacker { delta } else { 0.0 };
                (target.distance(*a) + bias - estimate.distance(*a)) / m_d
            })
            .collect();
        Self::new(mu, sigma / m_d, attacker, tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBounds {
    pub lpd1: f64,
    pub lpd2: f64,
    pub lp_d: f64,
    pub up_d: f64,
}

pub fn detection_bounds(s: &ErrorStats) -> Result<DetectionBounds> {
    let mu_a = s.mu[s.attacker];
    let up = prob_abs_greater(s.tau, mu_a, s.sigma_y)?;
    let mut union = prob_abs_leq(s.tau, mu_a, s.sigma_y)?;
    let mut honest_quiet = 1.0;
    for (i, &mu_i) in s.mu.iter().enumerate() {
        if i == s.attacker {
            continue;
        }
        union += prob_abs_less(mu_a, mu_i, s.sigma_y)?;
        honest_quiet *= prob_abs_leq(s.tau, mu_i, s.sigma_y)?;
    }
    let lpd1 = (1.0 - union).clamp(0.0, 1.0);
    let lpd2 = (up * honest_quiet).clamp(0.0, 1.0);
    Ok(DetectionBounds {
        lpd1,
        lpd2,
        lp_d: lpd1.max(lpd2),
        up_d: up,
    })
}
