//! Comparator: unconstrained weighted least squares on the squared-range
//! system, paired with a per-anchor GLRT for attack detection.
//!
//! Under `H0` the mean residual `r_i = mean_k(d_{i,k}) - |x - a_i|` is
//! `N(0, sigma^2 / K)`; the GLRT reduces to comparing the ML bias estimate
//! against `sqrt(2 sigma^2 ln(gamma) / K)`, and `P_FA = Q(sqrt(2 ln gamma))`.

use std::collections::BTreeSet;

use crate::geometry::Point;
use crate::gtrs::build_system;
use crate::linalg;
use crate::measurement::MeasurementSet;
use crate::pipeline::estimate_attack_intensity;
use crate::theory::q_inverse;
use crate::{Error, Result};

/// False-alarm target used when none is given.
pub const DEFAULT_P_FA: f64 = 0.05;

/// Weighted least-squares position, ignoring the `alpha = |x|^2` coupling.
pub fn wls_locate(anchors: &[Point], d: &[f64]) -> Result<Point> {
    let system = build_system(anchors, d)?;
    let y = linalg::solve(&system.gram(), &system.moment())
        .ok_or_else(|| Error::DegenerateGeometry("singular normal equations".into()))?;
    Ok(Point::new(y[0], y[1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlrtConfig {
    pub p_fa: f64,
    pub sigma: f64,
    pub k: usize,
}

impl GlrtConfig {
    pub fn new(p_fa: f64, sigma: f64, k: usize) -> Result<Self> {
        let cfg = Self { p_fa, sigma, k };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "false-alarm probability must lie in (0, 1), got {}",
                self.p_fa
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Likelihood-ratio threshold `gamma = exp(Q^-1(p_fa)^2 / 2)`.
pub fn glrt_gamma(p_fa: f64) -> Result<f64> {
    let z = q_inverse(p_fa)?;
    Ok((0.5 * z * z).exp())
}

/// Decision threshold on the bias estimate, `sigma Q^-1(p_fa) / sqrt(K)`.
///
/// For `p_fa <= 1/2` this equals `sqrt(2 sigma^2 ln(gamma) / K)`; above 1/2 the
/// sign follows `Q^-1` so that the false-alarm identity keeps holding.
pub fn glrt_threshold(cfg: &GlrtConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.sigma * q_inverse(cfg.p_fa)? / (cfg.k as f64).sqrt())
}

/// Anchors whose estimated bias at `x_est` exceeds the GLRT threshold.
pub fn glrt_detect(
    x_est: Point,
    m: &MeasurementSet,
    anchors: &[Point],
    cfg: &GlrtConfig,
) -> Result<BTreeSet<usize>> {
    let threshold = glrt_threshold(cfg)?;
    let bias = estimate_attack_intensity(x_est, m, anchors)?;
    Ok(bias
        .iter()
        .enumerate()
        .filter_map(|(i, b)| (*b > threshold).then_some(i))
        .collect())
}
