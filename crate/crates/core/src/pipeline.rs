//! End-to-end secure localization.
//!
//! Detection runs on per-anchor sample means. Anchors it flags are dropped and
//! the rest are localized with the GTRS solver. Both the weighted-central-mass
//! estimate and the GTRS estimate are then scored with the bias-corrected
//! range cost over all `K` samples, and the lower-cost one is returned (GTRS
//! on ties).

use std::collections::BTreeSet;

use crate::detection::{detect, DetectionOutcome};
use crate::geometry::Point;
use crate::gtrs;
use crate::measurement::{reduce_samples, MeasurementSet};
use crate::{Error, Result, MIN_ANCHORS};

/// Relative tolerance under which the two costs count as equal.
///
/// With the bias re-estimated at each candidate, the cost no longer depends on
/// the candidate position, so the two values differ only by rounding.
pub const COST_TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SecureLocResult {
    pub x_final: Point,
    /// Weighted-central-mass estimate, absent when detection short-circuited.
    pub x_init: Option<Point>,
    pub x_gtrs: Point,
    pub attacker_set: BTreeSet<usize>,
    /// Per-anchor bias estimate at `x_final`.
    pub delta_hat: Vec<f64>,
    /// `(f1, f2)`: cost at the initial and at the GTRS estimate.
    pub costs: Option<(f64, f64)>,
    pub chose_gtrs: bool,
    pub detection: DetectionOutcome,
}

fn check_shape(m: &MeasurementSet, anchors: &[Point]) -> Result<()> {
    if m.n_anchors() != anchors.len() {
        return Err(Error::InvalidArgument(format!(
            "{} anchors but {} measurement rows",
            anchors.len(),
            m.n_anchors()
        )));
    }
    if m.k() == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    Ok(())
}

/// `delta_i = mean_k(d_{i,k} - |x_est - a_i|)`; negative values are kept.
pub fn estimate_attack_intensity(x_est: Point, m: &MeasurementSet, anchors: &[Point]) -> Result<Vec<f64>> {
    check_shape(m, anchors)?;
    Ok(m.samples
        .iter()
        .zip(anchors)
        .map(|(row, a)| {
            let range = x_est.distance(*a);
            row.iter().map(|d| d - range).sum::<f64>() / row.len() as f64
        })
        .collect())
}

/// `sum_i sum_k (d_{i,k} - |x_est - a_i| - delta_i)^2`.
pub fn cost(x_est: Point, delta_hat: &[f64], m: &MeasurementSet, anchors: &[Point]) -> Result<f64> {
    check_shape(m, anchors)?;
    if delta_hat.len() != anchors.len() {
        return Err(Error::InvalidArgument("one bias estimate per anchor is required".into()));
    }
    Ok(m.samples
        .iter()
        .zip(anchors)
        .zip(delta_hat)
        .map(|((row, a), bias)| {
            let range = x_est.distance(*a);
            row.iter().map(|d| (d - range - bias).powi(2)).sum::<f64>()
        })
        .sum())
}

/// GTRS wins when its cost is no larger than the initial estimate's, up to
/// [`COST_TIE_RTOL`].
pub fn prefers_gtrs(f_init: f64, f_gtrs: f64) -> bool {
    f_gtrs <= f_init + COST_TIE_RTOL * f_init.abs().max(f_gtrs.abs()) + f64::MIN_POSITIVE
}

fn gtrs_over(anchors: &[Point], d: &[f64], subset: &[usize]) -> Result<Point> {
    if subset.len() < MIN_ANCHORS {
        return Err(Error::Unlocalizable(format!(
            "only {} usable anchors remain",
            subset.len()
        )));
    }
    let sel_anchors: Vec<Point> = subset.iter().map(|&i| anchors[i]).collect();
    let sel_d: Vec<f64> = subset.iter().map(|&i| d[i]).collect();
    Ok(gtrs::locate(&sel_anchors, &sel_d)?.x)
}

/// Detects attackers, localizes on the remaining anchors and picks the final
/// estimate.
pub fn locate_secure(anchors: &[Point], m: &MeasurementSet, tau: f64) -> Result<SecureLocResult> {
    check_shape(m, anchors)?;
    let d = reduce_samples(m);
    let detection = detect(anchors, &d, tau)?;
    let x_gtrs = gtrs_over(anchors, &d, &detection.remaining)?;

    let (x_final, costs, chose_gtrs) = match detection.x_init {
        Some(x_init) => {
            let f_init = cost(x_init, &estimate_attack_intensity(x_init, m, anchors)?, m, anchors)?;
            let f_gtrs = cost(x_gtrs, &estimate_attack_intensity(x_gtrs, m, anchors)?, m, anchors)?;
            let chose = prefers_gtrs(f_init, f_gtrs);
            let x = if chose { x_gtrs } else { x_init };
            (x, Some((f_init, f_gtrs)), chose)
        }
        None => (x_gtrs, None, true),
    };

    Ok(SecureLocResult {
        x_final,
        x_init: detection.x_init,
        x_gtrs,
        attacker_set: detection.attacker_set.clone(),
        delta_hat: estimate_attack_intensity(x_final, m, anchors)?,
        costs,
        chose_gtrs,
        detection,
    })
}

/// GTRS on every anchor, without any detection.
pub fn locate_no_detection(anchors: &[Point], m: &MeasurementSet) -> Result<Point> {
    check_shape(m, anchors)?;
    let all: Vec<usize> = (0..anchors.len()).collect();
    gtrs_over(anchors, &reduce_samples(m), &all)
}

/// GTRS on the anchors outside the known attacker set.
pub fn locate_perfect_detection(
    anchors: &[Point],
    m: &MeasurementSet,
    true_attackers: &BTreeSet<usize>,
) -> Result<Point> {
    check_shape(m, anchors)?;
    let honest: Vec<usize> = (0..anchors.len()).filter(|i| !true_attackers.contains(i)).collect();
    gtrs_over(anchors, &reduce_samples(m), &honest)
}
