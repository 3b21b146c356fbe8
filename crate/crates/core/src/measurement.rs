//! Two-way time-of-arrival range measurements.
//!
//! Ranges follow `d_{i,k} = |x - a_i| + delta [i corrupted] + n_{i,k}` with
//! i.i.d. Gaussian noise of common standard deviation `sigma`. The turn-around
//! time is assumed known and already removed.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Point;
use crate::{Error, Result, MIN_ANCHORS};

/// Generated ranges never fall below this, since circle radii must be positive.
pub const MIN_RANGE: f64 = 1e-6;

/// Axis-aligned deployment rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    /// The square `[0, side] x [0, side]`.
    pub fn square(side: f64) -> Self {
        Self {
            min: Point::new(0.0, 0.0),
            max: Point::new(side, side),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random_range(self.min.x..=self.max.x),
            rng.random_range(self.min.y..=self.max.y),
        )
    }
}

/// True target position, anchor positions and the deployment region.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub target: Point,
    pub anchors: Vec<Point>,
    pub region: Region,
}

impl Scene {
    pub fn new(target: Point, anchors: Vec<Point>, region: Region) -> Result<Self> {
        if anchors.len() < MIN_ANCHORS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_ANCHORS} anchors, got {}",
                anchors.len()
            )));
        }
        for p in std::iter::once(&target).chain(anchors.iter()) {
            if !p.is_finite() || !region.contains(*p) {
                return Err(Error::InvalidArgument(format!(
                    "point {p:?} is not a finite point inside the region"
                )));
            }
        }
        Ok(Self {
            target,
            anchors,
            region,
        })
    }

    pub fn true_ranges(&self) -> Vec<f64> {
        self.anchors.iter().map(|a| self.target.distance(*a)).collect()
    }
}

/// Which anchors are spoofed, and by how much their ranges are enlarged.
/// Anchor indices are zero-based.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackSpec {
    pub corrupted: BTreeSet<usize>,
    pub delta: f64,
}

impl AttackSpec {
    pub fn benign() -> Self {
        Self::default()
    }

    pub fn new(corrupted: impl IntoIterator<Item = usize>, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "attack intensity must be finite and non-negative, got {delta}"
            )));
        }
        Ok(Self {
            corrupted: corrupted.into_iter().collect(),
            delta,
        })
    }

    pub fn bias(&self, anchor: usize) -> f64 {
        if self.corrupted.contains(&anchor) {
            self.delta
        } else {
            0.0
        }
    }
}

/// `N x K` matrix of range samples, one row per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub samples: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl MeasurementSet {
    /// Wraps an existing sample matrix, checking that it is rectangular,
    /// finite and has at least one column.
    pub fn new(samples: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        let k = samples.first().map_or(0, Vec::len);
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one sample per anchor".into()));
        }
        if samples.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument("sample rows differ in length".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("samples must be finite".into()));
        }
        Ok(Self { samples, sigma })
    }

    pub fn n_anchors(&self) -> usize {
        self.samples.len()
    }

    /// Samples per anchor, `K`.
    pub fn k(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Rows restricted to the given anchors, in the given order.
    pub fn select(&self, anchors: &[usize]) -> MeasurementSet {
        MeasurementSet {
            samples: anchors.iter().map(|&i| self.samples[i].clone()).collect(),
            sigma: self.sigma,
        }
    }
}

/// Draws `k` noisy (and possibly attacked) range samples per anchor.
pub fn generate_measurements<R: Rng + ?Sized>(
    scene: &Scene,
    attack: &AttackSpec,
    sigma: f64,
    k: usize,
    rng: &mut R,
) -> Result<MeasurementSet> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if let Some(&bad) = attack.corrupted.iter().find(|&&i| i >= scene.anchors.len()) {
        return Err(Error::InvalidArgument(format!("corrupted anchor {bad} does not exist")));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let samples = scene
        .anchors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let clean = scene.target.distance(*a) + attack.bias(i);
            (0..k)
                .map(|_| (clean + noise.sample(rng)).max(MIN_RANGE))
                .collect()
        })
        .collect();
    Ok(MeasurementSet { samples, sigma })
}

/// Per-anchor sample means.
pub fn reduce_samples(m: &MeasurementSet) -> Vec<f64> {
    m.samples
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect()
}

/// Sample median; even lengths average the two middle order statistics.
pub fn median_distance(d: &[f64]) -> Result<f64> {
    if d.is_empty() {
        return Err(Error::InvalidArgument("median of an empty list".into()));
    }
    let mut sorted = d.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}
