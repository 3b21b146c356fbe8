//! Monte Carlo campaigns over random deployments.
//!
//! Every deployment is drawn from its own seeded stream, and every trial
//! (deployment, corruption assignment, repeat) from another, so results do
//! not depend on how trials are scheduled. Per-deployment tallies are merged
//! in deployment order, which keeps floating-point sums identical for any
//! number of threads.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use secloc_core::baseline::{glrt_detect, wls_locate, GlrtConfig};
use secloc_core::measurement::{generate_measurements, reduce_samples, AttackSpec, Region, Scene};
use secloc_core::pipeline::{locate_no_detection, locate_perfect_detection, locate_secure};
use secloc_core::theory::{detection_bounds, DetectionBounds, ErrorStats};
use secloc_core::Point;

use crate::config::{CampaignConfig, Method};
use crate::SimError;

/// Resampling rules for degenerate deployments.
pub const MIN_TARGET_CLEARANCE: f64 = 0.5;
pub const COLLINEAR_RTOL: f64 = 1e-6;
const MAX_RESAMPLES: u64 = 10_000;

/// Aggregates for one (method, delta) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub method: Method,
    pub delta: f64,
    pub rmse: f64,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
    /// Mean bounds over trials where they apply; NaN otherwise.
    pub lpd1: f64,
    pub lpd2: f64,
    pub lp_d: f64,
    pub up_d: f64,
    pub trials: u64,
    pub excluded_trials: u64,
    pub detections: u64,
    pub false_alarms: u64,
    pub bound_trials: u64,
}

impl CellStats {
    /// Trials that produced an estimate.
    pub fn localized(&self) -> u64 {
        self.trials - self.excluded_trials
    }

    /// Binomial standard error of the detection rate.
    pub fn detection_se(&self) -> f64 {
        let n = self.localized().max(1) as f64;
        (self.detection_rate * (1.0 - self.detection_rate) / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignStats {
    pub cells: Vec<CellStats>,
    /// Deployments redrawn because they were degenerate.
    pub resampled_deployments: u64,
}

impl CampaignStats {
    pub fn cell(&self, method: Method, delta: f64) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.method == method && c.delta == delta)
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    sq_err: f64,
    trials: u64,
    excluded: u64,
    detections: u64,
    false_alarms: u64,
    bound_sums: [f64; 4],
    bound_trials: u64,
}

impl Tally {
    fn merge(&mut self, other: &Tally) {
        self.sq_err += other.sq_err;
        self.trials += other.trials;
        self.excluded += other.excluded;
        self.detections += other.detections;
        self.false_alarms += other.false_alarms;
        for (a, b) in self.bound_sums.iter_mut().zip(other.bound_sums) {
            *a += b;
        }
        self.bound_trials += other.bound_trials;
    }

    fn record(&mut self, outcome: Result<TrialOutcome, secloc_core::Error>) {
        self.trials += 1;
        match outcome {
            Ok(o) => {
                self.sq_err += o.sq_err;
                self.detections += u64::from(o.detected);
                self.false_alarms += u64::from(o.false_alarm);
                if let Some(b) = o.bounds {
                    self.bound_sums[0] += b.lpd1;
                    self.bound_sums[1] += b.lpd2;
                    self.bound_sums[2] += b.lp_d;
                    self.bound_sums[3] += b.up_d;
                    self.bound_trials += 1;
                }
            }
            Err(_) => self.excluded += 1,
        }
    }
}

struct TrialOutcome {
    sq_err: f64,
    detected: bool,
    false_alarm: bool,
    bounds: Option<DetectionBounds>,
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of the seed and a tuple of indices.
pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix(seed), |acc, &i| splitmix(acc ^ splitmix(i.wrapping_add(0x632b_e59b_d9b4_e019))))
}

fn is_degenerate(target: Point, anchors: &[Point]) -> bool {
    if anchors.iter().any(|a| a.distance(target) < MIN_TARGET_CLEARANCE) {
        return true;
    }
    for i in 0..anchors.len() {
        for j in i + 1..anchors.len() {
            for k in j + 1..anchors.len() {
                let u = anchors[j] - anchors[i];
                let v = anchors[k] - anchors[i];
                let cross = u.x * v.y - u.y * v.x;
                if cross.abs() <= COLLINEAR_RTOL * u.norm() * v.norm() {
                    return true;
                }
            }
        }
    }
    false
}

/// Draws deployment `index`, redrawing degenerate layouts. Returns the scene
/// and the number of redraws.
pub fn sample_deployment(cfg: &CampaignConfig, index: u64) -> Result<(Scene, u64), SimError> {
    let region = Region::square(cfg.region_side);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0, index]));
    for redraws in 0..MAX_RESAMPLES {
        let target = region.sample(&mut rng);
        let anchors: Vec<Point> = (0..cfg.n_anchors).map(|_| region.sample(&mut rng)).collect();
        if !is_degenerate(target, &anchors) {
            return Ok((Scene::new(target, anchors, region)?, redraws));
        }
    }
    Err(SimError::Config(
        "could not draw a non-degenerate deployment; region too small?".into(),
    ))
}

/// All attacker sets of the configured size, in lexicographic order.
pub fn corruption_assignments(n_anchors: usize, attackers: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - left {
            cur.push(i);
            extend(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, n_anchors, attackers, &mut Vec::new(), &mut out);
    out
}

fn run_method(
    method: Method,
    cfg: &CampaignConfig,
    scene: &Scene,
    attackers: &BTreeSet<usize>,
    delta: f64,
    m: &secloc_core::measurement::MeasurementSet,
) -> Result<TrialOutcome, secloc_core::Error> {
    let anchors = &scene.anchors;
    let (estimate, flagged, bounds) = match method {
        Method::Proposed => {
            let r = locate_secure(anchors, m, cfg.tau)?;
            let bounds = if attackers.len() == 1 {
                let attacker = *attackers.iter().next().expect("one attacker");
                let reference = r.x_init.unwrap_or(r.x_gtrs);
                let d = reduce_samples(m);
                let stats = ErrorStats::from_realization(
                    scene.target,
                    reference,
                    anchors,
                    &d,
                    attacker,
                    delta,
                    cfg.sigma / (cfg.k_samples as f64).sqrt(),
                    cfg.tau,
                )?;
                Some(detection_bounds(&stats)?)
            } else {
                None
            };
            (r.x_final, r.attacker_set, bounds)
        }
        Method::NoDetection => (locate_no_detection(anchors, m)?, BTreeSet::new(), None),
        Method::PerfectDetection => (
            locate_perfect_detection(anchors, m, attackers)?,
            attackers.clone(),
            None,
        ),
        Method::WlsGlrt => {
            let x = wls_locate(anchors, &reduce_samples(m))?;
            let glrt = GlrtConfig::new(cfg.p_fa, cfg.sigma, cfg.k_samples)?;
            let flagged = glrt_detect(x, m, anchors, &glrt)?;
            (x, flagged, None)
        }
    };
    Ok(TrialOutcome {
        sq_err: estimate.distance(scene.target).powi(2),
        detected: &flagged == attackers,
        false_alarm: flagged.iter().any(|i| !attackers.contains(i)),
        bounds,
    })
}

struct DeploymentResult {
    tallies: Vec<Tally>,
    redraws: u64,
}

fn run_deployment(cfg: &CampaignConfig, index: u64, assignments: &[Vec<usize>]) -> Result<DeploymentResult, SimError> {
    let (scene, redraws) = sample_deployment(cfg, index)?;
    let n_cells = cfg.methods.len() * cfg.delta_grid.len();
    let mut tallies = vec![Tally::default(); n_cells];
    for (c, assignment) in assignments.iter().enumerate() {
        let attackers: BTreeSet<usize> = assignment.iter().copied().collect();
        for repeat in 0..cfg.n_corruptions as u64 {
            let trial_seed = derive_seed(cfg.seed, &[1, index, c as u64, repeat]);
            for (di, &delta) in cfg.delta_grid.iter().enumerate() {
                // same stream for every delta: the grid shares noise realizations
                let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
                let attack = AttackSpec::new(attackers.iter().copied(), delta)?;
                let m = generate_measurements(&scene, &attack, cfg.sigma, cfg.k_samples, &mut rng)?;
                for (mi, &method) in cfg.methods.iter().enumerate() {
                    let outcome = run_method(method, cfg, &scene, &attackers, delta, &m);
                    tallies[mi * cfg.delta_grid.len() + di].record(outcome);
                }
            }
        }
    }
    Ok(DeploymentResult { tallies, redraws })
}

fn finish(cfg: &CampaignConfig, results: Vec<DeploymentResult>) -> CampaignStats {
    let n_cells = cfg.methods.len() * cfg.delta_grid.len();
    let mut totals = vec![Tally::default(); n_cells];
    let mut resampled = 0;
    for r in &results {
        resampled += r.redraws;
        for (t, part) in totals.iter_mut().zip(&r.tallies) {
            t.merge(part);
        }
    }
    let mut cells = Vec::with_capacity(n_cells);
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (di, &delta) in cfg.delta_grid.iter().enumerate() {
            let t = &totals[mi * cfg.delta_grid.len() + di];
            let ok = (t.trials - t.excluded) as f64;
            let rate = |count: u64| if ok > 0.0 { count as f64 / ok } else { f64::NAN };
            let bound = |k: usize| {
                if t.bound_trials > 0 {
                    t.bound_sums[k] / t.bound_trials as f64
                } else {
                    f64::NAN
                }
            };
            cells.push(CellStats {
                method,
                delta,
                rmse: if ok > 0.0 { (t.sq_err / ok).sqrt() } else { f64::NAN },
                detection_rate: rate(t.detections),
                false_alarm_rate: rate(t.false_alarms),
                lpd1: bound(0),
                lpd2: bound(1),
                lp_d: bound(2),
                up_d: bound(3),
                trials: t.trials,
                excluded_trials: t.excluded,
                detections: t.detections,
                false_alarms: t.false_alarms,
                bound_trials: t.bound_trials,
            });
        }
    }
    CampaignStats {
        cells,
        resampled_deployments: resampled,
    }
}

/// Runs the campaign on rayon's current thread pool.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignStats, SimError> {
    cfg.validate()?;
    let assignments = corruption_assignments(cfg.n_anchors, cfg.attackers_per_trial);
    let results = (0..cfg.n_deployments as u64)
        .into_par_iter()
        .map(|index| run_deployment(cfg, index, &assignments))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(finish(cfg, results))
}

/// Runs the campaign on a dedicated pool of `threads` workers.
pub fn run_campaign_with_threads(cfg: &CampaignConfig, threads: usize) -> Result<CampaignStats, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SimError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_campaign(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_enumerate_subsets() {
        assert_eq!(corruption_assignments(4, 1), vec![vec![0], vec![1], vec![2], vec![3]]);
        let pairs = corruption_assignments(6, 2);
        assert_eq!(pairs.len(), 15);
        assert_eq!(pairs[0], vec![0, 1]);
        assert_eq!(pairs[14], vec![4, 5]);
    }

    #[test]
    fn seeds_depend_on_every_index() {
        let base = derive_seed(7, &[1, 2, 3]);
        assert_ne!(base, derive_seed(8, &[1, 2, 3]));
        assert_ne!(base, derive_seed(7, &[1, 2, 4]));
        assert_ne!(base, derive_seed(7, &[2, 1, 3]));
        assert_eq!(base, derive_seed(7, &[1, 2, 3]));
    }

    #[test]
    fn deployments_are_valid_and_reproducible() {
        let cfg = CampaignConfig::default();
        for i in 0..50 {
            let (scene, _) = sample_deployment(&cfg, i).unwrap();
            assert!(!is_degenerate(scene.target, &scene.anchors));
            assert_eq!(scene, sample_deployment(&cfg, i).unwrap().0);
        }
    }

    #[test]
    fn degenerate_layouts_are_detected() {
        let target = Point::new(5.0, 5.0);
        let line = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(3.0, 3.0), Point::new(9.0, 1.0)];
        assert!(is_degenerate(target, &line));
        let close = [Point::new(5.1, 5.0), Point::new(0.0, 9.0), Point::new(9.0, 9.0), Point::new(9.0, 0.0)];
        assert!(is_degenerate(target, &close));
    }

    #[test]
    fn tiny_campaign_counts() {
        let cfg = CampaignConfig {
            n_deployments: 3,
            n_corruptions: 2,
            delta_grid: vec![0.0, 10.0],
            methods: Method::ALL.to_vec(),
            ..CampaignConfig::default()
        };
        let stats = run_campaign(&cfg).unwrap();
        assert_eq!(stats.cells.len(), 8);
        for c in &stats.cells {
            assert_eq!(c.trials, 3 * 2 * 4);
            assert!(c.rmse >= 0.0);
            assert!((0.0..=1.0).contains(&c.detection_rate));
            assert!((0.0..=1.0).contains(&c.false_alarm_rate));
        }
        let perfect = stats.cell(Method::PerfectDetection, 10.0).unwrap();
        assert_eq!(perfect.detection_rate, 1.0);
        assert_eq!(perfect.false_alarm_rate, 0.0);
        assert!(stats.cell(Method::NoDetection, 0.0).unwrap().lpd1.is_nan());
        assert!(!stats.cell(Method::Proposed, 10.0).unwrap().up_d.is_nan());
    }
}
