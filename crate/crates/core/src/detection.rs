//! Attacker detection from range-circle geometry.
//!
//! The stage works in three steps:
//!
//! 1. Every pair of range circles is intersected. An anchor whose circle
//!    strictly encloses every other circle cannot be explained by noise plus
//!    an enlargement, since growing its radius never creates an intersection,
//!    so it is flagged outright and removed.
//! 2. Among the remaining intersection points, the most compact cluster
//!    (at most one point per circle pair) is taken as the set of honest
//!    points, and their inverse-mean-range weighted centroid gives the
//!    initial position estimate.
//! 3. Measured ranges are compared with ranges re-computed from that estimate.
//!    The anchor with the largest relative error is removed while the error
//!    exceeds `tau` and enough anchors remain to localize.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::{classify_pair, cluster_compactness, intersect_circles, Circle, CircleRelation, Point};
use crate::measurement::median_distance;
use crate::{Error, Result, MIN_ANCHORS};

/// Default relative-error threshold.
pub const DEFAULT_TAU: f64 = 0.3;

/// Honest-point selection is exhaustive up to this many intersecting pairs
/// (all pairs of six anchors); beyond it a greedy search is used.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 15;

/// An anchor pair `(i, j)` with `i < j`, using the caller's anchor indices.
pub type PairId = (usize, usize);

/// Pairwise intersection structure of a set of range circles.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionGraph {
    /// Anchor indices the graph was built over, ascending.
    pub anchors: Vec<usize>,
    /// Both intersection points of every pair of circles that meet.
    pub points: BTreeMap<PairId, (Point, Point)>,
    /// Pairs of circles that do not meet.
    pub disjoint_pairs: BTreeSet<PairId>,
    /// Anchors whose circle strictly encloses every other circle.
    pub geometric_flags: BTreeSet<usize>,
}

/// The selected honest points, one per contributing circle pair.
#[derive(Debug, Clone, PartialEq)]
pub struct HonestSet {
    pub selected: Vec<(PairId, Point)>,
}

impl HonestSet {
    pub fn size(&self) -> usize {
        self.selected.len()
    }

    pub fn points(&self) -> Vec<Point> {
        self.selected.iter().map(|(_, p)| *p).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    /// Weighted-central-mass estimate. `None` when the enclosing-circle
    /// filter left only the minimum number of anchors, or when no two of the
    /// remaining circles intersect.
    pub x_init: Option<Point>,
    /// All anchors flagged as attackers, from either test.
    pub attacker_set: BTreeSet<usize>,
    /// The subset of `attacker_set` flagged by the enclosing-circle test.
    pub geometric_flags: BTreeSet<usize>,
    /// Relative error of every anchor against `x_init`; empty without it.
    pub relative_errors: Vec<f64>,
    pub honest: Option<HonestSet>,
    /// Anchors left for localization, ascending.
    pub remaining: Vec<usize>,
}

fn circles_for(anchors: &[Point], d: &[f64]) -> Result<Vec<Circle>> {
    if anchors.len() != d.len() {
        return Err(Error::InvalidArgument(format!(
            "{} anchors but {} distances",
            anchors.len(),
            d.len()
        )));
    }
    anchors
        .iter()
        .zip(d)
        .map(|(a, r)| Circle::new(*a, *r))
        .collect()
}

/// Builds the intersection graph over all anchors.
pub fn build_intersection_graph(anchors: &[Point], d: &[f64]) -> Result<IntersectionGraph> {
    if anchors.len() < MIN_ANCHORS + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} anchors, got {}",
            MIN_ANCHORS + 1,
            anchors.len()
        )));
    }
    let all: Vec<usize> = (0..anchors.len()).collect();
    build_intersection_graph_over(anchors, d, &all)
}

/// Builds the intersection graph restricted to the `active` anchors.
pub fn build_intersection_graph_over(
    anchors: &[Point],
    d: &[f64],
    active: &[usize],
) -> Result<IntersectionGraph> {
    let circles = circles_for(anchors, d)?;
    let mut active = active.to_vec();
    active.sort_unstable();
    active.dedup();
    if active.len() < 2 {
        return Err(Error::InvalidArgument("need at least two anchors".into()));
    }
    if let Some(&bad) = active.iter().find(|&&i| i >= circles.len()) {
        return Err(Error::InvalidArgument(format!("anchor {bad} does not exist")));
    }

    let mut points = BTreeMap::new();
    let mut disjoint_pairs = BTreeSet::new();
    // encloses[i] stays true while circle i has strictly contained every other one seen
    let mut encloses: BTreeMap<usize, bool> = active.iter().map(|&i| (i, true)).collect();

    for (idx, &i) in active.iter().enumerate() {
        for &j in &active[idx + 1..] {
            let (ci, cj) = (&circles[i], &circles[j]);
            match intersect_circles(ci, cj)? {
                Some(pq) => {
                    points.insert((i, j), pq);
                    encloses.insert(i, false);
                    encloses.insert(j, false);
                }
                None => {
                    disjoint_pairs.insert((i, j));
                    let relation = classify_pair(ci, cj)?;
                    if relation != CircleRelation::FirstContainsSecond {
                        encloses.insert(i, false);
                    }
                    if relation != CircleRelation::SecondContainsFirst {
                        encloses.insert(j, false);
                    }
                }
            }
        }
    }

    let geometric_flags = encloses
        .into_iter()
        .filter_map(|(i, flag)| flag.then_some(i))
        .collect();

    Ok(IntersectionGraph {
        anchors: active,
        points,
        disjoint_pairs,
        geometric_flags,
    })
}

/// Number of honest points to cluster for a graph over `n_active` anchors.
///
/// All circles meeting gives `n - 1`; otherwise `n - |C|`. The result is kept
/// at least `min(3, pairs)` so the centroid is never built from a lone pair
/// when more are available, and never above the number of intersecting pairs.
pub fn honest_target_size(n_active: usize, n_disjoint: usize, n_pairs: usize) -> usize {
    let nominal = if n_disjoint == 0 {
        n_active.saturating_sub(1)
    } else {
        n_active.saturating_sub(n_disjoint)
    };
    nominal.max(MIN_ANCHORS.min(n_pairs)).min(n_pairs)
}

type Candidate = (PairId, [Point; 2]);

fn tie_tolerance(value: f64) -> f64 {
    1e-12 * value.abs().max(1.0)
}

fn sorted_key(points: &[Point]) -> Vec<Point> {
    let mut key = points.to_vec();
    key.sort_by(lex_cmp);
    key
}

fn lex_cmp(a: &Point, b: &Point) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

fn key_cmp(a: &[Point], b: &[Point]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        let ord = lex_cmp(p, q);
        if ord != Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Clone)]
struct Best {
    value: f64,
    key: Vec<Point>,
    picks: Vec<(usize, usize)>,
}

impl Best {
    /// True if `(value, key)` should replace the incumbent.
    fn improved_by(&self, value: f64, key: &[Point]) -> bool {
        let tol = tie_tolerance(self.value);
        if value < self.value - tol {
            true
        } else if value <= self.value + tol {
            key_cmp(key, &self.key) == Ordering::Less
        } else {
            false
        }
    }
}

struct Exhaustive<'a> {
    cands: &'a [Candidate],
    target: usize,
    picks: Vec<(usize, usize)>,
    chosen: Vec<Point>,
    best: Option<Best>,
}

impl Exhaustive<'_> {
    fn run(&mut self, start: usize, partial: f64) {
        if self.chosen.len() == self.target {
            let key = sorted_key(&self.chosen);
            let replace = match &self.best {
                None => true,
                Some(b) => b.improved_by(partial, &key),
            };
            if replace {
                self.best = Some(Best {
                    value: partial,
                    key,
                    picks: self.picks.clone(),
                });
            }
            return;
        }
        let needed = self.target - self.chosen.len();
        for c in start..=(self.cands.len() - needed) {
            let pair = self.cands[c].1;
            for (w, p) in pair.iter().enumerate() {
                if w == 1 && pair[0] == pair[1] {
                    continue;
                }
                let added: f64 = self.chosen.iter().map(|q| q.distance(*p)).sum();
                let next = partial + added;
                if let Some(b) = &self.best {
                    // adding points never lowers the sum, so this branch cannot win
                    if next > b.value + tie_tolerance(b.value) {
                        continue;
                    }
                }
                self.picks.push((c, w));
                self.chosen.push(*p);
                self.run(c + 1, next);
                self.chosen.pop();
                self.picks.pop();
            }
        }
    }
}

fn compactness_of(points: &[Point]) -> f64 {
    if points.len() < 2 {
        0.0
    } else {
        cluster_compactness(points).unwrap_or(f64::INFINITY)
    }
}

fn points_of(cands: &[Candidate], picks: &[(usize, usize)]) -> Vec<Point> {
    picks.iter().map(|&(c, w)| cands[c].1[w]).collect()
}

/// Greedy seed from the closest cross-pair point couple, grown one point at a
/// time, then improved by single-point swaps until no swap helps.
fn greedy_select(cands: &[Candidate], target: usize) -> Vec<(usize, usize)> {
    let mut picks: Vec<(usize, usize)> = Vec::with_capacity(target);
    if target == 1 {
        picks.push((0, 0));
    } else {
        let mut seed: Option<(f64, (usize, usize), (usize, usize))> = None;
        for a in 0..cands.len() {
            for b in a + 1..cands.len() {
                for wa in 0..2 {
                    for wb in 0..2 {
                        let dist = cands[a].1[wa].distance(cands[b].1[wb]);
                        if seed.is_none_or(|(best, _, _)| dist < best) {
                            seed = Some((dist, (a, wa), (b, wb)));
                        }
                    }
                }
            }
        }
        let (_, first, second) = seed.expect("at least two candidate pairs");
        picks.push(first);
        picks.push(second);
        while picks.len() < target {
            let chosen = points_of(cands, &picks);
            let mut next: Option<(f64, (usize, usize))> = None;
            for c in 0..cands.len() {
                if picks.iter().any(|&(pc, _)| pc == c) {
                    continue;
                }
                for w in 0..2 {
                    let added: f64 = chosen.iter().map(|q| q.distance(cands[c].1[w])).sum();
                    if next.is_none_or(|(best, _)| added < best) {
                        next = Some((added, (c, w)));
                    }
                }
            }
            picks.push(next.expect("enough candidate pairs").1);
        }
    }

    let mut current = compactness_of(&points_of(cands, &picks));
    loop {
        let mut improved = false;
        for slot in 0..picks.len() {
            for c in 0..cands.len() {
                for w in 0..2 {
                    if picks.iter().enumerate().any(|(s, &(pc, _))| s != slot && pc == c) {
                        continue;
                    }
                    if picks[slot] == (c, w) {
                        continue;
                    }
                    let mut trial = picks.clone();
                    trial[slot] = (c, w);
                    let value = compactness_of(&points_of(cands, &trial));
                    if value < current - tie_tolerance(current) {
                        picks = trial;
                        current = value;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    picks.sort_unstable();
    picks
}

/// Picks the `target_size` most compact intersection points, using at most one
/// point per circle pair. Ties go to the lexicographically smallest sorted
/// coordinate list.
pub fn select_honest_points(g: &IntersectionGraph, target_size: usize) -> Result<HonestSet> {
    if target_size == 0 {
        return Err(Error::InvalidArgument("honest set size must be positive".into()));
    }
    if g.points.len() < target_size {
        return Err(Error::Unlocalizable(format!(
            "{} intersecting circle pairs cannot supply {} honest points",
            g.points.len(),
            target_size
        )));
    }
    let cands: Vec<Candidate> = g.points.iter().map(|(id, (p, q))| (*id, [*p, *q])).collect();

    let picks = if cands.len() <= EXHAUSTIVE_PAIR_LIMIT {
        let mut search = Exhaustive {
            cands: &cands,
            target: target_size,
            picks: Vec::with_capacity(target_size),
            chosen: Vec::with_capacity(target_size),
            best: None,
        };
        search.run(0, 0.0);
        search.best.expect("search visits at least one subset").picks
    } else {
        greedy_select(&cands, target_size)
    };

    Ok(HonestSet {
        selected: picks.iter().map(|&(c, w)| (cands[c].0, cands[c].1[w])).collect(),
    })
}

/// Weighted central mass of the honest points. Each point gets weight
/// proportional to `1 / mean(d_i, d_j)` of its pair, normalized to sum to one.
pub fn wcm_estimate(h: &HonestSet, d: &[f64]) -> Result<Point> {
    if h.selected.is_empty() {
        return Err(Error::InvalidArgument("empty honest set".into()));
    }
    let mut total = 0.0;
    let mut acc = Point::default();
    for &((i, j), p) in &h.selected {
        let (di, dj) = match (d.get(i), d.get(j)) {
            (Some(di), Some(dj)) => (*di, *dj),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "no distance for anchor pair ({i}, {j})"
                )))
            }
        };
        let w = 2.0 / (di + dj);
        total += w;
        acc = acc + p * w;
    }
    Ok(acc * (1.0 / total))
}

fn relative_errors_with_median(x_est: Point, anchors: &[Point], d: &[f64], median: f64) -> Result<Vec<f64>> {
    if !(median > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "median distance must be positive, got {median}"
        )));
    }
    Ok(anchors
        .iter()
        .zip(d)
        .map(|(a, di)| (di - x_est.distance(*a)).abs() / median)
        .collect())
}

/// `e_i = |d_i - |x_est - a_i|| / median(d)`.
pub fn relative_errors(x_est: Point, anchors: &[Point], d: &[f64]) -> Result<Vec<f64>> {
    if anchors.len() != d.len() {
        return Err(Error::InvalidArgument(format!(
            "{} anchors but {} distances",
            anchors.len(),
            d.len()
        )));
    }
    relative_errors_with_median(x_est, anchors, d, median_distance(d)?)
}

/// Runs the full detection stage on per-anchor distances `d`.
///
/// The initial estimate is computed once and not refreshed as anchors are
/// removed. The median in the relative error is taken over the anchors that
/// survived the enclosing-circle filter.
pub fn detect(anchors: &[Point], d: &[f64], tau: f64) -> Result<DetectionOutcome> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must lie in [0, 1], got {tau}")));
    }
    if anchors.len() < MIN_ANCHORS + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} anchors, got {}",
            MIN_ANCHORS + 1,
            anchors.len()
        )));
    }
    let mut active: Vec<usize> = (0..anchors.len()).collect();
    let mut attacker_set = BTreeSet::new();
    let mut geometric_flags = BTreeSet::new();

    let graph = loop {
        let graph = build_intersection_graph_over(anchors, d, &active)?;
        // two circles cannot each enclose the other, so at most one flag per pass
        let Some(&flagged) = graph.geometric_flags.iter().next() else {
            break graph;
        };
        attacker_set.insert(flagged);
        geometric_flags.insert(flagged);
        active.retain(|&i| i != flagged);
        if active.len() == MIN_ANCHORS {
            return Ok(DetectionOutcome {
                x_init: None,
                attacker_set,
                geometric_flags,
                relative_errors: Vec::new(),
                honest: None,
                remaining: active,
            });
        }
    };

    if graph.points.is_empty() {
        return Ok(DetectionOutcome {
            x_init: None,
            attacker_set,
            geometric_flags,
            relative_errors: Vec::new(),
            honest: None,
            remaining: active,
        });
    }

    let target = honest_target_size(active.len(), graph.disjoint_pairs.len(), graph.points.len());
    let honest = select_honest_points(&graph, target)?;
    let x_init = wcm_estimate(&honest, d)?;

    let active_d: Vec<f64> = active.iter().map(|&i| d[i]).collect();
    let errors = relative_errors_with_median(x_init, anchors, d, median_distance(&active_d)?)?;

    while active.len() > MIN_ANCHORS {
        // ties resolve to the lowest anchor index
        let worst = active
            .iter()
            .copied()
            .fold(None::<usize>, |acc, i| match acc {
                Some(m) if errors[m] >= errors[i] => Some(m),
                _ => Some(i),
            })
            .expect("active set is non-empty");
        if errors[worst] <= tau {
            break;
        }
        attacker_set.insert(worst);
        active.retain(|&i| i != worst);
    }

    Ok(DetectionOutcome {
        x_init: Some(x_init),
        attacker_set,
        geometric_flags,
        relative_errors: errors,
        honest: Some(honest),
        remaining: active,
    })
}
