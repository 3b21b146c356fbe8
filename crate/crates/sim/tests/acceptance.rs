//! Acceptance gate. Runs every criterion, prints one verdict line each and
//! exits non-zero if any of them fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use secloc_core::baseline::{glrt_detect, GlrtConfig};
use secloc_core::gtrs::{build_system, constraint_value, solve, SolverOptions};
use secloc_core::measurement::{generate_measurements, AttackSpec};
use secloc_core::pipeline::locate_secure;
use secloc_core::theory::{detection_bounds, prob_abs_less, ErrorStats};
use secloc_core::Point;
use secloc_sim::campaign::sample_deployment;
use secloc_sim::{run_campaign, run_campaign_with_threads, write_csv, CampaignConfig, CampaignStats, Method};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn noiseless_consistency() -> Verdict {
    let start = Instant::now();
    let cfg = CampaignConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut flagged = 0;
    for i in 0..100 {
        let (scene, _) = sample_deployment(&cfg, i).expect("deployment");
        let m = generate_measurements(&scene, &AttackSpec::benign(), 1e-12, 1, &mut rng).unwrap();
        let r = locate_secure(&scene.anchors, &m, cfg.tau).expect("pipeline");
        worst = worst.max(r.x_final.distance(scene.target));
        flagged += r.attacker_set.len();
    }
    let elapsed = start.elapsed();
    verdict(
        worst < 1e-6 && flagged == 0 && within(elapsed, Duration::from_secs(1)),
        format!("max error {worst:.2e} m, {flagged} flags, {elapsed:.2?}"),
    )
}

fn gtrs_optimality() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut solved = 0;
    let mut violations = 0;
    let mut worst_residual = 0.0_f64;
    while solved < 1000 {
        let n = rng.random_range(4..8);
        let anchors: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)))
            .collect();
        let x = Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let d: Vec<f64> = anchors
            .iter()
            .map(|a| (a.distance(x) + noise.sample(&mut rng)).max(1e-6))
            .collect();
        let Ok(system) = build_system(&anchors, &d) else { continue };
        let sol = solve(&system, SolverOptions::default()).expect("solver");
        let f = system.objective(&sol.y);
        let best_random = (0..10_000)
            .map(|_| {
                let p = Point::new(rng.random_range(-10.0..30.0), rng.random_range(-10.0..30.0));
                system.objective(&[p.x, p.y, p.norm_sq()])
            })
            .fold(f64::INFINITY, f64::min);
        if f > best_random * (1.0 + 1e-9) {
            violations += 1;
        }
        worst_residual = worst_residual.max(constraint_value(&sol.y).abs());
        solved += 1;
    }
    let elapsed = start.elapsed();
    verdict(
        violations == 0 && worst_residual <= 1e-9 && within(elapsed, Duration::from_secs(30)),
        format!("{violations} beaten by random search, max residual {worst_residual:.2e}, {elapsed:.2?}"),
    )
}

fn bound_ordering() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(3..9);
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let stats = ErrorStats::new(
            mu,
            rng.random_range(0.01..2.0),
            rng.random_range(0..n),
            rng.random_range(0.0..1.5),
        )
        .unwrap();
        let b = detection_bounds(&stats).unwrap();
        let lower = b.lpd1.max(b.lpd2);
        if !(0.0 <= lower && lower <= b.up_d && b.up_d <= 1.0) {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("{violations} violations in 10000 draws"))
}

fn rotation_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = 1_000_000;
    let mut worst_z = 0.0_f64;
    for _ in 0..50 {
        let mu_a: f64 = rng.random_range(-3.0..3.0);
        let mu_i: f64 = rng.random_range(-3.0..3.0);
        let sigma: f64 = rng.random_range(0.2..2.0);
        let za = Normal::new(mu_a, sigma).unwrap();
        let zi = Normal::new(mu_i, sigma).unwrap();
        let hits = (0..samples)
            .filter(|_| {
                let a: f64 = za.sample(&mut rng);
                let i: f64 = zi.sample(&mut rng);
                a.abs() < i.abs()
            })
            .count();
        let p_hat = hits as f64 / samples as f64;
        let p = prob_abs_less(mu_a, mu_i, sigma).unwrap();
        let se = (p * (1.0 - p) / samples as f64).sqrt().max(1.0 / samples as f64);
        worst_z = worst_z.max((p_hat - p).abs() / se);
    }
    verdict(worst_z <= 3.0, format!("worst deviation {worst_z:.2} standard errors"))
}

fn bound_sandwich() -> Verdict {
    let start = Instant::now();
    let cfg = CampaignConfig {
        k_samples: 1,
        delta_grid: (1..=7).map(|k| 2.0 * f64::from(k)).collect(),
        ..CampaignConfig::default()
    };
    let stats = run_campaign(&cfg).expect("campaign");
    let mut misses = Vec::new();
    for c in &stats.cells {
        let se = c.detection_se();
        if !(c.lp_d - 3.0 * se <= c.detection_rate && c.detection_rate <= c.up_d + 3.0 * se) {
            misses.push(format!(
                "delta {}: {:.4} outside [{:.4}, {:.4}]",
                c.delta, c.detection_rate, c.lp_d, c.up_d
            ));
        }
    }
    let elapsed = start.elapsed();
    verdict(
        misses.is_empty() && within(elapsed, Duration::from_secs(300)),
        if misses.is_empty() {
            format!("{} grid points inside, {elapsed:.2?}", stats.cells.len())
        } else {
            misses.join("; ")
        },
    )
}

fn detection_rate() -> Verdict {
    let rate = |n_anchors: usize| {
        let cfg = CampaignConfig {
            n_anchors,
            delta_grid: vec![15.0],
            ..CampaignConfig::default()
        };
        run_campaign(&cfg).expect("campaign").cells[0].detection_rate
    };
    let (four, five) = (rate(4), rate(5));
    verdict(
        four > 0.90 && five > 0.95,
        format!("N=4: {four:.4}, N=5: {five:.4}"),
    )
}

fn rmse_campaign() -> CampaignStats {
    let cfg = CampaignConfig {
        delta_grid: vec![0.0, 5.0, 6.0, 7.0, 15.0],
        methods: Method::ALL.to_vec(),
        ..CampaignConfig::default()
    };
    run_campaign(&cfg).expect("campaign")
}

fn rmse(stats: &CampaignStats, method: Method, delta: f64) -> f64 {
    stats.cell(method, delta).expect("cell").rmse
}

fn rmse_ordering(stats: &CampaignStats) -> Verdict {
    let gain = rmse(stats, Method::NoDetection, 15.0) - rmse(stats, Method::Proposed, 15.0);
    let cost = rmse(stats, Method::Proposed, 0.0) - rmse(stats, Method::PerfectDetection, 0.0);
    verdict(
        gain >= 2.0 && cost <= 0.5,
        format!("gain over no detection at 15 m: {gain:.3} m, gap to perfect detection at 0 m: {cost:.3} m"),
    )
}

fn saturation(stats: &CampaignStats) -> Verdict {
    let peak = [5.0, 6.0, 7.0]
        .into_iter()
        .map(|d| rmse(stats, Method::Proposed, d))
        .fold(f64::NEG_INFINITY, f64::max);
    let tail = rmse(stats, Method::Proposed, 15.0);
    verdict(
        tail <= peak + 0.5,
        format!("RMSE at 15 m: {tail:.3} m, peak over 5-7 m: {peak:.3} m"),
    )
}

fn baseline_divergence(stats: &CampaignStats) -> Verdict {
    let gap = rmse(stats, Method::WlsGlrt, 15.0) - rmse(stats, Method::Proposed, 15.0);
    verdict(gap >= 2.0, format!("WLS+GLRT minus proposed at 15 m: {gap:.3} m"))
}

fn glrt_calibration() -> Verdict {
    let cfg = CampaignConfig::default();
    let glrt = GlrtConfig::new(cfg.p_fa, cfg.sigma, cfg.k_samples).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let trials = 10_000;
    let mut flags = vec![0u64; cfg.n_anchors];
    for t in 0..trials {
        let (scene, _) = sample_deployment(&cfg, t % 100).expect("deployment");
        let m = generate_measurements(&scene, &AttackSpec::benign(), cfg.sigma, cfg.k_samples, &mut rng).unwrap();
        let set: BTreeSet<usize> = glrt_detect(scene.target, &m, &scene.anchors, &glrt).unwrap();
        for i in set {
            flags[i] += 1;
        }
    }
    let se = (cfg.p_fa * (1.0 - cfg.p_fa) / trials as f64).sqrt();
    let rates: Vec<f64> = flags.iter().map(|f| *f as f64 / trials as f64).collect();
    let ok = rates.iter().all(|r| (r - cfg.p_fa).abs() <= 3.0 * se);
    verdict(
        ok,
        format!(
            "per-anchor rates {} (3 se = {:.4})",
            rates.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", "),
            3.0 * se
        ),
    )
}

fn determinism() -> Verdict {
    let cfg = CampaignConfig {
        n_deployments: 20,
        n_corruptions: 5,
        delta_grid: vec![0.0, 4.0, 15.0],
        methods: Method::ALL.to_vec(),
        seed: 77,
        ..CampaignConfig::default()
    };
    let csv = |threads| {
        let mut out = Vec::new();
        write_csv(&run_campaign_with_threads(&cfg, threads).expect("campaign"), &mut out).unwrap();
        out
    };
    let (one, eight) = (csv(1), csv(8));
    verdict(one == eight, format!("{} bytes per run", one.len()))
}

fn main() {
    let rmse_stats = rmse_campaign();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("noiseless consistency", Box::new(noiseless_consistency)),
        ("GTRS optimality", Box::new(gtrs_optimality)),
        ("bound ordering", Box::new(bound_ordering)),
        ("rotation formula oracle", Box::new(rotation_oracle)),
        ("bound sandwich at K=1", Box::new(bound_sandwich)),
        ("detection rate", Box::new(detection_rate)),
        ("RMSE ordering and gap", Box::new(|| rmse_ordering(&rmse_stats))),
        ("saturation", Box::new(|| saturation(&rmse_stats))),
        ("baseline divergence", Box::new(|| baseline_divergence(&rmse_stats))),
        ("GLRT calibration", Box::new(glrt_calibration)),
        ("determinism across thread counts", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {}: {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            n + 1,
            v.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
