use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use secloc_sim::config::{parse_list, FULL_CORRUPTIONS, FULL_DEPLOYMENTS};
use secloc_sim::{emit_csv, run_campaign_with_threads, write_csv, CampaignConfig, ConfigOverrides, Method, SimError};

#[derive(Parser, Debug)]
#[command(name = "secloc-sim", version, about = "Monte Carlo campaigns for secure TW-TOA localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// RMSE versus attack intensity: proposed against no/perfect detection.
    Rmse(CampaignArgs),
    /// Detection success of the proposed method.
    Detection(CampaignArgs),
    /// Detection probability with analytic bounds (single sample per anchor).
    Bounds(CampaignArgs),
    /// Six anchors, every pair of anchors attacked.
    TwoAttackers(CampaignArgs),
    /// Proposed method against WLS with GLRT detection.
    Compare(CampaignArgs),
}

#[derive(Args, Debug, Default)]
struct CampaignArgs {
    /// TOML file with campaign defaults; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    region_side: Option<f64>,
    #[arg(long)]
    n_anchors: Option<usize>,
    #[arg(long)]
    n_deployments: Option<usize>,
    #[arg(long)]
    n_corruptions: Option<usize>,
    #[arg(long)]
    k_samples: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Comma-separated attack intensities in meters, e.g. `0,1,2,5`.
    #[arg(long)]
    delta_grid: Option<String>,
    #[arg(long)]
    attackers_per_trial: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of proposed,no_detection,perfect_detection,wls_glrt.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    p_fa: Option<f64>,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
    /// Large campaign: 500 deployments, 100 repeats per corruption.
    #[arg(long)]
    full_scale: bool,
}

fn preset(command: &Command) -> CampaignConfig {
    let base = CampaignConfig::default();
    match command {
        Command::Rmse(_) => CampaignConfig {
            methods: vec![Method::Proposed, Method::NoDetection, Method::PerfectDetection],
            ..base
        },
        Command::Detection(_) => base,
        Command::Bounds(_) => CampaignConfig { k_samples: 1, ..base },
        Command::TwoAttackers(_) => CampaignConfig {
            n_anchors: 6,
            attackers_per_trial: 2,
            methods: Method::ALL.to_vec(),
            ..base
        },
        Command::Compare(_) => CampaignConfig {
            methods: vec![Method::Proposed, Method::WlsGlrt],
            ..base
        },
    }
}

fn build_config(command: &Command, args: &CampaignArgs) -> Result<CampaignConfig, SimError> {
    let mut cfg = preset(command);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.clone(),
            source,
        })?;
        ConfigOverrides::from_toml(&text)?.apply(&mut cfg);
    }
    if args.full_scale {
        cfg.n_deployments = FULL_DEPLOYMENTS;
        cfg.n_corruptions = FULL_CORRUPTIONS;
    }
    let flags = ConfigOverrides {
        region_side: args.region_side,
        n_anchors: args.n_anchors,
        n_deployments: args.n_deployments,
        n_corruptions: args.n_corruptions,
        k_samples: args.k_samples,
        sigma: args.sigma,
        tau: args.tau,
        delta_grid: args.delta_grid.as_deref().map(parse_list).transpose()?,
        attackers_per_trial: args.attackers_per_trial,
        seed: args.seed,
        methods: args.methods.as_deref().map(parse_list).transpose()?,
        p_fa: args.p_fa,
        full_scale: None,
    };
    flags.apply(&mut cfg);
    if matches!(command, Command::Bounds(_)) {
        cfg.k_samples = 1;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), SimError> {
    let args = match &cli.command {
        Command::Rmse(a)
        | Command::Detection(a)
        | Command::Bounds(a)
        | Command::TwoAttackers(a)
        | Command::Compare(a) => a,
    };
    let cfg = build_config(&cli.command, args)?;
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let stats = run_campaign_with_threads(&cfg, threads)?;
    match &args.out {
        Some(path) => emit_csv(&stats, path)?,
        None => {
            let stdout = std::io::stdout();
            write_csv(&stats, stdout.lock()).map_err(|source| SimError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?;
        }
    }
    let excluded: u64 = stats.cells.iter().map(|c| c.excluded_trials).sum();
    let _ = writeln!(
        std::io::stderr(),
        "{} cells, {} excluded trials, {} redrawn deployments",
        stats.cells.len(),
        excluded,
        stats.resampled_deployments
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_forces_single_sample() {
        let args = CampaignArgs {
            k_samples: Some(10),
            ..CampaignArgs::default()
        };
        let cmd = Command::Bounds(CampaignArgs::default());
        assert_eq!(build_config(&cmd, &args).unwrap().k_samples, 1);
    }

    #[test]
    fn flags_override_presets() {
        let args = CampaignArgs {
            n_anchors: Some(5),
            delta_grid: Some("0,15".into()),
            full_scale: true,
            n_corruptions: Some(3),
            ..CampaignArgs::default()
        };
        let cmd = Command::Rmse(CampaignArgs::default());
        let cfg = build_config(&cmd, &args).unwrap();
        assert_eq!(cfg.n_anchors, 5);
        assert_eq!(cfg.delta_grid, vec![0.0, 15.0]);
        assert_eq!(cfg.n_deployments, FULL_DEPLOYMENTS);
        assert_eq!(cfg.n_corruptions, 3);
        assert_eq!(cfg.methods.len(), 3);
    }

    #[test]
    fn two_attacker_preset() {
        let cmd = Command::TwoAttackers(CampaignArgs::default());
        let cfg = build_config(&cmd, &CampaignArgs::default()).unwrap();
        assert_eq!((cfg.n_anchors, cfg.attackers_per_trial), (6, 2));
    }

    #[test]
    fn bad_flag_is_config_error() {
        let args = CampaignArgs {
            tau: Some(3.0),
            ..CampaignArgs::default()
        };
        let err = build_config(&Command::Detection(CampaignArgs::default()), &args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
