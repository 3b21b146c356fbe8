//! Monte Carlo campaigns for secure TW-TOA localization: random deployments,
//! attacker rotation, RMSE and detection statistics, bound overlays and CSV
//! output.

pub mod campaign;
pub mod config;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

pub use campaign::{run_campaign, run_campaign_with_threads, CampaignStats, CellStats};
pub use config::{CampaignConfig, ConfigOverrides, Method};
pub use report::{emit_csv, write_csv, CSV_HEADER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] secloc_core::Error),
}

impl SimError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Io { .. } => 3,
            SimError::Config(_) | SimError::Core(_) => 2,
        }
    }
}
