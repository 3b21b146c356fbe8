use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::SimError;

/// Localization methods a campaign can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Detection followed by GTRS and cost-based selection.
    Proposed,
    /// GTRS on every anchor.
    NoDetection,
    /// GTRS on the anchors that are truly honest.
    PerfectDetection,
    /// Weighted least squares on every anchor, GLRT for detection.
    WlsGlrt,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Proposed,
        Method::NoDetection,
        Method::PerfectDetection,
        Method::WlsGlrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::NoDetection => "no_detection",
            Method::PerfectDetection => "perfect_detection",
            Method::WlsGlrt => "wls_glrt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| SimError::Config(format!("unknown method `{s}`")))
    }
}

/// Everything that determines a campaign's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub region_side: f64,
    pub n_anchors: usize,
    pub n_deployments: usize,
    pub n_corruptions: usize,
    pub k_samples: usize,
    pub sigma: f64,
    pub tau: f64,
    pub delta_grid: Vec<f64>,
    pub attackers_per_trial: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub p_fa: f64,
}

pub const DESK_DEPLOYMENTS: usize = 100;
pub const DESK_CORRUPTIONS: usize = 20;
pub const FULL_DEPLOYMENTS: usize = 500;
pub const FULL_CORRUPTIONS: usize = 100;

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            region_side: 20.0,
            n_anchors: 4,
            n_deployments: DESK_DEPLOYMENTS,
            n_corruptions: DESK_CORRUPTIONS,
            k_samples: 10,
            sigma: 1.0,
            tau: secloc_core::detection::DEFAULT_TAU,
            delta_grid: (0..=15).map(f64::from).collect(),
            attackers_per_trial: 1,
            seed: 0,
            methods: vec![Method::Proposed],
            p_fa: secloc_core::baseline::DEFAULT_P_FA,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.region_side > 0.0 && self.region_side.is_finite()) {
            return bad(format!("region side must be positive, got {}", self.region_side));
        }
        if self.n_anchors < secloc_core::MIN_ANCHORS + 1 {
            return bad(format!(
                "need at least {} anchors, got {}",
                secloc_core::MIN_ANCHORS + 1,
                self.n_anchors
            ));
        }
        for (name, v) in [
            ("n_deployments", self.n_deployments),
            ("n_corruptions", self.n_corruptions),
            ("k_samples", self.k_samples),
            ("attackers_per_trial", self.attackers_per_trial),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.attackers_per_trial + secloc_core::MIN_ANCHORS > self.n_anchors {
            return bad(format!(
                "{} attackers leave fewer than {} honest anchors out of {}",
                self.attackers_per_trial,
                secloc_core::MIN_ANCHORS,
                self.n_anchors
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.delta_grid.is_empty() {
            return bad("delta grid is empty".into());
        }
        if let Some(d) = self.delta_grid.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return bad(format!("delta values must be non-negative, got {d}"));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if !(self.p_fa > 0.0 && self.p_fa < 1.0) {
            return bad(format!("p_fa must lie in (0, 1), got {}", self.p_fa));
        }
        Ok(())
    }
}

/// Partial configuration as read from a TOML file; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub region_side: Option<f64>,
    pub n_anchors: Option<usize>,
    pub n_deployments: Option<usize>,
    pub n_corruptions: Option<usize>,
    pub k_samples: Option<usize>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub delta_grid: Option<Vec<f64>>,
    pub attackers_per_trial: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<Method>>,
    pub p_fa: Option<f64>,
    pub full_scale: Option<bool>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(format!("bad config file: {e}")))
    }

    /// Fields set here replace the corresponding ones in `cfg`.
    pub fn apply(&self, cfg: &mut CampaignConfig) {
        if self.full_scale == Some(true) {
            cfg.n_deployments = FULL_DEPLOYMENTS;
            cfg.n_corruptions = FULL_CORRUPTIONS;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        take!(
            region_side,
            n_anchors,
            n_deployments,
            n_corruptions,
            k_samples,
            sigma,
            tau,
            delta_grid,
            attackers_per_trial,
            seed,
            methods,
            p_fa
        );
    }
}

/// Parses `0,1,2.5` style lists.
pub fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>, SimError>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| SimError::Config(format!("cannot parse `{s}`: {e}")))
        })
        .collect()
}
