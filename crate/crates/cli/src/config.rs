use std::path::Path;

use clap::Args;
use serde::Deserialize;

use effc_core::{Error, ModelParams, Result};

/// Every knob a subcommand may read. Values come from `--config` JSON and
/// are then overridden by any flag given on the command line.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Coalescence rate per pair of blocks.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Shatter rate per block.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Ceiling standing in for infinitely many blocks.
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Simulation horizon.
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Number of independent Monte Carlo replicas.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Root seed; every replica gets its own stream under it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target block count.
    #[arg(long)]
    pub k: Option<u32>,
    /// Largest block count in tables, or the oracle state count.
    #[arg(long)]
    pub k_max: Option<u32>,
    /// Initial block count (defaults to the ceiling).
    #[arg(long)]
    pub initial: Option<u32>,
    /// Event budget for a single path.
    #[arg(long)]
    pub max_events: Option<u64>,
    /// Box sizes, comma separated and decreasing.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    /// Levels for the speed statistic, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub j_window: Option<Vec<u32>>,
    /// Acceptance suite: quick or full.
    #[arg(long)]
    pub suite: Option<String>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn merged(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self, flags, c, lambda, n_max, t_end, replicas, seed, k, k_max, initial, max_events, scales, j_window,
            suite
        );
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Domain(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("c", self.c)?;
        positive("t_end", self.t_end)?;
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Domain(format!("lambda must be nonnegative, got {l}")));
            }
        }
        for (name, v) in [("n_max", self.n_max), ("k", self.k), ("k_max", self.k_max), ("initial", self.initial)] {
            if v == Some(0) {
                return Err(Error::Domain(format!("{name} must be >= 1")));
            }
        }
        if self.replicas == Some(0) {
            return Err(Error::Domain("replicas must be >= 1".into()));
        }
        if let Some(s) = &self.scales {
            if s.iter().any(|&d| !(d > 0.0)) {
                return Err(Error::Domain("scales must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.need("c", self.c)?, self.need("lambda", self.lambda)?)
    }

    pub fn need<T: Copy>(&self, name: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| Error::Parse(format!("missing required option --{}", name.replace('_', "-"))))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
