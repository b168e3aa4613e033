//! Run configuration, optionally loaded from a TOML file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use septensor::criterion::CriterionConfig;
use septensor::rebuild::{Frame, HiddenCost, RebuildConfig, Strategy};

use crate::{usage, CliResult};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub verdict_tol: f64,
    pub exhaustive_limit: usize,
    /// Grid intervals for sweeps and curves.
    pub steps: usize,
    /// Seed for `random:N` states.
    pub seed: u64,
    /// Default file for `decompose --output`.
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub strict_nonglobal: bool,
    pub all_orders: bool,
    pub frame: Frame,
    pub strategy: Strategy,
    pub hidden_cost: HiddenCost,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CriterionConfig::default();
        RunConfig {
            verdict_tol: c.verdict_tol,
            exhaustive_limit: c.rebuild.exhaustive_limit,
            steps: 20,
            seed: 0,
            output: None,
            threads: None,
            strict_nonglobal: false,
            all_orders: false,
            frame: Frame::default(),
            strategy: Strategy::default(),
            hidden_cost: HiddenCost::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.verdict_tol > 0.0) {
            return usage("verdict_tol must be positive");
        }
        if self.steps < 1 {
            return usage("steps must be at least 1 (two grid points)");
        }
        if self.threads == Some(0) {
            return usage("threads must be positive");
        }
        Ok(())
    }

    pub fn criterion(&self) -> CriterionConfig {
        CriterionConfig {
            verdict_tol: self.verdict_tol,
            rebuild: RebuildConfig {
                exhaustive_limit: self.exhaustive_limit,
                strategy: self.strategy,
                frame: self.frame,
                hidden_cost: self.hidden_cost,
                ..RebuildConfig::default()
            },
            strict_nonglobal: self.strict_nonglobal,
            all_orders: self.all_orders,
            ..CriterionConfig::default()
        }
    }
}
