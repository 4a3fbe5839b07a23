use std::path::{Path, PathBuf};

use rhotica::stats::MushraOptions;
use rhotica::{AnalysisConfig, CostConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};

pub const CONFIG_ENV: &str = "RHOTICA_CONFIG";

/// Tool-wide defaults; any field may be omitted from a defaults file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub cost: CostConfig,
    pub analysis: AnalysisConfig,
    pub mushra: MushraOptions,
    /// Significance level for slope comparisons and the preference sign test.
    pub alpha: f64,
    /// Adapter worker count; `null` means one per available core.
    pub adapter_parallelism: Option<usize>,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            cost: CostConfig::default(),
            analysis: AnalysisConfig::default(),
            mushra: MushraOptions::default(),
            alpha: 0.05,
            adapter_parallelism: None,
        }
    }
}

impl Defaults {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate().context("cost")?;
        self.analysis.validate().context("analysis")?;
        check_alpha(self.alpha)?;
        check_alpha(self.mushra.alpha)?;
        if self.adapter_parallelism == Some(0) {
            return Err(CliError::Invalid(
                "adapter_parallelism must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Loads defaults from `explicit`, else from `$RHOTICA_CONFIG`, else built-ins.
pub fn load(explicit: Option<&Path>) -> Result<Defaults> {
    let path: Option<PathBuf> = match explicit {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from),
    };
    let defaults = match path {
        None => Defaults::default(),
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            serde_json::from_str(&text).context(path.display())?
        }
    };
    defaults.validate()?;
    Ok(defaults)
}
