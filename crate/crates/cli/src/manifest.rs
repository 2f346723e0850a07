use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use smallcell_core::ScenarioConfig;

use crate::Format;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGapSpec {
    pub k_users: usize,
    pub snr_db: f64,
    pub n_max: usize,
}

/// Written next to every output so the run can be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub master_seed: Option<u64>,
    /// Full scenario after command-line overrides, defaults included.
    pub config: Option<ScenarioConfig>,
    pub sweep: Option<SweepSpec>,
    pub rate_gap: Option<RateGapSpec>,
    pub format: Format,
    pub output: PathBuf,
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), String> {
        let text = serde_json::to_string_pretty(self).map_err(|e| e.to_string())?;
        std::fs::write(path, text + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if let Some(cfg) = &m.config {
            cfg.validate()
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
        Ok(m)
    }
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
