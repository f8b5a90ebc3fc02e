use paritybench_core::{BenchmarkConfig, CoverageReport, KlBreakdown, ModelClass, ModelParams};
use serde::{Deserialize, Serialize};

use crate::instance::sha256_hex;
use crate::settings::{TrainSettings, CONFIG_VERSION};

/// Evaluation of one model table on one instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Exact forward KL in nats.
    pub kl: f64,
    /// Set when some `q(x)` on the support was below the clamp floor.
    pub kl_clamped: bool,
    pub breakdown: KlBreakdown,
    /// Model mass on the valid support.
    pub support_mass: f64,
    pub coverage: CoverageReport,
    /// Only for the spectral proxy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_mass_clipped: Option<f64>,
}

/// One (instance, model) result. Records are append-only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: String,
    pub config_version: u32,
    pub instance: BenchmarkConfig,
    pub model: ModelClass,
    pub train_settings: TrainSettings,
    pub train_checksum: String,
    pub band_checksum: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub loss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsRecord>,
    /// Divergence or evaluation failure; the sweep keeps going.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub wall_clock_secs: f64,
    pub software_version: String,
}

/// Equality ignores the wall-clock time.
impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
            && self.config_version == other.config_version
            && self.instance == other.instance
            && self.model == other.model
            && self.train_settings == other.train_settings
            && self.train_checksum == other.train_checksum
            && self.band_checksum == other.band_checksum
            && self.params == other.params
            && self.loss_trace == other.loss_trace
            && self.final_loss == other.final_loss
            && self.metrics == other.metrics
            && self.failure == other.failure
            && self.software_version == other.software_version
    }
}

impl RunRecord {
    pub fn kl(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.kl)
    }

    pub fn coverage_at(&self, budget: u64) -> Option<f64> {
        self.metrics.as_ref().and_then(|m| m.coverage.coverage_at(budget))
    }

    pub fn recovery_at(&self, budget: u64) -> Option<f64> {
        self.metrics.as_ref().and_then(|m| m.coverage.recovery_at(budget))
    }
}

/// Content hash of everything that determines a record's numbers.
pub fn record_key(config: &BenchmarkConfig, model: ModelClass, settings: &TrainSettings, budgets: &[u64]) -> String {
    let identity = serde_json::json!({
        "version": CONFIG_VERSION,
        "instance": config,
        "model": model,
        "train": settings,
        "budgets": budgets,
    });
    sha256_hex(identity.to_string().as_bytes())
}
