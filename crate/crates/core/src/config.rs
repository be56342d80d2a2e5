//! Analytics configuration file.
//!
//! ```json
//! {
//!   "min_n": 5,
//!   "alpha": 0.05,
//!   "benchmarks": { "UxLite": { "name": "...", "scale_offset": 0, "scale_max": 100, "categories": [] } },
//!   "highlight_min_delta": { "Psat": 5.0 },
//!   "cors_origin": "http://localhost:5173"
//! }
//! ```
//!
//! Every key is optional. A `benchmarks` entry replaces the embedded table for
//! that KPI; `null` removes it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::DEFAULT_ALPHA;
use crate::survey::{BenchmarkSet, BenchmarkTable, KpiKind};

pub const DEFAULT_MIN_N: usize = 5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Buckets with fewer responses are suppressed.
    pub min_n: usize,
    pub alpha: f64,
    pub benchmarks: BTreeMap<KpiKind, Option<BenchmarkTable>>,
    /// Minimum absolute delta (in KPI units) for a significant change to be
    /// highlighted in reports. Absent means significance alone decides.
    pub highlight_min_delta: BTreeMap<KpiKind, f64>,
    pub cors_origin: Option<String>,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            min_n: DEFAULT_MIN_N,
            alpha: DEFAULT_ALPHA,
            benchmarks: BTreeMap::new(),
            highlight_min_delta: BTreeMap::new(),
            cors_origin: None,
        }
    }
}

impl AnalyticsConfig {
    pub fn from_json(json: &str) -> Result<Self, ConfigError> {
        let config: Self =
            serde_json::from_str(json).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_n == 0 {
            return Err(ConfigError::Invalid("min_n must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConfigError::Invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        for (kind, delta) in &self.highlight_min_delta {
            if !(delta.is_finite() && *delta >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "highlight_min_delta for {kind} must be a non-negative number"
                )));
            }
        }
        if self.benchmarks.contains_key(&KpiKind::Psat) || self.benchmarks.contains_key(&KpiKind::Nps) {
            return Err(ConfigError::Invalid(
                "benchmark tables apply only to UX-Lite and UEQ-S kinds".into(),
            ));
        }
        self.benchmark_set()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Embedded tables with the configured overrides applied.
    pub fn benchmark_set(&self) -> BenchmarkSet {
        let mut set = BenchmarkSet::default();
        for (kind, table) in &self.benchmarks {
            let slot = match kind {
                KpiKind::UxLite => &mut set.ux_lite,
                KpiKind::UeqOverall => &mut set.ueq_overall,
                KpiKind::UeqPragmatic => &mut set.ueq_pragmatic,
                KpiKind::UeqHedonic => &mut set.ueq_hedonic,
                KpiKind::Psat | KpiKind::Nps => continue,
            };
            *slot = table.clone();
        }
        set
    }

    /// Whether a significant change of `delta` is large enough to highlight.
    pub fn is_substantive(&self, kind: KpiKind, delta: f64) -> bool {
        self.highlight_min_delta
            .get(&kind)
            .map_or(true, |min| delta.abs() >= *min)
    }
}
