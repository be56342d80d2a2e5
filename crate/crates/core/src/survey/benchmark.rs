//! Benchmark grading tables.
//!
//! A table is an ordered list of categories, each starting at a lower bound.
//! Lookup scans from the best category down and returns the first one whose
//! lower bound is at or below the (offset-shifted) score, so any overlap or
//! gap between published intervals resolves to the higher category.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::KpiKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error("score {score} (shifted {shifted}) outside scale {min}..={max} of {table:?}")]
    OutOfScale {
        table: String,
        score: f64,
        shifted: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid benchmark table {table:?}: {reason}")]
    InvalidTable { table: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCategory {
    pub label: String,
    pub lower_bound: f64,
    pub percentile_band: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub name: String,
    /// Added to an internal score before lookup.
    pub scale_offset: f64,
    pub scale_max: f64,
    /// Strictly descending by `lower_bound`.
    pub categories: Vec<BenchmarkCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    pub percentile_band: String,
}

impl BenchmarkTable {
    pub fn from_json(json: &str) -> Result<Self, BenchmarkError> {
        let table: BenchmarkTable =
            serde_json::from_str(json).map_err(|e| BenchmarkError::InvalidTable {
                table: "<json>".into(),
                reason: e.to_string(),
            })?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let invalid = |reason: &str| BenchmarkError::InvalidTable {
            table: self.name.clone(),
            reason: reason.to_owned(),
        };
        if self.categories.is_empty() {
            return Err(invalid("no categories"));
        }
        if !self
            .categories
            .windows(2)
            .all(|w| w[0].lower_bound > w[1].lower_bound)
        {
            return Err(invalid("lower bounds not strictly descending"));
        }
        if self.categories.iter().any(|c| !c.lower_bound.is_finite()) || !self.scale_max.is_finite()
        {
            return Err(invalid("non-finite bound"));
        }
        if self.categories[0].lower_bound > self.scale_max {
            return Err(invalid("top category starts above scale_max"));
        }
        Ok(())
    }

    /// Lowest representable value on the table's own (shifted) scale.
    pub fn scale_min(&self) -> f64 {
        self.categories.last().map_or(0.0, |c| c.lower_bound)
    }

    pub fn classify(&self, score: f64) -> Result<Classification, BenchmarkError> {
        let shifted = score + self.scale_offset;
        let min = self.scale_min();
        let out_of_scale = || BenchmarkError::OutOfScale {
            table: self.name.clone(),
            score,
            shifted,
            min,
            max: self.scale_max,
        };
        if !shifted.is_finite() || shifted > self.scale_max {
            return Err(out_of_scale());
        }
        self.categories
            .iter()
            .find(|c| c.lower_bound <= shifted)
            .map(|c| Classification {
                label: c.label.clone(),
                percentile_band: c.percentile_band.clone(),
            })
            .ok_or_else(out_of_scale)
    }
}

/// The tables used to grade each benchmarked KPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub ux_lite: Option<BenchmarkTable>,
    pub ueq_overall: Option<BenchmarkTable>,
    pub ueq_pragmatic: Option<BenchmarkTable>,
    pub ueq_hedonic: Option<BenchmarkTable>,
}

impl BenchmarkSet {
    pub fn table_for(&self, kind: KpiKind) -> Option<&BenchmarkTable> {
        match kind {
            KpiKind::UxLite => self.ux_lite.as_ref(),
            KpiKind::UeqOverall => self.ueq_overall.as_ref(),
            KpiKind::UeqPragmatic => self.ueq_pragmatic.as_ref(),
            KpiKind::UeqHedonic => self.ueq_hedonic.as_ref(),
            KpiKind::Psat | KpiKind::Nps => None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        [
            &self.ux_lite,
            &self.ueq_overall,
            &self.ueq_pragmatic,
            &self.ueq_hedonic,
        ]
        .into_iter()
        .flatten()
        .try_for_each(BenchmarkTable::validate)
    }
}

impl Default for BenchmarkSet {
    fn default() -> Self {
        Self {
            ux_lite: Some(ux_lite_table().clone()),
            ueq_overall: Some(ueq_s_overall_table().clone()),
            ueq_pragmatic: Some(ueq_s_pragmatic_table().clone()),
            ueq_hedonic: Some(ueq_s_hedonic_table().clone()),
        }
    }
}

macro_rules! embedded_table {
    ($fn_name:ident, $file:literal) => {
        pub fn $fn_name() -> &'static BenchmarkTable {
            static TABLE: OnceLock<BenchmarkTable> = OnceLock::new();
            TABLE.get_or_init(|| {
                BenchmarkTable::from_json(include_str!(concat!(
                    env!("CARGO_MANIFEST_DIR"),
                    "/data/benchmarks/",
                    $file
                )))
                .expect("embedded benchmark table is valid")
            })
        }
    };
}

embedded_table!(ux_lite_table, "ux_lite.json");
embedded_table!(ueq_s_overall_table, "ueq_s_overall.json");
embedded_table!(ueq_s_pragmatic_table, "ueq_s_pragmatic.json");
embedded_table!(ueq_s_hedonic_table, "ueq_s_hedonic.json");
