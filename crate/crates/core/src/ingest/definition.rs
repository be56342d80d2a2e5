use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::survey::Channel;

/// Where a source column lands in the canonical record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnTarget {
    /// A context field name or a question code, value taken verbatim.
    Field(String),
    /// A question code whose source values are labels, mapped explicitly.
    Coded {
        target: String,
        values: BTreeMap<String, i64>,
    },
}

impl ColumnTarget {
    pub fn target(&self) -> &str {
        match self {
            Self::Field(t) => t,
            Self::Coded { target, .. } => target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    ResponseId,
    Timestamp,
    Role,
    Frequency,
    Experience,
    Customer,
    CommentPositive,
    CommentNegative,
    Answer,
}

impl Slot {
    pub(crate) fn of(target: &str) -> Slot {
        match target {
            "response_id" => Slot::ResponseId,
            "timestamp" => Slot::Timestamp,
            "role" => Slot::Role,
            "frequency_of_use" => Slot::Frequency,
            "experience" => Slot::Experience,
            "customer" => Slot::Customer,
            "comment_positive" => Slot::CommentPositive,
            "comment_negative" => Slot::CommentNegative,
            _ => Slot::Answer,
        }
    }
}

/// How one survey export maps onto canonical responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyDefinition {
    pub survey_id: String,
    pub product_id: String,
    pub channel: Channel,
    pub column_map: BTreeMap<String, ColumnTarget>,
    /// Source columns dropped before anything else touches the row.
    #[serde(default)]
    pub redact_fields: Vec<String>,
}

impl SurveyDefinition {
    pub fn from_json(json: &str) -> Result<Self, IngestError> {
        let def: SurveyDefinition = serde_json::from_str(json)
            .map_err(|e| IngestError::InvalidDefinition(e.to_string()))?;
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let invalid = |m: String| Err(IngestError::InvalidDefinition(m));
        if self.product_id.trim().is_empty() {
            return invalid("empty product_id".into());
        }
        let mut targets = BTreeSet::new();
        for target in self.column_map.values().map(ColumnTarget::target) {
            if !targets.insert(target) {
                return invalid(format!("target {target:?} mapped twice"));
            }
        }
        for field in &self.redact_fields {
            if self.column_map.contains_key(field) || targets.contains(field.as_str()) {
                return invalid(format!("redacted field {field:?} is also mapped"));
            }
        }
        for required in ["response_id", "timestamp"] {
            if !targets.contains(required) {
                return invalid(format!("no column maps to {required}"));
            }
        }
        for (source, target) in &self.column_map {
            if let ColumnTarget::Coded { target, .. } = target {
                if Slot::of(target) != Slot::Answer {
                    return invalid(format!(
                        "column {source:?}: value maps only apply to question codes, not {target:?}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Source column holding the given canonical target.
    pub fn source_for(&self, target: &str) -> Option<&str> {
        self.column_map
            .iter()
            .find(|(_, t)| t.target() == target)
            .map(|(s, _)| s.as_str())
    }
}
