//! Raw survey exports to canonical responses.
//!
//! Every input row is either accepted as a [`SurveyResponse`] satisfying all
//! record invariants or rejected with a reason; nothing is coerced. Redacted
//! source columns are dropped before a row is looked at.

mod definition;
mod store;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use definition::{ColumnTarget, SurveyDefinition};
pub use store::{Store, StoreError, StoreLock, StoreSnapshot};

use crate::survey::{Frequency, Instrument, ResponseError, SurveyResponse};
use definition::Slot;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty")]
    EmptyFile,
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("invalid survey definition: {0}")]
    InvalidDefinition(String),
    #[error("response_id {response_id:?} from survey {survey_id:?} already present")]
    DuplicateResponseId {
        response_id: String,
        survey_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason")]
pub enum RejectReason {
    OutOfRangeAnswer { code: String, value: i64 },
    NoRecognizedAnswers,
    MissingField { field: String },
    InvalidAnswer { column: String, value: String },
    UnknownLabel { column: String, label: String },
    InvalidTimestamp { value: String },
    MissingTimezone { value: String },
    InvalidContext { column: String, value: String },
    DuplicateResponseId { response_id: String },
    MalformedRow { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning")]
pub enum IngestWarning {
    /// A partially answered instrument block was dropped; the rest of the row was kept.
    IncompleteBlock { instrument: Instrument, answered: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue<T> {
    /// 1-based data row (CSV, header excluded) or line number (NDJSON).
    pub row: usize,
    #[serde(flatten)]
    pub issue: T,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_reasons: Vec<RowIssue<RejectReason>>,
    pub warnings: Vec<RowIssue<IngestWarning>>,
}

/// A single source value before mapping.
#[derive(Debug, Clone)]
enum Cell {
    Text(String),
    Int(i64),
    Other(String),
}

impl Cell {
    fn from_json(v: serde_json::Value) -> Option<Cell> {
        match v {
            serde_json::Value::Null => None,
            serde_json::Value::String(s) => Some(Cell::Text(s)),
            serde_json::Value::Number(n) => Some(match n.as_i64() {
                Some(i) => Cell::Int(i),
                None => Cell::Other(n.to_string()),
            }),
            other => Some(Cell::Other(other.to_string())),
        }
    }

    /// `None` for blank text.
    fn non_blank(self) -> Option<Cell> {
        match self {
            Cell::Text(s) if s.trim().is_empty() => None,
            c => Some(c),
        }
    }

    fn raw(&self) -> String {
        match self {
            Cell::Text(s) | Cell::Other(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
        }
    }

    fn text(self) -> String {
        match self {
            Cell::Text(s) => s.trim().to_owned(),
            other => other.raw(),
        }
    }
}

fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, RejectReason> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(t.with_timezone(&Utc));
    }
    let naive = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .any(|f| NaiveDateTime::parse_from_str(raw, f).is_ok());
    if naive {
        Err(RejectReason::MissingTimezone {
            value: raw.to_owned(),
        })
    } else {
        Err(RejectReason::InvalidTimestamp {
            value: raw.to_owned(),
        })
    }
}

/// Maps one source record; `fields` yields (source column, cell) pairs.
fn map_record(
    def: &SurveyDefinition,
    fields: impl IntoIterator<Item = (String, Option<Cell>)>,
    warnings: &mut Vec<IngestWarning>,
) -> Result<SurveyResponse, RejectReason> {
    let mut response_id = None;
    let mut timestamp = None;
    let mut role = None;
    let mut frequency = None;
    let mut experience = None;
    let mut customer = None;
    let mut comment_positive = None;
    let mut comment_negative = None;
    let mut answers = BTreeMap::new();

    for (column, cell) in fields {
        if def.redact_fields.contains(&column) {
            continue;
        }
        let Some(target) = def.column_map.get(&column) else {
            continue;
        };
        let Some(cell) = cell.and_then(Cell::non_blank) else {
            continue;
        };
        let slot = Slot::of(target.target());
        match slot {
            Slot::Answer => {
                let value = match (target, &cell) {
                    (ColumnTarget::Coded { values, .. }, _) => {
                        let label = cell.clone().text();
                        *values.get(&label).ok_or(RejectReason::UnknownLabel {
                            column: column.clone(),
                            label,
                        })?
                    }
                    (ColumnTarget::Field(_), Cell::Int(i)) => *i,
                    (ColumnTarget::Field(_), Cell::Text(s)) => {
                        s.trim().parse().map_err(|_| RejectReason::InvalidAnswer {
                            column: column.clone(),
                            value: s.clone(),
                        })?
                    }
                    (ColumnTarget::Field(_), Cell::Other(s)) => {
                        return Err(RejectReason::InvalidAnswer {
                            column,
                            value: s.clone(),
                        })
                    }
                };
                answers.insert(target.target().to_owned(), value);
            }
            Slot::Timestamp => timestamp = Some(parse_timestamp(&cell.text())?),
            Slot::Frequency => {
                let raw = cell.text();
                frequency = Some(raw.parse::<Frequency>().map_err(|_| {
                    RejectReason::InvalidContext {
                        column: column.clone(),
                        value: raw,
                    }
                })?);
            }
            Slot::ResponseId => response_id = Some(cell.text()),
            Slot::Role => role = Some(cell.text()),
            Slot::Experience => experience = Some(cell.text()),
            Slot::Customer => customer = Some(cell.text()),
            // comments are kept verbatim
            Slot::CommentPositive => comment_positive = Some(cell.raw()),
            Slot::CommentNegative => comment_negative = Some(cell.raw()),
        }
    }

    if !answers.keys().any(|c| Instrument::for_code(c).is_some()) {
        return Err(RejectReason::NoRecognizedAnswers);
    }
    let missing = |field: &str| RejectReason::MissingField {
        field: field.to_owned(),
    };
    let mut response = SurveyResponse {
        response_id: response_id.ok_or_else(|| missing("response_id"))?,
        product_id: def.product_id.clone(),
        timestamp: timestamp.ok_or_else(|| missing("timestamp"))?,
        channel: def.channel,
        role,
        frequency_of_use: frequency,
        experience,
        customer,
        answers,
        comment_positive,
        comment_negative,
    };

    // range violations reject the whole row, before partial blocks are pruned
    if let Err(ResponseError::OutOfRangeAnswer { code, value, .. }) = response.validate() {
        return Err(RejectReason::OutOfRangeAnswer { code, value });
    }
    for instrument in [Instrument::UxLite, Instrument::UeqS] {
        if response.has_any(instrument) && !response.has_complete(instrument) {
            let answered = instrument
                .item_codes()
                .iter()
                .filter(|c| response.answers.remove(**c).is_some())
                .count();
            warnings.push(IngestWarning::IncompleteBlock {
                instrument,
                answered,
            });
        }
    }
    match response.validate() {
        Ok(()) => Ok(response),
        Err(ResponseError::OutOfRangeAnswer { code, value, .. }) => {
            Err(RejectReason::OutOfRangeAnswer { code, value })
        }
        Err(ResponseError::NoRecognizedAnswers) => Err(RejectReason::NoRecognizedAnswers),
        Err(ResponseError::EmptyResponseId) => Err(missing("response_id")),
        Err(ResponseError::EmptyProductId) => Err(missing("product_id")),
    }
}

/// Collects row outcomes into responses plus a report.
#[derive(Default)]
struct Collector {
    responses: Vec<SurveyResponse>,
    seen: BTreeSet<String>,
    report: IngestReport,
}

impl Collector {
    fn push(&mut self, row: usize, outcome: Result<SurveyResponse, RejectReason>, warnings: Vec<IngestWarning>) {
        let outcome = outcome.and_then(|r| {
            if self.seen.insert(r.response_id.clone()) {
                Ok(r)
            } else {
                Err(RejectReason::DuplicateResponseId {
                    response_id: r.response_id,
                })
            }
        });
        match outcome {
            Ok(r) => {
                self.report.accepted += 1;
                self.report
                    .warnings
                    .extend(warnings.into_iter().map(|issue| RowIssue { row, issue }));
                self.responses.push(r);
            }
            Err(issue) => {
                self.report.rejected += 1;
                self.report.rejection_reasons.push(RowIssue { row, issue });
            }
        }
    }

    fn finish(self) -> (Vec<SurveyResponse>, IngestReport) {
        (self.responses, self.report)
    }
}

fn check_quotes(bytes: &[u8]) -> Result<(), IngestError> {
    if bytes.iter().filter(|&&b| b == b'"').count() % 2 == 1 {
        return Err(IngestError::MalformedCsv("unbalanced quotes".into()));
    }
    Ok(())
}

/// Parses a header-first, comma-separated, RFC-4180 quoted UTF-8 export.
pub fn parse_csv(
    bytes: &[u8],
    def: &SurveyDefinition,
) -> Result<(Vec<SurveyResponse>, IngestReport), IngestError> {
    def.validate()?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(IngestError::EmptyFile);
    }
    check_quotes(bytes)?;
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::MalformedCsv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    for target in ["response_id", "timestamp"] {
        let source = def.source_for(target).unwrap_or(target);
        if !headers.iter().any(|h| h == source) {
            return Err(IngestError::MalformedCsv(format!(
                "header row lacks column {source:?} (mapped to {target})"
            )));
        }
    }

    let mut out = Collector::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| IngestError::MalformedCsv(e.to_string()))?;
        if record.len() != headers.len() {
            out.push(
                row,
                Err(RejectReason::MalformedRow {
                    detail: format!("{} fields, header has {}", record.len(), headers.len()),
                }),
                vec![],
            );
            continue;
        }
        let mut warnings = vec![];
        let fields = headers
            .iter()
            .cloned()
            .zip(record.iter().map(|v| Some(Cell::Text(v.to_owned()))));
        let outcome = map_record(def, fields, &mut warnings);
        out.push(row, outcome, warnings);
    }
    Ok(out.finish())
}

/// Parses newline-delimited JSON objects; blank lines are skipped.
pub fn parse_ndjson(
    bytes: &[u8],
    def: &SurveyDefinition,
) -> Result<(Vec<SurveyResponse>, IngestReport), IngestError> {
    def.validate()?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(IngestError::EmptyFile);
    }
    let mut out = Collector::default();
    for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
        let row = i + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let object = match serde_json::from_slice::<serde_json::Value>(line) {
            Ok(serde_json::Value::Object(map)) => map,
            Ok(_) => {
                out.push(
                    row,
                    Err(RejectReason::MalformedRow {
                        detail: "line is not a JSON object".into(),
                    }),
                    vec![],
                );
                continue;
            }
            Err(e) => {
                out.push(
                    row,
                    Err(RejectReason::MalformedRow {
                        detail: e.to_string(),
                    }),
                    vec![],
                );
                continue;
            }
        };
        let mut warnings = vec![];
        let fields = object.into_iter().map(|(k, v)| (k, Cell::from_json(v)));
        let outcome = map_record(def, fields, &mut warnings);
        out.push(row, outcome, warnings);
    }
    Ok(out.finish())
}

/// Merges per-survey streams; a response_id seen twice is an error.
pub fn consolidate(
    streams: Vec<(SurveyDefinition, Vec<SurveyResponse>)>,
) -> Result<Vec<SurveyResponse>, IngestError> {
    let mut seen = BTreeSet::new();
    let mut merged = Vec::with_capacity(streams.iter().map(|(_, s)| s.len()).sum());
    for (def, responses) in streams {
        for r in responses {
            if !seen.insert(r.response_id.clone()) {
                return Err(IngestError::DuplicateResponseId {
                    response_id: r.response_id,
                    survey_id: def.survey_id.clone(),
                });
            }
            merged.push(r);
        }
    }
    Ok(merged)
}

/// One canonical NDJSON line per response, in order.
pub fn to_ndjson(responses: &[SurveyResponse]) -> String {
    let mut out = String::new();
    for r in responses {
        out.push_str(&serde_json::to_string(r).expect("responses serialize"));
        out.push('\n');
    }
    out
}
