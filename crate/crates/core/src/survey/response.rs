use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Question codes understood by the scoring rules.
pub mod codes {
    pub const UXLITE_USEFUL: &str = "uxlite_useful";
    pub const UXLITE_EASY: &str = "uxlite_easy";
    pub const UXLITE: [&str; 2] = [UXLITE_USEFUL, UXLITE_EASY];
    pub const UEQS: [&str; 8] = [
        "ueqs_1", "ueqs_2", "ueqs_3", "ueqs_4", "ueqs_5", "ueqs_6", "ueqs_7", "ueqs_8",
    ];
    pub const PSAT: &str = "psat";
    pub const NPS: &str = "nps";
}

/// Instruments whose items are recognized question codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Instrument {
    UxLite,
    UeqS,
    Psat,
    Nps,
}

impl Instrument {
    pub const ALL: [Instrument; 4] = [Self::UxLite, Self::UeqS, Self::Psat, Self::Nps];

    pub fn item_codes(self) -> &'static [&'static str] {
        match self {
            Self::UxLite => &codes::UXLITE,
            Self::UeqS => &codes::UEQS,
            Self::Psat => std::slice::from_ref(&codes::PSAT),
            Self::Nps => std::slice::from_ref(&codes::NPS),
        }
    }

    /// Inclusive answer range for every item of the instrument.
    pub fn answer_range(self) -> (i64, i64) {
        match self {
            Self::UxLite | Self::Psat => (0, 4),
            Self::UeqS => (-3, 3),
            Self::Nps => (0, 10),
        }
    }

    pub fn for_code(code: &str) -> Option<Instrument> {
        Self::ALL
            .into_iter()
            .find(|inst| inst.item_codes().contains(&code))
    }
}

/// How the response reached us. Each channel carries its own selection bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    InAppButton,
    AutoTrigger,
    EmailCampaign,
    SocialLink,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Self::InAppButton,
        Self::AutoTrigger,
        Self::EmailCampaign,
        Self::SocialLink,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::InAppButton => "InAppButton",
            Self::AutoTrigger => "AutoTrigger",
            Self::EmailCampaign => "EmailCampaign",
            Self::SocialLink => "SocialLink",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownVariant {
                kind: "channel",
                value: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Frequency {
    Daily,
    Weekly,
    Monthly,
    Occasionally,
}

impl Frequency {
    pub const ALL: [Frequency; 4] = [Self::Daily, Self::Weekly, Self::Monthly, Self::Occasionally];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Daily => "Daily",
            Self::Weekly => "Weekly",
            Self::Monthly => "Monthly",
            Self::Occasionally => "Occasionally",
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownVariant {
                kind: "frequency",
                value: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} {value:?}")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub value: String,
}

/// Why a response does not satisfy the canonical record invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponseError {
    #[error("answer {code}={value} outside {min}..={max}")]
    OutOfRangeAnswer {
        code: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("no recognized question code among the answers")]
    NoRecognizedAnswers,
    #[error("empty response_id")]
    EmptyResponseId,
    #[error("empty product_id")]
    EmptyProductId,
}

/// One participant's answers plus the context they were collected in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub response_id: String,
    pub product_id: String,
    #[serde(serialize_with = "ser_utc", deserialize_with = "de_utc")]
    pub timestamp: DateTime<Utc>,
    pub channel: Channel,
    pub role: Option<String>,
    pub frequency_of_use: Option<Frequency>,
    pub experience: Option<String>,
    pub customer: Option<String>,
    pub answers: BTreeMap<String, i64>,
    pub comment_positive: Option<String>,
    pub comment_negative: Option<String>,
}

impl SurveyResponse {
    /// A bare response with no context and no answers.
    pub fn new(
        response_id: impl Into<String>,
        product_id: impl Into<String>,
        timestamp: DateTime<Utc>,
        channel: Channel,
    ) -> Self {
        Self {
            response_id: response_id.into(),
            product_id: product_id.into(),
            timestamp,
            channel,
            role: None,
            frequency_of_use: None,
            experience: None,
            customer: None,
            answers: BTreeMap::new(),
            comment_positive: None,
            comment_negative: None,
        }
    }

    pub fn with_answer(mut self, code: &str, value: i64) -> Self {
        self.answers.insert(code.to_owned(), value);
        self
    }

    pub fn answer(&self, code: &str) -> Option<i64> {
        self.answers.get(code).copied()
    }

    /// True when every item of `instrument` is answered.
    pub fn has_complete(&self, instrument: Instrument) -> bool {
        instrument
            .item_codes()
            .iter()
            .all(|c| self.answers.contains_key(*c))
    }

    pub fn has_any(&self, instrument: Instrument) -> bool {
        instrument
            .item_codes()
            .iter()
            .any(|c| self.answers.contains_key(*c))
    }

    pub fn validate(&self) -> Result<(), ResponseError> {
        if self.response_id.trim().is_empty() {
            return Err(ResponseError::EmptyResponseId);
        }
        if self.product_id.trim().is_empty() {
            return Err(ResponseError::EmptyProductId);
        }
        let mut recognized = false;
        for (code, &value) in &self.answers {
            if let Some(inst) = Instrument::for_code(code) {
                recognized = true;
                let (min, max) = inst.answer_range();
                if !(min..=max).contains(&value) {
                    return Err(ResponseError::OutOfRangeAnswer {
                        code: code.clone(),
                        value,
                        min,
                        max,
                    });
                }
            }
        }
        if !recognized {
            return Err(ResponseError::NoRecognizedAnswers);
        }
        Ok(())
    }
}

/// ISO-8601 with a `Z` suffix; sub-second digits only when present.
pub fn format_utc(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn ser_utc<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_utc(ts))
}

fn de_utc<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(d)?;
    DateTime::parse_from_rfc3339(&raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(serde::de::Error::custom)
}
