use std::collections::BTreeSet;
use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::quarter::{Quarter, QuarterRange};
use crate::survey::{Channel, Frequency, SurveyResponse};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("unknown filter parameter {0:?}")]
    UnknownParameter(String),
    #[error("invalid value {value:?} for filter {param}")]
    InvalidValue { param: String, value: String },
    #[error("quarter range {from}..{to} is inverted")]
    InvertedRange { from: Quarter, to: Quarter },
}

/// Conjunctive response filter. Absent or empty sets do not constrain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub products: Option<BTreeSet<String>>,
    pub quarters: Option<QuarterRange>,
    pub channels: Option<BTreeSet<Channel>>,
    pub roles: Option<BTreeSet<String>>,
    pub frequencies: Option<BTreeSet<Frequency>>,
    pub customers: Option<BTreeSet<String>>,
}

fn allows<T: Ord>(set: &Option<BTreeSet<T>>, value: Option<&T>) -> bool {
    match set {
        Some(s) if !s.is_empty() => value.is_some_and(|v| s.contains(v)),
        _ => true,
    }
}

fn parse_set<T: FromStr + Ord>(param: &str, raw: &str) -> Result<BTreeSet<T>, FilterError> {
    raw.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse().map_err(|_| FilterError::InvalidValue {
                param: param.to_owned(),
                value: v.to_owned(),
            })
        })
        .collect()
}

fn join<T: Display>(set: &BTreeSet<T>) -> String {
    set.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl FilterSpec {
    pub const PARAMS: [&'static str; 7] = [
        "products",
        "channels",
        "roles",
        "frequencies",
        "customers",
        "quarter_from",
        "quarter_to",
    ];

    pub fn matches(&self, r: &SurveyResponse) -> bool {
        allows(&self.products, Some(&r.product_id))
            && self
                .quarters
                .map_or(true, |range| range.contains(Quarter::of(&r.timestamp)))
            && allows(&self.channels, Some(&r.channel))
            && allows(&self.roles, r.role.as_ref())
            && allows(&self.frequencies, r.frequency_of_use.as_ref())
            && allows(&self.customers, r.customer.as_ref())
    }

    /// The filter narrowed to a single quarter.
    pub fn in_quarter(&self, q: Quarter) -> Self {
        let mut f = self.clone();
        f.quarters = Some(QuarterRange::single(q));
        f
    }

    pub fn for_product(&self, product: &str) -> Self {
        let mut f = self.clone();
        f.products = Some(BTreeSet::from([product.to_owned()]));
        f
    }

    /// Parses query pairs such as `products=a,b&quarter_from=2024-Q1`.
    /// Repeated keys accumulate; empty values are ignored.
    pub fn from_query_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, FilterError> {
        let mut f = FilterSpec::default();
        fn extend<T: Ord>(slot: &mut Option<BTreeSet<T>>, more: BTreeSet<T>) {
            if !more.is_empty() {
                slot.get_or_insert_with(BTreeSet::new).extend(more);
            }
        }
        for (key, value) in pairs {
            let quarter = || {
                value.trim().parse::<Quarter>().map_err(|_| FilterError::InvalidValue {
                    param: key.to_owned(),
                    value: value.to_owned(),
                })
            };
            match key {
                "products" => extend(&mut f.products, parse_set(key, value)?),
                "channels" => extend(&mut f.channels, parse_set(key, value)?),
                "roles" => extend(&mut f.roles, parse_set(key, value)?),
                "frequencies" => extend(&mut f.frequencies, parse_set(key, value)?),
                "customers" => extend(&mut f.customers, parse_set(key, value)?),
                "quarter_from" if !value.trim().is_empty() => {
                    f.quarters.get_or_insert_with(QuarterRange::default).from = Some(quarter()?)
                }
                "quarter_to" if !value.trim().is_empty() => {
                    f.quarters.get_or_insert_with(QuarterRange::default).to = Some(quarter()?)
                }
                "quarter_from" | "quarter_to" => {}
                other => return Err(FilterError::UnknownParameter(other.to_owned())),
            }
        }
        if let Some(QuarterRange {
            from: Some(from),
            to: Some(to),
        }) = f.quarters
        {
            if from > to {
                return Err(FilterError::InvertedRange { from, to });
            }
        }
        Ok(f)
    }

    /// Parses a raw query string; values are percent-decoded.
    pub fn from_query(query: &str) -> Result<Self, FilterError> {
        let decoded: Vec<(String, String)> = query
            .split('&')
            .filter(|p| !p.is_empty())
            .map(|p| {
                let (k, v) = p.split_once('=').unwrap_or((p, ""));
                (percent_decode(k), percent_decode(v))
            })
            .collect();
        Self::from_query_pairs(decoded.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    /// Inverse of [`FilterSpec::from_query_pairs`], keys in `PARAMS` order.
    pub fn to_query_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v.filter(|v| !v.is_empty()) {
                out.push((k, v));
            }
        };
        push("products", self.products.as_ref().map(join));
        push("channels", self.channels.as_ref().map(join));
        push("roles", self.roles.as_ref().map(join));
        push("frequencies", self.frequencies.as_ref().map(join));
        push("customers", self.customers.as_ref().map(join));
        push("quarter_from", self.quarters.and_then(|r| r.from).map(|q| q.to_string()));
        push("quarter_to", self.quarters.and_then(|r| r.to).map(|q| q.to_string()));
        out
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let hex = bytes
            .get(i + 1..i + 3)
            .and_then(|h| std::str::from_utf8(h).ok())
            .and_then(|h| u8::from_str_radix(h, 16).ok());
        match (bytes[i], hex) {
            (b'+', _) => out.push(b' '),
            (b'%', Some(b)) => {
                out.push(b);
                i += 2;
            }
            (b, _) => out.push(b),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}
