//! Filtered, quarter-bucketed KPI series, distributions, splits and
//! two-group comparisons over an immutable store snapshot.

mod filter;
mod quarter;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{FilterError, FilterSpec};
pub use quarter::{Quarter, QuarterParseError, QuarterRange};

use crate::config::AnalyticsConfig;
use crate::inference::{self, InferenceError, ProportionSummary, TestOutcome};
use crate::ingest::{Store, StoreSnapshot};
use crate::survey::{
    codes, participant_values, score_kpi, BenchmarkSet, Channel, Frequency, KpiKind, KpiResult,
    ScoreError, SurveyResponse, UnknownVariant,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("store unreadable: {0}")]
    StoreUnreadable(String),
    #[error("group {group} has {got} usable responses, need at least {needed}")]
    InsufficientSample {
        group: Group,
        needed: usize,
        got: usize,
    },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    A,
    B,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::A => "a",
            Group::B => "b",
        })
    }
}

/// One quarter of a series. Suppressed points carry no result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub quarter: Quarter,
    pub n: usize,
    pub suppressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<KpiResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSeries {
    pub kind: KpiKind,
    pub product_id: String,
    /// Ascending by quarter; quarters without responses are absent.
    pub points: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfactionDistribution {
    pub quarter: Quarter,
    /// Responses per PSAT answer level 0..=4.
    pub counts: [usize; 5],
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub filter: FilterSpec,
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning")]
pub enum ComparisonWarning {
    /// The two filters select intersecting response sets.
    OverlappingGroups { shared: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub kind: KpiKind,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    pub outcome: TestOutcome,
    /// `group_a.value − group_b.value`.
    pub delta: f64,
    pub warnings: Vec<ComparisonWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Product,
    Role,
    Frequency,
    Customer,
    Channel,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Self::Product,
        Self::Role,
        Self::Frequency,
        Self::Customer,
        Self::Channel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Product => "Product",
            Self::Role => "Role",
            Self::Frequency => "Frequency",
            Self::Customer => "Customer",
            Self::Channel => "Channel",
        }
    }

    /// Sort key and label of `r` under this dimension.
    fn key(self, r: &SurveyResponse) -> Option<(usize, String)> {
        match self {
            Self::Product => Some((0, r.product_id.clone())),
            Self::Role => r.role.clone().map(|v| (0, v)),
            Self::Customer => r.customer.clone().map(|v| (0, v)),
            Self::Frequency => r.frequency_of_use.map(|f| {
                let rank = Frequency::ALL.iter().position(|x| *x == f).unwrap_or(0);
                (rank, f.to_string())
            }),
            Self::Channel => {
                let rank = Channel::ALL.iter().position(|x| *x == r.channel).unwrap_or(0);
                Some((rank, r.channel.to_string()))
            }
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownVariant {
                kind: "dimension",
                value: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub value: String,
    pub n: usize,
    pub suppressed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<KpiResult>,
}

/// Distinct values available to each filter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub products: Vec<String>,
    pub quarters: Vec<Quarter>,
    pub roles: Vec<String>,
    pub frequencies: Vec<Frequency>,
    pub customers: Vec<String>,
    pub channels: Vec<Channel>,
}

type CacheKey = (u64, FilterSpec, KpiKind);

/// Query engine over one store snapshot. Cheap to share across threads.
#[derive(Debug)]
pub struct Analytics {
    snapshot: StoreSnapshot,
    config: AnalyticsConfig,
    benchmarks: BenchmarkSet,
    cache: Mutex<HashMap<CacheKey, Arc<Vec<KpiSeries>>>>,
}

impl Analytics {
    pub fn new(snapshot: StoreSnapshot, config: AnalyticsConfig) -> Self {
        let benchmarks = config.benchmark_set();
        Self {
            snapshot,
            config,
            benchmarks,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn open(store: &Store, config: AnalyticsConfig) -> Result<Self, AnalyticsError> {
        let snapshot = store
            .load()
            .map_err(|e| AnalyticsError::StoreUnreadable(e.to_string()))?;
        Ok(Self::new(snapshot, config))
    }

    pub fn snapshot(&self) -> &StoreSnapshot {
        &self.snapshot
    }

    pub fn config(&self) -> &AnalyticsConfig {
        &self.config
    }

    pub fn benchmarks(&self) -> &BenchmarkSet {
        &self.benchmarks
    }

    /// Responses passing `filter`, in store order.
    pub fn select<'a>(&'a self, filter: &'a FilterSpec) -> impl Iterator<Item = &'a SurveyResponse> + 'a {
        self.snapshot.responses.iter().filter(move |r| filter.matches(r))
    }

    /// Responses passing `filter` that carry a complete block for `kind`.
    pub fn usable(&self, filter: &FilterSpec, kind: KpiKind) -> Vec<SurveyResponse> {
        let inst = kind.instrument();
        self.select(filter)
            .filter(|r| r.has_complete(inst))
            .cloned()
            .collect()
    }

    /// Scores `responses` with the configured alpha and benchmark table.
    pub fn score(&self, kind: KpiKind, responses: &[SurveyResponse]) -> Result<KpiResult, ScoreError> {
        Ok(score_kpi(kind, responses, self.config.alpha)?
            .with_benchmark(self.benchmarks.table_for(kind)))
    }

    fn bucket(&self, kind: KpiKind, responses: &[SurveyResponse]) -> Result<(usize, bool, Option<KpiResult>), ScoreError> {
        let n = responses.len();
        if n < self.config.min_n {
            return Ok((n, true, None));
        }
        Ok((n, false, Some(self.score(kind, responses)?)))
    }

    pub fn kpi_series(&self, filter: &FilterSpec, kind: KpiKind) -> Result<Arc<Vec<KpiSeries>>, AnalyticsError> {
        let key = (self.snapshot.version, filter.clone(), kind);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let mut groups: BTreeMap<&str, BTreeMap<Quarter, Vec<SurveyResponse>>> = BTreeMap::new();
        let inst = kind.instrument();
        for r in self.select(filter).filter(|r| r.has_complete(inst)) {
            groups
                .entry(r.product_id.as_str())
                .or_default()
                .entry(Quarter::of(&r.timestamp))
                .or_default()
                .push(r.clone());
        }
        let mut series = Vec::with_capacity(groups.len());
        for (product, quarters) in groups {
            let mut points = Vec::with_capacity(quarters.len());
            for (quarter, responses) in quarters {
                let (n, suppressed, result) = self.bucket(kind, &responses)?;
                points.push(SeriesPoint {
                    quarter,
                    n,
                    suppressed,
                    result,
                });
            }
            series.push(KpiSeries {
                kind,
                product_id: product.to_owned(),
                points,
            });
        }
        let series = Arc::new(series);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, Arc::clone(&series));
        Ok(series)
    }

    pub fn satisfaction_distribution(&self, filter: &FilterSpec) -> Vec<SatisfactionDistribution> {
        let mut buckets: BTreeMap<Quarter, [usize; 5]> = BTreeMap::new();
        for r in self.select(filter) {
            if let Some(level @ 0..=4) = r.answer(codes::PSAT) {
                buckets.entry(Quarter::of(&r.timestamp)).or_default()[level as usize] += 1;
            }
        }
        buckets
            .into_iter()
            .map(|(quarter, counts)| SatisfactionDistribution {
                quarter,
                counts,
                n: counts.iter().sum(),
            })
            .collect()
    }

    /// Tests whether `kind` differs between the two filtered groups.
    ///
    /// Psat uses the two-proportion z-test; every other kind, Nps included via
    /// its ±100 recoding, uses Welch's t-test on per-respondent values.
    pub fn compare(
        &self,
        filter_a: &FilterSpec,
        filter_b: &FilterSpec,
        kind: KpiKind,
    ) -> Result<ComparisonResult, AnalyticsError> {
        let a = self.usable(filter_a, kind);
        let b = self.usable(filter_b, kind);
        let floor = if kind == KpiKind::Psat { 1 } else { 2 };
        let needed = self.config.min_n.max(floor);
        for (group, rs) in [(Group::A, &a), (Group::B, &b)] {
            if rs.len() < needed {
                return Err(AnalyticsError::InsufficientSample {
                    group,
                    needed,
                    got: rs.len(),
                });
            }
        }
        let ra = self.score(kind, &a)?;
        let rb = self.score(kind, &b)?;
        let alpha = self.config.alpha;
        let outcome = if kind == KpiKind::Psat {
            inference::two_proportion_z_test(&proportion(&a)?, &proportion(&b)?, alpha)?
        } else {
            let sa = inference::summarize(&participant_values(kind, &a)?)?;
            let sb = inference::summarize(&participant_values(kind, &b)?)?;
            inference::welch_t_test(&sa, &sb, alpha)?
        };
        let ids: HashSet<&str> = a.iter().map(|r| r.response_id.as_str()).collect();
        let shared = b.iter().filter(|r| ids.contains(r.response_id.as_str())).count();
        let warnings = if shared > 0 {
            vec![ComparisonWarning::OverlappingGroups { shared }]
        } else {
            Vec::new()
        };
        Ok(ComparisonResult {
            kind,
            delta: ra.value - rb.value,
            group_a: GroupSummary {
                filter: filter_a.clone(),
                n: ra.n,
                value: ra.value,
            },
            group_b: GroupSummary {
                filter: filter_b.clone(),
                n: rb.n,
                value: rb.value,
            },
            outcome,
            warnings,
        })
    }

    /// One entry per value of `dimension` present under `filter`, over all
    /// quarters the filter admits. Responses without the dimension are left out.
    pub fn split_by(
        &self,
        filter: &FilterSpec,
        kind: KpiKind,
        dimension: Dimension,
    ) -> Result<Vec<SplitEntry>, AnalyticsError> {
        let inst = kind.instrument();
        let mut groups: BTreeMap<(usize, String), Vec<SurveyResponse>> = BTreeMap::new();
        for r in self.select(filter).filter(|r| r.has_complete(inst)) {
            if let Some(key) = dimension.key(r) {
                groups.entry(key).or_default().push(r.clone());
            }
        }
        groups
            .into_iter()
            .map(|((_, value), responses)| {
                let (n, suppressed, result) = self.bucket(kind, &responses)?;
                Ok(SplitEntry {
                    value,
                    n,
                    suppressed,
                    result,
                })
            })
            .collect()
    }

    pub fn meta_filters(&self) -> FilterOptions {
        let rs = self.snapshot.responses.iter();
        let distinct = |f: &dyn Fn(&SurveyResponse) -> Option<String>| -> Vec<String> {
            rs.clone().filter_map(f).collect::<BTreeSet<_>>().into_iter().collect()
        };
        FilterOptions {
            products: distinct(&|r| Some(r.product_id.clone())),
            roles: distinct(&|r| r.role.clone()),
            customers: distinct(&|r| r.customer.clone()),
            quarters: rs
                .clone()
                .map(|r| Quarter::of(&r.timestamp))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            frequencies: rs
                .clone()
                .filter_map(|r| r.frequency_of_use)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            channels: rs
                .map(|r| r.channel)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }
}

fn proportion(responses: &[SurveyResponse]) -> Result<ProportionSummary, AnalyticsError> {
    let values = participant_values(KpiKind::Psat, responses)?;
    let satisfied = values.iter().filter(|&&v| v > 0.0).count();
    Ok(ProportionSummary::from_counts(satisfied, values.len())?)
}
