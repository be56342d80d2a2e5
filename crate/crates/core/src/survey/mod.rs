//! Survey records and the scoring rules of the four instruments.
//!
//! | KPI | items | per-participant score | result |
//! |-----|-------|-----------------------|--------|
//! | UX-Lite | `uxlite_useful`, `uxlite_easy` (0..4) | `(useful + easy) × 12.5` | mean, 0..100 |
//! | UEQ-S | `ueqs_1`..`ueqs_8` (−3..3) | mean of items 1–4 / 5–8 / all | mean, −3..3 |
//! | PSAT | `psat` (0..4) | satisfied iff answer ∈ {3, 4} | share × 100 |
//! | NPS | `nps` (0..10) | promoter 9–10, detractor 0–6 | (promoters − detractors) × 100 |

mod benchmark;
mod response;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use benchmark::{
    ueq_s_hedonic_table, ueq_s_overall_table, ueq_s_pragmatic_table, ux_lite_table,
    BenchmarkCategory, BenchmarkError, BenchmarkSet, BenchmarkTable, Classification,
};
pub use response::{
    codes, format_utc, Channel, Frequency, Instrument, ResponseError, SurveyResponse,
    UnknownVariant,
};

use crate::inference::{self, InferenceError, ProportionSummary, SampleSummary, DEFAULT_ALPHA};

const UX_LITE_FACTOR: f64 = 100.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KpiKind {
    UxLite,
    UeqOverall,
    UeqPragmatic,
    UeqHedonic,
    Psat,
    Nps,
}

impl KpiKind {
    pub const ALL: [KpiKind; 6] = [
        Self::UxLite,
        Self::UeqOverall,
        Self::UeqPragmatic,
        Self::UeqHedonic,
        Self::Psat,
        Self::Nps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::UxLite => "UxLite",
            Self::UeqOverall => "UeqOverall",
            Self::UeqPragmatic => "UeqPragmatic",
            Self::UeqHedonic => "UeqHedonic",
            Self::Psat => "Psat",
            Self::Nps => "Nps",
        }
    }

    pub fn instrument(self) -> Instrument {
        match self {
            Self::UxLite => Instrument::UxLite,
            Self::UeqOverall | Self::UeqPragmatic | Self::UeqHedonic => Instrument::UeqS,
            Self::Psat => Instrument::Psat,
            Self::Nps => Instrument::Nps,
        }
    }

    /// Mean-based KPIs carry a sample variance; Psat and Nps carry shares.
    pub fn is_mean_based(self) -> bool {
        !matches!(self, Self::Psat | Self::Nps)
    }
}

impl fmt::Display for KpiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KpiKind {
    type Err = UnknownVariant;

    /// Accepts `UxLite`, `uxlite`, `ux_lite`, `ux-lite` and so on.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().to_ascii_lowercase() == norm)
            .ok_or_else(|| UnknownVariant {
                kind: "KPI kind",
                value: s.to_owned(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Shares {
    Satisfaction {
        satisfied: f64,
    },
    Promoter {
        promoters: f64,
        passives: f64,
        detractors: f64,
    },
}

/// A scored KPI with its sampling uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiResult {
    pub kind: KpiKind,
    pub value: f64,
    pub n: usize,
    /// Present for mean-based kinds with `n ≥ 2`.
    pub sample_variance: Option<f64>,
    /// Present for Psat and Nps.
    pub shares: Option<Shares>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub benchmark_category: Option<String>,
    pub percentile_band: Option<String>,
}

impl KpiResult {
    /// Attaches the category from `table`, leaving the result unchanged when
    /// the value falls outside the table's scale.
    pub fn with_benchmark(mut self, table: Option<&BenchmarkTable>) -> Self {
        if let Some(c) = table.and_then(|t| t.classify(self.value).ok()) {
            self.benchmark_category = Some(c.label);
            self.percentile_band = Some(c.percentile_band);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("no responses to score")]
    EmptyInput,
    #[error("response {response_id} lacks answer {code}")]
    MissingAnswer { response_id: String, code: String },
    #[error("response {response_id}: answer {code}={value} out of range")]
    OutOfRangeAnswer {
        response_id: String,
        code: String,
        value: i64,
    },
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

fn item(r: &SurveyResponse, code: &str, inst: Instrument) -> Result<i64, ScoreError> {
    let value = r.answer(code).ok_or_else(|| ScoreError::MissingAnswer {
        response_id: r.response_id.clone(),
        code: code.to_owned(),
    })?;
    let (min, max) = inst.answer_range();
    if !(min..=max).contains(&value) {
        return Err(ScoreError::OutOfRangeAnswer {
            response_id: r.response_id.clone(),
            code: code.to_owned(),
            value,
        });
    }
    Ok(value)
}

fn non_empty(responses: &[SurveyResponse]) -> Result<(), ScoreError> {
    if responses.is_empty() {
        Err(ScoreError::EmptyInput)
    } else {
        Ok(())
    }
}

/// Scores a mean-based KPI from per-participant values.
fn mean_result(kind: KpiKind, values: &[f64], alpha: f64) -> Result<KpiResult, ScoreError> {
    let summary = inference::summarize(values)?;
    let (ci_low, ci_high) = match summary.variance {
        Some(_) => {
            let ci = inference::ci_mean(&summary, alpha)?;
            (ci.low, ci.high)
        }
        // a single participant has no spread estimate
        None => (summary.mean, summary.mean),
    };
    Ok(KpiResult {
        kind,
        value: summary.mean,
        n: summary.n,
        sample_variance: summary.variance,
        shares: None,
        ci_low,
        ci_high,
        benchmark_category: None,
        percentile_band: None,
    })
}

/// Per-participant UX-Lite scores on 0..100.
pub fn ux_lite_participant_scores(responses: &[SurveyResponse]) -> Result<Vec<f64>, ScoreError> {
    responses
        .iter()
        .map(|r| {
            let useful = item(r, codes::UXLITE_USEFUL, Instrument::UxLite)?;
            let easy = item(r, codes::UXLITE_EASY, Instrument::UxLite)?;
            Ok((useful + easy) as f64 * UX_LITE_FACTOR)
        })
        .collect()
}

pub fn score_ux_lite(responses: &[SurveyResponse]) -> Result<KpiResult, ScoreError> {
    score_ux_lite_at(responses, DEFAULT_ALPHA)
}

pub fn score_ux_lite_at(responses: &[SurveyResponse], alpha: f64) -> Result<KpiResult, ScoreError> {
    non_empty(responses)?;
    mean_result(KpiKind::UxLite, &ux_lite_participant_scores(responses)?, alpha)
}

/// UEQ-S per-participant means: (pragmatic, hedonic, overall).
pub fn ueq_participant_scores(
    responses: &[SurveyResponse],
) -> Result<Vec<(f64, f64, f64)>, ScoreError> {
    responses
        .iter()
        .map(|r| {
            let mut items = [0i64; 8];
            for (slot, code) in items.iter_mut().zip(codes::UEQS) {
                *slot = item(r, code, Instrument::UeqS)?;
            }
            let pragmatic = items[..4].iter().sum::<i64>() as f64 / 4.0;
            let hedonic = items[4..].iter().sum::<i64>() as f64 / 4.0;
            let overall = items.iter().sum::<i64>() as f64 / 8.0;
            Ok((pragmatic, hedonic, overall))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeqScores {
    pub overall: KpiResult,
    pub pragmatic: KpiResult,
    pub hedonic: KpiResult,
}

pub fn score_ueq_s(responses: &[SurveyResponse]) -> Result<UeqScores, ScoreError> {
    score_ueq_s_at(responses, DEFAULT_ALPHA)
}

pub fn score_ueq_s_at(responses: &[SurveyResponse], alpha: f64) -> Result<UeqScores, ScoreError> {
    non_empty(responses)?;
    let per = ueq_participant_scores(responses)?;
    let pick = |f: fn(&(f64, f64, f64)) -> f64| per.iter().map(f).collect::<Vec<_>>();
    Ok(UeqScores {
        overall: mean_result(KpiKind::UeqOverall, &pick(|p| p.2), alpha)?,
        pragmatic: mean_result(KpiKind::UeqPragmatic, &pick(|p| p.0), alpha)?,
        hedonic: mean_result(KpiKind::UeqHedonic, &pick(|p| p.1), alpha)?,
    })
}

pub fn is_satisfied(psat_answer: i64) -> bool {
    psat_answer >= 3
}

pub fn score_psat(responses: &[SurveyResponse]) -> Result<KpiResult, ScoreError> {
    score_psat_at(responses, DEFAULT_ALPHA)
}

pub fn score_psat_at(responses: &[SurveyResponse], alpha: f64) -> Result<KpiResult, ScoreError> {
    non_empty(responses)?;
    let mut satisfied = 0usize;
    for r in responses {
        if is_satisfied(item(r, codes::PSAT, Instrument::Psat)?) {
            satisfied += 1;
        }
    }
    let n = responses.len();
    let p = ProportionSummary::from_counts(satisfied, n)?;
    let half = 100.0 * inference::ci_proportion(&p, alpha)?.half_width();
    let value = 100.0 * satisfied as f64 / n as f64;
    Ok(KpiResult {
        kind: KpiKind::Psat,
        value,
        n,
        sample_variance: None,
        shares: Some(Shares::Satisfaction {
            satisfied: p.p_hat,
        }),
        ci_low: value - half,
        ci_high: value + half,
        benchmark_category: None,
        percentile_band: None,
    })
}

/// +100 for promoters, 0 for passives, −100 for detractors.
pub fn nps_recode(answer: i64) -> f64 {
    match answer {
        9..=10 => 100.0,
        7..=8 => 0.0,
        _ => -100.0,
    }
}

pub fn nps_recoded_scores(responses: &[SurveyResponse]) -> Result<Vec<f64>, ScoreError> {
    responses
        .iter()
        .map(|r| item(r, codes::NPS, Instrument::Nps).map(nps_recode))
        .collect()
}

pub fn score_nps(responses: &[SurveyResponse]) -> Result<KpiResult, ScoreError> {
    score_nps_at(responses, DEFAULT_ALPHA)
}

pub fn score_nps_at(responses: &[SurveyResponse], alpha: f64) -> Result<KpiResult, ScoreError> {
    non_empty(responses)?;
    let recoded = nps_recoded_scores(responses)?;
    let n = recoded.len();
    let promoters = recoded.iter().filter(|&&v| v > 0.0).count();
    let detractors = recoded.iter().filter(|&&v| v < 0.0).count();
    let passives = n - promoters - detractors;
    let value = 100.0 * (promoters as f64 - detractors as f64) / n as f64;
    let summary = inference::summarize(&recoded)?;
    let half = match summary.variance {
        Some(_) => inference::ci_mean(&SampleSummary { mean: value, ..summary }, alpha)?.half_width(),
        None => 0.0,
    };
    let share = |c: usize| c as f64 / n as f64;
    Ok(KpiResult {
        kind: KpiKind::Nps,
        value,
        n,
        sample_variance: None,
        shares: Some(Shares::Promoter {
            promoters: share(promoters),
            passives: share(passives),
            detractors: share(detractors),
        }),
        ci_low: value - half,
        ci_high: value + half,
        benchmark_category: None,
        percentile_band: None,
    })
}

/// Scores any KPI kind. Callers pass only responses carrying the instrument.
pub fn score_kpi(
    kind: KpiKind,
    responses: &[SurveyResponse],
    alpha: f64,
) -> Result<KpiResult, ScoreError> {
    match kind {
        KpiKind::UxLite => score_ux_lite_at(responses, alpha),
        KpiKind::Psat => score_psat_at(responses, alpha),
        KpiKind::Nps => score_nps_at(responses, alpha),
        KpiKind::UeqOverall | KpiKind::UeqPragmatic | KpiKind::UeqHedonic => {
            non_empty(responses)?;
            let per = ueq_participant_scores(responses)?;
            let values: Vec<f64> = per
                .iter()
                .map(|&(p, h, o)| match kind {
                    KpiKind::UeqPragmatic => p,
                    KpiKind::UeqHedonic => h,
                    _ => o,
                })
                .collect();
            mean_result(kind, &values, alpha)
        }
    }
}

/// Per-respondent values entering a Welch comparison for mean-like kinds,
/// including the ±100 NPS recoding.
pub fn participant_values(kind: KpiKind, responses: &[SurveyResponse]) -> Result<Vec<f64>, ScoreError> {
    match kind {
        KpiKind::UxLite => ux_lite_participant_scores(responses),
        KpiKind::Nps => nps_recoded_scores(responses),
        KpiKind::UeqOverall => Ok(ueq_participant_scores(responses)?.iter().map(|p| p.2).collect()),
        KpiKind::UeqPragmatic => Ok(ueq_participant_scores(responses)?.iter().map(|p| p.0).collect()),
        KpiKind::UeqHedonic => Ok(ueq_participant_scores(responses)?.iter().map(|p| p.1).collect()),
        KpiKind::Psat => responses
            .iter()
            .map(|r| {
                item(r, codes::PSAT, Instrument::Psat)
                    .map(|a| if is_satisfied(a) { 1.0 } else { 0.0 })
            })
            .collect(),
    }
}

pub fn classify(score: f64, table: &BenchmarkTable) -> Result<Classification, BenchmarkError> {
    table.classify(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn resp(id: usize, answers: &[(&str, i64)]) -> SurveyResponse {
        let mut r = SurveyResponse::new(
            format!("r{id}"),
            "p",
            Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            Channel::InAppButton,
        );
        for (c, v) in answers {
            r = r.with_answer(c, *v);
        }
        r
    }

    fn ux(pairs: &[(i64, i64)]) -> Vec<SurveyResponse> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(u, e))| resp(i, &[("uxlite_useful", u), ("uxlite_easy", e)]))
            .collect()
    }

    fn ueq(rows: &[[i64; 8]]) -> Vec<SurveyResponse> {
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let answers: Vec<(&str, i64)> =
                    codes::UEQS.iter().copied().zip(row.iter().copied()).collect();
                resp(i, &answers)
            })
            .collect()
    }

    fn single(code: &str, values: &[i64]) -> Vec<SurveyResponse> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| resp(i, &[(code, v)]))
            .collect()
    }

    #[test]
    fn ux_lite_examples() {
        assert_eq!(score_ux_lite(&ux(&[(4, 4)])).unwrap().value, 100.0);
        assert_eq!(score_ux_lite(&ux(&[(0, 0)])).unwrap().value, 0.0);
        let rs = ux(&[(3, 4), (2, 2)]);
        assert_eq!(ux_lite_participant_scores(&rs).unwrap(), vec![87.5, 50.0]);
        let k = score_ux_lite(&rs).unwrap();
        assert_eq!(k.value, 68.75);
        assert_eq!(k.n, 2);
        // sample variance of (87.5, 50): 2 × 18.75² / 1
        assert_eq!(k.sample_variance, Some(703.125));
    }

    #[test]
    fn ux_lite_errors() {
        assert_eq!(score_ux_lite(&[]), Err(ScoreError::EmptyInput));
        let partial = vec![resp(7, &[("uxlite_useful", 3)])];
        assert_eq!(
            score_ux_lite(&partial),
            Err(ScoreError::MissingAnswer {
                response_id: "r7".into(),
                code: "uxlite_easy".into()
            })
        );
    }

    #[test]
    fn ueq_examples() {
        let s = score_ueq_s(&ueq(&[[3; 8]])).unwrap();
        assert_eq!((s.overall.value, s.pragmatic.value, s.hedonic.value), (3.0, 3.0, 3.0));
        let s = score_ueq_s(&ueq(&[[0; 8]])).unwrap();
        assert_eq!((s.overall.value, s.pragmatic.value, s.hedonic.value), (0.0, 0.0, 0.0));
        let s = score_ueq_s(&ueq(&[[1, 2, 1, 2, -1, 0, 0, 1]])).unwrap();
        assert_eq!(s.pragmatic.value, 1.5);
        assert_eq!(s.hedonic.value, 0.0);
        assert_eq!(s.overall.value, 0.75);
    }

    #[test]
    fn ueq_errors() {
        assert!(matches!(
            score_ueq_s(&ueq(&[[4, 0, 0, 0, 0, 0, 0, 0]])),
            Err(ScoreError::OutOfRangeAnswer { value: 4, .. })
        ));
        let mut rs = ueq(&[[1; 8]]);
        rs[0].answers.remove("ueqs_6");
        assert!(matches!(score_ueq_s(&rs), Err(ScoreError::MissingAnswer { .. })));
        assert_eq!(score_ueq_s(&[]), Err(ScoreError::EmptyInput));
    }

    #[test]
    fn psat_examples() {
        let k = score_psat(&single("psat", &[4, 3, 3, 4, 4, 3, 2, 1, 0, 2])).unwrap();
        assert_eq!(k.value, 60.0);
        assert_eq!(k.shares, Some(Shares::Satisfaction { satisfied: 0.6 }));
        assert_eq!(k.sample_variance, None);
        assert_eq!(score_psat(&single("psat", &[4; 7])).unwrap().value, 100.0);
        // the neutral midpoint does not count as satisfied
        assert_eq!(score_psat(&single("psat", &[2, 1, 0])).unwrap().value, 0.0);
        assert_eq!(score_psat(&[]), Err(ScoreError::EmptyInput));
    }

    #[test]
    fn psat_interval_is_scaled_wald() {
        let k = score_psat(&single("psat", &[4, 3, 3, 4, 4, 3, 2, 1, 0, 2])).unwrap();
        assert!((k.ci_low - 29.64).abs() < 0.1 && (k.ci_high - 90.36).abs() < 0.1, "{k:?}");
    }

    #[test]
    fn nps_examples() {
        let k = score_nps(&single("nps", &[9, 9, 9, 9, 9, 7, 7, 7, 3, 3])).unwrap();
        assert_eq!(k.value, 30.0);
        assert_eq!(
            k.shares,
            Some(Shares::Promoter {
                promoters: 0.5,
                passives: 0.3,
                detractors: 0.2
            })
        );
        assert_eq!(score_nps(&single("nps", &[10; 5])).unwrap().value, 100.0);
        assert_eq!(score_nps(&single("nps", &[0; 5])).unwrap().value, -100.0);
        assert!(matches!(
            score_nps(&single("nps", &[11])),
            Err(ScoreError::OutOfRangeAnswer { .. })
        ));
    }

    #[test]
    fn nps_interval_uses_recoded_welch_scale() {
        let rs = single("nps", &[9, 9, 9, 9, 9, 7, 7, 7, 3, 3]);
        let k = score_nps(&rs).unwrap();
        let s = inference::summarize(&nps_recoded_scores(&rs).unwrap()).unwrap();
        assert_eq!(s.mean, k.value);
        let ci = inference::ci_mean(&s, DEFAULT_ALPHA).unwrap();
        assert!((ci.low - k.ci_low).abs() < 1e-9 && (ci.high - k.ci_high).abs() < 1e-9);
    }

    #[test]
    fn single_participant_has_point_interval() {
        let k = score_ux_lite(&ux(&[(2, 3)])).unwrap();
        assert_eq!((k.ci_low, k.value, k.ci_high), (62.5, 62.5, 62.5));
        assert_eq!(k.sample_variance, None);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("uxlite".parse::<KpiKind>().unwrap(), KpiKind::UxLite);
        assert_eq!("ux_lite".parse::<KpiKind>().unwrap(), KpiKind::UxLite);
        assert_eq!("UeqHedonic".parse::<KpiKind>().unwrap(), KpiKind::UeqHedonic);
        assert_eq!("ueq-overall".parse::<KpiKind>().unwrap(), KpiKind::UeqOverall);
        assert!("XXX".parse::<KpiKind>().is_err());
    }

    #[test]
    fn benchmark_attachment() {
        let k = score_ux_lite(&ux(&[(4, 3), (3, 3)]))
            .unwrap()
            .with_benchmark(Some(ux_lite_table()));
        // (87.5 + 75) / 2 = 81.25
        assert_eq!(k.benchmark_category.as_deref(), Some("A"));
        assert_eq!(k.percentile_band.as_deref(), Some("90 - 95"));
    }

    fn ueq_rows() -> impl Strategy<Value = Vec<[i64; 8]>> {
        prop::collection::vec(prop::array::uniform8(-3i64..=3), 1..25)
    }

    fn ux_pairs() -> impl Strategy<Value = Vec<(i64, i64)>> {
        prop::collection::vec((0i64..=4, 0i64..=4), 1..25)
    }

    proptest! {
        #[test]
        fn ueq_overall_is_mean_of_subscales(rows in ueq_rows()) {
            let s = score_ueq_s(&ueq(&rows)).unwrap();
            prop_assert!((s.overall.value - (s.pragmatic.value + s.hedonic.value) / 2.0).abs() < 1e-12);
            for k in [&s.overall, &s.pragmatic, &s.hedonic] {
                prop_assert!((-3.0..=3.0).contains(&k.value));
                prop_assert!(k.ci_low <= k.value && k.value <= k.ci_high);
            }
        }

        #[test]
        fn scores_are_permutation_invariant(pairs in ux_pairs(), rows in ueq_rows(),
                                             psat in prop::collection::vec(0i64..=4, 1..30),
                                             nps in prop::collection::vec(0i64..=10, 1..30),
                                             rot in 0usize..30) {
            let rotate = |mut v: Vec<SurveyResponse>| { let k = rot % v.len(); v.rotate_left(k); v.reverse(); v };
            let a = ux(&pairs);
            prop_assert_eq!(score_ux_lite(&a).unwrap(), score_ux_lite(&rotate(a.clone())).unwrap());
            let a = ueq(&rows);
            prop_assert_eq!(score_ueq_s(&a).unwrap(), score_ueq_s(&rotate(a.clone())).unwrap());
            let a = single("psat", &psat);
            prop_assert_eq!(score_psat(&a).unwrap(), score_psat(&rotate(a.clone())).unwrap());
            let a = single("nps", &nps);
            prop_assert_eq!(score_nps(&a).unwrap(), score_nps(&rotate(a.clone())).unwrap());
        }

        #[test]
        fn scores_stay_in_range(pairs in ux_pairs(), psat in prop::collection::vec(0i64..=4, 1..30),
                                nps in prop::collection::vec(0i64..=10, 1..30)) {
            let k = score_ux_lite(&ux(&pairs)).unwrap();
            prop_assert!((0.0..=100.0).contains(&k.value));
            prop_assert!(k.ci_low <= k.value && k.value <= k.ci_high);
            let k = score_psat(&single("psat", &psat)).unwrap();
            prop_assert!((0.0..=100.0).contains(&k.value));
            prop_assert!(k.ci_low <= k.value && k.value <= k.ci_high);
            let k = score_nps(&single("nps", &nps)).unwrap();
            prop_assert!((-100.0..=100.0).contains(&k.value));
            prop_assert!(k.ci_low <= k.value && k.value <= k.ci_high);
        }

        #[test]
        fn raising_an_answer_never_lowers_a_score(pairs in ux_pairs(), rows in ueq_rows(),
                                                  psat in prop::collection::vec(0i64..=4, 1..30),
                                                  nps in prop::collection::vec(0i64..=10, 1..30),
                                                  pick in 0usize..1000, item_ix in 0usize..8) {
            let mut raised = pairs.clone();
            let i = pick % raised.len();
            raised[i].0 = (raised[i].0 + 1).min(4);
            prop_assert!(score_ux_lite(&ux(&raised)).unwrap().value >= score_ux_lite(&ux(&pairs)).unwrap().value);

            let mut up = rows.clone();
            let i = pick % up.len();
            up[i][item_ix] = (up[i][item_ix] + 1).min(3);
            let (before, after) = (score_ueq_s(&ueq(&rows)).unwrap(), score_ueq_s(&ueq(&up)).unwrap());
            prop_assert!(after.overall.value >= before.overall.value);
            prop_assert!(after.pragmatic.value >= before.pragmatic.value);
            prop_assert!(after.hedonic.value >= before.hedonic.value);

            let mut up = psat.clone();
            let i = pick % up.len();
            up[i] = (up[i] + 1).min(4);
            prop_assert!(score_psat(&single("psat", &up)).unwrap().value >= score_psat(&single("psat", &psat)).unwrap().value);

            let mut up = nps.clone();
            let i = pick % up.len();
            up[i] = (up[i] + 1).min(10);
            prop_assert!(score_nps(&single("nps", &up)).unwrap().value >= score_nps(&single("nps", &nps)).unwrap().value);
        }

        #[test]
        fn classification_is_total_and_monotone(a in 0.0..=100.0f64, b in 0.0..=100.0f64) {
            let t = ux_lite_table();
            let rank = |s: f64| {
                let label = t.classify(s).unwrap().label;
                t.categories.iter().position(|c| c.label == label).unwrap()
            };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // categories are stored best-first, so a higher score has a smaller index
            prop_assert!(rank(hi) <= rank(lo));
        }
    }
}
