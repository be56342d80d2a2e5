//! Periodic KPI report with highlighted quarter-over-quarter changes and a
//! seeded sample of verbatim comments.
//!
//! All numbers come from [`Analytics`] queries; the report only arranges and
//! formats them.

mod render;

use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use render::{render_html, render_markdown};

use crate::analytics::{
    Analytics, AnalyticsError, ComparisonResult, FilterSpec, Quarter, SeriesPoint,
};
use crate::inference::InferenceError;
use crate::simulate::substream;
use crate::survey::KpiKind;

/// KPIs on each product page, in display order.
pub const HEADLINE_KINDS: [KpiKind; 4] = [KpiKind::Psat, KpiKind::UxLite, KpiKind::UeqOverall, KpiKind::Nps];
/// KPIs in the appendix.
pub const APPENDIX_KINDS: [KpiKind; 2] = [KpiKind::UeqPragmatic, KpiKind::UeqHedonic];

pub const DEFAULT_COMMENT_SAMPLE_SIZE: usize = 5;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid report spec: {0}")]
    InvalidSpec(String),
    #[error("no responses in {0}")]
    EmptyPeriod(Quarter),
    #[error("unknown product {0:?}")]
    UnknownProduct(String),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    #[default]
    Markdown,
    Html,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub period: Quarter,
    pub baseline: Quarter,
    /// Empty means every product with responses in the period.
    #[serde(default)]
    pub products: BTreeSet<String>,
    #[serde(default = "default_comment_sample_size")]
    pub comment_sample_size: usize,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Seeds the comment sample; printed in the footer.
    #[serde(default)]
    pub seed: u64,
}

fn default_comment_sample_size() -> usize {
    DEFAULT_COMMENT_SAMPLE_SIZE
}

impl ReportSpec {
    pub fn new(period: Quarter, baseline: Quarter) -> Self {
        Self {
            period,
            baseline,
            products: BTreeSet::new(),
            comment_sample_size: DEFAULT_COMMENT_SAMPLE_SIZE,
            output_format: OutputFormat::Markdown,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.baseline >= self.period {
            return Err(ReportError::InvalidSpec(format!(
                "baseline {} must precede period {}",
                self.baseline, self.period
            )));
        }
        Ok(())
    }
}

/// One KPI of one product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub kind: KpiKind,
    pub current: Option<SeriesPoint>,
    pub baseline: Option<SeriesPoint>,
    /// Present when both quarters have unsuppressed values and the test is defined.
    pub comparison: Option<ComparisonResult>,
    /// `current − baseline` when both quarters have unsuppressed values.
    pub delta: Option<f64>,
    pub significant: bool,
    /// Significant and at least the configured minimum change.
    pub highlighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub response_id: String,
    pub polarity: Polarity,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSection {
    pub product_id: String,
    /// Headline kinds first, then appendix kinds.
    pub rows: Vec<KpiRow>,
    pub comments: Vec<Comment>,
    /// Comments available before sampling.
    pub comment_pool: usize,
}

impl ProductSection {
    pub fn row(&self, kind: KpiKind) -> Option<&KpiRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub product_id: String,
    pub kind: KpiKind,
    pub delta: Option<f64>,
    pub significant: bool,
    pub highlighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub spec: ReportSpec,
    pub alpha: f64,
    pub sections: Vec<ProductSection>,
    pub manifest: Vec<ManifestRow>,
    #[serde(skip)]
    pub rendered: Vec<u8>,
}

impl ReportDocument {
    pub fn render(&self, format: OutputFormat) -> Vec<u8> {
        match format {
            OutputFormat::Markdown => render_markdown(self),
            OutputFormat::Html => render_html(self),
        }
    }
}

fn point(a: &Analytics, filter: &FilterSpec, kind: KpiKind) -> Result<Option<SeriesPoint>, AnalyticsError> {
    Ok(a.kpi_series(filter, kind)?
        .first()
        .and_then(|s| s.points.first().cloned()))
}

fn has_value(p: &Option<SeriesPoint>) -> Option<f64> {
    p.as_ref().and_then(|p| p.result.as_ref()).map(|r| r.value)
}

fn kpi_row(a: &Analytics, product: &str, spec: &ReportSpec, kind: KpiKind) -> Result<KpiRow, AnalyticsError> {
    let f_cur = FilterSpec::default().for_product(product).in_quarter(spec.period);
    let f_base = FilterSpec::default().for_product(product).in_quarter(spec.baseline);
    let current = point(a, &f_cur, kind)?;
    let baseline = point(a, &f_base, kind)?;
    let (comparison, delta) = match (has_value(&current), has_value(&baseline)) {
        (Some(cur), Some(base)) => match a.compare(&f_cur, &f_base, kind) {
            Ok(c) => {
                let d = c.delta;
                (Some(c), Some(d))
            }
            // no defined test statistic: the change is shown without a verdict
            Err(AnalyticsError::InsufficientSample { .. })
            | Err(AnalyticsError::Inference(
                InferenceError::DegenerateVariances | InferenceError::DegenerateProportions,
            )) => (None, Some(cur - base)),
            Err(e) => return Err(e),
        },
        _ => (None, None),
    };
    let significant = comparison.as_ref().is_some_and(|c| c.outcome.significant);
    let highlighted = significant && delta.is_some_and(|d| a.config().is_substantive(kind, d));
    Ok(KpiRow {
        kind,
        current,
        baseline,
        comparison,
        delta,
        significant,
        highlighted,
    })
}

fn sample_comments(a: &Analytics, product: &str, spec: &ReportSpec, stream: u64) -> (Vec<Comment>, usize) {
    let filter = FilterSpec::default().for_product(product).in_quarter(spec.period);
    let mut pool: Vec<Comment> = Vec::new();
    for r in a.select(&filter) {
        for (polarity, text) in [
            (Polarity::Positive, &r.comment_positive),
            (Polarity::Negative, &r.comment_negative),
        ] {
            if let Some(t) = text.as_deref().filter(|t| !t.trim().is_empty()) {
                pool.push(Comment {
                    response_id: r.response_id.clone(),
                    polarity,
                    text: t.to_owned(),
                });
            }
        }
    }
    pool.sort_by(|x, y| (&x.response_id, x.polarity as u8).cmp(&(&y.response_id, y.polarity as u8)));
    let take = spec.comment_sample_size.min(pool.len());
    let mut picked: Vec<usize> = index::sample(&mut substream(spec.seed, stream), pool.len(), take).into_vec();
    picked.sort_unstable();
    let size = pool.len();
    let sample = picked.into_iter().map(|i| pool[i].clone()).collect();
    (sample, size)
}

/// Builds and renders the report for `spec.period` against `spec.baseline`.
pub fn build_report(a: &Analytics, spec: &ReportSpec) -> Result<ReportDocument, ReportError> {
    spec.validate()?;
    let known = a.meta_filters().products;
    for p in &spec.products {
        if !known.contains(p) {
            return Err(ReportError::UnknownProduct(p.clone()));
        }
    }
    let period_filter = FilterSpec {
        products: Some(spec.products.clone()),
        ..FilterSpec::default().in_quarter(spec.period)
    };
    let in_period: BTreeSet<String> = a.select(&period_filter).map(|r| r.product_id.clone()).collect();
    if in_period.is_empty() {
        return Err(ReportError::EmptyPeriod(spec.period));
    }
    let products: Vec<String> = if spec.products.is_empty() {
        in_period.into_iter().collect()
    } else {
        spec.products.iter().cloned().collect()
    };

    let mut sections = Vec::with_capacity(products.len());
    let mut manifest = Vec::new();
    for (i, product) in products.iter().enumerate() {
        let rows = HEADLINE_KINDS
            .iter()
            .chain(&APPENDIX_KINDS)
            .map(|&kind| kpi_row(a, product, spec, kind))
            .collect::<Result<Vec<_>, _>>()?;
        for r in &rows {
            manifest.push(ManifestRow {
                product_id: product.clone(),
                kind: r.kind,
                delta: r.delta,
                significant: r.significant,
                highlighted: r.highlighted,
            });
        }
        let (comments, comment_pool) = sample_comments(a, product, spec, i as u64);
        sections.push(ProductSection {
            product_id: product.clone(),
            rows,
            comments,
            comment_pool,
        });
    }
    let mut doc = ReportDocument {
        spec: spec.clone(),
        alpha: a.config().alpha,
        sections,
        manifest,
        rendered: Vec::new(),
    };
    doc.rendered = doc.render(spec.output_format);
    Ok(doc)
}

#[cfg(test)]
mod tests;
