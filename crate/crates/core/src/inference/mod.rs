//! Confidence intervals and two-group significance tests.

mod distributions;

pub use distributions::{
    ln_gamma, normal_inverse_cdf, regularized_incomplete_beta, t_pdf, t_quantile, t_upper_tail,
    z_quantile,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conventional significance threshold; every operation also takes it as a parameter.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} observations, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("both groups have zero variance")]
    DegenerateVariances,
    #[error("both proportions are 0 or 1, the test statistic is undefined")]
    DegenerateProportions,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance; `None` for a single observation.
    pub variance: Option<f64>,
}

impl SampleSummary {
    pub fn new(n: usize, mean: f64, variance: f64) -> Self {
        Self {
            n,
            mean,
            variance: Some(variance),
        }
    }

    fn require_variance(&self) -> Result<f64, InferenceError> {
        match self.variance {
            Some(v) if self.n >= 2 => Ok(v),
            _ => Err(InferenceError::InsufficientSample {
                needed: 2,
                got: self.n,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionSummary {
    pub n: usize,
    pub p_hat: f64,
}

impl ProportionSummary {
    pub fn from_counts(successes: usize, n: usize) -> Result<Self, InferenceError> {
        if n == 0 {
            return Err(InferenceError::EmptyInput);
        }
        if successes > n {
            return Err(InferenceError::InvalidArgument(format!(
                "{successes} successes out of {n}"
            )));
        }
        Ok(Self {
            n,
            p_hat: successes as f64 / n as f64,
        })
    }

    /// Checks that `p_hat * n` is a whole count.
    pub fn new(n: usize, p_hat: f64) -> Result<Self, InferenceError> {
        if n == 0 {
            return Err(InferenceError::EmptyInput);
        }
        let count = p_hat * n as f64;
        if !(0.0..=1.0).contains(&p_hat) || (count - count.round()).abs() > 1e-9 {
            return Err(InferenceError::InvalidArgument(format!(
                "p_hat {p_hat} is not a share of {n} responses"
            )));
        }
        Ok(Self { n, p_hat })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalMethod {
    TMean,
    WaldProportion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub method: IntervalMethod,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    WelchT,
    TwoProportionZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    /// Welch-Satterthwaite degrees of freedom; `None` for the z-test.
    pub df: Option<f64>,
    pub critical_value: f64,
    pub significant: bool,
    pub alpha: f64,
    pub kind: TestKind,
}

fn check_alpha(alpha: f64) -> Result<(), InferenceError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(InferenceError::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )))
    }
}

pub fn summarize(values: &[f64]) -> Result<SampleSummary, InferenceError> {
    if values.is_empty() {
        return Err(InferenceError::EmptyInput);
    }
    // summing in sorted order makes the result independent of input order
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let rough = sorted.iter().sum::<f64>() / n;
    // second pass removes the rounding left in the first; constant samples come out exact
    let mean = rough + sorted.iter().map(|x| x - rough).sum::<f64>() / n;
    let variance = (sorted.len() >= 2)
        .then(|| sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0));
    Ok(SampleSummary {
        n: values.len(),
        mean,
        variance,
    })
}

/// `x̄ ± t(n−1, α/2)·√(s²/n)`.
pub fn ci_mean(s: &SampleSummary, alpha: f64) -> Result<ConfidenceInterval, InferenceError> {
    check_alpha(alpha)?;
    let variance = s.require_variance()?;
    let half = if variance == 0.0 {
        0.0
    } else {
        t_quantile((s.n - 1) as f64, alpha / 2.0)? * (variance / s.n as f64).sqrt()
    };
    Ok(ConfidenceInterval {
        low: s.mean - half,
        high: s.mean + half,
        level: 1.0 - alpha,
        method: IntervalMethod::TMean,
    })
}

/// Wald interval `p̂ ± z(α/2)·√(p̂(1−p̂)/n)`, not clipped to [0, 1].
pub fn ci_proportion(
    p: &ProportionSummary,
    alpha: f64,
) -> Result<ConfidenceInterval, InferenceError> {
    check_alpha(alpha)?;
    if p.n == 0 {
        return Err(InferenceError::EmptyInput);
    }
    let half = z_quantile(alpha / 2.0)? * (p.p_hat * (1.0 - p.p_hat) / p.n as f64).sqrt();
    Ok(ConfidenceInterval {
        low: p.p_hat - half,
        high: p.p_hat + half,
        level: 1.0 - alpha,
        method: IntervalMethod::WaldProportion,
    })
}

/// Welch-Satterthwaite approximate degrees of freedom.
pub fn welch_df(s1: &SampleSummary, s2: &SampleSummary) -> Result<f64, InferenceError> {
    let v1 = s1.require_variance()?;
    let v2 = s2.require_variance()?;
    if v1 == 0.0 && v2 == 0.0 {
        return Err(InferenceError::DegenerateVariances);
    }
    let (n1, n2) = (s1.n as f64, s2.n as f64);
    let (a, b) = (v1 / n1, v2 / n2);
    Ok((a + b).powi(2) / (v1 * v1 / (n1 * n1 * (n1 - 1.0)) + v2 * v2 / (n2 * n2 * (n2 - 1.0))))
}

/// Two-tailed Welch t-test of `H0: μ1 = μ2`.
pub fn welch_t_test(
    s1: &SampleSummary,
    s2: &SampleSummary,
    alpha: f64,
) -> Result<TestOutcome, InferenceError> {
    check_alpha(alpha)?;
    let df = welch_df(s1, s2)?;
    let v1 = s1.require_variance()?;
    let v2 = s2.require_variance()?;
    let se = (v1 / s1.n as f64 + v2 / s2.n as f64).sqrt();
    let statistic = (s1.mean - s2.mean) / se;
    let critical_value = t_quantile(df, alpha / 2.0)?;
    Ok(TestOutcome {
        statistic,
        df: Some(df),
        critical_value,
        significant: statistic.abs() > critical_value,
        alpha,
        kind: TestKind::WelchT,
    })
}

/// Two-tailed z-test for a difference in proportions, unpooled variances.
pub fn two_proportion_z_test(
    p1: &ProportionSummary,
    p2: &ProportionSummary,
    alpha: f64,
) -> Result<TestOutcome, InferenceError> {
    check_alpha(alpha)?;
    if p1.n == 0 || p2.n == 0 {
        return Err(InferenceError::EmptyInput);
    }
    let var = p1.p_hat * (1.0 - p1.p_hat) / p1.n as f64 + p2.p_hat * (1.0 - p2.p_hat) / p2.n as f64;
    if var <= 0.0 {
        return Err(InferenceError::DegenerateProportions);
    }
    let statistic = (p1.p_hat - p2.p_hat) / var.sqrt();
    let critical_value = z_quantile(alpha / 2.0)?;
    Ok(TestOutcome {
        statistic,
        df: None,
        critical_value,
        significant: statistic.abs() > critical_value,
        alpha,
        kind: TestKind::TwoProportionZ,
    })
}
