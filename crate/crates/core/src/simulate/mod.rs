//! Monte-Carlo experiments on finite rating populations.
//!
//! Every trial draws from its own generator, seeded from `(seed, trial index)`
//! with SplitMix64 and run as PCG-XSL-RR 128/64 ([`rand_pcg::Pcg64`]). Outputs
//! therefore do not depend on how trials are scheduled, and sequential and
//! parallel execution agree bit for bit.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference;
use crate::survey::Channel;

pub const RATING_MIN: u8 = 1;
pub const RATING_MAX: u8 = 5;
const LEVELS: usize = (RATING_MAX - RATING_MIN + 1) as usize;
/// Achieved population mean must be this close to the target.
pub const MU_TOLERANCE: f64 = 0.01;
/// Invitation budget per requested observation in [`biased_sample`].
pub const MAX_INVITES_PER_RESPONSE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("target mean {target} cannot be reached with {size} ratings (best {achieved})")]
    InfeasibleTarget {
        target: f64,
        size: usize,
        achieved: f64,
    },
    #[error("sample of {sample_size} exceeds population of {population}")]
    SampleTooLarge {
        sample_size: usize,
        population: usize,
    },
    #[error("no rating in the population has a positive response propensity on {channel}")]
    ExhaustedPopulation { channel: Channel },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Inference(#[from] inference::InferenceError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SimulateError> {
    Err(SimulateError::InvalidArgument(msg.into()))
}

/// How trials are executed. `Parallel` runs sequentially when the crate is
/// built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Self::Parallel
        } else {
            Self::Sequential
        }
    }
}

fn run_trials<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> Pcg64 {
    Pcg64::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Relative frequency of each rating 1..=5 before the mean is adjusted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingShape(pub [f64; LEVELS]);

impl RatingShape {
    /// Symmetric shape peaked at 3.
    pub const CENTERED: RatingShape = RatingShape([0.1, 0.2, 0.4, 0.2, 0.1]);
    pub const UNIFORM: RatingShape = RatingShape([0.2; LEVELS]);

    fn validate(&self) -> Result<(), SimulateError> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) || self.0.iter().sum::<f64>() <= 0.0 {
            return invalid("shape weights must be non-negative with a positive sum");
        }
        Ok(())
    }
}

impl Default for RatingShape {
    fn default() -> Self {
        Self::CENTERED
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub size: usize,
    pub target_mu: f64,
    #[serde(default)]
    pub shape: RatingShape,
    pub seed: u64,
}

/// A finite population of ratings on 1..=5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    ratings: Vec<u8>,
    mu: f64,
}

impl Population {
    pub fn from_ratings(ratings: Vec<u8>) -> Result<Self, SimulateError> {
        if ratings.is_empty() {
            return invalid("population is empty");
        }
        if ratings.iter().any(|r| !(RATING_MIN..=RATING_MAX).contains(r)) {
            return invalid("ratings must lie in 1..=5");
        }
        let mu = int_mean(&ratings);
        Ok(Self { ratings, mu })
    }

    pub fn ratings(&self) -> &[u8] {
        &self.ratings
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Population variance (divisor N).
    pub fn variance(&self) -> f64 {
        let n = self.ratings.len() as f64;
        self.ratings.iter().map(|&r| (r as f64 - self.mu).powi(2)).sum::<f64>() / n
    }

    fn level_counts(&self) -> [usize; LEVELS] {
        let mut counts = [0; LEVELS];
        for &r in &self.ratings {
            counts[(r - RATING_MIN) as usize] += 1;
        }
        counts
    }
}

fn int_mean(values: &[u8]) -> f64 {
    values.iter().map(|&v| u64::from(v)).sum::<u64>() as f64 / values.len() as f64
}

/// Largest-remainder apportionment of `size` over `weights`.
fn apportion(weights: &[f64; LEVELS], size: usize) -> [usize; LEVELS] {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * size as f64).collect();
    let mut counts = [0usize; LEVELS];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..LEVELS).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = size - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

/// Builds a population whose mean is within [`MU_TOLERANCE`] of `target_mu`.
///
/// Counts per rating follow `shape`; single ratings are then moved one step at
/// a time, from the level nearest the target side, until the rating total
/// equals `round(target_mu · size)`. The result is shuffled with `seed`.
pub fn build_population(spec: &PopulationSpec) -> Result<Population, SimulateError> {
    spec.shape.validate()?;
    if spec.size == 0 {
        return invalid("population size must be at least 1");
    }
    let (lo, hi) = (f64::from(RATING_MIN), f64::from(RATING_MAX));
    if !(lo..=hi).contains(&spec.target_mu) {
        return Err(SimulateError::InfeasibleTarget {
            target: spec.target_mu,
            size: spec.size,
            achieved: spec.target_mu.clamp(lo, hi),
        });
    }
    let mut counts = apportion(&spec.shape.0, spec.size);
    let level = |i: usize| i as i64 + i64::from(RATING_MIN);
    let mut total: i64 = counts.iter().enumerate().map(|(i, &c)| level(i) * c as i64).sum();
    let goal = (spec.target_mu * spec.size as f64).round() as i64;
    while total < goal {
        let i = (0..LEVELS - 1).rev().find(|&i| counts[i] > 0).expect("below max total");
        counts[i] -= 1;
        counts[i + 1] += 1;
        total += 1;
    }
    while total > goal {
        let i = (1..LEVELS).find(|&i| counts[i] > 0).expect("above min total");
        counts[i] -= 1;
        counts[i - 1] += 1;
        total -= 1;
    }
    let achieved = total as f64 / spec.size as f64;
    if (achieved - spec.target_mu).abs() > MU_TOLERANCE {
        return Err(SimulateError::InfeasibleTarget {
            target: spec.target_mu,
            size: spec.size,
            achieved,
        });
    }
    let mut ratings: Vec<u8> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat(RATING_MIN + i as u8).take(c))
        .collect();
    ratings.shuffle(&mut substream(spec.seed, u64::MAX));
    Population::from_ratings(ratings)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingExperiment {
    pub sample_size: usize,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default)]
    pub with_replacement: bool,
}

/// One mean per repetition, each over a simple random sample.
pub fn run_sampling(
    pop: &Population,
    exp: &SamplingExperiment,
    exec: Execution,
) -> Result<Vec<f64>, SimulateError> {
    if exp.sample_size == 0 {
        return invalid("sample_size must be at least 1");
    }
    if !exp.with_replacement && exp.sample_size > pop.len() {
        return Err(SimulateError::SampleTooLarge {
            sample_size: exp.sample_size,
            population: pop.len(),
        });
    }
    let ratings = pop.ratings();
    Ok(run_trials(exec, exp.repetitions, |i| {
        let mut rng = substream(exp.seed, i as u64);
        let sum: u64 = if exp.with_replacement {
            (0..exp.sample_size)
                .map(|_| u64::from(ratings[rng.random_range(0..ratings.len())]))
                .sum()
        } else {
            index::sample(&mut rng, ratings.len(), exp.sample_size)
                .iter()
                .map(|j| u64::from(ratings[j]))
                .sum()
        };
        sum as f64 / exp.sample_size as f64
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSpec {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    inference::DEFAULT_ALPHA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageTrial {
    pub trial: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub covered: bool,
}

/// Per-trial t intervals for samples from `Normal(mu, sigma)`.
pub fn coverage_trials(spec: &CoverageSpec, exec: Execution) -> Result<Vec<CoverageTrial>, SimulateError> {
    if spec.n < 2 {
        return invalid("n must be at least 2");
    }
    if spec.trials == 0 {
        return invalid("trials must be at least 1");
    }
    if !spec.mu.is_finite() {
        return invalid("mu must be finite");
    }
    if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
        return invalid(format!("sigma {} must be finite and non-negative", spec.sigma));
    }
    let normal = Normal::new(spec.mu, spec.sigma)
        .map_err(|e| SimulateError::InvalidArgument(format!("sigma {}: {e}", spec.sigma)))?;
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return invalid(format!("alpha {} outside (0, 1)", spec.alpha));
    }
    let results = run_trials(exec, spec.trials, |trial| {
        let mut rng = substream(spec.seed, trial as u64);
        let values: Vec<f64> = (0..spec.n).map(|_| normal.sample(&mut rng)).collect();
        let summary = inference::summarize(&values)?;
        let ci = inference::ci_mean(&summary, spec.alpha)?;
        Ok(CoverageTrial {
            trial,
            mean: summary.mean,
            ci_low: ci.low,
            ci_high: ci.high,
            covered: ci.contains(spec.mu),
        })
    });
    results.into_iter().collect()
}

/// Fraction of trials whose interval contains the population mean.
pub fn coverage_experiment(spec: &CoverageSpec, exec: Execution) -> Result<f64, SimulateError> {
    let trials = coverage_trials(spec, exec)?;
    Ok(trials.iter().filter(|t| t.covered).count() as f64 / trials.len() as f64)
}

/// Response behaviour of one feedback channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBias {
    /// Probability that an invited user with rating 1..=5 responds.
    pub propensity: [f64; LEVELS],
    /// Added to each observed rating, then clamped to 1..=5.
    pub shift: i8,
}

impl Default for ChannelBias {
    fn default() -> Self {
        Self {
            propensity: [1.0; LEVELS],
            shift: 0,
        }
    }
}

impl ChannelBias {
    /// Extreme ratings respond fully, the middle at `middle`.
    pub fn u_shaped(middle: f64) -> Self {
        Self {
            propensity: [1.0, middle, middle, middle, 1.0],
            shift: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        if self.propensity.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("propensities must lie in [0, 1]");
        }
        if !(-2..=2).contains(&self.shift) {
            return invalid(format!("shift {} outside -2..=2", self.shift));
        }
        Ok(())
    }

    fn observe(&self, rating: u8) -> u8 {
        (i16::from(rating) + i16::from(self.shift))
            .clamp(i16::from(RATING_MIN), i16::from(RATING_MAX)) as u8
    }
}

/// Per-channel response behaviour. Channels not listed respond without bias.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    pub channels: BTreeMap<Channel, ChannelBias>,
}

impl BiasModel {
    pub fn bias(&self, channel: Channel) -> ChannelBias {
        self.channels.get(&channel).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        self.channels.values().try_for_each(ChannelBias::validate)
    }
}

/// Invites uniformly random users (with replacement across invitations) until
/// `n_target` respond, each responding with the propensity of their rating.
/// Returns fewer observations only when the invitation budget runs out.
pub fn biased_sample(
    pop: &Population,
    model: &BiasModel,
    channel: Channel,
    n_target: usize,
    seed: u64,
) -> Result<Vec<u8>, SimulateError> {
    model.validate()?;
    let bias = model.bias(channel);
    let reachable = pop
        .level_counts()
        .iter()
        .zip(bias.propensity)
        .any(|(&c, p)| c > 0 && p > 0.0);
    if !reachable {
        return Err(SimulateError::ExhaustedPopulation { channel });
    }
    let mut rng = substream(seed, 0);
    let ratings = pop.ratings();
    let budget = n_target.saturating_mul(MAX_INVITES_PER_RESPONSE);
    let mut observed = Vec::with_capacity(n_target);
    let mut invites = 0;
    while observed.len() < n_target && invites < budget {
        invites += 1;
        let rating = ratings[rng.random_range(0..ratings.len())];
        if rng.random::<f64>() < bias.propensity[(rating - RATING_MIN) as usize] {
            observed.push(bias.observe(rating));
        }
    }
    Ok(observed)
}

/// An experiment read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Sampling {
        population: PopulationSpec,
        sampling: SamplingExperiment,
    },
    Coverage(CoverageSpec),
    Bias {
        population: PopulationSpec,
        model: BiasModel,
        channel: Channel,
        n_target: usize,
        seed: u64,
    },
}

impl ExperimentSpec {
    /// Population of 1000 users with mean 3, 100 samples of 50.
    pub fn fig5(seed: u64) -> Self {
        Self::Sampling {
            population: PopulationSpec {
                size: 1000,
                target_mu: 3.0,
                shape: RatingShape::CENTERED,
                seed,
            },
            sampling: SamplingExperiment {
                sample_size: 50,
                repetitions: 100,
                seed,
                with_replacement: false,
            },
        }
    }

    pub fn from_json(json: &str) -> Result<Self, SimulateError> {
        serde_json::from_str(json).map_err(|e| SimulateError::InvalidArgument(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentOutput {
    Sampling { population_mu: f64, means: Vec<f64> },
    Coverage { coverage: f64, trials: Vec<CoverageTrial> },
    Bias { population_mu: f64, observed: Vec<u8> },
}

pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentOutput, SimulateError> {
    match spec {
        ExperimentSpec::Sampling {
            population,
            sampling,
        } => {
            let pop = build_population(population)?;
            Ok(ExperimentOutput::Sampling {
                population_mu: pop.mu(),
                means: run_sampling(&pop, sampling, exec)?,
            })
        }
        ExperimentSpec::Coverage(c) => {
            let trials = coverage_trials(c, exec)?;
            let coverage = trials.iter().filter(|t| t.covered).count() as f64 / trials.len() as f64;
            Ok(ExperimentOutput::Coverage { coverage, trials })
        }
        ExperimentSpec::Bias {
            population,
            model,
            channel,
            n_target,
            seed,
        } => {
            let pop = build_population(population)?;
            Ok(ExperimentOutput::Bias {
                population_mu: pop.mu(),
                observed: biased_sample(&pop, model, *channel, *n_target, *seed)?,
            })
        }
    }
}

impl ExperimentOutput {
    /// One row per repetition, trial or observation.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let res = match self {
            Self::Sampling { means, .. } => w.write_record(["repetition", "mean"]).and_then(|_| {
                means
                    .iter()
                    .enumerate()
                    .try_for_each(|(i, m)| w.write_record([i.to_string(), m.to_string()]))
            }),
            Self::Coverage { trials, .. } => w
                .write_record(["trial", "mean", "ci_low", "ci_high", "covered"])
                .and_then(|_| {
                    trials.iter().try_for_each(|t| {
                        w.write_record([
                            t.trial.to_string(),
                            t.mean.to_string(),
                            t.ci_low.to_string(),
                            t.ci_high.to_string(),
                            t.covered.to_string(),
                        ])
                    })
                }),
            Self::Bias { observed, .. } => w.write_record(["draw", "rating"]).and_then(|_| {
                observed
                    .iter()
                    .enumerate()
                    .try_for_each(|(i, r)| w.write_record([i.to_string(), r.to_string()]))
            }),
        };
        res.expect("writing CSV to memory");
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
    }
}
