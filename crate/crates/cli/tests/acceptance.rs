//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Every check computes its expectation independently of the code under test
//! (hand formulas, transcribed reference values, or a second code path) and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use uxkpi_core::analytics::{Analytics, Dimension, FilterSpec};
use uxkpi_core::config::AnalyticsConfig;
use uxkpi_core::inference::{t_quantile, z_quantile};
use uxkpi_core::inference::{
    two_proportion_z_test, welch_df, welch_t_test, ProportionSummary, SampleSummary,
};
use uxkpi_core::ingest::Store;
use uxkpi_core::report::{build_report, OutputFormat, ReportSpec};
use uxkpi_core::simulate::{
    build_population, coverage_trials, run_experiment, substream, CoverageSpec, Execution,
    ExperimentOutput, ExperimentSpec,
};
use uxkpi_core::survey::{
    codes, score_ux_lite, ux_lite_participant_scores, BenchmarkSet, BenchmarkTable, Channel, KpiKind,
    SurveyResponse,
};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(actual: f64, expected: f64, tol: f64, what: &str) -> Result<(), String> {
    check(
        (actual - expected).abs() <= tol,
        format!("{what}: got {actual}, expected {expected} +/- {tol}"),
    )
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, format!("{what} took {elapsed:?}, limit {limit:?}"))
}

fn ux_response(id: usize, useful: i64, easy: i64) -> SurveyResponse {
    SurveyResponse::new(
        format!("r{id}"),
        "p",
        "2024-05-01T00:00:00Z".parse().unwrap(),
        Channel::InAppButton,
    )
    .with_answer(codes::UXLITE_USEFUL, useful)
    .with_answer(codes::UXLITE_EASY, easy)
}

fn scoring_exactness() -> Verdict {
    let tables = BenchmarkSet::default();
    let table = tables.ux_lite.as_ref().ok_or("no UX-Lite table")?;
    let start = Instant::now();
    let a = table.classify(82.0).map_err(|e| e.to_string())?;
    let f = table.classify(45.0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(a.label == "A" && a.percentile_band == "90 - 95", format!("82 -> {a:?}"))?;
    check(f.label == "F" && f.percentile_band == "0 - 14", format!("45 -> {f:?}"))?;
    within(elapsed, Duration::from_millis(1), "classification")?;

    // every answer pair maps to (useful + easy) * 12.5 exactly
    let mut responses = Vec::new();
    for u in 0..=4 {
        for e in 0..=4 {
            responses.push(ux_response(responses.len(), u, e));
        }
    }
    let scores = ux_lite_participant_scores(&responses).map_err(|e| e.to_string())?;
    for (r, s) in responses.iter().zip(&scores) {
        let expected = (r.answers[codes::UXLITE_USEFUL] + r.answers[codes::UXLITE_EASY]) as f64 * 12.5;
        check(*s == expected, format!("{:?} scored {s}, expected {expected}", r.answers))?;
    }
    // 14 participants at 7 and 11 at 6: (14*87.5 + 11*75) / 25 = 82
    let mut sample: Vec<_> = (0..14).map(|i| ux_response(i, 4, 3)).collect();
    sample.extend((14..25).map(|i| ux_response(i, 3, 3)));
    let start = Instant::now();
    let r = score_ux_lite(&sample).map_err(|e| e.to_string())?.with_benchmark(Some(table));
    let elapsed = start.elapsed();
    check(r.value == 82.0, format!("mean {}", r.value))?;
    check(r.benchmark_category.as_deref() == Some("A"), format!("{:?}", r.benchmark_category))?;
    within(elapsed, Duration::from_millis(1), "scoring 25 responses")?;
    Ok("82 -> A (90 - 95), 45 -> F (0 - 14); 25 answer pairs map exactly".into())
}

/// Published grading intervals, best category first: (label, low, high).
const UX_LITE: [(&str, f64, f64); 11] = [
    ("A+", 84.1, 100.0),
    ("A", 80.8, 84.0),
    ("A-", 78.8, 80.7),
    ("B+", 77.2, 78.8),
    ("B", 74.1, 77.1),
    ("B-", 72.6, 74.0),
    ("C+", 71.1, 72.5),
    ("C", 65.0, 71.0),
    ("C-", 62.7, 64.9),
    ("D", 51.7, 62.6),
    ("F", 0.0, 51.6),
];
const UEQ_LABELS: [&str; 5] = ["Excellent", "Good", "Above Average", "Below Average", "Bad"];
const UEQ_OVERALL: [(f64, f64); 5] = [(5.58, 7.0), (5.31, 5.57), (4.98, 5.30), (4.59, 4.97), (1.0, 4.58)];
const UEQ_PRAGMATIC: [(f64, f64); 5] = [(5.74, 7.0), (5.55, 5.73), (5.17, 5.55), (4.72, 5.16), (1.0, 4.71)];
const UEQ_HEDONIC: [(f64, f64); 5] = [(5.59, 7.0), (5.20, 5.58), (4.85, 5.19), (4.35, 4.84), (1.0, 4.35)];

/// Sweeps `table` over its whole scale and checks the result against the
/// published intervals (given on the table's shifted scale).
fn sweep(table: &BenchmarkTable, published: &[(&str, f64, f64)]) -> Result<(), String> {
    const STEPS: usize = 10_000;
    let name = &table.name;
    for (cat, (label, low, _)) in table.categories.iter().zip(published) {
        check(cat.label == *label && cat.lower_bound == *low, format!("{name}: {cat:?} vs {label} {low}"))?;
    }
    check(table.categories.len() == published.len(), format!("{name}: category count"))?;
    let (min, max) = (published.last().unwrap().1, published[0].2);
    let mut previous_rank = usize::MAX;
    for i in 0..STEPS {
        let shifted = min + (max - min) * i as f64 / (STEPS - 1) as f64;
        let score = shifted - table.scale_offset;
        let got = table
            .classify(score)
            .map_err(|e| format!("{name}: {score} not classified: {e}"))?;
        let rank = published
            .iter()
            .position(|(l, _, _)| *l == got.label)
            .ok_or_else(|| format!("{name}: unknown label {}", got.label))?;
        // monotone: a higher score never gets a worse category
        check(rank <= previous_rank, format!("{name}: not monotone at {shifted}"))?;
        previous_rank = rank;
        // descending lower-bound rule, recomputed from the published bounds
        let expected = published.iter().position(|(_, low, _)| *low <= shifted + 1e-12).unwrap();
        check(rank == expected, format!("{name}: {shifted} -> {} expected {}", got.label, published[expected].0))?;
        // a score inside a published interval gets that category, or the next
        // better one when the interval shares its upper end with that one's start
        for (j, (_, low, high)) in published.iter().enumerate() {
            if (*low..=*high).contains(&shifted) {
                let shared = j > 0 && published[j - 1].1 <= shifted;
                check(rank == j || (shared && rank == j - 1), format!("{name}: {shifted} in {:?}", published[j]))?;
            }
        }
    }
    Ok(())
}

fn benchmark_tables() -> Verdict {
    let set = BenchmarkSet::default();
    let ueq = |bounds: &[(f64, f64); 5]| -> Vec<(&str, f64, f64)> {
        UEQ_LABELS.iter().zip(bounds).map(|(l, (lo, hi))| (*l, *lo, *hi)).collect()
    };
    let tables = [
        (set.ux_lite.as_ref(), UX_LITE.to_vec()),
        (set.ueq_overall.as_ref(), ueq(&UEQ_OVERALL)),
        (set.ueq_pragmatic.as_ref(), ueq(&UEQ_PRAGMATIC)),
        (set.ueq_hedonic.as_ref(), ueq(&UEQ_HEDONIC)),
    ];
    for (table, published) in &tables {
        sweep(table.ok_or("missing table")?, published)?;
    }
    Ok("4 tables x 10,000 scores: total, monotone, interval-consistent".into())
}

fn quantile_accuracy() -> Verdict {
    let t = |df: f64| t_quantile(df, 0.025).map_err(|e| e.to_string());
    close(t(2.0)?, 4.30265, 1e-4, "t(2, .025)")?;
    close(t(10.0)?, 2.22814, 1e-4, "t(10, .025)")?;
    close(t(f64::INFINITY)?, 1.95996, 1e-4, "t(inf, .025)")?;
    close(z_quantile(0.025).map_err(|e| e.to_string())?, 1.959964, 1e-5, "z(.025)")?;
    let start = Instant::now();
    let mut acc = 0.0f64;
    for i in 0..100_000 {
        let df = 1.0 + (i % 500) as f64 * 0.37;
        let p = 0.001 + (i % 97) as f64 * 0.005;
        acc += t_quantile(df, p).map_err(|e| e.to_string())?;
    }
    let elapsed = start.elapsed();
    check(acc.is_finite(), "non-finite quantile")?;
    within(elapsed, Duration::from_secs(1), "10^5 t quantiles")?;
    Ok(format!("reference values within tolerance; 10^5 evaluations in {elapsed:.2?}"))
}

fn welch_oracle() -> Verdict {
    // 1..5 and 3..7: means 3 and 5, both variances 2.5
    let a = SampleSummary::new(5, 3.0, 2.5);
    let b = SampleSummary::new(5, 5.0, 2.5);
    let outcome = welch_t_test(&a, &b, 0.05).map_err(|e| e.to_string())?;
    // t = (3 - 5) / sqrt(2.5/5 + 2.5/5) = -2; df = (0.5+0.5)^2 / (0.25/4 + 0.25/4) = 8
    close(outcome.statistic, -2.0, 1e-6, "t")?;
    close(outcome.df.ok_or("no df")?, 8.0, 1e-6, "df")?;
    close(outcome.critical_value, 2.30600, 1e-5, "critical")?;
    check(!outcome.significant, "reported significant")?;
    Ok(format!(
        "t {:.6}, df {:.6}, critical {:.5}, not significant",
        outcome.statistic,
        outcome.df.unwrap(),
        outcome.critical_value
    ))
}

fn welch_reduction() -> Verdict {
    let mut rng = substream(2024, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..500usize);
        let var = rng.random_range(1e-3..1e3);
        let a = SampleSummary::new(n, rng.random_range(-10.0..10.0), var);
        let b = SampleSummary::new(n, rng.random_range(-10.0..10.0), var);
        let df = welch_df(&a, &b).map_err(|e| e.to_string())?;
        let expected = (2 * n - 2) as f64;
        worst = worst.max((df - expected).abs());
        close(df, expected, 1e-9, &format!("n {n}, variance {var}"))?;
    }
    Ok(format!("1000 cases, worst deviation {worst:.1e}"))
}

fn ci_coverage() -> Verdict {
    let spec = CoverageSpec {
        mu: 3.0,
        sigma: 1.0,
        n: 30,
        trials: 20_000,
        seed: 42,
        alpha: 0.05,
    };
    let start = Instant::now();
    let trials = coverage_trials(&spec, Execution::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut covered = 0usize;
    for t in &trials {
        let inside = t.ci_low <= spec.mu && spec.mu <= t.ci_high;
        check(inside == t.covered, format!("trial flag disagrees with its interval: {t:?}"))?;
        covered += usize::from(inside);
    }
    let coverage = covered as f64 / trials.len() as f64;
    check(trials.len() == 20_000, "trial count")?;
    check((0.935..=0.965).contains(&coverage), format!("coverage {coverage}"))?;
    within(elapsed, Duration::from_secs(10), "coverage experiment")?;
    Ok(format!("coverage {coverage:.4} over 20,000 trials in {elapsed:.2?}"))
}

fn fig5_reproduction() -> Verdict {
    let mut total = Duration::ZERO;
    let mut extremes = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..10u64 {
        let spec = ExperimentSpec::fig5(seed * 7919 + 1);
        let ExperimentSpec::Sampling { population, sampling } = &spec else {
            return Err("fig5 is not a sampling experiment".into());
        };
        check(population.size == 1000 && sampling.sample_size == 50 && sampling.repetitions == 100, "setup")?;
        let start = Instant::now();
        let pop = build_population(population).map_err(|e| e.to_string())?;
        let out = run_experiment(&spec, Execution::default()).map_err(|e| e.to_string())?;
        total += start.elapsed();
        let mu = pop.ratings().iter().map(|&r| f64::from(r)).sum::<f64>() / pop.len() as f64;
        close(mu, 3.0, 0.01, "population mean")?;
        let ExperimentOutput::Sampling { means, .. } = out else {
            return Err("unexpected output".into());
        };
        check(means.len() == 100, "100 samples")?;
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        check((2.95..=3.05).contains(&grand), format!("seed {seed}: mean of means {grand}"))?;
        for m in &means {
            check((2.4..=3.6).contains(m), format!("seed {seed}: sample mean {m}"))?;
            extremes = (extremes.0.min(*m), extremes.1.max(*m));
        }
    }
    within(total, Duration::from_secs(1), "10 fig5 runs")?;
    Ok(format!(
        "10 seeds, sample means in [{:.2}, {:.2}], {total:.2?}",
        extremes.0, extremes.1
    ))
}

fn two_proportion_oracle() -> Verdict {
    let p = |p_hat: f64| ProportionSummary::new(100, p_hat).map_err(|e| e.to_string());
    let outcome = two_proportion_z_test(&p(0.8)?, &p(0.6)?, 0.05).map_err(|e| e.to_string())?;
    let expected = 0.2 / (0.8f64 * 0.2 / 100.0 + 0.6 * 0.4 / 100.0).sqrt();
    close(outcome.statistic, expected, 1e-9, "z vs hand formula")?;
    close(outcome.statistic, 3.1623, 1e-3, "z")?;
    check(outcome.significant, "0.8 vs 0.6 not significant")?;
    let flat = two_proportion_z_test(&p(0.7)?, &p(0.7)?, 0.05).map_err(|e| e.to_string())?;
    check(flat.statistic == 0.0 && !flat.significant, format!("equal proportions: {flat:?}"))?;
    Ok(format!("z {:.4} significant; equal p gives z 0", outcome.statistic))
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn uxkpi(store: &Path, cwd: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_uxkpi"))
        .args(args)
        .env("UXKPI_STORE", store)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn end_to_end_determinism() -> Verdict {
    let fixtures = workspace().join("crates/core/tests/fixtures/e2e");
    let input = fixtures.join("responses.csv");
    let def = fixtures.join("definition.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let store = dir.path().join("store.ndjson");
        let run = |args: &[&str]| uxkpi(&store, dir.path(), args);
        run(&["ingest", "--input", input.to_str().unwrap(), "--definition", def.to_str().unwrap()])?;
        let mut artefacts = vec![std::fs::read(&store).map_err(|e| e.to_string())?];
        for kind in KpiKind::ALL {
            artefacts.push(run(&["score", "--json", "--kind", kind.as_str()])?);
        }
        run(&["report", "--period", "2024-Q2", "--baseline", "2024-Q1", "--seed", "42", "--output", "r.md"])?;
        run(&["report", "--period", "2024-Q2", "--baseline", "2024-Q1", "--seed", "42", "--format", "html", "--output", "r.html"])?;
        for f in ["r.md", "r.html"] {
            artefacts.push(std::fs::read(dir.path().join(f)).map_err(|e| e.to_string())?);
        }
        runs.push(artefacts);
    }
    check(!runs[0][0].is_empty(), "empty store")?;
    for (i, (a, b)) in runs[0].iter().zip(&runs[1]).enumerate() {
        check(a == b, format!("artefact {i} differs between runs"))?;
    }
    Ok(format!("{} artefacts byte-identical across two runs", runs[0].len()))
}

async fn fetch(router: &axum::Router, method: &str, uri: &str, body: Option<&Value>) -> Result<Vec<u8>, String> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .map_err(|e| e.to_string())?;
    let resp = router.clone().oneshot(req).await.map_err(|e| e.to_string())?;
    if !resp.status().is_success() {
        return Err(format!("{uri}: status {}", resp.status()));
    }
    Ok(resp.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes().to_vec())
}

fn same<T: serde::Serialize>(body: &[u8], lib: &T, what: &str) -> Result<(), String> {
    let lib = serde_json::to_vec(lib).map_err(|e| e.to_string())?;
    let parsed = |b: &[u8]| serde_json::from_slice::<Value>(b).map_err(|e| format!("{what}: {e}"));
    check(parsed(body)? == parsed(&lib)?, format!("{what}: payload differs from library"))?;
    check(body == lib.as_slice(), format!("{what}: bytes differ from library serialization"))
}

async fn equivalence_for(name: &str) -> Result<usize, String> {
    let path = workspace().join(format!("crates/service/tests/fixtures/{name}.ndjson"));
    let store = Store::new(&path);
    let service = uxkpi_service::Service::open(store.clone(), AnalyticsConfig::default()).map_err(|e| e.message)?;
    let router = service.router();
    let a = Analytics::open(&store, AnalyticsConfig::default()).map_err(|e| e.to_string())?;
    let meta = a.meta_filters();
    let mut compared = 0;

    same(&fetch(&router, "GET", "/api/v1/meta/filters", None).await?, &meta, "meta")?;
    compared += 1;

    let mut filters = vec![FilterSpec::default()];
    filters.extend(meta.products.iter().map(|p| FilterSpec::default().for_product(p)));
    filters.extend(meta.quarters.iter().map(|q| FilterSpec::default().in_quarter(*q)));
    for f in &filters {
        let q: Vec<String> = f.to_query_pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        let q = q.join("&");
        for kind in KpiKind::ALL {
            let body = fetch(&router, "GET", &format!("/api/v1/kpis/{}/series?{q}", kind.as_str()), None).await?;
            same(&body, &*a.kpi_series(f, kind).map_err(|e| e.to_string())?, "series")?;
            for dim in Dimension::ALL {
                let uri = format!("/api/v1/split?kind={}&dimension={}&{q}", kind.as_str(), dim.as_str());
                let body = fetch(&router, "GET", &uri, None).await?;
                same(&body, &a.split_by(f, kind, dim).map_err(|e| e.to_string())?, "split")?;
            }
            compared += 1 + Dimension::ALL.len();
        }
        let body = fetch(&router, "GET", &format!("/api/v1/kpis/psat/distribution?{q}"), None).await?;
        same(&body, &a.satisfaction_distribution(f), "distribution")?;
        compared += 1;
    }
    for window in meta.quarters.windows(2) {
        let (fa, fb) = (FilterSpec::default().in_quarter(window[1]), FilterSpec::default().in_quarter(window[0]));
        for kind in KpiKind::ALL {
            if let Ok(lib) = a.compare(&fa, &fb, kind) {
                let req = json!({"kind": kind.as_str(), "filter_a": fa, "filter_b": fb});
                same(&fetch(&router, "POST", "/api/v1/compare", Some(&req)).await?, &lib, "compare")?;
                compared += 1;
            }
        }
        let mut spec = ReportSpec::new(window[1], window[0]);
        let uri = format!("/api/v1/report?period={}&baseline={}", window[1], window[0]);
        same(&fetch(&router, "GET", &format!("{uri}&format=json"), None).await?, &build_report(&a, &spec).map_err(|e| e.to_string())?, "report json")?;
        spec.output_format = OutputFormat::Html;
        let html = fetch(&router, "GET", &format!("{uri}&format=html"), None).await?;
        check(html == build_report(&a, &spec).map_err(|e| e.to_string())?.rendered, "report html differs")?;
        compared += 2;
    }
    let sim = ExperimentSpec::fig5(5);
    let body = fetch(&router, "POST", "/api/v1/simulate", Some(&serde_json::to_value(&sim).unwrap())).await?;
    same(&body, &run_experiment(&sim, Execution::default()).map_err(|e| e.to_string())?, "simulate")?;
    Ok(compared + 1)
}

fn api_equivalence() -> Verdict {
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let mut total = 0;
    for name in ["psat_rise", "flat", "mixed"] {
        total += runtime.block_on(equivalence_for(name)).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("3 fixture stores, {total} payloads identical to library serialization"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("scoring exactness", scoring_exactness),
        ("benchmark tables", benchmark_tables),
        ("quantile accuracy", quantile_accuracy),
        ("welch oracle", welch_oracle),
        ("welch df reduction", welch_reduction),
        ("ci coverage", ci_coverage),
        ("sampling envelope", fig5_reproduction),
        ("two-proportion oracle", two_proportion_oracle),
        ("end-to-end determinism", end_to_end_determinism),
        ("api/library equivalence", api_equivalence),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
