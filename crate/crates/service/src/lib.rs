//! HTTP/JSON API over [`uxkpi_core`] analytics, reports and simulations.
//!
//! Every success body is the `serde_json` serialization of the matching
//! library call; every error body is an [`ApiError`]. Routes live under
//! `/api/v1`:
//!
//! | Method | Path | Library call |
//! |---|---|---|
//! | GET | `/kpis/{kind}/series?filters` | [`Analytics::kpi_series`] |
//! | GET | `/kpis/psat/distribution?filters` | [`Analytics::satisfaction_distribution`] |
//! | POST | `/compare` | [`Analytics::compare`] |
//! | GET | `/split?kind&dimension&filters` | [`Analytics::split_by`] |
//! | GET | `/meta/filters` | [`Analytics::meta_filters`] |
//! | GET | `/report?period&baseline&...` | [`build_report`] |
//! | POST | `/simulate` | [`run_experiment`] |
//! | POST | `/admin/reload` | re-reads the store |

mod error;

use std::future::Future;
use std::io;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};
use uxkpi_core::analytics::{Analytics, Dimension, FilterSpec};
use uxkpi_core::config::AnalyticsConfig;
use uxkpi_core::ingest::Store;
use uxkpi_core::report::{build_report, OutputFormat, ReportSpec};
use uxkpi_core::simulate::{run_experiment, Execution, ExperimentSpec};
use uxkpi_core::survey::KpiKind;

pub use error::{ApiError, ApiErrorCode};

type Pairs = Vec<(String, String)>;

/// Shared state: the current analytics snapshot and where to reload it from.
#[derive(Clone)]
pub struct Service {
    current: Arc<RwLock<Arc<Analytics>>>,
    store: Option<Arc<Store>>,
}

/// Body of `POST /api/v1/admin/reload`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReloadOutcome {
    pub responses: usize,
    pub version: u64,
}

/// Body of `POST /api/v1/compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    pub kind: String,
    #[serde(default)]
    pub filter_a: FilterSpec,
    #[serde(default)]
    pub filter_b: FilterSpec,
}

impl Service {
    /// Serves a fixed snapshot; reload is unavailable.
    pub fn new(analytics: Analytics) -> Self {
        Self {
            current: Arc::new(RwLock::new(Arc::new(analytics))),
            store: None,
        }
    }

    /// Serves `store`, which `POST /api/v1/admin/reload` re-reads.
    pub fn open(store: Store, config: AnalyticsConfig) -> Result<Self, ApiError> {
        let analytics = Analytics::open(&store, config)?;
        Ok(Self {
            current: Arc::new(RwLock::new(Arc::new(analytics))),
            store: Some(Arc::new(store)),
        })
    }

    /// The snapshot in-flight and new requests see.
    pub fn analytics(&self) -> Arc<Analytics> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Reads the store again and swaps the snapshot in one step.
    pub fn reload(&self) -> Result<ReloadOutcome, ApiError> {
        let store = self.store.as_ref().ok_or_else(|| {
            ApiError::new(ApiErrorCode::StoreUnavailable, "service was started without a store")
        })?;
        let config = self.analytics().config().clone();
        let fresh = Analytics::open(store, config)?;
        let outcome = ReloadOutcome {
            responses: fresh.snapshot().len(),
            version: fresh.snapshot().version,
        };
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(fresh);
        Ok(outcome)
    }

    pub fn router(&self) -> Router {
        let api = Router::new()
            .route("/kpis/psat/distribution", get(distribution))
            .route("/kpis/{kind}/series", get(series))
            .route("/compare", post(compare))
            .route("/split", get(split))
            .route("/meta/filters", get(meta_filters))
            .route("/report", get(report))
            .route("/simulate", post(simulate))
            .route("/admin/reload", post(reload));
        let router = Router::new()
            .nest("/api/v1", api)
            .fallback(not_found)
            .method_not_allowed_fallback(method_not_allowed)
            .with_state(self.clone());
        match cors(self.analytics().config().cors_origin.as_deref()) {
            Some(layer) => router.layer(layer),
            None => router,
        }
    }
}

fn cors(origin: Option<&str>) -> Option<CorsLayer> {
    let origin = match origin? {
        "*" => AllowOrigin::any(),
        o => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                tracing::warn!(origin = o, "ignoring unusable CORS origin");
                return None;
            }
        },
    };
    Some(
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    )
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    service: Service,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, service.router())
        .with_graceful_shutdown(shutdown)
        .await
}

fn json<T: Serialize + ?Sized>(value: &T) -> Response {
    match serde_json::to_vec(value) {
        Ok(body) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => ApiError::new(ApiErrorCode::Internal, e.to_string()).into_response(),
    }
}

fn pairs(query: Result<Query<Pairs>, QueryRejection>) -> Result<Pairs, ApiError> {
    query
        .map(|Query(p)| p)
        .map_err(|e| ApiError::new(ApiErrorCode::BadFilter, e.body_text()))
}

fn filter(pairs: &[(String, String)]) -> Result<FilterSpec, ApiError> {
    Ok(FilterSpec::from_query_pairs(
        pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())),
    )?)
}

fn kind(raw: &str) -> Result<KpiKind, ApiError> {
    raw.parse()
        .map_err(|e: uxkpi_core::survey::UnknownVariant| ApiError::new(ApiErrorCode::UnknownKind, e.to_string()))
}

/// Removes the single value of `key` from `pairs`.
fn take(pairs: &mut Pairs, key: &str) -> Result<String, ApiError> {
    let mut found = None;
    pairs.retain(|(k, v)| {
        if k == key {
            found = Some(v.clone());
            false
        } else {
            true
        }
    });
    found.ok_or_else(|| ApiError::new(ApiErrorCode::MissingParameter, format!("missing parameter {key:?}")))
}

fn body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(ApiErrorCode::InvalidBody, e.to_string()))
}

async fn series(
    State(svc): State<Service>,
    Path(raw_kind): Path<String>,
    query: Result<Query<Pairs>, QueryRejection>,
) -> Result<Response, ApiError> {
    let kind = kind(&raw_kind)?;
    let f = filter(&pairs(query)?)?;
    Ok(json(&*svc.analytics().kpi_series(&f, kind)?))
}

async fn distribution(
    State(svc): State<Service>,
    query: Result<Query<Pairs>, QueryRejection>,
) -> Result<Response, ApiError> {
    let f = filter(&pairs(query)?)?;
    Ok(json(&svc.analytics().satisfaction_distribution(&f)))
}

async fn compare(State(svc): State<Service>, bytes: axum::body::Bytes) -> Result<Response, ApiError> {
    let req: CompareRequest = body(&bytes)?;
    let kind = kind(&req.kind)?;
    Ok(json(&svc.analytics().compare(&req.filter_a, &req.filter_b, kind)?))
}

async fn split(
    State(svc): State<Service>,
    query: Result<Query<Pairs>, QueryRejection>,
) -> Result<Response, ApiError> {
    let mut p = pairs(query)?;
    let kind = kind(&take(&mut p, "kind")?)?;
    let dimension: Dimension = take(&mut p, "dimension")?
        .parse()
        .map_err(|e: uxkpi_core::survey::UnknownVariant| ApiError::new(ApiErrorCode::UnknownDimension, e.to_string()))?;
    let f = filter(&p)?;
    Ok(json(&svc.analytics().split_by(&f, kind, dimension)?))
}

async fn meta_filters(State(svc): State<Service>) -> Response {
    json(&svc.analytics().meta_filters())
}

/// Query parameters of `GET /api/v1/report`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportQuery {
    period: String,
    baseline: String,
    #[serde(default)]
    products: Option<String>,
    #[serde(default)]
    format: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    comment_sample_size: Option<usize>,
}

enum ReportFormat {
    Rendered(OutputFormat),
    Json,
}

fn report_spec(q: ReportQuery) -> Result<(ReportSpec, ReportFormat), ApiError> {
    let invalid = |msg: String| ApiError::new(ApiErrorCode::InvalidReportSpec, msg);
    let quarter = |name: &str, raw: &str| raw.trim().parse().map_err(|e| invalid(format!("{name}: {e}")));
    let mut spec = ReportSpec::new(quarter("period", &q.period)?, quarter("baseline", &q.baseline)?);
    if let Some(products) = q.products {
        spec.products = products
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::to_owned)
            .collect();
    }
    if let Some(seed) = q.seed {
        spec.seed = seed;
    }
    if let Some(size) = q.comment_sample_size {
        spec.comment_sample_size = size;
    }
    let format = match q.format.as_deref().unwrap_or("markdown") {
        "markdown" | "md" => ReportFormat::Rendered(OutputFormat::Markdown),
        "html" => ReportFormat::Rendered(OutputFormat::Html),
        "json" => ReportFormat::Json,
        other => return Err(invalid(format!("unknown format {other:?}"))),
    };
    if let ReportFormat::Rendered(f) = format {
        spec.output_format = f;
    }
    Ok((spec, format))
}

async fn report(
    State(svc): State<Service>,
    query: Result<Query<ReportQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::new(ApiErrorCode::InvalidReportSpec, e.body_text()))?;
    let (spec, format) = report_spec(q)?;
    let doc = build_report(&svc.analytics(), &spec)?;
    Ok(match format {
        ReportFormat::Json => json(&doc),
        ReportFormat::Rendered(f) => {
            let content_type = match f {
                OutputFormat::Markdown => "text/markdown; charset=utf-8",
                OutputFormat::Html => "text/html; charset=utf-8",
            };
            ([(header::CONTENT_TYPE, content_type)], doc.rendered).into_response()
        }
    })
}

async fn simulate(bytes: axum::body::Bytes) -> Result<Response, ApiError> {
    let spec: ExperimentSpec = body(&bytes)?;
    let output = tokio::task::spawn_blocking(move || run_experiment(&spec, Execution::default()))
        .await
        .map_err(|e| ApiError::new(ApiErrorCode::Internal, e.to_string()))??;
    Ok(json(&output))
}

async fn reload(State(svc): State<Service>) -> Result<Response, ApiError> {
    let outcome = tokio::task::spawn_blocking(move || svc.reload())
        .await
        .map_err(|e| ApiError::new(ApiErrorCode::Internal, e.to_string()))??;
    Ok(json(&outcome))
}

async fn not_found() -> ApiError {
    ApiError::new(ApiErrorCode::NotFound, "no such route")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(ApiErrorCode::MethodNotAllowed, "method not allowed on this route")
}
