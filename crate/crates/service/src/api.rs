use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use enrollcast::data_io::to_sorted_json;
use enrollcast::{forecast, summarize_forecast, Error, ForecastSummary, Scenario, ScenarioDraft};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::state::ServiceState;
use crate::{parse_origin, ServeError, ServiceConfig};

#[derive(Clone)]
struct App {
    state: ServiceState,
    max_replicates: usize,
}

pub fn router(state: ServiceState, config: &ServiceConfig) -> Result<Router, ServeError> {
    let app = App {
        state,
        max_replicates: config.max_replicates,
    };
    let mut router = Router::new()
        .route("/api/forecast", post(forecast_handler))
        .route("/api/countries", get(countries))
        .route("/api/accrual-model", get(accrual_model))
        .route("/healthz", get(healthz))
        .with_state(app);
    if let Some(origin) = &config.cors_origin {
        router = router.layer(
            CorsLayer::new()
                .allow_origin(parse_origin(origin)?)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(router)
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn serialized<T: serde::Serialize>(status: StatusCode, value: &T) -> Response {
    match to_sorted_json(value) {
        Ok(body) => json_response(status, body),
        Err(e) => ApiError::internal(e.to_string()).into_response(),
    }
}

/// Error body: `{"error": kind, "field": name or null, "message": text}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub field: Option<String>,
    pub message: String,
}

impl ApiError {
    fn unavailable() -> Self {
        Self {
            status: StatusCode::SERVICE_UNAVAILABLE,
            kind: "loading",
            field: None,
            message: "history is still loading".into(),
        }
    }

    fn internal(message: String) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            field: None,
            message,
        }
    }

    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            kind: "invalid_scenario",
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Invalid { .. } | Error::MissingProfiles(_) => {
                Self::invalid(e.field().unwrap_or_default(), e.to_string())
            }
            _ => Self::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": self.kind,
            "field": self.field,
            "message": self.message,
        });
        json_response(self.status, format!("{body:#}\n"))
    }
}

async fn healthz(State(app): State<App>) -> Response {
    match app.state.history() {
        Some(_) => json_response(StatusCode::OK, format!("{:#}\n", json!({"status": "ready"}))),
        None => json_response(
            StatusCode::SERVICE_UNAVAILABLE,
            format!("{:#}\n", json!({"status": "loading"})),
        ),
    }
}

async fn countries(State(app): State<App>) -> Result<Response, ApiError> {
    let history = app.state.history().ok_or_else(ApiError::unavailable)?;
    Ok(serialized(StatusCode::OK, &history.profiles()))
}

async fn accrual_model(State(app): State<App>) -> Result<Response, ApiError> {
    let history = app.state.history().ok_or_else(ApiError::unavailable)?;
    Ok(serialized(StatusCode::OK, history.model()))
}

fn parse_scenario(body: &[u8], max_replicates: usize) -> Result<Scenario, ApiError> {
    let draft: ScenarioDraft = serde_json::from_slice(body).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        kind: "malformed_json",
        field: None,
        message: e.to_string(),
    })?;
    let scenario = Scenario::try_from(draft)?;
    if scenario.replicates() > max_replicates {
        return Err(ApiError::invalid(
            "replicates",
            format!(
                "at most {max_replicates} replicates per request, got {}",
                scenario.replicates()
            ),
        ));
    }
    Ok(scenario)
}

async fn forecast_handler(State(app): State<App>, body: Bytes) -> Result<Response, ApiError> {
    let history = app.state.history().ok_or_else(ApiError::unavailable)?;
    let scenario = parse_scenario(&body, app.max_replicates)?;
    let summary: ForecastSummary = tokio::task::spawn_blocking(move || {
        let run = forecast(&scenario, history.profiles(), history.model())?;
        summarize_forecast(&run.replicates, scenario.pi_level())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;

    if summary.censored_fraction > 0.5 {
        let message = format!(
            "{:.1}% of replicates did not reach the target within the horizon",
            summary.censored_fraction * 100.0
        );
        let body = json!({
            "error": "majority_censored",
            "message": message,
            "censored_fraction": summary.censored_fraction,
            "summary": summary,
        });
        return Ok(serialized(StatusCode::UNPROCESSABLE_ENTITY, &body));
    }
    Ok(serialized(StatusCode::OK, &summary))
}
