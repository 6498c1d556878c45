//! HTTP API over a file store, and the verification request shared with the
//! command line.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/scenarios` | scenario | `{id}` (201) |
//! | GET | `/scenarios/{id}` | | scenario |
//! | GET | `/scenarios/{id}/assumptions` | | assumption list |
//! | POST | `/scenarios/{id}/verify` | [`VerifyRequest`] | [`VerifyResponse`] |
//! | POST | `/scenarios/{id}/table` | `{assumption_sets?}` | `{record_id, table}` (201) |
//! | POST | `/verify` | [`VerifyRequest`] with inline `scenario` | [`VerifyResponse`] |
//! | POST | `/policies/parse` | `{text, scenario_id?}` | `{policy, rendered, spans}` |
//! | POST | `/policies/subsumption` | `{left, right, scenario_id?}` | `{subsumes}` |
//! | POST | `/policies/join` | `{left, right, scenario_id?, mode?}` | `{policy, rendered}`, conditions normalized |
//! | GET | `/records/{id}` | | record |
//!
//! Errors are `{"error": <code>, "message": ..}`: 400 for invalid input
//! (the code names the violated rule), 404 for unknown ids, 422 for joins of
//! incomparable policies.

use std::collections::BTreeMap;
use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{answer, explore, Answer, Query};
use crate::error::{PilotError, Result};
use crate::exec::Event;
use crate::hierarchy::Hierarchies;
use crate::policy::{JoinMode, PilotPolicy};
use crate::scenario::{scenario_from_value, AnalysisRecord, AssumptionSet, PolicySource, Scenario, Store};
use crate::text::{parse_document, parse_policy_unchecked, render_policy};
use crate::timestamp::Timestamp;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyRequest {
    /// Inline scenario; only read by `POST /verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<serde_json::Value>,
    /// Defaults to the scenario's first variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default)]
    pub assumptions: Vec<String>,
    /// Name of a scenario question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    /// Ad-hoc query, used when `question` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<Query>,
    /// Replaces the policies of the named devices, e.g. a candidate policy
    /// for the data subject.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<BTreeMap<String, Vec<PolicySource>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Respect {
    Green,
    Red,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub event: Event,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub query: Query,
    pub variant: Option<String>,
    pub assumptions: Vec<String>,
    pub answer: Answer,
    pub respected: Respect,
    pub witness: Option<Vec<WitnessStep>>,
    pub by_ownership: bool,
    pub states_explored: usize,
    /// The instant at which every witness event happens.
    pub now: Timestamp,
}

/// Answers one question on one variant and assumption selection.
pub fn verify(scenario: &Scenario, req: &VerifyRequest) -> Result<VerifyResponse> {
    let query = match (&req.question, &req.query) {
        (Some(name), _) => scenario.question(name)?.query.clone(),
        (None, Some(q)) => q.clone(),
        (None, None) => {
            return Err(PilotError::invalid(
                "question_or_query",
                "a verify request names a question or carries a query",
            ))
        }
    };
    let variant = match &req.variant {
        Some(v) => Some(scenario.variant(v)?.name.clone()),
        None => scenario.variants.first().map(|v| v.name.clone()),
    };
    let ids: Vec<&str> = req.assumptions.iter().map(String::as_str).collect();
    let (world, init) = scenario
        .instantiate_with(variant.as_deref(), req.policies.as_ref(), &ids)
        .map_err(|e| match e {
            PilotError::Syntax(_) | PilotError::UnknownLabel { .. } | PilotError::Eval(_) => {
                PilotError::invalid("policy_well_formed", e.to_string())
            }
            e => e,
        })?;
    let g = explore(&world, init)?;
    let v = answer(&query, &g, &world)?;
    Ok(VerifyResponse {
        question: req.question.clone(),
        query,
        variant,
        assumptions: req.assumptions.clone(),
        answer: v.answer,
        respected: if v.respected { Respect::Green } else { Respect::Red },
        witness: v.witness.map(|w| {
            w.into_iter()
                .map(|event| WitnessStep {
                    text: event.to_string(),
                    event,
                })
                .collect()
        }),
        by_ownership: v.by_ownership,
        states_explored: v.states_explored,
        now: scenario.now,
    })
}

struct ApiError(PilotError);

impl From<PilotError> for ApiError {
    fn from(e: PilotError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = match &e {
            PilotError::UnknownReference { .. } => StatusCode::NOT_FOUND,
            PilotError::Incomparable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            PilotError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            PilotError::BudgetExceeded { .. } => StatusCode::INSUFFICIENT_STORAGE,
            _ => StatusCode::BAD_REQUEST,
        };
        let mut body = json!({ "error": e.code(), "message": e.to_string() });
        if let PilotError::Syntax(s) = &e {
            body["span"] = json!(s.span);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError(PilotError::invalid("request_body", e.to_string())))
}

#[derive(Clone)]
struct AppState {
    store: Store,
}

pub fn router(store: Store) -> Router {
    Router::new()
        .route("/scenarios", post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/scenarios/{id}/assumptions", get(get_assumptions))
        .route("/scenarios/{id}/verify", post(verify_stored))
        .route("/scenarios/{id}/table", post(run_table))
        .route("/verify", post(verify_inline))
        .route("/policies/parse", post(parse))
        .route("/policies/subsumption", post(subsumption))
        .route("/policies/join", post(join))
        .route("/records/{id}", get(get_record))
        .with_state(AppState { store })
}

pub async fn serve(addr: SocketAddr, store: Store) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}

async fn create_scenario(State(s): State<AppState>, bytes: Bytes) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let scenario = scenario_from_value(body(&bytes)?)?;
    let (id, _) = s.store.put_scenario(&scenario)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn get_scenario(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Scenario>> {
    Ok(Json(s.store.get_scenario(&id)?))
}

async fn get_assumptions(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    Ok(Json(json!(s.store.get_scenario(&id)?.assumptions)))
}

async fn verify_stored(
    State(s): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Json<VerifyResponse>> {
    let scenario = s.store.get_scenario(&id)?;
    let req: VerifyRequest = body(&bytes)?;
    Ok(Json(run_blocking(move || verify(&scenario, &req)).await?))
}

async fn verify_inline(bytes: Bytes) -> ApiResult<Json<VerifyResponse>> {
    let req: VerifyRequest = body(&bytes)?;
    let value = req
        .scenario
        .clone()
        .ok_or_else(|| PilotError::invalid("request_body", "missing inline `scenario`"))?;
    let scenario = scenario_from_value(value)?;
    Ok(Json(run_blocking(move || verify(&scenario, &req)).await?))
}

#[derive(Deserialize)]
struct TableRequest {
    #[serde(default)]
    assumption_sets: Option<Vec<AssumptionSet>>,
}

async fn run_table(
    State(s): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let scenario = s.store.get_scenario(&id)?;
    let req: TableRequest = if bytes.is_empty() {
        TableRequest { assumption_sets: None }
    } else {
        body(&bytes)?
    };
    let record = run_blocking(move || AnalysisRecord::run(&scenario, req.assumption_sets.as_deref())).await?;
    let (record_id, _) = s.store.put_record(&record)?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "record_id": record_id, "table": record.table })),
    ))
}

async fn get_record(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AnalysisRecord>> {
    Ok(Json(s.store.get_record(&id)?))
}

async fn run_blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(PilotError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

fn hierarchies_for(store: &Store, scenario_id: Option<&str>, policies: &[&PilotPolicy]) -> Result<Hierarchies> {
    match scenario_id {
        Some(id) => Ok(store.get_scenario(id)?.hierarchies),
        None => Ok(Hierarchies::covering(policies.iter().copied())),
    }
}

/// Parses a policy source without hierarchies, for label collection.
fn unchecked(src: &PolicySource) -> Result<PilotPolicy> {
    match src {
        PolicySource::Text(t) => Ok(parse_policy_unchecked(t)?.policy),
        PolicySource::Structured(p) => Ok(p.clone()),
    }
}

#[derive(Deserialize)]
struct ParseRequest {
    text: String,
    #[serde(default)]
    scenario_id: Option<String>,
}

async fn parse(State(s): State<AppState>, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: ParseRequest = body(&bytes)?;
    let doc = match &req.scenario_id {
        Some(id) => parse_document(&req.text, &s.store.get_scenario(id)?.hierarchies)?,
        None => parse_policy_unchecked(&req.text).map_err(PilotError::from)?,
    };
    Ok(Json(json!({
        "policy": doc.policy,
        "rendered": render_policy(&doc.policy),
        "spans": doc.spans,
    })))
}

#[derive(Deserialize)]
struct PairRequest {
    left: PolicySource,
    right: PolicySource,
    #[serde(default)]
    scenario_id: Option<String>,
    #[serde(default)]
    mode: JoinMode,
}

fn resolve_pair(store: &Store, req: &PairRequest) -> Result<(PilotPolicy, PilotPolicy, Hierarchies)> {
    let (l, r) = (unchecked(&req.left)?, unchecked(&req.right)?);
    let hs = hierarchies_for(store, req.scenario_id.as_deref(), &[&l, &r])?;
    Ok((req.left.resolve(&hs)?, req.right.resolve(&hs)?, hs))
}

async fn subsumption(State(s): State<AppState>, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: PairRequest = body(&bytes)?;
    let (l, r, hs) = resolve_pair(&s.store, &req)?;
    Ok(Json(json!({ "subsumes": l.subsumes(&r, &hs)? })))
}

async fn join(State(s): State<AppState>, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: PairRequest = body(&bytes)?;
    let (l, r, hs) = resolve_pair(&s.store, &req)?;
    let j = l.join_with(&r, &hs, req.mode)?.normalized();
    Ok(Json(json!({ "rendered": render_policy(&j), "policy": j })))
}
