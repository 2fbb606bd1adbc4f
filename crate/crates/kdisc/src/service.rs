//! HTTP service under `/v1`.
//!
//! Callers authenticate with `Authorization: Bearer <token>`; tokens map to
//! user ids in the service config. Each project has members with one of
//! three privileges: viewers read, annotators also edit annotations, owners
//! also ingest, train, configure and manage members.
//!
//! State lives under `data_dir`: `store.json` holds projects, jobs and the
//! audit log, and `projects/<id>/` holds
//!
//! ```text
//! corpus.jsonl
//! schema.json
//! annotations/<layer>/<doc_id>.json
//! models/<version>/{ner,rc}.json
//! graph.tsv
//! index.tsv
//! ```
//!
//! Files are replaced atomically, so reads take no locks. Synchronous
//! mutations take the project's writer lock without waiting and answer 409
//! when it is held. Jobs run on a fixed pool of worker threads and block on
//! the same lock, so one mutation job per project runs at a time. The graph
//! is rebuilt from the `working` annotation layer after every change to it;
//! the index is rebuilt after every ingest.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kdisc_core::annotation::{
    apply_revision, check_against_document, parse_standoff, serialize_standoff, validate, AnnotationSet, Edit,
    Provenance,
};
use kdisc_core::corpus::{CharSpan, Corpus, HeuristicTagger};
use kdisc_core::graph::{build_graph, query_triples, subgraph_for_paragraphs, PropertyGraph, TripleFilter};
use kdisc_core::ner::{NerHyper, NerModel};
use kdisc_core::ontology::{OntologySchema, SchemaConfig};
use kdisc_core::qa::{EchoBackend, ExtractiveMock, GenParams, GenerationBackend, PromptTemplates, QaErrorKind, Question};
use kdisc_core::rc::train_rc;
use kdisc_core::retrieval::{index_paragraphs, Embedder, HashingEmbedder, VectorIndex};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::{HttpBackend, HttpBackendConfig};
use crate::formats;
use crate::gazetteer::{parse_rules, Gazetteer};
use crate::ingest::Format;
use crate::pipeline;

pub const WORKING_LAYER: &str = "working";
const MAX_BODY: usize = 64 << 20;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GenerationConfig {
    #[default]
    Mock,
    Echo,
    Http(HttpBackendConfig),
}

impl GenerationConfig {
    fn backend(&self) -> Box<dyn GenerationBackend> {
        match self {
            GenerationConfig::Mock => Box::new(ExtractiveMock),
            GenerationConfig::Echo => Box::new(EchoBackend),
            GenerationConfig::Http(c) => Box::new(HttpBackend::new(c.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    /// Bearer token to user id.
    pub tokens: BTreeMap<String, String>,
    pub data_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub generation: GenerationConfig,
}

fn default_workers() -> usize {
    2
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Privilege {
    Viewer,
    Annotator,
    Owner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub user_id: String,
    pub privilege: Privilege,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub version: String,
    pub layer: String,
    pub documents: Vec<String>,
    pub created_by: String,
    pub created_at: u64,
    pub ner_ready: bool,
    pub rc_ready: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub name: String,
    pub members: Vec<Member>,
    pub models: Vec<ModelVersion>,
    pub created_by: String,
    pub created_at: u64,
}

impl Project {
    fn privilege(&self, user: &str) -> Option<Privilege> {
        self.members.iter().find(|m| m.user_id == user).map(|m| m.privilege)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Ingest,
    TrainNer,
    TrainRc,
    AutoAnnotate,
    BuildGraph,
    BuildIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn can_move_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running) | (JobState::Running, JobState::Done | JobState::Failed)
        )
    }

    pub fn is_final(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub project_id: String,
    pub kind: JobKind,
    pub state: JobState,
    pub log: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
    pub created_by: String,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: u64,
    pub user_id: String,
    pub project_id: String,
    pub action: String,
    pub target: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Store {
    next_id: u64,
    projects: BTreeMap<String, Project>,
    jobs: BTreeMap<String, JobRecord>,
    audit: Vec<AuditEntry>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Error response body: `{"code", "message", "details"}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    fn unauthenticated() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthenticated", "missing or unknown bearer token")
    }

    fn forbidden(need: Privilege) -> Self {
        Self::new(StatusCode::FORBIDDEN, "forbidden", format!("requires {need:?} privilege").to_lowercase())
    }

    fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message, "details": self.details});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn json_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("request body: {e}")))
}

fn check_name(kind: &str, s: &str) -> ApiResult<()> {
    let ok = !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.');
    if ok && !s.starts_with('.') {
        Ok(())
    } else {
        Err(ApiError::invalid(format!("invalid {kind} {s:?}")))
    }
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}

/// On-disk artefacts of one project.
#[derive(Debug, Clone)]
pub struct ProjectDir {
    root: PathBuf,
}

impl ProjectDir {
    fn read(&self, rel: &str) -> ApiResult<Option<String>> {
        match std::fs::read_to_string(self.root.join(rel)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ApiError::internal(e)),
        }
    }

    fn write(&self, rel: &str, text: &str) -> ApiResult<()> {
        write_atomic(&self.root.join(rel), text).map_err(ApiError::internal)
    }

    pub fn corpus(&self) -> ApiResult<Corpus> {
        match self.read("corpus.jsonl")? {
            Some(t) => formats::read_corpus(&t).map_err(ApiError::internal),
            None => Ok(Corpus::default()),
        }
    }

    pub fn schema(&self) -> ApiResult<OntologySchema> {
        match self.read("schema.json")? {
            Some(t) => formats::read_schema(&t).map_err(ApiError::internal),
            None => OntologySchema::load(SchemaConfig::default()).map_err(ApiError::internal),
        }
    }

    fn annotation_path(layer: &str, doc_id: &str) -> String {
        format!("annotations/{layer}/{doc_id}.json")
    }

    pub fn annotations(&self, layer: &str, doc_id: &str) -> ApiResult<AnnotationSet> {
        match self.read(&Self::annotation_path(layer, doc_id))? {
            Some(t) => serde_json::from_str(&t).map_err(ApiError::internal),
            None => Ok(AnnotationSet::new(doc_id)),
        }
    }

    fn save_annotations(&self, layer: &str, set: &AnnotationSet) -> ApiResult<()> {
        let text = serde_json::to_string(set).map_err(ApiError::internal)?;
        self.write(&Self::annotation_path(layer, &set.doc_id), &text)
    }

    /// Non-empty sets of `layer` for the given documents, in that order.
    fn layer_sets(&self, layer: &str, doc_ids: &[String]) -> ApiResult<Vec<AnnotationSet>> {
        let mut out = Vec::new();
        for id in doc_ids {
            let set = self.annotations(layer, id)?;
            if !set.is_empty() {
                out.push(set);
            }
        }
        Ok(out)
    }

    pub fn graph(&self) -> ApiResult<PropertyGraph> {
        match self.read("graph.tsv")? {
            Some(t) => formats::read_graph(&t).map_err(ApiError::internal),
            None => Ok(PropertyGraph::new()),
        }
    }

    pub fn index(&self, embedder: &dyn Embedder) -> ApiResult<VectorIndex> {
        match self.read("index.tsv")? {
            Some(t) => formats::read_index(&t).map_err(ApiError::internal),
            None => Ok(VectorIndex::new(embedder.embedder_id(), embedder.dimension())),
        }
    }

    fn rebuild_graph(&self) -> ApiResult<PropertyGraph> {
        let corpus = self.corpus()?;
        let ids: Vec<String> = corpus.documents.iter().map(|d| d.doc_id.clone()).collect();
        let sets = self.layer_sets(WORKING_LAYER, &ids)?;
        let g = build_graph(&corpus.documents, &sets).map_err(ApiError::internal)?;
        self.write("graph.tsv", &formats::write_graph(&g))?;
        Ok(g)
    }

    fn rebuild_index(&self) -> ApiResult<VectorIndex> {
        let idx = index_paragraphs(&self.corpus()?, &HashingEmbedder::default());
        self.write("index.tsv", &formats::write_index(&idx))?;
        Ok(idx)
    }

    fn model_path(version: &str, which: &str) -> String {
        format!("models/{version}/{which}.json")
    }
}

type Task = Box<dyn FnOnce() + Send>;
type Step = Box<dyn FnOnce(&ProjectDir) -> Result<(String, Value), String> + Send>;

struct Inner {
    config: ServiceConfig,
    store: Mutex<Store>,
    locks: Mutex<HashMap<String, Arc<RwLock<()>>>>,
    queue: Mutex<mpsc::Sender<Task>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Loads `store.json` from the data directory and starts the workers.
    pub fn open(config: ServiceConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(&config.data_dir)?;
        let store = match std::fs::read_to_string(config.data_dir.join("store.json")) {
            Ok(t) => serde_json::from_str(&t).map_err(std::io::Error::other)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Store::default(),
            Err(e) => return Err(e),
        };
        let (tx, rx) = mpsc::channel::<Task>();
        let rx = Arc::new(Mutex::new(rx));
        for _ in 0..config.workers.max(1) {
            let rx = rx.clone();
            std::thread::spawn(move || loop {
                let task = match rx.lock() {
                    Ok(r) => r.recv(),
                    Err(_) => return,
                };
                match task {
                    Ok(t) => t(),
                    Err(_) => return,
                }
            });
        }
        let inner = Inner {
            config,
            store: Mutex::new(store),
            locks: Mutex::new(HashMap::new()),
            queue: Mutex::new(tx),
        };
        Ok(Self(Arc::new(inner)))
    }

    fn user(&self, headers: &HeaderMap) -> ApiResult<String> {
        let value = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(ApiError::unauthenticated)?;
        let token = value.strip_prefix("Bearer ").ok_or_else(ApiError::unauthenticated)?;
        self.0.config.tokens.get(token.trim()).cloned().ok_or_else(ApiError::unauthenticated)
    }

    fn dir(&self, project_id: &str) -> ProjectDir {
        ProjectDir {
            root: self.0.config.data_dir.join("projects").join(project_id),
        }
    }

    fn lock(&self, project_id: &str) -> Arc<RwLock<()>> {
        let mut locks = self.0.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(project_id.to_string()).or_default().clone()
    }

    fn with_store<T>(&self, f: impl FnOnce(&mut Store) -> ApiResult<T>) -> ApiResult<T> {
        let mut store = self.0.store.lock().unwrap_or_else(|e| e.into_inner());
        let out = f(&mut store)?;
        let text = serde_json::to_string_pretty(&*store).map_err(ApiError::internal)?;
        write_atomic(&self.0.config.data_dir.join("store.json"), &text).map_err(ApiError::internal)?;
        Ok(out)
    }

    fn read_store<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.0.store.lock().unwrap_or_else(|e| e.into_inner()))
    }

    /// The project, if `user` holds at least `need` on it.
    fn authorize(&self, user: &str, project_id: &str, need: Privilege) -> ApiResult<Project> {
        let project = self
            .read_store(|s| s.projects.get(project_id).cloned())
            .ok_or_else(|| ApiError::not_found(format!("project {project_id}")))?;
        match project.privilege(user) {
            Some(p) if p >= need => Ok(project),
            _ => Err(ApiError::forbidden(need)),
        }
    }

    fn audit(&self, user: &str, project_id: &str, action: &str, target: &str) -> ApiResult<()> {
        self.with_store(|s| {
            s.audit.push(AuditEntry {
                at: now(),
                user_id: user.to_string(),
                project_id: project_id.to_string(),
                action: action.to_string(),
                target: target.to_string(),
            });
            Ok(())
        })
    }

    fn update_job(&self, job_id: &str, next: JobState, log: &str, result: Value) {
        let _ = self.with_store(|s| {
            if let Some(job) = s.jobs.get_mut(job_id) {
                if job.state.can_move_to(next) {
                    job.state = next;
                    job.log.push_str(log);
                    if !result.is_null() {
                        job.result = result;
                    }
                    job.updated_at = now();
                }
            }
            Ok(())
        });
    }

    /// Queues one job per step. The steps run in order on one worker under
    /// the project's writer lock; after a failure the rest fail unrun.
    fn submit(&self, user: &str, project_id: &str, steps: Vec<(JobKind, Step)>) -> ApiResult<Vec<JobRecord>> {
        let records = self.with_store(|s| {
            let mut out = Vec::new();
            for (kind, _) in &steps {
                s.next_id += 1;
                let t = now();
                let job = JobRecord {
                    job_id: format!("j{}", s.next_id),
                    project_id: project_id.to_string(),
                    kind: *kind,
                    state: JobState::Queued,
                    log: String::new(),
                    result: Value::Null,
                    created_by: user.to_string(),
                    created_at: t,
                    updated_at: t,
                };
                s.jobs.insert(job.job_id.clone(), job.clone());
                out.push(job);
            }
            Ok(out)
        })?;
        let ids: Vec<String> = records.iter().map(|j| j.job_id.clone()).collect();
        for (id, (kind, _)) in ids.iter().zip(&steps) {
            self.audit(user, project_id, "job", &format!("{id} {kind:?}"))?;
        }
        let app = self.clone();
        let dir = self.dir(project_id);
        let lock = self.lock(project_id);
        let task: Task = Box::new(move || {
            let guard = lock.write().unwrap_or_else(|e| e.into_inner());
            let mut failed = false;
            // the last outcome is published after the lock is released, so a
            // client that sees it finished can write to the project at once
            let mut last = None;
            let n = ids.len();
            for (i, (id, (_, step))) in ids.iter().zip(steps).enumerate() {
                app.update_job(id, JobState::Running, "", Value::Null);
                let outcome = if failed {
                    (JobState::Failed, "skipped: an earlier job failed\n".to_string(), Value::Null)
                } else {
                    match step(&dir) {
                        Ok((log, result)) => (JobState::Done, log, result),
                        Err(e) => {
                            failed = true;
                            (JobState::Failed, format!("error: {e}\n"), Value::Null)
                        }
                    }
                };
                if i + 1 == n {
                    last = Some((id, outcome));
                } else {
                    app.update_job(id, outcome.0, &outcome.1, outcome.2);
                }
            }
            drop(guard);
            if let Some((id, (state, log, result))) = last {
                app.update_job(id, state, &log, result);
            }
        });
        self.0
            .queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .send(task)
            .map_err(|_| ApiError::internal("worker pool stopped"))?;
        Ok(records)
    }

    fn mark_model(&self, project_id: &str, version: &str, which: JobKind) -> Result<(), String> {
        self.with_store(|s| {
            if let Some(m) = s
                .projects
                .get_mut(project_id)
                .and_then(|p| p.models.iter_mut().find(|m| m.version == version))
            {
                match which {
                    JobKind::TrainNer => m.ner_ready = true,
                    _ => m.rc_ready = true,
                }
            }
            Ok(())
        })
        .map_err(|e| e.message)
    }
}

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/members", post(set_member))
        .route("/projects/{id}/audit", get(get_audit))
        .route("/projects/{id}/documents", post(upload_documents).get(list_documents))
        .route("/projects/{id}/documents/{doc}/paragraphs", get(get_paragraphs))
        .route("/projects/{id}/documents/{doc}/annotations", get(get_annotations).put(put_annotations))
        .route("/projects/{id}/documents/{doc}/revisions", post(post_revision))
        .route("/projects/{id}/schema", get(get_schema).put(put_schema))
        .route("/projects/{id}/train", post(train))
        .route("/projects/{id}/models", get(list_models))
        .route("/projects/{id}/auto-annotate", post(auto_annotate))
        .route("/projects/{id}/evaluate", post(evaluate))
        .route("/projects/{id}/graph/triples", get(graph_triples))
        .route("/projects/{id}/graph/subgraph", get(graph_subgraph))
        .route("/projects/{id}/graph/rebuild", post(rebuild_graph))
        .route("/projects/{id}/index/rebuild", post(rebuild_index))
        .route("/projects/{id}/ask", post(ask))
        .route("/jobs/{id}", get(get_job))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state);
    Router::new().nest("/v1", v1)
}

/// Serves until interrupted.
pub async fn serve(config: ServiceConfig, addr: &str) -> std::io::Result<()> {
    let app = router(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    name: String,
}

async fn create_project(State(app): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    let req: CreateProject = json_body(&body)?;
    if req.name.trim().is_empty() {
        return Err(ApiError::invalid("project name is empty"));
    }
    let project = app.with_store(|s| {
        if s.projects.values().any(|p| p.created_by == user && p.name == req.name) {
            return Err(ApiError::conflict(format!("you already have a project named {:?}", req.name)));
        }
        s.next_id += 1;
        let p = Project {
            project_id: format!("p{}", s.next_id),
            name: req.name.clone(),
            members: vec![Member {
                user_id: user.clone(),
                privilege: Privilege::Owner,
            }],
            models: Vec::new(),
            created_by: user.clone(),
            created_at: now(),
        };
        s.projects.insert(p.project_id.clone(), p.clone());
        Ok(p)
    })?;
    app.audit(&user, &project.project_id, "create_project", &project.name)?;
    Ok((StatusCode::CREATED, Json(project)).into_response())
}

async fn list_projects(State(app): State<AppState>, headers: HeaderMap) -> ApiResult<Json<Vec<Project>>> {
    let user = app.user(&headers)?;
    Ok(Json(app.read_store(|s| {
        s.projects.values().filter(|p| p.privilege(&user).is_some()).cloned().collect()
    })))
}

async fn get_project(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Project>> {
    let user = app.user(&headers)?;
    Ok(Json(app.authorize(&user, &id, Privilege::Viewer)?))
}

async fn set_member(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Project>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Owner)?;
    let member: Member = json_body(&body)?;
    if member.user_id.is_empty() {
        return Err(ApiError::invalid("user_id is empty"));
    }
    let project = app.with_store(|s| {
        let p = s.projects.get_mut(&id).ok_or_else(|| ApiError::not_found(format!("project {id}")))?;
        let mut members = p.members.clone();
        match members.iter_mut().find(|m| m.user_id == member.user_id) {
            Some(m) => m.privilege = member.privilege,
            None => members.push(member.clone()),
        }
        if !members.iter().any(|m| m.privilege == Privilege::Owner) {
            return Err(ApiError::invalid("a project needs at least one owner"));
        }
        p.members = members;
        Ok(p.clone())
    })?;
    app.audit(&user, &id, "set_member", &format!("{} {:?}", member.user_id, member.privilege))?;
    Ok(Json(project))
}

async fn get_audit(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<AuditEntry>>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    Ok(Json(app.read_store(|s| s.audit.iter().filter(|a| a.project_id == id).cloned().collect())))
}

async fn upload_documents(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Owner)?;
    if body.is_empty() {
        return Err(ApiError::invalid("empty upload"));
    }
    let format = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(Format::from_content_type);
    let payload = body.to_vec();
    let step: Step = Box::new(move |dir: &ProjectDir| {
        let (docs, failures) = pipeline::ingest_payloads(vec![("upload".into(), format, payload)], &HeuristicTagger);
        let mut log: String = failures.iter().map(|f| format!("error: {f}\n")).collect();
        if docs.is_empty() {
            return Err(format!("no document ingested\n{log}"));
        }
        let mut corpus = dir.corpus().map_err(|e| e.message)?;
        let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
        for d in docs {
            log.push_str(&format!("ingested {} ({} paragraphs)\n", d.doc_id, d.paragraphs.len()));
            corpus.upsert(d);
        }
        dir.write("corpus.jsonl", &formats::write_corpus(&corpus)).map_err(|e| e.message)?;
        dir.rebuild_graph().map_err(|e| e.message)?;
        dir.rebuild_index().map_err(|e| e.message)?;
        Ok((log, json!({"documents": ids, "failures": failures.len()})))
    });
    let jobs = app.submit(&user, &id, vec![(JobKind::Ingest, step)])?;
    Ok((StatusCode::ACCEPTED, Json(&jobs[0])).into_response())
}

#[derive(Serialize)]
struct DocumentSummary {
    doc_id: String,
    title: String,
    paragraphs: usize,
}

async fn list_documents(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<DocumentSummary>>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    let corpus = app.dir(&id).corpus()?;
    Ok(Json(
        corpus
            .documents
            .iter()
            .map(|d| DocumentSummary {
                doc_id: d.doc_id.clone(),
                title: d.metadata.title.clone(),
                paragraphs: d.paragraphs.len(),
            })
            .collect(),
    ))
}

fn find_document(corpus: &Corpus, doc: &str) -> ApiResult<kdisc_core::corpus::Document> {
    corpus.document(doc).cloned().ok_or_else(|| ApiError::not_found(format!("document {doc}")))
}

async fn get_paragraphs(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath((id, doc)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    let d = find_document(&app.dir(&id).corpus()?, &doc)?;
    Ok(Json(d.paragraphs).into_response())
}

async fn get_schema(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<SchemaConfig>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    Ok(Json(app.dir(&id).schema()?.to_config()))
}

async fn put_schema(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<SchemaConfig>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Owner)?;
    let config: SchemaConfig = json_body(&body)?;
    let schema = OntologySchema::load(config).map_err(|e| ApiError::invalid(e.to_string()))?;
    let lock = app.lock(&id);
    let _guard = lock.try_write().map_err(|_| ApiError::conflict("project is busy"))?;
    app.dir(&id).write("schema.json", &formats::write_schema(&schema))?;
    app.audit(&user, &id, "put_schema", "")?;
    Ok(Json(schema.to_config()))
}

#[derive(Deserialize)]
struct AnnotationQuery {
    layer: Option<String>,
    para: Option<String>,
    format: Option<String>,
}

impl AnnotationQuery {
    fn layer(&self) -> ApiResult<String> {
        let layer = self.layer.clone().unwrap_or_else(|| WORKING_LAYER.to_string());
        check_name("layer", &layer)?;
        Ok(layer)
    }

    fn standoff(&self, headers: &HeaderMap) -> bool {
        match self.format.as_deref() {
            Some(f) => f == "standoff",
            None => headers
                .get(header::CONTENT_TYPE)
                .or_else(|| headers.get(header::ACCEPT))
                .and_then(|v| v.to_str().ok())
                .is_some_and(|v| v.starts_with("text/plain")),
        }
    }
}

async fn get_annotations(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath((id, doc)): UrlPath<(String, String)>,
    Query(q): Query<AnnotationQuery>,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    let dir = app.dir(&id);
    let d = find_document(&dir.corpus()?, &doc)?;
    let set = dir.annotations(&q.layer()?, &doc)?;
    if !q.standoff(&headers) {
        return Ok(Json(set).into_response());
    }
    let para = q.para.as_deref().ok_or_else(|| ApiError::invalid("standoff needs ?para="))?;
    d.paragraph(para).ok_or_else(|| ApiError::not_found(format!("paragraph {para}")))?;
    let text = set.split_by_paragraph().get(para).map(serialize_standoff).unwrap_or_default();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

/// `existing` with paragraph `para_id` replaced by `fresh`.
fn replace_paragraph(existing: &AnnotationSet, para_id: &str, fresh: &AnnotationSet) -> AnnotationSet {
    let mut out = existing.canonicalize();
    let dropped: Vec<String> = out
        .entities
        .iter()
        .filter(|e| e.para_id == para_id)
        .map(|e| e.ann_id.clone())
        .collect();
    out.entities.retain(|e| e.para_id != para_id);
    out.relations.retain(|r| !dropped.contains(&r.arg1) && !dropped.contains(&r.arg2));
    let base = out.entities.len() + out.relations.len();
    let renamed = |id: &str| format!("{}{}", &id[..1], base + id[1..].parse::<usize>().unwrap_or(0));
    for e in &fresh.entities {
        let mut e = e.clone();
        e.ann_id = renamed(&e.ann_id);
        out.entities.push(e);
    }
    for r in &fresh.relations {
        let mut r = r.clone();
        r.ann_id = renamed(&r.ann_id);
        r.arg1 = renamed(&r.arg1);
        r.arg2 = renamed(&r.arg2);
        out.relations.push(r);
    }
    out
}

type EntityKey = (String, CharSpan, String);

fn entity_keys(set: &AnnotationSet) -> BTreeMap<&str, EntityKey> {
    set.entities
        .iter()
        .map(|e| (e.ann_id.as_str(), (e.para_id.clone(), e.span, e.entity_type.clone())))
        .collect()
}

/// Annotations also present in `old` (same paragraph, span and type; for
/// relations, same endpoints and name) keep their provenance; the rest
/// become `human`.
fn assign_provenance(old: &AnnotationSet, new: &mut AnnotationSet) {
    let old_keys = entity_keys(old);
    let old_entities: BTreeMap<&EntityKey, Provenance> =
        old.entities.iter().map(|e| (&old_keys[e.ann_id.as_str()], e.provenance)).collect();
    let old_relations: BTreeMap<(&EntityKey, &str, &EntityKey), Provenance> = old
        .relations
        .iter()
        .filter_map(|r| {
            Some(((old_keys.get(r.arg1.as_str())?, r.relation_type.as_str(), old_keys.get(r.arg2.as_str())?), r.provenance))
        })
        .collect();
    let new_keys: BTreeMap<String, EntityKey> =
        entity_keys(new).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    for e in &mut new.entities {
        e.provenance = old_entities.get(&new_keys[&e.ann_id]).copied().unwrap_or(Provenance::Human);
    }
    for r in &mut new.relations {
        let prov = match (new_keys.get(&r.arg1), new_keys.get(&r.arg2)) {
            (Some(a), Some(b)) => old_relations.get(&(a, r.relation_type.as_str(), b)).copied(),
            _ => None,
        };
        r.provenance = prov.unwrap_or(Provenance::Human);
    }
}

fn violations_error(violations: Vec<kdisc_core::annotation::Violation>) -> ApiError {
    ApiError::invalid(format!("{} violation(s)", violations.len())).with(json!({ "violations": violations }))
}

/// Validates, stores and (for the working layer) rebuilds the graph.
fn store_annotations(app: &AppState, id: &str, layer: &str, set: AnnotationSet, doc: &kdisc_core::corpus::Document) -> ApiResult<AnnotationSet> {
    let dir = app.dir(id);
    let mut violations = validate(&set, &dir.schema()?).violations;
    violations.extend(check_against_document(&set, doc).violations);
    if !violations.is_empty() {
        return Err(violations_error(violations));
    }
    let set = set.canonicalize();
    dir.save_annotations(layer, &set)?;
    if layer == WORKING_LAYER {
        dir.rebuild_graph()?;
    }
    Ok(set)
}

async fn put_annotations(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath((id, doc)): UrlPath<(String, String)>,
    Query(q): Query<AnnotationQuery>,
    body: Bytes,
) -> ApiResult<Json<AnnotationSet>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Annotator)?;
    let layer = q.layer()?;
    let dir = app.dir(&id);
    let d = find_document(&dir.corpus()?, &doc)?;
    let lock = app.lock(&id);
    let _guard = lock.try_write().map_err(|_| ApiError::conflict("project is busy"))?;
    let old = dir.annotations(&layer, &doc)?;
    let mut set = if q.standoff(&headers) {
        let para = q.para.as_deref().ok_or_else(|| ApiError::invalid("standoff needs ?para="))?;
        let p = d.paragraph(para).ok_or_else(|| ApiError::not_found(format!("paragraph {para}")))?;
        let text = std::str::from_utf8(&body).map_err(|e| ApiError::invalid(e.to_string()))?;
        let fresh = parse_standoff(text, &p.text, &doc, para).map_err(|e| ApiError::invalid(e.to_string()))?;
        replace_paragraph(&old, para, &fresh)
    } else {
        let set: AnnotationSet = json_body(&body)?;
        if set.doc_id != doc {
            return Err(ApiError::invalid(format!("body is for document {}", set.doc_id)));
        }
        set
    };
    assign_provenance(&old, &mut set);
    let stored = store_annotations(&app, &id, &layer, set, &d)?;
    app.audit(&user, &id, "put_annotations", &format!("{layer}/{doc}"))?;
    Ok(Json(stored))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RevisionRequest {
    #[serde(default)]
    layer: Option<String>,
    edits: Vec<Edit>,
}

async fn post_revision(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath((id, doc)): UrlPath<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<AnnotationSet>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Annotator)?;
    let req: RevisionRequest = json_body(&body)?;
    let layer = req.layer.unwrap_or_else(|| WORKING_LAYER.to_string());
    check_name("layer", &layer)?;
    let dir = app.dir(&id);
    let d = find_document(&dir.corpus()?, &doc)?;
    let lock = app.lock(&id);
    let _guard = lock.try_write().map_err(|_| ApiError::conflict("project is busy"))?;
    let revised = apply_revision(&dir.annotations(&layer, &doc)?, &req.edits)
        .map_err(|e| ApiError::invalid(e.to_string()))?;
    let stored = store_annotations(&app, &id, &layer, revised, &d)?;
    app.audit(&user, &id, "revise_annotations", &format!("{layer}/{doc}"))?;
    Ok(Json(stored))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct HyperBody {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    l2: Option<f64>,
    max_span_len: Option<usize>,
    threshold: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    #[serde(default)]
    documents: Option<Vec<String>>,
    #[serde(default)]
    layer: Option<String>,
    #[serde(default)]
    hyper: Option<HyperBody>,
}

/// Requested documents, checked against the corpus; all when `None`.
fn select_documents(corpus: &Corpus, requested: Option<Vec<String>>) -> ApiResult<Vec<String>> {
    match requested {
        None => Ok(corpus.documents.iter().map(|d| d.doc_id.clone()).collect()),
        Some(ids) => {
            for d in &ids {
                find_document(corpus, d)?;
            }
            Ok(ids)
        }
    }
}

async fn train(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Owner)?;
    let req: TrainRequest = json_body(&body)?;
    let layer = req.layer.unwrap_or_else(|| WORKING_LAYER.to_string());
    check_name("layer", &layer)?;
    let dir = app.dir(&id);
    let documents = select_documents(&dir.corpus()?, req.documents)?;
    let h = req.hyper.unwrap_or_default();
    let d = NerHyper::default();
    let hyper = NerHyper {
        epochs: h.epochs.unwrap_or(d.epochs),
        learning_rate: h.learning_rate.unwrap_or(d.learning_rate),
        l2: h.l2.unwrap_or(d.l2),
        max_span_len: h.max_span_len.unwrap_or(d.max_span_len),
        threshold: h.threshold.unwrap_or(d.threshold),
    };
    let version = app.with_store(|s| {
        let p = s.projects.get_mut(&id).ok_or_else(|| ApiError::not_found(format!("project {id}")))?;
        let version = format!("v{}", p.models.len() + 1);
        p.models.push(ModelVersion {
            version: version.clone(),
            layer: layer.clone(),
            documents: documents.clone(),
            created_by: user.clone(),
            created_at: now(),
            ner_ready: false,
            rc_ready: false,
        });
        Ok(version)
    })?;
    let records = move |dir: &ProjectDir| -> Result<_, String> {
        let corpus = dir.corpus().map_err(|e| e.message)?;
        let sets = dir.layer_sets(&layer, &documents).map_err(|e| e.message)?;
        Ok(pipeline::training_records(&corpus, &sets))
    };
    let records = Arc::new(records);
    let (app1, app2, v1, v2, r1, r2, pid1, pid2) =
        (app.clone(), app.clone(), version.clone(), version.clone(), records.clone(), records, id.clone(), id.clone());
    let ner: Step = Box::new(move |dir: &ProjectDir| {
        let (records, warnings) = r1(dir)?;
        let model = NerModel::train(&records, &hyper).map_err(|e| e.to_string())?;
        dir.write(&ProjectDir::model_path(&v1, "ner"), &formats::write_ner_model(&model))
            .map_err(|e| e.message)?;
        app1.mark_model(&pid1, &v1, JobKind::TrainNer)?;
        let log = format!("{} records, {} export warnings, types {}\n", records.len(), warnings.len(), model.type_list.join(","));
        Ok((log, json!({"version": v1, "types": model.type_list})))
    });
    let rc: Step = Box::new(move |dir: &ProjectDir| {
        let (records, _) = r2(dir)?;
        let schema = dir.schema().map_err(|e| e.message)?;
        let (model, stats) = train_rc(&records, &schema, &hyper.gd()).map_err(|e| e.to_string())?;
        dir.write(&ProjectDir::model_path(&v2, "rc"), &formats::write_rc_model(&model))
            .map_err(|e| e.message)?;
        app2.mark_model(&pid2, &v2, JobKind::TrainRc)?;
        let log = format!("{} pair examples, {} skipped\n", stats.examples, stats.skipped_unknown_label);
        Ok((log, json!({"version": v2, "relations": model.relation_list})))
    });
    let jobs = app.submit(&user, &id, vec![(JobKind::TrainNer, ner), (JobKind::TrainRc, rc)])?;
    Ok((StatusCode::ACCEPTED, Json(json!({"version": version, "jobs": jobs})).into_response()).into_response())
}

async fn list_models(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<ModelVersion>>> {
    let user = app.user(&headers)?;
    Ok(Json(app.authorize(&user, &id, Privilege::Viewer)?.models))
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum AutoMode {
    Model,
    Regex,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AutoAnnotateRequest {
    mode: AutoMode,
    #[serde(default)]
    documents: Option<Vec<String>>,
    #[serde(default)]
    version: Option<String>,
    /// Gazetteer rules, one `<type>\t<regex>\t<cs|ci>` per line.
    #[serde(default)]
    rules: Option<String>,
    #[serde(default)]
    layer: Option<String>,
}

async fn auto_annotate(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    let project = app.authorize(&user, &id, Privilege::Annotator)?;
    let req: AutoAnnotateRequest = json_body(&body)?;
    let layer = req.layer.unwrap_or_else(|| WORKING_LAYER.to_string());
    check_name("layer", &layer)?;
    let dir = app.dir(&id);
    let documents = select_documents(&dir.corpus()?, req.documents)?;
    let schema = dir.schema()?;
    enum Annotator {
        Rules(Gazetteer),
        Models(Box<NerModel>, Box<kdisc_core::rc::RcModel>),
    }
    let annotator = match req.mode {
        AutoMode::Regex => {
            let text = req.rules.ok_or_else(|| ApiError::invalid("regex mode needs rules"))?;
            let rules = parse_rules(&text).map_err(|e| ApiError::invalid(e.to_string()))?;
            let gaz = Gazetteer::new(rules).map_err(|e| ApiError::invalid(e.to_string()))?;
            gaz.check_schema(&schema).map_err(|e| ApiError::invalid(e.to_string()))?;
            Annotator::Rules(gaz)
        }
        AutoMode::Model => {
            let version = match req.version {
                Some(v) => v,
                None => project
                    .models
                    .iter()
                    .rev()
                    .find(|m| m.ner_ready && m.rc_ready)
                    .map(|m| m.version.clone())
                    .ok_or_else(|| ApiError::not_found("trained model"))?,
            };
            check_name("version", &version)?;
            let load = |which: &str| {
                dir.read(&ProjectDir::model_path(&version, which))?
                    .ok_or_else(|| ApiError::not_found(format!("model {version}")))
            };
            let ner = formats::read_ner_model(&load("ner")?).map_err(ApiError::internal)?;
            let rc = formats::read_rc_model(&load("rc")?).map_err(ApiError::internal)?;
            Annotator::Models(Box::new(ner), Box::new(rc))
        }
    };
    let step: Step = Box::new(move |dir: &ProjectDir| {
        let corpus = dir.corpus().map_err(|e| e.message)?;
        let schema = dir.schema().map_err(|e| e.message)?;
        let mut log = String::new();
        for doc_id in &documents {
            let Some(doc) = corpus.document(doc_id) else { continue };
            let fresh = match &annotator {
                Annotator::Rules(g) => g.annotate(doc),
                Annotator::Models(ner, rc) => {
                    kdisc_core::autoann::auto_annotate(doc, ner, rc, &schema).map_err(|e| e.to_string())?
                }
            };
            let existing = dir.annotations(&layer, doc_id).map_err(|e| e.message)?;
            let merged = pipeline::merge_machine_annotations(&existing, &fresh);
            dir.save_annotations(&layer, &merged).map_err(|e| e.message)?;
            log.push_str(&format!(
                "{doc_id}: {} entities, {} relations proposed\n",
                fresh.entities.len(),
                fresh.relations.len()
            ));
        }
        if layer == WORKING_LAYER {
            dir.rebuild_graph().map_err(|e| e.message)?;
        }
        Ok((log, json!({"layer": layer, "documents": documents})))
    });
    let jobs = app.submit(&user, &id, vec![(JobKind::AutoAnnotate, step)])?;
    Ok((StatusCode::ACCEPTED, Json(&jobs[0])).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    pred_layer: String,
    gold_layer: String,
    #[serde(default)]
    documents: Option<Vec<String>>,
}

async fn evaluate(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<kdisc_core::autoann::EvalResult>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    let req: EvaluateRequest = json_body(&body)?;
    check_name("layer", &req.pred_layer)?;
    check_name("layer", &req.gold_layer)?;
    let dir = app.dir(&id);
    let documents = select_documents(&dir.corpus()?, req.documents)?;
    let pred = dir.layer_sets(&req.pred_layer, &documents)?;
    let gold = dir.layer_sets(&req.gold_layer, &documents)?;
    pipeline::evaluate_sets(&pred, &gold).map(Json).map_err(ApiError::internal)
}

async fn graph_triples(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    Query(filter): Query<TripleFilter>,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    Ok(Json(query_triples(&app.dir(&id).graph()?, &filter)).into_response())
}

#[derive(Deserialize)]
struct SubgraphQuery {
    /// Comma-separated paragraph ids.
    paras: String,
}

async fn graph_subgraph(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<SubgraphQuery>,
) -> ApiResult<Json<PropertyGraph>> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    let paras: Vec<String> = q.paras.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
    subgraph_for_paragraphs(&app.dir(&id).graph()?, &paras)
        .map(Json)
        .map_err(|e| ApiError::not_found(e.to_string()))
}

async fn rebuild_graph(State(app): State<AppState>, headers: HeaderMap, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Owner)?;
    let step: Step = Box::new(|dir: &ProjectDir| {
        let g = dir.rebuild_graph().map_err(|e| e.message)?;
        Ok((format!("{} nodes, {} edges\n", g.nodes().len(), g.edges().len()), Value::Null))
    });
    let jobs = app.submit(&user, &id, vec![(JobKind::BuildGraph, step)])?;
    Ok((StatusCode::ACCEPTED, Json(&jobs[0])).into_response())
}

async fn rebuild_index(State(app): State<AppState>, headers: HeaderMap, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Owner)?;
    let step: Step = Box::new(|dir: &ProjectDir| {
        let idx = dir.rebuild_index().map_err(|e| e.message)?;
        Ok((format!("{} paragraphs indexed\n", idx.len()), Value::Null))
    });
    let jobs = app.submit(&user, &id, vec![(JobKind::BuildIndex, step)])?;
    Ok((StatusCode::ACCEPTED, Json(&jobs[0])).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AskRequest {
    question: String,
    #[serde(default)]
    model_id: String,
    #[serde(default)]
    max_tokens: Option<u32>,
    #[serde(default)]
    temperature: Option<f64>,
}

async fn ask(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let user = app.user(&headers)?;
    app.authorize(&user, &id, Privilege::Viewer)?;
    let req: AskRequest = json_body(&body)?;
    let dir = app.dir(&id);
    let generation = app.0.config.generation.clone();
    let project_id = id.clone();
    let result = tokio::task::spawn_blocking(move || -> ApiResult<Response> {
        let embedder = HashingEmbedder::default();
        let corpus = dir.corpus()?;
        let graph = dir.graph()?;
        let index = dir.index(&embedder)?;
        let defaults = GenParams::default();
        let question = Question {
            text: req.question,
            project_id,
            model_id: req.model_id,
            params: GenParams {
                max_tokens: req.max_tokens.unwrap_or(defaults.max_tokens),
                temperature: req.temperature.unwrap_or(defaults.temperature),
            },
        };
        let backend = generation.backend();
        let templates = PromptTemplates::default();
        match pipeline::answer_question(&question, &corpus, &graph, &index, &embedder, &templates, backend.as_ref()) {
            Ok(a) => Ok(Json(a).into_response()),
            Err(e) => {
                let details = json!({ "partial": e.partial });
                Err(match e.kind {
                    QaErrorKind::EmptyQuestion => ApiError::invalid(e.kind.to_string()),
                    QaErrorKind::Backend(_) => {
                        ApiError::new(StatusCode::BAD_GATEWAY, "generation_failed", e.kind.to_string()).with(details)
                    }
                    _ => ApiError::internal(e.kind).with(details),
                })
            }
        }
    })
    .await
    .map_err(ApiError::internal)?;
    result
}

async fn get_job(
    State(app): State<AppState>,
    headers: HeaderMap,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<JobRecord>> {
    let user = app.user(&headers)?;
    let job = app
        .read_store(|s| s.jobs.get(&id).cloned())
        .ok_or_else(|| ApiError::not_found(format!("job {id}")))?;
    app.authorize(&user, &job.project_id, Privilege::Viewer)?;
    Ok(Json(job))
}
