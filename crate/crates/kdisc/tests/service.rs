mod common;

use std::collections::BTreeMap;
use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use common::Variants;
use kdisc::archive::write_archive;
use kdisc::ingest::{ingest, Format};
use kdisc::service::{router, AppState, GenerationConfig, ServiceConfig};
use kdisc::{formats, pipeline};
use kdisc_core::annotation::{serialize_standoff, AnnotationSet, Provenance};
use kdisc_core::corpus::{HeuristicTagger, Paragraph};
use kdisc_core::qa::{Answer, NO_CONTEXT_MESSAGE};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

const OWNER: &str = "tok-olga";
const ANNOTATOR: &str = "tok-ahmed";
const VIEWER: &str = "tok-vera";
const STRANGER: &str = "tok-sam";

struct Harness {
    _dir: TempDir,
    config: ServiceConfig,
    app: Router,
}

fn config(dir: &TempDir) -> ServiceConfig {
    let tokens: BTreeMap<String, String> = [(OWNER, "olga"), (ANNOTATOR, "ahmed"), (VIEWER, "vera"), (STRANGER, "sam")]
        .into_iter()
        .map(|(t, u)| (t.to_string(), u.to_string()))
        .collect();
    ServiceConfig {
        tokens,
        data_dir: dir.path().join("data"),
        workers: 2,
        generation: GenerationConfig::Mock,
    }
}

impl Harness {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = config(&dir);
        let app = router(AppState::open(config.clone()).unwrap());
        Self { _dir: dir, config, app }
    }

    async fn send(&self, method: Method, uri: &str, token: Option<&str>, content_type: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        if !content_type.is_empty() {
            req = req.header(header::CONTENT_TYPE, content_type);
        }
        let res = self.app.clone().oneshot(req.body(Body::from(body)).unwrap()).await.unwrap();
        let status = res.status();
        (status, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec())
    }

    async fn json(&self, method: Method, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        let bytes = if body.is_null() { Vec::new() } else { serde_json::to_vec(&body).unwrap() };
        let (status, out) = self.send(method, uri, Some(token), "application/json", bytes).await;
        let v = if out.is_empty() { Value::Null } else { serde_json::from_slice(&out).unwrap() };
        (status, v)
    }

    async fn get(&self, uri: &str, token: &str) -> (StatusCode, Value) {
        self.json(Method::GET, uri, token, Value::Null).await
    }

    async fn project(&self, name: &str) -> String {
        let (status, p) = self.json(Method::POST, "/v1/projects", OWNER, json!({ "name": name })).await;
        assert_eq!(status, StatusCode::CREATED, "{p}");
        let id = p["project_id"].as_str().unwrap().to_string();
        for (user, privilege) in [("ahmed", "annotator"), ("vera", "viewer")] {
            let (status, _) = self
                .json(Method::POST, &format!("/v1/projects/{id}/members"), OWNER, json!({"user_id": user, "privilege": privilege}))
                .await;
            assert_eq!(status, StatusCode::OK);
        }
        id
    }

    /// Polls a job until it is done or failed.
    async fn wait(&self, job_id: &str) -> Value {
        for _ in 0..600 {
            let (status, job) = self.get(&format!("/v1/jobs/{job_id}"), OWNER).await;
            assert_eq!(status, StatusCode::OK, "{job}");
            if matches!(job["state"].as_str(), Some("done" | "failed")) {
                return job;
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
        panic!("job {job_id} did not finish");
    }

    async fn upload(&self, id: &str, content_type: &str, payload: Vec<u8>) -> Value {
        let (status, out) = self
            .send(Method::POST, &format!("/v1/projects/{id}/documents"), Some(OWNER), content_type, payload)
            .await;
        assert_eq!(status, StatusCode::ACCEPTED, "{}", String::from_utf8_lossy(&out));
        let job: Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(job["state"], "queued");
        let done = self.wait(job["job_id"].as_str().unwrap()).await;
        assert_eq!(done["state"], "done", "{done}");
        done
    }
}

fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(common::fixture_dir().join(name)).unwrap()
}

fn fixture_schema() -> Value {
    serde_json::from_slice(&fixture_bytes("schema.json")).unwrap()
}

#[tokio::test]
async fn authentication_is_required() {
    let h = Harness::new();
    let (status, body) = h.send(Method::GET, "/v1/projects", None, "", Vec::new()).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let body: Value = serde_json::from_slice(&body).unwrap();
    assert!(body["code"].is_string() && body["message"].is_string());
    assert!(body.get("details").is_some());
    let (status, _) = h.get("/v1/projects", "tok-unknown").await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn project_membership_and_privileges() {
    let h = Harness::new();
    let id = h.project("alloys").await;
    let (status, _) = h.json(Method::POST, "/v1/projects", OWNER, json!({"name": "alloys"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = h.json(Method::POST, "/v1/projects", ANNOTATOR, json!({"name": "alloys"})).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = h.json(Method::POST, "/v1/projects", OWNER, json!({"title": "x"})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, listed) = h.get("/v1/projects", VIEWER).await;
    assert_eq!(listed.as_array().unwrap().len(), 1);
    let (status, _) = h.get(&format!("/v1/projects/{id}"), STRANGER).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = h.get("/v1/projects/p999", OWNER).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = h
        .json(Method::POST, &format!("/v1/projects/{id}/members"), ANNOTATOR, json!({"user_id": "sam", "privilege": "viewer"}))
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, err) = h
        .json(Method::POST, &format!("/v1/projects/{id}/members"), OWNER, json!({"user_id": "olga", "privilege": "viewer"}))
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
    let (status, _) = h.json(Method::PUT, &format!("/v1/projects/{id}/schema"), ANNOTATOR, fixture_schema()).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = h.json(Method::POST, &format!("/v1/projects/{id}/train"), ANNOTATOR, json!({})).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn upload_then_paragraphs_match_ingest() {
    let h = Harness::new();
    let id = h.project("tei").await;
    let payload = fixture_bytes("doc5.xml");
    let job = h.upload(&id, "application/tei+xml", payload.clone()).await;
    let expected = ingest(&payload, Format::TeiXml, &HeuristicTagger).unwrap();
    assert_eq!(job["result"]["documents"], json!([expected.doc_id]));
    assert_eq!(job["kind"], "ingest");
    let (status, docs) = h.get(&format!("/v1/projects/{id}/documents"), VIEWER).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(docs, json!([{"doc_id": expected.doc_id, "title": expected.metadata.title, "paragraphs": 1}]));
    let (status, paras) = h.get(&format!("/v1/projects/{id}/documents/{}/paragraphs", expected.doc_id), VIEWER).await;
    assert_eq!(status, StatusCode::OK);
    let paras: Vec<Paragraph> = serde_json::from_value(paras).unwrap();
    assert_eq!(paras, expected.paragraphs);
    let (status, _) = h.get(&format!("/v1/projects/{id}/documents/doc-0000000000000000/paragraphs"), VIEWER).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.send(Method::POST, &format!("/v1/projects/{id}/documents"), Some(VIEWER), "text/plain", b"x".to_vec()).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn archive_upload_ingests_every_entry() {
    let h = Harness::new();
    let id = h.project("zip").await;
    let (a, b) = (fixture_bytes("doc1.txt"), fixture_bytes("doc5.xml"));
    let zip = write_archive(&[("a.txt", &a), ("b.xml", &b), ("notes.md", b"ignored")]).unwrap();
    let job = h.upload(&id, "application/zip", zip).await;
    assert_eq!(job["result"]["documents"].as_array().unwrap().len(), 2);
    let (_, docs) = h.get(&format!("/v1/projects/{id}/documents"), OWNER).await;
    assert_eq!(docs.as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn annotations_round_trip_as_standoff() {
    let h = Harness::new();
    let id = h.project("ann").await;
    let (status, _) = h.json(Method::PUT, &format!("/v1/projects/{id}/schema"), OWNER, fixture_schema()).await;
    assert_eq!(status, StatusCode::OK);
    let payload = fixture_bytes("doc1.txt");
    h.upload(&id, "text/plain", payload.clone()).await;
    let doc = ingest(&payload, Format::PlainText, &HeuristicTagger).unwrap();
    let para = &doc.paragraphs[0].para_id;
    let uri = format!("/v1/projects/{id}/documents/{}/annotations?para={para}&format=standoff", doc.doc_id);
    let ann = fixture_bytes("doc1.ann");

    let (status, _) = h.send(Method::PUT, &uri, Some(VIEWER), "text/plain", ann.clone()).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, stored) = h.send(Method::PUT, &uri, Some(ANNOTATOR), "text/plain", ann.clone()).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&stored));
    let stored: AnnotationSet = serde_json::from_slice(&stored).unwrap();
    assert!(stored.entities.iter().all(|e| e.provenance == Provenance::Human));
    let (status, text) = h.send(Method::GET, &uri, Some(VIEWER), "", Vec::new()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(String::from_utf8(text).unwrap(), String::from_utf8(ann).unwrap());
    assert_eq!(serialize_standoff(&stored), String::from_utf8(fixture_bytes("doc1.ann")).unwrap());

    let (_, triples) = h.get(&format!("/v1/projects/{id}/graph/triples?relation=affects"), VIEWER).await;
    assert_eq!(triples.as_array().unwrap().len(), 2);
    let (_, sub) = h.get(&format!("/v1/projects/{id}/graph/subgraph?paras={para}"), VIEWER).await;
    assert_eq!(sub["nodes"].as_array().unwrap().len(), 9);

    // MATERIAL affects PROPERTY is not licensed
    let bad = "T1\tMATERIAL 18 27\tTi-6Al-4V\nT2\tPROPERTY 51 67\tfatigue strength\nR1\taffects Arg1:T1 Arg2:T2\n";
    let (status, err) = h.send(Method::PUT, &uri, Some(ANNOTATOR), "text/plain", bad.as_bytes().to_vec()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let err: Value = serde_json::from_slice(&err).unwrap();
    assert_eq!(err["details"]["violations"].as_array().unwrap().len(), 1);
    let wrong_surface = "T1\tMATERIAL 18 27\tTi-6Al-4X\n";
    let (status, _) = h.send(Method::PUT, &uri, Some(ANNOTATOR), "text/plain", wrong_surface.as_bytes().to_vec()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let rev = json!({"edits": [{"op": "delete", "ann_id": "T1"}]});
    let (status, revised) = h
        .json(Method::POST, &format!("/v1/projects/{id}/documents/{}/revisions", doc.doc_id), ANNOTATOR, rev)
        .await;
    assert_eq!(status, StatusCode::OK, "{revised}");
    let revised: AnnotationSet = serde_json::from_value(revised).unwrap();
    assert_eq!((revised.entities.len(), revised.relations.len()), (4, 1));

    let (_, audit) = h.get(&format!("/v1/projects/{id}/audit"), VIEWER).await;
    let actions: Vec<(&str, &str)> = audit
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["user_id"].as_str().unwrap(), a["action"].as_str().unwrap()))
        .collect();
    assert!(actions.contains(&("olga", "put_schema")));
    assert!(actions.contains(&("ahmed", "put_annotations")));
    assert!(actions.contains(&("ahmed", "revise_annotations")));
    assert!(audit.as_array().unwrap().iter().all(|a| a["at"].as_u64().unwrap() > 0));
}

#[tokio::test]
async fn ask_on_empty_project_has_no_context() {
    let h = Harness::new();
    let id = h.project("empty").await;
    let (status, answer) = h.json(Method::POST, &format!("/v1/projects/{id}/ask"), VIEWER, json!({"question": "What is Ti-6Al-4V?"})).await;
    assert_eq!(status, StatusCode::OK, "{answer}");
    let answer: Answer = serde_json::from_value(answer).unwrap();
    assert!(answer.contexts.is_empty());
    assert_eq!(answer.summary, NO_CONTEXT_MESSAGE);
    let (status, _) = h.json(Method::POST, &format!("/v1/projects/{id}/ask"), VIEWER, json!({"question": "  "})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn ask_matches_cli_transcript() {
    let h = Harness::new();
    let id = h.project("qa").await;
    h.json(Method::PUT, &format!("/v1/projects/{id}/schema"), OWNER, fixture_schema()).await;
    let (corpus, sets) = common::qa_fixture();
    for name in common::FIXTURE_DOCS {
        let ct = if name.ends_with(".xml") { "application/xml" } else { "text/plain" };
        h.upload(&id, ct, fixture_bytes(name)).await;
    }
    for set in &sets {
        let uri = format!("/v1/projects/{id}/documents/{}/annotations", set.doc_id);
        let (status, out) = h.json(Method::PUT, &uri, ANNOTATOR, serde_json::to_value(set).unwrap()).await;
        assert_eq!(status, StatusCode::OK, "{out}");
    }
    let question = String::from_utf8(fixture_bytes("question.txt")).unwrap();
    let (status, answer) = h.json(Method::POST, &format!("/v1/projects/{id}/ask"), VIEWER, json!({"question": question.trim()})).await;
    assert_eq!(status, StatusCode::OK, "{answer}");
    let answer: Answer = serde_json::from_value(answer).unwrap();
    let transcript = kdisc::transcript::render(question.trim(), &answer);
    assert_eq!(transcript, String::from_utf8(fixture_bytes("expected_transcript.txt")).unwrap());
    assert_eq!(corpus.documents.len(), 5);
}

#[tokio::test]
async fn train_auto_annotate_and_evaluate() {
    let h = Harness::new();
    let id = h.project("learn").await;
    let schema = common::synthetic_schema();
    h.json(Method::PUT, &format!("/v1/projects/{id}/schema"), OWNER, serde_json::to_value(schema.to_config()).unwrap())
        .await;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<_> = (0..4).map(|_| common::generate(&mut rng, 3, Variants::SHAPES)).collect();
    for g in &data {
        let text: Vec<&str> = g.doc.paragraphs.iter().map(|p| p.text.as_str()).collect();
        let job = h.upload(&id, "text/plain", text.join("\n\n").into_bytes()).await;
        assert_eq!(job["result"]["documents"], json!([g.doc.doc_id]));
    }
    let (train_docs, test_docs) = data.split_at(3);
    for g in train_docs {
        let uri = format!("/v1/projects/{id}/documents/{}/annotations", g.doc.doc_id);
        let (status, out) = h.json(Method::PUT, &uri, OWNER, serde_json::to_value(&g.set).unwrap()).await;
        assert_eq!(status, StatusCode::OK, "{out}");
    }
    for g in test_docs {
        let uri = format!("/v1/projects/{id}/documents/{}/annotations?layer=gold", g.doc.doc_id);
        let (status, out) = h.json(Method::PUT, &uri, OWNER, serde_json::to_value(&g.set).unwrap()).await;
        assert_eq!(status, StatusCode::OK, "{out}");
    }
    let ids = |gs: &[common::Generated]| gs.iter().map(|g| g.doc.doc_id.clone()).collect::<Vec<_>>();

    let (status, train) = h.json(Method::POST, &format!("/v1/projects/{id}/train"), OWNER, json!({"documents": ids(train_docs)})).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{train}");
    assert_eq!(train["version"], "v1");
    let kinds: Vec<&str> = train["jobs"].as_array().unwrap().iter().map(|j| j["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["train_ner", "train_rc"]);
    for j in train["jobs"].as_array().unwrap() {
        let done = h.wait(j["job_id"].as_str().unwrap()).await;
        assert_eq!(done["state"], "done", "{done}");
    }
    let (_, models) = h.get(&format!("/v1/projects/{id}/models"), VIEWER).await;
    assert_eq!(models[0]["ner_ready"], true);
    assert_eq!(models[0]["rc_ready"], true);

    let (status, _) = h
        .json(Method::POST, &format!("/v1/projects/{id}/auto-annotate"), VIEWER, json!({"mode": "model"}))
        .await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let req = json!({"mode": "model", "documents": ids(test_docs), "layer": "auto"});
    let (status, job) = h.json(Method::POST, &format!("/v1/projects/{id}/auto-annotate"), ANNOTATOR, req).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    let done = h.wait(job["job_id"].as_str().unwrap()).await;
    assert_eq!(done["state"], "done", "{done}");

    let req = json!({"pred_layer": "auto", "gold_layer": "gold", "documents": ids(test_docs)});
    let (status, eval) = h.json(Method::POST, &format!("/v1/projects/{id}/evaluate"), VIEWER, req).await;
    assert_eq!(status, StatusCode::OK, "{eval}");
    assert!(eval["micro_f1"].as_f64().unwrap() >= 0.9, "{eval}");

    let uri = format!("/v1/projects/{id}/documents/{}/annotations?layer=auto", test_docs[0].doc.doc_id);
    let (_, auto) = h.get(&uri, VIEWER).await;
    let auto: AnnotationSet = serde_json::from_value(auto).unwrap();
    assert!(!auto.entities.is_empty());
    assert!(auto.entities.iter().all(|e| e.provenance == Provenance::Model));

    let (status, _) = h.get("/v1/jobs/j99999", OWNER).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.get(&format!("/v1/jobs/{}", job["job_id"].as_str().unwrap()), STRANGER).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn regex_auto_annotation_keeps_human_work() {
    let h = Harness::new();
    let id = h.project("regex").await;
    h.json(Method::PUT, &format!("/v1/projects/{id}/schema"), OWNER, fixture_schema()).await;
    let payload = fixture_bytes("doc2.txt");
    h.upload(&id, "text/plain", payload.clone()).await;
    let doc = ingest(&payload, Format::PlainText, &HeuristicTagger).unwrap();
    let para = &doc.paragraphs[0].para_id;
    let uri = format!("/v1/projects/{id}/documents/{}/annotations?para={para}&format=standoff", doc.doc_id);
    let human = "T1\tMATERIAL 27 36\tTi-6Al-4V\n";
    let (status, _) = h.send(Method::PUT, &uri, Some(ANNOTATOR), "text/plain", human.as_bytes().to_vec()).await;
    assert_eq!(status, StatusCode::OK);

    let bad = json!({"mode": "regex", "rules": "ALLOY\tTi\tcs\n"});
    let (status, _) = h.json(Method::POST, &format!("/v1/projects/{id}/auto-annotate"), ANNOTATOR, bad).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let rules = "MATERIAL\tTi-6Al-4V\tcs\nPROPERTY\tfatigue (strength|life)\tci\n";
    let (status, job) = h.json(Method::POST, &format!("/v1/projects/{id}/auto-annotate"), ANNOTATOR, json!({"mode": "regex", "rules": rules})).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    assert_eq!(h.wait(job["job_id"].as_str().unwrap()).await["state"], "done");
    let (_, set) = h.get(&format!("/v1/projects/{id}/documents/{}/annotations", doc.doc_id), VIEWER).await;
    let set: AnnotationSet = serde_json::from_value(set).unwrap();
    let mut seen: Vec<(&str, Provenance)> = set.entities.iter().map(|e| (e.surface.as_str(), e.provenance)).collect();
    seen.sort_by_key(|s| s.0);
    assert_eq!(
        seen,
        [("Ti-6Al-4V", Provenance::Human), ("fatigue life", Provenance::Regex), ("fatigue strength", Provenance::Regex)]
    );
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir);
    let id = {
        let h = Harness {
            _dir: tempfile::tempdir().unwrap(),
            config: cfg.clone(),
            app: router(AppState::open(cfg.clone()).unwrap()),
        };
        let id = h.project("persist").await;
        h.upload(&id, "text/plain", fixture_bytes("doc3.txt")).await;
        id
    };
    let h = Harness {
        _dir: dir,
        config: cfg.clone(),
        app: router(AppState::open(cfg).unwrap()),
    };
    let (status, p) = h.get(&format!("/v1/projects/{id}"), VIEWER).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["members"].as_array().unwrap().len(), 3);
    let (_, docs) = h.get(&format!("/v1/projects/{id}/documents"), VIEWER).await;
    assert_eq!(docs.as_array().unwrap().len(), 1);
    let (status, _) = h.json(Method::POST, "/v1/projects", OWNER, json!({"name": "persist"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(h.config.data_dir.join("store.json").exists());
}

#[tokio::test]
async fn rebuild_jobs_report_sizes() {
    let h = Harness::new();
    let id = h.project("rebuild").await;
    h.upload(&id, "text/plain", fixture_bytes("doc4.txt")).await;
    let (status, job) = h.json(Method::POST, &format!("/v1/projects/{id}/index/rebuild"), OWNER, Value::Null).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let done = h.wait(job["job_id"].as_str().unwrap()).await;
    assert_eq!(done["kind"], "build_index");
    assert_eq!(done["log"], "1 paragraphs indexed\n");
    let (_, job) = h.json(Method::POST, &format!("/v1/projects/{id}/graph/rebuild"), OWNER, Value::Null).await;
    let done = h.wait(job["job_id"].as_str().unwrap()).await;
    // document, paragraph, one sentence; no annotations yet
    assert_eq!(done["log"], "3 nodes, 2 edges\n");
    let (status, _) = h.json(Method::POST, &format!("/v1/projects/{id}/graph/rebuild"), ANNOTATOR, Value::Null).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
}

#[test]
fn formats_helpers_agree_with_service_storage() {
    let (corpus, sets) = common::qa_fixture();
    let text = formats::write_corpus(&corpus);
    assert_eq!(formats::read_corpus(&text).unwrap(), corpus);
    let round = formats::read_annotations(&formats::write_annotations(&sets)).unwrap();
    assert_eq!(round, sets);
    assert!(pipeline::evaluate_sets(&sets, &sets).unwrap().micro_f1 == 1.0);
}
