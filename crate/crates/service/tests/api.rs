use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use larf_core::llm::mock::{FnBackend, ScriptedBackend};
use larf_core::llm::{ChatBackend, LlmError};
use larf_service::{router, AppState, JobStore, JsonlJobStore, MemoryJobStore};
use serde_json::{json, Value};
use tower::ServiceExt;

const FIG1_SOURCE: &str = include_str!("../../core/tests/fixtures/fig1_source.txt");
const FIG1_REPLY: &str = include_str!("../../core/tests/fixtures/fig1_annotated.html");
const SIX: &str = "Score: 6\nThe entrance provides important details.";

fn app_with(backend: Arc<dyn ChatBackend>) -> (Router, Arc<MemoryJobStore>) {
    let store = Arc::new(MemoryJobStore::default());
    let state = AppState::with_backend(store.clone(), backend, "mock", 2, 4);
    (router(state, Some("http://localhost:5173")), store)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(Body::from(body.unwrap_or("").to_string())).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(&body.to_string())).await
}

fn without_job_id(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("job_id");
    v
}

#[tokio::test]
async fn health() {
    let (app, _) = app_with(Arc::new(FnBackend::echo()));
    let (status, body) = call(&app, Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn annotate_figure_one_and_fetch_job() {
    let (app, _) = app_with(Arc::new(ScriptedBackend::new([FIG1_REPLY])));
    let (status, body) = post(&app, "/api/annotate", json!({"text": FIG1_SOURCE, "mode": "default"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["passed"], true);
    assert!(body["html"].as_str().unwrap().contains("<mark>"));
    assert_eq!(body["document"]["text"], FIG1_SOURCE);

    let id = body["job_id"].as_str().unwrap();
    let (status, job) = call(&app, Method::GET, &format!("/api/jobs/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(job["result"], without_job_id(body));
    assert_eq!(job["status"], "succeeded");
    assert_eq!(job["kind"], "annotate");
    assert_eq!(job["request"]["text"], FIG1_SOURCE);
    let exchanges = job["llm_exchanges"].as_array().unwrap();
    assert_eq!(exchanges.len(), 1);
    assert_eq!(exchanges[0]["response"]["choices"][0]["message"]["content"], FIG1_REPLY);
}

#[tokio::test]
async fn offline_mode_is_deterministic() {
    let (app, store) = app_with(Arc::new(FnBackend::new(|_, _| panic!("offline must not call the model"))));
    let (s1, a) = post(&app, "/api/annotate", json!({"text": "hi", "mode": "offline"})).await;
    let (s2, b) = post(&app, "/api/annotate", json!({"text": "hi", "mode": "offline"})).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(without_job_id(a.clone()), without_job_id(b.clone()));
    assert_ne!(a["job_id"], b["job_id"]);
    assert_eq!(store.list(None, 10, 0).await.1, 2);
}

#[tokio::test]
async fn invalid_requests() {
    let (app, store) = app_with(Arc::new(FnBackend::echo()));
    let cases = [
        ("/api/annotate", "{not json", StatusCode::BAD_REQUEST, "invalid_body"),
        ("/api/annotate", "{}", StatusCode::BAD_REQUEST, "invalid_body"),
        ("/api/annotate", r#"{"text": 5}"#, StatusCode::BAD_REQUEST, "invalid_body"),
        ("/api/annotate", r#"{"text": "x", "mode": "fancy"}"#, StatusCode::BAD_REQUEST, "invalid_body"),
        ("/api/annotate", r#"{"text": "x", "mode": "custom"}"#, StatusCode::BAD_REQUEST, "invalid_parameter"),
        ("/api/annotate", r#"{"text": "x", "temperature": -1}"#, StatusCode::BAD_REQUEST, "invalid_parameter"),
        (
            "/api/annotate",
            r#"{"text": "x", "mode": "offline", "style": {"line_spacing": 0.2}}"#,
            StatusCode::BAD_REQUEST,
            "invalid_parameter",
        ),
        ("/api/annotate", r#"{"text": "  \n "}"#, StatusCode::UNPROCESSABLE_ENTITY, "empty_text"),
        ("/api/bionic", r#"{"text": "x", "fixation": 6}"#, StatusCode::BAD_REQUEST, "invalid_parameter"),
        ("/api/bionic", r#"{"text": "x", "fixation": 0}"#, StatusCode::BAD_REQUEST, "invalid_parameter"),
        ("/api/bionic", r#"{"text": "x", "saccade": 5}"#, StatusCode::BAD_REQUEST, "invalid_parameter"),
        ("/api/bionic", r#"{"text": "x", "saccade": 10.5}"#, StatusCode::BAD_REQUEST, "invalid_body"),
        ("/api/score", r#"{"article": "x"}"#, StatusCode::BAD_REQUEST, "invalid_body"),
        ("/api/score", r#"{"article": "x", "answer": ""}"#, StatusCode::UNPROCESSABLE_ENTITY, "empty_text"),
    ];
    for (uri, body, status, code) in cases {
        let (got, value) = call(&app, Method::POST, uri, Some(body)).await;
        assert_eq!((got, value["code"].as_str()), (status, Some(code)), "{uri} {body}");
        assert!(value["message"].is_string());
    }
    // missing content type
    let req = Request::post("/api/annotate").body(Body::from(r#"{"text":"x"}"#)).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(store.list(None, 100, 0).await.1, 0, "rejected requests are not logged");
}

#[tokio::test]
async fn bionic_endpoint() {
    let (app, _) = app_with(Arc::new(FnBackend::echo()));
    let text = "one two three four five six seven eight nine ten";
    let (status, body) = post(&app, "/api/bionic", json!({"text": text, "saccade": 20})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["document"]["spans"].as_array().unwrap().len(), 5);
    assert_eq!(body["params"], json!({"fixation": 3, "saccade": 20}));
    assert_eq!(body["html"].as_str().unwrap().matches("<strong>").count(), 5);
}

#[tokio::test]
async fn score_endpoint() {
    let backend = Arc::new(ScriptedBackend::new([SIX, "no idea"]));
    let (app, store) = app_with(backend);
    let (status, body) = post(&app, "/api/score", json!({"article": "A pyramid.", "answer": "Tall."})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["score"], 6);

    let (status, err) = post(&app, "/api/score", json!({"article": "A pyramid.", "answer": "Tall."})).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_GATEWAY, Some("unparseable_score")));
    let (jobs, _) = store.list(None, 10, 0).await;
    assert_eq!(serde_json::to_value(jobs[0].record.status).unwrap(), "failed");
    assert_eq!(jobs[0].record.llm_exchanges.len(), 1);
}

#[tokio::test]
async fn reviews_record_adjusted_scores() {
    let (app, _) = app_with(Arc::new(ScriptedBackend::new([SIX])));
    let (_, body) = post(&app, "/api/score", json!({"article": "A pyramid.", "answer": "Tall."})).await;
    let id = body["job_id"].as_str().unwrap().to_string();
    let uri = format!("/api/jobs/{id}/review");

    let (status, view) = post(&app, &uri, json!({"adjusted_score": 5, "reviewer": "r1"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["adjusted_score"], 5);
    assert_eq!(view["result"]["score"], 6, "the model's score is never overwritten");
    let (_, view) = post(&app, &uri, json!({"adjusted_score": 4, "reviewer": "r2", "note": "misses the date"})).await;
    assert_eq!(view["adjusted_score"], 4);
    assert_eq!(view["reviews"].as_array().unwrap().len(), 2);

    let (status, _) = post(&app, &uri, json!({"adjusted_score": 11})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (_, bionic) = post(&app, "/api/bionic", json!({"text": "some words"})).await;
    let bionic_uri = format!("/api/jobs/{}/review", bionic["job_id"].as_str().unwrap());
    let (status, _) = post(&app, &bionic_uri, json!({"adjusted_score": 3})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn job_listing() {
    let (app, _) = app_with(Arc::new(FnBackend::echo()));
    let mut ids = Vec::new();
    for (uri, body) in [
        ("/api/annotate", json!({"text": "first text", "mode": "offline"})),
        ("/api/bionic", json!({"text": "second text"})),
        ("/api/annotate", json!({"text": "third text", "mode": "offline"})),
    ] {
        let (_, v) = post(&app, uri, body).await;
        ids.push(v["job_id"].clone());
    }
    let (status, page) = call(&app, Method::GET, "/api/jobs", None).await;
    assert_eq!(status, StatusCode::OK);
    let listed: Vec<Value> = page["jobs"].as_array().unwrap().iter().map(|j| j["id"].clone()).collect();
    assert_eq!(listed, vec![ids[2].clone(), ids[1].clone(), ids[0].clone()]);
    let times: Vec<&str> = page["jobs"].as_array().unwrap().iter().map(|j| j["created_at"].as_str().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(page["total"], 3);

    let (_, page) = call(&app, Method::GET, "/api/jobs?kind=annotate&limit=1&offset=1", None).await;
    assert_eq!(page["jobs"].as_array().unwrap().len(), 1);
    assert_eq!(page["jobs"][0]["id"], ids[0]);
    assert_eq!(page["total"], 2);

    let (status, err) = call(&app, Method::GET, "/api/jobs?kind=weird", None).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_parameter")));
}

#[tokio::test]
async fn unknown_jobs_and_routes() {
    let (app, _) = app_with(Arc::new(FnBackend::echo()));
    for uri in [
        "/api/jobs/00000000-0000-4000-8000-000000000000",
        "/api/jobs/not-a-uuid",
        "/api/nothing",
    ] {
        let (status, body) = call(&app, Method::GET, uri, None).await;
        assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")), "{uri}");
    }
}

#[tokio::test]
async fn upstream_errors_map_to_status() {
    let (app, store) = app_with(Arc::new(FnBackend::new(|_, _| Err(LlmError::Transport("connection refused".into())))));
    let (status, body) = post(&app, "/api/annotate", json!({"text": "some text"})).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_GATEWAY, Some("upstream_transport")));
    let (jobs, _) = store.list(None, 10, 0).await;
    assert_eq!(serde_json::to_value(jobs[0].record.status).unwrap(), "failed");

    let (app, _) = app_with(Arc::new(FnBackend::new(|_, _| Err(LlmError::Auth("HTTP 401".into())))));
    let (status, body) = post(&app, "/api/annotate", json!({"text": "some text"})).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::UNAUTHORIZED, Some("upstream_auth")));
}

#[tokio::test]
async fn without_a_model_only_offline_works() {
    let store = Arc::new(MemoryJobStore::default());
    let app = router(AppState::offline(store, "no model configured"), None);
    let (status, body) = post(&app, "/api/annotate", json!({"text": "hi"})).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::SERVICE_UNAVAILABLE, Some("llm_not_configured")));
    let (status, _) = post(&app, "/api/annotate", json!({"text": "hi", "mode": "offline"})).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn fallback_is_flagged() {
    let corrupt = FnBackend::new(|req, _| Ok(req.first_user_message().unwrap().replacen("BlackPink", "Blackpink", 1)));
    let (app, _) = app_with(Arc::new(corrupt));
    let (status, body) = post(&app, "/api/annotate", json!({"text": FIG1_SOURCE})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["report"]["passed"], false);
    assert_eq!(body["fallback_used"], true);
    assert_eq!(body["attempts"], 3);
    assert!(body["document"]["spans"].as_array().unwrap().is_empty());
    let (_, job) = call(&app, Method::GET, &format!("/api/jobs/{}", body["job_id"].as_str().unwrap()), None).await;
    assert_eq!(job["status"], "fallback_used");
    assert_eq!(job["llm_exchanges"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn cors_preflight_for_ui_origin() {
    let (app, _) = app_with(Arc::new(FnBackend::echo()));
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/api/annotate")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .header(header::ACCESS_CONTROL_REQUEST_HEADERS, "content-type")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}

#[tokio::test]
async fn jsonl_log_matches_successful_requests() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("jobs.jsonl");
    let store = Arc::new(JsonlJobStore::open(&path).await.unwrap());
    let app = router(
        AppState::with_backend(store, Arc::new(FnBackend::echo()), "mock", 2, 4),
        None,
    );
    let mut ok = 0;
    for i in 0..12 {
        let (status, _) = match i % 4 {
            0 => post(&app, "/api/annotate", json!({"text": format!("Text number {i}.")})).await,
            1 => post(&app, "/api/bionic", json!({"text": format!("Text number {i}.")})).await,
            2 => post(&app, "/api/bionic", json!({"text": "x", "fixation": 9})).await,
            _ => call(&app, Method::POST, "/api/annotate", Some("nope")).await,
        };
        ok += usize::from(status == StatusCode::OK);
    }
    assert_eq!(ok, 6);
    let contents = std::fs::read_to_string(&path).unwrap();
    assert_eq!(contents.lines().count(), ok);
    for line in contents.lines() {
        let entry: Value = serde_json::from_str(line).unwrap();
        assert_eq!(entry["entry"], "job");
    }

    let reopened = JsonlJobStore::open(&path).await.unwrap();
    assert_eq!(reopened.list(None, 100, 0).await.1, ok);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_each_log_once() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("jobs.jsonl");
    let store = Arc::new(JsonlJobStore::open(&path).await.unwrap());
    let app = router(
        AppState::with_backend(store, Arc::new(FnBackend::echo()), "mock", 2, 4),
        None,
    );
    let tasks: Vec<_> = (0..40)
        .map(|i| {
            let app = app.clone();
            tokio::spawn(async move { post(&app, "/api/annotate", json!({"text": format!("Item {i} here.")})).await })
        })
        .collect();
    let mut ids = std::collections::HashSet::new();
    for t in tasks {
        let (status, body) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        ids.insert(body["job_id"].as_str().unwrap().to_string());
    }
    assert_eq!(ids.len(), 40);
    let contents = std::fs::read_to_string(&path).unwrap();
    assert_eq!(contents.lines().count(), 40);
    assert!(contents.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
}
