use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use medeval_cli::cmd::rate::open_store;
use medeval_cli::server::{self, AppState, ServeError};
use medeval_core::rater::{blind_pair, CaseRecord, CaseStatus, RatingStore};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Arc;
use tower::ServiceExt;

const SEED: u64 = 99;

fn cases(n: usize) -> Vec<CaseRecord> {
    (0..n)
        .map(|i| CaseRecord {
            case_id: format!("c{i}"),
            dataset: "mimic".into(),
            status: if i % 2 == 0 { CaseStatus::Normal } else { CaseStatus::Abnormal },
            report_ai: format!("generated draft {i}"),
            report_original: format!("clinician draft {i}"),
            image_refs: vec![format!("img/{i}.png")],
        })
        .collect()
}

fn app(state: &Arc<AppState>) -> axum::Router {
    server::router(state.clone(), None)
}

async fn call(router: axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post(body: Value) -> Request<Body> {
    Request::post("/api/rating")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn rating(case: &str, reader: &str, verdict: &str) -> Value {
    json!({"case_id": case, "reader_id": reader, "verdict": verdict, "comment": ""})
}

#[tokio::test]
async fn progress_starts_at_zero() {
    let state = Arc::new(AppState::new(cases(3), RatingStore::in_memory(), SEED).unwrap());
    let (status, body) = call(app(&state), get("/api/progress")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"total_cases": 3, "ratings": 0, "readers": {}}));

    let tokens = BTreeMap::from([("r1".to_string(), "t1".to_string()), ("r2".to_string(), "t2".to_string())]);
    let state = Arc::new(AppState::new(cases(3), RatingStore::in_memory(), SEED).unwrap().with_tokens(tokens));
    let (_, body) = call(app(&state), get("/api/progress")).await;
    assert_eq!(body, json!({"total_cases": 3, "ratings": 0, "readers": {"r1": 0, "r2": 0}}));
}

#[tokio::test]
async fn session_flow_is_blinded_and_conflicts_on_duplicates() {
    let cs = cases(2);
    let state = Arc::new(AppState::new(cs.clone(), RatingStore::in_memory(), SEED).unwrap());

    let (status, next) = call(app(&state), get("/api/session/r1/next")).await;
    assert_eq!(status, StatusCode::OK);
    let keys: Vec<&str> = next.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["case_id", "complete", "image_urls", "left_text", "progress", "right_text"]);
    assert_eq!(next["case_id"], "c0");
    assert_eq!(next["progress"], json!({"rated": 0, "total": 2}));
    let shown = blind_pair(&cs[0], SEED).pair;
    assert_eq!(next["left_text"], shown.left_text);

    let (status, created) = call(app(&state), post(rating("c0", "r1", "A1"))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["seq"], 0);
    let (status, _) = call(app(&state), post(rating("c0", "r1", "C"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(app(&state), post(rating("nope", "r1", "C"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    // The client cannot say which side was the AI report.
    let mut forged = rating("c1", "r1", "A2");
    forged["ai_is_report_a"] = json!(true);
    let (status, _) = call(app(&state), post(forged)).await;
    assert!(status.is_client_error(), "{status}");

    let stored = &state.store().snapshot()[0];
    assert_eq!(stored.ai_is_report_a, blind_pair(&cs[0], SEED).ai_is_report_a);

    let (_, next) = call(app(&state), get("/api/session/r1/next")).await;
    assert_eq!(next["case_id"], "c1");
    call(app(&state), post(rating("c1", "r1", "X"))).await;
    let (_, done) = call(app(&state), get("/api/session/r1/next")).await;
    assert_eq!(done, json!({"complete": true, "progress": {"rated": 2, "total": 2}}));
    let (_, other) = call(app(&state), get("/api/session/r2/next")).await;
    assert_eq!(other["case_id"], "c0");
    let (_, progress) = call(app(&state), get("/api/progress")).await;
    assert_eq!(progress, json!({"total_cases": 2, "ratings": 2, "readers": {"r1": 2}}));
}

#[tokio::test]
async fn reader_tokens_are_checked() {
    let tokens = BTreeMap::from([("r1".to_string(), "secret".to_string())]);
    let state = Arc::new(AppState::new(cases(1), RatingStore::in_memory(), SEED).unwrap().with_tokens(tokens));
    let (status, _) = call(app(&state), get("/api/session/r1/next")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let req = Request::get("/api/session/r1/next").header("authorization", "Bearer secret").body(Body::empty()).unwrap();
    assert_eq!(call(app(&state), req).await.0, StatusCode::OK);
    let req = Request::post("/api/rating")
        .header("content-type", "application/json")
        .header("authorization", "Bearer secret")
        .body(Body::from(rating("c0", "r2", "C").to_string()))
        .unwrap();
    assert_eq!(call(app(&state), req).await.0, StatusCode::UNAUTHORIZED);
    // Case ids are not revealed to unauthenticated callers.
    assert_eq!(call(app(&state), post(rating("nope", "r1", "C"))).await.0, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn restart_after_torn_write_replays_to_last_complete_record() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("ratings.jsonl");
    {
        let state = Arc::new(AppState::new(cases(3), open_store(&log).unwrap(), SEED).unwrap());
        for c in ["c0", "c1"] {
            assert_eq!(call(app(&state), post(rating(c, "r1", "B1"))).await.0, StatusCode::CREATED);
        }
    }
    // A crash mid-append leaves half a record behind.
    let mut bytes = std::fs::read(&log).unwrap();
    let whole = bytes.len();
    bytes.extend_from_slice(br#"{"seq":2,"case_id":"c2","reader_id":"r1","verd"#);
    std::fs::write(&log, &bytes).unwrap();

    let store = open_store(&log).unwrap();
    assert_eq!(store.recovered_bytes() as usize, bytes.len() - whole);
    assert_eq!(std::fs::metadata(&log).unwrap().len() as usize, whole);
    let state = Arc::new(AppState::new(cases(3), store, SEED).unwrap());
    let (_, progress) = call(app(&state), get("/api/progress")).await;
    assert_eq!(progress["readers"]["r1"], 2);
    let (_, next) = call(app(&state), get("/api/session/r1/next")).await;
    assert_eq!(next["case_id"], "c2");
    let (status, created) = call(app(&state), post(rating("c2", "r1", "C"))).await;
    assert_eq!((status, created["seq"].clone()), (StatusCode::CREATED, json!(2)));
    drop(state);
    assert_eq!(RatingStore::open(&log).unwrap().snapshot().len(), 3);
}

#[test]
fn corrupt_log_refuses_with_recovery_instructions() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("ratings.jsonl");
    std::fs::write(&log, "{\"broken\n{}\n").unwrap();
    let err = open_store(&log).err().unwrap().to_string();
    assert!(err.contains("line 1") && err.contains("head -n 0"), "{err}");
}

#[tokio::test]
async fn port_in_use_is_reported() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    match server::bind("127.0.0.1", port).await {
        Err(ServeError::PortInUse { port: p, .. }) => assert_eq!(p, port),
        other => panic!("expected PortInUse, got {other:?}"),
    }
}

#[tokio::test]
async fn static_assets_are_served_next_to_the_api() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>rater</html>").unwrap();
    let state = Arc::new(AppState::new(cases(1), RatingStore::in_memory(), SEED).unwrap());
    let router = server::router(state, Some(ui.path().to_path_buf()));
    let resp = router.clone().oneshot(get("/index.html")).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(&to_bytes(resp.into_body(), usize::MAX).await.unwrap()[..], b"<html>rater</html>");
    assert_eq!(router.oneshot(get("/api/progress")).await.unwrap().status(), StatusCode::OK);
}

#[tokio::test]
async fn graceful_shutdown_flushes_and_snapshots() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("ratings.jsonl");
    let snapshot = dir.path().join("snapshot.json");
    let state = Arc::new(
        AppState::new(cases(2), open_store(&log).unwrap(), SEED)
            .unwrap()
            .with_snapshots(snapshot.clone(), 0),
    );
    let listener = server::bind("127.0.0.1", 0).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let handle = tokio::spawn(server::serve(listener, state, None, async {
        let _ = rx.await;
    }));

    let body = rating("c1", "r9", "A2").to_string();
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let request = format!(
        "POST /api/rating HTTP/1.1\r\nhost: x\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).await.unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 201"), "{response}");

    tx.send(()).unwrap();
    handle.await.unwrap().unwrap();
    let snap: Value = serde_json::from_slice(&std::fs::read(&snapshot).unwrap()).unwrap();
    assert_eq!(snap.as_array().unwrap().len(), 1);
    assert_eq!(snap[0]["reader_id"], "r9");
}

#[tokio::test]
async fn scripted_twenty_case_session_persists_every_rating() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("ratings.jsonl");
    let state = Arc::new(AppState::new(cases(20), open_store(&log).unwrap(), SEED).unwrap());
    let verdicts = ["A2", "A1", "C", "B1", "B2", "X"];
    let mut seen = Vec::new();
    loop {
        let (_, next) = call(app(&state), get("/api/session/r1/next")).await;
        let text = next.to_string();
        for leak in ["ai_is_report_a", "report_ai", "report_original", "origin", "status"] {
            assert!(!text.contains(leak), "{leak} leaked in {text}");
        }
        if next["complete"] == true {
            break;
        }
        let case_id = next["case_id"].as_str().unwrap().to_string();
        let verdict = verdicts[seen.len() % verdicts.len()];
        let (status, created) = call(app(&state), post(rating(&case_id, "r1", verdict))).await;
        assert_eq!(status, StatusCode::CREATED);
        assert!(!created.to_string().contains("ai_is_report_a"));
        seen.push(case_id);
    }
    assert_eq!(seen.len(), 20);
    state.finalize().unwrap();
    drop(state);
    let persisted = RatingStore::open(&log).unwrap().snapshot();
    assert_eq!(persisted.len(), 20);
    let ids: std::collections::BTreeSet<&str> = persisted.iter().map(|r| r.case_id.as_str()).collect();
    assert_eq!(ids.len(), 20);
}
