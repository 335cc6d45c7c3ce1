use std::path::Path;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qgms_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &Path) -> Router {
    router(AppState::open(dir).unwrap())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

/// Rise, fall, rise; 30 daily bars with distinct prices.
fn bars(n: usize) -> Value {
    let closes: Vec<f64> = (0..n)
        .map(|i| {
            let i = i as f64;
            1.1 + 0.01 * if i < 10.0 { i } else if i < 20.0 { 20.0 - i } else { i - 20.0 }
        })
        .collect();
    let rows: Vec<Value> = closes
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let open = if i == 0 { *c } else { closes[i - 1] };
            json!({
                "timestamp": format!("2021-03-{:02}T00:00:00Z", i + 1),
                "open": format!("{open:.4}"),
                "high": format!("{:.4}", open.max(*c) + 0.002),
                "low": format!("{:.4}", open.min(*c) - 0.002),
                "close": format!("{c:.4}"),
            })
        })
        .collect();
    Value::Array(rows)
}

async fn create(app: &Router, n: usize) -> (String, String) {
    let (status, body) = call(
        app,
        Method::POST,
        "/sessions",
        Some(json!({ "inline_bars": bars(n), "seed": 7, "symbol": "EURUSD", "timeframe": "1D" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    (body["session_id"].as_str().unwrap().to_string(), body["commitment"].as_str().unwrap().to_string())
}

async fn step(app: &Router, id: &str, n: usize) {
    for _ in 0..n {
        let (status, _) = call(app, Method::GET, &format!("/sessions/{id}/bars/next"), None).await;
        assert_eq!(status, StatusCode::OK);
    }
}

fn prediction(bar_index: usize, side: &str) -> Value {
    json!({ "bar_index": bar_index, "expected_direction": side, "note": "top" })
}

#[tokio::test]
async fn full_replay_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (status, health) = call(&app, Method::GET, "/health", None).await;
    assert_eq!((status, &health["status"]), (StatusCode::OK, &json!("ok")));

    let (id, commitment) = create(&app, 30).await;
    assert_eq!(commitment.len(), 64);

    let (status, bar) = call(&app, Method::GET, &format!("/sessions/{id}/bars/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bar["index"], json!(0));
    let keys: Vec<&String> = bar.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["close", "high", "index", "low", "open"]);
    step(&app, &id, 10).await;

    let uri = format!("/sessions/{id}/predictions");
    let (status, body) = call(&app, Method::POST, &uri, Some(prediction(9, "down"))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["chain_length"], json!(1));
    assert_eq!(body["entry_hash"].as_str().unwrap().len(), 64);

    let (status, body) = call(&app, Method::POST, &uri, Some(prediction(11, "down"))).await;
    assert_eq!((status, &body["code"]), (StatusCode::CONFLICT, &json!("LOOKAHEAD_REJECTED")));

    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/report"), None).await;
    assert_eq!((status, &body["code"]), (StatusCode::CONFLICT, &json!("NOT_REVEALED")));

    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/seal"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(&app, Method::POST, &uri, Some(prediction(3, "up"))).await;
    assert_eq!((status, &body["code"]), (StatusCode::CONFLICT, &json!("SESSION_SEALED")));
    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/bars/next"), None).await;
    assert_eq!((status, &body["code"]), (StatusCode::CONFLICT, &json!("SESSION_SEALED")));

    let (status, first) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["manifest"]["symbol"], json!("EURUSD"));
    assert_eq!(first["manifest"]["start_timestamp"], json!("2021-03-01T00:00:00Z"));
    let v = &first["verification"];
    assert_eq!((&v["chain_ok"], &v["commitment_ok"], &v["no_lookahead"]), (&json!(true), &json!(true), &json!(true)));
    let (status, second) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!((status, &second), (StatusCode::OK, &first));

    let (status, report) = call(&app, Method::GET, &format!("/sessions/{id}/report?horizon=10&atr=5&k=1"), None).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    let record = &report["records"][0];
    assert_eq!(record["bar_index"], json!(9));
    assert_eq!(record["hit"], json!(true));
    assert_eq!(report["hit_rate"], json!(1.0));

    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/report?horizon=0"), None).await;
    assert_eq!((status, &body["code"]), (StatusCode::BAD_REQUEST, &json!("BAD_REQUEST")));
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for (method, uri) in [
        (Method::GET, "/sessions/nope/bars/next"),
        (Method::POST, "/sessions/nope/seal"),
        (Method::POST, "/sessions/nope/reveal"),
        (Method::GET, "/sessions/nope/report"),
    ] {
        let (status, body) = call(&app, method, uri, None).await;
        assert_eq!((status, &body["code"]), (StatusCode::NOT_FOUND, &json!("NOT_FOUND")));
    }
}

#[tokio::test]
async fn stream_end_is_no_content_and_unstarted_sessions_cannot_seal() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, _) = create(&app, 3).await;
    let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/seal"), None).await;
    assert_eq!((status, &body["code"]), (StatusCode::CONFLICT, &json!("NOT_STARTED")));
    step(&app, &id, 3).await;
    let (status, body) = call(&app, Method::GET, &format!("/sessions/{id}/bars/next"), None).await;
    assert_eq!((status, body), (StatusCode::NO_CONTENT, Value::Null));
}

#[tokio::test]
async fn malformed_creation_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bad_bar = json!([{ "timestamp": "2021-01-01T00:00:00Z", "open": 1.0, "high": 1.0, "low": 1.5, "close": 1.2 }]);
    for body in [
        json!({ "seed": 1 }),
        json!({ "inline_bars": bars(3), "csv_path": "/tmp/x.csv" }),
        json!({ "inline_bars": bad_bar }),
        json!({ "inline_bars": [] }),
        json!({ "inline_bars": [{ "timestamp": "2021-01-01T00:00:00Z\n2", "open": 1, "high": 1, "low": 1, "close": 1 }] }),
        json!({ "csv_path": "/definitely/missing.csv" }),
        json!({ "inline_bars": "nope" }),
    ] {
        let (status, resp) = call(&app, Method::POST, "/sessions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body} -> {resp}");
        assert!(resp["code"].is_string() && resp["message"].is_string());
    }
    let raw = Request::post("/sessions").header("content-type", "application/json").body(Body::from("{")).unwrap();
    let resp = app.clone().oneshot(raw).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn sessions_created_from_files_take_symbol_from_the_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("GBPJPY_4H.csv");
    std::fs::write(
        &path,
        "timestamp,open,high,low,close\n2022-01-03T00:00:00Z,150,151,149,150.5\n2022-01-03T04:00:00Z,150.5,152,150,151.5\n",
    )
    .unwrap();
    let app = app(&dir.path().join("data"));
    let (status, body) =
        call(&app, Method::POST, "/sessions", Some(json!({ "csv_path": path, "seed": 3 }))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["session_id"].as_str().unwrap();
    step(&app, id, 1).await;
    let (_, reveal) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!((&reveal["manifest"]["symbol"], &reveal["manifest"]["timeframe"]), (&json!("GBPJPY"), &json!("4H")));
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (id, commitment) = {
        let app = app(dir.path());
        let (id, commitment) = create(&app, 12).await;
        step(&app, &id, 5).await;
        let uri = format!("/sessions/{id}/predictions");
        call(&app, Method::POST, &uri, Some(prediction(2, "up"))).await;
        (id, commitment)
    };
    let app = app(dir.path());
    let (status, bar) = call(&app, Method::GET, &format!("/sessions/{id}/bars/next"), None).await;
    assert_eq!((status, &bar["index"]), (StatusCode::OK, &json!(5)));
    let (_, body) = call(&app, Method::POST, &format!("/sessions/{id}/predictions"), Some(prediction(5, "down"))).await;
    assert_eq!(body["chain_length"], json!(2));
    let (_, reveal) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!(reveal["verification"]["chain_ok"], json!(true));

    // Revealed sessions reload with the same disclosure.
    let app = crate::app(dir.path());
    let (status, again) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!((status, &again), (StatusCode::OK, &reveal));
    let manifest = std::fs::read_to_string(dir.path().join("sessions").join(&id).join("manifest.json")).unwrap();
    let digest = qgms_core::blind_harness::sha256_hex(manifest.as_bytes());
    assert_eq!(digest, commitment);
}

#[tokio::test]
async fn ledger_edits_on_disk_are_caught_at_reveal() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, _) = create(&app, 20).await;
    step(&app, &id, 15).await;
    let uri = format!("/sessions/{id}/predictions");
    for i in [3, 7, 12] {
        call(&app, Method::POST, &uri, Some(prediction(i, "up"))).await;
    }
    let path = dir.path().join("sessions").join(&id).join("ledger.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let edited = text.replacen(r#"\"bar_index\":7"#, r#"\"bar_index\":8"#, 1);
    assert_ne!(edited, text);
    std::fs::write(&path, edited).unwrap();

    let (status, reveal) = call(&app, Method::POST, &format!("/sessions/{id}/reveal"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reveal["verification"]["chain_ok"], json!(false));
    assert_eq!(reveal["verification"]["first_broken_link"], json!(1));
    assert_eq!(reveal["verification"]["commitment_ok"], json!(true));
}
