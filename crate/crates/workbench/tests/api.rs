mod support;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use parafact_workbench::router;
use serde_json::{json, Value};
use support::{open, SEED};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
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
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, text) = call(app, method, uri, body).await;
    (s, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn app(dir: &std::path::Path) -> Router {
    router(Arc::new(open(dir)))
}

#[tokio::test]
async fn round_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (s, round) = json_call(&app, "POST", "/api/v1/rounds", Some(json!({"seeds": [SEED], "threshold": 2.0}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(round["id"], 1);
    assert_eq!(round["stats"]["proposed"], 5);

    let (s, rounds) = json_call(&app, "GET", "/api/v1/rounds", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(rounds.as_array().unwrap().len(), 1);

    let (_, cands) = json_call(&app, "GET", "/api/v1/candidates?status=proposed&round=1", None).await;
    let cands = cands.as_array().unwrap().clone();
    assert_eq!(cands.len(), 5);
    let scores: Vec<f64> = cands.iter().map(|c| c["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] <= w[1]));

    for (i, c) in cands.iter().enumerate() {
        let verdict = if i < 3 { "accept" } else { "reject" };
        let (s, row) = json_call(
            &app,
            "POST",
            "/api/v1/decisions",
            Some(json!({"candidate_id": c["id"], "verdict": verdict, "annotator": "t"})),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(row["status"], if i < 3 { "accepted" } else { "rejected" });
    }
    let (_, r) = json_call(&app, "GET", "/api/v1/rounds/1", None).await;
    assert_eq!(r["stats"]["accepted"], 3);
    assert_eq!(r["stats"]["new_patterns_per_seed_display"], "3.00");
    assert!((r["stats"]["acceptance_rate"].as_f64().unwrap() - 0.6).abs() < 1e-12);

    let (s, tsv) = call(&app, "GET", "/api/v1/tables/accepted", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.starts_with("SCHEMA\t"));

    let (s, p) = json_call(&app, "POST", "/api/v1/rounds/1/promote", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(p["seeds"].as_array().unwrap().len(), 3);
    assert_eq!(p["table"].as_str().unwrap(), tsv);

    let (s, e) = json_call(
        &app,
        "POST",
        "/api/v1/decisions",
        Some(json!({"candidate_id": cands[0]["id"], "verdict": "reject", "annotator": "t"})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(e["code"], "conflict");
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let cases = [
        ("GET", "/api/v1/rounds/7", None, StatusCode::NOT_FOUND),
        ("GET", "/api/v1/rounds/x", None, StatusCode::UNPROCESSABLE_ENTITY),
        ("POST", "/api/v1/rounds/7/promote", None, StatusCode::NOT_FOUND),
        ("GET", "/api/v1/candidates/zz/concordance?k=3", None, StatusCode::NOT_FOUND),
        ("GET", "/api/v1/candidates?status=maybe", None, StatusCode::UNPROCESSABLE_ENTITY),
        ("POST", "/api/v1/rounds", Some(json!({"seeds": [], "threshold": 2.0})), StatusCode::UNPROCESSABLE_ENTITY),
        ("POST", "/api/v1/rounds", Some(json!({"seeds": ["a/b"], "threshold": 2.0})), StatusCode::UNPROCESSABLE_ENTITY),
        ("POST", "/api/v1/rounds", Some(json!({"threshold": 2.0})), StatusCode::UNPROCESSABLE_ENTITY),
        (
            "POST",
            "/api/v1/decisions",
            Some(json!({"candidate_id": "zz", "verdict": "accept", "annotator": "a"})),
            StatusCode::NOT_FOUND,
        ),
        (
            "POST",
            "/api/v1/decisions",
            Some(json!({"candidate_id": "zz", "verdict": "perhaps", "annotator": "a"})),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
    ];
    for (method, uri, body, want) in cases {
        let (s, v) = json_call(&app, method, uri, body).await;
        assert_eq!(s, want, "{method} {uri}: {v}");
        assert!(v["code"].is_string() && v["message"].is_string(), "{v}");
    }
}

#[tokio::test]
async fn concordance_endpoint_and_structured_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let seed = json!({"head": "cession", "expansion": "société", "etq": "entreprise_achetee", "objet": "$2"});
    let (s, _) = json_call(&app, "POST", "/api/v1/rounds", Some(json!({"seeds": [seed], "threshold": 2.0}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (_, cands) = json_call(&app, "GET", "/api/v1/candidates", None).await;
    let reprise = cands.as_array().unwrap().iter().find(|c| c["elt1"] == "reprise").unwrap().clone();
    let uri = format!("/api/v1/candidates/{}/concordance?k=10", reprise["id"].as_str().unwrap());
    let (s, snips) = json_call(&app, "GET", &uri, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(snips.as_array().unwrap().len(), 1);
    assert!(snips[0]["marked"].as_str().unwrap().contains("[reprise] des [activités]"));
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = app(dir.path());
    json_call(&first, "POST", "/api/v1/rounds", Some(json!({"seeds": [SEED], "threshold": 2.0}))).await;
    let (_, cands) = json_call(&first, "GET", "/api/v1/candidates", None).await;
    json_call(
        &first,
        "POST",
        "/api/v1/decisions",
        Some(json!({"candidate_id": cands[0]["id"], "verdict": "accept", "annotator": "t"})),
    )
    .await;
    let (_, before) = json_call(&first, "GET", "/api/v1/candidates", None).await;
    drop(first);
    let second = app(dir.path());
    let (_, after) = json_call(&second, "GET", "/api/v1/candidates", None).await;
    assert_eq!(before, after);
}
