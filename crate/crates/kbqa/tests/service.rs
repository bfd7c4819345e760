mod common;

use axum::http::{Method, StatusCode};
use common::{call, call_json, fixture, read, temp_store};
use kbqa::service::router;
use serde_json::{json, Value};

async fn create(app: &axum::Router) -> String {
    let body = json!({
        "name": "shop",
        "qaPairs": [
            {"question": "How long does delivery take?", "answer": "Delivery takes five days."},
            {"question": "What is the return policy?", "answer": "Returns are accepted for thirty days."}
        ]
    });
    let (s, v) = call_json(app, Method::POST, "/kbs", &[], Some(&body.to_string())).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["kbId"].as_str().unwrap().to_string()
}

fn assert_error(v: &Value, code: &str) {
    assert_eq!(v["code"], code, "{v}");
    assert!(v["message"].is_string());
    assert!(v["details"].is_array());
}

#[tokio::test]
async fn unknown_routes_and_kbs_are_404_with_the_error_shape() {
    let (_d, store) = temp_store();
    let app = router(store);
    let (s, v) = call_json(&app, Method::GET, "/nowhere", &[], None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "notFound");
    let (s, v) = call_json(&app, Method::GET, "/kbs/missing", &[], None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "notFound");
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let (_d, store) = temp_store();
    let app = router(store);
    let (s, v) = call_json(&app, Method::POST, "/kbs", &[], Some("{not json")).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "badRequest");
    let (s, _) = call_json(&app, Method::POST, "/kbs", &[], Some(r#"{"name":"x","colour":1}"#)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stale_expected_revision_is_409() {
    let (_d, store) = temp_store();
    let app = router(store);
    let id = create(&app).await;
    let patch = json!({"name": "renamed"}).to_string();
    let uri = format!("/kbs/{id}");
    let (s, v) = call_json(&app, Method::PATCH, &uri, &[("expected-revision", "1")], Some(&patch)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["revision"], 2);
    let (s, v) = call_json(&app, Method::PATCH, &uri, &[("expected-revision", "1")], Some(&patch)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error(&v, "revisionConflict");
    let (s, _) = call_json(&app, Method::PATCH, &uri, &[("expected-revision", "two")], Some(&patch)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn import_then_export_round_trips_bytes() {
    let (_d, store) = temp_store();
    let app = router(store);
    let src = read(&fixture("multi-turn-kb.json"));
    let (s, v) = call_json(&app, Method::POST, "/kbs:import", &[], Some(&src)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let id = v["kbId"].as_str().unwrap();
    let (s, first) = call(&app, Method::GET, &format!("/kbs/{id}/export"), &[], None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = call_json(&app, Method::POST, "/kbs:import", &[], Some(std::str::from_utf8(&first).unwrap())).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let (_d2, other) = temp_store();
    let app2 = router(other);
    let (s, _) = call_json(&app2, Method::POST, "/kbs:import", &[], Some(std::str::from_utf8(&first).unwrap())).await;
    assert_eq!(s, StatusCode::CREATED);
    let (_, second) = call(&app2, Method::GET, &format!("/kbs/{id}/export"), &[], None).await;
    assert_eq!(first, second);
}

#[tokio::test]
async fn feedback_creates_a_suggestion_that_can_be_resolved() {
    let (_d, store) = temp_store();
    let app = router(store);
    let id = create(&app).await;
    let fb = json!({"queryText": "when will my sofa arrive", "shownQaId": 2, "selectedQaId": 1}).to_string();
    let (s, v) = call_json(&app, Method::POST, &format!("/kbs/{id}/feedback"), &[], Some(&fb)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let sid = v["suggestion"]["suggestionId"].as_str().expect("suggestion recorded").to_string();

    let (_, v) = call_json(&app, Method::GET, &format!("/kbs/{id}/suggestions"), &[], None).await;
    assert_eq!(v["suggestions"].as_array().unwrap().len(), 1);

    let uri = format!("/kbs/{id}/suggestions/{sid}:resolve");
    let (s, v) = call_json(&app, Method::POST, &uri, &[], Some(r#"{"decision":"accept"}"#)).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["added"], json!(["when will my sofa arrive"]));
    let (s, v) = call_json(&app, Method::POST, &uri, &[], Some(r#"{"decision":"reject"}"#)).await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let (s, _) = call_json(&app, Method::POST, &format!("/kbs/{id}/suggestions/{sid}:explode"), &[], Some("{}")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, kb) = call_json(&app, Method::GET, &format!("/kbs/{id}"), &[], None).await;
    let alts = &kb["kb"]["qaPairs"][0]["alternateQuestions"];
    assert_eq!(alts, &json!(["when will my sofa arrive"]), "{kb}");
}

#[tokio::test]
async fn delete_is_204_and_the_kb_is_gone() {
    let (_d, store) = temp_store();
    let app = router(store);
    let id = create(&app).await;
    let (s, body) = call(&app, Method::DELETE, &format!("/kbs/{id}"), &[], None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    assert!(body.is_empty());
    let (s, _) = call(&app, Method::POST, &format!("/kbs/{id}/generateAnswer"), &[], Some(r#"{"question":"hi"}"#)).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (_, v) = call_json(&app, Method::GET, "/kbs", &[], None).await;
    assert_eq!(v["kbs"], json!([]));
}

#[tokio::test]
async fn bad_query_parameters_are_400() {
    let (_d, store) = temp_store();
    let app = router(store);
    let id = create(&app).await;
    let uri = format!("/kbs/{id}/generateAnswer");
    for body in [r#"{"question":"delivery","top":0}"#, r#"{"question":"delivery","scoreThreshold":2}"#] {
        let (s, v) = call_json(&app, Method::POST, &uri, &[], Some(body)).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}: {v}");
    }
    let (s, v) = call_json(&app, Method::POST, &uri, &[], Some(r#"{"question":"how long does delivery take"}"#)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["answers"][0]["qaId"], 1, "{v}");
    assert_eq!(v["revision"], 1);
}
