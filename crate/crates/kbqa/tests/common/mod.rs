#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use kbqa::io::{self, KbFile};
use kbqa::store::Store;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;

pub fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn data(name: &str) -> PathBuf {
    manifest().join("data").join(name)
}

pub fn fixture(name: &str) -> PathBuf {
    manifest().join("tests/fixtures").join(name)
}

pub fn read(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn kb_file(path: &std::path::Path) -> KbFile {
    io::parse_kb(&read(path)).unwrap()
}

pub fn lines(path: &std::path::Path) -> Vec<String> {
    read(path).lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
}

pub fn temp_store() -> (TempDir, Arc<Store>) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path().join("data"), io::default_engine()).unwrap();
    (dir, Arc::new(store))
}

/// One in-process request against the router.
pub async fn call(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let body = match body {
        Some(b) => {
            req = req.header("content-type", "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn call_json(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: Option<&str>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, headers, body).await;
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&bytes)))
    };
    (status, v)
}
