mod support;

use std::process::Command;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use taskvis::http::{router, AppState};
use taskvis::pipeline::Engine;

fn app() -> Router {
    router(AppState::new(Engine::shipped()))
}

async fn call(app: &Router, method: Method, uri: &str, body: impl Into<Body>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

fn fixture(name: &str) -> &'static [u8] {
    support::FIXTURES.iter().find(|f| f.0 == name).unwrap().1
}

async fn upload(app: &Router, name: &str) -> Value {
    let (status, v) = call(app, Method::POST, "/api/datasets", fixture(name).to_vec()).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v
}

#[tokio::test]
async fn upload_rejects_empty_and_bad_bodies() {
    let app = app();
    let (status, v) = call(&app, Method::POST, "/api/datasets", Vec::new()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());
    let (status, _) = call(&app, Method::POST, "/api/datasets?format=xml", b"a\n1\n".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, Method::POST, "/api/datasets?format=json", b"not json".to_vec()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn reupload_gets_new_id_and_same_report() {
    let app = app();
    let a = upload(&app, "cars.json").await;
    let b = upload(&app, "cars.json").await;
    assert_ne!(a["dataset_id"], b["dataset_id"]);
    assert_eq!(a["fields"], b["fields"]);
    assert_eq!(a["row_count"], b["row_count"]);
    let id = a["dataset_id"].as_str().unwrap();
    let (status, got) = call(&app, Method::GET, &format!("/api/datasets/{id}"), Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, a);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let app = app();
    let (status, _) = call(&app, Method::GET, "/api/datasets/nope", Body::empty()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let body = json!({"dataset_id": "nope"}).to_string();
    let (status, _) = call(&app, Method::POST, "/api/recommend", body).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let id = upload(&app, "toy3.csv").await["dataset_id"].as_str().unwrap().to_string();
    let body = json!({"type": "nominal"}).to_string();
    let (status, _) = call(&app, Method::PATCH, &format!("/api/datasets/{id}/fields/missing"), body).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_requests_are_422() {
    let app = app();
    let id = upload(&app, "cars.json").await["dataset_id"].as_str().unwrap().to_string();
    for body in [
        json!({"dataset_id": id, "columns": ["Nope"]}),
        json!({"dataset_id": id, "max_charts": 0}),
        json!({"dataset_id": id, "tasks": ["bogus"]}),
        json!({"dataset_id": id, "scheme": "fastest"}),
        json!({"dataset_id": id, "unexpected": true}),
    ] {
        let (status, v) = call(&app, Method::POST, "/api/recommend", body.to_string()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body} -> {v}");
    }
    let (status, _) = call(
        &app,
        Method::PATCH,
        &format!("/api/datasets/{id}/fields/Origin"),
        json!({"type": "quantitative"}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn lists_the_task_vocabulary() {
    let (status, v) = call(&app(), Method::GET, "/api/tasks", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    let tasks = v.as_array().unwrap();
    assert_eq!(tasks.len(), 18);
    assert!(tasks.iter().any(|t| t.to_string().contains("change_over_time")));
}

#[tokio::test]
async fn geo_role_patch_enables_spatial_charts() {
    let app = app();
    let rows = "north,east,value\n40.1,-74.2,3\n34.0,-118.2,5\n41.8,-87.6,2\n29.7,-95.3,8\n";
    let (status, v) = call(&app, Method::POST, "/api/datasets?format=csv", rows.as_bytes().to_vec()).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = v["dataset_id"].as_str().unwrap().to_string();
    let req = json!({"dataset_id": id, "tasks": ["spatial"]}).to_string();
    let (status, before) = call(&app, Method::POST, "/api/recommend", req.clone()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(before["charts"].as_array().unwrap().is_empty());

    for (field, role) in [("north", "latitude"), ("east", "longitude")] {
        let (status, f) = call(
            &app,
            Method::PATCH,
            &format!("/api/datasets/{id}/fields/{field}"),
            json!({"geo_role": role}).to_string(),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(f["geo_role"], role);
    }
    let (_, after) = call(&app, Method::POST, "/api/recommend", req).await;
    let charts = after["charts"].as_array().unwrap();
    assert!(!charts.is_empty());
    let has_lat = |v: &Value| {
        v["encoding"]["latitude"].is_object()
            || v["layer"].as_array().is_some_and(|l| l.iter().any(|x| x["encoding"]["latitude"].is_object()))
    };
    assert!(charts.iter().all(|c| has_lat(&c["vegalite"])));

    let (status, f) = call(
        &app,
        Method::PATCH,
        &format!("/api/datasets/{id}/fields/north"),
        json!({"geo_role": null}).to_string(),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(f.get("geo_role").is_none_or(Value::is_null));
}

#[tokio::test]
async fn serves_the_region_map() {
    let resp = app()
        .oneshot(Request::get("/api/map").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["type"], "Topology");
}

#[tokio::test]
async fn api_and_cli_agree() {
    let app = app();
    let id = upload(&app, "cars.json").await["dataset_id"].as_str().unwrap().to_string();
    let body = json!({
        "dataset_id": id,
        "columns": ["Horsepower", "Origin", "Year"],
        "tasks": ["change_over_time", "comparison"],
        "max_charts": 7
    });
    let (status, api) = call(&app, Method::POST, "/api/recommend", body.to_string()).await;
    assert_eq!(status, StatusCode::OK);

    let out = tempfile::tempdir().unwrap();
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/cars.json");
    let run = Command::new(env!("CARGO_BIN_EXE_taskvis"))
        .args(["recommend", "--data", data, "--columns", "Horsepower,Origin,Year"])
        .args(["--tasks", "change_over_time,comparison", "--max", "7", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest: Value = serde_json::from_slice(&std::fs::read(out.path().join("manifest.json")).unwrap()).unwrap();

    let charts = api["charts"].as_array().unwrap();
    let entries = manifest["charts"].as_array().unwrap();
    assert_eq!(charts.len(), entries.len());
    assert!(!charts.is_empty());
    for (c, e) in charts.iter().zip(entries) {
        for key in ["mark", "cost", "covering_tasks", "fields"] {
            assert_eq!(c[key], e[key], "{key}");
        }
        let file: Value = serde_json::from_slice(&std::fs::read(out.path().join(e["file"].as_str().unwrap())).unwrap()).unwrap();
        assert_eq!(c["vegalite"], file);
    }
    assert_eq!(api["scheme"], manifest["scheme"]);
}
