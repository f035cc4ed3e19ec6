mod common;

use std::fs;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::*;
use http_body_util::BodyExt;
use puddlemap::camera_model::{load_gcps, parse_camera};
use puddlemap::imagery::{encode_ppm, load_frame};
use puddlemap::terrain::{format_dem, DemGrid};
use puddlemap_pipeline::geojson::FeatureCollection;
use puddlemap_pipeline::ops::{CameraJson, ResectReport};
use puddlemap_pipeline::rle::Rle;
use puddlemap_pipeline::service::{router, AppState, ClassifyResponse, SegmentResponse};
use puddlemap_pipeline::{cmd_classify, cmd_georef, cmd_resect};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(fx: &Fixture, overrides: &[&str]) -> axum::Router {
    let mut all = vec!["--camera", "camera_true.txt"];
    all.extend_from_slice(overrides);
    let owned: Vec<String> = all
        .chunks(2)
        .flat_map(|kv| {
            let v = if kv[1].ends_with(".txt") || kv[1].ends_with(".asc") { fx.p(kv[1]) } else { kv[1].to_string() };
            [kv[0].to_string(), v]
        })
        .collect();
    let refs: Vec<&str> = owned.iter().map(String::as_str).collect();
    router(Arc::new(AppState::load(fx.config(&refs)).unwrap()))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn seeds_json(extra: &[(usize, usize, &str)]) -> Value {
    let mut seeds: Vec<Value> = seeds_csv()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            json!({"row": f[0].parse::<usize>().unwrap(), "col": f[1].parse::<usize>().unwrap(), "label": f[2]})
        })
        .collect();
    seeds.extend(extra.iter().map(|(r, c, l)| json!({"row": r, "col": c, "label": l})));
    Value::Array(seeds)
}

fn resect_body(fx: &Fixture) -> Value {
    let gcps = load_gcps(fx.root().join("gcps.csv")).unwrap();
    let init = parse_camera(&fs::read_to_string(fx.root().join("camera_init.txt")).unwrap()).unwrap();
    json!({
        "gcps": gcps.iter().map(|g| json!({"u": g.u, "v": g.v, "X": g.x, "Y": g.y, "Z": g.z})).collect::<Vec<_>>(),
        "init": CameraJson::from(&init),
    })
}

#[tokio::test]
async fn frame_endpoint_serves_ppm_bytes() {
    let fx = Fixture::new(2);
    let app = app(&fx, &[]);
    let id = format!("{}", T0 + 30.0);
    let (status, bytes) = call(&app, "GET", &format!("/frame/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let on_disk = load_frame(fx.root().join("frames").join(format!("{id}.ppm"))).unwrap();
    assert_eq!(bytes, encode_ppm(&on_disk));

    let (status, body) = call(&app, "GET", "/frame/42", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(json_of(&body)["error"], "not_found");
}

#[tokio::test]
async fn resect_matches_cli_output() {
    let fx = Fixture::new(1);
    cmd_resect(&fx.config(&[])).unwrap();
    let app = app(&fx, &[]);
    let (status, body) = call(&app, "POST", "/resect", Some(resect_body(&fx))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let report: ResectReport = serde_json::from_slice(&body).unwrap();

    let cli = parse_camera(&fs::read_to_string(fx.out().join("camera.txt")).unwrap()).unwrap();
    assert_eq!(report.camera, CameraJson::from(&cli));
    let csv = fs::read_to_string(fx.out().join("residuals.csv")).unwrap();
    for (line, r) in csv.lines().skip(1).zip(&report.residuals) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!([f[6], f[7]], *r);
    }
    let summary = fs::read_to_string(fx.out().join("resect.txt")).unwrap();
    assert!(summary.starts_with(&format!("rmse = {}\n", report.rmse)));
    assert!(report.converged);
}

#[tokio::test]
async fn identical_requests_get_identical_responses() {
    let fx = Fixture::new(1);
    let app = app(&fx, &[]);
    let (_, a) = call(&app, "POST", "/resect", Some(resect_body(&fx))).await;
    let (_, b) = call(&app, "POST", "/resect", Some(resect_body(&fx))).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn too_few_gcps_is_422_with_reason() {
    let fx = Fixture::new(1);
    let app = app(&fx, &[]);
    let mut body = resect_body(&fx);
    body["gcps"].as_array_mut().unwrap().truncate(3);
    let (status, resp) = call(&app, "POST", "/resect", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&resp)["error"], "too_few_gcps");
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let fx = Fixture::new(1);
    let app = app(&fx, &[]);
    for (uri, body) in [
        ("/resect", json!({"gcps": "nope"})),
        ("/classify", json!({"frame": 1})),
        ("/segment", json!({"frame": "x", "bogus": true})),
        ("/georef", json!({"mask": {"width": 2, "height": 2, "runs": [[1, 3]]}})),
    ] {
        let (status, resp) = call(&app, "POST", uri, Some(body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(json_of(&resp)["error"], "malformed_body");
    }
    let req = Request::builder().method("POST").uri("/resect").body(Body::from("{not json")).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", "/elevation?x=abc&y=1", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn elevation_at_cell_center_is_exact() {
    let fx = Fixture::new(1);
    let z: Vec<f64> = (0..20).map(|i| 0.1 * i as f64 + 0.37).collect();
    let dem = DemGrid::new(5, 4, 100.0, 200.0, 2.0, -9999.0, z).unwrap();
    fs::write(fx.root().join("ramp.asc"), format_dem(&dem)).unwrap();
    let app = app(&fx, &["--dem", "ramp.asc"]);
    for (row, col) in [(0, 0), (1, 3), (3, 4), (2, 2)] {
        let (x, y) = dem.cell_center(row, col);
        let (status, body) = call(&app, "GET", &format!("/elevation?x={x}&y={y}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(json_of(&body)["z"].as_f64().unwrap(), dem.sample(row, col));
    }
    let (status, body) = call(&app, "GET", "/elevation?x=0&y=0", None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(json_of(&body)["error"], "out_of_bounds");
}

#[tokio::test]
async fn segment_returns_rle_label_map() {
    let fx = Fixture::new(1);
    let app = app(&fx, &[]);
    let (status, body) = call(&app, "POST", "/segment", Some(json!({"frame": format!("{T0}")}))).await;
    assert_eq!(status, StatusCode::OK);
    let resp: SegmentResponse = serde_json::from_slice(&body).unwrap();
    let labels = resp.labels.decode().unwrap();
    assert_eq!(labels.len(), WIDTH * HEIGHT);
    assert!(resp.segment_count >= 2);
    assert_eq!(labels.iter().max(), Some(&(resp.segment_count as u64 - 1)));
    // No segment straddles the waterline.
    let line = waterline(0, 1);
    let mut side = vec![None; resp.segment_count];
    for (p, &l) in labels.iter().enumerate() {
        let wet = p / WIDTH >= line;
        assert_eq!(*side[l as usize].get_or_insert(wet), wet, "segment {l}");
    }
}

#[tokio::test]
async fn classify_matches_cli_mask() {
    let fx = Fixture::new(3);
    cmd_classify(&fx.config(&[])).unwrap();
    let app = app(&fx, &[]);
    let id = format!("{T0}");
    let (status, body) = call(&app, "POST", "/classify", Some(json!({"frame": id, "seeds": seeds_json(&[])}))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let resp: ClassifyResponse = serde_json::from_slice(&body).unwrap();
    let pgm = fs::read(fx.out().join("masks").join(format!("{id}.pgm"))).unwrap();
    let cli = puddlemap::tree_classifier::WaterMask::from_pgm(&pgm).unwrap();
    assert_eq!(resp.mask, Rle::encode_mask(cli.width, cli.height, &cli.wet));
    assert_eq!(resp.wet_pixels, cli.wet_count());
    assert!(resp.conflicts.is_empty());
}

#[tokio::test]
async fn conflicting_seeds_are_422_seed_conflict() {
    let fx = Fixture::new(1);
    let app = app(&fx, &[]);
    let (_, seg) = call(&app, "POST", "/segment", Some(json!({"frame": format!("{T0}")}))).await;
    let labels = serde_json::from_slice::<SegmentResponse>(&seg).unwrap().labels.decode().unwrap();
    let body = json!({"frame": format!("{T0}"), "seeds": seeds_json(&[(170, 5, "dry")])});
    let (status, resp) = call(&app, "POST", "/classify", Some(body)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = json_of(&resp);
    assert_eq!(v["error"], "seed_conflict");
    assert_eq!(v["conflicts"], json!([labels[170 * WIDTH + 5]]));
}

#[tokio::test]
async fn georef_matches_cli_geojson() {
    let fx = Fixture::new(2);
    let cfg = fx.config(&["--camera", &fx.p("camera_true.txt")]);
    cmd_classify(&cfg).unwrap();
    cmd_georef(&cfg).unwrap();
    let app = app(&fx, &[]);
    let id = format!("{}", T0 + 30.0);
    let pgm = fs::read(fx.out().join("masks").join(format!("{id}.pgm"))).unwrap();
    let mask = puddlemap::tree_classifier::WaterMask::from_pgm(&pgm).unwrap();
    let body = json!({"mask": Rle::encode_mask(mask.width, mask.height, &mask.wet), "frame": id});
    let (status, resp) = call(&app, "POST", "/georef", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    let served: FeatureCollection = serde_json::from_slice(&resp).unwrap();
    let file = fs::read_to_string(fx.out().join("georef").join(format!("{id}.geojson"))).unwrap();
    assert_eq!(served.to_json(), file);
}

#[tokio::test]
async fn grid_lists_candidate_seed_points() {
    let fx = Fixture::new(1);
    let app = app(&fx, &[]);
    let (status, body) = call(&app, "GET", "/grid", None).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!(v["points"].as_array().unwrap().len(), 12 * 9);
    assert_eq!(v["roi"], json!([0, 0, WIDTH, HEIGHT]));
}
