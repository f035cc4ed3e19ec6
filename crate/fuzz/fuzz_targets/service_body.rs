#![no_main]

//! First byte picks the endpoint, the rest is the request body.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use libfuzzer_sys::fuzz_target;
use puddlemap_pipeline::service::{router, AppState};
use puddlemap_pipeline::PipelineConfig;
use tower::ServiceExt;

const ROUTES: [&str; 4] = ["/segment", "/classify", "/resect", "/georef"];

fuzz_target!(|data: &[u8]| {
    let Some((&pick, body)) = data.split_first() else { return };
    let state = Arc::new(AppState::load(PipelineConfig::default()).unwrap());
    let req = Request::post(ROUTES[pick as usize % ROUTES.len()]).body(Body::from(body.to_vec())).unwrap();
    let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
    let status = rt.block_on(router(state).oneshot(req)).unwrap().status();
    assert!(!status.is_server_error(), "{status}");
});
