use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use latorg::control::{PivotConfig, SolveConfig};
use latorg::personalize::{self, PersonalizedModel, PretrainConfig, TrainConfig};
use latorg::toyface::{self, Dataset, Estimator, WorldConfig, ESTIMATOR_TOLERANCE};
use latorg_service::codec::{png_base64_to_image, RleMask};
use latorg_service::{router, AppState, ErrorBody, ImageResponse, ModelInfo, SampleResponse, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    model: PersonalizedModel<f64>,
    data: Dataset,
}

/// A small model from a short pretrain and tune; enough structure for the
/// yaw oracle checks.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let population = toyface::make_population(
            &WorldConfig::default(),
            personalize::MIN_IDENTITIES,
            personalize::MIN_PER_IDENTITY,
            3,
        )
        .unwrap();
        let pre = personalize::pretrain::<f64>(
            &population,
            &PretrainConfig {
                max_epochs: 40,
                hidden: vec![64, 64],
                ..PretrainConfig::default()
            },
        )
        .unwrap();
        let data = toyface::make_dataset(42, 48, 4242).unwrap();
        let anchors = personalize::init_anchors(&pre.encoder, &data, &data.schema).unwrap();
        let config = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let model = personalize::tune(&pre.generator, anchors, &data, &config)
            .unwrap()
            .model;
        Fixture { model, data }
    })
}

fn fast_config() -> ServiceConfig {
    ServiceConfig {
        solve: SolveConfig {
            iters: 150,
            ..ServiceConfig::default().solve
        },
        pivot: PivotConfig {
            iters: 30,
            ..PivotConfig::default()
        },
        ..ServiceConfig::default()
    }
}

fn state_with(config: ServiceConfig) -> Arc<AppState> {
    AppState::new(Some(fixture().model.clone()), config)
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&v).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn ok<T: serde::de::DeserializeOwned>(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> T {
    let (status, bytes) = call(state, method, uri, body).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

async fn err(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, ErrorBody) {
    let (status, bytes) = call(state, method, uri, body).await;
    let e: ErrorBody = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| panic!("not an error body: {}", String::from_utf8_lossy(&bytes)));
    assert!(!e.code.is_empty() && !e.message.is_empty());
    (status, e)
}

fn yaw_of(image: &latorg::toyface::Image) -> f64 {
    Estimator::shared(image.resolution())
        .unwrap()
        .estimate(image)
        .unwrap()
        .values(3)[0]
}

fn close(a: &Option<Vec<f64>>, b: &Option<Vec<f64>>) -> bool {
    let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

fn psnr(a: &[f64], b: &[f64]) -> f64 {
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    10.0 * (1.0 / mse.max(1e-20)).log10()
}

#[tokio::test]
async fn no_model_answers_503() {
    let state = AppState::new(None, ServiceConfig::default());
    for (method, uri, body) in [
        ("GET", "/model/info", None),
        ("POST", "/sample", Some(json!({}))),
        (
            "POST",
            "/session/abc/edit",
            Some(json!({"attribute": "yaw", "value": 0.5})),
        ),
    ] {
        let (status, e) = err(&state, method, uri, body).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        assert_eq!(e.code, "no_model");
    }
}

#[tokio::test]
async fn model_info_is_stable() {
    let state = state_with(fast_config());
    let (s1, a) = call(&state, "GET", "/model/info", None).await;
    let (s2, b) = call(&state, "GET", "/model/info", None).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    let info: ModelInfo = serde_json::from_slice(&a).unwrap();
    assert_eq!(info.attributes.len(), 3);
    assert!(info.attributes.iter().all(|a| a.lo < a.hi));
    assert_eq!(info.anchor_count, fixture().data.len());
}

#[tokio::test]
async fn sample_is_deterministic_and_sets_targets_exactly() {
    let state = state_with(fast_config());
    let body = json!({"targets": {"yaw": 0.5}, "seed": 9});
    let (_, a) = call(&state, "POST", "/sample", Some(body.clone())).await;
    let (_, b) = call(&state, "POST", "/sample", Some(body)).await;
    assert_eq!(a, b);
    let r: SampleResponse = serde_json::from_slice(&a).unwrap();
    assert_eq!(r.latent_coords["yaw"], 0.5);
    assert_eq!(r.alpha_summary.count, fixture().data.len());
    assert!((r.alpha_summary.sum - 1.0).abs() < 1e-9);
    let img = png_base64_to_image(&r.image_png_base64).unwrap();
    assert_eq!(img.resolution(), fixture().model.resolution());
}

#[tokio::test]
async fn sampled_yaw_follows_the_target() {
    let state = state_with(fast_config());
    let mut means = Vec::new();
    for v in [0.0, 0.5, 1.0] {
        let mut total = 0.0;
        for seed in 0..8 {
            let r: SampleResponse = ok(
                &state,
                "POST",
                "/sample",
                Some(json!({"targets": {"yaw": v}, "seed": seed, "raw": true})),
            )
            .await;
            let img = latorg::toyface::Image::new(32, 32, r.image_raw.unwrap()).unwrap();
            total += yaw_of(&img) / 8.0;
        }
        means.push(total);
    }
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
}

#[tokio::test]
async fn sample_rejects_bad_requests() {
    let state = state_with(fast_config());
    let (s, e) = err(&state, "POST", "/sample", Some(json!({"targets": {"yaw": 1.5}}))).await;
    assert_eq!((s, e.code.as_str()), (StatusCode::BAD_REQUEST, "out_of_range"));
    let (s, e) = err(&state, "POST", "/sample", Some(json!({"targets": {"age": 0.5}}))).await;
    assert_eq!((s, e.code.as_str()), (StatusCode::BAD_REQUEST, "unknown_attribute"));
    let (s, _) = err(&state, "POST", "/sample", Some(json!({"bogus": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let req = Request::post("/sample").body(Body::from("{not json")).unwrap();
    assert_eq!(
        router(state.clone()).oneshot(req).await.unwrap().status(),
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn degenerate_attribute_is_422() {
    let mut model = fixture().model.clone();
    model.basis.bounds[1].hi = model.basis.bounds[1].lo;
    let state = AppState::new(Some(model), fast_config());
    let (s, e) = err(&state, "POST", "/sample", Some(json!({"targets": {"pitch": 0.5}}))).await;
    assert_eq!(
        (s, e.code.as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, "degenerate_attribute")
    );
}

async fn open_session(state: &Arc<AppState>, n: usize) -> (String, ImageResponse) {
    let image = &fixture().data.items[n].0;
    let v: Value = ok(
        state,
        "POST",
        "/session",
        Some(json!({"image_raw": image.pixels, "raw": true})),
    )
    .await;
    let id = v["session_id"].as_str().unwrap().to_string();
    (id, serde_json::from_value(v).unwrap())
}

#[tokio::test]
async fn edit_and_edit_back_restores_the_image() {
    let state = state_with(fast_config());
    let (id, start) = open_session(&state, 3).await;
    let yaw0 = start.latent_coords["yaw"];
    let uri = format!("/session/{id}/edit");
    let moved: ImageResponse = ok(
        &state,
        "POST",
        &uri,
        Some(json!({"attribute": "yaw", "value": 0.9, "raw": true})),
    )
    .await;
    assert_eq!(moved.latent_coords["yaw"], 0.9);
    let back: ImageResponse = ok(
        &state,
        "POST",
        &uri,
        Some(json!({"attribute": "yaw", "value": yaw0, "raw": true})),
    )
    .await;
    let p = psnr(back.image_raw.as_ref().unwrap(), start.image_raw.as_ref().unwrap());
    assert!(p >= 40.0, "psnr {p}");
}

#[tokio::test]
async fn edits_on_distinct_attributes_commute() {
    let state = state_with(fast_config());
    let (a, _) = open_session(&state, 5).await;
    let (b, _) = open_session(&state, 5).await;
    let e = |id: &str| format!("/session/{id}/edit");
    let _: ImageResponse = ok(&state, "POST", &e(&a), Some(json!({"attribute": "yaw", "value": 0.2}))).await;
    let ra: ImageResponse = ok(
        &state,
        "POST",
        &e(&a),
        Some(json!({"attribute": "expression", "value": 0.8, "raw": true})),
    )
    .await;
    let _: ImageResponse = ok(
        &state,
        "POST",
        &e(&b),
        Some(json!({"attribute": "expression", "value": 0.8})),
    )
    .await;
    let rb: ImageResponse = ok(
        &state,
        "POST",
        &e(&b),
        Some(json!({"attribute": "yaw", "value": 0.2, "raw": true})),
    )
    .await;
    for (x, y) in ra.image_raw.unwrap().iter().zip(rb.image_raw.unwrap()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[tokio::test]
async fn sessions_are_isolated_and_base_model_is_untouched() {
    let state = state_with(fast_config());
    let digest = fixture().model.digest();
    let (a, sa) = open_session(&state, 7).await;
    let (b, sb) = open_session(&state, 7).await;
    assert_ne!(a, b);
    let _: ImageResponse = ok(
        &state,
        "POST",
        &format!("/session/{a}/edit"),
        Some(json!({"attribute": "pitch", "value": 0.0})),
    )
    .await;
    let after: ImageResponse = ok(
        &state,
        "POST",
        &format!("/session/{b}/edit"),
        Some(json!({"attribute": "yaw", "value": sb.latent_coords["yaw"], "raw": true})),
    )
    .await;
    assert!(close(&after.image_raw, &sb.image_raw));
    assert!(close(&sa.image_raw, &sb.image_raw));
    assert_eq!(state.model().unwrap().digest(), digest);
}

#[tokio::test]
async fn anchor_image_yaw_sweep_is_monotone() {
    let state = state_with(fast_config());
    let (id, _) = open_session(&state, 0).await;
    let mut yaws = Vec::new();
    for k in 0..5 {
        let v = k as f64 / 4.0;
        let r: ImageResponse = ok(
            &state,
            "POST",
            &format!("/session/{id}/edit"),
            Some(json!({"attribute": "yaw", "value": v, "raw": true})),
        )
        .await;
        yaws.push(yaw_of(
            &latorg::toyface::Image::new(32, 32, r.image_raw.unwrap()).unwrap(),
        ));
    }
    for w in yaws.windows(2) {
        assert!(w[1] >= w[0] - ESTIMATOR_TOLERANCE[0], "{yaws:?}");
    }
    assert!(yaws[4] > yaws[0], "{yaws:?}");
}

#[tokio::test]
async fn unknown_expired_and_evicted_sessions() {
    let state = state_with(fast_config());
    let (s, e) = err(
        &state,
        "POST",
        "/session/nope/edit",
        Some(json!({"attribute": "yaw", "value": 0.5})),
    )
    .await;
    assert_eq!((s, e.code.as_str()), (StatusCode::NOT_FOUND, "unknown_session"));

    let short = state_with(ServiceConfig {
        idle_timeout: Duration::from_millis(1),
        ..fast_config()
    });
    let (id, _) = open_session(&short, 1).await;
    tokio::time::sleep(Duration::from_millis(20)).await;
    let (s, e) = err(
        &short,
        "POST",
        &format!("/session/{id}/edit"),
        Some(json!({"attribute": "yaw", "value": 0.5})),
    )
    .await;
    assert_eq!((s, e.code.as_str()), (StatusCode::GONE, "session_expired"));

    let tiny = state_with(ServiceConfig {
        max_sessions: 1,
        ..fast_config()
    });
    let (first, _) = open_session(&tiny, 1).await;
    let (second, _) = open_session(&tiny, 2).await;
    assert_eq!(tiny.session_count(), 1);
    let (s, _) = err(
        &tiny,
        "POST",
        &format!("/session/{first}/edit"),
        Some(json!({"attribute": "yaw", "value": 0.5})),
    )
    .await;
    assert_eq!(s, StatusCode::GONE);
    let _: ImageResponse = ok(
        &tiny,
        "POST",
        &format!("/session/{second}/edit"),
        Some(json!({"attribute": "yaw", "value": 0.5})),
    )
    .await;
}

#[tokio::test]
async fn enhance_with_rle_mask_and_commit() {
    let state = state_with(fast_config());
    let (id, start) = open_session(&state, 4).await;
    let keep: Vec<bool> = (0..32 * 32).map(|i| i / 32 < 20).collect();
    let rle = RleMask::encode(32, 32, &keep);
    let mut body = json!({"degradation": {"kind": "mask_rle", "width": 32, "height": 32, "start": rle.start, "runs": rle.runs}, "targets": {"expression": 1.0}, "raw": true});
    let uri = format!("/session/{id}/enhance");
    let r: ImageResponse = ok(&state, "POST", &uri, Some(body.clone())).await;
    assert_eq!(r.image_raw.as_ref().unwrap().len(), 32 * 32);

    // without commit the session latent is unchanged
    let probe = json!({"attribute": "yaw", "value": start.latent_coords["yaw"], "raw": true});
    let same: ImageResponse = ok(&state, "POST", &format!("/session/{id}/edit"), Some(probe.clone())).await;
    assert!(close(&same.image_raw, &start.image_raw));

    body["commit"] = json!(true);
    let committed: ImageResponse = ok(&state, "POST", &uri, Some(body)).await;
    let now: ImageResponse = ok(
        &state,
        "POST",
        &format!("/session/{id}/edit"),
        Some(json!({"attribute": "yaw", "value": committed.latent_coords["yaw"], "raw": true})),
    )
    .await;
    for (k, v) in &committed.latent_coords {
        assert!((now.latent_coords[k] - v).abs() < 1e-9);
    }
}

#[tokio::test]
async fn malformed_degradation_is_400() {
    let state = state_with(fast_config());
    let (id, _) = open_session(&state, 2).await;
    let uri = format!("/session/{id}/enhance");
    for d in [
        json!({"kind": "mask", "width": 4, "height": 4, "keep": vec![true; 16]}),
        json!({"kind": "mask_rle", "width": 32, "height": 32, "start": true, "runs": [10]}),
        json!({"kind": "downsample", "factor": 5}),
        json!({"kind": "blur"}),
    ] {
        let (s, _) = err(&state, "POST", &uri, Some(json!({"degradation": d}))).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{d}");
    }
    let (s, _) = err(
        &state,
        "POST",
        &uri,
        Some(json!({"degradation": {"kind": "identity"}, "lambda": -1.0})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn png_upload_of_wrong_size_is_rejected() {
    let state = state_with(fast_config());
    let small = latorg::toyface::Image::new(2, 2, vec![0.5; 4]).unwrap();
    let png = latorg_service::codec::image_to_png_base64(&small);
    let (s, _) = err(&state, "POST", "/session", Some(json!({"image_png_base64": png}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = err(&state, "POST", "/session", Some(json!({}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn static_files_are_served() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>editor</h1>").unwrap();
    let state = state_with(ServiceConfig {
        static_dir: Some(dir.path().to_path_buf()),
        ..fast_config()
    });
    let (s, body) = call(&state, "GET", "/index.html", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body, b"<h1>editor</h1>");
    let (s, _) = call(&state, "GET", "/", None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&state, "GET", "/model/info", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[test]
fn request_bodies_default_sensibly() {
    let r: latorg_service::SampleRequest = serde_json::from_str("{}").unwrap();
    assert!(r.targets.is_empty() && r.seed.is_none() && !r.raw);
}
