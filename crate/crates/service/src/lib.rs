//! HTTP facade for sampling, editing and enhancing with a personalized model.
//!
//! Endpoints:
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/model/info` | |
//! | POST | `/sample` | [`SampleRequest`] |
//! | POST | `/session` | [`CreateSessionRequest`] |
//! | POST | `/session/{id}/edit` | [`EditRequest`] |
//! | POST | `/session/{id}/enhance` | [`EnhanceRequest`] |
//!
//! Everything else falls through to the static directory, when one is set.
//! Failures carry an [`ErrorBody`] `{code, message}`.

pub mod api;
pub mod codec;
pub mod error;
pub mod session;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use latorg::control::{self, AttributeTargets, PivotConfig, SolveConfig, SolveStart, DEFAULT_BETA};
use latorg::personalize::PersonalizedModel;
use latorg::toyface::Image;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use tower_http::services::ServeDir;

pub use api::*;
pub use error::{ApiError, ErrorBody};
use session::{Registry, Session};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    pub idle_timeout: Duration,
    pub solve: SolveConfig,
    pub pivot: PivotConfig,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_sessions: 16,
            idle_timeout: Duration::from_secs(30 * 60),
            solve: SolveConfig {
                start: SolveStart::BestAnchor,
                ..SolveConfig::default()
            },
            pivot: PivotConfig::default(),
            static_dir: None,
        }
    }
}

pub struct AppState {
    model: Option<Arc<PersonalizedModel<f64>>>,
    sessions: Mutex<Registry>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(model: Option<PersonalizedModel<f64>>, config: ServiceConfig) -> Arc<Self> {
        Arc::new(Self {
            model: model.map(Arc::new),
            sessions: Mutex::new(Registry::new(config.max_sessions, config.idle_timeout)),
            config,
        })
    }

    pub fn model(&self) -> Option<&PersonalizedModel<f64>> {
        self.model.as_deref()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table").len()
    }

    fn require_model(&self) -> Result<Arc<PersonalizedModel<f64>>, ApiError> {
        self.model.clone().ok_or_else(ApiError::no_model)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/model/info", get(model_info))
        .route("/sample", post(sample))
        .route("/session", post(create_session))
        .route("/session/{id}/edit", post(edit_session))
        .route("/session/{id}/enhance", post(enhance_session))
        .with_state(state.clone());
    match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> Result<R, ApiError> + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn coords(model: &PersonalizedModel<f64>, latent: &[f64], exact: &AttributeTargets) -> BTreeMap<String, f64> {
    model
        .schema()
        .attributes
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let c = model.basis.coordinate(latent, m);
            // set coordinates are exact up to rounding; report the requested value
            let c = match exact.0.get(m).copied().flatten() {
                Some(t) if (t - c).abs() < 1e-9 => t,
                _ => c,
            };
            (a.name.clone(), c)
        })
        .collect()
}

fn targets(model: &PersonalizedModel<f64>, named: &BTreeMap<String, f64>) -> Result<AttributeTargets, ApiError> {
    let t = AttributeTargets::from_named(model.schema(), named.iter().map(|(k, v)| (k.as_str(), *v)))?;
    t.validate(model.basis.attribute_count())?;
    Ok(t)
}

fn image_response(
    model: &PersonalizedModel<f64>,
    image: &Image,
    latent: &[f64],
    exact: &AttributeTargets,
    raw: bool,
) -> ImageResponse {
    ImageResponse {
        image_png_base64: codec::image_to_png_base64(image),
        image_raw: raw.then(|| image.pixels.clone()),
        latent_coords: coords(model, latent, exact),
    }
}

async fn model_info(State(state): State<Arc<AppState>>) -> Result<Json<ModelInfo>, ApiError> {
    let model = state.require_model()?;
    let attributes = model
        .schema()
        .attributes
        .iter()
        .zip(&model.basis.bounds)
        .map(|(a, b)| AttributeInfo {
            name: a.name.clone(),
            lo: b.lo,
            hi: b.hi,
        })
        .collect();
    Ok(Json(ModelInfo {
        attributes,
        anchor_count: model.anchors.len(),
        latent_dim: model.latent_dim(),
        resolution: model.resolution(),
        beta_default: DEFAULT_BETA,
        digest: model.digest(),
    }))
}

async fn sample(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SampleResponse>, ApiError> {
    let model = state.require_model()?;
    let req: SampleRequest = parse(&body)?;
    blocking(move || {
        let t = targets(&model, &req.targets)?;
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed.unwrap_or(0));
        let s = control::synthesize(&model, &t, req.beta.unwrap_or(DEFAULT_BETA), false, &mut rng)?;
        let a = &s.alpha.alpha;
        let body = image_response(&model, &s.image, &s.latent, &t, req.raw);
        Ok(Json(SampleResponse {
            image_png_base64: body.image_png_base64,
            image_raw: body.image_raw,
            latent_coords: body.latent_coords,
            alpha_summary: AlphaSummary {
                count: a.len(),
                min: a.iter().copied().fold(f64::INFINITY, f64::min),
                max: a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                sum: a.iter().sum(),
            },
            in_hull: s.hull.inside,
        }))
    })
    .await
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<CreateSessionResponse>, ApiError> {
    let model = state.require_model()?;
    let req: CreateSessionRequest = parse(&body)?;
    let res = model.resolution();
    let image = match (req.image_png_base64, req.image_raw) {
        (Some(png), None) => codec::png_base64_to_image(&png)?,
        (None, Some(raw)) => {
            if raw.len() != res.pixels() {
                return Err(ApiError::bad_request(format!(
                    "image_raw has {} values, expected {}",
                    raw.len(),
                    res.pixels()
                )));
            }
            Image::new(res.width, res.height, raw)?
        }
        _ => {
            return Err(ApiError::bad_request(
                "give exactly one of image_png_base64 and image_raw",
            ))
        }
    };
    codec::check_resolution(&image, res)?;
    let (solve, pivot) = (state.config.solve, state.config.pivot);
    let session = blocking(move || {
        let inverted = control::invert(&model, &image, &solve)?;
        let generator = control::pivotal_tune(&model.generator, &inverted.latent, &image, &pivot)?;
        let mut own = (*model).clone();
        own.generator = generator;
        Ok(Session {
            id: new_session_id(),
            model: own,
            image,
            latent: inverted.latent,
            created: Instant::now(),
        })
    })
    .await?;
    let current = session.model.generate(&session.latent)?;
    let response = CreateSessionResponse {
        session_id: session.id.clone(),
        image: image_response(
            &session.model,
            &current,
            &session.latent,
            &AttributeTargets(vec![]),
            req.raw,
        ),
    };
    state
        .sessions
        .lock()
        .expect("session table")
        .insert(session, Instant::now());
    Ok(Json(response))
}

fn lookup(state: &AppState, id: &str) -> Result<session::SharedSession, ApiError> {
    state.require_model()?;
    state.sessions.lock().expect("session table").get(id, Instant::now())
}

async fn edit_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ImageResponse>, ApiError> {
    let shared = lookup(&state, &id)?;
    let req: EditRequest = parse(&body)?;
    blocking(move || {
        let mut s = shared.lock().map_err(|_| ApiError::internal("session poisoned"))?;
        let m = s.model.schema().index_of(&req.attribute)?;
        let edited = control::edit(&s.model, &s.latent, m, req.value, req.allow_extrapolation)?;
        s.latent = edited.latent;
        let image = s.model.generate(&s.latent)?;
        let exact = AttributeTargets::none(s.model.basis.attribute_count()).with(m, req.value);
        Ok(Json(image_response(&s.model, &image, &s.latent, &exact, req.raw)))
    })
    .await
}

async fn enhance_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ImageResponse>, ApiError> {
    let shared = lookup(&state, &id)?;
    let req: EnhanceRequest = parse(&body)?;
    let mut solve = state.config.solve;
    if let Some(l) = req.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(ApiError::bad_request(format!("lambda must be non-negative, got {l}")));
        }
        solve.lambda = l;
    }
    blocking(move || {
        let mut s = shared.lock().map_err(|_| ApiError::internal("session poisoned"))?;
        let res = s.model.resolution();
        let q = req.degradation.into_degradation()?;
        q.validate(res)?;
        let t = targets(&s.model, &req.targets)?;
        let observed = Image::from_values(q.output_resolution(res), &q.apply(res, &s.image.pixels))?;
        let solved = control::enhance(&s.model, &observed, &q, &t, &solve)?;
        if req.commit {
            s.latent = solved.latent.clone();
        }
        Ok(Json(image_response(
            &s.model,
            &solved.image,
            &solved.latent,
            &AttributeTargets(vec![]),
            req.raw,
        )))
    })
    .await
}
