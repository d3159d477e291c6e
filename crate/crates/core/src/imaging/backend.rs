//! Image backends: a deterministic stub and a client for a remote node-graph
//! service.

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use base64::Engine;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::workflow::WorkflowDescriptor;
use crate::gate::Gate;

pub const GRID_SIZE: usize = 4;
pub const STUB_EDGE: u32 = 512;
pub const DEFAULT_TIMEOUT_SECONDS: u64 = 120;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 2;

#[derive(Debug, Clone)]
pub struct BackendRequest {
    pub prompt: String,
    pub seed: u64,
    pub base_image: Arc<Vec<u8>>,
    pub base_media_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePayload {
    pub bytes: Vec<u8>,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("image backend unavailable: {0}")]
    Unavailable(String),
    #[error("image backend timed out")]
    Timeout,
    #[error("image backend returned an unusable response: {0}")]
    Malformed(String),
}

pub trait ImageBackendPort: Send + Sync {
    /// Exactly [`GRID_SIZE`] payloads on success.
    fn generate(&self, request: &BackendRequest) -> Result<Vec<ImagePayload>, BackendError>;

    fn name(&self) -> &'static str;
}

/// Renders a 512×512 PNG mosaic whose cells are drawn from a hash of the
/// prompt, seed, base image and grid index. The prompt and seed are written
/// into text chunks.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

const CELLS: u32 = 8;

impl StubBackend {
    pub fn render(request: &BackendRequest, index: usize) -> Vec<u8> {
        let base_digest = Sha256::digest(request.base_image.as_slice());
        let mut h = Sha256::new();
        h.update((request.prompt.len() as u64).to_le_bytes());
        h.update(request.prompt.as_bytes());
        h.update(request.seed.to_le_bytes());
        h.update(base_digest);
        h.update((index as u64).to_le_bytes());
        let root = h.finalize();

        // 64 cells × 3 channels
        let mut palette = Vec::with_capacity(192);
        let mut block = root.to_vec();
        while palette.len() < 192 {
            block = Sha256::digest(&block).to_vec();
            palette.extend_from_slice(&block);
        }

        let cell = STUB_EDGE / CELLS;
        let mut pixels = Vec::with_capacity((STUB_EDGE * STUB_EDGE * 3) as usize);
        for y in 0..STUB_EDGE {
            for x in 0..STUB_EDGE {
                let c = ((y / cell) * CELLS + x / cell) as usize * 3;
                // faint grid lines keep cells apart when colours are close
                let edge = x % cell == 0 || y % cell == 0;
                for ch in 0..3 {
                    let v = palette[c + ch];
                    pixels.push(if edge { v / 2 } else { v });
                }
            }
        }

        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, STUB_EDGE, STUB_EDGE);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.add_itxt_chunk("prompt".into(), request.prompt.clone())
                .expect("itxt chunk");
            enc.add_text_chunk("seed".into(), request.seed.to_string())
                .expect("text chunk");
            enc.add_text_chunk("base-sha256".into(), hex::encode(base_digest))
                .expect("text chunk");
            enc.add_text_chunk("grid-index".into(), index.to_string())
                .expect("text chunk");
            let mut w = enc.write_header().expect("png header");
            w.write_image_data(&pixels).expect("png data");
        }
        out
    }
}

impl ImageBackendPort for StubBackend {
    fn generate(&self, request: &BackendRequest) -> Result<Vec<ImagePayload>, BackendError> {
        Ok((0..GRID_SIZE)
            .map(|i| ImagePayload {
                bytes: StubBackend::render(request, i),
                media_type: "image/png".into(),
            })
            .collect())
    }

    fn name(&self) -> &'static str {
        "stub"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteBackendConfig {
    pub endpoint: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl RemoteBackendConfig {
    /// `IMAGE_BACKEND_ENDPOINT` (required) and `IMAGE_BACKEND_TIMEOUT_SECONDS`.
    pub fn from_env() -> Option<RemoteBackendConfig> {
        let endpoint = std::env::var("IMAGE_BACKEND_ENDPOINT")
            .ok()
            .filter(|s| !s.trim().is_empty())?;
        let secs = std::env::var("IMAGE_BACKEND_TIMEOUT_SECONDS")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(DEFAULT_TIMEOUT_SECONDS);
        Some(RemoteBackendConfig {
            endpoint: endpoint.trim().to_string(),
            timeout: Duration::from_secs(secs),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        })
    }
}

#[derive(Deserialize)]
struct RemoteImage {
    media_type: String,
    data: String,
}

#[derive(Deserialize)]
struct RemoteResponse {
    images: Vec<RemoteImage>,
}

/// Posts the instantiated workflow and expects
/// `{"images": [{"media_type": .., "data": <base64>}, ..]}` back.
pub struct RemoteBackend {
    config: RemoteBackendConfig,
    workflow: WorkflowDescriptor,
    gate: Gate,
    client: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl RemoteBackend {
    pub fn new(config: RemoteBackendConfig, workflow: WorkflowDescriptor) -> RemoteBackend {
        RemoteBackend {
            gate: Gate::new(config.max_in_flight),
            config,
            workflow,
            client: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, BackendError> {
        self.client
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(self.config.timeout)
                    .build()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| BackendError::Unavailable(e.clone()))
    }
}

impl ImageBackendPort for RemoteBackend {
    fn generate(&self, request: &BackendRequest) -> Result<Vec<ImagePayload>, BackendError> {
        let b64 = base64::engine::general_purpose::STANDARD;
        let body = self.workflow.instantiate(
            &request.prompt,
            &b64.encode(request.base_image.as_slice()),
            request.seed,
        );
        let _slot = self.gate.enter();
        let resp = self
            .client()?
            .post(&self.config.endpoint)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout
                } else {
                    BackendError::Unavailable(e.to_string())
                }
            })?;
        if !resp.status().is_success() {
            return Err(BackendError::Unavailable(format!("status {}", resp.status())));
        }
        let parsed: RemoteResponse = resp.json().map_err(|e| BackendError::Malformed(e.to_string()))?;
        if parsed.images.len() != GRID_SIZE {
            return Err(BackendError::Malformed(format!(
                "expected {GRID_SIZE} images, got {}",
                parsed.images.len()
            )));
        }
        parsed
            .images
            .into_iter()
            .map(|img| {
                if !img.media_type.starts_with("image/") {
                    return Err(BackendError::Malformed(format!("media type {}", img.media_type)));
                }
                let bytes = b64
                    .decode(img.data.as_bytes())
                    .map_err(|e| BackendError::Malformed(e.to_string()))?;
                Ok(ImagePayload {
                    bytes,
                    media_type: img.media_type,
                })
            })
            .collect()
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

/// The remote backend when `IMAGE_BACKEND_ENDPOINT` is set, the stub otherwise.
pub fn backend_from_env(workflow: WorkflowDescriptor) -> Arc<dyn ImageBackendPort> {
    match RemoteBackendConfig::from_env() {
        Some(cfg) => {
            tracing::info!(endpoint = %cfg.endpoint, "using remote image backend");
            Arc::new(RemoteBackend::new(cfg, workflow))
        }
        None => Arc::new(StubBackend),
    }
}
