//! Segmentation backends.

use std::collections::BTreeSet;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mask::{Bitmap, RleMask, ScoredMask};
use crate::geometry::{CadModel, FaceId, PartLabels};
use crate::render::{encode_png_rgb, palette, RgbImage};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("segmentation backend unavailable: {0}")]
    Unavailable(String),
    #[error("segmentation backend sent an invalid response: {0}")]
    InvalidResponse(String),
}

/// Produces scored masks for a text prompt on a rendered image.
///
/// Implementations must be stateless per call. Providers that cannot serve
/// overlapping calls return `false` from [`concurrent`](Self::concurrent) and
/// the pipeline then queries views one at a time.
pub trait SegmentationProvider: Send + Sync {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        box_threshold: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError>;

    fn concurrent(&self) -> bool {
        true
    }
}

impl<P: SegmentationProvider + ?Sized> SegmentationProvider for &P {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        box_threshold: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        (**self).segment(image, prompt, box_threshold)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

pub fn normalize_prompt(prompt: &str) -> String {
    prompt.trim().to_lowercase()
}

/// Ground-truth provider: decodes face ids from palette colors and emits one
/// exact mask per labeled instance of the prompt that is visible in the image.
///
/// Every mask carries the same configurable score and is returned regardless
/// of the threshold, leaving the cut to the pipeline.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    labels: PartLabels,
    score: f64,
}

impl OracleProvider {
    pub const DEFAULT_SCORE: f64 = 0.9;

    pub fn new(labels: PartLabels) -> Self {
        Self {
            labels,
            score: Self::DEFAULT_SCORE,
        }
    }

    pub fn from_model(model: &CadModel) -> Self {
        Self::new(model.labels.clone())
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn instances(&self, prompt: &str) -> &[BTreeSet<FaceId>] {
        self.labels
            .get(&normalize_prompt(prompt))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

impl SegmentationProvider for OracleProvider {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        _box_threshold: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        let instances = self.instances(prompt);
        if instances.is_empty() {
            return Ok(Vec::new());
        }
        let faces: Vec<Option<FaceId>> = image
            .pixels
            .iter()
            .map(|&c| palette::face_for_color(c))
            .collect();
        let mut out = Vec::new();
        for instance in instances {
            let mask = Bitmap::from_fn(image.width, image.height, |x, y| {
                faces[(y * image.width + x) as usize].is_some_and(|f| instance.contains(&f))
            });
            if mask.count() > 0 {
                out.push(ScoredMask::new(mask, self.score));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize)]
struct SegmentRequest<'a> {
    image: String,
    prompt: &'a str,
    box_threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireDetection {
    pub bbox: [u32; 4],
    pub score: f64,
    pub mask_rle: RleMask,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    #[serde(default)]
    pub model_versions: serde_json::Value,
}

/// Client for the HTTP segmentation service (`POST /v1/segment`,
/// `GET /v1/health`).
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    base_url: String,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    pub fn new(base_url: &str) -> Self {
        Self::with_timeout(base_url, Self::DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn health(&self) -> Result<HealthStatus, ProviderError> {
        let url = format!("{}/v1/health", self.base_url);
        let mut resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| ProviderError::Unavailable(format!("GET {url}: {e}")))?;
        let status = resp.status().as_u16();
        let body: HealthStatus = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::InvalidResponse(format!("health body: {e}")))?;
        if status != 200 {
            return Err(ProviderError::Unavailable(format!(
                "service not ready (HTTP {status}, status {:?})",
                body.status
            )));
        }
        Ok(body)
    }

    fn decode(
        response: SegmentResponse,
        width: u32,
        height: u32,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        response
            .detections
            .into_iter()
            .map(|d| {
                if d.mask_rle.size != [height, width] {
                    return Err(ProviderError::InvalidResponse(format!(
                        "mask size {:?} does not match image {height}x{width}",
                        d.mask_rle.size
                    )));
                }
                let mask = d
                    .mask_rle
                    .decode()
                    .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
                let scored = ScoredMask {
                    mask,
                    bbox: d.bbox,
                    score: d.score,
                };
                scored
                    .validate()
                    .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
                Ok(scored)
            })
            .collect()
    }
}

impl SegmentationProvider for RemoteProvider {
    fn segment(
        &self,
        image: &RgbImage,
        prompt: &str,
        box_threshold: f64,
    ) -> Result<Vec<ScoredMask>, ProviderError> {
        let png = encode_png_rgb(image).map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let request = SegmentRequest {
            image: base64::engine::general_purpose::STANDARD.encode(png),
            prompt,
            box_threshold,
        };
        let url = format!("{}/v1/segment", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&request)
            .map_err(|e| ProviderError::Unavailable(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(ProviderError::Unavailable(format!(
                "POST {url}: HTTP {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }
        let body: SegmentResponse = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_json()
            .map_err(|e| ProviderError::InvalidResponse(e.to_string()))?;
        Self::decode(body, image.width, image.height)
    }
}
