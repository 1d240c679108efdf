//! Multi-view part segmentation on CAD faces.
//!
//! The model is rendered from a set of views, a [`SegmentationProvider`]
//! returns scored masks for a text prompt on each image, every mask is mapped
//! back to the CAD faces under it, and the per-view detections are merged into
//! connected face sets ([`PartInstance`]s).

mod align;
mod mask;
mod pipeline;
mod provider;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align_mask, Alignment};
pub use mask::{Bitmap, RleMask, ScoredMask};
pub use pipeline::{detect_in_view, filter_by_sides, merge_detections, segment_model};
pub use provider::{
    normalize_prompt, HealthStatus, OracleProvider, ProviderError, RemoteProvider, SegmentResponse,
    SegmentationProvider, WireDetection,
};

use crate::geometry::FaceId;
use crate::render::{RenderError, Side, ViewSpec, DEFAULT_HEIGHT, DEFAULT_WIDTH};

pub const DEFAULT_BOX_SCORE_THRESHOLD: f64 = 0.30;
pub const DEFAULT_MAX_MASK_MODEL_COVERAGE: f64 = 0.45;
pub const DEFAULT_MIN_FACE_COVERAGE: f64 = 0.05;
pub const DEFAULT_MIN_VISIBILITY_PIXELS: usize = 10;

#[derive(Debug, Error)]
pub enum SegError {
    #[error("mask is {mask_width}x{mask_height} but the render is {width}x{height}")]
    DimensionMismatch {
        mask_width: u32,
        mask_height: u32,
        width: u32,
        height: u32,
    },
    #[error("view {view}: {source}")]
    ProviderUnavailable {
        view: String,
        #[source]
        source: ProviderError,
    },
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ViewSet {
    /// Top, bottom, front, back, left, right, each perturbed by 1° of azimuth.
    #[default]
    SixMainAxes,
    /// The eight octant corners at 45° azimuth and elevation.
    EightCorners,
}

impl ViewSet {
    pub fn views(self) -> Vec<ViewSpec> {
        match self {
            ViewSet::SixMainAxes => Side::ALL.iter().map(|&s| ViewSpec::main(s)).collect(),
            ViewSet::EightCorners => (0..8).map(ViewSpec::corner).collect(),
        }
    }
}

impl std::str::FromStr for ViewSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "six_main_axes" | "six" | "6" => Ok(ViewSet::SixMainAxes),
            "eight_corners" | "eight" | "8" => Ok(ViewSet::EightCorners),
            other => Err(format!("unknown view set `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Detections scoring below this are dropped.
    pub box_score_threshold: f64,
    /// Masks covering more than this fraction of the model's pixels are
    /// rejected outright.
    pub max_mask_model_coverage: f64,
    /// A face is a candidate only if more than this fraction of its visible
    /// pixels is masked.
    pub min_face_coverage: f64,
    pub view_set: ViewSet,
    pub render_width: u32,
    pub render_height: u32,
    /// Side filtering keeps a part only if at least this many of its pixels
    /// are visible from one of the requested sides.
    pub min_visibility_pixels: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            box_score_threshold: DEFAULT_BOX_SCORE_THRESHOLD,
            max_mask_model_coverage: DEFAULT_MAX_MASK_MODEL_COVERAGE,
            min_face_coverage: DEFAULT_MIN_FACE_COVERAGE,
            view_set: ViewSet::SixMainAxes,
            render_width: DEFAULT_WIDTH,
            render_height: DEFAULT_HEIGHT,
            min_visibility_pixels: DEFAULT_MIN_VISIBILITY_PIXELS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), SegError> {
        for (name, v) in [
            ("box_score_threshold", self.box_score_threshold),
            ("max_mask_model_coverage", self.max_mask_model_coverage),
            ("min_face_coverage", self.min_face_coverage),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SegError::InvalidConfig(format!(
                    "{name} = {v} is not in [0, 1]"
                )));
            }
        }
        if self.render_width == 0 || self.render_height == 0 {
            return Err(SegError::InvalidConfig(
                "render size must be non-zero".into(),
            ));
        }
        Ok(())
    }
}

/// Where a detection came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub view: String,
    pub mask_index: usize,
    pub score: f64,
}

/// A connected set of faces detected as one part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartInstance {
    pub face_ids: BTreeSet<FaceId>,
    pub provenance: Vec<Provenance>,
}

impl PartInstance {
    pub fn new(face_ids: BTreeSet<FaceId>) -> Self {
        Self {
            face_ids,
            provenance: Vec::new(),
        }
    }
}
