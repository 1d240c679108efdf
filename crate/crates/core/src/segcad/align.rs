//! Mapping a 2D mask back onto CAD faces.

use std::collections::BTreeSet;

use super::{PipelineConfig, ScoredMask, SegError};
use crate::geometry::{CadModel, FaceId};
use crate::render::{RenderBuffers, NO_FACE};

#[derive(Debug, Clone, PartialEq)]
pub enum Alignment {
    /// Faces kept after coverage thresholding and pruning. `closest` is the
    /// masked face nearest to the camera that seeded the pruning.
    Part {
        faces: BTreeSet<FaceId>,
        closest: FaceId,
    },
    /// The mask covered too much of the model to be a part.
    Rejected { coverage: f64 },
    /// No face passed the coverage threshold.
    Empty,
}

/// Aligns one mask with the face-id and depth buffers of the view it was
/// computed on.
///
/// Faces count as candidates when more than `min_face_coverage` of their
/// visible pixels are masked. Candidates are then cut down to the connected
/// component, within the candidate set, of the candidate with the smallest
/// masked depth. This drops surfaces seen through openings of the part.
pub fn align_mask(
    mask: &ScoredMask,
    buffers: &RenderBuffers,
    model: &CadModel,
    cfg: &PipelineConfig,
) -> Result<Alignment, SegError> {
    let (w, h) = (buffers.width(), buffers.height());
    if mask.mask.width() != w || mask.mask.height() != h {
        return Err(SegError::DimensionMismatch {
            mask_width: mask.mask.width(),
            mask_height: mask.mask.height(),
            width: w,
            height: h,
        });
    }

    let n = model.face_count();
    let mut masked = vec![0usize; n];
    let mut nearest = vec![f64::INFINITY; n];
    for (i, &bit) in mask.mask.bits().iter().enumerate() {
        let f = buffers.face_id[i];
        if bit && f != NO_FACE {
            masked[f as usize] += 1;
            nearest[f as usize] = nearest[f as usize].min(buffers.depth[i]);
        }
    }

    let model_pixels = buffers.model_pixel_count();
    if model_pixels == 0 {
        return Ok(Alignment::Empty);
    }
    let coverage = masked.iter().sum::<usize>() as f64 / model_pixels as f64;
    if coverage > cfg.max_mask_model_coverage {
        return Ok(Alignment::Rejected { coverage });
    }

    let visible = buffers.pixel_counts();
    let candidates: BTreeSet<FaceId> = (0..n)
        .filter(|&f| masked[f] > 0 && masked[f] as f64 / visible[f] as f64 > cfg.min_face_coverage)
        .map(|f| f as FaceId)
        .collect();
    let Some(closest) = candidates.iter().copied().min_by(|&a, &b| {
        nearest[a as usize]
            .total_cmp(&nearest[b as usize])
            .then(a.cmp(&b))
    }) else {
        return Ok(Alignment::Empty);
    };
    Ok(Alignment::Part {
        faces: model.adjacency.component_within(closest, &candidates),
        closest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::render::{camera_for_view, render, Side, ViewSpec};
    use crate::segcad::Bitmap;

    fn top_view(model: &CadModel) -> RenderBuffers {
        let cam = camera_for_view(&model.aabb, &ViewSpec::main(Side::Top), 480, 270).unwrap();
        render(model, &cam)
    }

    fn mask_of(b: &RenderBuffers, pick: impl Fn(FaceId) -> bool) -> ScoredMask {
        let m = Bitmap::from_fn(b.width(), b.height(), |x, y| {
            b.face_at(x, y).is_some_and(&pick)
        });
        ScoredMask::new(m, 0.9)
    }

    #[test]
    fn exact_mask_maps_to_its_face() {
        let fx = fixtures::plate_with_four_holes();
        let model = fx.to_model();
        let b = top_view(&model);
        let wall = fx.manifest.holes[0].wall;
        let out = align_mask(
            &mask_of(&b, |f| f == wall),
            &b,
            &model,
            &PipelineConfig::default(),
        );
        assert_eq!(
            out.unwrap(),
            Alignment::Part {
                faces: BTreeSet::from([wall]),
                closest: wall
            }
        );
    }

    #[test]
    fn empty_mask_is_empty_result() {
        let model = fixtures::unit_cube().to_model();
        let b = top_view(&model);
        let m = ScoredMask::new(Bitmap::new(480, 270), 0.9);
        assert_eq!(
            align_mask(&m, &b, &model, &PipelineConfig::default()).unwrap(),
            Alignment::Empty
        );
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let model = fixtures::unit_cube().to_model();
        let b = top_view(&model);
        let m = ScoredMask::new(Bitmap::new(10, 10), 0.9);
        assert!(matches!(
            align_mask(&m, &b, &model, &PipelineConfig::default()),
            Err(SegError::DimensionMismatch { .. })
        ));
    }
}
