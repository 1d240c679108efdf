//! View sweep, cross-view merging and side filtering.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::provider::SegmentationProvider;
use super::{align_mask, Alignment, PartInstance, PipelineConfig, Provenance, SegError};
use crate::geometry::FaceId;
use crate::render::{Scene, Side, ViewSpec};

/// Renders one view, segments it and aligns every detection scoring at least
/// `cfg.box_score_threshold`.
pub fn detect_in_view(
    scene: &Scene,
    view: &ViewSpec,
    prompt: &str,
    provider: &dyn SegmentationProvider,
    cfg: &PipelineConfig,
) -> Result<Vec<PartInstance>, SegError> {
    let buffers = scene.render_view(view, cfg.render_width, cfg.render_height)?;
    let label = view.label();
    let masks = provider
        .segment(&buffers.color, prompt, cfg.box_score_threshold)
        .map_err(|source| SegError::ProviderUnavailable {
            view: label.clone(),
            source,
        })?;
    let mut parts = Vec::new();
    for (mask_index, mask) in masks.iter().enumerate() {
        if mask.score < cfg.box_score_threshold {
            continue;
        }
        if let Alignment::Part { faces, .. } = align_mask(mask, &buffers, scene.model(), cfg)? {
            parts.push(PartInstance {
                face_ids: faces,
                provenance: vec![Provenance {
                    view: label.clone(),
                    mask_index,
                    score: mask.score,
                }],
            });
        }
    }
    Ok(parts)
}

/// Runs the provider on every view of `cfg.view_set` and merges the
/// detections into disjoint parts.
pub fn segment_model(
    scene: &Scene,
    prompt: &str,
    provider: &dyn SegmentationProvider,
    cfg: &PipelineConfig,
) -> Result<Vec<PartInstance>, SegError> {
    if prompt.trim().is_empty() {
        return Err(SegError::EmptyPrompt);
    }
    cfg.validate()?;
    let views = cfg.view_set.views();
    let per_view: Vec<Vec<PartInstance>> = if provider.concurrent() {
        views
            .par_iter()
            .map(|v| detect_in_view(scene, v, prompt, provider, cfg))
            .collect::<Result<_, _>>()?
    } else {
        views
            .iter()
            .map(|v| detect_in_view(scene, v, prompt, provider, cfg))
            .collect::<Result<_, _>>()?
    };
    Ok(merge_detections(per_view.into_iter().flatten().collect()))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Unions detections whose face sets intersect, transitively. The result is
/// pairwise disjoint, ordered by smallest face id, with provenance kept in
/// input order.
pub fn merge_detections(detections: Vec<PartInstance>) -> Vec<PartInstance> {
    let mut parent: Vec<usize> = (0..detections.len()).collect();
    let mut owner: HashMap<FaceId, usize> = HashMap::new();
    for (i, d) in detections.iter().enumerate() {
        for &f in &d.face_ids {
            match owner.get(&f) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    owner.insert(f, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, PartInstance> = BTreeMap::new();
    for (i, d) in detections.into_iter().enumerate() {
        let root = find(&mut parent, i);
        let entry = groups
            .entry(root)
            .or_insert_with(|| PartInstance::new(BTreeSet::new()));
        entry.face_ids.extend(d.face_ids);
        entry.provenance.extend(d.provenance);
    }
    let mut out: Vec<PartInstance> = groups
        .into_values()
        .filter(|p| !p.face_ids.is_empty())
        .collect();
    out.sort_by_key(|p| p.face_ids.first().copied());
    out
}

/// Keeps the parts that show at least `cfg.min_visibility_pixels` pixels in
/// the main-axis view of at least one of `sides`.
pub fn filter_by_sides(
    scene: &Scene,
    parts: Vec<PartInstance>,
    sides: &BTreeSet<Side>,
    cfg: &PipelineConfig,
) -> Result<Vec<PartInstance>, SegError> {
    if sides.is_empty() {
        return Err(SegError::InvalidConfig(
            "side filter needs at least one side".into(),
        ));
    }
    let counts = sides
        .iter()
        .map(|&s| {
            scene
                .render_view(&ViewSpec::main(s), cfg.render_width, cfg.render_height)
                .map(|b| b.pixel_counts())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts
        .into_iter()
        .filter(|p| {
            counts.iter().any(|c| {
                p.face_ids.iter().map(|&f| c[f as usize]).sum::<usize>()
                    >= cfg.min_visibility_pixels
            })
        })
        .collect())
}
