mod common;

use std::sync::Arc;

use cadquery_core::fixtures;
use cadquery_core::render::{
    camera_for_view, palette, read_depth, read_face_id_png, render, render_brute_force,
    write_depth, write_face_id_png, Scene, Side, ViewSpec, NO_FACE,
};
use cadquery_core::segcad::ViewSet;

fn all_views() -> Vec<ViewSpec> {
    let mut v = ViewSet::SixMainAxes.views();
    v.extend(ViewSet::EightCorners.views());
    v.extend(Side::ALL.map(ViewSpec::exact));
    v
}

#[test]
fn bvh_render_matches_brute_force() {
    for fx in [
        fixtures::unit_cube(),
        fixtures::two_cubes(),
        fixtures::cylinder(5.0, 10.0, 24),
    ] {
        let model = fx.to_model();
        for view in all_views() {
            let cam = camera_for_view(&model.aabb, &view, 160, 90).unwrap();
            let fast = render(&model, &cam);
            let slow = render_brute_force(&model, &cam);
            assert_eq!(fast.face_id, slow.face_id, "{} {}", fx.name(), view.label());
            assert_eq!(fast.color, slow.color);
            for (a, b) in fast.depth.iter().zip(&slow.depth) {
                assert!(
                    a == b || (a - b).abs() < 1e-9,
                    "{} {}: {a} vs {b}",
                    fx.name(),
                    view.label()
                );
            }
        }
    }
}

#[test]
fn color_buffer_decodes_to_face_ids() {
    let model = fixtures::plate_with_four_holes().to_model();
    let cam = camera_for_view(&model.aabb, &ViewSpec::corner(5), 320, 180).unwrap();
    let b = render(&model, &cam);
    for (c, &f) in b.color.pixels.iter().zip(&b.face_id) {
        let expected = (f != NO_FACE).then_some(f);
        assert_eq!(palette::face_for_color(*c), expected);
    }
}

#[test]
fn through_holes_show_background_from_top() {
    let fx = fixtures::plate_with_four_holes();
    let model = fx.to_model();
    let cam = camera_for_view(&model.aabb, &ViewSpec::exact(Side::Top), 600, 400).unwrap();
    let b = render(&model, &cam);
    for hole in &fx.manifest.holes {
        let center = cadquery_core::geometry::Point3::new(hole.center[0], hole.center[1], 8.0);
        let (x, y) = cam.project(&center).expect("hole center is in frame");
        assert_eq!(b.face_at(x, y), None, "hole at {:?}", hole.center);
    }
    let top = fx.manifest.named_faces["top"];
    let (x, y) = cam
        .project(&cadquery_core::geometry::Point3::new(30.0, 20.0, 8.0))
        .unwrap();
    assert_eq!(b.face_at(x, y), Some(top));
}

#[test]
fn exported_buffers_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let scene = Scene::new(Arc::new(fixtures::plate_mixed_holes().to_model()));
    let b = scene
        .render_view(&ViewSpec::main(Side::Front), 200, 120)
        .unwrap();
    let faces = dir.path().join("front.faces.png");
    let depth = dir.path().join("front.depth");
    write_face_id_png(&b, &faces).unwrap();
    write_depth(&b, &depth).unwrap();
    let (w, h, ids) = read_face_id_png(&faces).unwrap();
    assert_eq!((w, h), (200, 120));
    assert_eq!(ids, b.face_id);
    let (_, _, d) = read_depth(&depth).unwrap();
    for (a, b) in d.iter().zip(&b.depth) {
        if b.is_finite() {
            assert!((*a as f64 - b).abs() <= b.abs() * 1e-6);
        } else {
            assert!(a.is_infinite());
        }
    }
}

#[test]
fn visible_pixel_counts_sum_to_model_pixels() {
    let scene = Scene::new(Arc::new(fixtures::plate_before_block().to_model()));
    for view in ViewSet::SixMainAxes.views() {
        let b = scene.render_view(&view, 240, 135).unwrap();
        let total: usize = (0..b.face_count() as u32)
            .map(|f| b.visible_pixel_count(f).unwrap())
            .sum();
        assert_eq!(total, b.model_pixel_count());
    }
}
