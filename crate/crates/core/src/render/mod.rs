//! Orthographic ray-cast rendering.
//!
//! One ray per pixel produces the color image, the face-id buffer and the
//! depth buffer in a single pass, so the image handed to a segmentation
//! provider and the buffers used to map masks back onto faces are always
//! consistent. There is no shading: each face is flat-filled with its palette
//! color.

mod bvh;
mod camera;
mod export;
pub mod palette;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

pub use bvh::{intersect_brute_force, model_triangles, Bvh, Hit, RayDirection, Triangle};
pub use camera::{
    camera_for_view, OrthoCamera, Side, ViewKind, ViewSpec, CORNER_ANGLE_DEG, FRAME_MARGIN,
    MAIN_AXIS_PERTURBATION_DEG,
};
pub use export::{
    decode_png_rgb, encode_png_rgb, read_depth, read_face_id_png, write_color_png, write_depth,
    write_face_id_png, DEPTH_MAGIC,
};

use crate::geometry::{CadModel, FaceId};

pub const DEFAULT_WIDTH: u32 = 1920;
pub const DEFAULT_HEIGHT: u32 = 1080;
/// Marker for background pixels in [`RenderBuffers::face_id`].
pub const NO_FACE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("model bounding box is degenerate; nothing to frame")]
    DegenerateModel,
    #[error("face {0} does not exist in the model")]
    UnknownFace(FaceId),
    #[error("image I/O failed for {path}: {message}")]
    Image { path: String, message: String },
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![palette::BACKGROUND; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    pub camera: OrthoCamera,
    pub color: RgbImage,
    /// Face id per pixel, [`NO_FACE`] for background.
    pub face_id: Vec<u32>,
    /// Distance along the view direction from the camera plane; `+∞` for
    /// background.
    pub depth: Vec<f64>,
    face_count: usize,
}

impl RenderBuffers {
    pub fn width(&self) -> u32 {
        self.color.width
    }

    pub fn height(&self) -> u32 {
        self.color.height
    }

    pub fn face_at(&self, x: u32, y: u32) -> Option<FaceId> {
        let id = self.face_id[(y * self.width() + x) as usize];
        (id != NO_FACE).then_some(id)
    }

    /// Exact number of pixels showing `face`.
    pub fn visible_pixel_count(&self, face: FaceId) -> Result<usize, RenderError> {
        if face as usize >= self.face_count {
            return Err(RenderError::UnknownFace(face));
        }
        Ok(self.face_id.iter().filter(|&&f| f == face).count())
    }

    /// Visible pixel count for every face, indexed by face id.
    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.face_count];
        for &f in &self.face_id {
            if f != NO_FACE {
                counts[f as usize] += 1;
            }
        }
        counts
    }

    /// Pixels covered by any face.
    pub fn model_pixel_count(&self) -> usize {
        self.face_id.iter().filter(|&&f| f != NO_FACE).count()
    }

    pub fn face_count(&self) -> usize {
        self.face_count
    }
}

fn assemble(
    model: &CadModel,
    camera: &OrthoCamera,
    trace: impl Fn(u32, u32) -> Option<Hit> + Sync,
) -> RenderBuffers {
    let (w, h) = (camera.image_width, camera.image_height);
    let rows: Vec<Vec<Option<Hit>>> = (0..h)
        .into_par_iter()
        .map(|y| (0..w).map(|x| trace(x, y)).collect())
        .collect();
    let n = w as usize * h as usize;
    let mut color = RgbImage::new(w, h);
    let mut face_id = vec![NO_FACE; n];
    let mut depth = vec![f64::INFINITY; n];
    for (i, hit) in rows.into_iter().flatten().enumerate() {
        if let Some(hit) = hit {
            face_id[i] = hit.face;
            depth[i] = hit.t;
            color.pixels[i] = palette::face_color(hit.face);
        }
    }
    RenderBuffers {
        camera: *camera,
        color,
        face_id,
        depth,
        face_count: model.face_count(),
    }
}

/// Renders through a prebuilt BVH.
pub fn render_with(model: &CadModel, bvh: &Bvh, camera: &OrthoCamera) -> RenderBuffers {
    let ray = RayDirection::new(camera.view_direction);
    assemble(model, camera, |x, y| {
        bvh.intersect(&camera.ray_origin(x, y), &ray)
    })
}

/// Builds a BVH for `model` and renders one view.
pub fn render(model: &CadModel, camera: &OrthoCamera) -> RenderBuffers {
    render_with(model, &Bvh::from_model(model), camera)
}

/// Reference renderer: intersects every pixel ray with every triangle.
pub fn render_brute_force(model: &CadModel, camera: &OrthoCamera) -> RenderBuffers {
    let tris = model_triangles(model);
    let dir = camera.view_direction;
    assemble(model, camera, |x, y| {
        intersect_brute_force(&tris, &camera.ray_origin(x, y), &dir)
    })
}

/// Count of pixels showing `face`.
pub fn visible_pixel_count(buffers: &RenderBuffers, face: FaceId) -> Result<usize, RenderError> {
    buffers.visible_pixel_count(face)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    view: String,
    width: u32,
    height: u32,
}

/// A model with its BVH and a cache of rendered views, shared by every
/// consumer that needs images of the same model.
pub struct Scene {
    model: Arc<CadModel>,
    bvh: Bvh,
    cache: Mutex<HashMap<CacheKey, Arc<RenderBuffers>>>,
}

impl Scene {
    pub fn new(model: Arc<CadModel>) -> Self {
        let bvh = Bvh::from_model(&model);
        Self {
            model,
            bvh,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &CadModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<CadModel> {
        Arc::clone(&self.model)
    }

    pub fn camera(
        &self,
        view: &ViewSpec,
        width: u32,
        height: u32,
    ) -> Result<OrthoCamera, RenderError> {
        camera_for_view(&self.model.aabb, view, width, height)
    }

    /// Renders `view`, reusing an earlier render of the same view and size.
    pub fn render_view(
        &self,
        view: &ViewSpec,
        width: u32,
        height: u32,
    ) -> Result<Arc<RenderBuffers>, RenderError> {
        let key = CacheKey {
            view: view.label(),
            width,
            height,
        };
        if let Some(hit) = self.cache.lock().expect("render cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let camera = self.camera(view, width, height)?;
        let buffers = Arc::new(render_with(&self.model, &self.bvh, &camera));
        self.cache
            .lock()
            .expect("render cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&buffers));
        Ok(buffers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::collections::BTreeSet;

    fn distinct_faces(b: &RenderBuffers) -> BTreeSet<u32> {
        b.face_id
            .iter()
            .copied()
            .filter(|&f| f != NO_FACE)
            .collect()
    }

    #[test]
    fn exact_top_view_of_cube_shows_only_top() {
        let model = fixtures::unit_cube().to_model();
        let cam = camera_for_view(&model.aabb, &ViewSpec::exact(Side::Top), 320, 180).unwrap();
        let b = render(&model, &cam);
        assert_eq!(distinct_faces(&b), BTreeSet::from([1]));
    }

    #[test]
    fn corner_view_of_cube_shows_three_faces() {
        let model = fixtures::unit_cube().to_model();
        for k in 0..8 {
            let cam = camera_for_view(&model.aabb, &ViewSpec::corner(k), 320, 180).unwrap();
            assert_eq!(distinct_faces(&render(&model, &cam)).len(), 3, "octant {k}");
        }
    }

    #[test]
    fn buffers_agree_with_each_other() {
        let model = fixtures::plate_with_four_holes().to_model();
        let cam = camera_for_view(&model.aabb, &ViewSpec::corner(5), 300, 200).unwrap();
        let b = render(&model, &cam);
        for i in 0..b.face_id.len() {
            let f = b.face_id[i];
            if f == NO_FACE {
                assert_eq!(b.depth[i], f64::INFINITY);
                assert_eq!(b.color.pixels[i], palette::BACKGROUND);
            } else {
                assert!((f as usize) < model.face_count());
                assert!(b.depth[i].is_finite());
                assert_eq!(b.color.pixels[i], palette::face_color(f));
            }
        }
    }

    #[test]
    fn visible_count_matches_color_mask_and_rejects_unknown_face() {
        let model = fixtures::unit_cube().to_model();
        let cam = camera_for_view(&model.aabb, &ViewSpec::exact(Side::Top), 200, 100).unwrap();
        let b = render(&model, &cam);
        let k = b.visible_pixel_count(1).unwrap();
        let by_color = b
            .color
            .pixels
            .iter()
            .filter(|&&c| c == palette::face_color(1))
            .count();
        assert!(k > 0);
        assert_eq!(k, by_color);
        assert_eq!(
            b.visible_pixel_count(0).unwrap(),
            0,
            "bottom face is occluded"
        );
        assert!(matches!(
            b.visible_pixel_count(6),
            Err(RenderError::UnknownFace(6))
        ));
    }

    #[test]
    fn scene_caches_views() {
        let scene = Scene::new(Arc::new(fixtures::unit_cube().to_model()));
        let a = scene
            .render_view(&ViewSpec::main(Side::Top), 64, 36)
            .unwrap();
        let b = scene
            .render_view(&ViewSpec::main(Side::Top), 64, 36)
            .unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
