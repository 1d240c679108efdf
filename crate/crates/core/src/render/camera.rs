use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::RenderError;
use crate::geometry::{Aabb, Point3, Vector3};

/// Fraction added around the fitted model silhouette.
pub const FRAME_MARGIN: f64 = 0.05;
/// Default azimuth perturbation for main-axis views, degrees.
pub const MAIN_AXIS_PERTURBATION_DEG: f64 = 1.0;
/// Camera azimuth and elevation used by corner views, degrees.
pub const CORNER_ANGLE_DEG: f64 = 45.0;

/// A named viewing side. The world is Z-up; `top` looks along −Z and
/// `front` looks along +Y (the camera sits on the −Y side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
    Left,
    Right,
    Front,
    Back,
}

impl Side {
    pub const ALL: [Side; 6] = [
        Side::Top,
        Side::Bottom,
        Side::Left,
        Side::Right,
        Side::Front,
        Side::Back,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Side::Top => "top",
            Side::Bottom => "bottom",
            Side::Left => "left",
            Side::Right => "right",
            Side::Front => "front",
            Side::Back => "back",
        }
    }

    /// Unperturbed viewing direction and the camera's up hint.
    fn frame(self) -> (Vector3, Vector3) {
        let z = Vector3::z();
        match self {
            Side::Top => (-z, Vector3::y()),
            Side::Bottom => (z, Vector3::y()),
            Side::Front => (Vector3::y(), z),
            Side::Back => (-Vector3::y(), z),
            Side::Right => (-Vector3::x(), z),
            Side::Left => (Vector3::x(), z),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Side::ALL
            .into_iter()
            .find(|side| side.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown side `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    MainAxis(Side),
    /// Octant index: bit 0 selects +X, bit 1 +Y, bit 2 +Z for the camera position.
    Corner(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub kind: ViewKind,
    pub azimuth_perturbation_deg: f64,
}

impl ViewSpec {
    /// Main-axis view with the default one-degree perturbation.
    pub fn main(side: Side) -> Self {
        Self {
            kind: ViewKind::MainAxis(side),
            azimuth_perturbation_deg: MAIN_AXIS_PERTURBATION_DEG,
        }
    }

    /// Main-axis view looking exactly along the axis.
    pub fn exact(side: Side) -> Self {
        Self {
            kind: ViewKind::MainAxis(side),
            azimuth_perturbation_deg: 0.0,
        }
    }

    pub fn corner(octant: u8) -> Self {
        assert!(octant < 8, "octant index out of range");
        Self {
            kind: ViewKind::Corner(octant),
            azimuth_perturbation_deg: 0.0,
        }
    }

    /// Stable textual key, used for caching and provenance.
    pub fn label(&self) -> String {
        match self.kind {
            ViewKind::MainAxis(s) if self.azimuth_perturbation_deg == 0.0 => format!("{s}@exact"),
            ViewKind::MainAxis(s)
                if self.azimuth_perturbation_deg == MAIN_AXIS_PERTURBATION_DEG =>
            {
                s.to_string()
            }
            ViewKind::MainAxis(s) => format!("{s}@{}", self.azimuth_perturbation_deg),
            ViewKind::Corner(k) => format!("corner:{k}"),
        }
    }
}

impl FromStr for ViewSpec {
    type Err = String;

    /// Accepts `top`, `corner:3`, `top@exact`, `top@2.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(k) = s.strip_prefix("corner:") {
            let k: u8 = k.parse().map_err(|_| format!("bad octant in `{s}`"))?;
            if k >= 8 {
                return Err(format!("octant must be 0..7, got {k}"));
            }
            return Ok(ViewSpec::corner(k));
        }
        let (side, pert) = match s.split_once('@') {
            None => (s, MAIN_AXIS_PERTURBATION_DEG),
            Some((side, "exact")) => (side, 0.0),
            Some((side, deg)) => (
                side,
                deg.parse()
                    .map_err(|_| format!("bad perturbation in `{s}`"))?,
            ),
        };
        Ok(ViewSpec {
            kind: ViewKind::MainAxis(side.parse()?),
            azimuth_perturbation_deg: pert,
        })
    }
}

/// Orthographic camera. Rays for all pixels share `view_direction` and
/// start on the plane `viewport_center - eye_distance * view_direction`;
/// depths are measured from that plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoCamera {
    pub view_direction: Vector3,
    pub up: Vector3,
    pub right: Vector3,
    pub image_width: u32,
    pub image_height: u32,
    pub world_units_per_pixel: f64,
    pub viewport_center: Point3,
    pub eye_distance: f64,
}

impl OrthoCamera {
    /// Ray origin for the center of pixel `(x, y)`; `y` grows downward.
    #[inline]
    pub fn ray_origin(&self, x: u32, y: u32) -> Point3 {
        let s = self.world_units_per_pixel;
        let u = (x as f64 + 0.5 - self.image_width as f64 / 2.0) * s;
        let v = (self.image_height as f64 / 2.0 - y as f64 - 0.5) * s;
        self.viewport_center + self.right * u + self.up * v
            - self.view_direction * self.eye_distance
    }

    /// Pixel containing the projection of `p`, if inside the image.
    pub fn project(&self, p: &Point3) -> Option<(u32, u32)> {
        let d = p - self.viewport_center;
        let s = self.world_units_per_pixel;
        let x = d.dot(&self.right) / s + self.image_width as f64 / 2.0;
        let y = self.image_height as f64 / 2.0 - d.dot(&self.up) / s;
        (x >= 0.0 && y >= 0.0 && x < self.image_width as f64 && y < self.image_height as f64)
            .then_some((x as u32, y as u32))
    }
}

fn direction_and_up(view: &ViewSpec) -> (Vector3, Vector3) {
    match view.kind {
        ViewKind::MainAxis(side) => {
            let (dir, up) = side.frame();
            if view.azimuth_perturbation_deg == 0.0 {
                return (dir, up);
            }
            // Azimuth: rotate about the camera's vertical axis. For side views
            // that is the world up axis; for top/bottom it tilts the view.
            let rot = Rotation3::from_axis_angle(
                &Unit::new_normalize(up),
                view.azimuth_perturbation_deg.to_radians(),
            );
            (rot * dir, up)
        }
        ViewKind::Corner(k) => {
            let sx = if k & 1 != 0 { 1.0 } else { -1.0 };
            let sy = if k & 2 != 0 { 1.0 } else { -1.0 };
            let sz = if k & 4 != 0 { 1.0 } else { -1.0 };
            let azimuth = f64::atan2(sy, sx);
            let elevation = sz * CORNER_ANGLE_DEG.to_radians();
            let to_camera = Vector3::new(
                elevation.cos() * azimuth.cos(),
                elevation.cos() * azimuth.sin(),
                elevation.sin(),
            );
            (-to_camera, Vector3::z())
        }
    }
}

/// Fits an orthographic camera for `view` around `aabb`.
pub fn camera_for_view(
    aabb: &Aabb,
    view: &ViewSpec,
    width: u32,
    height: u32,
) -> Result<OrthoCamera, RenderError> {
    let diagonal = aabb.diagonal();
    if diagonal.is_nan() || diagonal <= 0.0 || width == 0 || height == 0 {
        return Err(RenderError::DegenerateModel);
    }
    let (dir, up_hint) = direction_and_up(view);
    let dir = dir.normalize();
    let right = dir.cross(&up_hint).normalize();
    let up = right.cross(&dir).normalize();

    let center = aabb.center();
    let (mut half_w, mut half_h) = (0.0f64, 0.0f64);
    for c in aabb.corners() {
        let d = c - center;
        half_w = half_w.max(d.dot(&right).abs());
        half_h = half_h.max(d.dot(&up).abs());
    }
    let fit = (2.0 * half_w / width as f64).max(2.0 * half_h / height as f64);
    if fit.is_nan() || fit <= 0.0 {
        return Err(RenderError::DegenerateModel);
    }
    Ok(OrthoCamera {
        view_direction: dir,
        up,
        right,
        image_width: width,
        image_height: height,
        world_units_per_pixel: fit * (1.0 + FRAME_MARGIN),
        viewport_center: center,
        eye_distance: diagonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Aabb {
        Aabb {
            min: Point3::origin(),
            max: Point3::new(1.0, 1.0, 1.0),
        }
    }

    fn angle_deg(a: &Vector3, b: &Vector3) -> f64 {
        a.normalize()
            .dot(&b.normalize())
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees()
    }

    #[test]
    fn top_view_is_within_one_degree_of_down() {
        let cam = camera_for_view(&unit_box(), &ViewSpec::main(Side::Top), 1920, 1080).unwrap();
        let a = angle_deg(&cam.view_direction, &-Vector3::z());
        assert!(a <= 1.0 + 1e-12 && a > 0.5, "angle {a}");
        assert!(cam.view_direction.dot(&cam.up).abs() < 1e-9);
    }

    #[test]
    fn side_views_perturb_about_world_up() {
        for side in [Side::Front, Side::Back, Side::Left, Side::Right] {
            let cam = camera_for_view(&unit_box(), &ViewSpec::main(side), 640, 480).unwrap();
            assert!(
                cam.view_direction.z.abs() < 1e-15,
                "{side}: stays horizontal"
            );
            let (exact, _) = side.frame();
            assert!((angle_deg(&cam.view_direction, &exact) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn corner_view_has_45_degree_azimuth_and_elevation() {
        let cam = camera_for_view(&unit_box(), &ViewSpec::corner(7), 1920, 1080).unwrap();
        let to_camera = -cam.view_direction;
        let elevation = to_camera.z.asin().to_degrees();
        let azimuth = to_camera.y.atan2(to_camera.x).to_degrees();
        assert!((elevation - 45.0).abs() < 1e-9);
        assert!((azimuth - 45.0).abs() < 1e-9);
        // ray through the image center passes through the model center
        assert_eq!(cam.viewport_center, Point3::new(0.5, 0.5, 0.5));
        assert!(cam.view_direction.dot(&cam.up).abs() < 1e-9);
    }

    #[test]
    fn camera_is_deterministic() {
        let v = ViewSpec::main(Side::Left);
        assert_eq!(
            camera_for_view(&unit_box(), &v, 800, 600).unwrap(),
            camera_for_view(&unit_box(), &v, 800, 600).unwrap()
        );
    }

    #[test]
    fn frame_fits_with_margin() {
        let cam = camera_for_view(&unit_box(), &ViewSpec::exact(Side::Top), 200, 100).unwrap();
        // height-limited: 1 mm over 100 px, plus 5 %
        assert!((cam.world_units_per_pixel - 0.0105).abs() < 1e-15);
        for c in unit_box().corners() {
            assert!(cam.project(&c).is_some());
        }
    }

    #[test]
    fn degenerate_box_is_rejected() {
        let p = Aabb {
            min: Point3::new(1.0, 1.0, 1.0),
            max: Point3::new(1.0, 1.0, 1.0),
        };
        assert!(matches!(
            camera_for_view(&p, &ViewSpec::main(Side::Top), 10, 10),
            Err(RenderError::DegenerateModel)
        ));
    }

    #[test]
    fn view_spec_parsing() {
        assert_eq!(
            "top".parse::<ViewSpec>().unwrap(),
            ViewSpec::main(Side::Top)
        );
        assert_eq!("corner:3".parse::<ViewSpec>().unwrap(), ViewSpec::corner(3));
        assert_eq!(
            "left@exact".parse::<ViewSpec>().unwrap(),
            ViewSpec::exact(Side::Left)
        );
        assert!("corner:9".parse::<ViewSpec>().is_err());
        assert!("sideways".parse::<ViewSpec>().is_err());
        for v in [
            ViewSpec::main(Side::Back),
            ViewSpec::exact(Side::Top),
            ViewSpec::corner(5),
        ] {
            assert_eq!(v.label().parse::<ViewSpec>().unwrap(), v);
        }
    }
}
