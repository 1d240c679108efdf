//! Measurements of face sets in world coordinates, millimeters.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{face_visible_area, Aabb, CadModel, FaceId, Point3, Vector3};

/// Largest relative standard deviation of radial distances still accepted as
/// a cylinder.
pub const MAX_RADIAL_RSD: f64 = 0.05;
pub const MIN_CYLINDER_VERTICES: usize = 8;
/// Faces whose triangle normals all agree within this angle are planar.
const PLANAR_TOLERANCE_DEG: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("part has no faces")]
    EmptyPart,
    #[error("face {0} does not exist in the model")]
    UnknownFace(FaceId),
    #[error("cylinder fit needs at least {MIN_CYLINDER_VERTICES} distinct vertices, part has {0}")]
    TooFewVertices(usize),
    #[error("part is not cylindrical: {0}")]
    NotCylindrical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderFit {
    /// Unit axis; the sign is chosen so that its largest component is positive.
    pub axis: Vector3,
    pub radius: f64,
    /// Extent of the part along the axis.
    pub depth: f64,
    /// Relative standard deviation of the radial distances.
    pub radial_rsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartMeasurements {
    pub center: [f64; 3],
    pub extents: [f64; 3],
    pub radius: Option<f64>,
    pub diameter: Option<f64>,
    pub axis: Option<[f64; 3]>,
    pub depth: Option<f64>,
    pub face_area_total: f64,
}

impl PartMeasurements {
    /// Box quantities always; cylinder quantities when the fit succeeds.
    pub fn compute(model: &CadModel, faces: &BTreeSet<FaceId>) -> Result<Self, MetricsError> {
        let aabb = part_aabb(model, faces)?;
        let fit = fit_cylinder(model, faces).ok();
        let face_area_total = faces
            .iter()
            .map(|&f| face_visible_area(model, model.face(f).expect("checked by part_aabb")))
            .sum();
        Ok(Self {
            center: aabb.center().coords.into(),
            extents: aabb.extents().into(),
            radius: fit.map(|c| c.radius),
            diameter: fit.map(|c| 2.0 * c.radius),
            axis: fit.map(|c| c.axis.into()),
            depth: fit.map(|c| c.depth),
            face_area_total,
        })
    }
}

fn check_faces(model: &CadModel, faces: &BTreeSet<FaceId>) -> Result<(), MetricsError> {
    if faces.is_empty() {
        return Err(MetricsError::EmptyPart);
    }
    match faces.iter().find(|&&f| model.face(f).is_none()) {
        Some(&f) => Err(MetricsError::UnknownFace(f)),
        None => Ok(()),
    }
}

/// Axis-aligned box over every vertex of the part.
pub fn part_aabb(model: &CadModel, faces: &BTreeSet<FaceId>) -> Result<Aabb, MetricsError> {
    check_faces(model, faces)?;
    let verts = model.vertices_of_faces(faces);
    Aabb::from_points(verts.iter().map(|&i| &model.vertices[i as usize]))
        .ok_or(MetricsError::EmptyPart)
}

/// Full lengths along the world axes.
pub fn part_extents(model: &CadModel, faces: &BTreeSet<FaceId>) -> Result<Vector3, MetricsError> {
    Ok(part_aabb(model, faces)?.extents())
}

/// Center of the part's axis-aligned box.
pub fn part_center(model: &CadModel, faces: &BTreeSet<FaceId>) -> Result<Point3, MetricsError> {
    Ok(part_aabb(model, faces)?.center())
}

fn unit_normal(model: &CadModel, tri: &[u32; 3]) -> Option<(Vector3, f64)> {
    let [a, b, c] = model.triangle_points(tri);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    (len > 0.0).then(|| (n / len, len / 2.0))
}

fn is_planar(model: &CadModel, face: FaceId) -> bool {
    let cos_tol = PLANAR_TOLERANCE_DEG.to_radians().cos();
    let mut normals = model
        .face(face)
        .into_iter()
        .flat_map(|f| &f.triangles)
        .filter_map(|t| unit_normal(model, t));
    let Some((first, _)) = normals.next() else {
        return true;
    };
    normals.all(|(n, _)| n.dot(&first) >= cos_tol)
}

/// Fits a cylinder to the curved faces of the part.
///
/// The axis is the direction least represented among the area-weighted
/// triangle normals of curved faces (the smallest eigenvector of their
/// scatter matrix). The radius is the mean distance of curved-face vertices
/// from the axis line through their centroid. Planar faces such as hole
/// floors or caps are ignored for axis and radius but count toward the
/// depth, which spans all part vertices along the axis.
pub fn fit_cylinder(
    model: &CadModel,
    faces: &BTreeSet<FaceId>,
) -> Result<CylinderFit, MetricsError> {
    check_faces(model, faces)?;
    let all_vertices = model.vertices_of_faces(faces);
    if all_vertices.len() < MIN_CYLINDER_VERTICES {
        return Err(MetricsError::TooFewVertices(all_vertices.len()));
    }
    let curved: BTreeSet<FaceId> = faces
        .iter()
        .copied()
        .filter(|&f| !is_planar(model, f))
        .collect();
    if curved.is_empty() {
        return Err(MetricsError::NotCylindrical("all faces are planar".into()));
    }

    let mut scatter = Matrix3::zeros();
    for &f in &curved {
        for t in &model.face(f).expect("checked").triangles {
            if let Some((n, area)) = unit_normal(model, t) {
                scatter += n * n.transpose() * area;
            }
        }
    }
    let eigen = SymmetricEigen::new(scatter);
    let k = eigen.eigenvalues.imin();
    let mut axis: Vector3 = eigen.eigenvectors.column(k).normalize();
    if axis[axis.iamax()] < 0.0 {
        axis = -axis;
    }

    let curved_vertices: Vec<Point3> = model
        .vertices_of_faces(&curved)
        .iter()
        .map(|&i| model.vertices[i as usize])
        .collect();
    let centroid = Point3::from(
        curved_vertices.iter().map(|p| p.coords).sum::<Vector3>() / curved_vertices.len() as f64,
    );
    let radial: Vec<f64> = curved_vertices
        .iter()
        .map(|p| {
            let d = p - centroid;
            (d - axis * d.dot(&axis)).norm()
        })
        .collect();
    let n = radial.len() as f64;
    let radius = radial.iter().sum::<f64>() / n;
    if radius <= 0.0 {
        return Err(MetricsError::NotCylindrical("zero radius".into()));
    }
    let variance = radial.iter().map(|r| (r - radius).powi(2)).sum::<f64>() / n;
    let radial_rsd = variance.sqrt() / radius;
    if radial_rsd > MAX_RADIAL_RSD {
        return Err(MetricsError::NotCylindrical(format!(
            "radial spread {:.1}% exceeds {:.0}%",
            radial_rsd * 100.0,
            MAX_RADIAL_RSD * 100.0
        )));
    }

    let (lo, hi) = all_vertices
        .iter()
        .map(|&i| model.vertices[i as usize].coords.dot(&axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s), hi.max(s))
        });
    Ok(CylinderFit {
        axis,
        radius,
        depth: hi - lo,
        radial_rsd,
    })
}
