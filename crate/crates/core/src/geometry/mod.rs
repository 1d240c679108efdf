//! Face-segmented triangle meshes.
//!
//! A [`CadModel`] is an immutable, welded triangle mesh whose triangles are
//! partitioned into faces. Faces are the unit everything downstream works
//! with: rendering writes face ids into pixels, segmentation selects sets of
//! faces, and measurements are taken over the vertices of selected faces.
//! All coordinates are millimeters once loaded.

mod adjacency;
mod obj;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adjacency::AdjacencyGraph;
pub use obj::{parse_obj, write_obj, RawGroup, RawMesh};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type FaceId = u32;

/// Relative welding tolerance, multiplied by the model's bounding-box diagonal.
pub const WELD_RELATIVE_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mesh file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed mesh (line {line}): {message}")]
    MalformedMesh { line: usize, message: String },
    #[error("face group `{0}` contains no triangles")]
    EmptyFace(String),
    #[error("model contains no faces")]
    EmptyModel,
    #[error("invalid sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum LengthUnit {
    #[default]
    #[serde(rename = "mm")]
    Millimeter,
    #[serde(rename = "m")]
    Meter,
}

impl LengthUnit {
    pub fn millimeters_per_unit(self) -> f64 {
        match self {
            LengthUnit::Millimeter => 1.0,
            LengthUnit::Meter => 1000.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            LengthUnit::Millimeter => "mm",
            LengthUnit::Meter => "m",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "mm" => Some(LengthUnit::Millimeter),
            "m" => Some(LengthUnit::Meter),
            _ => None,
        }
    }
}

/// Axis-aligned bounding box in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for p in iter {
            bb.include(p);
        }
        Some(bb)
    }

    pub fn include(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Full lengths along the world axes.
    pub fn extents(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    pub fn corners(&self) -> [Point3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: FaceId,
    /// Vertex-index triples into [`CadModel::vertices`].
    pub triangles: Vec<[u32; 3]>,
    /// Sum of triangle areas, mm².
    pub total_area: f64,
}

pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Ground-truth part labels: description → list of face-set instances.
pub type PartLabels = BTreeMap<String, Vec<BTreeSet<FaceId>>>;

/// Label entry as written in the sidecar: either a flat face list (split into
/// instances by adjacency) or explicit instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSpec {
    Flat(Vec<FaceId>),
    Instances(Vec<Vec<FaceId>>),
}

/// `<model>.meta.json` contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<LengthUnit>,
    #[serde(default)]
    pub labels: BTreeMap<String, LabelSpec>,
}

impl Sidecar {
    /// Sidecar location for a mesh path: `plate.obj` → `plate.meta.json`.
    pub fn path_for(model_path: &Path) -> PathBuf {
        let stem = model_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        model_path.with_file_name(format!("{stem}.meta.json"))
    }

    pub fn read(path: &Path) -> Result<Option<Sidecar>, GeometryError> {
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| GeometryError::Sidecar {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

#[derive(Debug, Clone)]
pub struct CadModel {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Face>,
    pub adjacency: AdjacencyGraph,
    pub aabb: Aabb,
    pub source_path: PathBuf,
    pub labels: PartLabels,
}

/// Reads a face-grouped OBJ and its optional sidecar.
///
/// The unit is taken from `units` when given, else from the sidecar, else
/// millimeters. Coordinates are converted to millimeters once, here.
pub fn load_model(path: &Path, units: Option<LengthUnit>) -> Result<CadModel, GeometryError> {
    if !path.exists() {
        return Err(GeometryError::FileNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw = parse_obj(&text)?;
    let sidecar_path = Sidecar::path_for(path);
    let sidecar = Sidecar::read(&sidecar_path)?;
    let unit = units
        .or_else(|| sidecar.as_ref().and_then(|s| s.units))
        .unwrap_or_default();
    let mut model = CadModel::from_raw(raw, unit, path)?;
    if let Some(sidecar) = sidecar {
        model.labels =
            model
                .resolve_labels(&sidecar.labels)
                .map_err(|message| GeometryError::Sidecar {
                    path: sidecar_path,
                    message,
                })?;
    }
    Ok(model)
}

/// Writes `model` as OBJ (millimeters) plus a sidecar carrying its labels.
pub fn save_model(model: &CadModel, path: &Path) -> Result<(), GeometryError> {
    let io = |source| GeometryError::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::write(path, write_obj(model)).map_err(io)?;
    let sidecar = Sidecar {
        units: Some(LengthUnit::Millimeter),
        labels: model
            .labels
            .iter()
            .map(|(k, v)| {
                let instances = v.iter().map(|s| s.iter().copied().collect()).collect();
                (k.clone(), LabelSpec::Instances(instances))
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(Sidecar::path_for(path), json).map_err(io)
}

fn face_index_from_name(name: &str) -> Option<FaceId> {
    name.strip_prefix("face_")?.parse().ok()
}

/// Spatial-hash vertex welder. The first vertex seen in a cluster is kept as
/// the representative, so welding is order-dependent but deterministic.
struct Welder {
    epsilon: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
    kept: Vec<Point3>,
}

impl Welder {
    fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            cells: HashMap::new(),
            kept: Vec::new(),
        }
    }

    fn cell(&self, p: &Point3) -> (i64, i64, i64) {
        let q = |c: f64| (c / self.epsilon).floor() as i64;
        (q(p.x), q(p.y), q(p.z))
    }

    fn insert(&mut self, p: Point3) -> u32 {
        if self.epsilon > 0.0 {
            let (cx, cy, cz) = self.cell(&p);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &id in ids {
                                if (self.kept[id as usize] - p).norm() <= self.epsilon {
                                    return id;
                                }
                            }
                        }
                    }
                }
            }
        }
        let id = self.kept.len() as u32;
        self.kept.push(p);
        let key = self.cell(&p);
        self.cells.entry(key).or_default().push(id);
        id
    }
}

impl CadModel {
    /// Builds a model from a raw polygon soup: converts units, fan-triangulates
    /// polygons, welds vertices, drops degenerate triangles, assigns face ids,
    /// and builds adjacency.
    ///
    /// Groups named `face_<k>` keep id `k` when the names form a dense
    /// `0..N` range; otherwise ids follow group order.
    pub fn from_raw(
        raw: RawMesh,
        unit: LengthUnit,
        source_path: impl Into<PathBuf>,
    ) -> Result<CadModel, GeometryError> {
        if raw.groups.is_empty() {
            return Err(GeometryError::EmptyModel);
        }
        let scale = unit.millimeters_per_unit();
        let scaled: Vec<Point3> = raw.vertices.iter().map(|p| p * scale).collect();

        let mut used = vec![false; scaled.len()];
        for g in &raw.groups {
            for poly in &g.polygons {
                for &i in poly {
                    used[i] = true;
                }
            }
        }
        let raw_aabb = Aabb::from_points(
            scaled
                .iter()
                .zip(&used)
                .filter_map(|(p, &u)| u.then_some(p)),
        );
        let epsilon = raw_aabb.map_or(0.0, |bb| bb.diagonal() * WELD_RELATIVE_EPSILON);

        let mut welder = Welder::new(epsilon);
        let mut remap: Vec<Option<u32>> = vec![None; scaled.len()];
        let mut weld = |i: usize, welder: &mut Welder| -> u32 {
            *remap[i].get_or_insert_with(|| welder.insert(scaled[i]))
        };

        let mut grouped: Vec<(String, Vec<[u32; 3]>)> = Vec::with_capacity(raw.groups.len());
        for g in &raw.groups {
            let mut tris = Vec::new();
            for poly in &g.polygons {
                if poly.len() < 3 {
                    return Err(GeometryError::MalformedMesh {
                        line: g.line,
                        message: "polygon with fewer than three vertices".into(),
                    });
                }
                for k in 1..poly.len() - 1 {
                    tris.push([
                        weld(poly[0], &mut welder),
                        weld(poly[k], &mut welder),
                        weld(poly[k + 1], &mut welder),
                    ]);
                }
            }
            grouped.push((g.name.clone(), tris));
        }
        let welded = welder.kept;

        let min_area = epsilon * epsilon;
        for (_, tris) in grouped.iter_mut() {
            tris.retain(|t| {
                t[0] != t[1]
                    && t[1] != t[2]
                    && t[0] != t[2]
                    && triangle_area(
                        &welded[t[0] as usize],
                        &welded[t[1] as usize],
                        &welded[t[2] as usize],
                    ) > min_area
            });
        }
        if let Some((name, _)) = grouped.iter().find(|(_, t)| t.is_empty()) {
            return Err(GeometryError::EmptyFace(name.clone()));
        }

        let named: Option<Vec<FaceId>> = grouped
            .iter()
            .map(|(n, _)| face_index_from_name(n))
            .collect();
        let ids: Vec<FaceId> = match named {
            Some(ids)
                if {
                    let set: BTreeSet<_> = ids.iter().copied().collect();
                    set.len() == ids.len()
                        && set.iter().next_back() == Some(&(ids.len() as FaceId - 1))
                } =>
            {
                ids
            }
            _ => (0..grouped.len() as FaceId).collect(),
        };

        // Compact to referenced vertices, in order of first reference by face id.
        let mut order: Vec<usize> = (0..grouped.len()).collect();
        order.sort_by_key(|&i| ids[i]);
        let mut compact: Vec<Option<u32>> = vec![None; welded.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::with_capacity(grouped.len());
        for &gi in &order {
            let tris: Vec<[u32; 3]> = grouped[gi]
                .1
                .iter()
                .map(|t| {
                    t.map(|v| {
                        *compact[v as usize].get_or_insert_with(|| {
                            vertices.push(welded[v as usize]);
                            (vertices.len() - 1) as u32
                        })
                    })
                })
                .collect();
            let total_area = tris
                .iter()
                .map(|t| {
                    triangle_area(
                        &vertices[t[0] as usize],
                        &vertices[t[1] as usize],
                        &vertices[t[2] as usize],
                    )
                })
                .sum();
            faces.push(Face {
                id: ids[gi],
                triangles: tris,
                total_area,
            });
        }

        let aabb = Aabb::from_points(&vertices).ok_or(GeometryError::EmptyModel)?;
        let adjacency = AdjacencyGraph::build(&faces);
        Ok(CadModel {
            vertices,
            faces,
            adjacency,
            aabb,
            source_path: source_path.into(),
            labels: PartLabels::new(),
        })
    }

    /// Converts sidecar label specs into validated face-set instances.
    pub fn resolve_labels(
        &self,
        specs: &BTreeMap<String, LabelSpec>,
    ) -> Result<PartLabels, String> {
        let mut out = PartLabels::new();
        for (name, spec) in specs {
            let instances: Vec<BTreeSet<FaceId>> = match spec {
                LabelSpec::Flat(ids) => {
                    let set: BTreeSet<FaceId> = ids.iter().copied().collect();
                    self.check_faces(name, &set)?;
                    self.adjacency.components_of(&set)
                }
                LabelSpec::Instances(list) => {
                    let mut v = Vec::new();
                    for ids in list {
                        let set: BTreeSet<FaceId> = ids.iter().copied().collect();
                        self.check_faces(name, &set)?;
                        v.push(set);
                    }
                    v
                }
            };
            out.insert(name.trim().to_lowercase(), instances);
        }
        Ok(out)
    }

    fn check_faces(&self, label: &str, set: &BTreeSet<FaceId>) -> Result<(), String> {
        if set.is_empty() {
            return Err(format!("label `{label}` has an empty instance"));
        }
        match set.iter().find(|&&f| f as usize >= self.faces.len()) {
            Some(f) => Err(format!("label `{label}` refers to unknown face {f}")),
            None => Ok(()),
        }
    }

    pub fn face(&self, id: FaceId) -> Option<&Face> {
        self.faces.get(id as usize)
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.faces.iter().map(|f| f.triangles.len()).sum()
    }

    pub fn weld_epsilon(&self) -> f64 {
        self.aabb.diagonal() * WELD_RELATIVE_EPSILON
    }

    pub fn triangle_points(&self, tri: &[u32; 3]) -> [Point3; 3] {
        tri.map(|i| self.vertices[i as usize])
    }

    /// Distinct vertex indices used by the given faces, ascending.
    pub fn vertices_of_faces<'a>(
        &self,
        faces: impl IntoIterator<Item = &'a FaceId>,
    ) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for &f in faces {
            if let Some(face) = self.face(f) {
                for t in &face.triangles {
                    out.extend(t.iter().copied());
                }
            }
        }
        out
    }

    /// Applies a point map to every vertex, keeping topology and labels.
    pub fn transformed(&self, map: impl Fn(&Point3) -> Point3) -> CadModel {
        let vertices: Vec<Point3> = self.vertices.iter().map(map).collect();
        let faces = self
            .faces
            .iter()
            .map(|f| Face {
                id: f.id,
                triangles: f.triangles.clone(),
                total_area: f
                    .triangles
                    .iter()
                    .map(|t| {
                        triangle_area(
                            &vertices[t[0] as usize],
                            &vertices[t[1] as usize],
                            &vertices[t[2] as usize],
                        )
                    })
                    .sum(),
            })
            .collect();
        let aabb = Aabb::from_points(&vertices).expect("non-empty model");
        CadModel {
            vertices,
            faces,
            adjacency: self.adjacency.clone(),
            aabb,
            source_path: self.source_path.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Visible-area primitive: the summed triangle area of a face, mm².
pub fn face_visible_area(model: &CadModel, face: &Face) -> f64 {
    face.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = model.triangle_points(t);
            triangle_area(&a, &b, &c)
        })
        .sum()
}

pub fn model_aabb(model: &CadModel) -> Aabb {
    model.aabb
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1
g face_0\nf 1 3 2\nf 1 4 3
g face_1\nf 5 6 7\nf 5 7 8
g face_2\nf 1 2 6\nf 1 6 5
g face_3\nf 2 3 7\nf 2 7 6
g face_4\nf 3 4 8\nf 3 8 7
g face_5\nf 4 1 5\nf 4 5 8
";

    fn cube() -> CadModel {
        CadModel::from_raw(parse_obj(CUBE).unwrap(), LengthUnit::Millimeter, "cube.obj").unwrap()
    }

    #[test]
    fn unit_cube_loads() {
        let m = cube();
        assert_eq!(m.face_count(), 6);
        assert_eq!(m.triangle_count(), 12);
        assert_eq!(m.aabb.min, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(m.aabb.max, Point3::new(1.0, 1.0, 1.0));
        assert_eq!(model_aabb(&m).extents(), Vector3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn cube_faces_have_four_neighbors() {
        let m = cube();
        for f in &m.faces {
            assert_eq!(m.adjacency.neighbors(f.id).len(), 4, "face {}", f.id);
            assert!(!m.adjacency.neighbors(f.id).contains(&f.id));
        }
        // opposite faces are never adjacent
        assert!(!m.adjacency.are_adjacent(0, 1));
    }

    #[test]
    fn square_face_area() {
        let m = cube();
        assert_eq!(face_visible_area(&m, &m.faces[0]), 1.0);
        assert_eq!(m.faces[0].total_area, 1.0);
    }

    #[test]
    fn empty_group_is_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\ng face_0\nf 1 2 3\ng face_1\n";
        let err =
            CadModel::from_raw(parse_obj(text).unwrap(), LengthUnit::Millimeter, "x").unwrap_err();
        assert!(matches!(err, GeometryError::EmptyFace(ref n) if n == "face_1"));
    }

    #[test]
    fn no_groups_is_empty_model() {
        let err = CadModel::from_raw(RawMesh::default(), LengthUnit::Millimeter, "x").unwrap_err();
        assert!(matches!(err, GeometryError::EmptyModel));
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\ng face_0\nf 1 2 3 4\n";
        let m = CadModel::from_raw(parse_obj(text).unwrap(), LengthUnit::Millimeter, "x").unwrap();
        assert_eq!(m.triangle_count(), 2);
        assert!((m.faces[0].total_area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn meters_are_converted_once() {
        let m = CadModel::from_raw(parse_obj(CUBE).unwrap(), LengthUnit::Meter, "x").unwrap();
        assert_eq!(m.aabb.extents(), Vector3::new(1000.0, 1000.0, 1000.0));
    }

    #[test]
    fn near_duplicate_vertices_weld_and_connect_faces() {
        // two triangles sharing an edge whose endpoints differ by 1e-9
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1.000000001 0 0\nv 0 1.000000001 0\nv 1 1 0\n\
                    g face_0\nf 1 2 3\ng face_1\nf 4 6 5\n";
        let m = CadModel::from_raw(parse_obj(text).unwrap(), LengthUnit::Millimeter, "x").unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert!(m.adjacency.are_adjacent(0, 1));
    }

    #[test]
    fn shared_vertex_only_is_not_adjacent() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv -1 0 0\nv 0 -1 0\n\
                    g face_0\nf 1 2 3\ng face_1\nf 1 4 5\n";
        let m = CadModel::from_raw(parse_obj(text).unwrap(), LengthUnit::Millimeter, "x").unwrap();
        assert!(!m.adjacency.are_adjacent(0, 1));
    }

    #[test]
    fn unconventional_group_names_follow_file_order() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\ng top\nf 1 2 3\ng side\nf 1 2 4\n";
        let m = CadModel::from_raw(parse_obj(text).unwrap(), LengthUnit::Millimeter, "x").unwrap();
        assert_eq!(m.faces.iter().map(|f| f.id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn face_names_assign_ids() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\ng face_1\nf 1 2 3\ng face_0\nf 1 2 4\n";
        let m = CadModel::from_raw(parse_obj(text).unwrap(), LengthUnit::Millimeter, "x").unwrap();
        // face_0 is the second group, containing vertex (0,0,1)
        let verts = m.vertices_of_faces(&[0]);
        assert!(verts.iter().any(|&v| m.vertices[v as usize].z == 1.0));
    }

    #[test]
    fn flat_labels_split_by_adjacency() {
        let m = cube();
        let mut specs = BTreeMap::new();
        specs.insert("Caps".to_string(), LabelSpec::Flat(vec![0, 1]));
        specs.insert("band".to_string(), LabelSpec::Flat(vec![2, 3]));
        let labels = m.resolve_labels(&specs).unwrap();
        assert_eq!(labels["caps"].len(), 2);
        assert_eq!(labels["band"].len(), 1);
        specs.insert("bad".to_string(), LabelSpec::Flat(vec![42]));
        assert!(m.resolve_labels(&specs).is_err());
    }
}
