//! Analytic mesh generators used by tests, benchmarks, and the shipped
//! example suite.
//!
//! Every generator records what it built (face ids by role, hole radii and
//! centers, label instances) in a [`FixtureManifest`]. Those values come from
//! the generator parameters, never from measuring the resulting mesh, which
//! makes them usable as expected values.
//!
//! Plates are tessellated on a rectilinear grid. Each hole sits in its own
//! square cell whose annulus joins the hole rim to the cell border; the
//! remaining cells are fanned from their centers so that shared cell borders
//! stay vertex-conforming and faces meet along identical edges.

mod benchmark;

pub use benchmark::{
    benchmark_cases, benchmark_models, recorded_completion, write_benchmark, BenchmarkCase,
    LENGTH_TOLERANCE_MM,
};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    save_model, CadModel, FaceId, GeometryError, LabelSpec, LengthUnit, Point3, RawMesh,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleRecord {
    pub label: String,
    pub wall: FaceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<FaceId>,
    /// Center of the hole's bounding box (wall plus floor).
    pub center: [f64; 3],
    pub radius: f64,
    pub depth: f64,
    pub through: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub name: String,
    pub face_count: usize,
    pub triangle_count: usize,
    pub aabb_min: [f64; 3],
    pub aabb_max: [f64; 3],
    /// Faces with a structural role, e.g. `top`, `bottom`, `block_top`.
    pub named_faces: BTreeMap<String, FaceId>,
    pub holes: Vec<HoleRecord>,
    pub labels: BTreeMap<String, Vec<Vec<FaceId>>>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub mesh: RawMesh,
    pub manifest: FixtureManifest,
}

impl Fixture {
    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    /// Welds the mesh into a model with labels attached.
    pub fn to_model(&self) -> CadModel {
        let mut model = CadModel::from_raw(
            self.mesh.clone(),
            LengthUnit::Millimeter,
            format!("{}.obj", self.manifest.name),
        )
        .expect("fixture meshes are valid");
        let specs: BTreeMap<String, LabelSpec> = self
            .manifest
            .labels
            .iter()
            .map(|(k, v)| (k.clone(), LabelSpec::Instances(v.clone())))
            .collect();
        model.labels = model
            .resolve_labels(&specs)
            .expect("fixture labels are valid");
        model
    }

    /// Writes `<name>.obj`, `<name>.meta.json` and `<name>.manifest.json`.
    pub fn write_to(&self, dir: &Path) -> Result<std::path::PathBuf, GeometryError> {
        std::fs::create_dir_all(dir).map_err(|source| GeometryError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let obj = dir.join(format!("{}.obj", self.manifest.name));
        save_model(&self.to_model(), &obj)?;
        let manifest = dir.join(format!("{}.manifest.json", self.manifest.name));
        std::fs::write(
            &manifest,
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes"),
        )
        .map_err(|source| GeometryError::Io {
            path: manifest,
            source,
        })?;
        Ok(obj)
    }
}

#[derive(Default)]
struct Builder {
    mesh: RawMesh,
    manifest: FixtureManifest,
}

impl Builder {
    fn new(name: &str) -> Self {
        Self {
            mesh: RawMesh::default(),
            manifest: FixtureManifest {
                name: name.to_string(),
                ..Default::default()
            },
        }
    }

    fn face(&mut self, tris: Vec<[Point3; 3]>) -> FaceId {
        let id = self.mesh.groups.len() as FaceId;
        self.manifest.triangle_count += tris.len();
        self.mesh.push_triangles(format!("face_{id}"), &tris);
        id
    }

    fn named(&mut self, role: &str, tris: Vec<[Point3; 3]>) -> FaceId {
        let id = self.face(tris);
        self.manifest.named_faces.insert(role.to_string(), id);
        id
    }

    fn label(&mut self, name: &str, instance: Vec<FaceId>) {
        self.manifest
            .labels
            .entry(name.to_string())
            .or_default()
            .push(instance);
    }

    fn finish(mut self) -> Fixture {
        self.manifest.face_count = self.mesh.groups.len();
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for v in &self.mesh.vertices {
            for k in 0..3 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        self.manifest.aabb_min = min;
        self.manifest.aabb_max = max;
        Fixture {
            mesh: self.mesh,
            manifest: self.manifest,
        }
    }
}

fn quad(a: Point3, b: Point3, c: Point3, d: Point3) -> [[Point3; 3]; 2] {
    [[a, b, c], [a, c, d]]
}

/// Adds the six faces of an axis-aligned box, two triangles each, with
/// outward winding. Roles are prefixed by `prefix`.
fn add_box(b: &mut Builder, prefix: &str, min: Point3, size: [f64; 3]) -> Vec<FaceId> {
    let max = Point3::new(min.x + size[0], min.y + size[1], min.z + size[2]);
    let p = |x: bool, y: bool, z: bool| {
        Point3::new(
            if x { max.x } else { min.x },
            if y { max.y } else { min.y },
            if z { max.z } else { min.z },
        )
    };
    let (f, t) = (false, true);
    let sides = [
        (
            "bottom",
            quad(p(f, f, f), p(f, t, f), p(t, t, f), p(t, f, f)),
        ),
        ("top", quad(p(f, f, t), p(t, f, t), p(t, t, t), p(f, t, t))),
        (
            "front",
            quad(p(f, f, f), p(t, f, f), p(t, f, t), p(f, f, t)),
        ),
        (
            "right",
            quad(p(t, f, f), p(t, t, f), p(t, t, t), p(t, f, t)),
        ),
        ("back", quad(p(t, t, f), p(f, t, f), p(f, t, t), p(t, t, t))),
        ("left", quad(p(f, t, f), p(f, f, f), p(f, f, t), p(f, t, t))),
    ];
    sides
        .into_iter()
        .map(|(role, tris)| {
            let name = if prefix.is_empty() {
                role.to_string()
            } else {
                format!("{prefix}_{role}")
            };
            b.named(&name, tris.to_vec())
        })
        .collect()
}

/// Axis-aligned box with its min corner at `min`. Face order: bottom, top,
/// front (−Y), right (+X), back (+Y), left (−X).
pub fn cuboid(name: &str, min: Point3, size: [f64; 3]) -> Fixture {
    let mut b = Builder::new(name);
    add_box(&mut b, "", min, size);
    b.finish()
}

/// The canonical unit cube at the origin.
pub fn unit_cube() -> Fixture {
    cuboid("unit_cube", Point3::origin(), [1.0, 1.0, 1.0])
}

/// Two unit cubes separated by a gap; 12 faces, two adjacency components.
pub fn two_cubes() -> Fixture {
    let mut b = Builder::new("two_cubes");
    add_box(&mut b, "a", Point3::origin(), [1.0, 1.0, 1.0]);
    add_box(&mut b, "b", Point3::new(3.0, 0.0, 0.0), [1.0, 1.0, 1.0]);
    b.finish()
}

/// A flat square face of side `size` in the XY plane.
pub fn planar_square(size: f64, subdivisions: usize) -> Fixture {
    let mut b = Builder::new("planar_square");
    let n = subdivisions.max(1);
    let step = size / n as f64;
    let mut tris = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (x0, y0) = (i as f64 * step, j as f64 * step);
            let (x1, y1) = (x0 + step, y0 + step);
            tris.extend(quad(
                Point3::new(x0, y0, 0.0),
                Point3::new(x1, y0, 0.0),
                Point3::new(x1, y1, 0.0),
                Point3::new(x0, y1, 0.0),
            ));
        }
    }
    let id = b.named("square", tris);
    b.label("square", vec![id]);
    b.finish()
}

fn ring(center: [f64; 2], radius: f64, z: f64, segments: usize) -> Vec<Point3> {
    (0..segments)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / segments as f64;
            Point3::new(
                center[0] + radius * t.cos(),
                center[1] + radius * t.sin(),
                z,
            )
        })
        .collect()
}

fn wall_band(top: &[Point3], bottom: &[Point3]) -> Vec<[Point3; 3]> {
    let n = top.len();
    let mut tris = Vec::with_capacity(2 * n);
    for k in 0..n {
        let k1 = (k + 1) % n;
        tris.extend(quad(top[k], bottom[k], bottom[k1], top[k1]));
    }
    tris
}

fn disk(rim: &[Point3], center: Point3, upward: bool) -> Vec<[Point3; 3]> {
    let n = rim.len();
    (0..n)
        .map(|k| {
            let k1 = (k + 1) % n;
            if upward {
                [center, rim[k], rim[k1]]
            } else {
                [center, rim[k1], rim[k]]
            }
        })
        .collect()
}

/// Open cylinder wall (no caps) along +Z from `z = 0` to `height`, centered
/// on the Z axis. Label `wall`.
pub fn cylinder_wall(radius: f64, height: f64, segments: usize) -> Fixture {
    let mut b = Builder::new("cylinder_wall");
    let top = ring([0.0, 0.0], radius, height, segments);
    let bot = ring([0.0, 0.0], radius, 0.0, segments);
    let id = b.named("wall", wall_band(&top, &bot));
    b.label("wall", vec![id]);
    b.finish()
}

/// Closed cylinder centered at the origin with its axis along Z.
/// Faces: wall, top cap, bottom cap. Labels `shaft` (wall) and `cap`.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> Fixture {
    let mut b = Builder::new("cylinder");
    let h = height / 2.0;
    let top = ring([0.0, 0.0], radius, h, segments);
    let bot = ring([0.0, 0.0], radius, -h, segments);
    let wall = b.named("wall", wall_band(&top, &bot));
    let cap_top = b.named("top", disk(&top, Point3::new(0.0, 0.0, h), true));
    let cap_bot = b.named("bottom", disk(&bot, Point3::new(0.0, 0.0, -h), false));
    b.label("shaft", vec![wall]);
    b.label("cap", vec![cap_top]);
    b.label("cap", vec![cap_bot]);
    b.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleSpec {
    pub label: String,
    pub center: [f64; 2],
    pub radius: f64,
    /// `None` for a through hole, else the blind depth measured from the top.
    pub blind_depth: Option<f64>,
}

impl HoleSpec {
    pub fn through(label: &str, center: [f64; 2], radius: f64) -> Self {
        Self {
            label: label.to_string(),
            center,
            radius,
            blind_depth: None,
        }
    }

    pub fn blind(label: &str, center: [f64; 2], radius: f64, depth: f64) -> Self {
        Self {
            blind_depth: Some(depth),
            ..Self::through(label, center, radius)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateSpec {
    pub name: String,
    /// Plate spans `[origin, origin + (width, depth, thickness)]`.
    pub origin: [f64; 3],
    pub width: f64,
    pub depth: f64,
    pub thickness: f64,
    pub holes: Vec<HoleSpec>,
    /// Segments per hole rim; must be a multiple of 8.
    pub segments: usize,
}

fn push_break(list: &mut Vec<f64>, v: f64) {
    if !list.iter().any(|&x| (x - v).abs() < 1e-12) {
        list.push(v);
    }
}

/// Point on the boundary of an axis-aligned square of half side `s` around
/// `c`, in the direction of angle `t`.
fn square_point(c: [f64; 2], s: f64, t: f64) -> [f64; 2] {
    let (cs, sn) = (t.cos(), t.sin());
    let m = cs.abs().max(sn.abs());
    let snap = |u: f64| {
        if (u.abs() - 1.0).abs() < 1e-9 {
            u.signum()
        } else {
            u
        }
    };
    [c[0] + s * snap(cs / m), c[1] + s * snap(sn / m)]
}

/// Builds a rectangular plate with holes, with a conforming tessellation.
///
/// Faces are emitted as: top, bottom, front (y = min), back (y = max),
/// left (x = min), right (x = max), then per hole its wall and, for blind
/// holes, its floor. Each hole's label instance is `{wall[, floor]}`.
pub fn plate(spec: &PlateSpec) -> Fixture {
    let mut b = Builder::new(&spec.name);
    add_plate(&mut b, spec);
    b.finish()
}

fn add_plate(b: &mut Builder, spec: &PlateSpec) {
    assert!(
        spec.segments >= 8 && spec.segments.is_multiple_of(8),
        "segments must be a multiple of 8"
    );
    let [ox, oy, oz] = spec.origin;
    let (x_max, y_max) = (ox + spec.width, oy + spec.depth);
    let (z_bot, z_top) = (oz, oz + spec.thickness);

    // One cell size for the whole plate keeps the grid lines of holes in a
    // shared row or column aligned.
    let s = spec
        .holes
        .iter()
        .map(|h| 1.5 * h.radius)
        .fold(0.0, f64::max);
    let mut xs = vec![ox, x_max];
    let mut ys = vec![oy, y_max];
    for h in &spec.holes {
        let (cx, cy) = (ox + h.center[0], oy + h.center[1]);
        assert!(
            cx - s > ox && cx + s < x_max && cy - s > oy && cy + s < y_max,
            "hole cell must lie strictly inside the plate"
        );
        push_break(&mut xs, cx - s);
        push_break(&mut xs, cx + s);
        push_break(&mut ys, cy - s);
        push_break(&mut ys, cy + s);
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);

    // Which hole, if any, owns each grid cell.
    let find = |list: &[f64], v: f64| list.iter().position(|&x| (x - v).abs() < 1e-12);
    let mut cell_hole: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (hi, h) in spec.holes.iter().enumerate() {
        let (cx, cy) = (ox + h.center[0], oy + h.center[1]);
        let i0 = find(&xs, cx - s).unwrap();
        let j0 = find(&ys, cy - s).unwrap();
        assert!(
            find(&xs, cx + s) == Some(i0 + 1) && find(&ys, cy + s) == Some(j0 + 1),
            "hole cells must not overlap other grid lines"
        );
        assert!(
            cell_hole.insert((i0, j0), hi).is_none(),
            "two holes share a cell"
        );
    }

    // Rim and cell-border points per hole, in XY.
    let n = spec.segments;
    let rims: Vec<Vec<[f64; 2]>> = spec
        .holes
        .iter()
        .map(|h| {
            let c = [ox + h.center[0], oy + h.center[1]];
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    [c[0] + h.radius * t.cos(), c[1] + h.radius * t.sin()]
                })
                .collect()
        })
        .collect();
    let borders: Vec<Vec<[f64; 2]>> = spec
        .holes
        .iter()
        .map(|h| {
            let c = [ox + h.center[0], oy + h.center[1]];
            (0..n)
                .map(|k| square_point(c, s, 2.0 * PI * k as f64 / n as f64))
                .collect()
        })
        .collect();
    let border_points: Vec<[f64; 2]> = borders.iter().flatten().copied().collect();

    let tol = 1e-9 * (spec.width + spec.depth);
    let on_cell_boundary = |p: [f64; 2], x0: f64, x1: f64, y0: f64, y1: f64| {
        let in_x = p[0] >= x0 - tol && p[0] <= x1 + tol;
        let in_y = p[1] >= y0 - tol && p[1] <= y1 + tol;
        ((p[0] - x0).abs() < tol || (p[0] - x1).abs() < tol) && in_y
            || ((p[1] - y0).abs() < tol || (p[1] - y1).abs() < tol) && in_x
    };

    let layer = |z: f64, upward: bool, penetrates: &dyn Fn(usize) -> bool| {
        let mut tris = Vec::new();
        let at = |p: [f64; 2]| Point3::new(p[0], p[1], z);
        for i in 0..xs.len() - 1 {
            for j in 0..ys.len() - 1 {
                let (x0, x1, y0, y1) = (xs[i], xs[i + 1], ys[j], ys[j + 1]);
                if let Some(&hi) = cell_hole.get(&(i, j)).filter(|&&hi| penetrates(hi)) {
                    let (rim, border) = (&rims[hi], &borders[hi]);
                    for k in 0..n {
                        let k1 = (k + 1) % n;
                        for t in quad(at(rim[k]), at(border[k]), at(border[k1]), at(rim[k1])) {
                            tris.push(if upward { t } else { [t[0], t[2], t[1]] });
                        }
                    }
                    continue;
                }
                let mut pts: Vec<[f64; 2]> = vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
                for &p in &border_points {
                    if on_cell_boundary(p, x0, x1, y0, y1)
                        && !pts
                            .iter()
                            .any(|q| (q[0] - p[0]).abs() < tol && (q[1] - p[1]).abs() < tol)
                    {
                        pts.push(p);
                    }
                }
                let c = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
                pts.sort_by(|a, b| {
                    let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
                    let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
                    ta.total_cmp(&tb)
                });
                for k in 0..pts.len() {
                    let (p, q) = (pts[k], pts[(k + 1) % pts.len()]);
                    tris.push(if upward {
                        [at(c), at(p), at(q)]
                    } else {
                        [at(c), at(q), at(p)]
                    });
                }
            }
        }
        tris
    };

    let holes = &spec.holes;
    let top = layer(z_top, true, &|_| true);
    let bottom = layer(z_bot, false, &|hi| holes[hi].blind_depth.is_none());
    b.named("top", top);
    b.named("bottom", bottom);

    let strip = |fixed: f64, along: &[f64], on_x: bool, flip: bool| {
        let mut tris = Vec::new();
        for w in along.windows(2) {
            let p = |t: f64, z: f64| {
                if on_x {
                    Point3::new(t, fixed, z)
                } else {
                    Point3::new(fixed, t, z)
                }
            };
            let q = quad(
                p(w[0], z_bot),
                p(w[1], z_bot),
                p(w[1], z_top),
                p(w[0], z_top),
            );
            for t in q {
                tris.push(if flip { [t[0], t[2], t[1]] } else { t });
            }
        }
        tris
    };
    b.named("front", strip(oy, &xs, true, false));
    b.named("back", strip(y_max, &xs, true, true));
    b.named("left", strip(ox, &ys, false, true));
    b.named("right", strip(x_max, &ys, false, false));

    for (hi, h) in spec.holes.iter().enumerate() {
        let c = [ox + h.center[0], oy + h.center[1]];
        let top_ring: Vec<Point3> = rims[hi]
            .iter()
            .map(|p| Point3::new(p[0], p[1], z_top))
            .collect();
        let (depth, floor_z) = match h.blind_depth {
            None => (spec.thickness, z_bot),
            Some(d) => {
                assert!(
                    d > 0.0 && d < spec.thickness,
                    "blind depth must be inside the plate"
                );
                (d, z_top - d)
            }
        };
        // Same rim samples as the annulus, so the wall shares its vertices.
        let bot_ring: Vec<Point3> = rims[hi]
            .iter()
            .map(|p| Point3::new(p[0], p[1], floor_z))
            .collect();
        let wall = b.face(wall_band(&top_ring, &bot_ring));
        let floor = h
            .blind_depth
            .map(|_| b.face(disk(&bot_ring, Point3::new(c[0], c[1], floor_z), true)));
        let mut instance = vec![wall];
        instance.extend(floor);
        b.label(&h.label, instance);
        b.manifest.holes.push(HoleRecord {
            label: h.label.clone(),
            wall,
            floor,
            center: [c[0], c[1], z_top - depth / 2.0],
            radius: h.radius,
            depth,
            through: h.blind_depth.is_none(),
        });
    }
}

/// 60×40×8 mm plate with four r = 5 mm through holes.
pub fn plate_with_four_holes() -> Fixture {
    plate(&PlateSpec {
        name: "plate_four_holes".into(),
        origin: [0.0, 0.0, 0.0],
        width: 60.0,
        depth: 40.0,
        thickness: 8.0,
        holes: vec![
            HoleSpec::through("hole", [15.0, 10.0], 5.0),
            HoleSpec::through("hole", [45.0, 10.0], 5.0),
            HoleSpec::through("hole", [15.0, 30.0], 5.0),
            HoleSpec::through("hole", [45.0, 30.0], 5.0),
        ],
        segments: 64,
    })
}

/// 100×40×10 mm plate with through holes r = 5 and r = 8 and a blind hole
/// r = 4, 5 mm deep, opening upward. All three are labeled `hole`.
pub fn plate_mixed_holes() -> Fixture {
    plate(&PlateSpec {
        name: "plate_mixed_holes".into(),
        origin: [0.0, 0.0, 0.0],
        width: 100.0,
        depth: 40.0,
        thickness: 10.0,
        holes: vec![
            HoleSpec::through("hole", [20.0, 20.0], 5.0),
            HoleSpec::blind("hole", [50.0, 20.0], 4.0, 5.0),
            HoleSpec::through("hole", [80.0, 20.0], 8.0),
        ],
        segments: 64,
    })
}

/// 40×40×10 mm plate with a single r = 5 mm blind hole, 6 mm deep, opening
/// upward.
pub fn plate_blind_hole() -> Fixture {
    plate(&PlateSpec {
        name: "plate_blind_hole".into(),
        origin: [0.0, 0.0, 0.0],
        width: 40.0,
        depth: 40.0,
        thickness: 10.0,
        holes: vec![HoleSpec::blind("hole", [20.0, 20.0], 5.0, 6.0)],
        segments: 64,
    })
}

/// A 60×40×10 mm plate with four r = 5 mm through holes, floating at
/// z ∈ [10, 20] above a separate 50×30×5 mm block. Seen from the top, the
/// block is visible only through the holes.
pub fn plate_before_block() -> Fixture {
    let mut b = Builder::new("plate_before_block");
    add_plate(
        &mut b,
        &PlateSpec {
            name: "plate_before_block".into(),
            origin: [0.0, 0.0, 10.0],
            width: 60.0,
            depth: 40.0,
            thickness: 10.0,
            holes: vec![
                HoleSpec::through("hole", [15.0, 12.0], 5.0),
                HoleSpec::through("hole", [45.0, 12.0], 5.0),
                HoleSpec::through("hole", [15.0, 28.0], 5.0),
                HoleSpec::through("hole", [45.0, 28.0], 5.0),
            ],
            segments: 64,
        },
    );
    let block = add_box(
        &mut b,
        "block",
        Point3::new(5.0, 5.0, 0.0),
        [50.0, 30.0, 5.0],
    );
    b.label("block", block);
    b.finish()
}

/// Plate with an `nx × ny` grid of through holes, used for throughput tests.
/// With the defaults of [`large_plate`] it exceeds 100k triangles.
pub fn plate_hole_grid(nx: usize, ny: usize, radius: f64, pitch: f64, segments: usize) -> Fixture {
    let margin = pitch / 2.0;
    let holes = (0..nx)
        .flat_map(|i| {
            (0..ny).map(move |j| {
                HoleSpec::through(
                    "hole",
                    [margin + i as f64 * pitch, margin + j as f64 * pitch],
                    radius,
                )
            })
        })
        .collect();
    plate(&PlateSpec {
        name: format!("plate_grid_{nx}x{ny}"),
        origin: [0.0, 0.0, 0.0],
        width: nx as f64 * pitch,
        depth: ny as f64 * pitch,
        thickness: 5.0,
        holes,
        segments,
    })
}

/// 10×10 holes at 176 segments: 105 600 rim triangles plus fill.
pub fn large_plate() -> Fixture {
    plate_hole_grid(10, 10, 4.0, 16.0, 176)
}
