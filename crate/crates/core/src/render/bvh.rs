//! Bounding volume hierarchy over the model's triangles.
//!
//! Built top-down with a binned surface-area heuristic and flattened in
//! depth-first order: the left child of an interior node directly follows it.
//! Traversal is conservative so that its result equals a linear scan over all
//! triangles with the same hit ordering, including exact ties.

use crate::geometry::{CadModel, FaceId, Point3, Vector3};

const BINS: usize = 16;
const MAX_LEAF: usize = 4;

/// Precomputed triangle for Möller–Trumbore intersection.
#[derive(Debug, Clone, Copy)]
pub struct Triangle {
    pub v0: Point3,
    pub e1: Vector3,
    pub e2: Vector3,
    pub face: FaceId,
    /// Position in face-major model order; breaks ties between equal depths.
    pub order: u32,
}

/// Nearest hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: FaceId,
    pub order: u32,
}

impl Hit {
    #[inline]
    fn beats(&self, other: &Option<Hit>) -> bool {
        match other {
            None => true,
            Some(o) => self.t < o.t || (self.t == o.t && self.order < o.order),
        }
    }
}

impl Triangle {
    /// Ray/triangle intersection; edges count as inside. Returns `t > 0`.
    #[inline]
    pub fn intersect(&self, origin: &Point3, dir: &Vector3) -> Option<f64> {
        let pvec = dir.cross(&self.e2);
        let det = self.e1.dot(&pvec);
        if det == 0.0 {
            return None;
        }
        let inv = 1.0 / det;
        let tvec = origin - self.v0;
        let u = tvec.dot(&pvec) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let qvec = tvec.cross(&self.e1);
        let v = dir.dot(&qvec) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        let t = self.e2.dot(&qvec) * inv;
        (t > 0.0).then_some(t)
    }

    fn bounds(&self) -> (Point3, Point3) {
        let a = self.v0;
        let b = self.v0 + self.e1;
        let c = self.v0 + self.e2;
        (a.inf(&b).inf(&c), a.sup(&b).sup(&c))
    }

    fn centroid(&self) -> Point3 {
        self.v0 + (self.e1 + self.e2) / 3.0
    }
}

/// All model triangles in face-major order.
pub fn model_triangles(model: &CadModel) -> Vec<Triangle> {
    let mut out = Vec::with_capacity(model.triangle_count());
    for face in &model.faces {
        for t in &face.triangles {
            let [a, b, c] = model.triangle_points(t);
            out.push(Triangle {
                v0: a,
                e1: b - a,
                e2: c - a,
                face: face.id,
                order: out.len() as u32,
            });
        }
    }
    out
}

/// Linear scan over all triangles; the reference for [`Bvh::intersect`].
pub fn intersect_brute_force(tris: &[Triangle], origin: &Point3, dir: &Vector3) -> Option<Hit> {
    let mut best = None;
    for tri in tris {
        if let Some(t) = tri.intersect(origin, dir) {
            let hit = Hit {
                t,
                face: tri.face,
                order: tri.order,
            };
            if hit.beats(&best) {
                best = Some(hit);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// Leaf: first triangle. Interior: index of the right child.
    index: u32,
    /// Triangles in a leaf; zero for interior nodes.
    count: u32,
}

/// Per-direction data shared by all rays of an orthographic render.
#[derive(Debug, Clone, Copy)]
pub struct RayDirection {
    pub dir: Vector3,
    inv: [f64; 3],
    zero: [bool; 3],
}

impl RayDirection {
    pub fn new(dir: Vector3) -> Self {
        let mut inv = [0.0; 3];
        let mut zero = [false; 3];
        for k in 0..3 {
            zero[k] = dir[k] == 0.0;
            inv[k] = if zero[k] { 0.0 } else { 1.0 / dir[k] };
        }
        Self { dir, inv, zero }
    }
}

pub struct Bvh {
    nodes: Vec<Node>,
    triangles: Vec<Triangle>,
}

struct Item {
    min: Point3,
    max: Point3,
    centroid: Point3,
    tri: Triangle,
}

impl Bvh {
    pub fn build(triangles: Vec<Triangle>) -> Self {
        let mut items: Vec<Item> = triangles
            .into_iter()
            .map(|tri| {
                let (min, max) = tri.bounds();
                Item {
                    min,
                    max,
                    centroid: tri.centroid(),
                    tri,
                }
            })
            .collect();
        // Pad boxes so that traversal never prunes a triangle whose computed
        // hit lies on a box face.
        let scale = items.iter().fold(0.0f64, |m, it| {
            m.max(it.min.coords.amax()).max(it.max.coords.amax())
        });
        let pad = 1e-9 * scale.max(1.0);
        let mut nodes = Vec::with_capacity(2 * items.len() / MAX_LEAF + 1);
        if !items.is_empty() {
            let n = items.len();
            build_node(&mut items, 0, n, pad, &mut nodes);
        }
        Self {
            nodes,
            triangles: items.into_iter().map(|it| it.tri).collect(),
        }
    }

    pub fn from_model(model: &CadModel) -> Self {
        Self::build(model_triangles(model))
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    fn slab(&self, node: &Node, origin: &Point3, ray: &RayDirection, t_max: f64) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, t_max);
        for k in 0..3 {
            if ray.zero[k] {
                if origin[k] < node.min[k] || origin[k] > node.max[k] {
                    return None;
                }
                continue;
            }
            let a = (node.min[k] - origin[k]) * ray.inv[k];
            let b = (node.max[k] - origin[k]) * ray.inv[k];
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    /// Nearest hit, ordered by `(t, triangle order)`.
    pub fn intersect(&self, origin: &Point3, ray: &RayDirection) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Hit> = None;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut current = 0u32;
        loop {
            let node = &self.nodes[current as usize];
            let limit = best.map_or(f64::INFINITY, |h| h.t);
            let visit = self.slab(node, origin, ray, limit).is_some();
            if visit && node.count > 0 {
                let start = node.index as usize;
                for tri in &self.triangles[start..start + node.count as usize] {
                    if let Some(t) = tri.intersect(origin, &ray.dir) {
                        let hit = Hit {
                            t,
                            face: tri.face,
                            order: tri.order,
                        };
                        if hit.beats(&best) {
                            best = Some(hit);
                        }
                    }
                }
            } else if visit {
                let left = current + 1;
                let right = node.index;
                // Visit the child nearer along the ray first.
                let dl = self.slab(&self.nodes[left as usize], origin, ray, limit);
                let dr = self.slab(&self.nodes[right as usize], origin, ray, limit);
                match (dl, dr) {
                    (Some(a), Some(b)) => {
                        let (first, second) = if a <= b { (left, right) } else { (right, left) };
                        stack[sp] = second;
                        sp += 1;
                        current = first;
                        continue;
                    }
                    (Some(_), None) => {
                        current = left;
                        continue;
                    }
                    (None, Some(_)) => {
                        current = right;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            if sp == 0 {
                break;
            }
            sp -= 1;
            current = stack[sp];
        }
        best
    }
}

fn bounds_of(items: &[Item]) -> (Point3, Point3) {
    let mut min = items[0].min;
    let mut max = items[0].max;
    for it in &items[1..] {
        min = min.inf(&it.min);
        max = max.sup(&it.max);
    }
    (min, max)
}

fn half_area(min: &Point3, max: &Point3) -> f64 {
    let d = max - min;
    d.x * d.y + d.y * d.z + d.z * d.x
}

fn build_node(items: &mut [Item], offset: usize, len: usize, pad: f64, nodes: &mut Vec<Node>) {
    let slice = &mut items[offset..offset + len];
    let (min, max) = bounds_of(slice);
    let index = nodes.len();
    nodes.push(Node {
        min: [min.x - pad, min.y - pad, min.z - pad],
        max: [max.x + pad, max.y + pad, max.z + pad],
        index: offset as u32,
        count: len as u32,
    });
    if len <= MAX_LEAF {
        return;
    }

    let (mut cmin, mut cmax) = (slice[0].centroid, slice[0].centroid);
    for it in slice.iter() {
        cmin = cmin.inf(&it.centroid);
        cmax = cmax.sup(&it.centroid);
    }
    let extent = cmax - cmin;
    let axis = extent.imax();
    let span = extent[axis];

    let mid = if span > 0.0 {
        let bin_of = |c: f64| (((c - cmin[axis]) / span * BINS as f64) as usize).min(BINS - 1);
        let mut counts = [0usize; BINS];
        let mut boxes: [Option<(Point3, Point3)>; BINS] = [None; BINS];
        for it in slice.iter() {
            let b = bin_of(it.centroid[axis]);
            counts[b] += 1;
            boxes[b] = Some(match boxes[b] {
                None => (it.min, it.max),
                Some((lo, hi)) => (lo.inf(&it.min), hi.sup(&it.max)),
            });
        }
        // Sweep costs for splits after each bin.
        let mut left_cost = [0.0f64; BINS];
        let mut acc: Option<(Point3, Point3)> = None;
        let mut n = 0;
        for b in 0..BINS - 1 {
            n += counts[b];
            if let Some(bx) = boxes[b] {
                acc = Some(acc.map_or(bx, |(lo, hi)| (lo.inf(&bx.0), hi.sup(&bx.1))));
            }
            left_cost[b] = acc.map_or(0.0, |(lo, hi)| half_area(&lo, &hi)) * n as f64;
        }
        let mut best = (f64::INFINITY, BINS / 2);
        let mut acc: Option<(Point3, Point3)> = None;
        let mut n = 0;
        for b in (1..BINS).rev() {
            n += counts[b];
            if let Some(bx) = boxes[b] {
                acc = Some(acc.map_or(bx, |(lo, hi)| (lo.inf(&bx.0), hi.sup(&bx.1))));
            }
            let cost =
                left_cost[b - 1] + acc.map_or(0.0, |(lo, hi)| half_area(&lo, &hi)) * n as f64;
            if cost < best.0 {
                best = (cost, b);
            }
        }
        let split_bin = best.1;
        let mut i = 0;
        for j in 0..slice.len() {
            if bin_of(slice[j].centroid[axis]) < split_bin {
                slice.swap(i, j);
                i += 1;
            }
        }
        i
    } else {
        0
    };
    // Fall back to an even split when binning cannot separate the items.
    let mid = if mid == 0 || mid == len {
        slice.sort_by(|a, b| a.centroid[axis].total_cmp(&b.centroid[axis]));
        len / 2
    } else {
        mid
    };

    build_node(items, offset, mid, pad, nodes);
    let right = nodes.len() as u32;
    build_node(items, offset + mid, len - mid, pad, nodes);
    let node = &mut nodes[index];
    node.index = right;
    node.count = 0;
}
