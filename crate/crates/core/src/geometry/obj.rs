//! Reader and writer for the face-grouped OBJ dialect.
//!
//! Only `v`, `f`, and `g` records are interpreted. Every `g` record opens a
//! new face group; texture and normal indices on `f` records are ignored.

use std::fmt::Write as _;

use super::{CadModel, GeometryError, Point3};

/// A polygon soup grouped by `g` records, before welding and triangulation.
#[derive(Debug, Clone, Default)]
pub struct RawMesh {
    pub vertices: Vec<Point3>,
    pub groups: Vec<RawGroup>,
}

#[derive(Debug, Clone)]
pub struct RawGroup {
    pub name: String,
    /// Zero-based vertex indices per polygon.
    pub polygons: Vec<Vec<usize>>,
    /// Source line of the `g` record (0 for synthesized groups).
    pub line: usize,
}

impl RawMesh {
    /// Appends a group built from explicit triangles, deduplicating nothing.
    pub fn push_triangles(&mut self, name: impl Into<String>, triangles: &[[Point3; 3]]) {
        let mut polygons = Vec::with_capacity(triangles.len());
        for tri in triangles {
            let base = self.vertices.len();
            self.vertices.extend_from_slice(tri);
            polygons.push(vec![base, base + 1, base + 2]);
        }
        self.groups.push(RawGroup {
            name: name.into(),
            polygons,
            line: 0,
        });
    }
}

fn malformed(line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::MalformedMesh {
        line,
        message: message.into(),
    }
}

fn parse_index(token: &str, vertex_count: usize, line: usize) -> Result<usize, GeometryError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head
        .parse()
        .map_err(|_| malformed(line, format!("bad vertex reference `{token}`")))?;
    let resolved = match raw {
        0 => return Err(malformed(line, "vertex index 0 is not valid in OBJ")),
        r if r > 0 => (r - 1) as usize,
        r => {
            let back = (-r) as usize;
            if back > vertex_count {
                return Err(malformed(line, format!("relative index {r} out of range")));
            }
            vertex_count - back
        }
    };
    if resolved >= vertex_count {
        return Err(malformed(
            line,
            format!("vertex index {raw} refers past the {vertex_count} vertices read so far"),
        ));
    }
    Ok(resolved)
}

/// Parses OBJ text. Faces that appear before any `g` record land in an
/// implicit group named `default`.
pub fn parse_obj(text: &str) -> Result<RawMesh, GeometryError> {
    let mut mesh = RawMesh::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| malformed(line_no, "vertex coordinate is not a number"))?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(malformed(line_no, "vertex needs three finite coordinates"));
                }
                mesh.vertices
                    .push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "g" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                if name.is_empty() {
                    return Err(malformed(line_no, "group record without a name"));
                }
                mesh.groups.push(RawGroup {
                    name,
                    polygons: Vec::new(),
                    line: line_no,
                });
            }
            "f" => {
                let polygon = tokens
                    .map(|t| parse_index(t, mesh.vertices.len(), line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                if polygon.len() < 3 {
                    return Err(malformed(line_no, "polygon with fewer than three vertices"));
                }
                if mesh.groups.is_empty() {
                    mesh.groups.push(RawGroup {
                        name: "default".to_string(),
                        polygons: Vec::new(),
                        line: line_no,
                    });
                }
                mesh.groups
                    .last_mut()
                    .expect("group exists")
                    .polygons
                    .push(polygon);
            }
            // vt, vn, o, s, usemtl, mtllib and friends carry nothing we need.
            _ => {}
        }
    }
    Ok(mesh)
}

/// Serializes a model in millimeters, one `g face_<id>` group per face.
///
/// Coordinates use the shortest representation that parses back to the same
/// `f64`, so a reload reproduces vertex positions bit for bit.
pub fn write_obj(model: &CadModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# face-grouped mesh, units: mm");
    for v in &model.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for face in &model.faces {
        let _ = writeln!(out, "g face_{}", face.id);
        for t in &face.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_slashed_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\ng face_0\nf 1/1/1 2//2 -1\n";
        let mesh = parse_obj(text).unwrap();
        assert_eq!(mesh.groups.len(), 1);
        assert_eq!(mesh.groups[0].polygons, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = parse_obj("v 0 0 0\ng a\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, GeometryError::MalformedMesh { line: 3, .. }));
    }

    #[test]
    fn rejects_two_vertex_polygon() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\ng a\nf 1 2\n").unwrap_err();
        assert!(matches!(err, GeometryError::MalformedMesh { .. }));
    }

    #[test]
    fn implicit_group_for_leading_faces() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(mesh.groups[0].name, "default");
    }

    #[test]
    fn ignores_comments_and_unknown_records() {
        let text = "# hi\nmtllib x.mtl\nv 0 0 0 # trailing\nv 1 0 0\nv 0 1 0\nvn 0 0 1\ng face_0\ns off\nf 1 2 3\n";
        let mesh = parse_obj(text).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
    }
}
