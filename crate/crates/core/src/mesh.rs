//! Triangle meshes: OBJ reading/writing, inside/outside queries via
//! generalized winding numbers, and exact point-surface distance.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::Vec3;

/// Indexed triangle mesh with f64 vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Self {
        Self { vertices, triangles }
    }

    /// Read a triangles-only Wavefront OBJ. Faces with more or fewer than
    /// three vertices are rejected.
    pub fn load_obj(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse_obj(&text, &path.display().to_string())
    }

    /// Parse OBJ text; `source` names the origin in error messages.
    pub fn parse_obj(text: &str, source: &str) -> Result<Self> {
        let reader = BufReader::new(text.as_bytes());
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let mut coord = [0.0; 3];
                    for c in &mut coord {
                        *c = parts
                            .next()
                            .and_then(|t| t.parse::<f64>().ok())
                            .ok_or_else(|| {
                                Error::Parse(format!("{source}:{}: bad vertex", lineno + 1))
                            })?;
                    }
                    vertices.push(Point3::new(coord[0], coord[1], coord[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = parts
                        .map(|t| {
                            // "f v", "f v/vt", "f v/vt/vn", "f v//vn"
                            t.split('/')
                                .next()
                                .and_then(|s| s.parse::<usize>().ok())
                                .ok_or_else(|| {
                                    Error::Parse(format!(
                                        "{source}:{}: bad face index",
                                        lineno + 1
                                    ))
                                })
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::Parse(format!(
                            "{source}:{}: only triangle faces are supported (got {})",
                            lineno + 1,
                            idx.len()
                        )));
                    }
                    triangles.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
                }
                _ => {}
            }
        }
        let mesh = Self { vertices, triangles };
        for t in &mesh.triangles {
            if t.iter().any(|&v| v >= mesh.vertices.len()) {
                return Err(Error::Parse(format!(
                    "{source}: face references out-of-range vertex"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn save_obj(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_obj(&mut out)
    }

    pub fn write_obj<W: Write>(&self, out: &mut W) -> Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// A mesh is closed (watertight and consistently oriented) when every
    /// directed edge is matched by exactly one opposite directed edge.
    pub fn is_closed(&self) -> bool {
        use std::collections::HashMap;
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a == b {
                    return false;
                }
                *directed.entry((a, b)).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Generalized winding number of `p`; ~1 inside, ~0 outside.
    pub fn winding_number(&self, p: &Point3<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.triangles {
            let a = self.vertices[t[0]] - p;
            let b = self.vertices[t[1]] - p;
            let c = self.vertices[t[2]] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let det = a.dot(&b.cross(&c));
            let denom = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * det.atan2(denom);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.winding_number(p) > 0.5
    }

    /// Unsigned distance from `p` to the surface.
    pub fn unsigned_distance(&self, p: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for t in &self.triangles {
            let d2 = point_triangle_distance_squared(
                p,
                &self.vertices[t[0]],
                &self.vertices[t[1]],
                &self.vertices[t[2]],
            );
            best = best.min(d2);
        }
        best.sqrt()
    }

    /// Axis-aligned box spanning [-hx,hx] x [-hy,hy] x [-hz,hz].
    pub fn box_mesh(half_extents: Vec3) -> Self {
        let h = half_extents;
        let vertices = vec![
            Point3::new(-h.x, -h.y, -h.z),
            Point3::new(h.x, -h.y, -h.z),
            Point3::new(h.x, h.y, -h.z),
            Point3::new(-h.x, h.y, -h.z),
            Point3::new(-h.x, -h.y, h.z),
            Point3::new(h.x, -h.y, h.z),
            Point3::new(h.x, h.y, h.z),
            Point3::new(-h.x, h.y, h.z),
        ];
        // outward-oriented
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self { vertices, triangles }
    }

    /// Unit cube centered at the origin.
    pub fn unit_box() -> Self {
        Self::box_mesh(Vec3::new(0.5, 0.5, 0.5))
    }

    /// Icosphere of radius `radius`, `subdivisions` rounds of 4-way splits.
    pub fn icosphere(radius: f64, subdivisions: u32) -> Self {
        let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3<f64>> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| {
            let n = Vec3::new(x, y, z).normalize() * radius;
            Point3::new(n.x, n.y, n.z)
        })
        .collect();
        let mut triangles: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        use std::collections::HashMap;
        for _ in 0..subdivisions {
            let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for t in &triangles {
                let mut mid = [0usize; 3];
                for k in 0..3 {
                    let (a, b) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                    mid[k] = *midpoint.entry((a, b)).or_insert_with(|| {
                        let m = (vertices[a].coords + vertices[b].coords).normalize() * radius;
                        vertices.push(Point3::new(m.x, m.y, m.z));
                        vertices.len() - 1
                    });
                }
                next.push([t[0], mid[0], mid[2]]);
                next.push([t[1], mid[1], mid[0]]);
                next.push([t[2], mid[2], mid[1]]);
                next.push([mid[0], mid[1], mid[2]]);
            }
            triangles = next;
        }
        Self { vertices, triangles }
    }
}

/// Squared distance from `p` to triangle `abc` (Ericson, Real-Time Collision
/// Detection, ch. 5.1.5).
pub fn point_triangle_distance_squared(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm_squared();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - ab * v - ac * w).norm_squared()
}
