//! Output-domain geometry: analytic primitives and voxelized mesh signed
//! distance fields. Sign convention: negative strictly inside, positive
//! outside, zero on the boundary.

use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::Vec3;

fn default_sdf_resolution() -> usize {
    64
}

/// Shape description as written in a scene document. Analytic variants are
/// evaluated exactly; the mesh variant is voxelized into a [`MeshSdf`] by
/// [`ShapeSpec::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    Cylinder {
        /// Center of the bottom cap.
        base: [f64; 3],
        /// Axis direction; normalized on evaluation.
        axis: [f64; 3],
        radius: f64,
        height: f64,
    },
    /// Intersection of half-spaces n.x <= c. Needs an explicit bounding box
    /// when used as the output domain.
    HalfSpaces {
        planes: Vec<HalfSpace>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        bbox: Option<([f64; 3], [f64; 3])>,
    },
    /// Closed triangle mesh, voxelized to a signed distance grid.
    Mesh {
        path: String,
        #[serde(default = "default_sdf_resolution")]
        resolution: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: [f64; 3],
    pub offset: f64,
}

fn pt(a: &[f64; 3]) -> Point3<f64> {
    Point3::new(a[0], a[1], a[2])
}

impl ShapeSpec {
    pub fn is_analytic(&self) -> bool {
        !matches!(self, ShapeSpec::Mesh { .. })
    }

    /// Exact signed distance of an analytic shape. Mesh shapes must be built
    /// into a [`Shape`] first.
    pub fn signed_distance(&self, x: &Point3<f64>) -> f64 {
        match self {
            ShapeSpec::Sphere { center, radius } => (x - pt(center)).norm() - radius,
            ShapeSpec::Box { min, max } => {
                let c = (pt(min).coords + pt(max).coords) * 0.5;
                let h = (pt(max).coords - pt(min).coords) * 0.5;
                let q = (x.coords - c).abs() - h;
                let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
                outside.norm() + q.x.max(q.y).max(q.z).min(0.0)
            }
            ShapeSpec::Cylinder { base, axis, radius, height } => {
                let a = Vec3::new(axis[0], axis[1], axis[2]).normalize();
                let rel = x - pt(base);
                let t = rel.dot(&a);
                let radial = (rel - a * t).norm() - radius;
                let axial = (t - height * 0.5).abs() - height * 0.5;
                let outside = Vec3::new(radial.max(0.0), axial.max(0.0), 0.0).norm();
                outside + radial.max(axial).min(0.0)
            }
            ShapeSpec::HalfSpaces { planes, .. } => planes
                .iter()
                .map(|p| {
                    let n = Vec3::new(p.normal[0], p.normal[1], p.normal[2]);
                    let len = n.norm();
                    (n.dot(&x.coords) - p.offset) / len
                })
                .fold(f64::NEG_INFINITY, f64::max),
            ShapeSpec::Mesh { .. } => {
                unreachable!("mesh shapes must be voxelized before evaluation")
            }
        }
    }

    pub fn contains(&self, x: &Point3<f64>) -> bool {
        self.signed_distance(x) <= 0.0
    }

    /// Finite bounding box, if the shape has one without loading files.
    pub fn bbox(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        match self {
            ShapeSpec::Sphere { center, radius } => {
                let c = pt(center);
                let r = Vec3::repeat(*radius);
                Some((c - r, c + r))
            }
            ShapeSpec::Box { min, max } => Some((pt(min), pt(max))),
            ShapeSpec::Cylinder { base, axis, radius, height } => {
                let a = Vec3::new(axis[0], axis[1], axis[2]).normalize();
                let b0 = pt(base);
                let b1 = b0 + a * *height;
                // per-axis extent of a disk of radius r with normal a
                let e = Vec3::new(
                    (1.0 - a.x * a.x).max(0.0).sqrt(),
                    (1.0 - a.y * a.y).max(0.0).sqrt(),
                    (1.0 - a.z * a.z).max(0.0).sqrt(),
                ) * *radius;
                let lo =
                    Point3::new(b0.x.min(b1.x) - e.x, b0.y.min(b1.y) - e.y, b0.z.min(b1.z) - e.z);
                let hi =
                    Point3::new(b0.x.max(b1.x) + e.x, b0.y.max(b1.y) + e.y, b0.z.max(b1.z) + e.z);
                Some((lo, hi))
            }
            ShapeSpec::HalfSpaces { bbox, .. } => bbox.map(|(lo, hi)| (pt(&lo), pt(&hi))),
            ShapeSpec::Mesh { .. } => None,
        }
    }

    /// Resolve the shape into an evaluatable form, voxelizing meshes.
    /// Relative mesh paths are resolved against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Shape> {
        match self {
            ShapeSpec::Mesh { path, resolution } => {
                let full = base_dir.join(path);
                let mesh = TriMesh::load_obj(&full)?;
                if !mesh.is_closed() {
                    return Err(Error::Geometry(format!(
                        "domain mesh {} is not closed",
                        full.display()
                    )));
                }
                Ok(Shape::Mesh(MeshSdf::build(&mesh, *resolution)?))
            }
            other => Ok(Shape::Analytic(other.clone())),
        }
    }
}

/// Trilinearly interpolated signed distance samples on a regular node grid.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    origin: Point3<f64>,
    spacing: Vec3,
    /// Nodes per axis (>= 2 each).
    dims: [usize; 3],
    values: Vec<f64>,
    bbox: (Point3<f64>, Point3<f64>),
}

impl MeshSdf {
    /// Voxelize `mesh` at `resolution` nodes per axis. Inside/outside comes
    /// from the generalized winding number, magnitude from exact
    /// point-triangle distance.
    pub fn build(mesh: &TriMesh, resolution: usize) -> Result<Self> {
        if mesh.triangles.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }
        let (lo, hi) = mesh.bbox();
        let pad = (hi - lo).norm() * 0.02 + 1e-9;
        let lo = lo - Vec3::repeat(pad);
        let hi = hi + Vec3::repeat(pad);
        let n = resolution.max(2);
        let dims = [n, n, n];
        let spacing = Vec3::new(
            (hi.x - lo.x) / (n - 1) as f64,
            (hi.y - lo.y) / (n - 1) as f64,
            (hi.z - lo.z) / (n - 1) as f64,
        );
        let values: Vec<f64> = (0..n * n * n)
            .into_par_iter()
            .map(|idx| {
                let i = idx % n;
                let j = (idx / n) % n;
                let k = idx / (n * n);
                let p = Point3::new(
                    lo.x + i as f64 * spacing.x,
                    lo.y + j as f64 * spacing.y,
                    lo.z + k as f64 * spacing.z,
                );
                let d = mesh.unsigned_distance(&p);
                if mesh.contains(&p) {
                    -d
                } else {
                    d
                }
            })
            .collect();
        Ok(Self { origin: lo, spacing, dims, values, bbox: (lo, hi) })
    }

    fn node(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        self.bbox
    }

    pub fn value(&self, x: &Point3<f64>) -> f64 {
        // clamp into the grid; add the clamping offset so points far outside
        // still report a positive, growing distance
        let local = x - self.origin;
        let mut f = [0.0_f64; 3];
        let mut cell = [0usize; 3];
        let mut clamp_dist2 = 0.0;
        for a in 0..3 {
            let t = local[a] / self.spacing[a];
            let max_t = (self.dims[a] - 1) as f64;
            let tc = t.clamp(0.0, max_t);
            let d = (t - tc) * self.spacing[a];
            clamp_dist2 += d * d;
            let c = (tc.floor() as usize).min(self.dims[a] - 2);
            cell[a] = c;
            f[a] = tc - c as f64;
        }
        let (i, j, k) = (cell[0], cell[1], cell[2]);
        let (fx, fy, fz) = (f[0], f[1], f[2]);
        let mut v = 0.0;
        for (dk, wz) in [(0, 1.0 - fz), (1, fz)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
                    v += wx * wy * wz * self.node(i + di, j + dj, k + dk);
                }
            }
        }
        v + clamp_dist2.sqrt()
    }
}

/// An evaluatable shape: analytic or voxelized mesh.
#[derive(Debug, Clone)]
pub enum Shape {
    Analytic(ShapeSpec),
    Mesh(MeshSdf),
}

impl Shape {
    pub fn signed_distance(&self, x: &Point3<f64>) -> f64 {
        match self {
            Shape::Analytic(p) => p.signed_distance(x),
            Shape::Mesh(sdf) => sdf.value(x),
        }
    }

    pub fn bbox(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        match self {
            Shape::Analytic(p) => p.bbox(),
            Shape::Mesh(sdf) => Some(sdf.bbox()),
        }
    }
}

/// The output domain: a base shape minus forbidden regions.
#[derive(Debug, Clone)]
pub struct DomainShape {
    pub base: Shape,
    pub forbidden: Vec<Shape>,
}

impl DomainShape {
    /// Signed distance to the usable domain: the intersection of the base
    /// shape with the complement of every forbidden region.
    pub fn signed_distance(&self, x: &Point3<f64>) -> f64 {
        let mut d = self.base.signed_distance(x);
        for f in &self.forbidden {
            d = d.max(-f.signed_distance(x));
        }
        d
    }

    /// Spatial gradient of the signed distance by central differences.
    pub fn gradient(&self, x: &Point3<f64>) -> Vec3 {
        let h = self.fd_step();
        let mut g = Vec3::zeros();
        for a in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[a] += h;
            xm[a] -= h;
            g[a] = (self.signed_distance(&xp) - self.signed_distance(&xm)) / (2.0 * h);
        }
        g
    }

    fn fd_step(&self) -> f64 {
        match self.bbox() {
            Some((lo, hi)) => ((hi - lo).norm() * 1e-7).max(1e-9),
            None => 1e-6,
        }
    }

    pub fn bbox(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        self.base.bbox()
    }

    pub fn contains(&self, x: &Point3<f64>) -> bool {
        self.signed_distance(x) <= 0.0
    }
}
