//! Element prototypes (per-type geometry, samples, skeleton, occupancy) and
//! instances (per-element degrees of freedom), plus the map from parameters
//! to world-space sample positions.

pub mod cache;
pub mod rotation;
pub mod sampling;
pub mod skeleton;

use nalgebra::Point3;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::scene::Scene;
use crate::{Mat3, Vec3};

use rotation::rotation_from_expmap;
use skeleton::SkeletonTree;

/// Voxel resolution for prototype occupancy volumes.
pub const OCCUPANCY_RESOLUTION: usize = 64;

/// Inside/outside voxelization of a prototype mesh in its local frame.
/// Voxels are classified at their centers by the winding number.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub origin: Point3<f64>,
    pub spacing: Vec3,
    pub dims: [usize; 3],
    pub bits: Vec<bool>,
}

impl Occupancy {
    pub fn build(mesh: &TriMesh, resolution: usize) -> Self {
        let (lo, hi) = mesh.bbox();
        let pad = (hi - lo).norm() * 0.02 + 1e-9;
        let lo = lo - Vec3::repeat(pad);
        let hi = hi + Vec3::repeat(pad);
        let n = resolution.max(2);
        let spacing = (hi - lo) / n as f64;
        let bits: Vec<bool> = (0..n * n * n)
            .into_par_iter()
            .map(|idx| {
                let i = idx % n;
                let j = (idx / n) % n;
                let k = idx / (n * n);
                let center = lo
                    + Vec3::new(
                        (i as f64 + 0.5) * spacing.x,
                        (j as f64 + 0.5) * spacing.y,
                        (k as f64 + 0.5) * spacing.z,
                    );
                mesh.contains(&center)
            })
            .collect();
        Self { origin: lo, spacing, dims: [n, n, n], bits }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let rel = p - self.origin;
        let mut c = [0usize; 3];
        for a in 0..3 {
            let t = rel[a] / self.spacing[a];
            if t < 0.0 || t >= self.dims[a] as f64 {
                return false;
            }
            c[a] = t as usize;
        }
        self.bits[c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])]
    }
}

/// Immutable per-type element data shared by all its instances.
#[derive(Debug, Clone)]
pub struct ElementPrototype {
    pub id: String,
    pub mesh: TriMesh,
    /// Untransformed sample positions in the local frame.
    pub local_samples: Vec<Point3<f64>>,
    /// Local-unit sample radii.
    pub radii: Vec<f64>,
    /// Skeleton tree; present exactly for deformable prototypes.
    pub skeleton: Option<SkeletonTree>,
    pub occupancy: Occupancy,
    /// Componentwise joint rotation bound (radians).
    pub omega_limit: f64,
    /// Authored uniform scale; instances start with A = scale * I.
    pub base_scale: f64,
}

impl ElementPrototype {
    pub fn build(
        id: &str,
        mesh: TriMesh,
        num_samples: usize,
        deformable: bool,
        omega_limit: f64,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if deformable && num_samples < 2 {
            return Err(Error::Validation(format!(
                "prototype {id}: deformable elements need at least 2 samples"
            )));
        }
        let (local_samples, radii) = sampling::sample_prototype(&mesh, num_samples, seed)?;
        let skeleton =
            if deformable { Some(SkeletonTree::build(&local_samples, seed)?) } else { None };
        let occupancy = Occupancy::build(&mesh, OCCUPANCY_RESOLUTION);
        Ok(Self {
            id: id.to_string(),
            mesh,
            local_samples,
            radii,
            skeleton,
            occupancy,
            omega_limit,
            base_scale: scale,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.local_samples.len()
    }

    pub fn is_deformable(&self) -> bool {
        self.skeleton.is_some()
    }
}

/// Per-element degrees of freedom plus the accumulated fixed transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementInstance {
    pub prototype: usize,
    pub translation: Vec3,
    /// Exponential-map rotation (gamma).
    pub rotation: Vec3,
    /// Per-sample joint rotations; empty for rigid instances. The root
    /// sample's entry exists but stays zero (it carries no parameters).
    pub omega: Vec<Vec3>,
    /// Fixed transform A (rotation * uniform scale), updated by
    /// reparameterization.
    pub fixed_transform: Mat3,
}

impl ElementInstance {
    /// Identity placement of a prototype.
    pub fn new(prototype_index: usize, prototype: &ElementPrototype) -> Self {
        let omega = if prototype.is_deformable() {
            vec![Vec3::zeros(); prototype.num_samples()]
        } else {
            Vec::new()
        };
        Self {
            prototype: prototype_index,
            translation: Vec3::zeros(),
            rotation: Vec3::zeros(),
            omega,
            fixed_transform: Mat3::identity() * prototype.base_scale,
        }
    }

    pub fn world_rotation(&self) -> Mat3 {
        rotation_from_expmap(&self.rotation)
    }

    /// Uniform scale factor of the fixed transform.
    pub fn uniform_scale(&self) -> f64 {
        self.fixed_transform.determinant().abs().cbrt()
    }

    fn scale_is_uniform(&self) -> bool {
        let s2 = self.uniform_scale().powi(2);
        let gram = self.fixed_transform.transpose() * self.fixed_transform;
        (gram - Mat3::identity() * s2).norm() <= 1e-9 * s2.max(1e-30)
    }

    /// Local sample positions: rest positions for rigid instances, the
    /// skeleton recursion for deformable ones.
    pub fn local_positions(&self, proto: &ElementPrototype) -> Vec<Point3<f64>> {
        match &proto.skeleton {
            Some(tree) => tree.local_positions(&proto.local_samples, &self.omega),
            None => proto.local_samples.clone(),
        }
    }

    /// Fold the current rotation into the fixed transform once the
    /// exponential map nears its singularity. World positions are unchanged.
    pub fn reparameterize_rotation(&mut self) -> bool {
        if self.rotation.norm() < std::f64::consts::PI {
            return false;
        }
        self.fixed_transform = self.world_rotation() * self.fixed_transform;
        self.rotation = Vec3::zeros();
        true
    }
}

/// World-space positions and radii of every sample of every instance,
/// flattened; columns group by instance in order.
#[derive(Debug, Clone)]
pub struct WorldSamples {
    pub positions: Vec<Point3<f64>>,
    pub radii: Vec<f64>,
    /// Owning instance per sample.
    pub element: Vec<usize>,
    /// Index within the owning prototype's sample list.
    pub local_index: Vec<usize>,
    /// Start offset of each instance's samples; len = instances + 1.
    pub offsets: Vec<usize>,
}

impl WorldSamples {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn instance_range(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }
}

/// P = R(gamma) A Y(theta) + t for every instance; world radii are local
/// radii scaled by the uniform scale of A.
pub fn world_sample_positions(
    instances: &[ElementInstance],
    prototypes: &[ElementPrototype],
) -> Result<WorldSamples> {
    let total: usize = instances.iter().map(|i| prototypes[i.prototype].num_samples()).sum();
    let mut out = WorldSamples {
        positions: Vec::with_capacity(total),
        radii: Vec::with_capacity(total),
        element: Vec::with_capacity(total),
        local_index: Vec::with_capacity(total),
        offsets: Vec::with_capacity(instances.len() + 1),
    };
    out.offsets.push(0);
    for (e, inst) in instances.iter().enumerate() {
        let proto = &prototypes[inst.prototype];
        if proto.is_deformable() && !inst.scale_is_uniform() {
            return Err(Error::Geometry(format!(
                "instance {e} of {}: non-uniform fixed transform with a deformable \
                 skeleton makes radii anisotropic",
                proto.id
            )));
        }
        let scale = inst.uniform_scale();
        let ra = inst.world_rotation() * inst.fixed_transform;
        for (s, y) in inst.local_positions(proto).iter().enumerate() {
            out.positions.push(Point3::from(ra * y.coords + inst.translation));
            out.radii.push(proto.radii[s] * scale);
            out.element.push(e);
            out.local_index.push(s);
        }
        out.offsets.push(out.positions.len());
    }
    Ok(out)
}

/// Does world point `x` lie inside the element? Rigid instances query the
/// prototype occupancy voxelization in the local frame; deformable instances
/// use the union of their (deformed) sample spheres, which follows the
/// skeleton exactly.
pub fn occupancy_query(
    instance: &ElementInstance,
    proto: &ElementPrototype,
    x: &Point3<f64>,
) -> bool {
    let ra = instance.world_rotation() * instance.fixed_transform;
    let Some(inv) = ra.try_inverse() else {
        return false;
    };
    let local = Point3::from(inv * (x.coords - instance.translation));
    match &proto.skeleton {
        None => proto.occupancy.contains(&local),
        Some(tree) => {
            let centers = tree.local_positions(&proto.local_samples, &instance.omega);
            centers
                .iter()
                .zip(proto.radii.iter())
                .any(|(c, r)| (local - c).norm_squared() <= r * r)
        }
    }
}

fn derive_seed(scene_seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    scene_seed ^ u64::from_le_bytes(bytes)
}

/// Build (or load from sidecar caches) every prototype in the scene's
/// inventory, in inventory order.
pub fn build_prototypes(scene: &Scene) -> Result<Vec<ElementPrototype>> {
    scene
        .config
        .inventory
        .iter()
        .map(|entry| {
            let path = scene.base_dir.join(&entry.mesh);
            let seed = derive_seed(scene.config.seed, &entry.id);
            cache::load_or_build(entry, &path, seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_proto() -> ElementPrototype {
        ElementPrototype::build("ball", TriMesh::icosphere(1.0, 1), 1, false, 1.0, 1.0, 5)
            .unwrap()
    }

    #[test]
    fn identity_instance_translation() {
        let proto = sphere_proto();
        let mut inst = ElementInstance::new(0, &proto);
        inst.translation = Vec3::new(1.0, 2.0, 3.0);
        // single sample near the origin of the local frame
        let ws = world_sample_positions(&[inst], &[proto.clone()]).unwrap();
        let expected = Point3::from(proto.local_samples[0].coords + Vec3::new(1.0, 2.0, 3.0));
        assert!((ws.positions[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_moves_sample() {
        let proto = ElementPrototype {
            local_samples: vec![Point3::new(1.0, 0.0, 0.0)],
            radii: vec![0.5],
            ..sphere_proto()
        };
        let mut inst = ElementInstance::new(0, &proto);
        inst.rotation = Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let ws = world_sample_positions(&[inst], &[proto]).unwrap();
        assert!((ws.positions[0] - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn uniform_scale_scales_radii() {
        let proto = ElementPrototype {
            local_samples: vec![Point3::new(1.0, 0.0, 0.0)],
            radii: vec![0.5],
            ..sphere_proto()
        };
        let mut inst = ElementInstance::new(0, &proto);
        inst.fixed_transform = Mat3::identity() * 2.0;
        let ws = world_sample_positions(&[inst], &[proto]).unwrap();
        assert!((ws.positions[0] - Point3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((ws.radii[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reparameterization_below_pi_is_noop() {
        let proto = sphere_proto();
        let mut inst = ElementInstance::new(0, &proto);
        inst.rotation = Vec3::new(0.1, 0.0, 0.0);
        assert!(!inst.reparameterize_rotation());
        assert_eq!(inst.rotation, Vec3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn reparameterization_preserves_world_samples() {
        let proto = ElementPrototype {
            local_samples: vec![Point3::new(0.3, -0.2, 0.4), Point3::new(-0.1, 0.2, 0.0)],
            radii: vec![0.2, 0.2],
            ..sphere_proto()
        };
        let mut inst = ElementInstance::new(0, &proto);
        inst.rotation = Vec3::new(2.0, 2.0, 1.4); // |gamma| = 3.16 > pi
        inst.translation = Vec3::new(0.5, 0.0, -0.25);
        let before = world_sample_positions(&[inst.clone()], &[proto.clone()]).unwrap();
        assert!(inst.reparameterize_rotation());
        assert_eq!(inst.rotation, Vec3::zeros());
        let after = world_sample_positions(&[inst.clone()], &[proto.clone()]).unwrap();
        for (a, b) in before.positions.iter().zip(after.positions.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        // idempotent from here on
        assert!(!inst.reparameterize_rotation());
    }

    #[test]
    fn occupancy_query_cube_faces() {
        let proto =
            ElementPrototype::build("cube", TriMesh::unit_box(), 1, false, 1.0, 1.0, 3).unwrap();
        let inst = ElementInstance::new(0, &proto);
        assert!(occupancy_query(&inst, &proto, &Point3::new(0.49, 0.0, 0.0)));
        assert!(!occupancy_query(&inst, &proto, &Point3::new(0.51, 0.0, 0.0)));
        // sample centers are interior
        let ws = world_sample_positions(&[inst.clone()], &[proto.clone()]).unwrap();
        assert!(occupancy_query(&inst, &proto, &ws.positions[0]));
        // far outside
        assert!(!occupancy_query(&inst, &proto, &Point3::new(10.0, 0.0, 0.0)));
    }

    #[test]
    fn nonuniform_scale_with_skeleton_rejected() {
        let mesh = TriMesh::box_mesh(Vec3::new(1.5, 0.4, 0.4));
        let proto = ElementPrototype::build("bar", mesh, 4, true, 1.0, 1.0, 11).unwrap();
        let mut inst = ElementInstance::new(0, &proto);
        inst.fixed_transform = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        assert!(world_sample_positions(&[inst], &[proto]).is_err());
    }

    #[test]
    fn deformable_occupancy_follows_samples() {
        let mesh = TriMesh::box_mesh(Vec3::new(1.5, 0.3, 0.3));
        let proto = ElementPrototype::build("bar", mesh, 5, true, 1.0, 1.0, 13).unwrap();
        let inst = ElementInstance::new(0, &proto);
        let ws = world_sample_positions(&[inst.clone()], &[proto.clone()]).unwrap();
        for p in &ws.positions {
            assert!(occupancy_query(&inst, &proto, p));
        }
        assert!(!occupancy_query(&inst, &proto, &Point3::new(0.0, 5.0, 0.0)));
    }
}
