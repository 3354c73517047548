//! Binary sidecar caching for prototype build products (samples, radii,
//! skeleton, occupancy), keyed by a content hash over the mesh bytes and
//! every sampling input. A stale or unreadable sidecar is rebuilt silently.


use std::path::{Path, PathBuf};

use nalgebra::Point3;
use sha2::{Digest, Sha256};

use crate::element::skeleton::SkeletonTree;
use crate::element::{ElementPrototype, Occupancy, OCCUPANCY_RESOLUTION};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::scene::InventoryEntry;
use crate::Vec3;

const MAGIC: &[u8; 4] = b"AGGP";
const VERSION: u32 = 1;

fn cache_key(mesh_bytes: &[u8], entry: &InventoryEntry, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(MAGIC);
    h.update(VERSION.to_le_bytes());
    h.update(mesh_bytes);
    h.update((entry.samples as u64).to_le_bytes());
    h.update([entry.deformable as u8]);
    h.update(seed.to_le_bytes());
    h.update((OCCUPANCY_RESOLUTION as u64).to_le_bytes());
    h.finalize().into()
}

fn sidecar_path(mesh_path: &Path) -> PathBuf {
    let mut os = mesh_path.as_os_str().to_owned();
    os.push(".cache");
    PathBuf::from(os)
}

/// Load the prototype from its sidecar if the key matches, else build it and
/// try to write the sidecar (failures to write are not fatal).
pub fn load_or_build(
    entry: &InventoryEntry,
    mesh_path: &Path,
    seed: u64,
) -> Result<ElementPrototype> {
    let mesh_bytes = std::fs::read(mesh_path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", mesh_path.display())))
    })?;
    let text = String::from_utf8_lossy(&mesh_bytes);
    let mesh = TriMesh::parse_obj(&text, &mesh_path.display().to_string())?;
    let key = cache_key(&mesh_bytes, entry, seed);
    let sidecar = sidecar_path(mesh_path);

    if let Ok(bytes) = std::fs::read(&sidecar) {
        if let Some(proto) = decode(&bytes, &key, entry, &mesh) {
            return Ok(proto);
        }
    }

    let proto = ElementPrototype::build(
        &entry.id,
        mesh,
        entry.samples,
        entry.deformable,
        entry.omega_limit,
        entry.scale,
        seed,
    )?;
    let _ = std::fs::write(&sidecar, encode(&proto, &key));
    Ok(proto)
}

fn encode(proto: &ElementPrototype, key: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(key);
    let m = proto.num_samples();
    out.extend_from_slice(&(m as u64).to_le_bytes());
    for p in &proto.local_samples {
        for a in 0..3 {
            out.extend_from_slice(&p[a].to_le_bytes());
        }
    }
    for r in &proto.radii {
        out.extend_from_slice(&r.to_le_bytes());
    }
    match &proto.skeleton {
        None => out.push(0),
        Some(tree) => {
            out.push(1);
            out.extend_from_slice(&(tree.root as u64).to_le_bytes());
            for p in &tree.parent {
                out.extend_from_slice(&p.map_or(u64::MAX, |v| v as u64).to_le_bytes());
            }
        }
    }
    let occ = &proto.occupancy;
    for a in 0..3 {
        out.extend_from_slice(&occ.origin[a].to_le_bytes());
    }
    for a in 0..3 {
        out.extend_from_slice(&occ.spacing[a].to_le_bytes());
    }
    for d in occ.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let mut packed = vec![0u8; occ.bits.len().div_ceil(8)];
    for (i, &b) in occ.bits.iter().enumerate() {
        if b {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&packed);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.bytes.len() < n {
            return None;
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Some(head)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn byte(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }
}

fn decode(
    bytes: &[u8],
    key: &[u8; 32],
    entry: &InventoryEntry,
    mesh: &TriMesh,
) -> Option<ElementPrototype> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC || r.u32()? != VERSION || r.take(32)? != key {
        return None;
    }
    let m = r.u64()? as usize;
    if m != entry.samples {
        return None;
    }
    let mut local_samples = Vec::with_capacity(m);
    for _ in 0..m {
        let (x, y, z) = (r.f64()?, r.f64()?, r.f64()?);
        local_samples.push(Point3::new(x, y, z));
    }
    let mut radii = Vec::with_capacity(m);
    for _ in 0..m {
        radii.push(r.f64()?);
    }
    let skeleton = match r.byte()? {
        0 => None,
        1 => {
            let root = r.u64()? as usize;
            let mut edges = Vec::new();
            for s in 0..m {
                let p = r.u64()?;
                if p != u64::MAX {
                    edges.push((p as usize, s));
                }
            }
            Some(SkeletonTree::from_edges(&local_samples, &edges, root))
        }
        _ => return None,
    };
    let origin = Point3::new(r.f64()?, r.f64()?, r.f64()?);
    let spacing = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
    let dims = [r.u64()? as usize, r.u64()? as usize, r.u64()? as usize];
    let nbits = dims[0].checked_mul(dims[1])?.checked_mul(dims[2])?;
    let packed = r.take(nbits.div_ceil(8))?;
    let bits = (0..nbits).map(|i| packed[i / 8] & (1 << (i % 8)) != 0).collect();
    Some(ElementPrototype {
        id: entry.id.clone(),
        mesh: mesh.clone(),
        local_samples,
        radii,
        skeleton,
        occupancy: Occupancy { origin, spacing, dims, bits },
        omega_limit: entry.omega_limit,
        base_scale: entry.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(deformable: bool, samples: usize) -> InventoryEntry {
        InventoryEntry {
            id: "test".into(),
            mesh: "mesh.obj".into(),
            count: 1,
            samples,
            deformable,
            omega_limit: 0.3 * std::f64::consts::PI,
            scale: 1.0,
        }
    }

    #[test]
    fn round_trip_through_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("bar.obj");
        TriMesh::box_mesh(Vec3::new(1.5, 0.3, 0.3)).save_obj(&mesh_path).unwrap();
        let e = entry(true, 4);
        let built = load_or_build(&e, &mesh_path, 17).unwrap();
        assert!(sidecar_path(&mesh_path).exists());
        let cached = load_or_build(&e, &mesh_path, 17).unwrap();
        assert_eq!(built.local_samples, cached.local_samples);
        assert_eq!(built.radii, cached.radii);
        assert_eq!(built.skeleton, cached.skeleton);
        assert_eq!(built.occupancy, cached.occupancy);
    }

    #[test]
    fn changed_inputs_invalidate() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("ball.obj");
        TriMesh::icosphere(1.0, 1).save_obj(&mesh_path).unwrap();
        let a = load_or_build(&entry(false, 2), &mesh_path, 1).unwrap();
        // different seed must rebuild rather than reuse
        let b = load_or_build(&entry(false, 2), &mesh_path, 2).unwrap();
        assert_ne!(a.local_samples, b.local_samples);
    }

    #[test]
    fn corrupt_sidecar_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_path = dir.path().join("ball.obj");
        TriMesh::icosphere(1.0, 1).save_obj(&mesh_path).unwrap();
        std::fs::write(sidecar_path(&mesh_path), b"garbage").unwrap();
        assert!(load_or_build(&entry(false, 1), &mesh_path, 1).is_ok());
    }
}
