//! Interior sample generation: Lloyd relaxation over rejection-sampled
//! interior candidates, then per-sample radii from nearest-neighbor and
//! surface distances.

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

const CANDIDATES_PER_SAMPLE: usize = 50;
const MIN_CANDIDATES: usize = 2000;
const LLOYD_ITERATIONS: usize = 25;

/// Place `m` samples strictly inside a closed mesh and assign radii:
/// half the nearest-sample distance, clamped to the surface distance.
pub fn sample_prototype(
    mesh: &TriMesh,
    m: usize,
    seed: u64,
) -> Result<(Vec<Point3<f64>>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    if !mesh.is_closed() {
        return Err(Error::Geometry(
            "cannot sample an open mesh (inside/outside is undefined)".into(),
        ));
    }
    let wanted = (CANDIDATES_PER_SAMPLE * m).max(MIN_CANDIDATES);
    let candidates = interior_candidates(mesh, wanted, seed)?;
    if candidates.len() < m {
        return Err(Error::Geometry(format!(
            "requested {m} samples but only {} interior candidates exist",
            candidates.len()
        )));
    }

    // Lloyd: seeds start on spread-out candidates, then move to the centroid
    // of their assigned candidate set
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut seeds: Vec<Point3<f64>> = {
        let mut picked = Vec::with_capacity(m);
        let mut used = std::collections::HashSet::new();
        while picked.len() < m {
            let i = rng.gen_range(0..candidates.len());
            if used.insert(i) {
                picked.push(candidates[i]);
            }
        }
        picked
    };

    let mut assignment = vec![0usize; candidates.len()];
    for _ in 0..LLOYD_ITERATIONS {
        for (ci, c) in candidates.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (si, s) in seeds.iter().enumerate() {
                let d = (c - s).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = si;
                }
            }
            assignment[ci] = best;
        }
        let mut sums = vec![nalgebra::Vector3::<f64>::zeros(); m];
        let mut counts = vec![0usize; m];
        for (ci, &si) in assignment.iter().enumerate() {
            sums[si] += candidates[ci].coords;
            counts[si] += 1;
        }
        for si in 0..m {
            if counts[si] == 0 {
                continue; // empty cell: keep the seed where it is
            }
            let centroid = Point3::from(sums[si] / counts[si] as f64);
            // non-convex shapes: the centroid may leave the volume; snap to
            // the nearest assigned candidate, which is interior by sampling
            if mesh.contains(&centroid) {
                seeds[si] = centroid;
            } else {
                let mut best = None;
                let mut best_d = f64::INFINITY;
                for (ci, &owner) in assignment.iter().enumerate() {
                    if owner == si {
                        let d = (candidates[ci] - centroid).norm_squared();
                        if d < best_d {
                            best_d = d;
                            best = Some(candidates[ci]);
                        }
                    }
                }
                if let Some(p) = best {
                    seeds[si] = p;
                }
            }
        }
    }

    let radii = (0..m)
        .map(|s| {
            let surface = mesh.unsigned_distance(&seeds[s]);
            let nearest = (0..m)
                .filter(|&t| t != s)
                .map(|t| (seeds[s] - seeds[t]).norm())
                .fold(f64::INFINITY, f64::min);
            if nearest.is_finite() {
                (0.5 * nearest).min(surface)
            } else {
                surface // single sample: surface distance alone
            }
        })
        .collect::<Vec<_>>();
    for (i, &r) in radii.iter().enumerate() {
        if !(r > 0.0) {
            return Err(Error::Geometry(format!(
                "sample {i} has non-positive radius {r}; mesh too thin for {m} samples"
            )));
        }
    }
    Ok((seeds, radii))
}

/// Uniform interior points by rejection sampling over the bounding box.
fn interior_candidates(mesh: &TriMesh, wanted: usize, seed: u64) -> Result<Vec<Point3<f64>>> {
    let (lo, hi) = mesh.bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(wanted);
    let max_draws = wanted * 200;
    for _ in 0..max_draws {
        if out.len() == wanted {
            break;
        }
        let p = Point3::new(
            rng.gen_range(lo.x..=hi.x),
            rng.gen_range(lo.y..=hi.y),
            rng.gen_range(lo.z..=hi.z),
        );
        if mesh.contains(&p) {
            out.push(p);
        }
    }
    if out.len() < wanted {
        return Err(Error::Geometry(format!(
            "interior sampling got {} of {} candidates after {} draws",
            out.len(),
            wanted,
            max_draws
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_in_sphere_sits_at_center() {
        let mesh = TriMesh::icosphere(1.0, 2);
        let (samples, radii) = sample_prototype(&mesh, 1, 42).unwrap();
        assert_eq!(samples.len(), 1);
        assert!(samples[0].coords.norm() < 0.1, "centroid off: {:?}", samples[0]);
        assert!((radii[0] - 1.0).abs() < 0.1, "radius {} not ~1", radii[0]);
    }

    #[test]
    fn radius_clamped_to_surface_distance() {
        let mesh = TriMesh::unit_box();
        for m in [1, 2, 5] {
            let (samples, radii) = sample_prototype(&mesh, m, 7).unwrap();
            for (s, r) in samples.iter().zip(radii.iter()) {
                assert!(*r <= mesh.unsigned_distance(s) + 1e-12);
                assert!(*r > 0.0);
            }
        }
    }

    #[test]
    fn eight_samples_in_unit_cube_spread_out() {
        let mesh = TriMesh::unit_box();
        let (samples, _) = sample_prototype(&mesh, 8, 1234).unwrap();
        let mut min_dist = f64::INFINITY;
        for i in 0..8 {
            for j in (i + 1)..8 {
                min_dist = min_dist.min((samples[i] - samples[j]).norm());
            }
        }
        assert!(min_dist >= 0.25, "samples too close: {min_dist}");
    }

    #[test]
    fn open_mesh_rejected() {
        let mut mesh = TriMesh::unit_box();
        mesh.triangles.pop();
        assert!(matches!(sample_prototype(&mesh, 4, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mesh = TriMesh::icosphere(1.0, 1);
        let a = sample_prototype(&mesh, 5, 99).unwrap();
        let b = sample_prototype(&mesh, 5, 99).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
