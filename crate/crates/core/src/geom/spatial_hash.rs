//! Uniform spatial hash over points. With bucket size at least the query
//! radius, scanning the 27 buckets around a query point yields a superset of
//! all points within that radius.

use std::collections::HashMap;

use nalgebra::Point3;

#[derive(Debug, Clone)]
pub struct SpatialHash {
    bucket: f64,
    map: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl SpatialHash {
    /// `bucket` must be at least the largest radius later passed to queries.
    pub fn build(points: &[Point3<f64>], bucket: f64) -> Self {
        assert!(bucket > 0.0, "bucket size must be positive");
        let mut map: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(p, bucket)).or_default().push(i);
        }
        Self { bucket, map }
    }

    fn key(p: &Point3<f64>, bucket: f64) -> (i64, i64, i64) {
        (
            (p.x / bucket).floor() as i64,
            (p.y / bucket).floor() as i64,
            (p.z / bucket).floor() as i64,
        )
    }

    /// Indices of all points whose distance to `x` can be below the bucket
    /// size (a superset: exact distances must be checked by the caller).
    pub fn query_into(&self, x: &Point3<f64>, out: &mut Vec<usize>) {
        out.clear();
        let (i, j, k) = Self::key(x, self.bucket);
        for dk in -1..=1 {
            for dj in -1..=1 {
                for di in -1..=1 {
                    if let Some(v) = self.map.get(&(i + di, j + dj, k + dk)) {
                        out.extend_from_slice(v);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn query_is_superset_of_radius_neighbors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Point3<f64>> = (0..300)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let radius = 0.8;
        let hash = SpatialHash::build(&points, radius);
        let mut out = Vec::new();
        for _ in 0..100 {
            let q = Point3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            hash.query_into(&q, &mut out);
            for (i, p) in points.iter().enumerate() {
                if (p - q).norm() < radius {
                    assert!(out.contains(&i), "missed neighbor {i}");
                }
            }
        }
    }
}
