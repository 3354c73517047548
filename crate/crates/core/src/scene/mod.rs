//! Problem definition: output domain, loads, anchors, element inventory and
//! solver settings, parsed from a single JSON document.

pub mod domain;

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use domain::{DomainShape, HalfSpace, MeshSdf, Shape, ShapeSpec};

/// Elastic constants plus the ersatz stiffness floor assigned to empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    pub young: f64,
    pub poisson: f64,
    pub ersatz: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self { young: 1.0, poisson: 0.3, ersatz: 1e-6 }
    }
}

/// Continuation schedule for the density kernel parameters and the
/// connectivity sub-solver cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSchedule {
    pub alpha0: f64,
    pub alpha_min: f64,
    pub alpha_factor: f64,
    pub beta0: f64,
    pub beta_max: f64,
    pub beta_factor: f64,
    pub inner_iters: usize,
    /// The connectivity sub-solver runs once alpha drops below this value.
    pub connectivity_threshold: f64,
    pub sub_solver_steps: usize,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            alpha0: 3.0,
            alpha_min: 0.9,
            alpha_factor: 0.9,
            beta0: 1.0,
            beta_max: 2.0,
            beta_factor: 2.0,
            inner_iters: 30,
            connectivity_threshold: 2.0,
            sub_solver_steps: 10,
        }
    }
}

fn default_one() -> usize {
    1
}

fn default_omega_limit() -> f64 {
    0.3 * std::f64::consts::PI
}

/// One element type: mesh path plus instancing and sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryEntry {
    pub id: String,
    /// OBJ path, relative to the scene file.
    pub mesh: String,
    pub count: usize,
    /// Number of interior samples approximating the shape.
    #[serde(default = "default_one")]
    pub samples: usize,
    #[serde(default)]
    pub deformable: bool,
    /// Componentwise bound on joint rotations, radians.
    #[serde(default = "default_omega_limit")]
    pub omega_limit: f64,
    /// Uniform scale applied to the mesh (part of the fixed transform).
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

/// External load: total force distributed equally over captured grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub region: ShapeSpec,
    pub force: [f64; 3],
}

/// Zero-displacement attachment region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub region: ShapeSpec,
}

/// Validated scene document. Serializing and re-parsing reproduces the value
/// exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub domain: ShapeSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden_regions: Vec<ShapeSpec>,
    pub loads: Vec<LoadSpec>,
    pub anchors: Vec<AnchorSpec>,
    pub inventory: Vec<InventoryEntry>,
    #[serde(rename = "grid")]
    pub grid_dims: [usize; 3],
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default)]
    pub schedule: ContinuationSchedule,
    #[serde(default)]
    pub seed: u64,
}

/// Parse and validate a scene document.
pub fn parse_scene(text: &str) -> Result<SceneConfig> {
    let config: SceneConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        for (axis, &d) in self.grid_dims.iter().enumerate() {
            if d < 2 {
                return Err(Error::Validation(format!(
                    "grid[{axis}] = {d}, need at least 2 cells per axis"
                )));
            }
        }
        let m = &self.material;
        if !(m.poisson > 0.0 && m.poisson < 0.5) {
            return Err(Error::Validation(format!(
                "material.poisson = {} outside (0, 0.5)",
                m.poisson
            )));
        }
        if !(m.ersatz > 0.0 && m.ersatz < 1.0) {
            return Err(Error::Validation(format!(
                "material.ersatz = {} outside (0, 1)",
                m.ersatz
            )));
        }
        if !(m.young > 0.0) {
            return Err(Error::Validation("material.young must be positive".into()));
        }
        let s = &self.schedule;
        if !(s.alpha_factor > 0.0 && s.alpha_factor < 1.0) {
            return Err(Error::Validation("schedule.alpha_factor outside (0, 1)".into()));
        }
        if !(s.beta_factor > 1.0) {
            return Err(Error::Validation("schedule.beta_factor must exceed 1".into()));
        }
        if s.inner_iters < 1 {
            return Err(Error::Validation("schedule.inner_iters must be at least 1".into()));
        }
        if self.inventory.is_empty() {
            return Err(Error::Validation("inventory is empty".into()));
        }
        for (i, e) in self.inventory.iter().enumerate() {
            if e.count == 0 {
                return Err(Error::Validation(format!("inventory[{i}].count is zero")));
            }
            if e.samples == 0 {
                return Err(Error::Validation(format!("inventory[{i}].samples is zero")));
            }
            if !(e.omega_limit > 0.0) {
                return Err(Error::Validation(format!(
                    "inventory[{i}].omega_limit must be positive"
                )));
            }
            if !(e.scale > 0.0) {
                return Err(Error::Validation(format!("inventory[{i}].scale must be positive")));
            }
        }
        if self.anchors.is_empty() {
            return Err(Error::Validation(
                "no anchors: the stiffness system would be singular".into(),
            ));
        }
        for (i, l) in self.loads.iter().enumerate() {
            if !l.region.is_analytic() {
                return Err(Error::Validation(format!(
                    "loads[{i}].region must be an analytic primitive"
                )));
            }
        }
        for (i, a) in self.anchors.iter().enumerate() {
            if !a.region.is_analytic() {
                return Err(Error::Validation(format!(
                    "anchors[{i}].region must be an analytic primitive"
                )));
            }
        }
        Ok(())
    }

    /// Resolve the domain and forbidden regions into evaluatable shapes.
    pub fn build_domain(&self, base_dir: &Path) -> Result<DomainShape> {
        let base = self.domain.build(base_dir)?;
        if base.bbox().is_none() {
            return Err(Error::Validation(
                "domain shape has no finite bounding box (half_spaces need an explicit bbox)"
                    .into(),
            ));
        }
        let forbidden = self
            .forbidden_regions
            .iter()
            .map(|s| s.build(base_dir))
            .collect::<Result<Vec<_>>>()?;
        Ok(DomainShape { base, forbidden })
    }
}

// ─────────────────────────────────────────────────────────────
//  Regular grid geometry
// ─────────────────────────────────────────────────────────────

/// Geometry of the regular simulation/density grid: cubic cells of size `h`
/// anchored at `origin`, covering the domain bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point3<f64>,
    pub h: f64,
    /// Cells per axis.
    pub dims: [usize; 3],
}

impl GridSpec {
    /// Cubic cells sized so `dims` cells cover the domain bounding box along
    /// every axis (the grid may overhang on the shorter axes).
    pub fn from_domain(domain: &DomainShape, dims: [usize; 3]) -> Result<Self> {
        let (lo, hi) = domain
            .bbox()
            .ok_or_else(|| Error::Validation("domain has no finite bounding box".into()))?;
        let mut h: f64 = 0.0;
        for a in 0..3 {
            h = h.max((hi[a] - lo[a]) / dims[a] as f64);
        }
        if !(h > 0.0) {
            return Err(Error::Validation("domain bounding box is degenerate".into()));
        }
        Ok(Self { origin: lo, h, dims })
    }

    pub fn num_cells(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn nodes_per_axis(&self) -> [usize; 3] {
        [self.dims[0] + 1, self.dims[1] + 1, self.dims[2] + 1]
    }

    pub fn num_nodes(&self) -> usize {
        let n = self.nodes_per_axis();
        n[0] * n[1] * n[2]
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.num_nodes()
    }

    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn cell_coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn node_index(&self, n: [usize; 3]) -> usize {
        let np = self.nodes_per_axis();
        n[0] + np[0] * (n[1] + np[1] * n[2])
    }

    pub fn node_coords(&self, idx: usize) -> [usize; 3] {
        let np = self.nodes_per_axis();
        let i = idx % np[0];
        let j = (idx / np[0]) % np[1];
        let k = idx / (np[0] * np[1]);
        [i, j, k]
    }

    pub fn node_pos(&self, n: [usize; 3]) -> Point3<f64> {
        self.origin + crate::Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64) * self.h
    }

    pub fn cell_center(&self, c: [usize; 3]) -> Point3<f64> {
        self.origin
            + crate::Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }
}

// ─────────────────────────────────────────────────────────────
//  Boundary conditions
// ─────────────────────────────────────────────────────────────

/// Nodal load vector plus the set of Dirichlet-fixed dofs.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    pub f_ext: DVector<f64>,
    /// Sorted, deduplicated dof indices with prescribed zero displacement.
    pub fixed: Vec<usize>,
}

/// Distribute loads over captured grid nodes (equal split) and collect the
/// fixed dofs of all anchor regions.
pub fn apply_boundary_conditions(
    config: &SceneConfig,
    grid: &GridSpec,
) -> Result<BoundaryConditions> {
    let np = grid.nodes_per_axis();
    let mut f_ext = DVector::zeros(grid.num_dofs());
    let node_positions: Vec<Point3<f64>> = (0..grid.num_nodes())
        .map(|idx| grid.node_pos(grid.node_coords(idx)))
        .collect();
    debug_assert_eq!(node_positions.len(), np[0] * np[1] * np[2]);

    for (li, load) in config.loads.iter().enumerate() {
        let captured: Vec<usize> = (0..grid.num_nodes())
            .filter(|&n| load.region.contains(&node_positions[n]))
            .collect();
        if captured.is_empty() {
            return Err(Error::Validation(format!(
                "loads[{li}].region captures no grid nodes; the declared force would be lost"
            )));
        }
        let share = 1.0 / captured.len() as f64;
        for n in captured {
            for a in 0..3 {
                f_ext[3 * n + a] += load.force[a] * share;
            }
        }
    }

    let mut fixed = Vec::new();
    for (ai, anchor) in config.anchors.iter().enumerate() {
        let captured: Vec<usize> = (0..grid.num_nodes())
            .filter(|&n| anchor.region.contains(&node_positions[n]))
            .collect();
        if captured.is_empty() {
            return Err(Error::Validation(format!(
                "anchors[{ai}].region captures no grid nodes: singular system"
            )));
        }
        for n in captured {
            fixed.extend_from_slice(&[3 * n, 3 * n + 1, 3 * n + 2]);
        }
    }
    if fixed.is_empty() {
        return Err(Error::Validation("no anchors: singular system".into()));
    }
    fixed.sort_unstable();
    fixed.dedup();
    Ok(BoundaryConditions { f_ext, fixed })
}

/// Runtime scene: validated config plus the resolved domain and grid.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub domain: DomainShape,
    pub grid: GridSpec,
    pub base_dir: PathBuf,
}

impl Scene {
    pub fn build(config: SceneConfig, base_dir: &Path) -> Result<Self> {
        let domain = config.build_domain(base_dir)?;
        let grid = GridSpec::from_domain(&domain, config.grid_dims)?;
        // every load/anchor region must reach the domain
        for (i, l) in config.loads.iter().enumerate() {
            if !region_touches_domain(&l.region, &domain) {
                return Err(Error::Validation(format!(
                    "loads[{i}].region does not intersect the domain"
                )));
            }
        }
        for (i, a) in config.anchors.iter().enumerate() {
            if !region_touches_domain(&a.region, &domain) {
                return Err(Error::Validation(format!(
                    "anchors[{i}].region does not intersect the domain"
                )));
            }
        }
        Ok(Self { config, domain, grid, base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let config = parse_scene(&text)?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::build(config, base_dir)
    }
}

/// Sampled intersection test: does any point of an 11^3 lattice over the
/// region's bounding box lie inside both region and domain?
fn region_touches_domain(region: &ShapeSpec, domain: &DomainShape) -> bool {
    let Some((lo, hi)) = region.bbox() else {
        return true; // unbounded regions (half-space lists without a bbox)
    };
    const N: usize = 11;
    for k in 0..N {
        for j in 0..N {
            for i in 0..N {
                let p = Point3::new(
                    lo.x + (hi.x - lo.x) * i as f64 / (N - 1) as f64,
                    lo.y + (hi.y - lo.y) * j as f64 / (N - 1) as f64,
                    lo.z + (hi.z - lo.z) * k as f64 / (N - 1) as f64,
                );
                if region.contains(&p) && domain.signed_distance(&p) <= 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_scene_json() -> String {
        r#"{
            "domain": {"type": "box", "min": [0, 0, 0], "max": [8, 8, 8]},
            "loads": [
                {"region": {"type": "box", "min": [0, 0, 7.9], "max": [8, 8, 8.1]},
                 "force": [0, 0, -1]}
            ],
            "anchors": [
                {"region": {"type": "box", "min": [0, 0, -0.1], "max": [8, 8, 0.1]}}
            ],
            "inventory": [
                {"id": "ball", "mesh": "meshes/sphere.obj", "count": 4, "samples": 1}
            ],
            "grid": [8, 8, 8],
            "seed": 42
        }"#
        .to_string()
    }

    #[test]
    fn parse_minimal_scene() {
        let config = parse_scene(&minimal_scene_json()).unwrap();
        assert_eq!(config.grid_dims, [8, 8, 8]);
        assert_eq!(config.seed, 42);
        assert_eq!(config.inventory.len(), 1);
    }

    #[test]
    fn omitted_schedule_gets_defaults() {
        let config = parse_scene(&minimal_scene_json()).unwrap();
        let s = config.schedule;
        assert_eq!(s.alpha0, 3.0);
        assert_eq!(s.alpha_min, 0.9);
        assert_eq!(s.alpha_factor, 0.9);
        assert_eq!(s.beta0, 1.0);
        assert_eq!(s.beta_max, 2.0);
        assert_eq!(s.beta_factor, 2.0);
        assert_eq!(s.inner_iters, 30);
    }

    #[test]
    fn bad_poisson_rejected() {
        let text = minimal_scene_json()
            .replace("\"seed\": 42", "\"seed\": 42, \"material\": {\"poisson\": 0.6}");
        match parse_scene(&text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("poisson")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_inventory_rejected() {
        let text = minimal_scene_json().replace(
            r#""inventory": [
                {"id": "ball", "mesh": "meshes/sphere.obj", "count": 4, "samples": 1}
            ]"#,
            r#""inventory": []"#,
        );
        assert!(matches!(parse_scene(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_key_is_parse_error() {
        let text = minimal_scene_json().replace("\"seed\": 42", "\"seed\": 42, \"sneed\": 1");
        assert!(matches!(parse_scene(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn round_trip_identical() {
        let config = parse_scene(&minimal_scene_json()).unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back = parse_scene(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn grid_spec_from_domain() {
        let config = parse_scene(&minimal_scene_json()).unwrap();
        let domain = config.build_domain(Path::new(".")).unwrap();
        let grid = GridSpec::from_domain(&domain, config.grid_dims).unwrap();
        assert_eq!(grid.h, 1.0);
        assert_eq!(grid.num_cells(), 512);
        assert_eq!(grid.num_nodes(), 729);
    }

    #[test]
    fn load_split_equally() {
        // a region catching exactly the 4 nodes of one bottom cell edge pair
        let text = minimal_scene_json().replace(
            r#"{"region": {"type": "box", "min": [0, 0, 7.9], "max": [8, 8, 8.1]},
                 "force": [0, 0, -1]}"#,
            r#"{"region": {"type": "box", "min": [-0.1, -0.1, 7.9], "max": [1.1, 1.1, 8.1]},
                 "force": [0, 0, -1]}"#,
        );
        let config = parse_scene(&text).unwrap();
        let domain = config.build_domain(Path::new(".")).unwrap();
        let grid = GridSpec::from_domain(&domain, config.grid_dims).unwrap();
        let bc = apply_boundary_conditions(&config, &grid).unwrap();
        let nonzero: Vec<(usize, f64)> =
            bc.f_ext.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).collect();
        assert_eq!(nonzero.len(), 4);
        for (_, v) in &nonzero {
            assert_eq!(*v, -0.25);
        }
    }

    #[test]
    fn bottom_face_anchor_captures_81_nodes() {
        let config = parse_scene(&minimal_scene_json()).unwrap();
        let domain = config.build_domain(Path::new(".")).unwrap();
        let grid = GridSpec::from_domain(&domain, config.grid_dims).unwrap();
        let bc = apply_boundary_conditions(&config, &grid).unwrap();
        assert_eq!(bc.fixed.len(), 243); // 9 x 9 nodes x 3 dofs
    }

    #[test]
    fn force_sum_matches_declared_loads() {
        let config = parse_scene(&minimal_scene_json()).unwrap();
        let domain = config.build_domain(Path::new(".")).unwrap();
        let grid = GridSpec::from_domain(&domain, config.grid_dims).unwrap();
        let bc = apply_boundary_conditions(&config, &grid).unwrap();
        let mut sum = [0.0; 3];
        for n in 0..grid.num_nodes() {
            for a in 0..3 {
                sum[a] += bc.f_ext[3 * n + a];
            }
        }
        assert!((sum[2] - (-1.0)).abs() < 1e-12);
        assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
    }

    #[test]
    fn anchor_missing_grid_is_error() {
        let text = minimal_scene_json().replace(
            r#"{"region": {"type": "box", "min": [0, 0, -0.1], "max": [8, 8, 0.1]}}"#,
            r#"{"region": {"type": "sphere", "center": [4, 4, 0.5], "radius": 0.2}}"#,
        );
        let config = parse_scene(&text).unwrap();
        let domain = config.build_domain(Path::new(".")).unwrap();
        let grid = GridSpec::from_domain(&domain, config.grid_dims).unwrap();
        // region lies inside the domain but captures no node
        assert!(matches!(
            apply_boundary_conditions(&config, &grid),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn no_anchor_rejected_at_parse() {
        let text = minimal_scene_json().replace(
            r#""anchors": [
                {"region": {"type": "box", "min": [0, 0, -0.1], "max": [8, 8, 0.1]}}
            ],"#,
            r#""anchors": [],"#,
        );
        assert!(matches!(parse_scene(&text), Err(Error::Validation(_))));
    }
}
