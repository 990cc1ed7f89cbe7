//! The ray-tracing engine: distributes each sky node's light through voxel
//! columns, accumulates absorbed energy into the original points, and
//! records ground-plane arrivals.
//!
//! Tracing is data-parallel over sky nodes. Partial fields are merged in a
//! canonical node order with a fixed chunk size, so results are bit-identical
//! for any worker count and any ordering of the dome's nodes.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::cloud::{voxelize, LabeledCloud, OpticalCoefficients, VoxelGrid};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::skydome::{DomeMode, SkyDome, SkyNode};

/// Number of node partials computed in parallel between ordered merges.
/// Fixed, so the floating-point reduction tree never depends on the number
/// of worker threads.
const MERGE_CHUNK: usize = 8;

/// A rectangle of ground cells at the canopy floor, side `cell_size` per
/// cell, used to record per-node light arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRegion {
    pub min_x: f64,
    pub min_y: f64,
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    /// Height of the ground plane (world z).
    pub z: f64,
}

impl GroundRegion {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64, cell_size: f64, z: f64) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::Input(format!("ground cell size {cell_size} must be positive")));
        }
        if max_x <= min_x || max_y <= min_y {
            return Err(Error::Input("ground region extent must be positive".into()));
        }
        let nx = ((max_x - min_x) / cell_size).ceil() as usize;
        let ny = ((max_y - min_y) / cell_size).ceil() as usize;
        Ok(GroundRegion { min_x, min_y, nx, ny, cell_size, z })
    }

    /// Region covering the cloud's footprint, padded on all sides.
    pub fn around_cloud(cloud: &LabeledCloud, cell_size: f64, pad: f64) -> Result<Self> {
        let (min, max) = cloud.bounds();
        GroundRegion::new(
            min.x - pad,
            min.y - pad,
            max.x + pad,
            max.y + pad,
            cell_size,
            cloud.ground_z(),
        )
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn center(&self, index: usize) -> Vec3 {
        let ix = index % self.nx;
        let iy = index / self.nx;
        Vec3::new(
            self.min_x + (ix as f64 + 0.5) * self.cell_size,
            self.min_y + (iy as f64 + 0.5) * self.cell_size,
            self.z,
        )
    }
}

/// Top-down traversal of one voxel column for one sky node.
#[derive(Debug, Clone)]
pub struct ColumnTraversal {
    pub ix: i64,
    pub iy: i64,
    /// Irradiance (or energy) available to each voxel, top-down.
    pub incident: Vec<f64>,
    /// Amount absorbed by each voxel.
    pub absorbed: Vec<f64>,
    /// Residual leaving the bottom of the column toward the ground.
    pub ground_arrival: f64,
}

/// Result of tracing a single sky node through an oriented grid.
#[derive(Debug, Clone)]
pub struct NodeTrace {
    pub node_direction: Vec3,
    pub node_value: f64,
    pub columns: Vec<ColumnTraversal>,
    /// Along-ray arrival value for every ground-region cell.
    pub ground: Vec<f64>,
}

/// Trace one sky node's light down the columns of a grid oriented to it.
///
/// Every ground cell's arrival is the node value attenuated by the column
/// the cell's up-ray passes through; cells under no column receive the full
/// node value.
pub fn trace_node(
    grid: &VoxelGrid,
    node_value: f64,
    node_direction: Vec3,
    region: &GroundRegion,
) -> Result<NodeTrace> {
    let ray = node_direction.normalized().scaled(-1.0);
    if grid.ray_direction.sub(ray).norm() > 1e-9 {
        return Err(Error::OrientationMismatch);
    }
    if node_value < 0.0 {
        return Err(Error::Input(format!("negative node value {node_value}")));
    }

    let mut columns = Vec::with_capacity(grid.columns.len());
    let mut transmittance: HashMap<(i64, i64), f64> = HashMap::with_capacity(grid.columns.len());
    for col in &grid.columns {
        let mut incident = Vec::with_capacity(col.voxels.len());
        let mut absorbed = Vec::with_capacity(col.voxels.len());
        let mut through = 1.0;
        for v in &col.voxels {
            let i_n = node_value * through;
            incident.push(i_n);
            absorbed.push(v.alpha * i_n);
            through *= v.beta;
        }
        let ground_arrival = node_value * through;
        transmittance.insert((col.ix, col.iy), through);
        columns.push(ColumnTraversal { ix: col.ix, iy: col.iy, incident, absorbed, ground_arrival });
    }

    let mut ground = Vec::with_capacity(region.cell_count());
    for c in 0..region.cell_count() {
        let (ix, iy) = grid.grid_xy(region.center(c));
        let through = transmittance.get(&(ix, iy)).copied().unwrap_or(1.0);
        ground.push(node_value * through);
    }

    Ok(NodeTrace { node_direction: node_direction.normalized(), node_value, columns, ground })
}

/// Absolute energy absorbed by a voxel face over a time step:
/// `I_abs * s_vox^2 * dt` (J).
pub fn voxel_energy(i_abs: f64, s_vox: f64, dt_seconds: f64) -> Result<f64> {
    if i_abs < 0.0 || s_vox < 0.0 || dt_seconds < 0.0 {
        return Err(Error::Input("voxel energy inputs must be non-negative".into()));
    }
    Ok(i_abs * s_vox * s_vox * dt_seconds)
}

/// Ground-plane accumulation over all processed sky nodes.
#[derive(Debug, Clone)]
pub struct GroundField {
    pub region: GroundRegion,
    /// Sum over nodes of along-ray arrivals per cell.
    pub raw: Vec<f64>,
    /// Sum over nodes of arrivals projected onto the horizontal
    /// (cosine of the node zenith), the value a flat sensor sees.
    pub horizontal: Vec<f64>,
}

/// Per-point absorbed light plus the ground arrival grid.
///
/// For instantaneous domes `per_point` is irradiance (W/m^2): every point in
/// a voxel carries the voxel's full absorbed irradiance. For composite domes
/// it is energy (J): the voxel's absorbed energy is split evenly across its
/// points.
#[derive(Debug, Clone)]
pub struct EnergyField {
    pub per_point: Vec<f64>,
    pub mode: DomeMode,
    pub ground: GroundField,
}

struct Partial {
    point: Vec<f64>,
    ground_raw: Vec<f64>,
    ground_horizontal: Vec<f64>,
}

/// Canonical node processing order: by direction, then value, then kind.
/// Independent of the order nodes appear in the dome.
fn node_order(nodes: &[SkyNode]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        let (na, nb) = (&nodes[a], &nodes[b]);
        na.direction
            .x
            .total_cmp(&nb.direction.x)
            .then(na.direction.y.total_cmp(&nb.direction.y))
            .then(na.direction.z.total_cmp(&nb.direction.z))
            .then(na.value.total_cmp(&nb.value))
    });
    order
}

fn process_node(
    cloud: &LabeledCloud,
    coefficients: &[OpticalCoefficients],
    node: &SkyNode,
    s_vox: f64,
    w_vox: usize,
    region: &GroundRegion,
    mode: DomeMode,
) -> Result<Partial> {
    let n_points = cloud.len();
    let n_cells = region.cell_count();
    let mut partial = Partial {
        point: vec![0.0; n_points],
        ground_raw: vec![0.0; n_cells],
        ground_horizontal: vec![0.0; n_cells],
    };
    if node.value == 0.0 {
        return Ok(partial);
    }

    let cos_zenith = node.direction.z.max(0.0);
    let ray = node.direction.scaled(-1.0);
    let grid = match voxelize(cloud, coefficients, s_vox, w_vox, ray) {
        Ok(grid) => grid,
        Err(Error::EmptyGrid) => {
            // Every voxel fell below the weight threshold: the canopy is
            // effectively transparent for this configuration.
            for c in 0..n_cells {
                partial.ground_raw[c] = node.value;
                partial.ground_horizontal[c] = node.value * cos_zenith;
            }
            return Ok(partial);
        }
        Err(e) => return Err(e),
    };

    let mut transmittance: HashMap<(i64, i64), f64> = HashMap::with_capacity(grid.columns.len());
    for col in &grid.columns {
        let mut through = 1.0;
        for v in &col.voxels {
            let incident = node.value * through;
            let absorbed = v.alpha * incident;
            match mode {
                DomeMode::Instantaneous => {
                    // Each point carries the voxel's full absorbed irradiance.
                    for &pi in &v.point_indices {
                        partial.point[pi as usize] += absorbed;
                    }
                }
                DomeMode::Composite => {
                    // The voxel's absolute energy is split evenly.
                    let energy = absorbed * s_vox * s_vox;
                    let share = energy / v.point_indices.len() as f64;
                    for &pi in &v.point_indices {
                        partial.point[pi as usize] += share;
                    }
                }
            }
            through *= v.beta;
        }
        transmittance.insert((col.ix, col.iy), through);
    }

    for c in 0..n_cells {
        let (ix, iy) = grid.grid_xy(region.center(c));
        let through = transmittance.get(&(ix, iy)).copied().unwrap_or(1.0);
        let arrival = node.value * through;
        partial.ground_raw[c] = arrival;
        partial.ground_horizontal[c] = arrival * cos_zenith;
    }
    Ok(partial)
}

/// Trace every sky node through the cloud and accumulate absorbed light into
/// the original points and the ground grid.
///
/// The cloud is re-voxelized oriented to each node, as the point-to-voxel
/// mapping changes with direction. Nodes are processed in parallel; partial
/// fields merge in canonical node order so the output is independent of
/// worker count and node ordering.
pub fn accumulate(
    cloud: &LabeledCloud,
    coefficients: &[OpticalCoefficients],
    dome: &SkyDome,
    s_vox: f64,
    w_vox: usize,
    region: &GroundRegion,
) -> Result<EnergyField> {
    let n_points = cloud.len();
    let n_cells = region.cell_count();
    let mut field = EnergyField {
        per_point: vec![0.0; n_points],
        mode: dome.mode,
        ground: GroundField {
            region: region.clone(),
            raw: vec![0.0; n_cells],
            horizontal: vec![0.0; n_cells],
        },
    };

    let order = node_order(&dome.nodes);
    for chunk in order.chunks(MERGE_CHUNK) {
        let partials: Vec<Result<Partial>> = chunk
            .par_iter()
            .map(|&i| {
                process_node(cloud, coefficients, &dome.nodes[i], s_vox, w_vox, region, dome.mode)
            })
            .collect();
        for partial in partials {
            let partial = partial?;
            for (acc, v) in field.per_point.iter_mut().zip(&partial.point) {
                *acc += v;
            }
            for (acc, v) in field.ground.raw.iter_mut().zip(&partial.ground_raw) {
                *acc += v;
            }
            for (acc, v) in field.ground.horizontal.iter_mut().zip(&partial.ground_horizontal) {
                *acc += v;
            }
        }
    }
    Ok(field)
}

/// Write the ground grid as CSV (`x,y,value`); the value is the
/// horizontal-projected arrival sum per cell.
pub fn save_ground_csv(field: &EnergyField, path: &Path) -> Result<()> {
    let mut out = String::from("x,y,value\n");
    let region = &field.ground.region;
    for c in 0..region.cell_count() {
        let center = region.center(c);
        out.push_str(&format!("{},{},{}\n", center.x, center.y, field.ground.horizontal[c]));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io { path: path.into(), source: e })
}
