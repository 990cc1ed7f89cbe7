//! Point-cloud ingestion, branch/foliage coefficient assignment,
//! voxelization with point-to-voxel correspondence, and rigid transforms.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Rotation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Branch,
    Foliage,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Branch => "branch",
            Label::Foliage => "foliage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub position: Vec3,
    pub label: Label,
}

/// A labelled, geo-oriented point cloud (ENU frame, true north along +y).
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    points: Vec<LabeledPoint>,
    ground_z: f64,
}

impl LabeledCloud {
    /// Build a cloud; the canopy floor defaults to the 1st percentile of
    /// point heights.
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("point cloud is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.position.x.is_finite() && p.position.y.is_finite() && p.position.z.is_finite()) {
                return Err(Error::Input(format!("point {i} has non-finite coordinates")));
            }
        }
        let mut zs: Vec<f64> = points.iter().map(|p| p.position.z).collect();
        zs.sort_by(f64::total_cmp);
        let ground_z = zs[(zs.len() - 1) / 100];
        Ok(LabeledCloud { points, ground_z })
    }

    /// Same cloud with an explicitly known canopy floor.
    pub fn with_ground_z(mut self, ground_z: f64) -> Self {
        self.ground_z = ground_z;
        self
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn ground_z(&self) -> f64 {
        self.ground_z
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds as (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut min = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            min.x = min.x.min(p.position.x);
            min.y = min.y.min(p.position.y);
            min.z = min.z.min(p.position.z);
            max.x = max.x.max(p.position.x);
            max.y = max.y.max(p.position.y);
            max.z = max.z.max(p.position.z);
        }
        (min, max)
    }
}

/// Per-point absorption and transmission fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalCoefficients {
    pub alpha: f64,
    pub beta: f64,
}

/// Assign optical coefficients: branches are opaque and photosynthetically
/// inactive (0, 0); foliage transmits `beta_f` and absorbs the rest.
pub fn assign_coefficients(cloud: &LabeledCloud, beta_f: f64) -> Result<Vec<OpticalCoefficients>> {
    if !(beta_f > 0.0 && beta_f <= 1.0) {
        return Err(Error::Input(format!("beta_f {beta_f} outside (0, 1]")));
    }
    Ok(cloud
        .points
        .iter()
        .map(|p| match p.label {
            Label::Branch => OpticalCoefficients { alpha: 0.0, beta: 0.0 },
            Label::Foliage => OpticalCoefficients { alpha: 1.0 - beta_f, beta: beta_f },
        })
        .collect())
}

/// One occupied voxel: mean coefficients plus the indices of its points.
#[derive(Debug, Clone)]
pub struct Voxel {
    /// Vertical index within the column (grid frame).
    pub iz: i64,
    pub alpha: f64,
    pub beta: f64,
    pub point_indices: Vec<u32>,
}

/// A vertical stack of voxels in the oriented grid, sorted top-down (the
/// first voxel is the one light reaches first).
#[derive(Debug, Clone)]
pub struct Column {
    pub ix: i64,
    pub iy: i64,
    pub voxels: Vec<Voxel>,
}

/// A point cloud voxelized in a frame where the light ray runs straight
/// down the grid's vertical axis.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub min_weight: usize,
    /// World-frame direction of light travel this grid is oriented for.
    pub ray_direction: Vec3,
    /// World -> grid rotation (maps `ray_direction` to -z).
    pub rotation: Rotation,
    /// Grid-frame minimum corner of the rotated cloud.
    pub origin: Vec3,
    /// Columns sorted by (ix, iy).
    pub columns: Vec<Column>,
    /// For every input point: its (column, voxel) indices, or None if its
    /// voxel was filtered out by the weight threshold.
    pub point_to_voxel: Vec<Option<(u32, u32)>>,
}

impl VoxelGrid {
    pub fn voxel_count(&self) -> usize {
        self.columns.iter().map(|c| c.voxels.len()).sum()
    }

    /// Column lookup by grid indices (columns are sorted by (ix, iy)).
    pub fn column_at(&self, ix: i64, iy: i64) -> Option<&Column> {
        self.columns
            .binary_search_by(|c| (c.ix, c.iy).cmp(&(ix, iy)))
            .ok()
            .map(|i| &self.columns[i])
    }

    /// Grid-frame (ix, iy) of an arbitrary world point.
    pub fn grid_xy(&self, world: Vec3) -> (i64, i64) {
        let g = self.rotation.apply(world);
        (
            ((g.x - self.origin.x) / self.voxel_size).floor() as i64,
            ((g.y - self.origin.y) / self.voxel_size).floor() as i64,
        )
    }
}

/// Voxelize a cloud against a ray direction (the direction light travels,
/// pointing broadly downward).
///
/// The cloud is rotated so the ray maps onto -z, binned into cubes of side
/// `s_vox` anchored at the rotated minimum corner, and voxels holding fewer
/// than `w_vox` points are dropped. Per-voxel coefficients are the
/// arithmetic means of the constituent points'; summation runs in a
/// canonical order so the grid is bit-identical under point reordering.
pub fn voxelize(
    cloud: &LabeledCloud,
    coefficients: &[OpticalCoefficients],
    s_vox: f64,
    w_vox: usize,
    ray_direction: Vec3,
) -> Result<VoxelGrid> {
    if !(s_vox > 0.0) {
        return Err(Error::Input(format!("voxel size {s_vox} must be positive")));
    }
    if coefficients.len() != cloud.len() {
        return Err(Error::Input(format!(
            "{} coefficients for {} points",
            coefficients.len(),
            cloud.len()
        )));
    }
    let ray = ray_direction.normalized();
    let rotation = Rotation::aligning(ray, Vec3::new(0.0, 0.0, -1.0));

    let rotated: Vec<Vec3> = cloud.points.iter().map(|p| rotation.apply(p.position)).collect();
    let mut origin = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for r in &rotated {
        origin.x = origin.x.min(r.x);
        origin.y = origin.y.min(r.y);
        origin.z = origin.z.min(r.z);
    }

    let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    for (i, r) in rotated.iter().enumerate() {
        let ix = ((r.x - origin.x) / s_vox).floor() as i64;
        let iy = ((r.y - origin.y) / s_vox).floor() as i64;
        let iz = ((r.z - origin.z) / s_vox).floor() as i64;
        cells.entry((ix, iy, iz)).or_default().push(i as u32);
    }

    let mut keys: Vec<(i64, i64, i64)> = cells
        .iter()
        .filter(|(_, pts)| pts.len() >= w_vox.max(1))
        .map(|(&k, _)| k)
        .collect();
    if keys.is_empty() {
        return Err(Error::EmptyGrid);
    }
    // Sort by column then top-down within the column.
    keys.sort_unstable_by(|a, b| (a.0, a.1, std::cmp::Reverse(a.2)).cmp(&(b.0, b.1, std::cmp::Reverse(b.2))));

    let mut columns: Vec<Column> = Vec::new();
    let mut point_to_voxel: Vec<Option<(u32, u32)>> = vec![None; cloud.len()];
    for key in keys {
        let mut point_indices = cells.remove(&key).unwrap();
        point_indices.sort_unstable();

        // Mean coefficients summed over value-sorted pairs: invariant to the
        // input point order at the bit level.
        let mut pairs: Vec<(f64, f64)> = point_indices
            .iter()
            .map(|&i| (coefficients[i as usize].alpha, coefficients[i as usize].beta))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let n = pairs.len() as f64;
        let alpha = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let beta = pairs.iter().map(|p| p.1).sum::<f64>() / n;

        let (ix, iy, iz) = key;
        let start_new = match columns.last() {
            Some(c) => c.ix != ix || c.iy != iy,
            None => true,
        };
        if start_new {
            columns.push(Column { ix, iy, voxels: Vec::new() });
        }
        let col_idx = (columns.len() - 1) as u32;
        let vox_idx = columns.last().unwrap().voxels.len() as u32;
        for &pi in &point_indices {
            point_to_voxel[pi as usize] = Some((col_idx, vox_idx));
        }
        columns.last_mut().unwrap().voxels.push(Voxel { iz, alpha, beta, point_indices });
    }

    Ok(VoxelGrid {
        voxel_size: s_vox,
        min_weight: w_vox,
        ray_direction: ray,
        rotation,
        origin,
        columns,
        point_to_voxel,
    })
}

/// Rigid rotation about the vertical axis through the cloud's horizontal
/// centroid, degrees counter-clockwise seen from above. Labels and the
/// canopy floor are preserved.
pub fn rotate_about_trunk(cloud: &LabeledCloud, degrees: f64) -> LabeledCloud {
    let n = cloud.len() as f64;
    let cx = cloud.points.iter().map(|p| p.position.x).sum::<f64>() / n;
    let cy = cloud.points.iter().map(|p| p.position.y).sum::<f64>() / n;
    let rot = Rotation::about_z(degrees);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let local = Vec3::new(p.position.x - cx, p.position.y - cy, p.position.z);
            let r = rot.apply(local);
            LabeledPoint {
                position: Vec3::new(r.x + cx, r.y + cy, r.z),
                label: p.label,
            }
        })
        .collect();
    LabeledCloud { points, ground_z: cloud.ground_z }
}

/// Translate the cloud in the ground plane.
pub fn offset(cloud: &LabeledCloud, dx: f64, dy: f64) -> LabeledCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| LabeledPoint {
            position: Vec3::new(p.position.x + dx, p.position.y + dy, p.position.z),
            label: p.label,
        })
        .collect();
    LabeledCloud { points, ground_z: cloud.ground_z }
}

// ---------------------------------------------------------------------------
// File format: ASCII CSV `x,y,z,label` with an optional `energy` column.
// ---------------------------------------------------------------------------

pub fn load_cloud(path: &Path) -> Result<LabeledCloud> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let mut points = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io { path: path.into(), source: e })?;
        let lineno = idx as u64 + 1;
        if idx == 0 {
            let head = line.trim();
            if head != "x,y,z,label" && head != "x,y,z,label,energy" {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: lineno,
                    message: format!("expected header `x,y,z,label[,energy]`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("expected 4 or 5 fields, got {}", fields.len()),
            });
        }
        let mut coords = [0.0f64; 3];
        for (c, f) in coords.iter_mut().zip(&fields[..3]) {
            *c = f.trim().parse().map_err(|e| Error::Malformed {
                path: path.into(),
                line: lineno,
                message: format!("bad coordinate `{f}`: {e}"),
            })?;
        }
        let label = match fields[3].trim() {
            "branch" => Label::Branch,
            "foliage" => Label::Foliage,
            other => {
                return Err(Error::Malformed {
                    path: path.into(),
                    line: lineno,
                    message: format!("unknown label `{other}` (expected branch or foliage)"),
                })
            }
        };
        points.push(LabeledPoint { position: Vec3::new(coords[0], coords[1], coords[2]), label });
    }
    LabeledCloud::new(points)
}

pub fn save_cloud(cloud: &LabeledCloud, path: &Path) -> Result<()> {
    save_cloud_with_energy(cloud, None, path)
}

/// Save a cloud, appending an `energy` column when values are given.
pub fn save_cloud_with_energy(
    cloud: &LabeledCloud,
    energy: Option<&[f64]>,
    path: &Path,
) -> Result<()> {
    if let Some(e) = energy {
        if e.len() != cloud.len() {
            return Err(Error::Input(format!(
                "{} energy values for {} points",
                e.len(),
                cloud.len()
            )));
        }
    }
    let mut out = String::new();
    match energy {
        Some(_) => out.push_str("x,y,z,label,energy\n"),
        None => out.push_str("x,y,z,label\n"),
    }
    for (i, p) in cloud.points.iter().enumerate() {
        match energy {
            Some(e) => out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.position.x,
                p.position.y,
                p.position.z,
                p.label.as_str(),
                e[i]
            )),
            None => out.push_str(&format!(
                "{},{},{},{}\n",
                p.position.x,
                p.position.y,
                p.position.z,
                p.label.as_str()
            )),
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io { path: path.into(), source: e })
}
