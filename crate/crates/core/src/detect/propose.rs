use std::collections::BTreeMap;

use crate::sensorio::{normalize_yaw, Box3D, ObjectClass};
use crate::voxelize::{BEVMap, OccupancyGrid, SparseVoxelSet, VoxelGridSpec};

use super::{DetectError, Result};

/// Capacity-bounded proposal list, sorted by score descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub boxes: Vec<Box3D>,
    pub capacity: usize,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Knobs of the geometric proposer.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalParams {
    /// Minimum point count for a BEV cell to count as occupied.
    pub occupancy_threshold: u32,
    /// Components with fewer cells than this are discarded; stray sparse
    /// returns occasionally push an isolated ground cell over the
    /// occupancy threshold.
    pub min_component_cells: usize,
    /// Maximum number of proposals kept (highest scores win).
    pub capacity: usize,
    /// Fallback box height when no vertical statistics are available.
    pub default_height: f64,
    /// Fallback center z.
    pub default_z_center: f64,
    /// Margin added to the observed vertical extent, meters.
    pub height_margin: f64,
    /// Extent estimation assumes cells cover the footprint uniformly, so
    /// the extent is `sqrt(12 * variance)` after removing this many cells'
    /// worth of quantization variance (`trim * cell^2 / 12`).
    pub extent_trim_cells: f64,
    /// Class assigned to proposals (refinement may re-score but not
    /// re-label; the proposer is class-free).
    pub class: ObjectClass,
}

impl Default for ProposalParams {
    fn default() -> Self {
        ProposalParams {
            occupancy_threshold: 3,
            min_component_cells: 3,
            capacity: 128,
            default_height: 1.6,
            default_z_center: 0.8,
            height_margin: 0.2,
            extent_trim_cells: 1.0,
            class: ObjectClass::Vehicle,
        }
    }
}

/// Per-BEV-cell vertical statistics gathered from the sparse voxel set,
/// used for the z-center / height priors of the proposer.
#[derive(Debug, Clone, Default)]
pub struct BevZStats {
    /// (min z, max z, sum z, voxel count) per occupied BEV cell.
    pub cells: BTreeMap<(usize, usize), (f64, f64, f64, usize)>,
}

impl BevZStats {
    /// Accumulate voxel center heights per stride-pooled BEV cell.
    pub fn from_voxels(set: &SparseVoxelSet) -> Self {
        let s = set.spec.bev_stride as usize;
        let mut cells: BTreeMap<(usize, usize), (f64, f64, f64, usize)> = BTreeMap::new();
        for idx in set.entries.keys() {
            let z = set.spec.voxel_center(*idx)[2];
            let key = (idx.0 as usize / s, idx.1 as usize / s);
            let e = cells
                .entry(key)
                .or_insert((f64::INFINITY, f64::NEG_INFINITY, 0.0, 0));
            e.0 = e.0.min(z);
            e.1 = e.1.max(z);
            e.2 += z;
            e.3 += 1;
        }
        BevZStats { cells }
    }
}

struct Component {
    cells: Vec<(usize, usize)>,
    points: u64,
}

/// Initial 3D proposals from BEV occupancy: threshold, 8-connected
/// components, weighted PCA yaw and extent fit per component, and vertical
/// extent from the voxel statistics. Score is the component's point count
/// normalized by the scene maximum. Deterministic.
pub fn propose_from_bev(
    bev: &BEVMap,
    occupancy: &OccupancyGrid,
    zstats: Option<&BevZStats>,
    spec: &VoxelGridSpec,
    params: &ProposalParams,
) -> Result<ProposalSet> {
    if bev.rows != occupancy.rows || bev.cols != occupancy.cols {
        return Err(DetectError::ShapeMismatch(format!(
            "bev {}x{} vs occupancy {}x{}",
            bev.rows, bev.cols, occupancy.rows, occupancy.cols
        )));
    }
    let (rows, cols) = (occupancy.rows, occupancy.cols);
    let occupied = |ix: usize, iy: usize| occupancy.get(ix, iy) >= params.occupancy_threshold;

    // 8-connected components in row-major discovery order.
    let mut seen = vec![false; rows * cols];
    let mut components: Vec<Component> = Vec::new();
    for ix in 0..rows {
        for iy in 0..cols {
            if seen[ix * cols + iy] || !occupied(ix, iy) {
                continue;
            }
            let mut cells = Vec::new();
            let mut points = 0u64;
            let mut stack = vec![(ix, iy)];
            seen[ix * cols + iy] = true;
            while let Some((cx, cy)) = stack.pop() {
                cells.push((cx, cy));
                points += u64::from(occupancy.get(cx, cy));
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= rows as i64 || ny >= cols as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if !seen[nx * cols + ny] && occupied(nx, ny) {
                            seen[nx * cols + ny] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            cells.sort_unstable();
            if cells.len() >= params.min_component_cells {
                components.push(Component { cells, points });
            }
        }
    }

    if components.is_empty() {
        return Ok(ProposalSet {
            boxes: Vec::new(),
            capacity: params.capacity,
        });
    }

    let max_points = components.iter().map(|c| c.points).max().unwrap_or(1).max(1);
    let cell_m = spec.bev_cell_size();

    let mut boxes = Vec::with_capacity(components.len());
    for comp in &components {
        let b = fit_component(comp, occupancy, zstats, spec, params, cell_m, max_points)?;
        boxes.push(b);
    }
    // Stable sort by descending score keeps discovery order on ties.
    boxes.sort_by(|a, b| {
        b.score
            .unwrap_or(0.0)
            .partial_cmp(&a.score.unwrap_or(0.0))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    boxes.truncate(params.capacity);
    Ok(ProposalSet {
        boxes,
        capacity: params.capacity,
    })
}

fn fit_component(
    comp: &Component,
    occupancy: &OccupancyGrid,
    zstats: Option<&BevZStats>,
    spec: &VoxelGridSpec,
    params: &ProposalParams,
    cell_m: [f64; 2],
    max_points: u64,
) -> Result<Box3D> {
    // Unweighted centroid and covariance over member cells: surface returns
    // are denser on the sensor-facing side, so count weighting would bias
    // the center toward the sensor while the cell footprint itself is not.
    let _ = occupancy;
    let fit_cells = &comp.cells;
    let n_cells = fit_cells.len() as f64;
    let mut mx = 0.0;
    let mut my = 0.0;
    for &(cx, cy) in fit_cells.iter() {
        mx += cx as f64 + 0.5;
        my += cy as f64 + 0.5;
    }
    mx /= n_cells;
    my /= n_cells;

    let mut cxx = 0.0;
    let mut cyy = 0.0;
    let mut cxy = 0.0;
    for &(cx, cy) in fit_cells.iter() {
        // positions scaled to meters so anisotropic cells are handled
        let dx = ((cx as f64 + 0.5) - mx) * cell_m[0];
        let dy = ((cy as f64 + 0.5) - my) * cell_m[1];
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    // Principal axis of the 2x2 covariance; isotropic components get yaw 0.
    let yaw_raw = if cxy.abs() < 1e-12 && (cxx - cyy).abs() < 1e-12 {
        0.0
    } else {
        0.5 * (2.0 * cxy).atan2(cxx - cyy)
    };
    // canonicalize to (-pi/2, pi/2]: boxes are 180-degree symmetric
    let mut yaw = normalize_yaw(yaw_raw);
    if yaw > std::f64::consts::FRAC_PI_2 {
        yaw -= std::f64::consts::PI;
    } else if yaw <= -std::f64::consts::FRAC_PI_2 {
        yaw += std::f64::consts::PI;
    }

    // Extent: cell centers of a blob covering an `l x w` footprint are
    // approximately uniform over it, so the variance along each principal
    // axis estimates `extent^2 / 12` plus the projected cell-quantization
    // variance, which is removed before inverting. Variance is insensitive
    // to both yaw-grid alignment and blob thinning, unlike the raw span.
    let (sin_y, cos_y) = yaw.sin_cos();
    let var_along = (cxx * cos_y * cos_y + 2.0 * cxy * sin_y * cos_y + cyy * sin_y * sin_y)
        / n_cells;
    let var_across = (cxx * sin_y * sin_y - 2.0 * cxy * sin_y * cos_y + cyy * cos_y * cos_y)
        / n_cells;
    let quant_along = (cos_y * cos_y * cell_m[0] * cell_m[0]
        + sin_y * sin_y * cell_m[1] * cell_m[1])
        / 12.0;
    let quant_across = (sin_y * sin_y * cell_m[0] * cell_m[0]
        + cos_y * cos_y * cell_m[1] * cell_m[1])
        / 12.0;
    let cell = cell_m[0].max(cell_m[1]);
    let floor = cell * cell / 48.0;
    let trim = params.extent_trim_cells;
    let l = (12.0 * (var_along - trim * quant_along).max(floor)).sqrt();
    let w = (12.0 * (var_across - trim * quant_across).max(floor)).sqrt();

    // Vertical prior from member-cell voxel statistics.
    let (cz, h) = match zstats {
        Some(zs) => {
            let mut zmin = f64::INFINITY;
            let mut zmax = f64::NEG_INFINITY;
            let mut zsum = 0.0;
            let mut count = 0usize;
            for cell in fit_cells.iter() {
                if let Some((lo, hi, sum, n)) = zs.cells.get(cell) {
                    zmin = zmin.min(*lo);
                    zmax = zmax.max(*hi);
                    zsum += sum;
                    count += n;
                }
            }
            if count == 0 {
                (params.default_z_center, params.default_height)
            } else {
                // midpoint of the voxel envelope rather than the voxel mean:
                // top-face returns pile into the highest voxel layer and
                // would drag the mean upward
                let _ = zsum / count as f64;
                let h = (zmax - zmin) + spec.voxel_size[2] + params.height_margin;
                ((zmin + zmax) / 2.0, h)
            }
        }
        None => (params.default_z_center, params.default_height),
    };

    // Cell coordinates back to world meters.
    let cx_m = spec.range.min[0] + mx * cell_m[0];
    let cy_m = spec.range.min[1] + my * cell_m[1];
    let score = comp.points as f64 / max_points as f64;

    Box3D::new([cx_m, cy_m, cz], [l, w, h], yaw, params.class)
        .map(|b| b.with_score(score))
        .map_err(|e| DetectError::InvalidArgument(e.to_string()))
}
