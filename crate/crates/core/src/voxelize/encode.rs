use std::collections::BTreeMap;

use crate::nn::Linear;
use crate::sensorio::PointCloud;

use super::grid::{SparseVoxelSet, VoxelGridSpec, VoxelIdx};
use super::{Result, VoxelizeError};

/// Linear lift from pooled per-voxel statistics to `C_V` channels.
///
/// Input layout: the mean point feature (`C_p` values) concatenated with the
/// mean point offset from the voxel center (3 values).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LiftWeights(pub Linear);

impl LiftWeights {
    pub fn seeded(c_v: usize, c_p: usize, seed: u64) -> Self {
        LiftWeights(Linear::seeded(c_v, c_p + 3, seed))
    }

    /// Copies the `C_p` pooled features into the leading channels, zero
    /// elsewhere; useful for tests and identity-style configs.
    pub fn identity_like(c_v: usize, c_p: usize) -> Self {
        let mut l = Linear::zeros(c_v, c_p + 3);
        for i in 0..c_v.min(c_p) {
            l.weight[i * l.in_dim + i] = 1.0;
        }
        LiftWeights(l)
    }
}

/// Bin points into voxels and lift per-voxel statistics to features.
///
/// Each occupied voxel's feature is `lift(mean feature || mean offset from
/// voxel center)`; empty voxels are absent. The cloud must already be
/// filtered to the grid range. The mean is computed as sum / count, so the
/// result is independent of point order up to float associativity of the
/// deterministic input order.
pub fn voxelize_points(
    cloud: &PointCloud,
    spec: &VoxelGridSpec,
    lift: &LiftWeights,
) -> Result<SparseVoxelSet> {
    let c_p = cloud.sensor.feature_dim();
    if lift.0.in_dim != c_p + 3 {
        return Err(VoxelizeError::ShapeMismatch(format!(
            "lift expects input {}, sensor provides {}",
            lift.0.in_dim,
            c_p + 3
        )));
    }
    if lift.0.out_dim != spec.c_v {
        return Err(VoxelizeError::ShapeMismatch(format!(
            "lift output {} != C_V {}",
            lift.0.out_dim, spec.c_v
        )));
    }

    struct Acc {
        sum_feat: Vec<f64>,
        sum_pos: [f64; 3],
        count: usize,
    }
    let mut bins: BTreeMap<VoxelIdx, Acc> = BTreeMap::new();
    for (p, f) in cloud.points.iter().zip(&cloud.features) {
        let pf = [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])];
        let idx = spec.voxel_of(pf)?;
        let acc = bins.entry(idx).or_insert_with(|| Acc {
            sum_feat: vec![0.0; c_p],
            sum_pos: [0.0; 3],
            count: 0,
        });
        for (s, v) in acc.sum_feat.iter_mut().zip(f) {
            *s += f64::from(*v);
        }
        for a in 0..3 {
            acc.sum_pos[a] += pf[a];
        }
        acc.count += 1;
    }

    let mut set = SparseVoxelSet::empty(spec.clone());
    for (idx, acc) in bins {
        let n = acc.count as f64;
        let center = spec.voxel_center(idx);
        let mut stats = Vec::with_capacity(c_p + 3);
        for s in &acc.sum_feat {
            stats.push(s / n);
        }
        for a in 0..3 {
            stats.push(acc.sum_pos[a] / n - center[a]);
        }
        set.insert(idx, lift.0.forward(&stats)?)?;
    }
    Ok(set)
}

/// Per-BEV-cell point counts at the grid's BEV stride.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    /// Cells along X.
    pub rows: usize,
    /// Cells along Y.
    pub cols: usize,
    pub counts: Vec<u32>,
}

impl OccupancyGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        OccupancyGrid {
            rows,
            cols,
            counts: vec![0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> u32 {
        self.counts[ix * self.cols + iy]
    }

    #[inline]
    pub fn add(&mut self, ix: usize, iy: usize, n: u32) {
        self.counts[ix * self.cols + iy] += n;
    }

    /// Element-wise sum with another grid of the same shape.
    pub fn merge(&mut self, other: &OccupancyGrid) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(VoxelizeError::ShapeMismatch(format!(
                "occupancy {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// Count points per BEV cell (stride-pooled horizontal voxel index).
pub fn occupancy_from_cloud(cloud: &PointCloud, spec: &VoxelGridSpec) -> Result<OccupancyGrid> {
    let (rows, cols) = spec.bev_dims();
    let mut grid = OccupancyGrid::zeros(rows, cols);
    let s = spec.bev_stride as usize;
    for p in &cloud.points {
        let idx = spec.voxel_of([f64::from(p[0]), f64::from(p[1]), f64::from(p[2])])?;
        grid.add(idx.0 as usize / s, idx.1 as usize / s, 1);
    }
    Ok(grid)
}
