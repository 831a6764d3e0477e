use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sensorio::RangeBox;

use super::{Result, VoxelizeError};

/// Integer voxel index `(ix, iy, iz)`.
pub type VoxelIdx = (u32, u32, u32);

/// Geometry of the voxel grid: detection range, voxel size, derived integer
/// dimensions, BEV stride, and channel widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGridSpec {
    pub range: RangeBox,
    /// Voxel edge length per axis, meters.
    pub voxel_size: [f64; 3],
    /// Derived grid dimensions (X, Y, Z).
    pub dims: [u32; 3],
    /// BEV pooling stride over (X, Y).
    pub bev_stride: u32,
    /// Voxel feature channels.
    pub c_v: usize,
    /// BEV feature channels.
    pub c_b: usize,
}

impl VoxelGridSpec {
    /// Validate and derive dimensions. The range must be an integral number
    /// of voxels per axis (within 1e-9), and X, Y must divide by the stride.
    pub fn new(
        range: RangeBox,
        voxel_size: [f64; 3],
        bev_stride: u32,
        c_v: usize,
        c_b: usize,
    ) -> Result<Self> {
        if bev_stride == 0 || c_v == 0 || c_b == 0 {
            return Err(VoxelizeError::InvalidSpec(
                "stride and channel widths must be positive".to_string(),
            ));
        }
        let mut dims = [0u32; 3];
        for a in 0..3 {
            if voxel_size[a] <= 0.0 {
                return Err(VoxelizeError::InvalidSpec(format!(
                    "voxel size must be positive on axis {a}"
                )));
            }
            let cells = (range.max[a] - range.min[a]) / voxel_size[a];
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-9 {
                return Err(VoxelizeError::InvalidSpec(format!(
                    "range/voxel on axis {a} is {cells}, not integral"
                )));
            }
            dims[a] = rounded as u32;
        }
        if dims[0] % bev_stride != 0 || dims[1] % bev_stride != 0 {
            return Err(VoxelizeError::InvalidSpec(format!(
                "grid {}x{} not divisible by stride {bev_stride}",
                dims[0], dims[1]
            )));
        }
        Ok(VoxelGridSpec {
            range,
            voxel_size,
            dims,
            bev_stride,
            c_v,
            c_b,
        })
    }

    /// Default grid: the full detection range at 0.4 m cubic voxels
    /// (188 x 376 x 15 cells), stride 2, 32 voxel / 64 BEV channels.
    pub fn default_detection() -> Self {
        VoxelGridSpec::new(RangeBox::detection_default(), [0.4; 3], 2, 32, 64)
            .expect("default spec is valid")
    }

    /// Voxel index containing a point, or an error if outside the range.
    pub fn voxel_of(&self, p: [f64; 3]) -> Result<VoxelIdx> {
        let mut idx = [0u32; 3];
        for a in 0..3 {
            if !(self.range.min[a] <= p[a] && p[a] < self.range.max[a]) {
                return Err(VoxelizeError::PointOutsideRange(p[0], p[1], p[2]));
            }
            let i = ((p[a] - self.range.min[a]) / self.voxel_size[a]).floor();
            idx[a] = (i as i64).clamp(0, i64::from(self.dims[a]) - 1) as u32;
        }
        Ok((idx[0], idx[1], idx[2]))
    }

    /// World-space center of a voxel.
    pub fn voxel_center(&self, idx: VoxelIdx) -> [f64; 3] {
        [
            self.range.min[0] + (f64::from(idx.0) + 0.5) * self.voxel_size[0],
            self.range.min[1] + (f64::from(idx.1) + 0.5) * self.voxel_size[1],
            self.range.min[2] + (f64::from(idx.2) + 0.5) * self.voxel_size[2],
        ]
    }

    /// BEV grid dimensions `(X/s, Y/s)`.
    pub fn bev_dims(&self) -> (usize, usize) {
        (
            (self.dims[0] / self.bev_stride) as usize,
            (self.dims[1] / self.bev_stride) as usize,
        )
    }

    /// Edge length of one BEV cell in meters, per horizontal axis.
    pub fn bev_cell_size(&self) -> [f64; 2] {
        [
            self.voxel_size[0] * f64::from(self.bev_stride),
            self.voxel_size[1] * f64::from(self.bev_stride),
        ]
    }
}

/// Sparse voxel features: only non-empty cells, keyed by integer index.
/// Iteration order is the BTreeMap key order, so derived computations are
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVoxelSet {
    pub spec: VoxelGridSpec,
    pub entries: BTreeMap<VoxelIdx, Vec<f64>>,
}

impl SparseVoxelSet {
    pub fn empty(spec: VoxelGridSpec) -> Self {
        SparseVoxelSet {
            spec,
            entries: BTreeMap::new(),
        }
    }

    /// Insert a feature, validating index bounds, arity, and finiteness.
    pub fn insert(&mut self, idx: VoxelIdx, feature: Vec<f64>) -> Result<()> {
        if idx.0 >= self.spec.dims[0] || idx.1 >= self.spec.dims[1] || idx.2 >= self.spec.dims[2] {
            return Err(VoxelizeError::InvalidSpec(format!(
                "voxel index {idx:?} outside dims {:?}",
                self.spec.dims
            )));
        }
        if feature.len() != self.spec.c_v {
            return Err(VoxelizeError::ShapeMismatch(format!(
                "feature arity {} != C_V {}",
                feature.len(),
                self.spec.c_v
            )));
        }
        if !feature.iter().all(|v| v.is_finite()) {
            return Err(VoxelizeError::InvalidWeights(
                "non-finite voxel feature".to_string(),
            ));
        }
        self.entries.insert(idx, feature);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Voxel indices in deterministic (sorted) order.
    pub fn indices(&self) -> Vec<VoxelIdx> {
        self.entries.keys().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_has_expected_dims() {
        let spec = VoxelGridSpec::default_detection();
        assert_eq!(spec.dims, [188, 376, 15]);
        assert_eq!(spec.bev_dims(), (94, 188));
    }

    #[test]
    fn non_integral_range_rejected() {
        let range = RangeBox::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        assert!(VoxelGridSpec::new(range, [0.3, 0.5, 0.5], 1, 4, 4).is_err());
    }

    #[test]
    fn stride_must_divide_dims() {
        let range = RangeBox::new([0.0, 0.0, 0.0], [3.0, 3.0, 1.0]).unwrap();
        assert!(VoxelGridSpec::new(range, [1.0, 1.0, 1.0], 2, 4, 4).is_err());
    }

    #[test]
    fn voxel_of_and_center_are_consistent() {
        let spec = VoxelGridSpec::default_detection();
        let idx = spec.voxel_of([10.1, -3.3, 0.7]).unwrap();
        let center = spec.voxel_center(idx);
        for a in 0..3 {
            assert!((center[a] - [10.1, -3.3, 0.7][a]).abs() <= spec.voxel_size[a] / 2.0 + 1e-12);
        }
        assert!(spec.voxel_of([80.0, 0.0, 0.0]).is_err());
    }
}
