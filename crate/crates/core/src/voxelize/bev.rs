use crate::nn::Conv2d;

use super::grid::SparseVoxelSet;
use super::{Result, VoxelizeError};

/// Dense bird's-eye-view feature map over `(X/s) x (Y/s)` ground-plane
/// cells, channel index fastest. Row index follows X, column index Y.
#[derive(Debug, Clone, PartialEq)]
pub struct BEVMap {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl BEVMap {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        BEVMap {
            rows,
            cols,
            channels,
            data: vec![0.0; rows * cols * channels],
        }
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize, c: usize) -> f64 {
        self.data[(ix * self.cols + iy) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, c: usize, v: f64) {
        self.data[(ix * self.cols + iy) * self.channels + c] = v;
    }
}

/// Collapse a sparse voxel set to BEV: sum features over the vertical axis,
/// mean-pool `s x s` horizontal blocks, then apply the configured conv
/// stack. An empty stack returns the raw collapsed map (C_V channels).
pub fn bev_collapse(set: &SparseVoxelSet, convs: &[Conv2d]) -> Result<BEVMap> {
    let spec = &set.spec;
    let (rows, cols) = spec.bev_dims();
    let s = spec.bev_stride as usize;
    let c_v = spec.c_v;
    let mut collapsed = BEVMap::zeros(rows, cols, c_v);
    let norm = 1.0 / (s * s) as f64;
    for (idx, feat) in &set.entries {
        let bx = idx.0 as usize / s;
        let by = idx.1 as usize / s;
        let base = (bx * cols + by) * c_v;
        for (c, v) in feat.iter().enumerate() {
            collapsed.data[base + c] += v * norm;
        }
    }
    apply_conv_stack(collapsed, convs)
}

fn apply_conv_stack(mut map: BEVMap, convs: &[Conv2d]) -> Result<BEVMap> {
    for conv in convs {
        conv.validate()?;
        if conv.in_c != map.channels {
            return Err(VoxelizeError::ShapeMismatch(format!(
                "conv expects {} channels, map has {}",
                conv.in_c, map.channels
            )));
        }
        let (out, oh, ow) = conv.forward(&map.data, map.rows, map.cols)?;
        map = BEVMap {
            rows: oh,
            cols: ow,
            channels: conv.out_c,
            data: out,
        };
    }
    Ok(map)
}

/// Fuse two BEV maps: concatenate along channels, then a 3x3 zero-padded
/// conv down to the fusion width. ReLU is controlled by the conv's flag.
pub fn bev_concat_fuse(a: &BEVMap, b: &BEVMap, conv: &Conv2d) -> Result<BEVMap> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(VoxelizeError::ShapeMismatch(format!(
            "BEV shapes differ: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    conv.validate()?;
    if conv.in_c != a.channels + b.channels {
        return Err(VoxelizeError::ShapeMismatch(format!(
            "fusion conv expects {} channels, concat provides {}",
            conv.in_c,
            a.channels + b.channels
        )));
    }
    if conv.stride != 1 || conv.kernel != 3 || conv.padding != 1 {
        return Err(VoxelizeError::InvalidWeights(
            "fusion conv must be 3x3, stride 1, padding 1".to_string(),
        ));
    }
    let mut cat = vec![0.0; a.rows * a.cols * conv.in_c];
    for i in 0..a.rows * a.cols {
        cat[i * conv.in_c..i * conv.in_c + a.channels]
            .copy_from_slice(&a.data[i * a.channels..(i + 1) * a.channels]);
        cat[i * conv.in_c + a.channels..(i + 1) * conv.in_c]
            .copy_from_slice(&b.data[i * b.channels..(i + 1) * b.channels]);
    }
    let (out, oh, ow) = conv.forward(&cat, a.rows, a.cols)?;
    Ok(BEVMap {
        rows: oh,
        cols: ow,
        channels: conv.out_c,
        data: out,
    })
}
