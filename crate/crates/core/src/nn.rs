//! Minimal dense NN building blocks backing the backbone stubs and fusion
//! heads: linear maps, 3x3 convolutions, two-layer MLPs, and the numeric
//! helpers (softmax, sigmoid, bilinear sampling, pairwise summation) shared
//! across the pipeline.
//!
//! Everything is plain `f64` with deterministic seeded initialization;
//! weights load and save as JSON tensors with declared shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`sigmoid`] at `x`.
pub fn sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Softmax with max-subtraction; output sums to one.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Pairwise (cascade) summation: deterministic and more stable than a
/// left fold for long accumulations.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Bilinear sample of a `h x w x c` feature plane with zero padding
/// outside the valid area. Integer coordinates address texel centers.
pub fn bilinear_sample(data: &[f64], h: usize, w: usize, c: usize, x: f64, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; c];
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let sx = x0 as i64 + dx;
            let sy = y0 as i64 + dy;
            if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                let base = ((sy as usize) * w + sx as usize) * c;
                let weight = wy * wx;
                for ch in 0..c {
                    out[ch] += weight * data[base + ch];
                }
            }
        }
    }
    out
}

/// Dense linear layer `y = W x + b` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub out_dim: usize,
    pub in_dim: usize,
    /// `out_dim * in_dim`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Linear {
            out_dim,
            in_dim,
            weight: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform init in +-1/sqrt(in_dim), bias zero; deterministic per seed.
    pub fn seeded(out_dim: usize, in_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let weight = (0..out_dim * in_dim)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Linear {
            out_dim,
            in_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    /// Identity on the first `min(out, in)` channels, zero elsewhere.
    pub fn identity_like(out_dim: usize, in_dim: usize) -> Self {
        let mut l = Linear::zeros(out_dim, in_dim);
        for i in 0..out_dim.min(in_dim) {
            l.weight[i * in_dim + i] = 1.0;
        }
        l
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight.len() != self.out_dim * self.in_dim || self.bias.len() != self.out_dim {
            return Err(NnError::InvalidWeights(format!(
                "linear {}x{}: weight len {}, bias len {}",
                self.out_dim,
                self.in_dim,
                self.weight.len(),
                self.bias.len()
            )));
        }
        if !self.weight.iter().chain(&self.bias).all(|v| v.is_finite()) {
            return Err(NnError::InvalidWeights("non-finite weight".to_string()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(NnError::ShapeMismatch(format!(
                "linear expects input {}, got {}",
                self.in_dim,
                x.len()
            )));
        }
        let mut y = self.bias.clone();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            *yo += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        Ok(y)
    }
}

/// Two-layer MLP with ReLU between the layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn zeros(out_dim: usize, hidden_dim: usize, in_dim: usize) -> Self {
        Mlp {
            hidden: Linear::zeros(hidden_dim, in_dim),
            output: Linear::zeros(out_dim, hidden_dim),
        }
    }

    pub fn seeded(out_dim: usize, hidden_dim: usize, in_dim: usize, seed: u64) -> Self {
        Mlp {
            hidden: Linear::seeded(hidden_dim, in_dim, seed),
            output: Linear::seeded(out_dim, hidden_dim, seed.wrapping_add(1)),
        }
    }

    /// Exact passthrough of input columns `[offset, offset + out_dim)` using
    /// the relu(x) - relu(-x) split, so the identity holds for any sign.
    pub fn passthrough(out_dim: usize, in_dim: usize, offset: usize) -> Self {
        assert!(offset + out_dim <= in_dim);
        let mut hidden = Linear::zeros(2 * out_dim, in_dim);
        for i in 0..out_dim {
            hidden.weight[i * in_dim + offset + i] = 1.0;
            hidden.weight[(out_dim + i) * in_dim + offset + i] = -1.0;
        }
        let mut output = Linear::zeros(out_dim, 2 * out_dim);
        for i in 0..out_dim {
            output.weight[i * 2 * out_dim + i] = 1.0;
            output.weight[i * 2 * out_dim + out_dim + i] = -1.0;
        }
        Mlp { hidden, output }
    }

    pub fn validate(&self) -> Result<()> {
        self.hidden.validate()?;
        self.output.validate()?;
        if self.output.in_dim != self.hidden.out_dim {
            return Err(NnError::InvalidWeights(
                "mlp layer dimensions do not chain".to_string(),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = self.hidden.forward(x)?;
        for v in &mut h {
            *v = v.max(0.0);
        }
        self.output.forward(&h)
    }
}

/// 2D convolution weights: `out_c x in_c x k x k`, stride and zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub out_c: usize,
    pub in_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `out_c * in_c * kernel * kernel`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub relu: bool,
}

impl Conv2d {
    pub fn zeros(out_c: usize, in_c: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Conv2d {
            out_c,
            in_c,
            kernel,
            stride,
            padding,
            weight: vec![0.0; out_c * in_c * kernel * kernel],
            bias: vec![0.0; out_c],
            relu: false,
        }
    }

    pub fn seeded(
        out_c: usize,
        in_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fan_in = in_c * kernel * kernel;
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let weight = (0..out_c * in_c * kernel * kernel)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Conv2d {
            out_c,
            in_c,
            kernel,
            stride,
            padding,
            weight,
            bias: vec![0.0; out_c],
            relu: false,
        }
    }

    /// 3x3 stride-1 conv whose center tap copies input channel `i` to output
    /// channel `i` (for `i < min(in_c, out_c)`), zero elsewhere.
    pub fn center_identity(out_c: usize, in_c: usize) -> Self {
        let mut conv = Conv2d::zeros(out_c, in_c, 3, 1, 1);
        for i in 0..out_c.min(in_c) {
            conv.weight[((i * in_c + i) * 3 + 1) * 3 + 1] = 1.0;
        }
        conv
    }

    pub fn with_relu(mut self, relu: bool) -> Self {
        self.relu = relu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight.len() != self.out_c * self.in_c * self.kernel * self.kernel
            || self.bias.len() != self.out_c
        {
            return Err(NnError::InvalidWeights("conv weight arity".to_string()));
        }
        if self.stride == 0 || self.kernel == 0 {
            return Err(NnError::InvalidWeights(
                "conv stride/kernel must be positive".to_string(),
            ));
        }
        Ok(())
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.padding).saturating_sub(self.kernel) / self.stride + 1;
        let ow = (w + 2 * self.padding).saturating_sub(self.kernel) / self.stride + 1;
        (oh, ow)
    }

    /// Convolve a `h x w x in_c` plane (channel index fastest), returning
    /// `(out, oh, ow)`.
    pub fn forward(&self, data: &[f64], h: usize, w: usize) -> Result<(Vec<f64>, usize, usize)> {
        if data.len() != h * w * self.in_c {
            return Err(NnError::ShapeMismatch(format!(
                "conv expects {h}x{w}x{}, got buffer {}",
                self.in_c,
                data.len()
            )));
        }
        let (oh, ow) = self.out_dims(h, w);
        let mut out = vec![0.0; oh * ow * self.out_c];
        let k = self.kernel as i64;
        let pad = self.padding as i64;
        for oy in 0..oh {
            for ox in 0..ow {
                for oc in 0..self.out_c {
                    let mut acc = self.bias[oc];
                    for ky in 0..k {
                        let sy = oy as i64 * self.stride as i64 + ky - pad;
                        if sy < 0 || sy >= h as i64 {
                            continue;
                        }
                        for kx in 0..k {
                            let sx = ox as i64 * self.stride as i64 + kx - pad;
                            if sx < 0 || sx >= w as i64 {
                                continue;
                            }
                            let in_base = ((sy as usize) * w + sx as usize) * self.in_c;
                            for ic in 0..self.in_c {
                                let wv = self.weight
                                    [((oc * self.in_c + ic) * self.kernel + ky as usize)
                                        * self.kernel
                                        + kx as usize];
                                acc += wv * data[in_base + ic];
                            }
                        }
                    }
                    if self.relu {
                        acc = acc.max(0.0);
                    }
                    out[(oy * ow + ox) * self.out_c + oc] = acc;
                }
            }
        }
        Ok((out, oh, ow))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let w = softmax(&[0.3, -1.2, 2.0, 0.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn pairwise_sum_matches_fold() {
        let vals: Vec<f64> = (0..101).map(|i| (i as f64) * 0.37 - 3.0).collect();
        let direct: f64 = vals.iter().sum();
        assert!((pairwise_sum(&vals) - direct).abs() < 1e-9);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn linear_identity_passes_through() {
        let l = Linear::identity_like(3, 5);
        let y = l.forward(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn mlp_passthrough_is_exact_for_negative_values() {
        let mlp = Mlp::passthrough(2, 6, 4);
        let y = mlp.forward(&[9.0, 9.0, 9.0, 9.0, -1.5, 2.5]).unwrap();
        assert_eq!(y, vec![-1.5, 2.5]);
    }

    /// Independent naive convolution used as oracle: gathers the receptive
    /// field first, then dots it with the kernel.
    fn conv_oracle(conv: &Conv2d, data: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = conv.out_dims(h, w);
        let mut out = vec![0.0; oh * ow * conv.out_c];
        for oy in 0..oh {
            for ox in 0..ow {
                // gather patch in (ic, ky, kx) order
                let mut patch = vec![0.0; conv.in_c * conv.kernel * conv.kernel];
                for ic in 0..conv.in_c {
                    for ky in 0..conv.kernel {
                        for kx in 0..conv.kernel {
                            let sy = (oy * conv.stride + ky) as i64 - conv.padding as i64;
                            let sx = (ox * conv.stride + kx) as i64 - conv.padding as i64;
                            if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                patch[(ic * conv.kernel + ky) * conv.kernel + kx] =
                                    data[((sy as usize) * w + sx as usize) * conv.in_c + ic];
                            }
                        }
                    }
                }
                for oc in 0..conv.out_c {
                    let base = oc * conv.in_c * conv.kernel * conv.kernel;
                    let mut acc = conv.bias[oc];
                    for (i, p) in patch.iter().enumerate() {
                        acc += conv.weight[base + i] * p;
                    }
                    if conv.relu {
                        acc = acc.max(0.0);
                    }
                    out[(oy * ow + ox) * conv.out_c + oc] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for &(stride, pad) in &[(1usize, 1usize), (2, 1), (1, 0)] {
            let conv = Conv2d::seeded(4, 3, 3, stride, pad, rng.gen());
            let (h, w) = (9, 7);
            let data: Vec<f64> = (0..h * w * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (got, _, _) = conv.forward(&data, h, w).unwrap();
            let want = conv_oracle(&conv, &data, h, w);
            for (g, o) in got.iter().zip(&want) {
                assert!((g - o).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn center_identity_conv_preserves_input() {
        let conv = Conv2d::center_identity(2, 2);
        let data = vec![1.0, -2.0, 3.0, 4.0, 0.5, 0.25, -1.0, 2.0];
        let (out, oh, ow) = conv.forward(&data, 2, 2).unwrap();
        assert_eq!((oh, ow), (2, 2));
        assert_eq!(out, data);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        assert_eq!(Linear::seeded(4, 7, 9), Linear::seeded(4, 7, 9));
        assert_ne!(Linear::seeded(4, 7, 9), Linear::seeded(4, 7, 10));
    }
}
