//! Flat views over structured parameter sets.

use crate::numerics::Mat64;

/// A parameter set exposed as an ordered list of contiguous `f64` blocks.
///
/// Gradient containers implement the same trait with the same block order,
/// so optimizers and the gradient checker can zip them.
pub trait ParamBlocks {
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    /// Overwrites every block from `flat`. Panics if the length differs.
    fn assign(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut off = 0;
        for b in self.blocks_mut() {
            b.copy_from_slice(&flat[off..off + b.len()]);
            off += b.len();
        }
    }
}

/// Weight and bias of one affine encoder, `x ↦ W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w: Mat64,
    pub b: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(d: usize, d_feat: usize) -> Self {
        Self { w: Mat64::zeros(d, d_feat), b: vec![0.0; d] }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn encode_dense(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        crate::numerics::axpy(1.0, &self.b, &mut y);
        y
    }

    pub fn encode_sparse(&self, x: &super::SparseVec) -> Vec<f64> {
        let cols = self.w.cols();
        let data = self.w.as_slice();
        let mut y = self.b.clone();
        for (r, yr) in y.iter_mut().enumerate() {
            let row = &data[r * cols..(r + 1) * cols];
            *yr += x.entries().iter().map(|&(i, v)| row[i] * v).sum::<f64>();
        }
        y
    }

    /// Accumulates `∂L/∂W += dy xᵀ`, `∂L/∂b += dy` for a sparse input.
    pub fn accumulate_sparse(&mut self, dy: &[f64], x: &super::SparseVec) {
        let cols = self.w.cols();
        let data = self.w.as_mut_slice();
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for &(i, v) in x.entries() {
                data[r * cols + i] += g * v;
            }
            self.b[r] += g;
        }
    }

    /// Accumulates `∂L/∂W += dy xᵀ`, `∂L/∂b += dy` for a dense input.
    pub fn accumulate_dense(&mut self, dy: &[f64], x: &[f64]) {
        self.w.add_outer(1.0, dy, x);
        crate::numerics::axpy(1.0, dy, &mut self.b);
    }
}

impl ParamBlocks for EncoderParams {
    fn blocks(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice(), &self.b]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b]
    }
}
