//! Query-conditioned multi-head attention over a retriever's two capability
//! embeddings.
//!
//! The query token is `r_q`; the key/value sequence has two slots, the
//! retriever's quality embedding `r_i` and its utility embedding `g_i`.
//! For each head `h`:
//!
//! ```text
//! q = W_Q[h] r_q,  k_j = W_K[h] v_j,  val_j = W_V[h] v_j
//! α = softmax(q·k_j / √d_h)            j ∈ {r_i, g_i}
//! o_h = Σ_j α_j val_j
//! ```
//!
//! and the output is `W_O · concat(o_1, …, o_H)`.

use super::params::ParamBlocks;
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, softmax, Mat64, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub w_q: Vec<Mat64>,
    pub w_k: Vec<Mat64>,
    pub w_v: Vec<Mat64>,
    pub w_o: Mat64,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct FusionTrace {
    q: Vec<Vec<f64>>,
    keys: Vec<[Vec<f64>; 2]>,
    vals: Vec<[Vec<f64>; 2]>,
    alpha: Vec<[f64; 2]>,
    concat: Vec<f64>,
    pub out: Vec<f64>,
}

impl FusionTrace {
    /// Attention weights `(α_r, α_g)` per head.
    pub fn attention(&self) -> &[[f64; 2]] {
        &self.alpha
    }
}

/// Gradients of a scalar loss through one fusion call.
#[derive(Debug, Clone)]
pub struct FusionBackward {
    pub d_rq: Vec<f64>,
    pub d_ri: Vec<f64>,
    pub d_gi: Vec<f64>,
}

impl FusionParams {
    pub fn zeros(d: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(Error::config(format!("heads {heads} must divide d {d}")));
        }
        let dh = d / heads;
        Ok(Self {
            w_q: vec![Mat64::zeros(dh, d); heads],
            w_k: vec![Mat64::zeros(dh, d); heads],
            w_v: vec![Mat64::zeros(dh, d); heads],
            w_o: Mat64::zeros(d, d),
        })
    }

    /// Gaussian init with standard deviation `1/√d` for every matrix.
    pub fn random(d: usize, heads: usize, rng: &mut SplitMix64) -> Result<Self> {
        let mut p = Self::zeros(d, heads)?;
        let sd = 1.0 / (d as f64).sqrt();
        for b in p.blocks_mut() {
            for x in b.iter_mut() {
                *x = sd * rng.normal();
            }
        }
        Ok(p)
    }

    pub fn heads(&self) -> usize {
        self.w_q.len()
    }

    pub fn dim(&self) -> usize {
        self.w_o.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.dim() / self.heads()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let h = self.heads();
        if h == 0 || !d.is_multiple_of(h) {
            return Err(Error::schema(format!("heads {h} must divide d {d}")));
        }
        let dh = d / h;
        if self.w_k.len() != h || self.w_v.len() != h {
            return Err(Error::schema("per-head projection counts differ"));
        }
        for m in self.w_q.iter().chain(&self.w_k).chain(&self.w_v) {
            if m.rows() != dh || m.cols() != d {
                return Err(Error::schema(format!(
                    "head projection is {}x{}, expected {dh}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        if self.w_o.rows() != d || self.w_o.cols() != d {
            return Err(Error::schema("W_O must be d x d"));
        }
        if self.blocks().iter().any(|b| b.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("fusion parameter".into()));
        }
        Ok(())
    }

    pub fn forward(&self, r_q: &[f64], r_i: &[f64], g_i: &[f64]) -> Result<FusionTrace> {
        let d = self.dim();
        for v in [r_q, r_i, g_i] {
            if v.len() != d {
                return Err(Error::LengthMismatch { expected: d, actual: v.len() });
            }
        }
        let scale = 1.0 / (self.head_dim() as f64).sqrt();
        let heads = self.heads();
        let mut q = Vec::with_capacity(heads);
        let mut keys = Vec::with_capacity(heads);
        let mut vals = Vec::with_capacity(heads);
        let mut alpha = Vec::with_capacity(heads);
        let mut concat = Vec::with_capacity(d);
        for h in 0..heads {
            let qh = self.w_q[h].matvec(r_q);
            let kh = [self.w_k[h].matvec(r_i), self.w_k[h].matvec(g_i)];
            let vh = [self.w_v[h].matvec(r_i), self.w_v[h].matvec(g_i)];
            let logits = [dot(&qh, &kh[0]) * scale, dot(&qh, &kh[1]) * scale];
            let a = softmax(&logits)?;
            let a = [a[0], a[1]];
            concat.extend(vh[0].iter().zip(&vh[1]).map(|(x, y)| a[0] * x + a[1] * y));
            q.push(qh);
            keys.push(kh);
            vals.push(vh);
            alpha.push(a);
        }
        let out = self.w_o.matvec(&concat);
        Ok(FusionTrace { q, keys, vals, alpha, concat, out })
    }

    /// Backpropagates `d_out = ∂L/∂h` through one forward pass, accumulating
    /// parameter gradients into `grads` and returning input gradients.
    pub fn backward(
        &self,
        trace: &FusionTrace,
        r_q: &[f64],
        r_i: &[f64],
        g_i: &[f64],
        d_out: &[f64],
        grads: &mut FusionParams,
    ) -> FusionBackward {
        let d = self.dim();
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        grads.w_o.add_outer(1.0, d_out, &trace.concat);
        let d_concat = self.w_o.matvec_t(d_out);

        let inputs = [r_i, g_i];
        let mut d_rq = vec![0.0; d];
        let mut d_in = [vec![0.0; d], vec![0.0; d]];
        for h in 0..self.heads() {
            let d_o = &d_concat[h * dh..(h + 1) * dh];
            let a = trace.alpha[h];
            let d_alpha = [dot(d_o, &trace.vals[h][0]), dot(d_o, &trace.vals[h][1])];
            let mean = a[0] * d_alpha[0] + a[1] * d_alpha[1];
            let d_logit = [a[0] * (d_alpha[0] - mean), a[1] * (d_alpha[1] - mean)];

            let mut d_q = vec![0.0; dh];
            for j in 0..2 {
                // value path
                let d_val: Vec<f64> = d_o.iter().map(|x| a[j] * x).collect();
                grads.w_v[h].add_outer(1.0, &d_val, inputs[j]);
                axpy(1.0, &self.w_v[h].matvec_t(&d_val), &mut d_in[j]);
                // key path
                let d_key: Vec<f64> = trace.q[h].iter().map(|x| d_logit[j] * scale * x).collect();
                grads.w_k[h].add_outer(1.0, &d_key, inputs[j]);
                axpy(1.0, &self.w_k[h].matvec_t(&d_key), &mut d_in[j]);
                axpy(d_logit[j] * scale, &trace.keys[h][j], &mut d_q);
            }
            grads.w_q[h].add_outer(1.0, &d_q, r_q);
            axpy(1.0, &self.w_q[h].matvec_t(&d_q), &mut d_rq);
        }
        let [d_ri, d_gi] = d_in;
        FusionBackward { d_rq, d_ri, d_gi }
    }
}

impl ParamBlocks for FusionParams {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.heads() + 1);
        out.extend(self.w_q.iter().map(Mat64::as_slice));
        out.extend(self.w_k.iter().map(Mat64::as_slice));
        out.extend(self.w_v.iter().map(Mat64::as_slice));
        out.push(self.w_o.as_slice());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.w_q.len() + 1);
        out.extend(self.w_q.iter_mut().map(Mat64::as_mut_slice));
        out.extend(self.w_k.iter_mut().map(Mat64::as_mut_slice));
        out.extend(self.w_v.iter_mut().map(Mat64::as_mut_slice));
        out.push(self.w_o.as_mut_slice());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, GradCheckOptions};

    fn rand_vec(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.normal()).collect()
    }

    #[test]
    fn equal_slots_give_uniform_attention() {
        let mut rng = SplitMix64::new(3);
        let p = FusionParams::random(8, 2, &mut rng).unwrap();
        let rq = rand_vec(&mut rng, 8);
        let v = rand_vec(&mut rng, 8);
        let t = p.forward(&rq, &v, &v).unwrap();
        for a in t.attention() {
            assert_eq!(*a, [0.5, 0.5]);
        }
        let concat: Vec<f64> = p.w_v.iter().flat_map(|w| w.matvec(&v)).collect();
        let expected = p.w_o.matvec(&concat);
        for (x, y) in t.out.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_query_projection_gives_uniform_attention() {
        let mut rng = SplitMix64::new(4);
        let mut p = FusionParams::random(8, 4, &mut rng).unwrap();
        for w in &mut p.w_q {
            *w = Mat64::zeros(2, 8);
        }
        let t = p
            .forward(&rand_vec(&mut rng, 8), &rand_vec(&mut rng, 8), &rand_vec(&mut rng, 8))
            .unwrap();
        for a in t.attention() {
            assert_eq!(*a, [0.5, 0.5]);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut rng = SplitMix64::new(5);
        let p = FusionParams::random(8, 2, &mut rng).unwrap();
        let v8 = vec![1.0; 8];
        assert!(p.forward(&v8, &v8, &[1.0; 7]).is_err());
        assert!(FusionParams::zeros(8, 3).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = SplitMix64::new(100 + seed);
            let p = FusionParams::random(8, 2, &mut rng).unwrap();
            let rq = rand_vec(&mut rng, 8);
            let ri = rand_vec(&mut rng, 8);
            let gi = rand_vec(&mut rng, 8);
            let target = rand_vec(&mut rng, 8);
            // L = target · h
            let loss = |p: &FusionParams, rq: &[f64], ri: &[f64], gi: &[f64]| {
                Ok(dot(&target, &p.forward(rq, ri, gi)?.out))
            };
            let trace = p.forward(&rq, &ri, &gi).unwrap();
            let mut grads = FusionParams::zeros(8, 2).unwrap();
            let back = p.backward(&trace, &rq, &ri, &gi, &target, &mut grads);
            let opts = GradCheckOptions { eps: 1e-5, probes: 10_000, seed };

            let report = finite_diff_check(
                "fusion",
                |flat| {
                    let mut q = p.clone();
                    q.assign(flat);
                    loss(&q, &rq, &ri, &gi)
                },
                &p.flatten(),
                &grads.flatten(),
                opts,
            )
            .unwrap();
            assert!(report.passes(1e-6), "{report:?}");

            for (name, input, analytic) in
                [("r_q", &rq, &back.d_rq), ("r_i", &ri, &back.d_ri), ("g_i", &gi, &back.d_gi)]
            {
                let report = finite_diff_check(
                    name,
                    |x| match name {
                        "r_q" => loss(&p, x, &ri, &gi),
                        "r_i" => loss(&p, &rq, x, &gi),
                        _ => loss(&p, &rq, &ri, x),
                    },
                    input,
                    analytic,
                    opts,
                )
                .unwrap();
                assert!(report.passes(1e-6), "{report:?}");
            }
        }
    }
}
