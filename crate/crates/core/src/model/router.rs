use serde::{Deserialize, Serialize};

use super::featurize::{featurize, FeaturizerConfig, SparseVec};
use super::fusion::FusionParams;
use super::params::{EncoderParams, ParamBlocks};
use crate::error::{Error, Result};
use crate::numerics::{cosine_sim, Mat64, SplitMix64};

pub const NULL_RETRIEVER_NAME: &str = "R0/no-retrieval";

/// Shape of a fresh model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub featurizer: FeaturizerConfig,
    pub d: usize,
    pub heads: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { featurizer: FeaturizerConfig::default(), d: 64, heads: 4 }
    }
}

/// All trainable parameters of the router plus its featurizer settings.
///
/// Retriever `0` is the null retriever. Queries and retriever tokens pass
/// through the same two encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterModel {
    pub featurizer: FeaturizerConfig,
    pub d: usize,
    pub enc_r: EncoderParams,
    pub enc_g: EncoderParams,
    pub tokens: Vec<Vec<f64>>,
    pub fusion: FusionParams,
    pub retriever_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub chosen: usize,
    pub scores: Vec<f64>,
}

impl RoutingDecision {
    /// Argmax with ties going to the lowest id.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Empty("routing scores".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("routing score".into()));
        }
        let mut chosen = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[chosen] {
                chosen = i;
            }
        }
        Ok(Self { chosen, scores })
    }
}

impl RouterModel {
    /// Random init: encoder weights `N(0, 1/d)`, zero biases, tokens
    /// `N(0, 1/d_feat)` (unit expected norm), random fusion.
    pub fn random(cfg: &ModelConfig, retriever_names: Vec<String>, seed: u64) -> Result<Self> {
        cfg.featurizer.validate()?;
        if cfg.d == 0 {
            return Err(Error::config("d must be positive"));
        }
        if retriever_names.len() < 2 {
            return Err(Error::config("need the null retriever and at least one real retriever"));
        }
        let d_feat = cfg.featurizer.d_feat;
        let mut rng = SplitMix64::keyed(seed, &["model-init".into()]);
        let w_sd = 1.0 / (cfg.d as f64).sqrt();
        let mut enc = || EncoderParams {
            w: Mat64::from_fn(cfg.d, d_feat, |_, _| w_sd * rng.normal()),
            b: vec![0.0; cfg.d],
        };
        let enc_r = enc();
        let enc_g = enc();
        let t_sd = 1.0 / (d_feat as f64).sqrt();
        let tokens = (0..retriever_names.len())
            .map(|_| (0..d_feat).map(|_| t_sd * rng.normal()).collect())
            .collect();
        let fusion = FusionParams::random(cfg.d, cfg.heads, &mut rng)?;
        let model = Self {
            featurizer: cfg.featurizer,
            d: cfg.d,
            enc_r,
            enc_g,
            tokens,
            fusion,
            retriever_names,
        };
        model.validate()?;
        Ok(model)
    }

    /// Names `R0/no-retrieval, R1, …, RK`.
    pub fn default_names(k: usize) -> Vec<String> {
        std::iter::once(NULL_RETRIEVER_NAME.to_string())
            .chain((1..=k).map(|i| format!("R{i}")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.featurizer.validate()?;
        let d = self.d;
        let d_feat = self.featurizer.d_feat;
        for (name, e) in [("enc_r", &self.enc_r), ("enc_g", &self.enc_g)] {
            if e.w.rows() != d || e.w.cols() != d_feat || e.b.len() != d {
                return Err(Error::schema(format!("{name} shape does not match d={d}, d_feat={d_feat}")));
            }
            if !e.w.is_finite() || e.b.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name} parameter")));
            }
        }
        if self.tokens.len() != self.retriever_names.len() {
            return Err(Error::schema(format!(
                "{} tokens for {} retriever names",
                self.tokens.len(),
                self.retriever_names.len()
            )));
        }
        if self.tokens.len() < 2 {
            return Err(Error::schema("catalog needs the null retriever plus at least one retriever"));
        }
        for t in &self.tokens {
            if t.len() != d_feat {
                return Err(Error::schema(format!("token length {} != d_feat {d_feat}", t.len())));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("retriever token".into()));
            }
        }
        self.fusion.validate(d)
    }

    /// Catalog size including the null retriever (K + 1).
    pub fn num_retrievers(&self) -> usize {
        self.tokens.len()
    }

    pub fn featurize(&self, text: &str) -> Result<SparseVec> {
        featurize(&self.featurizer, text)
    }

    pub fn encode_features(&self, x: &SparseVec) -> QueryEmbedding {
        QueryEmbedding { r: self.enc_r.encode_sparse(x), g: self.enc_g.encode_sparse(x) }
    }

    pub fn encode_query(&self, text: &str) -> Result<QueryEmbedding> {
        Ok(self.encode_features(&self.featurize(text)?))
    }

    fn check_id(&self, i: usize) -> Result<()> {
        if i >= self.num_retrievers() {
            return Err(Error::OutOfRange { what: "retriever id", id: i, max: self.num_retrievers() - 1 });
        }
        Ok(())
    }

    /// `(r_{R_i}, g_{R_i})` from the retriever's token.
    pub fn encode_retriever(&self, i: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_id(i)?;
        let t = &self.tokens[i];
        Ok((self.enc_r.encode_dense(t), self.enc_g.encode_dense(t)))
    }

    pub fn fuse(&self, r_q: &[f64], r_i: &[f64], g_i: &[f64]) -> Result<Vec<f64>> {
        Ok(self.fusion.forward(r_q, r_i, g_i)?.out)
    }

    pub fn route(&self, text: &str) -> Result<RoutingDecision> {
        let q = self.encode_query(text)?;
        self.route_embedded(&q.r, &q.g)
    }

    /// Routing from precomputed query embeddings.
    pub fn route_embedded(&self, r_q: &[f64], g_q: &[f64]) -> Result<RoutingDecision> {
        let scores = (0..self.num_retrievers())
            .map(|i| {
                let (r_i, g_i) = self.encode_retriever(i)?;
                let h = self.fuse(r_q, &r_i, &g_i)?;
                cosine_sim(g_q, &h)
            })
            .collect::<Result<Vec<_>>>()?;
        RoutingDecision::from_scores(scores)
    }

    /// Precomputes retriever embeddings for repeated routing.
    pub fn compile(&self) -> Result<CompiledRouter<'_>> {
        let retrievers = (0..self.num_retrievers())
            .map(|i| self.encode_retriever(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledRouter { model: self, retrievers })
    }

    /// Sets the fusion so that `h_i = g_i` for every retriever at the current
    /// encoder and token values.
    ///
    /// `W_Q = 0` makes attention uniform, so the pre-projection value is
    /// `s_i = (r_i + g_i)/2`. With `W_O = I`, the stacked value projection is
    /// the minimum-norm correction of the identity satisfying `M s_i = g_i`:
    /// `M = I + (G − S)(SᵀS)⁻¹Sᵀ`. `W_K` gets small random entries so
    /// attention can move once `W_Q` leaves zero.
    pub fn init_fusion_passthrough(&mut self, seed: u64) -> Result<()> {
        let d = self.d;
        let heads = self.fusion.heads();
        let dh = d / heads;
        let n = self.num_retrievers();
        let mut s = Mat64::zeros(d, n);
        let mut g_minus_s = Mat64::zeros(d, n);
        for i in 0..n {
            let (r, g) = self.encode_retriever(i)?;
            for row in 0..d {
                let si = 0.5 * (r[row] + g[row]);
                s.set(row, i, si);
                g_minus_s.set(row, i, g[row] - si);
            }
        }
        let mut gram = s.transpose().matmul(&s);
        // tiny ridge keeps the solve defined if two tokens coincide
        let ridge = 1e-12 * (0..n).map(|i| gram.get(i, i)).sum::<f64>().max(1e-300);
        for i in 0..n {
            gram.set(i, i, gram.get(i, i) + ridge);
        }
        let coeff = crate::numerics::solve_spd(&gram, &s.transpose())?; // (SᵀS)⁻¹Sᵀ, n × d
        let mut m = g_minus_s.matmul(&coeff);
        for i in 0..d {
            m.set(i, i, m.get(i, i) + 1.0);
        }

        let mut rng = SplitMix64::keyed(seed, &["fusion-passthrough".into()]);
        let k_sd = 0.01 / (d as f64).sqrt();
        for h in 0..heads {
            self.fusion.w_q[h] = Mat64::zeros(dh, d);
            self.fusion.w_k[h] = Mat64::from_fn(dh, d, |_, _| k_sd * rng.normal());
            self.fusion.w_v[h] = Mat64::from_fn(dh, d, |r, c| m.get(h * dh + r, c));
        }
        self.fusion.w_o = Mat64::identity(d);
        self.fusion.validate(d)
    }
}

/// A router with retriever embeddings cached; routes identically to
/// [`RouterModel::route`].
#[derive(Debug, Clone)]
pub struct CompiledRouter<'a> {
    model: &'a RouterModel,
    retrievers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CompiledRouter<'_> {
    pub fn model(&self) -> &RouterModel {
        self.model
    }

    pub fn retriever(&self, i: usize) -> Option<(&[f64], &[f64])> {
        self.retrievers.get(i).map(|(r, g)| (r.as_slice(), g.as_slice()))
    }

    pub fn route(&self, text: &str) -> Result<RoutingDecision> {
        let q = self.model.encode_query(text)?;
        self.route_embedded(&q.r, &q.g)
    }

    pub fn route_embedded(&self, r_q: &[f64], g_q: &[f64]) -> Result<RoutingDecision> {
        let scores = self
            .retrievers
            .iter()
            .map(|(r_i, g_i)| cosine_sim(g_q, &self.model.fuse(r_q, r_i, g_i)?))
            .collect::<Result<Vec<_>>>()?;
        RoutingDecision::from_scores(scores)
    }
}

impl ParamBlocks for RouterModel {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = self.enc_r.blocks();
        out.extend(self.enc_g.blocks());
        out.extend(self.tokens.iter().map(Vec::as_slice));
        out.extend(self.fusion.blocks());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.enc_r.blocks_mut();
        out.extend(self.enc_g.blocks_mut());
        out.extend(self.tokens.iter_mut().map(Vec::as_mut_slice));
        out.extend(self.fusion.blocks_mut());
        out
    }
}
