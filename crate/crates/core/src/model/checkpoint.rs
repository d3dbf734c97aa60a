//! JSON model file.
//!
//! ```json
//! {"format_version":1,"d_feat":2048,"ngram_n":3,"boundary_char":"#","d":64,"heads":4,
//!  "retriever_names":[...],"enc_r":{"W":[...],"b":[...]},"enc_g":{...},
//!  "tokens":[[...],...],"fusion":{"W_Q":[[...],...],"W_K":[...],"W_V":[...],"W_O":[...]}}
//! ```
//!
//! Matrices are flat row-major arrays. Numbers are written in shortest
//! round-trip form, so a save/load cycle is bit-exact.

use serde::{Deserialize, Serialize};

use super::featurize::FeaturizerConfig;
use super::fusion::FusionParams;
use super::params::EncoderParams;
use super::router::RouterModel;
use crate::error::{Error, Result};
use crate::numerics::Mat64;
use crate::training::TrainingMeta;

pub const FORMAT_VERSION: u64 = 1;

fn default_ngram() -> usize {
    FeaturizerConfig::default().ngram_n
}

fn default_boundary() -> char {
    FeaturizerConfig::default().boundary_char
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderFile {
    #[serde(rename = "W")]
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FusionFile {
    #[serde(rename = "W_Q")]
    w_q: Vec<Vec<f64>>,
    #[serde(rename = "W_K")]
    w_k: Vec<Vec<f64>>,
    #[serde(rename = "W_V")]
    w_v: Vec<Vec<f64>>,
    #[serde(rename = "W_O")]
    w_o: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelFile {
    format_version: u64,
    d_feat: usize,
    #[serde(default = "default_ngram")]
    ngram_n: usize,
    #[serde(default = "default_boundary")]
    boundary_char: char,
    d: usize,
    heads: usize,
    retriever_names: Vec<String>,
    enc_r: EncoderFile,
    enc_g: EncoderFile,
    tokens: Vec<Vec<f64>>,
    fusion: FusionFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) training: Option<TrainingMeta>,
}

impl ModelFile {
    pub(crate) fn from_model(m: &RouterModel, training: Option<TrainingMeta>) -> Self {
        let enc = |e: &EncoderParams| EncoderFile { w: e.w.as_slice().to_vec(), b: e.b.clone() };
        let mats = |ms: &[Mat64]| ms.iter().map(|m| m.as_slice().to_vec()).collect();
        Self {
            format_version: FORMAT_VERSION,
            d_feat: m.featurizer.d_feat,
            ngram_n: m.featurizer.ngram_n,
            boundary_char: m.featurizer.boundary_char,
            d: m.d,
            heads: m.fusion.heads(),
            retriever_names: m.retriever_names.clone(),
            enc_r: enc(&m.enc_r),
            enc_g: enc(&m.enc_g),
            tokens: m.tokens.clone(),
            fusion: FusionFile {
                w_q: mats(&m.fusion.w_q),
                w_k: mats(&m.fusion.w_k),
                w_v: mats(&m.fusion.w_v),
                w_o: m.fusion.w_o.as_slice().to_vec(),
            },
            training,
        }
    }

    pub(crate) fn into_model(self) -> Result<(RouterModel, Option<TrainingMeta>)> {
        let featurizer =
            FeaturizerConfig { d_feat: self.d_feat, ngram_n: self.ngram_n, boundary_char: self.boundary_char };
        featurizer.validate().map_err(|e| Error::schema(e.to_string()))?;
        let (d, d_feat, heads) = (self.d, self.d_feat, self.heads);
        if d == 0 || heads == 0 || d % heads != 0 {
            return Err(Error::schema(format!("heads {heads} must divide d {d}")));
        }
        let dh = d / heads;
        let enc = |e: EncoderFile, name: &str| -> Result<EncoderParams> {
            let w = Mat64::from_vec(d, d_feat, e.w).map_err(|err| Error::schema(format!("{name}.W: {err}")))?;
            Ok(EncoderParams { w, b: e.b })
        };
        let mats = |vs: Vec<Vec<f64>>, name: &str| -> Result<Vec<Mat64>> {
            if vs.len() != heads {
                return Err(Error::schema(format!("fusion.{name} has {} heads, expected {heads}", vs.len())));
            }
            vs.into_iter()
                .map(|v| Mat64::from_vec(dh, d, v).map_err(|err| Error::schema(format!("fusion.{name}: {err}"))))
                .collect()
        };
        let fusion = FusionParams {
            w_q: mats(self.fusion.w_q, "W_Q")?,
            w_k: mats(self.fusion.w_k, "W_K")?,
            w_v: mats(self.fusion.w_v, "W_V")?,
            w_o: Mat64::from_vec(d, d, self.fusion.w_o).map_err(|e| Error::schema(format!("fusion.W_O: {e}")))?,
        };
        let model = RouterModel {
            featurizer,
            d,
            enc_r: enc(self.enc_r, "enc_r")?,
            enc_g: enc(self.enc_g, "enc_g")?,
            tokens: self.tokens,
            fusion,
            retriever_names: self.retriever_names,
        };
        model.validate().map_err(|e| match e {
            Error::NonFinite(_) | Error::Schema(_) => e,
            other => Error::schema(other.to_string()),
        })?;
        Ok((model, self.training))
    }

    pub(crate) fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub(crate) fn from_json(raw: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| Error::schema(format!("model file: {e}")))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(FORMAT_VERSION) => {}
            Some(found) => return Err(Error::Version { found, expected: FORMAT_VERSION }),
            None => return Err(Error::schema("model file: missing or non-integer format_version")),
        }
        serde_json::from_value(value).map_err(|e| Error::schema(format!("model file: {e}")))
    }
}

impl RouterModel {
    /// Serializes the model alone (no training metadata).
    pub fn to_json(&self) -> Result<String> {
        ModelFile::from_model(self, None).to_json()
    }

    /// Parses a model file; training metadata, if present, is ignored.
    pub fn from_json(raw: &str) -> Result<Self> {
        Ok(ModelFile::from_json(raw)?.into_model()?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn model() -> RouterModel {
        let cfg = ModelConfig { featurizer: FeaturizerConfig { d_feat: 64, ..Default::default() }, d: 8, heads: 2 };
        RouterModel::random(&cfg, RouterModel::default_names(3), 11).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = RouterModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn truncated_file_is_schema_error() {
        let s = model().to_json().unwrap();
        let err = RouterModel::from_json(&s[..s.len() / 2]).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn unknown_version_is_rejected() {
        let s = model().to_json().unwrap().replacen("\"format_version\":1", "\"format_version\":99", 1);
        assert!(matches!(RouterModel::from_json(&s), Err(Error::Version { found: 99, .. })));
    }

    #[test]
    fn shape_mismatch_is_schema_error() {
        let mut v: serde_json::Value = serde_json::from_str(&model().to_json().unwrap()).unwrap();
        v["tokens"].as_array_mut().unwrap().pop();
        assert!(matches!(RouterModel::from_json(&v.to_string()), Err(Error::Schema(_))));
        let mut v: serde_json::Value = serde_json::from_str(&model().to_json().unwrap()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(matches!(RouterModel::from_json(&v.to_string()), Err(Error::Schema(_))));
    }
}
