use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use caprouter::model::ModelConfig;
use caprouter::simenv::SimConfig;
use caprouter::training::TrainConfig;

use crate::args::Overrides;
use crate::error::{CliError, Context};

/// File locations; unset entries default to fixed names under `--out`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub world: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub supervision: Option<PathBuf>,
    pub stage1: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub decisions: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub bench: Option<PathBuf>,
    pub gradcheck: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
pub enum FileKind {
    World,
    Queries,
    Supervision,
    Stage1,
    Checkpoint,
    Decisions,
    Report,
    Bench,
    Gradcheck,
}

impl FileKind {
    fn default_name(self) -> &'static str {
        match self {
            FileKind::World => "world.json",
            FileKind::Queries => "queries.jsonl",
            FileKind::Supervision => "supervision.jsonl",
            FileKind::Stage1 => "stage1.json",
            FileKind::Checkpoint => "checkpoint.json",
            FileKind::Decisions => "decisions.jsonl",
            FileKind::Report => "report.json",
            FileKind::Bench => "bench.json",
            FileKind::Gradcheck => "gradcheck.json",
        }
    }
}

/// Merged simulator, training, model and path settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub paths: Paths,
}

impl CliConfig {
    pub fn from_json(raw: &str) -> Result<Self, CliError> {
        serde_json::from_str(raw).context(|| "config file".into())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path).context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&raw)
    }

    /// Flags win over the file.
    pub fn apply(&mut self, seed: Option<u64>, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *dst = v.clone();
            }
        }
        if let Some(s) = seed {
            self.sim.seed = s;
            self.train.seed = s;
        }
        let t = &mut self.train;
        set(&mut t.tau, &o.tau);
        set(&mut t.k, &o.k);
        set(&mut t.beta, &o.beta);
        set(&mut t.gamma, &o.gamma);
        set(&mut t.lambda_reg, &o.lambda_reg);
        set(&mut t.lr, &o.lr);
        set(&mut t.epochs, &o.epochs);
        set(&mut t.batch_size, &o.batch_size);
        set(&mut t.val_ratio, &o.val_ratio);
        set(&mut t.stage1_mode, &o.stage1_mode);
        set(&mut t.sim_scale, &o.sim_scale);
        let s = &mut self.sim;
        set(&mut s.noise_sd, &o.noise_sd);
        set(&mut s.correctness_slope, &o.correctness_slope);
        set(&mut s.correctness_threshold, &o.correctness_threshold);
        set(&mut s.n_train, &o.n_train);
        set(&mut s.n_test, &o.n_test);
        set(&mut self.model.d, &o.d);
        set(&mut self.model.heads, &o.heads);
        set(&mut self.model.featurizer.d_feat, &o.d_feat);
        let p = &mut self.paths;
        for (dst, v) in [
            (&mut p.world, &o.world),
            (&mut p.queries, &o.queries),
            (&mut p.supervision, &o.supervision),
            (&mut p.stage1, &o.stage1),
            (&mut p.checkpoint, &o.checkpoint),
            (&mut p.decisions, &o.decisions),
            (&mut p.report, &o.report),
            (&mut p.bench, &o.bench),
        ] {
            if v.is_some() {
                dst.clone_from(v);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sim.validate().context(|| "sim config".into())?;
        self.train.validate().context(|| "train config".into())?;
        self.model.featurizer.validate().context(|| "model config".into())?;
        Ok(())
    }

    pub fn path(&self, kind: FileKind, out: &Path) -> PathBuf {
        let set = match kind {
            FileKind::World => &self.paths.world,
            FileKind::Queries => &self.paths.queries,
            FileKind::Supervision => &self.paths.supervision,
            FileKind::Stage1 => &self.paths.stage1,
            FileKind::Checkpoint => &self.paths.checkpoint,
            FileKind::Decisions => &self.paths.decisions,
            FileKind::Report => &self.paths.report,
            FileKind::Bench => &self.paths.bench,
            FileKind::Gradcheck => &self.paths.gradcheck,
        };
        set.clone().unwrap_or_else(|| out.join(kind.default_name()))
    }
}
