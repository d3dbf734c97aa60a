use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use caprouter::eval::{latency_bench, ComparisonTable, EvalReport, LatencyStats, R0Analysis};
use caprouter::gradsuite::{run_gradient_suite, GradSuiteConfig, GradSuiteReport};
use caprouter::model::{RouterModel, FORMAT_VERSION};
use caprouter::pipeline::compare;
use caprouter::simenv::{generate_world, read_queries_jsonl, write_queries_jsonl, SimQuery, SimWorld, Split};
use caprouter::supervision::{read_supervision_jsonl, write_supervision_jsonl, SupervisionRecord};
use caprouter::training::{load_checkpoint, save_checkpoint, train_stage1, train_stage2, Checkpoint, TrainingData};

use crate::args::{BenchArgs, GradcheckArgs};
use crate::config::{CliConfig, FileKind};
use crate::error::{CliError, Context};

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).context(|| format!("reading {}", path.display()))
}

fn load_world(path: &Path) -> Result<SimWorld, CliError> {
    SimWorld::from_world_json(&read(path)?).context(|| format!("world file {}", path.display()))
}

fn load_queries(path: &Path) -> Result<Vec<SimQuery>, CliError> {
    let file = fs::File::open(path).context(|| format!("opening {}", path.display()))?;
    read_queries_jsonl(BufReader::new(file)).context(|| format!("queries file {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<SupervisionRecord>, CliError> {
    let file = fs::File::open(path).context(|| format!("opening {}", path.display()))?;
    read_supervision_jsonl(BufReader::new(file)).context(|| format!("supervision file {}", path.display()))
}

fn load_ckpt(path: &Path) -> Result<Checkpoint, CliError> {
    load_checkpoint(path).context(|| format!("checkpoint {}", path.display()))
}

fn store_ckpt(ckpt: &Checkpoint, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).context(|| format!("creating {}", dir.display()))?;
    }
    save_checkpoint(ckpt, path).context(|| format!("saving checkpoint {}", path.display()))?;
    // round trip: what was written must read back identically
    if &load_ckpt(path)? != ckpt {
        return Err(CliError::Core {
            context: format!("checkpoint {}", path.display()),
            source: caprouter::Error::Schema("checkpoint did not round-trip".into()),
        });
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn training_data(cfg: &CliConfig, out: &Path) -> Result<TrainingData, CliError> {
    let queries = load_queries(&cfg.path(FileKind::Queries, out))?;
    let records = load_records(&cfg.path(FileKind::Supervision, out))?;
    Ok(TrainingData { queries: queries.into_iter().map(|q| (q.id, q.text)).collect(), records })
}

pub fn gen_sim(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let world = generate_world(&cfg.sim).context(|| "generating world".into())?;
    let world_path = cfg.path(FileKind::World, out);
    write(&world_path, &world.to_world_json().context(|| "serializing world".into())?)?;
    load_world(&world_path)?;

    let mut buf = Vec::new();
    write_queries_jsonl(world.all_queries(), &mut buf).context(|| "serializing queries".into())?;
    let queries_path = cfg.path(FileKind::Queries, out);
    write(&queries_path, &String::from_utf8_lossy(&buf))?;
    if !load_queries(&queries_path)?.iter().eq(world.all_queries()) {
        return Err(CliError::Core {
            context: format!("queries file {}", queries_path.display()),
            source: caprouter::Error::Schema("queries did not round-trip".into()),
        });
    }
    Ok(())
}

pub fn supervise(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let world = load_world(&cfg.path(FileKind::World, out))?;
    let records = world.collect_supervision(Split::Train).context(|| "collecting supervision".into())?;
    let mut buf = Vec::new();
    write_supervision_jsonl(&records, &mut buf).context(|| "serializing supervision".into())?;
    let path = cfg.path(FileKind::Supervision, out);
    write(&path, &String::from_utf8_lossy(&buf))?;
    if load_records(&path)? != records {
        return Err(CliError::Core {
            context: format!("supervision file {}", path.display()),
            source: caprouter::Error::Schema("supervision did not round-trip".into()),
        });
    }
    Ok(())
}

pub fn train_stage1_cmd(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let data = training_data(cfg, out)?;
    let k = data.records.iter().map(|r| r.retriever_id).max().unwrap_or(0);
    let init = RouterModel::random(&cfg.model, RouterModel::default_names(k), cfg.train.seed)
        .context(|| "initializing model".into())?;
    let ckpt = train_stage1(&data, &cfg.train, &init).context(|| "stage-1 training".into())?;
    if let Some(last) = ckpt.log.last() {
        println!("stage 1: {} epochs, final train loss {:.6}", ckpt.log.len(), last.train_loss);
    }
    store_ckpt(&ckpt, &cfg.path(FileKind::Stage1, out))
}

pub fn train_stage2_cmd(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let data = training_data(cfg, out)?;
    let stage1 = load_ckpt(&cfg.path(FileKind::Stage1, out))?;
    let ckpt = train_stage2(&data, &cfg.train, &stage1).context(|| "stage-2 training".into())?;
    if let Some(last) = ckpt.log.last() {
        println!("stage 2: final train loss {:.6}", last.train_loss);
    }
    store_ckpt(&ckpt, &cfg.path(FileKind::Checkpoint, out))
}

/// One line of decisions.jsonl.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionLine {
    pub query_id: String,
    pub chosen: usize,
    pub scores: Vec<f64>,
}

pub fn route(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let ckpt = load_ckpt(&cfg.path(FileKind::Checkpoint, out))?;
    let queries = load_queries(&cfg.path(FileKind::Queries, out))?;
    let router = ckpt.model.compile().context(|| "compiling router".into())?;
    let mut text = String::new();
    for q in &queries {
        let d = router.route(&q.text).context(|| format!("routing query {}", q.id))?;
        let line = DecisionLine { query_id: q.id.clone(), chosen: d.chosen, scores: d.scores };
        text += &serde_json::to_string(&line).context(|| "serializing decision".into())?;
        text.push('\n');
    }
    let path = cfg.path(FileKind::Decisions, out);
    write(&path, &text)?;
    for line in read(&path)?.lines() {
        let d: DecisionLine = serde_json::from_str(line).context(|| format!("decisions file {}", path.display()))?;
        if d.chosen >= d.scores.len() {
            return Err(CliError::Core {
                context: format!("decisions file {}", path.display()),
                source: caprouter::Error::Schema(format!("query {}: chosen id out of range", d.query_id)),
            });
        }
    }
    Ok(())
}

/// Contents of report.json.
#[derive(Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFile {
    pub format_version: u64,
    pub comparison: ComparisonTable,
    pub r0_analysis: R0Analysis,
}

impl EvalFile {
    pub fn validate(&self) -> Result<(), caprouter::Error> {
        if self.format_version != FORMAT_VERSION {
            return Err(caprouter::Error::Version { found: self.format_version, expected: FORMAT_VERSION });
        }
        self.comparison.rows.iter().try_for_each(EvalReport::validate)
    }
}

pub fn eval(cfg: &CliConfig, out: &Path) -> Result<(), CliError> {
    let world = load_world(&cfg.path(FileKind::World, out))?;
    let ckpt = load_ckpt(&cfg.path(FileKind::Checkpoint, out))?;
    let (comparison, r0_analysis) = compare(&world, &ckpt.model, cfg.train.seed).context(|| "evaluation".into())?;
    print!("{}", comparison.render());
    let file = EvalFile { format_version: FORMAT_VERSION, comparison, r0_analysis };
    file.validate().context(|| "report".into())?;
    let path = cfg.path(FileKind::Report, out);
    write(&path, &(serde_json::to_string_pretty(&file).context(|| "serializing report".into())? + "\n"))?;
    let back: EvalFile = serde_json::from_str(&read(&path)?).context(|| format!("report {}", path.display()))?;
    back.validate().context(|| format!("report {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub d: usize,
    pub num_retrievers: usize,
    pub queries: usize,
    pub warmup: usize,
    pub reps: usize,
    pub latency_ms: LatencyStats,
}

pub fn bench(cfg: &CliConfig, out: &Path, args: &BenchArgs) -> Result<(), CliError> {
    let model = if args.fresh {
        RouterModel::random(&cfg.model, RouterModel::default_names(cfg.sim.num_retrievers), cfg.train.seed)
            .context(|| "initializing model".into())?
    } else {
        load_ckpt(&cfg.path(FileKind::Checkpoint, out))?.model
    };
    let texts: Vec<String> = load_queries(&cfg.path(FileKind::Queries, out))?.into_iter().map(|q| q.text).collect();
    let latency_ms = latency_bench(&model, &texts, args.warmup, args.reps).context(|| "latency bench".into())?;
    println!("latency ms: min {:.4} avg {:.4} max {:.4}", latency_ms.min, latency_ms.avg, latency_ms.max);
    let file = BenchFile {
        d: model.d,
        num_retrievers: model.num_retrievers(),
        queries: texts.len(),
        warmup: args.warmup,
        reps: args.reps,
        latency_ms,
    };
    file.latency_ms.validate().context(|| "latency stats".into())?;
    let path = cfg.path(FileKind::Bench, out);
    write(&path, &(serde_json::to_string_pretty(&file).context(|| "serializing bench".into())? + "\n"))?;
    let back: BenchFile = serde_json::from_str(&read(&path)?).context(|| format!("bench file {}", path.display()))?;
    back.latency_ms.validate().context(|| format!("bench file {}", path.display()))
}

pub fn gradcheck(cfg: &CliConfig, out: &Path, args: &GradcheckArgs) -> Result<(), CliError> {
    let suite = GradSuiteConfig {
        instances: args.instances,
        seed: cfg.train.seed,
        tau: cfg.train.tau,
        lambda_reg: cfg.train.lambda_reg,
        ..GradSuiteConfig::default()
    };
    let report = run_gradient_suite(&suite).context(|| "gradient suite".into())?;
    println!("gradcheck: {} checks, max relative error {:.3e}", report.checks.len(), report.max_rel_err);
    let path = cfg.path(FileKind::Gradcheck, out);
    write(&path, &(serde_json::to_string_pretty(&report).context(|| "serializing gradcheck".into())? + "\n"))?;
    let _: GradSuiteReport = serde_json::from_str(&read(&path)?).context(|| format!("gradcheck file {}", path.display()))?;
    if !report.passed {
        return Err(CliError::GradCheck { max_rel_err: report.max_rel_err, tolerance: suite.tolerance });
    }
    Ok(())
}
