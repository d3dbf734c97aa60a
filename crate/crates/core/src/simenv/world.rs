use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use crate::error::{Error, Result};
use crate::model::FORMAT_VERSION;
use crate::numerics::{sigmoid, SplitMix64};
use crate::supervision::{
    exact_match, f1_score, parse_judge_json, GenerationOutcome, QualityAssessment, SupervisionRecord,
};

const TYPE_MARKERS: [&str; 8] = ["person", "place", "year", "team", "novel", "river", "species", "album"];
const POPULARITY_BANDS: [&str; 5] = ["obscure", "niche", "familiar", "popular", "famous"];
const FILLER: [&str; 16] = [
    "about", "which", "record", "early", "listed", "named", "first", "during", "after", "under", "second",
    "given", "local", "former", "noted", "around",
];
// answer tokens: gold and distractor words start from disjoint consonants
const GOLD_ONSETS: [char; 7] = ['b', 'd', 'g', 'k', 'm', 'p', 't'];
const DISTRACTOR_ONSETS: [char; 7] = ['f', 'l', 'n', 'r', 's', 'v', 'z'];
const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
const DISTRACTOR_POOL_SIZE: usize = 64;
const JUDGE_JITTER_SD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimQuery {
    pub id: String,
    pub text: String,
    #[serde(rename = "type")]
    pub query_type: usize,
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
    pub popularity: f64,
}

impl SimQuery {
    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let q: SimQuery = serde_json::from_str(line).map_err(|e| Error::schema(format!("query line: {e}")))?;
        if q.id.is_empty() || q.text.trim().is_empty() {
            return Err(Error::schema("query id and text must be non-empty"));
        }
        if q.gold_answers.is_empty() {
            return Err(Error::schema(format!("query {} has no gold answers", q.id)));
        }
        if !(0.0..=1.0).contains(&q.popularity) {
            return Err(Error::schema(format!("query {}: popularity {} outside [0,1]", q.id, q.popularity)));
        }
        Ok(q)
    }
}

pub fn write_queries_jsonl<'a, W: Write>(queries: impl IntoIterator<Item = &'a SimQuery>, mut out: W) -> Result<()> {
    for q in queries {
        writeln!(out, "{}", q.to_line()?)?;
    }
    Ok(())
}

pub fn read_queries_jsonl<R: BufRead>(input: R) -> Result<Vec<SimQuery>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q = SimQuery::parse_line(&line).map_err(|e| Error::schema(format!("line {}: {e}", n + 1)))?;
        if !seen.insert(q.id.clone()) {
            return Err(Error::schema(format!("line {}: duplicate query id {}", n + 1, q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub config: SimConfig,
    pub train: Vec<SimQuery>,
    pub test: Vec<SimQuery>,
    pub distractor_pool: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    format_version: u64,
    config: SimConfig,
    train_ids: Vec<String>,
    test_ids: Vec<String>,
}

fn word(rng: &mut SplitMix64, onsets: &[char], syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| {
            [onsets[rng.below(onsets.len())], VOWELS[rng.below(VOWELS.len())]]
        })
        .collect()
}

fn type_marker(t: usize) -> String {
    TYPE_MARKERS.get(t).map_or_else(|| format!("kind{t}"), |m| m.to_string())
}

/// Coarse popularity band word (`floor(5·p)`, top band closed).
pub fn popularity_band(p: f64) -> &'static str {
    POPULARITY_BANDS[((p * 5.0).floor() as usize).min(4)]
}

/// Regenerates query `id` of a world with configuration `cfg`.
pub fn generate_query(cfg: &SimConfig, id: &str) -> SimQuery {
    let mut rng = SplitMix64::keyed(cfg.seed, &["query".into(), id.into()]);
    let query_type = rng.below(cfg.num_query_types);
    let (lo, hi) = cfg.popularity_range;
    let popularity = match cfg.popular_tail {
        Some(tail) if rng.next_f64() < tail.fraction => rng.uniform(tail.cut, hi),
        Some(tail) => rng.uniform(lo, tail.cut),
        None => rng.uniform(lo, hi),
    };
    let mut words = vec![type_marker(query_type), popularity_band(popularity).to_string()];
    let fillers = 1 + rng.below(3);
    words.extend((0..fillers).map(|_| FILLER[rng.below(FILLER.len())].to_string()));
    // the type marker leads, the band word lands anywhere among the fillers
    rng.shuffle(&mut words[1..]);

    let mut answers = vec![format!("{} {}", word(&mut rng, &GOLD_ONSETS, 3), word(&mut rng, &GOLD_ONSETS, 2))];
    if rng.bernoulli(0.5) {
        let alias = answers[0].split(' ').next().unwrap_or_default().to_string();
        answers.push(alias);
    }
    SimQuery { id: id.to_string(), text: words.join(" "), query_type, gold_answers: answers, popularity }
}

pub fn generate_world(config: &SimConfig) -> Result<SimWorld> {
    config.validate()?;
    let split = |s: Split, n: usize| -> Vec<SimQuery> {
        (0..n).map(|j| generate_query(config, &format!("{}-{j:05}", s.prefix()))).collect()
    };
    let mut rng = SplitMix64::keyed(config.seed, &["answers".into()]);
    let distractor_pool = (0..DISTRACTOR_POOL_SIZE)
        .map(|_| format!("{} {}", word(&mut rng, &DISTRACTOR_ONSETS, 3), word(&mut rng, &DISTRACTOR_ONSETS, 2)))
        .collect();
    Ok(SimWorld {
        config: config.clone(),
        train: split(Split::Train, config.n_train),
        test: split(Split::Test, config.n_test),
        distractor_pool,
    })
}

impl SimWorld {
    pub fn split(&self, s: Split) -> &[SimQuery] {
        match s {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn all_queries(&self) -> impl Iterator<Item = &SimQuery> {
        self.train.iter().chain(&self.test)
    }

    /// Same queries and answers, different correctness threshold for the
    /// mock generator.
    pub fn with_threshold_shift(&self, delta: f64) -> Self {
        let mut world = self.clone();
        world.config.correctness_threshold += delta;
        world
    }

    fn check_real(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.config.num_retrievers {
            return Err(Error::OutOfRange { what: "real retriever id", id: i, max: self.config.num_retrievers });
        }
        Ok(())
    }

    pub fn latent_quality(&self, q: &SimQuery, i: usize) -> Result<f64> {
        self.check_real(i)?;
        let skill = self
            .config
            .skill
            .get(q.query_type)
            .ok_or(Error::OutOfRange { what: "query type", id: q.query_type, max: self.config.num_query_types - 1 })?[i - 1];
        let mut rng = SplitMix64::keyed(self.config.seed, &["noise".into(), q.id.as_str().into(), i.into()]);
        Ok((skill + self.config.noise_sd * rng.normal()).clamp(0.0, 1.0))
    }

    /// Judge reply for retriever `i`, rendered as JSON and parsed back.
    pub fn mock_judge(&self, q: &SimQuery, i: usize) -> Result<QualityAssessment> {
        let quality = self.latent_quality(q, i)?;
        let mut rng = SplitMix64::keyed(self.config.seed, &["judge".into(), q.id.as_str().into(), i.into()]);
        let dims: [u8; 5] = std::array::from_fn(|_| judge_dimension(quality, JUDGE_JITTER_SD * rng.normal()));
        let raw = QualityAssessment::from_dimensions(dims)?.to_judge_json();
        Ok(parse_judge_json(&raw)?.assessment)
    }

    pub fn correctness_probability(&self, q: &SimQuery, i: usize) -> Result<f64> {
        if i == 0 {
            return Ok(q.popularity);
        }
        let quality = self.latent_quality(q, i)?;
        Ok(sigmoid(self.config.correctness_slope * (quality - self.config.correctness_threshold)))
    }

    pub fn mock_generate(&self, q: &SimQuery, i: usize) -> Result<GenerationOutcome> {
        if i > self.config.num_retrievers {
            return Err(Error::OutOfRange { what: "retriever id", id: i, max: self.config.num_retrievers });
        }
        let p = self.correctness_probability(q, i)?;
        let mut rng = SplitMix64::keyed(self.config.seed, &["generate".into(), q.id.as_str().into(), i.into()]);
        let answer = if rng.bernoulli(p) {
            q.gold_answers[0].clone()
        } else {
            self.distractor_pool[rng.below(self.distractor_pool.len())].clone()
        };
        let em = exact_match(&answer, &q.gold_answers)?;
        let f1 = f1_score(&answer, &q.gold_answers)?;
        Ok(GenerationOutcome { answer, em, f1 })
    }

    /// Judge and generator observations for every (query, retriever) pair of
    /// a split, null retriever included.
    pub fn collect_supervision(&self, s: Split) -> Result<Vec<SupervisionRecord>> {
        let k = self.config.num_retrievers;
        let mut out = Vec::with_capacity(self.split(s).len() * (k + 1));
        for q in self.split(s) {
            for i in 0..=k {
                let quality = if i == 0 { None } else { Some(self.mock_judge(q, i)?) };
                out.push(SupervisionRecord {
                    query_id: q.id.clone(),
                    retriever_id: i,
                    quality,
                    outcome: self.mock_generate(q, i)?,
                });
            }
        }
        Ok(out)
    }

    pub fn to_world_json(&self) -> Result<String> {
        let file = WorldFile {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            train_ids: self.train.iter().map(|q| q.id.clone()).collect(),
            test_ids: self.test.iter().map(|q| q.id.clone()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    /// Rebuilds a world from its `world.json` and checks that regenerating
    /// it reproduces the file byte for byte.
    pub fn from_world_json(raw: &str) -> Result<Self> {
        let file: WorldFile = serde_json::from_str(raw).map_err(|e| Error::schema(format!("world file: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Version { found: file.format_version, expected: FORMAT_VERSION });
        }
        let world = generate_world(&file.config).map_err(|e| Error::schema(format!("world config: {e}")))?;
        if world.to_world_json()? != raw {
            return Err(Error::schema("world file does not match its regenerated world"));
        }
        Ok(world)
    }
}

/// One judge dimension: `clamp(round(1 + 4·(Q + jitter)), 1, 5)`.
pub fn judge_dimension(quality: f64, jitter: f64) -> u8 {
    (1.0 + 4.0 * (quality + jitter)).round().clamp(1.0, 5.0) as u8
}
