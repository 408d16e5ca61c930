//! Multi-stage training driven by a declarative JSON configuration.
//!
//! ```json
//! {
//!   "corpora": {
//!     "hi_cs": {"path": "hi_cs.jsonl", "kind": "parallel"},
//!     "hi_mono": {"path": "hi.jsonl", "kind": "mono"}
//!   },
//!   "preset": "desk",
//!   "valid": "hi_cs_valid",
//!   "stages": [
//!     {"name": "A", "mode": "SUPERVISED", "datasets": {"parallel": ["hi_cs"]}, "epochs": 5, "batch_size": 16},
//!     {"name": "D", "mode": "UNSUPERVISED", "datasets": {"src": ["hi_mono"], "tgt": ["cs_mono"]},
//!      "epochs": 1, "batch_size": 16, "init_from": "A"}
//!   ]
//! }
//! ```
//!
//! Corpus paths are relative to the configuration file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path as FsPath, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{Direction, ModelConfig, Side, TcsModel, Vocab};
use super::noise::NoiseConfig;
use super::train::{bt_batches, ce_batches, dae_batch, objective, Adam, LossWeights, PathBatch};
use super::{Result, TcsError};
use crate::corpus::{Corpus, ParallelCorpus, TaggedSentence};
use crate::eval::corpus_bleu_tokens;
use crate::rng::{stream_rng, stream_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    Supervised,
    Unsupervised,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Parallel,
    Mono,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRef {
    pub path: String,
    pub kind: CorpusKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageData {
    #[serde(default)]
    pub parallel: Vec<String>,
    #[serde(default)]
    pub src: Vec<String>,
    #[serde(default)]
    pub tgt: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumStage {
    pub name: String,
    pub mode: Mode,
    pub datasets: StageData,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default, alias = "learning_rate", skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_from: Option<String>,
    /// Parallel corpus used to pick the best epoch; overrides the config-wide one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<String>,
    #[serde(default)]
    pub weights: LossWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    #[serde(default)]
    pub corpora: BTreeMap<String, CorpusRef>,
    /// `desk` or `paper`; ignored when `model` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<String>,
    /// Parallel corpus scored after the last stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    pub stages: Vec<CurriculumStage>,
}

/// Round-trip validation is capped at this many sentences when no validation corpus is set.
const ROUND_TRIP_SAMPLE: usize = 100;

impl CurriculumConfig {
    pub fn from_json_str(text: &str) -> Result<CurriculumConfig> {
        serde_json::from_str(text).map_err(|e| TcsError::Config(e.to_string()))
    }

    pub fn read(path: impl AsRef<FsPath>) -> Result<CurriculumConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TcsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        CurriculumConfig::from_json_str(&text)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        if let Some(m) = self.model {
            return Ok(m);
        }
        let name = self.preset.as_deref().unwrap_or("desk");
        ModelConfig::preset(name).ok_or_else(|| TcsError::Config(format!("unknown preset {name:?}")))
    }

    /// Learning rate for stages that do not set one.
    pub fn default_lr(&self) -> f64 {
        match self.preset.as_deref() {
            Some("paper") => 1e-4,
            _ => 1e-3,
        }
    }

    /// Checks stage names, corpus references and `init_from` order against `registry`.
    pub fn validate(&self, registry: &CorpusRegistry) -> Result<()> {
        self.model_config()?.validate()?;
        self.noise.validate()?;
        if self.stages.is_empty() {
            return Err(TcsError::Config("no stages".into()));
        }
        let err = |m: String| Err(TcsError::Config(m));
        for name in self.valid.iter().chain(&self.test) {
            registry.parallel(name)?;
        }
        let mut seen = BTreeSet::new();
        for st in &self.stages {
            let n = &st.name;
            if let Some(from) = &st.init_from {
                if !seen.contains(from.as_str()) {
                    return err(format!("stage {n}: init_from {from:?} is not an earlier stage"));
                }
            }
            if !seen.insert(n.as_str()) {
                return err(format!("duplicate stage name {n:?}"));
            }
            if st.epochs == 0 || st.batch_size == 0 {
                return err(format!("stage {n}: epochs and batch_size must be positive"));
            }
            if let Some(lr) = st.lr {
                if !(lr.is_finite() && lr > 0.0) {
                    return err(format!("stage {n}: learning rate must be positive"));
                }
            }
            let w = st.weights;
            if [w.dae, w.bt, w.ce].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return err(format!("stage {n}: loss weights must be non-negative"));
            }
            for c in &st.datasets.parallel {
                registry.parallel(c).map_err(|e| TcsError::Config(format!("stage {n}: {e}")))?;
            }
            for c in st.datasets.src.iter().chain(&st.datasets.tgt) {
                registry.mono(c).map_err(|e| TcsError::Config(format!("stage {n}: {e}")))?;
            }
            if let Some(v) = &st.valid {
                registry.parallel(v).map_err(|e| TcsError::Config(format!("stage {n}: {e}")))?;
            }
            match st.mode {
                Mode::Supervised if st.datasets.parallel.is_empty() => {
                    return err(format!("stage {n}: supervised stages need parallel data"));
                }
                Mode::Unsupervised if st.datasets.src.is_empty() || st.datasets.tgt.is_empty() => {
                    return err(format!("stage {n}: unsupervised stages need src and tgt corpora"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Named corpora available to a curriculum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusRegistry {
    parallel: BTreeMap<String, ParallelCorpus>,
    mono: BTreeMap<String, Corpus>,
}

impl CorpusRegistry {
    pub fn new() -> CorpusRegistry {
        CorpusRegistry::default()
    }

    pub fn insert_parallel(&mut self, name: impl Into<String>, c: ParallelCorpus) {
        self.parallel.insert(name.into(), c);
    }

    pub fn insert_mono(&mut self, name: impl Into<String>, c: Corpus) {
        self.mono.insert(name.into(), c);
    }

    pub fn parallel(&self, name: &str) -> Result<&ParallelCorpus> {
        self.parallel
            .get(name)
            .ok_or_else(|| TcsError::Config(format!("no parallel corpus named {name:?}")))
    }

    pub fn mono(&self, name: &str) -> Result<&Corpus> {
        self.mono
            .get(name)
            .ok_or_else(|| TcsError::Config(format!("no monolingual corpus named {name:?}")))
    }

    /// Loads every corpus listed in `cfg`, resolving relative paths against `base`.
    pub fn load(cfg: &CurriculumConfig, base: impl AsRef<FsPath>) -> Result<CorpusRegistry> {
        let mut reg = CorpusRegistry::new();
        for (name, r) in &cfg.corpora {
            let path: PathBuf = base.as_ref().join(&r.path);
            if !path.is_file() {
                return Err(TcsError::Config(format!("corpus {name:?}: missing file {}", path.display())));
            }
            match r.kind {
                CorpusKind::Parallel => reg.insert_parallel(name, ParallelCorpus::read_jsonl(&path)?),
                CorpusKind::Mono => reg.insert_mono(name, Corpus::read_jsonl(&path)?),
            }
        }
        Ok(reg)
    }

    /// Shared vocabulary over every registered sentence.
    pub fn vocab(&self) -> Vocab {
        let mut corpora: Vec<Corpus> = Vec::new();
        for p in self.parallel.values() {
            corpora.push(p.sources());
            corpora.push(p.targets());
        }
        corpora.extend(self.mono.values().cloned());
        Vocab::from_corpora(&corpora)
    }

    /// A copy in which parallel corpus `name` keeps only its first `n` pairs.
    pub fn truncated(&self, name: &str, n: usize) -> Result<CorpusRegistry> {
        let mut out = self.clone();
        let c = self.parallel(name)?.take(n);
        out.parallel.insert(name.to_string(), c);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub stage: String,
    pub epoch: usize,
    pub loss: f64,
    /// `bleu` for supervised stages, `round_trip_bleu` for unsupervised ones.
    pub metric: &'static str,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct StageResult {
    pub name: String,
    pub best_epoch: usize,
    pub best_score: f64,
    /// Parameters from the best epoch.
    pub model: TcsModel,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Clone)]
pub struct CurriculumResult {
    pub stages: Vec<StageResult>,
    /// Test BLEU of the last stage's best model, when a test corpus is configured.
    pub test_bleu: Option<f64>,
}

impl CurriculumResult {
    pub fn final_model(&self) -> &TcsModel {
        &self.stages.last().expect("at least one stage").model
    }

    pub fn log(&self) -> impl Iterator<Item = &EpochLog> {
        self.stages.iter().flat_map(|s| s.log.iter())
    }
}

fn sentence_ids(m: &TcsModel, s: &TaggedSentence) -> Vec<usize> {
    m.vocab().encode(s)
}

/// Corpus BLEU of greedy translations of `pairs` in `direction` against the other side.
pub fn evaluate_bleu(m: &TcsModel, pairs: &[(TaggedSentence, TaggedSentence)], direction: Direction) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let max_len = m.config().max_len;
    let (hyps, refs): (Vec<Vec<String>>, Vec<Vec<String>>) = pairs
        .iter()
        .map(|(s, t)| {
            let (input, reference) = match direction {
                Direction::Src2Tgt => (s, t),
                Direction::Tgt2Src => (t, s),
            };
            let ids = m.greedy_ids(&sentence_ids(m, input), direction.path(), max_len);
            let hyp = ids.iter().map(|&i| m.vocab().token(i).to_string()).collect();
            (hyp, reference.surfaces().map(str::to_string).collect())
        })
        .unzip();
    corpus_bleu_tokens(&hyps, &refs).map(|b| b.score).unwrap_or(0.0)
}

/// BLEU of `TGT → SRC → TGT` reconstructions against the inputs.
pub fn round_trip_bleu(m: &TcsModel, sentences: &[TaggedSentence]) -> f64 {
    if sentences.is_empty() {
        return 0.0;
    }
    let max_len = m.config().max_len;
    let (hyps, refs): (Vec<Vec<String>>, Vec<Vec<String>>) = sentences
        .iter()
        .map(|s| {
            let mid = m.greedy_ids(&sentence_ids(m, s), Direction::Tgt2Src.path(), max_len);
            let back = m.greedy_ids(&mid, Direction::Src2Tgt.path(), max_len);
            let hyp = back.iter().map(|&i| m.vocab().token(i).to_string()).collect();
            (hyp, s.surfaces().map(str::to_string).collect())
        })
        .unzip();
    corpus_bleu_tokens(&hyps, &refs).map(|b| b.score).unwrap_or(0.0)
}

fn parallel_union(registry: &CorpusRegistry, names: &[String]) -> Result<Vec<(TaggedSentence, TaggedSentence)>> {
    let mut out = Vec::new();
    for n in names {
        out.extend(registry.parallel(n)?.pairs().iter().cloned());
    }
    Ok(out)
}

fn mono_union(registry: &CorpusRegistry, names: &[String]) -> Result<Vec<TaggedSentence>> {
    let mut out = Vec::new();
    for n in names {
        out.extend(registry.mono(n)?.iter().cloned());
    }
    Ok(out)
}

/// `len` items starting at `start`, wrapping around `items`.
fn cyclic<T: Clone>(items: &[T], start: usize, len: usize) -> Vec<T> {
    (0..len.min(items.len())).map(|k| items[(start + k) % items.len()].clone()).collect()
}

fn run_stage(
    cfg: &CurriculumConfig,
    st: &CurriculumStage,
    registry: &CorpusRegistry,
    mut model: TcsModel,
    seed: u64,
) -> Result<StageResult> {
    let mut opt = Adam::new(st.lr.unwrap_or_else(|| cfg.default_lr()));
    let w = st.weights;
    let valid_pairs = match st.valid.as_ref().or(cfg.valid.as_ref()) {
        Some(v) => Some(registry.parallel(v)?.pairs().to_vec()),
        None => None,
    };
    let (pairs, src, tgt) = match st.mode {
        Mode::Supervised => (parallel_union(registry, &st.datasets.parallel)?, Vec::new(), Vec::new()),
        Mode::Unsupervised => (
            Vec::new(),
            mono_union(registry, &st.datasets.src)?,
            mono_union(registry, &st.datasets.tgt)?,
        ),
    };
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, TcsModel)> = None;
    let mut step: u64 = 0;
    for epoch in 0..st.epochs {
        let mut rng = stream_rng(seed, &format!("order:{}", st.name), epoch as u64);
        let mut losses = Vec::new();
        match st.mode {
            Mode::Supervised => {
                let mut order = pairs.clone();
                order.shuffle(&mut rng);
                for chunk in order.chunks(st.batch_size) {
                    let noise = cfg.noise.with_seed(stream_seed(seed, &format!("noise:{}", st.name), step));
                    let mut batches: Vec<PathBatch> = Vec::new();
                    if w.ce > 0.0 {
                        batches.extend(ce_batches(&model, chunk).map(|b| b.weighted(w.ce)));
                    }
                    if w.dae > 0.0 {
                        let s: Vec<_> = chunk.iter().map(|p| p.0.clone()).collect();
                        let t: Vec<_> = chunk.iter().map(|p| p.1.clone()).collect();
                        batches.push(dae_batch(&model, &s, Side::Src, &noise).weighted(w.dae));
                        batches.push(dae_batch(&model, &t, Side::Tgt, &noise).weighted(w.dae));
                    }
                    let o = objective(&model, &batches);
                    opt.step(&mut model, &o.grads);
                    losses.push(o.loss);
                    step += 1;
                }
            }
            Mode::Unsupervised => {
                let mut s_order = src.clone();
                let mut t_order = tgt.clone();
                s_order.shuffle(&mut rng);
                t_order.shuffle(&mut rng);
                let n_steps = s_order.len().max(t_order.len()).div_ceil(st.batch_size);
                for k in 0..n_steps {
                    let noise = cfg.noise.with_seed(stream_seed(seed, &format!("noise:{}", st.name), step));
                    let s = cyclic(&s_order, k * st.batch_size, st.batch_size);
                    let t = cyclic(&t_order, k * st.batch_size, st.batch_size);
                    let mut batches: Vec<PathBatch> = Vec::new();
                    if w.bt > 0.0 {
                        batches.extend(bt_batches(&mut model, &s, &t).map(|b| b.weighted(w.bt)));
                    }
                    if w.dae > 0.0 {
                        batches.push(dae_batch(&model, &s, Side::Src, &noise).weighted(w.dae));
                        batches.push(dae_batch(&model, &t, Side::Tgt, &noise).weighted(w.dae));
                    }
                    let o = objective(&model, &batches);
                    opt.step(&mut model, &o.grads);
                    losses.push(o.loss);
                    step += 1;
                }
            }
        }
        let (metric, score) = match st.mode {
            Mode::Supervised => {
                let vp = valid_pairs.as_deref().unwrap_or(&pairs);
                ("bleu", evaluate_bleu(&model, vp, Direction::Src2Tgt))
            }
            Mode::Unsupervised => {
                let inputs: Vec<TaggedSentence> = match &valid_pairs {
                    Some(vp) => vp.iter().map(|p| p.1.clone()).collect(),
                    None => tgt.iter().take(ROUND_TRIP_SAMPLE).cloned().collect(),
                };
                ("round_trip_bleu", round_trip_bleu(&model, &inputs))
            }
        };
        let loss = if losses.is_empty() {
            0.0
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        log.push(EpochLog {
            stage: st.name.clone(),
            epoch,
            loss,
            metric,
            score,
        });
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (best_score, best_epoch, model) = best.expect("at least one epoch");
    Ok(StageResult {
        name: st.name.clone(),
        best_epoch,
        best_score,
        model,
        log,
    })
}

/// Runs every stage in order. The configuration is validated against `registry` before any
/// training starts. Stages without `init_from` start from the same seeded initialization.
pub fn run_curriculum(cfg: &CurriculumConfig, registry: &CorpusRegistry, seed: u64) -> Result<CurriculumResult> {
    cfg.validate(registry)?;
    let vocab = registry.vocab();
    let fresh = TcsModel::new(vocab, cfg.model_config()?, stream_seed(seed, "init", 0))?;
    let mut done: Vec<StageResult> = Vec::new();
    for st in &cfg.stages {
        let start = match &st.init_from {
            Some(from) => done
                .iter()
                .find(|s| &s.name == from)
                .expect("validated init_from")
                .model
                .clone(),
            None => fresh.clone(),
        };
        done.push(run_stage(cfg, st, registry, start, stream_seed(seed, &st.name, 0))?);
    }
    let test_bleu = match &cfg.test {
        Some(t) => {
            let pairs = registry.parallel(t)?.pairs().to_vec();
            Some(evaluate_bleu(&done.last().expect("validated").model, &pairs, Direction::Src2Tgt))
        }
        None => None,
    };
    Ok(CurriculumResult { stages: done, test_bleu })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub pairs: usize,
    pub bleu: f64,
}

/// Re-runs the curriculum with parallel corpus `corpus` cut to each size in `counts`.
/// Each point reports test BLEU, or the last stage's best validation score without a test set.
pub fn parallel_data_sweep(
    cfg: &CurriculumConfig,
    registry: &CorpusRegistry,
    corpus: &str,
    counts: &[usize],
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    counts
        .iter()
        .map(|&n| {
            let reg = registry.truncated(corpus, n)?;
            let r = run_curriculum(cfg, &reg, seed)?;
            let bleu = r.test_bleu.unwrap_or(r.stages.last().expect("validated").best_score);
            Ok(SweepPoint { pairs: n, bleu })
        })
        .collect()
}

/// Whether a sweep's scores trend upward: the last point beats the first and no later point
/// falls below the first.
pub fn is_upward_trend(points: &[SweepPoint]) -> bool {
    match (points.first(), points.last()) {
        (Some(a), Some(b)) if points.len() >= 2 => b.bleu > a.bleu && points.iter().all(|p| p.bleu >= a.bleu),
        _ => false,
    }
}
