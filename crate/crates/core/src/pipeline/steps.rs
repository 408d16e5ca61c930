//! Single operations, shared by pipeline steps and the command-line subcommands.

use std::collections::{BTreeMap, HashSet};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::report::{render, Format};
use crate::codec::DecodeError;
use crate::corpus::{read_ne_list, split_corpus, Corpus, CorpusError, ParallelCorpus, Source, TaggedSentence};
use crate::emtgen::{self, EmtConfig, EmtError, Strategy};
use crate::eval::{corpus_bleu, gzip_diversity, self_bleu, EvalError};
use crate::lexgen::{calibrate_switch_prob, generate_lex, LexConfig, LexError, Lexicon};
use crate::lm::{self, LmError, NgramLm};
use crate::metrics::{self, MetricsError};
use crate::ops::write_atomic;
use crate::tcs::checkpoint::encode_model;
use crate::tcs::curriculum::CorpusRegistry;
use crate::tcs::{read_checkpoint, run_curriculum, CurriculumConfig, Direction, TcsError};

#[derive(Debug, Error)]
pub enum StepError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Emt(#[from] EmtError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Tcs(#[from] TcsError),
    #[error("{path}: {source}")]
    Decode { path: String, source: DecodeError },
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, StepError>;

fn default_variants() -> usize {
    1
}
fn default_sample() -> usize {
    1000
}
fn default_order() -> usize {
    3
}
fn default_discount() -> f64 {
    lm::ngram::DEFAULT_DISCOUNT
}
fn default_min_count() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmtStrategy {
    Alignment,
    Translation,
}

/// One operation with its file arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepOp {
    /// Raw text (one sentence per line) or JSONL to a tagged JSONL corpus.
    Ingest {
        input: PathBuf,
        out: PathBuf,
        #[serde(default)]
        source: Source,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ne: Option<PathBuf>,
    },
    Split {
        corpus: PathBuf,
        fractions: [f64; 3],
        train: PathBuf,
        valid: PathBuf,
        test: PathBuf,
    },
    LexGen {
        corpus: PathBuf,
        lexicon: PathBuf,
        /// Switch probability; when absent it is calibrated from `reference`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<PathBuf>,
        #[serde(default = "default_variants")]
        variants: usize,
        out: PathBuf,
        /// Parallel JSONL pairing each input sentence with each of its variants.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs_out: Option<PathBuf>,
    },
    EmtGen {
        corpus: PathBuf,
        parses: PathBuf,
        strategy: EmtStrategy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        align: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        translations: Option<PathBuf>,
        #[serde(default = "default_variants")]
        max_switches: usize,
        #[serde(default = "default_variants")]
        variants: usize,
        out: PathBuf,
    },
    Metrics {
        corpus: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ne: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hist_csv: Option<PathBuf>,
        #[serde(default)]
        format: Format,
    },
    /// Corpus BLEU; each reference file is aligned with the candidates by position.
    Bleu {
        cand: PathBuf,
        refs: Vec<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default)]
        format: Format,
    },
    SelfBleu {
        corpus: PathBuf,
        #[serde(default = "default_sample")]
        sample: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default)]
        format: Format,
    },
    Diversity {
        corpus: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default)]
        format: Format,
    },
    LmTrain {
        corpus: PathBuf,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_discount")]
        discount: f64,
        #[serde(default = "default_min_count")]
        min_count: usize,
        out: PathBuf,
    },
    LmPpl {
        lm: PathBuf,
        corpus: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<PathBuf>,
        #[serde(default)]
        format: Format,
    },
    /// Writes `<stage>.bin` per stage, `model.bin` (the last stage) and `log.json` under `out`.
    TcsTrain {
        config: PathBuf,
        out: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
        /// Replaces the path of named corpora in the curriculum config.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        corpora: BTreeMap<String, PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_dae: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_bt: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_ce: Option<f64>,
    },
    TcsTranslate {
        ckpt: PathBuf,
        corpus: PathBuf,
        out: PathBuf,
        #[serde(default = "default_direction")]
        direction: Direction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_len: Option<usize>,
    },
}

fn default_direction() -> Direction {
    Direction::Src2Tgt
}

/// Files written by an operation and the report it produced when it had nowhere to write it.
#[derive(Debug, Clone, Default)]
pub struct StepOutput {
    pub written: Vec<PathBuf>,
    pub report: Option<String>,
}

impl StepOutput {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes).map_err(|source| StepError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn emit(&mut self, out: &Option<PathBuf>, text: String) -> Result<()> {
        match out {
            Some(p) => self.write(p, text.as_bytes()),
            None => {
                self.report = Some(text);
                Ok(())
            }
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| StepError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn curriculum_config(config: &Path, preset: &Option<String>) -> Result<CurriculumConfig> {
    let mut cfg = CurriculumConfig::read(config)?;
    if let Some(p) = preset {
        cfg.preset = Some(p.clone());
        cfg.model = None;
    }
    Ok(cfg)
}

fn check_stage_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        && name != "model"
        && name != "log";
    if ok {
        Ok(())
    } else {
        Err(StepError::Invalid(format!(
            "stage name {name:?} cannot be used as a checkpoint file name"
        )))
    }
}

impl StepOp {
    pub fn name(&self) -> &'static str {
        match self {
            StepOp::Ingest { .. } => "ingest",
            StepOp::Split { .. } => "split",
            StepOp::LexGen { .. } => "lex-gen",
            StepOp::EmtGen { .. } => "emt-gen",
            StepOp::Metrics { .. } => "metrics",
            StepOp::Bleu { .. } => "bleu",
            StepOp::SelfBleu { .. } => "self-bleu",
            StepOp::Diversity { .. } => "diversity",
            StepOp::LmTrain { .. } => "lm-train",
            StepOp::LmPpl { .. } => "lm-ppl",
            StepOp::TcsTrain { .. } => "tcs-train",
            StepOp::TcsTranslate { .. } => "tcs-translate",
        }
    }

    /// Mutable references to the paths the operation reads and the paths it
    /// writes. For `tcs-train` the output is the run directory.
    pub fn paths_mut(&mut self) -> (Vec<&mut PathBuf>, Vec<&mut PathBuf>) {
        fn opt(p: &mut Option<PathBuf>) -> Vec<&mut PathBuf> {
            p.as_mut().into_iter().collect()
        }
        match self {
            StepOp::Ingest { input, out, ne, .. } => {
                let mut i = vec![input];
                i.extend(opt(ne));
                (i, vec![out])
            }
            StepOp::Split {
                corpus,
                train,
                valid,
                test,
                ..
            } => (vec![corpus], vec![train, valid, test]),
            StepOp::LexGen {
                corpus,
                lexicon,
                reference,
                out,
                pairs_out,
                ..
            } => {
                let mut i = vec![corpus, lexicon];
                i.extend(opt(reference));
                let mut o = vec![out];
                o.extend(opt(pairs_out));
                (i, o)
            }
            StepOp::EmtGen {
                corpus,
                parses,
                hi,
                align,
                translations,
                out,
                ..
            } => {
                let mut i = vec![corpus, parses];
                i.extend(opt(hi));
                i.extend(opt(align));
                i.extend(opt(translations));
                (i, vec![out])
            }
            StepOp::Metrics {
                corpus,
                ne,
                out,
                hist_csv,
                ..
            } => {
                let mut i = vec![corpus];
                i.extend(opt(ne));
                let mut o = opt(out);
                o.extend(opt(hist_csv));
                (i, o)
            }
            StepOp::Bleu { cand, refs, out, .. } => {
                let mut i = vec![cand];
                i.extend(refs.iter_mut());
                (i, opt(out))
            }
            StepOp::SelfBleu { corpus, out, .. } | StepOp::Diversity { corpus, out, .. } => (vec![corpus], opt(out)),
            StepOp::LmTrain { corpus, out, .. } => (vec![corpus], vec![out]),
            StepOp::LmPpl { lm, corpus, out, .. } => (vec![lm, corpus], opt(out)),
            StepOp::TcsTrain {
                config, out, corpora, ..
            } => {
                let mut i = vec![config];
                i.extend(corpora.values_mut());
                (i, vec![out])
            }
            StepOp::TcsTranslate { ckpt, corpus, out, .. } => (vec![ckpt, corpus], vec![out]),
        }
    }

    /// Every file the operation reads, including corpora named inside a curriculum config.
    pub fn inputs(&self) -> Result<Vec<PathBuf>> {
        let mut me = self.clone();
        let mut out: Vec<PathBuf> = me.paths_mut().0.into_iter().map(|p| p.clone()).collect();
        if let StepOp::TcsTrain {
            config,
            corpora,
            preset,
            ..
        } = self
        {
            let cfg = curriculum_config(config, preset)?;
            let base = config.parent().unwrap_or(Path::new(""));
            for (name, r) in &cfg.corpora {
                if !corpora.contains_key(name) {
                    out.push(base.join(&r.path));
                }
            }
        }
        Ok(out)
    }

    /// Every file the operation writes.
    pub fn outputs(&self) -> Result<Vec<PathBuf>> {
        let mut me = self.clone();
        if let StepOp::TcsTrain {
            config, out, preset, ..
        } = self
        {
            let cfg = curriculum_config(config, preset)?;
            let mut files = Vec::new();
            for s in &cfg.stages {
                check_stage_name(&s.name)?;
                files.push(out.join(format!("{}.bin", s.name)));
            }
            files.push(out.join("model.bin"));
            files.push(out.join("log.json"));
            return Ok(files);
        }
        Ok(me.paths_mut().1.into_iter().map(|p| p.clone()).collect())
    }

    /// Runs the operation with all paths taken as given.
    pub fn execute(&self, seed: u64) -> Result<StepOutput> {
        let mut o = StepOutput::default();
        match self {
            StepOp::Ingest { input, out, source, ne } => {
                let text = read_text(input)?;
                let mut c = if input.extension().is_some_and(|e| e == "jsonl") {
                    Corpus::from_jsonl_str(stem(out), &text)?
                } else {
                    let prefix = stem(input);
                    let mut sentences = Vec::new();
                    for (n, line) in text.lines().enumerate() {
                        if line.trim().is_empty() {
                            continue;
                        }
                        sentences.push(TaggedSentence::from_text(format!("{prefix}-{}", n + 1), line, *source)?);
                    }
                    Corpus::new(stem(out), sentences)?
                };
                if let Some(ne) = ne {
                    c = c.mask_named_entities(&read_ne_list(ne)?);
                }
                o.write(out, c.to_jsonl().as_bytes())?;
            }
            StepOp::Split {
                corpus,
                fractions,
                train,
                valid,
                test,
            } => {
                let c = Corpus::read_jsonl(corpus)?;
                let (a, b, t) = split_corpus(&c, (fractions[0], fractions[1], fractions[2]), seed)?;
                o.write(train, a.to_jsonl().as_bytes())?;
                o.write(valid, b.to_jsonl().as_bytes())?;
                o.write(test, t.to_jsonl().as_bytes())?;
            }
            StepOp::LexGen {
                corpus,
                lexicon,
                p,
                reference,
                variants,
                out,
                pairs_out,
            } => {
                let c = Corpus::read_jsonl(corpus)?;
                let lex = Lexicon::read_tsv(lexicon)?;
                let p_switch = match (p, reference) {
                    (Some(p), None) => *p,
                    (None, Some(r)) => calibrate_switch_prob(&Corpus::read_jsonl(r)?)?,
                    _ => return Err(StepError::Invalid("lex-gen needs exactly one of p and reference".into())),
                };
                let cfg = LexConfig {
                    p_switch,
                    seed,
                    variants_per_sentence: *variants,
                };
                let mut generated = Vec::new();
                let mut pairs = Vec::new();
                for s in c.iter() {
                    for v in generate_lex(s, &lex, &cfg)? {
                        pairs.push((s.clone(), v.clone()));
                        generated.push(v);
                    }
                }
                o.write(out, Corpus::new(stem(out), generated)?.to_jsonl().as_bytes())?;
                if let Some(po) = pairs_out {
                    o.write(po, ParallelCorpus::new(pairs).to_jsonl().as_bytes())?;
                }
                o.report = Some(render(&json!({"p_switch": p_switch, "sentences": c.len()}), Format::Text));
            }
            StepOp::EmtGen {
                corpus,
                parses,
                strategy,
                hi,
                align,
                translations,
                max_switches,
                variants,
                out,
            } => {
                let en = Corpus::read_jsonl(corpus)?;
                let trees = emtgen::parse_treebank(&read_text(parses)?).map_err(EmtError::from)?;
                let parallel = match (hi, align) {
                    (Some(h), Some(a)) => Some((Corpus::read_jsonl(h)?, emtgen::parse_alignments(&read_text(a)?)?)),
                    (None, None) => None,
                    _ => return Err(StepError::Invalid("emt-gen needs both hi and align, or neither".into())),
                };
                let table = match translations {
                    Some(t) => Some(emtgen::parse_translations(&read_text(t)?)?),
                    None => None,
                };
                let bundles = emtgen::assemble_bundles(
                    &en,
                    trees,
                    parallel.as_ref().map(|(h, a)| (h, a.clone())),
                    table.as_ref(),
                )?;
                let cfg = EmtConfig {
                    max_switches: *max_switches,
                    variants: *variants,
                    seed,
                    ..EmtConfig::default()
                };
                let strategy = match strategy {
                    EmtStrategy::Alignment => Strategy::Alignment,
                    EmtStrategy::Translation => Strategy::Translation,
                };
                let (generated, stats) = emtgen::generate_emt_corpus(&bundles, &cfg, strategy)?;
                let generated = Corpus::new(stem(out), generated.into_sentences())?;
                o.write(out, generated.to_jsonl().as_bytes())?;
                o.report = Some(render(
                    &json!({
                        "sentences": stats.sentences,
                        "generated": stats.generated,
                        "no_switch_point": stats.no_switch_point,
                        "no_usable_variant": stats.no_usable_variant,
                    }),
                    Format::Text,
                ));
            }
            StepOp::Metrics {
                corpus,
                ne,
                out,
                hist_csv,
                format,
            } => {
                let c = Corpus::read_jsonl(corpus)?;
                let ne_list = match ne {
                    Some(p) => read_ne_list(p)?,
                    None => HashSet::new(),
                };
                let r = metrics::report(&c, &ne_list)?;
                if let Some(h) = hist_csv {
                    o.write(h, r.histograms_csv().as_bytes())?;
                }
                o.emit(out, render(&r, *format))?;
            }
            StepOp::Bleu {
                cand,
                refs,
                out,
                format,
            } => {
                let c = Corpus::read_jsonl(cand)?;
                if refs.is_empty() {
                    return Err(StepError::Invalid("bleu needs at least one reference file".into()));
                }
                let ref_corpora: Vec<Corpus> = refs.iter().map(Corpus::read_jsonl).collect::<std::result::Result<_, _>>()?;
                for (p, r) in refs.iter().zip(&ref_corpora) {
                    if r.len() != c.len() {
                        return Err(StepError::Invalid(format!(
                            "{}: {} references for {} candidates",
                            p.display(),
                            r.len(),
                            c.len()
                        )));
                    }
                }
                let per: Vec<Vec<TaggedSentence>> = (0..c.len())
                    .map(|i| ref_corpora.iter().map(|r| r.sentences()[i].clone()).collect())
                    .collect();
                o.emit(out, render(&corpus_bleu(&c, &per)?, *format))?;
            }
            StepOp::SelfBleu {
                corpus,
                sample,
                out,
                format,
            } => {
                let c = Corpus::read_jsonl(corpus)?;
                let v = self_bleu(&c, *sample, seed)?;
                o.emit(out, render(&json!({"self_bleu": v, "sample": (*sample).min(c.len()), "sentences": c.len()}), *format))?;
            }
            StepOp::Diversity { corpus, out, format } => {
                let c = Corpus::read_jsonl(corpus)?;
                o.emit(out, render(&gzip_diversity(&c), *format))?;
            }
            StepOp::LmTrain {
                corpus,
                order,
                discount,
                min_count,
                out,
            } => {
                let c = Corpus::read_jsonl(corpus)?;
                let lm = lm::train_ngram(&c, *order, *discount, *min_count)?;
                o.write(out, &lm.to_bytes())?;
            }
            StepOp::LmPpl {
                lm: lm_path,
                corpus,
                out,
                format,
            } => {
                let bytes = std::fs::read(lm_path).map_err(|source| StepError::Io {
                    path: lm_path.display().to_string(),
                    source,
                })?;
                let model = NgramLm::from_bytes(&bytes).map_err(|source| StepError::Decode {
                    path: lm_path.display().to_string(),
                    source,
                })?;
                let c = Corpus::read_jsonl(corpus)?;
                let r = json!({
                    "model": "interpolated Kneser-Ney n-gram (plumbing comparator, not a neural LM)",
                    "order": model.order(),
                    "discount": model.discount(),
                    "vocab_size": model.vocab_size(),
                    "sentences": c.len(),
                    "perplexity": lm::perplexity(&model, &c),
                });
                o.emit(out, render(&r, *format))?;
            }
            StepOp::TcsTrain {
                config,
                out,
                preset,
                corpora,
                w_dae,
                w_bt,
                w_ce,
            } => {
                let mut cfg = curriculum_config(config, preset)?;
                for (name, path) in corpora {
                    let entry = cfg.corpora.get_mut(name).ok_or_else(|| {
                        StepError::Invalid(format!("corpus override {name:?} is not named in {}", config.display()))
                    })?;
                    entry.path = path.to_string_lossy().into_owned();
                }
                for s in &mut cfg.stages {
                    check_stage_name(&s.name)?;
                    s.weights.dae = w_dae.unwrap_or(s.weights.dae);
                    s.weights.bt = w_bt.unwrap_or(s.weights.bt);
                    s.weights.ce = w_ce.unwrap_or(s.weights.ce);
                }
                let base = config.parent().unwrap_or(Path::new(""));
                let registry = CorpusRegistry::load(&cfg, base)?;
                let result = run_curriculum(&cfg, &registry, seed)?;
                for s in &result.stages {
                    o.write(&out.join(format!("{}.bin", s.name)), &encode_model(&s.model))?;
                }
                o.write(&out.join("model.bin"), &encode_model(result.final_model()))?;
                let stages: Vec<_> = result
                    .stages
                    .iter()
                    .map(|s| json!({"name": s.name, "best_epoch": s.best_epoch, "best_score": s.best_score}))
                    .collect();
                let log = json!({
                    "seed": seed,
                    "stages": stages,
                    "epochs": result.log().collect::<Vec<_>>(),
                    "test_bleu": result.test_bleu,
                });
                o.write(&out.join("log.json"), render(&log, Format::Json).as_bytes())?;
                let summary: BTreeMap<&str, f64> = result.stages.iter().map(|s| (s.name.as_str(), s.best_score)).collect();
                o.report = Some(render(&json!({"best_score": summary, "test_bleu": result.test_bleu}), Format::Text));
            }
            StepOp::TcsTranslate {
                ckpt,
                corpus,
                out,
                direction,
                max_len,
            } => {
                let model = read_checkpoint(ckpt)?;
                let c = Corpus::read_jsonl(corpus)?;
                let max_len = max_len.unwrap_or(model.config().max_len);
                let translated = c
                    .iter()
                    .map(|s| model.translate(s, *direction, max_len))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                o.write(out, Corpus::new(stem(out), translated)?.to_jsonl().as_bytes())?;
            }
        }
        Ok(o)
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}
