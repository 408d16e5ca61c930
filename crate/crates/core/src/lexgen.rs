//! Lexicon-driven synthetic code-switching.
//!
//! Each Hindi token that has a lexicon entry is swapped for one of its English
//! candidates with probability `p_switch`. The probability is usually
//! calibrated to the English share of a reference code-switched corpus.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Lang, Source, TaggedSentence, Token, NE_MASK};
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum LexError {
    #[error("switch probability is undefined: reference corpus has no HI or EN tokens")]
    Undefined,
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("invalid LEX config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, LexError>;

/// Hindi surface to ordered English candidates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new() -> Lexicon {
        Lexicon::default()
    }

    /// Adds candidates for `hindi`, appending to any existing entry.
    pub fn insert(&mut self, hindi: &str, candidates: &[&str]) -> Result<()> {
        let bad = |message: String| LexError::Lexicon { line: 0, message };
        if hindi.is_empty() || hindi.chars().any(char::is_whitespace) {
            return Err(bad(format!("key {hindi:?} is not a single token")));
        }
        if candidates.is_empty() {
            return Err(bad(format!("no candidates for {hindi:?}")));
        }
        let entry = self.entries.entry(hindi.to_string()).or_default();
        for c in candidates {
            if c.is_empty() || c.chars().any(char::is_whitespace) || *c == NE_MASK {
                return Err(bad(format!("candidate {c:?} for {hindi:?} is not a valid token")));
            }
            if !entry.iter().any(|e| e == c) {
                entry.push(c.to_string());
            }
        }
        Ok(())
    }

    pub fn get(&self, hindi: &str) -> Option<&[String]> {
        self.entries.get(hindi).map(Vec::as_slice)
    }

    pub fn contains(&self, hindi: &str) -> bool {
        self.entries.contains_key(hindi)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Parses `hindi<TAB>english1|english2|...` lines. Blank lines are skipped.
    pub fn from_tsv(text: &str) -> Result<Lexicon> {
        let mut lex = Lexicon::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = line.split_once('\t').ok_or_else(|| LexError::Lexicon {
                line: line_no,
                message: "expected hindi<TAB>candidates".into(),
            })?;
            let candidates: Vec<&str> = rest.split('|').map(str::trim).collect();
            lex.insert(key.trim(), &candidates).map_err(|e| match e {
                LexError::Lexicon { message, .. } => LexError::Lexicon { line: line_no, message },
                other => other,
            })?;
        }
        Ok(lex)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::from_tsv(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('\t');
            out.push_str(&v.join("|"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexConfig {
    pub p_switch: f64,
    pub seed: u64,
    pub variants_per_sentence: usize,
}

impl LexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_switch) {
            return Err(LexError::Config(format!("p_switch {} outside [0, 1]", self.p_switch)));
        }
        if self.variants_per_sentence == 0 {
            return Err(LexError::Config("variants_per_sentence must be positive".into()));
        }
        Ok(())
    }
}

/// English share of the HI/EN tokens in `reference`.
pub fn calibrate_switch_prob(reference: &Corpus) -> Result<f64> {
    let (mut en, mut hi) = (0usize, 0usize);
    for lang in reference.iter().flat_map(TaggedSentence::langs) {
        match lang {
            Lang::En => en += 1,
            Lang::Hi => hi += 1,
            _ => {}
        }
    }
    if en + hi == 0 {
        return Err(LexError::Undefined);
    }
    Ok(en as f64 / (en + hi) as f64)
}

/// Generates `cfg.variants_per_sentence` LEX variants of `s`.
pub fn generate_lex(s: &TaggedSentence, lex: &Lexicon, cfg: &LexConfig) -> Result<Vec<TaggedSentence>> {
    cfg.validate()?;
    (0..cfg.variants_per_sentence)
        .map(|v| {
            let mut rng = stream_rng(cfg.seed, s.id(), v as u64);
            let tokens = s
                .tokens()
                .iter()
                .map(|t| match lex.get(t.surface()) {
                    Some(cands) if t.lang() == Lang::Hi => {
                        if rng.random::<f64>() < cfg.p_switch {
                            let pick = &cands[rng.random_range(0..cands.len())];
                            Token::new(pick.as_str(), Lang::En)
                        } else {
                            Ok(t.clone())
                        }
                    }
                    _ => Ok(t.clone()),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(TaggedSentence::new(format!("{}.lex{v}", s.id()), tokens, Source::Lex)?)
        })
        .collect()
}

/// Applies [`generate_lex`] to every sentence; output keeps corpus order.
pub fn generate_lex_corpus(c: &Corpus, lex: &Lexicon, cfg: &LexConfig) -> Result<Corpus> {
    cfg.validate()?;
    let per: Vec<Vec<TaggedSentence>> = c
        .sentences()
        .par_iter()
        .map(|s| generate_lex(s, lex, cfg))
        .collect::<Result<_>>()?;
    Ok(Corpus::new(format!("{}-lex", c.name()), per.into_iter().flatten().collect())?)
}
