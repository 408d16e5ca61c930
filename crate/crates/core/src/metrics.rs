//! Corpus-level code-switching statistics.
//!
//! NE and OTHER tokens belong to neither language and are left out of both
//! mixing indices. Switch points are never counted across sentence boundaries.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, Lang, TaggedSentence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{0} is undefined for this corpus")]
    Undefined(&'static str),
    #[error("corpus is empty")]
    EmptyCorpus,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Per-sentence partial counts; merging is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MixCounts {
    pub hi: usize,
    pub en: usize,
    pub switches: usize,
    pub pairs: usize,
}

impl MixCounts {
    pub fn of_sentence(s: &TaggedSentence) -> MixCounts {
        let mut c = MixCounts::default();
        let mut prev: Option<Lang> = None;
        for lang in s.langs().filter(|l| l.is_lexical()) {
            match lang {
                Lang::Hi => c.hi += 1,
                _ => c.en += 1,
            }
            if let Some(p) = prev {
                c.pairs += 1;
                if p != lang {
                    c.switches += 1;
                }
            }
            prev = Some(lang);
        }
        c
    }

    pub fn of_corpus(c: &Corpus) -> MixCounts {
        c.sentences()
            .par_iter()
            .map(MixCounts::of_sentence)
            .reduce(MixCounts::default, MixCounts::merge)
    }

    pub fn merge(self, o: MixCounts) -> MixCounts {
        MixCounts {
            hi: self.hi + o.hi,
            en: self.en + o.en,
            switches: self.switches + o.switches,
            pairs: self.pairs + o.pairs,
        }
    }

    pub fn m_index(&self) -> Result<f64> {
        let total = self.hi + self.en;
        if total == 0 {
            return Err(MetricsError::Undefined("M-Index"));
        }
        let p_hi = self.hi as f64 / total as f64;
        let p_en = self.en as f64 / total as f64;
        let sum_sq = p_hi * p_hi + p_en * p_en;
        // k = 2 languages, so the (k - 1) factor is 1.
        Ok((1.0 - sum_sq) / sum_sq)
    }

    pub fn i_index(&self) -> Result<f64> {
        if self.pairs == 0 {
            return Err(MetricsError::Undefined("I-Index"));
        }
        Ok(self.switches as f64 / self.pairs as f64)
    }
}

pub fn m_index(c: &Corpus) -> Result<f64> {
    MixCounts::of_corpus(c).m_index()
}

pub fn i_index(c: &Corpus) -> Result<f64> {
    MixCounts::of_corpus(c).i_index()
}

/// Lengths of maximal runs of consecutive EN tokens.
pub fn en_span_histogram(c: &Corpus) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for s in c {
        let mut run = 0usize;
        for lang in s.langs().chain(std::iter::once(Lang::Other)) {
            if lang == Lang::En {
                run += 1;
            } else if run > 0 {
                *hist.entry(run).or_insert(0) += 1;
                run = 0;
            }
        }
    }
    hist
}

pub fn sentence_length_histogram(c: &Corpus) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for s in c {
        *hist.entry(s.len()).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub n_sentences: usize,
    pub n_tokens: usize,
    pub n_ne: usize,
    pub ne_fraction: f64,
    pub m_index: f64,
    pub i_index: f64,
    pub en_span_histogram: BTreeMap<usize, usize>,
    pub sentence_length_histogram: BTreeMap<usize, usize>,
}

impl MetricReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, k: &str, v: String| out.push_str(&format!("{k:<20}{v}\n"));
        row(&mut out, "# Sentences", self.n_sentences.to_string());
        row(&mut out, "# Tokens", self.n_tokens.to_string());
        row(&mut out, "# NEs", self.n_ne.to_string());
        row(&mut out, "Fraction of NEs", format!("{:.4}", self.ne_fraction));
        row(&mut out, "M-Index", format!("{:.4}", self.m_index));
        row(&mut out, "I-Index", format!("{:.4}", self.i_index));
        out
    }

    /// Both histograms as `kind,length,count` rows.
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("histogram,length,count\n");
        for (k, v) in &self.sentence_length_histogram {
            out.push_str(&format!("sentence_length,{k},{v}\n"));
        }
        for (k, v) in &self.en_span_histogram {
            out.push_str(&format!("en_span,{k},{v}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!(
            "n_sentences,n_tokens,n_ne,ne_fraction,m_index,i_index\n{},{},{},{},{},{}\n",
            self.n_sentences, self.n_tokens, self.n_ne, self.ne_fraction, self.m_index, self.i_index
        )
    }
}

/// Full statistics report after masking the listed named entities.
pub fn report(c: &Corpus, ne_list: &HashSet<String>) -> Result<MetricReport> {
    if c.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let masked = c.mask_named_entities(ne_list);
    let counts = MixCounts::of_corpus(&masked);
    let n_tokens = masked.n_tokens();
    let n_ne = masked
        .iter()
        .flat_map(TaggedSentence::langs)
        .filter(|l| *l == Lang::Ne)
        .count();
    Ok(MetricReport {
        n_sentences: masked.len(),
        n_tokens,
        n_ne,
        ne_fraction: n_ne as f64 / n_tokens as f64,
        m_index: counts.m_index()?,
        i_index: counts.i_index()?,
        en_span_histogram: en_span_histogram(&masked),
        sentence_length_histogram: sentence_length_histogram(&masked),
    })
}
