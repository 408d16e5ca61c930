//! Corpus BLEU, smoothed sentence BLEU and self-BLEU.

use std::collections::HashMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::{EvalError, Result};
use crate::corpus::{Corpus, TaggedSentence};

pub const MAX_ORDER: usize = 4;

/// Count floor used by smoothed sentence BLEU.
pub const SMOOTHING_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BleuScore {
    /// In `[0, 100]`.
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuScore {
    pub fn to_text(&self) -> String {
        format!(
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, hyp_len={}, ref_len={})",
            self.score,
            100.0 * self.precisions[0],
            100.0 * self.precisions[1],
            100.0 * self.precisions[2],
            100.0 * self.precisions[3],
            self.brevity_penalty,
            self.candidate_len,
            self.reference_len
        )
    }
}

/// Sufficient statistics; summing them over sentences gives corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn merge(mut self, o: BleuStats) -> BleuStats {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.candidate_len += o.candidate_len;
        self.reference_len += o.reference_len;
        self
    }

    fn brevity_penalty(&self) -> f64 {
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        if self.candidate_len >= self.reference_len {
            1.0
        } else if self.candidate_len == 0 {
            0.0
        } else {
            (1.0 - r / c).exp()
        }
    }

    /// Unsmoothed BLEU: zero if any order has no match.
    pub fn score(&self) -> BleuScore {
        let mut precisions = [0.0; MAX_ORDER];
        for n in 0..MAX_ORDER {
            if self.totals[n] > 0 {
                precisions[n] = self.matches[n] as f64 / self.totals[n] as f64;
            }
        }
        let bp = self.brevity_penalty();
        let score = if precisions.iter().all(|p| *p > 0.0) {
            let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            100.0 * bp * mean_log.exp()
        } else {
            0.0
        };
        BleuScore {
            score: score.min(100.0),
            precisions,
            brevity_penalty: bp,
            candidate_len: self.candidate_len,
            reference_len: self.reference_len,
        }
    }

    /// Floor-smoothed BLEU over orders `1..=min(4, candidate length)`.
    pub fn smoothed_score(&self) -> f64 {
        let orders = self.candidate_len.min(MAX_ORDER);
        if orders == 0 {
            return 0.0;
        }
        let mean_log = (0..orders)
            .map(|n| {
                let m = (self.matches[n] as f64).max(SMOOTHING_FLOOR);
                (m / self.totals[n] as f64).ln()
            })
            .sum::<f64>()
            / orders as f64;
        (100.0 * self.brevity_penalty() * mean_log.exp()).min(100.0)
    }
}

type Counts<'a> = HashMap<&'a [&'a str], usize>;

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> Counts<'a> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Closest reference length; ties go to the shorter reference.
fn closest_ref_len(cand_len: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens
        .min_by_key(|&r| (r.abs_diff(cand_len), r))
        .unwrap_or(0)
}

pub fn sentence_stats(candidate: &[&str], references: &[Vec<&str>]) -> BleuStats {
    let mut stats = BleuStats {
        candidate_len: candidate.len(),
        reference_len: closest_ref_len(candidate.len(), references.iter().map(Vec::len)),
        ..BleuStats::default()
    };
    for n in 1..=MAX_ORDER {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: Counts<'_> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        stats.totals[n - 1] = candidate.len().saturating_sub(n - 1);
        stats.matches[n - 1] = cand
            .iter()
            .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

fn words(s: &TaggedSentence) -> Vec<&str> {
    s.surfaces().collect()
}

/// Standard 4-gram corpus BLEU with closest-length brevity penalty.
pub fn corpus_bleu(candidates: &Corpus, references: &[Vec<TaggedSentence>]) -> Result<BleuScore> {
    if candidates.is_empty() || candidates.len() != references.len() {
        return Err(EvalError::SizeMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(EvalError::NoReference(i));
    }
    let stats = candidates
        .sentences()
        .par_iter()
        .zip(references.par_iter())
        .map(|(c, refs)| {
            let refs: Vec<Vec<&str>> = refs.iter().map(words).collect();
            sentence_stats(&words(c), &refs)
        })
        .reduce(BleuStats::default, BleuStats::merge);
    Ok(stats.score())
}

/// Corpus BLEU on plain token sequences, one reference per candidate.
pub fn corpus_bleu_tokens<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>]) -> Result<BleuScore> {
    if candidates.is_empty() || candidates.len() != references.len() {
        return Err(EvalError::SizeMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    let stats = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| {
            let c: Vec<&str> = c.iter().map(AsRef::as_ref).collect();
            let r: Vec<&str> = r.iter().map(AsRef::as_ref).collect();
            sentence_stats(&c, &[r])
        })
        .fold(BleuStats::default(), BleuStats::merge);
    Ok(stats.score())
}

/// Smoothed sentence BLEU of one candidate against its references.
pub fn sentence_bleu(candidate: &TaggedSentence, references: &[&TaggedSentence]) -> f64 {
    let refs: Vec<Vec<&str>> = references.iter().map(|r| words(r)).collect();
    sentence_stats(&words(candidate), &refs).smoothed_score()
}

/// Highest and second-highest count of one n-gram across sentences.
#[derive(Clone, Copy)]
struct Top2 {
    best: usize,
    best_at: usize,
    second: usize,
}

impl Top2 {
    fn push(&mut self, count: usize, at: usize) {
        if count > self.best {
            self.second = self.best;
            self.best = count;
            self.best_at = at;
        } else if count > self.second {
            self.second = count;
        }
    }

    fn excluding(&self, at: usize) -> usize {
        if self.best_at == at {
            self.second
        } else {
            self.best
        }
    }
}

/// Mean smoothed sentence BLEU of sampled sentences against all the others.
/// `sample == 0` or `sample >= len` uses every sentence.
pub fn self_bleu(c: &Corpus, sample: usize, seed: u64) -> Result<f64> {
    let n = c.len();
    if n < 2 {
        return Err(EvalError::Undefined("self-BLEU needs at least two sentences"));
    }
    let toks: Vec<Vec<&str>> = c.iter().map(words).collect();
    let lens: Vec<usize> = toks.iter().map(Vec::len).collect();
    let mut tops: Vec<HashMap<&[&str], Top2>> = vec![HashMap::new(); MAX_ORDER];
    for (j, t) in toks.iter().enumerate() {
        for order in 1..=MAX_ORDER {
            for (g, cnt) in ngram_counts(t, order) {
                tops[order - 1]
                    .entry(g)
                    .or_insert(Top2 { best: 0, best_at: usize::MAX, second: 0 })
                    .push(cnt, j);
            }
        }
    }
    let chosen: Vec<usize> = if sample == 0 || sample >= n {
        (0..n).collect()
    } else {
        let mut v = index::sample(&mut crate::rng::seeded(seed), n, sample).into_vec();
        v.sort_unstable();
        v
    };
    let scores: Vec<f64> = chosen
        .par_iter()
        .map(|&i| {
            let cand = &toks[i];
            let mut stats = BleuStats {
                candidate_len: cand.len(),
                reference_len: closest_ref_len(
                    cand.len(),
                    lens.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| *l),
                ),
                ..BleuStats::default()
            };
            for order in 1..=MAX_ORDER {
                stats.totals[order - 1] = cand.len().saturating_sub(order - 1);
                stats.matches[order - 1] = ngram_counts(cand, order)
                    .iter()
                    .map(|(g, cnt)| (*cnt).min(tops[order - 1][g].excluding(i)))
                    .sum();
            }
            stats.smoothed_score()
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
