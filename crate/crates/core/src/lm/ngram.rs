//! Interpolated Kneser-Ney n-gram language model.
//!
//! This is an evaluation harness: a count-based comparator for perplexity
//! experiments, not a neural LM.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::codec::{DecodeError, Reader, Writer};
use crate::corpus::Corpus;

use super::{LmError, Result};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const UNK_ID: u32 = 0;
const EOS_ID: u32 = 1;
const BOS_ID: u32 = 2;
const N_SPECIAL: usize = 3;

pub const MAGIC: &str = "CSLM1";
pub const FORMAT_VERSION: u32 = 1;
pub const MAX_ORDER: usize = 5;
pub const DEFAULT_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramLm {
    order: usize,
    discount: f64,
    /// id -> surface; ids 0..3 are `<unk>`, `</s>`, `<s>`.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// `levels[k - 1]`: k-gram -> raw count at the top order, continuation count below it.
    levels: Vec<HashMap<Vec<u32>, u64>>,
    /// `contexts[k - 1]`: (k-1)-gram history -> (count total, distinct followers).
    contexts: Vec<HashMap<Vec<u32>, (u64, u64)>>,
}

fn check_config(order: usize, discount: f64) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(LmError::Config(format!("order {order} outside 1..={MAX_ORDER}")));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(LmError::Config(format!("discount {discount} outside (0, 1)")));
    }
    Ok(())
}

fn base_vocab(words: impl IntoIterator<Item = String>) -> (Vec<String>, HashMap<String, u32>) {
    let mut vocab: Vec<String> = vec![UNK.into(), EOS.into(), BOS.into()];
    let mut rest: Vec<String> = words
        .into_iter()
        .filter(|w| w != UNK && w != EOS && w != BOS)
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    rest.sort();
    vocab.extend(rest);
    let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    (vocab, index)
}

/// Trains an interpolated Kneser-Ney model. Words seen fewer than `min_count` times map to `<unk>`.
pub fn train_ngram(c: &Corpus, order: usize, discount: f64, min_count: usize) -> Result<NgramLm> {
    check_config(order, discount)?;
    if c.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for s in c {
        for w in s.surfaces() {
            *freq.entry(w).or_insert(0) += 1;
        }
    }
    let words = freq
        .into_iter()
        .filter(|(_, n)| *n >= min_count.max(1))
        .map(|(w, _)| w.to_string());
    let (vocab, index) = base_vocab(words);

    let mut top: HashMap<Vec<u32>, u64> = HashMap::new();
    for s in c {
        let mut ids = vec![BOS_ID; order - 1];
        ids.extend(s.surfaces().map(|w| lookup(&index, w)));
        ids.push(EOS_ID);
        for window in ids.windows(order) {
            *top.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    let mut levels = vec![HashMap::new(); order];
    for k in (1..order).rev() {
        // Continuation count of a k-gram: distinct words seen to its left.
        let higher: HashSet<&[u32]> = top.keys().map(|g| &g[order - k - 1..]).collect();
        let mut level: HashMap<Vec<u32>, u64> = HashMap::new();
        for g in higher {
            *level.entry(g[1..].to_vec()).or_insert(0) += 1;
        }
        levels[k - 1] = level;
    }
    levels[order - 1] = top;
    Ok(NgramLm::from_levels(order, discount, vocab, index, levels))
}

fn lookup(index: &HashMap<String, u32>, w: &str) -> u32 {
    match index.get(w) {
        Some(&id) if id != BOS_ID && id != EOS_ID => id,
        _ => UNK_ID,
    }
}

impl NgramLm {
    fn from_levels(
        order: usize,
        discount: f64,
        vocab: Vec<String>,
        index: HashMap<String, u32>,
        levels: Vec<HashMap<Vec<u32>, u64>>,
    ) -> NgramLm {
        let contexts = levels
            .iter()
            .map(|level| {
                let mut ctx: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
                for (g, n) in level {
                    let e = ctx.entry(g[..g.len() - 1].to_vec()).or_insert((0, 0));
                    e.0 += n;
                    e.1 += 1;
                }
                ctx
            })
            .collect();
        NgramLm {
            order,
            discount,
            vocab,
            index,
            levels,
            contexts,
        }
    }

    /// Uniform distribution over `words` plus `<unk>` and `</s>`.
    pub fn uniform(words: impl IntoIterator<Item = String>) -> NgramLm {
        let (vocab, index) = base_vocab(words);
        NgramLm::from_levels(1, DEFAULT_DISCOUNT, vocab, index, vec![HashMap::new()])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Number of predictable symbols: words, `<unk>` and `</s>`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    /// Everything a model can predict, `<unk>` and `</s>` included.
    pub fn predictable(&self) -> impl Iterator<Item = &str> {
        self.vocab
            .iter()
            .enumerate()
            .filter(|(i, _)| *i as u32 != BOS_ID)
            .map(|(_, w)| w.as_str())
    }

    fn prob_ids(&self, history: &[u32], w: u32) -> f64 {
        let mut p = 1.0 / self.vocab_size() as f64;
        let mut key: Vec<u32> = Vec::with_capacity(self.order);
        for k in 1..=self.order {
            let hist = &history[history.len() - (k - 1)..];
            let Some(&(total, types)) = self.contexts[k - 1].get(hist) else { continue };
            key.clear();
            key.extend_from_slice(hist);
            key.push(w);
            let c = self.levels[k - 1].get(&key).copied().unwrap_or(0) as f64;
            let total = total as f64;
            p = (c - self.discount).max(0.0) / total + self.discount * types as f64 / total * p;
        }
        p
    }

    fn padded_history(&self, context: &[&str]) -> Vec<u32> {
        let need = self.order - 1;
        let mut h = vec![BOS_ID; need.saturating_sub(context.len())];
        let start = context.len().saturating_sub(need);
        h.extend(context[start..].iter().map(|w| match *w {
            BOS => BOS_ID,
            _ => lookup(&self.index, w),
        }));
        h
    }

    /// `P(word | context)`; the context is the preceding words of the sentence, most recent last.
    /// Use [`BOS`]/[`EOS`] for sentence boundaries; unknown words score as `<unk>`.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let h = self.padded_history(context);
        let w = match word {
            EOS => EOS_ID,
            _ => lookup(&self.index, word),
        };
        self.prob_ids(&h, w)
    }

    /// Natural-log likelihood of a sentence including its end marker, and the number of predicted symbols.
    pub fn sentence_logprob<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> (f64, usize) {
        let mut ids = vec![BOS_ID; self.order - 1];
        ids.extend(words.into_iter().map(|w| lookup(&self.index, w)));
        ids.push(EOS_ID);
        let mut total = 0.0;
        for window in ids.windows(self.order) {
            let (h, w) = window.split_at(self.order - 1);
            total += self.prob_ids(h, w[0]).ln();
        }
        (total, ids.len() + 1 - self.order)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC.as_bytes());
        w.u32(FORMAT_VERSION);
        w.u32(self.order as u32);
        w.f64(self.discount);
        w.len_prefix(self.vocab.len() - N_SPECIAL);
        for word in &self.vocab[N_SPECIAL..] {
            w.str(word);
        }
        for (k, level) in self.levels.iter().enumerate() {
            let sorted: BTreeMap<&Vec<u32>, &u64> = level.iter().collect();
            w.len_prefix(sorted.len());
            for (g, n) in sorted {
                debug_assert_eq!(g.len(), k + 1);
                for id in g {
                    w.u32(*id);
                }
                w.u64(*n);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<NgramLm, DecodeError> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(DecodeError::Version(version));
        }
        let order = r.u32()? as usize;
        let discount = r.f64()?;
        check_config(order, discount).map_err(|e| r.invalid(e.to_string()))?;
        let n_words = r.count(4)?;
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let word = r.str()?;
            if word.is_empty() || word.chars().any(char::is_whitespace) || [UNK, EOS, BOS].contains(&word.as_str()) {
                return Err(r.invalid(format!("bad vocabulary entry {word:?}")));
            }
            words.push(word);
        }
        let (vocab, index) = base_vocab(words);
        if vocab.len() != n_words + N_SPECIAL {
            return Err(r.invalid("duplicate vocabulary entries"));
        }
        let mut levels = Vec::with_capacity(order);
        for k in 1..=order {
            let n = r.count(4 * k + 8)?;
            let mut level = HashMap::with_capacity(n);
            for _ in 0..n {
                let mut g = Vec::with_capacity(k);
                for _ in 0..k {
                    let id = r.u32()?;
                    if id as usize >= vocab.len() {
                        return Err(r.invalid(format!("token id {id} out of range")));
                    }
                    g.push(id);
                }
                let count = r.u64()?;
                if count == 0 || g[k - 1] == BOS_ID {
                    return Err(r.invalid("invalid n-gram entry"));
                }
                if level.insert(g, count).is_some() {
                    return Err(r.invalid("duplicate n-gram"));
                }
            }
            levels.push(level);
        }
        r.finish()?;
        Ok(NgramLm::from_levels(order, discount, vocab, index, levels))
    }
}

/// `exp` of the mean negative log-likelihood per predicted symbol (`</s>` counted, `<s>` not).
/// An empty corpus has perplexity 1.
pub fn perplexity(lm: &NgramLm, c: &Corpus) -> f64 {
    let (logp, n) = c
        .iter()
        .map(|s| lm.sentence_logprob(s.surfaces()))
        .fold((0.0, 0usize), |(a, n), (b, m)| (a + b, n + m));
    if n == 0 {
        return 1.0;
    }
    (-logp / n as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_lines("c", lines.iter().copied(), Source::Real).unwrap()
    }

    fn assert_normalized(lm: &NgramLm, context: &[&str]) {
        let total: f64 = lm.predictable().map(|w| lm.prob(context, w)).sum();
        assert!((total - 1.0).abs() < 1e-9, "context {context:?} sums to {total}");
    }

    #[test]
    fn unigram_mle_limit() {
        let lm = train_ngram(&corpus(&["a a b"]), 1, 1e-9, 1).unwrap();
        let (pa, pb) = (lm.prob(&[], "a"), lm.prob(&[], "b"));
        assert!((pa - 0.5).abs() < 1e-8);
        assert!((pa / (pa + pb) - 2.0 / 3.0).abs() < 1e-8);
        assert!((lm.prob(&[], EOS) - 0.25).abs() < 1e-8);
    }

    #[test]
    fn normalization_all_orders() {
        let c = corpus(&["a b c a", "b b a", "c a b c d", "d d"]);
        for order in 1..=5 {
            let lm = train_ngram(&c, order, 0.75, 1).unwrap();
            for ctx in [&[][..], &["a"], &["b", "c"], &["zzz", "a", "b"], &["d", "d", "d", "d"], &[BOS]] {
                assert_normalized(&lm, ctx);
            }
        }
    }

    #[test]
    fn uniform_perplexity() {
        let lm = NgramLm::uniform(["x", "y", "z"].map(String::from));
        assert_eq!(lm.vocab_size(), 5);
        let ppl = perplexity(&lm, &corpus(&["x y", "q"]));
        assert!((ppl - 5.0).abs() < 1e-9);
    }

    #[test]
    fn config_errors() {
        let c = corpus(&["a"]);
        assert!(matches!(train_ngram(&c, 0, 0.5, 1), Err(LmError::Config(_))));
        assert!(matches!(train_ngram(&c, 6, 0.5, 1), Err(LmError::Config(_))));
        assert!(matches!(train_ngram(&c, 2, 1.0, 1), Err(LmError::Config(_))));
        assert!(matches!(train_ngram(&c, 2, 0.0, 1), Err(LmError::Config(_))));
        assert!(matches!(train_ngram(&Corpus::default(), 2, 0.5, 1), Err(LmError::EmptyCorpus)));
    }

    #[test]
    fn min_count_maps_rare_words_to_unk() {
        let lm = train_ngram(&corpus(&["a a b"]), 2, 0.5, 2).unwrap();
        assert_eq!(lm.vocab_size(), 3);
        assert_eq!(lm.prob(&["a"], "b"), lm.prob(&["a"], UNK));
    }

    #[test]
    fn binary_roundtrip() {
        let lm = train_ngram(&corpus(&["a b c a", "b b a", "राम x"]), 3, 0.6, 1).unwrap();
        let bytes = lm.to_bytes();
        assert!(bytes.starts_with(b"CSLM1"));
        let back = NgramLm::from_bytes(&bytes).unwrap();
        assert_eq!(back, lm);
        assert_eq!(back.to_bytes(), bytes);
        assert!(NgramLm::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(NgramLm::from_bytes(&bad), Err(DecodeError::BadMagic { .. })));
    }
}
