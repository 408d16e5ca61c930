//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use csforge::corpus::{Source, TaggedSentence};
use std::collections::BTreeSet;

use csforge::emtgen::{generate_emt, parse_bracketed, select_switch_candidates, Alignment, EmtConfig, ParseBundle, ParseNode, Span, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every n-gram occurrence is compared against every reference position by
/// value; clipping takes the max over references of the per-reference count.
pub fn bleu_oracle(cands: &[Vec<String>], refs: &[Vec<Vec<String>>]) -> f64 {
    let mut matched = [0u64; 4];
    let mut total = [0u64; 4];
    let (mut c_len, mut r_len) = (0u64, 0u64);
    for (cand, rs) in cands.iter().zip(refs) {
        c_len += cand.len() as u64;
        let mut best = rs[0].len();
        for r in rs {
            let (d, bd) = (r.len().abs_diff(cand.len()), best.abs_diff(cand.len()));
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        r_len += best as u64;
        for n in 1..=4usize {
            if cand.len() < n {
                continue;
            }
            let grams: Vec<&[String]> = (0..=cand.len() - n).map(|i| &cand[i..i + n]).collect();
            total[n - 1] += grams.len() as u64;
            let mut done: Vec<&[String]> = Vec::new();
            for g in &grams {
                if done.contains(g) {
                    continue;
                }
                done.push(g);
                let in_cand = grams.iter().filter(|h| *h == g).count();
                let mut clip = 0;
                for r in rs {
                    let in_ref = if r.len() < n { 0 } else { (0..=r.len() - n).filter(|&i| &r[i..i + n] == *g).count() };
                    clip = clip.max(in_ref);
                }
                matched[n - 1] += in_cand.min(clip) as u64;
            }
        }
    }
    if (0..4).any(|n| matched[n] == 0) || c_len == 0 {
        return 0.0;
    }
    let log_p: f64 = (0..4).map(|n| (matched[n] as f64 / total[n] as f64).ln()).sum::<f64>() / 4.0;
    let bp = if c_len >= r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    100.0 * bp * log_p.exp()
}

pub fn sentence(id: String, words: &[String]) -> TaggedSentence {
    TaggedSentence::from_text(id, &words.join(" "), Source::Real).unwrap()
}

pub fn random_words(rng: &mut ChaCha8Rng, vocab: usize, len: usize) -> Vec<String> {
    (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect()
}

/// Every (label, span) in the tree, found by plain recursion.
pub fn all_nodes(n: &ParseNode, out: &mut Vec<(String, Span)>) {
    out.push((n.label.clone(), n.span));
    for c in &n.children {
        all_nodes(c, out);
    }
}

/// Clause nodes other than ones spanning the whole sentence; phrase nodes only if no clause qualifies.
pub fn oracle_candidates(tree: &ParseNode, cfg: &EmtConfig) -> Vec<Span> {
    let mut nodes = Vec::new();
    all_nodes(tree, &mut nodes);
    let root = nodes[0].1;
    let with = |tags: &[String]| -> Vec<Span> {
        nodes[1..]
            .iter()
            .filter(|(l, s)| *s != root && tags.contains(l))
            .map(|(_, s)| *s)
            .collect()
    };
    let clauses = with(&cfg.clause_tags);
    if clauses.is_empty() {
        with(&cfg.phrase_fallback)
    } else {
        clauses
    }
}

pub fn oracle_projection(span: Span, links: &[(usize, usize)], hi_len: usize) -> Option<Span> {
    let js: Vec<usize> = links
        .iter()
        .filter(|(i, j)| span.lo <= *i && *i < span.hi && *j < hi_len)
        .map(|&(_, j)| j)
        .collect();
    Some(Span::new(*js.iter().min()?, js.iter().max()? + 1))
}

pub fn splice_words(en: &[&str], span: Span, insert: &[&str]) -> String {
    let mut w: Vec<&str> = en[..span.lo].to_vec();
    w.extend_from_slice(insert);
    w.extend_from_slice(&en[span.hi..]);
    w.join(" ")
}

pub struct TreeGen {
    pub rng: ChaCha8Rng,
    pub leaves: usize,
}

impl TreeGen {
    const LABELS: [&'static str; 8] = ["S", "SBAR", "SQ", "NP", "VP", "PP", "ADJP", "X"];

    pub fn node(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.random_bool(0.3) {
            self.leaves += 1;
            return format!("(NN w{})", self.leaves - 1);
        }
        let label = Self::LABELS[self.rng.random_range(0..Self::LABELS.len())];
        let kids: Vec<String> = (0..self.rng.random_range(1..=3)).map(|_| self.node(depth - 1)).collect();
        format!("({label} {})", kids.join(" "))
    }
}


/// Compares candidate selection and single-switch outputs against the oracles on
/// `seeds` random trees with random alignments. Returns the number of outputs checked.
pub fn check_random_trees(seeds: u64) -> usize {
    let c = EmtConfig {
        variants: 24,
        ..EmtConfig::default()
    };
    let sent = |id: &str, text: &str| TaggedSentence::from_text(id, text, Source::Real).unwrap();
    let mut checked = 0;
    for seed in 0..seeds {
        let mut g = TreeGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            leaves: 0,
        };
        let text = format!("(ROOT {})", g.node(4));
        let tree = parse_bracketed(&text).unwrap();
        let got: Vec<Span> = select_switch_candidates(&tree, &c).iter().map(|n| n.span).collect();
        let want = oracle_candidates(&tree, &c);
        assert_eq!(got, want, "{text}");

        let n = g.leaves;
        let en_words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let hi_len = g.rng.random_range(1..=n + 2);
        let hi_words: Vec<String> = (0..hi_len).map(|j| format!("क{j}")).collect();
        let links: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..hi_len).map(move |j| (i, j)))
            .filter(|_| g.rng.random_bool(0.3))
            .collect();
        let bundle = ParseBundle::new(sent("r", &en_words.join(" ")), tree)
            .unwrap()
            .with_parallel(sent("r", &hi_words.join(" ")), Alignment::new(links.iter().copied()))
            .unwrap();
        let en: Vec<&str> = en_words.iter().map(String::as_str).collect();
        let hi: Vec<&str> = hi_words.iter().map(String::as_str).collect();
        let expected: BTreeSet<String> = want
            .iter()
            .filter_map(|&s| oracle_projection(s, &links, hi_len).map(|p| splice_words(&en, s, &hi[p.lo..p.hi])))
            .collect();
        match generate_emt(&bundle, &c, Strategy::Alignment) {
            Ok(out) => {
                let got: BTreeSet<String> = out.iter().map(TaggedSentence::text).collect();
                assert!(got.is_subset(&expected), "{text}: {got:?} vs {expected:?}");
                assert_eq!(got.is_empty(), expected.is_empty(), "{text}");
                checked += got.len();
            }
            Err(_) => assert!(want.is_empty(), "{text}"),
        }
    }
    checked
}
