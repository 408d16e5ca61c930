//! Corpus BLEU against a brute-force re-count written without any of the library's helpers.

mod common;

use common::{bleu_oracle as oracle, random_words, sentence};
use csforge::corpus::{Corpus, Source, TaggedSentence};
use csforge::eval::{corpus_bleu, self_bleu};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn corpus_bleu_matches_brute_force_on_seeded_corpora() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..15);
        let n_refs = rng.random_range(1..4);
        let mut cands = Vec::new();
        let mut refs = Vec::new();
        for _ in 0..n {
            // A small vocabulary keeps higher-order matches common.
            let len = rng.random_range(1..12);
            let c = random_words(&mut rng, 5, len);
            let rs: Vec<Vec<String>> = (0..n_refs)
                .map(|_| {
                    let len = rng.random_range(1..12);
                    random_words(&mut rng, 5, len)
                })
                .collect();
            cands.push(c);
            refs.push(rs);
        }
        let corpus = Corpus::new("c", cands.iter().enumerate().map(|(i, c)| sentence(format!("c{i}"), c)).collect()).unwrap();
        let ref_sents: Vec<Vec<TaggedSentence>> = refs
            .iter()
            .enumerate()
            .map(|(i, rs)| rs.iter().enumerate().map(|(k, r)| sentence(format!("r{i}.{k}"), r)).collect())
            .collect();
        let got = corpus_bleu(&corpus, &ref_sents).unwrap().score;
        let want = oracle(&cands, &refs);
        assert!((got - want).abs() < 1e-6, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn identity_scores_100() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cands: Vec<Vec<String>> = (0..10).map(|_| random_words(&mut rng, 50, 8)).collect();
    let corpus = Corpus::new("c", cands.iter().enumerate().map(|(i, c)| sentence(format!("c{i}"), c)).collect()).unwrap();
    let refs: Vec<Vec<TaggedSentence>> = corpus.iter().map(|s| vec![s.clone()]).collect();
    assert_eq!(corpus_bleu(&corpus, &refs).unwrap().score, 100.0);
}

#[test]
fn self_bleu_of_identical_corpus_is_100() {
    let s: Vec<TaggedSentence> = (0..25)
        .map(|i| TaggedSentence::from_text(format!("s{i}"), "मैं आज market जा रहा हूँ", Source::Real).unwrap())
        .collect();
    let c = Corpus::new("same", s).unwrap();
    assert!((self_bleu(&c, 0, 1).unwrap() - 100.0).abs() < 1e-9);
}
