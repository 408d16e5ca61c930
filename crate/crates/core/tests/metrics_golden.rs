//! Corpus statistics against values frozen from `fixtures/metrics_oracle.py`.

use std::collections::BTreeMap;
use std::path::Path;

use csforge::corpus::{read_ne_list, Corpus, Source, TaggedSentence};
use csforge::metrics::report;
use serde_json::Value;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn histogram(v: &Value) -> BTreeMap<usize, usize> {
    v.as_object()
        .unwrap()
        .iter()
        .map(|(k, n)| (k.parse().unwrap(), n.as_u64().unwrap() as usize))
        .collect()
}

#[test]
fn report_matches_golden_values() {
    let text = std::fs::read_to_string(fixture("metrics_corpus.txt")).unwrap();
    let sentences = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| TaggedSentence::from_text(format!("s{i}"), l, Source::Real).unwrap())
        .collect();
    let corpus = Corpus::new("golden", sentences).unwrap();
    let ne = read_ne_list(fixture("metrics_ne.txt")).unwrap();
    let got = report(&corpus, &ne).unwrap();

    let want: Value = serde_json::from_str(&std::fs::read_to_string(fixture("metrics_golden.json")).unwrap()).unwrap();
    assert_eq!(got.n_sentences as u64, want["n_sentences"].as_u64().unwrap());
    assert_eq!(got.n_tokens as u64, want["n_tokens"].as_u64().unwrap());
    assert_eq!(got.n_ne as u64, want["n_ne"].as_u64().unwrap());
    for (field, value) in [("ne_fraction", got.ne_fraction), ("m_index", got.m_index), ("i_index", got.i_index)] {
        let w = want[field].as_f64().unwrap();
        assert!((value - w).abs() < 1e-12, "{field}: {value} vs {w}");
    }
    assert_eq!(got.en_span_histogram, histogram(&want["en_span_histogram"]));
    assert_eq!(got.sentence_length_histogram, histogram(&want["sentence_length_histogram"]));
}
