#![no_main]

use csforge::corpus::{parse_corpus_line, parse_parallel_line, Corpus, ParallelCorpus};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_corpus_line(text, 1);
    let _ = parse_parallel_line(text, 1);
    if let Ok(c) = Corpus::from_jsonl_str("f", text) {
        let again = Corpus::from_jsonl_str("f", &c.to_jsonl()).expect("written corpus reads back");
        assert_eq!(again.sentences(), c.sentences());
    }
    let _ = ParallelCorpus::from_jsonl_str(text);
});
