#![no_main]

use csforge::lexgen::Lexicon;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lex) = Lexicon::from_tsv(text) {
        let again = Lexicon::from_tsv(&lex.to_tsv()).expect("written lexicon reads back");
        assert_eq!(again.len(), lex.len());
    }
});
