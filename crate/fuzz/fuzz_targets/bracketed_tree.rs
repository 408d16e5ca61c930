#![no_main]

use csforge::emtgen::{parse_bracketed, parse_treebank};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tree) = parse_bracketed(text) {
        // Rendering and re-reading must give the same tree.
        let again = parse_bracketed(&tree.to_bracketed()).expect("rendered tree parses");
        assert_eq!(again, tree);
        assert_eq!(tree.span.hi, tree.n_leaves());
    }
    let _ = parse_treebank(text);
});
