#![no_main]

use csforge::emtgen::parse_translations;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_translations(text) {
        assert!(t.values().flat_map(|m| m.keys()).all(|s| s.lo < s.hi));
    }
});
