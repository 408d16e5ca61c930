#![no_main]

use csforge::emtgen::{parse_alignments, project_span, Alignment, Span};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_alignments(text);
    if let Ok(a) = Alignment::from_pharaoh(text) {
        assert_eq!(Alignment::from_pharaoh(&a.to_pharaoh()).unwrap(), a);
        if let Some(&(max_en, max_hi)) = a.links().iter().max() {
            if max_en < 64 && max_hi < 64 {
                if let Some(p) = project_span(Span::new(0, max_en + 1), &a, max_hi + 1) {
                    assert!(p.hi <= max_hi + 1);
                }
            }
        }
    }
});
