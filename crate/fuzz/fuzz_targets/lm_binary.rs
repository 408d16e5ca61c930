#![no_main]

use csforge::lm::NgramLm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(lm) = NgramLm::from_bytes(data) {
        assert_eq!(NgramLm::from_bytes(&lm.to_bytes()).unwrap().to_bytes(), lm.to_bytes());
    }
});
