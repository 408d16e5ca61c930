#![no_main]

use csforge::tcs::checkpoint::{decode_model, encode_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_model(data) {
        let bytes = encode_model(&m);
        assert_eq!(encode_model(&decode_model(&bytes).unwrap()), bytes);
    }
});
