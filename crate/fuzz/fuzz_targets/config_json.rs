#![no_main]

use csforge::pipeline::PipelineConfig;
use csforge::tcs::CurriculumConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = CurriculumConfig::from_json_str(text) {
        let _ = c.model_config();
    }
    let _ = PipelineConfig::from_json_str(text);
});
