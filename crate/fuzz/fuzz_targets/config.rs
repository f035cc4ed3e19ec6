#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap_pipeline::config::{parse_overrides, parse_pairs};
use puddlemap_pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pairs) = parse_pairs(text) {
        let _ = PipelineConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    }
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    let _ = parse_overrides(&tokens);
});
