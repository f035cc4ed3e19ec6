#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::imagery::Roi;
use puddlemap::seeds::{format_seeds, parse_seeds};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let roi = Roi::new(0, 0, 320, 180);
    if let Ok(set) = parse_seeds(text, roi) {
        assert_eq!(parse_seeds(&format_seeds(&set), roi).unwrap(), set);
    }
});
