#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::camera_model::{format_gcps, parse_gcps};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(gcps) = parse_gcps(text) {
        assert_eq!(parse_gcps(&format_gcps(&gcps)).unwrap(), gcps);
    }
});
