#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::camera_model::{format_camera, parse_camera};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(camera) = parse_camera(text) {
        assert_eq!(parse_camera(&format_camera(&camera)).unwrap(), camera);
    }
});
