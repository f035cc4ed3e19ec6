#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::imagery::{encode_ppm, parse_ppm};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = parse_ppm(data) {
        assert_eq!(parse_ppm(&encode_ppm(&frame)).unwrap(), frame);
    }
});
