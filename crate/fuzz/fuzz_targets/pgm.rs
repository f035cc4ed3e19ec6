#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::imagery::parse_pgm8;
use puddlemap::tree_classifier::WaterMask;

fuzz_target!(|data: &[u8]| {
    let _ = parse_pgm8(data);
    let _ = WaterMask::from_pgm(data);
});
