#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::hydro_metrics::{format_sofi_csv, parse_sofi_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(samples) = parse_sofi_csv(text) {
        assert_eq!(parse_sofi_csv(&format_sofi_csv(&samples)).unwrap(), samples);
    }
});
