#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::hydro_metrics::{parse_well_csv, split_phases};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for mount in [None, Some(2.5)] {
        if let Ok((_, series)) = parse_well_csv(text, mount) {
            let _ = split_phases(&series, Some(300.0));
        }
    }
});
