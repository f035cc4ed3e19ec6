#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap::terrain::{format_dem, parse_dem};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dem) = parse_dem(text) {
        assert_eq!(parse_dem(&format_dem(&dem)).unwrap(), dem);
        let (x0, y0, x1, y1) = dem.sample_extent();
        let _ = dem.elevation_at((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    }
});
