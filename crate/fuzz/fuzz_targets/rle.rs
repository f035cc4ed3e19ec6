#![no_main]

use libfuzzer_sys::fuzz_target;
use puddlemap_pipeline::rle::Rle;

fuzz_target!(|data: &[u8]| {
    if let Ok(rle) = serde_json::from_slice::<Rle>(data) {
        if let Ok(values) = rle.decode() {
            assert_eq!(Rle::encode(rle.width, rle.height, &values).decode().unwrap(), values);
        }
        let _ = rle.decode_mask();
    }
});
