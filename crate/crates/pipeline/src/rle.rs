//! Run-length encoding of row-major rasters for the HTTP service.

use serde::{Deserialize, Serialize};

/// Largest raster a request may expand to.
pub const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub width: usize,
    pub height: usize,
    /// `[value, count]` pairs in row-major order.
    pub runs: Vec<[u64; 2]>,
}

impl Rle {
    pub fn encode<T: Copy + Into<u64>>(width: usize, height: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), width * height, "raster size");
        let mut runs: Vec<[u64; 2]> = Vec::new();
        for &v in values {
            let v = v.into();
            match runs.last_mut() {
                Some([value, count]) if *value == v => *count += 1,
                _ => runs.push([v, 1]),
            }
        }
        Self { width, height, runs }
    }

    pub fn encode_mask(width: usize, height: usize, wet: &[bool]) -> Self {
        let values: Vec<u8> = wet.iter().map(|&w| u8::from(w)).collect();
        Self::encode(width, height, &values)
    }

    /// Expands the runs; errors when counts do not cover the raster exactly.
    pub fn decode(&self) -> Result<Vec<u64>, String> {
        let total = self
            .width
            .checked_mul(self.height)
            .filter(|&n| n <= MAX_PIXELS)
            .ok_or_else(|| "raster too large".to_string())?;
        let mut covered: u64 = 0;
        for [_, count] in &self.runs {
            if *count == 0 {
                return Err("zero-length run".into());
            }
            covered = covered.checked_add(*count).ok_or_else(|| "run counts overflow".to_string())?;
        }
        if covered != total as u64 {
            return Err(format!("runs cover {covered} pixels, raster has {total}"));
        }
        let mut out = Vec::with_capacity(total);
        for &[value, count] in &self.runs {
            out.extend(std::iter::repeat_n(value, count as usize));
        }
        Ok(out)
    }

    /// Decodes a 0/1 mask.
    pub fn decode_mask(&self) -> Result<Vec<bool>, String> {
        self.decode()?
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(format!("mask value {other} is not 0 or 1")),
            })
            .collect()
    }
}
