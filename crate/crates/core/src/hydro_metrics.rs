//! Surface-water indices over time and their comparison with drainage-well
//! levels: pixel and projected SOFI, centred moving average, phase split,
//! Pearson correlation per phase, and cross-correlation lag.

use std::fmt::Write as _;

use thiserror::Error;

use crate::tree_classifier::WaterMask;

/// Relative accuracy of the ultrasonic range sensor.
pub const SENSOR_RELATIVE_ACCURACY: f64 = 0.005;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("footprint map has {footprints} entries for a {pixels}-pixel mask")]
    FootprintMismatch { footprints: usize, pixels: usize },
    #[error("no pixel has a defined ground footprint")]
    ZeroUsableArea,
    #[error("time series is empty")]
    EmptySeries,
    #[error("timestamps must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("window must be positive, got {0}")]
    BadWindow(f64),
    #[error("distance {distance} m exceeds mount height {mount_height} m: sensor fault")]
    SensorFault { distance: f64, mount_height: f64 },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("correlation undefined: series is constant over the range")]
    ConstantSeries,
    #[error("insufficient overlap between series")]
    InsufficientOverlap,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Ratio,
    Meters,
}

/// Samples with strictly increasing timestamps (seconds) and finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    unit: Unit,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(unit: Unit, times: Vec<f64>, values: Vec<f64>) -> Result<Self, MetricsError> {
        assert_eq!(times.len(), values.len(), "times and values differ in length");
        if let Some(i) = (0..times.len()).find(|&i| !times[i].is_finite() || !values[i].is_finite()) {
            return Err(MetricsError::NonFinite(i));
        }
        if let Some(i) = (1..times.len()).find(|&i| times[i] <= times[i - 1]) {
            return Err(MetricsError::NotIncreasing(i));
        }
        Ok(Self { unit, times, values })
    }

    pub fn from_pairs(unit: Unit, pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MetricsError> {
        let (times, values) = pairs.into_iter().unzip();
        Self::new(unit, times, values)
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            unit: self.unit,
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Median spacing between consecutive samples (0 for a single sample).
    pub fn median_interval(&self) -> f64 {
        let mut d: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        let m = d.len() / 2;
        if d.len() % 2 == 1 {
            d[m]
        } else {
            0.5 * (d[m - 1] + d[m])
        }
    }

    /// Linear interpolation; `None` outside the sampled span.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return Some(self.values[0]);
        }
        let j = i - 1;
        if j + 1 >= self.len() || self.times[j] == t {
            return Some(self.values[j]);
        }
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let w = (t - t0) / (t1 - t0);
        Some(self.values[j] + w * (self.values[j + 1] - self.values[j]))
    }
}

/// Fraction of mask pixels that are wet.
pub fn pixel_sofi(mask: &WaterMask) -> Result<f64, MetricsError> {
    if mask.wet.is_empty() {
        return Err(MetricsError::EmptyMask);
    }
    Ok(mask.wet_count() as f64 / mask.wet.len() as f64)
}

/// Wet ground area over total ground area. `areas` holds each pixel's
/// footprint area; `None` pixels are excluded from both sums.
pub fn projected_sofi(mask: &WaterMask, areas: &[Option<f64>]) -> Result<f64, MetricsError> {
    Ok(area_sums(mask, areas)?.ratio)
}

struct AreaSums {
    ratio: f64,
    total: f64,
    usable: usize,
}

fn area_sums(mask: &WaterMask, areas: &[Option<f64>]) -> Result<AreaSums, MetricsError> {
    if mask.wet.is_empty() {
        return Err(MetricsError::EmptyMask);
    }
    if areas.len() != mask.wet.len() {
        return Err(MetricsError::FootprintMismatch {
            footprints: areas.len(),
            pixels: mask.wet.len(),
        });
    }
    let (mut wet, mut total, mut usable, mut wet_usable) = (0.0, 0.0, 0, 0);
    let mut uniform = None;
    let mut all_equal = true;
    for (&is_wet, area) in mask.wet.iter().zip(areas) {
        if let Some(a) = *area {
            total += a;
            usable += 1;
            if is_wet {
                wet += a;
                wet_usable += 1;
            }
            all_equal &= *uniform.get_or_insert(a) == a;
        }
    }
    if !(total > 0.0) {
        return Err(MetricsError::ZeroUsableArea);
    }
    // Equal areas reduce to a pixel count ratio; use it to avoid rounding.
    let ratio = if all_equal {
        wet_usable as f64 / usable as f64
    } else {
        wet / total
    };
    Ok(AreaSums { ratio, total, usable })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SofiSample {
    pub timestamp: f64,
    pub pixel_sofi: f64,
    pub projected_sofi: f64,
    pub usable_pixels: usize,
    pub usable_area: f64,
}

pub fn sofi_sample(timestamp: f64, mask: &WaterMask, areas: &[Option<f64>]) -> Result<SofiSample, MetricsError> {
    let sums = area_sums(mask, areas)?;
    Ok(SofiSample {
        timestamp,
        pixel_sofi: pixel_sofi(mask)?,
        projected_sofi: sums.ratio,
        usable_pixels: sums.usable,
        usable_area: sums.total,
    })
}

pub const SOFI_HEADER: &str = "timestamp,pixel_sofi,projected_sofi,usable_pixels,usable_area_m2";

pub fn format_sofi_csv(samples: &[SofiSample]) -> String {
    let mut out = format!("{SOFI_HEADER}\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.timestamp, s.pixel_sofi, s.projected_sofi, s.usable_pixels, s.usable_area
        );
    }
    out
}

pub fn parse_sofi_csv(text: &str) -> Result<Vec<SofiSample>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SOFI_HEADER => {}
        _ => {
            return Err(MetricsError::Parse {
                line: 1,
                message: format!("expected header `{SOFI_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = || MetricsError::Parse {
            line: i + 1,
            message: "expected 5 numeric fields".into(),
        };
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 5 {
            return Err(err());
        }
        let real = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(err);
        out.push(SofiSample {
            timestamp: real(f[0])?,
            pixel_sofi: real(f[1])?,
            projected_sofi: real(f[2])?,
            usable_pixels: f[3].parse().map_err(|_| err())?,
            usable_area: real(f[4])?,
        });
    }
    Ok(out)
}

/// Centred moving average: each output is the mean of all samples within
/// `window / 2` seconds of it. Timestamps are kept.
pub fn moving_average(s: &TimeSeries, window: f64) -> Result<TimeSeries, MetricsError> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(MetricsError::BadWindow(window));
    }
    if s.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let half = window / 2.0 + 1e-9 * window.max(1.0);
    let (t, v) = (s.times(), s.values());
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(s.len());
    for i in 0..s.len() {
        while t[i] - t[lo] > half {
            lo += 1;
        }
        while hi + 1 < s.len() && t[hi + 1] - t[i] <= half {
            hi += 1;
        }
        let slice = &v[lo..=hi];
        out.push(slice.iter().sum::<f64>() / slice.len() as f64);
    }
    TimeSeries::new(s.unit, t.to_vec(), out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthReading {
    pub depth: f64,
    /// Propagated sensor uncertainty, meters.
    pub uncertainty: f64,
}

/// Water depth under a downward-looking range sensor mounted
/// `mount_height` above the well floor.
pub fn distance_to_depth(distance: f64, mount_height: f64) -> Result<DepthReading, MetricsError> {
    if !(distance > 0.0) {
        return Err(MetricsError::NonPositiveDistance(distance));
    }
    if distance > mount_height {
        return Err(MetricsError::SensorFault { distance, mount_height });
    }
    Ok(DepthReading {
        depth: mount_height - distance,
        uncertainty: SENSOR_RELATIVE_ACCURACY * distance,
    })
}

/// What the second column of `well.csv` holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WellColumn {
    Distance,
    Depth,
}

/// Parses `well.csv` (`timestamp,distance_m` or `timestamp,depth_m`) into a
/// depth series. Distances need the sensor mount height.
pub fn parse_well_csv(text: &str, mount_height: Option<f64>) -> Result<(WellColumn, TimeSeries), MetricsError> {
    let mut lines = text.lines().enumerate();
    let column = match lines.next().map(|(_, h)| h.trim()) {
        Some("timestamp,distance_m") => WellColumn::Distance,
        Some("timestamp,depth_m") => WellColumn::Depth,
        _ => {
            return Err(MetricsError::Parse {
                line: 1,
                message: "expected header `timestamp,distance_m` or `timestamp,depth_m`".into(),
            })
        }
    };
    let mut pairs = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: &str| MetricsError::Parse {
            line: i + 1,
            message: message.into(),
        };
        let (t, v) = line.trim().split_once(',').ok_or_else(|| err("expected two fields"))?;
        let t: f64 = t.trim().parse().map_err(|_| err("bad timestamp"))?;
        let v: f64 = v.trim().parse().map_err(|_| err("bad value"))?;
        let depth = match column {
            WellColumn::Depth => v,
            WellColumn::Distance => {
                let mount = mount_height.ok_or_else(|| err("distance readings need a mount height"))?;
                distance_to_depth(v, mount)?.depth
            }
        };
        pairs.push((t, depth));
    }
    Ok((column, TimeSeries::from_pairs(Unit::Meters, pairs)?))
}

/// Rising and falling phases of a storm event around the well-level peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSplit {
    pub peak_index: usize,
    pub peak_ts: f64,
    /// `[start, peak]`, seconds.
    pub rising: (f64, f64),
    /// `[peak, end]`, seconds.
    pub falling: (f64, f64),
}

impl PhaseSplit {
    pub fn rising_degenerate(&self) -> bool {
        self.rising.0 == self.rising.1
    }

    pub fn falling_degenerate(&self) -> bool {
        self.falling.0 == self.falling.1
    }
}

/// Splits at the maximum of the (optionally smoothed) well series; the
/// earliest sample wins ties.
pub fn split_phases(well: &TimeSeries, smoothing_window: Option<f64>) -> Result<PhaseSplit, MetricsError> {
    if well.len() < 3 {
        return Err(MetricsError::TooShort { needed: 3, got: well.len() });
    }
    let smoothed = match smoothing_window {
        Some(w) => moving_average(well, w)?,
        None => well.clone(),
    };
    let mut peak = 0;
    for (i, &v) in smoothed.values().iter().enumerate() {
        if v > smoothed.values()[peak] {
            peak = i;
        }
    }
    let t = well.times();
    Ok(PhaseSplit {
        peak_index: peak,
        peak_ts: t[peak],
        rising: (t[0], t[peak]),
        falling: (t[peak], t[t.len() - 1]),
    })
}

/// Pairs `x` and `y` on the coarser series' timestamps inside `range`,
/// matching each to the nearest sample of the other series within half of
/// that series' median interval.
pub fn paired_samples(x: &TimeSeries, y: &TimeSeries, range: (f64, f64)) -> Vec<(f64, f64)> {
    let x_is_grid = x.median_interval() >= y.median_interval();
    let (grid, other) = if x_is_grid { (x, y) } else { (y, x) };
    let tolerance = 0.5 * other.median_interval() + 1e-9;
    let mut pairs = Vec::new();
    for (&t, &g) in grid.times().iter().zip(grid.values()) {
        if t < range.0 || t > range.1 || other.is_empty() {
            continue;
        }
        let ot = other.times();
        let i = ot.partition_point(|&s| s < t);
        let nearest = [i.checked_sub(1), (i < ot.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (ot[a] - t).abs().total_cmp(&(ot[b] - t).abs()));
        if let Some(j) = nearest.filter(|&j| (ot[j] - t).abs() <= tolerance) {
            let o = other.values()[j];
            pairs.push(if x_is_grid { (g, o) } else { (o, g) });
        }
    }
    pairs
}

fn pearson_pairs(pairs: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if pairs.len() < 3 {
        return Err(MetricsError::InsufficientOverlap);
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantSeries);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation of `x` and `y` over `range`.
pub fn pearson(x: &TimeSeries, y: &TimeSeries, range: (f64, f64)) -> Result<f64, MetricsError> {
    pearson_pairs(&paired_samples(x, y, range))
}

/// Resamples both series onto a shared uniform grid over their overlap,
/// spaced at the coarser of the two median intervals.
pub fn common_grid(a: &TimeSeries, b: &TimeSeries) -> Result<(f64, Vec<f64>, Vec<f64>), MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::InsufficientOverlap);
    }
    let dt = a.median_interval().max(b.median_interval());
    let start = a.times()[0].max(b.times()[0]);
    let end = a.times()[a.len() - 1].min(b.times()[b.len() - 1]);
    if !(end > start) {
        return Err(MetricsError::InsufficientOverlap);
    }
    let n = ((end - start) / dt + 1e-9).floor() as usize + 1;
    let sample = |s: &TimeSeries| (0..n).map(|i| s.interpolate((start + i as f64 * dt).min(end)).unwrap()).collect();
    Ok((dt, sample(a), sample(b)))
}

/// Lag (seconds) maximizing the correlation of `a(t)` with `b(t + lag)`;
/// positive means `b` lags `a`. Each shift is scored by the Pearson
/// correlation of the overlapping samples; ties go to the smaller |lag|.
pub fn lag_xcorr(a: &TimeSeries, b: &TimeSeries, max_lag: f64) -> Result<f64, MetricsError> {
    let (dt, ra, rb) = common_grid(a, b)?;
    let n = ra.len();
    let overlap = (n - 1) as f64 * dt;
    if !(max_lag >= 0.0) || max_lag >= overlap / 2.0 {
        return Err(MetricsError::InsufficientOverlap);
    }
    let k = (max_lag / dt + 1e-9).floor() as i64;
    let mut best: Option<(f64, i64)> = None;
    let shifts = std::iter::once(0).chain((1..=k).flat_map(|s| [s, -s]));
    for s in shifts {
        let pairs: Vec<(f64, f64)> = (0..n as i64)
            .filter(|&i| (0..n as i64).contains(&(i + s)))
            .map(|i| (ra[i as usize], rb[(i + s) as usize]))
            .collect();
        let Ok(r) = pearson_pairs(&pairs) else { continue };
        if best.is_none_or(|(b, _)| r > b + 1e-12) {
            best = Some((r, s));
        }
    }
    best.map(|(_, s)| s as f64 * dt).ok_or(MetricsError::ConstantSeries)
}

/// Per-phase correlation between surface-water extent and well level, plus
/// the response lag of the well behind the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub split: PhaseSplit,
    pub rising_r: Option<f64>,
    pub falling_r: Option<f64>,
    pub lag_s: Option<f64>,
    pub n_rising: usize,
    pub n_falling: usize,
    pub warnings: Vec<String>,
}

/// Builds the phase report. Both series are smoothed with the centred
/// moving average (when a window is given) before splitting, correlating,
/// and estimating the lag.
pub fn phase_report(
    extent: &TimeSeries,
    well: &TimeSeries,
    smoothing_window: Option<f64>,
    max_lag: f64,
) -> Result<PhaseReport, MetricsError> {
    let smooth = |s: &TimeSeries| match smoothing_window {
        Some(w) => moving_average(s, w),
        None => Ok(s.clone()),
    };
    let extent = smooth(extent)?;
    let well = smooth(well)?;
    let split = split_phases(&well, None)?;
    let mut warnings = Vec::new();
    if split.rising_degenerate() {
        warnings.push("rising phase is a single sample".to_string());
    }
    if split.falling_degenerate() {
        warnings.push("falling phase is a single sample".to_string());
    }
    let mut phase = |name: &str, range: (f64, f64)| {
        let pairs = paired_samples(&extent, &well, range);
        let r = match pearson_pairs(&pairs) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("{name} r undefined: {e}"));
                None
            }
        };
        (r, pairs.len())
    };
    let (rising_r, n_rising) = phase("rising", split.rising);
    let (falling_r, n_falling) = phase("falling", split.falling);
    let lag_s = match lag_xcorr(&extent, &well, max_lag) {
        Ok(l) => Some(l),
        Err(e) => {
            warnings.push(format!("lag undefined: {e}"));
            None
        }
    };
    Ok(PhaseReport {
        split,
        rising_r,
        falling_r,
        lag_s,
        n_rising,
        n_falling,
        warnings,
    })
}

/// `phase_report.txt`: `key = value` lines; undefined values are written
/// as `undefined`.
pub fn format_phase_report(report: &PhaseReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
    let mut out = String::new();
    let _ = writeln!(out, "statistic = pearson");
    let _ = writeln!(out, "peak_ts = {}", report.split.peak_ts);
    let _ = writeln!(out, "rising_start = {}", report.split.rising.0);
    let _ = writeln!(out, "falling_end = {}", report.split.falling.1);
    let _ = writeln!(out, "rising_r = {}", opt(report.rising_r));
    let _ = writeln!(out, "falling_r = {}", opt(report.falling_r));
    let _ = writeln!(out, "lag_s = {}", opt(report.lag_s));
    let _ = writeln!(out, "n_rising = {}", report.n_rising);
    let _ = writeln!(out, "n_falling = {}", report.n_falling);
    for w in &report.warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64], dt: f64) -> TimeSeries {
        TimeSeries::from_pairs(Unit::Ratio, values.iter().enumerate().map(|(i, &v)| (i as f64 * dt, v))).unwrap()
    }

    fn mask(wet: &[bool]) -> WaterMask {
        WaterMask::new(wet.len(), 1, wet.to_vec())
    }

    #[test]
    fn pixel_sofi_ratios() {
        assert_eq!(pixel_sofi(&mask(&[false; 12])).unwrap(), 0.0);
        let mut m = [false; 12];
        m[..3].fill(true);
        assert_eq!(pixel_sofi(&mask(&m)).unwrap(), 0.25);
        assert_eq!(pixel_sofi(&mask(&[true; 12])).unwrap(), 1.0);
        assert_eq!(pixel_sofi(&WaterMask::new(0, 0, vec![])), Err(MetricsError::EmptyMask));
    }

    #[test]
    fn projected_sofi_weights_by_area() {
        let m = mask(&[false, true]);
        assert_eq!(projected_sofi(&m, &[Some(1.0), Some(3.0)]).unwrap(), 0.75);
        assert_eq!(pixel_sofi(&m).unwrap(), 0.5);
        let uniform = mask(&[true, false, false, true, true]);
        assert_eq!(projected_sofi(&uniform, &[Some(2.0); 5]).unwrap(), pixel_sofi(&uniform).unwrap());
        assert_eq!(projected_sofi(&m, &[None, None]), Err(MetricsError::ZeroUsableArea));
        assert_eq!(projected_sofi(&m, &[None, Some(2.0)]).unwrap(), 1.0);
        assert!(matches!(projected_sofi(&m, &[None]), Err(MetricsError::FootprintMismatch { .. })));
    }

    #[test]
    fn moving_average_cases() {
        let flat = series(&[4.0; 10], 30.0);
        assert_eq!(moving_average(&flat, 300.0).unwrap(), flat);
        let ramp: Vec<f64> = (0..30).map(|i| 2.0 * i as f64 + 1.0).collect();
        let out = moving_average(&series(&ramp, 30.0), 300.0).unwrap();
        for i in 5..25 {
            assert!((out.values()[i] - ramp[i]).abs() < 1e-12);
        }
        assert_eq!(moving_average(&flat, 0.0), Err(MetricsError::BadWindow(0.0)));
        let empty = TimeSeries::new(Unit::Ratio, vec![], vec![]).unwrap();
        assert_eq!(moving_average(&empty, 10.0), Err(MetricsError::EmptySeries));
    }

    #[test]
    fn moving_average_of_a_step() {
        // Unit step at t = 0 sampled every 30 s from -600 to 600.
        let s = TimeSeries::from_pairs(
            Unit::Ratio,
            (-20..=20).map(|i| (i as f64 * 30.0, if i >= 0 { 1.0 } else { 0.0 })),
        )
        .unwrap();
        let out = moving_average(&s, 300.0).unwrap();
        for (i, &t) in s.times().iter().enumerate() {
            // Direct windowed mean over |t_j - t| <= 150.
            let window: Vec<f64> = s
                .times()
                .iter()
                .zip(s.values())
                .filter(|(&tj, _)| (tj - t).abs() <= 150.0)
                .map(|(_, &v)| v)
                .collect();
            let expect = window.iter().sum::<f64>() / window.len() as f64;
            assert!((out.values()[i] - expect).abs() < 1e-12);
        }
        // Samples from -150 s to 120 s see both levels.
        let partial = out.values().iter().filter(|&&v| v > 0.0 && v < 1.0).count();
        assert_eq!(partial, 10);
        assert_eq!(out.values()[14], 0.0);
        assert_eq!(out.values()[25], 1.0);
    }

    #[test]
    fn depth_conversion() {
        assert_eq!(distance_to_depth(2.0, 2.0).unwrap().depth, 0.0);
        let r = distance_to_depth(1.4, 2.0).unwrap();
        assert!((r.depth - 0.6).abs() < 1e-12);
        assert!((r.uncertainty - 0.007).abs() < 1e-12);
        assert!(matches!(distance_to_depth(2.3, 2.0), Err(MetricsError::SensorFault { .. })));
        assert!(matches!(distance_to_depth(0.0, 2.0), Err(MetricsError::NonPositiveDistance(_))));
    }

    #[test]
    fn well_csv_modes() {
        let (col, s) = parse_well_csv("timestamp,distance_m\n0,2.0\n300,1.4\n", Some(2.0)).unwrap();
        assert_eq!(col, WellColumn::Distance);
        assert!((s.values()[1] - 0.6).abs() < 1e-12);
        let (col, s) = parse_well_csv("timestamp,depth_m\n0,0.1\n300,0.5\n", None).unwrap();
        assert_eq!(col, WellColumn::Depth);
        assert_eq!(s.values(), &[0.1, 0.5]);
        assert!(parse_well_csv("timestamp,distance_m\n0,2.0\n", None).is_err());
        assert!(parse_well_csv("timestamp,distance_m\n0,2.5\n", Some(2.0)).is_err());
        assert!(parse_well_csv("time,depth\n", None).is_err());
        assert!(parse_well_csv("timestamp,depth_m\n5,1\n5,2\n", None).is_err());
    }

    #[test]
    fn phase_split_rules() {
        let s = series(&[0.0, 1.0, 3.0, 2.0, 1.0], 60.0);
        let p = split_phases(&s, None).unwrap();
        assert_eq!(p.peak_index, 2);
        assert_eq!(p.rising, (0.0, 120.0));
        assert_eq!(p.falling, (120.0, 240.0));

        let plateau = series(&[0.0, 2.0, 2.0, 2.0, 1.0], 60.0);
        assert_eq!(split_phases(&plateau, None).unwrap().peak_index, 1);

        let down = series(&[5.0, 4.0, 3.0], 60.0);
        let p = split_phases(&down, None).unwrap();
        assert_eq!(p.peak_index, 0);
        assert!(p.rising_degenerate());

        assert!(matches!(split_phases(&series(&[1.0, 2.0], 1.0), None), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn pearson_cases() {
        let x = series(&[1.0, 4.0, 2.0, 8.0, 5.0], 30.0);
        let y = x.map_values(|v| 2.0 * v + 1.0);
        let all = (0.0, 1e9);
        assert!((pearson(&x, &y, all).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &x.map_values(|v| -v), all).unwrap() + 1.0).abs() < 1e-12);
        let c = x.map_values(|_| 3.0);
        assert_eq!(pearson(&x, &c, all), Err(MetricsError::ConstantSeries));
        assert_eq!(pearson(&x, &y, (0.0, 30.0)), Err(MetricsError::InsufficientOverlap));
    }

    #[test]
    fn pearson_pairs_on_coarser_grid() {
        // 30 s extent against a 300 s well series.
        let fine = TimeSeries::from_pairs(Unit::Ratio, (0..=40).map(|i| (i as f64 * 30.0, i as f64))).unwrap();
        let coarse = TimeSeries::from_pairs(Unit::Meters, (0..=4).map(|i| (i as f64 * 300.0, (i * i) as f64))).unwrap();
        let pairs = paired_samples(&fine, &coarse, (0.0, 1200.0));
        assert_eq!(pairs, vec![(0.0, 0.0), (10.0, 1.0), (20.0, 4.0), (30.0, 9.0), (40.0, 16.0)]);
    }

    fn hydrograph(t: f64) -> f64 {
        let x = t / 1800.0;
        if x <= 0.0 {
            0.0
        } else {
            x * x * (-x).exp()
        }
    }

    #[test]
    fn lag_recovers_constructed_shift() {
        let a = TimeSeries::from_pairs(Unit::Ratio, (0..400).map(|i| (i as f64 * 30.0, hydrograph(i as f64 * 30.0)))).unwrap();
        let b = TimeSeries::from_pairs(Unit::Meters, (0..400).map(|i| (i as f64 * 30.0, hydrograph(i as f64 * 30.0 - 600.0)))).unwrap();
        assert_eq!(lag_xcorr(&a, &b, 1800.0).unwrap(), 600.0);
        assert_eq!(lag_xcorr(&b, &a, 1800.0).unwrap(), -600.0);
        assert_eq!(lag_xcorr(&a, &a, 1800.0).unwrap(), 0.0);
        assert_eq!(lag_xcorr(&a, &b, 6000.0), Err(MetricsError::InsufficientOverlap));
    }

    #[test]
    fn sofi_csv_round_trip() {
        let samples = vec![
            SofiSample { timestamp: 30.0, pixel_sofi: 0.25, projected_sofi: 0.4, usable_pixels: 12, usable_area: 3.5 },
            SofiSample { timestamp: 60.0, pixel_sofi: 1.0 / 3.0, projected_sofi: 0.1, usable_pixels: 9, usable_area: 1e-3 },
        ];
        let text = format_sofi_csv(&samples);
        assert_eq!(parse_sofi_csv(&text).unwrap(), samples);
        assert!(parse_sofi_csv("a,b\n").is_err());
    }

    #[test]
    fn report_marks_constant_well_undefined() {
        let extent = series(&(0..40).map(|i| (i as f64).sin()).collect::<Vec<_>>(), 30.0);
        let well = series(&[0.5; 40], 30.0);
        let report = phase_report(&extent, &well, None, 300.0).unwrap();
        assert_eq!(report.rising_r, None);
        assert_eq!(report.lag_s, None);
        let text = format_phase_report(&report);
        assert!(text.contains("rising_r = undefined"));
        assert!(text.contains("# warning:"));
    }
}
