use proptest::prelude::*;
use puddlemap::hydro_metrics::{
    lag_xcorr, moving_average, pearson, pixel_sofi, projected_sofi, TimeSeries, Unit,
};
use puddlemap::tree_classifier::WaterMask;

fn series_strategy(min: usize, max: usize) -> impl Strategy<Value = TimeSeries> {
    proptest::collection::vec((1.0f64..60.0, -10.0f64..10.0), min..max).prop_map(|steps| {
        let mut t = 0.0;
        let pairs: Vec<(f64, f64)> = steps
            .into_iter()
            .map(|(dt, v)| {
                t += dt;
                (t, v)
            })
            .collect();
        TimeSeries::from_pairs(Unit::Ratio, pairs).unwrap()
    })
}

fn mask_and_areas() -> impl Strategy<Value = (WaterMask, Vec<Option<f64>>)> {
    (1usize..60).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(proptest::option::weighted(0.9, 1e-4f64..50.0), n),
        )
            .prop_map(move |(wet, areas)| (WaterMask::new(n, 1, wet), areas))
    })
}

proptest! {
    #[test]
    fn sofi_ratios_are_fractions((mask, areas) in mask_and_areas()) {
        let p = pixel_sofi(&mask).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if let Ok(q) = projected_sofi(&mask, &areas) {
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }

    #[test]
    fn equal_areas_give_pixel_sofi(wet in proptest::collection::vec(any::<bool>(), 1..80), area in 1e-3f64..100.0) {
        let mask = WaterMask::new(wet.len(), 1, wet);
        let areas = vec![Some(area); mask.wet.len()];
        prop_assert_eq!(projected_sofi(&mask, &areas).unwrap(), pixel_sofi(&mask).unwrap());
    }

    #[test]
    fn moving_average_commutes_with_affine_maps(s in series_strategy(1, 40), window in 1.0f64..400.0, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let lhs = moving_average(&s.map_values(|v| a * v + b), window).unwrap();
        let rhs = moving_average(&s, window).unwrap().map_values(|v| a * v + b);
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn moving_average_fixes_constants(s in series_strategy(1, 40), window in 1.0f64..400.0, c in -5.0f64..5.0) {
        let flat = s.map_values(|_| c);
        let once = moving_average(&flat, window).unwrap();
        prop_assert!(once.values().iter().all(|&v| (v - c).abs() < 1e-12));
        let twice = moving_average(&once, window).unwrap();
        for (x, y) in twice.values().iter().zip(once.values()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_affine_invariance(s in series_strategy(4, 30), noise in proptest::collection::vec(-1.0f64..1.0, 30), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let other = TimeSeries::new(
            Unit::Meters,
            s.times().to_vec(),
            s.values().iter().zip(&noise).map(|(v, n)| v * 0.5 + n).collect(),
        )
        .unwrap();
        let range = (f64::NEG_INFINITY, f64::INFINITY);
        let Ok(r) = pearson(&s, &other, range) else { return Ok(()) };
        let scaled = pearson(&s.map_values(|v| a * v + b), &other, range).unwrap();
        prop_assert!((r - scaled).abs() < 1e-9);
        let negated = pearson(&s, &other.map_values(|v| -v), range).unwrap();
        prop_assert!((r + negated).abs() < 1e-9);
    }

    #[test]
    fn lag_is_antisymmetric(shift in -12i64..=12, width in 5.0f64..30.0, centre in 80.0f64..120.0) {
        let pulse = |t: f64| (-((t - centre) / width).powi(2)).exp();
        let dt = 30.0;
        let a = TimeSeries::from_pairs(Unit::Ratio, (0..200).map(|i| (i as f64 * dt, pulse(i as f64)))).unwrap();
        let b = TimeSeries::from_pairs(Unit::Meters, (0..200).map(|i| (i as f64 * dt, pulse((i - shift) as f64)))).unwrap();
        let ab = lag_xcorr(&a, &b, 600.0).unwrap();
        prop_assert_eq!(ab, shift as f64 * dt);
        prop_assert_eq!(lag_xcorr(&b, &a, 600.0).unwrap(), -ab);
    }
}
