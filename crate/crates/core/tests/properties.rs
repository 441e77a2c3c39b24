use loadcast::baseline::pearson;
use loadcast::features::encode_time;
use loadcast::metrics::compute_all;
use loadcast::preprocess::{
    decompose_wind, describe, detect_outliers, impute_gaps, wind_direction,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..60)
        .prop_flat_map(|n| (vec(100.0f64..2000.0, n), vec(-300.0f64..300.0, n)))
        .prop_map(|(y, e)| {
            let p = y.iter().zip(&e).map(|(a, b)| a + b).collect();
            (y, p)
        })
}

proptest! {
    #[test]
    fn metric_relations((y, p) in pairs()) {
        let r = compute_all(&y, &p).unwrap();
        prop_assert!(r.mse >= 0.0 && r.mae >= 0.0);
        prop_assert!((r.rmse * r.rmse - r.mse).abs() <= 1e-9 * r.mse.max(1.0));
        prop_assert!(r.mae <= r.rmse * (1.0 + 1e-12));
        if let Some(r2) = r.r2 {
            prop_assert!(r2 <= 1.0);
        }
    }

    #[test]
    fn relative_metrics_are_scale_free((y, p) in pairs(), k in 0.01f64..100.0) {
        let a = compute_all(&y, &p).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v * k).collect();
        let ps: Vec<f64> = p.iter().map(|v| v * k).collect();
        let b = compute_all(&ys, &ps).unwrap();
        for (u, v) in [(a.mape, b.mape), (a.wape, b.wape), (a.mase, b.mase), (a.r2, b.r2)] {
            if let (Some(u), Some(v)) = (u, v) {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
        }
    }

    #[test]
    fn encodings_lie_on_unit_circle(t in -1e6f64..1e6) {
        let e = encode_time(t);
        for (s, c) in [(e.day_sin, e.day_cos), (e.week_sin, e.week_cos), (e.year_sin, e.year_cos)] {
            prop_assert!((s * s + c * c - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(x in vec(-10.0f64..10.0, 3..40), shift in -5.0f64..5.0) {
        let z: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + shift * i as f64).collect();
        if let Some(r) = pearson(&x, &z) {
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert_eq!(Some(r), pearson(&z, &x));
        }
    }

    #[test]
    fn short_gap_filling_keeps_observed_values(
        values in vec(0.0f64..100.0, 72),
        slots in vec(proptest::option::of((0usize..3, 1usize..=4)), 8),
    ) {
        // one optional gap per 9-hour slot, never touching the next slot
        let mut series: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
        for (k, slot) in slots.iter().enumerate() {
            if let Some((offset, len)) = slot {
                let start = 9 * k + 1 + offset;
                for s in &mut series[start..start + len] {
                    *s = None;
                }
            }
        }
        let filled = impute_gaps(&series).unwrap().into_complete().unwrap();
        for (i, (f, s)) in filled.iter().zip(&series).enumerate() {
            match s {
                Some(v) => prop_assert_eq!(f, v),
                None => {
                    // interpolated values stay between the bounding observations
                    let lo = (0..i).rev().find_map(|j| series[j]).unwrap();
                    let hi = (i..72).find_map(|j| series[j]).unwrap();
                    prop_assert!(*f >= lo.min(hi) - 1e-9 && *f <= lo.max(hi) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn wind_round_trip(wd in 0.0f64..359.9, ws in 0.1f64..30.0) {
        let back = wind_direction(decompose_wind(wd, ws)).unwrap();
        let diff = (back - wd).rem_euclid(360.0);
        prop_assert!(diff.min(360.0 - diff) < 1e-9);
    }

    #[test]
    fn outliers_lie_beyond_three_sd(x in vec(-50.0f64..50.0, 10..200), spike in 500.0f64..5000.0) {
        let mut x = x;
        x.push(spike);
        let d = describe(&x).unwrap();
        let det = detect_outliers(&x);
        for (i, v) in x.iter().enumerate() {
            let far = (v - d.mean).abs() > 3.0 * d.sd;
            prop_assert_eq!(det.mask.is_flagged(i), far, "value {} mean {} sd {}", v, d.mean, d.sd);
        }
    }
}
