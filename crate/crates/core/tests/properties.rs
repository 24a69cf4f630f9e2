use chrono::{Days, NaiveDate};
use nalgebra::Vector3;
use ndarray::{s, Array3};
use proptest::prelude::*;

use site_lookahead::calendar::WorkCalendar;
use site_lookahead::features::{decompose_date, Vocabulary};
use site_lookahead::geometry::{
    apply_rigid_transform, build_enclosure, classify_points, compute_spatial_metrics,
    estimate_rigid_transform, load_point_cloud, read_metrics, rms_residual, save_point_cloud,
    write_metrics, CloudFormat, Frame, Point3, PointCloud, RigidTransform, SpatialMetrics,
    DEFAULT_ALLOWANCE,
};
use site_lookahead::gru::{init_params, predict};
use site_lookahead::synth::{
    gen_progress, gen_scene, random_scene_spec, ProgressCurve, SynthProgressSpec,
};

fn day(offset: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 1, 3).unwrap() + Days::new(offset)
}

fn coord() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn point() -> impl Strategy<Value = Point3> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (
        (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64),
        -3.1..3.1f64,
        (coord(), coord(), coord()),
    )
        .prop_map(|((ax, ay, az), angle, (tx, ty, tz))| {
            RigidTransform::from_axis_angle(
                Vector3::new(ax, ay, az),
                angle,
                Vector3::new(tx, ty, tz),
            )
        })
}

fn metrics_for(cloud: &PointCloud, elements: &[site_lookahead::bim::BimElement], date: NaiveDate) -> SpatialMetrics {
    let enclosures: Vec<_> = elements
        .iter()
        .map(|e| build_enclosure(&e.vertices, e.id.clone(), DEFAULT_ALLOWANCE).unwrap())
        .collect();
    let result = classify_points(cloud, &enclosures).unwrap();
    compute_spatial_metrics(&result, cloud, "floor", date).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn registration_recovers_any_rigid_motion(t in transform(), pts in prop::collection::vec(point(), 4..20)) {
        let centroid = pts.iter().fold(Vector3::zeros(), |a, p| a + p.to_vector()) / pts.len() as f64;
        let spread = pts.iter().map(|p| (p.to_vector() - centroid).norm()).fold(0.0, f64::max);
        prop_assume!(spread > 1.0);
        let dst: Vec<Point3> = pts.iter().map(|p| t.apply(p)).collect();
        let est = estimate_rigid_transform(&pts, &dst).unwrap();
        prop_assert!(rms_residual(&est, &pts, &dst) < 1e-8);
    }

    #[test]
    fn inverse_undoes_transform(t in transform(), p in point()) {
        let q = t.inverse().apply(&t.apply(&p));
        prop_assert!(p.distance(&q) < 1e-9);
    }

    #[test]
    fn generated_scenes_classify_to_ground_truth(seed in any::<u64>()) {
        let date = day(0);
        let scene = gen_scene(&random_scene_spec(seed, date)).unwrap();
        let got = metrics_for(&scene.cloud, &scene.elements, date);
        let want = &scene.expected;
        prop_assert_eq!((got.n_temp, got.n_floor), (want.n_temp, want.n_floor));
        prop_assert_eq!(got.utilization_extent, want.utilization_extent);
        prop_assert!((0.0..=1.0).contains(&got.utilization_extent));
        prop_assert_eq!(got.closeness.is_some(), got.n_temp > 0);
    }

    #[test]
    fn scanner_frame_round_trip_preserves_metrics(seed in any::<u64>(), t in transform()) {
        let date = day(1);
        let scene = gen_scene(&random_scene_spec(seed, date)).unwrap();
        let raw = scene.in_scanner_frame(&t);
        prop_assert_eq!(raw.frame, Frame::Scanner);
        let back = apply_rigid_transform(&raw, &t.inverse()).unwrap();
        let got = metrics_for(&back, &scene.elements, date);
        prop_assert_eq!(got.utilization_extent, scene.expected.utilization_extent);
        if let (Some(a), Some(b)) = (got.closeness, scene.expected.closeness) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cloud_files_are_lossless(pts in prop::collection::vec(point(), 1..50), ply in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let (path, fmt) = if ply {
            (dir.path().join("c.ply"), CloudFormat::PlyAscii)
        } else {
            (dir.path().join("c.xyz"), CloudFormat::XyzAscii)
        };
        let cloud = PointCloud::new(pts, Frame::Scanner);
        save_point_cloud(&cloud, &path, fmt).unwrap();
        prop_assert_eq!(load_point_cloud(&path, fmt).unwrap(), cloud);
    }

    #[test]
    fn metrics_log_is_lossless(
        rows in prop::collection::vec(
            (0u64..400, prop::option::of((coord(), coord(), coord())), 0usize..1000, 0usize..1000),
            1..10,
        )
    ) {
        let metrics: Vec<SpatialMetrics> = rows
            .into_iter()
            .filter(|r| r.2 + r.3 > 0)
            .map(|(d, c, t, f)| SpatialMetrics {
                capture_date: day(d),
                closeness: if t > 0 { c.map(|(x, y, z)| [x, y, z]) } else { None },
                utilization_extent: t as f64 / (t + f) as f64,
                n_temp: t,
                n_floor: f,
            })
            .collect();
        let mut buf = Vec::new();
        write_metrics(&mut buf, &metrics).unwrap();
        prop_assert_eq!(read_metrics(buf.as_slice()).unwrap(), metrics);
    }

    #[test]
    fn predictions_are_per_window(seed in 0u64..1000, batch in 2usize..5) {
        // A window's forecast must not depend on what else is in the batch.
        let p = init_params(seed, 3, 4).unwrap();
        let x = Array3::from_shape_fn((batch, 5, 4), |(b, t, d)| {
            ((seed as f64 + b as f64 * 1.7 + t as f64 * 0.3 + d as f64) * 0.37).sin()
        });
        let all = predict(&p, x.view(), 5).unwrap();
        for b in 0..batch {
            let one = predict(&p, x.slice(s![b..b + 1, .., ..]), 5).unwrap();
            for h in 0..5 {
                prop_assert_eq!(one[[0, h]], all[[b, h]]);
            }
        }
    }

    #[test]
    fn progress_is_monotone_and_bounded(
        steps in prop::collection::vec((1u64..30, 0.0..40.0f64), 1..6),
        noise in 0.0..10.0f64,
        seed in any::<u64>(),
    ) {
        let mut d = 0;
        let mut pct = 0.0f64;
        let mut breakpoints = vec![(day(0), 0.0)];
        for (gap, rise) in steps {
            d += gap;
            pct = (pct + rise).min(100.0);
            breakpoints.push((day(d), pct));
        }
        let spec = SynthProgressSpec {
            start: day(0),
            end: day(d + 10),
            calendar: WorkCalendar::default(),
            curves: vec![ProgressCurve { material_condition: "x".into(), breakpoints }],
            noise,
            seed,
        };
        let p = gen_progress(&spec).unwrap();
        let v = &p.actuals["x"];
        prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(v.iter().all(|x| (0.0..=100.0).contains(x)));
        if noise == 0.0 {
            prop_assert_eq!(*v.last().unwrap(), pct);
        }
    }

    #[test]
    fn working_days_are_ordered_weekdays(start in 0u64..800, n in 0usize..60, holidays in prop::collection::vec(0u64..900, 0..10)) {
        let cal = WorkCalendar::new(holidays.iter().map(|&h| day(h)));
        let days = cal.working_days_from(day(start), n);
        prop_assert_eq!(days.len(), n);
        prop_assert!(days.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(days.iter().all(|d| cal.is_working_day(*d) && *d >= day(start)));
        if let (Some(first), Some(last)) = (days.first(), days.last()) {
            prop_assert_eq!(cal.working_days_between(*first, *last), days.clone());
        }
    }

    #[test]
    fn codes_are_injective(n in 1usize..=15) {
        let names: Vec<String> = (0..n).map(|i| format!("condition {i}")).collect();
        let vocab = Vocabulary::new(names.clone()).unwrap();
        let mut codes: Vec<_> = names.iter().map(|t| vocab.encode(t).unwrap()).collect();
        for (t, c) in names.iter().zip(&codes) {
            prop_assert_eq!(vocab.decode(*c), Some(t.as_str()));
            prop_assert!(c.contains(&1));
        }
        codes.sort();
        codes.dedup();
        prop_assert_eq!(codes.len(), n);
    }

    #[test]
    fn dates_decompose(offset in 0u64..20_000) {
        let d = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap() + Days::new(offset);
        let (dd, mm, yy) = decompose_date(d);
        prop_assert_eq!(NaiveDate::from_ymd_opt(yy, mm, dd), Some(d));
    }
}
