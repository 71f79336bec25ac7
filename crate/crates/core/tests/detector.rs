use lgtquench_core::dqpt::{
    detect, detect_crossings, on_total_rate, spacing_statistics, DQPTEvent, DetectorOptions, EventKind, Manifold,
    ReturnRateSeries,
};
use proptest::prelude::*;

fn grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}

/// Two straight branches crossing at `tc`, stored sorted as a detector would
/// receive them from an eigensolver.
fn crossing_pair(t: &[f64], tc: f64, s1: f64, s2: f64, base: f64) -> Vec<Vec<f64>> {
    let a: Vec<f64> = t.iter().map(|x| base + s1 * (x - tc)).collect();
    let b: Vec<f64> = t.iter().map(|x| base + s2 * (x - tc)).collect();
    vec![a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(), a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()]
}

fn smooth(t: &[f64], a: f64, w: f64, c: f64) -> Vec<f64> {
    t.iter().map(|x| c + a * (w * x).sin()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn straight_branch_crossing_is_located(tc in 0.3f64..1.7, s1 in 0.2f64..2.0, s2 in -2.0f64..-0.2, base in 0.1f64..1.0) {
        let t = grid(201, 0.01);
        let s = ReturnRateSeries::new(t.clone(), crossing_pair(&t, tc, s1, s2, base), vec![]).unwrap();
        let ev = detect_crossings(&s, &DetectorOptions::default());
        prop_assert_eq!(ev.len(), 1, "{:?}", ev);
        prop_assert_eq!(ev[0].kind, EventKind::Branch);
        prop_assert!((ev[0].time - tc).abs() < 1e-9, "{} vs {}", ev[0].time, tc);
    }

    #[test]
    fn events_do_not_depend_on_a_common_offset(
        tc in 0.3f64..1.7,
        tm in 0.3f64..1.7,
        s1 in 0.2f64..2.0,
        s2 in -2.0f64..-0.2,
        c in -5.0f64..5.0,
    ) {
        let t = grid(201, 0.01);
        let plus = crossing_pair(&t, tc, s1, s2, 0.5);
        let minus = vec![t.iter().zip(&plus[0]).map(|(x, p)| p + 0.3 * (x - tm)).collect()];
        let s = ReturnRateSeries::new(t, plus, minus).unwrap();
        let opts = DetectorOptions::default();
        let a = detect(&s, &opts);
        let b = detect(&s.shifted(c), &opts);
        prop_assert_eq!(a.events.len(), b.events.len(), "{:?} vs {:?}", a.events, b.events);
        for (x, y) in a.events.iter().zip(&b.events) {
            prop_assert_eq!((x.kind, x.manifold), (y.kind, y.manifold));
            prop_assert!((x.time - y.time).abs() < 1e-6, "{} vs {}", x.time, y.time);
        }
    }

    #[test]
    fn detection_is_deterministic_and_sorted(a in 0.05f64..0.5, w in 1.0f64..8.0, seed in 0u64..1000) {
        let t = grid(301, 0.01);
        let phase = seed as f64 * 0.01;
        let b0 = smooth(&t, a, w, 0.4);
        let b1: Vec<f64> = t.iter().zip(&b0).map(|(x, y)| y + (w * x + phase).cos().abs() * 0.2).collect();
        let m0 = smooth(&t, a, 0.5 * w, 0.5);
        let s = ReturnRateSeries::new(t, vec![b0, b1], vec![m0]).unwrap();
        let opts = DetectorOptions::default();
        let first = detect(&s, &opts);
        prop_assert_eq!(&first, &detect(&s, &opts));
        prop_assert!(first.events.windows(2).all(|p| p[0].time <= p[1].time));
        prop_assert!(first.events.iter().all(|e| e.time >= 0.0 && e.time <= 3.0));
    }

    #[test]
    fn periodic_events_are_perfectly_regular(t0 in 0.0f64..2.0, period in 0.1f64..5.0, n in 2usize..20) {
        let events: Vec<DQPTEvent> = (0..n)
            .map(|k| DQPTEvent { time: t0 + k as f64 * period, kind: EventKind::Branch, manifold: Manifold::Plus, confidence: 0.0 })
            .collect();
        let stats = spacing_statistics(&events, Some(EventKind::Branch), None);
        prop_assert_eq!(stats.spacings.len(), n - 1);
        prop_assert!((stats.mean.unwrap() - period).abs() < 1e-9 * period.max(1.0) * n as f64);
        prop_assert!(stats.regularity.unwrap() < 1e-8);
    }

    #[test]
    fn spacing_statistics_ignore_event_order(times in prop::collection::vec(0.0f64..10.0, 2..12), rot in 0usize..12) {
        let mk = |t: &f64| DQPTEvent { time: *t, kind: EventKind::Manifold, manifold: Manifold::Minus, confidence: 0.0 };
        let events: Vec<DQPTEvent> = times.iter().map(mk).collect();
        let mut rotated = events.clone();
        rotated.rotate_left(rot % events.len());
        rotated.reverse();
        prop_assert_eq!(spacing_statistics(&events, None, None), spacing_statistics(&rotated, None, None));
        prop_assert_eq!(spacing_statistics(&events, Some(EventKind::Branch), None).mean, None);
    }
}

#[test]
fn manifold_event_marks_the_newly_lower_manifold() {
    let t = grid(101, 0.02);
    let plus = vec![t.iter().map(|x| 0.1 + 0.4 * x).collect()];
    let minus = vec![t.iter().map(|x| 0.9 - 0.4 * x).collect()];
    let s = ReturnRateSeries::new(t, plus, minus).unwrap();
    let d = detect(&s, &DetectorOptions::default());
    assert_eq!(d.count(EventKind::Manifold), 1);
    let e = d.events[0];
    assert_eq!(e.manifold, Manifold::Minus);
    assert!((e.time - 1.0).abs() < 1e-12);
    assert!(on_total_rate(&s, &e));
}

#[test]
fn hidden_branch_crossing_is_not_on_the_total_rate() {
    let t = grid(201, 0.01);
    let plus = crossing_pair(&t, 1.0, 0.5, -0.5, 2.0);
    let minus = vec![vec![0.3; t.len()]];
    let s = ReturnRateSeries::new(t, plus, minus).unwrap();
    let d = detect(&s, &DetectorOptions::default());
    assert_eq!(d.count(EventKind::Branch), 1);
    assert!(!on_total_rate(&s, &d.events[0]));
}
