//! Dubins lengths against a tangent-circle construction.

mod common;

use std::f64::consts::FRAC_PI_2;

use common::dubins_oracle as oracle;
use ipp_core::path::{connect, dubins_shortest};
use ipp_core::planner::steer;
use ipp_core::{Bounds, Pose};
use proptest::prelude::*;

fn length(s: (f64, f64, f64), g: (f64, f64, f64), r: f64) -> f64 {
    dubins_shortest(s, g, r).unwrap().1.iter().map(|seg| seg.length).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn shortest_matches_tangent_construction(
        x0 in -500.0..500.0f64, y0 in -500.0..500.0f64, p0 in -4.0..4.0f64,
        x1 in -500.0..500.0f64, y1 in -500.0..500.0f64, p1 in -4.0..4.0f64,
        r in 20.0..200.0f64,
    ) {
        prop_assume!((x1 - x0).hypot(y1 - y0) > 1e-3);
        let (s, g) = ((x0, y0, p0), (x1, y1, p1));
        let got = length(s, g, r);
        let want = oracle(s, g, r);
        prop_assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        prop_assert!(got + 1e-9 >= (x1 - x0).hypot(y1 - y0));
        let end = connect(&Pose::new(x0, y0, 50.0, p0), &Pose::new(x1, y1, 50.0, p1), r).unwrap().end();
        prop_assert!((end.x - x1).abs() < 1e-6 && (end.y - y1).abs() < 1e-6);
    }
}

#[test]
fn left_target_at_fifty_metres() {
    let (s, g) = ((0.0, 0.0, 0.0), (0.0, 50.0, FRAC_PI_2));
    let got = length(s, g, 100.0);
    assert!(got > 50.0);
    assert!((got - oracle(s, g, 100.0)).abs() < 1e-6);

    let b = Bounds::new(-1000.0, -1000.0, 1000.0, 1000.0);
    let (_, edge) = steer(&Pose::new(0.0, 0.0, 50.0, 0.0), &Pose::new(0.0, 50.0, 50.0, FRAC_PI_2), 1e4, &b, 100.0).unwrap();
    assert!((edge.length - got).abs() < 1e-9);
}

#[test]
fn oracle_sanity() {
    // Straight ahead, quarter circle and U-turn have closed forms.
    assert!((oracle((0.0, 0.0, 0.0), (300.0, 0.0, 0.0), 100.0) - 300.0).abs() < 1e-9);
    assert!((oracle((0.0, 0.0, 0.0), (100.0, 100.0, FRAC_PI_2), 100.0) - 50.0 * std::f64::consts::PI).abs() < 1e-9);
    assert!((oracle((0.0, 0.0, 0.0), (0.0, 200.0, std::f64::consts::PI), 100.0) - 100.0 * std::f64::consts::PI).abs() < 1e-9);
}
