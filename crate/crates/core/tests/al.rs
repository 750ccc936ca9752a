use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use shrinker_lab::al::{
    al_circle, al_first_integral, al_integrate, al_shoot_closed, half_period, reachable_target, to_immersion, ALState,
    RotationIndex, ShootOptions,
};
use shrinker_lab::fd;
use shrinker_lab::immersion::ChartPoint;
use shrinker_lab::quadrature::{gradient_balance, QuadratureSpec};
use shrinker_lab::sampling::sample_points;
use shrinker_lab::shrinker::{
    drift_identity_residual, mean_curvature_gradient_check, normal_laplacian_residual, normal_derivatives, shrinker_residual, DriftMode,
};
use shrinker_lab::LabError;

#[test]
fn unit_circle_closes_with_constant_integral() {
    let c = al_integrate(&ALState::launch(1.0), 2.0 * PI, 1e-3).unwrap();
    assert!(c.closure_residual < 1e-10, "{}", c.closure_residual);
    for s in &c.samples {
        assert_abs_diff_eq!(s.k, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.k * (-(s.x[0] * s.x[0] + s.x[1] * s.x[1]) / 2.0).exp(), (-0.5f64).exp(), epsilon = 1e-10);
        // the unit circle through (1, 0) at arclength s
        assert_abs_diff_eq!(s.x[0], s.s.cos(), epsilon = 1e-10);
        assert_abs_diff_eq!(s.x[1], s.s.sin(), epsilon = 1e-10);
    }
    assert!(al_first_integral(&c) < 1e-12);
    let circle = al_circle(1e-3).unwrap();
    assert!(circle.closed);
    assert_eq!(circle.rotation_index, Some(RotationIndex { p: 1, q: 1 }));
    let same = al_shoot_closed(1.0, 1.0, &ShootOptions::default()).unwrap();
    assert!(same.closure_residual < 1e-10);
}

#[test]
fn spiral_arc_stays_on_its_first_integral() {
    let c = al_integrate(&ALState::launch(0.7), 20.0, 1e-3).unwrap();
    assert!(!c.closed);
    assert!(c.first_integral_drift < 1e-6);
    assert!(c.closure_residual > 1e-3);
    assert_abs_diff_eq!(c.length(), 20.0, epsilon = 1e-12);
    for s in &c.samples {
        let n = [-s.t[1], s.t[0]];
        assert_abs_diff_eq!(s.k, -(s.x[0] * n[0] + s.x[1] * n[1]), epsilon = 1e-14);
        assert_abs_diff_eq!(s.t[0].hypot(s.t[1]), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn drift_converges_at_fourth_order() {
    let drift = |h: f64| al_integrate(&ALState::launch(0.7), 20.0, h).unwrap().first_integral_drift;
    let hs = [0.02, 0.01, 0.005, 0.0025];
    let d: Vec<f64> = hs.iter().map(|&h| drift(h)).collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio} from {d:?}");
    }
}

#[test]
fn invalid_integration_requests() {
    let start = ALState::launch(0.7);
    assert!(matches!(al_integrate(&start, 20.0, 0.0), Err(LabError::InvalidParameter(_))));
    assert!(matches!(al_integrate(&start, -1.0, 0.1), Err(LabError::InvalidParameter(_))));
    let bent = ALState {
        tangent: [0.0, 1.1],
        ..start
    };
    assert!(matches!(al_integrate(&bent, 1.0, 0.01), Err(LabError::InvalidParameter(_))));
    assert!(matches!(al_integrate(&ALState::launch(1.6), 20.0, 0.5), Err(LabError::StepTooLarge { .. })));
}

#[test]
fn half_period_sweep_brackets() {
    let near = half_period(1.0 + 1e-4, 1e-3).unwrap();
    assert_abs_diff_eq!(near.angle, PI / 2f64.sqrt(), epsilon = 1e-6);
    let a = half_period(1.8, 1e-3).unwrap().angle;
    let b = half_period(2.5, 1e-3).unwrap().angle;
    assert!(a > b && b > PI / 2.0);
    // 2/3 of a half turn sits between the two sweeps
    assert_eq!(reachable_target(a, b), Some(RotationIndex { p: 2, q: 3 }));
    assert_eq!(reachable_target(PI / 2f64.sqrt(), a), Some(RotationIndex { p: 7, q: 10 }));
}

#[test]
fn shooting_closes_a_noncircular_curve() {
    let opts = ShootOptions {
        target: Some(RotationIndex { p: 2, q: 3 }),
        ..Default::default()
    };
    let c = al_shoot_closed(1.5, 2.5, &opts).unwrap();
    assert!(c.closed);
    assert!(c.closure_residual < 1e-6, "{}", c.closure_residual);
    assert!(c.curvature_ratio() > 1.5);
    assert_eq!(c.rotation_index, Some(RotationIndex { p: 2, q: 3 }));
    // winding 2 about the origin: total polar angle 4 pi
    let mut turn = 0.0;
    for w in c.samples.windows(2) {
        let (a, b) = (w[0].x, w[1].x);
        turn += (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
    }
    assert_abs_diff_eq!(turn, 4.0 * PI, epsilon = 1e-6);

    let auto = al_shoot_closed(1.0, 1.8, &ShootOptions::default()).unwrap();
    assert!(auto.closure_residual < 1e-6);
    assert!(auto.curvature_ratio() > 1.2);
    assert_eq!(auto.rotation_index, Some(RotationIndex { p: 7, q: 10 }));
}

#[test]
fn shooting_errors() {
    let opts = ShootOptions {
        target: Some(RotationIndex { p: 2, q: 3 }),
        ..Default::default()
    };
    assert!(matches!(al_shoot_closed(1.0, 1.8, &opts), Err(LabError::NoClosure(_))));
    assert!(matches!(al_shoot_closed(1.3, 1.3, &opts), Err(LabError::NoClosure(_))));
    assert!(matches!(al_shoot_closed(-1.0, 1.3, &opts), Err(LabError::InvalidParameter(_))));
    for bad in [RotationIndex { p: 1, q: 1 }, RotationIndex { p: 4, q: 6 }, RotationIndex { p: 3, q: 4 }] {
        let o = ShootOptions {
            target: Some(bad),
            ..Default::default()
        };
        assert!(matches!(al_shoot_closed(1.5, 2.5, &o), Err(LabError::InvalidParameter(_))), "{bad}");
    }
}

#[test]
fn csv_export_has_header_and_rows() {
    let c = al_circle(0.1).unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,x1,x2,k"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), c.samples.len());
    assert!(rows.iter().all(|r| r.len() == 4));
}

#[test]
fn wrapped_curve_is_a_shrinker_with_consistent_jets() {
    let curve = al_shoot_closed(1.0, 1.8, &ShootOptions::default()).unwrap();
    let imm = to_immersion(&curve, "curve").unwrap();
    assert!(imm.is_compact());
    let chart = &imm.charts[0];
    for pt in sample_points(&imm, 40, 3) {
        assert!(shrinker_residual(&imm, &pt).unwrap().norm < 1e-10);
        // jets from the curve equation against differences of the position
        let jets = imm.position_jets(&pt, 2).unwrap();
        let fd_jets = fd::jets(&|u: &[f64]| chart.position(u), &pt.u, 2);
        for (a, b) in jets.iter().zip(&fd_jets) {
            // arclength runs to ~45, so the difference steps are coarse
            assert_abs_diff_eq!(a.d1(0), b.d1(0), epsilon = 1e-5);
            assert_abs_diff_eq!(a.d2(0, 0), b.d2(0, 0), epsilon = 1e-3);
        }
    }
    // periodic chart: both ends name the same point
    let a = imm.position(&ChartPoint::new(0, vec![0.0]));
    let b = imm.position(&ChartPoint::new(0, vec![curve.length()]));
    assert!((a[0] - b[0]).abs() + (a[1] - b[1]).abs() < 1e-12);
}

#[test]
fn identities_on_the_curve() {
    let curve = al_shoot_closed(1.0, 1.8, &ShootOptions::default()).unwrap();
    let imm = to_immersion(&curve, "curve").unwrap();
    let mut moving = 0.0f64;
    for pt in sample_points(&imm, 40, 5) {
        let nd = normal_derivatives(&imm, &pt).unwrap();
        moving = moving.max(nd.grad_h_norm_sq);
        assert!(nd.symmetry_defect() < 1e-8);
        assert!(mean_curvature_gradient_check(&imm, &pt).unwrap().value < 1e-8);
        assert!(normal_laplacian_residual(&imm, &pt).unwrap().value < 1e-8);
        assert!(drift_identity_residual(&imm, &pt, DriftMode::Shrinker, 1.0).unwrap().value < 1e-5);
    }
    assert!(moving > 1e-3, "noncircular curve must have nonparallel H");

    let fd = to_immersion(&curve, "curve").unwrap().with_fd_oracle();
    for pt in sample_points(&fd, 20, 6) {
        assert!(shrinker_residual(&fd, &pt).unwrap().norm < 1e-3);
    }
}

#[test]
fn gradient_balance_on_the_curve() {
    let curve = al_shoot_closed(1.0, 1.8, &ShootOptions::default()).unwrap();
    let imm = to_immersion(&curve, "curve").unwrap();
    let b = gradient_balance(&imm, &QuadratureSpec::default()).unwrap();
    assert!(b.lhs > 0.1);
    assert!(b.relative_residual() < 1e-3, "{b:?}");
    assert!(b.slack() >= -1e-6);
    // curves: the bound is int (k^2 - 1) k^2, the same integrand as the equality side
    assert_abs_diff_eq!(b.rhs_bound, b.rhs_equality, epsilon = 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn first_integral_is_conserved(r0 in 0.3f64..2.0, step in 1e-3f64..5e-3) {
        let c = al_integrate(&ALState::launch(r0), 10.0, step).unwrap();
        prop_assert!(c.first_integral_drift / 10.0 < 1e-6);
        for s in &c.samples {
            prop_assert!((s.t[0].hypot(s.t[1]) - 1.0).abs() < 1e-12);
        }
    }
}
