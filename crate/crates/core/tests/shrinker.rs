use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

use shrinker_lab::catalog::{build_example, build_named, default_entries};
use shrinker_lab::geometry::GeometryOptions;
use shrinker_lab::immersion::{Analytic, Axis, Chart, ChartPoint, ChartRole, GenericMap, Immersion, ImmersionMeta};
use shrinker_lab::jet::Scalar;
use shrinker_lab::sampling::sample_points;
use shrinker_lab::shrinker::{
    drift_identity_residual, mean_curvature_gradient_check, normal_laplacian_residual, expander_residual, normal_derivatives,
    normal_derivatives_with, principal_frame_sigma, shrinker_residual, simons_residual, simons_residual_general,
    DriftMode,
};
use shrinker_lab::LabError;

struct Poly {
    n: usize,
    p: usize,
    c: Vec<f64>,
}

impl GenericMap for Poly {
    fn apply<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let mut out: Vec<S> = u.to_vec();
        for a in 0..self.p {
            let mut acc = u[0].lift(self.c[a % self.c.len()]);
            for i in 0..self.n {
                let k = 3 * (a * self.n + i);
                let ci = |o: usize| self.c[(k + o) % self.c.len()];
                let v = u[i].clone();
                acc = acc + v.clone() * v.clone() * ci(0) + v.clone() * v.clone() * v.clone() * ci(1);
                acc = acc + (v * u[(i + 1) % self.n].clone()).sin() * ci(2);
            }
            out.push(acc);
        }
        out
    }
}

fn random_graph(n: usize, p: usize, c: &[f64]) -> Immersion {
    let chart = Chart::new(
        "graph",
        vec![Axis::compact(-1.0, 1.0); n],
        ChartRole::Both,
        Arc::new(Analytic(Poly { n, p, c: c.to_vec() })),
    );
    Immersion::new(n, p, vec![chart], ImmersionMeta::named("graph")).unwrap()
}

fn unit_sphere() -> Immersion {
    struct S;
    impl GenericMap for S {
        fn apply<T: Scalar>(&self, u: &[T]) -> Vec<T> {
            vec![u[0].sin() * u[1].cos(), u[0].sin() * u[1].sin(), u[0].cos()]
        }
    }
    let chart = Chart::new(
        "angles",
        vec![Axis::polar(0.0, 3.2), Axis::compact(0.0, 6.3)],
        ChartRole::Both,
        Arc::new(Analytic(S)),
    );
    Immersion::new(2, 1, vec![chart], ImmersionMeta::named("unit sphere")).unwrap()
}

#[test]
fn shrinker_residual_values() {
    let pt = ChartPoint::new(0, vec![1.1, 0.4]);
    // radius 1: H = -2 nu and x^perp = nu
    let r = shrinker_residual(&unit_sphere(), &pt).unwrap();
    assert_abs_diff_eq!(r.norm, 1.0, epsilon = 1e-13);
    assert_abs_diff_eq!(r.components[0].abs(), 1.0, epsilon = 1e-13);
    for name in ["sphere:n=2", "sphere:n=3", "plane:n=2", "veronese", "product:1,2+1"] {
        let imm = build_named(name).unwrap();
        for pt in sample_points(&imm, 30, 2) {
            assert!(shrinker_residual(&imm, &pt).unwrap().norm < 1e-12, "{name}");
        }
    }
}

#[test]
fn expander_residual_values() {
    let plane = build_named("plane:n=2").unwrap();
    let pt = ChartPoint::new(0, vec![0.4, -2.0]);
    assert_eq!(expander_residual(&plane, &pt, 0.7).unwrap().norm, 0.0);
    for n in 2..=3 {
        let imm = build_named(&format!("sphere:n={n}")).unwrap();
        let pt = &sample_points(&imm, 1, 0)[0];
        let r = expander_residual(&imm, pt, 1.0).unwrap();
        assert_abs_diff_eq!(r.norm, 2.0 * (n as f64).sqrt(), epsilon = 1e-12);
    }
    let prod = build_named("product:1,1").unwrap();
    let pt = &sample_points(&prod, 1, 0)[0];
    assert!(expander_residual(&prod, pt, 1.0).unwrap().norm > 1.0);
    assert!(matches!(expander_residual(&plane, &pt.clone(), 0.0), Err(LabError::InvalidParameter(_))));
    assert!(matches!(expander_residual(&plane, &pt.clone(), -1.0), Err(LabError::InvalidParameter(_))));
}

#[test]
fn parallel_entries_have_vanishing_normal_derivatives() {
    for spec in default_entries() {
        let imm = build_example(&spec).unwrap();
        for pt in sample_points(&imm, 10, 4) {
            let nd = normal_derivatives(&imm, &pt).unwrap();
            assert!(nd.h_grad.iter().all(|v| v.abs() < 1e-10), "{spec}");
            assert!(nd.mean_curvature_grad.iter().all(|v| v.abs() < 1e-10), "{spec}");
            assert!(nd.laplacian_h.iter().all(|v| v.abs() < 1e-9), "{spec}");
            assert!(nd.half_laplacian_norm_a_sq.abs() < 1e-9, "{spec}");
        }
    }
}

#[test]
fn shrinker_identities_on_catalog() {
    for spec in default_entries() {
        let imm = build_example(&spec).unwrap();
        for pt in sample_points(&imm, 15, 8) {
            for r in [
                mean_curvature_gradient_check(&imm, &pt).unwrap(),
                normal_laplacian_residual(&imm, &pt).unwrap(),
                drift_identity_residual(&imm, &pt, DriftMode::Shrinker, 1.0).unwrap(),
                simons_residual(&imm, &pt).unwrap(),
            ] {
                assert!(r.passed(), "{spec}: {r:?}");
                assert!(r.warning.is_none());
            }
        }
    }
}

#[test]
fn shrinker_identities_with_fd_oracle() {
    for name in ["sphere:n=2", "cylinder:1x1", "product:1,2", "veronese"] {
        let imm = build_named(name).unwrap().with_fd_oracle();
        for pt in sample_points(&imm, 4, 1) {
            for r in [
                mean_curvature_gradient_check(&imm, &pt).unwrap(),
                normal_laplacian_residual(&imm, &pt).unwrap(),
                simons_residual(&imm, &pt).unwrap(),
            ] {
                assert!(r.passed(), "{name}: {r:?}");
                assert!(r.tolerance >= 1e-3);
            }
        }
    }
}

#[test]
fn drift_identity_on_cylinder_matches_flat_laplacian() {
    // |x|^2 = m + |y|^2 so (1/2) Delta |x|^2 = n - m
    let imm = build_named("cylinder:1x2").unwrap();
    for pt in sample_points(&imm, 10, 0) {
        let r = drift_identity_residual(&imm, &pt, DriftMode::Shrinker, 1.0).unwrap();
        assert!(r.value < 1e-7, "{r:?}");
    }
    let plane = build_named("plane:n=2").unwrap();
    let r = drift_identity_residual(&plane, &ChartPoint::new(0, vec![0.5, 1.5]), DriftMode::Expander, 2.0).unwrap();
    assert!(r.value < 1e-7 && r.warning.is_none());
    // the unit sphere is not a shrinker: warning, value still computed
    let r = drift_identity_residual(&unit_sphere(), &ChartPoint::new(0, vec![1.0, 1.0]), DriftMode::Shrinker, 1.0).unwrap();
    assert!(r.warning.is_some());
    assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-6);
}

#[test]
fn principal_sigma_values() {
    let s = principal_frame_sigma(&build_named("sphere:n=3").unwrap(), &ChartPoint::new(0, vec![0.2, 0.3, -0.4])).unwrap();
    assert_abs_diff_eq!(s.sigma_principal, 1.0, epsilon = 1e-12);
    let imm = build_named("product:1,2").unwrap();
    for pt in sample_points(&imm, 10, 0) {
        assert_abs_diff_eq!(principal_frame_sigma(&imm, &pt).unwrap().sigma_principal, 1.0, epsilon = 1e-12);
    }
    // minimal in a sphere of radius r: h along x/r is -(1/r) g, so sigma = n / r^2 = 1
    let imm = build_named("veronese").unwrap();
    for pt in sample_points(&imm, 10, 0) {
        assert_abs_diff_eq!(principal_frame_sigma(&imm, &pt).unwrap().sigma_principal, 1.0, epsilon = 1e-12);
    }
    let plane = build_named("plane:n=2").unwrap();
    assert!(matches!(
        principal_frame_sigma(&plane, &ChartPoint::new(0, vec![0.0, 0.0])),
        Err(LabError::ZeroMeanCurvature { .. })
    ));
}

fn rotation(p: usize, t: &[f64]) -> DMatrix<f64> {
    let mut q = DMatrix::identity(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in i + 1..p {
            let mut g = DMatrix::identity(p, p);
            let (c, s) = (t[k % t.len()].cos(), t[k % t.len()].sin());
            g[(i, i)] = c;
            g[(j, j)] = c;
            g[(i, j)] = s;
            g[(j, i)] = -s;
            q = g * q;
            k += 1;
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn codazzi_and_trace_on_random_graphs(
        c in prop::collection::vec(-1.0f64..1.0, 20),
        u in prop::collection::vec(-0.7f64..0.7, 3),
        n in 1usize..=3,
        p in 1usize..=2,
    ) {
        let imm = random_graph(n, p, &c);
        let pt = ChartPoint::new(0, u[..n].to_vec());
        let nd = normal_derivatives(&imm, &pt).unwrap();
        prop_assert!(nd.symmetry_defect() < 1e-9);
        prop_assert!(nd.trace_defect() < 1e-9);
        let s = simons_residual_general(&imm, &pt).unwrap();
        prop_assert!(s.value < 1e-8, "{:?}", s);
        let fd = imm.with_fd_oracle();
        let nd = normal_derivatives(&fd, &pt).unwrap();
        prop_assert!(nd.symmetry_defect() < 1e-5);
    }

    #[test]
    fn identities_do_not_depend_on_normal_gauge(
        t in prop::collection::vec(-3.0f64..3.0, 3),
        c in prop::collection::vec(-1.0f64..1.0, 20),
        u in prop::collection::vec(-0.7f64..0.7, 2),
    ) {
        let imm = random_graph(2, 3, &c);
        let pt = ChartPoint::new(0, u);
        let opts = GeometryOptions { normal_gauge: Some(rotation(3, &t)), ..Default::default() };
        let a = normal_derivatives(&imm, &pt).unwrap();
        let b = normal_derivatives_with(&imm, &pt, &opts).unwrap();
        prop_assert!((a.grad_h_norm_sq - b.grad_h_norm_sq).abs() < 1e-10);
        let la: f64 = a.laplacian_h.norm();
        let lb: f64 = b.laplacian_h.norm();
        prop_assert!((la - lb).abs() < 1e-10);
        let ga: f64 = a.h_grad.iter().map(|v| v * v).sum();
        let gb: f64 = b.h_grad.iter().map(|v| v * v).sum();
        prop_assert!((ga - gb).abs() < 1e-10);
    }
}

#[test]
fn sphere_product_principal_sigma_is_gauge_invariant() {
    let imm = build_named("product:1,1").unwrap();
    let pt = &sample_points(&imm, 1, 3)[0];
    let base = principal_frame_sigma(&imm, pt).unwrap().sigma_principal;
    for t in [0.3, 1.7, -2.2] {
        let opts = GeometryOptions { normal_gauge: Some(rotation(2, &[t])), ..Default::default() };
        let pg = shrinker_lab::geometry::pointwise_geometry_with(&imm, pt, &opts).unwrap();
        let s = shrinker_lab::shrinker::principal_sigma_of(&pg).unwrap().sigma_principal;
        assert_abs_diff_eq!(s, base, epsilon = 1e-10);
    }
}
