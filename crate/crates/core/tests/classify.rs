use std::sync::Arc;

use proptest::prelude::*;

use shrinker_lab::al::{al_shoot_closed, to_immersion, ShootOptions};
use shrinker_lab::catalog::{build_example, build_named, default_entries, CatalogSpec};
use shrinker_lab::classify::{classify, ClassificationCase, ClassifyOptions};
use shrinker_lab::immersion::{Axis, Chart, ChartMap, ChartRole, Immersion, ImmersionMeta};
use shrinker_lab::LabError;

fn expected(spec: &CatalogSpec) -> ClassificationCase {
    // written from the shape of the entry alone
    let name = spec.name();
    if name.starts_with("plane") {
        ClassificationCase::Hyperplane
    } else if name.starts_with("sphere") {
        ClassificationCase::RoundSphere
    } else if name.starts_with("cylinder") {
        ClassificationCase::Cylinder
    } else if name.starts_with("veronese") {
        ClassificationCase::SphereMinimal
    } else {
        ClassificationCase::OutsideHypotheses
    }
}

#[test]
fn catalog_cases() {
    for spec in default_entries() {
        let imm = build_example(&spec).unwrap();
        let r = classify(&imm, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.case, expected(&spec), "{}: {:?}", spec.name(), r.evidence);
        assert_eq!(r.dimension, spec.dim());
        assert_eq!(r.hypothesis_flags.compact, spec.compact());
    }
}

#[test]
fn closed_products_raise_both_exact_flags() {
    for name in ["product:1,1", "product:1,2", "product:2,2", "veronese"] {
        let imm = build_named(name).unwrap();
        let r = classify(&imm, &ClassifyOptions::default()).unwrap();
        let f = &r.hypothesis_flags;
        assert!(f.sphere_minimal_mean_curvature && f.sphere_minimal_position, "{name}");
        assert!(f.mean_curvature_sq_at_least_n);
    }
    let r = classify(&build_named("product:1,2+1").unwrap(), &ClassifyOptions::default()).unwrap();
    assert!(!r.hypothesis_flags.sphere_minimal_position);
    let r = classify(&build_named("sphere:n=2").unwrap(), &ClassifyOptions::default()).unwrap();
    assert!(r.hypothesis_flags.norm_a_sq_at_most_one);
    assert!(r.hypothesis_flags.principal_sigma_at_most_one);
    assert_eq!(r.hypothesis_flags.polynomial_volume_growth, "assumed");
}

#[test]
fn plane_has_no_principal_direction() {
    let r = classify(&build_named("plane:n=2").unwrap(), &ClassifyOptions::default()).unwrap();
    assert!(r.evidence.sup_sigma_principal.is_none());
    assert!(!r.hypothesis_flags.principal_sigma_at_most_one);
    assert!(r.evidence.sup_mean_curvature_sq < 1e-20);
}

#[test]
fn noncircular_curve_is_outside() {
    let curve = al_shoot_closed(1.0, 1.8, &ShootOptions::default()).unwrap();
    let imm = to_immersion(&curve, "curve").unwrap();
    let r = classify(&imm, &ClassifyOptions::default()).unwrap();
    assert_eq!(r.case, ClassificationCase::OutsideHypotheses);
    assert!(r.evidence.sup_grad_h > 1e-3);
    assert!(r.evidence.sup_norm_a_sq > 1.0);
}

struct WideCircle;

impl ChartMap for WideCircle {
    fn eval(&self, u: &[f64]) -> Vec<f64> {
        vec![2.0 * u[0].cos(), 2.0 * u[0].sin()]
    }
}

#[test]
fn non_shrinker_is_rejected() {
    let chart = Chart::new(
        "angle",
        vec![Axis::compact(0.0, std::f64::consts::TAU)],
        ChartRole::Both,
        Arc::new(WideCircle),
    );
    let imm = Immersion::new(1, 1, vec![chart], ImmersionMeta::named("circle of radius 2")).unwrap();
    let err = classify(&imm, &ClassifyOptions::default()).unwrap_err();
    assert!(matches!(err, LabError::NotAShrinker { residual, .. } if (residual - 1.5).abs() < 1e-4));
}

#[test]
fn report_serializes_case_in_snake_case() {
    let r = classify(&build_named("cylinder:1x1").unwrap(), &ClassifyOptions::default()).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["case"], "cylinder");
    assert_eq!(ClassificationCase::SphereMinimal.to_string(), "sphere_minimal");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn case_is_stable_under_halved_thresholds(idx in 0usize..11, seed in 0u64..1000) {
        let spec = default_entries()[idx].clone();
        let imm = build_example(&spec).unwrap();
        let base = ClassifyOptions { points: 40, seed, ..Default::default() };
        let halved = ClassifyOptions {
            tolerance: base.tolerance / 2.0,
            constancy_tolerance: base.constancy_tolerance / 2.0,
            exact_tolerance: base.exact_tolerance / 2.0,
            ..base.clone()
        };
        let a = classify(&imm, &base).unwrap();
        let b = classify(&imm, &halved).unwrap();
        prop_assert_eq!(a.case, b.case);
        prop_assert_eq!(a.case, expected(&spec));
    }
}
