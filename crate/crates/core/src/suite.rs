//! Verification runs over named targets and their JSON reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::al::{al_shoot_closed, to_immersion, ALCurve, RotationIndex, ShootOptions};
use crate::catalog::{build_example, default_entries, CatalogKind, CatalogSpec};
use crate::classify::{classify, ClassificationCase, ClassificationReport, ClassifyOptions};
use crate::error::{LabError, Result};
use crate::geometry::{height_probe_check, structure_residuals};
use crate::immersion::Immersion;
use crate::quadrature::{gradient_balance, position_laplacian_integrals, QuadratureSpec};
use crate::sampling::sample_points;
use crate::shrinker::{
    drift_identity_residual, scheme_tolerance, shrinker_identity_residuals, shrinker_residual, DriftMode,
    IdentityResidual,
};

/// The bracket used by `all`.
pub const DEFAULT_CURVE_BRACKET: (f64, f64) = (1.0, 1.8);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Measured `|H|^2`, `|A|^2`, `|x|^2`, scalar curvature against known values.
    pub invariant: f64,
    /// Relative tolerance of the weighted gradient balance when its sides are nonzero.
    pub balance_relative: f64,
    /// Smallest accepted `rhs_bound - lhs`, as a negative slack.
    pub bound_slack: f64,
    /// Relative tolerance of the weighted position-Laplacian identity.
    pub position_laplacian_relative: f64,
    /// Absolute tolerance of the unweighted position-Laplacian integral.
    pub unweighted_position_laplacian: f64,
    /// Residual-type classification evidence.
    pub classification: f64,
    /// Constancy checks in classification.
    pub constancy: f64,
    /// Exact flags in classification.
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            invariant: 1e-8,
            balance_relative: 1e-3,
            bound_slack: 1e-6,
            position_laplacian_relative: 1e-4,
            unweighted_position_laplacian: 1e-8,
            classification: 1e-6,
            constancy: 1e-4,
            exact: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub quadrature: QuadratureSpec,
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Sample points per target for pointwise checks.
    pub points: usize,
    pub classify_points: usize,
    pub shoot: ShootOptions,
    /// Wall-clock timings make reports differ between runs, so they are opt-in.
    pub record_timings: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            quadrature: QuadratureSpec::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            points: 200,
            classify_points: 200,
            shoot: ShootOptions::default(),
            record_timings: false,
        }
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: SuiteConfig = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate().map_err(|e| LabError::Config(e.to_string()))?;
        if self.points == 0 || self.classify_points == 0 {
            return Err(LabError::Config("point counts must be positive".into()));
        }
        Ok(())
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            points: self.classify_points,
            seed: self.seed,
            tolerance: self.tolerances.classification,
            constancy_tolerance: self.tolerances.constancy,
            exact_tolerance: self.tolerances.exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Catalog(CatalogSpec),
    /// A closed planar curve shot over a launch-curvature bracket.
    Curve { k0_min: f64, k0_max: f64 },
}

impl Target {
    pub fn name(&self) -> String {
        match self {
            Target::Catalog(s) => s.name(),
            Target::Curve { k0_min, k0_max } => format!("al:k0-bracket={k0_min},{k0_max}"),
        }
    }

    /// The case a correct classification must return, when known in advance.
    pub fn expected_case(&self) -> Option<ClassificationCase> {
        match self {
            Target::Catalog(s) => Some(match s.kind {
                CatalogKind::Plane => ClassificationCase::Hyperplane,
                CatalogKind::Sphere => ClassificationCase::RoundSphere,
                CatalogKind::CylinderProduct if s.spheres.len() == 1 => ClassificationCase::Cylinder,
                CatalogKind::Veronese => ClassificationCase::SphereMinimal,
                _ => ClassificationCase::OutsideHypotheses,
            }),
            Target::Curve { .. } => Some(ClassificationCase::OutsideHypotheses),
        }
    }
}

/// Parses a target name; `all` expands to the catalog plus one curve.
pub fn parse_targets(name: &str) -> Result<Vec<Target>> {
    let name = name.trim();
    if name == "all" {
        let mut out: Vec<Target> = default_entries().into_iter().map(Target::Catalog).collect();
        let (k0_min, k0_max) = DEFAULT_CURVE_BRACKET;
        out.push(Target::Curve { k0_min, k0_max });
        return Ok(out);
    }
    if let Some(rest) = name.strip_prefix("al:") {
        let bad = || LabError::UnknownTarget(name.to_string());
        let bracket = rest.trim().strip_prefix("k0-bracket=").ok_or_else(bad)?;
        let (a, b) = bracket.split_once(',').ok_or_else(bad)?;
        let k0_min = a.trim().parse::<f64>().map_err(|_| bad())?;
        let k0_max = b.trim().parse::<f64>().map_err(|_| bad())?;
        return Ok(vec![Target::Curve { k0_min, k0_max }]);
    }
    let head = name.split(':').next().unwrap_or_default();
    if !["plane", "sphere", "cylinder", "product", "veronese"].contains(&head) {
        return Err(LabError::UnknownTarget(name.to_string()));
    }
    Ok(vec![Target::Catalog(CatalogSpec::parse(name)?)])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub expected: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegralCheck {
    pub name: String,
    pub lhs: f64,
    /// The value `lhs` is compared against.
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub truncation_error_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveSummary {
    pub launch_curvature: f64,
    pub rotation_index: Option<RotationIndex>,
    pub length: f64,
    pub closure_residual: f64,
    pub first_integral_drift: f64,
    pub curvature_ratio: f64,
}

impl CurveSummary {
    fn of(c: &ALCurve) -> Self {
        CurveSummary {
            launch_curvature: c.launch_curvature(),
            rotation_index: c.rotation_index,
            length: c.length(),
            closure_residual: c.closure_residual,
            first_integral_drift: c.first_integral_drift,
            curvature_ratio: c.curvature_ratio(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetReport {
    pub target: String,
    pub invariants: Vec<InvariantCheck>,
    /// Worst residual of each pointwise identity over the sample set.
    pub residuals: Vec<IdentityResidual>,
    pub integrals: Vec<IntegralCheck>,
    pub classification: Option<ClassificationReport>,
    pub expected_case: Option<ClassificationCase>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curve: Option<CurveSummary>,
    pub points: usize,
    pub seed: u64,
    pub timings: Option<BTreeMap<String, f64>>,
    pub errors: Vec<String>,
    pub passed: bool,
}

impl TargetReport {
    fn finish(mut self) -> Self {
        let case_ok = match (&self.classification, self.expected_case) {
            (Some(c), Some(e)) => c.case == e,
            (None, _) => false,
            _ => true,
        };
        self.passed = self.errors.is_empty()
            && case_ok
            && self.invariants.iter().all(|c| c.passed)
            && self.residuals.iter().all(|r| r.passed())
            && self.integrals.iter().all(|c| c.passed);
        self
    }

    /// One line per failed check.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.errors.clone();
        out.extend(self.invariants.iter().filter(|c| !c.passed).map(|c| {
            format!("invariant {}: deviation {:e} > {:e}", c.name, c.max_deviation, c.tolerance)
        }));
        out.extend(
            self.residuals
                .iter()
                .filter(|r| !r.passed())
                .map(|r| format!("residual {}: {:e} > {:e} at {}", r.name, r.value, r.tolerance, r.location)),
        );
        out.extend(
            self.integrals
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("integral {}: {:e} > {:e}", c.name, c.residual, c.tolerance)),
        );
        if let (Some(c), Some(e)) = (&self.classification, self.expected_case) {
            if c.case != e {
                out.push(format!("classification {} (expected {e})", c.case));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub reports: Vec<TargetReport>,
    pub seed: u64,
    pub passed: bool,
}

impl SuiteReport {
    /// A single target serializes as its own report; several as `{reports, seed, passed}`.
    pub fn to_json(&self) -> Result<String> {
        let text = if self.reports.len() == 1 {
            serde_json::to_string_pretty(&self.reports[0])?
        } else {
            serde_json::to_string_pretty(self)?
        };
        Ok(text + "\n")
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Timer {
    enabled: bool,
    start: Instant,
    laps: BTreeMap<String, f64>,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Timer {
            enabled,
            start: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        if self.enabled {
            self.laps.insert(format!("{name}_ms"), (now - self.start).as_secs_f64() * 1e3);
        }
        self.start = now;
    }

    fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.laps)
    }
}

/// Builds the immersion for a target; curves also return their summary.
pub fn build_target(target: &Target, config: &SuiteConfig) -> Result<(Immersion, Option<ALCurve>)> {
    match target {
        Target::Catalog(spec) => Ok((build_example(spec)?, None)),
        Target::Curve { k0_min, k0_max } => {
            let curve = al_shoot_closed(*k0_min, *k0_max, &config.shoot)?;
            Ok((to_immersion(&curve, &target.name())?, Some(curve)))
        }
    }
}

fn keep_worst(map: &mut BTreeMap<String, IdentityResidual>, order: &mut Vec<String>, r: IdentityResidual) {
    match map.remove(&r.name) {
        Some(prev) => {
            map.insert(r.name.clone(), prev.worst(r));
        }
        None => {
            order.push(r.name.clone());
            map.insert(r.name.clone(), r);
        }
    }
}

fn pointwise(imm: &Immersion, config: &SuiteConfig, report: &mut TargetReport) -> Result<()> {
    let pts = sample_points(imm, config.points, config.seed);
    report.points = pts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let structure_tol = scheme_tolerance(imm, 2);
    let mut worst = BTreeMap::new();
    let mut order = Vec::new();
    let mut deviations: Vec<f64> = vec![0.0; imm.meta.invariants.len()];
    for pt in &pts {
        let sr = shrinker_residual(imm, pt)?;
        keep_worst(
            &mut worst,
            &mut order,
            IdentityResidual::new("shrinker", sr.norm, structure_tol, pt.clone()),
        );
        let s = structure_residuals(imm, pt)?;
        for (name, v) in [
            ("gauss", s.gauss),
            ("codazzi", s.codazzi),
            ("scalar_consistency", s.scalar_consistency),
            ("position_hessian", s.hessian_identity),
        ] {
            keep_worst(&mut worst, &mut order, IdentityResidual::new(name, v, structure_tol, pt.clone()));
        }
        let mut a: DVector<f64> = DVector::from_fn(imm.ambient_dim(), |_, _| rng.random_range(-1.0..1.0));
        a /= a.norm().max(1e-300);
        let hp = height_probe_check(imm, pt, &a)?;
        keep_worst(
            &mut worst,
            &mut order,
            IdentityResidual::new("height_probe", hp.max(), structure_tol, pt.clone()),
        );
        for r in shrinker_identity_residuals(imm, pt)? {
            keep_worst(&mut worst, &mut order, r);
        }
        keep_worst(
            &mut worst,
            &mut order,
            drift_identity_residual(imm, pt, DriftMode::Shrinker, 1.0)?,
        );
        if !imm.meta.invariants.is_empty() {
            let pg = crate::geometry::pointwise_geometry(imm, pt)?;
            for (d, inv) in deviations.iter_mut().zip(&imm.meta.invariants) {
                let measured = match inv.name.as_str() {
                    "mean_curvature_sq" => pg.mean_curvature_sq(),
                    "norm_a_sq" => pg.norm_a_sq,
                    "scalar_curvature" => pg.mean_curvature_sq() - pg.norm_a_sq,
                    "position_sq" => pg.position.iter().map(|v| v * v).sum(),
                    _ => continue,
                };
                *d = d.max((measured - inv.value).abs());
            }
        }
    }
    report.residuals = order.iter().filter_map(|n| worst.remove(n)).collect();
    let tol = config.tolerances.invariant + imm.meta.tolerance_floor;
    report.invariants = imm
        .meta
        .invariants
        .iter()
        .zip(deviations)
        .map(|(inv, d)| InvariantCheck {
            name: inv.name.clone(),
            expected: inv.value,
            max_deviation: d,
            tolerance: tol,
            passed: d <= tol,
        })
        .collect();
    Ok(())
}

fn integrals(imm: &Immersion, config: &SuiteConfig, report: &mut TargetReport) -> Result<()> {
    let t = &config.tolerances;
    let b = gradient_balance(imm, &config.quadrature)?;
    let scale = b.lhs.abs().max(b.rhs_equality.abs());
    let tol = b.tolerance.max(t.balance_relative * scale);
    report.integrals.push(IntegralCheck {
        name: "weighted_grad_h_balance".into(),
        lhs: b.lhs,
        rhs: b.rhs_equality,
        residual: b.equality_residual(),
        tolerance: tol,
        passed: b.equality_residual() <= tol,
        truncation_error_bound: b.truncation_error_bound,
        warning: b.warning.clone(),
    });
    report.integrals.push(IntegralCheck {
        name: "weighted_grad_h_bound".into(),
        lhs: b.lhs,
        rhs: b.rhs_bound,
        residual: (b.lhs - b.rhs_bound).max(0.0),
        tolerance: t.bound_slack,
        passed: b.slack() >= -t.bound_slack,
        truncation_error_bound: b.truncation_error_bound,
        warning: b.warning,
    });
    let p = position_laplacian_integrals(imm, &config.quadrature)?;
    let scale = p.weighted_lhs.abs().max(p.weighted_rhs.abs());
    let tol = (t.position_laplacian_relative * scale).max(1e-8 + p.truncation_error_bound);
    let res = (p.weighted_lhs - p.weighted_rhs).abs();
    report.integrals.push(IntegralCheck {
        name: "weighted_position_laplacian".into(),
        lhs: p.weighted_lhs,
        rhs: p.weighted_rhs,
        residual: res,
        tolerance: tol,
        passed: res <= tol,
        truncation_error_bound: p.truncation_error_bound,
        warning: p.warning.clone(),
    });
    if let Some(v) = p.unweighted_value {
        let tol = t.unweighted_position_laplacian + imm.meta.tolerance_floor;
        report.integrals.push(IntegralCheck {
            name: "unweighted_position_laplacian".into(),
            lhs: v,
            rhs: 0.0,
            residual: v.abs(),
            tolerance: tol,
            passed: v.abs() <= tol,
            truncation_error_bound: 0.0,
            warning: p.warning,
        });
    }
    Ok(())
}

pub fn run_target(target: &Target, config: &SuiteConfig) -> TargetReport {
    let mut report = TargetReport {
        target: target.name(),
        invariants: Vec::new(),
        residuals: Vec::new(),
        integrals: Vec::new(),
        classification: None,
        expected_case: target.expected_case(),
        curve: None,
        points: 0,
        seed: config.seed,
        timings: None,
        errors: Vec::new(),
        passed: false,
    };
    let mut timer = Timer::new(config.record_timings);
    let imm = match build_target(target, config) {
        Ok((imm, curve)) => {
            report.curve = curve.as_ref().map(CurveSummary::of);
            imm
        }
        Err(e) => {
            report.errors.push(format!("build: {e}"));
            return report.finish();
        }
    };
    timer.lap("build");
    if let Err(e) = pointwise(&imm, config, &mut report) {
        report.errors.push(format!("pointwise: {e}"));
    }
    timer.lap("pointwise");
    if let Err(e) = integrals(&imm, config, &mut report) {
        report.errors.push(format!("integrals: {e}"));
    }
    timer.lap("integrals");
    match classify(&imm, &config.classify_options()) {
        Ok(c) => report.classification = Some(c),
        Err(e) => report.errors.push(format!("classify: {e}")),
    }
    timer.lap("classify");
    report.timings = timer.finish();
    report.finish()
}

/// Runs every target concurrently; reports keep the input order.
pub fn run_suite(targets: &[Target], config: &SuiteConfig) -> Result<SuiteReport> {
    config.validate()?;
    let reports: Vec<TargetReport> = targets.par_iter().map(|t| run_target(t, config)).collect();
    let passed = reports.iter().all(|r| r.passed);
    Ok(SuiteReport {
        reports,
        seed: config.seed,
        passed,
    })
}
