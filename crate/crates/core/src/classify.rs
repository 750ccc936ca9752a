//! Case analysis of the gap classification applied to measured invariants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::curvature_tensors;
use crate::immersion::Immersion;
use crate::sampling::sample_points;
use crate::shrinker::{mean_curvature_gradient_sq, principal_sigma_of, SHRINKER_GATE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassificationCase {
    RoundSphere,
    Cylinder,
    Hyperplane,
    /// `|H|^2 = n` and `|x|^2 = n` with a curved normal bundle.
    SphereMinimal,
    OutsideHypotheses,
}

impl fmt::Display for ClassificationCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassificationCase::RoundSphere => "round_sphere",
            ClassificationCase::Cylinder => "cylinder",
            ClassificationCase::Hyperplane => "hyperplane",
            ClassificationCase::SphereMinimal => "sphere_minimal",
            ClassificationCase::OutsideHypotheses => "outside_hypotheses",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyOptions {
    pub points: usize,
    pub seed: u64,
    /// Threshold on residual-type evidence.
    pub tolerance: f64,
    /// Threshold on constancy of `|A|^2` and `|x|^2`.
    pub constancy_tolerance: f64,
    /// Threshold for the exact `|H|^2 = n`, `|x|^2 = n` flags.
    pub exact_tolerance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            points: 200,
            seed: 0,
            tolerance: 1e-6,
            constancy_tolerance: 1e-4,
            exact_tolerance: 1e-8,
        }
    }
}

/// Measured extremes over the sample set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Evidence {
    pub sup_norm_a_sq: f64,
    pub inf_norm_a_sq: f64,
    pub sup_mean_curvature_sq: f64,
    pub inf_mean_curvature_sq: f64,
    pub sup_shrinker_residual: f64,
    pub sup_grad_h: f64,
    /// `None` where `H` vanishes somewhere.
    pub sup_sigma_principal: Option<f64>,
    pub inf_position_sq: f64,
    pub sup_position_sq: f64,
    pub sup_normal_curvature: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisFlags {
    /// `|A|^2 <= 1`.
    pub norm_a_sq_at_most_one: bool,
    /// `|H|^2 >= n`.
    pub mean_curvature_sq_at_least_n: bool,
    pub compact: bool,
    /// `sigma` along `H/|H|` at most 1.
    pub principal_sigma_at_most_one: bool,
    /// Taken from metadata, never measured.
    pub polynomial_volume_growth: String,
    /// `|H|^2 = n` everywhere, to the exact tolerance.
    pub sphere_minimal_mean_curvature: bool,
    /// `|x|^2 = n` everywhere, to the exact tolerance.
    pub sphere_minimal_position: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub case: ClassificationCase,
    pub evidence: Evidence,
    pub hypothesis_flags: HypothesisFlags,
    pub thresholds: ClassifyOptions,
    pub dimension: usize,
}

pub fn classify(imm: &Immersion, opts: &ClassifyOptions) -> Result<ClassificationReport> {
    let n = imm.intrinsic_dim as f64;
    let pts = sample_points(imm, opts.points.max(1), opts.seed);
    let gate = SHRINKER_GATE + imm.meta.tolerance_floor;
    let mut ev = Evidence {
        sup_norm_a_sq: f64::NEG_INFINITY,
        inf_norm_a_sq: f64::INFINITY,
        sup_mean_curvature_sq: f64::NEG_INFINITY,
        inf_mean_curvature_sq: f64::INFINITY,
        sup_shrinker_residual: 0.0,
        sup_grad_h: 0.0,
        sup_sigma_principal: Some(f64::NEG_INFINITY),
        inf_position_sq: f64::INFINITY,
        sup_position_sq: f64::NEG_INFINITY,
        sup_normal_curvature: 0.0,
        points: pts.len(),
    };
    for pt in &pts {
        let (pg, grad_sq) = mean_curvature_gradient_sq(imm, pt)?;
        let residual = (&pg.mean_curvature_vector + pg.position_normal_vector()).norm();
        if residual > gate {
            return Err(LabError::NotAShrinker {
                point: pt.clone(),
                residual,
                tolerance: gate,
            });
        }
        let h_sq = pg.mean_curvature_sq();
        let x_sq: f64 = pg.position.iter().map(|v| v * v).sum();
        ev.sup_norm_a_sq = ev.sup_norm_a_sq.max(pg.norm_a_sq);
        ev.inf_norm_a_sq = ev.inf_norm_a_sq.min(pg.norm_a_sq);
        ev.sup_mean_curvature_sq = ev.sup_mean_curvature_sq.max(h_sq);
        ev.inf_mean_curvature_sq = ev.inf_mean_curvature_sq.min(h_sq);
        ev.sup_shrinker_residual = ev.sup_shrinker_residual.max(residual);
        ev.sup_grad_h = ev.sup_grad_h.max(grad_sq.sqrt());
        ev.inf_position_sq = ev.inf_position_sq.min(x_sq);
        ev.sup_position_sq = ev.sup_position_sq.max(x_sq);
        let rn = curvature_tensors(&pg).normal_curvature;
        ev.sup_normal_curvature = rn.iter().fold(ev.sup_normal_curvature, |m, v| m.max(v.abs()));
        ev.sup_sigma_principal = match (ev.sup_sigma_principal, principal_sigma_of(&pg)) {
            (Some(s), Ok(p)) => Some(s.max(p.sigma_principal)),
            _ => None,
        };
    }

    let tol = opts.tolerance;
    let flags = HypothesisFlags {
        norm_a_sq_at_most_one: ev.sup_norm_a_sq <= 1.0 + tol,
        mean_curvature_sq_at_least_n: ev.inf_mean_curvature_sq >= n - tol,
        compact: imm.is_compact(),
        principal_sigma_at_most_one: ev.sup_sigma_principal.is_some_and(|s| s <= 1.0 + tol),
        polynomial_volume_growth: if imm.meta.polynomial_volume_growth {
            "assumed".into()
        } else {
            "not assumed".into()
        },
        sphere_minimal_mean_curvature: (ev.sup_mean_curvature_sq - n).abs() <= opts.exact_tolerance
            && (ev.inf_mean_curvature_sq - n).abs() <= opts.exact_tolerance,
        sphere_minimal_position: (ev.sup_position_sq - n).abs() <= opts.exact_tolerance
            && (ev.inf_position_sq - n).abs() <= opts.exact_tolerance,
    };

    let ctol = opts.constancy_tolerance;
    let unit_a = (ev.sup_norm_a_sq - 1.0).abs() < ctol && (ev.inf_norm_a_sq - 1.0).abs() < ctol;
    let case = if ev.sup_mean_curvature_sq.sqrt() < tol {
        ClassificationCase::Hyperplane
    } else if flags.norm_a_sq_at_most_one && ev.sup_grad_h < tol && unit_a {
        let sphere_radius = (ev.sup_position_sq - n).abs() < ctol && (ev.inf_position_sq - n).abs() < ctol;
        if sphere_radius {
            ClassificationCase::RoundSphere
        } else {
            ClassificationCase::Cylinder
        }
    } else if flags.mean_curvature_sq_at_least_n
        && (ev.sup_position_sq - n).abs() < ctol
        && (ev.inf_position_sq - n).abs() < ctol
        && ev.sup_normal_curvature > tol
    {
        // flat normal bundles here are products of round factors, outside the classified cases
        ClassificationCase::SphereMinimal
    } else {
        ClassificationCase::OutsideHypotheses
    };

    Ok(ClassificationReport {
        case,
        evidence: ev,
        hypothesis_flags: flags,
        thresholds: opts.clone(),
        dimension: imm.intrinsic_dim,
    })
}
