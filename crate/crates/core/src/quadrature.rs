//! Gaussian-weighted integration over immersions.
//!
//! Each integrating chart gets a tensor Gauss-Legendre rule; unbounded axes
//! are truncated to `[-R, R]` and the discarded tail is bounded from a
//! polynomial envelope of the integrand sampled at `R/2` and `R`. The
//! integrand itself is always evaluated through the atlas' preferred chart,
//! so coordinate poles of the integrating chart never enter pointwise
//! geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{dot, evaluate, GeometryOptions};
use crate::immersion::{AxisKind, Chart, ChartPoint, Immersion};
use crate::jet::Jet;
use crate::sampling::sample_points;
use crate::shrinker::{mean_curvature_gradient_sq, shrinker_residual, SHRINKER_GATE};

/// Width of the band around polar coordinate singularities.
pub const POLE_BAND: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Nodes per panel on compact axes.
    pub nodes_per_axis: usize,
    /// Nodes per panel on truncated unbounded axes.
    pub unbounded_nodes_per_axis: usize,
    pub truncation_radius: f64,
    /// Minimum number of composite panels per axis.
    pub panels: usize,
    /// Node budget per chart; compact axes give up nodes first, then truncated ones.
    pub max_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes_per_axis: 64,
            unbounded_nodes_per_axis: 48,
            truncation_radius: 8.0,
            panels: 1,
            max_nodes: 50_000,
        }
    }
}

impl QuadratureSpec {
    pub fn uniform(nodes: usize, radius: f64) -> Self {
        QuadratureSpec {
            nodes_per_axis: nodes,
            unbounded_nodes_per_axis: nodes,
            truncation_radius: radius,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 4 || self.unbounded_nodes_per_axis < 4 {
            return Err(LabError::InvalidParameter("quadrature needs at least 4 nodes per axis".into()));
        }
        if !(self.truncation_radius >= 1.0) {
            return Err(LabError::InvalidParameter(format!(
                "truncation radius must be at least 1, got {}",
                self.truncation_radius
            )));
        }
        if self.panels == 0 || self.max_nodes == 0 {
            return Err(LabError::InvalidParameter("panels and node budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedIntegralResult {
    pub value: f64,
    pub truncation_error_bound: f64,
    pub node_count: usize,
    /// Nodes dropped inside a pole band because the integrand failed there.
    pub skipped_nodes: usize,
    /// `None` for compact immersions.
    pub truncation_radius: Option<f64>,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite rule on `[lo, hi]` with `panels` equal panels of `per_panel` nodes.
pub fn composite_rule(lo: f64, hi: f64, per_panel: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(per_panel);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(per_panel * panels);
    let mut weights = Vec::with_capacity(per_panel * panels);
    for p in 0..panels {
        let a = lo + p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + 0.5 * width * (xi + 1.0));
            weights.push(0.5 * width * wi);
        }
    }
    (nodes, weights)
}

/// Neumaier-compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

struct AxisRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Fewest nodes per panel the budget may leave on an axis.
const MIN_PER_PANEL: usize = 4;

fn chart_rules(chart: &Chart, spec: &QuadratureSpec) -> Vec<AxisRule> {
    let axes = &chart.axes;
    let panels: Vec<usize> = axes.iter().map(|a| spec.panels.max(a.min_panels)).collect();
    let mut per: Vec<usize> = axes
        .iter()
        .map(|a| match a.kind {
            AxisKind::Compact => spec.nodes_per_axis,
            AxisKind::Unbounded => spec.unbounded_nodes_per_axis,
        })
        .collect();
    let size = |per: &[usize], pick: &dyn Fn(usize) -> bool| -> f64 {
        (0..axes.len())
            .filter(|&i| pick(i))
            .map(|i| (per[i] * panels[i]) as f64)
            .product()
    };
    // compact axes shrink first: truncated axes carry the Gaussian tail
    for kind in [AxisKind::Compact, AxisKind::Unbounded] {
        let idx: Vec<usize> = (0..axes.len()).filter(|&i| axes[i].kind == kind).collect();
        if idx.is_empty() || size(&per, &|_| true) <= spec.max_nodes as f64 {
            continue;
        }
        let others = size(&per, &|i| axes[i].kind != kind);
        let current = size(&per, &|i| axes[i].kind == kind);
        let shrink = (spec.max_nodes as f64 / others / current).powf(1.0 / idx.len() as f64);
        for i in idx {
            per[i] = ((per[i] as f64 * shrink).floor() as usize).max(MIN_PER_PANEL);
        }
    }
    axes.iter()
        .zip(per.iter().zip(&panels))
        .map(|(axis, (&per_panel, &panels))| {
            let (lo, hi) = match axis.kind {
                AxisKind::Compact => (axis.lo, axis.hi),
                AxisKind::Unbounded => (-spec.truncation_radius, spec.truncation_radius),
            };
            let (nodes, weights) = composite_rule(lo, hi, per_panel, panels);
            AxisRule { nodes, weights }
        })
        .collect()
}

fn in_pole_band(chart: &Chart, u: &[f64]) -> bool {
    chart
        .axes
        .iter()
        .zip(u)
        .any(|(a, &v)| a.singular_ends && ((v - a.lo).abs() < POLE_BAND || (a.hi - v).abs() < POLE_BAND))
}

/// Integrand returning several values at once; evaluated at the preferred chart point.
pub type Integrand<'a> = dyn Fn(&Immersion, &ChartPoint) -> Result<Vec<f64>> + Sync + 'a;

fn volume_density(chart: &Chart, u: &[f64]) -> Result<f64> {
    let x = chart.position_jets(u, 1)?;
    let n = chart.dim();
    let tangents: Vec<Vec<Jet>> = (0..n).map(|a| x.iter().map(|c| c.partial(a)).collect()).collect();
    let g = nalgebra::DMatrix::from_fn(n, n, |a, b| dot(&tangents[a], &tangents[b]).value());
    Ok(g.determinant().max(0.0).sqrt())
}

/// Integrals of every output of `f` against `e^{-|x|^2/2} dv` (or `dv`).
pub fn integrate_many(
    imm: &Immersion,
    f: &Integrand<'_>,
    outputs: usize,
    spec: &QuadratureSpec,
    weighted: bool,
) -> Result<Vec<WeightedIntegralResult>> {
    spec.validate()?;
    let mut sums = vec![CompensatedSum::default(); outputs];
    let mut node_count = 0;
    let mut skipped = 0;
    for ci in imm.quadrature_charts() {
        let chart = &imm.charts[ci];
        let rules = chart_rules(chart, spec);
        let total: usize = rules.iter().map(|r| r.nodes.len()).product();
        let contributions: Vec<Result<Option<Vec<f64>>>> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut rem = flat;
                let mut u = Vec::with_capacity(rules.len());
                let mut w = 1.0;
                for r in rules.iter().rev() {
                    let k = rem % r.nodes.len();
                    rem /= r.nodes.len();
                    u.push(r.nodes[k]);
                    w *= r.weights[k];
                }
                u.reverse();
                let pt = ChartPoint::new(ci, u);
                let attempt = || -> Result<Vec<f64>> {
                    let vol = volume_density(chart, &pt.u)?;
                    let weight = if weighted {
                        let x = chart.position(&pt.u);
                        (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp()
                    } else {
                        1.0
                    };
                    let vals = f(imm, &imm.preferred(&pt))?;
                    Ok(vals.into_iter().map(|v| v * w * vol * weight).collect())
                };
                match attempt() {
                    Ok(v) => Ok(Some(v)),
                    Err(LabError::DegenerateImmersion { .. }) if in_pole_band(chart, &pt.u) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        for c in contributions {
            match c? {
                Some(v) => {
                    for (s, x) in sums.iter_mut().zip(v) {
                        s.add(x);
                    }
                    node_count += 1;
                }
                None => skipped += 1,
            }
        }
    }
    let bounds = if weighted {
        tail_bounds(imm, f, outputs, spec)?
    } else {
        vec![0.0; outputs]
    };
    let unbounded = imm
        .quadrature_charts()
        .iter()
        .any(|&c| imm.charts[c].axes.iter().any(|a| a.kind == AxisKind::Unbounded));
    Ok(sums
        .iter()
        .zip(bounds)
        .map(|(s, b)| WeightedIntegralResult {
            value: s.value(),
            truncation_error_bound: b,
            node_count,
            skipped_nodes: skipped,
            truncation_radius: unbounded.then_some(spec.truncation_radius),
        })
        .collect())
}

/// `int f e^{-|x|^2/2} dv`.
pub fn weighted_integral<F>(imm: &Immersion, f: F, spec: &QuadratureSpec) -> Result<WeightedIntegralResult>
where
    F: Fn(&Immersion, &ChartPoint) -> Result<f64> + Sync,
{
    let g = |imm: &Immersion, pt: &ChartPoint| f(imm, pt).map(|v| vec![v]);
    Ok(integrate_many(imm, &g, 1, spec, true)?.remove(0))
}

/// `int f dv` over a compact immersion.
pub fn unweighted_integral<F>(imm: &Immersion, f: F, spec: &QuadratureSpec) -> Result<WeightedIntegralResult>
where
    F: Fn(&Immersion, &ChartPoint) -> Result<f64> + Sync,
{
    if !imm.is_compact() {
        return Err(LabError::NonCompactUnweighted(imm.meta.name.clone()));
    }
    let g = |imm: &Immersion, pt: &ChartPoint| f(imm, pt).map(|v| vec![v]);
    Ok(integrate_many(imm, &g, 1, spec, false)?.remove(0))
}

/// `|S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)`.
fn sphere_area(d: usize) -> f64 {
    // Gamma at integers and half-integers
    let mut gamma = if d % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut s = if d % 2 == 0 { 1.0 } else { 0.5 };
    while s + 1e-9 < d as f64 / 2.0 {
        gamma *= s;
        s += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma
}

/// `int_R^inf (1+r)^k r^{d-1} e^{-r^2/2} dr`.
fn radial_tail(radius: f64, k: f64, d: usize) -> f64 {
    let (x, w) = composite_rule(radius, radius + 40.0, 40, 8);
    x.iter()
        .zip(&w)
        .map(|(r, wi)| wi * (1.0 + r).powf(k) * r.powi(d as i32 - 1) * (-0.5 * r * r).exp())
        .sum()
}

fn tail_bounds(imm: &Immersion, f: &Integrand<'_>, outputs: usize, spec: &QuadratureSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; outputs];
    for ci in imm.quadrature_charts() {
        let chart = &imm.charts[ci];
        let flat: Vec<usize> = (0..chart.dim())
            .filter(|&a| chart.axes[a].kind == AxisKind::Unbounded)
            .collect();
        if flat.is_empty() {
            continue;
        }
        let d = flat.len();
        let r = spec.truncation_radius;
        // volume of the compact directions at the origin of the flat ones
        let compact_axes: Vec<usize> = (0..chart.dim()).filter(|a| !flat.contains(a)).collect();
        let rules = chart_rules(chart, &QuadratureSpec::uniform(12, r));
        let mut vol = CompensatedSum::default();
        let total: usize = compact_axes.iter().map(|&a| rules[a].nodes.len()).product();
        let mid: Vec<f64> = chart
            .axes
            .iter()
            .map(|a| if a.kind == AxisKind::Unbounded { 0.0 } else { 0.5 * (a.lo + a.hi) })
            .collect();
        for idx in 0..total {
            let mut rem = idx;
            let mut u = mid.clone();
            let mut w = 1.0;
            for &a in &compact_axes {
                let k = rem % rules[a].nodes.len();
                rem /= rules[a].nodes.len();
                u[a] = rules[a].nodes[k];
                w *= rules[a].weights[k];
            }
            vol.add(w * volume_density(chart, &u).unwrap_or(0.0));
        }

        // envelope samples: axis and diagonal directions in the flat block, a few compact positions
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for &a in &flat {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; d];
                v[flat.iter().position(|&b| b == a).unwrap()] = s;
                dirs.push(v);
            }
        }
        dirs.push(vec![1.0 / (d as f64).sqrt(); d]);
        let compact_probes: Vec<Vec<f64>> = [0.3, 0.5, 0.7]
            .iter()
            .map(|t| {
                chart
                    .axes
                    .iter()
                    .map(|a| if a.kind == AxisKind::Unbounded { 0.0 } else { a.lo + t * (a.hi - a.lo) })
                    .collect()
            })
            .collect();
        let envelope = |rho: f64| -> Result<Vec<f64>> {
            let mut m = vec![0.0f64; outputs];
            for base in &compact_probes {
                for dir in &dirs {
                    let mut u = base.clone();
                    for (slot, &a) in flat.iter().enumerate() {
                        u[a] = rho * dir[slot];
                    }
                    let pt = imm.preferred(&ChartPoint::new(ci, u));
                    let vals = f(imm, &pt)?;
                    for (mi, v) in m.iter_mut().zip(vals) {
                        *mi = mi.max(v.abs());
                    }
                }
            }
            Ok(m)
        };
        let near = envelope(0.5 * r)?;
        let far = envelope(r)?;
        let kmax = (2 * imm.intrinsic_dim + 4) as f64;
        for o in 0..outputs {
            let (m1, m2) = (near[o], far[o]);
            if m1 == 0.0 && m2 == 0.0 {
                continue;
            }
            let ratio = (1.0 + r) / (1.0 + 0.5 * r);
            let k = if m1 > 0.0 && m2 > 0.0 {
                (m2 / m1).ln() / ratio.ln()
            } else {
                kmax
            }
            .clamp(0.0, kmax);
            let c = m1.max(m2) / (1.0 + 0.5 * r).powf(k);
            out[o] += c * vol.value() * sphere_area(d) * radial_tail(r, k, d);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientBalance {
    /// `int |nabla^perp H|^2 e^{-|x|^2/2}`.
    pub lhs: f64,
    /// `int (sum sigma_ab H^a H^b - |H|^2) e^{-|x|^2/2}`.
    pub rhs_equality: f64,
    /// `int (|A|^2 - 1) |H|^2 e^{-|x|^2/2}`.
    pub rhs_bound: f64,
    pub truncation_error_bound: f64,
    pub node_count: usize,
    /// Allowed `|lhs - rhs_equality|`.
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl GradientBalance {
    pub fn equality_residual(&self) -> f64 {
        (self.lhs - self.rhs_equality).abs()
    }

    pub fn relative_residual(&self) -> f64 {
        self.equality_residual() / self.lhs.abs().max(self.rhs_equality.abs()).max(1e-300)
    }

    /// `rhs_bound - lhs`; the inequality holds when this is `>= -tolerance`.
    pub fn slack(&self) -> f64 {
        self.rhs_bound - self.lhs
    }

    pub fn equality_holds(&self) -> bool {
        self.equality_residual() <= self.tolerance
    }

    pub fn inequality_holds(&self) -> bool {
        self.slack() >= -1e-6
    }
}

fn gate_warning(imm: &Immersion) -> Result<Option<String>> {
    let limit = SHRINKER_GATE + imm.meta.tolerance_floor;
    let mut worst: f64 = 0.0;
    for pt in sample_points(imm, 16, 0) {
        worst = worst.max(shrinker_residual(imm, &pt)?.norm);
    }
    Ok((worst > limit).then(|| format!("shrinker residual {worst:e} exceeds {limit:e}; integral identities may not hold")))
}

pub fn gradient_balance(imm: &Immersion, spec: &QuadratureSpec) -> Result<GradientBalance> {
    let warning = gate_warning(imm)?;
    let f = |imm: &Immersion, pt: &ChartPoint| -> Result<Vec<f64>> {
        let (pg, grad_sq) = mean_curvature_gradient_sq(imm, pt)?;
        let h = &pg.mean_curvature_components;
        let shh = (h.transpose() * &pg.sigma * h)[(0, 0)];
        let h2 = pg.mean_curvature_sq();
        Ok(vec![grad_sq, shh - h2, (pg.norm_a_sq - 1.0) * h2])
    };
    let r = integrate_many(imm, &f, 3, spec, true)?;
    let trunc = r.iter().map(|x| x.truncation_error_bound).sum::<f64>();
    let scale = r[0].value.abs().max(r[1].value.abs());
    let scheme = if imm.closed_form() { 0.0 } else { 1e-3 * scale };
    Ok(GradientBalance {
        lhs: r[0].value,
        rhs_equality: r[1].value,
        rhs_bound: r[2].value,
        truncation_error_bound: trunc,
        node_count: r[0].node_count,
        tolerance: 1e-6 + scheme + trunc,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionLaplacianIntegrals {
    /// `(1/4) int |nabla |x|^2|^2 e^{-|x|^2/2}`.
    pub weighted_lhs: f64,
    /// `int (n - |H|^2) e^{-|x|^2/2}`.
    pub weighted_rhs: f64,
    /// `int (n - |H|^2) dv`, compact immersions only.
    pub unweighted_value: Option<f64>,
    pub truncation_error_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl PositionLaplacianIntegrals {
    pub fn weighted_relative(&self) -> f64 {
        let scale = self.weighted_lhs.abs().max(self.weighted_rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.weighted_lhs - self.weighted_rhs).abs() / scale
        }
    }
}

/// `(1/4) |grad |x|^2|^2` from intrinsic derivatives of the scalar `|x|^2`.
pub fn quarter_grad_position_sq(imm: &Immersion, pt: &ChartPoint) -> Result<f64> {
    let x = imm.position_jets(pt, 1)?;
    let n = imm.intrinsic_dim;
    let phi = dot(&x, &x);
    let tangents: Vec<Vec<Jet>> = (0..n).map(|a| x.iter().map(|c| c.partial(a)).collect()).collect();
    let g = nalgebra::DMatrix::from_fn(n, n, |a, b| dot(&tangents[a], &tangents[b]).value());
    let ginv = g.try_inverse().ok_or_else(|| LabError::DegenerateImmersion {
        point: pt.clone(),
        min_eigenvalue: 0.0,
    })?;
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += ginv[(a, b)] * phi.d1(a) * phi.d1(b);
        }
    }
    Ok(0.25 * s)
}

fn drift_density(imm: &Immersion, pt: &ChartPoint) -> Result<f64> {
    let pg = evaluate(imm, pt, 2, &GeometryOptions::default())?.geometry;
    Ok(imm.intrinsic_dim as f64 - pg.mean_curvature_sq())
}

pub fn position_laplacian_integrals(imm: &Immersion, spec: &QuadratureSpec) -> Result<PositionLaplacianIntegrals> {
    let warning = gate_warning(imm)?;
    let f = |imm: &Immersion, pt: &ChartPoint| -> Result<Vec<f64>> {
        Ok(vec![quarter_grad_position_sq(imm, pt)?, drift_density(imm, pt)?])
    };
    let r = integrate_many(imm, &f, 2, spec, true)?;
    let unweighted_value = if imm.is_compact() {
        Some(unweighted_integral(imm, drift_density, spec)?.value)
    } else {
        None
    };
    Ok(PositionLaplacianIntegrals {
        weighted_lhs: r[0].value,
        weighted_rhs: r[1].value,
        unweighted_value,
        truncation_error_bound: r[0].truncation_error_bound + r[1].truncation_error_bound,
        warning,
    })
}

/// Integrands addressable by name from the command line.
pub const BUILTIN_INTEGRANDS: &[(&str, &str)] = &[
    ("one", "1"),
    ("mean_curvature_sq", "|H|^2"),
    ("norm_a_sq", "|A|^2"),
    ("position_sq", "|x|^2"),
    ("drift", "n - |H|^2"),
    ("grad_position_sq", "(1/4) |grad |x|^2|^2"),
    ("grad_h_sq", "|nabla^perp H|^2"),
];

pub fn builtin_integrand(name: &str, imm: &Immersion, pt: &ChartPoint) -> Result<f64> {
    let geometry = || evaluate(imm, pt, 2, &GeometryOptions::default()).map(|e| e.geometry);
    match name {
        "one" => Ok(1.0),
        "mean_curvature_sq" => Ok(geometry()?.mean_curvature_sq()),
        "norm_a_sq" => Ok(geometry()?.norm_a_sq),
        "position_sq" => Ok(imm.position(pt).iter().map(|v| v * v).sum()),
        "drift" => drift_density(imm, pt),
        "grad_position_sq" => quarter_grad_position_sq(imm, pt),
        "grad_h_sq" => Ok(mean_curvature_gradient_sq(imm, pt)?.1),
        other => Err(LabError::InvalidParameter(format!(
            "unknown integrand `{other}`; expected one of {}",
            BUILTIN_INTEGRANDS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn composite_rule_on_exponential() {
        let (x, w) = composite_rule(0.0, 2.0, 8, 3);
        let q: f64 = x.iter().zip(&w).map(|(a, b)| b * a.exp()).sum();
        assert_relative_eq!(q, 2f64.exp() - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert_relative_eq!(s.value(), 1e-15, max_relative = 1e-10);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(1), 2.0);
        assert_relative_eq!(sphere_area(2), 2.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(4), 2.0 * std::f64::consts::PI.powi(2), max_relative = 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::uniform(3, 8.0).validate().is_err());
        assert!(QuadratureSpec::uniform(8, 0.5).validate().is_err());
        assert!(QuadratureSpec::default().validate().is_ok());
    }
}
