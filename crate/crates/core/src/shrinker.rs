//! Self-shrinker and self-expander residuals and the pointwise identities
//! that hold on shrinkers.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fd;
use crate::geometry::{curvature_tensors, evaluate, frame_third_order, values, Evaluation, GeometryOptions, PointGeometry};
use crate::immersion::{ChartPoint, Immersion};

/// Shrinker residual above which shrinker-only identities carry a warning.
pub const SHRINKER_GATE: f64 = 1e-6;

/// Pass threshold for an exact identity whose ingredients need derivatives of
/// the position up to `order`.
pub fn scheme_tolerance(imm: &Immersion, order: usize) -> f64 {
    let base = if imm.closed_form() {
        1e-8
    } else if order <= 2 {
        1e-5
    } else {
        1e-3
    };
    base + imm.meta.tolerance_floor
}

/// Third- and fourth-order normal-bundle quantities, in the frames of `geometry`.
#[derive(Clone, Debug)]
pub struct NormalDerivatives {
    pub geometry: PointGeometry,
    /// `h^alpha_ijk`, indexed `[alpha, i, j, k]`.
    pub h_grad: Array4<f64>,
    /// `H^alpha_{,i}`, indexed `[alpha, i]`.
    pub mean_curvature_grad: Array2<f64>,
    /// `H^alpha_{,ij}`, indexed `[alpha, i, j]`.
    pub mean_curvature_hess: Array3<f64>,
    /// `Delta^perp H^alpha`.
    pub laplacian_h: DVector<f64>,
    /// `|nabla^perp H|^2`.
    pub grad_h_norm_sq: f64,
    /// `(1/2) Delta |A|^2`, from the same derivative data.
    pub half_laplacian_norm_a_sq: f64,
}

impl NormalDerivatives {
    /// `max |h_ijk - h_sigma(ijk)|` over all index permutations.
    pub fn symmetry_defect(&self) -> f64 {
        let (p, n) = (self.h_grad.dim().0, self.h_grad.dim().1);
        let mut worst: f64 = 0.0;
        for a in 0..p {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = self.h_grad[[a, i, j, k]];
                        for w in [
                            self.h_grad[[a, j, i, k]],
                            self.h_grad[[a, i, k, j]],
                            self.h_grad[[a, k, j, i]],
                        ] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// `max |H^alpha_{,i} - sum_j h^alpha_jji|`.
    pub fn trace_defect(&self) -> f64 {
        let (p, n) = (self.h_grad.dim().0, self.h_grad.dim().1);
        let mut worst: f64 = 0.0;
        for a in 0..p {
            for i in 0..n {
                let tr: f64 = (0..n).map(|j| self.h_grad[[a, j, j, i]]).sum();
                worst = worst.max((self.mean_curvature_grad[[a, i]] - tr).abs());
            }
        }
        worst
    }
}

/// One checked identity at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub location: ChartPoint,
    /// Set when the identity is only claimed for shrinkers and the point is not one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

impl IdentityResidual {
    pub fn new(name: &str, value: f64, tolerance: f64, location: ChartPoint) -> Self {
        IdentityResidual {
            name: name.into(),
            value,
            tolerance,
            location,
            warning: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }

    /// Keeps the worse of two residuals of the same identity.
    pub fn worst(self, other: IdentityResidual) -> IdentityResidual {
        if other.value > self.value || other.value.is_nan() {
            IdentityResidual {
                warning: other.warning.or(self.warning),
                ..other
            }
        } else {
            IdentityResidual {
                warning: self.warning.or(other.warning),
                ..self
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkerResidual {
    /// `H + x^perp`.
    pub vector: Vec<f64>,
    pub norm: f64,
    /// `H^alpha + <x, e_alpha>` per normal direction.
    pub components: Vec<f64>,
}

fn shrinker_residual_of(pg: &PointGeometry) -> ShrinkerResidual {
    let v = &pg.mean_curvature_vector + pg.position_normal_vector();
    ShrinkerResidual {
        norm: v.norm(),
        vector: v.iter().copied().collect(),
        components: (0..pg.p())
            .map(|a| pg.mean_curvature_components[a] + pg.position_normal[a])
            .collect(),
    }
}

pub fn shrinker_residual(imm: &Immersion, pt: &ChartPoint) -> Result<ShrinkerResidual> {
    let ev = evaluate(imm, pt, 2, &GeometryOptions::default())?;
    Ok(shrinker_residual_of(&ev.geometry))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderResidual {
    /// `lambda H^alpha - <x, e_alpha>`.
    pub components: Vec<f64>,
    /// `|lambda H - x^perp|`.
    pub norm: f64,
}

pub fn expander_residual(imm: &Immersion, pt: &ChartPoint, lambda: f64) -> Result<ExpanderResidual> {
    if !(lambda > 0.0) {
        return Err(LabError::InvalidParameter(format!("expander coefficient must be positive, got {lambda}")));
    }
    let pg = evaluate(imm, pt, 2, &GeometryOptions::default())?.geometry;
    let components: Vec<f64> = (0..pg.p())
        .map(|a| lambda * pg.mean_curvature_components[a] - pg.position_normal[a])
        .collect();
    let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(ExpanderResidual { components, norm })
}

fn gate(imm: &Immersion, pg: &PointGeometry) -> Option<String> {
    let r = shrinker_residual_of(pg).norm;
    let limit = SHRINKER_GATE + imm.meta.tolerance_floor;
    (r > limit).then(|| {
        LabError::NotAShrinker {
            point: pg.point.clone(),
            residual: r,
            tolerance: limit,
        }
        .to_string()
    })
}

fn derivatives_of(ev: &Evaluation, with_hessian: bool) -> NormalDerivatives {
    let fields = &ev.fields;
    let n = fields.n;
    let pg = &ev.geometry;
    let p = pg.p();
    let h_grad = frame_third_order(ev, &fields.covariant_second_form());
    let grad = fields.normal_gradient_h();
    let grad_vals: Vec<DVector<f64>> = grad.iter().map(|v| values(v)).collect();
    let mean_curvature_grad = ev.frame_components1(&grad_vals);
    let grad_h_norm_sq = mean_curvature_grad.iter().map(|v| v * v).sum();

    let mut mean_curvature_hess = Array3::zeros((p, n, n));
    let mut laplacian_h = DVector::zeros(p);
    let mut half_laplacian_norm_a_sq = f64::NAN;
    if with_hessian {
        let hess = fields.normal_hessian_h(&grad);
        let hess_vals: Vec<Vec<DVector<f64>>> = hess
            .iter()
            .map(|r| r.iter().map(|v| values(v)).collect())
            .collect();
        mean_curvature_hess = ev.frame_components2(&hess_vals);
        for a in 0..p {
            laplacian_h[a] = (0..n).map(|i| mean_curvature_hess[[a, i, i]]).sum();
        }
        half_laplacian_norm_a_sq = 0.5 * fields.scalar_laplacian(&fields.norm_a_sq_field());
    }
    NormalDerivatives {
        geometry: pg.clone(),
        h_grad,
        mean_curvature_grad,
        mean_curvature_hess,
        laplacian_h,
        grad_h_norm_sq,
        half_laplacian_norm_a_sq,
    }
}

pub fn normal_derivatives(imm: &Immersion, pt: &ChartPoint) -> Result<NormalDerivatives> {
    normal_derivatives_with(imm, pt, &GeometryOptions::default())
}

pub fn normal_derivatives_with(imm: &Immersion, pt: &ChartPoint, opts: &GeometryOptions) -> Result<NormalDerivatives> {
    let ev = evaluate(imm, pt, 4, opts)?;
    Ok(derivatives_of(&ev, true))
}

/// Pointwise geometry together with `|nabla^perp H|^2`.
pub fn mean_curvature_gradient_sq(imm: &Immersion, pt: &ChartPoint) -> Result<(PointGeometry, f64)> {
    let ev = evaluate(imm, pt, 3, &GeometryOptions::default())?;
    let grad = ev.fields.normal_gradient_h();
    let mut sq = 0.0;
    for i in ev.frame_vectors(&grad.iter().map(|v| values(v)).collect::<Vec<_>>()) {
        sq += i.norm_squared();
    }
    Ok((ev.geometry, sq))
}

/// Third-order quantities only (no Hessian of `H`).
pub fn first_normal_derivatives(imm: &Immersion, pt: &ChartPoint) -> Result<NormalDerivatives> {
    let ev = evaluate(imm, pt, 3, &GeometryOptions::default())?;
    Ok(derivatives_of(&ev, false))
}

fn mean_curvature_gradient_of(nd: &NormalDerivatives) -> f64 {
    let pg = &nd.geometry;
    let (p, n) = (pg.p(), pg.n());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut sq = 0.0;
        for a in 0..p {
            let rhs: f64 = (0..n).map(|j| pg.second_form[[a, i, j]] * pg.position_tangential[j]).sum();
            sq += (nd.mean_curvature_grad[[a, i]] - rhs).powi(2);
        }
        worst = worst.max(sq.sqrt());
    }
    worst
}

fn normal_laplacian_of(nd: &NormalDerivatives) -> f64 {
    let pg = &nd.geometry;
    let (p, n) = (pg.p(), pg.n());
    let h = &pg.mean_curvature_components;
    let mut sq = 0.0;
    for a in 0..p {
        let drift: f64 = (0..n).map(|j| nd.mean_curvature_grad[[a, j]] * pg.position_tangential[j]).sum();
        let sh: f64 = (0..p).map(|b| pg.sigma[(a, b)] * h[b]).sum();
        sq += (nd.laplacian_h[a] - (drift + h[a] - sh)).powi(2);
    }
    sq.sqrt()
}

/// `nabla^perp_i H = sum_j <x, e_j> B(e_i, e_j)`, the covariant derivative of
/// the shrinker equation; gauge-invariant vector form.
pub fn mean_curvature_gradient_check(imm: &Immersion, pt: &ChartPoint) -> Result<IdentityResidual> {
    let ev = evaluate(imm, pt, 3, &GeometryOptions::default())?;
    let nd = derivatives_of(&ev, false);
    let mut r = IdentityResidual::new("mean_curvature_gradient", mean_curvature_gradient_of(&nd), scheme_tolerance(imm, 3), pt.clone());
    r.warning = gate(imm, &ev.geometry);
    Ok(r)
}

/// `Delta^perp H = nabla^perp_{x^T} H + H - sum sigma_ab H^b e_a`.
pub fn normal_laplacian_residual(imm: &Immersion, pt: &ChartPoint) -> Result<IdentityResidual> {
    let nd = normal_derivatives(imm, pt)?;
    let mut r = IdentityResidual::new("normal_laplacian_h", normal_laplacian_of(&nd), scheme_tolerance(imm, 4), pt.clone());
    r.warning = gate(imm, &nd.geometry);
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    Shrinker,
    Expander,
}

/// Intrinsic Laplacian of a scalar function of chart coordinates, in
/// divergence form `(1/sqrt g) d_i (sqrt g g^ij d_j phi)` with nested central
/// differences.
pub fn laplacian_fd<F>(imm: &Immersion, pt: &ChartPoint, phi: &F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = imm.intrinsic_dim;
    let chart = imm.chart(pt);
    let density = |u: &[f64]| -> (f64, DMatrix<f64>) {
        let jac = fd::gradient(&|v: &[f64]| chart.position(v), u);
        let g = DMatrix::from_fn(n, n, |a, b| jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum());
        let det = g.determinant();
        let ginv = g.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        (det.max(0.0).sqrt(), ginv)
    };
    let flux = |u: &[f64]| -> Vec<f64> {
        let (vol, ginv) = density(u);
        let grad = fd::gradient(&|v: &[f64]| vec![phi(v)], u);
        (0..n)
            .map(|i| vol * (0..n).map(|j| ginv[(i, j)] * grad[j][0]).sum::<f64>())
            .collect()
    };
    let (vol, _) = density(&pt.u);
    if !(vol > 0.0) {
        return Err(LabError::DegenerateImmersion {
            point: pt.clone(),
            min_eigenvalue: 0.0,
        });
    }
    let mut div = 0.0;
    for i in 0..n {
        let mut alpha = vec![0u8; n];
        alpha[i] = 1;
        div += fd::mixed_partial(&|v: &[f64]| vec![flux(v)[i]], &pt.u, &alpha)[0];
    }
    Ok(div / vol)
}

/// `(1/2) Delta |x|^2 = n + <x, H>`, which is `n - |H|^2` on shrinkers and
/// `n + lambda |H|^2` on expanders `lambda H = x^perp`.
pub fn drift_identity_residual(imm: &Immersion, pt: &ChartPoint, mode: DriftMode, lambda: f64) -> Result<IdentityResidual> {
    if mode == DriftMode::Expander && !(lambda > 0.0) {
        return Err(LabError::InvalidParameter(format!("expander coefficient must be positive, got {lambda}")));
    }
    let ev = evaluate(imm, pt, 2, &GeometryOptions::default())?;
    let pg = &ev.geometry;
    let chart = imm.chart(pt);
    let sq = |u: &[f64]| chart.position(u).iter().map(|v| v * v).sum::<f64>();
    let half_lap = 0.5 * laplacian_fd(imm, pt, &sq)?;
    let n = imm.intrinsic_dim as f64;
    let h2 = pg.mean_curvature_sq();
    let (expected, name) = match mode {
        DriftMode::Shrinker => (n - h2, "position_laplacian_shrinker"),
        DriftMode::Expander => (n + lambda * h2, "position_laplacian_expander"),
    };
    let tol = 1e-5 + imm.meta.tolerance_floor;
    let mut r = IdentityResidual::new(name, (half_lap - expected).abs(), tol, pt.clone());
    r.warning = match mode {
        DriftMode::Shrinker => gate(imm, pg),
        DriftMode::Expander => {
            let e = (&pg.mean_curvature_vector * lambda - pg.position_normal_vector()).norm();
            (e > SHRINKER_GATE).then(|| format!("not a self-expander at {pt}: |lambda H - x^perp| = {e:e}"))
        }
    };
    Ok(r)
}

/// Algebraic and first-derivative terms of the Simons-type expansion of `(1/2) Delta |A|^2`.
struct SimonsTerms {
    grad_sq: f64,
    mean_term: f64,
    sigma_sq: f64,
    normal_term: f64,
    hessian_term: f64,
}

fn simons_terms(nd: &NormalDerivatives) -> SimonsTerms {
    let pg = &nd.geometry;
    let (p, n) = (pg.p(), pg.n());
    let h = &pg.second_form;
    let hc = &pg.mean_curvature_components;
    let grad_sq = nd.h_grad.iter().map(|v| v * v).sum();
    let mut mean_term = 0.0;
    for a in 0..p {
        for b in 0..p {
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n {
                        mean_term += hc[b] * h[[b, m, j]] * h[[a, i, j]] * h[[a, i, m]];
                    }
                }
            }
        }
    }
    let sigma_sq = pg.sigma.iter().map(|v| v * v).sum();
    let rn = curvature_tensors(pg).normal_curvature;
    let mut normal_term = 0.0;
    for a in 0..p {
        for b in 0..p {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        normal_term += 2.0 * h[[a, i, j]] * h[[b, i, k]] * rn[[b, a, j, k]];
                    }
                }
            }
        }
    }
    let mut hessian_term = 0.0;
    for a in 0..p {
        for i in 0..n {
            for j in 0..n {
                hessian_term += h[[a, i, j]] * nd.mean_curvature_hess[[a, i, j]];
            }
        }
    }
    SimonsTerms {
        grad_sq,
        mean_term,
        sigma_sq,
        normal_term,
        hessian_term,
    }
}

fn simons_tolerance(imm: &Immersion) -> f64 {
    (if imm.closed_form() { 1e-6 } else { 1e-3 }) + imm.meta.tolerance_floor
}

/// `(1/2) Delta |A|^2 = |nabla h|^2 + sum H^b h^b_mj h^a_ij h^a_im - sum sigma_ab^2
/// + 2 sum h^a_ij h^b_ik R_bajk`, the form used on shrinkers with parallel mean
/// curvature. `Delta |A|^2` is the intrinsic Laplacian of the scalar field `|A|^2`.
pub fn simons_residual(imm: &Immersion, pt: &ChartPoint) -> Result<IdentityResidual> {
    let nd = normal_derivatives(imm, pt)?;
    let t = simons_terms(&nd);
    let rhs = t.grad_sq + t.mean_term - t.sigma_sq + t.normal_term;
    let mut r = IdentityResidual::new(
        "simons",
        (nd.half_laplacian_norm_a_sq - rhs).abs(),
        simons_tolerance(imm),
        pt.clone(),
    );
    r.warning = gate(imm, &nd.geometry);
    Ok(r)
}

/// The same expansion with the `sum h^a_ij H^a_{,ij}` term kept, valid on any
/// immersion in Euclidean space.
pub fn simons_residual_general(imm: &Immersion, pt: &ChartPoint) -> Result<IdentityResidual> {
    let nd = normal_derivatives(imm, pt)?;
    let t = simons_terms(&nd);
    let rhs = t.grad_sq + t.hessian_term + t.mean_term - t.sigma_sq + t.normal_term;
    Ok(IdentityResidual::new(
        "simons_general",
        (nd.half_laplacian_norm_a_sq - rhs).abs(),
        simons_tolerance(imm),
        pt.clone(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrincipalSigma {
    /// `sum_ij (h^nu_ij)^2` for the unit normal `nu = H/|H|`.
    pub sigma_principal: f64,
    /// Components of `H/|H|` in the original normal frame.
    pub gauge: Vec<f64>,
}

fn principal_of(pg: &PointGeometry) -> Result<PrincipalSigma> {
    let norm = pg.mean_curvature_components.norm();
    if norm < 1e-12 {
        return Err(LabError::ZeroMeanCurvature { norm });
    }
    let nu = &pg.mean_curvature_components / norm;
    let (p, n) = (pg.p(), pg.n());
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..p).map(|a| nu[a] * pg.second_form[[a, i, j]]).sum();
            s += v * v;
        }
    }
    Ok(PrincipalSigma {
        sigma_principal: s,
        gauge: nu.iter().copied().collect(),
    })
}

/// `sigma` in the normal direction of the mean curvature vector.
pub fn principal_frame_sigma(imm: &Immersion, pt: &ChartPoint) -> Result<PrincipalSigma> {
    principal_of(&evaluate(imm, pt, 2, &GeometryOptions::default())?.geometry)
}

pub fn principal_sigma_of(pg: &PointGeometry) -> Result<PrincipalSigma> {
    principal_of(pg)
}

/// Every pointwise shrinker identity at one point, sharing one evaluation.
#[derive(Clone, Debug)]
pub struct PointIdentities {
    pub shrinker: ShrinkerResidual,
    pub mean_curvature_gradient: f64,
    pub normal_laplacian_h: f64,
    pub simons: f64,
    pub simons_general: f64,
    pub codazzi: f64,
    pub derivatives: NormalDerivatives,
}

pub fn point_identities(imm: &Immersion, pt: &ChartPoint) -> Result<PointIdentities> {
    let ev = evaluate(imm, pt, 4, &GeometryOptions::default())?;
    let nd = derivatives_of(&ev, true);
    let t = simons_terms(&nd);
    let base = t.grad_sq + t.mean_term - t.sigma_sq + t.normal_term;
    Ok(PointIdentities {
        shrinker: shrinker_residual_of(&ev.geometry),
        mean_curvature_gradient: mean_curvature_gradient_of(&nd),
        normal_laplacian_h: normal_laplacian_of(&nd),
        simons: (nd.half_laplacian_norm_a_sq - base).abs(),
        simons_general: (nd.half_laplacian_norm_a_sq - base - t.hessian_term).abs(),
        codazzi: nd.symmetry_defect(),
        derivatives: nd,
    })
}

/// The gradient, normal-Laplacian and Simons residuals from one fourth-order evaluation.
///
/// The four-term Simons form drops the Hessian of `H`, so it is only reported
/// where `nabla^perp H` vanishes to the shrinker gate; the general form always is.
pub fn shrinker_identity_residuals(imm: &Immersion, pt: &ChartPoint) -> Result<Vec<IdentityResidual>> {
    let ev = evaluate(imm, pt, 4, &GeometryOptions::default())?;
    let nd = derivatives_of(&ev, true);
    let t = simons_terms(&nd);
    let base = t.grad_sq + t.mean_term - t.sigma_sq + t.normal_term;
    let general = (nd.half_laplacian_norm_a_sq - base - t.hessian_term).abs();
    let warning = gate(imm, &ev.geometry);
    let mut out = vec![
        IdentityResidual::new("mean_curvature_gradient", mean_curvature_gradient_of(&nd), scheme_tolerance(imm, 3), pt.clone()),
        IdentityResidual::new("normal_laplacian_h", normal_laplacian_of(&nd), scheme_tolerance(imm, 4), pt.clone()),
        IdentityResidual::new("simons_general", general, simons_tolerance(imm), pt.clone()),
    ];
    let grad_h = nd.mean_curvature_grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if grad_h <= SHRINKER_GATE + imm.meta.tolerance_floor {
        let simons = (nd.half_laplacian_norm_a_sq - base).abs();
        out.push(IdentityResidual::new("simons", simons, simons_tolerance(imm), pt.clone()));
    }
    for r in &mut out {
        r.warning = warning.clone();
    }
    Ok(out)
}

pub fn shrinker_gate_warning(imm: &Immersion, pg: &PointGeometry) -> Option<String> {
    gate(imm, pg)
}
