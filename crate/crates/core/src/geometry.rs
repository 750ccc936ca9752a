//! Pointwise extrinsic geometry of an immersion.
//!
//! Everything is assembled from Taylor jets of the position map. Covariant
//! derivatives in the tangent and normal bundles are "differentiate in the
//! ambient space, then project": connection forms are never built, so no
//! frame field is ever differentiated. Frames only enter at the very end,
//! to express coordinate tensors in orthonormal components.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::immersion::{ChartPoint, Immersion};
use crate::jet::Jet;

#[derive(Clone, Debug)]
pub struct GeometryOptions {
    /// Smallest admissible metric eigenvalue.
    pub rank_tolerance: f64,
    /// Ambient basis candidates whose normal residual is shorter than this are skipped.
    pub normal_threshold: f64,
    /// Orthogonal `p x p` re-mixing applied to the normal frame before assembly.
    pub normal_gauge: Option<DMatrix<f64>>,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            rank_tolerance: 1e-12,
            normal_threshold: 1e-8,
            normal_gauge: None,
        }
    }
}

pub(crate) fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    let order = a[0].order().min(b[0].order());
    let mut acc = Jet::constant(a[0].nvars(), order, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc.add_product(x, y);
    }
    acc
}

/// `acc -= s * v` componentwise.
fn sub_scaled(acc: &mut [Jet], s: &Jet, v: &[Jet]) {
    for (a, x) in acc.iter_mut().zip(v) {
        a.sub_product(s, x);
    }
}

pub(crate) fn values(v: &[Jet]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(Jet::value))
}

fn partial_vec(v: &[Jet], var: usize) -> Vec<Jet> {
    v.iter().map(|j| j.partial(var)).collect()
}

/// Jet-valued geometric fields around one chart point.
pub(crate) struct Fields {
    pub n: usize,
    pub order: usize,
    pub x: Vec<Jet>,
    /// `d_a x`, indexed `[a][component]`.
    pub tangents: Vec<Vec<Jet>>,
    pub metric: Vec<Vec<Jet>>,
    pub inverse_metric: Vec<Vec<Jet>>,
    /// `sum_b g^{ab} d_b x`.
    dual: Vec<Vec<Jet>>,
    /// Tangential Christoffel symbols `Gamma^c_ab`, indexed `[c][a][b]`; empty below order 2.
    pub christoffel: Vec<Vec<Vec<Jet>>>,
    /// `B_ab = (d_ab x)^perp`, indexed `[a][b][component]`; empty below order 2.
    pub second_form: Vec<Vec<Vec<Jet>>>,
    /// `H = g^{ab} B_ab`; empty below order 2.
    pub mean_curvature: Vec<Jet>,
}

impl Fields {
    pub fn new(x: Vec<Jet>, n: usize) -> Fields {
        let order = x[0].order();
        assert!(order >= 1, "geometry needs at least first derivatives");
        let tangents: Vec<Vec<Jet>> = (0..n).map(|a| partial_vec(&x, a)).collect();
        let mut metric: Vec<Vec<Jet>> = vec![Vec::with_capacity(n); n];
        for a in 0..n {
            for b in 0..n {
                let gab = if b < a { metric[b][a].clone() } else { dot(&tangents[a], &tangents[b]) };
                metric[a].push(gab);
            }
        }
        let inverse_metric = invert_jet_matrix(&metric);
        let dual: Vec<Vec<Jet>> = (0..n)
            .map(|a| {
                let mut v: Vec<Jet> = tangents[0].iter().map(|t| t.scale(0.0)).collect();
                for b in 0..n {
                    for (acc, t) in v.iter_mut().zip(&tangents[b]) {
                        acc.add_product(&inverse_metric[a][b], t);
                    }
                }
                v
            })
            .collect();

        let mut fields = Fields {
            n,
            order,
            x,
            tangents,
            metric,
            inverse_metric,
            dual,
            christoffel: Vec::new(),
            second_form: Vec::new(),
            mean_curvature: Vec::new(),
        };
        if order >= 2 {
            fields.build_second_order();
        }
        fields
    }

    fn build_second_order(&mut self) {
        let n = self.n;
        let hess: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|a| (0..n).map(|b| partial_vec(&self.tangents[a], b)).collect())
            .collect();
        let mut chr: Vec<Vec<Vec<Jet>>> = vec![vec![Vec::with_capacity(n); n]; n];
        for (c, chr_c) in chr.iter_mut().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    let v = if b < a {
                        chr_c[b][a].clone()
                    } else {
                        dot(&hess[a][b], &self.dual[c])
                    };
                    chr_c[a].push(v);
                }
            }
        }
        let mut second: Vec<Vec<Vec<Jet>>> = vec![Vec::with_capacity(n); n];
        for a in 0..n {
            for b in 0..n {
                if b < a {
                    let v = second[b][a].clone();
                    second[a].push(v);
                    continue;
                }
                let mut v = hess[a][b].clone();
                for c in 0..n {
                    sub_scaled(&mut v, &chr[c][a][b], &self.tangents[c]);
                }
                second[a].push(v);
            }
        }
        let mut h: Vec<Jet> = second[0][0].iter().map(|j| j.scale(0.0)).collect();
        for a in 0..n {
            for b in 0..n {
                for (acc, v) in h.iter_mut().zip(&second[a][b]) {
                    acc.add_product(&self.inverse_metric[a][b], v);
                }
            }
        }
        self.christoffel = chr;
        self.second_form = second;
        self.mean_curvature = h;
    }

    /// Normal projection of an ambient jet vector.
    pub fn normal_part(&self, v: &[Jet]) -> Vec<Jet> {
        let mut w = v.to_vec();
        for a in 0..self.n {
            let c = dot(&self.dual[a], v);
            sub_scaled(&mut w, &c, &self.tangents[a]);
        }
        w
    }

    /// `(nabla_c B)_ab`, indexed `[a][b][c][component]`. Needs order >= 3.
    pub fn covariant_second_form(&self) -> Vec<Vec<Vec<Vec<Jet>>>> {
        let n = self.n;
        let chr = &self.christoffel;
        let b = &self.second_form;
        let mut out = vec![vec![Vec::new(); n]; n];
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    out[i][j] = out[j][i].clone();
                    continue;
                }
                for c in 0..n {
                    let mut v = self.normal_part(&partial_vec(&b[i][j], c));
                    for d in 0..n {
                        sub_scaled(&mut v, &chr[d][c][i], &b[d][j]);
                        sub_scaled(&mut v, &chr[d][c][j], &b[i][d]);
                    }
                    out[i][j].push(v);
                }
            }
        }
        out
    }

    /// `nabla^perp_c H`, indexed `[c][component]`. Needs order >= 3.
    pub fn normal_gradient_h(&self) -> Vec<Vec<Jet>> {
        (0..self.n)
            .map(|c| self.normal_part(&partial_vec(&self.mean_curvature, c)))
            .collect()
    }

    /// `(nabla_d nabla^perp H)(d_c)`, indexed `[c][d][component]`. Needs order >= 4.
    pub fn normal_hessian_h(&self, grad: &[Vec<Jet>]) -> Vec<Vec<Vec<Jet>>> {
        let n = self.n;
        (0..n)
            .map(|c| {
                (0..n)
                    .map(|d| {
                        let mut v = self.normal_part(&partial_vec(&grad[c], d));
                        for e in 0..n {
                            sub_scaled(&mut v, &self.christoffel[e][d][c], &grad[e]);
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    /// `|A|^2 = g^{ac} g^{bd} <B_ab, B_cd>` as a jet.
    pub fn norm_a_sq_field(&self) -> Jet {
        let n = self.n;
        let gi = &self.inverse_metric;
        let b = &self.second_form;
        let zero = b[0][0][0].scale(0.0);
        let mut acc = zero.clone();
        for a in 0..n {
            for bb in 0..n {
                let mut raised: Vec<Jet> = vec![zero.clone(); b[0][0].len()];
                for c in 0..n {
                    for d in 0..n {
                        let w = &gi[a][c] * &gi[bb][d];
                        for (r, v) in raised.iter_mut().zip(&b[c][d]) {
                            r.add_product(&w, v);
                        }
                    }
                }
                for (x, y) in b[a][bb].iter().zip(&raised) {
                    acc.add_product(x, y);
                }
            }
        }
        acc
    }

    /// Intrinsic Laplace-Beltrami operator of a scalar field at the base point:
    /// `g^{ab} (d_ab phi - Gamma^c_ab d_c phi)`. Needs `phi` of order >= 2.
    pub fn scalar_laplacian(&self, phi: &Jet) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                let mut hess = phi.d2(a, b);
                for c in 0..n {
                    hess -= self.christoffel[c][a][b].value() * phi.d1(c);
                }
                acc += self.inverse_metric[a][b].value() * hess;
            }
        }
        acc
    }

    /// Christoffel symbols from metric derivatives alone, `[c][a][b]`.
    pub fn intrinsic_christoffel(&self) -> Vec<Vec<Vec<Jet>>> {
        let n = self.n;
        let dg: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|k| (0..n).map(|i| (0..n).map(|j| self.metric[i][j].partial(k)).collect()).collect())
            .collect();
        // first kind: Gamma_{c;ab} = (d_a g_bc + d_b g_ac - d_c g_ab) / 2
        let first: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|c| {
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| (&(&dg[a][b][c] + &dg[b][a][c]) - &dg[c][a][b]).scale(0.5))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (0..n)
            .map(|e| {
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| {
                                let mut acc = first[0][a][b].scale(0.0);
                                for c in 0..n {
                                    acc.add_product(&self.inverse_metric[e][c], &first[c][a][b]);
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Coordinate Riemann tensor `R_abcd` from the metric alone. Needs order >= 3.
    pub fn intrinsic_riemann(&self) -> Array4<f64> {
        let n = self.n;
        let chr = self.intrinsic_christoffel();
        let mut up = Array4::<f64>::zeros((n, n, n, n));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = chr[a][d][b].d1(c) - chr[a][c][b].d1(d);
                        for e in 0..n {
                            v += chr[a][c][e].value() * chr[e][d][b].value()
                                - chr[a][d][e].value() * chr[e][c][b].value();
                        }
                        up[[a, b, c, d]] = v;
                    }
                }
            }
        }
        let mut low = Array4::<f64>::zeros((n, n, n, n));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        low[[a, b, c, d]] = (0..n)
                            .map(|e| self.metric[a][e].value() * up[[e, b, c, d]])
                            .sum();
                    }
                }
            }
        }
        low
    }
}

/// Inverse of a symmetric positive-definite matrix of jets, by the Neumann
/// series around its constant part.
fn invert_jet_matrix(g: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = g.len();
    let nvars = g[0][0].nvars();
    let order = g[0][0].order();
    let g0 = DMatrix::from_fn(n, n, |a, b| g[a][b].value());
    let g0inv = g0.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(n, n));
    // M = -g0^{-1} (g - g0)
    let m: Vec<Vec<Jet>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let mut acc = Jet::constant(nvars, order, 0.0);
                    for c in 0..n {
                        let mut d = g[c][b].clone();
                        d = d - g[c][b].value();
                        acc = acc + d.scale(-g0inv[(a, c)]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut term: Vec<Vec<Jet>> = (0..n)
        .map(|a| (0..n).map(|b| Jet::constant(nvars, order, g0inv[(a, b)])).collect())
        .collect();
    let mut sum = term.clone();
    for _ in 0..order {
        let next: Vec<Vec<Jet>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut acc = Jet::constant(nvars, order, 0.0);
                        for c in 0..n {
                            acc.add_product(&m[a][c], &term[c][b]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        for a in 0..n {
            for b in 0..n {
                sum[a][b] += &next[a][b];
            }
        }
        term = next;
    }
    sum
}

/// Orthonormal frames at the base point.
#[derive(Clone, Debug)]
pub(crate) struct Frames {
    /// `e_i = sum_a coeffs[(i, a)] d_a x`.
    pub coeffs: DMatrix<f64>,
    pub tangent: Vec<DVector<f64>>,
    pub normal: Vec<DVector<f64>>,
}

fn build_frames(fields: &Fields, codim: usize, opts: &GeometryOptions, pt: &ChartPoint) -> Result<Frames> {
    let n = fields.n;
    let g0 = DMatrix::from_fn(n, n, |a, b| fields.metric[a][b].value());
    let min_eig = SymmetricEigen::new(g0.clone()).eigenvalues.min();
    if !(min_eig > opts.rank_tolerance) {
        return Err(LabError::DegenerateImmersion {
            point: pt.clone(),
            min_eigenvalue: min_eig,
        });
    }
    // Gram-Schmidt on d_1 x, ..., d_n x in index order is e = J L^{-T} with g = L L^T.
    let chol = g0.cholesky().ok_or_else(|| LabError::DegenerateImmersion {
        point: pt.clone(),
        min_eigenvalue: min_eig,
    })?;
    let coeffs = chol
        .l()
        .try_inverse()
        .expect("Cholesky factor of a positive-definite metric is invertible");
    let cols: Vec<DVector<f64>> = fields.tangents.iter().map(|t| values(t)).collect();
    let ambient = cols[0].len();
    let tangent: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(ambient);
            for a in 0..n {
                e += &cols[a] * coeffs[(i, a)];
            }
            e
        })
        .collect();

    let mut normal: Vec<DVector<f64>> = Vec::with_capacity(codim);
    for k in 0..ambient {
        if normal.len() == codim {
            break;
        }
        let mut v = DVector::zeros(ambient);
        v[k] = 1.0;
        // two passes keep orthogonality at rounding level
        for _ in 0..2 {
            for e in tangent.iter().chain(normal.iter()) {
                let c = e.dot(&v);
                v -= e * c;
            }
        }
        let norm = v.norm();
        if norm > opts.normal_threshold {
            normal.push(v / norm);
        }
    }
    if normal.len() < codim {
        return Err(LabError::DegenerateImmersion {
            point: pt.clone(),
            min_eigenvalue: min_eig,
        });
    }
    if let Some(q) = &opts.normal_gauge {
        normal = (0..codim)
            .map(|a| {
                let mut e = DVector::zeros(ambient);
                for b in 0..codim {
                    e += &normal[b] * q[(a, b)];
                }
                e
            })
            .collect();
    }
    Ok(Frames {
        coeffs,
        tangent,
        normal,
    })
}

/// Pointwise first- and second-order quantities.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub point: ChartPoint,
    pub position: DVector<f64>,
    /// `g_ab = <d_a x, d_b x>`.
    pub metric: DMatrix<f64>,
    /// Coefficients expressing the orthonormal tangent frame in coordinate vectors.
    pub frame_coeffs: DMatrix<f64>,
    pub tangent_frame: Vec<DVector<f64>>,
    pub normal_frame: Vec<DVector<f64>>,
    /// `h^alpha_ij`, indexed `[alpha, i, j]`.
    pub second_form: Array3<f64>,
    pub mean_curvature_components: DVector<f64>,
    pub mean_curvature_vector: DVector<f64>,
    pub norm_a_sq: f64,
    /// `sigma_{alpha beta} = sum_ij h^alpha_ij h^beta_ij`.
    pub sigma: DMatrix<f64>,
    /// `<x, e_i>`.
    pub position_tangential: DVector<f64>,
    /// `<x, e_alpha>`.
    pub position_normal: DVector<f64>,
}

impl PointGeometry {
    pub fn n(&self) -> usize {
        self.tangent_frame.len()
    }

    pub fn p(&self) -> usize {
        self.normal_frame.len()
    }

    /// `|H|^2`.
    pub fn mean_curvature_sq(&self) -> f64 {
        self.mean_curvature_vector.norm_squared()
    }

    /// Normal component `x^perp` as an ambient vector.
    pub fn position_normal_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.position.len());
        for (a, e) in self.normal_frame.iter().enumerate() {
            v += e * self.position_normal[a];
        }
        v
    }

    /// Ambient vector `sum_alpha c_alpha e_alpha`.
    pub fn normal_vector(&self, comps: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.position.len());
        for (e, c) in self.normal_frame.iter().zip(comps) {
            v += e * *c;
        }
        v
    }

    /// Frame-orthonormality defect `max |<b_u, b_v> - delta_uv|`.
    pub fn frame_defect(&self) -> f64 {
        let basis: Vec<&DVector<f64>> = self.tangent_frame.iter().chain(&self.normal_frame).collect();
        let mut worst: f64 = 0.0;
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }
}

/// Jet fields, frames and pointwise geometry evaluated together.
pub(crate) struct Evaluation {
    pub fields: Fields,
    pub frames: Frames,
    pub geometry: PointGeometry,
}

impl Evaluation {
    /// Expresses a coordinate-indexed ambient vector family `v[a][b]` in frame
    /// components `[alpha, i, j]` (normal part only).
    pub fn frame_components2(&self, v: &[Vec<DVector<f64>>]) -> Array3<f64> {
        let n = self.fields.n;
        let e = &self.frames.coeffs;
        let p = self.frames.normal.len();
        let mut out = Array3::zeros((p, n, n));
        for (al, nu) in self.frames.normal.iter().enumerate() {
            let coord = DMatrix::from_fn(n, n, |a, b| v[a][b].dot(nu));
            let framed = e * coord * e.transpose();
            for i in 0..n {
                for j in 0..n {
                    out[[al, i, j]] = framed[(i, j)];
                }
            }
        }
        out
    }

    /// Coordinate-indexed ambient vectors `v[a]` to normal frame components `[alpha, i]`.
    pub fn frame_components1(&self, v: &[DVector<f64>]) -> Array2<f64> {
        let n = self.fields.n;
        let e = &self.frames.coeffs;
        let p = self.frames.normal.len();
        let mut out = Array2::zeros((p, n));
        for (al, nu) in self.frames.normal.iter().enumerate() {
            for i in 0..n {
                out[[al, i]] = (0..n).map(|a| e[(i, a)] * v[a].dot(nu)).sum();
            }
        }
        out
    }

    /// Coordinate vectors `v[a]` to frame-indexed ambient vectors `sum_a E_ia v[a]`.
    pub fn frame_vectors(&self, v: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let n = self.fields.n;
        let e = &self.frames.coeffs;
        (0..n)
            .map(|i| {
                let mut acc = DVector::zeros(v[0].len());
                for a in 0..n {
                    acc += &v[a] * e[(i, a)];
                }
                acc
            })
            .collect()
    }
}

pub(crate) fn evaluate(imm: &Immersion, pt: &ChartPoint, order: usize, opts: &GeometryOptions) -> Result<Evaluation> {
    let order = order.max(2);
    let x = imm.position_jets(pt, order)?;
    let fields = Fields::new(x, imm.intrinsic_dim);
    let frames = build_frames(&fields, imm.codim, opts, pt)?;
    let geometry = assemble(&fields, &frames, pt);
    Ok(Evaluation {
        fields,
        frames,
        geometry,
    })
}

fn assemble(fields: &Fields, frames: &Frames, pt: &ChartPoint) -> PointGeometry {
    let n = fields.n;
    let p = frames.normal.len();
    let e = &frames.coeffs;
    let position = values(&fields.x);
    let metric = DMatrix::from_fn(n, n, |a, b| fields.metric[a][b].value());
    let b0: Vec<Vec<DVector<f64>>> = fields
        .second_form
        .iter()
        .map(|row| row.iter().map(|v| values(v)).collect())
        .collect();
    let mut second_form = Array3::zeros((p, n, n));
    for (al, nu) in frames.normal.iter().enumerate() {
        let coord = DMatrix::from_fn(n, n, |a, b| b0[a][b].dot(nu));
        let framed = e * coord * e.transpose();
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (framed[(i, j)] + framed[(j, i)]);
                second_form[[al, i, j]] = v;
                second_form[[al, j, i]] = v;
            }
        }
    }
    let h_comps = DVector::from_fn(p, |al, _| (0..n).map(|i| second_form[[al, i, i]]).sum());
    let mut h_vec = DVector::zeros(position.len());
    for (al, nu) in frames.normal.iter().enumerate() {
        h_vec += nu * h_comps[al];
    }
    let sigma = DMatrix::from_fn(p, p, |a, b| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += second_form[[a, i, j]] * second_form[[b, i, j]];
            }
        }
        s
    });
    let norm_a_sq = sigma.trace();
    let position_tangential = DVector::from_fn(n, |i, _| frames.tangent[i].dot(&position));
    let position_normal = DVector::from_fn(p, |a, _| frames.normal[a].dot(&position));
    PointGeometry {
        point: pt.clone(),
        position,
        metric,
        frame_coeffs: e.clone(),
        tangent_frame: frames.tangent.clone(),
        normal_frame: frames.normal.clone(),
        second_form,
        mean_curvature_components: h_comps,
        mean_curvature_vector: h_vec,
        norm_a_sq,
        sigma,
        position_tangential,
        position_normal,
    }
}

/// First fundamental form `g_ab = <d_a x, d_b x>`.
pub fn induced_metric(imm: &Immersion, pt: &ChartPoint) -> Result<DMatrix<f64>> {
    let x = imm.position_jets(pt, 1)?;
    let fields = Fields::new(x, imm.intrinsic_dim);
    let n = imm.intrinsic_dim;
    let g = DMatrix::from_fn(n, n, |a, b| fields.metric[a][b].value());
    let min_eig = SymmetricEigen::new(g.clone()).eigenvalues.min();
    if !(min_eig > GeometryOptions::default().rank_tolerance) {
        return Err(LabError::DegenerateImmersion {
            point: pt.clone(),
            min_eigenvalue: min_eig,
        });
    }
    Ok(g)
}

pub fn pointwise_geometry(imm: &Immersion, pt: &ChartPoint) -> Result<PointGeometry> {
    pointwise_geometry_with(imm, pt, &GeometryOptions::default())
}

pub fn pointwise_geometry_with(imm: &Immersion, pt: &ChartPoint, opts: &GeometryOptions) -> Result<PointGeometry> {
    Ok(evaluate(imm, pt, 2, opts)?.geometry)
}

/// Intrinsic and normal curvature assembled from the second fundamental form.
#[derive(Clone, Debug)]
pub struct CurvatureTensors {
    /// `R_ijkl = sum_alpha (h_ik h_jl - h_il h_jk)`.
    pub riemann: Array4<f64>,
    /// `R_ik = sum_alpha H^alpha h_ik - sum_{alpha,j} h_ij h_jk`.
    pub ricci: Array2<f64>,
    /// `R = |H|^2 - |A|^2`.
    pub scalar: f64,
    /// `sum_i R_ii`, the same quantity by the trace route.
    pub scalar_from_ricci: f64,
    /// `R_{alpha beta ij}`, indexed `[alpha, beta, i, j]`.
    pub normal_curvature: Array4<f64>,
}

pub fn curvature_tensors(pg: &PointGeometry) -> CurvatureTensors {
    let n = pg.n();
    let p = pg.p();
    let h = &pg.second_form;
    let mut riemann = Array4::zeros((n, n, n, n));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    riemann[[i, j, k, l]] = (0..p)
                        .map(|a| h[[a, i, k]] * h[[a, j, l]] - h[[a, i, l]] * h[[a, j, k]])
                        .sum();
                }
            }
        }
    }
    let hc = &pg.mean_curvature_components;
    let mut ricci = Array2::zeros((n, n));
    for i in 0..n {
        for k in 0..n {
            let mut v = 0.0;
            for a in 0..p {
                v += hc[a] * h[[a, i, k]];
                for j in 0..n {
                    v -= h[[a, i, j]] * h[[a, j, k]];
                }
            }
            ricci[[i, k]] = v;
        }
    }
    let scalar = pg.mean_curvature_sq() - pg.norm_a_sq;
    let scalar_from_ricci = (0..n).map(|i| ricci[[i, i]]).sum();
    let mut normal_curvature = Array4::zeros((p, p, n, n));
    for a in 0..p {
        for b in 0..p {
            for i in 0..n {
                for j in 0..n {
                    normal_curvature[[a, b, i, j]] = (0..n)
                        .map(|k| h[[a, i, k]] * h[[b, k, j]] - h[[a, j, k]] * h[[b, k, i]])
                        .sum();
                }
            }
        }
    }
    CurvatureTensors {
        riemann,
        ricci,
        scalar,
        scalar_from_ricci,
        normal_curvature,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureResiduals {
    /// Intrinsic Riemann tensor (metric route) against the Gauss equation.
    pub gauss: f64,
    /// `max |h_ijk - h_ikj|`.
    pub codazzi: f64,
    /// `|sum_i R_ii - (|H|^2 - |A|^2)|`.
    pub scalar_consistency: f64,
    /// Covariant Hessian of the position (metric Christoffels) against `sum_alpha h_ij e_alpha`.
    pub hessian_identity: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        self.gauss
            .max(self.codazzi)
            .max(self.scalar_consistency)
            .max(self.hessian_identity)
    }
}

/// Residuals of the structure equations at one point. Needs third derivatives.
pub fn structure_residuals(imm: &Immersion, pt: &ChartPoint) -> Result<StructureResiduals> {
    let ev = evaluate(imm, pt, 3, &GeometryOptions::default())?;
    let n = imm.intrinsic_dim;
    let pg = &ev.geometry;
    let e = &ev.frames.coeffs;
    let curv = curvature_tensors(pg);

    let coord_r = ev.fields.intrinsic_riemann();
    let mut gauss: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            for c in 0..n {
                                for d in 0..n {
                                    v += e[(i, a)] * e[(j, b)] * e[(k, c)] * e[(l, d)] * coord_r[[a, b, c, d]];
                                }
                            }
                        }
                    }
                    gauss = gauss.max((v - curv.riemann[[i, j, k, l]]).abs());
                }
            }
        }
    }

    let grad = ev.fields.covariant_second_form();
    let hg = frame_third_order(&ev, &grad);
    let mut codazzi: f64 = 0.0;
    for a in 0..pg.p() {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    codazzi = codazzi.max((hg[[a, i, j, k]] - hg[[a, i, k, j]]).abs());
                }
            }
        }
    }

    let scalar_consistency = (curv.scalar_from_ricci - curv.scalar).abs();

    let chr = ev.fields.intrinsic_christoffel();
    let tangents: Vec<DVector<f64>> = ev.fields.tangents.iter().map(|t| values(t)).collect();
    let coord_hess: Vec<Vec<DVector<f64>>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let mut v = values(&partial_vec(&ev.fields.tangents[a], b));
                    for c in 0..n {
                        v -= &tangents[c] * chr[c][a][b].value();
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut hessian_identity: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut v = DVector::zeros(pg.position.len());
            for a in 0..n {
                for b in 0..n {
                    v += &coord_hess[a][b] * (e[(i, a)] * e[(j, b)]);
                }
            }
            for (al, nu) in pg.normal_frame.iter().enumerate() {
                v -= nu * pg.second_form[[al, i, j]];
            }
            hessian_identity = hessian_identity.max(v.norm());
        }
    }

    Ok(StructureResiduals {
        gauss,
        codazzi,
        scalar_consistency,
        hessian_identity,
    })
}

/// Frame components `[alpha, i, j, k]` of a coordinate tensor `t[a][b][c]` of normal vectors.
pub(crate) fn frame_third_order(ev: &Evaluation, t: &[Vec<Vec<Vec<Jet>>>]) -> Array4<f64> {
    let n = ev.fields.n;
    let p = ev.frames.normal.len();
    let e = &ev.frames.coeffs;
    let vals: Vec<Vec<Vec<DVector<f64>>>> = t
        .iter()
        .map(|r| r.iter().map(|s| s.iter().map(|v| values(v)).collect()).collect())
        .collect();
    let mut out = Array4::zeros((p, n, n, n));
    for (al, nu) in ev.frames.normal.iter().enumerate() {
        let mut coord = Array3::<f64>::zeros((n, n, n));
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    coord[[a, b, c]] = vals[a][b][c].dot(nu);
                }
            }
        }
        // contract one index at a time
        let mut s1 = Array3::<f64>::zeros((n, n, n));
        for i in 0..n {
            for b in 0..n {
                for c in 0..n {
                    s1[[i, b, c]] = (0..n).map(|a| e[(i, a)] * coord[[a, b, c]]).sum();
                }
            }
        }
        let mut s2 = Array3::<f64>::zeros((n, n, n));
        for i in 0..n {
            for j in 0..n {
                for c in 0..n {
                    s2[[i, j, c]] = (0..n).map(|b| e[(j, b)] * s1[[i, b, c]]).sum();
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[[al, i, j, k]] = (0..n).map(|c| e[(k, c)] * s2[[i, j, c]]).sum();
                }
            }
        }
    }
    out
}

/// Height functions `f = <x, a>` and `g_alpha = <e_alpha, a>` with their derivatives.
#[derive(Clone, Debug)]
pub struct HeightProbe {
    pub direction: DVector<f64>,
    pub f: f64,
    pub g: DVector<f64>,
    /// `f_i`.
    pub f_grad: DVector<f64>,
    /// `f_ij`.
    pub f_hess: DMatrix<f64>,
    /// `g_{alpha,i}`, indexed `[alpha, i]`.
    pub g_grad: Array2<f64>,
    /// `g_{alpha,ij}`, indexed `[alpha, i, j]` with `j` the differentiation direction.
    pub g_hess: Array3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightProbeResidual {
    /// `f_i = <e_i, a>`.
    pub f_grad: f64,
    /// `f_ij = sum_alpha h^alpha_ij <e_alpha, a>`.
    pub f_hess: f64,
    /// `g_{alpha,i} = -sum_k h^alpha_ik <e_k, a>`.
    pub g_grad: f64,
    /// `g_{alpha,ij} = -sum_k h^alpha_ikj <e_k,a> - sum_{k,beta} h^alpha_ik h^beta_kj <e_beta,a>`.
    pub g_hess: f64,
}

impl HeightProbeResidual {
    pub fn max(&self) -> f64 {
        self.f_grad.max(self.f_hess).max(self.g_grad).max(self.g_hess)
    }
}

/// Height-function derivatives at a point, taken from the immersion's
/// derivative oracle (exact jets or finite differences).
pub fn height_probe(imm: &Immersion, pt: &ChartPoint, a: &DVector<f64>) -> Result<HeightProbe> {
    let ev = evaluate(imm, pt, 3, &GeometryOptions::default())?;
    Ok(height_probe_from(a, &ev))
}

fn height_probe_from(a: &DVector<f64>, ev: &Evaluation) -> HeightProbe {
    let fields = &ev.fields;
    let n = fields.n;
    let pg = &ev.geometry;
    let e = &ev.frames.coeffs;
    let nv = fields.x[0].nvars();
    let aj: Vec<Jet> = a.iter().map(|&v| Jet::constant(nv, fields.order, v)).collect();
    let f = dot(&fields.x, &aj);
    let gfield = fields.normal_part(&aj);
    let chr: Vec<Vec<Vec<f64>>> = fields
        .christoffel
        .iter()
        .map(|r| r.iter().map(|s| s.iter().map(Jet::value).collect()).collect())
        .collect();

    let coord_fgrad = DVector::from_fn(n, |c, _| f.d1(c));
    let f_grad = e * &coord_fgrad;
    let coord_fhess = DMatrix::from_fn(n, n, |ai, bi| {
        f.d2(ai, bi) - (0..n).map(|c| chr[c][ai][bi] * f.d1(c)).sum::<f64>()
    });
    let f_hess = e * coord_fhess * e.transpose();

    let dg: Vec<DVector<f64>> = (0..n)
        .map(|c| DVector::from_iterator(gfield.len(), gfield.iter().map(|j| j.d1(c))))
        .collect();
    let ddg = |s: usize, d: usize| DVector::from_iterator(gfield.len(), gfield.iter().map(|j| j.d2(s, d)));

    let tangents: Vec<DVector<f64>> = fields.tangents.iter().map(|t| values(t)).collect();
    let ginv = DMatrix::from_fn(n, n, |i, j| fields.inverse_metric[i][j].value());
    let b0: Vec<Vec<DVector<f64>>> = fields
        .second_form
        .iter()
        .map(|r| r.iter().map(|v| values(v)).collect())
        .collect();
    let project = |v: &DVector<f64>| {
        let mut w = v.clone();
        for t in &pg.tangent_frame {
            w -= t * t.dot(v);
        }
        w
    };
    let nabla_g: Vec<DVector<f64>> = dg.iter().map(&project).collect();
    // (nabla^2 G)(d_slot; d_dir) = P(d_{slot,dir} G) - B_{dir,d} t^d_slot - Gamma^c_{dir,slot} nabla_c G
    let hess_g = |slot: usize, dir: usize| {
        let mut v = project(&ddg(slot, dir));
        for d in 0..n {
            let td: f64 = (0..n).map(|c| ginv[(d, c)] * tangents[c].dot(&dg[slot])).sum();
            v -= &b0[dir][d] * td;
        }
        for c in 0..n {
            v -= &nabla_g[c] * chr[c][dir][slot];
        }
        v
    };
    let p = pg.p();
    let mut g_grad = Array2::zeros((p, n));
    for (al, nu) in pg.normal_frame.iter().enumerate() {
        for i in 0..n {
            g_grad[[al, i]] = (0..n).map(|ai| e[(i, ai)] * nabla_g[ai].dot(nu)).sum();
        }
    }
    let coord_hess: Vec<Vec<DVector<f64>>> = (0..n).map(|s| (0..n).map(|d| hess_g(s, d)).collect()).collect();
    let mut g_hess = Array3::zeros((p, n, n));
    for (al, nu) in pg.normal_frame.iter().enumerate() {
        let coord = DMatrix::from_fn(n, n, |s, d| coord_hess[s][d].dot(nu));
        let framed = e * coord * e.transpose();
        for i in 0..n {
            for j in 0..n {
                g_hess[[al, i, j]] = framed[(i, j)];
            }
        }
    }
    let g0 = values(&gfield);
    HeightProbe {
        direction: a.clone(),
        f: f.value(),
        g: DVector::from_fn(p, |al, _| pg.normal_frame[al].dot(&g0)),
        f_grad,
        f_hess,
        g_grad,
        g_hess,
    }
}

/// Compares height-function derivatives with their expressions through the
/// second fundamental form.
pub fn height_probe_check(imm: &Immersion, pt: &ChartPoint, a: &DVector<f64>) -> Result<HeightProbeResidual> {
    let ev = evaluate(imm, pt, 3, &GeometryOptions::default())?;
    let probe = height_probe_from(a, &ev);
    let n = imm.intrinsic_dim;
    let pg = &ev.geometry;
    let p = pg.p();
    let h = &pg.second_form;
    let ea: Vec<f64> = pg.tangent_frame.iter().map(|t| t.dot(a)).collect();
    let na: Vec<f64> = pg.normal_frame.iter().map(|v| v.dot(a)).collect();
    let hg = frame_third_order(&ev, &ev.fields.covariant_second_form());

    let mut r = HeightProbeResidual {
        f_grad: 0.0,
        f_hess: 0.0,
        g_grad: 0.0,
        g_hess: 0.0,
    };
    for i in 0..n {
        r.f_grad = r.f_grad.max((probe.f_grad[i] - ea[i]).abs());
        for j in 0..n {
            let closed: f64 = (0..p).map(|al| h[[al, i, j]] * na[al]).sum();
            r.f_hess = r.f_hess.max((probe.f_hess[(i, j)] - closed).abs());
        }
    }
    for al in 0..p {
        for i in 0..n {
            let closed: f64 = -(0..n).map(|k| h[[al, i, k]] * ea[k]).sum::<f64>();
            r.g_grad = r.g_grad.max((probe.g_grad[[al, i]] - closed).abs());
            for j in 0..n {
                let mut closed = 0.0;
                for k in 0..n {
                    closed -= hg[[al, i, k, j]] * ea[k];
                    for be in 0..p {
                        closed -= h[[al, i, k]] * h[[be, k, j]] * na[be];
                    }
                }
                r.g_hess = r.g_hess.max((probe.g_hess[[al, i, j]] - closed).abs());
            }
        }
    }
    Ok(r)
}
