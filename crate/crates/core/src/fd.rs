//! Central finite differences for vector-valued functions of chart coordinates.
//!
//! Mixed partials are tensor products of one-dimensional central stencils of
//! fourth-order accuracy. The step for a partial of total order `t` is
//! `eps^(1/(4+t)) * max(1, |u_k|)`, which balances the `h^4` truncation term
//! against the `eps / h^t` rounding term.

use crate::jet::{Jet, MAX_ORDER};

/// Accuracy order of every stencil produced here.
pub const STENCIL_ACCURACY: usize = 4;

/// Finite-difference weights (Fornberg's recursion) for derivatives `0..=max_deriv`
/// at `x0` over the given nodes. Returns `weights[node][deriv]`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; max_deriv + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Central stencil `(offset, weight)` for the `deriv`-th derivative on a unit grid.
pub fn central_stencil(deriv: usize) -> Vec<(i32, f64)> {
    if deriv == 0 {
        return vec![(0, 1.0)];
    }
    let points = 2 * deriv.div_ceil(2) - 1 + STENCIL_ACCURACY;
    let half = (points / 2) as i32;
    let nodes: Vec<f64> = (-half..=half).map(f64::from).collect();
    let w = fornberg_weights(0.0, &nodes, deriv);
    (-half..=half)
        .zip(w)
        .map(|(o, row)| (o, row[deriv]))
        .filter(|(_, wt)| wt.abs() > 1e-14)
        .collect()
}

/// Base step for a partial of total order `total` (before scaling by `max(1,|u|)`).
pub fn base_step(total: usize) -> f64 {
    f64::EPSILON.powf(1.0 / (STENCIL_ACCURACY + total) as f64)
}

/// Mixed partial `d^alpha f(u)` of a vector-valued `f`.
pub fn mixed_partial<F>(f: &F, u: &[f64], alpha: &[u8]) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let total: usize = alpha.iter().map(|&a| a as usize).sum();
    let h0 = base_step(total);
    let axes: Vec<(usize, f64, Vec<(i32, f64)>)> = alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(k, &a)| (k, h0 * u[k].abs().max(1.0), central_stencil(a as usize)))
        .collect();

    let mut acc: Option<Vec<f64>> = None;
    let mut idx = vec![0usize; axes.len()];
    let mut point = u.to_vec();
    loop {
        let mut weight = 1.0;
        for (slot, (k, h, st)) in axes.iter().enumerate() {
            let (o, w) = st[idx[slot]];
            point[*k] = u[*k] + o as f64 * h;
            weight *= w / h.powi(alpha[*k] as i32);
        }
        let val = f(&point);
        match acc.as_mut() {
            None => acc = Some(val.iter().map(|v| v * weight).collect()),
            Some(a) => a.iter_mut().zip(&val).for_each(|(a, v)| *a += v * weight),
        }
        // advance the tensor index
        let mut slot = 0;
        loop {
            if slot == axes.len() {
                return acc.expect("stencil has at least one point");
            }
            idx[slot] += 1;
            if idx[slot] < axes[slot].2.len() {
                break;
            }
            idx[slot] = 0;
            slot += 1;
        }
    }
}

/// Taylor jets of every component of `f` around `u`, built from finite-difference
/// partials up to `order`.
pub fn jets<F>(f: &F, u: &[f64], order: usize) -> Vec<Jet>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    assert!(order <= MAX_ORDER);
    let n = u.len();
    let monomials = Jet::monomials(n, order);
    let partials: Vec<Vec<f64>> = monomials.iter().map(|a| mixed_partial(f, u, a)).collect();
    let m = partials[0].len();
    (0..m)
        .map(|c| {
            let column: Vec<f64> = partials.iter().map(|p| p[c]).collect();
            Jet::from_partials(n, order, &column)
        })
        .collect()
}

/// Gradient `[var][component]` of a vector-valued `f`.
pub fn gradient<F>(f: &F, u: &[f64]) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    (0..u.len())
        .map(|k| {
            let mut alpha = vec![0u8; u.len()];
            alpha[k] = 1;
            mixed_partial(f, u, &alpha)
        })
        .collect()
}

/// Hessian `[a][b][component]` of a vector-valued `f`.
pub fn hessian<F>(f: &F, u: &[f64]) -> Vec<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let n = u.len();
    let mut out = vec![vec![Vec::new(); n]; n];
    for a in 0..n {
        for b in a..n {
            let mut alpha = vec![0u8; n];
            alpha[a] += 1;
            alpha[b] += 1;
            let d = mixed_partial(f, u, &alpha);
            out[b][a] = d.clone();
            out[a][b] = d;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classic_five_point_first_derivative() {
        let st = central_stencil(1);
        let expect = [(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)];
        assert_eq!(st.len(), 4);
        for ((o, w), (eo, ew)) in st.iter().zip(expect) {
            assert_eq!(*o, eo);
            assert_relative_eq!(*w, ew, epsilon = 1e-14);
        }
    }

    #[test]
    fn stencils_are_exact_on_low_degree_polynomials() {
        // a fourth-order stencil for the d-th derivative is exact on degree d + 3
        for d in 1..=4usize {
            let st = central_stencil(d);
            for deg in 0..=(d + 3) {
                let approx: f64 = st.iter().map(|(o, w)| w * (*o as f64).powi(deg as i32)).sum();
                let exact = if deg == d { (1..=d).map(|v| v as f64).product() } else { 0.0 };
                assert_relative_eq!(approx, exact, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn mixed_partials_of_smooth_function() {
        let f = |u: &[f64]| vec![(u[0] * u[1]).sin() + u[0].exp() * u[1] * u[1]];
        let u = [0.4, 0.9];
        // d^2/dxdy sin(xy) = cos(xy) - xy sin(xy); d^2/dxdy e^x y^2 = 2 y e^x
        let exact = (0.36f64).cos() - 0.36 * (0.36f64).sin() + 2.0 * 0.9 * 0.4f64.exp();
        assert_relative_eq!(mixed_partial(&f, &u, &[1, 1])[0], exact, epsilon = 1e-9);
        // d^4/dx^2dy^2: sin(xy) part -> (x^2 y^2 - ...) ; check against jets
        let jets = jets(&f, &u, 4);
        let x = Jet::variable(2, 4, 0, u[0]);
        let y = Jet::variable(2, 4, 1, u[1]);
        let exact_jet = (&x * &y).sin() + &(&x.exp() * &y) * &y;
        for m in Jet::monomials(2, 4) {
            assert_relative_eq!(
                jets[0].partial_value(m),
                exact_jet.partial_value(m),
                epsilon = 2e-5,
                max_relative = 2e-5
            );
        }
    }
}
