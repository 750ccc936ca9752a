//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients of a smooth function of `nvars`
//! chart variables around a base point, truncated at total degree `order`
//! (at most [`MAX_ORDER`]). Arithmetic on jets propagates exact derivatives,
//! so a chart map written once against [`Scalar`] yields its closed-form
//! partial derivatives up to order four.
//!
//! Coefficients are stored in graded order: all monomials of degree `<= k`
//! form a prefix of the coefficient vector, so jets of different orders over
//! the same variable count share one [`MonomialTable`].

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

/// Highest derivative order carried by any jet.
pub const MAX_ORDER: usize = 4;

pub(crate) struct MonomialTable {
    nvars: usize,
    exponents: Vec<Vec<u8>>,
    len_upto: [usize; MAX_ORDER + 1],
    index: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `x^i * x^j = x^k`, sorted by total degree.
    products: Vec<(u16, u16, u16)>,
    products_upto: [usize; MAX_ORDER + 1],
    /// Per variable: `(src, dst, factor)` with `d/du_v x^src = factor * x^dst`, sorted by dst degree.
    derivs: Vec<Vec<(u16, u16, f64)>>,
    derivs_upto: Vec<[usize; MAX_ORDER + 1]>,
    /// `alpha!` for every monomial.
    factorials: Vec<f64>,
}

impl MonomialTable {
    fn build(nvars: usize) -> Self {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        let mut degree = Vec::new();
        let mut len_upto = [0usize; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            let mut level = Vec::new();
            compositions(nvars, d, &mut vec![0u8; nvars], 0, &mut level);
            level.sort_by(|a, b| b.cmp(a));
            for e in level {
                exponents.push(e);
                degree.push(d);
            }
            len_upto[d] = exponents.len();
        }
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut products = Vec::new();
        for i in 0..exponents.len() {
            for j in 0..exponents.len() {
                if degree[i] + degree[j] > MAX_ORDER {
                    continue;
                }
                let sum: Vec<u8> = exponents[i]
                    .iter()
                    .zip(&exponents[j])
                    .map(|(a, b)| a + b)
                    .collect();
                products.push((i as u16, j as u16, index[&sum] as u16));
            }
        }
        products.sort_by_key(|&(_, _, k)| degree[k as usize]);
        let mut products_upto = [0usize; MAX_ORDER + 1];
        for (d, slot) in products_upto.iter_mut().enumerate() {
            *slot = products
                .iter()
                .take_while(|&&(_, _, k)| degree[k as usize] <= d)
                .count();
        }

        let mut derivs = Vec::with_capacity(nvars);
        let mut derivs_upto = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut list = Vec::new();
            for (src, e) in exponents.iter().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[v] -= 1;
                list.push((src as u16, index[&lowered] as u16, e[v] as f64));
            }
            list.sort_by_key(|&(_, dst, _)| degree[dst as usize]);
            let mut upto = [0usize; MAX_ORDER + 1];
            for (d, slot) in upto.iter_mut().enumerate() {
                *slot = list
                    .iter()
                    .take_while(|&&(_, dst, _)| degree[dst as usize] <= d)
                    .count();
            }
            derivs.push(list);
            derivs_upto.push(upto);
        }

        let factorials = exponents
            .iter()
            .map(|e| e.iter().map(|&k| factorial(k as usize)).product())
            .collect();

        MonomialTable {
            nvars,
            exponents,
            len_upto,
            index,
            products,
            products_upto,
            derivs,
            derivs_upto,
            factorials,
        }
    }

    pub(crate) fn get(nvars: usize) -> &'static MonomialTable {
        static TABLES: OnceLock<Mutex<HashMap<usize, &'static MonomialTable>>> = OnceLock::new();
        let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = tables.lock().expect("monomial table cache poisoned");
        guard
            .entry(nvars)
            .or_insert_with(|| Box::leak(Box::new(MonomialTable::build(nvars))))
    }

    /// Number of coefficients of a jet of the given order.
    pub(crate) fn len(&self, order: usize) -> usize {
        self.len_upto[order]
    }

    /// Exponent vectors in storage order.
    pub(crate) fn exponents(&self, order: usize) -> &[Vec<u8>] {
        &self.exponents[..self.len_upto[order]]
    }
}

fn compositions(nvars: usize, remaining: usize, cur: &mut Vec<u8>, pos: usize, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == nvars {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        return;
    }
    for k in 0..=remaining {
        cur[pos] = k as u8;
        compositions(nvars, remaining - k, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// A truncated Taylor expansion in `nvars` variables.
#[derive(Clone)]
pub struct Jet {
    order: usize,
    coeffs: Vec<f64>,
    table: &'static MonomialTable,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.table.nvars)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(nvars: usize, order: usize, value: f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let table = MonomialTable::get(nvars);
        let mut coeffs = vec![0.0; table.len(order)];
        coeffs[0] = value;
        Jet { order, coeffs, table }
    }

    /// The coordinate function `u_var` expanded around `value`.
    pub fn variable(nvars: usize, order: usize, var: usize, value: f64) -> Self {
        let mut jet = Jet::constant(nvars, order, value);
        if order >= 1 {
            let mut e = vec![0u8; nvars];
            e[var] = 1;
            let idx = jet.table.index[&e];
            jet.coeffs[idx] = 1.0;
        }
        jet
    }

    /// Builds a jet from partial derivatives listed in storage order
    /// (see [`Jet::monomials`]).
    pub fn from_partials(nvars: usize, order: usize, partials: &[f64]) -> Self {
        let table = MonomialTable::get(nvars);
        assert_eq!(partials.len(), table.len(order));
        let coeffs = partials
            .iter()
            .zip(&table.factorials)
            .map(|(d, f)| d / f)
            .collect();
        Jet { order, coeffs, table }
    }

    /// Exponent vectors of the monomials of a jet with this shape, in storage order.
    pub fn monomials(nvars: usize, order: usize) -> &'static [Vec<u8>] {
        MonomialTable::get(nvars).exponents(order)
    }

    pub fn nvars(&self) -> usize {
        self.table.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative `d^alpha f` at the base point.
    pub fn partial_value(&self, exponents: &[u8]) -> f64 {
        match self.table.index.get(exponents) {
            Some(&i) if i < self.coeffs.len() => self.coeffs[i] * self.table.factorials[i],
            _ => panic!("monomial {exponents:?} not carried by a jet of order {}", self.order),
        }
    }

    /// First partial `d f / d u_var` at the base point.
    pub fn d1(&self, var: usize) -> f64 {
        let mut e = vec![0u8; self.nvars()];
        e[var] = 1;
        self.partial_value(&e)
    }

    /// Second partial `d^2 f / d u_a d u_b` at the base point.
    pub fn d2(&self, a: usize, b: usize) -> f64 {
        let mut e = vec![0u8; self.nvars()];
        e[a] += 1;
        e[b] += 1;
        self.partial_value(&e)
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            coeffs: self.coeffs[..self.table.len(order)].to_vec(),
            table: self.table,
        }
    }

    /// Jet of `d f / d u_var`; the order drops by one.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut coeffs = vec![0.0; self.table.len(order)];
        let list = &self.table.derivs[var][..self.table.derivs_upto[var][order]];
        for &(src, dst, factor) in list {
            coeffs[dst as usize] += factor * self.coeffs[src as usize];
        }
        Jet { order, coeffs, table: self.table }
    }

    fn zero_like(&self, order: usize) -> Jet {
        Jet {
            order,
            coeffs: vec![0.0; self.table.len(order)],
            table: self.table,
        }
    }

    /// `self += a * b`, truncated to the lowest order involved.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            self.coeffs.truncate(self.table.len(order));
            self.order = order;
        }
        for &(i, j, k) in &self.table.products[..self.table.products_upto[order]] {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    /// `self -= a * b`, truncated to the lowest order involved.
    pub fn sub_product(&mut self, a: &Jet, b: &Jet) {
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            self.coeffs.truncate(self.table.len(order));
            self.order = order;
        }
        for &(i, j, k) in &self.table.products[..self.table.products_upto[order]] {
            self.coeffs[k as usize] -= a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            table: self.table,
        }
    }

    /// Evaluates `sum_k taylor[k] * (self - self(0))^k`, where `taylor[k]`
    /// is `g^(k)(self(0)) / k!` for a univariate `g`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant(self.nvars(), self.order, taylor[self.order]);
        for k in (0..self.order).rev() {
            let mut next = self.zero_like(self.order);
            next.add_product(&acc, &delta);
            next.coeffs[0] += taylor[k];
            acc = next;
        }
        acc
    }

    fn taylor_from(&self, derivs: impl Fn(usize) -> f64) -> Jet {
        let taylor: Vec<f64> = (0..=self.order).map(|k| derivs(k) / factorial(k)).collect();
        self.compose(&taylor)
    }

    pub fn recip(&self) -> Jet {
        let a = self.value();
        self.taylor_from(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(k) / a.powi(k as i32 + 1)
        })
    }

    pub fn sqrt(&self) -> Jet {
        let a = self.value();
        // d^k/da^k a^(1/2) = (1/2)(1/2 - 1)...(1/2 - k + 1) a^(1/2 - k)
        self.taylor_from(|k| {
            let falling: f64 = (0..k).map(|j| 0.5 - j as f64).product();
            falling * a.powf(0.5 - k as f64)
        })
    }

    pub fn sin(&self) -> Jet {
        let a = self.value();
        self.taylor_from(|k| (a + k as f64 * std::f64::consts::FRAC_PI_2).sin())
    }

    pub fn cos(&self) -> Jet {
        let a = self.value();
        self.taylor_from(|k| (a + k as f64 * std::f64::consts::FRAC_PI_2).cos())
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.taylor_from(|_| e)
    }

    fn binary(&self, other: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.nvars(), other.nvars());
        let order = self.order.min(other.order);
        let len = self.table.len(order);
        Jet {
            order,
            coeffs: (0..len).map(|i| op(self.coeffs[i], other.coeffs[i])).collect(),
            table: self.table,
        }
    }
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.binary(rhs, |a, b| a + b)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.binary(rhs, |a, b| a - b)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut out = self.zero_like(self.order.min(rhs.order));
        out.add_product(self, rhs);
        out
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

macro_rules! owned_ops {
    ($($tr:ident $method:ident),*) => {$(
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul, Div div);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        let order = self.order.min(rhs.order);
        self.coeffs.truncate(self.table.len(order));
        self.order = order;
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        let order = self.order.min(rhs.order);
        self.coeffs.truncate(self.table.len(order));
        self.order = order;
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

/// Number type accepted by generic chart maps: plain `f64` for fast
/// evaluation, [`Jet`] for exact derivatives.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant with the same shape as `self`.
    fn lift(&self, c: f64) -> Self;
    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn recip(&self) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn lift(&self, c: f64) -> Self {
        Jet::constant(self.nvars(), self.order, c)
    }
    fn sqrt(&self) -> Self {
        Jet::sqrt(self)
    }
    fn sin(&self) -> Self {
        Jet::sin(self)
    }
    fn cos(&self) -> Self {
        Jet::cos(self)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
}
