//! Exact self-shrinkers with closed-form charts.
//!
//! Every curved factor (round sphere or the Veronese surface) gets two
//! stereographic charts, centred at opposite poles, for pointwise work and
//! one hyperspherical angle chart for integration. A product immersion has
//! one sampling chart per choice of pole in each curved factor, followed by
//! a single quadrature chart.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::immersion::{
    Analytic, Atlas, Axis, Chart, ChartPoint, ChartRole, GenericMap, Immersion, ImmersionMeta, KnownInvariant,
};
use crate::jet::Scalar;

/// Half-width of the stereographic chart boxes.
pub const STEREO_BOX: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogKind {
    Plane,
    Sphere,
    CylinderProduct,
    SphereProduct,
    Veronese,
}

/// Parameters of a catalog entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogSpec {
    pub kind: CatalogKind,
    /// Dimensions of the round sphere factors, each of radius `sqrt(m)`.
    pub spheres: Vec<usize>,
    /// Dimension of the Euclidean factor.
    pub flat: usize,
}

impl CatalogSpec {
    pub fn plane(n: usize) -> Self {
        CatalogSpec {
            kind: CatalogKind::Plane,
            spheres: Vec::new(),
            flat: n,
        }
    }

    pub fn sphere(n: usize) -> Self {
        CatalogSpec {
            kind: CatalogKind::Sphere,
            spheres: vec![n],
            flat: 0,
        }
    }

    /// `S^m1 x ... x S^mk x R^flat`; the kind follows from the factors.
    pub fn product(spheres: Vec<usize>, flat: usize) -> Self {
        let kind = match (spheres.len(), flat) {
            (0, _) => CatalogKind::Plane,
            (1, 0) => CatalogKind::Sphere,
            (_, 0) => CatalogKind::SphereProduct,
            _ => CatalogKind::CylinderProduct,
        };
        CatalogSpec { kind, spheres, flat }
    }

    pub fn cylinder(m: usize, flat: usize) -> Self {
        CatalogSpec::product(vec![m], flat)
    }

    pub fn veronese() -> Self {
        CatalogSpec {
            kind: CatalogKind::Veronese,
            spheres: vec![2],
            flat: 0,
        }
    }

    /// Parses `plane:n=2`, `sphere:n=3`, `cylinder:2x1`, `product:1,2`, `product:1,2+1`, `veronese`.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || LabError::InvalidSpec(format!("cannot parse catalog name `{name}`"));
        let (head, rest) = match name.split_once(':') {
            Some((h, r)) => (h.trim(), r.trim()),
            None => (name.trim(), ""),
        };
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let spec = match head {
            "veronese" if rest.is_empty() || rest == "m=2" => CatalogSpec::veronese(),
            "veronese" => {
                return Err(LabError::InvalidSpec(format!(
                    "only the two-dimensional Veronese surface is available, got `{name}`"
                )))
            }
            "plane" => CatalogSpec::plane(num(rest.strip_prefix("n=").ok_or_else(bad)?)?),
            "sphere" => CatalogSpec::sphere(num(rest.strip_prefix("n=").ok_or_else(bad)?)?),
            "cylinder" => {
                let (m, q) = rest.split_once('x').ok_or_else(bad)?;
                CatalogSpec::cylinder(num(m)?, num(q)?)
            }
            "product" => {
                let (list, flat) = match rest.split_once('+') {
                    Some((l, f)) => (l, num(f)?),
                    None => (rest, 0),
                };
                let spheres = list.split(',').map(num).collect::<Result<Vec<_>>>()?;
                CatalogSpec::product(spheres, flat)
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spheres.contains(&0) {
            return Err(LabError::InvalidSpec("sphere factors need dimension >= 1".into()));
        }
        if self.dim() == 0 {
            return Err(LabError::InvalidSpec("intrinsic dimension must be positive".into()));
        }
        let consistent = match self.kind {
            CatalogKind::Plane => self.spheres.is_empty(),
            CatalogKind::Sphere => self.spheres.len() == 1 && self.flat == 0,
            CatalogKind::SphereProduct => self.spheres.len() >= 2 && self.flat == 0,
            CatalogKind::CylinderProduct => !self.spheres.is_empty() && self.flat > 0,
            CatalogKind::Veronese => self.spheres == [2] && self.flat == 0,
        };
        if !consistent {
            return Err(LabError::InvalidSpec(format!(
                "{:?} does not match factors {:?} + R^{}",
                self.kind, self.spheres, self.flat
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.spheres.iter().sum::<usize>() + self.flat
    }

    pub fn codim(&self) -> usize {
        match self.kind {
            CatalogKind::Plane => 1,
            CatalogKind::Veronese => 3,
            _ => self.spheres.len(),
        }
    }

    pub fn expected_mean_curvature_sq(&self) -> f64 {
        match self.kind {
            CatalogKind::Veronese => 2.0,
            _ => self.spheres.iter().sum::<usize>() as f64,
        }
    }

    pub fn expected_norm_a_sq(&self) -> f64 {
        match self.kind {
            CatalogKind::Veronese => 5.0 / 3.0,
            _ => self.spheres.len() as f64,
        }
    }

    pub fn compact(&self) -> bool {
        self.flat == 0 && !self.spheres.is_empty()
    }

    /// Canonical name accepted by [`CatalogSpec::parse`].
    pub fn name(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        match self.kind {
            CatalogKind::Plane => format!("plane:n={}", self.flat),
            CatalogKind::Sphere => format!("sphere:n={}", self.spheres[0]),
            CatalogKind::Veronese => "veronese".into(),
            CatalogKind::CylinderProduct if self.spheres.len() == 1 => {
                format!("cylinder:{}x{}", self.spheres[0], self.flat)
            }
            CatalogKind::CylinderProduct => format!("product:{}+{}", list(&self.spheres), self.flat),
            CatalogKind::SphereProduct => format!("product:{}", list(&self.spheres)),
        }
    }

    pub fn description(&self) -> String {
        let spheres: Vec<String> = self
            .spheres
            .iter()
            .map(|m| if *m == 1 { "S^1(1)".to_string() } else { format!("S^{m}(sqrt {m})") })
            .collect();
        match self.kind {
            CatalogKind::Plane => format!("plane R^{} through the origin in R^{}", self.flat, self.flat + 1),
            CatalogKind::Veronese => "Veronese surface S^2(sqrt 6) -> S^4(sqrt 2) in R^5".into(),
            _ => {
                let mut s = spheres.join(" x ");
                if self.flat > 0 {
                    s.push_str(&format!(" x R^{}", self.flat));
                }
                format!("{s} in R^{}", self.dim() + self.codim())
            }
        }
    }
}

impl fmt::Display for CatalogSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Entries run by the `all` target and printed by `catalog list`.
pub fn default_entries() -> Vec<CatalogSpec> {
    vec![
        CatalogSpec::plane(2),
        CatalogSpec::sphere(2),
        CatalogSpec::sphere(3),
        CatalogSpec::cylinder(1, 1),
        CatalogSpec::cylinder(1, 2),
        CatalogSpec::cylinder(2, 1),
        CatalogSpec::product(vec![1, 1], 0),
        CatalogSpec::product(vec![1, 2], 0),
        CatalogSpec::product(vec![2, 2], 0),
        CatalogSpec::product(vec![1, 2], 1),
        CatalogSpec::veronese(),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Factor {
    /// `S^m(sqrt m)` in `R^(m+1)`.
    Sphere(usize),
    Veronese,
    Flat(usize),
}

impl Factor {
    fn dim(self) -> usize {
        match self {
            Factor::Sphere(m) => m,
            Factor::Veronese => 2,
            Factor::Flat(q) => q,
        }
    }

    fn ambient(self) -> usize {
        match self {
            Factor::Sphere(m) => m + 1,
            Factor::Veronese => 5,
            Factor::Flat(q) => q,
        }
    }

    fn curved(self) -> bool {
        !matches!(self, Factor::Flat(_))
    }

    /// Dimension of the unit sphere the factor is parametrized by.
    fn sphere_dim(self) -> usize {
        match self {
            Factor::Sphere(m) => m,
            _ => 2,
        }
    }

    fn axes(self, chart: FactorChart) -> Vec<Axis> {
        match (self, chart) {
            (Factor::Flat(q), _) => vec![Axis::unbounded(); q],
            (_, FactorChart::Stereo(_)) => vec![Axis::compact(-STEREO_BOX, STEREO_BOX); self.sphere_dim()],
            (_, FactorChart::Angles) => {
                let m = self.sphere_dim();
                let mut axes = vec![Axis::polar(0.0, std::f64::consts::PI); m - 1];
                axes.push(Axis::compact(0.0, 2.0 * std::f64::consts::PI).with_panels(2));
                axes
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum FactorChart {
    /// Stereographic chart centred at the pole `center * e_last`.
    Stereo(f64),
    Angles,
}

fn stereo<S: Scalar>(u: &[S], center: f64) -> Vec<S> {
    let mut s2 = u[0].lift(0.0);
    for v in u {
        s2 = s2 + v.clone() * v.clone();
    }
    let d = (s2.clone() + 1.0).recip();
    let mut out: Vec<S> = u.iter().map(|v| v.clone() * d.clone() * 2.0).collect();
    out.push((s2.lift(1.0) - s2) * d * center);
    out
}

/// `(theta_1, ..., theta_(m-1), phi)` to the unit sphere `S^m`.
fn angles<S: Scalar>(u: &[S]) -> Vec<S> {
    let m = u.len();
    let mut out = Vec::with_capacity(m + 1);
    let mut prod = u[0].lift(1.0);
    for t in &u[..m - 1] {
        out.push(prod.clone() * t.cos());
        prod = prod * t.sin();
    }
    let phi = &u[m - 1];
    out.push(prod.clone() * phi.cos());
    out.push(prod * phi.sin());
    out
}

fn veronese<S: Scalar>(w: &[S]) -> Vec<S> {
    let s3 = 3f64.sqrt();
    let (x, y, z) = (w[0].clone(), w[1].clone(), w[2].clone());
    let xx = x.clone() * x.clone();
    let yy = y.clone() * y.clone();
    let zz = z.clone() * z.clone();
    let v = [
        y.clone() * z.clone() * s3,
        x.clone() * z * s3,
        x * y * s3,
        (xx.clone() - yy.clone()) * (s3 / 2.0),
        (zz * 2.0 - xx - yy) * 0.5,
    ];
    v.into_iter().map(|c| c * 2f64.sqrt()).collect()
}

struct ProductMap {
    parts: Vec<(Factor, FactorChart)>,
    pad: usize,
}

impl GenericMap for ProductMap {
    fn apply<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let mut out = Vec::new();
        let mut k = 0;
        for &(factor, chart) in &self.parts {
            let d = factor.dim();
            let slice = &u[k..k + d];
            k += d;
            let unit = || match chart {
                FactorChart::Stereo(c) => stereo(slice, c),
                FactorChart::Angles => angles(slice),
            };
            match factor {
                Factor::Flat(_) => out.extend(slice.iter().cloned()),
                Factor::Sphere(m) => {
                    let r = (m as f64).sqrt();
                    out.extend(unit().into_iter().map(|c| c * r));
                }
                Factor::Veronese => out.extend(veronese(&unit())),
            }
        }
        let zero = u[0].lift(0.0);
        out.extend(std::iter::repeat_n(zero, self.pad));
        out
    }
}

struct ProductAtlas {
    factors: Vec<Factor>,
    /// Number of sampling charts; the quadrature chart has this index.
    sampling: usize,
}

impl ProductAtlas {
    fn curved(&self) -> usize {
        self.factors.iter().filter(|f| f.curved()).count()
    }

    fn chart_of(&self, chart: usize) -> Vec<FactorChart> {
        let mut bit = 0;
        self.factors
            .iter()
            .map(|f| {
                if !f.curved() {
                    return FactorChart::Angles;
                }
                let fc = if chart == self.sampling && self.curved() > 0 {
                    FactorChart::Angles
                } else if (chart >> bit) & 1 == 0 {
                    FactorChart::Stereo(1.0)
                } else {
                    FactorChart::Stereo(-1.0)
                };
                bit += 1;
                fc
            })
            .collect()
    }

    /// Unit-sphere points (curved factors) or coordinates (flat factors) per factor.
    fn points(&self, chart: usize, u: &[f64]) -> Vec<Vec<f64>> {
        let charts = self.chart_of(chart);
        let mut k = 0;
        self.factors
            .iter()
            .zip(charts)
            .map(|(f, c)| {
                let d = f.dim();
                let s = &u[k..k + d];
                k += d;
                match (f, c) {
                    (Factor::Flat(_), _) => s.to_vec(),
                    (_, FactorChart::Stereo(center)) => stereo(s, center),
                    (_, FactorChart::Angles) => angles(s),
                }
            })
            .collect()
    }

    fn coords(&self, chart: usize, points: &[Vec<f64>]) -> Option<Vec<f64>> {
        let charts = self.chart_of(chart);
        let mut out = Vec::new();
        for ((f, c), y) in self.factors.iter().zip(charts).zip(points) {
            if !f.curved() {
                out.extend_from_slice(y);
                continue;
            }
            match c {
                FactorChart::Stereo(center) => {
                    let m = y.len() - 1;
                    let den = 1.0 + center * y[m];
                    if den < 1e-12 {
                        return None;
                    }
                    let v: Vec<f64> = y[..m].iter().map(|a| a / den).collect();
                    if v.iter().any(|a| a.abs() > STEREO_BOX) {
                        return None;
                    }
                    out.extend(v);
                }
                FactorChart::Angles => out.extend(invert_angles(y)),
            }
        }
        Some(out)
    }
}

fn invert_angles(y: &[f64]) -> Vec<f64> {
    let m = y.len() - 1;
    let mut out = Vec::with_capacity(m);
    for k in 0..m - 1 {
        let r: f64 = y[k..].iter().map(|a| a * a).sum::<f64>().sqrt();
        let c = if r > 0.0 { (y[k] / r).clamp(-1.0, 1.0) } else { 1.0 };
        out.push(c.acos());
    }
    let mut phi = y[m].atan2(y[m - 1]);
    if phi < 0.0 {
        phi += 2.0 * std::f64::consts::PI;
    }
    out.push(phi);
    out
}

impl Atlas for ProductAtlas {
    fn transition(&self, from: usize, u: &[f64], to: usize) -> Option<Vec<f64>> {
        if from == to {
            return Some(u.to_vec());
        }
        self.coords(to, &self.points(from, u))
    }

    fn preferred(&self, from: usize, u: &[f64]) -> ChartPoint {
        let points = self.points(from, u);
        let mut chart = 0;
        let mut bit = 0;
        for (f, y) in self.factors.iter().zip(&points) {
            if f.curved() {
                if y[y.len() - 1] < 0.0 {
                    chart |= 1 << bit;
                }
                bit += 1;
            }
        }
        let coords = self
            .coords(chart, &points)
            .expect("the nearest-pole chart contains every point of its hemisphere");
        ChartPoint::new(chart, coords)
    }

    fn overlap_points(&self, count: usize) -> Vec<(ChartPoint, ChartPoint)> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut out = Vec::with_capacity(count);
        let nsamp = self.sampling.max(1);
        while out.len() < count {
            // random point near the equator of every curved factor, so that both poles see it
            let points: Vec<Vec<f64>> = self
                .factors
                .iter()
                .map(|f| match f {
                    Factor::Flat(q) => (0..*q).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    _ => {
                        let m = f.sphere_dim();
                        let mut y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
                        let last: f64 = rng.random_range(-0.4..0.4);
                        let scale = (1.0 - last * last).sqrt() / norm;
                        y.iter_mut().for_each(|a| *a *= scale);
                        y.push(last);
                        y
                    }
                })
                .collect();
            let a = rng.random_range(0..nsamp);
            let b = if self.curved() > 0 { self.sampling } else { 0 };
            let c = rng.random_range(0..nsamp);
            for (x, y) in [(a, b), (a, c)] {
                if x == y && self.curved() > 0 {
                    continue;
                }
                if let (Some(ux), Some(uy)) = (self.coords(x, &points), self.coords(y, &points)) {
                    out.push((ChartPoint::new(x, ux), ChartPoint::new(y, uy)));
                }
            }
        }
        out.truncate(count);
        out
    }
}

/// Builds the immersion for a catalog entry.
pub fn build_example(spec: &CatalogSpec) -> Result<Immersion> {
    spec.validate()?;
    let mut factors: Vec<Factor> = match spec.kind {
        CatalogKind::Veronese => vec![Factor::Veronese],
        _ => spec.spheres.iter().map(|&m| Factor::Sphere(m)).collect(),
    };
    if spec.flat > 0 {
        factors.push(Factor::Flat(spec.flat));
    }
    let n = spec.dim();
    let p = spec.codim();
    let ambient: usize = factors.iter().map(|f| f.ambient()).sum();
    let pad = n + p - ambient;
    let curved = factors.iter().filter(|f| f.curved()).count();
    let sampling = if curved == 0 { 1 } else { 1 << curved };
    let atlas = ProductAtlas {
        factors: factors.clone(),
        sampling: if curved == 0 { 0 } else { sampling },
    };

    let mut charts = Vec::new();
    let total = if curved == 0 { 1 } else { sampling + 1 };
    for idx in 0..total {
        let fcs = atlas.chart_of(idx);
        let parts: Vec<(Factor, FactorChart)> = factors.iter().copied().zip(fcs.iter().copied()).collect();
        let axes: Vec<Axis> = parts.iter().flat_map(|(f, c)| f.axes(*c)).collect();
        let role = if curved == 0 {
            ChartRole::Both
        } else if idx == sampling {
            ChartRole::Quadrature
        } else {
            ChartRole::Sampling
        };
        let name = parts
            .iter()
            .map(|(f, c)| match (f, c) {
                (Factor::Flat(q), _) => format!("R^{q}"),
                (_, FactorChart::Stereo(s)) => if *s > 0.0 { "stereo+" } else { "stereo-" }.to_string(),
                (_, FactorChart::Angles) => "angles".to_string(),
            })
            .collect::<Vec<_>>()
            .join(" x ");
        charts.push(Chart::new(name, axes, role, Arc::new(Analytic(ProductMap { parts, pad }))));
    }

    let mut meta = ImmersionMeta::named(spec.name());
    meta.compact = spec.compact();
    let inv = |name: &str, value: f64| KnownInvariant {
        name: name.into(),
        value,
    };
    meta.invariants.push(inv("mean_curvature_sq", spec.expected_mean_curvature_sq()));
    meta.invariants.push(inv("norm_a_sq", spec.expected_norm_a_sq()));
    meta.invariants.push(inv(
        "scalar_curvature",
        spec.expected_mean_curvature_sq() - spec.expected_norm_a_sq(),
    ));
    if spec.compact() {
        meta.invariants.push(inv("position_sq", spec.expected_mean_curvature_sq()));
    }
    meta.coverage = if curved == 0 {
        "single global chart".into()
    } else {
        format!(
            "{sampling} stereographic sampling charts (nearest-pole hemispheres cover); \
             angle chart for quadrature, singular only on a null set"
        )
    };
    Ok(Immersion::new(n, p, charts, meta)?.with_atlas(Arc::new(atlas)))
}

/// Parses and builds in one step.
pub fn build_named(name: &str) -> Result<Immersion> {
    build_example(&CatalogSpec::parse(name)?)
}
