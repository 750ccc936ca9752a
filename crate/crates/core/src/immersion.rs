//! Parametric immersions `x: M^n -> R^(n+p)` given by chart atlases.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fd;
use crate::jet::{Jet, Scalar, MAX_ORDER};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Compact,
    /// Parameter axis running over all of R; quadrature truncates it.
    Unbounded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub kind: AxisKind,
    /// Endpoints are coordinate singularities (polar angles).
    pub singular_ends: bool,
    /// Lower bound on composite Gauss panels along this axis.
    pub min_panels: usize,
}

impl Axis {
    pub fn compact(lo: f64, hi: f64) -> Self {
        Axis {
            lo,
            hi,
            kind: AxisKind::Compact,
            singular_ends: false,
            min_panels: 1,
        }
    }

    pub fn unbounded() -> Self {
        Axis {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            kind: AxisKind::Unbounded,
            singular_ends: false,
            min_panels: 1,
        }
    }

    pub fn polar(lo: f64, hi: f64) -> Self {
        Axis {
            singular_ends: true,
            ..Axis::compact(lo, hi)
        }
    }

    pub fn with_panels(mut self, panels: usize) -> Self {
        self.min_panels = panels.max(1);
        self
    }
}

/// Source of position derivatives for a chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    ClosedForm,
    FiniteDifference,
}

/// Ambient map of one chart.
pub trait ChartMap: Send + Sync {
    fn eval(&self, u: &[f64]) -> Vec<f64>;

    /// Exact Taylor jets of every ambient component, if the map supports them.
    fn jets(&self, _u: &[f64], _order: usize) -> Option<Vec<Jet>> {
        None
    }

    fn closed_form(&self) -> bool {
        false
    }
}

/// A chart map written once for any [`Scalar`].
pub trait GenericMap: Send + Sync {
    fn apply<S: Scalar>(&self, u: &[S]) -> Vec<S>;
}

/// Adapter giving a [`GenericMap`] closed-form derivatives through jets.
pub struct Analytic<M>(pub M);

impl<M: GenericMap> ChartMap for Analytic<M> {
    fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.0.apply(u)
    }

    fn jets(&self, u: &[f64], order: usize) -> Option<Vec<Jet>> {
        let vars: Vec<Jet> = u
            .iter()
            .enumerate()
            .map(|(k, &v)| Jet::variable(u.len(), order, k, v))
            .collect();
        Some(self.0.apply(&vars))
    }

    fn closed_form(&self) -> bool {
        true
    }
}

/// Position-only map; derivatives always come from finite differences.
pub struct PositionFn<F>(pub F);

impl<F> ChartMap for PositionFn<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn eval(&self, u: &[f64]) -> Vec<f64> {
        (self.0)(u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartRole {
    /// Pole-free chart for pointwise evaluation and sampling.
    Sampling,
    /// Member of the covering atlas used for integration.
    Quadrature,
    Both,
}

#[derive(Clone)]
pub struct Chart {
    pub name: String,
    pub axes: Vec<Axis>,
    pub role: ChartRole,
    pub oracle: Oracle,
    map: Arc<dyn ChartMap>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("axes", &self.axes)
            .field("role", &self.role)
            .field("oracle", &self.oracle)
            .finish()
    }
}

impl Chart {
    pub fn new(name: impl Into<String>, axes: Vec<Axis>, role: ChartRole, map: Arc<dyn ChartMap>) -> Self {
        let oracle = if map.closed_form() {
            Oracle::ClosedForm
        } else {
            Oracle::FiniteDifference
        };
        Chart {
            name: name.into(),
            axes,
            role,
            oracle,
            map,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn position(&self, u: &[f64]) -> Vec<f64> {
        self.map.eval(u)
    }

    /// Taylor jets of the position up to `order`.
    pub fn position_jets(&self, u: &[f64], order: usize) -> Result<Vec<Jet>> {
        if order > MAX_ORDER {
            return Err(LabError::OracleOrderUnavailable {
                requested: order,
                available: MAX_ORDER,
            });
        }
        if self.oracle == Oracle::ClosedForm {
            if let Some(j) = self.map.jets(u, order) {
                return Ok(j);
            }
        }
        let map = &self.map;
        Ok(fd::jets(&|v: &[f64]| map.eval(v), u, order))
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.axes.len()
            && self
                .axes
                .iter()
                .zip(u)
                .all(|(a, &v)| v >= a.lo && v <= a.hi)
    }

    pub fn samples(&self) -> bool {
        matches!(self.role, ChartRole::Sampling | ChartRole::Both)
    }

    pub fn integrates(&self) -> bool {
        matches!(self.role, ChartRole::Quadrature | ChartRole::Both)
    }
}

/// A point given by chart index and chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub u: Vec<f64>,
}

impl ChartPoint {
    pub fn new(chart: usize, u: impl Into<Vec<f64>>) -> Self {
        ChartPoint { chart, u: u.into() }
    }
}

impl fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chart {} at {:?}", self.chart, self.u)
    }
}

/// Chart transition data for multi-chart immersions.
pub trait Atlas: Send + Sync {
    /// Coordinates in chart `to` of the point `u` of chart `from`, when it lies in that chart.
    fn transition(&self, from: usize, u: &[f64], to: usize) -> Option<Vec<f64>>;

    /// The best-conditioned sampling chart containing the point.
    fn preferred(&self, from: usize, u: &[f64]) -> ChartPoint;

    /// Pairs of chart points naming the same manifold point, for chart-independence checks.
    fn overlap_points(&self, _count: usize) -> Vec<(ChartPoint, ChartPoint)> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownInvariant {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImmersionMeta {
    pub name: String,
    pub invariants: Vec<KnownInvariant>,
    pub compact: bool,
    /// Always an assumption: volume growth is never measured.
    pub polynomial_volume_growth: bool,
    /// Extra slack on exact-identity residuals (interpolated charts).
    pub tolerance_floor: f64,
    /// How the charts cover the manifold.
    pub coverage: String,
}

impl ImmersionMeta {
    pub fn named(name: impl Into<String>) -> Self {
        ImmersionMeta {
            name: name.into(),
            invariants: Vec::new(),
            compact: false,
            polynomial_volume_growth: true,
            tolerance_floor: 0.0,
            coverage: String::new(),
        }
    }

    pub fn invariant(&self, name: &str) -> Option<f64> {
        self.invariants.iter().find(|k| k.name == name).map(|k| k.value)
    }
}

#[derive(Clone)]
pub struct Immersion {
    pub intrinsic_dim: usize,
    pub codim: usize,
    pub charts: Vec<Chart>,
    pub atlas: Option<Arc<dyn Atlas>>,
    pub meta: ImmersionMeta,
}

impl fmt::Debug for Immersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Immersion")
            .field("intrinsic_dim", &self.intrinsic_dim)
            .field("codim", &self.codim)
            .field("charts", &self.charts)
            .field("meta", &self.meta)
            .finish()
    }
}

impl Immersion {
    pub fn new(intrinsic_dim: usize, codim: usize, charts: Vec<Chart>, meta: ImmersionMeta) -> Result<Self> {
        if intrinsic_dim == 0 || codim == 0 {
            return Err(LabError::InvalidSpec(format!(
                "dimensions must be positive (n = {intrinsic_dim}, p = {codim})"
            )));
        }
        if charts.is_empty() {
            return Err(LabError::InvalidSpec("immersion needs at least one chart".into()));
        }
        for c in &charts {
            if c.dim() != intrinsic_dim {
                return Err(LabError::InvalidSpec(format!(
                    "chart {} has {} axes, expected {intrinsic_dim}",
                    c.name,
                    c.dim()
                )));
            }
        }
        Ok(Immersion {
            intrinsic_dim,
            codim,
            charts,
            atlas: None,
            meta,
        })
    }

    pub fn with_atlas(mut self, atlas: Arc<dyn Atlas>) -> Self {
        self.atlas = Some(atlas);
        self
    }

    /// The same immersion with every chart forced onto the finite-difference oracle.
    pub fn with_fd_oracle(&self) -> Self {
        let mut out = self.clone();
        for c in &mut out.charts {
            c.oracle = Oracle::FiniteDifference;
        }
        out
    }

    pub fn ambient_dim(&self) -> usize {
        self.intrinsic_dim + self.codim
    }

    pub fn chart(&self, pt: &ChartPoint) -> &Chart {
        &self.charts[pt.chart]
    }

    pub fn position(&self, pt: &ChartPoint) -> Vec<f64> {
        self.chart(pt).position(&pt.u)
    }

    pub fn position_jets(&self, pt: &ChartPoint, order: usize) -> Result<Vec<Jet>> {
        self.chart(pt).position_jets(&pt.u, order)
    }

    /// Every chart uses closed-form derivatives.
    pub fn closed_form(&self) -> bool {
        self.charts.iter().all(|c| c.oracle == Oracle::ClosedForm)
    }

    pub fn sampling_charts(&self) -> Vec<usize> {
        (0..self.charts.len()).filter(|&i| self.charts[i].samples()).collect()
    }

    pub fn quadrature_charts(&self) -> Vec<usize> {
        (0..self.charts.len()).filter(|&i| self.charts[i].integrates()).collect()
    }

    /// Re-expresses a point in the best-conditioned chart, when an atlas is present.
    pub fn preferred(&self, pt: &ChartPoint) -> ChartPoint {
        match &self.atlas {
            Some(a) => a.preferred(pt.chart, &pt.u),
            None => pt.clone(),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.meta.compact
    }
}
