//! Planar self-shrinking curves: `k = -<x, N>` with `N` the tangent turned by +90 degrees.
//!
//! Curves are launched perpendicular to the x1 axis, where the reflection
//! symmetry of the equation lets a half period determine the whole curve.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::immersion::{Axis, Chart, ChartMap, ChartRole, Immersion, ImmersionMeta};
use crate::jet::Jet;

/// Largest first-integral drift per unit arclength accepted by [`al_integrate`].
pub const DRIFT_PER_LENGTH: f64 = 1e-6;
/// Closure residual below which a shot curve counts as closed.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;
/// Extra slack on identity residuals evaluated on an integrated curve.
pub const CURVE_TOLERANCE_FLOOR: f64 = 1e-6;

const CIRCLE_BAND: f64 = 1e-9;
const MAX_HALF_PERIOD: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ALState {
    pub position: [f64; 2],
    pub tangent: [f64; 2],
    pub arclength: f64,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn turn(t: [f64; 2]) -> [f64; 2] {
    [-t[1], t[0]]
}

impl ALState {
    /// Start at `(r0, 0)` heading in the +x2 direction; the curvature there is `r0`.
    pub fn launch(r0: f64) -> Self {
        ALState {
            position: [r0, 0.0],
            tangent: [0.0, 1.0],
            arclength: 0.0,
        }
    }

    pub fn normal(&self) -> [f64; 2] {
        turn(self.tangent)
    }

    pub fn curvature(&self) -> f64 {
        -dot(self.position, self.normal())
    }

    /// `k exp(-|x|^2 / 2)`, constant along exact solutions.
    pub fn first_integral(&self) -> f64 {
        self.curvature() * (-0.5 * dot(self.position, self.position)).exp()
    }

    /// `<x, T>`; vanishes exactly at the extrema of `|x|` and `k`.
    pub fn radial_speed(&self) -> f64 {
        dot(self.position, self.tangent)
    }

    fn sample(&self) -> ALSample {
        ALSample {
            s: self.arclength,
            x: self.position,
            t: self.tangent,
            k: self.curvature(),
        }
    }

    /// Derivatives `d^j x / ds^j`, `j = 0..=4`, from the curve equation.
    fn position_derivatives(&self) -> [[f64; 2]; 5] {
        let (x, t, n) = (self.position, self.tangent, self.normal());
        let k = self.curvature();
        let k1 = k * dot(x, t);
        let k2 = k1 * dot(x, t) + k - k * k * k;
        let comb = |a: f64, b: f64| [a * t[0] + b * n[0], a * t[1] + b * n[1]];
        [x, t, comb(0.0, k), comb(-k * k, k1), comb(-3.0 * k * k1, k2 - k * k * k)]
    }
}

fn derivative(x: [f64; 2], t: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let n = turn(t);
    let k = -dot(x, n);
    (t, [k * n[0], k * n[1]])
}

/// One classical Runge-Kutta step; the tangent is renormalized afterwards.
fn rk4_step(state: &ALState, h: f64) -> ALState {
    let axpy = |a: [f64; 2], s: f64, b: [f64; 2]| [a[0] + s * b[0], a[1] + s * b[1]];
    let (x, t) = (state.position, state.tangent);
    let (dx1, dt1) = derivative(x, t);
    let (dx2, dt2) = derivative(axpy(x, h / 2.0, dx1), axpy(t, h / 2.0, dt1));
    let (dx3, dt3) = derivative(axpy(x, h / 2.0, dx2), axpy(t, h / 2.0, dt2));
    let (dx4, dt4) = derivative(axpy(x, h, dx3), axpy(t, h, dt3));
    let combine = |v: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]| {
        [
            v[0] + h / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
            v[1] + h / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
        ]
    };
    let position = combine(x, dx1, dx2, dx3, dx4);
    let t = combine(t, dt1, dt2, dt3, dt4);
    let norm = dot(t, t).sqrt();
    ALState {
        position,
        tangent: [t[0] / norm, t[1] / norm],
        arclength: state.arclength + h,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ALSample {
    pub s: f64,
    pub x: [f64; 2],
    pub t: [f64; 2],
    pub k: f64,
}

/// Winding `p` of a closed curve about the origin over its `q` curvature periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationIndex {
    pub p: u32,
    pub q: u32,
}

impl fmt::Display for RotationIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ALCurve {
    pub samples: Vec<ALSample>,
    pub closed: bool,
    pub rotation_index: Option<RotationIndex>,
    pub first_integral_drift: f64,
    /// `|x(L) - x(0)| + |T(L) - T(0)|`.
    pub closure_residual: f64,
    /// Uniform arclength spacing of the samples.
    pub step: f64,
}

impl ALCurve {
    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }

    pub fn launch_curvature(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.k)
    }

    /// `max k / min k` over the samples; 1 for the circle.
    pub fn curvature_ratio(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.k), hi.max(s.k)));
        hi / lo
    }

    fn states(&self) -> Vec<ALState> {
        self.samples
            .iter()
            .map(|s| ALState {
                position: s.x,
                tangent: s.t,
                arclength: s.s,
            })
            .collect()
    }

    /// Writes `s,x1,x2,k` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,x1,x2,k")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{}", s.s, s.x[0], s.x[1], s.k)?;
        }
        Ok(())
    }
}

fn closure_residual(samples: &[ALSample]) -> f64 {
    let (a, b) = (samples[0], samples[samples.len() - 1]);
    let d = |u: [f64; 2], v: [f64; 2]| ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt();
    d(a.x, b.x) + d(a.t, b.t)
}

fn integrate_unchecked(initial: &ALState, length: f64, step: f64) -> ALCurve {
    let steps = (length / step).ceil().max(1.0) as usize;
    let h = length / steps as f64;
    let mut state = *initial;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(state.sample());
    for i in 1..=steps {
        state = rk4_step(&state, h);
        // keep sample positions on the exact grid
        state.arclength = initial.arclength + i as f64 * h;
        samples.push(state.sample());
    }
    let mut curve = ALCurve {
        closure_residual: closure_residual(&samples),
        samples,
        closed: false,
        rotation_index: None,
        first_integral_drift: 0.0,
        step: h,
    };
    curve.first_integral_drift = al_first_integral(&curve);
    curve
}

/// Integrates the curve equation over `length` with steps of at most `step`.
pub fn al_integrate(initial: &ALState, length: f64, step: f64) -> Result<ALCurve> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(LabError::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(LabError::InvalidParameter(format!("length must be positive, got {length}")));
    }
    let tn = dot(initial.tangent, initial.tangent).sqrt();
    if (tn - 1.0).abs() > 1e-12 {
        return Err(LabError::InvalidParameter(format!("initial tangent has length {tn}")));
    }
    let curve = integrate_unchecked(initial, length, step);
    let per_length = curve.first_integral_drift / length;
    if per_length > DRIFT_PER_LENGTH {
        return Err(LabError::StepTooLarge {
            drift_per_length: per_length,
        });
    }
    Ok(curve)
}

/// Largest deviation of `k exp(-|x|^2/2)` from its median over the samples.
pub fn al_first_integral(curve: &ALCurve) -> f64 {
    let mut values: Vec<f64> = curve
        .samples
        .iter()
        .map(|s| s.k * (-0.5 * dot(s.x, s.x)).exp())
        .collect();
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let median = if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    };
    values.iter().map(|v| (v - median).abs()).fold(0.0, f64::max)
}

/// Result of integrating from the launch point to the next extremum of `|x|`.
#[derive(Clone, Copy, Debug)]
pub struct HalfPeriod {
    /// Polar angle swept between the two extrema.
    pub angle: f64,
    pub length: f64,
}

/// Half period of the curve launched with curvature `k0`.
///
/// Near the circle the sweep tends to `pi / sqrt 2`, the linearized value,
/// which is returned inside a narrow band around `k0 = 1`.
pub fn half_period(k0: f64, step: f64) -> Result<HalfPeriod> {
    if (k0 - 1.0).abs() <= CIRCLE_BAND {
        return Ok(HalfPeriod {
            angle: PI / 2f64.sqrt(),
            length: PI / 2f64.sqrt(),
        });
    }
    // d/ds <x, T> = 1 - k^2, so the launch direction of |x| is known
    let sign = (1.0 - k0 * k0).signum();
    let mut state = ALState::launch(k0);
    let mut prev = state;
    while state.arclength < MAX_HALF_PERIOD {
        prev = state;
        state = rk4_step(&state, step);
        if state.radial_speed() * sign <= 0.0 {
            break;
        }
    }
    if state.radial_speed() * sign > 0.0 {
        return Err(LabError::NoClosure(format!("no extremum of |x| within length {MAX_HALF_PERIOD} for k0 = {k0}")));
    }
    // Newton on the sub-step, using d<x,T>/ds = 1 - k^2
    let mut tau = step * prev.radial_speed() / (prev.radial_speed() - state.radial_speed());
    for _ in 0..30 {
        let s = rk4_step(&prev, tau);
        let slope = 1.0 - s.curvature().powi(2);
        let delta = s.radial_speed() / slope;
        tau = (tau - delta).clamp(0.0, step);
        if delta.abs() < 1e-15 {
            break;
        }
    }
    let end = rk4_step(&prev, tau);
    Ok(HalfPeriod {
        angle: end.position[1].atan2(end.position[0]),
        length: end.arclength,
    })
}

/// Largest period count considered when choosing or checking a rotation target.
pub const MAX_PERIODS: u32 = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootOptions {
    /// Target rotation: `p` turns about the origin over `q` curvature periods.
    /// When unset, the smallest `q` reachable inside the bracket is used.
    pub target: Option<RotationIndex>,
    pub step: f64,
    pub max_iterations: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            target: None,
            step: 1e-3,
            max_iterations: 200,
        }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_target(r: RotationIndex) -> Result<()> {
    if r.q == 0 || r.q > MAX_PERIODS || gcd(r.p, r.q) != 1 {
        return Err(LabError::InvalidParameter(format!(
            "rotation target {r} must be reduced with 1 <= q <= {MAX_PERIODS}"
        )));
    }
    // noncircular solutions sweep between pi and sqrt(2) pi per period
    let ratio = r.p as f64 / r.q as f64;
    if !(ratio > 0.5 && ratio < 0.5f64.sqrt()) {
        return Err(LabError::InvalidParameter(format!("rotation target {r} outside (1/2, 1/sqrt 2)")));
    }
    Ok(())
}

/// Reduced `p/q` with the fewest periods strictly between two half-period sweeps.
pub fn reachable_target(angle_a: f64, angle_b: f64) -> Option<RotationIndex> {
    let (lo, hi) = (angle_a.min(angle_b) / PI, angle_a.max(angle_b) / PI);
    (1..=MAX_PERIODS).find_map(|q| {
        (1..q)
            .map(|p| RotationIndex { p, q })
            .filter(|r| gcd(r.p, r.q) == 1 && check_target(*r).is_ok())
            .find(|r| {
                let x = r.p as f64 / r.q as f64;
                x > lo && x < hi
            })
    })
}

/// The unit circle, launched at its own fixed point `k0 = 1`.
pub fn al_circle(step: f64) -> Result<ALCurve> {
    let mut c = al_integrate(&ALState::launch(1.0), 2.0 * PI, step)?;
    c.closed = c.closure_residual < CLOSURE_TOLERANCE;
    c.rotation_index = Some(RotationIndex { p: 1, q: 1 });
    Ok(c)
}

/// Bisects the launch curvature over `[k0_min, k0_max]` until the curve closes
/// with the rotation target of `opts`.
///
/// A degenerate bracket at `k0 = 1` returns the circle.
pub fn al_shoot_closed(k0_min: f64, k0_max: f64, opts: &ShootOptions) -> Result<ALCurve> {
    if !(k0_min > 0.0 && k0_max >= k0_min && k0_max.is_finite()) {
        return Err(LabError::InvalidParameter(format!("invalid k0 bracket [{k0_min}, {k0_max}]")));
    }
    if k0_min == k0_max {
        if (k0_min - 1.0).abs() <= CIRCLE_BAND {
            return al_circle(opts.step);
        }
        return Err(LabError::NoClosure(format!("degenerate bracket at k0 = {k0_min}")));
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(LabError::InvalidParameter(format!("step must be positive, got {}", opts.step)));
    }
    let (a_lo, a_hi) = (half_period(k0_min, opts.step)?.angle, half_period(k0_max, opts.step)?.angle);
    let rotation = match opts.target {
        Some(r) => {
            check_target(r)?;
            r
        }
        None => reachable_target(a_lo, a_hi).ok_or_else(|| {
            LabError::NoClosure(format!(
                "no rotation target with q <= {MAX_PERIODS} between sweeps {a_lo} and {a_hi}"
            ))
        })?,
    };
    let target = PI * rotation.p as f64 / rotation.q as f64;
    let defect = |k0: f64| half_period(k0, opts.step).map(|h| h.angle - target);
    let (mut lo, mut hi) = (k0_min, k0_max);
    let (f_lo, f_hi) = (a_lo - target, a_hi - target);
    if f_lo * f_hi > 0.0 {
        return Err(LabError::NoClosure(format!(
            "no sign change of the angular defect for {rotation} over [{k0_min}, {k0_max}] ({f_lo:e}, {f_hi:e})"
        )));
    }
    let lo_sign = f_lo.signum();
    for _ in 0..opts.max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if defect(mid)? * lo_sign > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k0 = 0.5 * (lo + hi);
    let half = half_period(k0, opts.step)?;
    let length = 2.0 * rotation.q as f64 * half.length;
    let mut curve = al_integrate(&ALState::launch(k0), length, opts.step)?;
    if curve.closure_residual >= CLOSURE_TOLERANCE {
        return Err(LabError::NoClosure(format!(
            "closure residual {:e} at k0 = {k0}",
            curve.closure_residual
        )));
    }
    curve.closed = true;
    curve.rotation_index = Some(rotation);
    Ok(curve)
}

/// Arclength chart re-integrating from the nearest stored sample.
struct CurveChart {
    states: Vec<ALState>,
    step: f64,
    length: f64,
    periodic: bool,
}

impl CurveChart {
    fn state_at(&self, s: f64) -> ALState {
        let s = if self.periodic { s.rem_euclid(self.length) } else { s };
        let last = self.states.len() - 2;
        let i = ((s / self.step).floor().max(0.0) as usize).min(last);
        let base = &self.states[i];
        rk4_step(base, s - base.arclength)
    }
}

impl ChartMap for CurveChart {
    fn eval(&self, u: &[f64]) -> Vec<f64> {
        self.state_at(u[0]).position.to_vec()
    }

    fn jets(&self, u: &[f64], order: usize) -> Option<Vec<Jet>> {
        let d = self.state_at(u[0]).position_derivatives();
        let jets = (0..2)
            .map(|c| {
                let partials: Vec<f64> = d[..=order].iter().map(|v| v[c]).collect();
                Jet::from_partials(1, order, &partials)
            })
            .collect();
        Some(jets)
    }

    fn closed_form(&self) -> bool {
        true
    }
}

/// Wraps an integrated curve as a one-chart immersion of arclength.
///
/// Derivatives come from the curve equation at the re-integrated state, so
/// the chart counts as closed form up to the integration error.
pub fn to_immersion(curve: &ALCurve, name: &str) -> Result<Immersion> {
    if curve.samples.len() < 2 {
        return Err(LabError::InvalidParameter("curve needs at least two samples".into()));
    }
    let length = curve.length();
    let chart = CurveChart {
        states: curve.states(),
        step: curve.step,
        length,
        periodic: curve.closed,
    };
    let panels = 2 * curve.rotation_index.map_or(4, |r| r.q as usize);
    let axis = Axis::compact(0.0, length).with_panels(panels);
    let mut meta = ImmersionMeta::named(name);
    meta.compact = curve.closed;
    meta.tolerance_floor = CURVE_TOLERANCE_FLOOR;
    meta.coverage = if curve.closed {
        "single periodic arclength chart".into()
    } else {
        "single arclength chart over an open arc".into()
    };
    Immersion::new(
        1,
        1,
        vec![Chart::new("arclength", vec![axis], ChartRole::Both, Arc::new(chart))],
        meta,
    )
}
