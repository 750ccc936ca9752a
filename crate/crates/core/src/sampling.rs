//! Low-discrepancy sample points on sampling charts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::immersion::{AxisKind, ChartPoint, Immersion};

/// Half-width of the window used on unbounded axes.
pub const UNBOUNDED_WINDOW: f64 = 3.0;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// `count` points of the Halton sequence in `[0,1)^dim`, shifted modulo 1 by a
/// random vector drawn from `seed`.
pub fn halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|k| (radical_inverse(i, PRIMES[k]) + shift[k]).fract())
                .collect()
        })
        .collect()
}

/// Points spread over the sampling charts of `imm`, cycling through the charts.
pub fn sample_points(imm: &Immersion, count: usize, seed: u64) -> Vec<ChartPoint> {
    let charts = imm.sampling_charts();
    let n = imm.intrinsic_dim;
    // one extra coordinate picks the chart
    let raw = halton(n + 1, count, seed);
    raw.into_iter()
        .map(|q| {
            let idx = charts[((q[n] * charts.len() as f64) as usize).min(charts.len() - 1)];
            let chart = &imm.charts[idx];
            let u = chart
                .axes
                .iter()
                .zip(&q)
                .map(|(axis, t)| match axis.kind {
                    AxisKind::Unbounded => -UNBOUNDED_WINDOW + 2.0 * UNBOUNDED_WINDOW * t,
                    AxisKind::Compact => axis.lo + (axis.hi - axis.lo) * t,
                })
                .collect::<Vec<_>>();
            ChartPoint::new(idx, u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        let got: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn halton_is_reproducible_and_in_unit_cube() {
        let a = halton(3, 50, 9);
        assert_eq!(a, halton(3, 50, 9));
        assert_ne!(a, halton(3, 50, 10));
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
    }
}
