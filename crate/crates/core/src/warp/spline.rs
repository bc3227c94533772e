//! Shape-preserving piecewise cubic Hermite interpolation.
//!
//! Slopes follow Fritsch–Carlson, so each segment stays within the range of
//! its two knot values and the interpolant never overshoots the data.

use crate::num::Scalar;

pub(crate) fn slopes<F: Scalar>(xs: &[F], ys: &[F]) -> Vec<F> {
    let n = xs.len();
    debug_assert!(n >= 2 && ys.len() == n);
    let h: Vec<F> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<F> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let two = F::from_f64_lossy(2.0);
    let three = F::from_f64_lossy(3.0);
    let mut m = vec![F::zero(); n];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= F::zero() {
            continue;
        }
        let w1 = two * h[k] + h[k - 1];
        let w2 = h[k] + two * h[k - 1];
        m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
    }
    let end = |h0: F, h1: F, d0: F, d1: F| -> F {
        let m0 = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if m0.signum() != d0.signum() || d0 == F::zero() {
            F::zero()
        } else if d0.signum() != d1.signum() && m0.abs() > three * d0.abs() {
            three * d0
        } else {
            m0
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

/// Hermite segment value at parameter `t ∈ [0, 1]` over a knot gap of `h`.
#[inline]
pub(crate) fn hermite<F: Scalar>(y0: F, y1: F, m0: F, m1: F, h: F, t: F) -> F {
    let one = F::one();
    let two = F::from_f64_lossy(2.0);
    let three = F::from_f64_lossy(3.0);
    let s = one - t;
    let h00 = (one + two * t) * s * s;
    let h10 = t * s * s;
    let h01 = t * t * (three - two * t);
    let h11 = t * t * (t - one);
    h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
}

/// Segment index and local parameter for `x` within integer knots `knots`.
#[inline]
pub(crate) fn locate(knots: &[u32], x: u32) -> (usize, u32, u32) {
    let k = match knots.binary_search(&x) {
        Ok(i) => i.min(knots.len() - 2),
        Err(i) => i.saturating_sub(1).min(knots.len() - 2),
    };
    (k, x - knots[k], knots[k + 1] - knots[k])
}
