//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Integrates `f` over the finite interval `[a, b]` to absolute accuracy `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    integrate_pieces(&f, &[a, b], tol)
}

/// Integrates over `[a, b]` split at the given interior breakpoints, which is
/// where kinks or jumps of the integrand should be placed.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: f64) -> Result<QuadResult> {
    const MAX_SEGMENTS: usize = 4000;
    let mut segs: Vec<Segment> = Vec::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(f, w[0], w[1]);
            segs.push(Segment {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    let mut evaluations = 15 * segs.len();
    loop {
        let total_err: f64 = segs.iter().map(|s| s.error).sum();
        let total: f64 = segs.iter().map(|s| s.value).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature {
                value: total,
                error: f64::INFINITY,
                target: tol,
            });
        }
        if total_err <= tol {
            return Ok(QuadResult {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                value: total,
                error: total_err,
                target: tol,
            });
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Quadrature {
                value: total,
                error: total_err,
                target: tol,
            });
        }
        for (a, b) in [(s.a, mid), (mid, s.b)] {
            let (value, error) = gk15(f, a, b);
            segs.push(Segment { a, b, value, error });
        }
        evaluations += 30;
    }
}

/// Integrates `f` over `[a, ∞)` via `t = a + s / (1 - s)`. Breakpoints beyond
/// `a` are mapped accordingly.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    breakpoints: &[f64],
    tol: f64,
) -> Result<QuadResult> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        let t = a + s / one_minus;
        let v = f(t) / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut pts = vec![0.0];
    let mut mapped: Vec<f64> = breakpoints
        .iter()
        .filter(|&&t| t > a && t.is_finite())
        .map(|&t| (t - a) / (1.0 + t - a))
        .collect();
    mapped.sort_by(f64::total_cmp);
    mapped.dedup();
    pts.extend(mapped);
    pts.push(1.0);
    integrate_pieces(&g, &pts, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x + 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r.value - 10.0).abs() < 1e-13);
    }

    #[test]
    fn kinked_integrand_with_breakpoint() {
        let f = |x: f64| (x - 0.3).abs();
        let r = integrate_pieces(&f, &[0.0, 0.3, 1.0], 1e-12).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_to_infinity(|t| (-t).exp(), 0.0, &[], 1e-11).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn divergent_integral_reports_error() {
        let err = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}
