//! Quadrature oracles shared by unit tests.

use quadrature::double_exponential::integrate;

fn segment(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-13).integral
}

/// `∫ f` over `[from, ∞)` through `x = from + t/(1-t)`.
fn tail(f: impl Fn(f64) -> f64, from: f64, sign: f64) -> f64 {
    segment(
        |t: f64| {
            let x = t / (1.0 - t);
            if !x.is_finite() {
                return 0.0;
            }
            f(from + sign * x) / ((1.0 - t) * (1.0 - t))
        },
        0.0,
        1.0,
    )
}

/// `∫ f` over the real line, splitting at each breakpoint (and at zero).
pub(crate) fn integrate_line(f: impl Fn(f64) -> f64 + Copy, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().chain([0.0]).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let first = pts[0];
    let last = pts[pts.len() - 1];
    let inner: f64 = pts.windows(2).map(|w| segment(f, w[0], w[1])).sum();
    tail(f, first, -1.0) + inner + tail(f, last, 1.0)
}
