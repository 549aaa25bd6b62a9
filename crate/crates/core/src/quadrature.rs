//! Quadrature of uniformly sampled functions of time.

/// Composite trapezoid rule over samples spaced `dt` apart.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Composite Simpson rule; an odd number of intervals closes with the 3/8
/// rule on the last three, a single interval falls back to the trapezoid.
pub fn simpson(values: &[f64], dt: f64) -> f64 {
    let intervals = values.len().saturating_sub(1);
    match intervals {
        0 => 0.0,
        1 => trapezoid(values, dt),
        _ if intervals % 2 == 0 => simpson_even(values, dt),
        3 => three_eighths(values, dt),
        _ => {
            simpson_even(&values[..intervals - 2], dt) + three_eighths(&values[intervals - 3..], dt)
        }
    }
}

fn simpson_even(v: &[f64], dt: f64) -> f64 {
    let n = v.len() - 1;
    let mut s = v[0] + v[n];
    for (i, x) in v.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * x } else { 2.0 * x };
    }
    s * dt / 3.0
}

fn three_eighths(v: &[f64], dt: f64) -> f64 {
    3.0 * dt / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3])
}
