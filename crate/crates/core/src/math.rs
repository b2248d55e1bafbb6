//! Small numerical helpers shared across modules.

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `(softplus(x), sigmoid(x))` from a single exponential.
pub fn softplus_and_slope(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let r = 1.0 / (1.0 + e);
    let l = ln_1p_unit(e);
    if x > 0.0 {
        (x + l, r)
    } else {
        (l, e * r)
    }
}

/// `ln(1 + e)` for `e ∈ [0, 1]`; cheaper than `ln_1p` and within 1e-12 relative.
fn ln_1p_unit(e: f64) -> f64 {
    if e < 1e-4 {
        e * (1.0 - e * (0.5 - e * (1.0 / 3.0)))
    } else {
        (1.0 + e).ln()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (N − 1 denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
