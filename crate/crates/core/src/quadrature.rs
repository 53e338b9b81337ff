//! Composite Newton–Cotes rules on uniform nodes.

/// Weights of the composite Simpson rule on `intervals + 1` uniform nodes of
/// spacing `h`.
///
/// An odd interval count closes with Simpson's 3/8 rule on the last three
/// intervals; a single interval falls back to the trapezoid rule.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    match intervals {
        0 => {}
        1 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
        }
        _ => {
            let (simpson, tail) = if intervals % 2 == 0 { (intervals, 0) } else { (intervals - 3, 3) };
            for k in (0..simpson).step_by(2) {
                w[k] += h / 3.0;
                w[k + 1] += 4.0 * h / 3.0;
                w[k + 2] += h / 3.0;
            }
            if tail == 3 {
                let s = simpson;
                let c = 3.0 * h / 8.0;
                w[s] += c;
                w[s + 1] += 3.0 * c;
                w[s + 2] += 3.0 * c;
                w[s + 3] += c;
            }
        }
    }
    w
}

/// Composite Simpson integral of samples `values` on a uniform grid.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    simpson_weights(values.len() - 1, h).iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Integral of `f` over `[a, b]` with the composite Simpson rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let vals: Vec<f64> = (0..=intervals).map(|k| f(a + k as f64 * h)).collect();
    simpson_uniform(&vals, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubics_for_both_parities() {
        for intervals in [2usize, 3, 4, 5, 9, 10] {
            let got = integrate(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, intervals);
            assert!((got - 2.0).abs() < 1e-12, "{intervals}: {got}");
        }
    }

    #[test]
    fn weights_sum_to_length() {
        for intervals in 1..12 {
            let s: f64 = simpson_weights(intervals, 0.25).iter().sum();
            assert!((s - 0.25 * intervals as f64).abs() < 1e-12);
        }
    }
}
