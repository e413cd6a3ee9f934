//! Composite Simpson quadrature on a uniform grid.

/// Default number of subintervals for inner products on `[0, 1]`.
pub const DEFAULT_INTERVALS: usize = 2000;

/// Composite Simpson rule for `∫_a^b f` with `intervals` subintervals
/// (rounded up to the next even count).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `⟨f, g⟩ = ∫_0^1 f g` using the default grid.
pub fn inner_product<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G) -> f64 {
    simpson(|x| f(x) * g(x), 0.0, 1.0, DEFAULT_INTERVALS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 4);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_interval_count_is_rounded_up() {
        let v = simpson(|x| x * x, 0.0, 1.0, 3);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}
