//! Fixed-shape pairwise summation.
//!
//! The reduction tree depends only on the number of terms, never on thread
//! scheduling, so sums are bit-reproducible. Rounding error grows like
//! `log2(len)` ulps instead of `len`.

const LEAF: usize = 16;

/// `Σ_{i<len} f(i)` with a fixed binary reduction tree.
pub fn pairwise_sum(len: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= LEAF {
            (lo..hi).fold(0.0, |acc, i| acc + f(i))
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, len, f)
}

/// Like [`pairwise_sum`] but also accumulates `Σ |f(i)|` for error bounds.
pub fn pairwise_sum_abs(len: usize, f: &impl Fn(usize) -> f64) -> (f64, f64) {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> (f64, f64) {
        if hi - lo <= LEAF {
            (lo..hi).fold((0.0, 0.0), |(s, a), i| {
                let v = f(i);
                (s + v, a + v.abs())
            })
        } else {
            let mid = lo + (hi - lo) / 2;
            let (s1, a1) = go(lo, mid, f);
            let (s2, a2) = go(mid, hi, f);
            (s1 + s2, a1 + a2)
        }
    }
    go(0, len, f)
}

/// Forward error bound `γ_k Σ|x_i|` for a pairwise sum of `len` terms.
pub fn rounding_bound(len: usize, abs_sum: f64) -> f64 {
    let depth = (usize::BITS - len.max(1).leading_zeros()) as f64 + LEAF as f64;
    let u = f64::EPSILON / 2.0;
    let gamma = depth * u / (1.0 - depth * u);
    gamma * abs_sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_small_sums() {
        assert_eq!(pairwise_sum(0, &|_| 1.0), 0.0);
        assert_eq!(pairwise_sum(1000, &|i| i as f64), 499500.0);
        let (s, a) = pairwise_sum_abs(101, &|i| if i % 2 == 0 { 1.0 } else { -1.0 });
        assert_eq!((s, a), (1.0, 101.0));
    }

    #[test]
    fn more_accurate_than_naive_loop() {
        let n = 1 << 20;
        let f = |_i: usize| 0.1;
        let exact = 0.1 * n as f64;
        let pair = pairwise_sum(n, &f);
        let naive: f64 = (0..n).map(f).sum();
        assert!((pair - exact).abs() <= (naive - exact).abs());
        assert!((pair - exact).abs() <= rounding_bound(n, exact));
    }
}
