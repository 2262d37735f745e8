/// Per-head P-mode direction: orientation bias, `α = sigmoid(bias)`, `γ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadDirection {
    pub orientation_bias: f64,
    pub alpha: f64,
    pub gamma: f64,
}

pub const ORIENTATION_RANGE: (f64, f64) = (-2.0, 2.0);

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Orientation biases evenly spaced over `[-2, 2]` (a single head gets 0),
/// at criticality.
pub fn directional_head_init(num_heads: usize) -> Vec<HeadDirection> {
    linspace(ORIENTATION_RANGE.0, ORIENTATION_RANGE.1, num_heads)
        .into_iter()
        .map(|b| HeadDirection { orientation_bias: b, alpha: sigmoid(b), gamma: 1.0 })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi`; the midpoint when `n == 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_heads() {
        let b: Vec<_> = directional_head_init(3).iter().map(|h| h.orientation_bias).collect();
        assert_eq!(b, vec![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn one_head_is_midpoint() {
        let h = directional_head_init(1)[0];
        assert_eq!(h.orientation_bias, 0.0);
        assert_eq!(h.alpha, 0.5);
        assert_eq!(h.gamma, 1.0);
    }

    #[test]
    fn strictly_increasing_with_endpoints() {
        for n in 2..10 {
            let b: Vec<_> = directional_head_init(n).iter().map(|h| h.orientation_bias).collect();
            assert_eq!((b[0], b[n - 1]), (-2.0, 2.0));
            assert!(b.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
