//! Discrete entropy helpers, all in bits.

/// `-p log2 p`, with the `0 log 0 = 0` convention.
#[inline]
pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy function `H_2(p)`.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

/// Entropy of a probability mass function.
pub fn entropy(pmf: &[f64]) -> f64 {
    pmf.iter().copied().map(plogp).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        // -0.1 log2 0.1 - 0.9 log2 0.9
        assert!((binary_entropy(0.1) - 0.468_995_593_589_281).abs() < 1e-12);
    }

    #[test]
    fn uniform_entropy() {
        assert!((entropy(&[0.125; 8]) - 3.0).abs() < 1e-15);
    }
}
