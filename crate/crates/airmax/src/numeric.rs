//! Small floating-point helpers shared across modules.

/// Kahan compensated summation. Keeps the running error term so convex
/// weights and received signals stay accurate for large neighbor sets.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::kahan_sum;

    #[test]
    fn matches_plain_sum_on_small_inputs() {
        assert_eq!(kahan_sum([1.0, 2.0, 3.0]), 6.0);
        assert_eq!(kahan_sum([]), 0.0);
    }

    #[test]
    fn recovers_cancellation_error() {
        // 1 + 1e-16 repeated: plain summation loses the small terms.
        let values: Vec<f64> = std::iter::once(1.0)
            .chain(std::iter::repeat_n(1e-16, 10_000))
            .collect();
        let compensated = kahan_sum(values.iter().copied());
        assert!((compensated - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
