//! Order-fixed compensated summation.
//!
//! Every reported integral goes through [`neumaier`] so that results do not
//! depend on reduction order and carry O(eps) error independent of length.

/// Neumaier (improved Kahan) summation of a sequence.
pub fn neumaier<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated dot product `sum_i a_i * b_i`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    neumaier(a.iter().zip(b).map(|(x, y)| x * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let terms = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier(terms), 2.0);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(neumaier(std::iter::empty()), 0.0);
    }
}
