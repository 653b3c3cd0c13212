//! Small numeric helpers shared by the probability code.

/// Running Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated (Neumaier) summation.
///
/// The summation order is the iteration order, so results are reproducible
/// for a fixed input ordering.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Probability-weighted sum `Σ w_i x_i` with compensated accumulation.
pub fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    compensated_sum(weights.iter().zip(values).map(|(w, x)| w * x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
        assert_ne!(xs.iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn many_small_probabilities_sum_to_one() {
        let n = 1 << 16;
        let p = 1.0 / n as f64;
        assert_eq!(compensated_sum(std::iter::repeat_n(p, n)), 1.0);
    }
}
