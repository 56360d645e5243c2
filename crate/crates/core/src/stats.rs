//! Small numeric helpers shared by the estimators.

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Fold another partial sum in, keeping both compensation terms.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Mean and unbiased sample variance in one pass (compensated).
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<CompensatedSum>().value();
    (mean, ss / (n - 1.0))
}

/// Number of `k`-permutations of `n` summed over `k = 0..=n`,
/// i.e. the number of sequences of distinct items.
pub fn distinct_sequences(n: usize) -> u128 {
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for k in 0..=n {
        total += term;
        term *= (n - k) as u128;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn sequences() {
        assert_eq!(distinct_sequences(0), 1);
        assert_eq!(distinct_sequences(1), 2);
        assert_eq!(distinct_sequences(3), 1 + 3 + 6 + 6);
    }

    #[test]
    fn variance_of_constant() {
        let (m, v) = mean_and_variance(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(v, 0.0);
    }
}
