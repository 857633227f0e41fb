//! Empirical distribution and quantile functions of projected samples.

use super::{Cdf1d, Quantile1d};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Right-continuous empirical CDF: `#{knots <= s} / T`.
#[derive(Debug, Clone)]
pub struct StepCdf {
    knots: Vec<f64>,
}

impl StepCdf {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "empirical cdf needs at least one value");
        Self {
            knots: sorted(values),
        }
    }

    pub fn from_sorted(knots: Vec<f64>) -> Self {
        debug_assert!(knots.windows(2).all(|w| w[0] <= w[1]));
        Self { knots }
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.knots
    }
}

impl Cdf1d for StepCdf {
    fn cdf(&self, s: f64) -> f64 {
        self.knots.partition_point(|&k| k <= s) as f64 / self.knots.len() as f64
    }

    fn cdf_sorted(&self, nodes: &[f64], out: &mut [f64]) {
        let n = self.knots.len() as f64;
        let mut j = 0;
        for (s, o) in nodes.iter().zip(out.iter_mut()) {
            while j < self.knots.len() && self.knots[j] <= *s {
                j += 1;
            }
            *o = j as f64 / n;
        }
    }

    fn knots(&self) -> Vec<f64> {
        let mut k = self.knots.clone();
        k.dedup();
        k
    }
}

/// Empirical quantile: value `Y_(t)` on `((t-1)/T, t/T]`.
#[derive(Debug, Clone)]
pub struct StepQuantile {
    values: Vec<f64>,
}

impl StepQuantile {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            !values.is_empty(),
            "empirical quantile needs at least one value"
        );
        Self {
            values: sorted(values),
        }
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.values
    }
}

impl Quantile1d for StepQuantile {
    fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let idx = ((p * n as f64).ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
        self.values[idx]
    }

    fn kinks(&self) -> Vec<f64> {
        let n = self.values.len();
        (1..n).map(|t| t as f64 / n as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_cdf_values() {
        let f = StepCdf::new(vec![2.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.cdf(0.5), 0.0);
        assert_eq!(f.cdf(1.0), 0.25);
        assert_eq!(f.cdf(2.0), 0.75);
        assert_eq!(f.cdf(10.0), 1.0);
        assert_eq!(f.knots(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn step_quantile_values() {
        let q = StepQuantile::new(vec![3.0, 1.0, 2.0, 4.0]);
        assert_eq!(q.quantile(0.1), 1.0);
        assert_eq!(q.quantile(0.25), 1.0);
        assert_eq!(q.quantile(0.26), 2.0);
        assert_eq!(q.quantile(0.99), 4.0);
    }

    proptest! {
        #[test]
        fn batch_matches_pointwise(mut v in prop::collection::vec(-5.0f64..5.0, 1..40), mut s in prop::collection::vec(-6.0f64..6.0, 1..40)) {
            v.iter_mut().for_each(|x| *x = (*x * 4.0).round() / 4.0);
            s.sort_by(|a, b| a.total_cmp(b));
            let f = StepCdf::new(v);
            let mut out = vec![0.0; s.len()];
            f.cdf_sorted(&s, &mut out);
            for (x, o) in s.iter().zip(&out) {
                prop_assert_eq!(*o, f.cdf(*x));
            }
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn quantile_is_monotone(v in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let q = StepQuantile::new(v);
            let mut last = f64::NEG_INFINITY;
            for i in 1..200 {
                let x = q.quantile(i as f64 / 200.0);
                prop_assert!(x >= last);
                last = x;
            }
        }
    }
}
