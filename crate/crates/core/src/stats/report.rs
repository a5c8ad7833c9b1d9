use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    pub ci95: (f64, f64),
}

impl EstimateReport {
    pub fn new(value: f64, std_error: f64, n_replicas: usize) -> Self {
        let se = std_error.max(0.0);
        EstimateReport {
            value,
            std_error: se,
            n_replicas,
            ci95: (value - Z95 * se, value + Z95 * se),
        }
    }

    /// Sample mean with the usual `s/√n` standard error.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self::new(f64::NAN, f64::NAN, 0);
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self::new(mean, 0.0, 1);
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self::new(mean, (var / n as f64).sqrt(), n)
    }

    /// Number of standard errors between the estimate and `target`.
    /// Zero SE with an exact match gives 0; a mismatch gives ∞.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error > 0.0 {
            d / self.std_error
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target) <= n_se
    }

    pub fn relative_error(&self) -> f64 {
        self.std_error / self.value.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Energy,
    Ks,
    Chi2Phase,
}

/// Outcome of a two-sample or goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    /// 0 when the p-value is analytic.
    pub n_permutations: usize,
    /// Observations dropped before testing (zero values in the phase test).
    pub excluded: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_contains_value() {
        let r = EstimateReport::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.value, 2.5);
        assert!(r.ci95.0 <= r.value && r.value <= r.ci95.1);
        assert!((r.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn z_score_edge_cases() {
        let r = EstimateReport::new(1.0, 0.0, 10);
        assert_eq!(r.z_score(1.0), 0.0);
        assert!(r.z_score(1.5).is_infinite());
    }
}
