//! Estimators and distributional tests.

mod fits;
mod hypothesis;
mod report;

pub use fits::{
    block_max, dyadic_blocks, envelope_decay_check, fourth_moment_curve, loglog_slope, median,
    EnvelopeCheck, FourthMomentCurve,
};
pub use hypothesis::{energy_distance_test, ks_test, phase_uniformity_test, DEFAULT_PERMUTATIONS};
pub use report::{EstimateReport, TestMethod, TestReport, Z95};

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{GmcError, Result};
use crate::integrals;
use crate::rng::{standard_normal, SimRng};

/// Mixture `√(C/2) · W_m` with `m` the mass of an independent `M_{2γ}`
/// replica: given `m`, real and imaginary parts are independent
/// `N(0, C·m/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLawReference {
    pub gamma: f64,
    /// Variance constant `C`; `κ(γ)` by default.
    pub constant: f64,
}

impl LimitLawReference {
    /// Reference law with `C = κ(γ)`.
    pub fn new(gamma: f64) -> Result<Self> {
        Self::check(gamma)?;
        let k = integrals::kappa(gamma)?;
        if !k.converged {
            return Err(GmcError::Numeric(format!("κ({gamma}) did not converge")));
        }
        Ok(LimitLawReference {
            gamma,
            constant: k.value,
        })
    }

    pub fn with_constant(gamma: f64, constant: f64) -> Result<Self> {
        Self::check(gamma)?;
        if !(constant >= 0.0) {
            return Err(GmcError::Domain(format!("variance constant must be ≥ 0, got {constant}")));
        }
        Ok(LimitLawReference { gamma, constant })
    }

    fn check(gamma: f64) -> Result<()> {
        if !(0.0..FRAC_1_SQRT_2).contains(&gamma) {
            return Err(GmcError::Regime(format!(
                "limit law needs 0 ≤ γ < 1/√2 (so that 2γ < √2), got γ = {gamma}"
            )));
        }
        Ok(())
    }

    /// Variance of each component given mass `m`.
    pub fn component_variance(&self, mass: f64) -> f64 {
        0.5 * self.constant * mass
    }

    pub fn sample(&self, mass: f64, rng: &mut SimRng) -> Complex64 {
        let sd = self.component_variance(mass).max(0.0).sqrt();
        let re = standard_normal(rng);
        let im = standard_normal(rng);
        Complex64::new(sd * re, sd * im)
    }
}

/// One draw of `√(κ/2) · W_m` for a given `M_{2γ}` mass.
pub fn limit_law_reference_sample(
    reference: &LimitLawReference,
    mass: f64,
    rng: &mut SimRng,
) -> Complex64 {
    reference.sample(mass, rng)
}
