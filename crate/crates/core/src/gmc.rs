//! Discretised Gaussian multiplicative chaos.
//!
//! Cell `j` carries `exp(γ X_j − γ²/2 · Var X_j) · spacing`, a Riemann-cell
//! discretisation of the chaos measure. The normalisation makes each weight
//! mean `spacing` exactly, for every cutoff.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{GmcError, Result};
use crate::fields::FieldSample;
use crate::grid::GridSpec;
use crate::stats::EstimateReport;

/// Critical parameter on the circle (one-dimensional base space).
pub const GAMMA_CRITICAL: f64 = SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcMeasure {
    pub grid: GridSpec,
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub cutoff: f64,
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) {
        return Err(GmcError::Domain(format!("gamma must be ≥ 0, got {gamma}")));
    }
    if gamma >= GAMMA_CRITICAL {
        return Err(GmcError::Supercritical { gamma });
    }
    Ok(())
}

/// Chaos density `exp(γ x − γ²/2 · v) · h` for one node.
#[inline]
pub fn cell_weight(gamma: f64, value: f64, variance: f64, spacing: f64) -> f64 {
    (gamma * value - 0.5 * gamma * gamma * variance).exp() * spacing
}

pub fn build_measure(field: &FieldSample, gamma: f64) -> Result<GmcMeasure> {
    check_gamma(gamma)?;
    let h = field.grid.spacing();
    let weights = field
        .values
        .iter()
        .zip(&field.variance)
        .map(|(&x, &v)| cell_weight(gamma, x, v, h))
        .collect();
    Ok(GmcMeasure {
        grid: field.grid,
        weights,
        gamma,
        cutoff: field.cutoff,
    })
}

impl GmcMeasure {
    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }

    /// Mass of the cells with index in `range`.
    pub fn mass_of(&self, range: std::ops::Range<usize>) -> f64 {
        self.weights[range].iter().sum()
    }
}

pub fn total_mass(measure: &GmcMeasure) -> f64 {
    measure.weights.iter().sum()
}

/// Monte-Carlo estimate of `E[M^q]` from replicated total masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub q: f64,
    pub report: EstimateReport,
    /// Set when `q ≥ 2/γ²`: the continuum moment is infinite and the sample
    /// mean does not estimate anything.
    pub heavy_tail: bool,
}

/// Moment threshold `2/γ²` beyond which `E[M^q] = ∞`.
pub fn moment_threshold(gamma: f64) -> f64 {
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        2.0 / (gamma * gamma)
    }
}

/// Mean of `mass^q` with a jackknife standard error.
pub fn mass_moment_estimate(replicas: &[f64], q: f64, gamma: f64) -> Result<MomentEstimate> {
    if replicas.is_empty() {
        return Err(GmcError::Input("no replicas".into()));
    }
    if !(q >= 0.0) {
        return Err(GmcError::Domain(format!("moment order must be ≥ 0, got {q}")));
    }
    let heavy_tail = q >= moment_threshold(gamma);
    let powered: Vec<f64> = replicas.iter().map(|m| m.powf(q)).collect();
    let n = powered.len();
    let total: f64 = powered.iter().sum();
    let value = total / n as f64;
    let std_error = if n < 2 {
        0.0
    } else {
        // leave-one-out means
        let loo: Vec<f64> = powered.iter().map(|x| (total - x) / (n - 1) as f64).collect();
        let loo_mean = loo.iter().sum::<f64>() / n as f64;
        let ss: f64 = loo.iter().map(|x| (x - loo_mean).powi(2)).sum();
        ((n - 1) as f64 / n as f64 * ss).sqrt()
    };
    Ok(MomentEstimate {
        q,
        report: EstimateReport::new(value, std_error, n),
        heavy_tail,
    })
}
