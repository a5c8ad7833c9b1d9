use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{GmcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[0, 2π)`, positions taken modulo 2π.
    Circle,
    /// `[0, 1)`, distances not taken modulo 1.
    UnitInterval,
}

impl Domain {
    pub fn length(self) -> f64 {
        match self {
            Domain::Circle => TAU,
            Domain::UnitInterval => 1.0,
        }
    }
}

/// Uniform grid of `points` nodes `j · spacing`, `j = 0..points`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    points: usize,
    domain: Domain,
}

impl GridSpec {
    pub fn new(points: usize, domain: Domain) -> Result<Self> {
        if points < 2 || !points.is_power_of_two() {
            return Err(GmcError::Grid(format!(
                "grid size must be a power of two ≥ 2, got {points}"
            )));
        }
        Ok(GridSpec { points, domain })
    }

    pub fn circle(points: usize) -> Result<Self> {
        Self::new(points, Domain::Circle)
    }

    pub fn unit_interval(points: usize) -> Result<Self> {
        Self::new(points, Domain::UnitInterval)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn spacing(&self) -> f64 {
        self.domain.length() / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Largest frequency resolvable on this grid.
    pub fn nyquist(&self) -> usize {
        self.points / 2
    }
}
