//! Log-correlated Gaussian fields: exact covariance kernels and samplers.
//!
//! The circle field is the spectrally truncated series
//! `φ_N(θ) = Σ_{n≤N} n^{-1/2} (A_n cos nθ + B_n sin nθ)` with i.i.d. standard
//! normal coefficients, synthesised with one inverse FFT. Stationary fields on
//! the unit interval use circulant embedding of their Toeplitz covariance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{GmcError, Result};
use crate::fft::FftWorkspace;
use crate::grid::{Domain, GridSpec};
use crate::rng::{standard_normal, SimRng};

/// Eigenvalues below `-EMBEDDING_TOLERANCE · λ_max` reject the embedding.
pub const EMBEDDING_TOLERANCE: f64 = 1e-8;

/// `E[φ(θ)φ(θ')] = -ln |e^{iθ} - e^{iθ'}| = -ln(2 |sin(gap/2)|)`.
pub fn circle_covariance(gap: f64) -> Result<f64> {
    let g = gap.rem_euclid(TAU);
    let chord = 2.0 * (0.5 * g.min(TAU - g)).sin();
    if !(chord > 0.0) || chord < 1e-300 {
        return Err(GmcError::Singularity { gap });
    }
    Ok(-chord.ln())
}

/// Covariance of the field truncated at `modes`: `Σ_{n=1}^{N} cos(n·gap)/n`.
pub fn truncated_circle_covariance(gap: f64, modes: usize) -> f64 {
    (1..=modes).map(|n| (n as f64 * gap).cos() / n as f64).sum()
}

/// Harmonic number `H_N`, the pointwise variance of the truncated circle field.
pub fn harmonic_number(modes: usize) -> f64 {
    (1..=modes).map(|n| 1.0 / n as f64).sum()
}

/// A sampled field on a grid together with its pointwise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub variance: Vec<f64>,
    /// Number of modes (circle) or resolution scale `t` (interval fields).
    pub cutoff: f64,
}

impl FieldSample {
    pub fn new(grid: GridSpec, values: Vec<f64>, variance: Vec<f64>, cutoff: f64) -> Result<Self> {
        if values.len() != grid.points() || variance.len() != grid.points() {
            return Err(GmcError::Input(format!(
                "field vectors have lengths {} / {}, grid has {} points",
                values.len(),
                variance.len(),
                grid.points()
            )));
        }
        if variance.iter().any(|v| !(*v >= 0.0)) {
            return Err(GmcError::Input("negative or NaN field variance".into()));
        }
        Ok(FieldSample {
            grid,
            values,
            variance,
            cutoff,
        })
    }

    /// Pointwise sum of two independent fields on the same grid.
    pub fn add_independent(&self, other: &FieldSample, cutoff: f64) -> Result<FieldSample> {
        if self.grid != other.grid {
            return Err(GmcError::Input("fields live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        let variance = self
            .variance
            .iter()
            .zip(&other.variance)
            .map(|(a, b)| a + b)
            .collect();
        FieldSample::new(self.grid, values, variance, cutoff)
    }
}

/// Reusable sampler for the truncated circle field.
///
/// Draw order per sample: `A_1, B_1, A_2, B_2, …, A_N, B_N`.
#[derive(Debug)]
pub struct CircleFieldSampler {
    grid: GridSpec,
    modes: usize,
    amplitudes: Vec<f64>,
    variance: f64,
    fft: FftWorkspace,
    buf: Vec<Complex64>,
}

impl CircleFieldSampler {
    pub fn new(modes: usize, grid: GridSpec) -> Result<Self> {
        if grid.domain() != Domain::Circle {
            return Err(GmcError::Grid("circle field needs a circle grid".into()));
        }
        if modes == 0 || modes > grid.nyquist() {
            return Err(GmcError::Aliasing {
                modes,
                points: grid.points(),
            });
        }
        Ok(CircleFieldSampler {
            grid,
            modes,
            amplitudes: (1..=modes).map(|n| (n as f64).sqrt().recip()).collect(),
            variance: harmonic_number(modes),
            fft: FftWorkspace::new(),
            buf: vec![Complex64::new(0.0, 0.0); grid.points()],
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Pointwise variance `H_N`.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Fills `out` with one realisation of the field at the grid nodes.
    pub fn sample_into(&mut self, rng: &mut SimRng, out: &mut Vec<f64>) {
        self.buf.fill(Complex64::new(0.0, 0.0));
        for (n, amp) in self.amplitudes.iter().enumerate() {
            let a = standard_normal(rng);
            let b = standard_normal(rng);
            // Re[(A - iB) e^{inθ}] = A cos nθ + B sin nθ
            self.buf[n + 1] = Complex64::new(amp * a, -amp * b);
        }
        self.fft.inverse(&mut self.buf);
        out.clear();
        out.extend(self.buf.iter().map(|z| z.re));
    }

    pub fn sample(&mut self, rng: &mut SimRng) -> FieldSample {
        let mut values = Vec::with_capacity(self.grid.points());
        self.sample_into(rng, &mut values);
        FieldSample {
            grid: self.grid,
            values,
            variance: vec![self.variance; self.grid.points()],
            cutoff: self.modes as f64,
        }
    }
}

/// One realisation of the circle field truncated at `modes`.
pub fn sample_circle_field(modes: usize, grid: GridSpec, rng: &mut SimRng) -> Result<FieldSample> {
    Ok(CircleFieldSampler::new(modes, grid)?.sample(rng))
}

/// Exact sampler for a stationary Gaussian vector on a non-periodic grid.
///
/// The Toeplitz covariance `k(|x_j - x_l|)` is embedded in a circulant of
/// twice the grid size. Slightly negative eigenvalues (within
/// [`EMBEDDING_TOLERANCE`] of the largest) are clipped; their total is kept
/// in [`CirculantSampler::clipped_mass`].
#[derive(Debug)]
pub struct CirculantSampler {
    grid: GridSpec,
    sqrt_eigen: Vec<f64>,
    variance: f64,
    clipped_mass: f64,
    fft: FftWorkspace,
    buf: Vec<Complex64>,
}

impl CirculantSampler {
    pub fn new(grid: GridSpec, kernel: impl Fn(f64) -> f64) -> Result<Self> {
        let m = grid.points();
        let len = 2 * m;
        let h = grid.spacing();
        let mut fft = FftWorkspace::new();
        let mut row: Vec<Complex64> = (0..len)
            .map(|k| Complex64::new(kernel(k.min(len - k) as f64 * h), 0.0))
            .collect();
        let variance = row[0].re;
        fft.forward(&mut row);
        let max = row.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let negative_mass: f64 = row.iter().map(|z| (-z.re).max(0.0)).sum();
        let most_negative = row.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if max <= 0.0 || most_negative < -EMBEDDING_TOLERANCE * max {
            return Err(GmcError::Embedding {
                negative_mass,
                relative: -most_negative / max.max(f64::MIN_POSITIVE),
            });
        }
        let sqrt_eigen = row
            .iter()
            .map(|z| (z.re.max(0.0) / len as f64).sqrt())
            .collect();
        Ok(CirculantSampler {
            grid,
            sqrt_eigen,
            variance,
            clipped_mass: negative_mass,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); len],
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// `k(0)`, the pointwise variance.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// Two independent realisations (real and imaginary parts of one FFT).
    ///
    /// Draw order: `Re ξ_0, Im ξ_0, Re ξ_1, …` over the `2M` embedding modes.
    pub fn sample_pair(&mut self, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>) {
        for (z, s) in self.buf.iter_mut().zip(&self.sqrt_eigen) {
            let a = standard_normal(rng);
            let b = standard_normal(rng);
            *z = Complex64::new(s * a, s * b);
        }
        self.fft.forward(&mut self.buf);
        let m = self.grid.points();
        (
            self.buf[..m].iter().map(|z| z.re).collect(),
            self.buf[..m].iter().map(|z| z.im).collect(),
        )
    }

    pub fn sample_values(&mut self, rng: &mut SimRng) -> Vec<f64> {
        self.sample_pair(rng).0
    }

    pub fn sample(&mut self, rng: &mut SimRng, cutoff: f64) -> FieldSample {
        FieldSample {
            grid: self.grid,
            values: self.sample_values(rng),
            variance: vec![self.variance; self.grid.points()],
            cutoff,
        }
    }
}

/// Angular gap between circle nodes `j` and `j + lag`.
pub fn circle_gap(grid: &GridSpec, lag: usize) -> f64 {
    TAU * lag as f64 / grid.points() as f64
}
