//! Fourier analysis of discretised chaos measures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2, TAU};
use std::io::Write;

use crate::error::{GmcError, Result};
use crate::fft::FftWorkspace;
use crate::gmc::GmcMeasure;
use crate::grid::Domain;

/// Where a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSource {
    pub points: usize,
    pub domain: Domain,
    pub cutoff: f64,
    /// Convolution power (1 for the measure itself).
    pub power: u32,
}

/// Coefficients `c_n = ∫ e^{inθ} μ(dθ)` for `|n| ≤ n_max`.
///
/// Stored densely, `coeffs[n + n_max]`. Negative frequencies are the exact
/// conjugates of the positive ones and `c_0` is real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub n_max: usize,
    pub coeffs: Vec<Complex64>,
    pub gamma: f64,
    pub source: SeriesSource,
}

impl FourierSeries {
    /// Builds a series from `c_0..=c_{n_max}`, filling in the conjugates.
    pub fn from_nonnegative(
        nonneg: &[Complex64],
        gamma: f64,
        source: SeriesSource,
    ) -> Result<Self> {
        if nonneg.is_empty() {
            return Err(GmcError::Input("a series needs at least c_0".into()));
        }
        let n_max = nonneg.len() - 1;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n_max + 1];
        coeffs[n_max] = Complex64::new(nonneg[0].re, 0.0);
        for (n, c) in nonneg.iter().enumerate().skip(1) {
            coeffs[n_max + n] = *c;
            coeffs[n_max - n] = c.conj();
        }
        Ok(FourierSeries {
            n_max,
            coeffs,
            gamma,
            source,
        })
    }

    pub fn get(&self, n: i64) -> Option<Complex64> {
        let idx = n + self.n_max as i64;
        (idx >= 0 && (idx as usize) < self.coeffs.len()).then(|| self.coeffs[idx as usize])
    }

    /// `c_n` for `n ≥ 0`. Panics beyond `n_max`.
    pub fn at(&self, n: usize) -> Complex64 {
        self.coeffs[self.n_max + n]
    }

    /// `c_0, c_1, …, c_{n_max}`.
    pub fn nonnegative(&self) -> &[Complex64] {
        &self.coeffs[self.n_max..]
    }

    /// Writes the `n,re,im` CSV export (all `|n| ≤ n_max`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,re,im")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            let n = i as i64 - self.n_max as i64;
            writeln!(out, "{n},{:.16e},{:.16e}", c.re, c.im)?;
        }
        Ok(())
    }
}

/// Coefficients up to `n_max` via one unnormalised inverse FFT of the weights.
pub fn fourier_coefficients(measure: &GmcMeasure, n_max: usize) -> Result<FourierSeries> {
    fourier_coefficients_with(&mut FftWorkspace::new(), measure, n_max)
}

pub fn fourier_coefficients_with(
    fft: &mut FftWorkspace,
    measure: &GmcMeasure,
    n_max: usize,
) -> Result<FourierSeries> {
    let points = measure.grid.points();
    if n_max > points / 2 {
        return Err(GmcError::Nyquist { n_max, points });
    }
    let mut buf: Vec<Complex64> = measure
        .weights
        .iter()
        .map(|w| Complex64::new(*w, 0.0))
        .collect();
    // Σ_j w_j e^{+2πi nj/M} = Σ_j w_j e^{i n θ_j}
    fft.inverse(&mut buf);
    FourierSeries::from_nonnegative(
        &buf[..=n_max],
        measure.gamma,
        SeriesSource {
            points,
            domain: measure.grid.domain(),
            cutoff: measure.cutoff,
            power: 1,
        },
    )
}

/// `n^{(1-γ²)/2} · c`.
pub fn rescale_coefficient(c: Complex64, n: usize, gamma: f64) -> Complex64 {
    c * (n as f64).powf(0.5 * (1.0 - gamma * gamma))
}

/// Coefficients of the `d`-fold self-convolution: `c_n ↦ c_n^d`.
pub fn convolution_power(series: &FourierSeries, d: u32) -> Result<FourierSeries> {
    if d == 0 {
        return Err(GmcError::Domain("convolution power must be ≥ 1".into()));
    }
    let powered: Vec<Complex64> = series
        .nonnegative()
        .iter()
        .map(|c| c.powu(d))
        .collect();
    let mut source = series.source;
    source.power = series.source.power * d;
    FourierSeries::from_nonnegative(&powered, series.gamma, source)
}

/// Fejér-summed density on a `points`-node grid:
/// `f(θ_j) = (2π)^{-1} Σ_{|n|≤K} (1 − |n|/(K+1)) c_n e^{−inθ_j}`.
pub fn fejer_density(series: &FourierSeries, k: usize, points: usize) -> Result<Vec<f64>> {
    fejer_density_with(&mut FftWorkspace::new(), series, k, points)
}

pub fn fejer_density_with(
    fft: &mut FftWorkspace,
    series: &FourierSeries,
    k: usize,
    points: usize,
) -> Result<Vec<f64>> {
    if k == 0 || k > series.n_max {
        return Err(GmcError::Domain(format!(
            "Fejér cutoff must be in 1..={}, got {k}",
            series.n_max
        )));
    }
    if !points.is_power_of_two() || k > points / 2 {
        return Err(GmcError::Nyquist { n_max: k, points });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); points];
    let taper = |n: usize| 1.0 - n as f64 / (k + 1) as f64;
    buf[0] = series.at(0);
    for n in 1..=k {
        let c = series.at(n) * taper(n);
        buf[n] += c;
        buf[points - n] += c.conj();
    }
    fft.forward(&mut buf);
    let scale = TAU.recip();
    let max_re = buf.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-10 * max_re.max(f64::MIN_POSITIVE) {
        return Err(GmcError::Numeric(format!(
            "Fejér density has imaginary residue {max_im:e} against magnitude {max_re:e}"
        )));
    }
    Ok(buf.iter().map(|z| z.re * scale).collect())
}

/// Mean absolute difference `(2π/M) Σ |f_j − g_j|`, an L¹ distance on the circle.
pub fn l1_distance(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len());
    TAU / f.len() as f64 * f.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Capacity threshold: the Riesz `s`-energy is a.s. finite iff `s < s⋆(γ)`.
pub fn s_star(gamma: f64) -> f64 {
    if gamma < FRAC_1_SQRT_2 {
        1.0 - gamma * gamma
    } else {
        (SQRT_2 - gamma).powi(2)
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(GmcError::Domain(format!("s must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// `Σ_{0<|n|≤n_max} |n|^{s−1} |c_n|²`.
pub fn capacity_sum(series: &FourierSeries, s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(2.0
        * series
            .nonnegative()
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| (n as f64).powf(s - 1.0) * c.norm_sqr())
            .sum::<f64>())
}

/// Riesz energy `∫∫ μ(dθ)μ(dθ') / |e^{iθ} − e^{iθ'}|^s` of the discretised
/// measure (nodes mapped to the circle).
///
/// Off-diagonal cell pairs use the chord between nodes. A diagonal pair
/// contributes `w_j² · h^{−s} · 2/((1−s)(2−s))`, the energy of a uniform
/// cell of width `h`. The off-diagonal sum is a circular correlation computed
/// with FFTs.
pub fn riesz_energy(measure: &GmcMeasure, s: f64) -> Result<f64> {
    riesz_energy_with(&mut FftWorkspace::new(), measure, s)
}

pub fn riesz_energy_with(fft: &mut FftWorkspace, measure: &GmcMeasure, s: f64) -> Result<f64> {
    check_s(s)?;
    let m = measure.grid.points();
    let h = TAU / m as f64;
    let mut buf: Vec<Complex64> = measure
        .weights
        .iter()
        .map(|w| Complex64::new(*w, 0.0))
        .collect();
    fft.forward(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    fft.inverse(&mut buf);
    // buf[l] / M = Σ_j w_j w_{j+l}
    let inv_m = 1.0 / m as f64;
    let off_diagonal: f64 = (1..m)
        .map(|l| {
            let chord = 2.0 * (std::f64::consts::PI * l as f64 / m as f64).sin();
            buf[l].re * inv_m * chord.powf(-s)
        })
        .sum();
    let self_energy = 2.0 / ((1.0 - s) * (2.0 - s)) * h.powf(-s);
    let diagonal: f64 = measure.weights.iter().map(|w| w * w).sum::<f64>() * self_energy;
    Ok(off_diagonal + diagonal)
}
