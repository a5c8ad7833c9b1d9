//! Chaos on `[0, 1]` built from the Bacry–Muzy field, its Fourier
//! coefficients `Z_n` and their martingale projections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{GmcError, Result};
use crate::fields::{CirculantSampler, FieldSample};
use crate::grid::{Domain, GridSpec};
use crate::integrals::quadrature::{adaptive_gk, cosine_tail};
use crate::integrals::QuadratureResult;
use crate::rng::{rng_from_seed, substream};
use crate::stats::EstimateReport;

/// Covariance of the Bacry–Muzy field at resolution `t`:
/// `ln t + 1 − t r` for `r ≤ 1/t`, `ln(1/r)` beyond.
pub fn bm_covariance(t: f64, r: f64) -> f64 {
    if r <= 1.0 / t {
        t.ln() + 1.0 - t * r
    } else {
        -r.ln()
    }
}

/// Covariance of the increment between resolutions `t < T`.
pub fn increment_covariance(t: f64, big_t: f64, r: f64) -> Result<f64> {
    check_scales(t, big_t)?;
    Ok(increment_kernel(t, big_t, r))
}

fn increment_kernel(t: f64, big_t: f64, r: f64) -> f64 {
    if r >= 1.0 / t {
        0.0
    } else {
        (bm_covariance(big_t, r) - bm_covariance(t, r)).max(0.0)
    }
}

fn check_scales(t: f64, big_t: f64) -> Result<()> {
    if !(t > 1.0) {
        return Err(GmcError::Domain(format!("resolution scale must exceed 1, got {t}")));
    }
    if !(t < big_t) {
        return Err(GmcError::Ordering { t, fine: big_t });
    }
    Ok(())
}

fn check_interval(grid: &GridSpec) -> Result<()> {
    if grid.domain() != Domain::UnitInterval {
        return Err(GmcError::Grid("the toy model lives on the unit interval".into()));
    }
    Ok(())
}

/// Sampler of the Bacry–Muzy field at a fixed scale.
#[derive(Debug)]
pub struct BmSampler {
    t: f64,
    inner: CirculantSampler,
}

impl BmSampler {
    pub fn new(t: f64, grid: GridSpec) -> Result<Self> {
        if !(t > 1.0) {
            return Err(GmcError::Domain(format!("resolution scale must exceed 1, got {t}")));
        }
        check_interval(&grid)?;
        Ok(BmSampler {
            t,
            inner: CirculantSampler::new(grid, |r| bm_covariance(t, r))?,
        })
    }

    pub fn sample(&mut self, rng: &mut crate::rng::SimRng) -> FieldSample {
        self.inner.sample(rng, self.t)
    }
}

pub fn sample_bm_field(t: f64, grid: GridSpec, rng: &mut crate::rng::SimRng) -> Result<FieldSample> {
    Ok(BmSampler::new(t, grid)?.sample(rng))
}

/// A coarse field at scale `t` and an independent increment from `t` to `T`.
/// Their sum is the field at scale `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmFieldPair {
    pub grid: GridSpec,
    pub coarse: FieldSample,
    pub increment: FieldSample,
    pub t: f64,
    #[serde(rename = "T")]
    pub big_t: f64,
}

impl BmFieldPair {
    pub fn fine(&self) -> FieldSample {
        self.coarse
            .add_independent(&self.increment, self.big_t)
            .expect("pair fields share a grid")
    }
}

/// Draws [`BmFieldPair`]s. The coarse field uses sub-stream 0 of the seed,
/// increments use sub-streams 1, 2, … so they never share randomness.
#[derive(Debug)]
pub struct BmPairSampler {
    grid: GridSpec,
    t: f64,
    big_t: f64,
    coarse: CirculantSampler,
    increment: CirculantSampler,
}

impl BmPairSampler {
    pub fn new(grid: GridSpec, t: f64, big_t: f64) -> Result<Self> {
        check_scales(t, big_t)?;
        check_interval(&grid)?;
        Ok(BmPairSampler {
            grid,
            t,
            big_t,
            coarse: CirculantSampler::new(grid, |r| bm_covariance(t, r))?,
            increment: CirculantSampler::new(grid, |r| increment_kernel(t, big_t, r))?,
        })
    }

    pub fn sample_coarse(&mut self, seed: u64) -> FieldSample {
        self.coarse.sample(&mut rng_from_seed(substream(seed, 0)), self.t)
    }

    /// Increment number `k` attached to `seed`.
    pub fn sample_increment(&mut self, seed: u64, k: u64) -> FieldSample {
        self.increment
            .sample(&mut rng_from_seed(substream(seed, k + 1)), self.big_t)
    }

    pub fn sample(&mut self, seed: u64) -> BmFieldPair {
        BmFieldPair {
            grid: self.grid,
            coarse: self.sample_coarse(seed),
            increment: self.sample_increment(seed, 0),
            t: self.t,
            big_t: self.big_t,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn big_t(&self) -> f64 {
        self.big_t
    }
}

fn check_toy_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma * gamma < 1.0) {
        return Err(GmcError::Domain(format!("toy model needs 0 ≤ γ² < 1, got γ = {gamma}")));
    }
    Ok(())
}

/// `Σ_j e^{γX_j − γ²Var_j/2} h e^{2πinx_j}`.
fn interval_coefficient(field: &FieldSample, gamma: f64, n: i64) -> Result<Complex64> {
    check_interval(&field.grid)?;
    check_toy_gamma(gamma)?;
    let m = field.grid.points();
    if n.unsigned_abs() as usize > m / 2 {
        return Err(GmcError::Nyquist {
            n_max: n.unsigned_abs() as usize,
            points: m,
        });
    }
    let h = field.grid.spacing();
    let half = 0.5 * gamma * gamma;
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, (x, v)) in field.values.iter().zip(&field.variance).enumerate() {
        let w = (gamma * x - half * v).exp() * h;
        let k = (j as i64 * n.abs()).rem_euclid(m as i64);
        let (s, c) = (TAU * k as f64 / m as f64).sin_cos();
        re += w * c;
        im += w * s;
    }
    let z = Complex64::new(re, im);
    Ok(if n < 0 { z.conj() } else { z })
}

/// `Z_n` of the fine field.
pub fn toy_z_n(fine: &FieldSample, gamma: f64, n: i64) -> Result<Complex64> {
    interval_coefficient(fine, gamma, n)
}

/// `E[Z_n | F_t]`: the same coefficient with the fine field replaced by the
/// coarse one.
pub fn conditional_projection(coarse: &FieldSample, gamma: f64, n: i64) -> Result<Complex64> {
    interval_coefficient(coarse, gamma, n)
}

/// `∫_0^A cos(2πu) e^{−cu} du` in closed form.
fn damped_cosine(c: f64, a: f64) -> f64 {
    let b = TAU;
    (c + (-c * a).exp() * (-c * (b * a).cos() + b * (b * a).sin())) / (b * b + c * c)
}

/// `∫_0^A cos(2πu) u^{−a} du`.
fn power_cosine_head(a: f64, upper: f64) -> QuadratureResult {
    let head_end = upper.min(0.25);
    let mut total = crate::integrals::singular_cosine_head(a, TAU, head_end);
    let mut lo = head_end;
    while lo < upper {
        let hi = (lo + 0.5).min(upper);
        total = total.combine(adaptive_gk(|u| (TAU * u).cos() * u.powf(-a), lo, hi, 1e-14, 1e-13, 100));
        lo = hi;
    }
    total
}

/// `∫_{|u|≤A} e^{2πiu} (|u|^{−γ²} − e^{γ²} e^{−γ²|u|/A} / A^{γ²}) du`.
pub fn sigma_a_limit(gamma: f64, a_cut: f64) -> Result<QuadratureResult> {
    check_toy_gamma(gamma)?;
    if !(a_cut > 0.0) {
        return Err(GmcError::Domain(format!("A must be positive, got {a_cut}")));
    }
    let a = gamma * gamma;
    if a == 0.0 {
        return Ok(QuadratureResult::exact(0.0));
    }
    let head = power_cosine_head(a, a_cut);
    let damped = a.exp() * a_cut.powf(-a) * damped_cosine(a / a_cut, a_cut);
    let r = QuadratureResult {
        value: 2.0 * (head.value - damped),
        abs_error_estimate: 2.0 * head.abs_error_estimate,
        ..head
    };
    if !r.converged {
        return Err(GmcError::Numeric(format!(
            "σ_A integral did not converge (γ = {gamma}, A = {a_cut}, error ≈ {:.2e})",
            r.abs_error_estimate
        )));
    }
    Ok(r)
}

/// `A^{−γ²} ∫_{|u|≤A} e^{2πiu} e^{γ²(1−|u|/A)} du + ∫_{|u|>A} e^{2πiu} |u|^{−γ²} du`,
/// the limit of `n^{1−γ²} E|E[Z_n | F_{n/A}]|²` as `n → ∞`.
///
/// At γ = 0 the tail is the Abel limit 0.
pub fn projection_second_moment(gamma: f64, a_cut: f64) -> Result<QuadratureResult> {
    check_toy_gamma(gamma)?;
    if !(a_cut > 0.0) {
        return Err(GmcError::Domain(format!("A must be positive, got {a_cut}")));
    }
    let a = gamma * gamma;
    let inner = 2.0 * a.exp() * a_cut.powf(-a) * damped_cosine(a / a_cut, a_cut);
    if a == 0.0 {
        return Ok(QuadratureResult::exact(inner));
    }
    let tail = cosine_tail(|u| u.powf(-a), a_cut, 1e-13);
    if !tail.converged {
        return Err(GmcError::Numeric(format!(
            "tail integral did not converge (γ = {gamma}, A = {a_cut})"
        )));
    }
    Ok(QuadratureResult {
        value: inner + 2.0 * tail.value,
        abs_error_estimate: 2.0 * tail.abs_error_estimate,
        ..tail
    })
}

/// `n^{1−γ²} · 2∫_0^1 (1 − r) cos(2πnr) e^{γ² C_t(r)} dr` with `t = n/A`:
/// the same quantity at finite `n`, before the `n → ∞` limit.
pub fn projection_second_moment_finite(gamma: f64, n: u64, a_cut: f64) -> Result<QuadratureResult> {
    check_toy_gamma(gamma)?;
    let t = n as f64 / a_cut;
    if !(t > 1.0) {
        return Err(GmcError::Domain(format!("need n/A > 1, got {t}")));
    }
    let a = gamma * gamma;
    let nf = n as f64;
    let f = |r: f64| (1.0 - r) * (TAU * nf * r).cos() * (a * bm_covariance(t, r)).exp();
    let mut total = QuadratureResult::exact(0.0);
    let mut breaks: Vec<f64> = (0..=n).map(|k| k as f64 / nf).collect();
    breaks.push(1.0 / t);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    for w in breaks.windows(2) {
        total = total.combine(adaptive_gk(f, w[0], w[1], 1e-15, 1e-12, 50));
    }
    Ok(total.scale(2.0 * nf.powf(1.0 - a)))
}

/// `E|Σ_j w_j e^{2πinx_j}|²` for the discretised chaos with kernel `k`:
/// `Σ_{|l|<M} (M − |l|) h² cos(2πnl/M) e^{γ² k(|l|h)}`.
fn discrete_second_moment(gamma: f64, n: i64, grid: &GridSpec, kernel: impl Fn(f64) -> f64) -> f64 {
    let m = grid.points();
    let h = grid.spacing();
    let a = gamma * gamma;
    let mut s = m as f64 * (a * kernel(0.0)).exp();
    for l in 1..m {
        let phase = TAU * ((n * l as i64).rem_euclid(m as i64)) as f64 / m as f64;
        s += 2.0 * (m - l) as f64 * phase.cos() * (a * kernel(l as f64 * h)).exp();
    }
    s * h * h
}

/// Exact `n^{1−γ²} E|E[Z_n | F_t]|²` for the grid-discretised model.
pub fn projection_second_moment_discrete(gamma: f64, n: u64, t: f64, grid: &GridSpec) -> Result<f64> {
    check_toy_gamma(gamma)?;
    check_interval(grid)?;
    let scale = (n as f64).powf(1.0 - gamma * gamma);
    Ok(scale * discrete_second_moment(gamma, n as i64, grid, |r| bm_covariance(t, r)))
}

/// Exact `E|Z_n|²` for the grid-discretised model at fine scale `T`.
pub fn toy_second_moment_discrete(gamma: f64, n: u64, big_t: f64, grid: &GridSpec) -> Result<f64> {
    check_toy_gamma(gamma)?;
    check_interval(grid)?;
    Ok(discrete_second_moment(gamma, n as i64, grid, |r| bm_covariance(big_t, r)))
}

/// `∫∫_{[0,1]²} e^{2πin(x−y)} e^{γ² C_T(|x−y|)} dx dy`, the continuum `E|Z_n|²`.
pub fn toy_second_moment(gamma: f64, n: u64, big_t: f64) -> Result<QuadratureResult> {
    check_toy_gamma(gamma)?;
    if !(big_t > 1.0) {
        return Err(GmcError::Domain(format!("resolution scale must exceed 1, got {big_t}")));
    }
    let a = gamma * gamma;
    let nf = n.max(1) as f64;
    let f = |r: f64| (1.0 - r) * (TAU * n as f64 * r).cos() * (a * bm_covariance(big_t, r)).exp();
    let mut breaks: Vec<f64> = (0..=n.max(1)).map(|k| k as f64 / nf).collect();
    breaks.push(1.0 / big_t);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = QuadratureResult::exact(0.0);
    for w in breaks.windows(2) {
        total = total.combine(adaptive_gk(f, w[0], w[1], 1e-15, 1e-12, 50));
    }
    Ok(total.scale(2.0))
}

/// Conditional second moments of the martingale increment `D = Z_n − E[Z_n|F_t]`,
/// multiplied by `n^{1−γ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceSplit {
    /// `n^{1−γ²} E[(Re D)² | F_t]`
    pub real: f64,
    /// `n^{1−γ²} E[(Im D)² | F_t]`
    pub imag: f64,
    /// `n^{1−γ²} E[Re D · Im D | F_t]`
    pub cross: f64,
}

impl VarianceSplit {
    /// `σ²_{A,n} = real + imag`.
    pub fn total(&self) -> f64 {
        self.real + self.imag
    }
}

/// Inner Monte Carlo over `inner` increments at fixed coarse field.
/// Increments `1..=inner` of `seed` are used (increment 0 belongs to the pair).
pub fn conditional_variance_split(
    sampler: &mut BmPairSampler,
    pair: &BmFieldPair,
    seed: u64,
    gamma: f64,
    n: i64,
    inner: usize,
) -> Result<(VarianceSplit, [EstimateReport; 3])> {
    let proj = conditional_projection(&pair.coarse, gamma, n)?;
    let scale = (n.unsigned_abs() as f64).powf(1.0 - gamma * gamma);
    let mut re2 = Vec::with_capacity(inner);
    let mut im2 = Vec::with_capacity(inner);
    let mut cross = Vec::with_capacity(inner);
    for k in 0..inner {
        let inc = sampler.sample_increment(seed, k as u64 + 1);
        let fine = pair.coarse.add_independent(&inc, pair.big_t)?;
        let d = toy_z_n(&fine, gamma, n)? - proj;
        re2.push(scale * d.re * d.re);
        im2.push(scale * d.im * d.im);
        cross.push(scale * d.re * d.im);
    }
    let r = [
        EstimateReport::from_samples(&re2),
        EstimateReport::from_samples(&im2),
        EstimateReport::from_samples(&cross),
    ];
    Ok((
        VarianceSplit {
            real: r[0].value,
            imag: r[1].value,
            cross: r[2].value,
        },
        r,
    ))
}

/// The conditional moments of [`conditional_variance_split`] computed exactly
/// as quadratic forms in the coarse weights:
/// `E[D D' | F_t] = Σ_{j,k} w_j w_k φ_j φ'_k (e^{γ² K(|x_j−x_k|)} − 1)`
/// with `K` the increment covariance, which vanishes beyond `1/t`.
pub fn conditional_variance_split_exact(
    coarse: &FieldSample,
    gamma: f64,
    n: i64,
    t: f64,
    big_t: f64,
) -> Result<VarianceSplit> {
    check_scales(t, big_t)?;
    check_interval(&coarse.grid)?;
    check_toy_gamma(gamma)?;
    let m = coarse.grid.points();
    let h = coarse.grid.spacing();
    let a = gamma * gamma;
    let half = 0.5 * a;
    let w: Vec<f64> = coarse
        .values
        .iter()
        .zip(&coarse.variance)
        .map(|(x, v)| (gamma * x - half * v).exp() * h)
        .collect();
    let (cr, ci): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|j| {
            let phase = TAU * ((n * j as i64).rem_euclid(m as i64)) as f64 / m as f64;
            (w[j] * phase.cos(), w[j] * phase.sin())
        })
        .unzip();
    let mut lags = Vec::new();
    let mut l = 0;
    loop {
        let g = (a * increment_kernel(t, big_t, l as f64 * h)).exp_m1();
        if g == 0.0 || l >= m {
            break;
        }
        lags.push(g);
        l += 1;
    }
    let (mut rr, mut ii, mut ri) = (0.0, 0.0, 0.0);
    for j in 0..m {
        for (l, g) in lags.iter().enumerate() {
            if l == 0 {
                rr += g * cr[j] * cr[j];
                ii += g * ci[j] * ci[j];
                ri += g * cr[j] * ci[j];
            } else if j + l < m {
                let k = j + l;
                rr += 2.0 * g * cr[j] * cr[k];
                ii += 2.0 * g * ci[j] * ci[k];
                ri += g * (cr[j] * ci[k] + cr[k] * ci[j]);
            }
        }
    }
    let scale = (n.unsigned_abs() as f64).powf(1.0 - a);
    Ok(VarianceSplit {
        real: scale * rr,
        imag: scale * ii,
        cross: scale * ri,
    })
}

/// Expectation of [`conditional_variance_split_exact`] over the coarse field,
/// for the grid-discretised model: `E[w_j w_k] = h² e^{γ² C_t(|x_j−x_k|)}`
/// replaces the product of coarse weights.
pub fn increment_split_discrete(gamma: f64, n: i64, t: f64, big_t: f64, grid: &GridSpec) -> Result<VarianceSplit> {
    check_scales(t, big_t)?;
    check_interval(grid)?;
    check_toy_gamma(gamma)?;
    let m = grid.points();
    let h = grid.spacing();
    let a = gamma * gamma;
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|j| {
            let phase = TAU * ((n * j as i64).rem_euclid(m as i64)) as f64 / m as f64;
            (phase.cos(), phase.sin())
        })
        .unzip();
    let mut lags = Vec::new();
    for l in 0..m {
        let r = l as f64 * h;
        let g = (a * increment_kernel(t, big_t, r)).exp_m1();
        if g == 0.0 {
            break;
        }
        lags.push(h * h * (a * bm_covariance(t, r)).exp() * g);
    }
    let (mut rr, mut ii, mut ri) = (0.0, 0.0, 0.0);
    for j in 0..m {
        for (l, g) in lags.iter().enumerate() {
            if l == 0 {
                rr += g * cos[j] * cos[j];
                ii += g * sin[j] * sin[j];
                ri += g * cos[j] * sin[j];
            } else if j + l < m {
                let k = j + l;
                rr += 2.0 * g * cos[j] * cos[k];
                ii += 2.0 * g * sin[j] * sin[k];
                ri += g * (cos[j] * sin[k] + cos[k] * sin[j]);
            }
        }
    }
    let scale = (n.unsigned_abs() as f64).powf(1.0 - a);
    Ok(VarianceSplit {
        real: scale * rr,
        imag: scale * ii,
        cross: scale * ri,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn kernel_values() {
        assert!((bm_covariance(std::f64::consts::E, 0.0) - 2.0).abs() < 1e-15);
        assert!((bm_covariance(4.0, 0.25) - 4f64.ln()).abs() < 1e-15);
        assert!((bm_covariance(10.0, 0.5) - 2f64.ln()).abs() < 1e-15);
        assert!((increment_covariance(2.0, 4.0, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(increment_covariance(2.0, 4.0, 0.5).unwrap(), 0.0);
        let lim = increment_covariance(2.0, 1e6, 0.25).unwrap();
        assert!((lim - (2f64.ln() - 0.5)).abs() < 1e-5, "{lim}");
        assert!(matches!(increment_covariance(4.0, 2.0, 0.1), Err(GmcError::Ordering { .. })));
    }

    #[test]
    fn bm_sampler_is_reproducible() {
        let g = GridSpec::unit_interval(256).unwrap();
        let a = sample_bm_field(8.0, g, &mut rng_from_seed(3)).unwrap();
        let b = sample_bm_field(8.0, g, &mut rng_from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert!(sample_bm_field(8.0, GridSpec::circle(256).unwrap(), &mut rng_from_seed(3)).is_err());
    }

    #[test]
    fn bm_variance() {
        let g = GridSpec::unit_interval(1024).unwrap();
        let mut s = BmSampler::new(8.0, g).unwrap();
        let mut rng = rng_from_seed(4);
        let sq: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng).values[123].powi(2)).collect();
        let est = EstimateReport::from_samples(&sq);
        assert!(est.within(8f64.ln() + 1.0, 3.0), "{est:?}");
    }

    #[test]
    fn pair_sums_to_fine_scale() {
        let g = GridSpec::unit_interval(256).unwrap();
        let mut s = BmPairSampler::new(g, 8.0, 64.0).unwrap();
        let lag = 3;
        let target = bm_covariance(64.0, lag as f64 * g.spacing());
        let prods: Vec<f64> = (0..50_000)
            .map(|i| {
                let f = s.sample(i).fine();
                f.values[10] * f.values[10 + lag]
            })
            .collect();
        let est = EstimateReport::from_samples(&prods);
        assert!(est.within(target, 3.0), "{est:?} vs {target}");
    }

    #[test]
    fn zero_gamma_coefficients() {
        let g = GridSpec::unit_interval(64).unwrap();
        let f = sample_bm_field(4.0, g, &mut rng_from_seed(1)).unwrap();
        assert!((toy_z_n(&f, 0.0, 0).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(toy_z_n(&f, 0.0, 5).unwrap().norm() < 1e-14);
        assert!(conditional_projection(&f, 0.0, 3).unwrap().norm() < 1e-14);
        assert!(matches!(toy_z_n(&f, 0.5, 33), Err(GmcError::Nyquist { .. })));
        let z = toy_z_n(&f, 0.5, 7).unwrap();
        assert_eq!(toy_z_n(&f, 0.5, -7).unwrap(), z.conj());
    }

    #[test]
    fn sigma_limit_values() {
        assert_eq!(sigma_a_limit(0.0, 8.0).unwrap().value, 0.0);
        let k = crate::integrals::kappa(0.5).unwrap().value;
        let v: Vec<f64> = [8.0, 32.0, 128.0]
            .iter()
            .map(|&a| sigma_a_limit(0.5, a).unwrap().value)
            .collect();
        assert!((v[0] - 0.235_122).abs() < 1e-5, "{v:?}");
        assert!((v[0] - k).abs() > (v[1] - k).abs() && (v[1] - k).abs() > (v[2] - k).abs());
        assert!((v[2] - k).abs() < 0.02);
    }

    #[test]
    fn sigma_integrand_odd_part_vanishes() {
        let (a, cut) = (0.25, 8.0);
        let f = |u: f64| {
            let r = u.abs();
            (TAU * u).sin() * (r.powf(-a) - a.exp() * (-a * r / cut).exp() / cut.powf(a))
        };
        let pos = adaptive_gk(f, 1e-3, cut, 1e-14, 1e-13, 2000).value;
        let neg = adaptive_gk(f, -cut, -1e-3, 1e-14, 1e-13, 2000).value;
        assert!((pos + neg).abs() < 1e-10);
    }

    #[test]
    fn projection_moment_values() {
        // γ = 0: sin(2πA)/π
        let v = projection_second_moment(0.0, 8.0).unwrap().value;
        assert!(v.abs() < 1e-12);
        let v = projection_second_moment(0.0, 8.25).unwrap().value;
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        let expected = [
            (0.1, [5.68e-4, 1.237e-4, 2.69e-5]),
            (0.25, [1.20766e-3, 2.1366e-4, 3.777e-5]),
            (0.4, [1.6433e-3, 2.3616e-4, 3.391e-5]),
        ];
        for (gsq, vals) in expected {
            let got: Vec<f64> = [8.0, 32.0, 128.0]
                .iter()
                .map(|&a| projection_second_moment(f64::sqrt(gsq), a).unwrap().value)
                .collect();
            for (g, e) in got.iter().zip(vals) {
                assert!(((g - e) / e).abs() < 5e-3, "γ² = {gsq}: {got:?}");
            }
            assert!(got[0] > got[1] && got[1] > got[2]);
        }
    }

    #[test]
    fn finite_n_projection_moment() {
        let v = projection_second_moment_finite(0.5, 256, 8.0).unwrap().value;
        assert!((v - 0.001_309_3).abs() < 2e-7, "{v}");
        let g = GridSpec::unit_interval(4096).unwrap();
        let d = projection_second_moment_discrete(0.5, 256, 32.0, &g).unwrap();
        assert!((d - 0.001_326_2).abs() < 2e-7, "{d}");
    }

    #[test]
    fn continuum_and_discrete_moments_agree_when_resolved() {
        let g = GridSpec::unit_interval(4096).unwrap();
        let c = toy_second_moment(0.5, 16, 64.0).unwrap().value;
        let d = toy_second_moment_discrete(0.5, 16, 64.0, &g).unwrap();
        assert!(((c - d) / c).abs() < 2e-3, "{c} vs {d}");
    }

    #[test]
    fn increment_split_satisfies_pythagoras() {
        let g = GridSpec::unit_interval(1024).unwrap();
        let (gamma, n, t, big_t) = (0.5, 64, 8.0, 1024.0);
        let split = increment_split_discrete(gamma, n, t, big_t, &g).unwrap();
        let scale = (n as f64).powf(1.0 - gamma * gamma);
        let z = scale * toy_second_moment_discrete(gamma, n as u64, big_t, &g).unwrap();
        let p = projection_second_moment_discrete(gamma, n as u64, t, &g).unwrap();
        assert!((split.total() - (z - p)).abs() < 1e-12 * z, "{split:?} vs {}", z - p);
        assert!(split.cross.abs() < 1e-3 * split.total());
    }

    #[test]
    fn inner_mc_matches_exact_split() {
        let g = GridSpec::unit_interval(512).unwrap();
        let (t, big_t) = (4.0, 512.0);
        let mut s = BmPairSampler::new(g, t, big_t).unwrap();
        let pair = s.sample(77);
        let exact = conditional_variance_split_exact(&pair.coarse, 0.5, 16, t, big_t).unwrap();
        let (_, r) = conditional_variance_split(&mut s, &pair, 77, 0.5, 16, 20_000).unwrap();
        assert!(r[0].within(exact.real, 4.0), "{:?} vs {exact:?}", r[0]);
        assert!(r[1].within(exact.imag, 4.0), "{:?} vs {exact:?}", r[1]);
        assert!(r[2].within(exact.cross, 4.0), "{:?} vs {exact:?}", r[2]);
        let zero = conditional_variance_split_exact(&pair.coarse, 0.0, 16, t, big_t).unwrap();
        assert_eq!(zero.total(), 0.0);
    }
}
