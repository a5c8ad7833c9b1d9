use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

use super::report::{TestMethod, TestReport};
use crate::error::{GmcError, Result};
use crate::rng::{rng_from_seed, substream};

pub const DEFAULT_PERMUTATIONS: usize = 1000;

/// Condensed upper triangle of the pooled distance matrix.
struct PooledDistances {
    n: usize,
    d: Vec<f64>,
    total: f64,
}

impl PooledDistances {
    fn new(pooled: &[Complex64]) -> Self {
        let n = pooled.len();
        let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                d.push((pooled[i] - pooled[j]).norm());
            }
        }
        let total = d.iter().sum();
        PooledDistances { n, d, total }
    }

    /// Within-group sums for a labelling (`true` = first sample).
    fn within(&self, first: &[bool]) -> (f64, f64) {
        let (mut aa, mut bb) = (0.0, 0.0);
        let mut k = 0;
        for i in 0..self.n {
            let li = first[i];
            let row = &self.d[k..k + self.n - i - 1];
            k += row.len();
            for (dj, &lj) in row.iter().zip(&first[i + 1..]) {
                if li && lj {
                    aa += dj;
                } else if !li && !lj {
                    bb += dj;
                }
            }
        }
        (aa, bb)
    }

    /// `nm/(n+m) · (2 E|X−Y| − E|X−X'| − E|Y−Y'|)` with V-statistic means.
    fn statistic(&self, first: &[bool], na: usize) -> f64 {
        let nb = self.n - na;
        let (aa, bb) = self.within(first);
        let ab = self.total - aa - bb;
        let (fa, fb) = (na as f64, nb as f64);
        let cross = 2.0 * ab / (fa * fb);
        let e = cross - 2.0 * aa / (fa * fa) - 2.0 * bb / (fb * fb);
        // below the rounding floor of the subtraction the samples coincide
        if e.abs() <= 1e-13 * cross {
            return 0.0;
        }
        fa * fb / (fa + fb) * e
    }
}

/// Two-sample energy-distance test on complex samples with a permutation
/// p-value `(1 + #{T_π ≥ T}) / (1 + B)`. Permutation `k` draws from its own
/// stream derived from `seed`, so the result does not depend on scheduling.
pub fn energy_distance_test(
    a: &[Complex64],
    b: &[Complex64],
    n_permutations: usize,
    seed: u64,
) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(GmcError::Input("energy test needs two nonempty samples".into()));
    }
    let pooled: Vec<Complex64> = a.iter().chain(b).copied().collect();
    let dist = PooledDistances::new(&pooled);
    let labels: Vec<bool> = (0..pooled.len()).map(|i| i < a.len()).collect();
    let observed = dist.statistic(&labels, a.len());
    let exceed: usize = (0..n_permutations)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(substream(seed, k as u64));
            let mut perm = labels.clone();
            perm.shuffle(&mut rng);
            usize::from(dist.statistic(&perm, a.len()) >= observed)
        })
        .sum();
    Ok(TestReport {
        statistic: observed.max(0.0),
        p_value: (1 + exceed) as f64 / (1 + n_permutations) as f64,
        method: TestMethod::Energy,
        n_permutations,
        excluded: 0,
    })
}

/// Asymptotic Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} e^{−2j²λ²}`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-300 || term < 1e-17 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction of the effective size).
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(GmcError::Input("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(GmcError::Input("KS test sample contains NaN".into()));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    Ok(TestReport {
        statistic: d,
        p_value: kolmogorov_survival((en + 0.12 + 0.11 / en) * d),
        method: TestMethod::Ks,
        n_permutations: 0,
        excluded: 0,
    })
}

/// Chi-square test of uniformity of `arg z` over `bins` equal sectors.
/// Exact zeros have no phase and are excluded.
pub fn phase_uniformity_test(sample: &[Complex64], bins: usize) -> Result<TestReport> {
    if bins < 4 {
        return Err(GmcError::Input(format!("need at least 4 bins, got {bins}")));
    }
    let mut counts = vec![0usize; bins];
    let mut excluded = 0;
    for z in sample {
        if z.re == 0.0 && z.im == 0.0 {
            excluded += 1;
            continue;
        }
        let u = (z.arg() + PI) / (2.0 * PI);
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let used = sample.len() - excluded;
    if used == 0 {
        return Err(GmcError::Input("phase test has no nonzero observations".into()));
    }
    let expected = used as f64 / bins as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let chi = ChiSquared::new((bins - 1) as f64).map_err(|e| GmcError::Numeric(e.to_string()))?;
    Ok(TestReport {
        statistic,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
        method: TestMethod::Chi2Phase,
        n_permutations: 0,
        excluded,
    })
}
