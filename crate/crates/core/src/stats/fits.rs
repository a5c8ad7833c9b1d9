use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::report::EstimateReport;
use crate::error::{GmcError, Result};

/// OLS slope of `ln value` on `ln n` with an HC1 (heteroskedasticity-robust)
/// standard error.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<EstimateReport> {
    if points.len() < 3 {
        return Err(GmcError::Input(format!(
            "a log-log fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, v) in points {
        if !(n > 0.0) || !(v > 0.0) {
            return Err(GmcError::Domain(format!(
                "log-log fit needs positive n and value, got ({n}, {v})"
            )));
        }
        xs.push(n.ln());
        ys.push(v.ln());
    }
    let k = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / k;
    let ym = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(GmcError::Input("log-log fit needs distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let meat: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            (x - xm).powi(2) * e * e
        })
        .sum();
    let var = k / (k - 2.0) * meat / (sxx * sxx);
    Ok(EstimateReport::new(slope, var.sqrt(), points.len()))
}

/// Monte-Carlo estimates of `E|c_n|⁴` along a list of frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentCurve {
    pub gamma_sq: f64,
    pub points: Vec<(u64, EstimateReport)>,
    /// `None` when some estimate is not positive (e.g. at γ = 0).
    pub slope: Option<EstimateReport>,
    /// Frequencies whose SE exceeds 30% of the estimate.
    pub flagged: Vec<u64>,
}

impl FourthMomentCurve {
    /// `E|c_n|⁴ / E|c_{2n}|⁴` for consecutive dyadic frequencies present in the curve.
    pub fn dyadic_ratios(&self) -> Vec<(u64, f64)> {
        self.points
            .iter()
            .filter_map(|(n, r)| {
                let next = self.points.iter().find(|(m, _)| *m == 2 * n)?;
                Some((*n, r.value / next.1.value))
            })
            .collect()
    }
}

/// Per-frequency fourth moments and their log-log slope. `samples[i]` holds
/// one coefficient per replica at frequency `samples[i].0`.
pub fn fourth_moment_curve(samples: &[(u64, Vec<Complex64>)], gamma_sq: f64) -> Result<FourthMomentCurve> {
    if !(0.0..0.5).contains(&gamma_sq) {
        return Err(GmcError::Regime(format!(
            "fourth-moment bound holds for γ² < 1/2, got {gamma_sq}"
        )));
    }
    let mut points = Vec::with_capacity(samples.len());
    let mut flagged = Vec::new();
    for (n, cs) in samples {
        let fourth: Vec<f64> = cs.iter().map(|c| c.norm_sqr().powi(2)).collect();
        let r = EstimateReport::from_samples(&fourth);
        if !(r.std_error <= 0.3 * r.value.abs()) && r.value != 0.0 {
            flagged.push(*n);
        }
        points.push((*n, r));
    }
    let slope = if points.iter().all(|(_, r)| r.value > 0.0) && points.len() >= 3 {
        Some(loglog_slope(
            &points.iter().map(|(n, r)| (*n as f64, r.value)).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(FourthMomentCurve {
        gamma_sq,
        points,
        slope,
        flagged,
    })
}

/// `max_{n ∈ [lo, hi)} |c_n| n^β` from `c_0, c_1, …`.
pub fn block_max(coeffs: &[Complex64], beta: f64, lo: usize, hi: usize) -> f64 {
    coeffs[lo..hi.min(coeffs.len())]
        .iter()
        .enumerate()
        .map(|(i, c)| c.norm() * ((lo + i) as f64).powf(beta))
        .fold(0.0, f64::max)
}

/// Dyadic block maxima of `|c_n| n^β` across replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub gamma_sq: f64,
    pub beta: f64,
    /// Block boundaries `[lo, hi)`.
    pub blocks: Vec<(usize, usize)>,
    /// `maxima[r][b]` for replica `r` and block `b`.
    pub maxima: Vec<Vec<f64>>,
    /// Median over replicas, per block.
    pub medians: Vec<f64>,
    /// Share of replicas whose maxima never increase from one block to the next.
    pub fraction_non_increasing: f64,
    /// β lies below `(1 − 2γ²)/4`, where a uniform a.s. bound is available.
    pub quantitative: bool,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Dyadic blocks `[N, 2N)` for `N = first, 2·first, …` up to `last`.
pub fn dyadic_blocks(first: usize, last: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut n = first.max(1);
    while n <= last {
        out.push((n, 2 * n));
        n *= 2;
    }
    out
}

/// Running block maxima of `|c_n| n^β` for each replica; `replicas[r]` holds
/// `c_0, c_1, …` of one replica.
pub fn envelope_decay_check(
    replicas: &[Vec<Complex64>],
    gamma_sq: f64,
    beta: f64,
    blocks: &[(usize, usize)],
) -> Result<EnvelopeCheck> {
    if blocks.is_empty() {
        return Err(GmcError::Input("need at least one block".into()));
    }
    for r in replicas {
        if let Some(&(_, hi)) = blocks.iter().find(|(_, hi)| *hi > r.len()) {
            return Err(GmcError::Input(format!(
                "block ends at {hi} but only {} coefficients are available",
                r.len()
            )));
        }
    }
    let maxima: Vec<Vec<f64>> = replicas
        .iter()
        .map(|c| blocks.iter().map(|&(lo, hi)| block_max(c, beta, lo, hi)).collect())
        .collect();
    let medians = (0..blocks.len())
        .map(|b| median(&maxima.iter().map(|m| m[b]).collect::<Vec<_>>()))
        .collect();
    let ok = maxima
        .iter()
        .filter(|m| m.windows(2).all(|w| w[1] <= w[0]))
        .count();
    let fraction_non_increasing = if replicas.is_empty() {
        f64::NAN
    } else {
        ok as f64 / replicas.len() as f64
    };
    Ok(EnvelopeCheck {
        gamma_sq,
        beta,
        blocks: blocks.to_vec(),
        maxima,
        medians,
        fraction_non_increasing,
        quantitative: beta < (1.0 - 2.0 * gamma_sq) / 4.0,
    })
}
