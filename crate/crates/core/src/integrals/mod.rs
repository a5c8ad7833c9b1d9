//! Deterministic integrals that serve as oracles for the Monte-Carlo side.

pub mod quadrature;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::f64::consts::{PI, TAU};

use crate::error::{GmcError, Result};
use crate::fft::FftWorkspace;
use crate::grid::{Domain, GridSpec};
pub use quadrature::QuadratureResult;
use quadrature::{adaptive_gk, cosine_tail, power_singular, tanh_sinh};

/// Absolute accuracy requested from the κ and second-moment routines.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

fn check_gamma_sq(gamma_sq: f64) -> Result<()> {
    if !(gamma_sq >= 0.0) {
        return Err(GmcError::Domain(format!("γ² must be ≥ 0, got {gamma_sq}")));
    }
    if gamma_sq >= 1.0 {
        return Err(GmcError::Domain(format!(
            "|v|^(-γ²) is not integrable at the origin for γ² = {gamma_sq} ≥ 1"
        )));
    }
    Ok(())
}

/// `∫_0^{b} cos(ω v) v^{-a} dv` for a small `b`, with the `v^{-a}`
/// singularity integrated analytically.
pub(crate) fn singular_cosine_head(a: f64, omega: f64, b: f64) -> QuadratureResult {
    power_singular(a, 1.0, |v| -2.0 * (0.5 * omega * v).sin().powi(2), b, 1e-14)
}

/// `κ(γ) = ∫_ℝ e^{2πiv} |v|^{-γ²} dv = 2 ∫_0^∞ cos(2πv) v^{-γ²} dv`.
///
/// The head `[0, 1/4]` is integrated with tanh–sinh, the tail over half
/// periods with Wynn acceleration. `κ(0)` is returned as 0: the integral is
/// not absolutely convergent there, 0 is both the distributional value and
/// the limit `γ → 0`.
pub fn kappa(gamma: f64) -> Result<QuadratureResult> {
    let a = gamma * gamma;
    check_gamma_sq(a)?;
    if a == 0.0 {
        return Ok(QuadratureResult::exact(0.0));
    }
    let head = singular_cosine_head(a, TAU, 0.25);
    let tail = cosine_tail(|v| v.powf(-a), 0.25, 1e-11);
    let r = head.combine(tail).scale(2.0);
    Ok(QuadratureResult {
        converged: r.converged && r.abs_error_estimate < ORACLE_TOLERANCE,
        ..r
    })
}

/// `2 Γ(1−γ²) sin(πγ²/2) (2π)^{γ²−1}`, the classical cosine transform of
/// `|v|^{-γ²}`. Independent of [`kappa`].
pub fn kappa_closed_form(gamma: f64) -> Result<f64> {
    let a = gamma * gamma;
    check_gamma_sq(a)?;
    Ok(2.0 * statrs::function::gamma::gamma(1.0 - a) * (0.5 * PI * a).sin() * TAU.powf(a - 1.0))
}

/// `∫_ℝ e^{iv} |v|^{-γ²} dv = (2π)^{1−γ²} κ(γ)`: the same transform at unit
/// angular frequency. This is the constant that governs `n^{1−γ²} E|c_n|²`
/// for coefficients taken against `e^{inθ}` on `[0, 2π)`.
pub fn kappa_unit_frequency(gamma: f64) -> Result<QuadratureResult> {
    let a = gamma * gamma;
    Ok(kappa(gamma)?.scale(TAU.powf(1.0 - a)))
}

/// `E|c_n|² = 2π ∫_0^{2π} cos(nx) (2|sin(x/2)|)^{-γ²} dx` for the continuum
/// chaos on the circle.
pub fn circle_second_moment(n: u64, gamma: f64) -> Result<QuadratureResult> {
    let a = gamma * gamma;
    check_gamma_sq(a)?;
    if a == 0.0 {
        return Ok(QuadratureResult::exact(if n == 0 { TAU * TAU } else { 0.0 }));
    }
    let kernel = |x: f64| (2.0 * (0.5 * x).sin()).powf(-a);
    let nf = n as f64;
    // symmetric in x ↦ 2π − x
    let half = if n == 0 {
        power_singular(a, 1.0, |x| sinc_factor(x, a) - 1.0, PI, 1e-14)
    } else {
        // head up to the first zero of cos(nx), then one piece per half period
        let first_zero = (0.5 * PI / nf).min(PI);
        let mut total = power_singular(
            a,
            1.0,
            |x| (nf * x).cos() * sinc_factor(x, a) - 1.0,
            first_zero,
            1e-14,
        );
        let mut lo = first_zero;
        while lo < PI {
            let hi = (lo + PI / nf).min(PI);
            total = total.combine(adaptive_gk(
                |x| (nf * x).cos() * kernel(x),
                lo,
                hi,
                1e-13,
                1e-13,
                100,
            ));
            lo = hi;
        }
        total
    };
    let r = half.scale(2.0 * TAU);
    Ok(QuadratureResult {
        converged: r.converged && r.abs_error_estimate < ORACLE_TOLERANCE,
        ..r
    })
}

/// Exact `E|c_n|²`, `n = 0..=M/2`, for the chaos built from the `modes`-mode
/// field on an `M`-point circle grid: `h² M Σ_l cos(n l h) e^{γ² C_N(l h)}`.
/// Both sums are FFTs.
pub fn circle_second_moment_discrete(gamma: f64, modes: usize, grid: &GridSpec) -> Result<Vec<f64>> {
    check_gamma_sq(gamma * gamma)?;
    if grid.domain() != Domain::Circle {
        return Err(GmcError::Grid("circle second moments need a circle grid".into()));
    }
    let m = grid.points();
    if modes == 0 || modes > grid.nyquist() {
        return Err(GmcError::Aliasing { modes, points: m });
    }
    let mut fft = FftWorkspace::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (k, b) in buf.iter_mut().enumerate().take(modes + 1).skip(1) {
        *b = Complex64::new(1.0 / k as f64, 0.0);
    }
    fft.inverse(&mut buf);
    let a = gamma * gamma;
    for b in buf.iter_mut() {
        *b = Complex64::new((a * b.re).exp(), 0.0);
    }
    fft.forward(&mut buf);
    let h = grid.spacing();
    Ok(buf[..=m / 2].iter().map(|b| h * h * m as f64 * b.re).collect())
}

/// `(x / (2 sin(x/2)))^a`, smooth on `[0, π]` and equal to 1 at 0.
fn sinc_factor(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (x / (2.0 * (0.5 * x).sin())).powf(a)
    }
}

/// Stabilisation of `n^{1−γ²} E|c_n|²` along dyadic `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConstant {
    /// Value at the largest `n`.
    pub value: f64,
    pub scaled: Vec<(u64, f64)>,
    /// `|v(n_last) / v(n_prev) − 1|`.
    pub relative_change: f64,
}

pub const TAIL_CONSTANT_NS: [u64; 5] = [64, 128, 256, 512, 1024];

/// Fits the constant `C` in `E|c_n|² ≈ C n^{γ²−1}` from the quadrature
/// sequence at `n ∈ {64, …, 1024}`; stabilisation means the last two values
/// differ by less than 5%.
pub fn second_moment_tail_constant(gamma: f64) -> Result<TailConstant> {
    let a = gamma * gamma;
    if a >= 0.5 {
        return Err(GmcError::Regime(format!(
            "tail constant is only fitted for γ² < 1/2, got {a}"
        )));
    }
    let mut scaled = Vec::with_capacity(TAIL_CONSTANT_NS.len());
    for n in TAIL_CONSTANT_NS {
        let m = circle_second_moment(n, gamma)?;
        if !m.converged {
            return Err(GmcError::Numeric(format!("second moment at n = {n} did not converge")));
        }
        scaled.push((n, (n as f64).powf(1.0 - a) * m.value));
    }
    let k = scaled.len();
    let (last, prev) = (scaled[k - 1].1, scaled[k - 2].1);
    let relative_change = if last == 0.0 && prev == 0.0 {
        0.0
    } else {
        (last / prev - 1.0).abs()
    };
    if !(relative_change < 0.05) {
        return Err(GmcError::Numeric(format!(
            "n^(1−γ²) E|c_n|² has not stabilised: {relative_change:.3} relative change"
        )));
    }
    Ok(TailConstant {
        value: last,
        scaled,
        relative_change,
    })
}

/// `∫_{[−A,A]^{d−1}} Π_i |x_i|^{−u} · |Σ_i x_i|^{−u} dx` with every factor
/// capped at `δ^{−u}` (i.e. `|y|` replaced by `max(|y|, δ)`).
///
/// `δ = 0` is accepted when the uncapped integral converges,
/// `u < (d−1)/d`. The integral is computed as iterated one-dimensional
/// tanh–sinh integrals split at every point where a factor is singular or
/// kinked; on each piece the singular points are endpoints.
pub fn singular_integral(d: usize, u: f64, inner_cutoff: f64, a: f64) -> Result<QuadratureResult> {
    if !(2..=4).contains(&d) {
        return Err(GmcError::Regime(format!(
            "singular integral supports d ∈ {{2,3,4}}, got {d}"
        )));
    }
    if !(u >= 0.0) || !(a > 0.0) || !(inner_cutoff >= 0.0) {
        return Err(GmcError::Domain(format!(
            "need u ≥ 0, A > 0, δ ≥ 0 (got u = {u}, A = {a}, δ = {inner_cutoff})"
        )));
    }
    let threshold = (d - 1) as f64 / d as f64;
    if inner_cutoff == 0.0 && u >= threshold {
        return Err(GmcError::Domain(format!(
            "uncapped integral diverges for u = {u} ≥ (d−1)/d = {threshold}"
        )));
    }
    let ctx = Nested {
        vars: d - 1,
        u,
        delta: inner_cutoff,
        half_width: a,
        evaluations: Cell::new(0),
        converged: Cell::new(true),
    };
    let (value, err) = ctx.level(0, 0.0);
    Ok(QuadratureResult {
        value,
        abs_error_estimate: err,
        evaluations: ctx.evaluations.get(),
        converged: ctx.converged.get(),
    })
}

struct Nested {
    vars: usize,
    u: f64,
    delta: f64,
    half_width: f64,
    evaluations: Cell<usize>,
    converged: Cell<bool>,
}

impl Nested {
    fn cap(&self, r: f64) -> f64 {
        r.max(self.delta).powf(-self.u)
    }

    /// Integral over the variable at `depth`, previous variables summing to `s`.
    fn level(&self, depth: usize, s: f64) -> (f64, f64) {
        let a = self.half_width;
        let mut points = vec![-a, a, 0.0, -s];
        if self.delta > 0.0 {
            points.extend([self.delta, -self.delta, -s + self.delta, -s - self.delta]);
        }
        points.retain(|p| *p >= -a && *p <= a);
        points.sort_by(f64::total_cmp);
        points.dedup();

        let last = depth + 1 == self.vars;
        let (tol, max_level) = if depth == 0 { (1e-10, 10) } else { (1e-9, 7) };
        let mut total = 0.0;
        let mut err = 0.0;
        for w in points.windows(2) {
            let (p, q) = (w[0], w[1]);
            let r = tanh_sinh(
                |_, dl, dr| {
                    // distances to the singular points from the piece ends, which
                    // stay exact where the node coordinate itself has rounded
                    let own = if p >= 0.0 { p + dl } else { -q + dr };
                    let signed = if p >= -s { (p + s) + dl } else { -((-s - q) + dr) };
                    if last {
                        self.evaluations.set(self.evaluations.get() + 1);
                        self.cap(own) * self.cap(signed.abs())
                    } else {
                        self.cap(own) * self.level(depth + 1, signed).0
                    }
                },
                p,
                q,
                tol,
                max_level,
            );
            if !r.converged {
                self.converged.set(false);
            }
            total += r.value;
            err += r.abs_error_estimate;
        }
        (total, err)
    }
}
