//! The three-step fit for sign-corrupted monotone signals.
//!
//! Step one takes absolute values (which erases the corruption pattern and
//! restores independence) and projects onto the monotone cone. Step two
//! recovers the noise scale by matching second moments: the map
//!
//! ```text
//! G(sigma) = sigma^2 + (1/n) sum_i finv(that[i] v f(eta, sigma), sigma)^2
//! ```
//!
//! is strictly increasing for `sigma > 0`, and `mean(t^2)` is sandwiched
//! between `G(0)` and `G(sqrt(mean(t^2)))` with high probability, so a
//! binary search on `[0, sqrt(mean(t^2))]` finds the matching root. Step
//! three inverts the folded mean at the fitted scale to land back on the
//! signal scale.

use crate::error::{Error, Result};
use crate::folded::{self, EvalAccuracy};
use crate::isotonic;

/// Configuration for [`fit`] and [`solve_sigma`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Known positive floor under the signal.
    pub eta: f64,
    /// Optional lower clamp on the fitted noise scale (0 disables).
    pub sigma_floor: f64,
    /// Optional upper clamp on the fitted noise scale.
    pub sigma_ceiling: Option<f64>,
    /// Bisection stops once `|G(sigma) - mean(t^2)| <= root_tol`.
    pub root_tol: f64,
    pub root_max_iters: usize,
    pub accuracy: EvalAccuracy,
}

impl EstimatorConfig {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            sigma_floor: 0.0,
            sigma_ceiling: None,
            root_tol: 1e-9,
            root_max_iters: 200,
            accuracy: EvalAccuracy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta <= 0.0 {
            return Err(Error::InvalidConfig("eta must be positive and finite".into()));
        }
        if !self.root_tol.is_finite() || self.root_tol <= 0.0 || self.root_max_iters == 0 {
            return Err(Error::InvalidConfig(
                "root_tol must be positive and root_max_iters >= 1".into(),
            ));
        }
        if !self.sigma_floor.is_finite() || self.sigma_floor < 0.0 {
            return Err(Error::InvalidConfig("sigma_floor must be >= 0".into()));
        }
        if let Some(c) = self.sigma_ceiling {
            if c.is_nan() || c < self.sigma_floor {
                return Err(Error::InvalidConfig(
                    "sigma_ceiling must be >= sigma_floor".into(),
                ));
            }
        }
        self.accuracy.validate()
    }
}

/// What the root finder saw: the bracket endpoints of the matching
/// objective, the iteration count, and the final residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootDiagnostics {
    pub g_at_zero: f64,
    pub g_at_ceiling: f64,
    pub iterations: usize,
    /// True when `G(0) <= mean(t^2) <= G(sqrt(mean(t^2)))` held, i.e. the
    /// returned scale is an interior root rather than a clamped endpoint.
    pub bracket_valid: bool,
    /// `|G(sigma_hat) - mean(t^2)|` at the returned scale.
    pub residual: f64,
}

/// Full output of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Absolute responses `t[i] = |r[i]|`.
    pub t: Vec<f64>,
    /// Isotonic fit to `t`.
    pub t_hat: Vec<f64>,
    /// Fitted noise scale.
    pub sigma_hat: f64,
    /// Final signal estimates; non-decreasing with `mu_hat[0] >= eta`.
    pub mu_hat: Vec<f64>,
    /// The step-one-only baseline `max(t_hat[i], eta)`.
    pub mu_naive: Vec<f64>,
    pub diagnostics: RootDiagnostics,
}

/// Constants for the theoretical risk envelope [`rate_bound_r_n2`] and
/// [`rate_envelope`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBoundConfig {
    /// Absolute constant in the isotonic risk bound; scale-free default 1.
    pub c2: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl Default for RateBoundConfig {
    fn default() -> Self {
        // delta and gamma put the envelope at confidence
        // 1 - 1/delta - 2/gamma^2 = 0.93.
        Self {
            c2: 1.0,
            delta: 20.0,
            gamma: 10.0,
        }
    }
}

impl RateBoundConfig {
    pub fn validate(&self) -> Result<()> {
        let good = |v: f64, min: f64| v.is_finite() && v > min;
        if !good(self.c2, 0.0) || !good(self.delta, 1.0) || !good(self.gamma, 1.0) {
            return Err(Error::InvalidConfig(
                "need c2 > 0, delta > 1, gamma > 1".into(),
            ));
        }
        Ok(())
    }
}

/// Step-one preprocessing: elementwise absolute value.
///
/// The output is invariant under any sign pattern applied to `r`, which is
/// the whole defense against the corruption.
pub fn preprocess(r: &[f64]) -> Result<Vec<f64>> {
    if r.is_empty() {
        return Err(Error::EmptyInput);
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(r.iter().map(|v| v.abs()).collect())
}

// Inverts the folded mean, reusing the previous answer for repeated inputs.
// Isotonic fits are piecewise constant, so consecutive values coincide
// exactly and the cache removes almost all bisection work.
struct InverseCache {
    last_u: f64,
    last_mu: f64,
    primed: bool,
}

impl InverseCache {
    fn new() -> Self {
        Self {
            last_u: 0.0,
            last_mu: 0.0,
            primed: false,
        }
    }

    fn invert(&mut self, u: f64, sigma: f64, eta: f64, acc: &EvalAccuracy) -> Result<f64> {
        if self.primed && u == self.last_u {
            return Ok(self.last_mu);
        }
        let mu = folded::folded_mean_inverse(u, sigma, eta, acc)?;
        self.last_u = u;
        self.last_mu = mu;
        self.primed = true;
        Ok(mu)
    }
}

/// The second-moment matching objective
/// `G(sigma) = sigma^2 + (1/n) sum finv(that[i] v f(eta, sigma), sigma)^2`.
///
/// `G(0)` reduces to `(1/n) sum (that[i] v eta)^2`; the map is
/// non-decreasing in `sigma` and strictly increasing for `sigma > 0`.
pub fn big_g(sigma: f64, t_hat: &[f64], cfg: &EstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    if t_hat.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::NonFinite);
    }
    let floor_mean = folded::folded_mean(folded::FoldedParams {
        mu: cfg.eta,
        sigma,
    })?;
    let mut cache = InverseCache::new();
    let mut sum_sq = 0.0;
    for &v in t_hat {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        let mu = cache.invert(v.max(floor_mean), sigma, cfg.eta, &cfg.accuracy)?;
        sum_sq += mu * mu;
    }
    Ok(sigma * sigma + sum_sq / t_hat.len() as f64)
}

/// Solves `G(sigma) = mean(t^2)` for the noise scale by bisection on
/// `[0, sqrt(mean(t^2))]`.
///
/// When the empirical target falls outside `[G(0), G(sqrt(mean(t^2)))]`
/// (possible at small n), the nearest endpoint is returned with
/// `bracket_valid = false` instead of an error; configured floor/ceiling
/// clamps are applied to the result either way.
pub fn solve_sigma(
    t: &[f64],
    t_hat: &[f64],
    cfg: &EstimatorConfig,
) -> Result<(f64, RootDiagnostics)> {
    cfg.validate()?;
    if t.is_empty() {
        return Err(Error::EmptyInput);
    }
    if t.len() != t_hat.len() {
        return Err(Error::LengthMismatch {
            expected: t.len(),
            got: t_hat.len(),
        });
    }
    let n = t.len() as f64;
    let target = t.iter().map(|v| v * v).sum::<f64>() / n;
    let bracket_top = target.sqrt();

    let g_at_zero = big_g(0.0, t_hat, cfg)?;
    let g_at_ceiling = big_g(bracket_top, t_hat, cfg)?;

    let clamp = |s: f64| -> f64 {
        let s = s.max(cfg.sigma_floor);
        match cfg.sigma_ceiling {
            Some(c) => s.min(c),
            None => s,
        }
    };

    if !(g_at_zero <= target && target <= g_at_ceiling) {
        let sigma_hat = clamp(if target < g_at_zero { 0.0 } else { bracket_top });
        let residual = (big_g(sigma_hat, t_hat, cfg)? - target).abs();
        return Ok((
            sigma_hat,
            RootDiagnostics {
                g_at_zero,
                g_at_ceiling,
                iterations: 0,
                bracket_valid: false,
                residual,
            },
        ));
    }

    let mut lo = 0.0;
    let mut hi = bracket_top;
    let mut best = if (g_at_zero - target).abs() <= (g_at_ceiling - target).abs() {
        (0.0, (g_at_zero - target).abs())
    } else {
        (bracket_top, (g_at_ceiling - target).abs())
    };
    let mut iterations = 0;
    while iterations < cfg.root_max_iters && best.1 > cfg.root_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let resid = big_g(mid, t_hat, cfg)? - target;
        if resid.abs() < best.1 {
            best = (mid, resid.abs());
        }
        if resid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let sigma_hat = clamp(best.0);
    let residual = if sigma_hat == best.0 {
        best.1
    } else {
        (big_g(sigma_hat, t_hat, cfg)? - target).abs()
    };
    Ok((
        sigma_hat,
        RootDiagnostics {
            g_at_zero,
            g_at_ceiling,
            iterations,
            bracket_valid: true,
            residual,
        },
    ))
}

/// Runs the full three-step pipeline on raw responses.
pub fn fit(r: &[f64], cfg: &EstimatorConfig) -> Result<FitResult> {
    cfg.validate()?;
    let t = preprocess(r)?;
    let iso = isotonic::pava(&t)?;
    let t_hat = iso.values;
    let (sigma_hat, diagnostics) = solve_sigma(&t, &t_hat, cfg)?;

    let floor_mean = folded::folded_mean(folded::FoldedParams {
        mu: cfg.eta,
        sigma: sigma_hat,
    })?;
    let mut cache = InverseCache::new();
    let mut mu_hat = Vec::with_capacity(t_hat.len());
    for &v in &t_hat {
        let mu = cache.invert(v.max(floor_mean), sigma_hat, cfg.eta, &cfg.accuracy)?;
        mu_hat.push(mu);
    }
    // The per-element inversions are each accurate to inverse_rel_tol but
    // independent, so enforce monotonicity of the output exactly.
    for i in 1..mu_hat.len() {
        if mu_hat[i] < mu_hat[i - 1] {
            mu_hat[i] = mu_hat[i - 1];
        }
    }
    let mu_naive = t_hat.iter().map(|v| v.max(cfg.eta)).collect();

    Ok(FitResult {
        t,
        t_hat,
        sigma_hat,
        mu_hat,
        mu_naive,
        diagnostics,
    })
}

/// The risk-rate quantity
/// `min[2 s^2 c^2, (27/4) ((mu_n - mu_1)/n)^(2/3) (s c)^(4/3) + 2 s^2 c^2 (1 + ln n)/n]`
/// with `s = sigma`, `c = c2`.
///
/// Non-increasing in `n`; used as a diagnostic envelope, not a pass/fail
/// threshold, since `c2` is only known to be an absolute constant.
pub fn rate_bound_r_n2(
    n: usize,
    mu_first: f64,
    mu_last: f64,
    sigma: f64,
    rb: &RateBoundConfig,
) -> Result<f64> {
    rb.validate()?;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !mu_first.is_finite() || !mu_last.is_finite() || !sigma.is_finite() {
        return Err(Error::NonFinite);
    }
    if mu_last < mu_first || sigma < 0.0 {
        return Err(Error::InvalidConfig(
            "need mu_last >= mu_first and sigma >= 0".into(),
        ));
    }
    let nf = n as f64;
    let flat = 2.0 * sigma * sigma * rb.c2 * rb.c2;
    let sloped = 6.75 * ((mu_last - mu_first) / nf).powf(2.0 / 3.0)
        * (sigma * rb.c2).powf(4.0 / 3.0)
        + flat * (1.0 + nf.ln()) / nf;
    Ok(flat.min(sloped))
}

/// High-probability MSE envelope `delta * r_n2 + gamma^2 / n`.
pub fn rate_envelope(
    n: usize,
    mu_first: f64,
    mu_last: f64,
    sigma: f64,
    rb: &RateBoundConfig,
) -> Result<f64> {
    let r = rate_bound_r_n2(n, mu_first, mu_last, sigma, rb)?;
    Ok(rb.delta * r + rb.gamma * rb.gamma / n as f64)
}
