//! Folded normal moments and the inverse mean map.
//!
//! If `R ~ N(mu, sigma^2)` then `T = |R|` follows a folded normal
//! distribution. Its mean
//!
//! ```text
//! f(mu, sigma) = sigma * sqrt(2/pi) * exp(-mu^2 / (2 sigma^2))
//!                + mu * (2 Phi(mu/sigma) - 1)
//! ```
//!
//! is what isotonic regression on `|r|` actually estimates, so recovering
//! the signal requires inverting `f` in `mu`. For fixed `sigma > 0`, `f` is
//! strictly increasing on `mu > 0` with derivative `2 Phi(mu/sigma) - 1`,
//! satisfies `max(0, mu) <= f(mu, sigma)` and `f(mu, sigma)^2 <= mu^2 +
//! sigma^2`, and is 1-Lipschitz. Those bounds also pin the inverse inside
//! the bracket `[max(eta, u - sigma), u]`, which is why plain bisection is
//! enough.

use crate::error::{Error, Result};
use crate::norm;

/// Parameters of one folded-normal observation: signal level `mu` and
/// noise scale `sigma`, in data units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedParams {
    pub mu: f64,
    pub sigma: f64,
}

impl FoldedParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::NonFinite);
        }
        Ok(Self { mu, sigma })
    }

    fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

/// Numerical budgets for the normal CDF and for inverting the folded mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalAccuracy {
    /// Absolute error budget for the standard normal CDF. The built-in
    /// kernel is accurate to ~1e-16, comfortably under the default.
    pub phi_abs_tol: f64,
    /// Relative tolerance for the inverse-mean root find: the returned
    /// `mu` satisfies `|f(mu, sigma) - u| <= inverse_rel_tol * max(1, u)`.
    pub inverse_rel_tol: f64,
    /// Iteration cap for the bisection.
    pub max_iters: usize,
}

impl Default for EvalAccuracy {
    fn default() -> Self {
        Self {
            phi_abs_tol: 1e-12,
            inverse_rel_tol: 1e-10,
            max_iters: 200,
        }
    }
}

impl EvalAccuracy {
    pub fn validate(&self) -> Result<()> {
        let good = |t: f64| t.is_finite() && t > 0.0;
        if !good(self.phi_abs_tol) || !good(self.inverse_rel_tol) || self.max_iters == 0 {
            return Err(Error::InvalidConfig(
                "tolerances must be positive and max_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}

const SQRT_2_OVER_PI: f64 = 0.7978845608028654;

#[inline]
pub(crate) fn mean_unchecked(mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return mu.abs();
    }
    let z = mu / sigma;
    let f = sigma * SQRT_2_OVER_PI * (-0.5 * z * z).exp() + mu * norm::two_cdf_minus_one(z);
    // f >= |mu| holds exactly in the reals; rounding can undershoot by an
    // ulp when the exp term has fully decayed.
    f.max(mu.abs())
}

/// Mean of `|N(mu, sigma^2)|`. At `sigma = 0` this is the limit `|mu|`.
pub fn folded_mean(p: FoldedParams) -> Result<f64> {
    p.validate()?;
    Ok(mean_unchecked(p.mu, p.sigma))
}

/// Variance of `|N(mu, sigma^2)|`: `mu^2 + sigma^2 - f(mu, sigma)^2`.
///
/// Lies in `[sigma^2 (1 - 2/pi), sigma^2]` for `mu >= 0`.
pub fn folded_var(p: FoldedParams) -> Result<f64> {
    p.validate()?;
    let f = mean_unchecked(p.mu, p.sigma);
    let g = p.mu * p.mu + p.sigma * p.sigma - f * f;
    // g ∈ [0, sigma^2] mathematically; rounding can spill over by an ulp
    // when mu/sigma is extreme.
    Ok(g.clamp(0.0, p.sigma * p.sigma))
}

/// Variance of the squared observation: `Var(T^2) = 4 mu^2 sigma^2 + 2 sigma^4`.
pub fn folded_square_var(p: FoldedParams) -> Result<f64> {
    p.validate()?;
    let s2 = p.sigma * p.sigma;
    Ok(4.0 * p.mu * p.mu * s2 + 2.0 * s2 * s2)
}

/// Derivative of the folded mean in `mu`: `2 Phi(mu/sigma) - 1`.
pub fn folded_mean_dmu(p: FoldedParams) -> Result<f64> {
    p.validate()?;
    if p.sigma == 0.0 {
        return Err(Error::SigmaZero);
    }
    Ok(norm::two_cdf_minus_one(p.mu / p.sigma))
}

/// Inverse of `mu -> folded_mean(mu, sigma)` on `mu >= eta`, by bisection
/// over `[max(eta, u - sigma), u]`.
///
/// Callers are expected to clamp `u` to at least `folded_mean(eta, sigma)`
/// first; values below that (beyond the tolerance) are out of domain.
/// At `sigma = 0` the map is the identity on `u >= eta`.
pub fn folded_mean_inverse(u: f64, sigma: f64, eta: f64, acc: &EvalAccuracy) -> Result<f64> {
    acc.validate()?;
    if !u.is_finite() || !sigma.is_finite() || !eta.is_finite() || sigma < 0.0 || eta <= 0.0 {
        return Err(Error::NonFinite);
    }
    let tol = acc.inverse_rel_tol * u.abs().max(1.0);
    if sigma == 0.0 {
        if u < eta - tol {
            return Err(Error::OutOfDomain {
                value: u,
                floor_mean: eta,
            });
        }
        return Ok(u.max(eta));
    }

    let f_eta = mean_unchecked(eta, sigma);
    if u < f_eta - tol {
        return Err(Error::OutOfDomain {
            value: u,
            floor_mean: f_eta,
        });
    }
    if u <= f_eta {
        return Ok(eta);
    }

    // f(mu) >= mu puts the root at or below u; f(mu)^2 <= mu^2 + sigma^2
    // puts it at or above u - sigma. Bisect until the bracket is narrower
    // than the tolerance: f is 1-Lipschitz, so the midpoint then satisfies
    // the residual contract, and the mu error itself is within tol as well.
    let mut lo = (u - sigma).max(eta);
    let mut hi = u;
    for _ in 0..acc.max_iters {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // interval exhausted at f64 resolution
        }
        if mean_unchecked(mid, sigma) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let residual = (mean_unchecked(mid, sigma) - u).abs();
    if residual <= tol {
        Ok(mid)
    } else {
        Err(Error::NoConvergence {
            iters: acc.max_iters,
            residual,
        })
    }
}

/// `x phi(x) / (2 Phi(x) - 1)`, extended by its limit 1/2 at x = 0.
///
/// Strictly decreasing on `x > 0` and bounded by 1/2, which is what makes
/// the moment-matching objective strictly increasing away from zero.
pub fn m_ratio(x: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    x * norm::pdf(x) / norm::two_cdf_minus_one(x)
}

/// Lower bound on the slope of the moment-matching objective:
/// `J(sigma) = sigma * (1/2 - m_ratio(eta/sigma))`, with `J(0) = 0`.
///
/// Positive for every `sigma > 0` when `eta > 0`.
pub fn j_sigma(sigma: f64, eta: f64) -> Result<f64> {
    if !sigma.is_finite() || !eta.is_finite() || sigma < 0.0 || eta <= 0.0 {
        return Err(Error::NonFinite);
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(sigma * (0.5 - m_ratio(eta / sigma)))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // reference values keep their 40-digit form
mod tests {
    use super::*;

    fn p(mu: f64, sigma: f64) -> FoldedParams {
        FoldedParams { mu, sigma }
    }

    #[test]
    fn mean_at_zero_mu_is_sqrt_two_over_pi() {
        let v = folded_mean(p(0.0, 1.0)).unwrap();
        assert!((v - 0.7978845608028653558798921198687637369517_f64).abs() < 1e-15);
    }

    #[test]
    fn mean_with_no_noise_is_abs_mu() {
        assert_eq!(folded_mean(p(2.0, 0.0)).unwrap(), 2.0);
        assert_eq!(folded_mean(p(-3.5, 0.0)).unwrap(), 3.5);
    }

    #[test]
    fn mean_matches_high_precision_reference() {
        // 40-digit evaluations of the closed form.
        let cases = [
            (1.0, 1.0, 1.166630941175372596766125477135197154613),
            (2.0, 1.0, 2.016981405233659275099997852155293413593),
            (3.0, 1.0, 3.000764308634095447191293816786672158219),
            (0.2, 1.0, 0.813789271726552965234522673738201805864),
            (0.5, 2.0, 1.645378792894320552005756803963236423637),
        ];
        for (mu, sigma, want) in cases {
            let got = folded_mean(p(mu, sigma)).unwrap();
            assert!(
                (got - want).abs() < 1e-14,
                "f({mu},{sigma}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn mean_bounds_hold_on_grid() {
        for i in 0..50 {
            let mu = i as f64 * 0.25;
            for j in 1..40 {
                let sigma = j as f64 * 0.2;
                let f = folded_mean(p(mu, sigma)).unwrap();
                assert!(f >= mu.max(0.0), "f({mu},{sigma}) = {f} below mu");
                assert!(
                    f * f <= mu * mu + sigma * sigma + 1e-12,
                    "f({mu},{sigma})^2 = {} above mu^2+sigma^2",
                    f * f
                );
            }
        }
    }

    #[test]
    fn mean_is_strictly_increasing_in_mu() {
        for j in 1..=10 {
            let sigma = j as f64 * 0.3;
            let mut prev = folded_mean(p(1e-3, sigma)).unwrap();
            for i in 1..200 {
                let mu = 1e-3 + i as f64 * 0.05;
                let cur = folded_mean(p(mu, sigma)).unwrap();
                assert!(cur > prev, "not increasing at mu={mu}, sigma={sigma}");
                prev = cur;
            }
        }
    }

    #[test]
    fn var_trivial_cases() {
        let v = folded_var(p(0.0, 1.0)).unwrap();
        assert!((v - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-15);
        assert_eq!(folded_var(p(1.0, 0.0)).unwrap(), 0.0);
        // far from the fold the variance is that of the unfolded normal
        let far = folded_var(p(10.0, 1.0)).unwrap();
        assert!((far - 1.0).abs() < 1e-6);
        // reference value at a mid-range point
        let mid = folded_var(p(0.3, 0.7)).unwrap();
        assert!((mid - 0.209069221272559279921936718225233602488).abs() < 1e-14);
    }

    #[test]
    fn var_stays_within_range() {
        for i in 0..=40 {
            let mu = i as f64 * 0.5;
            for j in 0..=20 {
                let sigma = j as f64 * 0.4;
                let g = folded_var(p(mu, sigma)).unwrap();
                assert!(g >= 0.0 && g <= sigma * sigma + 1e-12);
                if mu > 0.0 && sigma > 0.0 {
                    let at_zero = sigma * sigma * (1.0 - 2.0 / std::f64::consts::PI);
                    assert!(g >= at_zero - 1e-12, "g({mu},{sigma}) below g(0,{sigma})");
                }
            }
        }
    }

    #[test]
    fn square_var_matches_formula() {
        assert_eq!(folded_square_var(p(0.0, 1.0)).unwrap(), 2.0);
        assert_eq!(folded_square_var(p(1.0, 1.0)).unwrap(), 6.0);
        assert_eq!(folded_square_var(p(5.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn dmu_reference_and_range() {
        assert_eq!(folded_mean_dmu(p(0.0, 1.0)).unwrap(), 0.0);
        let d = folded_mean_dmu(p(1.0, 1.0)).unwrap();
        assert!((d - 0.6826894921370858971704650912640758449558).abs() < 1e-15);
        assert!(matches!(folded_mean_dmu(p(1.0, 0.0)), Err(Error::SigmaZero)));
        for i in -20..=20 {
            let mu = i as f64 * 0.5;
            let d = folded_mean_dmu(p(mu, 1.3)).unwrap();
            assert!(d > -1.0 && d < 1.0);
            if mu > 0.0 {
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn dmu_matches_central_differences() {
        let h = 1e-5;
        for i in 1..=60 {
            let mu = i as f64 * 0.1;
            for j in 1..=8 {
                let sigma = j as f64 * 0.5;
                let d = folded_mean_dmu(p(mu, sigma)).unwrap();
                let fd = (folded_mean(p(mu + h, sigma)).unwrap()
                    - folded_mean(p(mu - h, sigma)).unwrap())
                    / (2.0 * h);
                assert!(
                    (d - fd).abs() < 1e-6,
                    "dmu({mu},{sigma}): analytic {d}, fd {fd}"
                );
            }
        }
    }

    #[test]
    fn inverse_roundtrips() {
        let acc = EvalAccuracy::default();
        let u = folded_mean(p(2.0, 1.0)).unwrap();
        let mu = folded_mean_inverse(u, 1.0, 0.2, &acc).unwrap();
        assert!((mu - 2.0).abs() < 1e-9);

        // boundary roundtrip lands exactly on the floor
        let u = folded_mean(p(0.2, 1.0)).unwrap();
        let mu = folded_mean_inverse(u, 1.0, 0.2, &acc).unwrap();
        assert!((mu - 0.2).abs() < 1e-9);
    }

    #[test]
    fn inverse_matches_grid_scan_oracle() {
        // Independent check for f(mu, 0.5) = 1.1: scan mu over [0.2, 1.1]
        // at 1e-6 steps and take the closest grid point.
        let acc = EvalAccuracy::default();
        let (u, sigma, eta) = (1.1, 0.5, 0.2);
        let mut best = eta;
        let mut best_err = f64::INFINITY;
        let steps = ((u - eta) / 1e-6) as usize;
        for k in 0..=steps {
            let mu = eta + k as f64 * 1e-6;
            let err = (mean_unchecked(mu, sigma) - u).abs();
            if err < best_err {
                best_err = err;
                best = mu;
            }
        }
        let got = folded_mean_inverse(u, sigma, eta, &acc).unwrap();
        assert!((got - best).abs() < 2e-6, "bisection {got}, scan {best}");
        // frozen 40-digit reference for the same root
        assert!((got - 1.094971353227620914015311708332788597249).abs() < 1e-9);
    }

    #[test]
    fn inverse_identity_at_sigma_zero() {
        let acc = EvalAccuracy::default();
        assert_eq!(folded_mean_inverse(0.7, 0.0, 0.2, &acc).unwrap(), 0.7);
        assert!(folded_mean_inverse(0.1, 0.0, 0.2, &acc).is_err());
    }

    #[test]
    fn inverse_rejects_values_below_floor_mean() {
        let acc = EvalAccuracy::default();
        let f_eta = folded_mean(p(0.2, 1.0)).unwrap();
        let err = folded_mean_inverse(f_eta - 0.05, 1.0, 0.2, &acc);
        assert!(matches!(err, Err(Error::OutOfDomain { .. })));
        // within tolerance of the floor mean clamps to eta
        let near = folded_mean_inverse(f_eta - 1e-13, 1.0, 0.2, &acc).unwrap();
        assert_eq!(near, 0.2);
    }

    #[test]
    fn m_ratio_bounded_by_half_and_decreasing() {
        assert_eq!(m_ratio(0.0), 0.5);
        let mut prev = 0.5;
        for i in 1..=1000 {
            let x = i as f64 * 0.01;
            let m = m_ratio(x);
            assert!(m < 0.5, "m_ratio({x}) = {m} not below 1/2");
            assert!(m < prev, "m_ratio not decreasing at {x}");
            assert!(m > 0.0);
            prev = m;
        }
        // limit from the right matches the x = 0 extension
        assert!((m_ratio(1e-9) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn j_sigma_reference_values() {
        assert_eq!(j_sigma(0.0, 0.2).unwrap(), 0.0);
        let j = j_sigma(1.0, 0.2).unwrap();
        assert!(j > 0.0 && j < 0.5);
        assert!((j - 0.006631179015483806132912815851421684877439).abs() < 1e-15);
        let j_half = j_sigma(0.5, 0.2).unwrap();
        assert!((j_half - 0.01305107864081462202469165052928136337958).abs() < 1e-15);
    }

    #[test]
    fn j_sigma_monotone_bracket_bound() {
        // min over [s1, s2] of J is at least s1 * (1/2 - m_ratio(eta/s2)).
        let eta = 0.2;
        let brackets = [(0.1, 0.5), (0.5, 2.0), (1.0, 5.0), (0.05, 0.2)];
        for (s1, s2) in brackets {
            let bound = s1 * (0.5 - m_ratio(eta / s2));
            assert!(bound > 0.0);
            let mut min_j = f64::INFINITY;
            for k in 0..=400 {
                let s = s1 + (s2 - s1) * k as f64 / 400.0;
                min_j = min_j.min(j_sigma(s, eta).unwrap());
            }
            assert!(
                min_j >= bound - 1e-12,
                "bracket [{s1},{s2}]: min J {min_j} < bound {bound}"
            );
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        assert!(folded_mean(p(f64::NAN, 1.0)).is_err());
        assert!(folded_mean(p(1.0, f64::INFINITY)).is_err());
        assert!(folded_var(p(1.0, -1.0)).is_err());
        assert!(j_sigma(1.0, 0.0).is_err());
        assert!(j_sigma(f64::NAN, 0.2).is_err());
    }
}
