//! Brute-force references, deliberately dumb and separate from the code
//! they check: a dense grid scan instead of bisection, Monte Carlo instead
//! of closed forms, and exhaustive partition enumeration instead of
//! pool-adjacent-violators. They ship in the library (not just in test
//! code) so the CLI `verify` subcommand can rerun the equivalence suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::datagen::{self, AdversaryPolicy, AsciModel};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig};
use crate::folded::{self, FoldedParams};
use crate::isotonic;

/// A closed scan interval `[lo, hi]` with step size `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridScanSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridScanSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || !self.step.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.lo >= self.hi || self.step <= 0.0 || (self.hi - self.lo) / self.step > 1e8 {
            return Err(Error::InvalidConfig(
                "need lo < hi, step > 0, and at most 1e8 grid points".into(),
            ));
        }
        Ok(())
    }
}

/// Grid-scan root finder for the moment-matching objective: returns the
/// grid point minimizing `|G(sigma) - target|`.
///
/// Since `G` is monotone this lands within one step of the true root
/// whenever the scan interval contains it, and at the nearer endpoint
/// otherwise -- mirroring the bisection solver's clamping fallback.
pub fn root_scan(
    target: f64,
    t_hat: &[f64],
    cfg: &EstimatorConfig,
    spec: &GridScanSpec,
) -> Result<f64> {
    spec.validate()?;
    let mut best = spec.lo;
    let mut best_err = f64::INFINITY;
    let mut k = 0usize;
    loop {
        let sigma = spec.lo + k as f64 * spec.step;
        if sigma > spec.hi + 0.5 * spec.step {
            break;
        }
        let err = (estimator::big_g(sigma.min(spec.hi), t_hat, cfg)? - target).abs();
        if err < best_err {
            best_err = err;
            best = sigma.min(spec.hi);
        }
        k += 1;
    }
    Ok(best)
}

/// Sample moments of `|N(mu, sigma^2)|` with empirical standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedMoments {
    pub mean: f64,
    pub var: f64,
    /// Sample variance of the squared draws, the Monte Carlo counterpart
    /// of `Var(T^2)`.
    pub square_var: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub se_square_var: f64,
}

/// Monte Carlo reference for the folded-normal moment formulas.
pub fn mc_folded_moments(p: FoldedParams, draws: usize, seed: u64) -> Result<FoldedMoments> {
    if draws < 10_000 {
        return Err(Error::InvalidConfig("need at least 1e4 draws".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(p.mu, p.sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
    let xs: Vec<f64> = (0..draws).map(|_| noise.sample(&mut rng).abs()).collect();
    let nf = draws as f64;

    let mean = xs.iter().sum::<f64>() / nf;
    let mean_sq = xs.iter().map(|x| x * x).sum::<f64>() / nf;

    // central moments of T and of Y = T^2, for the statistics and their SEs
    let mut c2 = 0.0; // Var(T)
    let mut c4 = 0.0; // E (T - ET)^4
    let mut y2 = 0.0; // Var(Y)
    let mut y4 = 0.0; // E (Y - EY)^4
    for &x in &xs {
        let d = x - mean;
        c2 += d * d;
        c4 += d * d * d * d;
        let e = x * x - mean_sq;
        y2 += e * e;
        y4 += e * e * e * e;
    }
    c2 /= nf;
    c4 /= nf;
    y2 /= nf;
    y4 /= nf;

    Ok(FoldedMoments {
        mean,
        var: c2,
        square_var: y2,
        se_mean: (c2 / nf).sqrt(),
        // SE of a sample variance: sqrt((m4 - m2^2) / n)
        se_var: ((c4 - c2 * c2).max(0.0) / nf).sqrt(),
        se_square_var: ((y4 - y2 * y2).max(0.0) / nf).sqrt(),
    })
}

/// Exact projection onto `{floor <= x1 <= ... <= xn}` by enumerating all
/// contiguous block partitions (at most 2^(n-1)) with per-block levels set
/// to the floor-clamped block mean, keeping the feasible candidate closest
/// to `y`. Exponential, so capped at n = 10.
pub fn projection_qp_oracle(y: &[f64], floor: f64) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = y.len();
    if n > 10 {
        return Err(Error::TooLarge { limit: 10, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) || !floor.is_finite() {
        return Err(Error::NonFinite);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1u32 << (n - 1)) {
        // bit i set = block boundary between positions i and i+1
        let mut candidate = Vec::with_capacity(n);
        let mut start = 0;
        let mut feasible = true;
        let mut prev_level = f64::NEG_INFINITY;
        for i in 0..n {
            let is_boundary = i + 1 == n || mask & (1 << i) != 0;
            if is_boundary {
                let block = &y[start..=i];
                let level = (block.iter().sum::<f64>() / block.len() as f64).max(floor);
                if level < prev_level {
                    feasible = false;
                    break;
                }
                candidate.extend(std::iter::repeat_n(level, i + 1 - start));
                prev_level = level;
                start = i + 1;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = y
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        match &best {
            Some((d, _)) if *d <= dist => {}
            _ => best = Some((dist, candidate)),
        }
    }
    Ok(best.expect("full partition is always feasible").1)
}

/// Outcome of one equivalence check in [`verify`].
#[derive(Debug, Clone)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the oracle-equivalence suite at CI scale: isotonic solvers against
/// both brute-force references, the scale solver against a grid scan, and
/// the folded-normal formulas against Monte Carlo.
pub fn verify(seed: u64) -> VerifyReport {
    let mut checks = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // pava vs the max-min formula
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let fit = isotonic::pava(&y).unwrap().values;
        let oracle = isotonic::maxmin_oracle(&y).unwrap();
        for (a, b) in fit.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    checks.push(VerifyCheck {
        name: "pava vs max-min formula",
        passed: worst <= 1e-9,
        detail: format!("max abs deviation {worst:.3e} over 1000 vectors (n <= 12)"),
    });

    // floored pava vs exhaustive projection
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let floor = rng.gen_range(-1.0..1.0);
        let fit = isotonic::pava_lower_bounded(&y, floor).unwrap().values;
        let oracle = projection_qp_oracle(&y, floor).unwrap();
        for (a, b) in fit.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    checks.push(VerifyCheck {
        name: "floored pava vs exhaustive projection",
        passed: worst <= 1e-9,
        detail: format!("max abs deviation {worst:.3e} over 500 vectors (n <= 6)"),
    });

    // bisection vs grid scan for the fitted scale
    let cfg = EstimatorConfig::new(0.2);
    let mut worst: f64 = 0.0;
    let mut all_bracketed = true;
    for (i, sigma) in [0.5, 1.0, 2.0, 0.5, 1.0, 2.0].iter().enumerate() {
        let n = 800;
        let model = AsciModel::new(
            datagen::linear_signal(n, 0.2).unwrap(),
            0.2,
            *sigma,
            AdversaryPolicy::Rademacher { p: 0.5 },
        )
        .unwrap();
        let sample = datagen::generate(&model, n, seed ^ (i as u64 + 1)).unwrap();
        let t = estimator::preprocess(&sample.r).unwrap();
        let t_hat = isotonic::pava(&t).unwrap().values;
        let (sigma_hat, diag) = estimator::solve_sigma(&t, &t_hat, &cfg).unwrap();
        all_bracketed &= diag.bracket_valid;
        let target = t.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let spec = GridScanSpec {
            lo: 0.0,
            hi: target.sqrt(),
            step: 1e-3,
        };
        let scanned = root_scan(target, &t_hat, &cfg, &spec).unwrap();
        worst = worst.max((sigma_hat - scanned).abs());
    }
    checks.push(VerifyCheck {
        name: "scale solver vs grid scan",
        passed: worst <= 2e-3 && all_bracketed,
        detail: format!("max |bisection - scan| = {worst:.3e} over 6 datasets"),
    });

    // closed-form folded moments vs Monte Carlo
    let mut ok = true;
    let mut detail = String::new();
    for (i, (mu, sigma)) in [(0.0, 1.0), (1.0, 1.0), (5.0, 0.1)].iter().enumerate() {
        let p = FoldedParams {
            mu: *mu,
            sigma: *sigma,
        };
        let mc = mc_folded_moments(p, 200_000, seed ^ (0x100 + i as u64)).unwrap();
        let f = folded::folded_mean(p).unwrap();
        let g = folded::folded_var(p).unwrap();
        let vsq = folded::folded_square_var(p).unwrap();
        let fine = (mc.mean - f).abs() <= 4.0 * mc.se_mean
            && (mc.var - g).abs() <= 4.0 * mc.se_var
            && (mc.square_var - vsq).abs() <= 4.0 * mc.se_square_var;
        if !fine {
            ok = false;
            detail = format!("mismatch at (mu, sigma) = ({mu}, {sigma})");
        }
    }
    checks.push(VerifyCheck {
        name: "folded moments vs Monte Carlo",
        passed: ok,
        detail: if ok {
            "mean/var/Var(T^2) inside 4-SE bands at 3 parameter points".to_string()
        } else {
            detail
        },
    });

    VerifyReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_scan_spec_validates() {
        assert!(GridScanSpec {
            lo: 0.0,
            hi: 1.0,
            step: 1e-3
        }
        .validate()
        .is_ok());
        assert!(GridScanSpec {
            lo: 1.0,
            hi: 1.0,
            step: 1e-3
        }
        .validate()
        .is_err());
        assert!(GridScanSpec {
            lo: 0.0,
            hi: 1.0,
            step: 1e-10
        }
        .validate()
        .is_err());
    }

    #[test]
    fn root_scan_finds_constructed_fixed_point() {
        let cfg = EstimatorConfig::new(0.2);
        let t_hat = [0.9, 1.4, 1.9];
        let target = estimator::big_g(1.0, &t_hat, &cfg).unwrap();
        let spec = GridScanSpec {
            lo: 0.0,
            hi: 2.0,
            step: 1e-3,
        };
        let found = root_scan(target, &t_hat, &cfg, &spec).unwrap();
        assert!((found - 1.0).abs() <= 1e-3 + 1e-12, "found {found}");
    }

    #[test]
    fn root_scan_clamps_outside_bracket() {
        let cfg = EstimatorConfig::new(0.2);
        let t_hat = [0.9, 1.4, 1.9];
        // true root is 1.0; scanning far above it must return the lower edge
        let target = estimator::big_g(1.0, &t_hat, &cfg).unwrap();
        let spec = GridScanSpec {
            lo: 2.0,
            hi: 3.0,
            step: 1e-2,
        };
        assert_eq!(root_scan(target, &t_hat, &cfg, &spec).unwrap(), 2.0);
    }

    #[test]
    fn mc_moments_hit_known_targets() {
        let mc = mc_folded_moments(
            FoldedParams { mu: 0.0, sigma: 1.0 },
            1_000_000,
            7,
        )
        .unwrap();
        assert!((mc.mean - 0.7978845608028654).abs() < 4.0 * mc.se_mean);
        assert!((mc.square_var - 2.0).abs() < 4.0 * mc.se_square_var);

        let mc = mc_folded_moments(
            FoldedParams { mu: 1.0, sigma: 1.0 },
            1_000_000,
            8,
        )
        .unwrap();
        assert!((mc.square_var - 6.0).abs() < 4.0 * mc.se_square_var);

        let mc = mc_folded_moments(
            FoldedParams { mu: 5.0, sigma: 0.1 },
            100_000,
            9,
        )
        .unwrap();
        assert!((mc.mean - 5.0).abs() < 1e-2);
        assert!(matches!(
            mc_folded_moments(FoldedParams { mu: 0.0, sigma: 1.0 }, 10, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn qp_oracle_examples() {
        assert_eq!(
            projection_qp_oracle(&[1.0, 2.0, 3.0], 0.0).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(projection_qp_oracle(&[-1.0, 2.0], 0.0).unwrap(), vec![0.0, 2.0]);
        assert!(matches!(
            projection_qp_oracle(&[0.0; 11], 0.0),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn verify_suite_passes() {
        let report = verify(0xA5C1F17);
        for check in &report.checks {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }
}
