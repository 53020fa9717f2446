//! Seeded generators for the sign-corruption model.
//!
//! A sample is built in two stages: clean responses `mu[i] + eps[i]` with
//! `eps[i] ~ N(0, sigma^2)` from a counter-seeded ChaCha stream, then a
//! sign vector from the adversary policy. Adaptive policies receive the
//! full realized clean vector before emitting signs, which is the worst
//! case the estimator has to survive. Everything is deterministic given
//! `(model, seed)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Deterministic map from the realized clean responses to a sign vector.
pub type SignRule = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// How the adversary picks signs after seeing the clean responses.
#[derive(Clone)]
pub enum AdversaryPolicy {
    /// No corruption; recovers classical isotonic regression.
    Identity,
    /// Independent signs: +1 with probability `p`, independent of the
    /// noise. `p = 0` and `p = 1` are accepted as degenerate corners.
    Rademacher { p: f64 },
    /// Signs taken from a fixed vector `gamma` with `|gamma|`
    /// non-decreasing and `|gamma[0]| >= eta`, so the corrupted responses
    /// follow the non-convex model `r[i] = gamma[i] + eps[i]`.
    SignOfGamma { gamma: Vec<f64> },
    /// Arbitrary deterministic rule over the full clean vector.
    ErrorAdaptive(SignRule),
}

impl fmt::Debug for AdversaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Rademacher { p } => write!(f, "Rademacher {{ p: {p} }}"),
            Self::SignOfGamma { gamma } => {
                write!(f, "SignOfGamma {{ n: {} }}", gamma.len())
            }
            Self::ErrorAdaptive(_) => write!(f, "ErrorAdaptive(..)"),
        }
    }
}

impl AdversaryPolicy {
    fn digest(&self) -> String {
        match self {
            Self::Identity => "identity".to_string(),
            Self::Rademacher { p } => format!("rademacher(p={p})"),
            Self::SignOfGamma { .. } => "sign_of_gamma".to_string(),
            Self::ErrorAdaptive(_) => "error_adaptive".to_string(),
        }
    }
}

/// The full generating process: signal, floor, noise scale, adversary.
#[derive(Debug, Clone)]
pub struct AsciModel {
    pub mu: Vec<f64>,
    pub eta: f64,
    pub sigma: f64,
    pub adversary: AdversaryPolicy,
}

impl AsciModel {
    /// Validates `0 < eta <= mu[0] <= ... <= mu[n-1]` and `sigma >= 0`.
    pub fn new(mu: Vec<f64>, eta: f64, sigma: f64, adversary: AdversaryPolicy) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::EmptyInput);
        }
        if mu.iter().any(|v| !v.is_finite()) || !eta.is_finite() || !sigma.is_finite() {
            return Err(Error::NonFinite);
        }
        if eta <= 0.0 || mu[0] < eta || sigma < 0.0 {
            return Err(Error::InvalidConfig(
                "need 0 < eta <= mu[0] and sigma >= 0".into(),
            ));
        }
        if mu.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("mu must be non-decreasing".into()));
        }
        if let AdversaryPolicy::Rademacher { p } = adversary {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig("Rademacher p must be in [0, 1]".into()));
            }
        }
        if let AdversaryPolicy::SignOfGamma { ref gamma } = adversary {
            if gamma.len() != mu.len() {
                return Err(Error::LengthMismatch {
                    expected: mu.len(),
                    got: gamma.len(),
                });
            }
            if gamma[0].abs() < eta {
                return Err(Error::InvalidConfig("|gamma[0]| must be >= eta".into()));
            }
            if gamma.windows(2).any(|w| w[0].abs() > w[1].abs()) {
                return Err(Error::InvalidConfig(
                    "|gamma| must be non-decreasing".into(),
                ));
            }
        }
        Ok(Self {
            mu,
            eta,
            sigma,
            adversary,
        })
    }

    /// The non-convex special case `r[i] = gamma[i] + eps[i]`: the signal
    /// is `|gamma|` and the sign pattern is `sgn(gamma)`.
    pub fn from_gamma(gamma: Vec<f64>, eta: f64, sigma: f64) -> Result<Self> {
        let mu = gamma.iter().map(|g| g.abs()).collect();
        Self::new(mu, eta, sigma, AdversaryPolicy::SignOfGamma { gamma })
    }

    pub fn digest(&self) -> String {
        format!(
            "n={};eta={};sigma={};adversary={}",
            self.mu.len(),
            self.eta,
            self.sigma,
            self.adversary.digest()
        )
    }
}

/// One generated replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// Corrupted responses `r[i] = xi[i] * clean[i]`.
    pub r: Vec<f64>,
    /// Uncorrupted responses `mu[i] + eps[i]`, kept for oracle evaluation.
    pub clean: Vec<f64>,
    /// Signs, each exactly +1 or -1.
    pub xi: Vec<f64>,
    pub seed: u64,
    pub model_digest: String,
}

/// The evenly spaced signal `mu[i] = eta + (1 - eta) * i / n` for
/// `i = 0..n`, rising from `eta` towards 1.
pub fn linear_signal(n: usize, eta: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !eta.is_finite() || !(0.0 < eta && eta < 1.0) {
        return Err(Error::BadEta);
    }
    let nf = n as f64;
    Ok((0..n).map(|i| eta + (1.0 - eta) * i as f64 / nf).collect())
}

/// Draws one replication from the model. Deterministic given
/// `(model, n, seed)`; `n` must match the signal length.
pub fn generate(model: &AsciModel, n: usize, seed: u64) -> Result<SampleSet> {
    if n != model.mu.len() {
        return Err(Error::LengthMismatch {
            expected: model.mu.len(),
            got: n,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;

    let clean: Vec<f64> = model.mu.iter().map(|&m| m + noise.sample(&mut rng)).collect();

    let xi: Vec<f64> = match &model.adversary {
        AdversaryPolicy::Identity => vec![1.0; n],
        AdversaryPolicy::Rademacher { p } => (0..n)
            .map(|_| if rng.gen::<f64>() < *p { 1.0 } else { -1.0 })
            .collect(),
        AdversaryPolicy::SignOfGamma { gamma } => {
            gamma.iter().map(|g| if *g < 0.0 { -1.0 } else { 1.0 }).collect()
        }
        AdversaryPolicy::ErrorAdaptive(rule) => {
            let signs = rule(&clean);
            if signs.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: signs.len(),
                });
            }
            if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
                return Err(Error::InvalidConfig(
                    "adaptive rule must emit only +1/-1 signs".into(),
                ));
            }
            signs
        }
    };

    let r = xi.iter().zip(&clean).map(|(x, c)| x * c).collect();
    Ok(SampleSet {
        r,
        clean,
        xi,
        seed,
        model_digest: model.digest(),
    })
}

/// The all-out stress policy `xi[i] = -sgn(clean[i])`: every corrupted
/// response comes out non-positive, yet `|r| = |clean|` so the fit is
/// unchanged.
pub fn worst_case_adaptive(clean: &[f64]) -> Vec<f64> {
    clean
        .iter()
        .map(|c| if *c > 0.0 { -1.0 } else { 1.0 })
        .collect()
}
