//! Browser bindings for the interactive demo page.
//!
//! Three operations back the page: a single corrupted draw with its fit,
//! the moment-matching objective with its root, and a mean-MSE trend over
//! sample sizes. Results cross the boundary as JSON strings so the page
//! needs nothing beyond `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ascifit::datagen::{self, AdversaryPolicy, AsciModel};
use ascifit::estimator::{self, EstimatorConfig, RateBoundConfig};
use ascifit::sim;

#[derive(Serialize)]
pub struct FitDemo {
    pub mu: Vec<f64>,
    pub clean: Vec<f64>,
    pub r: Vec<f64>,
    pub mu_hat: Vec<f64>,
    pub mu_naive: Vec<f64>,
    pub sigma_hat: f64,
    pub bracket_valid: bool,
    pub mse_ascifit: f64,
    pub mse_naive: f64,
}

#[derive(Serialize)]
pub struct MomentCurve {
    pub sigmas: Vec<f64>,
    pub g: Vec<f64>,
    pub target: f64,
    pub sigma_hat: f64,
    pub sigma_true: f64,
}

#[derive(Serialize)]
pub struct MseTrend {
    pub ns: Vec<usize>,
    pub mse_ascifit: Vec<f64>,
    pub mse_naive: Vec<f64>,
    pub envelope: Vec<f64>,
}

fn demo_sample(
    n: usize,
    eta: f64,
    sigma: f64,
    p: f64,
    seed: u64,
) -> Result<(Vec<f64>, datagen::SampleSet), ascifit::Error> {
    let mu = datagen::linear_signal(n, eta)?;
    let model = AsciModel::new(mu.clone(), eta, sigma, AdversaryPolicy::Rademacher { p })?;
    let sample = datagen::generate(&model, n, seed)?;
    Ok((mu, sample))
}

fn mse(est: &[f64], truth: &[f64]) -> f64 {
    est.iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / truth.len() as f64
}

pub fn fit_demo_inner(
    n: usize,
    eta: f64,
    sigma: f64,
    p: f64,
    seed: u64,
) -> Result<FitDemo, ascifit::Error> {
    let (mu, sample) = demo_sample(n, eta, sigma, p, seed)?;
    let cfg = EstimatorConfig::new(eta);
    let fit = ascifit::fit(&sample.r, &cfg)?;
    Ok(FitDemo {
        mse_ascifit: mse(&fit.mu_hat, &mu),
        mse_naive: mse(&fit.mu_naive, &mu),
        mu,
        clean: sample.clean,
        r: sample.r,
        mu_hat: fit.mu_hat,
        mu_naive: fit.mu_naive,
        sigma_hat: fit.sigma_hat,
        bracket_valid: fit.diagnostics.bracket_valid,
    })
}

pub fn moment_curve_inner(
    n: usize,
    eta: f64,
    sigma: f64,
    p: f64,
    seed: u64,
    points: usize,
) -> Result<MomentCurve, ascifit::Error> {
    let (_, sample) = demo_sample(n, eta, sigma, p, seed)?;
    let cfg = EstimatorConfig::new(eta);
    let t = estimator::preprocess(&sample.r)?;
    let t_hat = ascifit::isotonic::pava(&t)?.values;
    let (sigma_hat, _) = estimator::solve_sigma(&t, &t_hat, &cfg)?;
    let target = t.iter().map(|v| v * v).sum::<f64>() / t.len() as f64;

    let top = target.sqrt();
    let points = points.clamp(2, 2000);
    let mut sigmas = Vec::with_capacity(points);
    let mut g = Vec::with_capacity(points);
    for k in 0..points {
        let s = top * k as f64 / (points - 1) as f64;
        sigmas.push(s);
        g.push(estimator::big_g(s, &t_hat, &cfg)?);
    }
    Ok(MomentCurve {
        sigmas,
        g,
        target,
        sigma_hat,
        sigma_true: sigma,
    })
}

pub fn mse_trend_inner(
    eta: f64,
    sigma: f64,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<MseTrend, ascifit::Error> {
    let cfg = sim::SimConfig {
        etas: vec![eta],
        ps: vec![p],
        sigmas: vec![sigma],
        ns: vec![100, 250, 500, 1000],
        reps: reps.clamp(1, 50),
        master_seed: seed,
        signal: sim::SignalSpec::Linear,
        parallelism: 1,
    };
    let records = sim::run_grid(&cfg)?;
    let summary = sim::summarize(&records)?;
    let rb = RateBoundConfig::default();
    let mut out = MseTrend {
        ns: Vec::new(),
        mse_ascifit: Vec::new(),
        mse_naive: Vec::new(),
        envelope: Vec::new(),
    };
    for row in &summary {
        let mu_last = eta + (1.0 - eta) * (row.n as f64 - 1.0) / row.n as f64;
        out.ns.push(row.n);
        out.mse_ascifit.push(row.mean_mse_ascifit);
        out.mse_naive.push(row.mean_mse_naive);
        out.envelope
            .push(estimator::rate_envelope(row.n, eta, mu_last, sigma, &rb)?);
    }
    Ok(out)
}

fn to_json<T: Serialize>(value: T) -> Result<String, JsValue> {
    serde_json::to_string(&value).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn js_err(e: ascifit::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// One corrupted draw and its fit, as JSON.
#[wasm_bindgen]
pub fn fit_demo(n: usize, eta: f64, sigma: f64, p: f64, seed: u32) -> Result<String, JsValue> {
    to_json(fit_demo_inner(n, eta, sigma, p, seed as u64).map_err(js_err)?)
}

/// The moment-matching objective over `[0, sqrt(mean t^2)]` with its root.
#[wasm_bindgen]
pub fn moment_curve(
    n: usize,
    eta: f64,
    sigma: f64,
    p: f64,
    seed: u32,
    points: usize,
) -> Result<String, JsValue> {
    to_json(moment_curve_inner(n, eta, sigma, p, seed as u64, points).map_err(js_err)?)
}

/// Mean MSE of both estimators over n in {100, 250, 500, 1000}.
#[wasm_bindgen]
pub fn mse_trend(eta: f64, sigma: f64, p: f64, reps: usize, seed: u32) -> Result<String, JsValue> {
    to_json(mse_trend_inner(eta, sigma, p, reps, seed as u64).map_err(js_err)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_demo_reports_consistent_shapes() {
        let demo = fit_demo_inner(200, 0.2, 1.0, 0.5, 42).unwrap();
        assert_eq!(demo.mu.len(), 200);
        assert_eq!(demo.r.len(), 200);
        assert_eq!(demo.mu_hat.len(), 200);
        assert!(demo.mu_hat.windows(2).all(|w| w[0] <= w[1]));
        assert!(demo.mse_ascifit >= 0.0);
        let json = serde_json::to_string(&demo).unwrap();
        assert!(json.contains("\"sigma_hat\""));
    }

    #[test]
    fn moment_curve_is_increasing_and_bracketed() {
        let curve = moment_curve_inner(300, 0.2, 1.0, 0.5, 7, 100).unwrap();
        assert_eq!(curve.sigmas.len(), 100);
        assert!(curve.g.windows(2).all(|w| w[0] <= w[1] + 1e-9));
        assert!(curve.g.last().unwrap() >= &curve.target);
        assert!(curve.sigma_hat >= 0.0 && curve.sigma_hat <= *curve.sigmas.last().unwrap());
    }

    #[test]
    fn mse_trend_has_four_points() {
        let trend = mse_trend_inner(0.2, 1.0, 0.5, 2, 11).unwrap();
        assert_eq!(trend.ns, vec![100, 250, 500, 1000]);
        assert_eq!(trend.mse_ascifit.len(), 4);
        assert!(trend.envelope.iter().all(|e| e.is_finite() && *e > 0.0));
    }
}
