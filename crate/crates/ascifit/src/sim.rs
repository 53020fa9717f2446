//! Deterministic replication harness.
//!
//! A grid of `(eta, p, sigma, n)` cells is expanded in sorted order, every
//! `(cell, rep)` pair gets its own RNG substream derived by hashing the
//! master seed with the cell coordinates, and workers pull jobs from a
//! shared counter. Output order and content are therefore a pure function
//! of `(config, master_seed)`, independent of the parallelism degree --
//! the emitted CSV is byte-reproducible.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::datagen::{self, AdversaryPolicy, AsciModel};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig};

/// Shape of the true signal used by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignalSpec {
    /// `mu[i] = eta + (1 - eta) * i / n`, rising from the floor towards 1.
    #[default]
    Linear,
}

/// Simulation grid: the cross product of all lists, `reps` replications
/// per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub etas: Vec<f64>,
    pub ps: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    pub signal: SignalSpec,
    /// Worker threads; 0 means one per available core.
    pub parallelism: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            etas: vec![0.2],
            ps: vec![0.5],
            sigmas: vec![0.5, 1.0, 1.5, 2.0],
            ns: vec![100, 250, 500, 1000],
            reps: 50,
            master_seed: 1,
            signal: SignalSpec::Linear,
            parallelism: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.etas.is_empty() || self.ps.is_empty() || self.sigmas.is_empty() || self.ns.is_empty()
        {
            return Err(Error::InvalidConfig("all grid lists must be non-empty".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        if self.etas.iter().any(|e| !(0.0 < *e && *e < 1.0)) {
            return Err(Error::InvalidConfig("etas must lie in (0, 1)".into()));
        }
        if self.ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("ps must lie in [0, 1]".into()));
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidConfig("sigmas must be >= 0".into()));
        }
        if self.ns.contains(&0) {
            return Err(Error::InvalidConfig("ns must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// One replication's outcome; the unit of the records CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub eta: f64,
    pub p: f64,
    pub sigma: f64,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub mse_ascifit: f64,
    pub mse_naive: f64,
    pub sigma_hat: f64,
    pub bracket_valid: bool,
    /// Reserved; always 0 in emitted records so the CSV stays a pure
    /// function of `(config, master_seed)`. Wall-clock totals are reported
    /// by the CLI out of band.
    pub runtime_ms: u64,
}

/// Aggregate of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub eta: f64,
    pub p: f64,
    pub sigma: f64,
    pub n: usize,
    pub reps: usize,
    pub mean_mse_ascifit: f64,
    pub se_mse_ascifit: f64,
    pub mean_mse_naive: f64,
    pub se_mse_naive: f64,
}

/// Log-log regression of mean MSE against n for one sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub sigma: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Per-point residuals of `ln(mean MSE)` against the fitted line.
    pub residuals: Vec<f64>,
    pub points: Vec<(usize, f64)>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream seed for one `(cell, rep)`: a splitmix chain over the master
/// seed and the cell coordinates.
pub fn substream_seed(master: u64, eta: f64, p: f64, sigma: f64, n: usize, rep: usize) -> u64 {
    let mut h = splitmix64(master);
    for part in [
        eta.to_bits(),
        p.to_bits(),
        sigma.to_bits(),
        n as u64,
        rep as u64,
    ] {
        h = splitmix64(h ^ part);
    }
    h
}

#[derive(Debug, Clone, Copy)]
struct Job {
    eta: f64,
    p: f64,
    sigma: f64,
    n: usize,
    rep: usize,
    seed: u64,
}

fn run_one(job: &Job) -> SimRecord {
    let outcome = (|| -> Result<(f64, f64, f64, bool)> {
        let mu = datagen::linear_signal(job.n, job.eta)?;
        let model = AsciModel::new(
            mu.clone(),
            job.eta,
            job.sigma,
            AdversaryPolicy::Rademacher { p: job.p },
        )?;
        let sample = datagen::generate(&model, job.n, job.seed)?;
        let cfg = EstimatorConfig::new(job.eta);
        let result = estimator::fit(&sample.r, &cfg)?;
        let nf = job.n as f64;
        let mse = |est: &[f64]| {
            est.iter()
                .zip(&mu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / nf
        };
        Ok((
            mse(&result.mu_hat),
            mse(&result.mu_naive),
            result.sigma_hat,
            result.diagnostics.bracket_valid,
        ))
    })();

    // Per-record failures are annotated as NaN rather than aborting the grid.
    let (mse_ascifit, mse_naive, sigma_hat, bracket_valid) =
        outcome.unwrap_or((f64::NAN, f64::NAN, f64::NAN, false));
    SimRecord {
        eta: job.eta,
        p: job.p,
        sigma: job.sigma,
        n: job.n,
        rep: job.rep,
        seed: job.seed,
        mse_ascifit,
        mse_naive,
        sigma_hat,
        bracket_valid,
        runtime_ms: 0,
    }
}

/// Runs the full grid: one record per `(cell, rep)`, sorted by grid keys
/// then rep. Records are identical whatever the parallelism degree.
pub fn run_grid(cfg: &SimConfig) -> Result<Vec<SimRecord>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &eta in &cfg.etas {
        for &p in &cfg.ps {
            for &sigma in &cfg.sigmas {
                for &n in &cfg.ns {
                    for rep in 0..cfg.reps {
                        jobs.push(Job {
                            eta,
                            p,
                            sigma,
                            n,
                            rep,
                            seed: substream_seed(cfg.master_seed, eta, p, sigma, n, rep),
                        });
                    }
                }
            }
        }
    }

    let threads = if cfg.parallelism == 0 {
        std::thread::available_parallelism().map_or(1, |v| v.get())
    } else {
        cfg.parallelism
    };

    if threads <= 1 || jobs.len() <= 1 {
        return Ok(jobs.iter().map(run_one).collect());
    }

    let slots: Mutex<Vec<Option<SimRecord>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(jobs.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let record = run_one(&jobs[idx]);
                slots.lock().unwrap()[idx] = Some(record);
            });
        }
    });
    let records = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();
    Ok(records)
}

/// Groups records by `(eta, p, sigma, n)` and reports mean and standard
/// error of both MSE columns. A single replication gets SE 0 by convention.
pub fn summarize(records: &[SimRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    use std::collections::BTreeMap;
    // positive-float bit patterns sort like the values themselves
    type CellKey = (u64, u64, u64, usize);
    let mut groups: BTreeMap<CellKey, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.eta.to_bits(), r.p.to_bits(), r.sigma.to_bits(), r.n))
            .or_default()
            .push((r.mse_ascifit, r.mse_naive));
    }
    let mean_se = |xs: &[f64]| -> (f64, f64) {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        if xs.len() < 2 {
            return (mean, 0.0);
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
        (mean, (var / k).sqrt())
    };
    Ok(groups
        .into_iter()
        .map(|((eta, p, sigma, n), cell)| {
            let asc: Vec<f64> = cell.iter().map(|c| c.0).collect();
            let nai: Vec<f64> = cell.iter().map(|c| c.1).collect();
            let (ma, sa) = mean_se(&asc);
            let (mn, sn) = mean_se(&nai);
            SummaryRow {
                eta: f64::from_bits(eta),
                p: f64::from_bits(p),
                sigma: f64::from_bits(sigma),
                n,
                reps: cell.len(),
                mean_mse_ascifit: ma,
                se_mse_ascifit: sa,
                mean_mse_naive: mn,
                se_mse_naive: sn,
            }
        })
        .collect())
}

/// Least-squares slope of `ln(mean MSE)` against `ln(n)` for one sigma.
/// Needs at least three distinct n values.
pub fn rate_check(summary: &[SummaryRow], sigma: f64) -> Result<RateCheck> {
    let mut points: Vec<(usize, f64)> = summary
        .iter()
        .filter(|row| row.sigma == sigma)
        .map(|row| (row.n, row.mean_mse_ascifit))
        .collect();
    points.sort_by_key(|p| p.0);
    points.dedup_by_key(|p| p.0);
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(RateCheck {
        sigma,
        slope,
        intercept,
        residuals,
        points,
    })
}

pub const RECORDS_HEADER: &str =
    "eta,p,sigma,n,rep,seed,mse_ascifit,mse_naive,sigma_hat,bracket_valid,runtime_ms";

pub const SUMMARY_HEADER: &str =
    "eta,p,sigma,n,reps,mean_mse_ascifit,se_mse_ascifit,mean_mse_naive,se_mse_naive";

/// Fixed-schema CSV with '.' decimals; floats print in Rust's canonical
/// shortest round-trip form.
pub fn records_to_csv(records: &[SimRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.eta,
            r.p,
            r.sigma,
            r.n,
            r.rep,
            r.seed,
            r.mse_ascifit,
            r.mse_naive,
            r.sigma_hat,
            r.bracket_valid,
            r.runtime_ms
        ));
    }
    out
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.eta,
            r.p,
            r.sigma,
            r.n,
            r.reps,
            r.mean_mse_ascifit,
            r.se_mse_ascifit,
            r.mean_mse_naive,
            r.se_mse_naive
        ));
    }
    out
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == SUMMARY_HEADER => {}
        _ => {
            return Err(Error::InvalidConfig(format!(
                "summary CSV must start with the header '{SUMMARY_HEADER}'"
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::InvalidConfig(format!(
                "summary CSV line {}: expected 9 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::InvalidConfig(format!("summary CSV line {}: bad {what}", lineno + 2));
        rows.push(SummaryRow {
            eta: fields[0].parse().map_err(|_| bad("eta"))?,
            p: fields[1].parse().map_err(|_| bad("p"))?,
            sigma: fields[2].parse().map_err(|_| bad("sigma"))?,
            n: fields[3].parse().map_err(|_| bad("n"))?,
            reps: fields[4].parse().map_err(|_| bad("reps"))?,
            mean_mse_ascifit: fields[5].parse().map_err(|_| bad("mean_mse_ascifit"))?,
            se_mse_ascifit: fields[6].parse().map_err(|_| bad("se_mse_ascifit"))?,
            mean_mse_naive: fields[7].parse().map_err(|_| bad("mean_mse_naive"))?,
            se_mse_naive: fields[8].parse().map_err(|_| bad("se_mse_naive"))?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}
