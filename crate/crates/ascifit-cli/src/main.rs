//! Command line front end: fit a single series, run the simulation grid,
//! regress the convergence rate out of a summary, and rerun the oracle
//! verification suite.

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use ascifit::estimator::EstimatorConfig;
use ascifit::{oracle, sim};

#[derive(Parser)]
#[command(name = "ascifit", version, about = "Isotonic regression under adversarial sign corruption")]
struct Cli {
    /// Override the master seed wherever randomness is used.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one response series and print the estimates as CSV.
    Fit {
        /// Input file: one numeric response per line, or a CSV when
        /// --column is given. Use '-' for stdin.
        file: String,
        /// Known positive floor under the signal.
        #[arg(long)]
        eta: f64,
        /// Zero-based CSV column holding the responses; a non-numeric
        /// first row is treated as a header.
        #[arg(long)]
        column: Option<usize>,
        /// Lower clamp on the fitted noise scale.
        #[arg(long, default_value_t = 0.0)]
        sigma_floor: f64,
        /// Upper clamp on the fitted noise scale.
        #[arg(long)]
        sigma_ceiling: Option<f64>,
        /// Tolerance on the moment-matching residual.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the replication grid and write records and summary CSVs.
    Simulate {
        /// Grid config as JSON; omitted fields take the defaults
        /// (eta 0.2, p 0.5, sigma {0.5,1,1.5,2}, n {100,250,500,1000},
        /// 50 reps).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "records.csv")]
        records_out: PathBuf,
        #[arg(long, default_value = "summary.csv")]
        summary_out: PathBuf,
        /// Worker threads; 0 means one per core.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Regress log mean MSE on log n, one slope per sigma in the summary.
    RateCheck {
        /// A summary CSV produced by `simulate`.
        summary: PathBuf,
    },
    /// Rerun the oracle-equivalence suite (exit 2 on any failure).
    #[command(hide = true)]
    Verify,
}

// Input problems exit 1, numerical failures exit 2.
enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> ExitCode {
        match self {
            Failure::Input(_) => ExitCode::from(1),
            Failure::Numerical(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn classify(e: ascifit::Error) -> Failure {
    use ascifit::Error::*;
    match e {
        NoConvergence { .. } => Failure::Numerical(e.to_string()),
        _ => Failure::Input(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit {
            file,
            eta,
            column,
            sigma_floor,
            sigma_ceiling,
            tol,
            out,
        } => {
            let text = read_input(&file)?;
            let responses = parse_responses(&text, column)?;
            let mut cfg = EstimatorConfig::new(eta);
            cfg.sigma_floor = sigma_floor;
            cfg.sigma_ceiling = sigma_ceiling;
            cfg.root_tol = tol;
            cfg.validate().map_err(classify)?;
            let result = ascifit::fit(&responses, &cfg).map_err(classify)?;

            let mut csv = String::from("index,mu_hat,mu_naive,sigma_hat\n");
            for (i, (mh, mn)) in result.mu_hat.iter().zip(&result.mu_naive).enumerate() {
                csv.push_str(&format!("{},{},{},{}\n", i + 1, mh, mn, result.sigma_hat));
            }
            write_output(out.as_deref(), &csv)?;
            let d = &result.diagnostics;
            eprintln!(
                "sigma_hat={} bracket_valid={} iterations={} residual={:e}",
                result.sigma_hat, d.bracket_valid, d.iterations, d.residual
            );
            Ok(())
        }
        Command::Simulate {
            config,
            records_out,
            summary_out,
            parallelism,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
                    sim::SimConfig::from_json(&text).map_err(classify)?
                }
                None => sim::SimConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            if let Some(par) = parallelism {
                cfg.parallelism = par;
            }
            let started = Instant::now();
            let records = sim::run_grid(&cfg).map_err(classify)?;
            let summary = sim::summarize(&records).map_err(classify)?;
            fs::write(&records_out, sim::records_to_csv(&records))
                .map_err(|e| input_err(format!("{}: {e}", records_out.display())))?;
            fs::write(&summary_out, sim::summary_to_csv(&summary))
                .map_err(|e| input_err(format!("{}: {e}", summary_out.display())))?;
            eprintln!(
                "{} records in {:.1}s -> {} and {}",
                records.len(),
                started.elapsed().as_secs_f64(),
                records_out.display(),
                summary_out.display()
            );
            Ok(())
        }
        Command::RateCheck { summary } => {
            let text = fs::read_to_string(&summary)
                .map_err(|e| input_err(format!("{}: {e}", summary.display())))?;
            let rows = sim::parse_summary_csv(&text).map_err(classify)?;
            let mut sigmas: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
            sigmas.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sigmas.dedup();
            println!("sigma,points,slope,intercept,max_abs_residual");
            for sigma in sigmas {
                let rc = sim::rate_check(&rows, sigma).map_err(classify)?;
                let max_resid = rc.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
                println!(
                    "{},{},{},{},{}",
                    sigma,
                    rc.points.len(),
                    rc.slope,
                    rc.intercept,
                    max_resid
                );
            }
            Ok(())
        }
        Command::Verify => {
            let report = oracle::verify(cli.seed.unwrap_or(0xA5C1F17));
            for check in &report.checks {
                let tag = if check.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] {}: {}", check.name, check.detail);
            }
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Numerical("oracle verification failed".into()))
            }
        }
    }
}

fn read_input(file: &str) -> Result<String, Failure> {
    if file == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| input_err(format!("stdin: {e}")))?;
        Ok(buf)
    } else {
        fs::read_to_string(file).map_err(|e| input_err(format!("{file}: {e}")))
    }
}

fn parse_responses(text: &str, column: Option<usize>) -> Result<Vec<f64>, Failure> {
    let mut values = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let field = match column {
            Some(idx) => line.split(',').nth(idx).ok_or_else(|| {
                input_err(format!("line {}: no column {idx}", lineno + 1))
            })?,
            None => line,
        };
        match field.trim().parse::<f64>() {
            Ok(v) => values.push(v),
            // allow a single header row in column mode
            Err(_) if column.is_some() && lineno == 0 && values.is_empty() => continue,
            Err(_) => {
                return Err(input_err(format!(
                    "line {}: cannot parse '{}' as a number",
                    lineno + 1,
                    field.trim()
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(input_err("no numeric responses found"));
    }
    Ok(values)
}

fn write_output(path: Option<&std::path::Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| input_err(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
