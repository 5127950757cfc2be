//! Command line driver for the SIR asymptotics toolkit.
//!
//! Four subcommands: `predict` evaluates the limit formulas for a
//! configuration, `simulate` runs a seeded replication batch and writes raw
//! samples plus digests, `verify` runs the statistical battery comparing
//! simulation against the limit laws, and `sweep` tabulates predictions
//! along one parameter axis.
//!
//! Exit codes: 0 success, 1 verification failure, 2 refused parameter
//! combination, 3 configuration or I/O error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use sir_asymptotics::clt::{
    check_sum_clt_condition, logsum_moments, mu_general, rho_general, SumCltCondition,
    ADJUDICATED_VARIANT,
};
use sir_asymptotics::limits::{fluctuation_law, limiting_sir_distribution};
use sir_asymptotics::model::{empirical_profile, EntryLaw, PowerProfile, PowerSpec, SystemConfig};
use sir_asymptotics::montecarlo::{
    independence_test, normality_test, run_experiment, ExperimentResult,
};
use sir_asymptotics::spectral::solve_b;
use sir_asymptotics::stats::{mean, variance};

const EXIT_OK: u8 = 0;
const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_REFUSED: u8 = 2;
const EXIT_ERROR: u8 = 3;

/// Environment variable consulted for the seed when `--seed` is absent.
const SEED_ENV: &str = "SIR_ASYMPTOTICS_SEED";

#[derive(Parser)]
#[command(name = "sir-asymptotics", version, about = "Large-system SIR theory for LMMSE receivers: predictions and Monte Carlo verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the limit predictions for a configuration.
    Predict(PredictArgs),
    /// Run a seeded replication batch; write samples, summary and digests.
    Simulate(SimulateArgs),
    /// Compare simulation against the limit laws; nonzero exit on failure.
    Verify(VerifyArgs),
    /// Tabulate predictions along one parameter axis into a CSV file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct PredictArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for samples.csv, result.json and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Seed override; wins over the environment and the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool; defaults to one thread per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Number of replications.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Number of users tracked individually (clamped to K).
    #[arg(long = "tracked-users", default_value_t = 4)]
    tracked_users: usize,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Path to the JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed override; wins over the environment and the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool; defaults to one thread per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Number of replications.
    #[arg(long, default_value_t = 400)]
    reps: usize,
    /// Number of users tracked individually (clamped to K).
    #[arg(long = "tracked-users", default_value_t = 4)]
    tracked_users: usize,
    /// Also test the aggregate sum and log-sum limit laws. Requires normal
    /// signature entries and a power profile satisfying the factorization
    /// identities; refused otherwise unless --force is given.
    #[arg(long = "sum-clt")]
    sum_clt: bool,
    /// Run refused combinations anyway.
    #[arg(long)]
    force: bool,
    /// Replace the theoretical per-user variance coefficient in the battery.
    #[arg(long = "override-var")]
    override_var: Option<f64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Axis {
    /// Load ratio K/N.
    C,
    /// Noise variance.
    Sigma2,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the JSON experiment configuration (supplies the fixed axes).
    #[arg(long)]
    config: PathBuf,
    /// Swept parameter.
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated axis values.
    #[arg(long)]
    values: String,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Predict(args) => cmd_predict(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load_config(path: &PathBuf) -> Result<SystemConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

/// Seed precedence: command line flag, then environment, then config file.
fn resolve_seed(config: &mut SystemConfig, flag: Option<u64>) -> Result<(), String> {
    if let Some(seed) = flag {
        config.seed = seed;
        return Ok(());
    }
    if let Ok(text) = std::env::var(SEED_ENV) {
        let seed: u64 = text
            .parse()
            .map_err(|_| format!("{SEED_ENV} must be an unsigned integer, got {text:?}"))?;
        config.seed = seed;
    }
    Ok(())
}

/// Runs `f` on a dedicated pool of the requested size, or inline on the
/// default pool.
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, String> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| format!("cannot build worker pool: {e}"))?;
            Ok(pool.install(f))
        }
    }
}

/// The profile the predictions refer to: the declared one when the config
/// carries a profile, otherwise the empirical distribution of the explicit
/// power list.
fn theoretical_profile(config: &SystemConfig) -> Result<PowerProfile, String> {
    match &config.powers {
        PowerSpec::Profile(p) => Ok(p.clone()),
        PowerSpec::Explicit(list) => empirical_profile(list).map_err(|e| e.to_string()),
    }
}

struct PredictionSet {
    b: f64,
    variance_coefficient: f64,
    sir_atoms: Vec<(f64, f64)>,
    mu: f64,
    rho: f64,
    mu1: f64,
    rho1: f64,
    condition: SumCltCondition,
}

fn predictions(c: f64, h: &PowerProfile, sigma2: f64, law: EntryLaw) -> Result<PredictionSet, String> {
    let b = solve_b(c, h, sigma2).map_err(|e| e.to_string())?;
    let fluct = fluctuation_law(c, h, sigma2, law).map_err(|e| e.to_string())?;
    let sir_atoms = limiting_sir_distribution(c, h, sigma2).map_err(|e| e.to_string())?;
    let mu = mu_general(c, h, sigma2).map_err(|e| e.to_string())?;
    let rho = rho_general(c, h, sigma2).map_err(|e| e.to_string())?;
    let (mu1, rho1) = logsum_moments(c, h, sigma2).map_err(|e| e.to_string())?;
    let condition = check_sum_clt_condition(h, b);
    Ok(PredictionSet {
        b,
        variance_coefficient: fluct.coefficient,
        sir_atoms,
        mu,
        rho,
        mu1,
        rho1,
        condition,
    })
}

fn prediction_json(p: &PredictionSet) -> serde_json::Value {
    serde_json::json!({
        "b": p.b,
        "variance_coefficient": p.variance_coefficient,
        "sir_atoms": p.sir_atoms,
        "mu": p.mu,
        "rho": p.rho,
        "mu1": p.mu1,
        "rho1": p.rho1,
        "variant": ADJUDICATED_VARIANT.name(),
        "sum_clt_condition": {
            "holds": p.condition.holds,
            "linear_residual": p.condition.linear_residual,
            "quadratic_residual": p.condition.quadratic_residual,
        },
    })
}

fn cmd_predict(args: PredictArgs) -> Result<u8, String> {
    let config = load_config(&args.config)?;
    let h = theoretical_profile(&config)?;
    let pred = predictions(config.c_n(), &h, config.sigma2, config.entry_law)?;
    let text = serde_json::to_string_pretty(&prediction_json(&pred)).expect("serializable") + "\n";
    match args.out {
        Some(path) => fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

/// Formats a float with 17 significant digits, enough to round-trip f64.
fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn samples_csv(result: &ExperimentResult, tracked: usize) -> String {
    let mut text = String::from("rep");
    for k in 0..tracked {
        let _ = write!(text, ",user{k}");
    }
    text.push_str(",sum,logsum,sup_distance,weak_gap,trace_gap\n");
    for rep in 0..result.sums.len() {
        let _ = write!(text, "{rep}");
        for v in &result.per_user[rep] {
            let _ = write!(text, ",{}", csv_float(*v));
        }
        let _ = write!(
            text,
            ",{},{},{},{},{}\n",
            csv_float(result.sums[rep]),
            csv_float(result.logsums[rep]),
            csv_float(result.ks_distances[rep]),
            csv_float(result.weak_gaps[rep]),
            csv_float(result.trace_gaps[rep]),
        );
    }
    text
}

fn sha256_hex(data: &str) -> String {
    hex::encode(Sha256::digest(data.as_bytes()))
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, String> {
    let mut config = load_config(&args.config)?;
    resolve_seed(&mut config, args.seed)?;
    let tracked = args.tracked_users.min(config.k);

    let result_path = args.out.join("result.json");
    if result_path.exists() && !args.force {
        eprintln!(
            "refusing to overwrite {}; pass --force to replace it",
            result_path.display()
        );
        return Ok(EXIT_REFUSED);
    }
    fs::create_dir_all(&args.out).map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;

    let reps = args.reps;
    let run = with_workers(args.workers, || run_experiment(&config, reps, tracked))?;
    let result = run.map_err(|e| e.to_string())?;

    let h = theoretical_profile(&config)?;
    let pred = predictions(config.c_n(), &h, config.sigma2, config.entry_law)?;

    let per_user_summary: Vec<serde_json::Value> = (0..tracked)
        .map(|k| {
            let col: Vec<f64> = result.per_user.iter().map(|row| row[k]).collect();
            serde_json::json!({ "mean": mean(&col), "variance": variance(&col) })
        })
        .collect();
    let result_json = serde_json::json!({
        "config": config,
        "reps": reps,
        "tracked_users": tracked,
        "b_n": result.b_n,
        "prediction": prediction_json(&pred),
        "summary": {
            "sum_mean": mean(&result.sums),
            "sum_variance": variance(&result.sums),
            "logsum_mean": mean(&result.logsums),
            "logsum_variance": variance(&result.logsums),
            "mean_sup_distance": mean(&result.ks_distances),
            "mean_weak_gap": mean(&result.weak_gaps),
            "mean_trace_gap": mean(&result.trace_gaps),
            "per_user": per_user_summary,
        },
    });
    let result_text = serde_json::to_string_pretty(&result_json).expect("serializable") + "\n";
    let csv_text = samples_csv(&result, tracked);

    let manifest = serde_json::json!({
        "result_json_sha256": sha256_hex(&result_text),
        "samples_csv_sha256": sha256_hex(&csv_text),
        "seed": config.seed,
        "reps": reps,
        "workers": args.workers,
        "created_unix_ms": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    });

    let write = |name: &str, text: &str| -> Result<(), String> {
        let path = args.out.join(name);
        fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
    };
    write("samples.csv", &csv_text)?;
    write("result.json", &result_text)?;
    write(
        "manifest.json",
        &(serde_json::to_string_pretty(&manifest).expect("serializable") + "\n"),
    )?;

    println!(
        "wrote {} ({} replications); result sha256 {}",
        args.out.display(),
        reps,
        sha256_hex(&result_text)
    );
    Ok(EXIT_OK)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, String> {
    let mut config = load_config(&args.config)?;
    resolve_seed(&mut config, args.seed)?;
    let tracked = args.tracked_users.min(config.k);
    let h = theoretical_profile(&config)?;
    let c = config.c_n();

    if args.sum_clt && !args.force {
        if config.entry_law != EntryLaw::Normal {
            eprintln!(
                "refusing --sum-clt with {:?} signature entries: the aggregate limit laws \
                 are derived for normal entries; pass --force to run anyway",
                config.entry_law
            );
            return Ok(EXIT_REFUSED);
        }
        let b = solve_b(c, &h, config.sigma2).map_err(|e| e.to_string())?;
        let condition = check_sum_clt_condition(&h, b);
        if !condition.holds {
            eprintln!(
                "refusing --sum-clt: the power profile fails the factorization identities \
                 (residuals {:.3e}, {:.3e}); pass --force to run anyway",
                condition.linear_residual, condition.quadratic_residual
            );
            return Ok(EXIT_REFUSED);
        }
    }

    let reps = args.reps;
    let run = with_workers(args.workers, || run_experiment(&config, reps, tracked))?;
    let result = run.map_err(|e| e.to_string())?;

    // The battery centers on the realized assignment, matching the harness.
    let realized = config.realized_profile();
    let powers = config.resolved_powers();
    let fluct = fluctuation_law(c, &realized, config.sigma2, config.entry_law)
        .map_err(|e| e.to_string())?;
    let coefficient = args.override_var.unwrap_or(fluct.coefficient);

    let mut checks: Vec<Check> = Vec::new();

    let mut worst = (0.0f64, 1.0f64, 1.0f64); // |z|, |ratio-1|/se, min p
    let mut fluct_pass = true;
    for k in 0..tracked {
        let col: Vec<f64> = result.per_user.iter().map(|row| row[k]).collect();
        let report = normality_test(&col, 0.0, coefficient * powers[k] * powers[k]);
        fluct_pass &= report.passes();
        worst.0 = worst.0.max(report.z_mean.abs());
        worst.1 = worst.1.max((report.var_ratio - 1.0).abs() / report.var_ratio_se);
        worst.2 = worst.2.min(report.ks_pvalue);
    }
    checks.push(Check {
        name: "per-user fluctuation law",
        pass: fluct_pass,
        detail: format!(
            "{} users: worst |z_mean| {:.2}, worst var deviation {:.2} se, min KS p {:.3}",
            tracked, worst.0, worst.1, worst.2
        ),
    });

    let indep = independence_test(&result.per_user);
    checks.push(Check {
        name: "per-user decorrelation",
        pass: indep.passes(),
        detail: format!(
            "max |corr| {:.4} vs threshold {:.4}",
            indep.max_abs_correlation, indep.threshold
        ),
    });

    // Weak convergence of the SIR distribution, measured away from the atoms
    // where the limit CDF is continuous. The raw sup distance is reported as
    // a diagnostic only: at an atom the empirical CDF climbs through half
    // the atom weight, so the sup distance does not vanish.
    let gap = mean(&result.weak_gaps);
    let gap_threshold = 2.0 / (config.k as f64).sqrt();
    checks.push(Check {
        name: "empirical SIR distribution limit",
        pass: gap <= gap_threshold,
        detail: format!(
            "mean continuity-point gap {:.4} vs threshold {:.4} (sup distance diagnostic {:.4})",
            gap,
            gap_threshold,
            mean(&result.ks_distances)
        ),
    });

    let trace = mean(&result.trace_gaps);
    let trace_se = (variance(&result.trace_gaps) / reps as f64).sqrt();
    let trace_threshold = 5.0 / config.n as f64 + 3.0 * trace_se;
    checks.push(Check {
        name: "trace resolvent law",
        pass: trace.abs() <= trace_threshold,
        detail: format!("|mean gap| {:.5} vs threshold {:.5}", trace.abs(), trace_threshold),
    });

    if args.sum_clt {
        let pred = predictions(c, &h, config.sigma2, config.entry_law)?;
        let sum_report = normality_test(&result.sums, pred.mu, pred.rho);
        checks.push(Check {
            name: "sum-SIR fluctuation law",
            pass: sum_report.passes(),
            detail: format!(
                "z_mean {:.2}, var ratio {:.3} (se {:.3}), KS p {:.3}",
                sum_report.z_mean, sum_report.var_ratio, sum_report.var_ratio_se, sum_report.ks_pvalue
            ),
        });
        let logsum_report = normality_test(&result.logsums, pred.mu1, pred.rho1);
        checks.push(Check {
            name: "log-sum fluctuation law",
            pass: logsum_report.passes(),
            detail: format!(
                "z_mean {:.2}, var ratio {:.3} (se {:.3}), KS p {:.3}",
                logsum_report.z_mean,
                logsum_report.var_ratio,
                logsum_report.var_ratio_se,
                logsum_report.ks_pvalue
            ),
        });
    }

    let mut all_pass = true;
    for check in &checks {
        let label = if check.pass { "PASS" } else { "FAIL" };
        println!("{label} {}: {}", check.name, check.detail);
        all_pass &= check.pass;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, String> {
    let config = load_config(&args.config)?;
    let h = theoretical_profile(&config)?;
    let values: Vec<f64> = args
        .values
        .split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|_| format!("bad axis value {tok:?}")))
        .collect::<Result<_, _>>()?;

    let mut out = String::from("value,b,variance_coefficient,mu,rho,mu1,rho1,status\n");
    let mut failures = 0usize;
    for &value in &values {
        let (c, sigma2) = match args.axis {
            Axis::C => (value, config.sigma2),
            Axis::Sigma2 => (config.c_n(), value),
        };
        match predictions(c, &h, sigma2, config.entry_law) {
            Ok(p) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},ok",
                    csv_float(value),
                    csv_float(p.b),
                    csv_float(p.variance_coefficient),
                    csv_float(p.mu),
                    csv_float(p.rho),
                    csv_float(p.mu1),
                    csv_float(p.rho1),
                );
            }
            Err(message) => {
                failures += 1;
                let clean = message.replace([',', '\n'], ";");
                let _ = writeln!(out, "{},ERR,ERR,ERR,ERR,ERR,ERR,{clean}", csv_float(value));
            }
        }
    }
    fs::write(&args.out, &out).map_err(|e| format!("cannot write {}: {e}", args.out.display()))?;
    println!(
        "wrote {} rows to {} ({failures} failed)",
        values.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}
