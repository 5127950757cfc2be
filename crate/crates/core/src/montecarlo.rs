//! Monte Carlo harness: runs seeded batches of finite systems and reduces
//! them to the statistics that the limit theory predicts.
//!
//! Replications are keyed by `(seed, replication index)` and reduced in
//! index order, so results are bit-identical across thread counts and runs.

use rayon::prelude::*;
use thiserror::Error;

use crate::finite_sir::{sample_signatures, sir_all, FiniteError};
use crate::limits::{
    fluctuation_law, ks_against_limit, limiting_sir_distribution, weak_convergence_gap,
};
use crate::model::{empirical_profile, ModelError, SystemConfig};
use crate::spectral::{solve_b, SpectralError};
use crate::stats::{correlation, ks_pvalue, ks_statistic, mean, normal_cdf, variance};

/// Errors from the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Finite(#[from] FiniteError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Raw outcome of a replication batch. Per-user rows are scaled by
/// `sqrt(N)`; sum and log-sum rows are unscaled totals, both centered at the
/// finite-size deterministic equivalent `b_N`.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Finite-size fixed point used for centering.
    pub b_n: f64,
    /// `sqrt(N) (beta_k - p_k b_N)` for the tracked users; one row per
    /// replication.
    pub per_user: Vec<Vec<f64>>,
    /// `sum_k (beta_k - p_k b_N)` per replication.
    pub sums: Vec<f64>,
    /// `sum_k (log(1 + beta_k) - log(1 + p_k b_N))` per replication.
    pub logsums: Vec<f64>,
    /// Sup distance of the realized SIR distribution to its atomic limit.
    pub ks_distances: Vec<f64>,
    /// Distance to the limit at continuity points only.
    pub weak_gaps: Vec<f64>,
    /// `tr(A^{-1})/N - b_N` per replication.
    pub trace_gaps: Vec<f64>,
}

/// Runs `reps` independent replications of the configured system, tracking
/// the first `tracked_users` users individually.
pub fn run_experiment(
    config: &SystemConfig,
    reps: usize,
    tracked_users: usize,
) -> Result<ExperimentResult, MonteCarloError> {
    config.validate()?;
    assert!(tracked_users <= config.k, "cannot track more users than exist");
    let powers = config.resolved_powers();
    let profile = empirical_profile(&powers)?;
    let c_n = config.c_n();
    let b_n = solve_b(c_n, &profile, config.sigma2)?;
    let atoms = limiting_sir_distribution(c_n, &profile, config.sigma2)?;
    let sqrt_n = (config.n as f64).sqrt();
    // Continuity probes stand off each atom by a few fluctuation widths.
    let coefficient = fluctuation_law(c_n, &profile, config.sigma2, config.entry_law)?.coefficient;
    let margins: Vec<f64> = atoms
        .iter()
        .map(|&(loc, _)| {
            let p = loc / b_n;
            (4.0 * p * (coefficient.max(0.0) / config.n as f64).sqrt()).max(1e-9 * (1.0 + loc))
        })
        .collect();

    struct Rep {
        tracked: Vec<f64>,
        sum: f64,
        logsum: f64,
        ks: f64,
        weak: f64,
        trace_gap: f64,
    }

    let rows: Result<Vec<Rep>, MonteCarloError> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let s = sample_signatures(config.n, config.k, config.entry_law, config.seed, rep);
            let real = sir_all(&s, &powers, config.sigma2)?;
            let tracked = (0..tracked_users)
                .map(|k| sqrt_n * (real.sirs[k] - powers[k] * b_n))
                .collect();
            let mut sum = 0.0;
            let mut logsum = 0.0;
            for (beta, p) in real.sirs.iter().zip(&powers) {
                sum += beta - p * b_n;
                logsum += (1.0 + beta).ln() - (1.0 + p * b_n).ln();
            }
            Ok(Rep {
                tracked,
                sum,
                logsum,
                ks: ks_against_limit(&real.sirs, &atoms),
                weak: weak_convergence_gap(&real.sirs, &atoms, &margins),
                trace_gap: real.trace_resolvent - b_n,
            })
        })
        .collect();
    let rows = rows?;

    Ok(ExperimentResult {
        b_n,
        per_user: rows.iter().map(|r| r.tracked.clone()).collect(),
        sums: rows.iter().map(|r| r.sum).collect(),
        logsums: rows.iter().map(|r| r.logsum).collect(),
        ks_distances: rows.iter().map(|r| r.ks).collect(),
        weak_gaps: rows.iter().map(|r| r.weak).collect(),
        trace_gaps: rows.iter().map(|r| r.trace_gap).collect(),
    })
}

/// Agreement of a sample with a target Gaussian `N(mean0, var0)`.
#[derive(Debug, Clone, Copy)]
pub struct NormalityReport {
    /// Standardized deviation of the sample mean from `mean0`.
    pub z_mean: f64,
    /// Sample variance over `var0`.
    pub var_ratio: f64,
    /// Standard error of the ratio under the Gaussian hypothesis.
    pub var_ratio_se: f64,
    /// Kolmogorov-Smirnov statistic against the target CDF.
    pub ks: f64,
    /// Asymptotic p-value of the KS statistic.
    pub ks_pvalue: f64,
}

impl NormalityReport {
    /// Three-sigma agreement on both moments and a non-rejecting KS test.
    pub fn passes(&self) -> bool {
        self.z_mean.abs() <= 3.0
            && (self.var_ratio - 1.0).abs() <= 3.0 * self.var_ratio_se
            && self.ks_pvalue >= 0.01
    }
}

/// Tests a sample against the Gaussian `N(mean0, var0)`.
pub fn normality_test(samples: &[f64], mean0: f64, var0: f64) -> NormalityReport {
    let r = samples.len();
    let sd = var0.sqrt();
    let z_mean = (mean(samples) - mean0) / (sd / (r as f64).sqrt());
    let var_ratio = variance(samples) / var0;
    let var_ratio_se = (2.0 / (r as f64 - 1.0)).sqrt();
    let ks = ks_statistic(samples, |x| normal_cdf((x - mean0) / sd));
    NormalityReport { z_mean, var_ratio, var_ratio_se, ks, ks_pvalue: ks_pvalue(ks, r) }
}

/// Largest absolute pairwise correlation among tracked users, with the
/// `3/sqrt(R)` acceptance threshold for nominally independent columns.
#[derive(Debug, Clone, Copy)]
pub struct IndependenceReport {
    pub max_abs_correlation: f64,
    pub threshold: f64,
}

impl IndependenceReport {
    pub fn passes(&self) -> bool {
        self.max_abs_correlation <= self.threshold
    }
}

/// Tests pairwise decorrelation of the tracked-user columns.
pub fn independence_test(per_user: &[Vec<f64>]) -> IndependenceReport {
    let r = per_user.len();
    let m = per_user.first().map_or(0, Vec::len);
    let column = |j: usize| per_user.iter().map(|row| row[j]).collect::<Vec<f64>>();
    let mut max_abs: f64 = 0.0;
    for i in 0..m {
        let ci = column(i);
        for j in i + 1..m {
            max_abs = max_abs.max(correlation(&ci, &column(j)).abs());
        }
    }
    IndependenceReport { max_abs_correlation: max_abs, threshold: 3.0 / (r as f64).sqrt() }
}
