//! First-order limits of the per-user SIR and the fluctuations around them.
//!
//! In the large-system limit the SIR of a power-`p` user converges to `p b`
//! with `b` the positive solution of `1/b = sigma2 + c int x dH/(1+xb)`, and
//! `sqrt(N) (beta_k - p_k b_N)` is asymptotically centered Gaussian with
//! variance `p_k^2 (2 m'(-sigma2) + b^2 (E nu^4 - 3))`, independent across
//! users. The empirical distribution of all `K` SIRs converges weakly to the
//! pushforward of the power profile under `p -> p b`.

use num_complex::Complex64;

use crate::model::{EntryLaw, PowerProfile};
use crate::spectral::{solve_b, stieltjes_m, SpectralError};

/// The Gaussian fluctuation law of the per-user SIR.
#[derive(Debug, Clone, Copy)]
pub struct FluctuationLaw {
    /// SIR slope: a power-`p` user peaks at `p * b`.
    pub b: f64,
    /// Derivative of the Stieltjes transform at `-sigma2`.
    pub m_prime: f64,
    /// Power-free variance coefficient `2 m'(-sigma2) + b^2 (E nu^4 - 3)`.
    pub coefficient: f64,
}

impl FluctuationLaw {
    /// Asymptotic variance of `sqrt(N) (beta_k - p_k b_N)` for a user with
    /// power `p`.
    pub fn variance_for_power(&self, p: f64) -> f64 {
        self.coefficient * p * p
    }
}

/// Computes the fluctuation law for the given load, power profile, noise
/// level and chip law. The chip law enters only through its fourth moment.
pub fn fluctuation_law(
    c: f64,
    h: &PowerProfile,
    sigma2: f64,
    law: EntryLaw,
) -> Result<FluctuationLaw, SpectralError> {
    let b = solve_b(c, h, sigma2)?;
    let point = stieltjes_m(Complex64::new(-sigma2, 0.0), c, h)?;
    let m_prime = point.m_prime.re;
    let coefficient = 2.0 * m_prime + b * b * (law.fourth_moment() - 3.0);
    Ok(FluctuationLaw { b, m_prime, coefficient })
}

/// Atoms `(location, weight)` of the limiting empirical SIR distribution:
/// the power profile pushed forward by `p -> p b`, ascending in location.
pub fn limiting_sir_distribution(
    c: f64,
    h: &PowerProfile,
    sigma2: f64,
) -> Result<Vec<(f64, f64)>, SpectralError> {
    let b = solve_b(c, h, sigma2)?;
    Ok(h.atoms().iter().map(|&(p, w)| (p * b, w)).collect())
}

fn atom_cdf(atoms: &[(f64, f64)], x: f64) -> f64 {
    atoms.iter().filter(|&&(a, _)| a <= x).map(|&(_, w)| w).sum()
}

fn atom_cdf_left(atoms: &[(f64, f64)], x: f64) -> f64 {
    atoms.iter().filter(|&&(a, _)| a < x).map(|&(_, w)| w).sum()
}

/// Exact sup distance between the right-continuous empirical CDF of the
/// samples and the atomic CDF, evaluating both one-sided limits at every
/// discontinuity of either function.
pub fn ks_against_limit(samples: &[f64], atoms: &[(f64, f64)]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ecdf = |x: f64| sorted.partition_point(|&s| s <= x) as f64 / n;
    let ecdf_left = |x: f64| sorted.partition_point(|&s| s < x) as f64 / n;
    let mut candidates: Vec<f64> = sorted.clone();
    candidates.extend(atoms.iter().map(|&(a, _)| a));
    let mut d: f64 = 0.0;
    for &x in &candidates {
        d = d
            .max((ecdf(x) - atom_cdf(atoms, x)).abs())
            .max((ecdf_left(x) - atom_cdf_left(atoms, x)).abs());
    }
    d
}

/// Distance to the limit measured only at continuity points of the atomic
/// CDF: probes between and beyond the atoms, each standing off its atom by
/// the given margin. The margins should cover the finite-size fluctuation
/// width around each atom (a few multiples of the per-user standard
/// deviation); probe pairs whose margins collide are skipped.
///
/// This is the functional that weak convergence drives to zero; the full
/// sup distance of [`ks_against_limit`] does not vanish at atoms, where the
/// empirical CDF climbs through half the atom's weight.
pub fn weak_convergence_gap(samples: &[f64], atoms: &[(f64, f64)], margins: &[f64]) -> f64 {
    assert_eq!(atoms.len(), margins.len(), "one margin per atom");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ecdf = |x: f64| sorted.partition_point(|&s| s <= x) as f64 / n;

    let locs: Vec<f64> = atoms.iter().map(|&(a, _)| a).collect();
    let last = locs.len() - 1;
    let span = locs[last] - locs[0];
    let scale = if span > 0.0 { span } else { locs[0].abs().max(1.0) };
    let mut probes = vec![
        locs[0] - margins[0] - 0.05 * scale,
        locs[last] + margins[last] + 0.05 * scale,
    ];
    for i in 0..last {
        let lo = locs[i] + margins[i];
        let hi = locs[i + 1] - margins[i + 1];
        if lo < hi {
            probes.push(0.5 * (lo + hi));
        }
    }
    probes
        .iter()
        .map(|&x| (ecdf(x) - atom_cdf(atoms, x)).abs())
        .fold(0.0, f64::max)
}
