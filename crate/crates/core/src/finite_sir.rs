//! Exact SIR computation for finite systems.
//!
//! A realization is an `N x K` signature matrix `S` with i.i.d. entries of
//! variance `1/N`. The linear MMSE receiver gives user `k` the output SIR
//!
//! ```text
//! beta_k = p_k s_k' (sum_{j != k} p_j s_j s_j' + sigma2 I)^{-1} s_k,
//! ```
//!
//! which the fast path rewrites through one factorization of the full matrix
//! `A = S P S' + sigma2 I` using the rank-one downdate identity
//! `beta_k = p_k q_k / (1 - p_k q_k)` with `q_k = s_k' A^{-1} s_k`.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{EntryLaw, SirRealization};

/// Number of dense factorizations performed since process start. Lets tests
/// verify that the fast path factorizes each realization exactly once.
pub static FACTORIZATIONS: AtomicUsize = AtomicUsize::new(0);

/// Errors from the finite-system solvers.
#[derive(Debug, Error)]
pub enum FiniteError {
    #[error("matrix factorization failed; input contained non-finite values")]
    Factorization,
    #[error("resolvent quadratic form for user {user} reached the rank-one degeneracy bound")]
    Degenerate { user: usize },
}

/// Draws the signature matrix for replication `rep` of a seeded experiment.
///
/// The stream is keyed by `(seed, rep)` alone, so replications can be
/// generated in any order or in parallel without changing the data.
pub fn sample_signatures(n: usize, k: usize, law: EntryLaw, seed: u64, rep: u64) -> DMatrix<f64> {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&rep.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    let scale = 1.0 / (n as f64).sqrt();
    let mut data = Vec::with_capacity(n * k);
    match law {
        EntryLaw::Normal => {
            for _ in 0..n * k {
                let v: f64 = StandardNormal.sample(&mut rng);
                data.push(v * scale);
            }
        }
        EntryLaw::Rademacher => {
            for _ in 0..n * k {
                data.push(if rng.gen::<bool>() { scale } else { -scale });
            }
        }
        EntryLaw::Uniform => {
            let width = 3.0f64.sqrt();
            let dist = Uniform::new_inclusive(-width, width);
            for _ in 0..n * k {
                data.push(dist.sample(&mut rng) * scale);
            }
        }
    }
    DMatrix::from_vec(n, k, data)
}

fn cholesky(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, FiniteError> {
    FACTORIZATIONS.fetch_add(1, Ordering::Relaxed);
    Cholesky::new(a).ok_or(FiniteError::Factorization)
}

/// Reference implementation: builds the interference matrix of each user
/// from scratch and factorizes it separately. Quadratic cost in the user
/// count; intended for cross-checking [`sir_all`] on small systems.
pub fn sir_direct(s: &DMatrix<f64>, powers: &[f64], sigma2: f64) -> Result<Vec<f64>, FiniteError> {
    let (n, k) = s.shape();
    assert_eq!(powers.len(), k, "one power per user");
    let mut sirs = Vec::with_capacity(k);
    for user in 0..k {
        let mut a = DMatrix::from_diagonal_element(n, n, sigma2);
        for j in 0..k {
            if j != user {
                let col = s.column(j);
                a.ger(powers[j], &col, &col, 1.0);
            }
        }
        let chol = cholesky(a)?;
        let solved = chol.solve(&s.column(user).into_owned());
        sirs.push(powers[user] * s.column(user).dot(&solved));
    }
    Ok(sirs)
}

/// Computes all `K` SIRs and the normalized resolvent trace from a single
/// factorization of `A = S P S' + sigma2 I`.
pub fn sir_all(s: &DMatrix<f64>, powers: &[f64], sigma2: f64) -> Result<SirRealization, FiniteError> {
    let (n, k) = s.shape();
    assert_eq!(powers.len(), k, "one power per user");
    // A = W W' + sigma2 I with W = S diag(sqrt p), as one matrix product.
    let mut w = s.clone();
    for (j, &p) in powers.iter().enumerate() {
        w.column_mut(j).scale_mut(p.sqrt());
    }
    let mut a = &w * w.transpose();
    for i in 0..n {
        a[(i, i)] += sigma2;
    }
    let chol = cholesky(a)?;

    // q_k = s_k' A^{-1} s_k via one triangular solve of all columns:
    // with A = L L', q_k = || L^{-1} s_k ||^2.
    let half = chol
        .l_dirty()
        .solve_lower_triangular(s)
        .ok_or(FiniteError::Factorization)?;
    let mut sirs = Vec::with_capacity(k);
    for user in 0..k {
        let q = half.column(user).norm_squared();
        let pq = powers[user] * q;
        if pq >= 1.0 - 1e-12 {
            return Err(FiniteError::Degenerate { user });
        }
        sirs.push(pq / (1.0 - pq));
    }

    // tr A^{-1} = || L^{-1} ||_F^2.
    let inv_l = chol
        .l_dirty()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(FiniteError::Factorization)?;
    let trace_resolvent = inv_l.iter().map(|v| v * v).sum::<f64>() / n as f64;

    Ok(SirRealization { sirs, trace_resolvent, b_n_used: f64::NAN })
}
