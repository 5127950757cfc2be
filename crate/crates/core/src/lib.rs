//! Large-system theory of LMMSE signal-to-interference ratios under random
//! spreading, together with a Monte Carlo harness that verifies every limit
//! formula against exact finite-size simulation.
//!
//! The model is the classic synchronous multiuser system: `K` users transmit
//! over a processing gain of `N` chips through i.i.d. random signatures
//! `s_k = v_k / sqrt(N)`, with per-user receive powers `p_k` drawn from a
//! discrete profile and additive noise of variance `sigma2`. The LMMSE
//! receiver attains, for user `k`,
//!
//! ```text
//! beta_k = p_k s_k' (S_k P_k S_k' + sigma2 I)^{-1} s_k
//! ```
//!
//! As `N, K -> inf` with `K/N -> c`, the SIRs concentrate around `b * p_k`
//! where `b` solves `1/b = sigma2 + c * int x dH(x)/(1 + x b)`, and the
//! fluctuations around the limit are Gaussian at every scale this crate
//! models:
//!
//! * per-user: `sqrt(N) (beta_k - p_k b_N)` is asymptotically normal with a
//!   variance driven by the Stieltjes transform of the limiting spectral
//!   distribution ([`limits`]),
//! * system-wide: the empirical distribution of all `K` SIRs converges to the
//!   pushforward of the power profile under `p -> b p` ([`limits`]),
//! * aggregate: `sum_k (beta_k - b_N p_k)` and the matching log-SIR sum obey
//!   a central limit theorem whose moments come out of contour integrals of
//!   the inverse spectral map ([`clt`]).
//!
//! [`spectral`] houses the fixed-point and boundary-value solvers for the
//! spectral limit, [`finite_sir`] the exact finite-size SIR computation, and
//! [`montecarlo`] the seeded replication engine and test battery that ties
//! the two sides together.

pub mod clt;
pub mod finite_sir;
pub mod limits;
pub mod model;
pub mod montecarlo;
pub mod spectral;
pub mod stats;

mod numeric;
