//! Domain types shared by every module: power profiles, signature entry
//! laws, experiment configuration and result containers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on receive powers; profiles with larger atoms are rejected.
pub const P_MAX: f64 = 64.0;

/// Tolerance for merging duplicate power atoms.
const MERGE_TOL: f64 = 1e-12;

/// Construction errors for the model types.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("power profile needs at least one atom")]
    EmptyProfile,
    #[error("atom {index}: power {power} is negative")]
    NegativePower { index: usize, power: f64 },
    #[error("atom {index}: weight {weight} is not positive")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("atom {index}: power {power} exceeds the bound {bound}")]
    PowerAboveBound { index: usize, power: f64, bound: f64 },
    #[error("weights sum to {sum}, more than 1e-6 away from 1; refusing to normalize")]
    WeightSumOff { sum: f64 },
    #[error("explicit power list has length {got}, expected K = {expected}")]
    PowerListLength { got: usize, expected: usize },
    #[error("config requires either a power profile or an explicit power list")]
    MissingPowers,
}

/// Discrete distribution of receive powers: atoms `(power, weight)` sorted by
/// ascending power, weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    atoms: Vec<(f64, f64)>,
}

impl PowerProfile {
    /// Builds a profile from `(power, weight)` pairs: validates, merges
    /// duplicate powers, sorts ascending and normalizes the weights.
    ///
    /// Weight sums farther than 1e-6 from 1 are rejected as probable input
    /// errors rather than silently rescaled.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self, ModelError> {
        if pairs.is_empty() {
            return Err(ModelError::EmptyProfile);
        }
        for (i, &(p, w)) in pairs.iter().enumerate() {
            if p < 0.0 || !p.is_finite() {
                return Err(ModelError::NegativePower { index: i, power: p });
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(ModelError::NonPositiveWeight { index: i, weight: w });
            }
            if p > P_MAX {
                return Err(ModelError::PowerAboveBound { index: i, power: p, bound: P_MAX });
            }
        }
        let sum: f64 = pairs.iter().map(|&(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ModelError::WeightSumOff { sum });
        }
        let mut atoms: Vec<(f64, f64)> = pairs.to_vec();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            match merged.last_mut() {
                Some(last) if (p - last.0).abs() <= MERGE_TOL * p.max(1.0) => last.1 += w,
                _ => merged.push((p, w)),
            }
        }
        for atom in &mut merged {
            atom.1 /= sum;
        }
        Ok(Self { atoms: merged })
    }

    /// Single atom at `p` with full mass.
    pub fn point_mass(p: f64) -> Self {
        Self::new(&[(p, 1.0)]).expect("point mass is always a valid profile")
    }

    /// The `(power, weight)` atoms, ascending in power.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Expectation of `f` under the profile.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(p, w)| w * f(p)).sum()
    }

    /// Weight of the atom at power zero, if any.
    pub fn zero_mass(&self) -> f64 {
        self.atoms.iter().filter(|&&(p, _)| p == 0.0).map(|&(_, w)| w).sum()
    }

    /// Atoms with strictly positive power, weights renormalized to sum to 1.
    /// Returns `None` when the profile is a point mass at zero.
    pub fn positive_part(&self) -> Option<PowerProfile> {
        let pos: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .copied()
            .filter(|&(p, _)| p > 0.0)
            .collect();
        if pos.is_empty() {
            return None;
        }
        let sum: f64 = pos.iter().map(|&(_, w)| w).sum();
        Some(PowerProfile {
            atoms: pos.into_iter().map(|(p, w)| (p, w / sum)).collect(),
        })
    }

    /// CDF of the profile at `x` (right continuous).
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|&&(p, _)| p <= x).map(|&(_, w)| w).sum()
    }
}

/// Deterministic power assignment for `k` users whose empirical distribution
/// tracks the profile as closely as integer counts allow.
///
/// Uses largest-remainder apportionment with ties broken toward the smaller
/// power, and returns the powers in nondecreasing order.
pub fn assign_powers(profile: &PowerProfile, k: usize) -> Vec<f64> {
    let atoms = profile.atoms();
    let mut counts: Vec<usize> = Vec::with_capacity(atoms.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(atoms.len());
    let mut assigned = 0usize;
    for (i, &(_, w)) in atoms.iter().enumerate() {
        let exact = w * k as f64;
        let floor = exact.floor() as usize;
        counts.push(floor);
        assigned += floor;
        remainders.push((i, exact - floor as f64));
    }
    // Largest remainder first; ties toward the smaller power, i.e. the
    // smaller atom index since atoms are sorted ascending.
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().cycle().take(k - assigned) {
        counts[i] += 1;
    }
    let mut powers = Vec::with_capacity(k);
    for (i, &(p, _)) in atoms.iter().enumerate() {
        powers.extend(std::iter::repeat(p).take(counts[i]));
    }
    powers
}

/// Empirical profile of an explicit power list (weights are multiples of
/// `1/len`).
pub fn empirical_profile(powers: &[f64]) -> Result<PowerProfile, ModelError> {
    let w = 1.0 / powers.len() as f64;
    let pairs: Vec<(f64, f64)> = powers.iter().map(|&p| (p, w)).collect();
    PowerProfile::new(&pairs)
}

/// Distribution of the signature entries before the `1/sqrt(N)` scaling.
/// Every law has mean 0 and variance 1; they differ in the fourth moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryLaw {
    /// Standard normal entries; fourth moment 3.
    Normal,
    /// Entries uniform on {-1, +1}; fourth moment 1.
    Rademacher,
    /// Entries uniform on [-sqrt(3), sqrt(3)]; fourth moment 9/5.
    Uniform,
}

impl EntryLaw {
    /// Fourth moment of the law.
    pub fn fourth_moment(self) -> f64 {
        match self {
            EntryLaw::Normal => 3.0,
            EntryLaw::Rademacher => 1.0,
            EntryLaw::Uniform => 9.0 / 5.0,
        }
    }
}

/// Per-user powers of a configuration: either a profile that is apportioned
/// deterministically over the `K` users, or an explicit list of length `K`.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerSpec {
    Profile(PowerProfile),
    Explicit(Vec<f64>),
}

/// Finite-size experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct SystemConfig {
    /// Processing gain (signature length).
    pub n: usize,
    /// Number of users.
    pub k: usize,
    /// Noise variance.
    pub sigma2: f64,
    /// Receive powers.
    pub powers: PowerSpec,
    /// Signature entry law.
    pub entry_law: EntryLaw,
    /// Master seed; replication `r` derives its stream from `(seed, r)`.
    pub seed: u64,
}

/// Serialized form of [`SystemConfig`]; the field names are part of the CLI
/// contract.
#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    powers: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power_list: Option<Vec<f64>>,
    entry_law: EntryLaw,
    seed: u64,
}

impl TryFrom<ConfigRepr> for SystemConfig {
    type Error = ModelError;

    fn try_from(r: ConfigRepr) -> Result<Self, ModelError> {
        let powers = match (r.powers, r.power_list) {
            (Some(pairs), None) => PowerSpec::Profile(PowerProfile::new(&pairs)?),
            (None, Some(list)) => PowerSpec::Explicit(list),
            _ => return Err(ModelError::MissingPowers),
        };
        let config = SystemConfig {
            n: r.n,
            k: r.k,
            sigma2: r.sigma2,
            powers,
            entry_law: r.entry_law,
            seed: r.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<SystemConfig> for ConfigRepr {
    fn from(c: SystemConfig) -> ConfigRepr {
        let (powers, power_list) = match c.powers {
            PowerSpec::Profile(p) => (Some(p.atoms().to_vec()), None),
            PowerSpec::Explicit(list) => (None, Some(list)),
        };
        ConfigRepr {
            n: c.n,
            k: c.k,
            sigma2: c.sigma2,
            powers,
            power_list,
            entry_law: c.entry_law,
            seed: c.seed,
        }
    }
}

impl SystemConfig {
    /// Checks the structural invariants: positive sizes, positive noise and a
    /// coherent power specification.
    pub fn validate(&self) -> Result<(), ModelError> {
        assert!(self.n >= 1 && self.k >= 1, "N and K must be at least 1");
        assert!(
            self.sigma2 > 0.0 && self.sigma2.is_finite(),
            "sigma2 must be positive"
        );
        if let PowerSpec::Explicit(list) = &self.powers {
            if list.len() != self.k {
                return Err(ModelError::PowerListLength { got: list.len(), expected: self.k });
            }
            // Reuse the profile validation for bounds and signs.
            empirical_profile(list)?;
        }
        Ok(())
    }

    /// Load ratio `c_N = K/N`.
    pub fn c_n(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Per-user powers, nondecreasing for profile specs.
    pub fn resolved_powers(&self) -> Vec<f64> {
        match &self.powers {
            PowerSpec::Profile(p) => assign_powers(p, self.k),
            PowerSpec::Explicit(list) => list.clone(),
        }
    }

    /// Empirical power distribution of the resolved assignment.
    pub fn realized_profile(&self) -> PowerProfile {
        empirical_profile(&self.resolved_powers()).expect("resolved powers are valid")
    }
}

/// One simulated draw: the exact SIR of every user plus the resolvent trace
/// diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SirRealization {
    /// Exact SIR `beta_k` per user.
    pub sirs: Vec<f64>,
    /// `(1/N) tr (S P S' + sigma2 I)^{-1}`.
    pub trace_resolvent: f64,
    /// The finite-size fixed point the realization is centered against.
    pub b_n_used: f64,
}

/// Bundle of asymptotic predictions for one `(c, H, sigma2)` point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    /// Fixed point of the SIR limit map; `beta_k -> b * p_k`.
    pub b: f64,
    /// Scalar factor of the per-user fluctuation variance (times `p_k^2`).
    pub variance_coefficient: f64,
    /// Atoms `(location, mass)` of the limiting empirical SIR distribution.
    pub limiting_sir_dist: Vec<(f64, f64)>,
    /// Mean of the SIR-sum central limit theorem.
    pub mu: f64,
    /// Variance of the SIR-sum central limit theorem.
    pub rho: f64,
    /// Mean of the log-SIR-sum central limit theorem.
    pub mu1: f64,
    /// Variance of the log-SIR-sum central limit theorem.
    pub rho1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_merges_and_normalizes() {
        let p = PowerProfile::new(&[(2.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(p.atoms(), &[(2.0, 1.0)]);
    }

    #[test]
    fn profile_sorts_ascending() {
        let p = PowerProfile::new(&[(4.0, 0.5), (1.0, 0.5)]).unwrap();
        assert_eq!(p.atoms(), &[(1.0, 0.5), (4.0, 0.5)]);
    }

    #[test]
    fn profile_rejects_bad_atoms() {
        assert!(PowerProfile::new(&[]).is_err());
        assert!(PowerProfile::new(&[(-1.0, 1.0)]).is_err());
        assert!(PowerProfile::new(&[(1.0, 0.0)]).is_err());
        assert!(PowerProfile::new(&[(1.0, 0.9)]).is_err());
        assert!(PowerProfile::new(&[(P_MAX * 2.0, 1.0)]).is_err());
    }

    #[test]
    fn construction_is_idempotent() {
        let p = PowerProfile::new(&[(1.0, 0.25), (1.0, 0.25), (4.0, 0.5)]).unwrap();
        let q = PowerProfile::new(p.atoms()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn assignment_matches_examples() {
        let single = PowerProfile::point_mass(1.0);
        assert_eq!(assign_powers(&single, 3), vec![1.0, 1.0, 1.0]);
        let two = PowerProfile::new(&[(1.0, 0.5), (4.0, 0.5)]).unwrap();
        assert_eq!(assign_powers(&two, 4), vec![1.0, 1.0, 4.0, 4.0]);
        // Tie on the remainders goes to the smaller power.
        assert_eq!(assign_powers(&two, 5), vec![1.0, 1.0, 1.0, 4.0, 4.0]);
    }

    #[test]
    fn assignment_tracks_profile_cdf() {
        let profile = PowerProfile::new(&[(1.0, 0.2), (2.0, 0.3), (8.0, 0.5)]).unwrap();
        for k in [10usize, 100, 1000] {
            let powers = assign_powers(&profile, k);
            assert_eq!(powers.len(), k);
            let emp = empirical_profile(&powers).unwrap();
            let sup = profile
                .atoms()
                .iter()
                .map(|&(p, _)| (emp.cdf(p) - profile.cdf(p)).abs())
                .fold(0.0, f64::max);
            assert!(sup <= profile.atoms().len() as f64 / k as f64);
        }
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"N":256,"K":128,"sigma2":1.0,"powers":[[1.0,1.0]],"entry_law":"normal","seed":7}"#;
        let config: SystemConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.n, 256);
        assert_eq!(config.entry_law, EntryLaw::Normal);
        let back = serde_json::to_string(&config).unwrap();
        let again: SystemConfig = serde_json::from_str(&back).unwrap();
        assert_eq!(config, again);
    }

    #[test]
    fn config_rejects_wrong_power_list_length() {
        let json = r#"{"N":8,"K":4,"sigma2":1.0,"power_list":[1.0,1.0],"entry_law":"normal","seed":0}"#;
        assert!(serde_json::from_str::<SystemConfig>(json).is_err());
    }

    #[test]
    fn fourth_moments() {
        assert_eq!(EntryLaw::Normal.fourth_moment(), 3.0);
        assert_eq!(EntryLaw::Rademacher.fourth_moment(), 1.0);
        assert_eq!(EntryLaw::Uniform.fourth_moment(), 1.8);
    }
}
