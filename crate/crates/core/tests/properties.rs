//! Property tests for the structural invariants of the solvers: exactness of
//! residuals, scale reductions, branch positivity and oracle agreement on
//! randomized inputs.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sir_asymptotics::clt::{mu_general, rho_general};
use sir_asymptotics::finite_sir::{sample_signatures, sir_all, sir_direct};
use sir_asymptotics::limits::{fluctuation_law, limiting_sir_distribution};
use sir_asymptotics::model::{assign_powers, empirical_profile, EntryLaw, PowerProfile};
use sir_asymptotics::spectral::{solve_b, stieltjes_m};

fn law_strategy() -> impl Strategy<Value = EntryLaw> {
    prop_oneof![
        Just(EntryLaw::Normal),
        Just(EntryLaw::Rademacher),
        Just(EntryLaw::Uniform),
    ]
}

/// One to three positive atoms with normalized weights.
fn profile_strategy() -> impl Strategy<Value = PowerProfile> {
    proptest::collection::vec((0.1f64..5.0, 0.05f64..1.0), 1..=3).prop_map(|pairs| {
        let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
        let normalized: Vec<(f64, f64)> = pairs.into_iter().map(|(t, w)| (t, w / total)).collect();
        PowerProfile::new(&normalized).expect("normalized atoms are valid")
    })
}

/// Deterministic power draw for a given user count, with occasional silent
/// users.
fn random_powers(seed: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..k)
        .map(|_| {
            if rng.gen::<f64>() < 0.1 {
                0.0
            } else {
                rng.gen_range(0.1..4.0)
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_and_direct_sir_paths_agree(
        seed in 0u64..10_000,
        n in 8usize..24,
        k in 2usize..24,
        law in law_strategy(),
        sigma2 in 0.3f64..3.0,
    ) {
        let s = sample_signatures(n, k, law, seed, 0);
        let powers = random_powers(seed, k);
        let fast = sir_all(&s, &powers, sigma2).unwrap();
        let direct = sir_direct(&s, &powers, sigma2).unwrap();
        for (f, d) in fast.sirs.iter().zip(&direct) {
            prop_assert!((f - d).abs() <= 1e-8 * d.abs().max(1e-12), "fast {f} vs direct {d}");
        }
    }

    #[test]
    fn joint_power_noise_scaling_leaves_sirs_invariant(
        seed in 0u64..10_000,
        lambda in prop_oneof![Just(3.0f64), Just(4.0f64), Just(0.25f64)],
    ) {
        let (n, k) = (16, 12);
        let s = sample_signatures(n, k, EntryLaw::Normal, seed, 0);
        let powers = random_powers(seed, k);
        let scaled: Vec<f64> = powers.iter().map(|p| p * lambda).collect();
        let base = sir_all(&s, &powers, 1.0).unwrap();
        let moved = sir_all(&s, &scaled, lambda).unwrap();
        for (a, b) in base.sirs.iter().zip(&moved.sirs) {
            prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn fixed_point_residual_bounds_and_monotonicity(
        h in profile_strategy(),
        c in 0.05f64..4.0,
        sigma2 in 0.1f64..5.0,
    ) {
        let b = solve_b(c, &h, sigma2).unwrap();
        let residual = 1.0 / b - sigma2 - c * h.expect(|x| x / (1.0 + x * b));
        prop_assert!(residual.abs() <= 1e-12, "residual {residual}");
        prop_assert!(b > 0.0 && b <= 1.0 / sigma2 + 1e-12);
        let b_noisier = solve_b(c, &h, 1.5 * sigma2).unwrap();
        prop_assert!(b_noisier < b);
    }

    #[test]
    fn fixed_point_scale_reduction(
        h in profile_strategy(),
        c in 0.1f64..3.0,
        sigma2 in 0.2f64..3.0,
        lambda in 0.25f64..4.0,
    ) {
        let scaled_atoms: Vec<(f64, f64)> =
            h.atoms().iter().map(|&(t, w)| (lambda * t, w)).collect();
        let scaled = PowerProfile::new(&scaled_atoms).unwrap();
        let b = solve_b(c, &h, sigma2).unwrap();
        let b_scaled = solve_b(c, &scaled, lambda * sigma2).unwrap();
        prop_assert!((b_scaled * lambda - b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn stieltjes_transform_maps_upper_half_plane_to_itself(
        h in profile_strategy(),
        c in 0.1f64..3.0,
        re in -5.0f64..5.0,
        im in 1e-3f64..5.0,
    ) {
        let z = Complex64::new(re, im);
        let point = stieltjes_m(z, c, &h).unwrap();
        prop_assert!(point.m.im > 0.0);
        let integral: Complex64 = h
            .atoms()
            .iter()
            .map(|&(t, w)| w * (t / (1.0 + t * point.m)))
            .sum();
        let residual = (point.m + 1.0 / (z - c * integral)).norm();
        prop_assert!(residual <= 1e-10, "residual {residual}");
    }

    #[test]
    fn limit_distribution_mean_is_b_times_mean_power(
        h in profile_strategy(),
        c in 0.1f64..3.0,
        sigma2 in 0.2f64..3.0,
    ) {
        let atoms = limiting_sir_distribution(c, &h, sigma2).unwrap();
        let mean: f64 = atoms.iter().map(|&(loc, w)| loc * w).sum();
        let b = solve_b(c, &h, sigma2).unwrap();
        let expected = b * h.expect(|x| x);
        prop_assert!((mean - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn variance_coefficient_scale_reduction(
        p in 0.2f64..5.0,
        c in 0.1f64..3.0,
        sigma2 in 0.2f64..3.0,
        law in law_strategy(),
    ) {
        // A common-power system is the unit-power system at noise sigma2/p,
        // so the per-user fluctuation variances must match across the
        // reduction: coeff(delta_p, sigma2) * p^2 = coeff(delta_1, sigma2/p).
        let at_p = fluctuation_law(c, &PowerProfile::point_mass(p), sigma2, law).unwrap();
        let unit = fluctuation_law(c, &PowerProfile::point_mass(1.0), sigma2 / p, law).unwrap();
        let lhs = at_p.coefficient * p * p;
        prop_assert!(
            (lhs - unit.coefficient).abs() <= 1e-10 * unit.coefficient.abs().max(1.0),
            "{lhs} vs {}",
            unit.coefficient
        );
    }

    #[test]
    fn power_assignment_matches_weights(
        h in profile_strategy(),
        k in 1usize..200,
    ) {
        let powers = assign_powers(&h, k);
        prop_assert_eq!(powers.len(), k);
        prop_assert!(powers.windows(2).all(|w| w[0] <= w[1]));
        for &(t, w) in h.atoms() {
            let count = powers.iter().filter(|&&p| p == t).count() as f64;
            prop_assert!((count - w * k as f64).abs() < 1.0, "atom {t}: {count} of {k}");
        }
        let realized = empirical_profile(&powers).unwrap();
        for (&(t, w), &(rt, rw)) in h.atoms().iter().zip(realized.atoms()) {
            prop_assert_eq!(t, rt);
            prop_assert!((w - rw).abs() <= h.atoms().len() as f64 / k as f64 + 1e-12);
        }
    }
}

proptest! {
    // The general-route moments are heavier; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sum_moments_are_scale_invariant(
        t1 in 0.3f64..1.5,
        t2 in 1.5f64..4.0,
        w in 0.2f64..0.8,
        c in 0.3f64..1.5,
        sigma2 in 0.5f64..2.0,
        lambda in 0.5f64..3.0,
    ) {
        // Scaling all powers and the noise together changes no SIR, so the
        // aggregate fluctuation moments are unchanged.
        let h = PowerProfile::new(&[(t1, w), (t2, 1.0 - w)]).unwrap();
        let scaled =
            PowerProfile::new(&[(lambda * t1, w), (lambda * t2, 1.0 - w)]).unwrap();
        let rho = rho_general(c, &h, sigma2).unwrap();
        let rho_scaled = rho_general(c, &scaled, lambda * sigma2).unwrap();
        prop_assert!(
            (rho - rho_scaled).abs() <= 1e-7 * rho.abs().max(1.0),
            "rho {rho} vs {rho_scaled}"
        );
        let mu = mu_general(c, &h, sigma2).unwrap();
        let mu_scaled = mu_general(c, &scaled, lambda * sigma2).unwrap();
        prop_assert!(
            (mu - mu_scaled).abs() <= 1e-6 * mu.abs().max(1.0),
            "mu {mu} vs {mu_scaled}"
        );
    }
}
