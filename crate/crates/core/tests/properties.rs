//! Randomised invariants.

use cwp_core::chain::FiniteChain;
use cwp_core::exact::{build_exact_chain, ChainOptions};
use cwp_core::model::*;
use cwp_core::potential::{magic_formula_hitting, mean_hitting_time};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = RateKind> {
    prop_oneof![Just(RateKind::Sqrt), Just(RateKind::HeatBath), Just(RateKind::Metropolis)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_energy_is_permutation_invariant(raw in prop::collection::vec(0.01f64..1.0, 2..7), beta in 0.5f64..8.0, rot in 0usize..7) {
        let s: f64 = raw.iter().sum();
        let x: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let mut y = x.clone();
        y.rotate_left(rot % x.len());
        y.reverse();
        prop_assert!((free_energy(&x, beta) - free_energy(&y, beta)).abs() < 1e-14);
        prop_assert!((log_stationary_weight(&[3, 1, 4], beta) - log_stationary_weight(&[4, 3, 1], beta)).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_is_exchangeable_and_bounded(sigma in prop::collection::vec(0usize..4, 1..30), seed in any::<u64>()) {
        let mut perm = sigma.clone();
        // Deterministic shuffle from the seed.
        let n = perm.len();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13; state ^= state >> 7; state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let h = hamiltonian(&sigma, 4);
        prop_assert!((h - hamiltonian(&perm, 4)).abs() < 1e-12);
        prop_assert_eq!(counts_of(&sigma, 4), counts_of(&perm, 4));
        let nf = n as f64;
        prop_assert!(h >= -nf / 2.0 - 1e-12 && h <= -nf / 8.0 + 1e-12);
    }

    #[test]
    fn proportions_chain_is_reversible(q in 2usize..5, n in 1usize..14, beta in 0.3f64..7.0, kind in kind_strategy()) {
        let pc = build_exact_chain(ModelParams::new(q, beta, n, kind).unwrap(), ChainOptions::default()).unwrap();
        prop_assert!(pc.chain.detailed_balance_residual() < 1e-12);
        let total: f64 = pc.chain.stationary.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

/// Random connected reversible chain: a spanning path plus random extra edges.
fn random_chain(n: usize, extra: &[(usize, usize, f64)], weights: &[f64], path_c: &[f64]) -> FiniteChain {
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut cond: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, path_c[i])).collect();
    for &(a, b, c) in extra {
        let (a, b) = (a % n, b % n);
        if a != b && !cond.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
            cond.push((a, b, c));
        }
    }
    FiniteChain::from_conductances(n, &cond, &pi).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn magic_formula_matches_direct_solve_on_random_chains(
        n in 3usize..200,
        weights in prop::collection::vec(0.01f64..10.0, 200),
        path_c in prop::collection::vec(1e-4f64..1.0, 200),
        extra in prop::collection::vec((0usize..200, 0usize..200, 1e-4f64..1.0), 0..300),
        b_size in 1usize..5,
    ) {
        let chain = random_chain(n, &extra, &weights[..n], &path_c[..n]);
        let b: Vec<usize> = (0..b_size.min(n - 1)).map(|i| (i * 7919) % n).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let direct = mean_hitting_time(&chain, &b).unwrap();
        for x in 0..n {
            if b.contains(&x) {
                continue;
            }
            let mf = magic_formula_hitting(&chain, x, &b).unwrap();
            let rel = (mf - direct.values[x]).abs() / direct.values[x];
            prop_assert!(rel < 1e-8, "x={} rel={}", x, rel);
        }
    }
}
