use mfpsro::best_response::best_response;
use mfpsro::games::{biased_rps, coop_betray_punish, crowd_chain};
use mfpsro::metrics::{cce_gap, ce_gap, exploitability, random_policy_set, weighted_ce_gap};
use mfpsro::mfg::{mixture_flow, occupancy_flow, payoff};
use mfpsro::regret::{compress_ce, compress_cce, row_value, solve_minimax, RegretTrace};
use mfpsro::{CorrelationDevice, DeterministicPolicy, MixedPolicy, PolicySet};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let z: f64 = w.iter().sum();
        w.into_iter().map(|v| v / z).collect()
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, cols), rows)
}

fn trace_strategy(track_internal: bool) -> impl Strategy<Value = RegretTrace> {
    (2usize..5, 1usize..25)
        .prop_flat_map(|(n, t)| prop::collection::vec((simplex(n), prop::collection::vec(-1.0f64..1.0, n)), t))
        .prop_map(move |rows| {
            let mut trace = RegretTrace::new(track_internal);
            for (nu, j) in rows {
                trace.push(MixedPolicy::new(nu).unwrap(), j).unwrap();
            }
            trace
        })
}

fn all_actions(game: &mfpsro::MeanFieldGame) -> PolicySet {
    PolicySet::from_policies(
        game,
        (0..game.num_actions()).map(|a| DeterministicPolicy::constant(game, a)),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compressed_cce_beats_uniform(trace in trace_strategy(false)) {
        let sol = compress_cce(&trace).unwrap();
        prop_assert!(sol.value <= trace.uniform_external_regret().unwrap() + 1e-9);
    }

    #[test]
    fn compressed_ce_beats_uniform(trace in trace_strategy(true)) {
        let sol = compress_ce(&trace).unwrap();
        prop_assert!(sol.value <= trace.uniform_internal_regret().unwrap() + 1e-9);
    }

    #[test]
    fn minimax_duality((m, probe) in (1usize..7, 1usize..7).prop_flat_map(|(r, c)| (matrix(r, c), simplex(r)))) {
        let sol = solve_minimax(&m).unwrap();
        prop_assert!(sol.duality_gap().abs() <= 1e-7);
        prop_assert!((sol.rho.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(sol.value <= row_value(&m, &probe) + 1e-9);
    }

    #[test]
    fn crowd_flows_conserve_mass(seed in any::<u64>(), nu in simplex(4)) {
        let game = crowd_chain(5, 8, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_policy_set(&game, 4, &mut rng).unwrap();
        for i in 0..set.len() {
            prop_assert!(set.flow(i).conservation_error() < 1e-12);
        }
        let mixed = mixture_flow(&set, &MixedPolicy::new(nu).unwrap()).unwrap();
        prop_assert!(mixed.conservation_error() < 1e-12);
    }

    #[test]
    fn best_response_dominates_random_policies(seed in any::<u64>()) {
        let game = crowd_chain(4, 6, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = random_policy_set(&game, 3, &mut rng).unwrap();
        let mu = occupancy_flow(&game, set.policy(0)).unwrap();
        let br = best_response(&game, &mu).unwrap();
        for p in set.policies() {
            prop_assert!(payoff(&game, p, &mu).unwrap() <= br.value + 1e-10);
        }
    }

    #[test]
    fn gap_ordering(atoms in prop::collection::vec((0.05f64..1.0, simplex(3)), 1..4), cbp in any::<bool>()) {
        let game = if cbp { coop_betray_punish() } else { biased_rps() };
        let set = all_actions(&game);
        let rho = CorrelationDevice::from_weighted(
            atoms.into_iter().map(|(w, nu)| (w, MixedPolicy::new(nu).unwrap())),
        )
        .unwrap();
        let cce = cce_gap(&game, &set, &rho).unwrap().value;
        let ce = ce_gap(&game, &set, &rho).unwrap().value;
        let weighted = weighted_ce_gap(&game, &set, &rho).unwrap().value;
        let slack = 1e-9 * game.reward_range();
        // A coarse deviation is one conditional deviation applied to every
        // recommendation, so it gains at most the sum of weighted gains.
        prop_assert!(cce <= 3.0 * weighted.max(0.0) + slack);
        prop_assert!(weighted <= ce.max(0.0) + slack);
        prop_assert!(ce >= -slack);
    }

    #[test]
    fn singleton_cce_is_exploitability(nu in simplex(3)) {
        let game = biased_rps();
        let set = all_actions(&game);
        let nu = MixedPolicy::new(nu).unwrap();
        let cce = cce_gap(&game, &set, &CorrelationDevice::singleton(nu.clone())).unwrap().value;
        let nash = exploitability(&game, &set, &nu).unwrap().value;
        prop_assert!((cce - nash).abs() < 1e-12);
        prop_assert!(nash >= -1e-12);
    }
}
