use mfpsro::best_response::best_response;
use mfpsro::metrics::exploitability;
use mfpsro::mfg::{mixture_flow, MixedPolicy, PolicySet};
use mfpsro::regret::solve_minimax;
use mfpsro_oracles::{brute_best_value, brute_exploitability, brute_minimax, enumerate_policies, random_small_game};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0) + 1e-3).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

#[test]
fn exploitability_and_best_response_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let game = random_small_game(&mut rng);
        let all = enumerate_policies(&game).unwrap();
        let k = rng.random_range(1..=all.len().min(4));
        let chosen: Vec<_> = sample(&mut rng, all.len(), k).into_iter().map(|i| all[i].clone()).collect();
        let nu = random_weights(&mut rng, k);

        let set = PolicySet::from_policies(&game, chosen.clone()).unwrap();
        let mixed = MixedPolicy::new(nu.clone()).unwrap();
        let fast = exploitability(&game, &set, &mixed).unwrap().value;
        let brute = brute_exploitability(&game, &chosen, &nu).unwrap();
        assert!((fast - brute).abs() <= 1e-9, "{fast} vs {brute}");

        let br = best_response(&game, &mixture_flow(&set, &mixed).unwrap()).unwrap();
        let best = brute_best_value(&game, &chosen, &nu).unwrap();
        assert!((br.value - best).abs() <= 1e-10, "{} vs {best}", br.value);
    }
}

#[test]
fn minimax_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let m: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let lp = solve_minimax(&m).unwrap().value;
        let brute = brute_minimax(&m).unwrap();
        assert!((lp - brute).abs() <= 5e-3, "{lp} vs {brute}");
        assert!(lp <= brute + 1e-9);
    }
}

#[test]
fn rectangular_minimax_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let m: Vec<Vec<f64>> = (0..r).map(|_| (0..c).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let lp = solve_minimax(&m).unwrap().value;
        assert!((lp - brute_minimax(&m).unwrap()).abs() <= 5e-3);
    }
}
