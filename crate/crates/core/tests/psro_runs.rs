use mfpsro::games::{biased_rps, coop_betray_punish, load_game, GameSpec};
use mfpsro::metrics::{cce_gap, ce_gap};
use mfpsro::psro::{run_psro, PsroConfig, PsroMode, PsroResult};

#[test]
fn result_round_trips_through_json() {
    let game = biased_rps();
    let result = run_psro(&game, &PsroConfig::for_mode(PsroMode::Cce)).unwrap();
    let text = serde_json::to_string(&result).unwrap();
    let back: PsroResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, result);
}

#[test]
fn repeated_runs_are_identical() {
    let game = coop_betray_punish();
    for mode in [PsroMode::Nash, PsroMode::Cce, PsroMode::Ce] {
        let config = PsroConfig::for_mode(mode);
        let a = serde_json::to_string(&run_psro(&game, &config).unwrap()).unwrap();
        let b = serde_json::to_string(&run_psro(&game, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn final_gaps_match_recomputation() {
    let game = coop_betray_punish();
    for mode in [PsroMode::Cce, PsroMode::Ce] {
        let result = run_psro(&game, &PsroConfig::for_mode(mode)).unwrap();
        let set = result.policy_set(&game).unwrap();
        let fresh = match mode {
            PsroMode::Cce => cce_gap(&game, &set, &result.equilibrium).unwrap(),
            _ => ce_gap(&game, &set, &result.equilibrium).unwrap(),
        };
        assert_eq!(result.final_gap.unwrap().value, fresh.value);
        assert!(fresh.value <= 1e-2);
    }
}

#[test]
fn loaded_games_run() {
    let spec: GameSpec = serde_json::from_str(r#"{"name": "crowd_chain", "L": 3, "S": 4}"#).unwrap();
    let game = load_game(&spec).unwrap();
    let result = run_psro(&game, &PsroConfig::for_mode(PsroMode::Cce)).unwrap();
    assert!(result.terminated);
    assert!(result.final_gap.unwrap().value <= 1e-2);
}
