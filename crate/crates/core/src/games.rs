//! Builtin benchmark games and the declarative game loader.
//!
//! One-shot normal-form games are encoded as single-state, single-step
//! mean-field games whose reward reads the population's action marginal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfg::{Horizon, MeanFieldGame, NoiseModel};

/// Action labels of the three-action normal-form games.
pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;

/// Crowd-chain actions.
pub const LEFT: usize = 0;
pub const STAY: usize = 1;
pub const RIGHT: usize = 2;

/// Default movement cost in the crowd chain.
pub const DEFAULT_MOVE_COST: f64 = 0.1;

/// Biased rock-paper-scissors: rewards are linear in the action marginal.
pub fn biased_rps() -> MeanFieldGame {
    MeanFieldGame::builder("biased_rps", 1, 3)
        .reward(|_, a, pop| {
            let (ma, mb, mc) = (pop.action(A), pop.action(B), pop.action(C));
            match a {
                A => 0.5 * mb - 0.3 * mc,
                B => 0.3 * mc - 0.7 * ma,
                _ => 0.7 * ma - 0.5 * mb,
            }
        })
        .reward_bound(0.7)
        .build()
        .expect("valid builtin game")
}

/// Coop / Betray / Punish: cooperate, exploit cooperators, or punish
/// betrayers at a cost to cooperators. Quadratic in the action marginal.
pub fn coop_betray_punish() -> MeanFieldGame {
    MeanFieldGame::builder("coop_betray_punish", 1, 3)
        .reward(|_, a, pop| {
            let (ma, mb, mc) = (pop.action(A), pop.action(B), pop.action(C));
            match a {
                A => ma - 20.0 / 9.0 * (ma - mc) * mc - 2.0 * mb,
                B => 2.0 * (ma - mb) - 238.0 * mc,
                _ => 200.0 / 9.0 * (ma - mc) * mc,
            }
        })
        .reward_bound(238.0)
        .build()
        .expect("valid builtin game")
}

/// Congestion game on a line of `length` cells: agents start in cell 0,
/// move left, stay or right (clamped), and pay `aversion * mu(x)` for the
/// crowd at their cell plus `move_cost` per move.
pub fn crowd_chain(length: usize, steps: usize, aversion: f64) -> Result<MeanFieldGame> {
    crowd_chain_with(length, Horizon::Finite { steps }, aversion, DEFAULT_MOVE_COST)
}

pub fn crowd_chain_with(
    length: usize,
    horizon: Horizon,
    aversion: f64,
    move_cost: f64,
) -> Result<MeanFieldGame> {
    if length < 2 {
        return Err(Error::Parameter(format!("crowd chain needs L >= 2, got {length}")));
    }
    if horizon.is_empty() {
        return Err(Error::Parameter("crowd chain needs S >= 1".into()));
    }
    if !(aversion > 0.0 && aversion.is_finite()) {
        return Err(Error::Parameter(format!("crowd aversion must be > 0, got {aversion}")));
    }
    if !(move_cost >= 0.0 && move_cost.is_finite()) {
        return Err(Error::Parameter(format!("move cost must be >= 0, got {move_cost}")));
    }
    MeanFieldGame::builder("crowd_chain", length, 3)
        .transition(move |x, a| chain_step(length, x, a))
        .reward(move |x, a, pop| {
            let moving = if a != STAY { move_cost } else { 0.0 };
            -aversion * pop.state(x) - moving
        })
        .horizon(horizon)
        .reward_bound(aversion + move_cost)
        .build()
}

/// Same dynamics as the crowd chain, but agents are attracted to crowds:
/// `r(x, a, mu) = +mu(x)`. Violates monotonicity.
pub fn anti_congestion(length: usize, steps: usize) -> Result<MeanFieldGame> {
    if length < 2 || steps == 0 {
        return Err(Error::Parameter("anti-congestion needs L >= 2 and S >= 1".into()));
    }
    MeanFieldGame::builder("anti_congestion", length, 3)
        .transition(move |x, a| chain_step(length, x, a))
        .reward(|x, _, pop| pop.state(x))
        .horizon(Horizon::Finite { steps })
        .reward_bound(1.0)
        .build()
}

/// One-shot game where action 2 strictly dominates: `r(a, mu) = base_a - 0.2 mu(a)`
/// with `base = (0, 0.5, 1)`.
pub fn dominant_action() -> MeanFieldGame {
    const BASE: [f64; 3] = [0.0, 0.5, 1.0];
    MeanFieldGame::builder("dominant_action", 1, 3)
        .reward(|_, a, pop| BASE[a] - 0.2 * pop.action(a))
        .reward_bound(1.0)
        .build()
        .expect("valid builtin game")
}

/// Identically zero reward.
pub fn zero_reward(num_states: usize, num_actions: usize, steps: usize) -> Result<MeanFieldGame> {
    MeanFieldGame::builder("zero_reward", num_states, num_actions)
        .transition(move |x, a| (x + a) % num_states.max(1))
        .reward(|_, _, _| 0.0)
        .horizon(Horizon::Finite { steps })
        .reward_bound(0.0)
        .build()
}

fn chain_step(length: usize, x: usize, a: usize) -> usize {
    match a {
        LEFT => x.saturating_sub(1),
        RIGHT => (x + 1).min(length - 1),
        _ => x,
    }
}

/// Observation noise attached to a game description.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub model: NoiseModel,
    /// Evaluations averaged per payoff observation.
    pub samples: usize,
}

/// Declarative game description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(flatten)]
    pub parameters: BTreeMap<String, f64>,
}

impl GameSpec {
    pub fn named(name: impl Into<String>) -> Self {
        GameSpec {
            name: name.into(),
            noise: None,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

/// Names accepted by [`load_game`].
pub const REGISTERED_GAMES: &[&str] = &[
    "biased_rps",
    "coop_betray_punish",
    "crowd_chain",
    "anti_congestion",
    "dominant_action",
    "zero_reward",
];

struct Params<'a> {
    spec: &'a GameSpec,
}

impl Params<'_> {
    fn allow(&self, keys: &[&str]) -> Result<()> {
        match self.spec.parameters.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!(
                "game `{}` has no parameter `{k}` (expected one of {keys:?})",
                self.spec.name
            ))),
            None => Ok(()),
        }
    }

    fn real(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.spec.parameters.get(key) {
            Some(v) if v.is_finite() => Ok(*v),
            Some(v) => Err(Error::Config(format!("parameter `{key}` = {v} is not finite"))),
            None => default.ok_or_else(|| {
                Error::Config(format!("game `{}` requires parameter `{key}`", self.spec.name))
            }),
        }
    }

    fn count(&self, key: &str, default: Option<usize>) -> Result<usize> {
        let v = self.real(key, default.map(|d| d as f64))?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Config(format!(
                "parameter `{key}` = {v} must be a non-negative integer"
            )));
        }
        Ok(v as usize)
    }
}

/// Builds the game described by `spec`.
pub fn load_game(spec: &GameSpec) -> Result<MeanFieldGame> {
    let p = Params { spec };
    if let Some(noise) = &spec.noise {
        noise.model.validate()?;
        if noise.samples == 0 {
            return Err(Error::Config("noise needs samples >= 1".into()));
        }
    }
    let wrap = |e: Error| match e {
        Error::Parameter(m) => Error::Config(format!("game `{}`: {m}", spec.name)),
        other => other,
    };
    match spec.name.as_str() {
        "biased_rps" => {
            p.allow(&[])?;
            Ok(biased_rps())
        }
        "coop_betray_punish" => {
            p.allow(&[])?;
            Ok(coop_betray_punish())
        }
        "dominant_action" => {
            p.allow(&[])?;
            Ok(dominant_action())
        }
        "crowd_chain" => {
            p.allow(&["L", "S", "aversion", "move_cost", "gamma"])?;
            let length = p.count("L", None)?;
            let aversion = p.real("aversion", Some(1.0))?;
            let move_cost = p.real("move_cost", Some(DEFAULT_MOVE_COST))?;
            let horizon = match spec.parameters.get("gamma") {
                Some(&gamma) => match spec.parameters.get("S") {
                    Some(_) => Horizon::Discounted {
                        gamma,
                        truncation: p.count("S", None)?,
                    },
                    None => Horizon::discounted(gamma).map_err(wrap)?,
                },
                None => Horizon::Finite {
                    steps: p.count("S", None)?,
                },
            };
            crowd_chain_with(length, horizon, aversion, move_cost).map_err(wrap)
        }
        "anti_congestion" => {
            p.allow(&["L", "S"])?;
            anti_congestion(p.count("L", None)?, p.count("S", None)?).map_err(wrap)
        }
        "zero_reward" => {
            p.allow(&["states", "actions", "S"])?;
            zero_reward(
                p.count("states", Some(1))?,
                p.count("actions", Some(1))?,
                p.count("S", Some(1))?,
            )
            .map_err(wrap)
        }
        other => Err(Error::UnknownGame(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfg::{occupancy_flow, DeterministicPolicy, Population};

    fn one_shot(marginal: [f64; 3]) -> ([f64; 1], [f64; 3]) {
        ([1.0], marginal)
    }

    fn r(game: &MeanFieldGame, a: usize, marginal: [f64; 3]) -> f64 {
        let (s, sa) = one_shot(marginal);
        game.reward(0, a, &Population::new(&s, &sa, 3))
    }

    #[test]
    fn biased_rps_rewards() {
        let g = biased_rps();
        assert_eq!(r(&g, A, [0.0, 1.0, 0.0]), 0.5);
        assert_eq!(r(&g, C, [1.0, 0.0, 0.0]), 0.7);
        assert_eq!(r(&g, B, [1.0, 0.0, 0.0]), -0.7);
        let third = 1.0 / 3.0;
        assert!((r(&g, A, [third; 3]) - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn coop_betray_punish_rewards() {
        let g = coop_betray_punish();
        assert_eq!(r(&g, A, [1.0, 0.0, 0.0]), 1.0);
        assert_eq!(r(&g, B, [1.0, 0.0, 0.0]), 2.0);
        assert_eq!(r(&g, C, [0.5, 0.0, 0.5]), 0.0);
        assert_eq!(r(&g, B, [0.0, 0.0, 1.0]), -238.0);
    }

    #[test]
    fn crowd_chain_rewards() {
        let g = crowd_chain(2, 3, 2.0).unwrap();
        let states = [0.5, 0.5];
        let joint = [0.0, 0.5, 0.0, 0.0, 0.5, 0.0];
        let pop = Population::new(&states, &joint, 3);
        for x in 0..2 {
            assert_eq!(g.reward(x, STAY, &pop), -1.0);
            assert!((g.reward(x, LEFT, &pop) - (-1.1)).abs() < 1e-15);
        }
        let delta = [1.0, 0.0];
        let joint = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(g.reward(0, STAY, &Population::new(&delta, &joint, 3)), -2.0);
        assert_eq!(g.transition(0, LEFT), 0);
        assert_eq!(g.transition(1, RIGHT), 1);
        assert_eq!(g.transition(0, RIGHT), 1);
    }

    #[test]
    fn crowd_chain_rejects_bad_sizes() {
        assert!(matches!(crowd_chain(1, 3, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(crowd_chain(3, 0, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(crowd_chain(3, 3, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn loader_resolves_registered_names() {
        let g = load_game(&GameSpec::named("biased_rps")).unwrap();
        assert_eq!(g.name(), "biased_rps");
        let spec = GameSpec::named("crowd_chain")
            .with("L", 5.0)
            .with("S", 10.0)
            .with("aversion", 1.0);
        let g = load_game(&spec).unwrap();
        assert_eq!((g.num_states(), g.horizon().len()), (5, 10));
        assert_eq!(
            load_game(&GameSpec::named("nope")).unwrap_err(),
            Error::UnknownGame("nope".into())
        );
    }

    #[test]
    fn loader_reports_bad_parameters() {
        let e = load_game(&GameSpec::named("crowd_chain").with("L", 5.0)).unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("`S`")));
        let e = load_game(&GameSpec::named("biased_rps").with("x", 1.0)).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = load_game(&GameSpec::named("crowd_chain").with("L", 1.0).with("S", 2.0)).unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("L >= 2")));
    }

    #[test]
    fn discounted_crowd_chain_from_spec() {
        let spec = GameSpec::named("crowd_chain").with("L", 3.0).with("gamma", 0.9);
        let g = load_game(&spec).unwrap();
        assert!(g.horizon().is_discounted());
        let flow = occupancy_flow(&g, &DeterministicPolicy::constant(&g, RIGHT)).unwrap();
        assert!(flow.conservation_error() < 1e-10);
    }

    #[test]
    fn builtin_reward_bounds_hold_on_vertices() {
        for g in [biased_rps(), coop_betray_punish(), dominant_action()] {
            for v in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.3, 0.3, 0.4]] {
                for a in 0..3 {
                    assert!(r(&g, a, v).abs() <= g.reward_bound() + 1e-12);
                }
            }
        }
    }
}
