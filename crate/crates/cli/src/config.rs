use std::path::{Path, PathBuf};

use mfpsro::baselines::Baseline;
use mfpsro::games::{load_game, GameSpec};
use mfpsro::psro::PsroConfig;
use mfpsro::regret::{BaseLearner, PayoffSource, RegretKind};
use mfpsro::MeanFieldGame;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One experiment file: a game and what to run on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    /// Solver for `run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    /// Solvers for `compare`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solvers: Vec<SolverConfig>,
    /// Regret loop for `compress-demo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compress: Option<CompressConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_repeats() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverConfig {
    Psro(PsroConfig),
    Baseline {
        #[serde(flatten)]
        algorithm: Baseline,
        iterations: usize,
    },
}

impl SolverConfig {
    /// Value of the `algorithm` column.
    pub fn label(&self) -> String {
        match self {
            SolverConfig::Psro(c) => {
                let mode = serde_json::to_value(c.mode).ok();
                format!("psro_{}", mode.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
            }
            SolverConfig::Baseline { algorithm, .. } => algorithm.label(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SolverConfig::Psro(c) => c.validate().map_err(|e| CliError::Config(e.to_string())),
            SolverConfig::Baseline { algorithm, iterations } => {
                if *iterations == 0 {
                    return Err(CliError::Config("baseline iterations must be at least 1".into()));
                }
                match algorithm {
                    Baseline::MirrorDescent { learning_rate } if !(*learning_rate > 0.0) => Err(
                        CliError::Config(format!("learning rate {learning_rate} must be positive")),
                    ),
                    _ => Ok(()),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub steps: usize,
    /// Log (and compress) every this many steps; the last step is always logged.
    pub log_every: usize,
    pub kind: RegretKind,
    pub learner: BaseLearner,
}

impl Default for CompressConfig {
    fn default() -> Self {
        CompressConfig {
            steps: 1000,
            log_every: 1,
            kind: RegretKind::External,
            learner: BaseLearner::RegretMatching,
        }
    }
}

/// A parsed configuration together with its source and command-line
/// overrides.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub config: ExperimentConfig,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

impl Invocation {
    pub fn load(path: &Path, seed: Option<u64>, jobs: Option<usize>, output: Option<PathBuf>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = parse_config(path, &text)?;
        if config.repeats == 0 {
            return Err(CliError::Config("repeats must be at least 1".into()));
        }
        if jobs == Some(0) {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        Ok(Invocation {
            config_sha256: crate::output::sha256_hex(text.as_bytes()),
            output_dir: output.unwrap_or_else(|| config.output_dir.clone()),
            seed: seed.unwrap_or(config.seed),
            jobs: jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            config_path: path.to_path_buf(),
            config,
        })
    }

    /// Seeds of the configured repeats: `seed, seed + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.config.repeats as u64).map(|k| self.seed + k).collect()
    }

    pub fn game(&self) -> Result<MeanFieldGame> {
        load_game(&self.config.game).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The solver with the seed and any game-level observation noise applied.
    pub fn prepared(&self, solver: &SolverConfig, seed: u64) -> Result<SolverConfig> {
        solver.validate()?;
        let mut solver = solver.clone();
        if let SolverConfig::Psro(c) = &mut solver {
            c.seed = seed;
            if let Some(noise) = self.config.game.noise {
                c.payoff_source = PayoffSource::Noisy {
                    noise: noise.model,
                    samples: noise.samples,
                };
            }
        }
        Ok(solver)
    }
}

/// Parses TOML, or JSON when the file name ends in `.json`.
pub fn parse_config(path: &Path, text: &str) -> Result<ExperimentConfig> {
    let parse_error = |line, column, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(text).map_err(|e| parse_error(e.line(), e.column(), e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            parse_error(line, column, e.message().to_string())
        })
    }
}

/// One-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_solver_variants() {
        let text = r#"
            output_dir = "x"
            [game]
            name = "biased_rps"
            [[solvers]]
            kind = "psro"
            mode = "cce"
            [[solvers]]
            kind = "baseline"
            algorithm = "omd"
            learning_rate = 0.1
            iterations = 20
            [[solvers]]
            kind = "baseline"
            algorithm = "fp"
            iterations = 5
        "#;
        let c = parse_config(Path::new("a.toml"), text).unwrap();
        let labels: Vec<String> = c.solvers.iter().map(SolverConfig::label).collect();
        assert_eq!(labels, ["psro_cce", "omd(0.1)", "fp"]);
        assert_eq!(c.repeats, 1);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_config(Path::new("a.toml"), "[game]\nname = \n").unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let err = parse_config(Path::new("a.json"), "{\n  \"game\": 3\n}").unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 2, .. }));
    }

    #[test]
    fn crowd_parameters_in_toml() {
        let text = "[game]\nname = \"crowd_chain\"\nL = 5\nS = 10\n[solver]\nkind = \"psro\"\n";
        let c = parse_config(Path::new("c.toml"), text).unwrap();
        assert_eq!(load_game(&c.game).unwrap().num_states(), 5);
    }
}
