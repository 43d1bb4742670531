use std::path::{Path, PathBuf};
use std::time::Instant;

use mfpsro::baselines::{run_baseline, BaselineRun};
use mfpsro::psro::{run_psro_observed, PsroResult};
use mfpsro::regret::{
    compress_ce, compress_cce, run_regret_loop_observed, PayoffSource, RegretKind, RegretLoopConfig,
};
use mfpsro::{DeterministicPolicy, MeanFieldGame, PolicySet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Invocation, SolverConfig};
use crate::error::{CliError, Result};
use crate::output::{
    seconds, write_csv, write_json, CompressRow, CurveRow, Manifest, SummaryRow, Versions, COMPRESS_FILE,
    COMPRESS_HEADER, CURVE_FILE, CURVE_HEADER, MANIFEST_FILE, RUNS_FILE, RUN_FILE, SUMMARY_FILE,
    SUMMARY_HEADER,
};

/// Contents of `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunRecord {
    Psro(PsroResult),
    Baseline(BaselineRun),
}

impl RunRecord {
    pub fn final_gap(&self) -> f64 {
        match self {
            RunRecord::Psro(r) => r
                .final_gap
                .as_ref()
                .map(|g| g.value)
                .or_else(|| r.log.last().map(|it| it.gap))
                .unwrap_or(f64::NAN),
            RunRecord::Baseline(b) => b.final_exploitability().unwrap_or(f64::NAN),
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            RunRecord::Psro(r) => r.iterations(),
            RunRecord::Baseline(b) => b.iterations,
        }
    }
}

/// One entry of `runs.json` written by `compare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub algorithm: String,
    pub seed: u64,
    pub result: RunRecord,
}

#[derive(Clone, Debug)]
pub struct SolverRun {
    pub record: RunRecord,
    pub curve: Vec<CurveRow>,
    pub summary: SummaryRow,
}

/// Runs one solver, timestamping every logged iteration.
pub fn execute(game: &MeanFieldGame, solver: &SolverConfig, seed: u64) -> Result<SolverRun> {
    let label = solver.label();
    let start = Instant::now();
    let mut curve = Vec::new();
    let row = |iteration, gap| CurveRow {
        iteration,
        wall_time_s: seconds(start.elapsed()),
        gap,
        algorithm: label.clone(),
        seed,
    };
    let record = match solver {
        SolverConfig::Psro(config) => {
            RunRecord::Psro(run_psro_observed(game, config, |it| curve.push(row(it.iteration, it.gap)))?)
        }
        SolverConfig::Baseline { algorithm, iterations } => RunRecord::Baseline(run_baseline(
            game,
            *algorithm,
            *iterations,
            |p| curve.push(row(p.iteration, p.exploitability)),
        )?),
    };
    let summary = SummaryRow {
        algorithm: label.clone(),
        seed,
        final_gap: record.final_gap(),
        iterations: record.iterations(),
        wall_time_s: seconds(start.elapsed()),
    };
    Ok(SolverRun { record, curve, summary })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))
}

fn manifest(inv: &Invocation, command: &str, seeds: Vec<u64>, artifacts: Vec<String>) -> Manifest {
    Manifest {
        command: command.into(),
        config_path: inv.config_path.clone(),
        config_sha256: inv.config_sha256.clone(),
        seeds,
        versions: Versions::default(),
        artifacts,
    }
}

/// Directory of one repeat: the output directory itself for a single run,
/// `seed-<s>` below it otherwise.
pub fn run_dir(inv: &Invocation, seed: u64) -> PathBuf {
    if inv.config.repeats == 1 {
        inv.output_dir.clone()
    } else {
        inv.output_dir.join(format!("seed-{seed}"))
    }
}

fn write_run(inv: &Invocation, dir: &Path, seed: u64, run: &SolverRun) -> Result<()> {
    write_json(&dir.join(RUN_FILE), &run.record)?;
    write_csv(&dir.join(CURVE_FILE), &run.curve, CURVE_HEADER)?;
    let m = manifest(inv, "run", vec![seed], vec![RUN_FILE.into(), CURVE_FILE.into()]);
    write_json(&dir.join(MANIFEST_FILE), &m)
}

/// `run`: the configured solver once per repeat.
pub fn cmd_run(inv: &Invocation) -> Result<Vec<SummaryRow>> {
    let solver = inv
        .config
        .solver
        .as_ref()
        .ok_or_else(|| CliError::Config("`run` needs a [solver] table".into()))?;
    let game = inv.game()?;
    let jobs: Vec<(u64, SolverConfig)> = inv
        .seeds()
        .into_iter()
        .map(|s| Ok((s, inv.prepared(solver, s)?)))
        .collect::<Result<_>>()?;
    let results: Vec<Result<SummaryRow>> = pool(inv.jobs)?.install(|| {
        jobs.par_iter()
            .map(|(seed, solver)| {
                let run = execute(&game, solver, *seed)?;
                write_run(inv, &run_dir(inv, *seed), *seed, &run)?;
                Ok(run.summary)
            })
            .collect()
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
    if inv.config.repeats > 1 {
        let artifacts = inv
            .seeds()
            .iter()
            .flat_map(|s| [RUN_FILE, CURVE_FILE, MANIFEST_FILE].map(|f| format!("seed-{s}/{f}")))
            .collect();
        write_json(&inv.output_dir.join(MANIFEST_FILE), &manifest(inv, "run", inv.seeds(), artifacts))?;
    }
    Ok(summaries)
}

/// `compare`: every configured solver on the same game, merged outputs.
pub fn cmd_compare(inv: &Invocation) -> Result<Vec<SummaryRow>> {
    if inv.config.solvers.len() < 2 {
        return Err(CliError::Config(format!(
            "`compare` needs at least two [[solvers]], found {}",
            inv.config.solvers.len()
        )));
    }
    let game = inv.game()?;
    let mut jobs = Vec::new();
    for seed in inv.seeds() {
        for solver in &inv.config.solvers {
            jobs.push((seed, inv.prepared(solver, seed)?));
        }
    }
    let results: Vec<Result<SolverRun>> =
        pool(inv.jobs)?.install(|| jobs.par_iter().map(|(seed, s)| execute(&game, s, *seed)).collect());
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let curve: Vec<CurveRow> = runs.iter().flat_map(|r| r.curve.iter().cloned()).collect();
    let summary: Vec<SummaryRow> = runs.iter().map(|r| r.summary.clone()).collect();
    let entries: Vec<CompareEntry> = runs
        .into_iter()
        .map(|r| CompareEntry {
            algorithm: r.summary.algorithm,
            seed: r.summary.seed,
            result: r.record,
        })
        .collect();
    let dir = &inv.output_dir;
    write_json(&dir.join(RUNS_FILE), &entries)?;
    write_csv(&dir.join(CURVE_FILE), &curve, CURVE_HEADER)?;
    write_csv(&dir.join(SUMMARY_FILE), &summary, SUMMARY_HEADER)?;
    let artifacts = [RUNS_FILE, CURVE_FILE, SUMMARY_FILE].map(String::from).to_vec();
    write_json(&dir.join(MANIFEST_FILE), &manifest(inv, "compare", inv.seeds(), artifacts))?;
    Ok(summary)
}

/// `compress-demo`: one regret loop over the game's constant-action
/// policies, logging the uniform-average and compressed device regrets
/// after every step.
pub fn cmd_compress_demo(inv: &Invocation) -> Result<Vec<CompressRow>> {
    let cfg = inv.config.compress.clone().unwrap_or_default();
    let game = inv.game()?;
    let set = PolicySet::from_policies(
        &game,
        (0..game.num_actions()).map(|a| DeterministicPolicy::constant(&game, a)),
    )?;
    let loop_config = RegretLoopConfig {
        kind: cfg.kind,
        learner: cfg.learner,
        max_steps: cfg.steps,
        compress_every: 0,
        payoff_source: match inv.config.game.noise {
            Some(n) => PayoffSource::Noisy {
                noise: n.model,
                samples: n.samples,
            },
            None => PayoffSource::Exact,
        },
        ..RegretLoopConfig::for_kind(cfg.kind)
    };
    loop_config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.log_every == 0 {
        return Err(CliError::Config("compress.log_every must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(inv.seed);
    let mut rows = Vec::new();
    let start = Instant::now();
    run_regret_loop_observed(&game, &set, &loop_config, &mut rng, |trace| {
        let t = trace.len();
        if t % cfg.log_every != 0 && t != cfg.steps {
            return Ok(());
        }
        let (uniform, compressed) = match cfg.kind {
            RegretKind::External => (trace.uniform_external_regret(), compress_cce(trace)?),
            RegretKind::Internal => (trace.uniform_internal_regret(), compress_ce(trace)?),
        };
        rows.push(CompressRow {
            step: t,
            wall_time_s: seconds(start.elapsed()),
            uniform_gap: uniform.unwrap_or(f64::NAN),
            compressed_gap: compressed.value,
            nonzero_atoms: compressed.support().len(),
        });
        Ok(())
    })?;

    let dir = &inv.output_dir;
    write_csv(&dir.join(COMPRESS_FILE), &rows, COMPRESS_HEADER)?;
    let m = manifest(inv, "compress-demo", vec![inv.seed], vec![COMPRESS_FILE.into()]);
    write_json(&dir.join(MANIFEST_FILE), &m)?;
    Ok(rows)
}

/// First step at which `gap(row) <= threshold`.
pub fn first_step_below(rows: &[CompressRow], threshold: f64, gap: impl Fn(&CompressRow) -> f64) -> Option<usize> {
    rows.iter().find(|r| gap(r) <= threshold).map(|r| r.step)
}
