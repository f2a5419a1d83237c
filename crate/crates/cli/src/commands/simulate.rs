//! `capo simulate`: run a grid of seeded training runs in the synthetic
//! chain environment and write traces plus a summary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use capo_core::objective::ObjectiveConfig;
use capo_core::policy::TabularPolicy;
use capo_core::rewards::RewardConfig;
use capo_core::sim::{
    derive_seed, train, Algo, ChainEnv, JudgeKind, NoisyJudge, TrainConfig, DEFAULT_LEARNING_RATE,
};
use capo_core::voting::VoteMode;
use capo_core::DefaultScalar;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::CliError;

pub struct SimulateArgs {
    pub spec: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Experiment grid definition, loaded from a TOML spec file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ExperimentSpec {
    pub grid: GridSection,
    pub env: EnvSection,
    pub train: TrainSection,
    pub judge: JudgeNoiseSection,
    pub genorm: GenOrmSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub algos: Vec<String>,
    pub seeds: usize,
    pub c_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub vote_modes: Vec<String>,
    /// Optional judge-noise axis: each level runs the step judge with
    /// FP = FN = level (0 meaning the oracle). Empty keeps the single
    /// judge configured in the `[judge]` section.
    pub noise_levels: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            algos: vec!["capo".into(), "grpo".into()],
            seeds: 10,
            c_values: vec![2.0],
            p_values: vec![1.0],
            k_values: vec![1],
            vote_modes: vec!["majority".into()],
            noise_levels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub checkpoints: usize,
    pub actions: usize,
    pub answer_seed: u64,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            checkpoints: 6,
            actions: 4,
            answer_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub group_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub mini_epochs: usize,
    pub beta_kl: f64,
    pub eps_clip: f64,
    pub std_epsilon: f64,
    pub format_bonus: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            group_size: 16,
            iterations: 300,
            learning_rate: DEFAULT_LEARNING_RATE,
            mini_epochs: 4,
            beta_kl: 1e-2,
            eps_clip: 0.2,
            std_epsilon: 1e-6,
            format_bonus: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeNoiseSection {
    pub false_positive: f64,
    pub false_negative: f64,
}

impl Default for JudgeNoiseSection {
    fn default() -> Self {
        Self {
            false_positive: 0.0,
            false_negative: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenOrmSection {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GenOrmSection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

/// One grid point after validation.
#[derive(Debug, Clone)]
struct GridPoint {
    algo: Algo,
    w_whole: f64,
    w_process: f64,
    k: usize,
    vote_mode: VoteMode,
    /// Symmetric judge-noise level from the grid axis, if one is set.
    noise: Option<f64>,
}

impl GridPoint {
    /// Stable tag used both for seed derivation and file names. Points
    /// that ignore a dimension collapse onto one tag so grids never
    /// re-run identical baselines: the outcome-only baseline consults
    /// neither the reward weights nor the judge, and the outcome-judge
    /// baseline ignores the reward/vote dimensions.
    fn tag(&self) -> String {
        let noise_suffix = match (self.algo, self.noise) {
            (Algo::Grpo, _) | (_, None) => String::new(),
            (_, Some(level)) => format!("_noise{level}"),
        };
        match self.algo {
            Algo::Capo => format!(
                "capo_c{}_p{}_k{}_{}{}",
                self.w_whole, self.w_process, self.k, self.vote_mode, noise_suffix
            ),
            Algo::Grpo => "grpo".to_string(),
            Algo::GrpoGenOrm => format!("grpo-genorm{noise_suffix}"),
        }
    }
}

/// Aggregate of one grid point across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub tag: String,
    pub algo: String,
    pub w_whole: f64,
    pub w_process: f64,
    pub k: usize,
    pub vote_mode: String,
    pub seeds: usize,
    pub mean_final_accuracy: f64,
    pub std_final_accuracy: f64,
    pub mean_final_train_accuracy: f64,
}

pub fn run(args: &SimulateArgs, engine: &EngineConfig) -> Result<(), CliError> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::validation(format!("cannot read spec {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                CliError::validation(format!("invalid spec {}: {e}", path.display()))
            })?
        }
        None => spec_from_engine(engine),
    };
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&engine.paths.output_dir));
    let rows = run_spec(&spec, args.seed, &out_dir)?;
    print_summary(&rows);
    Ok(())
}

/// Default experiment when no spec file is given: the token-level
/// algorithm against the outcome-only baseline with the engine's sim,
/// reward, voting, and objective settings.
fn spec_from_engine(engine: &EngineConfig) -> ExperimentSpec {
    ExperimentSpec {
        grid: GridSection {
            algos: vec!["capo".into(), "grpo".into()],
            seeds: 10,
            c_values: vec![engine.reward.w_whole],
            p_values: vec![engine.reward.w_process],
            k_values: vec![engine.k],
            vote_modes: vec![engine.vote_mode.to_string()],
            noise_levels: Vec::new(),
        },
        env: EnvSection {
            checkpoints: engine.sim.checkpoints,
            actions: engine.sim.actions,
            answer_seed: engine.sim.answer_seed,
        },
        train: TrainSection {
            group_size: engine.sim.group_size,
            iterations: engine.sim.iterations,
            learning_rate: engine.sim.learning_rate,
            mini_epochs: engine.objective.mini_epochs,
            beta_kl: engine.objective.beta_kl,
            eps_clip: engine.objective.eps_clip,
            std_epsilon: engine.objective.std_epsilon,
            format_bonus: 0.0,
        },
        judge: JudgeNoiseSection {
            false_positive: engine.sim.judge_false_positive,
            false_negative: engine.sim.judge_false_negative,
        },
        genorm: GenOrmSection::default(),
    }
}

/// Expands the grid into deduplicated points in a stable order.
fn grid_points(grid: &GridSection) -> Result<Vec<GridPoint>, CliError> {
    let noise_axis: Vec<Option<f64>> = if grid.noise_levels.is_empty() {
        vec![None]
    } else {
        grid.noise_levels.iter().map(|&level| Some(level)).collect()
    };
    let mut points: Vec<GridPoint> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for algo_name in &grid.algos {
        let algo: Algo = algo_name.parse().map_err(CliError::Validation)?;
        for &c in &grid.c_values {
            for &p in &grid.p_values {
                for &k in &grid.k_values {
                    for vote_name in &grid.vote_modes {
                        let vote_mode: VoteMode =
                            vote_name.parse().map_err(CliError::Validation)?;
                        for &noise in &noise_axis {
                            let point = GridPoint {
                                algo,
                                w_whole: c,
                                w_process: p,
                                k,
                                vote_mode,
                                noise,
                            };
                            if seen.insert(point.tag()) {
                                points.push(point);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

/// Step judge for one grid point: its noise level when the grid carries
/// a noise axis, otherwise the spec's `[judge]` section.
fn judge_for(spec: &ExperimentSpec, point: &GridPoint) -> JudgeKind {
    let (fp, fn_) = match point.noise {
        Some(level) => (level, level),
        None => (spec.judge.false_positive, spec.judge.false_negative),
    };
    if fp == 0.0 && fn_ == 0.0 {
        JudgeKind::Oracle
    } else {
        JudgeKind::Noisy(NoisyJudge {
            false_positive_rate: fp,
            false_negative_rate: fn_,
            rng_seed: 0,
        })
    }
}

/// Executes every grid point and writes traces and the summary; returns
/// the summary rows in execution order.
pub fn run_spec(
    spec: &ExperimentSpec,
    master_seed: u64,
    out_dir: &Path,
) -> Result<Vec<SummaryRow>, CliError> {
    if spec.grid.seeds == 0 {
        return Err(CliError::validation("grid.seeds must be at least 1"));
    }
    let env = ChainEnv::seeded(spec.env.checkpoints, spec.env.actions, spec.env.answer_seed)?;
    let points = grid_points(&spec.grid)?;

    std::fs::create_dir_all(out_dir)?;
    let mut rows: Vec<SummaryRow> = Vec::new();
    for point in &points {
        let reward = RewardConfig {
            w_whole: point.w_whole,
            w_process: point.w_process,
            format_bonus: spec.train.format_bonus,
            std_epsilon: spec.train.std_epsilon,
        };
        if point.algo == Algo::Capo {
            if let Some(warning) = reward.asymmetry_warning() {
                eprintln!("warning: {}: {warning}", point.tag());
            }
        }
        let cfg = TrainConfig {
            group_size: spec.train.group_size,
            num_critiques: point.k,
            vote_mode: point.vote_mode,
            reward,
            objective: ObjectiveConfig {
                eps_clip: spec.train.eps_clip,
                beta_kl: spec.train.beta_kl,
            },
            std_epsilon: spec.train.std_epsilon,
            mini_epochs: spec.train.mini_epochs,
            learning_rate: spec.train.learning_rate,
            genorm_alpha: spec.genorm.alpha,
            genorm_beta: spec.genorm.beta,
        };

        let judge = judge_for(spec, point);
        let mut finals: Vec<f64> = Vec::with_capacity(spec.grid.seeds);
        let mut train_finals: Vec<f64> = Vec::with_capacity(spec.grid.seeds);
        for seed_index in 0..spec.grid.seeds {
            let tag = point.tag();
            let run_seed = derive_seed(master_seed, &format!("{tag}/seed={seed_index}"));
            let policy = TabularPolicy::<DefaultScalar>::uniform(
                env.num_checkpoints,
                env.num_actions,
                cfg.learning_rate,
            );
            let run = train(
                &env,
                policy,
                point.algo,
                &judge,
                &cfg,
                spec.train.iterations,
                run_seed,
            )?;
            finals.push(run.trace.final_policy_accuracy().unwrap_or(0.0));
            train_finals.push(run.trace.final_train_accuracy().unwrap_or(0.0));

            let base = out_dir.join(format!("trace_{tag}_seed{seed_index}"));
            std::fs::write(base.with_extension("csv"), run.trace.to_csv())?;
            let mut jsonl = String::new();
            for record in &run.trace.records {
                jsonl.push_str(&serde_json::to_string(record).expect("serializable"));
                jsonl.push('\n');
            }
            std::fs::write(base.with_extension("jsonl"), jsonl)?;
        }

        rows.push(SummaryRow {
            tag: point.tag(),
            algo: point.algo.to_string(),
            w_whole: point.w_whole,
            w_process: point.w_process,
            k: point.k,
            vote_mode: point.vote_mode.to_string(),
            seeds: spec.grid.seeds,
            mean_final_accuracy: mean(&finals),
            std_final_accuracy: std_dev(&finals),
            mean_final_train_accuracy: mean(&train_finals),
        });
    }

    std::fs::write(out_dir.join("summary.csv"), summary_csv(&rows))?;
    Ok(rows)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "tag,algo,w_whole,w_process,k,vote_mode,seeds,mean_final_accuracy,\
         std_final_accuracy,mean_final_train_accuracy\n",
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.tag,
            row.algo,
            row.w_whole,
            row.w_process,
            row.k,
            row.vote_mode,
            row.seeds,
            row.mean_final_accuracy,
            row.std_final_accuracy,
            row.mean_final_train_accuracy
        );
    }
    out
}

pub fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:<34} {:>7} {:>22} {:>12}",
        "run", "seeds", "final accuracy (mean±std)", "train acc"
    );
    for row in rows {
        println!(
            "{:<34} {:>7} {:>15.4} ± {:.4} {:>12.4}",
            row.tag,
            row.seeds,
            row.mean_final_accuracy,
            row.std_final_accuracy,
            row.mean_final_train_accuracy
        );
    }
}
