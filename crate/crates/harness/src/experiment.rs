//! Seeded pre-train → transfer runs with per-iteration checkpoints.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use safelimit_core::env::{ArmEnv, Environment, SafetySpec};
use safelimit_core::learner::{
    collect, collect_episode, fit_linear_baseline, gae_advantages, kl_constrained_update, policy_gradient,
    RolloutBatch, UpdateOutcome,
};
use safelimit_core::safety::run_iteration;
use safelimit_core::{PolicyParams, SafetyConfig};
use serde::{Deserialize, Serialize};

use crate::config::{EnvConfig, EnvKind, ExperimentConfig, LearnerConfig};
use crate::error::{HarnessError, Result};
use crate::records::{self, IterationRecord, RECORDS_FILE, RUNS_DIR};

/// Caps the worker pool when set to a positive integer.
pub const WORKERS_ENV: &str = "SAFELIMIT_WORKERS";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
const PRETRAIN_DIR: &str = "pretrain";

const STAGE_PRETRAIN: u64 = 0;
const STAGE_FINETUNE: u64 = 1;

/// One fine-tuning run: a seed under one safety setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub seed: u64,
    pub safety: SafetyConfig,
}

impl Job {
    pub fn run_id(&self) -> String {
        format!("{}-d{}-s{}", self.safety.variant, self.safety.d_safe, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub job: Job,
    pub dir: PathBuf,
    pub records: Vec<IterationRecord>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream per (seed, stage, iteration), so a resumed run draws
/// exactly what an uninterrupted one would.
pub fn iteration_rng(seed: u64, stage: u64, iteration: usize) -> ChaCha8Rng {
    let h = splitmix64(splitmix64(splitmix64(seed) ^ stage) ^ iteration as u64);
    ChaCha8Rng::seed_from_u64(h)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| HarnessError::json(path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(HarnessError::io(path, e)),
    }
}

/// Settings a checkpoint depends on; a mismatch means the directory was
/// produced by a different configuration.
#[derive(Serialize)]
struct PretrainKey<'a> {
    kind: EnvKind,
    env: &'a EnvConfig,
    gamma: f64,
    lambda_gae: f64,
    delta_kl: f64,
    episodes: usize,
    init_std: f64,
    t_min: f64,
    t_max: f64,
    seed: u64,
}

#[derive(Serialize)]
struct JobKey<'a> {
    pretrain: String,
    pretrain_iterations: usize,
    learner: &'a LearnerConfig,
    safety: &'a SafetyConfig,
}

fn pretrain_key(cfg: &ExperimentConfig, seed: u64) -> String {
    serde_json::to_string(&PretrainKey {
        kind: cfg.env_kind(),
        env: &cfg.env,
        gamma: cfg.learner.gamma,
        lambda_gae: cfg.learner.lambda_gae,
        delta_kl: cfg.learner.delta_kl_pretrain,
        episodes: cfg.learner.episodes_per_batch_pretrain,
        init_std: cfg.learner.init_std,
        t_min: cfg.safety.t_min,
        t_max: cfg.safety.t_max,
        seed,
    })
    .expect("key serializes")
}

fn job_key(cfg: &ExperimentConfig, job: &Job) -> String {
    let learner = LearnerConfig {
        finetune_iterations: 0,
        ..cfg.learner.clone()
    };
    serde_json::to_string(&JobKey {
        pretrain: pretrain_key(cfg, job.seed),
        pretrain_iterations: cfg.learner.pretrain_iterations,
        learner: &learner,
        safety: &job.safety,
    })
    .expect("key serializes")
}

#[derive(Serialize, Deserialize)]
struct PretrainCheckpoint {
    key: String,
    completed: usize,
    policy: PolicyParams,
}

#[derive(Serialize, Deserialize)]
struct RunCheckpoint {
    key: String,
    next_iteration: usize,
    t_lim: f64,
    policy: PolicyParams,
}

/// One KL-constrained policy-gradient step on `batch`.
fn learn(policy: &PolicyParams, batch: &RolloutBatch, cfg: &LearnerConfig, delta_kl: f64) -> Result<UpdateOutcome> {
    let gae = cfg.gae();
    let baseline = fit_linear_baseline(batch, &gae);
    let advantages = gae_advantages(batch, &gae, &baseline);
    let grad = policy_gradient(batch, &advantages, policy)?;
    Ok(kl_constrained_update(policy, &grad, batch, delta_kl)?)
}

struct Plants<E> {
    train: E,
    test: E,
}

fn pretrain<E: Environment>(
    plants: &Plants<E>,
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
) -> Result<PolicyParams> {
    let l = &cfg.learner;
    let spec = cfg.env.safety_spec();
    let path = dir.join(format!("seed-{seed}.json"));
    let key = pretrain_key(cfg, seed);
    let (mut policy, start) = match read_json::<PretrainCheckpoint>(&path)? {
        Some(ck) if ck.key == key && ck.completed <= l.pretrain_iterations => (ck.policy, ck.completed),
        Some(_) => {
            return Err(HarnessError::Missing(format!(
                "{} was written by a different configuration; use a fresh output directory",
                path.display()
            )))
        }
        None => (
            PolicyParams::new(plants.train.action_dim(), plants.train.feature_dim(), l.init_std)?,
            0,
        ),
    };
    for it in start..l.pretrain_iterations {
        let mut rng = iteration_rng(seed, STAGE_PRETRAIN, it);
        let trajectories = (0..l.episodes_per_batch_pretrain)
            .map(|_| {
                let t_lim = rng.random_range(cfg.safety.t_min..=cfg.safety.t_max);
                collect_episode(&plants.train, &policy, &spec, t_lim, cfg.env.horizon, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let batch = RolloutBatch::mixed(trajectories)?;
        let outcome = learn(&policy, &batch, l, l.delta_kl_pretrain)?;
        debug!(
            "pretrain seed {seed} iteration {it}: return {:.3}, kl {:.4}",
            batch.mean_shaped_return(),
            outcome.achieved_kl
        );
        policy = outcome.params;
        let ck = PretrainCheckpoint {
            key: key.clone(),
            completed: it + 1,
            policy: policy.clone(),
        };
        write_atomic(&path, &serde_json::to_string(&ck).expect("checkpoint serializes"))?;
    }
    Ok(policy)
}

/// Keeps the first `n` records of the log, dropping anything written after
/// the last checkpoint, including a torn trailing line.
fn truncate_records(path: &Path, n: usize) -> Result<Vec<IterationRecord>> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).take(n).collect();
    if lines.len() != n {
        return Err(HarnessError::Missing(format!(
            "{} has {} records but the checkpoint expects {n}",
            path.display(),
            lines.len()
        )));
    }
    let kept = lines
        .iter()
        .map(|l| serde_json::from_str(l).map_err(|e| HarnessError::json(path, e)))
        .collect::<Result<Vec<IterationRecord>>>()?;
    let mut text = String::new();
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    write_atomic(path, &text)?;
    Ok(kept)
}

fn finetune<E: Environment>(
    plants: &Plants<E>,
    cfg: &ExperimentConfig,
    job: &Job,
    start_policy: &PolicyParams,
    dir: &Path,
) -> Result<Vec<IterationRecord>> {
    let l = &cfg.learner;
    let spec: SafetySpec = cfg.env.safety_spec();
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let rec_path = dir.join(RECORDS_FILE);
    let key = job_key(cfg, job);
    let run_id = job.run_id();

    let (mut policy, mut t_lim, start, mut records) = match read_json::<RunCheckpoint>(&ck_path)? {
        Some(ck) if ck.key == key => {
            let kept = truncate_records(&rec_path, ck.next_iteration)?;
            (ck.policy, ck.t_lim, ck.next_iteration, kept)
        }
        Some(_) => {
            return Err(HarnessError::Missing(format!(
                "{} was written by a different configuration; use a fresh output directory",
                ck_path.display()
            )))
        }
        None => {
            write_atomic(&rec_path, "")?;
            (start_policy.clone(), job.safety.initial_limit(), 0, Vec::new())
        }
    };
    if start > 0 {
        info!("{run_id}: resuming at iteration {start}");
    }

    for it in start..l.finetune_iterations {
        let mut rng = iteration_rng(job.seed, STAGE_FINETUNE, it);
        let batch = collect(
            &plants.test,
            &policy,
            &spec,
            t_lim,
            l.episodes_per_batch_finetune,
            cfg.env.horizon,
            &mut rng,
        )?;
        let outcome = learn(&policy, &batch, l, l.delta_kl_finetune)?;
        let report = run_iteration(&outcome.params, &batch, t_lim, &job.safety, l.delta_kl_finetune)?;
        let record = IterationRecord {
            run_id: run_id.clone(),
            seed: job.seed,
            variant: job.safety.variant,
            d_safe: job.safety.d_safe,
            iteration: it,
            t_lim,
            p_u: report.p_u,
            delta_pu1: report.delta_pu1,
            delta_pu2: report.delta_pu2,
            p_u_pred: report.p_u_pred,
            t_lim_next: report.t_lim_next,
            expected_damage: report.expected_damage,
            mean_return: batch.mean_shaped_return(),
            mean_base_return: batch.mean_base_return(),
            achieved_kl: outcome.achieved_kl,
            delta_kl: l.delta_kl_finetune,
            stalled: outcome.stalled,
        };
        records::append_record(&rec_path, &record)?;
        records.push(record);
        policy = outcome.params;
        t_lim = report.t_lim_next;
        let ck = RunCheckpoint {
            key: key.clone(),
            next_iteration: it + 1,
            t_lim,
            policy: policy.clone(),
        };
        write_atomic(&ck_path, &serde_json::to_string(&ck).expect("checkpoint serializes"))?;
    }
    Ok(records)
}

fn run_with<E: Environment + Sync>(plants: Plants<E>, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunOutcome>> {
    let pre_dir = out.join(PRETRAIN_DIR);
    fs::create_dir_all(&pre_dir).map_err(|e| HarnessError::io(&pre_dir, e))?;
    let policies: BTreeMap<u64, PolicyParams> = cfg
        .seeds
        .par_iter()
        .map(|&seed| pretrain(&plants, cfg, seed, &pre_dir).map(|p| (seed, p)))
        .collect::<Result<_>>()?;
    info!("pre-training done for {} seed(s)", policies.len());

    let jobs: Vec<Job> = cfg
        .jobs()
        .into_iter()
        .flat_map(|safety| cfg.seeds.iter().map(move |&seed| Job { seed, safety }))
        .collect();
    let runs = out.join(RUNS_DIR);
    jobs.par_iter()
        .map(|job| {
            let dir = runs.join(job.run_id());
            let records = finetune(&plants, cfg, job, &policies[&job.seed], &dir)?;
            info!("{}: {} iteration(s) logged", job.run_id(), records.len());
            Ok(RunOutcome {
                job: *job,
                dir,
                records,
            })
        })
        .collect()
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every job of `cfg` into `out`, resuming any checkpointed runs, and
/// writes the CSV files.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    write_atomic(&out.join(CONFIG_FILE), &cfg.to_json())?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Missing(format!("cannot start worker pool: {e}")))?;
    let outcomes = pool.install(|| match cfg.env_kind() {
        EnvKind::Arm => {
            let env = &cfg.env;
            let plants = Plants {
                train: ArmEnv::new(env.train_model(), env.horizon, env.angle_range),
                test: ArmEnv::new(env.test_model()?, env.horizon, env.angle_range),
            };
            run_with(plants, cfg, out)
        }
        EnvKind::Pointmass => {
            let plants = Plants {
                train: cfg.env.point_mass,
                test: cfg.env.point_mass,
            };
            run_with(plants, cfg, out)
        }
    })?;
    records::emit_csv(out)?;
    Ok(outcomes)
}
