//! Experiment driver: fresh environment and agent per iteration, select →
//! respond → observe for a fixed number of rounds, aggregation into metric
//! tables and CSV export.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::agent::{Agent, AgentOptions, PolicyKind};
use crate::bias::{Horizon, UnplayedBias};
use crate::corpus::{corpus_to_environment, Corpus};
use crate::env::{
    gen_user_latent, gen_user_setwise, UserModel, DEFAULT_COMBO_RATE, DEFAULT_FLIP_PROB, DEFAULT_PART_RATE,
};
use crate::error::{invalid, Result};
use crate::metrics::{MetricTable, RoundRecord, RunLog};
use crate::model::{Catalog, DEFAULT_ATTR_DIM};
use crate::seed::derive_seed;

const CATALOG_STREAM: u64 = 1;
const USER_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub enum EnvMode {
    /// Random liked configuration and attribute sets.
    SyntheticSetwise,
    /// Liked parts are those above `threshold` under latent linear scores.
    SyntheticLatent { threshold: f64 },
    /// One (user, dataset) episode of the corpus per iteration, cycling.
    Corpus(Arc<Corpus>),
}

impl EnvMode {
    pub fn name(&self) -> &'static str {
        match self {
            EnvMode::SyntheticSetwise => "synthetic-setwise",
            EnvMode::SyntheticLatent { .. } => "synthetic-latent",
            EnvMode::Corpus(_) => "corpus",
        }
    }
}

impl fmt::Display for EnvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: PolicyKind,
    pub env: EnvMode,
    pub n_configs: usize,
    pub n_attrs: usize,
    pub dim: usize,
    pub rounds: u64,
    pub iterations: usize,
    pub alpha: f64,
    pub flip_prob: f64,
    pub part_rate: f64,
    pub combo_rate: f64,
    pub seed: u64,
    pub allow_self_pair: bool,
    pub unplayed_bias: UnplayedBias,
    pub bias_ceiling: Option<f64>,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: PolicyKind::HierSucb,
            env: EnvMode::SyntheticSetwise,
            n_configs: 10,
            n_attrs: 20,
            dim: DEFAULT_ATTR_DIM,
            rounds: 200,
            iterations: 100,
            alpha: 1.0,
            flip_prob: DEFAULT_FLIP_PROB,
            part_rate: DEFAULT_PART_RATE,
            combo_rate: DEFAULT_COMBO_RATE,
            seed: 0,
            allow_self_pair: false,
            unplayed_bias: DEFAULT_UNPLAYED_BIAS,
            bias_ceiling: None,
            jobs: 0,
        }
    }
}

/// Bonus for bias arms that have never been played.
pub const DEFAULT_UNPLAYED_BIAS: UnplayedBias = UnplayedBias::Value(0.0);

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.iterations == 0 {
            return Err(invalid("rounds and iterations must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let EnvMode::Corpus(c) = &self.env {
            if c.episodes().is_empty() {
                return Err(invalid("corpus has no user with a liked visualization"));
            }
        }
        Ok(())
    }

    pub fn agent_options(&self) -> AgentOptions {
        AgentOptions {
            alpha: self.alpha,
            horizon: Horizon::Fixed(self.rounds),
            unplayed_bias: self.unplayed_bias,
            bias_ceiling: self.bias_ceiling,
        }
    }

    /// Catalog and user for iteration `i`; shared by every algorithm.
    pub fn environment(&self, i: usize) -> Result<(Arc<Catalog>, UserModel)> {
        let seed_i = derive_seed(self.seed, i as u64);
        let cat_seed = derive_seed(seed_i, CATALOG_STREAM);
        let user_seed = derive_seed(seed_i, USER_STREAM);
        match &self.env {
            EnvMode::SyntheticSetwise => {
                let cat = Catalog::synthetic(self.n_configs, self.n_attrs, self.dim, cat_seed, self.allow_self_pair)?;
                let user = gen_user_setwise(
                    self.n_configs,
                    self.n_attrs,
                    user_seed,
                    self.part_rate,
                    self.combo_rate,
                    self.flip_prob,
                )?;
                Ok((Arc::new(cat), user))
            }
            EnvMode::SyntheticLatent { threshold } => {
                let cat = Catalog::synthetic(self.n_configs, self.n_attrs, self.dim, cat_seed, self.allow_self_pair)?;
                let user = gen_user_latent(&cat, user_seed, *threshold, self.combo_rate, self.flip_prob)?;
                Ok((Arc::new(cat), user))
            }
            EnvMode::Corpus(corpus) => {
                let episodes = corpus.episodes();
                let (u, d) = episodes[i % episodes.len()];
                let (cat, user) = corpus_to_environment(&corpus.datasets[d], &corpus.users[u], self.flip_prob, user_seed)?;
                Ok((Arc::new(cat), user))
            }
        }
    }
}

/// One T-round interaction between a fresh agent and `user`.
pub fn run_episode(
    kind: PolicyKind,
    catalog: Arc<Catalog>,
    user: &UserModel,
    options: AgentOptions,
    rounds: u64,
) -> Result<RunLog> {
    let best = user.optimal_reward() as u8;
    let mut agent = Agent::new(kind, catalog, options)?;
    let mut log = RunLog::new();
    for t in 0..rounds {
        let v = agent.select()?;
        let evaluations = agent.last_evaluations();
        let fb = user.respond(t, &v);
        let truth = u8::from(user.truth(&v).r_vis);
        agent.observe(v, fb)?;
        log.push(RoundRecord {
            round: t + 1,
            action: v,
            observed: u8::from(fb.r_vis),
            truth,
            regret: best - truth,
            evaluations,
        });
    }
    Ok(log)
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_iteration(cfg: &ExperimentConfig, i: usize) -> Result<RunLog> {
    let (catalog, user) = cfg.environment(i)?;
    run_episode(cfg.algorithm, catalog, &user, cfg.agent_options(), cfg.rounds)
}

/// Logs for every iteration, in iteration order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunLog>> {
    cfg.validate()?;
    with_pool(cfg.jobs, || {
        (0..cfg.iterations)
            .into_par_iter()
            .map(|i| run_iteration(cfg, i))
            .collect::<Result<Vec<_>>>()
    })?
}

/// `{algorithm}_{environment}.csv`
pub fn csv_name(kind: PolicyKind, env: &EnvMode) -> String {
    format!("{}_{}.csv", kind, env.name())
}

/// Runs `cfg` and writes its metric table into `out_dir`.
pub fn run_to_csv(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(MetricTable, PathBuf)> {
    let table = MetricTable::from_logs(&run_experiment(cfg)?)?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(csv_name(cfg.algorithm, &cfg.env));
    table.write_csv_file(&path)?;
    Ok((table, path))
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub algorithm: PolicyKind,
    pub table: MetricTable,
    pub path: PathBuf,
}

/// Every policy kind on the same seeds, one CSV each.
pub fn run_ablation_suite(base: &ExperimentConfig, out_dir: &Path) -> Result<Vec<AblationResult>> {
    PolicyKind::ALL
        .iter()
        .map(|&algorithm| {
            let cfg = ExperimentConfig {
                algorithm,
                ..base.clone()
            };
            let (table, path) = run_to_csv(&cfg, out_dir)?;
            Ok(AblationResult { algorithm, table, path })
        })
        .collect()
}
