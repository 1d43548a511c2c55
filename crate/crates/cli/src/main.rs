use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hiervis::corpus::{gen_synthetic_corpus, load_corpus, write_corpus};
use hiervis::harness::{run_ablation_suite, run_to_csv, DEFAULT_UNPLAYED_BIAS};
use hiervis::{EnvMode, ExperimentConfig, MetricTable, PolicyKind, UnplayedBias};

#[derive(Parser)]
#[command(name = "hiervis", version, about = "Run visualization-recommendation bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its metric CSV.
    Run {
        #[arg(long, default_value = "hier-sucb", value_parser = parse_algo)]
        algo: PolicyKind,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Run every algorithm on the same seeds, one CSV each.
    Ablation {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Write a synthetic corpus (attributes.jsonl, users.jsonl).
    GenCorpus {
        #[arg(long, default_value_t = 1000)]
        users: usize,
        #[arg(long, default_value_t = 2)]
        datasets_per_user: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    SyntheticSetwise,
    SyntheticLatent,
    Corpus,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "synthetic-setwise")]
    env: EnvKind,
    /// Corpus directory holding attributes.jsonl and users.jsonl (with --env corpus).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Liked-part threshold for --env synthetic-latent.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    latent_threshold: f64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    rounds: u64,
    #[arg(long, default_value_t = 100, value_parser = parse_positive)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Probability of each reported answer being flipped.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 10)]
    n_configs: usize,
    #[arg(long, default_value_t = 20)]
    n_attrs: usize,
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    allow_self_pair: bool,
    /// Bias bonus of never-played triples: a number, or "inf".
    #[arg(long, value_parser = parse_unplayed, allow_negative_numbers = true)]
    unplayed_bias: Option<UnplayedBias>,
}

fn parse_algo(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = PolicyKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err("expected a positive integer".into()),
    }
}

fn parse_unplayed(s: &str) -> Result<UnplayedBias, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(UnplayedBias::Infinite);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(UnplayedBias::Value)
        .ok_or_else(|| "expected a finite number or \"inf\"".into())
}

enum Failure {
    Usage(String),
    Runtime(hiervis::Error),
}

impl From<hiervis::Error> for Failure {
    fn from(e: hiervis::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl ExperimentArgs {
    fn config(&self, algorithm: PolicyKind) -> Result<ExperimentConfig, Failure> {
        let env = match (self.env, &self.corpus) {
            (EnvKind::Corpus, Some(dir)) => EnvMode::Corpus(Arc::new(load_corpus(dir)?)),
            (EnvKind::Corpus, None) => return Err(Failure::Usage("--env corpus requires --corpus <DIR>".into())),
            (_, Some(_)) => return Err(Failure::Usage("--corpus is only used with --env corpus".into())),
            (EnvKind::SyntheticSetwise, None) => EnvMode::SyntheticSetwise,
            (EnvKind::SyntheticLatent, None) => EnvMode::SyntheticLatent {
                threshold: self.latent_threshold,
            },
        };
        Ok(ExperimentConfig {
            algorithm,
            env,
            n_configs: self.n_configs,
            n_attrs: self.n_attrs,
            dim: self.dim,
            rounds: self.rounds,
            iterations: self.iterations,
            alpha: self.alpha,
            flip_prob: self.noise,
            seed: self.seed,
            allow_self_pair: self.allow_self_pair,
            unplayed_bias: self.unplayed_bias.unwrap_or(DEFAULT_UNPLAYED_BIAS),
            jobs: self.jobs,
            ..ExperimentConfig::default()
        })
    }
}

fn summary(kind: PolicyKind, table: &MetricTable, path: &std::path::Path) {
    let last = table.rounds() - 1;
    println!(
        "{kind:<12} reward {:.3}  regret {:>8.2}  hr@1 {:.3}  evals/round {:>6}  {}",
        table.avg_reward[last],
        table.cum_regret[last],
        table.hr_at_1[last],
        table.evals_per_round[last],
        path.display()
    );
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { algo, exp } => {
            let cfg = exp.config(algo)?;
            let (table, path) = run_to_csv(&cfg, &exp.out_dir)?;
            summary(algo, &table, &path);
        }
        Command::Ablation { exp } => {
            let cfg = exp.config(PolicyKind::HierSucb)?;
            for r in run_ablation_suite(&cfg, &exp.out_dir)? {
                summary(r.algorithm, &r.table, &r.path);
            }
        }
        Command::GenCorpus {
            users,
            datasets_per_user,
            seed,
            out_dir,
        } => {
            let corpus = gen_synthetic_corpus(users, datasets_per_user, seed)?;
            write_corpus(&corpus, &out_dir)?;
            println!(
                "{} users, {} datasets ({} over the attribute limit dropped) in {}",
                corpus.users.len(),
                corpus.datasets.len(),
                corpus.excluded,
                out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
