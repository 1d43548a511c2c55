//! Hierarchical contextual combinatorial semi-bandits for visualization
//! recommendation.
//!
//! A visualization is a triple (chart configuration, x attribute, y attribute).
//! After each recommendation the user says whether they like it and, when
//! they don't, whether they like the configuration and the attribute pair on
//! their own. [`Agent`] learns one ridge estimator per part plus a per-triple
//! bias correction and picks the next triple by an upper confidence bound.
//!
//! ```
//! use std::sync::Arc;
//! use hiervis::{Agent, AgentOptions, Catalog, Feedback, PolicyKind};
//!
//! let catalog = Arc::new(Catalog::synthetic(10, 20, 10, 7, false)?);
//! let mut agent = Agent::new(PolicyKind::HierSucb, catalog, AgentOptions::default())?;
//! let v = agent.select()?;
//! assert_eq!(agent.last_evaluations(), 10 + 20 * 19);
//! agent.observe(v, Feedback::disliked(true, false))?;
//! # Ok::<(), hiervis::Error>(())
//! ```

pub mod agent;
pub mod bias;
pub mod corpus;
pub mod env;
pub mod error;
pub mod features;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod ridge;
pub mod seed;

pub use agent::{Agent, AgentOptions, PolicyKind};
pub use bias::{bias_reward, BiasArm, BiasTable, Horizon, UnplayedBias};
pub use corpus::{corpus_to_environment, gen_synthetic_corpus, load_corpus, write_corpus, Corpus};
pub use env::{gen_user_latent, gen_user_setwise, Truth, UserModel};
pub use error::{Error, Result};
pub use harness::{run_ablation_suite, run_experiment, EnvMode, ExperimentConfig};
pub use metrics::{MetricTable, RoundRecord, RunLog};
pub use model::{AttributeEmbedding, Catalog, ChartType, ConfigurationArm, Feedback, Visualization};
pub use ridge::RidgeEstimator;
