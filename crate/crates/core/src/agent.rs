//! Recommendation policies.
//!
//! [`PolicyKind::HierSucb`] picks a configuration by its own UCB first and then
//! the attribute pair by the full visualization UCB (configuration, attribute
//! pair and bias terms) restricted to that configuration. The other kinds drop
//! one or both of the hierarchy and the bias term, or score every triple as an
//! independent LinUCB arm.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bias::{bias_reward, BiasTable, Horizon, UnplayedBias};
use crate::error::{invalid, Error, Result};
use crate::model::{Catalog, Feedback, Visualization};
use crate::ridge::{dot, quad_form, RidgeEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "hier-sucb")]
    HierSucb,
    #[serde(rename = "linucb")]
    LinUcb,
    #[serde(rename = "c2ucb")]
    C2Ucb,
    #[serde(rename = "hier-nobias")]
    HierNoBias,
    #[serde(rename = "hier-flat")]
    HierFlat,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::HierSucb,
        PolicyKind::HierNoBias,
        PolicyKind::HierFlat,
        PolicyKind::C2Ucb,
        PolicyKind::LinUcb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::HierSucb => "hier-sucb",
            PolicyKind::LinUcb => "linucb",
            PolicyKind::C2Ucb => "c2ucb",
            PolicyKind::HierNoBias => "hier-nobias",
            PolicyKind::HierFlat => "hier-flat",
        }
    }

    /// Configuration chosen in a separate first stage.
    pub fn hierarchical(self) -> bool {
        matches!(self, PolicyKind::HierSucb | PolicyKind::HierNoBias)
    }

    /// Bias arms contribute to the score and are updated.
    pub fn uses_bias(self) -> bool {
        matches!(self, PolicyKind::HierSucb | PolicyKind::HierFlat)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Tunables shared by every policy kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentOptions {
    pub alpha: f64,
    pub horizon: Horizon,
    pub unplayed_bias: UnplayedBias,
    pub bias_ceiling: Option<f64>,
}

impl AgentOptions {
    pub fn new(alpha: f64, horizon: Horizon) -> Self {
        AgentOptions {
            alpha,
            horizon,
            ..AgentOptions::default()
        }
    }
}

impl Default for AgentOptions {
    fn default() -> Self {
        AgentOptions {
            alpha: 1.0,
            horizon: Horizon::Fixed(200),
            unplayed_bias: UnplayedBias::Infinite,
            bias_ceiling: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Estimators {
    Semi {
        config: RidgeEstimator,
        attr: RidgeEstimator,
    },
    Joint(RidgeEstimator),
}

#[derive(Debug, Clone)]
pub struct Agent {
    kind: PolicyKind,
    catalog: Arc<Catalog>,
    options: AgentOptions,
    estimators: Estimators,
    bias: BiasTable,
    pair_features: Vec<Vec<f64>>,
    round: u64,
    pending: Option<Visualization>,
    last_evaluations: usize,
}

impl Agent {
    pub fn new(kind: PolicyKind, catalog: Arc<Catalog>, options: AgentOptions) -> Result<Self> {
        let dc = catalog.config_dim();
        let d2 = 2 * catalog.attr_dim();
        let estimators = match kind {
            PolicyKind::LinUcb => Estimators::Joint(RidgeEstimator::new(dc + d2, options.alpha)?),
            _ => Estimators::Semi {
                config: RidgeEstimator::new(dc, options.alpha)?,
                attr: RidgeEstimator::new(d2, options.alpha)?,
            },
        };
        let bias = BiasTable::new(options.horizon)?
            .with_unplayed(options.unplayed_bias)
            .with_ceiling(options.bias_ceiling);
        let pair_features = catalog
            .pairs()
            .iter()
            .map(|&(x, y)| catalog.pair_feature(x, y))
            .collect::<Result<_>>()?;
        Ok(Agent {
            kind,
            catalog,
            options,
            estimators,
            bias,
            pair_features,
            round: 0,
            pending: None,
            last_evaluations: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn options(&self) -> &AgentOptions {
        &self.options
    }

    /// Completed select/observe rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn pending(&self) -> Option<Visualization> {
        self.pending
    }

    /// UCB evaluations performed by the most recent [`Agent::select`].
    pub fn last_evaluations(&self) -> usize {
        self.last_evaluations
    }

    pub fn bias_table(&self) -> &BiasTable {
        &self.bias
    }

    pub fn config_estimator(&self) -> Option<&RidgeEstimator> {
        match &self.estimators {
            Estimators::Semi { config, .. } => Some(config),
            Estimators::Joint(_) => None,
        }
    }

    pub fn attr_estimator(&self) -> Option<&RidgeEstimator> {
        match &self.estimators {
            Estimators::Semi { attr, .. } => Some(attr),
            Estimators::Joint(_) => None,
        }
    }

    pub fn joint_estimator(&self) -> Option<&RidgeEstimator> {
        match &self.estimators {
            Estimators::Joint(j) => Some(j),
            Estimators::Semi { .. } => None,
        }
    }

    /// `θ_Cᵀ x_c + ρ_c`.
    pub fn config_ucb(&self, c: usize) -> Result<f64> {
        let x = &self.catalog.config(c)?.vector;
        match &self.estimators {
            Estimators::Semi { config, .. } => config.ucb(x),
            Estimators::Joint(_) => Err(Error::InvalidState(
                "linucb has no separate configuration estimator".into(),
            )),
        }
    }

    /// Full visualization score for the agent's policy kind. `+∞` while the
    /// bias arm is unplayed under [`UnplayedBias::Infinite`].
    pub fn vis_ucb(&self, v: &Visualization) -> Result<f64> {
        self.catalog.check(v)?;
        let xc = &self.catalog.config(v.config)?.vector;
        let pair = self.catalog.pair_feature(v.x_attr, v.y_attr)?;
        match &self.estimators {
            Estimators::Semi { config, attr } => {
                let mut score = config.ucb(xc)? + attr.ucb(&pair)?;
                if self.kind.uses_bias() {
                    score += self.bias.bonus(v);
                }
                Ok(score)
            }
            Estimators::Joint(joint) => {
                let mut z = xc.clone();
                z.extend(pair);
                joint.ucb(&z)
            }
        }
    }

    /// Chooses the next visualization and marks it pending.
    pub fn select(&mut self) -> Result<Visualization> {
        if self.catalog.pairs().is_empty() {
            return Err(Error::InvalidState("catalog has no attribute pairs".into()));
        }
        let (v, evals) = match &self.estimators {
            Estimators::Semi { config, attr } => self.select_semi(config, attr),
            Estimators::Joint(joint) => self.select_joint(joint),
        };
        self.last_evaluations = evals;
        self.pending = Some(v);
        Ok(v)
    }

    fn select_semi(&self, config: &RidgeEstimator, attr: &RidgeEstimator) -> (Visualization, usize) {
        let cat = &self.catalog;
        let config_scores: Vec<f64> = cat
            .configs()
            .iter()
            .map(|c| config.predict_unchecked(&c.vector) + config.radius_unchecked(&c.vector))
            .collect();
        let pair_scores: Vec<f64> = self
            .pair_features
            .iter()
            .map(|z| attr.predict_unchecked(z) + attr.radius_unchecked(z))
            .collect();
        let log_t = self.bias.current_log_horizon();
        let use_bias = self.kind.uses_bias();
        let score_pairs = |c: usize, best: &mut Best| {
            for (p, &(x, y)) in cat.pairs().iter().enumerate() {
                let v = Visualization::new(c, x, y);
                let mut s = config_scores[c] + pair_scores[p];
                if use_bias {
                    s += self.bias.bonus_with_log(&v, log_t);
                }
                best.offer(s, v);
            }
        };

        let mut best = Best::default();
        let evals = if self.kind.hierarchical() {
            let mut top = 0;
            for (c, &s) in config_scores.iter().enumerate() {
                if s > config_scores[top] {
                    top = c;
                }
            }
            score_pairs(top, &mut best);
            cat.n_configs() + cat.pairs().len()
        } else {
            for c in 0..cat.n_configs() {
                score_pairs(c, &mut best);
            }
            cat.n_actions()
        };
        (best.action.expect("non-empty catalog"), evals)
    }

    /// Scores `[x_c; x_x; x_y]` for every triple by splitting the quadratic
    /// form into configuration, pair and cross blocks.
    fn select_joint(&self, joint: &RidgeEstimator) -> (Visualization, usize) {
        let cat = &self.catalog;
        let dc = cat.config_dim();
        let dp = 2 * cat.attr_dim();
        let inv = joint.gram_inv();
        let theta = joint.theta().as_slice();
        let alpha = joint.alpha();

        let config_terms: Vec<(f64, f64, Vec<f64>)> = cat
            .configs()
            .iter()
            .map(|c| {
                let x = &c.vector;
                let pred = dot(&theta[..dc], x);
                let block = inv.view((0, 0), (dc, dc)).into_owned();
                let own = quad_form(&block, x);
                // cross[i] = Σ_j A[dc + i, j] x[j]
                let cross = (0..dp)
                    .map(|i| (0..dc).map(|j| inv[(dc + i, j)] * x[j]).sum())
                    .collect();
                (pred, own, cross)
            })
            .collect();
        let pair_block = inv.view((dc, dc), (dp, dp)).into_owned();
        let pair_terms: Vec<(f64, f64)> = self
            .pair_features
            .iter()
            .map(|z| (dot(&theta[dc..], z), quad_form(&pair_block, z)))
            .collect();

        let mut best = Best::default();
        for (c, (cpred, cquad, cross)) in config_terms.iter().enumerate() {
            for (p, &(x, y)) in cat.pairs().iter().enumerate() {
                let (ppred, pquad) = pair_terms[p];
                let q = cquad + 2.0 * dot(cross, &self.pair_features[p]) + pquad;
                let s = cpred + ppred + alpha * q.max(0.0).sqrt();
                best.offer(s, Visualization::new(c, x, y));
            }
        }
        (best.action.expect("non-empty catalog"), cat.n_actions())
    }

    /// Applies feedback for the pending recommendation.
    pub fn observe(&mut self, v: Visualization, fb: Feedback) -> Result<()> {
        match self.pending {
            Some(p) if p == v => {}
            Some(p) => {
                return Err(Error::InvalidState(format!(
                    "feedback for {v} but {p} is pending"
                )))
            }
            None => return Err(Error::InvalidState("no pending recommendation".into())),
        }
        self.record(v, fb)
    }

    /// Applies feedback for `v` whether or not it was selected, e.g. when
    /// replaying a log or forcing an action.
    pub fn record(&mut self, v: Visualization, fb: Feedback) -> Result<()> {
        fb.validate()?;
        self.catalog.check(&v)?;
        let (r_c, r_a) = fb.resolved();
        let xc = &self.catalog.config(v.config)?.vector;
        let pair = self.catalog.pair_feature(v.x_attr, v.y_attr)?;
        match &mut self.estimators {
            Estimators::Semi { config, attr } => {
                config.update(xc, f64::from(u8::from(r_c)))?;
                attr.update(&pair, f64::from(u8::from(r_a)))?;
                if self.kind.uses_bias() {
                    let rb = bias_reward(u8::from(fb.r_vis), u8::from(r_c), u8::from(r_a))?;
                    self.bias.observe(v, rb)?;
                }
            }
            Estimators::Joint(joint) => {
                let mut z = xc.clone();
                z.extend(pair);
                joint.update(&z, f64::from(u8::from(fb.r_vis)))?;
            }
        }
        self.round += 1;
        self.pending = None;
        Ok(())
    }
}

/// Running argmax; the first of exactly tied scores wins.
#[derive(Default)]
struct Best {
    score: f64,
    action: Option<Visualization>,
}

impl Best {
    fn offer(&mut self, score: f64, v: Visualization) {
        if self.action.is_none() || score > self.score {
            self.score = score;
            self.action = Some(v);
        }
    }
}
