//! Per-visualization bias bandit.
//!
//! Every (configuration, x, y) triple owns an independent arm whose value is
//! the running mean of the bias rewards it has received, with a count-based
//! UCB radius `sqrt(2 ln T / t_γ)`.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::model::Visualization;

/// Bias reward `f(r_V, r_C, r_A) = r_V - r_C * r_A`.
///
/// Equals -1 exactly when both parts were liked but the whole was rejected.
pub fn bias_reward(r_vis: u8, r_config: u8, r_attrs: u8) -> Result<i8> {
    for (name, v) in [("r_vis", r_vis), ("r_config", r_config), ("r_attrs", r_attrs)] {
        if v > 1 {
            return Err(invalid(format!("{name} must be 0 or 1, got {v}")));
        }
    }
    Ok(r_vis as i8 - (r_config * r_attrs) as i8)
}

/// Which `T` enters the bias radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Declared experiment length.
    Fixed(u64),
    /// Open-ended sessions: `T` is replaced by the number of observations so far plus one.
    Anytime,
}

/// How an arm that has never been played enters the visualization score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnplayedBias {
    /// `+∞`: every triple must be tried once before its bias can count against it.
    Infinite,
    /// The arm contributes a fixed value (bias estimate plus radius) until played.
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BiasArm {
    pub gamma_hat: f64,
    pub pulls: u64,
}

impl BiasArm {
    /// Running-mean update `γ_t = (t-1)/t γ_{t-1} + r/t`.
    pub fn observe(&mut self, r_bias: i8) {
        self.pulls += 1;
        let t = self.pulls as f64;
        self.gamma_hat = (t - 1.0) / t * self.gamma_hat + f64::from(r_bias) / t;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasTable {
    arms: HashMap<Visualization, BiasArm>,
    horizon: Horizon,
    observations: u64,
    unplayed: UnplayedBias,
    ceiling: Option<f64>,
}

impl BiasTable {
    pub fn new(horizon: Horizon) -> Result<Self> {
        if let Horizon::Fixed(t) = horizon {
            if t < 1 {
                return Err(invalid("bias horizon must be at least 1"));
            }
        }
        Ok(BiasTable {
            arms: HashMap::new(),
            horizon,
            observations: 0,
            unplayed: UnplayedBias::Infinite,
            ceiling: None,
        })
    }

    pub fn with_unplayed(mut self, unplayed: UnplayedBias) -> Self {
        self.unplayed = unplayed;
        self
    }

    /// Caps `γ̂ + ρ_γ` for played arms at `ceiling`.
    pub fn with_ceiling(mut self, ceiling: Option<f64>) -> Self {
        self.ceiling = ceiling;
        self
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn unplayed(&self) -> UnplayedBias {
        self.unplayed
    }

    pub fn ceiling(&self) -> Option<f64> {
        self.ceiling
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Arm state; absent keys read as a fresh arm.
    pub fn arm(&self, key: &Visualization) -> BiasArm {
        self.arms.get(key).copied().unwrap_or_default()
    }

    pub fn arms(&self) -> impl Iterator<Item = (&Visualization, &BiasArm)> {
        self.arms.iter()
    }

    pub fn observe(&mut self, key: Visualization, r_bias: i8) -> Result<()> {
        if !(-1..=1).contains(&r_bias) {
            return Err(invalid(format!("bias reward must be in {{-1, 0, 1}}, got {r_bias}")));
        }
        self.arms.entry(key).or_default().observe(r_bias);
        self.observations += 1;
        Ok(())
    }

    fn log_horizon(&self) -> f64 {
        match self.horizon {
            Horizon::Fixed(t) => (t as f64).ln(),
            Horizon::Anytime => ((self.observations + 1) as f64).ln(),
        }
    }

    /// `sqrt(2 ln T / t_γ)`, or `+∞` for an arm that has never been played.
    pub fn radius(&self, key: &Visualization) -> f64 {
        radius_for(self.log_horizon(), self.arm(key).pulls)
    }

    /// The bias contribution `γ̂ + ρ_γ` to a visualization score.
    pub fn bonus(&self, key: &Visualization) -> f64 {
        self.bonus_with_log(key, self.log_horizon())
    }

    pub(crate) fn bonus_with_log(&self, key: &Visualization, log_t: f64) -> f64 {
        match self.arms.get(key) {
            Some(arm) if arm.pulls > 0 => {
                let v = arm.gamma_hat + radius_for(log_t, arm.pulls);
                match self.ceiling {
                    Some(c) => v.min(c),
                    None => v,
                }
            }
            _ => match self.unplayed {
                UnplayedBias::Infinite => f64::INFINITY,
                UnplayedBias::Value(v) => v,
            },
        }
    }

    pub(crate) fn current_log_horizon(&self) -> f64 {
        self.log_horizon()
    }
}

fn radius_for(log_t: f64, pulls: u64) -> f64 {
    if pulls == 0 {
        f64::INFINITY
    } else {
        (2.0 * log_t / pulls as f64).sqrt()
    }
}
