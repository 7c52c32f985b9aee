//! Distance-reduction reward with goal bonus and failure penalty.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `(d_last - d_current) / dist_scale` with along-vessel distances.
    ShapedManifold,
    /// `-d_current` with along-vessel distances.
    NegativeDistance,
    /// Like `ShapedManifold` but with straight-line distances.
    ShapedEuclidean,
}

impl RewardMode {
    pub fn uses_euclidean(self) -> bool {
        self == RewardMode::ShapedEuclidean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub mode: RewardMode,
    /// Success radius, mm.
    pub goal_threshold: f64,
    pub goal_bonus: f64,
    pub fail_penalty: f64,
    pub dist_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            mode: RewardMode::ShapedManifold,
            goal_threshold: 1.0,
            goal_bonus: 100.0,
            fail_penalty: -100.0,
            dist_scale: 100.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.goal_threshold > 0.0 && self.goal_threshold.is_finite()) {
            return Err(RewardError::InvalidConfig("goal_threshold must be positive".into()));
        }
        if !(self.dist_scale > 0.0 && self.dist_scale.is_finite()) {
            return Err(RewardError::InvalidConfig("dist_scale must be positive".into()));
        }
        if !self.goal_bonus.is_finite() || !self.fail_penalty.is_finite() {
            return Err(RewardError::InvalidConfig("bonus and penalty must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("distances must be non-negative and finite (d_last = {d_last}, d_current = {d_current})")]
    NegativeDistance { d_last: f64, d_current: f64 },
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

/// What happened in one step, as far as the reward is concerned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub d_last: f64,
    pub d_current: f64,
    pub collided: bool,
    pub out_of_steps: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    None,
    Goal,
    Failure,
}

impl Terminal {
    pub fn is_done(self) -> bool {
        self != Terminal::None
    }
}

/// Per-step reward: distance term, plus the goal bonus when within the
/// threshold (inclusive), else the failure penalty on collision or step-limit
/// exhaustion. Goal wins if both apply.
pub fn compute_reward(outcome: &StepOutcome, config: &RewardConfig) -> Result<(f64, Terminal), RewardError> {
    let StepOutcome { d_last, d_current, .. } = *outcome;
    if !(d_last >= 0.0 && d_current >= 0.0 && d_last.is_finite() && d_current.is_finite()) {
        return Err(RewardError::NegativeDistance { d_last, d_current });
    }
    let mut reward = match config.mode {
        RewardMode::ShapedManifold | RewardMode::ShapedEuclidean => (d_last - d_current) / config.dist_scale,
        RewardMode::NegativeDistance => -d_current,
    };
    let terminal = if d_current <= config.goal_threshold {
        reward += config.goal_bonus;
        Terminal::Goal
    } else if outcome.collided || outcome.out_of_steps {
        reward += config.fail_penalty;
        Terminal::Failure
    } else {
        Terminal::None
    };
    Ok((reward, terminal))
}
