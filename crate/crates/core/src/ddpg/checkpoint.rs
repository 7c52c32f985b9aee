use serde::{Deserialize, Serialize};

use super::{DdpgConfig, DdpgError, Dense, Mlp, ObsNormalizer, OutputActivation, Policy};
use crate::env::{ACTION_DIM, OBS_DIM};
use crate::numfmt::to_json_pretty;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized policy: actor layers (row-major `[n_in, n_out]` weights),
/// observation scaling, action bounds and the training config that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub layer_sizes: Vec<usize>,
    pub output_activation: OutputActivation,
    pub output_scale: Vec<f64>,
    pub layers: Vec<Dense>,
    pub normalizer: ObsNormalizer,
    pub bounds: [f64; ACTION_DIM],
    pub config: DdpgConfig,
}

impl Checkpoint {
    pub fn from_policy(policy: &Policy, config: &DdpgConfig) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            seed: config.seed,
            obs_dim: OBS_DIM,
            action_dim: ACTION_DIM,
            layer_sizes: policy.actor.sizes(),
            output_activation: policy.actor.output_activation(),
            output_scale: policy.actor.output_scale().to_vec(),
            layers: policy.actor.layers().to_vec(),
            normalizer: policy.normalizer,
            bounds: policy.bounds,
            config: config.clone(),
        }
    }

    /// Rebuilds the policy, checking version, dimensions and layer shapes.
    pub fn to_policy(&self) -> Result<Policy, DdpgError> {
        let err = |m: String| Err(DdpgError::Checkpoint(m));
        if self.version != CHECKPOINT_VERSION {
            return err(format!("unsupported version {} (expected {CHECKPOINT_VERSION})", self.version));
        }
        if self.obs_dim != OBS_DIM || self.action_dim != ACTION_DIM {
            return err(format!(
                "dimension mismatch: checkpoint is {}->{}, environment is {OBS_DIM}->{ACTION_DIM}",
                self.obs_dim, self.action_dim
            ));
        }
        let actor = Mlp::from_layers(self.layers.clone(), self.output_activation, self.output_scale.clone())?;
        if actor.sizes() != self.layer_sizes {
            return err(format!("layer_sizes {:?} do not match layers {:?}", self.layer_sizes, actor.sizes()));
        }
        if actor.input_dim() != OBS_DIM || actor.output_dim() != ACTION_DIM {
            return err(format!(
                "dimension mismatch: network is {}->{}, environment is {OBS_DIM}->{ACTION_DIM}",
                actor.input_dim(),
                actor.output_dim()
            ));
        }
        if !actor.all_finite() {
            return err("non-finite parameters".into());
        }
        Ok(Policy {
            actor,
            normalizer: self.normalizer,
            bounds: self.bounds,
        })
    }

    pub fn to_json(&self) -> String {
        to_json_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DdpgError> {
        serde_json::from_str(s).map_err(|e| DdpgError::Checkpoint(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy() -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        Policy {
            actor: Mlp::init(&[6, 8, 2], OutputActivation::Tanh, 0.1, &mut rng).with_output_scale(vec![2.0, 0.3]),
            normalizer: ObsNormalizer { position_scale: 123.25, velocity_scale: 20.0 },
            bounds: [2.0, 0.3],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = policy();
        let ck = Checkpoint::from_policy(&p, &DdpgConfig::default());
        let text = ck.to_json();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_policy().unwrap(), p);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut ck = Checkpoint::from_policy(&policy(), &DdpgConfig::default());
        ck.obs_dim = 7;
        assert!(matches!(ck.to_policy(), Err(DdpgError::Checkpoint(m)) if m.contains("dimension")));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wrong = Mlp::init(&[5, 8, 2], OutputActivation::Tanh, 0.1, &mut rng);
        let mut ck = Checkpoint::from_policy(&policy(), &DdpgConfig::default());
        ck.layers = wrong.layers().to_vec();
        ck.layer_sizes = wrong.sizes();
        ck.output_scale = vec![2.0, 0.3];
        assert!(matches!(ck.to_policy(), Err(DdpgError::Checkpoint(m)) if m.contains("dimension")));
    }
}
