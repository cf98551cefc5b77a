use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::FEATURE_DIM;
use crate::error::{Error, Result};
use crate::nn::{read_mlp, read_u32, take, write_mlp, Activation, MlpParams, ParamSet};

/// Number of policy-head outputs: seven movement logits followed by one shoot logit.
pub const HEAD_WIDTH: usize = 8;

const MAGIC: &[u8; 8] = b"FAPOLICY";
const VERSION: u32 = 1;
const BLOCKS: usize = 7;

/// Widths and depth of the graph policy. Hidden lists give the hidden layer sizes of
/// each network; an empty list makes the network a single affine map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Width of the self embedding and of opponent embeddings.
    pub d1: usize,
    /// Width of team embeddings.
    pub d2: usize,
    /// Teammate propagation rounds.
    pub k: usize,
    pub hidden_self: Vec<usize>,
    pub hidden_opponent: Vec<usize>,
    pub hidden_update: Vec<usize>,
    pub hidden_policy: Vec<usize>,
    pub hidden_value: Vec<usize>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            d1: 32,
            d2: 32,
            k: 1,
            hidden_self: vec![64, 64],
            hidden_opponent: vec![64, 64],
            hidden_update: vec![64, 64],
            hidden_policy: vec![64, 64],
            hidden_value: vec![64, 64],
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("graph.d1", self.d1), ("graph.d2", self.d2), ("graph.k", self.k)] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        let lists = [
            ("graph.hidden_self", &self.hidden_self),
            ("graph.hidden_opponent", &self.hidden_opponent),
            ("graph.hidden_update", &self.hidden_update),
            ("graph.hidden_policy", &self.hidden_policy),
            ("graph.hidden_value", &self.hidden_value),
        ];
        for (field, list) in lists {
            if list.contains(&0) {
                return Err(Error::config(field, "hidden widths must be positive"));
            }
        }
        Ok(())
    }
}

/// One team's shared parameters.
///
/// * `self_net` embeds an agent's own state to width `d2`; this is the teammate
///   embedding, and `self_readout` maps it to the width-`d1` self embedding used for
///   opponent attention.
/// * `opponent_net` embeds each opponent to width `d1`.
/// * `fuse` projects `[h, e]` (width `2·d1`) to the width-`d2` initial team embedding.
/// * `update_net` maps `[own, pooled]` (width `2·d2`) to the next team embedding after
///   each teammate-attention pooling round.
/// * `policy_head` produces [`HEAD_WIDTH`] logits, `value_head` a scalar baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub config: GraphConfig,
    pub self_net: MlpParams,
    pub self_readout: MlpParams,
    pub opponent_net: MlpParams,
    pub fuse: MlpParams,
    pub update_net: MlpParams,
    pub policy_head: MlpParams,
    pub value_head: MlpParams,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl PolicyParams {
    pub fn init<R: Rng + ?Sized>(config: &GraphConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = config;
        let tanh = Activation::Tanh;
        let id = Activation::Identity;
        Ok(PolicyParams {
            config: c.clone(),
            self_net: MlpParams::init(&sizes(FEATURE_DIM, &c.hidden_self, c.d2), tanh, tanh, 1.0, rng)?,
            self_readout: MlpParams::init(&[c.d2, c.d1], tanh, tanh, 1.0, rng)?,
            opponent_net: MlpParams::init(&sizes(FEATURE_DIM, &c.hidden_opponent, c.d1), tanh, tanh, 1.0, rng)?,
            fuse: MlpParams::init(&[2 * c.d1, c.d2], tanh, tanh, 1.0, rng)?,
            update_net: MlpParams::init(&sizes(2 * c.d2, &c.hidden_update, c.d2), tanh, tanh, 1.0, rng)?,
            policy_head: MlpParams::init(&sizes(c.d2, &c.hidden_policy, HEAD_WIDTH), tanh, id, 0.01, rng)?,
            value_head: MlpParams::init(&sizes(c.d2, &c.hidden_value, 1), tanh, id, 1.0, rng)?,
        })
    }

    pub fn blocks(&self) -> [&MlpParams; BLOCKS] {
        [
            &self.self_net,
            &self.self_readout,
            &self.opponent_net,
            &self.fuse,
            &self.update_net,
            &self.policy_head,
            &self.value_head,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut MlpParams; BLOCKS] {
        [
            &mut self.self_net,
            &mut self.self_readout,
            &mut self.opponent_net,
            &mut self.fuse,
            &mut self.update_net,
            &mut self.policy_head,
            &mut self.value_head,
        ]
    }

    /// Rebuilds a parameter set from blocks in [`PolicyParams::blocks`] order.
    pub fn from_blocks(config: GraphConfig, blocks: Vec<MlpParams>) -> Result<Self> {
        let [self_net, self_readout, opponent_net, fuse, update_net, policy_head, value_head]: [MlpParams; BLOCKS] =
            blocks
                .try_into()
                .map_err(|b: Vec<_>| Error::Dimension(format!("expected {BLOCKS} blocks, got {}", b.len())))?;
        let p = PolicyParams { config, self_net, self_readout, opponent_net, fuse, update_net, policy_head, value_head };
        p.check_shapes()?;
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for b in z.blocks_mut() {
            *b = b.zeros_like();
        }
        z
    }

    /// Errors unless these parameters were built for `config`.
    pub fn check_compatible(&self, config: &GraphConfig) -> Result<()> {
        if &self.config != config {
            return Err(Error::config("graph", "checkpoint was built for a different graph config"));
        }
        Ok(())
    }

    fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        let expect = [
            ("self_net", &self.self_net, FEATURE_DIM, c.d2),
            ("self_readout", &self.self_readout, c.d2, c.d1),
            ("opponent_net", &self.opponent_net, FEATURE_DIM, c.d1),
            ("fuse", &self.fuse, 2 * c.d1, c.d2),
            ("update_net", &self.update_net, 2 * c.d2, c.d2),
            ("policy_head", &self.policy_head, c.d2, HEAD_WIDTH),
            ("value_head", &self.value_head, c.d2, 1),
        ];
        for (name, block, i, o) in expect {
            if block.in_dim() != i || block.out_dim() != o {
                return Err(Error::Dimension(format!(
                    "{name} maps {}→{}, expected {i}→{o}",
                    block.in_dim(),
                    block.out_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.config).expect("graph config serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(BLOCKS as u32).to_le_bytes());
        for block in self.blocks() {
            write_mlp(&mut out, block);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut input = bytes;
        if take(&mut input, MAGIC.len())? != MAGIC {
            return Err(Error::format("policy checkpoint", "bad magic"));
        }
        let version = read_u32(&mut input)?;
        if version != VERSION {
            return Err(Error::format("policy checkpoint", format!("unsupported version {version}")));
        }
        let header_len = read_u32(&mut input)? as usize;
        let config: GraphConfig = serde_json::from_slice(take(&mut input, header_len)?)
            .map_err(|e| Error::format("policy checkpoint", e.to_string()))?;
        let n = read_u32(&mut input)? as usize;
        if n != BLOCKS {
            return Err(Error::format("policy checkpoint", format!("expected {BLOCKS} blocks, found {n}")));
        }
        let blocks = (0..n).map(|_| read_mlp(&mut input)).collect::<Result<Vec<_>>>()?;
        if !input.is_empty() {
            return Err(Error::format("policy checkpoint", "trailing bytes"));
        }
        PolicyParams::from_blocks(config, blocks)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        PolicyParams::from_bytes(&bytes)
    }
}

impl ParamSet for PolicyParams {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.blocks().into_iter().flat_map(|b| b.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.blocks_mut().into_iter().flat_map(|b| b.param_slices_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = GraphConfig { d1: 4, d2: 6, k: 2, hidden_self: vec![5], ..GraphConfig::default() };
        let p = PolicyParams::init(&cfg, &mut rng).unwrap();
        let bytes = p.to_bytes();
        let back = PolicyParams::from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = PolicyParams::init(&GraphConfig::default(), &mut rng).unwrap();
        let bytes = p.to_bytes();
        assert!(PolicyParams::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(PolicyParams::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(PolicyParams::from_bytes(&extra).is_err());
    }

    #[test]
    fn zero_width_is_config_error() {
        let cfg = GraphConfig { d2: 0, ..GraphConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
    }
}
