//! Graph-attention forward pass for one agent's observation.
//!
//! The agent embeds itself and every living opponent, pools the opponent embeddings with
//! scaled dot-product attention, fuses the pooled vector with its own embedding, then
//! runs `k` rounds of attention-weighted pooling over its living teammates before the
//! policy and value heads. Every step is recorded on a [`Tape`] so the same code serves
//! rollouts and gradient computation.

use super::distribution::ActionDistribution;
use super::params::{GraphConfig, PolicyParams};
use crate::env::{ObservationView, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::nn::{BlockId, NodeId, Tape};

/// Attention weights of one forward pass, aligned with the observation's id lists.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttentionReport {
    pub opponent_ids: Vec<usize>,
    /// One weight per living opponent; empty when none are alive.
    pub psi: Vec<f64>,
    pub teammate_ids: Vec<usize>,
    /// One vector per propagation round, one weight per living teammate.
    pub phi: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub dist: ActionDistribution,
    pub value: f64,
    pub attention: AttentionReport,
}

pub(crate) struct Blocks {
    self_net: BlockId,
    readout: BlockId,
    opponent: BlockId,
    fuse: BlockId,
    update: BlockId,
    policy: BlockId,
    value: BlockId,
}

impl Blocks {
    /// Registers the seven blocks in [`PolicyParams::blocks`] order.
    pub(crate) fn register<'p>(tape: &mut Tape<'p>, p: &'p PolicyParams) -> Blocks {
        Blocks {
            self_net: tape.register(&p.self_net),
            readout: tape.register(&p.self_readout),
            opponent: tape.register(&p.opponent_net),
            fuse: tape.register(&p.fuse),
            update: tape.register(&p.update_net),
            policy: tape.register(&p.policy_head),
            value: tape.register(&p.value_head),
        }
    }
}

pub(crate) struct GraphNodes {
    /// Log-softmax over the seven movements.
    pub move_log_probs: NodeId,
    pub shoot_logit: NodeId,
    pub value: NodeId,
    pub psi: Option<NodeId>,
    pub phi: Vec<Option<NodeId>>,
}

fn check_features(f: &[f64], what: &str) -> Result<()> {
    if f.len() != FEATURE_DIM {
        return Err(Error::Dimension(format!("{what} has {} features, expected {FEATURE_DIM}", f.len())));
    }
    if !f.iter().all(|v| v.is_finite()) {
        return Err(Error::Dimension(format!("{what} has non-finite features")));
    }
    Ok(())
}

/// Scaled dot-product attention of `query` over `items`: logits `<query, item> / width`,
/// softmax weights, weighted sum. `None` weights and a zero vector when `items` is empty.
fn record_attention(tape: &mut Tape<'_>, query: NodeId, items: &[NodeId], width: usize) -> Result<(Option<NodeId>, NodeId)> {
    if items.is_empty() {
        return Ok((None, tape.constant(vec![0.0; width])));
    }
    let scale = 1.0 / width as f64;
    let logits: Vec<NodeId> = items
        .iter()
        .map(|&it| tape.dot(query, it).map(|d| tape.scale(d, scale)))
        .collect::<Result<_>>()?;
    let logits = tape.concat(&logits);
    let weights = tape.softmax(logits)?;
    let pooled = tape.weighted_sum(weights, items)?;
    Ok((Some(weights), pooled))
}

/// Runs `k` rounds of teammate pooling; each member's next embedding is the update net
/// applied to `[own, pooled]`. Member 0 is the acting agent; when `all_last` is
/// false the final round only updates member 0. Returns the final embeddings (entries
/// not updated in the last round keep their previous value) and member 0's weights.
fn record_propagation(
    tape: &mut Tape<'_>,
    update: BlockId,
    mut members: Vec<NodeId>,
    k: usize,
    width: usize,
    all_last: bool,
) -> Result<(Vec<NodeId>, Vec<Option<NodeId>>)> {
    let mut phi = Vec::with_capacity(k);
    for round in 0..k {
        let last = round + 1 == k;
        let active = if last && !all_last { 1 } else { members.len() };
        let mut next = members.clone();
        for i in 0..active {
            let others: Vec<NodeId> = members.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &m)| m).collect();
            let (weights, pooled) = record_attention(tape, members[i], &others, width)?;
            if i == 0 {
                phi.push(weights);
            }
            let joint = tape.concat(&[members[i], pooled]);
            next[i] = tape.mlp(update, joint)?;
        }
        members = next;
    }
    Ok((members, phi))
}

pub(crate) fn record_forward(
    tape: &mut Tape<'_>,
    blocks: &Blocks,
    config: &GraphConfig,
    obs: &ObservationView,
) -> Result<GraphNodes> {
    check_features(&obs.self_features, "self")?;
    for f in &obs.teammates {
        check_features(f, "teammate")?;
    }
    for f in &obs.opponents {
        check_features(f, "opponent")?;
    }

    let x_self = tape.constant(obs.self_features.clone());
    let team_self = tape.mlp(blocks.self_net, x_self)?;
    let h = tape.mlp(blocks.readout, team_self)?;
    let opponents: Vec<NodeId> = obs
        .opponents
        .iter()
        .map(|f| {
            let x = tape.constant(f.clone());
            tape.mlp(blocks.opponent, x)
        })
        .collect::<Result<_>>()?;
    let (psi, e) = record_attention(tape, h, &opponents, config.d1)?;
    let joint = tape.concat(&[h, e]);
    let h0 = tape.mlp(blocks.fuse, joint)?;

    let mut members = vec![h0];
    for f in &obs.teammates {
        let x = tape.constant(f.clone());
        members.push(tape.mlp(blocks.self_net, x)?);
    }
    let (members, phi) = record_propagation(tape, blocks.update, members, config.k, config.d2, false)?;
    let hk = members[0];

    let head = tape.mlp(blocks.policy, hk)?;
    let move_logits = tape.slice(head, 0, 7);
    let move_log_probs = tape.log_softmax(move_logits)?;
    let shoot_logit = tape.index(head, 7);
    let v = tape.mlp(blocks.value, hk)?;
    let value = tape.index(v, 0);
    Ok(GraphNodes { move_log_probs, shoot_logit, value, psi, phi })
}

pub(crate) fn read_output(tape: &Tape<'_>, nodes: &GraphNodes, obs: &ObservationView) -> Result<PolicyOutput> {
    let lp = tape.value(nodes.move_log_probs).to_vec();
    let dist = ActionDistribution::from_log_probs(lp, tape.scalar(nodes.shoot_logit))?;
    let attention = AttentionReport {
        opponent_ids: obs.opponent_ids.clone(),
        psi: nodes.psi.map(|n| tape.value(n).to_vec()).unwrap_or_default(),
        teammate_ids: obs.teammate_ids.clone(),
        phi: nodes.phi.iter().map(|p| p.map(|n| tape.value(n).to_vec()).unwrap_or_default()).collect(),
    };
    let value = tape.scalar(nodes.value);
    if !value.is_finite() {
        return Err(Error::Numerical("value head produced a non-finite output".into()));
    }
    Ok(PolicyOutput { dist, value, attention })
}

/// Full policy evaluation for one living agent.
pub fn forward(obs: &ObservationView, params: &PolicyParams) -> Result<PolicyOutput> {
    let mut tape = Tape::new();
    let blocks = Blocks::register(&mut tape, params);
    let nodes = record_forward(&mut tape, &blocks, &params.config, obs)?;
    read_output(&tape, &nodes, obs)
}

/// Self embedding `h` (width `d1`).
pub fn embed_self(params: &PolicyParams, features: &[f64]) -> Result<Vec<f64>> {
    check_features(features, "self")?;
    let mut tape = Tape::new();
    let b = Blocks::register(&mut tape, params);
    let x = tape.constant(features.to_vec());
    let team = tape.mlp(b.self_net, x)?;
    let h = tape.mlp(b.readout, team)?;
    Ok(tape.value(h).to_vec())
}

/// Teammate embedding (width `d2`), the initial team embedding of a non-acting agent.
pub fn embed_teammate(params: &PolicyParams, features: &[f64]) -> Result<Vec<f64>> {
    check_features(features, "teammate")?;
    let mut tape = Tape::new();
    let b = Blocks::register(&mut tape, params);
    let x = tape.constant(features.to_vec());
    let team = tape.mlp(b.self_net, x)?;
    Ok(tape.value(team).to_vec())
}

/// Opponent embedding (width `d1`).
pub fn embed_opponent(params: &PolicyParams, features: &[f64]) -> Result<Vec<f64>> {
    check_features(features, "opponent")?;
    let mut tape = Tape::new();
    let b = Blocks::register(&mut tape, params);
    let x = tape.constant(features.to_vec());
    let o = tape.mlp(b.opponent, x)?;
    Ok(tape.value(o).to_vec())
}

/// Attention weights over `opponents` and their weighted sum. Logits are dot products
/// divided by the embedding width.
pub fn opponent_attention(h: &[f64], opponents: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(bad) = opponents.iter().find(|o| o.len() != h.len()) {
        return Err(Error::Dimension(format!("opponent embedding width {} vs self {}", bad.len(), h.len())));
    }
    let mut tape = Tape::new();
    let q = tape.constant(h.to_vec());
    let items: Vec<NodeId> = opponents.iter().map(|o| tape.constant(o.clone())).collect();
    let (w, e) = record_attention(&mut tape, q, &items, h.len())?;
    Ok((w.map(|w| tape.value(w).to_vec()).unwrap_or_default(), tape.value(e).to_vec()))
}

/// Initial team embedding from `[h, e]`.
pub fn fuse(params: &PolicyParams, h: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let b = Blocks::register(&mut tape, params);
    let hn = tape.constant(h.to_vec());
    let en = tape.constant(e.to_vec());
    let joint = tape.concat(&[hn, en]);
    let out = tape.mlp(b.fuse, joint)?;
    Ok(tape.value(out).to_vec())
}

/// Runs `k` pooling rounds over a whole team of initial embeddings. Returns every
/// member's final embedding and, per round, each member's weights over the others (in
/// index order, skipping itself).
pub fn teammate_propagate(
    params: &PolicyParams,
    initial: &[Vec<f64>],
    k: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    if initial.is_empty() {
        return Err(Error::Dimension("team needs at least one member".into()));
    }
    let width = params.config.d2;
    if let Some(bad) = initial.iter().find(|h| h.len() != width) {
        return Err(Error::Dimension(format!("team embedding width {}, expected {width}", bad.len())));
    }
    let mut tape = Tape::new();
    let b = Blocks::register(&mut tape, params);
    let mut members: Vec<NodeId> = initial.iter().map(|h| tape.constant(h.clone())).collect();
    let mut weights = Vec::with_capacity(k);
    for _ in 0..k {
        // Rotate so every member takes the acting slot once per round.
        let mut next = members.clone();
        let mut round = Vec::with_capacity(members.len());
        for i in 0..members.len() {
            let mut order = vec![members[i]];
            order.extend(members.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &m)| m));
            let (out, phi) = record_propagation(&mut tape, b.update, order, 1, width, false)?;
            next[i] = out[0];
            round.push(phi[0].map(|w| tape.value(w).to_vec()).unwrap_or_default());
        }
        members = next;
        weights.push(round);
    }
    Ok((members.iter().map(|&m| tape.value(m).to_vec()).collect(), weights))
}

/// Joint log-probability of `action` under the recorded heads.
pub(crate) fn record_log_prob(tape: &mut Tape<'_>, nodes: &GraphNodes, action: crate::env::AgentAction) -> NodeId {
    let mv = tape.index(nodes.move_log_probs, action.action.index());
    let z = if action.shoot { nodes.shoot_logit } else { tape.scale(nodes.shoot_logit, -1.0) };
    let trigger = tape.log_sigmoid(z);
    tape.add(mv, trigger)
}

/// Entropy of the movement categorical plus the trigger Bernoulli.
pub(crate) fn record_entropy(tape: &mut Tape<'_>, nodes: &GraphNodes) -> NodeId {
    let p = tape.exp(nodes.move_log_probs);
    let plogp = tape.mul(p, nodes.move_log_probs);
    let s = tape.sum(plogp);
    let h_move = tape.scale(s, -1.0);

    let z = nodes.shoot_logit;
    let neg_z = tape.scale(z, -1.0);
    let p_on = tape.sigmoid(z);
    let p_off = tape.sigmoid(neg_z);
    let l_on = tape.log_sigmoid(z);
    let l_off = tape.log_sigmoid(neg_z);
    let a = tape.mul(p_on, l_on);
    let b = tape.mul(p_off, l_off);
    let ab = tape.add(a, b);
    let h_shoot = tape.scale(ab, -1.0);
    tape.add(h_move, h_shoot)
}
