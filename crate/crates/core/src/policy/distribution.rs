use rand::Rng;

use crate::env::{ActionId, AgentAction};
use crate::error::{Error, Result};
use crate::nn::{log_sigmoid, log_softmax_slice, sigmoid};

/// Categorical distribution over the seven movements plus an independent Bernoulli
/// trigger.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    move_probs: Vec<f64>,
    move_log_probs: Vec<f64>,
    shoot_prob: f64,
    /// `(ln p, ln (1 - p))` for the trigger.
    shoot_log_probs: (f64, f64),
}

impl ActionDistribution {
    pub fn from_logits(move_logits: &[f64], shoot_logit: f64) -> Result<Self> {
        if move_logits.len() != ActionId::COUNT {
            return Err(Error::Dimension(format!("{} movement logits, expected 7", move_logits.len())));
        }
        if !move_logits.iter().all(|v| v.is_finite()) || !shoot_logit.is_finite() {
            return Err(Error::Numerical("non-finite policy logits".into()));
        }
        Self::from_log_probs(log_softmax_slice(move_logits), shoot_logit)
    }

    /// `move_log_probs` must already be normalised (a log-softmax output).
    pub(crate) fn from_log_probs(move_log_probs: Vec<f64>, shoot_logit: f64) -> Result<Self> {
        let move_probs: Vec<f64> = move_log_probs.iter().map(|lp| lp.exp()).collect();
        if !move_probs.iter().all(|p| p.is_finite()) || !shoot_logit.is_finite() {
            return Err(Error::Numerical("non-finite policy output".into()));
        }
        Ok(ActionDistribution {
            move_probs,
            move_log_probs,
            shoot_prob: sigmoid(shoot_logit),
            shoot_log_probs: (log_sigmoid(shoot_logit), log_sigmoid(-shoot_logit)),
        })
    }

    pub fn from_probs(move_probs: &[f64], shoot_prob: f64) -> Result<Self> {
        if move_probs.len() != ActionId::COUNT {
            return Err(Error::Dimension(format!("{} movement probabilities, expected 7", move_probs.len())));
        }
        let total: f64 = move_probs.iter().sum();
        if move_probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical("movement probabilities must form a distribution".into()));
        }
        if !(0.0..=1.0).contains(&shoot_prob) {
            return Err(Error::Numerical(format!("shoot probability {shoot_prob} outside [0, 1]")));
        }
        Ok(ActionDistribution {
            move_probs: move_probs.to_vec(),
            move_log_probs: move_probs.iter().map(|p| p.ln()).collect(),
            shoot_prob,
            shoot_log_probs: (shoot_prob.ln(), (1.0 - shoot_prob).ln()),
        })
    }

    pub fn move_probs(&self) -> &[f64] {
        &self.move_probs
    }

    pub fn shoot_prob(&self) -> f64 {
        self.shoot_prob
    }

    pub fn log_prob(&self, action: AgentAction) -> f64 {
        let shoot = if action.shoot { self.shoot_log_probs.0 } else { self.shoot_log_probs.1 };
        self.move_log_probs[action.action.index()] + shoot
    }

    pub fn entropy(&self) -> f64 {
        let h_move: f64 = self
            .move_probs
            .iter()
            .zip(&self.move_log_probs)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, lp)| -p * lp)
            .sum();
        let p = self.shoot_prob;
        let h_shoot = if p > 0.0 && p < 1.0 { -p * self.shoot_log_probs.0 - (1.0 - p) * self.shoot_log_probs.1 } else { 0.0 };
        h_move + h_shoot
    }

    /// Most likely movement; shoots when the trigger probability exceeds one half.
    pub fn mode(&self) -> AgentAction {
        let best = self
            .move_probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > self.move_probs[best] { i } else { best });
        AgentAction::new(ActionId::from_index(best).expect("seven actions"), self.shoot_prob > 0.5)
    }
}

/// Draws a movement and a trigger decision. Always consumes exactly two uniforms from
/// `rng`. Returns the joint log-probability.
pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> (AgentAction, f64) {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, &p) in dist.move_probs.iter().enumerate() {
        acc += p;
        if p > 0.0 && u < acc {
            chosen = Some(i);
            break;
        }
    }
    // Rounding can leave `acc` a hair below 1; fall back to the last supported action.
    let idx = chosen.unwrap_or_else(|| dist.move_probs.iter().rposition(|&p| p > 0.0).expect("non-empty support"));
    let action = AgentAction::new(ActionId::from_index(idx).expect("seven actions"), v < dist.shoot_prob);
    (action, dist.log_prob(action))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_is_deterministic_with_zero_log_prob() {
        let mut probs = [0.0; 7];
        probs[3] = 1.0;
        let d = ActionDistribution::from_probs(&probs, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (a, lp) = sample_action(&d, &mut rng);
            assert_eq!(a, AgentAction::new(ActionId::AccelNegY, false));
            assert_eq!(lp, 0.0);
        }
    }

    #[test]
    fn fixed_seed_reproduces_samples() {
        let d = ActionDistribution::from_logits(&[0.1, -0.3, 0.7, 0.0, 0.2, -1.0, 0.4], 0.3).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| sample_action(&d, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let d = ActionDistribution::from_logits(&[0.5, -0.3, 1.2, 0.0, 0.2, -1.0, 0.4], -0.4).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut counts = [0usize; 7];
        let mut shots = 0usize;
        for _ in 0..n {
            let (a, _) = sample_action(&d, &mut rng);
            counts[a.action.index()] += 1;
            shots += a.shoot as usize;
        }
        let check = |count: usize, p: f64| {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - n as f64 * p).abs() <= 3.0 * sigma, "count {count}, p {p}");
        };
        for (c, &p) in counts.iter().zip(d.move_probs()) {
            check(*c, p);
        }
        check(shots, d.shoot_prob());
    }

    #[test]
    fn log_prob_and_entropy_are_consistent() {
        let d = ActionDistribution::from_logits(&[0.0; 7], 0.0).unwrap();
        let lp = d.log_prob(AgentAction::new(ActionId::Stay, true));
        assert!((lp - (1.0f64 / 14.0).ln()).abs() < 1e-12);
        assert!((d.entropy() - (7.0f64.ln() + 2.0f64.ln())).abs() < 1e-12);
        assert!((d.move_probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
