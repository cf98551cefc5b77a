use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in arena coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// World geometry and dynamics. The arena is the square `[-h, h]²` with `h =
/// arena_half_extent`; the fort is a disc centred on the top edge, so only its lower
/// half lies inside the arena.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub n_guards: usize,
    pub n_attackers: usize,
    pub arena_half_extent: f64,
    pub fort_center: [f64; 2],
    pub fort_radius: f64,
    /// Guards inside this disc around the fort count as "at the fort".
    pub guard_zone_radius: f64,
    pub laser_range: f64,
    /// Half-width of the beam window around the shooter's heading, radians.
    pub laser_half_angle: f64,
    /// Velocity change per step from one acceleration action.
    pub acceleration: f64,
    pub rotation_step: f64,
    /// Fraction of velocity lost every step.
    pub damping: f64,
    pub max_speed: f64,
    /// Minimum spawn separation is twice this radius; also the drawn body size.
    pub agent_radius: f64,
    pub episode_length: usize,
    pub guard_spawn: Region,
    pub attacker_spawn: Region,
    /// Coordinates in which an agent sees the others.
    pub observation_frame: ObservationFrame,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationFrame {
    /// Every agent in arena coordinates.
    Absolute,
    /// Teammates and opponents relative to the observer, rotated into its heading.
    Egocentric,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_guards: 5,
            n_attackers: 5,
            arena_half_extent: 1.0,
            fort_center: [0.0, 1.0],
            fort_radius: 0.2,
            guard_zone_radius: 0.5,
            laser_range: 0.5,
            laser_half_angle: 0.35,
            acceleration: 0.01,
            rotation_step: std::f64::consts::PI / 12.0,
            damping: 0.25,
            max_speed: 0.05,
            agent_radius: 0.04,
            episode_length: 100,
            guard_spawn: Region { x_min: -0.4, x_max: 0.4, y_min: 0.55, y_max: 0.85 },
            attacker_spawn: Region { x_min: -0.9, x_max: 0.9, y_min: -0.95, y_max: -0.7 },
            observation_frame: ObservationFrame::Egocentric,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn n_agents(&self) -> usize {
        self.n_guards + self.n_attackers
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_guards == 0 {
            return Err(Error::config("env.n_guards", "must be at least 1"));
        }
        if self.n_attackers == 0 {
            return Err(Error::config("env.n_attackers", "must be at least 1"));
        }
        let positive = [
            ("env.arena_half_extent", self.arena_half_extent),
            ("env.fort_radius", self.fort_radius),
            ("env.guard_zone_radius", self.guard_zone_radius),
            ("env.laser_range", self.laser_range),
            ("env.laser_half_angle", self.laser_half_angle),
            ("env.acceleration", self.acceleration),
            ("env.rotation_step", self.rotation_step),
            ("env.max_speed", self.max_speed),
            ("env.agent_radius", self.agent_radius),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::config("env.damping", format!("must lie in [0, 1), got {}", self.damping)));
        }
        if self.laser_half_angle > std::f64::consts::PI {
            return Err(Error::config("env.laser_half_angle", "must not exceed pi"));
        }
        if self.guard_zone_radius <= self.fort_radius {
            return Err(Error::config("env.guard_zone_radius", "must be larger than env.fort_radius"));
        }
        if self.episode_length == 0 {
            return Err(Error::config("env.episode_length", "must be at least 1"));
        }
        if !self.fort_center.iter().all(|c| c.is_finite()) {
            return Err(Error::config("env.fort_center", "must be finite"));
        }
        for (field, r) in [("env.guard_spawn", &self.guard_spawn), ("env.attacker_spawn", &self.attacker_spawn)] {
            let h = self.arena_half_extent;
            if !(r.x_min < r.x_max && r.y_min < r.y_max) {
                return Err(Error::config(field, "min bounds must be below max bounds"));
            }
            if r.x_min < -h || r.x_max > h || r.y_min < -h || r.y_max > h {
                return Err(Error::config(field, "region extends outside the arena"));
            }
        }
        Ok(())
    }
}

/// Signed reward magnitudes, one per row of the reward table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Guard leaves the fort zone (negative).
    pub leave_fort: f64,
    /// Guard returns to the fort zone (positive).
    pub return_fort: f64,
    /// Attacker reward per unit decrease in distance to the fort centre (positive; moving
    /// away yields the mirrored penalty).
    pub approach_scale: f64,
    /// Shooter reward for killing an opponent (positive).
    pub hit_bonus: f64,
    /// Victim reward when killed by a laser (negative).
    pub hit_penalty: f64,
    pub wasted_shot_guard: f64,
    pub wasted_shot_attacker: f64,
    /// Every surviving guard when the last attacker dies (positive).
    pub all_killed_guard: f64,
    /// Each attacker killed in that final step (negative).
    pub all_killed_attacker: f64,
    /// Attacker that reaches the fort (positive).
    pub fort_reached_attacker: f64,
    /// Every surviving guard when an attacker reaches the fort (negative).
    pub fort_reached_guard: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            leave_fort: -0.2,
            return_fort: 0.2,
            approach_scale: 0.5,
            hit_bonus: 1.0,
            hit_penalty: -1.0,
            wasted_shot_guard: -0.1,
            wasted_shot_attacker: -0.3,
            all_killed_guard: 10.0,
            all_killed_attacker: -10.0,
            fort_reached_attacker: 10.0,
            fort_reached_guard: -10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let rows = [
            ("reward.leave_fort", self.leave_fort, -1.0),
            ("reward.return_fort", self.return_fort, 1.0),
            ("reward.approach_scale", self.approach_scale, 1.0),
            ("reward.hit_bonus", self.hit_bonus, 1.0),
            ("reward.hit_penalty", self.hit_penalty, -1.0),
            ("reward.wasted_shot_guard", self.wasted_shot_guard, -1.0),
            ("reward.wasted_shot_attacker", self.wasted_shot_attacker, -1.0),
            ("reward.all_killed_guard", self.all_killed_guard, 1.0),
            ("reward.all_killed_attacker", self.all_killed_attacker, -1.0),
            ("reward.fort_reached_attacker", self.fort_reached_attacker, 1.0),
            ("reward.fort_reached_guard", self.fort_reached_guard, -1.0),
        ];
        for (field, v, sign) in rows {
            if !v.is_finite() || v * sign <= 0.0 {
                let want = if sign > 0.0 { "positive" } else { "negative" };
                return Err(Error::config(field, format!("must be {want}, got {v}")));
            }
        }
        if self.wasted_shot_attacker.abs() <= self.wasted_shot_guard.abs() {
            return Err(Error::config(
                "reward.wasted_shot_attacker",
                "must be larger in magnitude than reward.wasted_shot_guard",
            ));
        }
        Ok(())
    }
}
