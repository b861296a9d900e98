//! Episode simulation: kinematic bicycle dynamics for the ego, logged replay
//! for everyone else, and the episode reward.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::policy::{generalist_policy, observe, Control, ControllerParams};
use super::scene::{ContinuousScene, Pose, COLLISION_DISTANCE};
use crate::oomdp::Construal;
use crate::rng::Rng;
use crate::trajectory::{Step, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRewards {
    pub goal_bonus: f64,
    pub collision_penalty: f64,
    pub step_cost: f64,
}

impl Default for SimRewards {
    fn default() -> Self {
        SimRewards {
            goal_bonus: 1.0,
            collision_penalty: 1.0,
            step_cost: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rewards: SimRewards,
    pub controller: ControllerParams,
    pub goal_radius: f64,
    /// Standard deviations of the Gaussian action noise.
    pub accel_noise: f64,
    pub steer_noise: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    pub max_steer: f64,
    pub max_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rewards: SimRewards::default(),
            controller: ControllerParams::default(),
            goal_radius: 3.0,
            accel_noise: 0.3,
            steer_noise: 0.02,
            max_accel: 3.0,
            max_brake: 8.0,
            max_speed: 16.0,
            max_steer: 0.6,
        }
    }
}

impl SimConfig {
    /// The action actually applied: clamped to the vehicle limits.
    pub fn clamp(&self, a: Control) -> Control {
        Control {
            accel: a.accel.clamp(-self.max_brake, self.max_accel),
            steer: a.steer.clamp(-self.max_steer, self.max_steer),
        }
    }

    pub fn advance(&self, ego: Pose, a: Control, dt: f64) -> Pose {
        let a = self.clamp(a);
        let l = self.controller.wheelbase;
        Pose {
            x: ego.x + ego.speed * ego.heading.cos() * dt,
            y: ego.y + ego.speed * ego.heading.sin() * dt,
            heading: ego.heading + ego.speed / l * a.steer.tan() * dt,
            speed: (ego.speed + a.accel * dt).clamp(0.0, self.max_speed),
        }
    }
}

/// Ego state at a simulation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub k: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl EgoState {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading, self.speed)
    }

    fn of(k: usize, p: Pose) -> Self {
        EgoState {
            k,
            x: p.x,
            y: p.y,
            heading: p.heading,
            speed: p.speed,
        }
    }
}

pub type ContinuousTrajectory = Trajectory<EgoState, Control>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    Collision { with: String },
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    /// Recorded states and the (pre-clamp) actions taken in them.
    pub steps: Vec<Step<EgoState, Control>>,
    pub ret: f64,
    pub outcome: Outcome,
    /// Ego poses from the start through the final state.
    pub path: Vec<Pose>,
}

fn collision(scene: &ContinuousScene, k: usize, ego: &Pose) -> Option<String> {
    scene
        .vehicles
        .iter()
        .find(|v| v.at(k).distance(ego) < COLLISION_DISTANCE)
        .map(|v| v.id.clone())
}

/// Runs the controller on observations masked to `c` under the true scene
/// dynamics. With `rng` absent the controller acts noise-free.
pub fn simulate(scene: &ContinuousScene, c: &Construal, cfg: &SimConfig, mut rng: Option<&mut Rng>) -> Episode {
    let accel = Normal::new(0.0, cfg.accel_noise).expect("finite noise");
    let steer = Normal::new(0.0, cfg.steer_noise).expect("finite noise");
    let mut ego = scene.ego.start;
    let mut steps = Vec::with_capacity(scene.horizon);
    let mut path = vec![ego];
    let mut ret = 0.0;
    let goal = scene.goal;
    for k in 0..scene.horizon {
        let mut a = generalist_policy(&observe(scene, k, ego, c), &cfg.controller);
        if let Some(r) = rng.as_deref_mut() {
            a.accel += accel.sample(r);
            a.steer += steer.sample(r);
        }
        steps.push(Step {
            s: EgoState::of(k, ego),
            a,
        });
        ego = cfg.advance(ego, a, scene.dt);
        path.push(ego);
        ret -= cfg.rewards.step_cost;
        if let Some(with) = collision(scene, k + 1, &ego) {
            ret -= cfg.rewards.collision_penalty;
            return Episode {
                steps,
                ret,
                outcome: Outcome::Collision { with },
                path,
            };
        }
        if ego.distance(&goal) < cfg.goal_radius {
            ret += cfg.rewards.goal_bonus;
            return Episode {
                steps,
                ret,
                outcome: Outcome::Goal,
                path,
            };
        }
    }
    Episode {
        steps,
        ret,
        outcome: Outcome::Timeout,
        path,
    }
}

/// Summed Gaussian log-density of the recorded actions around the
/// controller's noise-free output under construal `c`. `bandwidth` scales
/// the configured noise standard deviations.
pub fn action_log_likelihood(
    scene: &ContinuousScene,
    steps: &[Step<EgoState, Control>],
    c: &Construal,
    cfg: &SimConfig,
    bandwidth: f64,
) -> f64 {
    let (sa, ss) = (cfg.accel_noise * bandwidth, cfg.steer_noise * bandwidth);
    let norm = -(2.0 * std::f64::consts::PI).ln() - sa.ln() - ss.ln();
    steps
        .iter()
        .map(|st| {
            let mean = generalist_policy(&observe(scene, st.s.k, st.s.pose(), c), &cfg.controller);
            let za = (st.a.accel - mean.accel) / sa;
            let zs = (st.a.steer - mean.steer) / ss;
            norm - 0.5 * (za * za + zs * zs)
        })
        .sum()
}
