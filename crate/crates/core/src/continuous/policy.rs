//! The scripted generalist controller. It sees the ego pose, its route and
//! the current poses of the construed vehicles only, and returns an
//! acceleration and a steering angle. Every construal runs this same
//! function; construals differ only in what the observation contains.

use serde::{Deserialize, Serialize};

use super::scene::{ContinuousScene, Polyline, Pose};
use crate::oomdp::Construal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub cruise_speed: f64,
    /// Target speed when a faster car closes from behind.
    pub escape_speed: f64,
    pub speed_gain: f64,
    pub lookahead_min: f64,
    /// Lookahead grows by this many metres per m/s of speed.
    pub lookahead_gain: f64,
    pub wheelbase: f64,
    /// Vehicles farther than this are ignored even when construed.
    pub avoid_radius: f64,
    /// Predicted closest approach below which the controller brakes.
    pub safety_distance: f64,
    pub prediction_horizon: f64,
    /// Lateral offset used to pass a slow car in the ego lane.
    pub pass_offset: f64,
    pub lane_half_width: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            cruise_speed: 10.0,
            escape_speed: 14.0,
            speed_gain: 1.5,
            lookahead_min: 6.0,
            lookahead_gain: 0.6,
            wheelbase: 2.8,
            avoid_radius: 35.0,
            safety_distance: 3.5,
            prediction_horizon: 4.0,
            pass_offset: 3.5,
            lane_half_width: 1.75,
        }
    }
}

/// What the controller sees: everything except unconstrued vehicles.
#[derive(Clone, Debug)]
pub struct Observation<'a> {
    pub ego: Pose,
    pub route: &'a Polyline,
    pub vehicles: Vec<Pose>,
}

/// Masks the scene at step `k` down to the construed vehicles.
pub fn observe<'a>(scene: &'a ContinuousScene, k: usize, ego: Pose, c: &Construal) -> Observation<'a> {
    Observation {
        ego,
        route: &scene.ego.route,
        vehicles: scene
            .vehicles
            .iter()
            .filter(|v| c.contains(&v.id))
            .map(|v| v.at(k))
            .collect(),
    }
}

/// Minimum predicted distance between two constant-velocity agents within
/// `horizon` seconds.
pub fn closest_approach(a: &Pose, b: &Pose, horizon: f64) -> f64 {
    let dp = [b.x - a.x, b.y - a.y];
    let (va, vb) = (a.velocity(), b.velocity());
    let dv = [vb[0] - va[0], vb[1] - va[1]];
    let dv2 = dv[0] * dv[0] + dv[1] * dv[1];
    let t = if dv2 < 1e-12 {
        0.0
    } else {
        (-(dp[0] * dv[0] + dp[1] * dv[1]) / dv2).clamp(0.0, horizon)
    };
    (dp[0] + dv[0] * t).hypot(dp[1] + dv[1] * t)
}

/// Pure pursuit along the route with rule-based avoidance of visible
/// vehicles: pass slow cars in the ego lane, speed up ahead of faster cars
/// closing from behind, and brake for anything predicted to come too close.
pub fn generalist_policy(obs: &Observation, p: &ControllerParams) -> Control {
    let ego = obs.ego;
    let here = obs.route.project(ego.pos());
    let dir = [ego.heading.cos(), ego.heading.sin()];
    let mut offset: f64 = 0.0;
    let mut brake = false;
    let mut hurry = false;
    for v in &obs.vehicles {
        if ego.distance(v) > p.avoid_radius {
            continue;
        }
        let there = obs.route.project(v.pos());
        let aligned = (v.heading - there.heading).cos() > 0.7;
        let in_lane = there.lateral.abs() < p.lane_half_width;
        let gap = there.s - here.s;
        if aligned && in_lane && gap > -6.0 && v.speed < p.cruise_speed - 1.0 {
            offset = offset.max(p.pass_offset);
            continue;
        }
        if aligned && in_lane && gap < 0.0 && v.speed > ego.speed + 0.5 {
            hurry = true;
            continue;
        }
        let ahead = (v.x - ego.x) * dir[0] + (v.y - ego.y) * dir[1] > 0.0;
        if ahead && closest_approach(&ego, v, p.prediction_horizon) < p.safety_distance {
            brake = true;
        }
    }
    let target_speed = if brake {
        0.0
    } else if hurry {
        p.escape_speed
    } else {
        p.cruise_speed
    };
    let lookahead = p.lookahead_min.max(p.lookahead_gain * ego.speed);
    let s = here.s + lookahead;
    let [px, py] = obs.route.point_at(s);
    let h = obs.route.heading_at(s);
    let (tx, ty) = (px - h.sin() * offset, py + h.cos() * offset);
    let alpha = (ty - ego.y).atan2(tx - ego.x) - ego.heading;
    let dist = (tx - ego.x).hypot(ty - ego.y).max(1e-6);
    Control {
        accel: p.speed_gain * (target_speed - ego.speed),
        steer: (2.0 * p.wheelbase * alpha.sin() / dist).atan(),
    }
}
