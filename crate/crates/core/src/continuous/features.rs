//! Motion heuristics computed from the scene's start state.
//!
//! Each heuristic is a mean over the construed vehicles; an empty construal
//! maps every heuristic to 0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::oomdp::{Construal, Object, ObjectState};

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Kinematic snapshot of a vehicle-like object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub pos: [f64; 2],
    pub heading: f64,
    pub speed: f64,
}

impl Kinematics {
    pub fn velocity(&self) -> [f64; 2] {
        [self.speed * self.heading.cos(), self.speed * self.heading.sin()]
    }

    pub fn of(o: &Object) -> Option<Kinematics> {
        let pos = o.vector("pos")?;
        Some(Kinematics {
            pos: [*pos.first()?, *pos.get(1)?],
            heading: o.scalar("heading").unwrap_or(0.0),
            speed: o.scalar("speed").unwrap_or(0.0),
        })
    }
}

/// |angle between the ego heading and the bearing from ego to `other`|.
pub fn bearing_deviation(ego: &Kinematics, other: &Kinematics) -> f64 {
    let dx = other.pos[0] - ego.pos[0];
    let dy = other.pos[1] - ego.pos[1];
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    wrap_angle(dy.atan2(dx) - ego.heading).abs()
}

/// |angle between the two headings|.
pub fn heading_deviation(ego: &Kinematics, other: &Kinematics) -> f64 {
    wrap_angle(other.heading - ego.heading).abs()
}

/// `(V_i - V_e)·(P_i - P_e) / (|V_i - V_e| |P_i - P_e|)`: negative when the
/// vehicle is closing on the ego, positive when it is receding.
pub fn collision_cosine(ego: &Kinematics, other: &Kinematics) -> f64 {
    let (ve, vi) = (ego.velocity(), other.velocity());
    let dv = [vi[0] - ve[0], vi[1] - ve[1]];
    let dp = [other.pos[0] - ego.pos[0], other.pos[1] - ego.pos[1]];
    let norm = dv[0].hypot(dv[1]) * dp[0].hypot(dp[1]);
    if norm < 1e-12 {
        return 0.0;
    }
    ((dv[0] * dp[0] + dv[1] * dp[1]) / norm).clamp(-1.0, 1.0)
}

fn mean_over(s: &ObjectState, c: &Construal, f: fn(&Kinematics, &Kinematics) -> f64) -> f64 {
    let Some(ego) = s
        .objects()
        .values()
        .find(|o| o.class == "ego")
        .and_then(Kinematics::of)
    else {
        return 0.0;
    };
    let vals: Vec<f64> = c
        .iter()
        .filter_map(|id| s.object(id))
        .filter(|o| o.class == "vehicle")
        .filter_map(Kinematics::of)
        .map(|k| f(&ego, &k))
        .collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn deviation_from_ego_heading(s: &ObjectState, c: &Construal) -> f64 {
    mean_over(s, c, bearing_deviation)
}

pub fn relative_heading(s: &ObjectState, c: &Construal) -> f64 {
    mean_over(s, c, heading_deviation)
}

pub fn deviation_from_ego_collision(s: &ObjectState, c: &Construal) -> f64 {
    mean_over(s, c, collision_cosine)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicFeatures {
    pub dfeh: f64,
    pub rh: f64,
    pub dfec: f64,
}

impl HeuristicFeatures {
    pub fn of(s: &ObjectState, c: &Construal) -> Self {
        HeuristicFeatures {
            dfeh: deviation_from_ego_heading(s, c),
            rh: relative_heading(s, c),
            dfec: deviation_from_ego_collision(s, c),
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.dfeh, self.rh, self.dfec]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(x: f64, y: f64, heading: f64, speed: f64) -> Kinematics {
        Kinematics {
            pos: [x, y],
            heading,
            speed,
        }
    }

    fn state(vehicles: &[(&str, Kinematics)]) -> ObjectState {
        let obj = |class: &str, k: &Kinematics| {
            Object::new(class)
                .with("pos", vec![k.pos[0], k.pos[1]])
                .with("heading", k.heading)
                .with("speed", k.speed)
        };
        let mut objects = vec![("ego".to_string(), obj("ego", &k(0.0, 0.0, 0.0, 10.0)))];
        objects.extend(vehicles.iter().map(|(id, v)| (id.to_string(), obj("vehicle", v))));
        let ids = vehicles.iter().map(|(id, _)| id.to_string()).collect();
        ObjectState::new(objects.into_iter().collect(), ids).unwrap()
    }

    #[test]
    fn aligned_and_antiparallel_cases() {
        let ego = k(0.0, 0.0, 0.0, 10.0);
        assert_eq!(bearing_deviation(&ego, &k(20.0, 0.0, 0.0, 5.0)), 0.0);
        assert!((heading_deviation(&ego, &k(20.0, 3.0, PI, 5.0)) - PI).abs() < 1e-12);
        assert!((bearing_deviation(&ego, &k(-5.0, 0.0, 0.0, 5.0)) - PI).abs() < 1e-12);
        assert!((bearing_deviation(&ego, &k(0.0, 7.0, 0.0, 5.0)) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn collision_sign_convention() {
        let ego = k(0.0, 0.0, 0.0, 10.0);
        // head-on closing
        assert!((collision_cosine(&ego, &k(30.0, 0.0, PI, 10.0)) + 1.0).abs() < 1e-12);
        // faster vehicle ahead pulling away
        assert!((collision_cosine(&ego, &k(30.0, 0.0, 0.0, 15.0)) - 1.0).abs() < 1e-12);
        // no relative motion
        assert_eq!(collision_cosine(&ego, &k(30.0, 0.0, 0.0, 10.0)), 0.0);
    }

    #[test]
    fn means_over_construal() {
        let s = state(&[("a", k(20.0, 0.0, 0.0, 5.0)), ("b", k(20.0, 0.0, PI, 5.0))]);
        let both: Construal = ["a", "b"].into_iter().collect();
        assert!((relative_heading(&s, &both) - PI / 2.0).abs() < 1e-12);
        assert_eq!(deviation_from_ego_heading(&s, &both), 0.0);
        assert_eq!(HeuristicFeatures::of(&s, &Construal::empty()).to_vec(), vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn ranges(x in -50f64..50.0, y in -50f64..50.0, h in -10f64..10.0, v in 0f64..30.0, eh in -10f64..10.0, ev in 0f64..30.0) {
            let ego = k(0.0, 0.0, eh, ev);
            let o = k(x, y, h, v);
            prop_assert!((0.0..=PI).contains(&bearing_deviation(&ego, &o)));
            prop_assert!((0.0..=PI).contains(&heading_deviation(&ego, &o)));
            prop_assert!((-1.0..=1.0).contains(&collision_cosine(&ego, &o)));
        }
    }
}
