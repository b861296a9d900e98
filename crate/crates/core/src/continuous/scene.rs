//! Continuous scenes: an ego vehicle with a route and goal, and background
//! vehicles replaying logged trajectories sampled at a fixed rate.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oomdp::{Object, ObjectState};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_HORIZON: usize = 90;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Pose { x, y, heading, speed }
    }

    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.speed * self.heading.cos(), self.speed * self.heading.sin()]
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A pose stamped with its time in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl TimedPose {
    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading, self.speed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedVehicle {
    pub id: String,
    pub trajectory: Vec<TimedPose>,
}

impl LoggedVehicle {
    /// Pose at step `k`, holding the last logged pose afterwards.
    pub fn at(&self, k: usize) -> Pose {
        self.trajectory[k.min(self.trajectory.len() - 1)].pose()
    }

    /// Drives along `path` starting at arc length `s0`, with speed given as
    /// a function of time, for `horizon` steps of `dt`.
    pub fn along(
        id: &str,
        path: &Polyline,
        s0: f64,
        speed: impl Fn(f64) -> f64,
        dt: f64,
        horizon: usize,
    ) -> Self {
        let mut s = s0;
        let trajectory = (0..=horizon)
            .map(|k| {
                let t = k as f64 * dt;
                let v = speed(t).max(0.0);
                let [x, y] = path.point_at(s);
                let pose = TimedPose {
                    t,
                    x,
                    y,
                    heading: path.heading_at(s),
                    speed: v,
                };
                s += v * dt;
                pose
            })
            .collect();
        LoggedVehicle {
            id: id.to_string(),
            trajectory,
        }
    }
}

/// A piecewise-linear path with arc-length parameterization. Queries past
/// either end extrapolate along the end segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polyline {
    points: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
}

impl From<Vec<[f64; 2]>> for Polyline {
    fn from(points: Vec<[f64; 2]>) -> Self {
        Polyline::new(points)
    }
}

impl From<Polyline> for Vec<[f64; 2]> {
    fn from(p: Polyline) -> Self {
        p.points
    }
}

/// Projection of a point onto a polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point.
    pub s: f64,
    /// Signed distance, positive to the left of the direction of travel.
    pub lateral: f64,
    pub heading: f64,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        assert!(points.len() >= 2, "a polyline needs two points");
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            cumulative.push(cumulative.last().unwrap() + d);
        }
        Polyline { points, cumulative }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        match self.cumulative[1..n].iter().position(|&c| s < c) {
            Some(i) => i,
            None => n - 1,
        }
    }

    fn direction(&self, i: usize) -> [f64; 2] {
        let (a, b) = (self.points[i], self.points[i + 1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        [(b[0] - a[0]) / len, (b[1] - a[1]) / len]
    }

    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let i = self.segment(s);
        let d = self.direction(i);
        let off = s - self.cumulative[i];
        [self.points[i][0] + d[0] * off, self.points[i][1] + d[1] * off]
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let d = self.direction(self.segment(s));
        d[1].atan2(d[0])
    }

    pub fn project(&self, p: [f64; 2]) -> Projection {
        let mut best = (f64::INFINITY, 0.0, 0);
        let last = self.points.len() - 2;
        for i in 0..=last {
            let a = self.points[i];
            let d = self.direction(i);
            let seg = self.cumulative[i + 1] - self.cumulative[i];
            let mut t = (p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1];
            // the first and last segments extend to infinity
            if i > 0 {
                t = t.max(0.0);
            }
            if i < last {
                t = t.min(seg);
            }
            let q = [a[0] + d[0] * t, a[1] + d[1] * t];
            let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
            if dist < best.0 {
                best = (dist, self.cumulative[i] + t, i);
            }
        }
        let (_, s, i) = best;
        let d = self.direction(i);
        let a = self.points[i];
        let lateral = d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0]);
        Projection {
            s,
            lateral,
            heading: d[1].atan2(d[0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    pub id: String,
    pub start: Pose,
    /// Route to follow; it ends at the goal.
    pub route: Polyline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousScene {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dt: f64,
    pub horizon: usize,
    pub ego: EgoSpec,
    pub goal: Pose,
    #[serde(default)]
    pub roads: Vec<Polyline>,
    pub vehicles: Vec<LoggedVehicle>,
}

/// Centre distance below which two vehicles collide.
pub const COLLISION_DISTANCE: f64 = 2.5;

impl ContinuousScene {
    pub fn validate(&self) -> Result<()> {
        let mut problems = vec![];
        if !(self.dt > 0.0) {
            problems.push(format!("dt {} must be positive", self.dt));
        }
        if self.horizon == 0 {
            problems.push("horizon must be at least one step".into());
        }
        let mut ids = BTreeSet::new();
        if !ids.insert(self.ego.id.as_str()) {
            problems.push("empty ego id".into());
        }
        for v in &self.vehicles {
            if !ids.insert(v.id.as_str()) {
                problems.push(format!("duplicate vehicle id {:?}", v.id));
            }
            if v.trajectory.len() < self.horizon + 1 {
                problems.push(format!(
                    "vehicle {:?} logs {} poses, the horizon needs {}",
                    v.id,
                    v.trajectory.len(),
                    self.horizon + 1
                ));
                continue;
            }
            for (k, p) in v.trajectory.iter().enumerate() {
                if (p.t - k as f64 * self.dt).abs() > 1e-6 {
                    problems.push(format!("vehicle {:?} pose {k} has time {}", v.id, p.t));
                    break;
                }
            }
            if v.at(0).distance(&self.ego.start) < COLLISION_DISTANCE {
                problems.push(format!("ego start collides with {:?}", v.id));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn vehicle(&self, id: &str) -> Option<&LoggedVehicle> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn vehicle_ids(&self) -> Vec<String> {
        self.vehicles.iter().map(|v| v.id.clone()).collect()
    }

    /// Object-oriented start state; background vehicles are construable.
    pub fn object_state(&self) -> ObjectState {
        let obj = |class: &str, p: &Pose| {
            Object::new(class)
                .with("pos", vec![p.x, p.y])
                .with("heading", p.heading)
                .with("speed", p.speed)
        };
        let mut objects = std::collections::BTreeMap::new();
        objects.insert(self.ego.id.clone(), obj("ego", &self.ego.start));
        objects.insert("goal".to_string(), Object::new("goal").with("pos", vec![self.goal.x, self.goal.y]));
        for v in &self.vehicles {
            objects.insert(v.id.clone(), obj("vehicle", &v.at(0)));
        }
        let construable = self.vehicles.iter().map(|v| v.id.clone()).collect();
        ObjectState::new(objects, construable).expect("scene objects are well formed")
    }

    /// Seconds of driving covered by one full episode.
    pub fn duration(&self) -> f64 {
        self.horizon as f64 * self.dt
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<ContinuousScene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let scene: ContinuousScene = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.display().to_string(),
        source,
    })?;
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(path: impl AsRef<Path>, scene: &ContinuousScene) -> Result<()> {
    let mut text = serde_json::to_string_pretty(scene)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

const LANE: f64 = 3.5;

fn straight(x0: f64, y0: f64, heading: f64) -> Polyline {
    let d = [heading.cos(), heading.sin()];
    Polyline::new(vec![[x0, y0], [x0 + 200.0 * d[0], y0 + 200.0 * d[1]]])
}

fn constant(v: f64) -> impl Fn(f64) -> f64 {
    move |_| v
}

/// Speed ramping linearly from `v0` to `v1` over `[t0, t1]`.
fn ramp(v0: f64, v1: f64, t0: f64, t1: f64) -> impl Fn(f64) -> f64 {
    move |t| {
        if t <= t0 {
            v0
        } else if t >= t1 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

struct Builder {
    scene: ContinuousScene,
}

impl Builder {
    fn new(id: &str, description: &str, start: Pose, route: Vec<[f64; 2]>) -> Self {
        let route = Polyline::new(route);
        let end = route.length();
        let [gx, gy] = route.point_at(end);
        let goal = Pose::new(gx, gy, route.heading_at(end), 0.0);
        Builder {
            scene: ContinuousScene {
                id: id.to_string(),
                description: description.to_string(),
                dt: DEFAULT_DT,
                horizon: DEFAULT_HORIZON,
                ego: EgoSpec {
                    id: "ego".into(),
                    start,
                    route,
                },
                goal,
                roads: vec![],
                vehicles: vec![],
            },
        }
    }

    fn road(mut self, points: Vec<[f64; 2]>) -> Self {
        self.scene.roads.push(Polyline::new(points));
        self
    }

    fn vehicle(mut self, id: &str, path: Polyline, s0: f64, speed: impl Fn(f64) -> f64) -> Self {
        let v = LoggedVehicle::along(id, &path, s0, speed, self.scene.dt, self.scene.horizon);
        self.scene.vehicles.push(v);
        self
    }

    /// A vehicle that reaches `at` (along a straight path with `heading`)
    /// after `t` seconds at constant speed `v`.
    fn timed(self, id: &str, at: [f64; 2], heading: f64, v: f64, t: f64) -> Self {
        let x0 = at[0] - heading.cos() * v * t;
        let y0 = at[1] - heading.sin() * v * t;
        self.vehicle(id, straight(x0, y0, heading), 0.0, constant(v))
    }

    fn build(self) -> ContinuousScene {
        self.scene.validate().expect("built-in scene is valid");
        self.scene
    }
}

/// Ten hand-authored scenes covering yielding, merging and lane changes.
/// The ego starts at the origin heading along +x at 10 m/s.
pub fn builtin_scenes() -> Vec<ContinuousScene> {
    let ego = Pose::new(0.0, 0.0, 0.0, 10.0);
    let lane = |y: f64| vec![[-50.0, y], [150.0, y]];
    let east = |y: f64| straight(-100.0, y, 0.0);
    let west = |y: f64| straight(200.0, y, PI);
    let north = |x: f64| straight(x, -100.0, FRAC_PI_2);
    let south = |x: f64| straight(x, 100.0, -FRAC_PI_2);
    let route = |len: f64| vec![[0.0, 0.0], [len, 0.0]];

    vec![
        Builder::new(
            "stalled_lead",
            "A stalled car blocks the ego lane; a faster car closes from behind and oncoming traffic uses the far lane.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .road(lane(LANE))
        .vehicle("stalled", east(0.0), 140.0, constant(0.0))
        .vehicle("tailgater", east(0.0), 75.0, constant(11.5))
        .vehicle("oncoming", west(2.0 * LANE), 90.0, constant(10.0))
        .vehicle("left_lane", east(LANE), 60.0, constant(9.0))
        .vehicle("parked_far", east(-2.0 * LANE), 150.0, constant(0.0))
        .build(),
        Builder::new(
            "crossing_yield",
            "Cross traffic from both sides reaches the ego path as the ego arrives at the junction.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .road(vec![[45.0, -60.0], [45.0, 60.0]])
        .timed("cross_south", [45.0, 0.0], FRAC_PI_2, 8.0, 4.5)
        .timed("cross_north", [62.0, 0.0], -FRAC_PI_2, 9.0, 6.4)
        .vehicle("lead_fast", east(0.0), 120.0, constant(13.0))
        .vehicle("behind_slow", east(0.0), 85.0, constant(8.0))
        .vehicle("far_cross", north(130.0), 60.0, constant(8.0))
        .build(),
        Builder::new(
            "highway_merge",
            "The ego merges left onto a highway lane with traffic approaching from behind and ahead.",
            ego,
            vec![[0.0, 0.0], [25.0, 0.0], [45.0, LANE], [80.0, LANE]],
        )
        .road(lane(0.0))
        .road(lane(LANE))
        .vehicle("hw_behind", east(LANE), 80.0, constant(14.0))
        .vehicle("hw_slow", east(LANE), 150.0, constant(6.0))
        .vehicle("hw_alongside", east(LANE), 98.0, constant(10.5))
        .vehicle("ramp_lead", east(0.0), 125.0, constant(11.0))
        .vehicle("opposite", west(3.0 * LANE), 120.0, constant(12.0))
        .build(),
        Builder::new(
            "lane_change",
            "The ego changes into the left lane, which holds a slower car ahead and a faster one behind.",
            ego,
            vec![[0.0, 0.0], [15.0, 0.0], [30.0, LANE], [80.0, LANE]],
        )
        .road(lane(0.0))
        .road(lane(LANE))
        .vehicle("target_slow", east(LANE), 140.0, constant(5.0))
        .vehicle("target_fast", east(LANE), 75.0, constant(15.0))
        .vehicle("origin_lead", east(0.0), 130.0, constant(9.0))
        .vehicle("right_lane", east(-LANE), 95.0, constant(12.0))
        .build(),
        Builder::new(
            "pedestrian_speed_crossing",
            "A slow vehicle creeps across the ego lane while a parked car and a receding car sit ahead.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .timed("creeper", [38.0, 0.0], FRAC_PI_2, 3.0, 3.6)
        .vehicle("parked_right", east(-LANE), 150.0, constant(0.0))
        .vehicle("receding", east(0.0), 125.0, constant(14.0))
        .vehicle("oncoming_left", west(LANE), 130.0, constant(11.0))
        .vehicle("cross_late", south(90.0), 80.0, constant(7.0))
        .build(),
        Builder::new(
            "oncoming_overtaker",
            "An oncoming car overtakes into the ego lane while a slow truck leads the ego.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .road(lane(LANE))
        .vehicle(
            "overtaker",
            Polyline::new(vec![[140.0, LANE], [90.0, LANE], [70.0, 0.0], [-60.0, 0.0]]),
            0.0,
            constant(11.0),
        )
        .vehicle("truck", east(0.0), 130.0, ramp(8.0, 4.0, 0.0, 3.0))
        .vehicle("overtaken", west(LANE), 40.0, constant(7.0))
        .vehicle("behind_same", east(0.0), 80.0, constant(10.0))
        .build(),
        Builder::new(
            "left_turn_yield",
            "The ego turns left across an oncoming lane and into a side street with a car waiting to exit.",
            ego,
            vec![[0.0, 0.0], [35.0, 0.0], [45.0, 8.0], [45.0, 45.0]],
        )
        .road(lane(0.0))
        .road(lane(LANE))
        .road(vec![[45.0, -30.0], [45.0, 60.0]])
        .timed("oncoming_turn", [41.0, 1.5], PI, 11.0, 4.0)
        .vehicle("side_exit", south(45.0 - 1.75), 75.0, ramp(0.0, 6.0, 4.0, 5.0))
        .vehicle("follow", east(0.0), 88.0, constant(11.0))
        .vehicle("far_east", east(0.0), 160.0, constant(12.0))
        .vehicle("side_parked", south(48.5), 80.0, constant(0.0))
        .build(),
        Builder::new(
            "zipper_merge",
            "Two lanes narrow to one; cars from the closing lane zip in ahead of and beside the ego.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .road(vec![[-50.0, -LANE], [40.0, -LANE], [55.0, 0.0]])
        .vehicle(
            "zip_ahead",
            Polyline::new(vec![[-60.0, -LANE], [30.0, -LANE], [45.0, 0.0], [200.0, 0.0]]),
            78.0,
            ramp(9.0, 7.0, 0.0, 4.0),
        )
        .vehicle(
            "zip_beside",
            Polyline::new(vec![[-60.0, -LANE], [40.0, -LANE], [55.0, 0.0], [200.0, 0.0]]),
            60.0,
            constant(10.0),
        )
        .vehicle("main_lead", east(0.0), 135.0, constant(10.0))
        .vehicle("main_behind", east(0.0), 85.0, constant(11.0))
        .vehicle("opposite_zip", west(LANE), 110.0, constant(9.0))
        .build(),
        Builder::new(
            "roundabout_entry",
            "Circulating traffic crosses the ego path from the left near a roundabout entry.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .timed("circ_near", [40.0, 0.0], -FRAC_PI_2 + 0.5, 9.0, 4.0)
        .timed("circ_far", [55.0, 0.0], -FRAC_PI_2 - 0.4, 9.0, 7.5)
        .vehicle("exit_away", Polyline::new(vec![[45.0, 0.0], [60.0, -20.0], [70.0, -60.0]]), 0.0, constant(8.0))
        .vehicle("queue_behind", east(0.0), 86.0, constant(9.0))
        .build(),
        Builder::new(
            "double_parked",
            "Double-parked cars narrow the road while a cyclist-speed vehicle and oncoming traffic share it.",
            ego,
            route(75.0),
        )
        .road(lane(0.0))
        .road(lane(LANE))
        .vehicle("double_parked", east(0.0), 130.0, constant(0.0))
        .vehicle("slow_rider", east(0.0), 115.0, constant(4.0))
        .vehicle("oncoming_a", west(LANE), 95.0, constant(9.0))
        .vehicle("oncoming_b", west(LANE), 150.0, constant(9.0))
        .vehicle("tail", east(0.0), 83.0, constant(12.0))
        .build(),
    ]
}
