//! Value of representation, attentional bias features, and the biased
//! construal selection policy.
//!
//! A decision-maker samples one construal at the start of an episode with
//! probability proportional to `exp(VOR(s, C) + H_λ(s, C))` and then follows
//! the construed policy in the true environment.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::features as heuristics;
use crate::driving_world::{compile, compile_true, Action, Cell, GridScenario, TabularMDP, World};
use crate::error::{Error, Result};
use crate::oomdp::{enumerate_construals, Construal, ObjectState};
use crate::planner::{evaluate_policy, solve, ActionPolicy, DEFAULT_TOL};
use crate::rng::Rng;
use crate::stats::logsumexp;
use crate::trajectory::{GridTrajectory, Step, Trajectory};

/// Step cap for tabular rollouts.
pub const DEFAULT_STEP_CAP: usize = 200;

/// A construal feature function `φ(s, C)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    /// Number of construed objects of a class.
    ClassCount { class: String },
    /// Mean absolute angle between ego heading and the bearing to each
    /// construed vehicle.
    DeviationFromEgoHeading,
    /// Mean absolute angle between ego heading and each construed vehicle's
    /// heading.
    RelativeHeading,
    /// Mean normalized dot product of relative velocity and relative
    /// displacement of each construed vehicle.
    DeviationFromEgoCollision,
}

impl Feature {
    pub fn count(class: &str) -> Feature {
        Feature::ClassCount {
            class: class.to_string(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Feature::ClassCount { class } => {
                let mut name = class.clone();
                if let Some(first) = name.get_mut(0..1) {
                    first.make_ascii_uppercase();
                }
                name
            }
            Feature::DeviationFromEgoHeading => "DfEH".into(),
            Feature::RelativeHeading => "RH".into(),
            Feature::DeviationFromEgoCollision => "DfEC".into(),
        }
    }

    pub fn eval(&self, s: &ObjectState, c: &Construal) -> f64 {
        match self {
            Feature::ClassCount { class } => c
                .iter()
                .filter(|id| s.object(id).is_some_and(|o| &o.class == class))
                .count() as f64,
            Feature::DeviationFromEgoHeading => heuristics::deviation_from_ego_heading(s, c),
            Feature::RelativeHeading => heuristics::relative_heading(s, c),
            Feature::DeviationFromEgoCollision => heuristics::deviation_from_ego_collision(s, c),
        }
    }

    /// `φ_Ice, φ_Cone, φ_Parked`.
    pub fn tabular() -> Vec<Feature> {
        vec![Feature::count("ice"), Feature::count("cone"), Feature::count("parked")]
    }

    /// `φ_DfEH, φ_RH, φ_DfEC`.
    pub fn motion() -> Vec<Feature> {
        vec![
            Feature::DeviationFromEgoHeading,
            Feature::RelativeHeading,
            Feature::DeviationFromEgoCollision,
        ]
    }
}

/// Linear bias `H_λ(s, C) = Σ_i λ_i φ_i(s, C)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    pub features: Vec<Feature>,
    pub weights: Vec<f64>,
}

impl BiasModel {
    pub fn new(features: Vec<Feature>, weights: Vec<f64>) -> Result<Self> {
        if features.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} features but {} weights",
                features.len(),
                weights.len()
            )));
        }
        Ok(BiasModel { features, weights })
    }

    pub fn tabular(ice: f64, cone: f64, parked: f64) -> Self {
        BiasModel {
            features: Feature::tabular(),
            weights: vec![ice, cone, parked],
        }
    }

    pub fn feature_vector(&self, s: &ObjectState, c: &Construal) -> Vec<f64> {
        self.features.iter().map(|f| f.eval(s, c)).collect()
    }

    pub fn h(&self, s: &ObjectState, c: &Construal) -> f64 {
        dot(&self.weights, &self.feature_vector(s, c))
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        BiasModel {
            features: self.features.clone(),
            weights,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax distribution over a construal support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstrualDistribution {
    pub support: Vec<Construal>,
    pub probs: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl ConstrualDistribution {
    pub fn from_log_weights(support: Vec<Construal>, log_weights: Vec<f64>) -> Self {
        let z = logsumexp(&log_weights);
        let probs = log_weights.iter().map(|w| (w - z).exp()).collect();
        ConstrualDistribution {
            support,
            probs,
            log_weights,
        }
    }

    pub fn sample_index(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding: fall back to the last construal with mass
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn mode(&self) -> &Construal {
        let best = (0..self.probs.len())
            .fold(0, |b, i| if self.probs[i] > self.probs[b] { i } else { b });
        &self.support[best]
    }
}

/// Probability of attending to `id`: the mass of construals containing it.
pub fn marginal_attention(dist: &ConstrualDistribution, id: &str) -> Result<f64> {
    if !dist.support.iter().any(|c| c.contains(id)) {
        return Err(Error::UnknownObject(id.to_string()));
    }
    Ok(dist
        .support
        .iter()
        .zip(&dist.probs)
        .filter(|(c, _)| c.contains(id))
        .map(|(_, p)| p)
        .sum())
}

/// `VOR(s₀, C)`: true-dynamics value of the construed policy minus `|C|`.
pub fn vor(scenario: &GridScenario, c: &Construal, beta: f64) -> Result<f64> {
    let policy = crate::planner::construed_policy(scenario, c, beta)?;
    Ok(crate::planner::evaluate_policy_true(scenario, &policy)? - c.len() as f64)
}

/// Episode produced by following a tabular policy under the true dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub steps: Vec<(Cell, Action)>,
    pub rewards: Vec<f64>,
    pub truncated: bool,
}

impl Rollout {
    pub fn total(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn discounted_return(&self, discount: f64) -> f64 {
        self.rewards.iter().rev().fold(0.0, |acc, r| r + discount * acc)
    }
}

pub fn rollout(
    world: &World,
    mdp: &TabularMDP,
    policy: &ActionPolicy,
    rng: &mut Rng,
    step_cap: usize,
) -> Result<Rollout> {
    let mut cell = world.scenario().ego_start;
    let mut out = Rollout {
        steps: vec![],
        rewards: vec![],
        truncated: false,
    };
    loop {
        if out.steps.len() >= step_cap {
            out.truncated = true;
            return Ok(out);
        }
        let s = mdp
            .state_of(cell)
            .ok_or_else(|| Error::Data(format!("cell {cell:?} outside the policy domain")))?;
        let u: f64 = rng.random();
        let p = &policy.probs[s];
        let mut a = 3;
        let mut acc = 0.0;
        for (i, pi) in p.iter().enumerate() {
            acc += pi;
            if u < acc {
                a = i;
                break;
            }
        }
        let action = Action::from_index(a);
        let t = world.step(cell, action, rng)?;
        out.steps.push((cell, action));
        out.rewards.push(t.reward);
        if t.done {
            return Ok(out);
        }
        cell = t.next;
    }
}

/// Everything about one scenario that does not depend on `λ`: the construal
/// space, each construal's policy, and its value of representation.
#[derive(Clone, Debug)]
pub struct ScenarioModel {
    pub scenario: GridScenario,
    pub state: ObjectState,
    pub construals: Vec<Construal>,
    pub policies: Vec<ActionPolicy>,
    pub vor: Vec<f64>,
    pub beta: f64,
    pub true_mdp: TabularMDP,
    pub world: World,
}

impl ScenarioModel {
    pub fn build(scenario: &GridScenario, beta: f64) -> Result<ScenarioModel> {
        let state = scenario.object_state();
        let construals = enumerate_construals(&state)?;
        let true_mdp = compile_true(scenario)?;
        let start = true_mdp
            .state_of(scenario.ego_start)
            .expect("validated start cell");
        let solved: Vec<(ActionPolicy, f64)> = construals
            .par_iter()
            .map(|c| {
                let table = solve(&compile(scenario, c)?, DEFAULT_TOL)?;
                let policy = ActionPolicy::softmax(&table, beta);
                let value = evaluate_policy(&true_mdp, &policy)?[start];
                Ok((policy, value - c.len() as f64))
            })
            .collect::<Result<_>>()?;
        let (policies, vor) = solved.into_iter().unzip();
        Ok(ScenarioModel {
            scenario: scenario.clone(),
            state,
            construals,
            policies,
            vor,
            beta,
            world: World::new(scenario)?,
            true_mdp,
        })
    }

    pub fn features(&self, features: &[Feature]) -> Vec<Vec<f64>> {
        self.construals
            .iter()
            .map(|c| features.iter().map(|f| f.eval(&self.state, c)).collect())
            .collect()
    }

    pub fn selection_policy(&self, bias: &BiasModel) -> ConstrualDistribution {
        let log_weights = self
            .construals
            .iter()
            .zip(&self.vor)
            .map(|(c, v)| v + bias.h(&self.state, c))
            .collect();
        ConstrualDistribution::from_log_weights(self.construals.clone(), log_weights)
    }

    pub fn index_of(&self, c: &Construal) -> Option<usize> {
        self.construals.iter().position(|x| x == c)
    }

    pub fn rollout(&self, construal: usize, rng: &mut Rng) -> Result<Rollout> {
        rollout(&self.world, &self.true_mdp, &self.policies[construal], rng, DEFAULT_STEP_CAP)
    }

    /// Samples a construal from `dist` and rolls out its policy.
    pub fn sample_with(
        &self,
        dist: &ConstrualDistribution,
        agent_id: u64,
        rng: &mut Rng,
    ) -> Result<GridTrajectory> {
        let k = dist.sample_index(rng);
        let r = self.rollout(k, rng)?;
        Ok(Trajectory {
            scenario_id: self.scenario.id.clone(),
            agent_id,
            ret: r.total(),
            steps: r.steps.into_iter().map(|(s, a)| Step { s, a }).collect(),
            latent_construal: Some(dist.support[k].clone()),
            truncated: r.truncated,
        })
    }

    pub fn sample_trajectory(&self, bias: &BiasModel, agent_id: u64, rng: &mut Rng) -> Result<GridTrajectory> {
        self.sample_with(&self.selection_policy(bias), agent_id, rng)
    }
}

pub fn selection_policy(scenario: &GridScenario, bias: &BiasModel, beta: f64) -> Result<ConstrualDistribution> {
    Ok(ScenarioModel::build(scenario, beta)?.selection_policy(bias))
}

pub fn sample_trajectory(
    scenario: &GridScenario,
    bias: &BiasModel,
    beta: f64,
    rng: &mut Rng,
) -> Result<GridTrajectory> {
    ScenarioModel::build(scenario, beta)?.sample_trajectory(bias, 0, rng)
}
