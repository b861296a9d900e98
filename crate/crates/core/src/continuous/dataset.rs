//! Construal selection, data generation and likelihoods for continuous scenes.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::HeuristicFeatures;
use super::scene::ContinuousScene;
use super::sim::{action_log_likelihood, simulate, ContinuousTrajectory, SimConfig};
use crate::construal::{dot, ConstrualDistribution, Feature};
use crate::error::{Error, Result};
use crate::inference::{ChoiceSet, Evidence, InferenceProblem};
use crate::oomdp::{enumerate_construals, single_object_construals, Construal, ObjectState};
use crate::optim::Bounds;
use crate::rng::{rng_for, Rng};
use crate::stats::monte_carlo;
use crate::trajectory::Trajectory;

/// Which construals a continuous agent chooses between.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstrualSpace {
    /// One construal per background vehicle.
    SingleVehicle,
    /// Every subset of vehicles; only sensible for small scenes.
    AllSubsets,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousConfig {
    pub sim: SimConfig,
    /// Rollouts per construal for the behavioral utility.
    pub mc_samples: usize,
    /// Multiplier on the action noise used as the likelihood kernel width.
    pub bandwidth: f64,
    pub space: ConstrualSpace,
    /// Seed for the behavioral-utility rollouts.
    pub utility_seed: u64,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        ContinuousConfig {
            sim: SimConfig::default(),
            mc_samples: 40,
            bandwidth: 1.0,
            space: ConstrualSpace::SingleVehicle,
            utility_seed: 0,
        }
    }
}

/// Sampling range of the true heuristic weights `(DfEH, RH, DfEC)`.
pub fn default_lambda_range() -> Bounds {
    Bounds::new(vec![-1.5, -1.5, -3.0], vec![1.5, 1.5, 3.0])
}

/// Search box for continuous fits.
pub fn default_fit_bounds() -> Bounds {
    default_lambda_range()
}

/// `V̂(s, π_C)`: mean episode return of the controller acting on
/// observations masked to `c`, with its standard error.
pub fn mc_behavioral_utility(
    scene: &ContinuousScene,
    c: &Construal,
    n: usize,
    cfg: &SimConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter("at least one rollout is required".into()));
    }
    Ok(monte_carlo(n, seed, &[], |rng| simulate(scene, c, cfg, Some(rng)).ret))
}

pub fn heuristic_features(scene: &ContinuousScene, c: &Construal) -> HeuristicFeatures {
    HeuristicFeatures::of(&scene.object_state(), c)
}

/// Everything about a scene that does not depend on the bias weights.
#[derive(Clone, Debug)]
pub struct SceneModel {
    pub scene: ContinuousScene,
    pub state: ObjectState,
    pub construals: Vec<Construal>,
    /// Behavioral utility mean and standard error per construal.
    pub utility: Vec<(f64, f64)>,
    pub vor: Vec<f64>,
    /// `(DfEH, RH, DfEC)` per construal.
    pub features: Vec<Vec<f64>>,
}

impl SceneModel {
    pub fn build(scene: &ContinuousScene, scene_index: u64, cfg: &ContinuousConfig) -> Result<SceneModel> {
        scene.validate()?;
        let state = scene.object_state();
        let construals = match cfg.space {
            ConstrualSpace::SingleVehicle => single_object_construals(&state),
            ConstrualSpace::AllSubsets => enumerate_construals(&state)?,
        };
        if construals.is_empty() {
            return Err(Error::Data(format!("scene {:?} has no vehicles to construe", scene.id)));
        }
        let seed = crate::rng::derive_seed(cfg.utility_seed, &[scene_index]);
        let utility = construals
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                mc_behavioral_utility(scene, c, cfg.mc_samples, &cfg.sim, crate::rng::derive_seed(seed, &[i as u64]))
            })
            .collect::<Result<Vec<_>>>()?;
        let vor = utility.iter().zip(&construals).map(|(u, c)| u.0 - c.len() as f64).collect();
        let motion = Feature::motion();
        let features = construals
            .iter()
            .map(|c| motion.iter().map(|f| f.eval(&state, c)).collect())
            .collect();
        Ok(SceneModel {
            scene: scene.clone(),
            state,
            construals,
            utility,
            vor,
            features,
        })
    }

    pub fn selection_policy(&self, lambda: &[f64]) -> ConstrualDistribution {
        let w = self
            .vor
            .iter()
            .zip(&self.features)
            .map(|(v, phi)| v + dot(lambda, phi))
            .collect();
        ConstrualDistribution::from_log_weights(self.construals.clone(), w)
    }

    pub fn sample_trajectory(
        &self,
        dist: &ConstrualDistribution,
        agent_id: u64,
        cfg: &ContinuousConfig,
        rng: &mut Rng,
    ) -> ContinuousTrajectory {
        let k = dist.sample_index(rng);
        let c = &dist.support[k];
        let e = simulate(&self.scene, c, &cfg.sim, Some(rng));
        Trajectory {
            scenario_id: self.scene.id.clone(),
            agent_id,
            ret: e.ret,
            steps: e.steps,
            latent_construal: Some(c.clone()),
            truncated: false,
        }
    }

    /// `log P(ζ | C)` for every construal.
    pub fn evidence(&self, traj: &ContinuousTrajectory, cfg: &ContinuousConfig) -> Vec<f64> {
        self.construals
            .iter()
            .map(|c| continuous_action_likelihood(&self.scene, traj, c, cfg))
            .collect()
    }

    pub fn choice_set(&self) -> ChoiceSet {
        ChoiceSet {
            scenario_id: self.scene.id.clone(),
            vor: self.vor.clone(),
            features: self.features.clone(),
        }
    }
}

pub fn continuous_action_likelihood(
    scene: &ContinuousScene,
    traj: &ContinuousTrajectory,
    c: &Construal,
    cfg: &ContinuousConfig,
) -> f64 {
    action_log_likelihood(scene, &traj.steps, c, &cfg.sim, cfg.bandwidth)
}

/// Builds every scene model, in parallel over scenes.
pub fn build_models(scenes: &[ContinuousScene], cfg: &ContinuousConfig) -> Result<Vec<SceneModel>> {
    scenes
        .par_iter()
        .enumerate()
        .map(|(i, s)| SceneModel::build(s, i as u64, cfg))
        .collect()
}

/// Samples `per_scene` construals per scene from the biased selection
/// policy and rolls each out.
pub fn generate_continuous_dataset(
    models: &[SceneModel],
    lambda: &[f64],
    per_scene: usize,
    agent_id: u64,
    cfg: &ContinuousConfig,
    seed: u64,
) -> Result<Vec<ContinuousTrajectory>> {
    if lambda.len() != 3 {
        return Err(Error::InvalidParameter(format!("expected 3 weights, got {}", lambda.len())));
    }
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|j| (0..per_scene).map(move |k| (j, k)))
        .collect();
    let dists: Vec<_> = models.iter().map(|m| m.selection_policy(lambda)).collect();
    Ok(jobs
        .par_iter()
        .map(|&(j, k)| {
            let mut rng = rng_for(seed, &[agent_id, j as u64, k as u64]);
            models[j].sample_trajectory(&dists[j], agent_id, cfg, &mut rng)
        })
        .collect())
}

pub fn continuous_problem(
    models: &[SceneModel],
    trajectories: &[ContinuousTrajectory],
    cfg: &ContinuousConfig,
) -> Result<InferenceProblem> {
    let evidence = trajectories
        .par_iter()
        .map(|t| {
            let i = models
                .iter()
                .position(|m| m.scene.id == t.scenario_id)
                .ok_or_else(|| Error::Data(format!("unknown scene {:?}", t.scenario_id)))?;
            if t.steps.is_empty() {
                return Err(Error::Data("trajectory has no steps".into()));
            }
            Ok(Evidence::new(i, models[i].evidence(t, cfg)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InferenceProblem {
        feature_names: Feature::motion().iter().map(Feature::name).collect(),
        choice_sets: models.iter().map(SceneModel::choice_set).collect(),
        evidence,
    })
}

/// Uniform draw from `bounds`.
pub fn sample_lambda(bounds: &Bounds, rng: &mut Rng) -> Vec<f64> {
    bounds
        .lo
        .iter()
        .zip(&bounds.hi)
        .map(|(l, h)| rng.random_range(*l..=*h))
        .collect()
}
