//! Parameter recovery and sample efficiency on continuous scenes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{
    continuous_problem, default_fit_bounds, default_lambda_range, generate_continuous_dataset, sample_lambda,
    ContinuousConfig, SceneModel,
};
use super::sim::ContinuousTrajectory;
use crate::construal::Feature;
use crate::error::{Error, Result};
use crate::inference::{fit_mle, FitConfig, FitResult, RecoveryReport};
use crate::optim::Bounds;
use crate::rng::{derive_seed, rng_for};
use crate::stats::mean_and_se;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRecoveryConfig {
    pub n_agents: usize,
    /// Dataset sizes, in trajectories per agent, to fit at. Smaller budgets
    /// use a prefix of the largest dataset.
    pub budgets: Vec<usize>,
    pub lambda_range: Bounds,
    pub seed: u64,
    pub fit: FitConfig,
}

impl ContinuousRecoveryConfig {
    pub fn new(n_agents: usize, budgets: Vec<usize>, seed: u64) -> Self {
        ContinuousRecoveryConfig {
            n_agents,
            budgets,
            lambda_range: default_lambda_range(),
            seed,
            fit: FitConfig::derivative_free(default_fit_bounds(), seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEfficiencyRow {
    pub trajectories: usize,
    /// Mean driving time per agent at this budget.
    pub minutes_of_data: f64,
    /// Squared error averaged over heuristics, then over agents.
    pub mean_sq_error: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRecovery {
    pub truths: Vec<Vec<f64>>,
    /// One report per budget, in the configured order.
    pub reports: Vec<(usize, RecoveryReport)>,
    pub efficiency: Vec<SampleEfficiencyRow>,
}

impl ContinuousRecovery {
    pub fn report(&self, budget: usize) -> Option<&RecoveryReport> {
        self.reports.iter().find(|(b, _)| *b == budget).map(|(_, r)| r)
    }
}

/// The first `budget` trajectories in round-robin scene order, from a
/// dataset laid out scene by scene with `per_scene` each.
fn prefix(data: &[ContinuousTrajectory], n_scenes: usize, per_scene: usize, budget: usize) -> Vec<ContinuousTrajectory> {
    (0..budget)
        .map(|o| {
            let (k, j) = (o / n_scenes, o % n_scenes);
            data[j * per_scene + k].clone()
        })
        .collect()
}

fn minutes(data: &[ContinuousTrajectory], dt: f64) -> f64 {
    data.iter().map(|t| t.steps.len() as f64 * dt).sum::<f64>() / 60.0
}

/// Draws true weights per agent, simulates the largest budget once and
/// fits every budget on nested prefixes of it.
pub fn continuous_recovery(
    models: &[SceneModel],
    cfg: &ContinuousConfig,
    rc: &ContinuousRecoveryConfig,
) -> Result<ContinuousRecovery> {
    let max = rc.budgets.iter().copied().max().unwrap_or(0);
    if rc.n_agents == 0 || max == 0 || models.is_empty() || rc.budgets.contains(&0) {
        return Err(Error::InvalidParameter(
            "recovery needs at least one agent, scene and trajectory".into(),
        ));
    }
    let n_scenes = models.len();
    let per_scene = max.div_ceil(n_scenes);
    let dt = models[0].scene.dt;
    let truths: Vec<Vec<f64>> = (0..rc.n_agents)
        .map(|a| sample_lambda(&rc.lambda_range, &mut rng_for(rc.seed, &[0x1a, a as u64])))
        .collect();
    // per agent: one (fit, minutes) per budget
    let per_agent = truths
        .par_iter()
        .enumerate()
        .map(|(a, lambda)| {
            let data = generate_continuous_dataset(models, lambda, per_scene, a as u64, cfg, rc.seed)?;
            rc.budgets
                .iter()
                .map(|&b| {
                    let sub = prefix(&data, n_scenes, per_scene, b);
                    let problem = continuous_problem(models, &sub, cfg)?;
                    let mut fit = rc.fit.clone();
                    fit.seed = derive_seed(rc.fit.seed, &[a as u64, b as u64]);
                    Ok((fit_mle(&problem, &fit)?, minutes(&sub, dt)))
                })
                .collect::<Result<Vec<(FitResult, f64)>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = Feature::motion().iter().map(Feature::name).collect();
    let mut reports = Vec::new();
    let mut efficiency = Vec::new();
    for (i, &b) in rc.budgets.iter().enumerate() {
        let fits: Vec<FitResult> = per_agent.iter().map(|v| v[i].0.clone()).collect();
        let errors: Vec<f64> = fits
            .iter()
            .zip(&truths)
            .map(|(f, t)| crate::stats::mse(t, &f.lambda_star))
            .collect();
        let (mean_sq_error, se) = mean_and_se(&errors);
        let mins: Vec<f64> = per_agent.iter().map(|v| v[i].1).collect();
        efficiency.push(SampleEfficiencyRow {
            trajectories: b,
            minutes_of_data: mean_and_se(&mins).0,
            mean_sq_error,
            se,
        });
        reports.push((b, RecoveryReport::from_fits(&names, &truths, fits)));
    }
    Ok(ContinuousRecovery {
        truths,
        reports,
        efficiency,
    })
}
