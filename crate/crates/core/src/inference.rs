//! Maximum-likelihood attention-aware inverse planning.
//!
//! The likelihood of a trajectory marginalizes the latent construal:
//!
//! ```text
//! log P(ζ | λ) = log Σ_C exp( log P(ζ | C) + log π_λ(C | s₁) )
//! ```
//!
//! `log P(ζ | C)` and `VOR(s₁, C)` do not depend on `λ`, so they are computed
//! once ([`Evidence`], [`ChoiceSet`]) and every likelihood evaluation reduces
//! to log-sum-exps over construals. The gradient follows from the softmax
//! form of `π_λ`:
//!
//! ```text
//! ∇_λ log P(ζ | λ) = E_{P(C | ζ, λ)}[φ(s₁, C)] - E_{π_λ(C | s₁)}[φ(s₁, C)]
//! ```

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construal::{dot, BiasModel, Feature, ScenarioModel};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, projected_gradient, Bounds, GradientOptions, NelderMeadOptions};
use crate::rng::rng_for;
use crate::stats::{logsumexp, r_squared};
use crate::trajectory::{GridTrajectory, Trajectory};

/// The `λ`-independent part of one scenario's construal choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSet {
    pub scenario_id: String,
    pub vor: Vec<f64>,
    /// `φ(s₁, C)` per construal.
    pub features: Vec<Vec<f64>>,
}

impl ChoiceSet {
    pub fn len(&self) -> usize {
        self.vor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vor.is_empty()
    }

    /// `log π_λ(C | s₁)` for every construal.
    pub fn log_selection(&self, lambda: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self
            .vor
            .iter()
            .zip(&self.features)
            .map(|(v, phi)| v + dot(lambda, phi))
            .collect();
        let z = logsumexp(&w);
        w.into_iter().map(|x| x - z).collect()
    }

    fn expected_features(&self, probs: &[f64]) -> Vec<f64> {
        let dim = self.features.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim];
        for (p, phi) in probs.iter().zip(&self.features) {
            for (o, f) in out.iter_mut().zip(phi) {
                *o += p * f;
            }
        }
        out
    }
}

/// `log P(ζ | C)` for every construal of the trajectory's scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub choice_set: usize,
    pub log_lik: Vec<f64>,
    /// Number of observed trajectories sharing this evidence.
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Evidence {
    pub fn new(choice_set: usize, log_lik: Vec<f64>) -> Self {
        Evidence {
            choice_set,
            log_lik,
            weight: 1.0,
        }
    }
}

pub fn trajectory_loglik(evidence: &Evidence, set: &ChoiceSet, lambda: &[f64]) -> f64 {
    loglik_with(evidence, &set.log_selection(lambda))
}

fn loglik_with(evidence: &Evidence, log_sel: &[f64]) -> f64 {
    let joint: Vec<f64> = evidence.log_lik.iter().zip(log_sel).map(|(a, b)| a + b).collect();
    logsumexp(&joint)
}

/// Posterior over construals given the trajectory, `P(C | ζ, λ)`.
pub fn posterior(evidence: &Evidence, set: &ChoiceSet, lambda: &[f64]) -> Vec<f64> {
    posterior_with(evidence, &set.log_selection(lambda)).1
}

fn posterior_with(evidence: &Evidence, log_sel: &[f64]) -> (f64, Vec<f64>) {
    let joint: Vec<f64> = evidence.log_lik.iter().zip(log_sel).map(|(a, b)| a + b).collect();
    let z = logsumexp(&joint);
    let w = joint.iter().map(|j| if z.is_finite() { (j - z).exp() } else { 0.0 }).collect();
    (z, w)
}

pub fn grad_loglik(evidence: &Evidence, set: &ChoiceSet, lambda: &[f64]) -> Vec<f64> {
    let log_sel = set.log_selection(lambda);
    let prior: Vec<f64> = log_sel.iter().map(|l| l.exp()).collect();
    let (_, w) = posterior_with(evidence, &log_sel);
    let post = set.expected_features(&w);
    let prior = set.expected_features(&prior);
    post.iter().zip(&prior).map(|(a, b)| a - b).collect()
}

/// A dataset reduced to choice sets and per-trajectory evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceProblem {
    pub feature_names: Vec<String>,
    pub choice_sets: Vec<ChoiceSet>,
    pub evidence: Vec<Evidence>,
}

impl InferenceProblem {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.evidence.is_empty() {
            return Err(Error::Data("no trajectories to fit".into()));
        }
        for (i, e) in self.evidence.iter().enumerate() {
            let set = self.choice_sets.get(e.choice_set).ok_or_else(|| {
                Error::Data(format!("trajectory {i} refers to missing choice set {}", e.choice_set))
            })?;
            if set.len() != e.log_lik.len() {
                return Err(Error::Data(format!(
                    "trajectory {i} has {} likelihoods for {} construals",
                    e.log_lik.len(),
                    set.len()
                )));
            }
        }
        Ok(())
    }

    /// Merges trajectories with identical evidence into weighted rows. The
    /// objective and its gradient are unchanged.
    pub fn compact(mut self) -> Self {
        let mut index: BTreeMap<(usize, Vec<u64>), usize> = BTreeMap::new();
        let mut merged: Vec<Evidence> = Vec::new();
        for e in self.evidence {
            let key = (e.choice_set, e.log_lik.iter().map(|x| x.to_bits()).collect());
            match index.get(&key) {
                Some(&i) => merged[i].weight += e.weight,
                None => {
                    index.insert(key, merged.len());
                    merged.push(e);
                }
            }
        }
        self.evidence = merged;
        self
    }

    /// Number of trajectories represented.
    pub fn n_trajectories(&self) -> f64 {
        self.evidence.iter().map(|e| e.weight).sum()
    }

    fn log_selections(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        self.choice_sets.iter().map(|s| s.log_selection(lambda)).collect()
    }

    /// Summed log-likelihood over all trajectories.
    pub fn loglik(&self, lambda: &[f64]) -> f64 {
        let sel = self.log_selections(lambda);
        let per: Vec<f64> = self
            .evidence
            .par_iter()
            .map(|e| e.weight * loglik_with(e, &sel[e.choice_set]))
            .collect();
        per.iter().sum()
    }

    /// Summed log-likelihood and its gradient, sharing one posterior per
    /// trajectory.
    pub fn loglik_and_grad(&self, lambda: &[f64]) -> (f64, Vec<f64>) {
        let sel = self.log_selections(lambda);
        let prior_means: Vec<Vec<f64>> = self
            .choice_sets
            .iter()
            .zip(&sel)
            .map(|(s, l)| s.expected_features(&l.iter().map(|x| x.exp()).collect::<Vec<_>>()))
            .collect();
        let per: Vec<(f64, Vec<f64>)> = self
            .evidence
            .par_iter()
            .map(|e| {
                let set = &self.choice_sets[e.choice_set];
                let (z, w) = posterior_with(e, &sel[e.choice_set]);
                let post = set.expected_features(&w);
                let g = post
                    .iter()
                    .zip(&prior_means[e.choice_set])
                    .map(|(a, b)| e.weight * (a - b))
                    .collect();
                (e.weight * z, g)
            })
            .collect();
        let mut total = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for (z, g) in per {
            total += z;
            for (acc, x) in grad.iter_mut().zip(g) {
                *acc += x;
            }
        }
        (total, grad)
    }

    pub fn nll(&self, lambda: &[f64]) -> f64 {
        -self.loglik(lambda)
    }

    /// Posterior weights per trajectory.
    pub fn posteriors(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let sel = self.log_selections(lambda);
        self.evidence.iter().map(|e| posterior_with(e, &sel[e.choice_set]).1).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Multi-start projected gradient ascent on the exact likelihood.
    Gradient,
    /// Multi-start bounded Nelder-Mead.
    NelderMead,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub restarts: usize,
    /// Search box; restarts are drawn uniformly from it.
    pub bounds: Bounds,
    pub seed: u64,
    pub gradient: GradientOptions,
    pub nelder_mead: NelderMeadOptions,
}

impl FitConfig {
    /// Gradient fit over `[-50, 50]^dim`, 5 restarts.
    pub fn tabular(dim: usize, seed: u64) -> Self {
        FitConfig {
            method: Method::Gradient,
            restarts: 5,
            bounds: Bounds::uniform(dim, -50.0, 50.0),
            seed,
            gradient: GradientOptions::default(),
            nelder_mead: NelderMeadOptions::default(),
        }
    }

    pub fn derivative_free(bounds: Bounds, seed: u64) -> Self {
        FitConfig {
            method: Method::NelderMead,
            restarts: 8,
            bounds,
            seed,
            gradient: GradientOptions::default(),
            nelder_mead: NelderMeadOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub feature_names: Vec<String>,
    pub lambda_star: Vec<f64>,
    pub nll: f64,
    /// Accepted iterates of the winning restart as `(λ, nll)`.
    pub trace: Vec<(Vec<f64>, f64)>,
    pub converged: bool,
    pub restarts: usize,
    pub best_restart: usize,
    pub evaluations: usize,
}

/// Maximizes the summed log-likelihood over the configured box.
pub fn fit_mle(problem: &InferenceProblem, config: &FitConfig) -> Result<FitResult> {
    problem.validate()?;
    let dim = problem.dim();
    if config.bounds.dim() != dim {
        return Err(Error::InvalidParameter(format!(
            "bounds have {} dimensions, problem has {dim}",
            config.bounds.dim()
        )));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    let mut rng = rng_for(config.seed, &[0xf17]);
    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|_| {
            (0..dim)
                .map(|i| rng.random_range(config.bounds.lo[i]..=config.bounds.hi[i]))
                .collect()
        })
        .collect();
    let problem_in = problem;
    let compact = problem.clone().compact();
    let problem = &compact;
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|x0| match config.method {
            Method::Gradient => projected_gradient(
                |x| {
                    let (l, g) = problem.loglik_and_grad(x);
                    (-l, g.into_iter().map(|v| -v).collect())
                },
                x0,
                &config.bounds,
                &config.gradient,
            ),
            Method::NelderMead => {
                nelder_mead(|x| problem.nll(x), x0, &config.bounds, &config.nelder_mead)
            }
        })
        .collect();
    let best = (0..outcomes.len())
        .fold(0, |b, i| if outcomes[i].f < outcomes[b].f { i } else { b });
    let out = &outcomes[best];
    Ok(FitResult {
        feature_names: problem_in.feature_names.clone(),
        nll: problem_in.nll(&out.x),
        lambda_star: out.x.clone(),
        trace: out.trace.clone(),
        converged: out.converged,
        restarts: config.restarts,
        best_restart: best,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
    })
}

/// `log P(ζ | C)` of a tabular trajectory under each construed policy.
pub fn tabular_evidence(model: &ScenarioModel, traj: &GridTrajectory) -> Result<Vec<f64>> {
    let states = traj
        .steps
        .iter()
        .map(|st| {
            model
                .true_mdp
                .state_of(st.s)
                .filter(|_| !model.world.is_terminal(st.s))
                .ok_or_else(|| Error::Data(format!("state {:?} is outside the policy domain", st.s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(model
        .policies
        .iter()
        .map(|p| {
            states
                .iter()
                .zip(&traj.steps)
                .map(|(&s, st)| p.prob(s, st.a).ln())
                .sum()
        })
        .collect())
}

pub fn choice_set(model: &ScenarioModel, features: &[Feature]) -> ChoiceSet {
    ChoiceSet {
        scenario_id: model.scenario.id.clone(),
        vor: model.vor.clone(),
        features: model.features(features),
    }
}

/// Builds the inference problem for tabular trajectories.
pub fn tabular_problem(
    models: &[ScenarioModel],
    features: &[Feature],
    trajectories: &[GridTrajectory],
) -> Result<InferenceProblem> {
    let index: BTreeMap<&str, usize> = models
        .iter()
        .enumerate()
        .map(|(i, m)| (m.scenario.id.as_str(), i))
        .collect();
    let evidence = trajectories
        .par_iter()
        .map(|t| {
            let &i = index.get(t.scenario_id.as_str()).ok_or_else(|| {
                Error::Data(format!("unknown scenario {:?}", t.scenario_id))
            })?;
            if t.steps.is_empty() {
                return Err(Error::Data("trajectory has no steps".into()));
            }
            Ok(Evidence::new(i, tabular_evidence(&models[i], t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InferenceProblem {
        feature_names: features.iter().map(Feature::name).collect(),
        choice_sets: models.iter().map(|m| choice_set(m, features)).collect(),
        evidence,
    })
}

/// Log-likelihood of one tabular trajectory under bias weights `lambda`.
pub fn tabular_trajectory_loglik(
    model: &ScenarioModel,
    features: &[Feature],
    traj: &Trajectory<crate::driving_world::Cell, crate::driving_world::Action>,
    lambda: &[f64],
) -> Result<f64> {
    let e = Evidence::new(0, tabular_evidence(model, traj)?);
    Ok(trajectory_loglik(&e, &choice_set(model, features), lambda))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub agent: usize,
    pub feature: String,
    pub lambda_true: f64,
    pub lambda_est: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
    /// Squared correlation of true and estimated weights per feature.
    pub r_squared: Vec<(String, f64)>,
    pub fits: Vec<FitResult>,
}

impl RecoveryReport {
    pub fn from_fits(names: &[String], truths: &[Vec<f64>], fits: Vec<FitResult>) -> Self {
        let mut rows = Vec::new();
        for (agent, (t, f)) in truths.iter().zip(&fits).enumerate() {
            for (j, name) in names.iter().enumerate() {
                rows.push(RecoveryRow {
                    agent,
                    feature: name.clone(),
                    lambda_true: t[j],
                    lambda_est: f.lambda_star[j],
                });
            }
        }
        let r_squared = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let t: Vec<f64> = truths.iter().map(|x| x[j]).collect();
                let e: Vec<f64> = fits.iter().map(|f| f.lambda_star[j]).collect();
                (name.clone(), r_squared(&t, &e))
            })
            .collect();
        RecoveryReport {
            rows,
            r_squared,
            fits,
        }
    }

    pub fn r_squared_of(&self, feature: &str) -> Option<f64> {
        self.r_squared.iter().find(|(n, _)| n == feature).map(|(_, v)| *v)
    }

    pub fn truths(&self, feature: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.feature == feature).map(|r| r.lambda_true).collect()
    }

    pub fn estimates(&self, feature: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.feature == feature).map(|r| r.lambda_est).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub n_agents: usize,
    pub per_scenario: usize,
    /// True weights are drawn uniformly from this range.
    pub lambda_range: (f64, f64),
    pub seed: u64,
    pub fit: FitConfig,
}

pub fn simulate_agent(
    models: &[ScenarioModel],
    features: &[Feature],
    lambda: &[f64],
    per_scenario: usize,
    agent: usize,
    seed: u64,
) -> Result<Vec<GridTrajectory>> {
    let bias = BiasModel::new(features.to_vec(), lambda.to_vec())?;
    let mut out = Vec::with_capacity(models.len() * per_scenario);
    for (j, m) in models.iter().enumerate() {
        let dist = m.selection_policy(&bias);
        for k in 0..per_scenario {
            let mut rng = rng_for(seed, &[agent as u64, j as u64, k as u64]);
            out.push(m.sample_with(&dist, agent as u64, &mut rng)?);
        }
    }
    Ok(out)
}

/// End-to-end generate-then-fit loop over simulated agents.
pub fn recovery_sweep(
    models: &[ScenarioModel],
    features: &[Feature],
    config: &RecoveryConfig,
) -> Result<RecoveryReport> {
    if config.n_agents == 0 || config.per_scenario == 0 || models.is_empty() {
        return Err(Error::InvalidParameter(
            "recovery needs at least one agent, scenario and trajectory".into(),
        ));
    }
    let (lo, hi) = config.lambda_range;
    let truths: Vec<Vec<f64>> = (0..config.n_agents)
        .map(|a| {
            let mut rng = rng_for(config.seed, &[0x1a, a as u64]);
            features.iter().map(|_| rng.random_range(lo..=hi)).collect()
        })
        .collect();
    let fits = truths
        .par_iter()
        .enumerate()
        .map(|(a, lambda)| {
            let trajs = simulate_agent(models, features, lambda, config.per_scenario, a, config.seed)?;
            let problem = tabular_problem(models, features, &trajs)?;
            let mut fit = config.fit.clone();
            fit.seed = crate::rng::derive_seed(config.fit.seed, &[a as u64]);
            fit_mle(&problem, &fit)
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = features.iter().map(Feature::name).collect();
    Ok(RecoveryReport::from_fits(&names, &truths, fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construal::ScenarioModel;
    use crate::driving_world::{fig1_scenario, generate_scenarios, GeneratorParams};
    use crate::planner::DEFAULT_BETA;

    fn toy() -> (ChoiceSet, Evidence) {
        // two construals; the second explains the trajectory far better
        let set = ChoiceSet {
            scenario_id: "toy".into(),
            vor: vec![1.0, 0.5],
            features: vec![vec![0.0], vec![1.0]],
        };
        let e = Evidence::new(0, vec![(0.1f64 * 0.2).ln(), (0.9f64 * 0.8).ln()]);
        (set, e)
    }

    #[test]
    fn hand_computed_mixture() {
        let (set, e) = toy();
        let lambda = [2.0];
        // π_λ ∝ (e^1, e^2.5)
        let z = 1f64.exp() + 2.5f64.exp();
        let expect = (0.02 * 1f64.exp() / z + 0.72 * 2.5f64.exp() / z).ln();
        assert!((trajectory_loglik(&e, &set, &lambda) - expect).abs() < 1e-12);
        let w = posterior(&e, &set, &lambda);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let expect_w1 = 0.72 * 2.5f64.exp() / (0.02 * 1f64.exp() + 0.72 * 2.5f64.exp());
        assert!((w[1] - expect_w1).abs() < 1e-12);
    }

    #[test]
    fn certain_trajectory_has_zero_loglik() {
        let set = ChoiceSet {
            scenario_id: "one".into(),
            vor: vec![0.0, -1e6],
            features: vec![vec![0.0], vec![0.0]],
        };
        let e = Evidence::new(0, vec![0.0, -5.0]);
        assert!(trajectory_loglik(&e, &set, &[0.0]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_gradients_vanish() {
        let (mut set, e) = toy();
        set.features = vec![vec![3.0], vec![3.0]];
        assert!(grad_loglik(&e, &set, &[0.7])[0].abs() < 1e-12);
        let single = ChoiceSet {
            scenario_id: "s".into(),
            vor: vec![2.0],
            features: vec![vec![1.0, 4.0]],
        };
        let e = Evidence::new(0, vec![-3.0]);
        assert_eq!(grad_loglik(&e, &single, &[1.0, -2.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences_on_toy() {
        let (set, e) = toy();
        let h = 1e-5;
        for l in [-3.0, 0.0, 0.4, 5.0] {
            let g = grad_loglik(&e, &set, &[l])[0];
            let fd = (trajectory_loglik(&e, &set, &[l + h]) - trajectory_loglik(&e, &set, &[l - h])) / (2.0 * h);
            assert!((g - fd).abs() <= 1e-7 * fd.abs().max(1e-3), "{g} {fd}");
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let (set, _) = toy();
        let p = InferenceProblem {
            feature_names: vec!["x".into()],
            choice_sets: vec![set],
            evidence: vec![],
        };
        assert!(matches!(fit_mle(&p, &FitConfig::tabular(1, 0)), Err(Error::Data(_))));
    }

    #[test]
    fn objective_is_order_invariant() {
        let sc = fig1_scenario();
        let model = ScenarioModel::build(&sc, DEFAULT_BETA).unwrap();
        let features = Feature::tabular();
        let trajs = simulate_agent(std::slice::from_ref(&model), &features, &[-10.0, 10.0, 0.0], 30, 0, 9).unwrap();
        let p = tabular_problem(std::slice::from_ref(&model), &features, &trajs).unwrap();
        let mut rev = trajs.clone();
        rev.reverse();
        let q = tabular_problem(std::slice::from_ref(&model), &features, &rev).unwrap();
        let l = [3.0, -4.0, 1.0];
        assert!((p.nll(&l) - q.nll(&l)).abs() < 1e-9);
        for w in p.posteriors(&l) {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn truth_beats_perturbed_weights() {
        let scenarios = generate_scenarios(3, 4, &GeneratorParams::default()).unwrap();
        let models: Vec<_> = scenarios.iter().map(|s| ScenarioModel::build(s, DEFAULT_BETA).unwrap()).collect();
        let features = Feature::tabular();
        let truth = [-5.0, 5.0, 0.0];
        let trajs = simulate_agent(&models, &features, &truth, 25, 0, 1).unwrap();
        let p = tabular_problem(&models, &features, &trajs).unwrap();
        let perturbed = [truth[0] + 40.0, truth[1] - 40.0, truth[2] + 40.0];
        assert!(p.loglik(&truth) > p.loglik(&perturbed));
    }

    #[test]
    fn off_domain_state_is_a_data_error() {
        let sc = fig1_scenario();
        let model = ScenarioModel::build(&sc, DEFAULT_BETA).unwrap();
        let t: GridTrajectory = Trajectory {
            scenario_id: sc.id.clone(),
            agent_id: 0,
            steps: vec![crate::trajectory::Step { s: [-1, 0], a: crate::driving_world::Action::Up1 }],
            ret: 0.0,
            latent_construal: None,
            truncated: false,
        };
        assert!(matches!(tabular_evidence(&model, &t), Err(Error::Data(_))));
    }

    #[test]
    fn fit_result_nll_matches_objective() {
        let sc = fig1_scenario();
        let model = ScenarioModel::build(&sc, DEFAULT_BETA).unwrap();
        let features = Feature::tabular();
        let trajs = simulate_agent(std::slice::from_ref(&model), &features, &[-10.0, 10.0, 0.0], 40, 0, 5).unwrap();
        let p = tabular_problem(std::slice::from_ref(&model), &features, &trajs).unwrap();
        let fit = fit_mle(&p, &FitConfig::tabular(3, 1)).unwrap();
        assert!((fit.nll - p.nll(&fit.lambda_star)).abs() < 1e-9);
        assert_eq!(fit.restarts, 5);
        assert!(fit.trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    }
}
