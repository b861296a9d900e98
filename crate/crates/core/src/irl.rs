//! Inverse-reinforcement-learning baseline.
//!
//! The IRL agent plans on the complete, accurate task model but optimizes the
//! true reward plus an unknown auxiliary reward: a bonus for every ice cell
//! entered and another for every ice cell flanked by cones. Its policy mixes
//! a softmax over Q-values with uniform random actions. Parameters are fit by
//! maximum likelihood; any parameter not being fit stays at its true value.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::construal::{Feature, ScenarioModel};
use crate::driving_world::{compile_with, CompileOptions, GridScenario, TabularMDP, DEFAULT_DISCOUNT};
use crate::error::{Error, Result};
use crate::inference::{fit_mle, tabular_problem, FitConfig};
use crate::optim::{nelder_mead, Bounds, NelderMeadOptions};
use crate::planner::{softmax4, solve, ActionPolicy, DEFAULT_BETA, DEFAULT_TOL};
use crate::rng::rng_for;
use crate::trajectory::GridTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlParams {
    pub beta: f64,
    pub epsilon: f64,
    pub r_ice: f64,
    pub r_ice_cone: f64,
    pub gamma: f64,
}

impl IrlParams {
    /// The data-generating values: no auxiliary reward, no lapses.
    pub fn truth() -> Self {
        IrlParams {
            beta: DEFAULT_BETA,
            epsilon: 0.0,
            r_ice: 0.0,
            r_ice_cone: 0.0,
            gamma: DEFAULT_DISCOUNT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = vec![];
        if !(self.beta >= 0.0) {
            problems.push(format!("beta {} < 0", self.beta));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            problems.push(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            problems.push(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    fn get(&self, p: Param) -> f64 {
        match p {
            Param::Beta => self.beta,
            Param::Epsilon => self.epsilon,
            Param::RIce => self.r_ice,
            Param::RIceCone => self.r_ice_cone,
            Param::Gamma => self.gamma,
        }
    }

    fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Beta => self.beta = v,
            Param::Epsilon => self.epsilon = v,
            Param::RIce => self.r_ice = v,
            Param::RIceCone => self.r_ice_cone = v,
            Param::Gamma => self.gamma = v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Beta,
    Epsilon,
    RIce,
    RIceCone,
    Gamma,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Beta => "beta",
            Param::Epsilon => "epsilon",
            Param::RIce => "r_ice",
            Param::RIceCone => "r_ice_cone",
            Param::Gamma => "gamma",
        }
    }

    /// Search interval used when the parameter is fit.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Param::Beta => (0.0, 50.0),
            Param::Epsilon => (0.0, 1.0),
            Param::RIce | Param::RIceCone => (-100.0, 100.0),
            Param::Gamma => (0.0, 0.99),
        }
    }
}

/// Which parameters are free; the rest are pinned to `fixed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlSpec {
    pub name: String,
    pub free: Vec<Param>,
    pub fixed: IrlParams,
}

impl IrlSpec {
    pub fn new(name: &str, free: &[Param]) -> Self {
        IrlSpec {
            name: name.to_string(),
            free: free.to_vec(),
            fixed: IrlParams::truth(),
        }
    }

    pub fn noise() -> Self {
        IrlSpec::new("Noise", &[Param::Beta, Param::Epsilon])
    }

    /// The three increasingly expressive IRL variants.
    pub fn variants() -> Vec<IrlSpec> {
        use Param::*;
        vec![
            IrlSpec::new("IRL(beta, eps, r_ice)", &[Beta, Epsilon, RIce]),
            IrlSpec::new("IRL(beta, eps, r_ice, r_ice_cone)", &[Beta, Epsilon, RIce, RIceCone]),
            IrlSpec::new("IRL(beta, eps, r_ice, r_ice_cone, gamma)", &[Beta, Epsilon, RIce, RIceCone, Gamma]),
        ]
    }

    fn params_from(&self, x: &[f64]) -> IrlParams {
        let mut p = self.fixed;
        for (param, v) in self.free.iter().zip(x) {
            p.set(*param, *v);
        }
        p
    }

    fn bounds(&self) -> Bounds {
        let (lo, hi) = self.free.iter().map(|p| p.bounds()).unzip();
        Bounds::new(lo, hi)
    }
}

fn irl_mdp(scenario: &GridScenario, params: &IrlParams) -> Result<TabularMDP> {
    compile_with(
        scenario,
        &scenario.full_construal(),
        &CompileOptions {
            discount: params.gamma,
            ice_bonus: params.r_ice,
            ice_cone_bonus: params.r_ice_cone,
        },
    )
}

/// `(1 - ε)·softmax(β Q) + ε/4` on the full MDP with auxiliary rewards.
pub fn irl_policy(scenario: &GridScenario, params: &IrlParams) -> Result<ActionPolicy> {
    params.validate()?;
    let table = solve(&irl_mdp(scenario, params)?, DEFAULT_TOL)?;
    let e = params.epsilon;
    Ok(ActionPolicy {
        probs: table
            .q
            .iter()
            .map(|q| softmax4(q, params.beta).map(|p| (1.0 - e) * p + e / 4.0))
            .collect(),
        beta: params.beta,
    })
}

/// Negative log-likelihood of the trajectories under an IRL policy.
pub fn irl_nll(scenario: &GridScenario, params: &IrlParams, data: &[GridTrajectory]) -> Result<f64> {
    let policy = irl_policy(scenario, params)?;
    let mdp = irl_mdp(scenario, params)?;
    let mut nll = 0.0;
    for t in data {
        for st in &t.steps {
            let s = mdp
                .state_of(st.s)
                .ok_or_else(|| Error::Data(format!("state {:?} is outside the grid", st.s)))?;
            nll -= policy.prob(s, st.a).ln();
        }
    }
    Ok(nll)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlFit {
    pub spec: IrlSpec,
    pub params: IrlParams,
    pub nll: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrlFitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub options: NelderMeadOptions,
}

impl Default for IrlFitConfig {
    fn default() -> Self {
        IrlFitConfig {
            restarts: 4,
            seed: 0,
            options: NelderMeadOptions {
                max_iter: 1500,
                ftol: 1e-9,
                xtol: 1e-7,
                initial_step: 0.1,
            },
        }
    }
}

fn check_single_scenario(scenario: &GridScenario, data: &[GridTrajectory]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Data("no trajectories to fit".into()));
    }
    if let Some(t) = data.iter().find(|t| t.scenario_id != scenario.id) {
        return Err(Error::Data(format!(
            "trajectory from scenario {:?} in a fit on {:?}",
            t.scenario_id, scenario.id
        )));
    }
    Ok(())
}

/// Fits the free parameters of `spec`. `warm_start` (a full parameter set,
/// typically the optimum of a nested model) seeds the first restart, so the
/// result is never worse than the warm start.
pub fn fit_irl(
    scenario: &GridScenario,
    data: &[GridTrajectory],
    spec: &IrlSpec,
    warm_start: Option<&IrlParams>,
    config: &IrlFitConfig,
) -> Result<IrlFit> {
    check_single_scenario(scenario, data)?;
    let bounds = spec.bounds();
    let objective = |x: &[f64]| irl_nll(scenario, &spec.params_from(x), data).unwrap_or(f64::INFINITY);
    let mut rng = rng_for(config.seed, &[0x1e1]);
    let mut starts = vec![];
    let seed_point = warm_start.copied().unwrap_or(spec.fixed);
    starts.push(spec.free.iter().map(|p| seed_point.get(*p)).collect::<Vec<_>>());
    for _ in 1..config.restarts.max(1) {
        starts.push(
            spec.free
                .iter()
                .map(|p| {
                    let (lo, hi) = p.bounds();
                    rng.random_range(lo..=hi)
                })
                .collect(),
        );
    }
    let outcomes: Vec<_> = {
        use rayon::prelude::*;
        starts
            .par_iter()
            .map(|x0| nelder_mead(objective, x0, &bounds, &config.options))
            .collect()
    };
    let best = (0..outcomes.len()).fold(0, |b, i| if outcomes[i].f < outcomes[b].f { i } else { b });
    let out = &outcomes[best];
    let params = spec.params_from(&out.x);
    Ok(IrlFit {
        spec: spec.clone(),
        nll: irl_nll(scenario, &params, data)?,
        params,
        converged: out.converged,
    })
}

/// Fits only decision noise (`β`, `ε`).
pub fn fit_noise(scenario: &GridScenario, data: &[GridTrajectory], config: &IrlFitConfig) -> Result<IrlFit> {
    fit_irl(scenario, data, &IrlSpec::noise(), None, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub nll: f64,
    pub converged: bool,
}

/// Fitted NLLs of the noise model, the IRL variants and AAIP on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub rows: Vec<ComparisonRow>,
}

impl ModelComparison {
    pub fn nll_of(&self, model: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.model == model).map(|r| r.nll)
    }

    pub fn noise(&self) -> &ComparisonRow {
        &self.rows[0]
    }

    pub fn irl(&self) -> &[ComparisonRow] {
        &self.rows[1..self.rows.len() - 1]
    }

    pub fn aaip(&self) -> &ComparisonRow {
        self.rows.last().expect("comparison has rows")
    }

    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "model,nll,converged,params")?;
        for r in &self.rows {
            let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(w, "\"{}\",{},{},\"{}\"", r.model, r.nll, r.converged, params.join(";"))?;
        }
        Ok(())
    }
}

impl fmt::Display for ModelComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  {:>10}  parameters", "model", "NLL")?;
        for r in &self.rows {
            let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
            writeln!(f, "{:<width$}  {:>10.2}  {}", r.model, r.nll, params.join(", "))?;
        }
        Ok(())
    }
}

fn irl_row(fit: &IrlFit) -> ComparisonRow {
    ComparisonRow {
        model: fit.spec.name.clone(),
        params: fit
            .spec
            .free
            .iter()
            .map(|p| (p.name().to_string(), fit.params.get(*p)))
            .collect(),
        nll: fit.nll,
        converged: fit.converged,
    }
}

/// Runs the noise model, the nested IRL variants (each warm-started from the
/// previous optimum) and the AAIP bias fit on one single-scenario dataset.
/// AAIP fits the tabular bias weights with `β` pinned to `beta`.
pub fn compare_models(
    scenario: &GridScenario,
    data: &[GridTrajectory],
    beta: f64,
    config: &IrlFitConfig,
) -> Result<ModelComparison> {
    check_single_scenario(scenario, data)?;
    let (irl, aaip) = rayon::join(
        || -> Result<Vec<IrlFit>> {
            let mut fits = vec![fit_noise(scenario, data, config)?];
            for spec in IrlSpec::variants() {
                let prev = fits.last().expect("noise fit").params;
                fits.push(fit_irl(scenario, data, &spec, Some(&prev), config)?);
            }
            Ok(fits)
        },
        || -> Result<_> {
            let model = ScenarioModel::build(scenario, beta)?;
            let features = Feature::tabular();
            let problem = tabular_problem(std::slice::from_ref(&model), &features, data)?;
            fit_mle(&problem, &FitConfig::tabular(features.len(), config.seed))
        },
    );
    let mut rows: Vec<ComparisonRow> = irl?.iter().map(irl_row).collect();
    let aaip = aaip?;
    rows.push(ComparisonRow {
        model: "AAIP".into(),
        params: aaip
            .feature_names
            .iter()
            .zip(&aaip.lambda_star)
            .map(|(n, v)| (format!("lambda_{n}"), *v))
            .collect(),
        nll: aaip.nll,
        converged: aaip.converged,
    });
    Ok(ModelComparison { rows })
}
