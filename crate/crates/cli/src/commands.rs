use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aaip_core::construal::{marginal_attention, BiasModel, Feature, ScenarioModel};
use aaip_core::continuous::{
    build_models, builtin_scenes, continuous_problem, continuous_recovery, default_fit_bounds, default_lambda_range,
    generate_continuous_dataset, sample_lambda, ContinuousConfig, ContinuousRecoveryConfig, ContinuousTrajectory,
};
use aaip_core::driving_world::{generate_scenarios, GeneratorParams, GridScenario};
use aaip_core::inference::{
    fit_mle, recovery_sweep, simulate_agent, tabular_problem, FitConfig, FitResult, InferenceProblem, Method,
    RecoveryConfig, RecoveryRow,
};
use aaip_core::irl::{compare_models, IrlFitConfig};
use aaip_core::optim::Bounds;
use aaip_core::rng::rng_for;
use aaip_core::stats::pearson;
use aaip_core::trajectory::{load_jsonl, save_jsonl, GridTrajectory};
use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::run::{self, AgentRecord, Manifest, Numerical};
use crate::{Cli, Command, CompareArgs, Domain, ExportArgs, FitArgs, GenerateArgs, MethodArg, SweepArgs, ValidateArgs};

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::ExportPlots(a) => export_plots(cli, a),
        Command::ValidateScenario(a) => validate(a),
    }
}

fn feature_names(features: &[Feature]) -> Vec<String> {
    features.iter().map(Feature::name).collect()
}

fn check_beta(beta: f64) -> Result<()> {
    ensure!(beta.is_finite() && beta >= 0.0, "beta must be finite and non-negative");
    Ok(())
}

fn continuous_config(a: &crate::ContinuousArgs) -> Result<ContinuousConfig> {
    ensure!(a.mc_samples > 0, "--mc-samples must be positive");
    ensure!(a.bandwidth.is_finite() && a.bandwidth > 0.0, "--bandwidth must be positive");
    Ok(ContinuousConfig {
        mc_samples: a.mc_samples,
        bandwidth: a.bandwidth,
        ..ContinuousConfig::default()
    })
}

fn grid_models(scenarios: &[GridScenario], beta: f64) -> Result<Vec<ScenarioModel>> {
    Ok(scenarios
        .iter()
        .map(|s| ScenarioModel::build(s, beta))
        .collect::<aaip_core::Result<_>>()?)
}

fn agent_lambdas(n: usize, fixed: &Option<Vec<f64>>, bounds: &Bounds, seed: u64) -> Result<Vec<Vec<f64>>> {
    if let Some(l) = fixed {
        ensure!(l.len() == 3, "--lambda needs three weights, got {}", l.len());
        return Ok(vec![l.clone(); n]);
    }
    Ok((0..n)
        .map(|a| sample_lambda(bounds, &mut rng_for(seed, &[0x1a, a as u64])))
        .collect())
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<()> {
    ensure!(a.agents > 0, "--agents must be at least 1");
    ensure!(a.per_scenario > 0, "--per-scenario must be at least 1");
    check_beta(a.beta)?;
    let out = run::create_out(cli)?;
    let manifest = match a.domain {
        Domain::Tabular => {
            let scenarios = if a.scenario.is_empty() {
                ensure!(a.n_scenarios > 0, "--scenarios must be at least 1");
                generate_scenarios(cli.seed, a.n_scenarios, &GeneratorParams::default())?
            } else {
                a.scenario.iter().map(|s| run::grid_scenario(s)).collect::<Result<_>>()?
            };
            let (lo, hi) = run::range(a.lambda_range.as_deref().unwrap_or(&[-50.0, 50.0]), "--lambda-range")?;
            let lambdas = agent_lambdas(a.agents, &a.lambda, &Bounds::uniform(3, lo, hi), cli.seed)?;
            let features = Feature::tabular();
            let models = grid_models(&scenarios, a.beta)?;
            let data: Vec<GridTrajectory> = lambdas
                .par_iter()
                .enumerate()
                .map(|(i, l)| simulate_agent(&models, &features, l, a.per_scenario, i, cli.seed))
                .collect::<aaip_core::Result<Vec<_>>>()?
                .concat();
            save_jsonl(out.join(run::DATASET), &data)?;
            Manifest {
                domain: Domain::Tabular,
                seed: cli.seed,
                beta: a.beta,
                continuous: None,
                scenarios: run::save_grid_scenarios(out, &scenarios)?,
                feature_names: feature_names(&features),
                agents: records(lambdas),
                trajectories: data.len(),
                dataset: run::DATASET.into(),
            }
        }
        Domain::Continuous => {
            let scenes = if a.scenario.is_empty() {
                builtin_scenes()
            } else {
                a.scenario.iter().map(|s| run::scene(s)).collect::<Result<_>>()?
            };
            ensure!(a.lambda_range.is_none(), "--lambda-range applies to tabular data only");
            let cfg = continuous_config(&a.continuous)?;
            let lambdas = agent_lambdas(a.agents, &a.lambda, &default_lambda_range(), cli.seed)?;
            let models = build_models(&scenes, &cfg)?;
            let data: Vec<ContinuousTrajectory> = lambdas
                .iter()
                .enumerate()
                .map(|(i, l)| generate_continuous_dataset(&models, l, a.per_scenario, i as u64, &cfg, cli.seed))
                .collect::<aaip_core::Result<Vec<_>>>()?
                .concat();
            save_jsonl(out.join(run::DATASET), &data)?;
            Manifest {
                domain: Domain::Continuous,
                seed: cli.seed,
                beta: a.beta,
                continuous: Some(cfg),
                scenarios: run::save_scenes(out, &scenes)?,
                feature_names: feature_names(&Feature::motion()),
                agents: records(lambdas),
                trajectories: data.len(),
                dataset: run::DATASET.into(),
            }
        }
    };
    run::write_json(&out.join(run::MANIFEST), &manifest)?;
    run::write_config(cli)?;
    println!(
        "wrote {} trajectories from {} agent(s) on {} scenario(s) to {}",
        manifest.trajectories,
        manifest.agents.len(),
        manifest.scenarios.len(),
        out.display()
    );
    Ok(())
}

fn records(lambdas: Vec<Vec<f64>>) -> Vec<AgentRecord> {
    lambdas
        .into_iter()
        .enumerate()
        .map(|(id, lambda)| AgentRecord { id: id as u64, lambda })
        .collect()
}

/// What `fit` writes: the optimizer result plus everything needed to
/// interpret it.
#[derive(Serialize)]
struct FitReport<'a> {
    domain: Domain,
    agent: u64,
    lambda_true: &'a [f64],
    trajectories: usize,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    continuous: Option<&'a ContinuousConfig>,
    config: &'a FitConfig,
    #[serde(flatten)]
    result: &'a FitResult,
}

fn fit_config(domain: Domain, a: &FitArgs, seed: u64) -> Result<FitConfig> {
    let mut cfg = match domain {
        Domain::Tabular => FitConfig::tabular(3, seed),
        Domain::Continuous => FitConfig::derivative_free(default_fit_bounds(), seed),
    };
    if let Some(m) = a.method {
        cfg.method = match m {
            MethodArg::Gradient => Method::Gradient,
            MethodArg::NelderMead => Method::NelderMead,
        };
    }
    if let Some(r) = a.restarts {
        ensure!(r > 0, "--restarts must be at least 1");
        cfg.restarts = r;
    }
    if let Some(b) = &a.bounds {
        let (lo, hi) = run::range(b, "--bounds")?;
        cfg.bounds = Bounds::uniform(3, lo, hi);
    }
    Ok(cfg)
}

fn load_problem(dir: &Path, m: &Manifest, agent: u64) -> Result<InferenceProblem> {
    let data_path = dir.join(&m.dataset);
    let problem = match m.domain {
        Domain::Tabular => {
            let models = grid_models(&m.grid_scenarios(dir)?, m.beta)?;
            let data: Vec<GridTrajectory> = load_jsonl(&data_path)?;
            let mine: Vec<_> = data.into_iter().filter(|t| t.agent_id == agent).collect();
            tabular_problem(&models, &Feature::tabular(), &mine)?
        }
        Domain::Continuous => {
            let cfg = m.continuous.clone().unwrap_or_default();
            let models = build_models(&m.scenes(dir)?, &cfg)?;
            let data: Vec<ContinuousTrajectory> = load_jsonl(&data_path)?;
            let mine: Vec<_> = data.into_iter().filter(|t| t.agent_id == agent).collect();
            continuous_problem(&models, &mine, &cfg)?
        }
    };
    problem.validate()?;
    Ok(problem)
}

fn fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let dir = run::existing_dir(&a.dataset)?;
    let manifest = Manifest::load(&dir)?;
    let agent = manifest.agent(a.agent)?;
    let cfg = fit_config(manifest.domain, a, cli.seed)?;
    let problem = load_problem(&dir, &manifest, agent.id)?;
    let result = fit_mle(&problem, &cfg)?;
    if !result.nll.is_finite() || result.lambda_star.iter().any(|x| !x.is_finite()) {
        return Err(Numerical(format!("fit ended at a non-finite point (nll {})", result.nll)).into());
    }
    let out = run::create_out(cli)?;
    let report = FitReport {
        domain: manifest.domain,
        agent: agent.id,
        lambda_true: &agent.lambda,
        trajectories: problem.evidence.len(),
        beta: manifest.beta,
        continuous: manifest.continuous.as_ref(),
        config: &cfg,
        result: &result,
    };
    run::write_json(&out.join("fit_result.json"), &report)?;
    write_trace(&out.join("trace.csv"), &result)?;
    run::write_config(cli)?;
    let pairs: Vec<String> = result
        .feature_names
        .iter()
        .zip(&result.lambda_star)
        .map(|(n, v)| format!("{n}={v:.4}"))
        .collect();
    println!("agent {}: {} (nll {:.4}, converged {})", agent.id, pairs.join(" "), result.nll, result.converged);
    Ok(())
}

fn write_trace(path: &Path, r: &FitResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string(), "nll".to_string()];
    header.extend(r.feature_names.iter().map(|n| format!("lambda_{n}")));
    w.write_record(&header)?;
    for (i, (x, f)) in r.trace.iter().enumerate() {
        let mut row = vec![i.to_string(), f.to_string()];
        row.extend(x.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    check_beta(a.beta)?;
    ensure!(a.restarts > 0, "--restarts must be at least 1");
    let out = run::create_out(cli)?;
    let (scenario, data, beta) = match &a.dataset {
        Some(d) => {
            let dir = run::existing_dir(d)?;
            let m = Manifest::load(&dir)?;
            ensure!(m.domain == Domain::Tabular, "compare needs a tabular dataset");
            let mut scenarios = m.grid_scenarios(&dir)?;
            ensure!(scenarios.len() == 1, "compare needs a single-scenario dataset, found {}", scenarios.len());
            let data: Vec<GridTrajectory> = load_jsonl(dir.join(&m.dataset))?;
            (scenarios.remove(0), data, m.beta)
        }
        None => {
            ensure!(a.trajectories > 0, "--trajectories must be at least 1");
            ensure!(a.lambda.len() == 3, "--lambda needs three weights");
            let scenario = run::grid_scenario(&a.scenario)?;
            let model = ScenarioModel::build(&scenario, a.beta)?;
            let features = Feature::tabular();
            let data = simulate_agent(std::slice::from_ref(&model), &features, &a.lambda, a.trajectories, 0, cli.seed)?;
            save_jsonl(out.join(run::DATASET), &data)?;
            let manifest = Manifest {
                domain: Domain::Tabular,
                seed: cli.seed,
                beta: a.beta,
                continuous: None,
                scenarios: run::save_grid_scenarios(out, std::slice::from_ref(&scenario))?,
                feature_names: feature_names(&features),
                agents: records(vec![a.lambda.clone()]),
                trajectories: data.len(),
                dataset: run::DATASET.into(),
            };
            run::write_json(&out.join(run::MANIFEST), &manifest)?;
            (scenario, data, a.beta)
        }
    };
    let config = IrlFitConfig {
        restarts: a.restarts,
        seed: cli.seed,
        ..IrlFitConfig::default()
    };
    let cmp = compare_models(&scenario, &data, beta, &config)?;
    if cmp.rows.iter().any(|r| !r.nll.is_finite()) {
        return Err(Numerical("a model comparison fit has a non-finite NLL".into()).into());
    }
    let mut csv_bytes = Vec::new();
    cmp.write_csv(&mut csv_bytes)?;
    fs::write(out.join("comparison.csv"), csv_bytes)?;
    fs::write(out.join("comparison.txt"), cmp.to_string())?;
    run::write_json(&out.join("comparison.json"), &cmp)?;
    run::write_config(cli)?;
    print!("{cmp}");
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    domain: Domain,
    agents: usize,
    r_squared: BTreeMap<String, f64>,
    pearson: BTreeMap<String, f64>,
}

fn correlations(rows: &[RecoveryRow], names: &[String]) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut r2 = BTreeMap::new();
    let mut r = BTreeMap::new();
    for n in names {
        let (t, e): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|x| &x.feature == n)
            .map(|x| (x.lambda_true, x.lambda_est))
            .unzip();
        let p = pearson(&t, &e);
        r.insert(n.clone(), p);
        r2.insert(n.clone(), p * p);
    }
    (r2, r)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    check_beta(a.beta)?;
    let out = run::create_out(cli)?;
    let (rows, names, agents) = match a.domain {
        Domain::Tabular => {
            let agents = a.agents.unwrap_or(100);
            ensure!(a.n_scenarios > 0, "--scenarios must be at least 1");
            let scenarios = generate_scenarios(cli.seed, a.n_scenarios, &GeneratorParams::default())?;
            run::save_grid_scenarios(out, &scenarios)?;
            let models = grid_models(&scenarios, a.beta)?;
            let cfg = RecoveryConfig {
                n_agents: agents,
                per_scenario: a.per_scenario,
                lambda_range: run::range(&a.lambda_range, "--lambda-range")?,
                seed: cli.seed,
                fit: FitConfig::tabular(3, cli.seed),
            };
            let report = recovery_sweep(&models, &Feature::tabular(), &cfg)?;
            (report.rows, feature_names(&Feature::tabular()), agents)
        }
        Domain::Continuous => {
            let agents = a.agents.unwrap_or(30);
            ensure!(!a.sizes.is_empty(), "--sizes needs at least one dataset size");
            let cfg = continuous_config(&a.continuous)?;
            let scenes = builtin_scenes();
            run::save_scenes(out, &scenes)?;
            let models = build_models(&scenes, &cfg)?;
            let rc = ContinuousRecoveryConfig::new(agents, a.sizes.clone(), cli.seed);
            let r = continuous_recovery(&models, &cfg, &rc)?;
            #[derive(Serialize)]
            struct Efficiency {
                minutes_of_data: f64,
                mean_sq_error: f64,
                se: f64,
            }
            let mut eff: Vec<_> = r.efficiency.iter().collect();
            eff.sort_by_key(|e| e.trajectories);
            let eff: Vec<Efficiency> = eff
                .iter()
                .map(|e| Efficiency {
                    minutes_of_data: e.minutes_of_data,
                    mean_sq_error: e.mean_sq_error,
                    se: e.se,
                })
                .collect();
            write_rows(&out.join("sample_efficiency.csv"), &eff)?;
            #[derive(Serialize)]
            struct SizedRow<'a> {
                trajectories: usize,
                agent: usize,
                feature: &'a str,
                lambda_true: f64,
                lambda_est: f64,
            }
            let by_size: Vec<SizedRow> = r
                .reports
                .iter()
                .flat_map(|(b, rep)| {
                    rep.rows.iter().map(|row| SizedRow {
                        trajectories: *b,
                        agent: row.agent,
                        feature: &row.feature,
                        lambda_true: row.lambda_true,
                        lambda_est: row.lambda_est,
                    })
                })
                .collect();
            write_rows(&out.join("recovery_by_size.csv"), &by_size)?;
            let largest = *a.sizes.iter().max().expect("non-empty sizes");
            let rows = r.report(largest).expect("largest size was fitted").rows.clone();
            (rows, feature_names(&Feature::motion()), agents)
        }
    };
    write_rows(&out.join("recovery.csv"), &rows)?;
    let (r_squared, pearson) = correlations(&rows, &names);
    let summary = SweepSummary {
        domain: a.domain,
        agents,
        r_squared,
        pearson,
    };
    run::write_json(&out.join("sweep_summary.json"), &summary)?;
    run::write_config(cli)?;
    for n in &names {
        println!("{n}: r = {:.3}, R2 = {:.3}", summary.pearson[n], summary.r_squared[n]);
    }
    Ok(())
}

#[derive(Serialize)]
struct OverlayRow<'a> {
    scenario: &'a str,
    agent: u64,
    trajectory: usize,
    step: usize,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct AttentionEntry {
    scenario: String,
    agent: u64,
    lambda: Vec<f64>,
    attention: BTreeMap<String, f64>,
}

#[derive(Deserialize, Serialize)]
struct ScatterRow {
    lambda_true: f64,
    lambda_est: f64,
    feature: String,
}

fn export_plots(cli: &Cli, a: &ExportArgs) -> Result<()> {
    let dir = run::existing_dir(&a.run)?;
    let empty = fs::read_dir(&dir)?.next().is_none();
    ensure!(!empty, "{} is empty", dir.display());
    let out = run::create_out(cli)?;
    let mut written = Vec::new();
    let warn = |msg: String| eprintln!("warning: {msg}");

    let recovery = dir.join("recovery.csv");
    if recovery.exists() {
        let mut r = csv::Reader::from_path(&recovery)?;
        let rows: Vec<ScatterRow> = r
            .deserialize::<RecoveryRow>()
            .map(|row| {
                row.map(|x| ScatterRow {
                    lambda_true: x.lambda_true,
                    lambda_est: x.lambda_est,
                    feature: x.feature,
                })
            })
            .collect::<Result<_, _>>()
            .with_context(|| format!("reading {}", recovery.display()))?;
        write_rows(&out.join("fig2_scatter.csv"), &rows)?;
        written.push("fig2_scatter.csv");
    } else {
        warn("no recovery.csv, skipping the recovery scatter".into());
    }

    for (src, dst) in [
        ("comparison.csv", "fig3_nll.csv"),
        ("sample_efficiency.csv", "sample_efficiency.csv"),
    ] {
        let p = dir.join(src);
        if p.exists() {
            if p != out.join(dst) {
                fs::copy(&p, out.join(dst))?;
            }
            written.push(dst);
        } else {
            warn(format!("no {src}, skipping {dst}"));
        }
    }

    match Manifest::load(&dir) {
        Ok(m) => match export_dataset(&dir, &m, out) {
            Ok(files) => written.extend(files),
            Err(e) => warn(format!("dataset export failed: {e:#}")),
        },
        Err(_) => warn("no manifest, skipping trajectory overlays and attention maps".into()),
    }

    if written.is_empty() {
        bail!("nothing to export in {}", dir.display());
    }
    run::write_config(cli)?;
    println!("exported {} to {}", written.join(", "), out.display());
    Ok(())
}

fn export_dataset(dir: &Path, m: &Manifest, out: &Path) -> Result<Vec<&'static str>> {
    let path = dir.join(&m.dataset);
    let mut overlay = Vec::new();
    match m.domain {
        Domain::Tabular => {
            let data: Vec<GridTrajectory> = load_jsonl(&path)?;
            for (i, t) in data.iter().enumerate() {
                for (k, st) in t.steps.iter().enumerate() {
                    overlay.push((t.scenario_id.clone(), t.agent_id, i, k, st.s[0] as f64, st.s[1] as f64));
                }
            }
            let scenarios = m.grid_scenarios(dir)?;
            let models = grid_models(&scenarios, m.beta)?;
            let mut attention = Vec::new();
            for model in &models {
                for agent in &m.agents {
                    let bias = BiasModel::new(Feature::tabular(), agent.lambda.clone())?;
                    let d = model.selection_policy(&bias);
                    let map = model
                        .scenario
                        .construable_objects()
                        .iter()
                        .map(|(id, _, _)| Ok((id.clone(), marginal_attention(&d, id)?)))
                        .collect::<aaip_core::Result<_>>()?;
                    attention.push(AttentionEntry {
                        scenario: model.scenario.id.clone(),
                        agent: agent.id,
                        lambda: agent.lambda.clone(),
                        attention: map,
                    });
                }
            }
            run::write_json(&out.join("fig1_attention.json"), &attention)?;
        }
        Domain::Continuous => {
            let data: Vec<ContinuousTrajectory> = load_jsonl(&path)?;
            for (i, t) in data.iter().enumerate() {
                for (k, st) in t.steps.iter().enumerate() {
                    overlay.push((t.scenario_id.clone(), t.agent_id, i, k, st.s.x, st.s.y));
                }
            }
        }
    }
    let rows: Vec<OverlayRow> = overlay
        .iter()
        .map(|(s, agent, trajectory, step, x, y)| OverlayRow {
            scenario: s,
            agent: *agent,
            trajectory: *trajectory,
            step: *step,
            x: *x,
            y: *y,
        })
        .collect();
    write_rows(&out.join("trajectories.csv"), &rows)?;
    Ok(match m.domain {
        Domain::Tabular => vec!["trajectories.csv", "fig1_attention.json"],
        Domain::Continuous => vec!["trajectories.csv"],
    })
}

fn validate(a: &ValidateArgs) -> Result<()> {
    let mut invalid = 0;
    for path in &a.paths {
        match check_scenario_file(path) {
            Ok(summary) => println!("ok {}: {summary}", path.display()),
            Err(e) => {
                println!("invalid {}: {e:#}", path.display());
                invalid += 1;
            }
        }
    }
    if invalid > 0 {
        bail!("{invalid} of {} scenario files are invalid", a.paths.len());
    }
    Ok(())
}

fn check_scenario_file(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("ego").is_some() {
        let s = aaip_core::continuous::load_scene(path)?;
        Ok(format!("continuous scene {:?} with {} vehicles", s.id, s.vehicles.len()))
    } else {
        let s = aaip_core::driving_world::load_scenario(path)?;
        Ok(format!(
            "tabular scenario {:?}, {}x{}, {} construable objects",
            s.id,
            s.width,
            s.height,
            s.construable_objects().len()
        ))
    }
}
