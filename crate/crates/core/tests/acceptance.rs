//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any failed.

use std::time::Instant;

use aaip_core::construal::{BiasModel, Feature, ScenarioModel};
use aaip_core::continuous::{
    build_models, builtin_scenes, continuous_problem, continuous_recovery, generate_continuous_dataset,
    ContinuousConfig, ContinuousRecoveryConfig,
};
use aaip_core::driving_world::{
    fig1_scenario, fig3_scenario, generate_scenarios, Action, CellKind, GeneratorParams, GridScenario, Layout,
    DEFAULT_DISCOUNT,
};
use aaip_core::inference::{
    fit_mle, recovery_sweep, simulate_agent, tabular_problem, FitConfig, FitResult, RecoveryConfig,
};
use aaip_core::irl::{compare_models, IrlFitConfig};
use aaip_core::oomdp::Construal;
use aaip_core::planner::DEFAULT_BETA;
use aaip_core::rng::rng_for;
use aaip_core::stats::{monte_carlo, pearson};
use aaip_core::trajectory::write_jsonl;
use rand::Rng as _;

const SEED: u64 = 2024;

// criterion 1
const RECOVERY_AGENTS: usize = 100;
const RECOVERY_SCENARIOS: usize = 25;
const RECOVERY_PER_SCENARIO: usize = 5;
const R2_FLOOR: f64 = 0.7;
// criterion 2
const COMPARE_TRAJECTORIES: usize = 100;
const AAIP_RATIO_CEILING: f64 = 0.7;
const NESTING_TOL: f64 = 1e-3;
// criterion 3
const MC_ROLLOUTS: usize = 100_000;
const MC_SIGMAS: f64 = 3.0;
const MC_ROUNDING: f64 = 1e-9;
// criterion 4
const GRADIENT_POINTS: usize = 20;
const FD_STEP: f64 = 1e-5;
const GRADIENT_REL_TOL: f64 = 1e-5;
// criterion 5
const SELECTION_SAMPLES: usize = 10_000;
const SELECTION_SIGMAS: f64 = 3.0;
// criterion 6
const CONT_AGENTS: usize = 30;
const CONT_BUDGETS: [usize; 2] = [80, 20];
const PEARSON_FLOOR: f64 = 0.6;
// criterion 7
const DETERMINISM_TOL: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn recovery_ordering() -> Verdict {
    let scenarios = generate_scenarios(SEED, RECOVERY_SCENARIOS, &GeneratorParams::default()).unwrap();
    let models: Vec<_> = scenarios
        .iter()
        .map(|s| ScenarioModel::build(s, DEFAULT_BETA).unwrap())
        .collect();
    let cfg = RecoveryConfig {
        n_agents: RECOVERY_AGENTS,
        per_scenario: RECOVERY_PER_SCENARIO,
        lambda_range: (-50.0, 50.0),
        seed: SEED,
        fit: FitConfig::tabular(3, SEED),
    };
    let report = recovery_sweep(&models, &Feature::tabular(), &cfg).unwrap();
    let r2 = |f: &str| report.r_squared_of(f).unwrap();
    let (ice, cone, parked) = (r2("Ice"), r2("Cone"), r2("Parked"));
    verdict(
        ice > parked && cone > parked && ice >= R2_FLOOR && cone >= R2_FLOOR,
        format!("R2 Ice {ice:.3}, Cone {cone:.3}, Parked {parked:.3} (floor {R2_FLOOR})"),
    )
}

fn irl_comparison() -> Verdict {
    let sc = fig3_scenario();
    let model = ScenarioModel::build(&sc, DEFAULT_BETA).unwrap();
    let data = simulate_agent(
        std::slice::from_ref(&model),
        &Feature::tabular(),
        &[-10.0, 10.0, 0.0],
        COMPARE_TRAJECTORIES,
        0,
        SEED,
    )
    .unwrap();
    let cmp = compare_models(&sc, &data, DEFAULT_BETA, &IrlFitConfig::default()).unwrap();
    let noise = cmp.noise().nll;
    let irl: Vec<f64> = cmp.irl().iter().map(|r| r.nll).collect();
    let richest = *irl.last().unwrap();
    let best_irl = irl.iter().copied().fold(f64::INFINITY, f64::min);
    let aaip = cmp.aaip().nll;
    let chain: Vec<f64> = std::iter::once(noise).chain(irl.iter().copied()).collect();
    let nested = chain.windows(2).all(|w| w[1] <= w[0] + NESTING_TOL);
    let ratio = aaip / best_irl;
    verdict(
        noise > richest && richest > aaip && ratio <= AAIP_RATIO_CEILING && nested,
        format!(
            "NLL noise {noise:.2}, IRL {}, AAIP {aaip:.2}, ratio {ratio:.3} (ceiling {AAIP_RATIO_CEILING}), nested {nested}",
            irl.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join("/")
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let generated = generate_scenarios(SEED, 1, &GeneratorParams::default()).unwrap().remove(0);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (i, sc) in [fig1_scenario(), fig3_scenario(), generated].iter().enumerate() {
        let m = ScenarioModel::build(sc, DEFAULT_BETA).unwrap();
        for c in [Construal::empty(), sc.full_construal()] {
            let k = m.index_of(&c).unwrap();
            let exact = m.vor[k] + c.len() as f64;
            let (mean, se) = monte_carlo(MC_ROLLOUTS, SEED, &[i as u64, k as u64], |rng| {
                m.rollout(k, rng).unwrap().discounted_return(DEFAULT_DISCOUNT)
            });
            // deterministic policies have a zero standard error up to rounding
            let se = se.max(MC_ROUNDING);
            worst = worst.max((mean - exact).abs() / se);
            checked += 1;
        }
    }
    verdict(
        worst <= MC_SIGMAS,
        format!("{checked} policies, worst deviation {worst:.2} SE (limit {MC_SIGMAS})"),
    )
}

fn gradient_correctness() -> Verdict {
    let scenarios = generate_scenarios(SEED + 1, 4, &GeneratorParams::default()).unwrap();
    let models: Vec<_> = scenarios
        .iter()
        .map(|s| ScenarioModel::build(s, DEFAULT_BETA).unwrap())
        .collect();
    let features = Feature::tabular();
    let mut worst: f64 = 0.0;
    for p in 0..GRADIENT_POINTS {
        let mut rng = rng_for(SEED, &[0x9a, p as u64]);
        let truth: Vec<f64> = (0..3).map(|_| rng.random_range(-20.0..20.0)).collect();
        let at: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let data = simulate_agent(&models, &features, &truth, 3, p, SEED).unwrap();
        let problem = tabular_problem(&models, &features, &data).unwrap();
        let (_, g) = problem.loglik_and_grad(&at);
        let fd: Vec<f64> = (0..3)
            .map(|j| {
                let (mut up, mut dn) = (at.clone(), at.clone());
                up[j] += FD_STEP;
                dn[j] -= FD_STEP;
                (problem.loglik(&up) - problem.loglik(&dn)) / (2.0 * FD_STEP)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1.0));
    }
    verdict(
        worst < GRADIENT_REL_TOL,
        format!("{GRADIENT_POINTS} points, worst relative error {worst:.2e} (limit {GRADIENT_REL_TOL:.0e})"),
    )
}

/// Cells the noise-free construed plan enters from the start, following the
/// greedy action and ignoring slips.
fn planned_cells(m: &ScenarioModel, k: usize) -> Vec<[i32; 2]> {
    let layout = Layout::of(&m.scenario, &m.construals[k]).unwrap();
    let mut cell = m.scenario.ego_start;
    let mut out = vec![];
    for _ in 0..m.scenario.height * 2 {
        let s = m.true_mdp.state_of(cell).unwrap();
        let steps: &[[i32; 2]] = match m.policies[k].argmax(s) {
            Action::Up1 => &[[0, 1]],
            Action::Up2 => &[[0, 1], [0, 2]],
            Action::DiagLeft => &[[-1, 1]],
            Action::DiagRight => &[[1, 1]],
        };
        let from = cell;
        for d in steps {
            cell = [from[0] + d[0], from[1] + d[1]];
            out.push(cell);
            match layout.kind(cell) {
                None | Some(CellKind::Wall | CellKind::Parked | CellKind::Goal) => return out,
                _ => {}
            }
        }
    }
    out
}

/// Largest per-bin deviation of empirical frequencies from `probs`, in
/// binomial standard deviations. Bins expecting fewer than five draws are
/// pooled into one so the normal approximation holds.
fn multinomial_deviation(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let n = n as f64;
    let mut bins: Vec<(f64, f64)> = vec![];
    let mut pooled = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        if n * p >= 5.0 {
            bins.push((c as f64, p));
        } else {
            pooled.0 += c as f64;
            pooled.1 += p;
        }
    }
    if pooled.1 > 0.0 {
        bins.push(pooled);
    }
    bins.iter()
        .filter(|(_, p)| *p < 1.0)
        .map(|(c, p)| (c / n - p).abs() / (p * (1.0 - p) / n).sqrt())
        .fold(0.0, f64::max)
}

fn selection_calibration() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut both_ice = false;
    let settings = [[0.0, 0.0, 0.0], [-10.0, 10.0, 0.0], [-100.0, 10.0, 0.0]];
    for (i, sc) in [fig1_scenario(), fig3_scenario()].iter().enumerate() {
        let m = ScenarioModel::build(sc, DEFAULT_BETA).unwrap();
        for (j, l) in settings.iter().enumerate() {
            let d = m.selection_policy(&BiasModel::tabular(l[0], l[1], l[2]));
            let mut rng = rng_for(SEED, &[0x5e, i as u64, j as u64]);
            let mut counts = vec![0usize; d.probs.len()];
            for _ in 0..SELECTION_SAMPLES {
                counts[d.sample_index(&mut rng)] += 1;
            }
            worst = worst.max(multinomial_deviation(&counts, &d.probs));
            if i == 0 && l[0] == -100.0 {
                let k = m.index_of(d.mode()).unwrap();
                let cells = planned_cells(&m, k);
                both_ice = sc
                    .construable_objects()
                    .iter()
                    .filter(|(_, kind, _)| *kind == CellKind::Ice)
                    .all(|(_, _, patch)| patch.iter().any(|p| cells.contains(p)));
            }
        }
    }
    verdict(
        worst <= SELECTION_SIGMAS && both_ice,
        format!(
            "6 settings, worst deviation {worst:.2} sigma (limit {SELECTION_SIGMAS}), lambda_Ice=-100 mode crosses both ice patches: {both_ice}"
        ),
    )
}

fn continuous_recovery_check() -> Verdict {
    let cfg = ContinuousConfig::default();
    let models = build_models(&builtin_scenes(), &cfg).unwrap();
    let rc = ContinuousRecoveryConfig::new(CONT_AGENTS, CONT_BUDGETS.to_vec(), SEED);
    let r = continuous_recovery(&models, &cfg, &rc).unwrap();
    let full = r.report(CONT_BUDGETS[0]).unwrap();
    let names = ["DfEH", "RH", "DfEC"];
    let rs: Vec<f64> = names
        .iter()
        .map(|f| pearson(&full.truths(f), &full.estimates(f)))
        .collect();
    let mse = |b: usize| r.efficiency.iter().find(|e| e.trajectories == b).unwrap().mean_sq_error;
    let (m80, m20) = (mse(CONT_BUDGETS[0]), mse(CONT_BUDGETS[1]));
    verdict(
        rs.iter().all(|&x| x >= PEARSON_FLOOR) && m80 <= m20,
        format!(
            "Pearson {} (floor {PEARSON_FLOOR}), MSE at 80 {m80:.4} vs at 20 {m20:.4}",
            names
                .iter()
                .zip(&rs)
                .map(|(n, r)| format!("{n} {r:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn fits_agree(a: &FitResult, b: &FitResult) -> bool {
    (a.nll - b.nll).abs() <= DETERMINISM_TOL
        && a.lambda_star
            .iter()
            .zip(&b.lambda_star)
            .all(|(x, y)| (x - y).abs() <= DETERMINISM_TOL)
}

fn tabular_run(models: &[ScenarioModel]) -> (Vec<u8>, FitResult) {
    let data = simulate_agent(models, &Feature::tabular(), &[-10.0, 10.0, 0.0], 5, 0, SEED).unwrap();
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &data).unwrap();
    let problem = tabular_problem(models, &Feature::tabular(), &data).unwrap();
    (bytes, fit_mle(&problem, &FitConfig::tabular(3, SEED)).unwrap())
}

fn continuous_run(models: &[aaip_core::continuous::SceneModel], cfg: &ContinuousConfig) -> (Vec<u8>, FitResult) {
    let data = generate_continuous_dataset(models, &[0.5, -0.5, 1.0], 8, 0, cfg, SEED).unwrap();
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &data).unwrap();
    let problem = continuous_problem(models, &data, cfg).unwrap();
    let fit = FitConfig::derivative_free(aaip_core::continuous::default_fit_bounds(), SEED);
    (bytes, fit_mle(&problem, &fit).unwrap())
}

fn determinism() -> Verdict {
    let scenarios: Vec<GridScenario> = generate_scenarios(SEED, 5, &GeneratorParams::default()).unwrap();
    let models: Vec<_> = scenarios
        .iter()
        .map(|s| ScenarioModel::build(s, DEFAULT_BETA).unwrap())
        .collect();
    let cfg = ContinuousConfig::default();
    let scenes = builtin_scenes();
    // the second pass runs on a differently sized pool
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let runs: Vec<_> = [false, true]
        .iter()
        .map(|&pooled| {
            let go = || {
                let cont_models = build_models(&scenes, &cfg).unwrap();
                (tabular_run(&models), continuous_run(&cont_models, &cfg))
            };
            if pooled {
                pool.install(go)
            } else {
                go()
            }
        })
        .collect();
    let ((tb1, tf1), (cb1, cf1)) = &runs[0];
    let ((tb2, tf2), (cb2, cf2)) = &runs[1];
    let bytes = tb1 == tb2 && cb1 == cb2;
    let fits = fits_agree(tf1, tf2) && fits_agree(cf1, cf2);
    verdict(
        bytes && fits,
        format!("dataset bytes identical: {bytes}, fits within {DETERMINISM_TOL:.0e}: {fits}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("recovery ordering", recovery_ordering),
        ("IRL comparison", irl_comparison),
        ("oracle equivalence", oracle_equivalence),
        ("gradient correctness", gradient_correctness),
        ("construal-sampling calibration", selection_calibration),
        ("continuous recovery", continuous_recovery_check),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = check();
        println!(
            "acceptance {} {:<32} {}  {} [{:.1} s]",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
