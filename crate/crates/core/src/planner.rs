//! Exact dynamic programming on tabular MDPs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::driving_world::{compile, compile_true, Action, GridScenario, TabularMDP};
use crate::error::{Error, Result};
use crate::oomdp::Construal;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_BETA: f64 = 10.0;
const MAX_ITERATIONS: usize = 100_000;
/// Largest state count evaluated by a dense linear solve.
const DIRECT_SOLVE_LIMIT: usize = 5000;

#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub q: Vec<[f64; 4]>,
    pub iterations: usize,
    pub residual: f64,
}

type Sparse = Vec<Vec<(usize, f64)>>;

fn sparse(mdp: &TabularMDP) -> Sparse {
    (0..mdp.n_states * 4)
        .map(|sa| mdp.successors(sa / 4, sa % 4).collect())
        .collect()
}

fn backup(mdp: &TabularMDP, succ: &Sparse, v: &[f64], s: usize) -> [f64; 4] {
    let mut q = [0.0; 4];
    for (a, qa) in q.iter_mut().enumerate() {
        let future: f64 = succ[s * 4 + a].iter().map(|&(n, p)| p * v[n]).sum();
        *qa = mdp.r(s, a) + mdp.discount * future;
    }
    q
}

fn max4(q: &[f64; 4]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Value iteration to a sup-norm residual of at most `tol`.
pub fn solve(mdp: &TabularMDP, tol: f64) -> Result<ValueTable> {
    let succ = sparse(mdp);
    let n = mdp.n_states;
    let mut v = vec![0.0; n];
    let mut q = vec![[0.0; 4]; n];
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        residual = 0.0;
        for s in 0..n {
            q[s] = backup(mdp, &succ, &v, s);
        }
        for s in 0..n {
            let nv = max4(&q[s]);
            residual = f64::max(residual, (nv - v[s]).abs());
            v[s] = nv;
        }
        if residual <= tol {
            // one more backup keeps q consistent with the returned v
            for s in 0..n {
                q[s] = backup(mdp, &succ, &v, s);
            }
            return Ok(ValueTable {
                v,
                q,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::Divergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

/// Largest Bellman optimality violation of `table` on `mdp`.
pub fn bellman_residual(mdp: &TabularMDP, table: &ValueTable) -> f64 {
    let succ = sparse(mdp);
    (0..mdp.n_states)
        .map(|s| (max4(&backup(mdp, &succ, &table.v, s)) - table.v[s]).abs())
        .fold(0.0, f64::max)
}

/// Softmax action policy over a tabular state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionPolicy {
    pub probs: Vec<[f64; 4]>,
    pub beta: f64,
}

pub fn softmax4(q: &[f64; 4], beta: f64) -> [f64; 4] {
    let m = max4(q);
    let mut p = q.map(|x| (beta * (x - m)).exp());
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

impl ActionPolicy {
    pub fn softmax(table: &ValueTable, beta: f64) -> ActionPolicy {
        ActionPolicy {
            probs: table.q.iter().map(|q| softmax4(q, beta)).collect(),
            beta,
        }
    }

    pub fn uniform(n_states: usize) -> ActionPolicy {
        ActionPolicy {
            probs: vec![[0.25; 4]; n_states],
            beta: 0.0,
        }
    }

    pub fn prob(&self, s: usize, a: Action) -> f64 {
        self.probs[s][a.index()]
    }

    pub fn argmax(&self, s: usize) -> Action {
        let p = &self.probs[s];
        let best = (0..4).fold(0, |b, a| if p[a] > p[b] { a } else { b });
        Action::from_index(best)
    }
}

/// Optimal softmax policy of the MDP induced by construal `c`. Since the
/// tabular objects are static, querying it at a true state is a lookup of
/// the ego cell.
pub fn construed_policy(scenario: &GridScenario, c: &Construal, beta: f64) -> Result<ActionPolicy> {
    let mdp = compile(scenario, c)?;
    Ok(ActionPolicy::softmax(&solve(&mdp, DEFAULT_TOL)?, beta))
}

/// State values of `policy` on `mdp`.
pub fn evaluate_policy(mdp: &TabularMDP, policy: &ActionPolicy) -> Result<Vec<f64>> {
    let n = mdp.n_states;
    if policy.probs.len() != n {
        return Err(Error::InvalidParameter(format!(
            "policy covers {} states, MDP has {n}",
            policy.probs.len()
        )));
    }
    let r: Vec<f64> = (0..n)
        .map(|s| (0..4).map(|a| policy.probs[s][a] * mdp.r(s, a)).sum())
        .collect();
    if n <= DIRECT_SOLVE_LIMIT {
        let mut m = DMatrix::<f64>::identity(n, n);
        for s in 0..n {
            for a in 0..4 {
                let pa = policy.probs[s][a];
                if pa == 0.0 {
                    continue;
                }
                for (next, p) in mdp.successors(s, a) {
                    m[(s, next)] -= mdp.discount * pa * p;
                }
            }
        }
        let v = m
            .lu()
            .solve(&DVector::from_vec(r))
            .ok_or_else(|| Error::InvalidParameter("singular policy evaluation system".into()))?;
        Ok(v.iter().copied().collect())
    } else {
        let succ = sparse(mdp);
        let mut v = vec![0.0; n];
        for _ in 0..MAX_ITERATIONS {
            let mut residual: f64 = 0.0;
            for s in 0..n {
                let q = backup(mdp, &succ, &v, s);
                let nv: f64 = (0..4).map(|a| policy.probs[s][a] * q[a]).sum();
                residual = residual.max((nv - v[s]).abs());
                v[s] = nv;
            }
            if residual <= DEFAULT_TOL {
                return Ok(v);
            }
        }
        Err(Error::Divergence {
            iterations: MAX_ITERATIONS,
            residual: f64::NAN,
        })
    }
}

/// Value at the start cell of `policy` executed under the true dynamics.
pub fn evaluate_policy_true(scenario: &GridScenario, policy: &ActionPolicy) -> Result<f64> {
    let mdp = compile_true(scenario)?;
    let v = evaluate_policy(&mdp, policy)?;
    Ok(v[mdp.state_of(scenario.ego_start).expect("start cell is in the grid")])
}

/// Writes `state,col,row,action,q` rows for debugging.
pub fn write_q_csv(mut w: impl Write, mdp: &TabularMDP, table: &ValueTable) -> std::io::Result<()> {
    writeln!(w, "state,col,row,action,q")?;
    for s in 0..mdp.n_states {
        let (col, row) = match mdp.cell_of(s) {
            Some(c) => (c[0].to_string(), c[1].to_string()),
            None => ("terminal".into(), "terminal".into()),
        };
        for a in Action::ALL {
            writeln!(w, "{s},{col},{row},{a:?},{}", table.q[s][a.index()])?;
        }
    }
    Ok(())
}
