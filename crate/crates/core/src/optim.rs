//! Box-constrained minimizers: spectral projected gradient for smooth
//! objectives with analytic gradients, and Nelder-Mead for derivative-free
//! fits.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h), "empty box");
        Bounds { lo, hi }
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Bounds::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn projected(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.project(&mut y);
        y
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((v, l), h)| (*l..=*h).contains(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Accepted iterates and their objective values.
    pub trace: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient step `‖P(x - g) - x‖∞` falls below this.
    pub tol: f64,
    /// Stop when an accepted step improves `f` by less than `ftol·(1 + |f|)`.
    pub ftol: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        GradientOptions {
            max_iter: 1000,
            tol: 1e-9,
            ftol: 1e-12,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pg_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    let stepped: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    bounds
        .projected(&stepped)
        .iter()
        .zip(x)
        .map(|(p, a)| (p - a).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` (returning value and gradient) over `bounds` with
/// Barzilai-Borwein steps and an Armijo backtracking line search.
pub fn projected_gradient<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: &GradientOptions) -> OptimOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    const ALPHA_MIN: f64 = 1e-10;
    const ALPHA_MAX: f64 = 1e10;
    let mut x = bounds.projected(x0);
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    let mut trace = vec![(x.clone(), fx)];
    let mut alpha = 1.0 / pg_norm(&x, &g, bounds).max(1.0);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if !fx.is_finite() {
            break;
        }
        if pg_norm(&x, &g, bounds) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let target: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
        let d: Vec<f64> = bounds
            .projected(&target)
            .iter()
            .zip(&x)
            .map(|(p, a)| p - a)
            .collect();
        let slope = dot(&g, &d);
        if slope >= 0.0 {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let accepted = loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let (fn_, gn) = f(&xn);
            evaluations += 1;
            if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                break Some((xn, fn_, gn));
            }
            t *= 0.5;
            if t < 1e-14 {
                break None;
            }
        };
        let Some((xn, fn_, gn)) = accepted else {
            // no decrease available at machine precision
            converged = true;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(ALPHA_MIN, ALPHA_MAX)
        } else {
            ALPHA_MAX
        };
        let small = fx - fn_ <= opts.ftol * (1.0 + fn_.abs());
        x = xn;
        fx = fn_;
        g = gn;
        trace.push((x.clone(), fx));
        if small {
            converged = true;
            break;
        }
    }
    OptimOutcome {
        x,
        f: fx,
        iterations,
        evaluations,
        converged,
        trace,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of simplex values is below `ftol` and its
    /// diameter below `xtol`.
    pub ftol: f64,
    pub xtol: f64,
    /// Initial simplex edge as a fraction of each bound's width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_iter: 2000,
            ftol: 1e-10,
            xtol: 1e-8,
            initial_step: 0.1,
        }
    }
}

/// Nelder-Mead on a box; trial points are projected onto the box.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: &NelderMeadOptions) -> OptimOutcome
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let start = bounds.projected(x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), eval(&start))];
    for i in 0..n {
        let mut p = start.clone();
        let width = bounds.hi[i] - bounds.lo[i];
        let step = if width.is_finite() && width > 0.0 {
            opts.initial_step * width
        } else {
            opts.initial_step.max(1e-3) * p[i].abs().max(1.0)
        };
        p[i] = if p[i] + step <= bounds.hi[i] { p[i] + step } else { p[i] - step };
        bounds.project(&mut p);
        let v = eval(&p);
        simplex.push((p, v));
    }
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    simplex.sort_by(by_value);
    let mut trace = vec![simplex[0].clone()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.abs() <= opts.ftol * (1.0 + simplex[0].1.abs()) && diameter <= opts.xtol * (1.0 + simplex[0].0.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            bounds.project(&mut p);
            p
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best
                        .iter()
                        .zip(&item.0)
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    let v = eval(&p);
                    *item = (p, v);
                }
            }
        }
        simplex.sort_by(by_value);
        if simplex[0].1 < trace.last().map_or(f64::INFINITY, |t| t.1) {
            trace.push(simplex[0].clone());
        }
    }
    let (x, fx) = simplex.swap_remove(0);
    OptimOutcome {
        x,
        f: fx,
        iterations,
        evaluations,
        converged,
        trace,
    }
}
