//! Small numeric helpers shared across modules.

/// `log Σ exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Normalized probabilities `exp(x_i - logsumexp(x))`.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let z = logsumexp(xs);
    xs.iter().map(|x| (x - z).exp()).collect()
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo estimate `(1/N) Σ f(rng_i)` with its standard error. Draw `i`
/// uses its own generator derived from `(seed, path, i)`, so the estimate
/// does not depend on scheduling.
pub fn monte_carlo<F>(n: usize, seed: u64, path: &[u64], f: F) -> (f64, f64)
where
    F: Fn(&mut crate::rng::Rng) -> f64 + Sync,
{
    use rayon::prelude::*;
    let samples: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut full = path.to_vec();
            full.push(i as u64);
            f(&mut crate::rng::rng_for(seed, &full))
        })
        .collect();
    mean_and_se(&samples)
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Coefficient of determination of the least-squares line through the
/// `(true, estimated)` scatter, i.e. the squared Pearson correlation.
pub fn r_squared(truth: &[f64], est: &[f64]) -> f64 {
    pearson(truth, est).powi(2)
}

pub fn mse(truth: &[f64], est: &[f64]) -> f64 {
    assert_eq!(truth.len(), est.len());
    truth.iter().zip(est).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64
}
