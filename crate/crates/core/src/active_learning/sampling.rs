use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Latin-hypercube batch: each axis is cut into `n` equal strata and every
/// stratum holds exactly one point.
pub fn latin_hypercube<R: Rng>(n: usize, lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    let d = lower.len();
    let mut pts = vec![vec![0.0; d]; n];
    for k in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        let w = (upper[k] - lower[k]) / n as f64;
        for (p, s) in pts.iter_mut().zip(&strata) {
            let u: f64 = rng.gen();
            p[k] = (lower[k] + (*s as f64 + u) * w).min(upper[k]);
        }
    }
    pts
}

pub fn uniform<R: Rng>(n: usize, lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| lower.iter().zip(upper).map(|(&l, &u)| l + (u - l) * rng.gen::<f64>()).collect())
        .collect()
}

/// Gaussian perturbation with per-axis standard deviation `sigma_k`,
/// clamped to the box.
pub fn perturb<R: Rng>(center: &[f64], sigma: &[f64], lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<f64> {
    center
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
            (c + sigma[k] * z).clamp(lower[k], upper[k])
        })
        .collect()
}

/// Keep-mask dropping candidates within `radius` of an existing point or of
/// an earlier kept candidate. `radius <= 0` keeps everything.
pub fn duplicate_filter(candidates: &[Vec<f64>], existing: &[Vec<f64>], radius: f64) -> Vec<bool> {
    if radius <= 0.0 {
        return vec![true; candidates.len()];
    }
    let r2 = radius * radius;
    let near = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() < r2;
    let mut kept: Vec<&Vec<f64>> = Vec::new();
    candidates
        .iter()
        .map(|c| {
            let dup = existing.iter().any(|e| near(c, e)) || kept.iter().any(|e| near(c, e));
            if !dup {
                kept.push(c);
            }
            !dup
        })
        .collect()
}
