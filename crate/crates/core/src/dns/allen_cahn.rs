use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FieldSeries;
use crate::error::{Error, Result};
use crate::grid_fem::{gauss_rule, lumped_mass, shape_eval, BoundaryMask, StructuredMesh};
use crate::linalg::solve_tridiagonal;

/// 1D Allen-Cahn gradient flow `∂φ/∂t = -M (f'(φ) - λ Δφ)` with
/// `f(φ) = (φ² - 1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllenCahnParams {
    pub mobility: f64,
    pub lambda: f64,
    pub dt: f64,
    pub steps: usize,
    pub nodes: usize,
    pub length: f64,
    /// Keep every `save_every`-th step (the initial state is always kept).
    pub save_every: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for AllenCahnParams {
    fn default() -> Self {
        AllenCahnParams {
            mobility: 1e-3,
            lambda: 1.0,
            dt: 0.01,
            steps: 300,
            nodes: 128,
            length: 10.0,
            save_every: 1,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

impl AllenCahnParams {
    pub fn mesh(&self) -> Result<StructuredMesh> {
        StructuredMesh::line(self.nodes, self.length)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.mobility >= 0.0
            && self.lambda > 0.0
            && self.dt > 0.0
            && self.save_every > 0
            && [self.mobility, self.lambda, self.dt, self.length].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Data(format!("invalid Allen-Cahn parameters {self:?}")))
        }
    }
}

/// `f`, `f'` and `f''` of the double well `(φ² - 1)²`.
pub(crate) fn landau(phi: f64) -> (f64, f64, f64) {
    let p2 = phi * phi;
    ((p2 - 1.0) * (p2 - 1.0), 4.0 * phi * p2 - 4.0 * phi, 12.0 * p2 - 4.0)
}

/// Equilibrium interface length `sqrt(λ / 2)`: the planar solution is
/// `tanh(x / sqrt(λ / 2))`.
pub fn interface_width(lambda: f64) -> f64 {
    (lambda / 2.0).sqrt()
}

/// Seeded initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum AllenCahnInit {
    /// `Σ_{k=0..modes} a_k cos(kπx/L)` with `a_k ~ U(-1, 1)`, rescaled so the
    /// largest magnitude equals `amplitude`.
    CosineSeries { modes: usize, amplitude: f64 },
    /// Product of 1 to `max_kinks` equilibrium `tanh` interfaces at random,
    /// well-separated positions.
    Kinks { max_kinks: usize },
}

impl Default for AllenCahnInit {
    fn default() -> Self {
        AllenCahnInit::CosineSeries { modes: 6, amplitude: 0.9 }
    }
}

pub fn allen_cahn_initial(mesh: &StructuredMesh, lambda: f64, init: &AllenCahnInit, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.node_count();
    let length = mesh.spacing()[0] * (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| mesh.node_coords(i)[0]).collect();
    match init {
        AllenCahnInit::CosineSeries { modes, amplitude } => {
            let a: Vec<f64> = (0..=*modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let raw: Vec<f64> = xs
                .iter()
                .map(|x| {
                    a.iter()
                        .enumerate()
                        .map(|(k, ak)| ak * (k as f64 * std::f64::consts::PI * x / length).cos())
                        .sum()
                })
                .collect();
            let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            raw.iter().map(|v| amplitude * v / peak).collect()
        }
        AllenCahnInit::Kinks { max_kinks } => {
            let delta = interface_width(lambda);
            let count = rng.gen_range(1..=(*max_kinks).max(1));
            let (margin, gap) = (3.0 * delta, 6.0 * delta);
            let mut pos = Vec::new();
            for _ in 0..10_000 {
                pos = (0..count).map(|_| rng.gen_range(margin..(length - margin).max(margin + 1e-9))).collect();
                pos.sort_by(f64::total_cmp);
                if pos.windows(2).all(|w| w[1] - w[0] >= gap) {
                    break;
                }
            }
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            xs.iter()
                .map(|x| sign * pos.iter().map(|p| ((x - p) / delta).tanh()).product::<f64>())
                .collect()
        }
    }
}

/// Backward-Euler time marching with Newton iterations.
///
/// Space uses linear elements with a lumped mass and a consistently
/// integrated reaction term, so the scheme is the discrete gradient flow of
/// the quadrature-evaluated free energy. The Newton tolerance applies to the
/// residual divided by the lumped mass (rate units).
pub fn solve_allen_cahn_1d(params: &AllenCahnParams, phi0: &[f64]) -> Result<FieldSeries> {
    params.validate()?;
    let mesh = params.mesh()?;
    let n = mesh.node_count();
    if phi0.len() != n {
        return Err(Error::Shape(format!("initial field has {} values, mesh has {n}", phi0.len())));
    }
    if phi0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite initial field".into()));
    }
    let h = mesh.spacing()[0];
    let mask = BoundaryMask::interior(n);
    let m = lumped_mass(&mesh, &mask);
    let shape = shape_eval(&mesh, &gauss_rule(3, 1)?)?;
    let (mob, lam, dt) = (params.mobility, params.lambda, params.dt);

    let mut series = FieldSeries::new(mesh.clone(), "phi");
    series.meta = vec![
        ("mobility".into(), params.mobility.to_string()),
        ("lambda".into(), params.lambda.to_string()),
        ("dt".into(), params.dt.to_string()),
        ("steps".into(), params.steps.to_string()),
        ("nodes".into(), params.nodes.to_string()),
        ("length".into(), params.length.to_string()),
    ];
    series.push(0.0, phi0.to_vec())?;

    let mut old = phi0.to_vec();
    let mut phi = phi0.to_vec();
    let mut r = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for step in 1..=params.steps {
        let mut converged = false;
        let mut res_norm = f64::INFINITY;
        for _ in 0..=params.newton_max_iter {
            // residual and Jacobian
            for i in 0..n {
                r[i] = m[i] * (phi[i] - old[i]) / dt;
                diag[i] = m[i] / dt;
            }
            off.iter_mut().for_each(|v| *v = 0.0);
            for e in 0..n - 1 {
                let local = [phi[e], phi[e + 1]];
                let grad = (local[1] - local[0]) / h;
                let kflux = mob * lam * grad;
                r[e] -= kflux;
                r[e + 1] += kflux;
                diag[e] += mob * lam / h;
                diag[e + 1] += mob * lam / h;
                off[e] -= mob * lam / h;
                for q in 0..shape.n_points() {
                    let (_, fp, fpp) = landau(shape.interp(q, &local));
                    let (na, nb) = (shape.value(q, 0), shape.value(q, 1));
                    let w = shape.jxw[q] * mob;
                    r[e] += w * fp * na;
                    r[e + 1] += w * fp * nb;
                    diag[e] += w * fpp * na * na;
                    diag[e + 1] += w * fpp * nb * nb;
                    off[e] += w * fpp * na * nb;
                }
            }
            res_norm = r.iter().zip(&m).fold(0.0f64, |acc, (ri, mi)| acc.max((ri / mi).abs()));
            if !res_norm.is_finite() {
                break;
            }
            if res_norm < params.newton_tol {
                converged = true;
                break;
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = solve_tridiagonal(&off, &diag, &off, &rhs)?;
            for (p, d) in phi.iter_mut().zip(&delta) {
                *p += d;
            }
        }
        if !converged {
            return Err(Error::Solver(format!(
                "Allen-Cahn Newton did not converge at step {step}: residual {res_norm:e}"
            )));
        }
        if step % params.save_every == 0 || step == params.steps {
            series.push(step as f64 * dt, phi.clone())?;
        }
        old.copy_from_slice(&phi);
    }
    Ok(series)
}
