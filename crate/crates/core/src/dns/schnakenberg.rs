use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FieldSeries;
use crate::error::{Error, Result};
use crate::grid_fem::{gauss_rule, mass_matrix, shape_eval, stiffness_matrix, BoundaryMask, ShapeFunctions, StructuredMesh};
use crate::linalg::{BandedCholesky, BandedSym};

/// How the reaction terms enter each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    /// Implicit diffusion, reaction at the previous step.
    SemiImplicit,
    /// Everything at the new step, solved by fixed-point iteration on the
    /// reaction and cross-diffusion terms.
    BackwardEuler,
}

/// Two-species reaction-diffusion with Schnakenberg-type kinetics
/// `R_a = R_a0 + R_a1 c1 + R_a2 c2 + R_a3 c1² c2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchnakenbergParams {
    /// `d[a][b]` multiplies `Δc_b` in the equation for species `a`.
    pub d: [[f64; 2]; 2],
    pub r: [[f64; 4]; 2],
    pub dt: f64,
    pub steps: usize,
    pub nodes: [usize; 2],
    pub side: f64,
    pub scheme: TimeScheme,
    /// Keep every `save_every`-th step.
    pub save_every: usize,
    /// Also keep the step before each kept step, so that every kept step
    /// has its predecessor for backward differences.
    pub save_pairs: bool,
    /// Stop once `max |Δc| / Δt` falls below this value.
    pub steady_tol: Option<f64>,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iter: usize,
}

impl Default for SchnakenbergParams {
    fn default() -> Self {
        SchnakenbergParams {
            d: [[1.0, 0.0], [0.0, 40.0]],
            r: [[0.1, -1.0, 0.0, 1.0], [0.9, 0.0, 0.0, -1.0]],
            dt: 1e-3,
            steps: 1000,
            nodes: [64, 64],
            side: 40.0,
            scheme: TimeScheme::SemiImplicit,
            save_every: 1,
            save_pairs: false,
            steady_tol: None,
            fixed_point_tol: 1e-13,
            fixed_point_max_iter: 500,
        }
    }
}

impl SchnakenbergParams {
    pub fn mesh(&self) -> Result<StructuredMesh> {
        StructuredMesh::rectangle(self.nodes[0], self.nodes[1], self.side, self.side)
    }

    /// Reaction rates of both species at one state.
    pub fn reaction(&self, c1: f64, c2: f64) -> [f64; 2] {
        let cubic = c1 * c1 * c2;
        let f = |r: &[f64; 4]| r[0] + r[1] * c1 + r[2] * c2 + r[3] * cubic;
        [f(&self.r[0]), f(&self.r[1])]
    }

    fn validate(&self) -> Result<()> {
        let finite = self.d.iter().flatten().chain(self.r.iter().flatten()).all(|v| v.is_finite());
        if !finite || !(self.d[0][0] > 0.0 && self.d[1][1] > 0.0) || !(self.dt > 0.0) || self.save_every == 0 {
            return Err(Error::Data(format!("invalid Schnakenberg parameters {self:?}")));
        }
        Ok(())
    }
}

/// Spatially uniform steady state, by Newton iteration from `(1, 1)`.
pub fn uniform_fixed_point(p: &SchnakenbergParams) -> Result<[f64; 2]> {
    let mut c = [1.0, 1.0];
    for _ in 0..100 {
        let f = p.reaction(c[0], c[1]);
        let j = |r: &[f64; 4]| [r[1] + 2.0 * r[3] * c[0] * c[1], r[2] + r[3] * c[0] * c[0]];
        let (a, b) = (j(&p.r[0]), j(&p.r[1]));
        let det = a[0] * b[1] - a[1] * b[0];
        if det == 0.0 {
            break;
        }
        c[0] -= (f[0] * b[1] - a[1] * f[1]) / det;
        c[1] -= (a[0] * f[1] - b[0] * f[0]) / det;
        if f[0].abs().max(f[1].abs()) < 1e-15 {
            return Ok(c);
        }
    }
    let f = p.reaction(c[0], c[1]);
    if f[0].abs().max(f[1].abs()) < 1e-12 {
        Ok(c)
    } else {
        Err(Error::Solver("no uniform fixed point found".into()))
    }
}

/// Uniform fixed point times `1 + amplitude * U(-1, 1)` per node.
pub fn schnakenberg_initial(p: &SchnakenbergParams, amplitude: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = uniform_fixed_point(p)?;
    let n = p.nodes[0] * p.nodes[1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c1 = (0..n).map(|_| c[0] * (1.0 + amplitude * rng.gen_range(-1.0..1.0))).collect();
    let c2 = (0..n).map(|_| c[1] * (1.0 + amplitude * rng.gen_range(-1.0..1.0))).collect();
    Ok((c1, c2))
}

/// Consistent reaction load `∫ N_i R_a(c_h)` for both species.
pub(crate) fn reaction_load(
    p: &SchnakenbergParams,
    mesh: &StructuredMesh,
    shape: &ShapeFunctions,
    c1: &[f64],
    c2: &[f64],
    out: &mut [Vec<f64>; 2],
) {
    out[0].iter_mut().for_each(|v| *v = 0.0);
    out[1].iter_mut().for_each(|v| *v = 0.0);
    let npe = shape.nodes_per_element;
    let mut l1 = [0.0; 4];
    let mut l2 = [0.0; 4];
    for e in 0..mesh.element_count() {
        let nodes = mesh.element_nodes(e);
        for a in 0..npe {
            l1[a] = c1[nodes[a]];
            l2[a] = c2[nodes[a]];
        }
        for q in 0..shape.n_points() {
            let r = p.reaction(shape.interp(q, &l1[..npe]), shape.interp(q, &l2[..npe]));
            for (a, &node) in nodes.iter().enumerate() {
                let w = shape.jxw[q] * shape.value(q, a);
                out[0][node] += w * r[0];
                out[1][node] += w * r[1];
            }
        }
    }
}

/// Time-marches both species with no-flux boundaries.
///
/// Diffusion is always implicit. The returned series include `t = 0`.
pub fn solve_schnakenberg_2d(
    p: &SchnakenbergParams,
    c1_0: &[f64],
    c2_0: &[f64],
) -> Result<(FieldSeries, FieldSeries)> {
    p.validate()?;
    let mesh = p.mesh()?;
    let n = mesh.node_count();
    if c1_0.len() != n || c2_0.len() != n {
        return Err(Error::Shape(format!("initial fields must have {n} values")));
    }
    if c1_0.iter().chain(c2_0).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Data("initial concentrations must be positive".into()));
    }
    let mask = BoundaryMask::interior(n);
    let mass = mass_matrix(&mesh, &mask);
    let k = stiffness_matrix(&mesh, &mask);
    let shape = shape_eval(&mesh, &gauss_rule(3, mesh.dim())?)?;
    let lhs: Vec<BandedCholesky> = (0..2)
        .map(|a| mass.combine(1.0, &k, p.dt * p.d[a][a]).cholesky())
        .collect::<Result<_>>()?;

    let mut s1 = FieldSeries::new(mesh.clone(), "c1");
    let mut s2 = FieldSeries::new(mesh.clone(), "c2");
    let meta = vec![
        ("D".into(), format!("{:?}", p.d)),
        ("R".into(), format!("{:?}", p.r)),
        ("dt".into(), p.dt.to_string()),
        ("side".into(), p.side.to_string()),
        ("nodes".into(), format!("{}x{}", p.nodes[0], p.nodes[1])),
        ("scheme".into(), format!("{:?}", p.scheme)),
    ];
    s1.meta = meta.clone();
    s2.meta = meta;
    s1.push(0.0, c1_0.to_vec())?;
    s2.push(0.0, c2_0.to_vec())?;

    let mut c = [c1_0.to_vec(), c2_0.to_vec()];
    let mut load = [vec![0.0; n], vec![0.0; n]];
    let mut mc_old = [vec![0.0; n], vec![0.0; n]];
    let mut kc = [vec![0.0; n], vec![0.0; n]];
    for step in 1..=p.steps {
        let old = c.clone();
        mass.matvec_into(&old[0], &mut mc_old[0]);
        mass.matvec_into(&old[1], &mut mc_old[1]);
        let solve = |state: &[Vec<f64>; 2], load: &mut [Vec<f64>; 2], kc: &mut [Vec<f64>; 2]| {
            reaction_load(p, &mesh, &shape, &state[0], &state[1], load);
            k.matvec_into(&state[0], &mut kc[0]);
            k.matvec_into(&state[1], &mut kc[1]);
            let mut next = [vec![0.0; n], vec![0.0; n]];
            for a in 0..2 {
                let b = 1 - a;
                for i in 0..n {
                    next[a][i] = mc_old[a][i] + p.dt * (load[a][i] - p.d[a][b] * kc[b][i]);
                }
                lhs[a].solve_in_place(&mut next[a]);
            }
            next
        };
        match p.scheme {
            TimeScheme::SemiImplicit => c = solve(&old, &mut load, &mut kc),
            TimeScheme::BackwardEuler => {
                let mut it = 0;
                loop {
                    let next = solve(&c, &mut load, &mut kc);
                    let diff = next
                        .iter()
                        .zip(&c)
                        .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)))
                        .fold(0.0f64, f64::max);
                    c = next;
                    it += 1;
                    if diff < p.fixed_point_tol {
                        break;
                    }
                    if it >= p.fixed_point_max_iter || !diff.is_finite() {
                        return Err(Error::Solver(format!(
                            "fixed-point iteration stalled at step {step}: change {diff:e}"
                        )));
                    }
                }
            }
        }
        if c.iter().flatten().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::Solver(format!("Schnakenberg blow-up at step {step}")));
        }
        let rate = c
            .iter()
            .zip(&old)
            .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max)
            / p.dt;
        let steady = p.steady_tol.is_some_and(|tol| rate < tol);
        let keep = step % p.save_every == 0 || step == p.steps || steady;
        let keep_prev = p.save_pairs && (step + 1) % p.save_every == 0 && step + 1 <= p.steps;
        if keep || keep_prev {
            s1.push(step as f64 * p.dt, c[0].clone())?;
            s2.push(step as f64 * p.dt, c[1].clone())?;
        }
        if steady {
            break;
        }
    }
    Ok((s1, s2))
}

// Used by tests that need the assembled operators directly.
#[allow(dead_code)]
pub(crate) fn operators(mesh: &StructuredMesh) -> (BandedSym, BandedSym) {
    let mask = BoundaryMask::interior(mesh.node_count());
    (mass_matrix(mesh, &mask), stiffness_matrix(mesh, &mask))
}
