use crate::error::{Error, Result};
use crate::grid_fem::{bulk_residual_diffusion, neumann_residual, stiffness_matrix, BoundaryMask, NodeClass, StructuredMesh};

/// Residual tolerance checked after every solve.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;

/// Solves `∇·(D ∇c) = 0` with Dirichlet elimination and Neumann load.
///
/// Exterior nodes are returned as zero.
pub fn solve_steady_diffusion(mesh: &StructuredMesh, mask: &BoundaryMask, diffusivity: f64) -> Result<Vec<f64>> {
    let n = mesh.node_count();
    if mask.len() != n {
        return Err(Error::Shape(format!("mask has {} nodes, mesh {n}", mask.len())));
    }
    if !(diffusivity > 0.0 && diffusivity.is_finite()) {
        return Err(Error::Data(format!("diffusivity must be positive, got {diffusivity}")));
    }
    if !(0..n).any(|i| mask.class(i) == NodeClass::Dirichlet) {
        return Err(Error::Data("ill-posed problem: no Dirichlet node".into()));
    }
    let k = stiffness_matrix(mesh, mask);
    let rn = neumann_residual(mesh, mask)?;
    let mut c = vec![0.0; n];
    for i in 0..n {
        if mask.class(i) == NodeClass::Dirichlet {
            c[i] = mask.value(i);
        }
    }
    // R = -D K c + r_N = 0 on free rows, Dirichlet values moved right
    let kc_d = k.matvec(&c);
    let free = mask.free_nodes();
    let rhs: Vec<f64> = free.iter().map(|&i| rn[i] / diffusivity - kc_d[i]).collect();
    let chol = k
        .submatrix(&free)
        .cholesky()
        .map_err(|_| Error::Solver("singular steady-diffusion system (free node without support?)".into()))?;
    let sol = chol.solve(&rhs);
    for (&i, v) in free.iter().zip(sol) {
        c[i] = v;
    }
    let mut r = bulk_residual_diffusion(&c, mesh, mask, diffusivity)?;
    for (v, q) in r.values.iter_mut().zip(&rn) {
        *v += q;
    }
    let res = free.iter().fold(0.0f64, |m, &i| m.max(r.values[i].abs()));
    if !(res < STEADY_RESIDUAL_TOL) {
        return Err(Error::Solver(format!("steady residual {res:e} above {STEADY_RESIDUAL_TOL:e}")));
    }
    Ok(c)
}
