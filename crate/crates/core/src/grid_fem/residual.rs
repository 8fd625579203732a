use super::{gauss_rule, shape_eval, BoundaryMask, NodeClass, StructuredMesh};
use crate::error::{Error, Result};

/// Nodal residual; Dirichlet rows are kept but flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalResidual {
    pub values: Vec<f64>,
    pub dirichlet: Vec<bool>,
}

impl NodalResidual {
    /// Max-norm over rows that are not Dirichlet.
    pub fn free_norm_inf(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.dirichlet)
            .filter(|(_, d)| !**d)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }
}

/// Bulk term `Σ_e ∫ Bᵀ H dV` with the diffusive flux `H = -D ∇c`.
pub fn bulk_residual_diffusion(
    field: &[f64],
    mesh: &StructuredMesh,
    mask: &BoundaryMask,
    diffusivity: f64,
) -> Result<NodalResidual> {
    let n = mesh.node_count();
    if field.len() != n || mask.len() != n {
        return Err(Error::Shape(format!(
            "field has {} values, mask {} nodes, mesh {n} nodes",
            field.len(),
            mask.len()
        )));
    }
    let s = shape_eval(mesh, &gauss_rule(2, mesh.dim())?)?;
    let npe = s.nodes_per_element;
    let mut r = vec![0.0; n];
    let mut local = vec![0.0; npe];
    for e in 0..mesh.element_count() {
        if !mask.element_active(mesh, e) {
            continue;
        }
        let nodes = mesh.element_nodes(e);
        for (l, &g) in local.iter_mut().zip(nodes) {
            *l = field[g];
        }
        for q in 0..s.n_points() {
            let g = s.interp_grad(q, &local);
            let h = [-diffusivity * g[0], -diffusivity * g[1]];
            for (a, &node) in nodes.iter().enumerate() {
                let b = s.grad(q, a);
                r[node] += s.jxw[q] * (b[0] * h[0] + b[1] * h[1]);
            }
        }
    }
    let dirichlet = (0..n).map(|i| mask.class(i) == NodeClass::Dirichlet).collect();
    Ok(NodalResidual { values: r, dirichlet })
}

/// Surface term `-∫ Nᵀ H̄ dS` over Neumann parts of the mesh boundary.
///
/// `H̄` is the outward normal flux `H · n`. A boundary edge carries flux when
/// one endpoint is Neumann and the other is Neumann or Dirichlet; the flux at
/// a Dirichlet endpoint is taken from its Neumann neighbour.
pub fn neumann_residual(mesh: &StructuredMesh, mask: &BoundaryMask) -> Result<Vec<f64>> {
    let n = mesh.node_count();
    if mask.len() != n {
        return Err(Error::Shape(format!("mask has {} nodes, mesh {n}", mask.len())));
    }
    for i in 0..n {
        if mask.class(i) == NodeClass::Neumann && !mesh.is_boundary(i) {
            return Err(Error::Data(format!("neumann node {i} is not on the mesh boundary")));
        }
    }
    let mut r = vec![0.0; n];
    if mesh.dim() == 1 {
        for i in 0..n {
            if mask.class(i) == NodeClass::Neumann {
                r[i] -= mask.value(i);
            }
        }
        return Ok(r);
    }
    let [nx, ny] = mesh.nodes_per_axis();
    let [hx, hy] = mesh.spacing();
    let rule = gauss_rule(2, 1)?;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..nx - 1 {
        edges.push((i, i + 1, hx));
        edges.push(((ny - 1) * nx + i, (ny - 1) * nx + i + 1, hx));
    }
    for j in 0..ny - 1 {
        edges.push((j * nx, (j + 1) * nx, hy));
        edges.push((j * nx + nx - 1, (j + 1) * nx + nx - 1, hy));
    }
    for (a, b, len) in edges {
        let (ca, cb) = (mask.class(a), mask.class(b));
        let carries = |c: NodeClass| matches!(c, NodeClass::Neumann | NodeClass::Dirichlet);
        if !(carries(ca) && carries(cb)) || (ca != NodeClass::Neumann && cb != NodeClass::Neumann) {
            continue;
        }
        let qa = if ca == NodeClass::Neumann { mask.value(a) } else { mask.value(b) };
        let qb = if cb == NodeClass::Neumann { mask.value(b) } else { mask.value(a) };
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let (na, nb) = ((1.0 - p[0]) / 2.0, (1.0 + p[0]) / 2.0);
            let hbar = na * qa + nb * qb;
            let jxw = w * len / 2.0;
            r[a] -= jxw * na * hbar;
            r[b] -= jxw * nb * hbar;
        }
    }
    Ok(r)
}

/// Sums per-element nodal contributions (`n_elem * npe`, element-major)
/// onto global nodes.
pub fn scatter_element_to_nodes(element_values: &[f64], mesh: &StructuredMesh) -> Result<Vec<f64>> {
    let npe = mesh.nodes_per_element();
    if element_values.len() != mesh.element_count() * npe {
        return Err(Error::Shape(format!(
            "{} element values, expected {} x {npe}",
            element_values.len(),
            mesh.element_count()
        )));
    }
    let mut out = vec![0.0; mesh.node_count()];
    for e in 0..mesh.element_count() {
        for (a, &node) in mesh.element_nodes(e).iter().enumerate() {
            out[node] += element_values[e * npe + a];
        }
    }
    Ok(out)
}
