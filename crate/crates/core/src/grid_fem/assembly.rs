use super::{gauss_rule, shape_eval, BoundaryMask, StructuredMesh};
use crate::linalg::BandedSym;

/// Local stiffness and consistent mass matrices shared by all elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub npe: usize,
    /// Row-major `∫ ∇N_a · ∇N_b`.
    pub stiffness: Vec<f64>,
    /// Row-major `∫ N_a N_b`.
    pub mass: Vec<f64>,
}

impl ElementMatrices {
    pub fn new(mesh: &StructuredMesh) -> ElementMatrices {
        // two points per axis integrate bilinear products exactly
        let rule = gauss_rule(2, mesh.dim()).expect("two-point rule");
        let s = shape_eval(mesh, &rule).expect("matching dimension");
        let npe = s.nodes_per_element;
        let mut stiffness = vec![0.0; npe * npe];
        let mut mass = vec![0.0; npe * npe];
        for q in 0..s.n_points() {
            for a in 0..npe {
                for b in 0..npe {
                    let (ga, gb) = (s.grad(q, a), s.grad(q, b));
                    stiffness[a * npe + b] += s.jxw[q] * (ga[0] * gb[0] + ga[1] * gb[1]);
                    mass[a * npe + b] += s.jxw[q] * s.value(q, a) * s.value(q, b);
                }
            }
        }
        ElementMatrices { npe, stiffness, mass }
    }
}

fn assemble(mesh: &StructuredMesh, mask: &BoundaryMask, local: &[f64]) -> BandedSym {
    let npe = mesh.nodes_per_element();
    let mut a = BandedSym::zeros(mesh.node_count(), mesh.bandwidth());
    for e in 0..mesh.element_count() {
        if !mask.element_active(mesh, e) {
            continue;
        }
        let nodes = mesh.element_nodes(e);
        for i in 0..npe {
            for j in 0..=i {
                a.add(nodes[i], nodes[j], local[i * npe + j]);
            }
        }
    }
    a
}

/// Global `K_ij = ∫ ∇N_i · ∇N_j` over active elements.
pub fn stiffness_matrix(mesh: &StructuredMesh, mask: &BoundaryMask) -> BandedSym {
    assemble(mesh, mask, &ElementMatrices::new(mesh).stiffness)
}

/// Global consistent mass `M_ij = ∫ N_i N_j` over active elements.
pub fn mass_matrix(mesh: &StructuredMesh, mask: &BoundaryMask) -> BandedSym {
    assemble(mesh, mask, &ElementMatrices::new(mesh).mass)
}

/// Row sums of the consistent mass, `∫ N_i`.
pub fn lumped_mass(mesh: &StructuredMesh, mask: &BoundaryMask) -> Vec<f64> {
    let em = ElementMatrices::new(mesh);
    let npe = em.npe;
    let mut m = vec![0.0; mesh.node_count()];
    for e in 0..mesh.element_count() {
        if !mask.element_active(mesh, e) {
            continue;
        }
        for (a, &n) in mesh.element_nodes(e).iter().enumerate() {
            m[n] += em.mass[a * npe..(a + 1) * npe].iter().sum::<f64>();
        }
    }
    m
}
