use super::{QuadratureRule, StructuredMesh};
use crate::error::{Error, Result};

/// Shape values and physical gradients at quadrature points.
///
/// On a uniform grid every element shares the same tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFunctions {
    pub nodes_per_element: usize,
    pub rule: QuadratureRule,
    /// `values[q * npe + a]` is `N_a` at point `q`.
    pub values: Vec<f64>,
    /// `grads[q * npe + a]` is `grad N_a` at point `q`.
    pub grads: Vec<[f64; 2]>,
    /// Quadrature weight times Jacobian determinant.
    pub jxw: Vec<f64>,
    /// Offsets of the points from the element's lower-left corner.
    pub offsets: Vec<[f64; 2]>,
}

impl ShapeFunctions {
    pub fn n_points(&self) -> usize {
        self.jxw.len()
    }

    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.nodes_per_element + a]
    }

    pub fn grad(&self, q: usize, a: usize) -> [f64; 2] {
        self.grads[q * self.nodes_per_element + a]
    }

    /// Interpolates nodal values `u` of one element at point `q`.
    pub fn interp(&self, q: usize, local: &[f64]) -> f64 {
        let k = self.nodes_per_element;
        self.values[q * k..(q + 1) * k].iter().zip(local).map(|(n, u)| n * u).sum()
    }

    pub fn interp_grad(&self, q: usize, local: &[f64]) -> [f64; 2] {
        let k = self.nodes_per_element;
        let mut g = [0.0, 0.0];
        for (b, u) in self.grads[q * k..(q + 1) * k].iter().zip(local) {
            g[0] += b[0] * u;
            g[1] += b[1] * u;
        }
        g
    }
}

/// Evaluates linear (1D) or bilinear (2D) shape functions for `rule` on `mesh`.
pub fn shape_eval(mesh: &StructuredMesh, rule: &QuadratureRule) -> Result<ShapeFunctions> {
    if rule.dim != mesh.dim() {
        return Err(Error::Shape(format!("rule dimension {} on {}D mesh", rule.dim, mesh.dim())));
    }
    let [hx, hy] = mesh.spacing();
    if !(hx > 0.0 && hy > 0.0) {
        return Err(Error::Data("zero-area element".into()));
    }
    let npe = mesh.nodes_per_element();
    let mut values = Vec::with_capacity(rule.len() * npe);
    let mut grads = Vec::with_capacity(rule.len() * npe);
    let mut jxw = Vec::with_capacity(rule.len());
    let mut offsets = Vec::with_capacity(rule.len());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (xi, eta) = (p[0], p[1]);
        if mesh.dim() == 1 {
            values.extend([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0]);
            grads.extend([[-1.0 / hx, 0.0], [1.0 / hx, 0.0]]);
            jxw.push(w * hx / 2.0);
            offsets.push([(xi + 1.0) * hx / 2.0, 0.0]);
        } else {
            let sx = [-1.0, 1.0, 1.0, -1.0];
            let sy = [-1.0, -1.0, 1.0, 1.0];
            for a in 0..4 {
                values.push((1.0 + sx[a] * xi) * (1.0 + sy[a] * eta) / 4.0);
                grads.push([
                    sx[a] * (1.0 + sy[a] * eta) / 4.0 * 2.0 / hx,
                    sy[a] * (1.0 + sx[a] * xi) / 4.0 * 2.0 / hy,
                ]);
            }
            jxw.push(w * hx * hy / 4.0);
            offsets.push([(xi + 1.0) * hx / 2.0, (eta + 1.0) * hy / 2.0]);
        }
    }
    Ok(ShapeFunctions { nodes_per_element: npe, rule: rule.clone(), values, grads, jxw, offsets })
}

#[cfg(test)]
mod tests {
    use super::super::gauss_rule;
    use super::*;

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        let m = StructuredMesh::rectangle(3, 4, 2.0, 1.5).unwrap();
        let s = shape_eval(&m, &gauss_rule(3, 2).unwrap()).unwrap();
        for q in 0..s.n_points() {
            let sum: f64 = (0..4).map(|a| s.value(q, a)).sum();
            assert!((sum - 1.0).abs() < 1e-15);
            let g = (0..4).fold([0.0, 0.0], |acc, a| [acc[0] + s.grad(q, a)[0], acc[1] + s.grad(q, a)[1]]);
            assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
        }
        assert!((s.jxw.iter().sum::<f64>() - m.element_volume()).abs() < 1e-15);
    }

    #[test]
    fn reproduces_linear_field() {
        let m = StructuredMesh::rectangle(3, 3, 1.0, 1.0).unwrap();
        let s = shape_eval(&m, &gauss_rule(2, 2).unwrap()).unwrap();
        let e = 3;
        let local: Vec<f64> = m.element_nodes(e).iter().map(|&n| {
            let [x, y] = m.node_coords(n);
            2.0 * x - 3.0 * y + 1.0
        }).collect();
        let o = m.element_origin(e);
        for q in 0..s.n_points() {
            let (x, y) = (o[0] + s.offsets[q][0], o[1] + s.offsets[q][1]);
            assert!((s.interp(q, &local) - (2.0 * x - 3.0 * y + 1.0)).abs() < 1e-14);
            let g = s.interp_grad(q, &local);
            assert!((g[0] - 2.0).abs() < 1e-13 && (g[1] + 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = StructuredMesh::line(4, 1.0).unwrap();
        assert!(shape_eval(&m, &gauss_rule(2, 2).unwrap()).is_err());
    }
}
