//! Finite elements on uniform structured grids.
//!
//! Nodes are numbered `j * nx + i`. Elements are numbered the same way over
//! cells; 2D element nodes run counter-clockwise from the lower-left corner.

mod assembly;
mod boundary;
mod quadrature;
mod residual;
mod shape;

pub use assembly::{lumped_mass, mass_matrix, stiffness_matrix, ElementMatrices};
pub use boundary::{boundary_masks_from_input, BoundaryMask, NodeClass};
pub use quadrature::{gauss_rule, QuadratureRule};
pub use residual::{bulk_residual_diffusion, neumann_residual, scatter_element_to_nodes, NodalResidual};
pub use shape::{shape_eval, ShapeFunctions};

use crate::error::{Error, Result};

/// Uniform 1D or 2D grid of linear (bilinear) elements.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    dim: usize,
    n: [usize; 2],
    h: [f64; 2],
    origin: [f64; 2],
    conn: Vec<usize>,
}

impl StructuredMesh {
    /// `n` nodes evenly spaced on `[0, length]`.
    pub fn line(n: usize, length: f64) -> Result<StructuredMesh> {
        if n < 2 || !(length > 0.0) || !length.is_finite() {
            return Err(Error::Data(format!("degenerate 1D mesh: {n} nodes, length {length}")));
        }
        Ok(Self::build(1, [n, 1], [length / (n - 1) as f64, 1.0], [0.0, 0.0]))
    }

    /// `nx * ny` nodes on `[0, lx] x [0, ly]`.
    pub fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<StructuredMesh> {
        if nx < 2 || ny < 2 || !(lx > 0.0 && ly > 0.0) || !(lx * ly).is_finite() {
            return Err(Error::Data(format!("degenerate 2D mesh: {nx}x{ny} nodes, size {lx}x{ly}")));
        }
        Ok(Self::build(
            2,
            [nx, ny],
            [lx / (nx - 1) as f64, ly / (ny - 1) as f64],
            [0.0, 0.0],
        ))
    }

    fn build(dim: usize, n: [usize; 2], h: [f64; 2], origin: [f64; 2]) -> StructuredMesh {
        let mut conn = Vec::new();
        if dim == 1 {
            for i in 0..n[0] - 1 {
                conn.extend([i, i + 1]);
            }
        } else {
            let nx = n[0];
            for j in 0..n[1] - 1 {
                for i in 0..nx - 1 {
                    let a = j * nx + i;
                    conn.extend([a, a + 1, a + 1 + nx, a + nx]);
                }
            }
        }
        StructuredMesh { dim, n, h, origin, conn }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis (`[n, 1]` in 1D).
    pub fn nodes_per_axis(&self) -> [usize; 2] {
        self.n
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn nodes_per_element(&self) -> usize {
        1 << self.dim
    }

    pub fn element_count(&self) -> usize {
        self.conn.len() / self.nodes_per_element()
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        let k = self.nodes_per_element();
        &self.conn[e * k..(e + 1) * k]
    }

    /// Node coordinates; `y` is zero in 1D.
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = (node % self.n[0], node / self.n[0]);
        [
            self.origin[0] + i as f64 * self.h[0],
            if self.dim == 2 { self.origin[1] + j as f64 * self.h[1] } else { 0.0 },
        ]
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> [f64; 2] {
        self.node_coords(self.element_nodes(e)[0])
    }

    pub fn element_volume(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    pub fn domain_volume(&self) -> f64 {
        self.element_volume() * self.element_count() as f64
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = (node % self.n[0], node / self.n[0]);
        if self.dim == 1 {
            i == 0 || i == self.n[0] - 1
        } else {
            i == 0 || j == 0 || i == self.n[0] - 1 || j == self.n[1] - 1
        }
    }

    /// Half-bandwidth of nodal matrices in the natural numbering.
    pub fn bandwidth(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.n[0] + 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_connectivity() {
        let m = StructuredMesh::rectangle(4, 3, 3.0, 2.0).unwrap();
        assert_eq!(m.node_count(), 12);
        assert_eq!(m.element_count(), 6);
        assert_eq!(m.element_nodes(4), &[5, 6, 10, 9]);
        assert_eq!(m.node_coords(10), [2.0, 2.0]);
        assert!(m.is_boundary(4) && !m.is_boundary(5));
    }

    #[test]
    fn degenerate_rejected() {
        assert!(StructuredMesh::line(1, 1.0).is_err());
        assert!(StructuredMesh::rectangle(3, 3, 0.0, 1.0).is_err());
    }
}
