use super::StructuredMesh;
use crate::error::{Error, Result};

/// Sentinel meaning "no condition of this kind" in either channel.
pub const NO_BC: f64 = -1.0;
/// Neumann-channel sentinel for nodes outside the computational domain.
pub const EXTERIOR: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    Dirichlet,
    Neumann,
    Exterior,
}

/// Per-node boundary classification with the prescribed value
/// (Dirichlet value or outward Neumann flux; zero otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMask {
    class: Vec<NodeClass>,
    value: Vec<f64>,
}

impl BoundaryMask {
    /// Every node interior: natural zero-flux boundaries.
    pub fn interior(n: usize) -> BoundaryMask {
        BoundaryMask { class: vec![NodeClass::Interior; n], value: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    pub fn value(&self, node: usize) -> f64 {
        self.value[node]
    }

    pub fn set_dirichlet(&mut self, node: usize, v: f64) {
        self.class[node] = NodeClass::Dirichlet;
        self.value[node] = v;
    }

    pub fn set_neumann(&mut self, node: usize, flux: f64) {
        self.class[node] = NodeClass::Neumann;
        self.value[node] = flux;
    }

    pub fn set_exterior(&mut self, node: usize) {
        self.class[node] = NodeClass::Exterior;
        self.value[node] = 0.0;
    }

    /// Nodes whose weighting functions give equations: interior and Neumann.
    pub fn is_free(&self, node: usize) -> bool {
        matches!(self.class[node], NodeClass::Interior | NodeClass::Neumann)
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_free(i)).collect()
    }

    /// An element takes part in assembly unless it touches an exterior node.
    pub fn element_active(&self, mesh: &StructuredMesh, e: usize) -> bool {
        mesh.element_nodes(e).iter().all(|&n| self.class[n] != NodeClass::Exterior)
    }

    /// Inverse of [`boundary_masks_from_input`].
    pub fn to_channels(&self) -> (Vec<f64>, Vec<f64>) {
        let mut d = vec![NO_BC; self.len()];
        let mut n = vec![NO_BC; self.len()];
        for i in 0..self.len() {
            match self.class[i] {
                NodeClass::Interior => {}
                NodeClass::Dirichlet => d[i] = self.value[i],
                NodeClass::Neumann => n[i] = self.value[i],
                NodeClass::Exterior => n[i] = EXTERIOR,
            }
        }
        (d, n)
    }
}

/// Decodes the two-channel boundary image.
///
/// Channel 0 carries Dirichlet values with `-1` meaning none. Channel 1
/// carries Neumann fluxes with `-1` meaning none and `-2` marking exterior
/// nodes. A node may hold at most one condition.
pub fn boundary_masks_from_input(
    dirichlet: &[f64],
    neumann: &[f64],
    mesh: &StructuredMesh,
) -> Result<BoundaryMask> {
    let n = mesh.node_count();
    if dirichlet.len() != n || neumann.len() != n {
        return Err(Error::Shape(format!(
            "boundary channels have {} and {} entries, mesh has {n} nodes",
            dirichlet.len(),
            neumann.len()
        )));
    }
    let mut mask = BoundaryMask::interior(n);
    for i in 0..n {
        let (d, q) = (dirichlet[i], neumann[i]);
        if !d.is_finite() || !q.is_finite() {
            return Err(Error::Data(format!("node {i}: non-finite boundary value")));
        }
        let has_d = d != NO_BC;
        if q == EXTERIOR {
            if has_d {
                return Err(Error::Data(format!("node {i}: exterior node carries a Dirichlet value")));
            }
            mask.set_exterior(i);
        } else if q != NO_BC {
            if has_d {
                return Err(Error::Data(format!("node {i}: both Dirichlet and Neumann values")));
            }
            mask.set_neumann(i, q);
        } else if has_d {
            mask.set_dirichlet(i, d);
        }
    }
    Ok(mask)
}
