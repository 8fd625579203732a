//! Non-local calculus on graphs built from scattered data.
//!
//! A derivative at vertex `x̃` is a weighted sum of state differences over
//! its neighbourhood, `Σ (u(x) - u(x̃)) c(x, x̃)`. The coefficients solve
//! Taylor moment conditions so that the sum reproduces a chosen partial
//! derivative exactly on polynomials up to a requested degree.

mod pipeline;
mod stencil;

pub use pipeline::{algebraic_op, run_pipeline, AlgebraicOp, GraphSettings};
pub use stencil::{moment_count, multi_indices, nonlocal_partial, stencil_weights, DiffOpSpec, Stencil};

use crate::error::{Error, Result};

/// Points closer than this are duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Vertices with positions and k-nearest-neighbour adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    dim: usize,
    positions: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Sorted neighbour indices of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Directed edges `(i, j)`; each undirected edge appears twice.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(i, n)| n.iter().map(move |&j| (i, j)))
    }

    /// Offsets `x_j - x_i` of the neighbours of `i`, flattened.
    pub fn offsets(&self, i: usize) -> Vec<f64> {
        let c = self.position(i);
        let mut out = Vec::with_capacity(self.degree(i) * self.dim);
        for &j in &self.neighbors[i] {
            out.extend(self.position(j).iter().zip(c).map(|(a, b)| a - b));
        }
        out
    }
}

/// Builds the symmetric k-nearest-neighbour graph of `points` (row-major,
/// `dim` coordinates each). Equal distances rank by vertex index.
pub fn build_graph(points: &[f64], dim: usize, k: usize) -> Result<Graph> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::Shape(format!("{} coordinates do not split into dimension {dim}", points.len())));
    }
    let n = points.len() / dim;
    if n < 2 {
        return Err(Error::Data(format!("a graph needs at least 2 points, got {n}")));
    }
    if k == 0 {
        return Err(Error::Config("neighbourhood size k must be >= 1".into()));
    }
    if let Some(p) = points.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite coordinate at point {}", p / dim)));
    }
    let k = k.min(n - 1);
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dups = Vec::new();
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        let pi = pt(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d2: f64 = pt(j).iter().zip(pi).map(|(a, b)| (a - b) * (a - b)).sum();
            if j > i && d2.sqrt() < DUPLICATE_TOL {
                dups.push((i, j));
            }
            cand.push((d2, j));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
        }
        neighbors[i].extend(cand[..k].iter().map(|c| c.1));
    }
    if !dups.is_empty() {
        let list: Vec<String> = dups.iter().take(20).map(|(a, b)| format!("({a}, {b})")).collect();
        return Err(Error::Data(format!("duplicate points: {}", list.join(", "))));
    }
    for i in 0..n {
        for c in 0..neighbors[i].len() {
            let j = neighbors[i][c];
            if !neighbors[j].contains(&i) {
                neighbors[j].push(i);
            }
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    Ok(Graph { dim, positions: points.to_vec(), neighbors })
}
