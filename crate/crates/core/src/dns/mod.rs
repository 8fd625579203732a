//! Direct numerical solvers that generate identification data.

mod allen_cahn;
mod schnakenberg;
mod steady;

pub use allen_cahn::{
    allen_cahn_initial, interface_width, solve_allen_cahn_1d, AllenCahnInit, AllenCahnParams,
};
pub use schnakenberg::{
    schnakenberg_initial, solve_schnakenberg_2d, uniform_fixed_point, SchnakenbergParams, TimeScheme,
};
pub use steady::solve_steady_diffusion;

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid_fem::StructuredMesh;
use crate::io::Table;

/// Time-ordered nodal snapshots of one scalar field on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub mesh: StructuredMesh,
    pub name: String,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Parameters and seeds describing how the series was produced.
    pub meta: Vec<(String, String)>,
}

impl FieldSeries {
    pub fn new(mesh: StructuredMesh, name: &str) -> FieldSeries {
        FieldSeries { mesh, name: name.to_string(), times: Vec::new(), snapshots: Vec::new(), meta: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a snapshot; times must increase strictly.
    pub fn push(&mut self, t: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.mesh.node_count() {
            return Err(Error::Shape(format!(
                "snapshot has {} values, mesh has {} nodes",
                values.len(),
                self.mesh.node_count()
            )));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::Data(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.snapshots.push(values);
        Ok(())
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.snapshots.last().map(Vec::as_slice)
    }

    /// Snapshot `k` as an `x, y, value` table.
    pub fn snapshot_table(&self, k: usize) -> Table {
        let n = self.mesh.node_count();
        let coords: Vec<[f64; 2]> = (0..n).map(|i| self.mesh.node_coords(i)).collect();
        let mut t = Table::new();
        t.push("x", coords.iter().map(|c| c[0]).collect()).expect("fresh table");
        t.push("y", coords.iter().map(|c| c[1]).collect()).expect("fresh table");
        t.push("value", self.snapshots[k].clone()).expect("fresh table");
        t
    }

    /// Writes `<name>_<k>.csv` per snapshot and a `<name>_times.csv` index.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let width = self.len().max(1).to_string().len().max(5);
        for k in 0..self.len() {
            let p = dir.join(format!("{}_{:0width$}.csv", self.name, k));
            self.snapshot_table(k).write_csv(&p)?;
            paths.push(p);
        }
        let mut idx = Table::new();
        idx.push("index", (0..self.len()).map(|k| k as f64).collect())?;
        idx.push("time", self.times.clone())?;
        let p = dir.join(format!("{}_times.csv", self.name));
        idx.write_csv(&p)?;
        paths.push(p);
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_must_increase() {
        let m = StructuredMesh::line(3, 1.0).unwrap();
        let mut s = FieldSeries::new(m, "phi");
        s.push(0.0, vec![0.0; 3]).unwrap();
        assert!(s.push(0.0, vec![0.0; 3]).is_err());
        assert!(s.push(1.0, vec![0.0; 2]).is_err());
    }
}
