//! Weak-form regression systems `y = χ ω` assembled from field snapshots.
//!
//! Rows are indexed by free nodes (interior or Neumann) and time samples.
//! Laplacian columns are `-∫ ∇w·∇c`, algebraic columns `∫ w g(c)` with `g`
//! evaluated at quadrature points from interpolated fields, and the target
//! is the mass-weighted backward difference `∫ w Σ_a (c_n^a - c_{n-1}^a)/Δt N^a`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dns::FieldSeries;
use crate::error::{Error, Result};
use crate::grid_fem::{gauss_rule, mass_matrix, shape_eval, stiffness_matrix, BoundaryMask, ShapeFunctions, StructuredMesh};
use crate::io::Table;
use crate::linalg::BandedSym;

/// Pointwise function of all species values.
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One candidate operator.
#[derive(Clone)]
pub enum Operator {
    /// `-∫ ∇w · ∇c_s`
    Laplacian(usize),
    /// `∫ w`
    Constant,
    /// `∫ w c_s`
    Linear(usize),
    /// `∫ w c_0² c_1`
    CubicC1SqC2,
    /// `∫ w g(c)` for a user function.
    Custom { label: String, func: PointFn },
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::Laplacian(s) => write!(f, "Laplacian({s})"),
            Operator::Constant => write!(f, "Constant"),
            Operator::Linear(s) => write!(f, "Linear({s})"),
            Operator::CubicC1SqC2 => write!(f, "CubicC1SqC2"),
            Operator::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl Operator {
    pub fn label(&self, species: &[&str]) -> String {
        let name = |s: usize| species.get(s).map_or_else(|| format!("c{}", s + 1), |n| n.to_string());
        match self {
            Operator::Laplacian(s) => format!("lap_{}", name(*s)),
            Operator::Constant => "const".into(),
            Operator::Linear(s) => name(*s),
            Operator::CubicC1SqC2 => format!("{}^2{}", name(0), name(1)),
            Operator::Custom { label, .. } => label.clone(),
        }
    }

    fn check(&self, n_species: usize) -> Result<()> {
        let bad = match self {
            Operator::Laplacian(s) | Operator::Linear(s) => *s >= n_species,
            Operator::CubicC1SqC2 => n_species < 2,
            _ => false,
        };
        if bad {
            Err(Error::Config(format!("operator {self:?} needs more than {n_species} species")))
        } else {
            Ok(())
        }
    }

    /// Looks up a named operator of the two-species library.
    pub fn from_name(name: &str) -> Result<Operator> {
        Ok(match name {
            "lap_c1" => Operator::Laplacian(0),
            "lap_c2" => Operator::Laplacian(1),
            "const" => Operator::Constant,
            "c1" => Operator::Linear(0),
            "c2" => Operator::Linear(1),
            "c1^2c2" => Operator::CubicC1SqC2,
            _ => return Err(Error::Config(format!("unknown operator '{name}'"))),
        })
    }
}

/// The six-operator library of two-species Schnakenberg kinetics, ordered
/// `lap_c1, lap_c2, const, c1, c2, c1^2c2`.
pub fn schnakenberg_library() -> Vec<Operator> {
    vec![
        Operator::Laplacian(0),
        Operator::Laplacian(1),
        Operator::Constant,
        Operator::Linear(0),
        Operator::Linear(1),
        Operator::CubicC1SqC2,
    ]
}

/// Regression system with row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorLibrary {
    pub y: DVector<f64>,
    pub chi: DMatrix<f64>,
    pub labels: Vec<String>,
    /// `(node, time index)` of each row.
    pub dof_map: Vec<(usize, usize)>,
}

impl OperatorLibrary {
    pub fn nrows(&self) -> usize {
        self.y.len()
    }

    pub fn ncols(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi.nrows() != self.y.len() || self.dof_map.len() != self.y.len() {
            return Err(Error::Shape(format!(
                "library rows: y {}, chi {}, dof_map {}",
                self.y.len(),
                self.chi.nrows(),
                self.dof_map.len()
            )));
        }
        if self.chi.ncols() != self.labels.len() {
            return Err(Error::Shape(format!("{} columns but {} labels", self.chi.ncols(), self.labels.len())));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(l) {
                return Err(Error::Data(format!("duplicate label '{l}'")));
            }
        }
        Ok(())
    }

    pub fn column_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Data(format!("no operator labelled '{label}'")))
    }

    /// Moves column `idx` to the target side, replacing `y`.
    pub fn with_target_column(&self, idx: usize) -> Result<OperatorLibrary> {
        if idx >= self.ncols() {
            return Err(Error::Config(format!("target index {idx} out of range ({} columns)", self.ncols())));
        }
        let keep: Vec<usize> = (0..self.ncols()).filter(|&j| j != idx).collect();
        Ok(OperatorLibrary {
            y: self.chi.column(idx).into_owned(),
            chi: self.chi.select_columns(&keep),
            labels: keep.iter().map(|&j| self.labels[j].clone()).collect(),
            dof_map: self.dof_map.clone(),
        })
    }

    /// Writes `y.csv`, `chi.csv` and `dof_map.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut y = Table::new();
        y.push("y", self.y.iter().copied().collect())?;
        let mut chi = Table::new();
        for (j, l) in self.labels.iter().enumerate() {
            chi.push(l, self.chi.column(j).iter().copied().collect())?;
        }
        let mut dm = Table::new();
        dm.push("node", self.dof_map.iter().map(|d| d.0 as f64).collect())?;
        dm.push("time_index", self.dof_map.iter().map(|d| d.1 as f64).collect())?;
        let paths = vec![dir.join("y.csv"), dir.join("chi.csv"), dir.join("dof_map.csv")];
        y.write_csv(&paths[0])?;
        chi.write_csv(&paths[1])?;
        dm.write_csv(&paths[2])?;
        Ok(paths)
    }

    /// Reads a library written by [`OperatorLibrary::write_dir`]; the
    /// provenance file is optional.
    pub fn read_dir(dir: &Path) -> Result<OperatorLibrary> {
        Self::read_files(&dir.join("y.csv"), &dir.join("chi.csv"), Some(&dir.join("dof_map.csv")))
    }

    pub fn read_files(y_path: &Path, chi_path: &Path, dof_path: Option<&Path>) -> Result<OperatorLibrary> {
        let yt = Table::read_csv(y_path)?;
        if yt.ncols() != 1 {
            return Err(Error::Data(format!("{} must have one column", y_path.display())));
        }
        let ct = Table::read_csv(chi_path)?;
        let n = yt.nrows();
        if ct.nrows() != n {
            return Err(Error::Shape(format!("y has {n} rows, chi has {}", ct.nrows())));
        }
        let chi = DMatrix::from_fn(n, ct.ncols(), |i, j| ct.column_at(j)[i]);
        let dof_map = match dof_path.filter(|p| p.exists()) {
            Some(p) => {
                let t = Table::read_csv(p)?;
                let (a, b) = (t.column("node")?, t.column("time_index")?);
                if a.len() != n {
                    return Err(Error::Shape("dof_map row count".into()));
                }
                a.iter().zip(b).map(|(x, y)| (*x as usize, *y as usize)).collect()
            }
            None => (0..n).map(|i| (i, 0)).collect(),
        };
        let lib = OperatorLibrary {
            y: DVector::from_column_slice(yt.column_at(0)),
            chi,
            labels: ct.names().to_vec(),
            dof_map,
        };
        lib.validate()?;
        Ok(lib)
    }
}

/// Shared assembly data for one mesh and boundary mask.
pub struct WeakForm {
    mesh: StructuredMesh,
    mask: BoundaryMask,
    shape: ShapeFunctions,
    mass: BandedSym,
    stiffness: BandedSym,
    rows: Vec<usize>,
}

impl WeakForm {
    /// `quad_points` Gauss points per axis for algebraic operators.
    pub fn new(mesh: &StructuredMesh, mask: &BoundaryMask, quad_points: usize) -> Result<WeakForm> {
        if mask.len() != mesh.node_count() {
            return Err(Error::Shape("mask does not match mesh".into()));
        }
        Ok(WeakForm {
            shape: shape_eval(mesh, &gauss_rule(quad_points, mesh.dim())?)?,
            mass: mass_matrix(mesh, mask),
            stiffness: stiffness_matrix(mesh, mask),
            rows: mask.free_nodes(),
            mesh: mesh.clone(),
            mask: mask.clone(),
        })
    }

    /// Free nodes, in row order.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Mass-weighted backward-difference rate at time index `n ≥ 1`.
    pub fn time_derivative(&self, series: &FieldSeries, n: usize) -> Result<Vec<f64>> {
        if n == 0 || n >= series.len() {
            return Err(Error::Data(format!(
                "time index {n} needs a predecessor within a series of {} snapshots",
                series.len()
            )));
        }
        if series.mesh.node_count() != self.mesh.node_count() {
            return Err(Error::Shape("series mesh does not match".into()));
        }
        let dt = series.times[n] - series.times[n - 1];
        let rate: Vec<f64> = series.snapshots[n]
            .iter()
            .zip(&series.snapshots[n - 1])
            .map(|(a, b)| (a - b) / dt)
            .collect();
        let full = self.mass.matvec(&rate);
        Ok(self.rows.iter().map(|&i| full[i]).collect())
    }

    /// One column per operator, evaluated on the given species fields.
    pub fn operator_columns(&self, fields: &[&[f64]], ops: &[Operator]) -> Result<Vec<Vec<f64>>> {
        if ops.is_empty() {
            return Err(Error::Config("empty operator list".into()));
        }
        for f in fields {
            if f.len() != self.mesh.node_count() {
                return Err(Error::Shape("field does not match mesh".into()));
            }
        }
        let mut cols = Vec::with_capacity(ops.len());
        for op in ops {
            op.check(fields.len())?;
            let full = match op {
                Operator::Laplacian(s) => self.stiffness.matvec(fields[*s]).iter().map(|v| -v).collect(),
                Operator::Constant => self.project(fields, &|_| 1.0),
                Operator::Linear(s) => {
                    let s = *s;
                    self.project(fields, &move |c: &[f64]| c[s])
                }
                Operator::CubicC1SqC2 => self.project(fields, &|c: &[f64]| c[0] * c[0] * c[1]),
                Operator::Custom { func, .. } => self.project(fields, &|c: &[f64]| func(c)),
            };
            cols.push(self.rows.iter().map(|&i| full[i]).collect());
        }
        Ok(cols)
    }

    // ∫ N_i g(c_h) over active elements
    fn project(&self, fields: &[&[f64]], g: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        let npe = self.shape.nodes_per_element;
        let ns = fields.len();
        let mut out = vec![0.0; self.mesh.node_count()];
        let mut local = vec![0.0; ns * npe];
        let mut at_q = vec![0.0; ns];
        for e in 0..self.mesh.element_count() {
            if !self.mask.element_active(&self.mesh, e) {
                continue;
            }
            let nodes = self.mesh.element_nodes(e);
            for s in 0..ns {
                for a in 0..npe {
                    local[s * npe + a] = fields[s][nodes[a]];
                }
            }
            for q in 0..self.shape.n_points() {
                for s in 0..ns {
                    at_q[s] = self.shape.interp(q, &local[s * npe..(s + 1) * npe]);
                }
                let v = g(&at_q) * self.shape.jxw[q];
                for (a, &node) in nodes.iter().enumerate() {
                    out[node] += v * self.shape.value(q, a);
                }
            }
        }
        out
    }

    fn build(&self, y: Vec<f64>, cols: Vec<Vec<f64>>, labels: Vec<String>, n: usize) -> OperatorLibrary {
        let r = y.len();
        OperatorLibrary {
            y: DVector::from_vec(y),
            chi: DMatrix::from_fn(r, cols.len(), |i, j| cols[j][i]),
            labels,
            dof_map: self.rows.iter().map(|&i| (i, n)).collect(),
        }
    }

    /// Library for species `target` at time index `n`.
    pub fn time_sample(
        &self,
        species: &[&FieldSeries],
        target: usize,
        n: usize,
        ops: &[Operator],
    ) -> Result<OperatorLibrary> {
        if target >= species.len() {
            return Err(Error::Config(format!("target species {target} out of range")));
        }
        for s in species {
            if s.times != species[0].times {
                return Err(Error::Data("species series have different time grids".into()));
            }
        }
        let y = self.time_derivative(species[target], n)?;
        let fields: Vec<&[f64]> = species.iter().map(|s| s.snapshots[n].as_slice()).collect();
        let names: Vec<&str> = species.iter().map(|s| s.name.as_str()).collect();
        let cols = self.operator_columns(&fields, ops)?;
        let labels = ops.iter().map(|o| o.label(&names)).collect();
        let lib = self.build(y, cols, labels, n);
        lib.validate()?;
        Ok(lib)
    }

    /// Library with zero target from one (near-)steady state.
    pub fn steady_state(&self, fields: &[&[f64]], names: &[&str], ops: &[Operator]) -> Result<OperatorLibrary> {
        let cols = self.operator_columns(fields, ops)?;
        let labels = ops.iter().map(|o| o.label(names)).collect();
        let lib = self.build(vec![0.0; self.rows.len()], cols, labels, 0);
        lib.validate()?;
        Ok(lib)
    }
}

/// Target vector at time index `n` with default quadrature and no-flux
/// boundaries.
pub fn assemble_time_derivative(series: &FieldSeries, n: usize) -> Result<Vec<f64>> {
    let mask = BoundaryMask::interior(series.mesh.node_count());
    WeakForm::new(&series.mesh, &mask, 3)?.time_derivative(series, n)
}

/// Full library for `species[target]` at time index `n`.
pub fn assemble_chi(
    species: &[&FieldSeries],
    target: usize,
    n: usize,
    ops: &[Operator],
    mask: &BoundaryMask,
) -> Result<OperatorLibrary> {
    let first = species.first().ok_or_else(|| Error::Data("no species".into()))?;
    WeakForm::new(&first.mesh, mask, 3)?.time_sample(species, target, n, ops)
}

/// Zero-target library from one steady field set.
pub fn assemble_steady_state(
    mesh: &StructuredMesh,
    mask: &BoundaryMask,
    fields: &[&[f64]],
    names: &[&str],
    ops: &[Operator],
) -> Result<OperatorLibrary> {
    WeakForm::new(mesh, mask, 3)?.steady_state(fields, names, ops)
}

/// Row-concatenates libraries with identical labels.
pub fn pool_time_samples(libs: &[OperatorLibrary]) -> Result<OperatorLibrary> {
    let first = libs.first().ok_or_else(|| Error::Data("nothing to pool".into()))?;
    for l in libs {
        if l.labels != first.labels {
            return Err(Error::Data(format!("label mismatch: {:?} vs {:?}", l.labels, first.labels)));
        }
    }
    let rows: usize = libs.iter().map(OperatorLibrary::nrows).sum();
    let p = first.ncols();
    let mut chi = DMatrix::zeros(rows, p);
    let mut y = DVector::zeros(rows);
    let mut dof_map = Vec::with_capacity(rows);
    let mut r0 = 0;
    for l in libs {
        let r = l.nrows();
        chi.view_mut((r0, 0), (r, p)).copy_from(&l.chi);
        y.rows_mut(r0, r).copy_from(&l.y);
        dof_map.extend_from_slice(&l.dof_map);
        r0 += r;
    }
    Ok(OperatorLibrary { y, chi, labels: first.labels.clone(), dof_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series_1d(n: usize, f: impl Fn(f64, f64) -> f64, times: &[f64]) -> FieldSeries {
        let mesh = StructuredMesh::line(n, 1.0).unwrap();
        let mut s = FieldSeries::new(mesh.clone(), "c1");
        for &t in times {
            s.push(t, (0..n).map(|i| f(mesh.node_coords(i)[0], t)).collect()).unwrap();
        }
        s
    }

    #[test]
    fn constant_series_zero_target() {
        let s = series_1d(6, |x, _| x * x, &[0.0, 0.5]);
        assert!(assemble_time_derivative(&s, 1).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unit_rate_gives_row_sums() {
        let s = series_1d(11, |x, t| x + t, &[0.0, 0.1]);
        let mut mask = BoundaryMask::interior(11);
        mask.set_dirichlet(0, 0.0);
        mask.set_dirichlet(10, 1.0);
        let wf = WeakForm::new(&s.mesh, &mask, 3).unwrap();
        let y = wf.time_derivative(&s, 1).unwrap();
        assert_eq!(y.len(), 9);
        assert!(y.iter().all(|v| (v - 0.1).abs() < 1e-12));
    }

    #[test]
    fn first_index_rejected() {
        let s = series_1d(4, |x, t| x + t, &[0.0, 0.1]);
        assert!(assemble_time_derivative(&s, 0).is_err());
        assert!(assemble_time_derivative(&s, 2).is_err());
    }

    #[test]
    fn constant_column_is_h_on_interior() {
        let s = series_1d(9, |x, t| x + t, &[0.0, 0.1]);
        let lib = assemble_chi(&[&s], 0, 1, &[Operator::Constant], &BoundaryMask::interior(9)).unwrap();
        for (k, &(node, _)) in lib.dof_map.iter().enumerate() {
            let want = if node == 0 || node == 8 { 0.0625 } else { 0.125 };
            assert!((lib.chi[(k, 0)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_of_linear_field_vanishes_inside() {
        let m = StructuredMesh::rectangle(6, 5, 1.0, 1.0).unwrap();
        let c: Vec<f64> = (0..30).map(|i| {
            let [x, y] = m.node_coords(i);
            1.0 + 0.5 * x - 2.0 * y
        }).collect();
        let lib = assemble_steady_state(&m, &BoundaryMask::interior(30), &[&c], &["c1"], &[Operator::Laplacian(0)]).unwrap();
        for (k, &(node, _)) in lib.dof_map.iter().enumerate() {
            if !m.is_boundary(node) {
                assert!(lib.chi[(k, 0)].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn uniform_field_columns() {
        let m = StructuredMesh::rectangle(4, 4, 1.0, 1.0).unwrap();
        let (c1, c2) = (vec![2.0; 16], vec![3.0; 16]);
        let lib = assemble_steady_state(&m, &BoundaryMask::interior(16), &[&c1, &c2], &["c1", "c2"], &schnakenberg_library()).unwrap();
        assert_eq!(lib.labels, vec!["lap_c1", "lap_c2", "const", "c1", "c2", "c1^2c2"]);
        for k in 0..lib.nrows() {
            let w = lib.chi[(k, 2)];
            assert!(lib.chi[(k, 0)].abs() < 1e-14 && lib.chi[(k, 1)].abs() < 1e-14);
            assert!((lib.chi[(k, 3)] - 2.0 * w).abs() < 1e-14);
            assert!((lib.chi[(k, 5)] - 12.0 * w).abs() < 1e-13);
        }
        assert!(lib.y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_spec_list_rejected() {
        let m = StructuredMesh::line(3, 1.0).unwrap();
        assert!(assemble_steady_state(&m, &BoundaryMask::interior(3), &[&[1.0; 3]], &["c"], &[]).is_err());
        assert!(assemble_steady_state(&m, &BoundaryMask::interior(3), &[&[1.0; 3]], &["c"], &[Operator::Laplacian(1)]).is_err());
    }

    #[test]
    fn pooling_concatenates() {
        let s = series_1d(5, |x, t| x * t, &[0.0, 0.1, 0.2]);
        let mask = BoundaryMask::interior(5);
        let a = assemble_chi(&[&s], 0, 1, &[Operator::Linear(0)], &mask).unwrap();
        let b = assemble_chi(&[&s], 0, 2, &[Operator::Linear(0)], &mask).unwrap();
        assert_eq!(pool_time_samples(&[a.clone()]).unwrap(), a);
        let p = pool_time_samples(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(p.nrows(), a.nrows() + b.nrows());
        assert_eq!(p.dof_map[5], (0, 2));
        let mut c = b.clone();
        c.labels = vec!["other".into()];
        assert!(pool_time_samples(&[a, c]).is_err());
    }

    #[test]
    fn target_column_move() {
        let m = StructuredMesh::line(4, 1.0).unwrap();
        let lib = assemble_steady_state(&m, &BoundaryMask::interior(4), &[&[1.0, 2.0, 3.0, 5.0]], &["c1"], &[Operator::Laplacian(0), Operator::Constant]).unwrap();
        let moved = lib.with_target_column(0).unwrap();
        assert_eq!(moved.labels, vec!["const"]);
        assert_eq!(moved.y, lib.chi.column(0).into_owned());
        assert!(lib.with_target_column(2).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let s = series_1d(5, |x, t| x * x + t, &[0.0, 0.1]);
        let lib = assemble_chi(&[&s], 0, 1, &[Operator::Laplacian(0), Operator::Constant], &BoundaryMask::interior(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        lib.write_dir(dir.path()).unwrap();
        assert_eq!(OperatorLibrary::read_dir(dir.path()).unwrap(), lib);
    }

    proptest! {
        #[test]
        fn linear_operators_scale(vals in prop::collection::vec(-2.0f64..2.0, 12), a in -5.0f64..5.0) {
            let m = StructuredMesh::rectangle(4, 3, 1.0, 1.0).unwrap();
            let mask = BoundaryMask::interior(12);
            let scaled: Vec<f64> = vals.iter().map(|v| a * v).collect();
            let ops = [Operator::Laplacian(0), Operator::Linear(0)];
            let l1 = assemble_steady_state(&m, &mask, &[&vals], &["c1"], &ops).unwrap();
            let l2 = assemble_steady_state(&m, &mask, &[&scaled], &["c1"], &ops).unwrap();
            for (x, y) in l1.chi.iter().zip(l2.chi.iter()) {
                prop_assert!((a * x - y).abs() < 1e-12);
            }
        }
    }
}
