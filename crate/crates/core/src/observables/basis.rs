use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{observable_label, observable_labels, phase_averages, G_LABELS};
use crate::dns::{allen_cahn_initial, solve_allen_cahn_1d, AllenCahnInit, AllenCahnParams, FieldSeries};
use crate::error::{Error, Result};
use crate::graph_calculus::{build_graph, nonlocal_partial, DiffOpSpec};
use crate::io::{fmt_f64, Table};
use crate::sysid::{stepwise_eliminate, RegressionTrace, StepwiseConfig};
use crate::weak_operators::OperatorLibrary;

/// Regression target `dφ_{φ+}/dt`.
pub const TARGET_LABEL: &str = "dphi_phi+/dt";

/// `dPsi+/dphi_<g>±` or `dPsi/dphi_<g>±`.
pub fn derivative_label(psi_plus: bool, g: usize, plus: bool) -> String {
    format!("d{}/d{}", if psi_plus { "Psi+" } else { "Psi" }, observable_label(g, plus))
}

/// `n` trajectories from seeded initial conditions (`seed + i`).
pub fn run_ensemble(params: &AllenCahnParams, init: &AllenCahnInit, n: usize, seed: u64) -> Result<Vec<FieldSeries>> {
    let mesh = params.mesh()?;
    (0..n)
        .map(|i| {
            let phi0 = allen_cahn_initial(&mesh, params.lambda, init, seed.wrapping_add(i as u64));
            solve_allen_cahn_1d(params, &phi0)
        })
        .collect()
}

/// Stacked [`phase_averages`] with a leading `trajectory` column.
pub fn ensemble_observables(series: &[FieldSeries], lambda: f64) -> Result<Table> {
    let mut out: Option<Table> = None;
    let mut traj = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let t = phase_averages(s, lambda)?;
        traj.extend(std::iter::repeat(i as f64).take(t.nrows()));
        out = Some(match out {
            None => t,
            Some(mut acc) => {
                let mut merged = Table::new();
                for name in acc.names().to_vec() {
                    let mut c = acc.column(&name)?.to_vec();
                    c.extend_from_slice(t.column(&name)?);
                    merged.push(&name, c)?;
                }
                acc = merged;
                acc
            }
        });
    }
    let body = out.ok_or_else(|| Error::Data("empty ensemble".into()))?;
    let mut t = Table::new();
    t.push("trajectory", traj)?;
    for name in body.names() {
        t.push(name, body.column(name)?.to_vec())?;
    }
    Ok(t)
}

/// Contiguous row ranges sharing a trajectory id.
fn trajectory_ranges(table: &Table) -> Result<Vec<std::ops::Range<usize>>> {
    let ids = table.column("trajectory")?;
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=ids.len() {
        if i == ids.len() || ids[i] != ids[start] {
            out.push(start..i);
            start = i;
        }
    }
    Ok(out)
}

/// Derivative at `x[i]` from the three points `x[j..j+3]` (Lagrange).
fn lagrange3(x: &[f64], y: &[f64], j: usize, at: f64) -> f64 {
    let (x0, x1, x2) = (x[j], x[j + 1], x[j + 2]);
    let (y0, y1, y2) = (y[j], y[j + 1], y[j + 2]);
    y0 * (2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

/// Adds [`TARGET_LABEL`]: central differences in time within each
/// trajectory, three-point one-sided at the ends.
pub fn time_derivative(table: &mut Table) -> Result<()> {
    let t = table.column("t")?.to_vec();
    let y = table.column(&observable_label(0, true))?.to_vec();
    let mut d = vec![0.0; t.len()];
    for r in trajectory_ranges(table)? {
        let (tt, yy) = (&t[r.clone()], &y[r.clone()]);
        let m = tt.len();
        if tt.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!("times of trajectory rows {}..{} are not increasing", r.start, r.end)));
        }
        for i in 0..m {
            d[r.start + i] = match m {
                1 => return Err(Error::Data("a trajectory needs at least two snapshots".into())),
                2 => (yy[1] - yy[0]) / (tt[1] - tt[0]),
                _ => lagrange3(tt, yy, i.saturating_sub(1).min(m - 3), tt[i]),
            };
        }
    }
    table.upsert(TARGET_LABEL, d)
}

/// Adds `dPsi/dphi_<g>±` and `dPsi+/dphi_<g>±` for every observable.
///
/// Rows are grouped by time; within a group (one point per trajectory) the
/// derivative with respect to `φ_{g s}` uses the two-coordinate manifold
/// `(φ_{g s}, φ_{φ -s})`, nearest-neighbour graphs and accuracy-2 stencils.
/// `k` overrides the neighbourhood size.
pub fn functional_derivatives(table: &mut Table, k: Option<usize>) -> Result<()> {
    let times = table.column("t")?.to_vec();
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, t) in times.iter().enumerate() {
        groups.entry(t.to_bits()).or_default().push(i);
    }
    let states = [("Psi+", true), ("Psi", false)];
    let n = table.nrows();
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (state, psi_plus) in states {
        let psi = table.column(state)?.to_vec();
        for g in 0..G_LABELS.len() {
            for plus in [true, false] {
                let xl = observable_label(g, plus);
                let pl = observable_label(0, !plus);
                let (x, p) = (table.column(&xl)?.to_vec(), table.column(&pl)?.to_vec());
                let mut spec = DiffOpSpec::partial(state, &[xl.as_str(), pl.as_str()], &[0], 1, 2);
                spec.k = k;
                spec.validate()?;
                let kk = spec.neighborhood_size();
                let mut col = vec![0.0; n];
                for rows in groups.values() {
                    let t = times[rows[0]];
                    if rows.len() <= kk {
                        return Err(Error::Rank(format!(
                            "t = {t}: {} trajectories cannot fill neighbourhoods of {kk}; use more trajectories",
                            rows.len()
                        )));
                    }
                    let pts: Vec<f64> = rows.iter().flat_map(|&r| [x[r], p[r]]).collect();
                    let vals: Vec<f64> = rows.iter().map(|&r| psi[r]).collect();
                    let advise = |e: Error| match e {
                        Error::Rank(m) | Error::Data(m) => Error::Rank(format!(
                            "d{state}/d{xl} at t = {t}: {m}; trajectories are too clustered, use more trajectories"
                        )),
                        e => e,
                    };
                    let graph = build_graph(&pts, 2, kk).map_err(advise)?;
                    let d = nonlocal_partial(&graph, &vals, &spec).map_err(advise)?;
                    for (&r, v) in rows.iter().zip(d) {
                        col[r] = v;
                    }
                }
                out.push((derivative_label(psi_plus, g, plus), col));
            }
        }
    }
    for (l, c) in out {
        table.upsert(&l, c)?;
    }
    Ok(())
}

/// Named list of operator columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub name: String,
    pub labels: Vec<String>,
}

impl BasisSet {
    /// Operator library over `table` with [`TARGET_LABEL`] as `y`. Rows are
    /// tagged `(trajectory, row within trajectory)`.
    pub fn library(&self, table: &Table) -> Result<OperatorLibrary> {
        let y = table
            .column(TARGET_LABEL)
            .map_err(|_| Error::Data(format!("missing target column '{TARGET_LABEL}'")))?;
        let n = table.nrows();
        let mut chi = DMatrix::zeros(n, self.labels.len());
        for (j, l) in self.labels.iter().enumerate() {
            let c = table.column(l).map_err(|_| Error::Data(format!("basis {}: missing column '{l}'", self.name)))?;
            chi.set_column(j, &DVector::from_column_slice(c));
        }
        let mut dof_map = vec![(0, 0); n];
        if table.has("trajectory") {
            for r in trajectory_ranges(table)? {
                let id = table.column("trajectory")?[r.start] as usize;
                for (i, row) in r.enumerate() {
                    dof_map[row] = (id, i);
                }
            }
        } else {
            for (i, d) in dof_map.iter_mut().enumerate() {
                *d = (0, i);
            }
        }
        Ok(OperatorLibrary { y: DVector::from_column_slice(y), chi, labels: self.labels.clone(), dof_map })
    }
}

/// B1 (derivatives of `Ψ₊`), B2 (plus derivatives of `Ψ`) and B3 (plus the
/// raw observables). Adds the target column when it is missing.
pub fn build_basis_sets(table: &mut Table) -> Result<(BasisSet, BasisSet, BasisSet)> {
    if !table.has(TARGET_LABEL) {
        time_derivative(table)?;
    }
    let per = |psi_plus: bool| -> Vec<String> {
        (0..G_LABELS.len()).flat_map(|g| [derivative_label(psi_plus, g, true), derivative_label(psi_plus, g, false)]).collect()
    };
    let b1 = per(true);
    let mut b2 = b1.clone();
    b2.extend(per(false));
    let mut b3 = b2.clone();
    b3.extend(observable_labels());
    for l in &b3 {
        if !table.has(l) {
            return Err(Error::Data(format!("missing column '{l}'")));
        }
    }
    Ok((
        BasisSet { name: "B1".into(), labels: b1 },
        BasisSet { name: "B2".into(), labels: b2 },
        BasisSet { name: "B3".into(), labels: b3 },
    ))
}

/// Stepwise regression of [`TARGET_LABEL`] on `basis`, pooling all rows.
pub fn identify_reduced_model(table: &Table, basis: &BasisSet, config: &StepwiseConfig) -> Result<RegressionTrace> {
    if basis.labels.len() < 2 {
        return Err(Error::Data(format!("basis {} needs at least two operators", basis.name)));
    }
    stepwise_eliminate(&basis.library(table)?, config)
}

/// The last `last` iterations in the layout `iteration, n_terms, loss,
/// <coefficient per label>`; labels are those active at the first listed
/// iteration, zero once dropped. Iterations count from 1 (full model).
pub fn table1_csv(trace: &RegressionTrace, last: usize) -> String {
    let start = trace.steps.len().saturating_sub(last);
    let mut out = String::from("iteration,n_terms,loss");
    let Some(first) = trace.steps.get(start) else {
        out.push('\n');
        return out;
    };
    for l in &first.labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, s) in trace.steps.iter().enumerate().skip(start) {
        out.push_str(&format!("{},{},{}", i + 1, s.labels.len(), fmt_f64(s.loss)));
        for l in &first.labels {
            let c = s.labels.iter().position(|x| x == l).map_or(0.0, |p| s.coefficients[p]);
            out.push(',');
            out.push_str(&fmt_f64(c));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn synthetic(trajectories: usize, times: usize, seed: u64) -> Table {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels = observable_labels();
        let mut t = Table::new();
        let n = trajectories * times;
        t.push("trajectory", (0..n).map(|r| (r / times) as f64).collect()).unwrap();
        t.push("t", (0..n).map(|r| 0.1 * (r % times) as f64).collect()).unwrap();
        for l in &labels {
            t.push(l, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        }
        let plus = t.column("phi_phi+").unwrap().to_vec();
        t.push("Psi", plus.iter().map(|v| 2.0 * v).collect()).unwrap();
        t.push("Psi+", vec![3.5; n]).unwrap();
        t
    }

    #[test]
    fn linear_and_constant_states() {
        let mut t = synthetic(30, 3, 1);
        functional_derivatives(&mut t, None).unwrap();
        for v in t.column("dPsi/dphi_phi+").unwrap() {
            assert!((v - 2.0).abs() < 1e-6);
        }
        for g in 0..G_LABELS.len() {
            for plus in [true, false] {
                assert!(t.column(&derivative_label(true, g, plus)).unwrap().iter().all(|v| v.abs() < 1e-6));
            }
        }
        assert!(t.has("dPsi+/dphi_f'(phi)+"));
    }

    #[test]
    fn too_few_trajectories() {
        let mut t = synthetic(4, 3, 2);
        assert!(matches!(functional_derivatives(&mut t, None), Err(Error::Rank(m)) if m.contains("more trajectories")));
    }

    #[test]
    fn time_derivative_exact_on_quadratics() {
        let mut t = Table::new();
        let times: Vec<f64> = (0..5).map(|i| 0.3 * i as f64 + 0.1 * (i * i) as f64).collect();
        t.push("trajectory", vec![0.0; 5]).unwrap();
        t.push("t", times.clone()).unwrap();
        t.push("phi_phi+", times.iter().map(|x| 3.0 * x * x - x + 2.0).collect()).unwrap();
        time_derivative(&mut t).unwrap();
        for (d, x) in t.column(TARGET_LABEL).unwrap().iter().zip(&times) {
            assert!((d - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_sizes_and_nesting() {
        let mut t = synthetic(12, 3, 3);
        functional_derivatives(&mut t, None).unwrap();
        let (b1, b2, b3) = build_basis_sets(&mut t).unwrap();
        assert_eq!((b1.labels.len(), b2.labels.len(), b3.labels.len()), (18, 36, 54));
        assert!(b1.labels.iter().all(|l| b2.labels.contains(l)));
        assert!(b2.labels.iter().all(|l| b3.labels.contains(l)));
        let mut bare = synthetic(12, 3, 3);
        assert!(matches!(build_basis_sets(&mut bare), Err(Error::Data(_))));
    }

    #[test]
    fn exact_three_column_recovery() {
        let mut t = synthetic(10, 4, 5);
        functional_derivatives(&mut t, None).unwrap();
        let a = t.column("phi_phi^2-").unwrap().to_vec();
        let b = t.column("phi_f(phi)+").unwrap().to_vec();
        let c = t.column("phi_Lap(phi)-").unwrap().to_vec();
        t.upsert(TARGET_LABEL, (0..t.nrows()).map(|i| 0.5 * a[i] - 2.0 * b[i] + 1.5 * c[i]).collect()).unwrap();
        let basis = BasisSet {
            name: "test".into(),
            labels: vec!["phi_phi^2-".into(), "phi_phi+".into(), "phi_f(phi)+".into(), "phi_phi^5-".into(), "phi_Lap(phi)-".into()],
        };
        let cfg = StepwiseConfig { regression_method: crate::sysid::RegressionMethod::Ols, ..StepwiseConfig::default() };
        let tr = identify_reduced_model(&t, &basis, &cfg).unwrap();
        let m = tr.model();
        assert_eq!(m.labels, vec!["phi_phi^2-", "phi_f(phi)+", "phi_Lap(phi)-"]);
        for (got, want) in m.coefficients.iter().zip([0.5, -2.0, 1.5]) {
            assert!((got - want).abs() < 1e-8);
        }
        let csv = table1_csv(&tr, 5);
        assert!(csv.starts_with("iteration,n_terms,loss,"));
    }
}
