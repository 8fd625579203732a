//! Global observables of 1D Allen-Cahn trajectories and reduced-order
//! models for their kinetics.
//!
//! Phase averages `φ_{g±} = (1/|Ω|) ∫ g(φ) I(±φ) dΩ` are computed for
//! every `g` in [`G_LABELS`]. The positive phase is `φ ≥ 0`, the negative
//! phase its complement `φ < 0`.

mod basis;

pub use basis::{
    build_basis_sets, derivative_label, ensemble_observables, functional_derivatives, identify_reduced_model,
    run_ensemble, table1_csv, time_derivative, BasisSet, TARGET_LABEL,
};

use crate::dns::FieldSeries;
use crate::error::{Error, Result};
use crate::grid_fem::{gauss_rule, shape_eval};
use crate::io::Table;

/// The functions `g(φ)`, in column order.
pub const G_LABELS: [&str; 9] = ["phi", "phi^2", "phi^3", "phi^4", "phi^5", "f(phi)", "f'(phi)", "Lap(phi)", "|grad(phi)|^2"];

/// `phi_<g>+` or `phi_<g>-`.
pub fn observable_label(g: usize, plus: bool) -> String {
    format!("phi_{}{}", G_LABELS[g], if plus { '+' } else { '-' })
}

/// All 18 observable labels: for each `g`, the `+` then the `-` phase.
pub fn observable_labels() -> Vec<String> {
    (0..G_LABELS.len()).flat_map(|g| [observable_label(g, true), observable_label(g, false)]).collect()
}

fn double_well(phi: f64) -> (f64, f64) {
    let p2 = phi * phi;
    ((p2 - 1.0) * (p2 - 1.0), 4.0 * phi * p2 - 4.0 * phi)
}

/// Per-snapshot integrals: 18 phase averages, `Ψ` and `Ψ₊`.
fn snapshot_observables(series: &FieldSeries, phi: &[f64], lambda: f64) -> Result<(Vec<f64>, f64, f64)> {
    let mesh = &series.mesh;
    let shape = shape_eval(mesh, &gauss_rule(3, 1)?)?;
    let n = mesh.node_count();
    // weak Laplacian: -(Kφ)_a / m_a with the row-sum lumped mass
    let mut kphi = vec![0.0; n];
    let mut mass = vec![0.0; n];
    for e in 0..mesh.element_count() {
        let nodes = mesh.element_nodes(e);
        let local: Vec<f64> = nodes.iter().map(|&a| phi[a]).collect();
        for q in 0..shape.n_points() {
            let gq = shape.interp_grad(q, &local)[0];
            for (i, &a) in nodes.iter().enumerate() {
                kphi[a] += shape.jxw[q] * shape.grad(q, i)[0] * gq;
                mass[a] += shape.jxw[q] * shape.value(q, i);
            }
        }
    }
    let lap: Vec<f64> = kphi.iter().zip(&mass).map(|(k, m)| -k / m).collect();

    let mut acc = vec![0.0; 2 * G_LABELS.len()];
    let (mut psi, mut psi_plus) = (0.0, 0.0);
    for e in 0..mesh.element_count() {
        let nodes = mesh.element_nodes(e);
        let local: Vec<f64> = nodes.iter().map(|&a| phi[a]).collect();
        let local_lap: Vec<f64> = nodes.iter().map(|&a| lap[a]).collect();
        for q in 0..shape.n_points() {
            let w = shape.jxw[q];
            let p = shape.interp(q, &local);
            let grad = shape.interp_grad(q, &local)[0];
            let (f, fp) = double_well(p);
            let g = [p, p * p, p * p * p, p * p * p * p, p * p * p * p * p, f, fp, shape.interp(q, &local_lap), grad * grad];
            let plus = p >= 0.0;
            let off = if plus { 0 } else { 1 };
            for (k, gk) in g.iter().enumerate() {
                acc[2 * k + off] += w * gk;
            }
            let dens = f + 0.5 * lambda * grad * grad;
            psi += w * dens;
            if plus {
                psi_plus += w * dens;
            }
        }
    }
    let vol = mesh.domain_volume();
    Ok((acc.iter().map(|v| v / vol).collect(), psi, psi_plus))
}

fn check_1d(series: &FieldSeries, lambda: f64) -> Result<()> {
    if series.mesh.dim() != 1 {
        return Err(Error::Capability(format!("observables need a 1D series, got {}D", series.mesh.dim())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Data(format!("gradient energy coefficient must be non-negative, got {lambda}")));
    }
    Ok(())
}

/// Table with `t`, the 18 phase averages, `Psi` and `Psi+` per snapshot.
pub fn phase_averages(series: &FieldSeries, lambda: f64) -> Result<Table> {
    check_1d(series, lambda)?;
    let labels = observable_labels();
    let mut cols = vec![Vec::with_capacity(series.len()); labels.len() + 2];
    for snap in &series.snapshots {
        let (obs, psi, psi_plus) = snapshot_observables(series, snap, lambda)?;
        for (c, v) in cols.iter_mut().zip(obs.iter().chain([&psi, &psi_plus])) {
            c.push(*v);
        }
    }
    let mut t = Table::new();
    t.push("t", series.times.clone())?;
    let mut it = cols.into_iter();
    for l in &labels {
        t.push(l, it.next().unwrap())?;
    }
    t.push("Psi", it.next().unwrap())?;
    t.push("Psi+", it.next().unwrap())?;
    Ok(t)
}

/// `Ψ(t) = ∫ f(φ) + (λ/2)|∇φ|² dΩ` and the same restricted to `φ ≥ 0`.
pub fn total_energy(series: &FieldSeries, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_1d(series, lambda)?;
    let mut psi = Vec::with_capacity(series.len());
    let mut plus = Vec::with_capacity(series.len());
    for snap in &series.snapshots {
        let (_, a, b) = snapshot_observables(series, snap, lambda)?;
        psi.push(a);
        plus.push(b);
    }
    Ok((psi, plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::StructuredMesh;

    fn series(n: usize, length: f64, f: impl Fn(f64) -> f64) -> FieldSeries {
        let mesh = StructuredMesh::line(n, length).unwrap();
        let vals = (0..n).map(|i| f(mesh.node_coords(i)[0])).collect();
        let mut s = FieldSeries::new(mesh, "phi");
        s.push(0.0, vals).unwrap();
        s
    }

    fn col(t: &Table, name: &str) -> f64 {
        t.column(name).unwrap()[0]
    }

    #[test]
    fn uniform_wells() {
        let t = phase_averages(&series(11, 2.0, |_| 1.0), 1.0).unwrap();
        assert!((col(&t, "phi_phi+") - 1.0).abs() < 1e-14);
        assert_eq!(col(&t, "phi_f(phi)+"), 0.0);
        for l in observable_labels().iter().filter(|l| l.ends_with('-')) {
            assert_eq!(col(&t, l), 0.0, "{l}");
        }
        assert_eq!(col(&t, "Psi"), 0.0);

        let t = phase_averages(&series(11, 2.0, |_| -1.0), 1.0).unwrap();
        assert!((col(&t, "phi_phi-") + 1.0).abs() < 1e-14);
        for l in observable_labels().iter().filter(|l| l.ends_with('+')) {
            assert_eq!(col(&t, l), 0.0, "{l}");
        }
        assert_eq!(col(&t, "Psi"), 0.0);
    }

    #[test]
    fn ramp_energy_closed_form() {
        let (psi, plus) = total_energy(&series(21, 1.0, |x| x), 1.0).unwrap();
        assert!((psi[0] - (8.0 / 15.0 + 0.5)).abs() < 1e-13);
        assert!((plus[0] - psi[0]).abs() < 1e-15);
    }

    #[test]
    fn half_domain_interface() {
        let (l, d) = (20.0, 0.5f64.sqrt());
        let t = phase_averages(&series(401, l, |x| ((x - l / 2.0) / d).tanh()), 1.0).unwrap();
        // (1/L) ∫_{L/2}^{L} tanh((x - L/2)/δ) dx = (δ/L) ln cosh(L/(2δ))
        let exact = d / l * (l / (2.0 * d)).cosh().ln();
        assert!((col(&t, "phi_phi+") - exact).abs() < 1e-4);
        assert!((col(&t, "phi_phi+") - 0.5).abs() < 2.0 * d / l);
    }

    #[test]
    fn indicator_identity_and_laplacian_balance() {
        let t = phase_averages(&series(64, 10.0, |x| 0.8 * (0.9 * x).sin() + 0.1 * (2.3 * x).cos()), 1.0).unwrap();
        for s in ['+', '-'] {
            let fp = col(&t, &format!("phi_f'(phi){s}"));
            let rhs = 4.0 * col(&t, &format!("phi_phi^3{s}")) - 4.0 * col(&t, &format!("phi_phi{s}"));
            assert!((fp - rhs).abs() < 1e-12);
        }
        assert!((col(&t, "phi_Lap(phi)+") + col(&t, "phi_Lap(phi)-")).abs() < 1e-12);
        assert!(col(&t, "phi_phi^2+") >= 0.0 && col(&t, "phi_phi^4+") >= 0.0 && col(&t, "Psi") >= 0.0);
    }

    #[test]
    fn rejects_2d() {
        let mesh = StructuredMesh::rectangle(3, 3, 1.0, 1.0).unwrap();
        let mut s = FieldSeries::new(mesh, "phi");
        s.push(0.0, vec![0.0; 9]).unwrap();
        assert!(matches!(phase_averages(&s, 1.0), Err(Error::Capability(_))));
    }
}
