use std::path::PathBuf;

use matml::dns::*;
use matml::grid_fem::{BoundaryMask, StructuredMesh};
use matml::io::Table;
use matml::observables::total_energy;
use matml::weak_operators::{pool_time_samples, schnakenberg_library, WeakForm};

use super::seed_or;
use crate::config::{load_config, Section};
use crate::{emit_plot_data, CliError, CliResult, Common, Outcome, Solver};

const AC_KEYS: &[&str] = &[
    "mobility", "lambda", "dt", "steps", "nodes", "length", "save_every", "newton_tol", "newton_max_iter", "init", "modes",
    "amplitude", "max_kinks",
];

const SCH_KEYS: &[&str] = &[
    "d11", "d12", "d21", "d22", "r10", "r11", "r12", "r13", "r20", "r21", "r22", "r23", "dt", "steps", "nodes", "side",
    "scheme", "save_every", "save_pairs", "steady_tol", "amplitude", "library",
];

const STEADY_KEYS: &[&str] = &["nodes", "side", "diffusivity", "left", "right", "top_flux", "bottom_flux"];

/// `[AllenCahn]` parameters and initial condition.
pub(crate) fn allen_cahn_from(ini: &matml::io::Ini) -> CliResult<(AllenCahnParams, AllenCahnInit)> {
    let s = Section::new(ini, "AllenCahn", AC_KEYS)?;
    let d = AllenCahnParams::default();
    let p = AllenCahnParams {
        mobility: s.f64("mobility", d.mobility)?,
        lambda: s.f64("lambda", d.lambda)?,
        dt: s.f64("dt", d.dt)?,
        steps: s.usize("steps", d.steps)?,
        nodes: s.usize("nodes", d.nodes)?,
        length: s.f64("length", d.length)?,
        save_every: s.usize("save_every", d.save_every)?,
        newton_tol: s.f64("newton_tol", d.newton_tol)?,
        newton_max_iter: s.usize("newton_max_iter", d.newton_max_iter)?,
    };
    let init = match s.str("init", "cosine").as_str() {
        "cosine" => match AllenCahnInit::default() {
            AllenCahnInit::CosineSeries { modes, amplitude } => AllenCahnInit::CosineSeries {
                modes: s.usize("modes", modes)?,
                amplitude: s.f64("amplitude", amplitude)?,
            },
            other => other,
        },
        "kinks" => AllenCahnInit::Kinks { max_kinks: s.usize("max_kinks", 3)? },
        v => return Err(CliError::Usage(format!("unknown AllenCahn init '{v}' (cosine or kinks)"))),
    };
    Ok((p, init))
}

fn schnakenberg_from(ini: &matml::io::Ini) -> CliResult<(SchnakenbergParams, f64, bool)> {
    let s = Section::new(ini, "Schnakenberg", SCH_KEYS)?;
    let mut p = SchnakenbergParams::default();
    for a in 0..2 {
        for b in 0..2 {
            p.d[a][b] = s.f64(&format!("d{}{}", a + 1, b + 1), p.d[a][b])?;
        }
        for k in 0..4 {
            p.r[a][k] = s.f64(&format!("r{}{k}", a + 1), p.r[a][k])?;
        }
    }
    p.dt = s.f64("dt", p.dt)?;
    p.steps = s.usize("steps", p.steps)?;
    if let Some(n) = s.usize_list("nodes")? {
        p.nodes = match n.as_slice() {
            [a] => [*a, *a],
            [a, b] => [*a, *b],
            _ => return Err(CliError::Usage("Schnakenberg nodes takes one or two integers".into())),
        };
    }
    p.side = s.f64("side", p.side)?;
    p.scheme = match s.str("scheme", "semi-implicit").as_str() {
        "semi-implicit" => TimeScheme::SemiImplicit,
        "backward-euler" => TimeScheme::BackwardEuler,
        v => return Err(CliError::Usage(format!("unknown scheme '{v}' (semi-implicit or backward-euler)"))),
    };
    p.save_every = s.usize("save_every", p.save_every)?;
    p.save_pairs = s.bool("save_pairs", p.save_pairs)?;
    p.steady_tol = s.opt_f64("steady_tol")?;
    Ok((p, s.f64("amplitude", 0.05)?, s.bool("library", false)?))
}

pub fn run(solver: Solver, common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &["AllenCahn", "Schnakenberg", "SteadyDiffusion"])?;
    let seed = seed_or(common, 0);
    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    let mut out = Outcome {
        config: ini.to_text(),
        seeds: vec![("initial_condition".into(), seed)],
        inputs: config_path.into_iter().collect(),
        ..Outcome::default()
    };
    match solver {
        Solver::AllenCahn => {
            let (p, init) = allen_cahn_from(&ini)?;
            let mesh = p.mesh()?;
            let phi0 = allen_cahn_initial(&mesh, p.lambda, &init, seed);
            let s = solve_allen_cahn_1d(&p, &phi0)?;
            out.outputs.extend(s.write_dir(dir)?);
            let (psi, psi_plus) = total_energy(&s, p.lambda)?;
            let mut t = Table::new();
            t.push("t", s.times.clone())?;
            t.push("Psi", psi)?;
            t.push("Psi+", psi_plus)?;
            out.outputs.extend(emit_plot_data(&t, &dir.join("energy.csv"), common.gnuplot)?);
            out.summary = s.meta.clone();
        }
        Solver::Schnakenberg => {
            let (p, amplitude, library) = schnakenberg_from(&ini)?;
            let (c1, c2) = schnakenberg_initial(&p, amplitude, seed)?;
            let (s1, s2) = solve_schnakenberg_2d(&p, &c1, &c2)?;
            out.outputs.extend(s1.write_dir(dir)?);
            out.outputs.extend(s2.write_dir(dir)?);
            if library {
                out.outputs.extend(write_libraries(&p, &s1, &s2, dir)?);
            }
            out.summary = s1.meta.clone();
        }
        Solver::SteadyDiffusion => {
            let s = Section::new(&ini, "SteadyDiffusion", STEADY_KEYS)?;
            let n = s.usize("nodes", 33)?;
            let side = s.f64("side", 1.0)?;
            let mesh = StructuredMesh::rectangle(n, n, side, side)?;
            let mask = steady_mask(&mesh, &s)?;
            let c = solve_steady_diffusion(&mesh, &mask, s.f64("diffusivity", 1.0)?)?;
            let mut t = Table::new();
            t.push("x", (0..mesh.node_count()).map(|i| mesh.node_coords(i)[0]).collect())?;
            t.push("y", (0..mesh.node_count()).map(|i| mesh.node_coords(i)[1]).collect())?;
            t.push("c", c)?;
            out.outputs.extend(emit_plot_data(&t, &dir.join("solution.csv"), common.gnuplot)?);
        }
    }
    Ok(out)
}

/// Dirichlet on the left (and optionally right) edge, Neumann flux on the
/// top and bottom edges, no flux elsewhere.
fn steady_mask(mesh: &StructuredMesh, s: &Section) -> CliResult<BoundaryMask> {
    let n = mesh.node_count();
    let side = mesh.nodes_per_axis();
    let h = mesh.spacing();
    let (nx, ny) = (side[0], side[1]);
    let left = s.f64("left", 1.0)?;
    let right = s.opt_f64("right")?;
    let top = s.f64("top_flux", 0.0)?;
    let bottom = s.f64("bottom_flux", 0.0)?;
    let mut mask = BoundaryMask::interior(n);
    for i in 0..n {
        let [x, y] = mesh.node_coords(i);
        let (ix, iy) = ((x / h[0]).round() as usize, (y / h[1]).round() as usize);
        if ix == 0 {
            mask.set_dirichlet(i, left);
        } else if ix == nx - 1 && right.is_some() {
            mask.set_dirichlet(i, right.unwrap_or_default());
        } else if iy == 0 && bottom != 0.0 {
            mask.set_neumann(i, bottom);
        } else if iy == ny - 1 && top != 0.0 {
            mask.set_neumann(i, top);
        }
    }
    Ok(mask)
}

/// Pooled weak-form libraries for both species over every saved step whose
/// predecessor is also saved.
fn write_libraries(p: &SchnakenbergParams, s1: &FieldSeries, s2: &FieldSeries, dir: &std::path::Path) -> CliResult<Vec<PathBuf>> {
    let wf = WeakForm::new(&s1.mesh, &BoundaryMask::interior(s1.mesh.node_count()), 3)?;
    let ops = schnakenberg_library();
    let steps: Vec<usize> = (1..s1.len())
        .filter(|&n| {
            let gap = s1.times[n] - s1.times[n - 1];
            (gap - p.dt).abs() <= 1e-9 * p.dt && ((s1.times[n] / p.dt).round() as usize) % p.save_every == 0
        })
        .collect();
    if steps.is_empty() {
        return Err(CliError::Usage("library needs save_pairs = true or save_every = 1".into()));
    }
    let mut paths = Vec::new();
    for target in 0..2 {
        let libs = steps.iter().map(|&n| wf.time_sample(&[s1, s2], target, n, &ops)).collect::<matml::Result<Vec<_>>>()?;
        paths.extend(pool_time_samples(&libs)?.write_dir(&dir.join(format!("library_c{}", target + 1)))?);
    }
    Ok(paths)
}
