use matml::io::Table;
use matml::observables::{
    build_basis_sets, ensemble_observables, functional_derivatives, identify_reduced_model, run_ensemble, table1_csv,
};
use matml::sysid::config_from_ini;

use super::dns::allen_cahn_from;
use super::seed_or;
use crate::config::{load_config, Section};
use crate::{emit_plot_data, CliError, CliResult, Common, Outcome};

const ENSEMBLE_KEYS: &[&str] = &["trajectories", "neighbors", "table_rows"];

pub fn run(common: &Common) -> CliResult<Outcome> {
    let (mut ini, config_path) = load_config(common, &["AllenCahn", "Ensemble", "VSI", "StepwiseRegression"])?;
    if ini.get("StepwiseRegression", "full_path").is_none() {
        ini.set("StepwiseRegression", "full_path", "true");
    }
    let (mut params, init) = allen_cahn_from(&ini)?;
    if ini.get("AllenCahn", "save_every").is_none() {
        params.save_every = 10;
    }
    let ens = Section::new(&ini, "Ensemble", ENSEMBLE_KEYS)?;
    let n = ens.usize("trajectories", 100)?;
    let k = ens.ini.get_usize("Ensemble", "neighbors")?;
    let rows = ens.usize("table_rows", 5)?;
    let cfg = config_from_ini(&ini)?;
    let seed = seed_or(common, 0);

    let series = run_ensemble(&params, &init, n, seed)?;
    let mut table = ensemble_observables(&series, params.lambda)?;
    functional_derivatives(&mut table, k)?;
    let (b1, b2, b3) = build_basis_sets(&mut table)?;

    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    let mut out = Outcome {
        config: ini.to_text(),
        seeds: vec![("ensemble".into(), seed)],
        inputs: config_path.into_iter().collect(),
        ..Outcome::default()
    };
    out.outputs.extend(emit_plot_data(&table, &dir.join("observables.csv"), false)?);
    for b in [&b1, &b2, &b3] {
        let trace = identify_reduced_model(&table, b, &cfg)?;
        let t1 = dir.join(format!("table1_{}.csv", b.name));
        std::fs::write(&t1, table1_csv(&trace, rows)).map_err(|e| CliError::from(e).at(&t1))?;
        let tr = dir.join(format!("trace_{}.csv", b.name));
        trace.write_trace_csv(&tr)?;
        let mut loss = Table::new();
        loss.push("iteration", (1..=trace.steps.len()).map(|i| i as f64).collect())?;
        loss.push("n_terms", trace.steps.iter().map(|s| s.labels.len() as f64).collect())?;
        loss.push("loss", trace.steps.iter().map(|s| s.loss).collect())?;
        out.outputs.extend([t1, tr]);
        out.outputs.extend(emit_plot_data(&loss, &dir.join(format!("loss_{}.csv", b.name)), common.gnuplot)?);
        out.summary.push((format!("{}_identified", b.name), trace.retained_labels().join(" ")));
    }
    Ok(out)
}
