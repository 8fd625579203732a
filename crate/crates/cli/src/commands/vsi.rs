use std::path::Path;

use matml::sysid::{config_from_ini, confirmation_test, stepwise_eliminate};
use matml::weak_operators::OperatorLibrary;

use crate::config::load_config;
use crate::{CliError, CliResult, Common, Outcome};

pub fn run(chi: &Path, y: &Path, dof_map: Option<&Path>, confirm: bool, common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &["VSI", "StepwiseRegression"])?;
    let cfg = config_from_ini(&ini)?;
    for p in [Some(y), Some(chi), dof_map].into_iter().flatten() {
        if !p.is_file() {
            return Err(CliError::Failure(format!("{}: no such file", p.display())));
        }
    }
    let lib = OperatorLibrary::read_files(y, chi, dof_map)
        .map_err(|e| CliError::from(e).at(chi))?;
    let trace = stepwise_eliminate(&lib, &cfg)?;
    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    let mut out = Outcome {
        config: ini.to_text(),
        inputs: config_path.into_iter().chain([y.to_path_buf(), chi.to_path_buf()]).chain(dof_map.map(Path::to_path_buf)).collect(),
        ..Outcome::default()
    };
    let trace_path = dir.join("trace.csv");
    let model_path = dir.join("model.csv");
    trace.write_trace_csv(&trace_path)?;
    trace.write_model_csv(&model_path)?;
    out.outputs.extend([trace_path, model_path]);
    out.summary.push(("retained".into(), trace.retained_labels().join(" ")));
    out.summary.push(("rows".into(), trace.n_rows.to_string()));
    if confirm {
        let report = confirmation_test(&lib, &trace, &cfg)?;
        let path = dir.join("confirmation.csv");
        let mut text = String::from("label,max_relative_error,passed\n");
        for c in &report.checks {
            text.push_str(&format!("{},{},{}\n", c.label, matml::io::fmt_f64(c.max_relative_error), u8::from(c.passed)));
        }
        std::fs::write(&path, text).map_err(|e| CliError::from(e).at(&path))?;
        out.outputs.push(path);
        out.summary.push(("confirmed".into(), report.passed().to_string()));
    }
    Ok(out)
}
