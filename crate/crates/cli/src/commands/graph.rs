use std::path::Path;

use matml::graph_calculus::GraphSettings;

use crate::config::load_config;
use crate::{emit_plot_data, read_table, CliError, CliResult, Common, Outcome};

/// Without `--input` the settings' own load path is used; the result is
/// always written to `<out-dir>/data.csv`.
pub fn run(input: Option<&Path>, common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &[])?;
    let settings = GraphSettings::from_ini(&ini)?;
    let input = input.map(Path::to_path_buf).unwrap_or_else(|| settings.input_path());
    let table = read_table(&input)?;
    let result = settings.apply(table).map_err(|e| CliError::from(e).at(&input))?;
    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    Ok(Outcome {
        config: ini.to_text(),
        inputs: config_path.into_iter().chain([input]).collect(),
        outputs: emit_plot_data(&result, &dir.join("data.csv"), common.gnuplot)?,
        ..Outcome::default()
    })
}
