use matml::active_learning::{main_workflow, synthetic_oracle, ActiveLearningConfig};
use matml::io::Table;

use super::seed_or;
use crate::config::load_config;
use crate::{CliError, CliResult, Common, Outcome};

pub fn run(common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &["ActiveLearning"])?;
    let mut cfg = ActiveLearningConfig::from_ini(&ini)?;
    cfg.seed = seed_or(common, cfg.seed);
    let dir = &common.out_dir;
    let oracle = synthetic_oracle();
    let state = main_workflow(&oracle, &cfg, Some(dir)).map_err(|e| CliError::from(e).at(dir))?;
    let mut outputs = Vec::new();
    for r in 0..cfg.rounds {
        outputs.push(dir.join(format!("slice_round_{r:02}.csv")));
    }
    for f in ["rounds.csv", "samples.csv", "search.csv", "idnn.txt"] {
        let p = dir.join(f);
        if p.is_file() {
            outputs.push(p);
        }
    }
    if common.gnuplot {
        for r in 0..cfg.rounds {
            let p = dir.join(format!("slice_round_{r:02}.csv"));
            let dat = p.with_extension("dat");
            let t = Table::read_csv(&p).map_err(|e| CliError::from(e).at(&p))?;
            let f = std::fs::File::create(&dat).map_err(|e| CliError::from(e).at(&dat))?;
            t.to_gnuplot(std::io::BufWriter::new(f))?;
            outputs.push(dat);
        }
    }
    let last = state.logs.last();
    Ok(Outcome {
        config: ini.to_text(),
        seeds: vec![("workflow".into(), cfg.seed)],
        inputs: config_path.into_iter().collect(),
        outputs,
        summary: vec![
            ("samples".into(), state.samples.len().to_string()),
            ("wells_convex".into(), last.map_or(0, |l| l.wells_convex).to_string()),
            ("hidden".into(), format!("{:?}", state.idnn.hidden_widths())),
        ],
    })
}
