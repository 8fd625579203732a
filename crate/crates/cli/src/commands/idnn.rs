use std::path::Path;

use matml::io::{Ini, Table};
use matml::nn::{
    is_convex, train_idnn, Activation, Idnn, LossWeights, Optimizer, TrainConfig, TrainingData, Transform, TransformLayer,
};

use super::seed_or;
use crate::config::{load_config, Section};
use crate::{emit_plot_data, read_table, CliError, CliResult, Common, Outcome};

const NET_KEYS: &[&str] = &["hidden", "activation", "transforms"];
const TRAIN_KEYS: &[&str] =
    &["epochs", "batch_size", "learning_rate", "lr_decay", "optimizer", "value_weight", "gradient_weight", "hessian_weight"];
const SCAN_KEYS: &[&str] = &["lower", "upper", "resolution"];

/// Columns `x_1..x_d` in order.
fn points(t: &Table, path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let d = (1..).take_while(|k| t.has(&format!("x_{k}"))).count();
    if d == 0 {
        return Err(CliError::Failure(format!("{}: no x_1 column", path.display())));
    }
    let cols: Vec<&[f64]> = (1..=d).map(|k| t.column(&format!("x_{k}"))).collect::<matml::Result<_>>()?;
    Ok((0..t.nrows()).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
}

fn transforms(spec: &str, dim: usize) -> CliResult<TransformLayer> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (kind, idx) = item
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("transform '{item}' is not kind:index")))?;
        let i: usize = idx.trim().parse().map_err(|_| CliError::Usage(format!("bad transform index in '{item}'")))?;
        out.push(match kind.trim() {
            "identity" => Transform::identity(i),
            "square" => Transform::square(i),
            k => return Err(CliError::Usage(format!("unknown transform '{k}' (identity or square)"))),
        });
    }
    Ok(TransformLayer::new(dim, out)?)
}

fn train_config(ini: &Ini, seed: u64) -> CliResult<TrainConfig> {
    let s = Section::new(ini, "Training", TRAIN_KEYS)?;
    let d = TrainConfig::default();
    let optimizer = match s.str("optimizer", "rmsprop").as_str() {
        "rmsprop" => Optimizer::rmsprop(),
        "sgd" => Optimizer::Sgd,
        v => return Err(CliError::Usage(format!("unknown optimizer '{v}' (rmsprop or sgd)"))),
    };
    let c = TrainConfig {
        learning_rate: s.f64("learning_rate", d.learning_rate)?,
        epochs: s.usize("epochs", d.epochs)?,
        batch_size: s.usize("batch_size", d.batch_size)?,
        optimizer,
        seed,
        weights: LossWeights {
            value: s.f64("value_weight", d.weights.value)?,
            gradient: s.f64("gradient_weight", d.weights.gradient)?,
            hessian: s.f64("hessian_weight", d.weights.hessian)?,
        },
        lr_decay: s.f64("lr_decay", d.lr_decay)?,
    };
    c.validate()?;
    Ok(c)
}

pub fn train(data: &Path, common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &["IDNN", "Training"])?;
    let seed = seed_or(common, 0);
    let table = read_table(data)?;
    let x = points(&table, data)?;
    let dim = x[0].len();
    let values = if table.has("y") { Some(table.column("y")?.to_vec()) } else { None };
    let gradients = if table.has("dy_1") {
        let cols: Vec<&[f64]> = (1..=dim).map(|k| table.column(&format!("dy_{k}"))).collect::<matml::Result<_>>()?;
        Some((0..table.nrows()).map(|r| cols.iter().map(|c| c[r]).collect()).collect())
    } else {
        None
    };
    if values.is_none() && gradients.is_none() {
        return Err(CliError::Failure(format!("{}: needs a y column or dy_1..dy_{dim} columns", data.display())));
    }
    let net = Section::new(&ini, "IDNN", NET_KEYS)?;
    let hidden = net.usize_list("hidden")?.unwrap_or_else(|| vec![20, 20]);
    let activation = Activation::from_name(&net.str("activation", "softplus"))?;
    let idnn = match ini.get_str("IDNN", "transforms") {
        Some(spec) => Idnn::with_transforms(transforms(spec, dim)?, &hidden, activation, seed)?,
        None => Idnn::new(dim, &hidden, activation, seed)?,
    };
    let cfg = train_config(&ini, seed)?;
    let td = TrainingData { points: x, values, gradients, hessians: None };
    let report = train_idnn(&idnn, &td, &cfg).map_err(|e| CliError::from(e).at(data))?;

    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    let model = dir.join("idnn.txt");
    idnn.save(&model).map_err(|e| CliError::from(e).at(&model))?;
    let mut loss = Table::new();
    loss.push("epoch", (1..=report.epoch_loss.len()).map(|e| e as f64).collect())?;
    loss.push("loss", report.epoch_loss.clone())?;
    let mut outputs = vec![model];
    outputs.extend(emit_plot_data(&loss, &dir.join("loss.csv"), common.gnuplot)?);
    Ok(Outcome {
        config: ini.to_text(),
        seeds: vec![("init_and_shuffle".into(), seed)],
        inputs: config_path.into_iter().chain([data.to_path_buf()]).collect(),
        outputs,
        summary: vec![("final_loss".into(), report.final_loss().map(matml::io::fmt_f64).unwrap_or_default())],
    })
}

fn load_model(path: &Path) -> CliResult<Idnn> {
    if !path.is_file() {
        return Err(CliError::Failure(format!("{}: no such file", path.display())));
    }
    Idnn::load(path).map_err(|e| CliError::from(e).at(path))
}

fn with_points(x: &[Vec<f64>]) -> CliResult<Table> {
    let mut t = Table::new();
    for k in 0..x.first().map_or(0, Vec::len) {
        t.push(&format!("x_{}", k + 1), x.iter().map(|p| p[k]).collect())?;
    }
    Ok(t)
}

fn check_dim(idnn: &Idnn, x: &[Vec<f64>], path: &Path) -> CliResult<()> {
    match x.first() {
        Some(p) if p.len() != idnn.input_dim() => Err(CliError::Failure(format!(
            "{}: {} coordinates, the network takes {}",
            path.display(),
            p.len(),
            idnn.input_dim()
        ))),
        _ => Ok(()),
    }
}

pub fn eval(model: &Path, pts: &Path, common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &[])?;
    let idnn = load_model(model)?;
    let x = points(&read_table(pts)?, pts)?;
    check_dim(&idnn, &x, pts)?;
    let mut t = with_points(&x)?;
    t.push("f", idnn.values(&x)?)?;
    let g = idnn.gradients(&x)?;
    for k in 0..idnn.input_dim() {
        t.push(&format!("dy_{}", k + 1), g.iter().map(|r| r[k]).collect())?;
    }
    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    Ok(Outcome {
        config: ini.to_text(),
        inputs: config_path.into_iter().chain([model.to_path_buf(), pts.to_path_buf()]).collect(),
        outputs: emit_plot_data(&t, &dir.join("eval.csv"), common.gnuplot)?,
        ..Outcome::default()
    })
}

/// Tensor grid from `[Scan]`: `lower`, `upper` (one value per input) and
/// `resolution` points per axis.
fn grid(ini: &Ini, dim: usize) -> CliResult<Vec<Vec<f64>>> {
    let s = Section::new(ini, "Scan", SCAN_KEYS)?;
    let lower = s.f64_list("lower")?.unwrap_or_else(|| vec![-1.0; dim]);
    let upper = s.f64_list("upper")?.unwrap_or_else(|| vec![1.0; dim]);
    let n = s.usize("resolution", 10)?;
    if lower.len() != dim || upper.len() != dim || n < 2 {
        return Err(CliError::Usage(format!("[Scan] needs {dim} lower and upper bounds and resolution >= 2")));
    }
    let total = n.checked_pow(dim as u32).filter(|t| *t <= 10_000_000).ok_or_else(|| {
        CliError::Usage(format!("scan grid of {n}^{dim} points is too large"))
    })?;
    Ok((0..total)
        .map(|mut i| {
            (0..dim)
                .map(|k| {
                    let j = i % n;
                    i /= n;
                    lower[k] + (upper[k] - lower[k]) * j as f64 / (n - 1) as f64
                })
                .collect()
        })
        .collect())
}

pub fn scan(model: &Path, pts: Option<&Path>, common: &Common) -> CliResult<Outcome> {
    let (ini, config_path) = load_config(common, &["Scan"])?;
    let idnn = load_model(model)?;
    let mut inputs: Vec<_> = config_path.into_iter().chain([model.to_path_buf()]).collect();
    let x = match pts {
        Some(p) => {
            let x = points(&read_table(p)?, p)?;
            check_dim(&idnn, &x, p)?;
            inputs.push(p.to_path_buf());
            x
        }
        None => grid(&ini, idnn.input_dim())?,
    };
    let flags = is_convex(&idnn, &x)?;
    let min_eig: Vec<f64> = idnn
        .hessians(&x)?
        .into_iter()
        .map(|h| h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut t = with_points(&x)?;
    t.push("convex", flags.iter().map(|f| f64::from(u8::from(*f))).collect())?;
    t.push("min_eigenvalue", min_eig)?;
    let dir = &common.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
    Ok(Outcome {
        config: ini.to_text(),
        inputs,
        outputs: emit_plot_data(&t, &dir.join("convexity.csv"), common.gnuplot)?,
        summary: vec![("convex_points".into(), flags.iter().filter(|f| **f).count().to_string())],
        ..Outcome::default()
    })
}
