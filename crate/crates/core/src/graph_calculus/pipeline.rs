use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::stencil::{nonlocal_partial, DiffOpSpec};
use super::build_graph;
use crate::error::{Error, Result};
use crate::io::{Expr, Ini, IniEntry, Table};

/// A pointwise column expression.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicOp {
    pub expr: Expr,
    pub source: String,
    pub label: String,
}

impl AlgebraicOp {
    /// Accepts plain expressions (`x_1 + x_2`) and the dataframe lambda
    /// form (`lambda df: df['x_1'] + df['x_2']`).
    pub fn parse(source: &str, label: &str) -> Result<AlgebraicOp> {
        let mut s = source.trim();
        if let Some(rest) = s.strip_prefix("lambda") {
            s = rest.split_once(':').map(|(_, b)| b).unwrap_or(rest);
        }
        let cleaned = strip_frame_access(s);
        Ok(AlgebraicOp { expr: Expr::parse(&cleaned)?, source: source.to_string(), label: label.to_string() })
    }
}

/// `df['name']` / `df["name"]` -> `name`.
fn strip_frame_access(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("df[") {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 3..];
        match tail.find(']') {
            Some(end) => {
                out.push_str(tail[..end].trim().trim_matches('\'').trim_matches('"'));
                rest = &tail[end + 1..];
            }
            None => {
                out.push_str(&rest[pos..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Appends (or replaces) column `op.label` evaluated row by row.
pub fn algebraic_op(table: &mut Table, op: &AlgebraicOp) -> Result<()> {
    let vars = op.expr.variables();
    let mut cols = Vec::with_capacity(vars.len());
    for v in &vars {
        if !table.has(v) {
            return Err(Error::Data(format!("expression for '{}' references missing column '{v}'", op.label)));
        }
        cols.push(table.column(v)?.to_vec());
    }
    let values = (0..table.nrows())
        .map(|r| {
            op.expr.eval(&|name: &str| vars.iter().position(|v| v == name).map(|c| cols[c][r]))
        })
        .collect::<Result<Vec<f64>>>()?;
    table.upsert(&op.label, values)
}

/// Settings of the CSV-in/CSV-out pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSettings {
    pub cwd: PathBuf,
    pub directories_load: String,
    pub directories_dump: String,
    pub data_filename: String,
    pub model_order: usize,
    pub model_p: usize,
    pub algebraic_operations: Vec<AlgebraicOp>,
    pub differential_operations: Vec<DiffOpSpec>,
}

const TOP_KEYS: &[&str] = &["cwd", "directories_load", "directories_dump", "data_filename", "model_order", "model_p"];
const ALG_KEYS: &[&str] = &["func", "expr", "labels"];
const DIFF_KEYS: &[&str] =
    &["function", "variable", "weight", "adjacency", "manifold", "accuracy", "dimension", "order", "operation", "k"];

impl GraphSettings {
    /// Parses INI text whose keys flatten the nested settings with dots,
    /// e.g. `differential_operations.0.function = u_3`. Section headers
    /// act as key prefixes.
    pub fn parse(text: &str) -> Result<GraphSettings> {
        Self::from_ini(&Ini::parse(text)?)
    }

    pub fn from_ini(ini: &Ini) -> Result<GraphSettings> {
        let mut top: BTreeMap<String, IniEntry> = BTreeMap::new();
        let mut alg: BTreeMap<Vec<usize>, BTreeMap<String, IniEntry>> = BTreeMap::new();
        let mut diff: BTreeMap<Vec<usize>, BTreeMap<String, IniEntry>> = BTreeMap::new();
        for sec in ini.section_names() {
            for e in ini.entries(sec) {
                let full = if sec.is_empty() { e.key.clone() } else { format!("{sec}.{}", e.key) };
                let parts: Vec<&str> = full.split('.').collect();
                let bad = || Error::Config(format!("line {}: unknown key '{full}'", e.line));
                match parts[0] {
                    "algebraic_operations" | "differential_operations" => {
                        if parts.len() < 3 {
                            return Err(bad());
                        }
                        let idx = parts[1..parts.len() - 1]
                            .iter()
                            .map(|p| p.parse::<usize>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| bad())?;
                        let key = parts[parts.len() - 1];
                        let (map, known) =
                            if parts[0] == "algebraic_operations" { (&mut alg, ALG_KEYS) } else { (&mut diff, DIFF_KEYS) };
                        if !known.contains(&key) {
                            return Err(bad());
                        }
                        map.entry(idx).or_default().insert(key.to_string(), e.clone());
                    }
                    k if parts.len() == 1 && TOP_KEYS.contains(&k) => {
                        top.insert(k.to_string(), e.clone());
                    }
                    _ => return Err(bad()),
                }
            }
        }
        let s = |k: &str, d: &str| top.get(k).map(|e| e.value.trim_matches('\'').trim_matches('"').to_string()).unwrap_or(d.into());
        let num = |k: &str, d: usize| -> Result<usize> {
            match top.get(k) {
                Some(e) => e.value.parse().map_err(|_| Error::Config(format!("line {}: {k} must be an integer", e.line))),
                None => Ok(d),
            }
        };
        let mut settings = GraphSettings {
            cwd: PathBuf::from(s("cwd", ".")),
            directories_load: s("directories_load", "data"),
            directories_dump: s("directories_dump", "result"),
            data_filename: s("data_filename", "func_val.csv"),
            model_order: num("model_order", 2)?,
            model_p: num("model_p", 1)?,
            algebraic_operations: Vec::new(),
            differential_operations: Vec::new(),
        };
        for (idx, m) in alg {
            let f = m.get("func").or_else(|| m.get("expr"));
            let (f, l) = match (f, m.get("labels")) {
                (Some(f), Some(l)) => (f, l),
                _ => return Err(Error::Config(format!("algebraic operation {idx:?} needs 'func' and 'labels'"))),
            };
            let label = l.value.trim_matches(|c| c == '[' || c == ']').trim().trim_matches('\'').trim_matches('"');
            let op = AlgebraicOp::parse(&f.value, label)
                .map_err(|e| Error::Config(format!("line {}: {e}", f.line)))?;
            settings.algebraic_operations.push(op);
        }
        for (idx, m) in diff {
            settings.differential_operations.push(diff_from_entries(&idx, &m)?);
        }
        settings.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_p == 0 {
            return Err(Error::Config("model_p must be >= 1".into()));
        }
        for d in &self.differential_operations {
            d.validate()?;
            if d.order > self.model_order {
                return Err(Error::Config(format!(
                    "operation {} has order {} above model_order {}",
                    d.label(),
                    d.order,
                    self.model_order
                )));
            }
        }
        Ok(())
    }

    pub fn input_path(&self) -> PathBuf {
        self.cwd.join(&self.directories_load).join(&self.data_filename)
    }

    pub fn output_path(&self) -> PathBuf {
        self.cwd.join(&self.directories_dump).join("data.csv")
    }

    /// Applies algebraic then differential operations to `table`.
    pub fn apply(&self, mut table: Table) -> Result<Table> {
        let coords: Vec<String> = table.names().iter().filter(|n| is_coordinate(n)).cloned().collect();
        let want: Vec<String> = (1..=self.model_p).map(|i| format!("x_{i}")).collect();
        let mut sorted = coords.clone();
        sorted.sort_by_key(|n| n[2..].parse::<usize>().unwrap_or(usize::MAX));
        if sorted != want {
            return Err(Error::Data(format!(
                "model_p = {} but the data has coordinate columns {:?}",
                self.model_p, coords
            )));
        }
        for op in &self.algebraic_operations {
            algebraic_op(&mut table, op)?;
        }
        for spec in &self.differential_operations {
            let n = table.nrows();
            let mut pts = Vec::with_capacity(n * spec.manifold.len());
            let cols: Vec<&[f64]> = spec
                .manifold
                .iter()
                .map(|m| table.column(m).map_err(|_| Error::Data(format!("manifold column '{m}' missing"))))
                .collect::<Result<_>>()?;
            for r in 0..n {
                pts.extend(cols.iter().map(|c| c[r]));
            }
            let g = build_graph(&pts, spec.manifold.len(), spec.neighborhood_size())?;
            let u = table
                .column(&spec.function)
                .map_err(|_| Error::Data(format!("state column '{}' missing", spec.function)))?
                .to_vec();
            let d = nonlocal_partial(&g, &u, spec)?;
            table.upsert(&spec.label(), d)?;
        }
        Ok(table)
    }
}

fn is_coordinate(name: &str) -> bool {
    name.strip_prefix("x_").is_some_and(|r| !r.is_empty() && r.chars().all(|c| c.is_ascii_digit()))
}

fn diff_from_entries(idx: &[usize], m: &BTreeMap<String, IniEntry>) -> Result<DiffOpSpec> {
    let list = |k: &str| -> Vec<String> {
        m.get(k)
            .map(|e| {
                e.value
                    .replace(['[', ']'], "")
                    .split(',')
                    .map(|t| t.trim().trim_matches('\'').trim_matches('"').to_string())
                    .filter(|t| !t.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    };
    let ints = |k: &str| -> Result<Vec<usize>> {
        list(k)
            .iter()
            .map(|t| {
                t.parse().map_err(|_| {
                    Error::Config(format!("line {}: '{t}' is not an integer in '{k}'", m[k].line))
                })
            })
            .collect()
    };
    let one = |k: &str, allowed: &str| -> Result<()> {
        match list(k).as_slice() {
            [] => Ok(()),
            [v] if v == allowed => Ok(()),
            other => Err(Error::Config(format!("operation {idx:?}: {k} {other:?} unsupported (only '{allowed}')"))),
        }
    };
    one("weight", "stencil")?;
    one("adjacency", "nearest")?;
    one("operation", "partial")?;
    let function = list("function").into_iter().next().ok_or_else(|| {
        Error::Config(format!("differential operation {idx:?} needs 'function'"))
    })?;
    let manifold = list("manifold");
    let order = ints("order")?.first().copied().unwrap_or(1);
    let accuracy = ints("accuracy")?.first().copied().unwrap_or(2);
    let k = ints("k")?.first().copied();
    let mut dimension = ints("dimension")?;
    let variable = list("variable");
    if dimension.is_empty() {
        dimension = variable
            .iter()
            .map(|v| {
                manifold.iter().position(|m| m == v).ok_or_else(|| {
                    Error::Config(format!("variable '{v}' is not a manifold axis"))
                })
            })
            .collect::<Result<_>>()?;
    }
    let spec = DiffOpSpec { function, variable, manifold, accuracy, dimension, order, k };
    spec.validate()?;
    Ok(spec)
}

/// Reads the input CSV, applies the operations and writes `data.csv` to
/// the dump directory. Returns the output path.
pub fn run_pipeline(settings: &GraphSettings) -> Result<PathBuf> {
    let input = settings.input_path();
    let table = read_input(&input)?;
    let out = settings.apply(table)?;
    let path = settings.output_path();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    out.write_csv(&path)?;
    Ok(path)
}

fn read_input(path: &Path) -> Result<Table> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("input file {} not found", path.display()),
        )));
    }
    Table::read_csv(path)
}
