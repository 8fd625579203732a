use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult, Outcome};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record of one run, written as `manifest.json`.
#[derive(Debug)]
pub struct RunManifest {
    pub subcommand: String,
    pub outcome: Outcome,
    pub out_dir: PathBuf,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, out_dir: &Path, outcome: Outcome, wall_clock_seconds: f64) -> RunManifest {
        RunManifest { subcommand: subcommand.to_string(), outcome, out_dir: out_dir.to_path_buf(), wall_clock_seconds }
    }

    fn file_entry(&self, p: &Path) -> CliResult<Value> {
        let bytes = std::fs::read(p).map_err(|e| CliError::from(e).at(p))?;
        let shown = p.strip_prefix(&self.out_dir).unwrap_or(p);
        Ok(json!({ "path": shown.display().to_string(), "sha256": sha256_hex(&bytes) }))
    }

    pub fn to_json(&self) -> CliResult<Value> {
        let o = &self.outcome;
        let seeds: Map<String, Value> = o.seeds.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let summary: Map<String, Value> = o.summary.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let inputs = o.inputs.iter().map(|p| self.file_entry(p)).collect::<CliResult<Vec<_>>>()?;
        let outputs = o.outputs.iter().map(|p| self.file_entry(p)).collect::<CliResult<Vec<_>>>()?;
        Ok(json!({
            "subcommand": self.subcommand,
            "version": env!("CARGO_PKG_VERSION"),
            "config": o.config,
            "seeds": seeds,
            "inputs": inputs,
            "outputs": outputs,
            "summary": summary,
            "wall_clock_seconds": self.wall_clock_seconds,
        }))
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::from(e).at(dir))?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.to_json()?).expect("json values serialise");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::from(e).at(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn checksums_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.csv");
        std::fs::write(&f, "x\n1\n").unwrap();
        let outcome = Outcome { outputs: vec![f], seeds: vec![("s".into(), 4)], ..Outcome::default() };
        let m = RunManifest::new("dns", dir.path(), outcome, 0.5);
        m.write(dir.path()).unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(v["outputs"][0]["path"], "a.csv");
        assert_eq!(v["outputs"][0]["sha256"], sha256_hex(b"x\n1\n"));
        assert_eq!(v["seeds"]["s"], 4);
    }

    #[test]
    fn missing_output_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = Outcome { outputs: vec![dir.path().join("gone.csv")], ..Outcome::default() };
        let e = RunManifest::new("vsi", dir.path(), outcome, 0.0).write(dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
