use std::path::PathBuf;

use matml::io::Ini;

use crate::{CliError, CliResult, Common};

/// Reads `--config` (if any) and applies `--set` overrides. An override
/// `S.key=value` whose `S` is one of `sections` goes to section `S`;
/// anything else is handed to the INI override rules unchanged.
pub fn load_config(common: &Common, sections: &[&str]) -> CliResult<(Ini, Option<PathBuf>)> {
    let mut ini = match &common.config {
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::Failure(format!("{}: no such file", p.display())));
            }
            let text = std::fs::read_to_string(p).map_err(|e| CliError::from(e).at(p))?;
            Ini::parse(&text).map_err(|e| CliError::from(e).at(p))?
        }
        None => Ini::parse("")?,
    };
    for o in &common.overrides {
        let (path, value) =
            o.split_once('=').ok_or_else(|| CliError::Usage(format!("override '{o}' is not SECTION.KEY=VALUE")))?;
        match path.trim().split_once('.') {
            Some((s, k)) if sections.contains(&s) => ini.set(s, k.trim(), value.trim()),
            _ => ini.apply_override(o)?,
        }
    }
    Ok((ini, common.config.clone()))
}

/// Typed access to one section with defaults.
pub struct Section<'a> {
    pub ini: &'a Ini,
    pub name: &'static str,
}

impl<'a> Section<'a> {
    pub fn new(ini: &'a Ini, name: &'static str, known: &[&str]) -> CliResult<Section<'a>> {
        ini.reject_unknown(name, known)?;
        Ok(Section { ini, name })
    }

    pub fn f64(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.ini.get_f64(self.name, key)?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str, default: usize) -> CliResult<usize> {
        Ok(self.ini.get_usize(self.name, key)?.unwrap_or(default))
    }

    pub fn bool(&self, key: &str, default: bool) -> CliResult<bool> {
        Ok(self.ini.get_bool(self.name, key)?.unwrap_or(default))
    }

    pub fn str(&self, key: &str, default: &str) -> String {
        self.ini.get_str(self.name, key).unwrap_or(default).trim().to_string()
    }

    pub fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        Ok(self.ini.get_f64(self.name, key)?)
    }

    pub fn f64_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        Ok(self.ini.get_f64_list(self.name, key)?)
    }

    pub fn usize_list(&self, key: &str) -> CliResult<Option<Vec<usize>>> {
        Ok(self.ini.get_usize_list(self.name, key)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(overrides: &[&str]) -> Common {
        Common {
            config: None,
            seed: None,
            out_dir: "out".into(),
            overrides: overrides.iter().map(|s| s.to_string()).collect(),
            gnuplot: false,
        }
    }

    #[test]
    fn overrides_go_to_named_sections() {
        let (ini, path) = load_config(&common(&["AllenCahn.steps = 7", "differential_operations.0.order=1"]), &["AllenCahn"]).unwrap();
        assert!(path.is_none());
        assert_eq!(ini.get_usize("AllenCahn", "steps").unwrap(), Some(7));
        assert_eq!(ini.get_str("", "differential_operations.0.order"), Some("1"));
    }

    #[test]
    fn malformed_override_is_usage() {
        let e = load_config(&common(&["AllenCahn.steps"]), &["AllenCahn"]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn section_defaults_and_unknown_keys() {
        let ini = Ini::parse("[S]\na = 2.5\nn = 3,4\n").unwrap();
        let s = Section::new(&ini, "S", &["a", "n", "b"]).unwrap();
        assert_eq!(s.f64("a", 0.0).unwrap(), 2.5);
        assert_eq!(s.f64("b", 1.0).unwrap(), 1.0);
        assert_eq!(s.usize_list("n").unwrap(), Some(vec![3, 4]));
        assert!(Section::new(&ini, "S", &["a"]).is_err());
    }
}
