use crate::error::{Error, Result};

/// One `key = value` line, with its 1-based line number for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IniEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parsed INI text. Keys before any `[section]` header live in section `""`.
///
/// Later duplicates replace earlier ones, which is how command-line
/// overrides are layered on top of a file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: Vec<(String, Vec<IniEntry>)>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini> {
        let mut ini = Ini::default();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {line_no}: unterminated section header"))
                })?;
                current = name.trim().to_string();
                ini.section_mut(&current);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected 'key = value', got '{line}'"))
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key")));
            }
            ini.insert(&current.clone(), key, v.trim(), line_no);
        }
        Ok(ini)
    }

    fn section_mut(&mut self, name: &str) -> &mut Vec<IniEntry> {
        let pos = match self.sections.iter().position(|(n, _)| n == name) {
            Some(p) => p,
            None => {
                self.sections.push((name.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        &mut self.sections[pos].1
    }

    fn insert(&mut self, section: &str, key: &str, value: &str, line: usize) {
        let entries = self.section_mut(section);
        let entry = IniEntry { key: key.to_string(), value: value.to_string(), line };
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => *e = entry,
            None => entries.push(entry),
        }
    }

    /// Sets a value programmatically (line number 0).
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.insert(section, key, value, 0);
    }

    /// Applies a `section.key=value` or `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
        let path = path.trim();
        match self.sections.iter().any(|(n, _)| !n.is_empty()) {
            true => match path.split_once('.') {
                Some((s, k)) if self.has_section(s) => self.set(s, k, value.trim()),
                _ => self.set("", path, value.trim()),
            },
            false => self.set("", path, value.trim()),
        }
        Ok(())
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.iter().any(|(n, _)| n == name)
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn entries(&self, section: &str) -> &[IniEntry] {
        self.sections
            .iter()
            .find(|(n, _)| n == section)
            .map(|(_, e)| e.as_slice())
            .unwrap_or(&[])
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&IniEntry> {
        self.entries(section).iter().find(|e| e.key == key)
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key).map(|e| e.value.as_str())
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key).map(|e| parse_value(e, |s| s.parse::<f64>().ok())).transpose()
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.get(section, key).map(|e| parse_value(e, |s| s.parse::<usize>().ok())).transpose()
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.get(section, key).map(|e| parse_value(e, |s| s.parse::<u64>().ok())).transpose()
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>> {
        self.get(section, key)
            .map(|e| {
                parse_value(e, |s| match s.to_ascii_lowercase().as_str() {
                    "true" | "yes" | "1" | "on" => Some(true),
                    "false" | "no" | "0" | "off" => Some(false),
                    _ => None,
                })
            })
            .transpose()
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(section, key)
            .map(|e| split_list(&e.value).map(|s| parse_value_str(e, s, |t| t.parse().ok())).collect())
            .transpose()
    }

    pub fn get_usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(section, key)
            .map(|e| split_list(&e.value).map(|s| parse_value_str(e, s, |t| t.parse().ok())).collect())
            .transpose()
    }

    pub fn get_str_list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.get(section, key).map(|e| split_list(&e.value).map(str::to_string).collect())
    }

    /// Errors on the first key in `section` that is not in `known`.
    pub fn reject_unknown(&self, section: &str, known: &[&str]) -> Result<()> {
        for e in self.entries(section) {
            if !known.contains(&e.key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{}' in section [{}]",
                    e.line, e.key, section
                )));
            }
        }
        Ok(())
    }

    /// Renders back to INI text in insertion order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            if !name.is_empty() {
                out.push_str(&format!("[{name}]\n"));
            }
            for e in entries {
                out.push_str(&format!("{} = {}\n", e.key, e.value));
            }
        }
        out
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|t| t.trim().trim_matches('\'').trim_matches('"'))
        .filter(|t| !t.is_empty())
}

fn parse_value<T>(e: &IniEntry, f: impl Fn(&str) -> Option<T>) -> Result<T> {
    parse_value_str(e, &e.value, f)
}

fn parse_value_str<T>(e: &IniEntry, s: &str, f: impl Fn(&str) -> Option<T>) -> Result<T> {
    f(s.trim()).ok_or_else(|| {
        Error::Config(format!("line {}: invalid value '{}' for key '{}'", e.line, s.trim(), e.key))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_globals() {
        let ini = Ini::parse("a = 1\n[S]\n# c\nb= x \n\n[T]\nb=2.5\n").unwrap();
        assert_eq!(ini.get_str("", "a"), Some("1"));
        assert_eq!(ini.get_str("S", "b"), Some("x"));
        assert_eq!(ini.get_f64("T", "b").unwrap(), Some(2.5));
        assert_eq!(ini.get("T", "b").unwrap().line, 7);
    }

    #[test]
    fn bad_number_reports_line() {
        let ini = Ini::parse("[S]\n\nk = 1.0x\n").unwrap();
        let err = ini.get_f64("S", "k").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_key_named() {
        let ini = Ini::parse("[S]\nfoo=1\n").unwrap();
        let err = ini.reject_unknown("S", &["bar"]).unwrap_err().to_string();
        assert!(err.contains("foo"));
    }

    #[test]
    fn lists_and_overrides() {
        let mut ini = Ini::parse("[N]\nw = [20, 20]\nnames = 'a', 'b'\n").unwrap();
        assert_eq!(ini.get_usize_list("N", "w").unwrap(), Some(vec![20, 20]));
        assert_eq!(ini.get_str_list("N", "names"), Some(vec!["a".into(), "b".into()]));
        ini.apply_override("N.w=5").unwrap();
        assert_eq!(ini.get_usize_list("N", "w").unwrap(), Some(vec![5]));
    }

    #[test]
    fn missing_equals_is_error() {
        assert!(Ini::parse("[S]\njunk\n").is_err());
        assert!(Ini::parse("[S\n").is_err());
    }
}
