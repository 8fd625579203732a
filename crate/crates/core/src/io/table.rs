use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a number with 17 significant digits, enough to round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column-major table of named `f64` columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Table {
        Table::default()
    }

    pub fn nrows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.cols[i].as_slice())
            .ok_or_else(|| Error::Data(format!("missing column '{name}'")))
    }

    pub fn column_at(&self, i: usize) -> &[f64] {
        &self.cols[i]
    }

    /// Appends a column; its length must match the existing rows.
    pub fn push(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if self.has(name) {
            return Err(Error::Data(format!("duplicate column '{name}'")));
        }
        if !self.cols.is_empty() && values.len() != self.nrows() {
            return Err(Error::Shape(format!(
                "column '{name}' has {} rows, table has {}",
                values.len(),
                self.nrows()
            )));
        }
        self.names.push(name.to_string());
        self.cols.push(values);
        Ok(())
    }

    /// Replaces an existing column or appends a new one.
    pub fn upsert(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        match self.names.iter().position(|n| n == name) {
            Some(i) if values.len() == self.nrows() => {
                self.cols[i] = values;
                Ok(())
            }
            Some(_) => Err(Error::Shape(format!("column '{name}' length mismatch"))),
            None => self.push(name, values),
        }
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[r]).collect()
    }

    /// Keeps the rows for which `keep` is true.
    pub fn filter_rows(&self, keep: &[bool]) -> Table {
        Table {
            names: self.names.clone(),
            cols: self
                .cols
                .iter()
                .map(|c| c.iter().zip(keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect())
                .collect(),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        Table::from_reader(f)
    }

    /// Reads a headed CSV whose cells are all numbers.
    pub fn from_reader<R: Read>(r: R) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if names.is_empty() || names.iter().all(|n| n.is_empty()) {
            return Err(Error::Data("csv header missing".into()));
        }
        if names.iter().any(|n| n.parse::<f64>().is_ok()) {
            return Err(Error::Data("csv header missing (first row is numeric)".into()));
        }
        let mut cols = vec![Vec::new(); names.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::Data(format!("row {} has {} fields, expected {}", i + 1, rec.len(), names.len())));
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Data(format!("row {}, column '{}': '{cell}' is not a number", i + 1, names[j]))
                })?;
                cols[j].push(v);
            }
        }
        let mut t = Table::new();
        for (n, c) in names.iter().zip(cols) {
            t.push(n, c)?;
        }
        Ok(t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(f))
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.names)?;
        for r in 0..self.nrows() {
            wtr.write_record(self.cols.iter().map(|c| fmt_f64(c[r])))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Whitespace-separated variant with a `#`-prefixed header.
    pub fn to_gnuplot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", self.names.join(" "))?;
        for r in 0..self.nrows() {
            let line: Vec<String> = self.cols.iter().map(|c| fmt_f64(c[r])).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let mut t = Table::new();
        t.push("x", vec![0.1, 1.0 / 3.0, -2.5e-300]).unwrap();
        t.push("y", vec![f64::MAX, 0.0, 7.0]).unwrap();
        let back = Table::from_reader(t.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn header_required() {
        assert!(Table::from_reader("1,2\n3,4\n".as_bytes()).is_err());
    }

    #[test]
    fn non_numeric_cell_named() {
        let e = Table::from_reader("a,b\n1,zz\n".as_bytes()).unwrap_err().to_string();
        assert!(e.contains("'b'") && e.contains("row 1"), "{e}");
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn gnuplot_layout() {
        let mut t = Table::new();
        t.push("a", vec![1.0]).unwrap();
        let mut buf = Vec::new();
        t.to_gnuplot(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# a\n1.0000000000000000e0\n");
    }
}
