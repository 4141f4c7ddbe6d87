//! Long-format CSV tables and JSON verdict records.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// How a measurement is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One checked claim; fields serialize in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub experiment: String,
    pub check: String,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
    pub comparison: Comparison,
    pub anchor: String,
}

impl Verdict {
    pub fn at_most(experiment: &str, check: &str, anchor: &str, tolerance: f64, measured: f64) -> Self {
        Verdict {
            experiment: experiment.into(),
            check: check.into(),
            tolerance,
            measured,
            pass: measured <= tolerance,
            comparison: Comparison::AtMost,
            anchor: anchor.into(),
        }
    }

    pub fn at_least(experiment: &str, check: &str, anchor: &str, tolerance: f64, measured: f64) -> Self {
        Verdict {
            experiment: experiment.into(),
            check: check.into(),
            tolerance,
            measured,
            pass: measured >= tolerance,
            comparison: Comparison::AtLeast,
            anchor: anchor.into(),
        }
    }
}

/// A plot-ready table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }
}

/// Formats a float with the shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes `<name>.csv` per table and `verdict.json` into `dir`.
pub fn write_outputs(dir: &Path, tables: &[Table], verdicts: &[Verdict]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv_string()?)?;
    }
    let mut json = serde_json::to_string_pretty(verdicts)?;
    json.push('\n');
    fs::write(dir.join("verdict.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_per_rfc4180() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["x,y".to_string(), "say \"hi\"".to_string()]);
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    }

    #[test]
    fn verdict_field_order() {
        let v = Verdict::at_most("e", "c", "anchor", 1.0, 0.5);
        let s = serde_json::to_string(&v).unwrap();
        let pos: Vec<usize> =
            ["experiment", "check", "tolerance", "measured", "pass"].iter().map(|k| s.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
