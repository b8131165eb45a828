//! CSV tables with a `#` comment preamble.
//!
//! Every emitted file starts with `# run_id: ...`, `# params: ...` and
//! `# format_version: ...` lines followed by an ordinary CSV header row.
//! Floats are written in shortest round-trip form so parsing is lossless.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `(key, value)` pairs of the comment preamble.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(run_id: &str, params: &str, columns: &[&str]) -> Self {
        Self {
            meta: vec![
                ("run_id".into(), run_id.into()),
                ("params".into(), params.into()),
                ("format_version".into(), FORMAT_VERSION.to_string()),
            ],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| v.to_string()).collect());
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let k = self
            .column_index(name)
            .ok_or_else(|| Error::Config(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Config(format!("column `{name}`: {e}")))
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k}: {v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.columns).expect("write to memory");
        for r in &self.rows {
            w.write_record(r).expect("write to memory");
        }
        w.flush().expect("write to memory");
        drop(w);
        out
    }

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::str::from_utf8(bytes).map_err(|e| bad(e.to_string()))?;
        let mut meta = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            let (k, v) = body
                .split_once(": ")
                .ok_or_else(|| bad(format!("malformed comment `{line}`")))?;
            meta.push((k.to_string(), v.to_string()));
        }
        match meta.iter().find(|(k, _)| k == "format_version") {
            Some((_, v)) if v == &FORMAT_VERSION.to_string() => {}
            Some((_, v)) => return Err(bad(format!("unsupported format version {v}"))),
            None => return Err(bad("missing format_version".into())),
        }
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
        let columns = r
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preamble_and_columns() {
        let mut t = Table::new("r1", "d=5 p=2.8", &["a", "b"]);
        t.push_f64(&[1.0, 0.1]);
        t.push(vec!["x".into(), "y,z".into()]);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert!(text.starts_with("# run_id: r1\n# params: d=5 p=2.8\n# format_version: 1\na,b\n"));
        let back = Table::parse(text.as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta("params"), Some("d=5 p=2.8"));
        assert_eq!(back.column("b").unwrap(), vec!["0.1", "y,z"]);
    }

    #[test]
    fn rejects_missing_version() {
        assert!(Table::parse(b"a,b\n1,2\n", Path::new("t.csv")).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let mut t = Table::new("r", "p", &["v"]);
            for v in &vals {
                t.push_f64(&[*v]);
            }
            let back = Table::parse(&t.to_bytes(), Path::new("t.csv")).unwrap();
            let parsed = back.column_f64("v").unwrap();
            prop_assert_eq!(parsed.len(), vals.len());
            for (a, b) in parsed.iter().zip(&vals) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
