//! CSV tables with a fixed column order and a scenario-hash header line.

use std::fmt::Write as _;
use std::path::Path;

use mmwave_mfg::{Error, Result};

/// One value cell: numbers print with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(if x { "pass" } else { "fail" }.to_string())
    }
}

pub fn format_num(x: f64) -> String {
    if x == 0.0 {
        // keeps the sign bit out of the text
        "0.0000000000000000e0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Num(x) => out.push_str(&format_num(*x)),
            Cell::Int(n) => write!(out, "{n}").unwrap(),
            Cell::Text(t) => out.push_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, scenario_hash: &str) -> String {
        let mut out = format!("# scenario={scenario_hash}\n{}\n", self.header.join(","));
        for row in &self.rows {
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                cell.render(&mut out);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, scenario_hash: &str) -> Result<()> {
        std::fs::write(path, self.render(scenario_hash)).map_err(|e| Error::io(path, e))
    }
}

/// A parsed table: scenario hash, header and raw fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub scenario_hash: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: &str| Error::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines();
        let scenario_hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# scenario="))
            .ok_or_else(|| bad(1, "missing scenario hash line"))?
            .to_string();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| bad(2, "missing header"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(bad(n + 3, "field count differs from header"));
            }
            rows.push(row);
        }
        Ok(ParsedCsv {
            scenario_hash,
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Domain(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                r[c].parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 3,
                    message: format!("column `{name}`: {e}"),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = CsvTable::new(&["t", "phi"]);
        assert_eq!(t.render("abc"), "# scenario=abc\nt,phi\n");
        let p = ParsedCsv::parse(&t.render("abc")).unwrap();
        assert!(p.rows.is_empty());
        assert_eq!(p.scenario_hash, "abc");
    }

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(format_num(1.0), "1.0000000000000000e0");
        assert_eq!(format_num(-0.0), "0.0000000000000000e0");
        assert_eq!(format_num(-0.375), "-3.7500000000000000e-1");
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(ParsedCsv::parse("# scenario=x\na,b\n1,2,3\n").is_err());
        assert!(ParsedCsv::parse("a,b\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..50)) {
            let mut t = CsvTable::new(&["i", "x"]);
            for (i, &x) in xs.iter().enumerate() {
                t.push(vec![i.into(), x.into()]);
            }
            let back = ParsedCsv::parse(&t.render("h")).unwrap().column("x").unwrap();
            prop_assert_eq!(back.len(), xs.len());
            for (a, b) in back.iter().zip(&xs) {
                prop_assert!(a == b);
            }
        }
    }
}
