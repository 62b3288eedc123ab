//! Tab-separated output tables with a commented provenance preamble.
//!
//! ```text
//! # kiset 0.1.0
//! # command: s11
//! # config_sha256: 3f1c...
//! # seed: 7
//!
//! # table: spectrum
//! frequency_hz	s11_db	status
//! 6.00000000e8	-1.23456789e-1	ok
//! ```
//!
//! Floats carry 9 significant digits; tables are separated by a blank line.

use std::fmt::Write as _;

use super::HarnessError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(x) if x.is_nan() => out.push_str("nan"),
            Cell::Float(x) if x.is_infinite() => out.push_str(if *x > 0.0 { "inf" } else { "-inf" }),
            Cell::Float(x) => write!(out, "{x:.8e}").unwrap(),
            Cell::Int(i) => write!(out, "{i}").unwrap(),
            Cell::Text(s) => out.push_str(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column (non-numeric cells become NaN).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<String>> {
        let k = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Cell::Text(s) => s.clone(),
                    other => {
                        let mut s = String::new();
                        other.render(&mut s);
                        s
                    }
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

/// Output of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub tables: Vec<Table>,
    /// Set when the recipe completed but a required result could not be computed; the
    /// CLI writes the tables and exits with the numerical-failure code.
    pub failure: Option<String>,
}

impl SweepResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn render(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        writeln!(out, "# kiset {}", p.version).unwrap();
        writeln!(out, "# command: {}", p.command).unwrap();
        writeln!(out, "# config_sha256: {}", p.config_sha256).unwrap();
        writeln!(out, "# seed: {}", p.seed).unwrap();
        if let Some(f) = &self.failure {
            writeln!(out, "# failure: {f}").unwrap();
        }
        for t in &self.tables {
            out.push('\n');
            writeln!(out, "# table: {}", t.name).unwrap();
            out.push_str(&t.columns.join("\t"));
            out.push('\n');
            for row in &t.rows {
                for (k, c) in row.iter().enumerate() {
                    if k > 0 {
                        out.push('\t');
                    }
                    c.render(&mut out);
                }
                out.push('\n');
            }
        }
        out
    }
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(i) = s.parse::<i64>() {
        return Cell::Int(i);
    }
    match s.parse::<f64>() {
        Ok(x) => Cell::Float(x),
        Err(_) => Cell::Text(s.to_string()),
    }
}

/// Parses rendered output (or any tab-separated file with optional `# table:` markers).
/// Returns the provenance if the preamble is complete.
pub fn parse_output(text: &str) -> Result<(Option<Provenance>, Vec<Table>), HarnessError> {
    let mut version = None;
    let mut command = None;
    let mut hash = None;
    let mut seed = None;
    let mut tables: Vec<Table> = Vec::new();
    let mut current: Option<Table> = None;
    for (lineno, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(name) = rest.strip_prefix("table:") {
                tables.extend(current.take());
                current = Some(Table {
                    name: name.trim().to_string(),
                    columns: Vec::new(),
                    rows: Vec::new(),
                });
            } else if let Some(v) = rest.strip_prefix("kiset ") {
                version = Some(v.trim().to_string());
            } else if let Some(v) = rest.strip_prefix("command:") {
                command = Some(v.trim().to_string());
            } else if let Some(v) = rest.strip_prefix("config_sha256:") {
                hash = Some(v.trim().to_string());
            } else if let Some(v) = rest.strip_prefix("seed:") {
                seed = v.trim().parse::<u64>().ok();
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let t = current.get_or_insert_with(|| Table {
            name: String::new(),
            columns: Vec::new(),
            rows: Vec::new(),
        });
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if t.columns.is_empty() {
            t.columns = fields.iter().map(|s| s.to_string()).collect();
        } else {
            if fields.len() != t.columns.len() {
                return Err(HarnessError::Config(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    t.columns.len(),
                    fields.len()
                )));
            }
            t.rows.push(fields.into_iter().map(parse_cell).collect());
        }
    }
    tables.extend(current);
    let provenance = match (version, command, hash, seed) {
        (Some(version), Some(command), Some(config_sha256), Some(seed)) => Some(Provenance {
            version,
            command,
            config_sha256,
            seed,
        }),
        _ => None,
    };
    Ok((provenance, tables))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepResult {
        let mut t = Table::new("demo", &["x", "n", "status"]);
        t.push(vec![1.5.into(), 3usize.into(), "ok".into()]);
        t.push(vec![f64::NAN.into(), (-2i64).into(), "not_converged".into()]);
        SweepResult {
            provenance: Provenance {
                version: VERSION.into(),
                command: "demo".into(),
                config_sha256: "ab".repeat(32),
                seed: 9,
            },
            tables: vec![t.clone(), Table { name: "second".into(), ..t }],
            failure: None,
        }
    }

    #[test]
    fn renders_nine_significant_digits() {
        let text = sample().render();
        assert!(text.contains("1.50000000e0\t3\tok\n"));
        assert!(text.contains("nan\t-2\tnot_converged\n"));
        let mut s = String::new();
        Cell::Float(std::f64::consts::PI * 1e-9).render(&mut s);
        assert_eq!(s, "3.14159265e-9");
    }

    #[test]
    fn parse_round_trip() {
        let r = sample();
        let (prov, tables) = parse_output(&r.render()).unwrap();
        assert_eq!(prov.unwrap(), r.provenance);
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].columns, r.tables[0].columns);
        assert_eq!(tables[1].name, "second");
        assert_eq!(tables[0].column("x").unwrap()[0], 1.5);
        assert!(tables[0].column("x").unwrap()[1].is_nan());
        assert_eq!(tables[0].text_column("status").unwrap()[1], "not_converged");
    }

    #[test]
    fn parses_plain_tsv() {
        let (prov, tables) = parse_output("t\tl\n0.1\t130\n0.2\t131\n").unwrap();
        assert!(prov.is_none());
        assert_eq!(tables[0].column("l").unwrap(), vec![130.0, 131.0]);
        assert!(parse_output("a\tb\n1\n").is_err());
    }
}
