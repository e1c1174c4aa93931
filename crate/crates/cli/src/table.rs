//! Result tables and their CSV / JSON encodings.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    /// Run parameters; dropped by `--no-meta`.
    pub meta: Vec<(String, String)>,
    /// Derived results that are not per-row; always emitted.
    pub summary: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra structured payload, JSON output only.
    pub details: Option<Value>,
}

impl ResultTable {
    pub fn column(&mut self, name: impl Into<String>, unit: impl Into<String>) {
        self.columns.push(Column {
            name: name.into(),
            unit: unit.into(),
        });
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn to_csv(&self, with_meta: bool) -> String {
        let mut out = String::new();
        if with_meta {
            for (k, v) in &self.meta {
                writeln!(out, "# {k}: {v}").unwrap();
            }
        }
        for (k, v) in &self.summary {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        let header: Vec<String> = self.columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)).collect();
        writeln!(out, "{}", header.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format_number(*x),
                    Cell::Text(s) => s.clone(),
                    Cell::Bool(b) => b.to_string(),
                    Cell::Missing => String::new(),
                })
                .collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn to_json(&self, with_meta: bool) -> String {
        let pairs = |v: &[(String, String)]| {
            let mut m = Map::new();
            for (k, val) in v {
                m.insert(k.clone(), Value::String(val.clone()));
            }
            Value::Object(m)
        };
        let columns: Vec<Value> = self
            .columns
            .iter()
            .map(|c| json!({"name": c.name, "unit": c.unit}))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|c| match c {
                            // Parsing the formatted text keeps JSON and CSV digits identical.
                            Cell::Num(x) => format_number(*x)
                                .parse::<serde_json::Number>()
                                .map(Value::Number)
                                .unwrap_or(Value::Null),
                            Cell::Text(s) => Value::String(s.clone()),
                            Cell::Bool(b) => Value::Bool(*b),
                            Cell::Missing => Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        let mut doc = Map::new();
        if with_meta {
            doc.insert("meta".into(), pairs(&self.meta));
        }
        doc.insert("summary".into(), pairs(&self.summary));
        doc.insert("columns".into(), Value::Array(columns));
        doc.insert("rows".into(), Value::Array(rows));
        if let Some(d) = &self.details {
            doc.insert("details".into(), d.clone());
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("table serializes");
        s.push('\n');
        s
    }
}

/// 12 significant digits; scientific notation for `|x| < 1e-3` or `|x| >= 1e6`.
/// Trailing zeros are dropped; zero prints as `0`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-3..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
