//! Deterministic CSV and JSON emission.

use serde_json::{Map, Value};

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros removed,
/// exponent notation only outside `[1e-4, 1e12)`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (11 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        format_number(x).parse().expect("formatted number parses")
    } else {
        x
    }
}

/// JSON number rounded to 12 significant digits; non-finite values become
/// `null`.
pub fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
}

/// A cell of a tabular output.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => json_number(*x),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// Named columns of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        wtr.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            wtr.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    /// One object per row, keyed by column name.
    pub fn to_json_value(&self) -> Value {
        Value::Array(self.rows.iter().map(|row| self.row_object(row)).collect())
    }

    pub fn row_object(&self, row: &[Cell]) -> Value {
        let map: Map<String, Value> = self.header.iter().map(|h| h.to_string()).zip(row.iter().map(Cell::json)).collect();
        Value::Object(map)
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}
