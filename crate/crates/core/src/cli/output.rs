//! CSV and JSON-lines record output.
//!
//! JSON numbers carry 17 significant digits so that every double
//! round-trips; non-finite values become `null`.

use std::io::{self, Write};

use super::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Num)
    }
}

/// Shortest decimal that reads back as `v`.
fn csv_number(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// 17 significant digits.
pub fn json_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => csv_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(v) => json_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => serde_json::to_string(s).expect("strings serialize"),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => "null".into(),
        }
    }
}

pub type Record = Vec<(&'static str, Cell)>;

/// Streams records. CSV writes a header from the first record.
pub struct RecordWriter<W: Write> {
    out: W,
    format: Format,
    header: Option<Vec<&'static str>>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W, format: Format) -> Self {
        RecordWriter {
            out,
            format,
            header: None,
        }
    }

    pub fn write(&mut self, record: &Record) -> io::Result<()> {
        match self.format {
            Format::Csv => {
                let keys: Vec<&'static str> = record.iter().map(|(k, _)| *k).collect();
                match &self.header {
                    None => {
                        writeln!(self.out, "{}", keys.join(","))?;
                        self.header = Some(keys);
                    }
                    Some(h) if *h != keys => {
                        return Err(io::Error::other("CSV records must share one set of columns"));
                    }
                    Some(_) => {}
                }
                let cells: Vec<String> = record.iter().map(|(_, c)| c.csv()).collect();
                writeln!(self.out, "{}", cells.join(","))?;
            }
            Format::Json => {
                let fields: Vec<String> = record
                    .iter()
                    .map(|(k, c)| format!("{}:{}", serde_json::to_string(k).expect("keys serialize"), c.json()))
                    .collect();
                writeln!(self.out, "{{{}}}", fields.join(","))?;
            }
        }
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
