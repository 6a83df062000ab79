//! Tabular reports written as CSV or JSON.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use async_sparse::analysis::sig9;
use serde_json::{Map, Value};

#[derive(Clone, Debug)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) if v.is_finite() => sig9(*v),
            Cell::Real(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            // 9 significant digits, then the shortest float that prints them
            Cell::Real(v) if v.is_finite() => Value::from(sig9(*v).parse::<f64>().expect("formatted float parses")),
            Cell::Real(_) | Cell::Empty => Value::Null,
            Cell::Text(s) => Value::from(s.clone()),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<f32> for Cell {
    fn from(v: f32) -> Self {
        Cell::Real(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Default)]
pub struct Report {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write_to(&self, w: impl Write, json: bool) -> Result<()> {
        if json {
            let rows: Vec<Value> = self
                .rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect::<Map<_, _>>()))
                .collect();
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
            w.flush()?;
        } else {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(&self.columns)?;
            for r in &self.rows {
                wr.write_record(r.iter().map(Cell::csv))?;
            }
            wr.flush()?;
        }
        Ok(())
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn write(&self, path: Option<&Path>, json: bool) -> Result<()> {
        match path {
            Some(p) => {
                let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                self.write_to(BufWriter::new(f), json)
            }
            None => self.write_to(io::stdout().lock(), json),
        }
    }
}
