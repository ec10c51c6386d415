//! CSV emission and trace parsing.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, so identical results give identical bytes.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::DecayTrace;

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

/// A header plus string rows, written with the `csv` crate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

pub const TRACE_HEADER: [&str; 4] = ["delay_us", "population", "stderr", "n_trials"];

/// `delay_us,population,stderr,n_trials`; the stderr column is blank when
/// the trace has no error bars.
pub fn trace_table(trace: &DecayTrace) -> Table {
    let mut t = Table::new(&TRACE_HEADER);
    for i in 0..trace.len() {
        t.push(vec![
            fmt_f64(trace.delays[i]),
            fmt_f64(trace.populations[i]),
            trace.stderr.get(i).map(|s| fmt_f64(*s)).unwrap_or_default(),
            trace.n_trials[i].to_string(),
        ]);
    }
    t
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<DecayTrace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::invalid("trace", format!("file not found: {}", path.display()))
        }
        _ => Error::Io(e),
    })?;
    read_trace(file)
}

/// Parses a trace CSV. `delay_us` and `population` are required; `stderr`
/// and `n_trials` are optional columns and `stderr` cells may be blank.
pub fn read_trace<R: Read>(reader: R) -> Result<DecayTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse("trace file is empty".into()));
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    let delay_col = col("delay_us").ok_or_else(|| Error::MalformedRow {
        line: 1,
        message: "missing column delay_us".into(),
    })?;
    let pop_col = col("population").ok_or_else(|| Error::MalformedRow {
        line: 1,
        message: "missing column population".into(),
    })?;
    let se_col = col("stderr");
    let n_col = col("n_trials");

    let mut trace = DecayTrace::default();
    let mut stderr: Vec<Option<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::MalformedRow {
                line,
                message: format!("missing {name}"),
            })
        };
        let number = |text: &str, name: &str| -> Result<f64> {
            text.parse::<f64>().map_err(|_| Error::MalformedRow {
                line,
                message: format!("{name} is not a number: {text:?}"),
            })
        };
        trace
            .delays
            .push(number(field(delay_col, "delay_us")?, "delay_us")?);
        trace
            .populations
            .push(number(field(pop_col, "population")?, "population")?);
        stderr.push(match se_col.map(|i| field(i, "stderr")).transpose()? {
            None | Some("") => None,
            Some(s) => Some(number(s, "stderr")?),
        });
        trace
            .n_trials
            .push(match n_col.map(|i| field(i, "n_trials")).transpose()? {
                None | Some("") => 0,
                Some(s) => s.parse().map_err(|_| Error::MalformedRow {
                    line,
                    message: format!("n_trials is not an integer: {s:?}"),
                })?,
            });
    }
    if trace.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if stderr.iter().all(Option::is_some) {
        trace.stderr = stderr.into_iter().flatten().collect();
    } else if stderr.iter().any(Option::is_some) {
        return Err(Error::invalid(
            "trace.stderr",
            "stderr must be given on every row or on none",
        ));
    }
    trace.validate()?;
    Ok(trace)
}
