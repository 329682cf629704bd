use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result};

/// Observed series `(n, x_n)` in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSeries {
    /// Periods, strictly increasing from 0.
    pub periods: Vec<u32>,
    /// Observations divided by `unit_scale`.
    pub values: Vec<f64>,
    /// Raw units per model unit.
    pub unit_scale: f64,
    /// Calendar labels, when read from a file.
    pub labels: Vec<i64>,
}

#[derive(Deserialize)]
struct Row {
    year: i64,
    n: u32,
    x: f64,
}

impl DataSeries {
    /// Builds a series from `(n, x)` rows already in model units. Rows may come
    /// in any order; they are sorted by period.
    pub fn new(rows: &[(u32, f64)]) -> Result<Self> {
        let mut rows = rows.to_vec();
        rows.sort_by_key(|r| r.0);
        let labels = rows.iter().map(|r| r.0 as i64).collect();
        Self::checked(rows, 1.0, labels)
    }

    fn checked(rows: Vec<(u32, f64)>, unit_scale: f64, labels: Vec<i64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("data series is empty"));
        }
        if rows[0].0 != 0 {
            return Err(Error::invalid(format!("data series must start at period 0, found {}", rows[0].0)));
        }
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::Data {
                    row: i + 2,
                    message: format!("period {} does not increase after {}", w[1].0, w[0].0),
                });
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.1 > 0.0 && r.1.is_finite()) {
                return Err(Error::Data { row: i + 1, message: format!("observation must be positive, got {}", r.1) });
            }
        }
        Ok(Self {
            periods: rows.iter().map(|r| r.0).collect(),
            values: rows.iter().map(|r| r.1).collect(),
            unit_scale,
            labels,
        })
    }

    /// Reads a CSV with header `year,n,x` (raw counts) and divides `x` by
    /// `unit_scale`. Errors report the 1-based line of the offending record.
    pub fn read_csv<R: Read>(input: R, unit_scale: f64) -> Result<Self> {
        if !(unit_scale > 0.0 && unit_scale.is_finite()) {
            return Err(Error::invalid(format!("unit_scale must be positive, got {unit_scale}")));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["year", "n", "x"] {
            return Err(Error::Data { row: 1, message: format!("expected header `year,n,x`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")) });
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let row: Row = rec
                .deserialize(Some(&headers))
                .map_err(|e| Error::Data { row: line, message: e.to_string() })?;
            if !(row.x > 0.0 && row.x.is_finite()) {
                return Err(Error::Data { row: line, message: format!("x must be positive, got {}", row.x) });
            }
            if let Some(&(prev, _)) = rows.last() {
                if row.n <= prev {
                    return Err(Error::Data { row: line, message: format!("n = {} does not increase after {prev}", row.n) });
                }
            } else if row.n != 0 {
                return Err(Error::Data { row: line, message: format!("first period must be 0, found {}", row.n) });
            }
            rows.push((row.n, row.x / unit_scale));
            labels.push(row.year);
        }
        Self::checked(rows, unit_scale, labels)
    }

    pub fn from_path(path: &Path, unit_scale: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, unit_scale)
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.periods.iter().copied().zip(self.values.iter().copied())
    }
}
