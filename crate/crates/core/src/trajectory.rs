//! Time-indexed state sequences shared by every integrator and iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ScalarOde,
    DeepOde,
    DeepOdeReduced,
    Euler,
    Midpoint,
    MidpointDeep,
    DeltaScaling,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scheme: Scheme,
    /// `dt` for flows, `eta` for iterations.
    pub step: f64,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
}

/// Rows of named columns against a strictly increasing time axis.
///
/// Derived columns (product, error, bound) are stored alongside the raw
/// state so a trajectory can be exported without extra context.
#[derive(Clone, Debug)]
pub struct Trajectory {
    time_label: String,
    columns: Vec<String>,
    times: Vec<f64>,
    data: Vec<f64>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(time_label: &str, columns: Vec<String>, meta: TrajectoryMeta) -> Self {
        Self { time_label: time_label.to_string(), columns, times: Vec::new(), data: Vec::new(), meta }
    }

    pub fn with_capacity(time_label: &str, columns: Vec<String>, meta: TrajectoryMeta, rows: usize) -> Self {
        let width = columns.len();
        Self {
            time_label: time_label.to_string(),
            columns,
            times: Vec::with_capacity(rows),
            data: Vec::with_capacity(rows * width),
            meta,
        }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} entries, trajectory has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::InvalidParameter(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn time_label(&self) -> &str {
        &self.time_label
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times.iter().copied().zip(self.data.chunks_exact(self.width().max(1)))
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        let n = self.len();
        (n > 0).then(|| (self.times[n - 1], self.row(n - 1)))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.data.iter().skip(j).step_by(self.width()).copied().collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = Vec::with_capacity(self.width() + 1);
        header.push(self.time_label.as_str());
        header.extend(self.columns.iter().map(String::as_str));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.width() + 1);
        for (t, row) in self.rows() {
            record.clear();
            record.push(fmt_f64(t));
            record.extend(row.iter().map(|&v| fmt_f64(v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Shortest round-trip form; exponent notation outside [1e-5, 1e15).
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}
