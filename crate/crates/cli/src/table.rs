//! The series CSV.
//!
//! One header row, then one row per output time. Column names carry their
//! unit in brackets: times in `1/J`, rates per matter site. Missing values
//! are empty cells; vanishing overlaps are written as `inf`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use lgtquench_core::dqpt::ReturnRateSeries;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Parse { row: usize, column: String, value: String },
    #[error("inconsistent series: {0}")]
    Inconsistent(String),
}

pub const TIME: &str = "t";
pub const OBSERVABLE_COLUMNS: [&str; 5] = ["ex_flux", "ex_flux_stag", "n_diff", "trunc_err", "gauge_violation"];

pub fn rate_column(branch: usize, plus: bool) -> String {
    format!("lambda{}_{}", branch + 1, if plus { "plus" } else { "minus" })
}

fn unit(column: &str) -> &'static str {
    if column == TIME {
        "1/J"
    } else if column.starts_with("lambda") {
        "per site"
    } else {
        match column {
            "trunc_err" => "discarded weight",
            "n_diff" => "per site pair",
            _ => "per link",
        }
    }
}

/// Named columns over a common time grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    pub times: Vec<f64>,
    /// Column order as written.
    pub order: Vec<String>,
    pub columns: BTreeMap<String, Vec<Option<f64>>>,
}

impl SeriesTable {
    pub fn new(times: Vec<f64>) -> Self {
        Self { times, order: Vec::new(), columns: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push_column(&mut self, name: &str, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.times.len(), "column {name} length");
        if !self.columns.contains_key(name) {
            self.order.push(name.to_string());
        }
        self.columns.insert(name.to_string(), values);
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>], TableError> {
        if name == TIME {
            return Err(TableError::MissingColumn("t is the grid, not a data column".into()));
        }
        self.columns.get(name).map(Vec::as_slice).ok_or_else(|| TableError::MissingColumn(name.to_string()))
    }

    /// Lays out rate branches as `lambda1_plus, lambda2_plus, lambda1_minus,
    /// lambda2_minus, lambda3_plus, lambda3_minus, ...`; a manifold without
    /// data leaves its columns empty.
    pub fn from_series(series: &ReturnRateSeries) -> Self {
        let mut table = Self::new(series.times.clone());
        let n = series.plus.len().max(series.minus.len()).max(2);
        let col = |bs: &[Vec<f64>], b: usize| -> Vec<Option<f64>> {
            match bs.get(b) {
                Some(v) => v.iter().map(|&x| Some(x)).collect(),
                None => vec![None; series.times.len()],
            }
        };
        let mut names = Vec::new();
        for b in 0..2 {
            names.push((b, true));
        }
        for b in 0..2 {
            names.push((b, false));
        }
        for b in 2..n {
            names.push((b, true));
            names.push((b, false));
        }
        for (b, plus) in names {
            let values = col(if plus { &series.plus } else { &series.minus }, b);
            table.push_column(&rate_column(b, plus), values);
        }
        table
    }

    /// Rate branches back as a series; columns that are entirely empty are
    /// dropped.
    pub fn to_series(&self) -> Result<ReturnRateSeries, TableError> {
        let collect = |plus: bool| -> Result<Vec<Vec<f64>>, TableError> {
            let mut out = Vec::new();
            for b in 0.. {
                let name = rate_column(b, plus);
                let Some(col) = self.columns.get(&name) else { break };
                if col.iter().all(Option::is_none) {
                    continue;
                }
                if col.iter().any(Option::is_none) {
                    return Err(TableError::Inconsistent(format!("column {name} has empty cells")));
                }
                out.push(col.iter().map(|x| x.unwrap()).collect());
            }
            Ok(out)
        };
        let plus = collect(true)?;
        let minus = collect(false)?;
        ReturnRateSeries::new(self.times.clone(), plus, minus).map_err(|e| TableError::Inconsistent(e.to_string()))
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), TableError> {
        let mut out = csv::Writer::from_writer(w);
        let header: Vec<String> = std::iter::once(TIME)
            .chain(self.order.iter().map(String::as_str))
            .map(|c| format!("{c} [{}]", unit(c)))
            .collect();
        out.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt(*t)];
            row.extend(self.order.iter().map(|c| self.columns[c][i].map(fmt).unwrap_or_default()));
            out.write_record(&row)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, TableError> {
        let mut rdr = csv::Reader::from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| h.split(" [").next().unwrap_or(h).trim().to_string()).collect();
        if names.first().map(String::as_str) != Some(TIME) {
            return Err(TableError::MissingColumn(TIME.into()));
        }
        let mut times = Vec::new();
        let mut data: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len() - 1];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate() {
                let value = if field.is_empty() {
                    None
                } else {
                    Some(field.parse::<f64>().map_err(|_| TableError::Parse {
                        row: row + 1,
                        column: names[c].clone(),
                        value: field.to_string(),
                    })?)
                };
                if c == 0 {
                    times.push(value.ok_or_else(|| TableError::Parse { row: row + 1, column: TIME.into(), value: String::new() })?);
                } else {
                    data[c - 1].push(value);
                }
            }
        }
        let mut table = Self::new(times);
        for (name, col) in names[1..].iter().zip(data) {
            table.push_column(name, col);
        }
        Ok(table)
    }
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_bit() {
        let times = vec![0.0, 0.1, 0.2];
        let series = ReturnRateSeries::new(
            times.clone(),
            vec![vec![0.0, 1.0 / 3.0, 0.7], vec![f64::INFINITY, 2.5e-17, 1e300]],
            vec![vec![f64::INFINITY, 0.2, 0.1]],
        )
        .unwrap();
        let mut table = SeriesTable::from_series(&series);
        table.push_column("n_diff", vec![Some(1.0), Some(0.99), None]);
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t [1/J],lambda1_plus [per site],lambda2_plus [per site],lambda1_minus [per site]"));
        let back = SeriesTable::read(buf.as_slice()).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.to_series().unwrap(), series);
    }

    #[test]
    fn branch_columns_interleave_beyond_two() {
        let s = ReturnRateSeries::new(vec![0.0], vec![vec![0.0]; 3], vec![vec![0.0]; 3]).unwrap();
        let t = SeriesTable::from_series(&s);
        let names: Vec<&str> = t.order.iter().map(String::as_str).collect();
        assert_eq!(
            names,
            ["lambda1_plus", "lambda2_plus", "lambda1_minus", "lambda2_minus", "lambda3_plus", "lambda3_minus"]
        );
    }
}
