use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{SeriesTable, TableError};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("the two time grids share no point{0}")]
    DisjointGrids(String),
    #[error("`{0}` has no finite value on the common grid in both runs")]
    NoData(String),
}

/// Deviation statistics of one column on the common time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub quantity: String,
    pub tol: f64,
    /// Grid points present in both runs (within the time window).
    pub n_common: usize,
    /// Common points where both values are finite.
    pub n_compared: usize,
    pub max_abs_dev: f64,
    pub mean_abs_dev: f64,
    pub t_at_max: f64,
    pub pass: bool,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Index pairs of equal times in two sorted grids.
fn common_grid(a: &[f64], b: &[f64]) -> Vec<(usize, usize)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        if same_time(a[i], b[j]) {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Compares `quantity` between two series on the times they share, up to
/// `t_max` if given.
///
/// Points where either value is missing or infinite (a vanishing overlap)
/// are skipped; the report counts how many were compared.
pub fn compare(a: &SeriesTable, b: &SeriesTable, quantity: &str, tol: f64, t_max: Option<f64>) -> Result<CompareReport, CompareError> {
    let (ca, cb) = (a.column(quantity)?, b.column(quantity)?);
    let window = |t: f64| t_max.is_none_or(|m| t <= m + 1e-9);
    let pairs: Vec<(usize, usize)> = common_grid(&a.times, &b.times).into_iter().filter(|&(i, _)| window(a.times[i])).collect();
    if pairs.is_empty() {
        let span = |t: &[f64]| t.first().zip(t.last()).map(|(x, y)| format!("[{x}, {y}]")).unwrap_or("[]".into());
        return Err(CompareError::DisjointGrids(format!(": {} vs {}", span(&a.times), span(&b.times))));
    }
    let mut n = 0;
    let (mut max, mut sum, mut t_at_max) = (0.0f64, 0.0, a.times[pairs[0].0]);
    for &(i, j) in &pairs {
        let (Some(x), Some(y)) = (ca[i], cb[j]) else { continue };
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let d = (x - y).abs();
        n += 1;
        sum += d;
        if d > max {
            max = d;
            t_at_max = a.times[i];
        }
    }
    if n == 0 {
        return Err(CompareError::NoData(quantity.to_string()));
    }
    Ok(CompareReport {
        quantity: quantity.to_string(),
        tol,
        n_common: pairs.len(),
        n_compared: n,
        max_abs_dev: max,
        mean_abs_dev: sum / n as f64,
        t_at_max,
        pass: max <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(times: Vec<f64>, v: Vec<Option<f64>>) -> SeriesTable {
        let mut t = SeriesTable::new(times);
        t.push_column("n_diff", v);
        t
    }

    #[test]
    fn self_comparison_has_zero_deviation() {
        let a = table(vec![0.0, 0.1, 0.2], vec![Some(1.0), Some(0.5), None]);
        let r = compare(&a, &a, "n_diff", 0.0, None).unwrap();
        assert_eq!((r.n_common, r.n_compared, r.max_abs_dev, r.pass), (3, 2, 0.0, true));
    }

    #[test]
    fn only_shared_times_within_the_window_count() {
        let a = table(vec![0.0, 0.1, 0.2, 0.3], vec![Some(0.0), Some(0.0), Some(0.0), Some(0.0)]);
        let b = table(vec![0.0, 0.2, 0.30000000000000004], vec![Some(0.1), Some(0.3), Some(1.0)]);
        let r = compare(&a, &b, "n_diff", 0.2, Some(0.25)).unwrap();
        assert_eq!(r.n_common, 2);
        assert!((r.max_abs_dev - 0.3).abs() < 1e-15 && (r.t_at_max - 0.2).abs() < 1e-15);
        assert!((r.mean_abs_dev - 0.2).abs() < 1e-15);
        assert!(!r.pass);
    }

    #[test]
    fn disjoint_grids_and_unknown_columns_are_errors() {
        let a = table(vec![0.0, 0.1], vec![Some(0.0); 2]);
        let b = table(vec![0.05, 0.15], vec![Some(0.0); 2]);
        assert!(matches!(compare(&a, &b, "n_diff", 1.0, None), Err(CompareError::DisjointGrids(_))));
        assert!(matches!(compare(&a, &a, "ex_flux", 1.0, None), Err(CompareError::Table(_))));
    }
}
