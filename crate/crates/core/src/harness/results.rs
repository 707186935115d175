//! Benchmark results and their CSV/JSON serialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

/// CSV column order; stable across releases.
pub const CSV_COLUMNS: [&str; 13] = [
    "experiment",
    "model",
    "d",
    "loss",
    "beta",
    "beta0",
    "n",
    "method",
    "replications",
    "rmse",
    "mean",
    "variance",
    "seed",
];

/// Aggregate over the replications of one `(level, n, method)` combination.
///
/// `rmse` is the root mean square of per-replication relative errors.
/// `mean`/`variance` describe the per-replication scalar estimate (CVaR, the
/// directional derivative `θᵀĝ` for gradient runs, or the reference-evaluated
/// objective for portfolio runs). `replications` counts successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub experiment: String,
    pub model: String,
    pub d: usize,
    pub loss: String,
    pub beta: f64,
    pub beta0: f64,
    pub n: usize,
    pub method: String,
    pub replications: usize,
    pub rmse: f64,
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
    #[serde(default)]
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Per-replication relative errors, in replication order.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

impl Cell {
    pub fn median_error(&self) -> f64 {
        median(&self.errors)
    }
}

/// Value every method in a level is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkValue {
    pub beta: f64,
    pub source: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatio {
    pub beta: f64,
    pub beta0: f64,
    pub n: usize,
    pub var_is: f64,
    pub var_sa: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub benchmarks: Vec<BenchmarkValue>,
    pub variance_ratios: Vec<VarianceRatio>,
}

impl BenchmarkResult {
    pub fn cell(&self, beta: f64, n: usize, method: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.beta == beta && c.n == n && c.method == method)
    }
}

/// Sibling path of the JSON sidecar for a CSV output path.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the CSV table to `path` and the config echo plus summaries to the
/// `.json` sibling.
pub fn emit_results(result: &BenchmarkResult, path: &Path) -> Result<()> {
    std::fs::write(path, results_csv(&result.cells)?).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(result)?;
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

/// Renders cells as CSV text. Floats use the shortest representation that
/// parses back to the same value.
pub fn results_csv(cells: &[Cell]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for c in cells {
        w.write_record([
            c.experiment.clone(),
            c.model.clone(),
            c.d.to_string(),
            c.loss.clone(),
            c.beta.to_string(),
            c.beta0.to_string(),
            c.n.to_string(),
            c.method.clone(),
            c.replications.to_string(),
            c.rmse.to_string(),
            c.mean.to_string(),
            c.variance.to_string(),
            c.seed.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses a results CSV produced by [`results_csv`].
pub fn parse_results_csv(input: &[u8]) -> Result<Vec<Cell>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::InvalidInput(format!("unexpected results header {header:?}")));
    }
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let f = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::NonNumeric {
                line,
                column: i + 1,
                value: rec[i].to_string(),
            })
        };
        let u = |i: usize| -> Result<u64> {
            rec[i].parse().map_err(|_| Error::NonNumeric {
                line,
                column: i + 1,
                value: rec[i].to_string(),
            })
        };
        cells.push(Cell {
            experiment: rec[0].to_string(),
            model: rec[1].to_string(),
            d: u(2)? as usize,
            loss: rec[3].to_string(),
            beta: f(4)?,
            beta0: f(5)?,
            n: u(6)? as usize,
            method: rec[7].to_string(),
            replications: u(8)? as usize,
            rmse: f(9)?,
            mean: f(10)?,
            variance: f(11)?,
            seed: u(12)?,
            failures: 0,
            failure: None,
            errors: Vec::new(),
        });
    }
    Ok(cells)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<Cell>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_results_csv(&bytes)
}

/// Median of finite values; NaN when there are none.
pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let s = results_csv(&[]).unwrap();
        assert_eq!(s, CSV_COLUMNS.join(",") + "\n");
        assert!(parse_results_csv(s.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn median_handles_parity_and_nan() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert_eq!(median(&[f64::NAN, 5.0]), 5.0);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(parse_results_csv(b"a,b\n1,2\n").is_err());
    }
}
