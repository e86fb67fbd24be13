//! Tabular study output and convergence-rate fitting.

use std::io::Write;

use super::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Empty,
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => write!(f, "{v:.16e}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Rows of measurements; rates live in extra columns of the same table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyReport {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl StudyReport {
    pub fn new(columns: &[&str]) -> Self {
        StudyReport { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    /// `log(e_k / e_{k+1}) / log(h_k / h_{k+1})` for consecutive points.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log e` against `log h`.
    pub slope: f64,
    /// Root-mean-square residual of that fit (natural log units).
    pub residual: f64,
}

/// Convergence rates of `errors` measured at step sizes `steps`.
pub fn estimate_rates(errors: &[f64], steps: &[f64]) -> Result<Rates, CliError> {
    if errors.len() != steps.len() {
        return Err(CliError::Config(format!("{} errors for {} steps", errors.len(), steps.len())));
    }
    if errors.len() < 3 {
        return Err(CliError::Config(format!("rate fits need at least 3 points, got {}", errors.len())));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(CliError::Config(format!("rates need positive errors, got {e}")));
    }
    if let Some(h) = steps.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
        return Err(CliError::Config(format!("rates need positive steps, got {h}")));
    }
    let pairwise = errors
        .windows(2)
        .zip(steps.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let (slope, residual) = fit_slope(steps, errors);
    Ok(Rates { pairwise, slope, residual })
}

/// Least-squares slope of `log y` against `log x`, with RMS residual.
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / n).sqrt())
}
