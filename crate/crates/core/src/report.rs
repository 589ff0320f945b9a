//! Residual reports along a trajectory, with CSV and JSON output.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::euler_lagrange::Regime;

/// Number format used for every machine-readable output: 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes rows of already formatted cells as CSV with a header row.
pub fn write_csv(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidProblem(format!("CSV output failed: {e}"));
    writer.write_record(header).map_err(io)?;
    for row in rows {
        writer.write_record(row).map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::InvalidProblem(format!("CSV output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV cells are UTF-8"))
}

/// Euler–Lagrange, DuBois–Reymond and delay-hypothesis residuals on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    pub regimes: Vec<Regime>,
    /// Euler–Lagrange residual vector per grid point.
    pub el: Vec<Vec<f64>>,
    pub dr_quantity: Vec<f64>,
    pub dr_residual: Vec<f64>,
    /// Delay-hypothesis residual, defined only up to `t2 − τ`.
    pub cdur: Vec<Option<f64>>,
    pub el_sup_first: f64,
    pub el_sup_second: f64,
    pub dr_sup: f64,
    pub cdur_sup: f64,
    pub constraint_defect: Vec<f64>,
    pub constraint_defect_sup: f64,
    pub hypothesis_violated: bool,
    /// `None` without constraints.
    pub abnormal: Option<bool>,
}

impl ResidualReport {
    pub fn el_sup(&self) -> f64 {
        self.el_sup_first.max(self.el_sup_second)
    }

    /// Columns `t, regime, el_0.., dr_quantity, dr_residual, cdur`; `cdur` is empty past the switch.
    pub fn to_csv(&self) -> Result<String> {
        let n = self.el.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string(), "regime".to_string()];
        header.extend((0..n).map(|i| format!("el_{i}")));
        header.extend(["dr_quantity", "dr_residual", "cdur"].map(String::from));
        let rows: Vec<Vec<String>> = (0..self.grid.len())
            .map(|i| {
                let mut row = vec![format_number(self.grid[i]), self.regimes[i].name().to_string()];
                row.extend(self.el[i].iter().map(|v| format_number(*v)));
                row.push(format_number(self.dr_quantity[i]));
                row.push(format_number(self.dr_residual[i]));
                row.push(self.cdur[i].map(format_number).unwrap_or_default());
                row
            })
            .collect();
        write_csv(&header, &rows)
    }

    /// Sup-norms and flags.
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "points": self.grid.len(),
            "el_sup_first": self.el_sup_first,
            "el_sup_second": self.el_sup_second,
            "dr_sup": self.dr_sup,
            "cdur_sup": self.cdur_sup,
            "constraint_defect": self.constraint_defect,
            "constraint_defect_sup": self.constraint_defect_sup,
            "hypothesis_violated": self.hypothesis_violated,
            "abnormal": self.abnormal,
        })
    }
}
