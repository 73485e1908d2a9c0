//! Tabular check results shared by the verification batteries.

use serde::Serialize;
use std::fmt::Write;

/// Output schema version written into every JSON document and CSV header.
pub const SCHEMA_VERSION: u32 = 1;

/// One row of a check battery: a named statistic compared to a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passes when `statistic <= threshold` (residual-style checks).
    pub fn at_most(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }

    /// Passes when `statistic > threshold` (p-value-style checks).
    pub fn above(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic > threshold,
        }
    }

    /// Passes when `statistic < threshold` (negative controls on p-values).
    pub fn below(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic < threshold,
        }
    }
}

pub fn all_pass(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

/// CSV body (header row plus one line per check).
pub fn rows_to_csv(rows: &[CheckRow]) -> String {
    let mut out = String::from("test,statistic,threshold,pass\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{}",
            r.test, r.statistic, r.threshold, r.pass
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let rows = [
            CheckRow::at_most("a", 1e-13, 1e-12),
            CheckRow::above("b", 0.001, 0.01),
        ];
        assert_eq!(
            rows_to_csv(&rows),
            "test,statistic,threshold,pass\na,1e-13,1e-12,true\nb,1e-3,1e-2,false\n"
        );
        assert!(!all_pass(&rows));
    }
}
