//! Plain-text emission shared by every CSV writer: comma separated, header
//! row, LF line endings, floats with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Scientific notation with 17 significant digits, enough to round-trip
/// any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    /// Append a row of pre-formatted cells.
    pub fn row(&mut self, cells: &[String]) -> &mut Self {
        assert_eq!(cells.len(), self.columns, "row width does not match header");
        let _ = writeln!(self.text, "{}", cells.join(","));
        self
    }

    pub fn floats(&mut self, values: &[f64]) -> &mut Self {
        let cells: Vec<String> = values.iter().map(|&v| fmt_float(v)).collect();
        self.row(&cells)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.text.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 0.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn layout() {
        let mut c = Csv::new(&["t", "signal"]);
        c.floats(&[0.0, 1.0]);
        assert_eq!(c.as_str(), "t,signal\n0.0000000000000000e0,1.0000000000000000e0\n");
    }
}
