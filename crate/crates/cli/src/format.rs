//! Plain tables rendered as CSV or Markdown, and `%g`-style numbers.

use std::io::Write;

use crate::CliError;

/// Formats like C's `%g` with 6 significant digits.
pub fn fmt_g(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        trim_fraction(&format!("{v:.*}", (5 - exp) as usize))
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_g).unwrap_or_else(|| "n/a".into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers).map_err(CliError::output)?;
        for row in &self.rows {
            w.write_record(row).map_err(CliError::output)?;
        }
        w.flush().map_err(|e| CliError::output(e.into()))?;
        Ok(())
    }

    pub fn write_markdown<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "| {} |", self.headers.join(" | "))?;
        let rule: Vec<&str> = self.headers.iter().map(|_| "---").collect();
        writeln!(out, "|{}|", rule.join("|"))?;
        for row in &self.rows {
            writeln!(out, "| {} |", row.join(" | "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format_matches_c() {
        assert_eq!(fmt_g(0.75), "0.75");
        assert_eq!(fmt_g(100.0), "100");
        assert_eq!(fmt_g(212.8049), "212.805");
        assert_eq!(fmt_g(1234567.0), "1.23457e+06");
        assert_eq!(fmt_g(999999.6), "1e+06");
        assert_eq!(fmt_g(0.0001234567), "0.000123457");
        assert_eq!(fmt_g(0.00001234567), "1.23457e-05");
        assert_eq!(fmt_g(-2.5), "-2.5");
        assert_eq!(fmt_g(-0.0), "0");
        assert_eq!(fmt_g(1.0 / 3.0), "0.333333");
    }

    #[test]
    fn markdown_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        let mut buf = Vec::new();
        t.write_markdown(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "| a | b |\n|---|---|\n| 1 | 2 |\n");
    }
}
