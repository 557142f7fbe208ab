//! Tables emitted as CSV and as aligned plain text.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }

    /// Columns padded to their widest cell; numbers right-aligned.
    pub fn to_text(&self) -> String {
        let width = |j: usize| {
            self.rows.iter().map(|r| r[j].chars().count()).chain([self.header[j].chars().count()]).max().unwrap_or(0)
        };
        let widths: Vec<usize> = (0..self.header.len()).map(width).collect();
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            let mut s = String::new();
            for (j, c) in cells.iter().enumerate() {
                if j > 0 {
                    s.push_str("  ");
                }
                let pad = widths[j] - c.chars().count();
                if looks_numeric(c) {
                    s.push_str(&" ".repeat(pad));
                    s.push_str(c);
                } else {
                    s.push_str(c);
                    s.push_str(&" ".repeat(pad));
                }
            }
            writeln!(out, "{}", s.trim_end()).unwrap();
        };
        line(&mut out, &self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule);
        for r in &self.rows {
            line(&mut out, r);
        }
        out
    }
}

fn looks_numeric(s: &str) -> bool {
    !s.is_empty() && s.parse::<f64>().is_ok()
}

pub fn fixed(x: f64, places: usize) -> String {
    format!("{x:.places$}")
}

pub fn opt_fixed(x: Option<f64>, places: usize) -> String {
    x.map(|v| fixed(v, places)).unwrap_or_default()
}

/// "46.8 (39.0, 56.2)".
pub fn or_display(or: f64, lo: f64, hi: f64, places: usize) -> String {
    format!("{} ({}, {})", fixed(or, places), fixed(lo, places), fixed(hi, places))
}

pub fn percent(part: usize, whole: usize) -> String {
    if whole == 0 {
        String::new()
    } else {
        fixed(100.0 * part as f64 / whole as f64, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_text() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a, b".into(), "1.50".into()]);
        t.push(vec!["long name".into(), "10.25".into()]);
        assert_eq!(String::from_utf8(t.to_csv()).unwrap(), "name,value\n\"a, b\",1.50\nlong name,10.25\n");
        let text = t.to_text();
        assert_eq!(text.lines().nth(2).unwrap(), "a, b        1.50");
        assert_eq!(text.lines().nth(3).unwrap(), "long name  10.25");
    }

    #[test]
    fn displays() {
        assert_eq!(or_display(46.845, 39.04, 56.21, 1), "46.8 (39.0, 56.2)");
        assert_eq!(percent(1, 3), "33.3");
        assert_eq!(percent(1, 0), "");
    }
}
