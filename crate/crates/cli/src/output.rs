//! CSV tables with a `#` comment header.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` lines after the config echo.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![], notes: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, echo: &str) -> String {
        let mut out = format!("# chemotaxis {VERSION}\n# table: {}\n", self.name);
        for line in echo.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        for n in &self.notes {
            out.push_str("# ");
            out.push_str(n);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, echo: &str) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.render(echo))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
        let x = std::f64::consts::PI;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn header_then_rows() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![1.0.into(), "x".into()]);
        t.notes.push("conic: Hyperbola".into());
        let s = t.render("command = \"sweep\"\n");
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# chemotaxis "));
        assert_eq!(lines[2], "# command = \"sweep\"");
        assert_eq!(lines[3], "# conic: Hyperbola");
        assert_eq!(lines[4], "a,b");
        assert_eq!(lines[5], "1.0000000000000000e0,x");
    }
}
