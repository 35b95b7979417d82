use std::io::Write;
use std::path::Path;

use corrdyn::C64;

use crate::CliError;

/// Shortest round-trip representation; exponent form outside [1e-5, 1e16).
pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_c(z: C64) -> [String; 2] {
    [fmt(z.re), fmt(z.im)]
}

pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(|s| s.as_ref().to_string()).collect());
    }

    /// Stacks per-case tables under a leading `case` column.
    pub fn by_case(parts: Vec<(String, Csv)>) -> Result<Csv, CliError> {
        let mut out: Option<Csv> = None;
        for (name, part) in parts {
            let acc = out.get_or_insert_with(|| {
                let mut header = vec!["case".to_string()];
                header.extend(part.header.iter().cloned());
                Csv { header, rows: Vec::new() }
            });
            if acc.header[1..] != part.header[..] {
                return Err(CliError::config(format!("case '{name}' produces different columns")));
            }
            for row in part.rows {
                let mut cells = vec![name.clone()];
                cells.extend(row);
                acc.rows.push(cells);
            }
        }
        out.ok_or_else(|| CliError::config("no cases"))
    }

    pub fn render(&self) -> String {
        let mut buf = self.header.join(",");
        buf.push('\n');
        for r in &self.rows {
            buf.push_str(&r.join(","));
            buf.push('\n');
        }
        buf
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
