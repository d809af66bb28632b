use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// JSON lines to stdout and tables to stderr; `--pretty` sends only the
/// tables, to stdout.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    pub pretty: bool,
}

impl Output {
    pub fn record<T: Serialize>(&self, value: &T) {
        if self.pretty {
            return;
        }
        let line = serde_json::to_string(value).expect("records serialize");
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
    }

    pub fn table(&self, table: &Table) {
        let text = table.render();
        if self.pretty {
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
        } else {
            let _ = std::io::stderr().lock().write_all(text.as_bytes());
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub title: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            title: None,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn titled(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    /// Left-aligned first column, right-aligned numbers.
    pub fn render(&self) -> String {
        let cols = self.header.len();
        let mut width = vec![0; cols];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (k, cell) in r.iter().enumerate().take(cols) {
                width[k] = width[k].max(cell.chars().count());
            }
        }
        let line = |r: &Vec<String>| {
            let cells: Vec<String> = (0..cols)
                .map(|k| {
                    let c = r.get(k).map(String::as_str).unwrap_or("");
                    if k == 0 {
                        format!("{c:<w$}", w = width[k])
                    } else {
                        format!("{c:>w$}", w = width[k])
                    }
                })
                .collect();
            cells.join("  ").trim_end().to_string() + "\n"
        };
        let mut s = String::new();
        if let Some(t) = &self.title {
            s.push_str(t);
            s.push('\n');
        }
        s.push_str(&line(&self.header));
        let total: usize = width.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
        s.push_str(&"-".repeat(total));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&line(r));
        }
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over the little-endian bytes of each slice in turn.
pub fn digest_f64(parts: &[&[f64]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        for v in *p {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn fmt_sci(v: f64) -> String {
    format!("{v:.3e}")
}
