//! Text formats for operators, states and run configuration.
//!
//! Operator files hold one or more blocks. A block is a line with the
//! dimension `d` followed by `d` rows of `d` whitespace-separated `re,im`
//! entries. State files hold a dimension line followed by `d` `re,im`
//! entries laid out freely. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{c, CMatrix, CVector, C64, MAX_DIM};

struct Lines<'a> {
    path: &'a str,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a str, text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { path, items, pos: 0 }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line,
            message: message.into(),
        }
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(0, |l| l.0)
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.items.get(self.pos).copied();
        self.pos += 1;
        item
    }

    fn done(&self) -> bool {
        self.pos >= self.items.len()
    }

    fn dimension(&mut self) -> Result<usize> {
        let (line, text) = self
            .next()
            .ok_or_else(|| self.err(self.last_line(), "expected a dimension line"))?;
        let d: usize = text
            .parse()
            .map_err(|_| self.err(line, format!("expected a dimension, found '{text}'")))?;
        if d == 0 || d > MAX_DIM {
            return Err(self.err(line, format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        Ok(d)
    }
}

fn parse_entry(token: &str) -> std::result::Result<C64, String> {
    let (re, im) = token
        .split_once(',')
        .ok_or_else(|| format!("entry '{token}' is not of the form re,im"))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("invalid number '{s}' in entry '{token}'"))
    };
    Ok(c(num(re)?, num(im)?))
}

fn matrix_block(lines: &mut Lines) -> Result<CMatrix> {
    let d = lines.dimension()?;
    let mut m = CMatrix::zeros(d, d);
    for r in 0..d {
        let (line, text) = lines
            .next()
            .ok_or_else(|| lines.err(lines.last_line(), format!("expected {d} rows, found {r}")))?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != d {
            return Err(lines.err(line, format!("expected {d} entries, found {}", tokens.len())));
        }
        for (col, tok) in tokens.iter().enumerate() {
            m[(r, col)] = parse_entry(tok).map_err(|e| lines.err(line, e))?;
        }
    }
    Ok(m)
}

/// Every block of an operator file.
pub fn parse_matrices(path: &str, text: &str) -> Result<Vec<CMatrix>> {
    let mut lines = Lines::new(path, text);
    let mut out = Vec::new();
    while !lines.done() {
        out.push(matrix_block(&mut lines)?);
    }
    if out.is_empty() {
        return Err(lines.err(1, "no matrix found"));
    }
    if let Some(m) = out.iter().find(|m| m.nrows() != out[0].nrows()) {
        return Err(lines.err(
            lines.last_line(),
            format!("blocks differ in dimension ({} vs {})", out[0].nrows(), m.nrows()),
        ));
    }
    Ok(out)
}

/// A file holding exactly one matrix.
pub fn parse_matrix(path: &str, text: &str) -> Result<CMatrix> {
    let mut ms = parse_matrices(path, text)?;
    if ms.len() != 1 {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            message: format!("expected one matrix, found {}", ms.len()),
        });
    }
    Ok(ms.remove(0))
}

pub fn parse_state(path: &str, text: &str) -> Result<CVector> {
    let mut lines = Lines::new(path, text);
    let d = lines.dimension()?;
    let mut amps = Vec::with_capacity(d);
    while let Some((line, text)) = lines.next() {
        for tok in text.split_whitespace() {
            if amps.len() == d {
                return Err(lines.err(line, format!("more than {d} entries")));
            }
            amps.push(parse_entry(tok).map_err(|e| lines.err(line, e))?);
        }
    }
    if amps.len() != d {
        return Err(lines.err(lines.last_line(), format!("expected {d} entries, found {}", amps.len())));
    }
    Ok(CVector::from_vec(amps))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    parse_matrix(&path.display().to_string(), &read(path)?)
}

pub fn read_matrices(path: &Path) -> Result<Vec<CMatrix>> {
    parse_matrices(&path.display().to_string(), &read(path)?)
}

pub fn read_state(path: &Path) -> Result<CVector> {
    parse_state(&path.display().to_string(), &read(path)?)
}

/// Inverse of [`parse_matrices`] for one block.
pub fn format_matrix(m: &CMatrix) -> String {
    let mut s = format!("{}\n", m.nrows());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|col| format!("{:e},{:e}", m[(r, col)].re, m[(r, col)].im))
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Flat `key = value` lines.
pub fn parse_config(path: &str, text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (line, raw) in Lines::new(path, text).items {
        let err = |message: String| Error::Parse {
            path: path.to_string(),
            line,
            message,
        };
        let (k, v) = raw
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, found '{raw}'")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(err("empty key".into()));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(format!("duplicate key '{k}'")));
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&path.display().to_string(), &read(path)?)
}

/// SHA-256 over the sorted `key=value` lines, lowercase hex.
pub fn config_hash(config: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (k, v) in config {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `# config_sha256=<hex> seed=<seed>`.
pub fn write_provenance<W: Write>(out: &mut W, config: &BTreeMap<String, String>, seed: u64) -> Result<()> {
    writeln!(out, "# config_sha256={} seed={seed}", config_hash(config))?;
    Ok(())
}
