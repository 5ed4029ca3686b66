//! Text formats for moment tables, recurrences and initial values.
//!
//! Moment file:
//!
//! ```text
//! # component 1
//! # eps-order 0
//! # recurrence-hash 3f2a...
//! 0,0
//! 1,1
//! 2,3/2
//! ```
//!
//! Recurrence file:
//!
//! ```text
//! order 2
//! a_0: n + 1
//! a_1: -2*n - 3
//! a_2: n + 2
//! rhs: moments.txt
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{rational, BiPoly, Rational, Var};
use crate::error::{Error, Result};
use crate::expr::parse_expr;
use crate::system::InitialValues;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MomentFile {
    /// 1-based component index.
    pub component: Option<usize>,
    pub eps_order: Option<i64>,
    pub hash: Option<String>,
    pub values: Vec<Rational>,
}

impl MomentFile {
    pub fn new(values: Vec<Rational>) -> Self {
        MomentFile {
            values,
            ..Default::default()
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut out = MomentFile::default();
        for (lineno, line) in text.lines().enumerate() {
            let loc = || format!("{origin}:{}", lineno + 1);
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let mut parts = header.split_whitespace();
                let key = parts.next().unwrap_or("");
                let val = parts.next();
                match (key, val) {
                    ("component", Some(v)) => {
                        out.component = Some(
                            v.parse()
                                .map_err(|_| Error::parse(loc(), "bad component index"))?,
                        )
                    }
                    ("eps-order", Some(v)) => {
                        out.eps_order =
                            Some(v.parse().map_err(|_| Error::parse(loc(), "bad eps-order"))?)
                    }
                    ("recurrence-hash", Some(v)) => out.hash = Some(v.to_string()),
                    _ => {}
                }
                continue;
            }
            let (n, v) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(loc(), "expected a row 'n,p/q'"))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::parse(loc(), "bad row index"))?;
            if n != out.values.len() {
                return Err(Error::parse(
                    loc(),
                    format!("row index {n} out of sequence, expected {}", out.values.len()),
                ));
            }
            let v = rational::parse_rational(v).map_err(|e| relocate(e, loc()))?;
            out.values.push(v);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(c) = self.component {
            writeln!(s, "# component {c}").unwrap();
        }
        if let Some(k) = self.eps_order {
            writeln!(s, "# eps-order {k}").unwrap();
        }
        if let Some(h) = &self.hash {
            writeln!(s, "# recurrence-hash {h}").unwrap();
        }
        for (n, v) in self.values.iter().enumerate() {
            writeln!(s, "{n},{}", rational::format_rational(v)).unwrap();
        }
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }
}

/// Replace the location of a parse error, keeping its message.
pub(crate) fn relocate(e: Error, location: String) -> Error {
    match e {
        Error::Parse { message, .. } => Error::Parse { location, message },
        other => other,
    }
}

/// A recurrence `sum_i a_i(n, ep) F(n+i) = rhs(n)` as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceFile {
    pub coeffs: Vec<BiPoly>,
    pub rhs: Option<String>,
}

impl RecurrenceFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut order: Option<usize> = None;
        let mut coeffs: Vec<Option<BiPoly>> = Vec::new();
        let mut rhs = None;
        for (lineno, line) in text.lines().enumerate() {
            let loc = || format!("{origin}:{}", lineno + 1);
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(d) = line.strip_prefix("order ") {
                let d: usize = d
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(loc(), "bad order"))?;
                order = Some(d);
                coeffs = vec![None; d + 1];
                continue;
            }
            let (key, val) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(loc(), "expected 'a_i: <expr>' or 'rhs: <path>'"))?;
            let key = key.trim();
            if key == "rhs" {
                rhs = Some(val.trim().to_string());
                continue;
            }
            let d = order.ok_or_else(|| Error::parse(loc(), "'order d' must come first"))?;
            let i: usize = key
                .strip_prefix("a_")
                .and_then(|i| i.parse().ok())
                .ok_or_else(|| Error::parse(loc(), format!("unknown key '{key}'")))?;
            if i > d {
                return Err(Error::parse(loc(), format!("coefficient a_{i} exceeds order {d}")));
            }
            let p = parse_expr(val)
                .and_then(|e| e.to_bipoly(Var::N))
                .map_err(|e| relocate(e, loc()))?;
            coeffs[i] = Some(p);
        }
        order.ok_or_else(|| Error::parse(origin, "missing 'order d' line"))?;
        let coeffs: Vec<BiPoly> = coeffs
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::parse(origin, format!("missing coefficient a_{i}"))))
            .collect::<Result<_>>()?;
        if coeffs.iter().all(|c| c.is_zero()) {
            return Err(Error::parse(origin, "all coefficients are zero"));
        }
        Ok(RecurrenceFile { coeffs, rhs })
    }

    pub fn to_text(&self) -> String {
        let mut s = self.body();
        if let Some(r) = &self.rhs {
            writeln!(s, "rhs: {r}").unwrap();
        }
        s
    }

    fn body(&self) -> String {
        let mut s = String::new();
        writeln!(s, "order {}", self.coeffs.len() - 1).unwrap();
        for (i, c) in self.coeffs.iter().enumerate() {
            writeln!(s, "a_{i}: {c}").unwrap();
        }
        s
    }

    /// sha256 of the canonical coefficient text (the rhs path is excluded).
    pub fn hash(&self) -> String {
        hash_text(&self.body())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, &path.display().to_string())
    }
}

pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct InitDocument {
    values: Vec<InitEntry>,
}

#[derive(Serialize, Deserialize)]
struct InitEntry {
    component: usize,
    order: i64,
    values: Vec<String>,
}

/// Initial-values document: `{"values": [{"component": 1, "order": 0, "values": ["0"]}]}`
/// with 1-based component indices.
pub fn parse_initial_values(text: &str, origin: &str) -> Result<InitialValues> {
    let doc: InitDocument = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string()))?;
    let mut init = InitialValues::default();
    for (i, entry) in doc.values.iter().enumerate() {
        let loc = format!("{origin}: values[{i}]");
        if entry.component == 0 {
            return Err(Error::parse(loc, "component indices start at 1"));
        }
        let vals = entry
            .values
            .iter()
            .map(|v| rational::parse_rational(v))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| relocate(e, loc.clone()))?;
        init.set(entry.component - 1, entry.order, vals);
    }
    Ok(init)
}

pub fn initial_values_to_text(init: &InitialValues) -> String {
    let doc = InitDocument {
        values: init
            .iter()
            .map(|((j, k), v)| InitEntry {
                component: j + 1,
                order: k,
                values: v.iter().map(rational::format_rational).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

/// Output file name for component `j` (0-based) at eps-order `k`.
pub fn moment_file_name(j: usize, k: i64) -> String {
    format!("f{}_e{k}.txt", j + 1)
}

pub fn resolve(base: Option<&Path>, path: &str) -> PathBuf {
    match base {
        Some(b) => b.join(path),
        None => PathBuf::from(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{frac, int};

    #[test]
    fn moment_file_round_trip() {
        let mf = MomentFile {
            component: Some(2),
            eps_order: Some(-1),
            hash: Some("abc123".into()),
            values: vec![int(0), int(1), frac(3, 2), frac(-11, 6)],
        };
        let text = mf.to_text();
        assert!(text.starts_with("# component 2\n# eps-order -1\n# recurrence-hash abc123\n0,0\n1,1\n2,3/2\n"));
        assert_eq!(MomentFile::parse(&text, "t").unwrap(), mf);
    }

    #[test]
    fn moment_file_rejects_gaps() {
        let e = MomentFile::parse("0,1\n2,3\n", "t").unwrap_err();
        assert_eq!(e.class(), "parse-error");
        assert!(e.to_string().contains("t:2"));
    }

    #[test]
    fn recurrence_file_round_trip() {
        let text = "order 2\na_0: n + 1\na_1: -2*n - 3\na_2: n + 2\nrhs: h.txt\n";
        let r = RecurrenceFile::parse(text, "t").unwrap();
        assert_eq!(r.coeffs.len(), 3);
        assert_eq!(r.rhs.as_deref(), Some("h.txt"));
        let again = RecurrenceFile::parse(&r.to_text(), "t").unwrap();
        assert_eq!(again, r);
        assert_eq!(r.hash().len(), 64);
        assert!(RecurrenceFile::parse("order 1\na_0: 1\n", "t").is_err());
    }

    #[test]
    fn init_round_trip() {
        let mut init = InitialValues::default();
        init.set(0, 0, vec![int(1), frac(1, 2)]);
        init.set(1, -1, vec![int(0)]);
        let text = initial_values_to_text(&init);
        assert_eq!(parse_initial_values(&text, "t").unwrap(), init);
    }
}
