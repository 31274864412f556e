//! Plain-text file formats. All indices are 0-based.
//!
//! Matrix file: a header line `n m` (servers, GPUs per server), then `m*n`
//! lines of `m*n` whitespace-separated nonnegative integers. A plain `N x N`
//! matrix uses the header `N 1`.
//!
//! ```text
//! 3 2
//! 0 0 1 1 0 0
//! ...
//! ```
//!
//! Schedule file: a header line `N slots` (port count, slot count), then one
//! line per slot listing its connections as `input>output`:
//!
//! ```text
//! 6 2
//! 0: 0>2 1>3 2>4 3>5 4>0 5>1
//! 1: 0>3 1>2 2>5 3>4 4>1 5>0
//! ```
//!
//! Blank lines and lines starting with `#` are ignored in both formats.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{BlockMatrix, BlockShape, IntMatrix, SubPermutation};

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Lines that carry content, with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        (!t.is_empty() && !t.starts_with('#')).then_some((i + 1, l))
    })
}

/// Whitespace-separated tokens with their 1-based starting columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let col = offset + start + 1;
        let tok = &tail[..len];
        offset += start + len;
        rest = &tail[len..];
        Some((col, tok))
    })
}

fn parse_num<T: std::str::FromStr>(line: usize, col: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, col, format!("expected {what}, found {tok:?}")))
}

fn parse_header(text: &str, usage: &str) -> Result<(usize, usize, usize)> {
    let (line_no, line) = content_lines(text)
        .next()
        .ok_or_else(|| parse_err(1, 1, format!("missing header `{usage}`")))?;
    let toks: Vec<_> = tokens(line).collect();
    if toks.len() != 2 {
        return Err(parse_err(line_no, 1, format!("header must be `{usage}`")));
    }
    let a = parse_num(line_no, toks[0].0, toks[0].1, "a count")?;
    let b = parse_num(line_no, toks[1].0, toks[1].1, "a count")?;
    Ok((line_no, a, b))
}

pub fn parse_matrix(text: &str) -> Result<BlockMatrix> {
    let (header_line, n, m) = parse_header(text, "n m")?;
    let shape = BlockShape::new(m, n).map_err(|e| parse_err(header_line, 1, e.to_string()))?;
    let p = shape.ports();
    let mut data = Vec::with_capacity(p * p);
    let mut rows = 0;
    for (line_no, line) in content_lines(text).skip(1) {
        if rows == p {
            return Err(parse_err(line_no, 1, format!("expected {p} rows, found more")));
        }
        let mut count = 0;
        for (col, tok) in tokens(line) {
            if count == p {
                return Err(parse_err(line_no, col, format!("row has more than {p} entries")));
            }
            data.push(parse_num::<u64>(line_no, col, tok, "a nonnegative integer")?);
            count += 1;
        }
        if count < p {
            return Err(parse_err(
                line_no,
                line.len() + 1,
                format!("row has {count} entries, expected {p}"),
            ));
        }
        rows += 1;
    }
    if rows < p {
        let last = text.lines().count().max(1);
        return Err(parse_err(last, 1, format!("expected {p} rows, found {rows}")));
    }
    let x = IntMatrix::from_vec(p, p, data)?;
    BlockMatrix::new(shape, x)
}

pub fn write_matrix(x: &BlockMatrix) -> String {
    let shape = x.shape();
    format!("{} {}\n{}", shape.n(), shape.m(), x.data())
}

/// A parsed schedule file. Slots are kept as raw connection lists so that
/// conflicting slots can be reported rather than rejected at parse time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleFile {
    pub ports: usize,
    pub declared_slots: usize,
    pub slots: Vec<Vec<(usize, usize)>>,
}

impl ScheduleFile {
    pub fn from_slots(ports: usize, slots: &[SubPermutation]) -> Self {
        Self {
            ports,
            declared_slots: slots.len(),
            slots: slots.iter().map(|s| s.pairs().collect()).collect(),
        }
    }

    /// Converts each slot, reporting the first conflicting one by index.
    pub fn to_subpermutations(&self) -> std::result::Result<Vec<SubPermutation>, (usize, Error)> {
        self.slots
            .iter()
            .enumerate()
            .map(|(d, pairs)| {
                SubPermutation::from_pairs(self.ports, pairs.iter().copied()).map_err(|e| (d, e))
            })
            .collect()
    }
}

pub fn parse_schedule(text: &str) -> Result<ScheduleFile> {
    let (_, ports, declared_slots) = parse_header(text, "N slots")?;
    let mut slots = Vec::new();
    for (line_no, line) in content_lines(text).skip(1) {
        let colon = line
            .find(':')
            .ok_or_else(|| parse_err(line_no, 1, "expected `d: r>c ...`"))?;
        let label = line[..colon].trim();
        let label_col = line.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1;
        let d: usize = parse_num(line_no, label_col, label, "a slot index")?;
        if d != slots.len() {
            return Err(parse_err(
                line_no,
                label_col,
                format!("expected slot {}, found slot {d}", slots.len()),
            ));
        }
        let mut pairs = Vec::new();
        for (col, tok) in tokens(&line[colon + 1..]) {
            let col = col + colon + 1;
            let (r, c) = tok
                .split_once('>')
                .ok_or_else(|| parse_err(line_no, col, format!("expected `row>col`, found {tok:?}")))?;
            let r: usize = parse_num(line_no, col, r, "an input port")?;
            let c: usize = parse_num(line_no, col, c, "an output port")?;
            if r >= ports || c >= ports {
                return Err(parse_err(
                    line_no,
                    col,
                    format!("port out of range for {ports} ports"),
                ));
            }
            pairs.push((r, c));
        }
        slots.push(pairs);
    }
    Ok(ScheduleFile {
        ports,
        declared_slots,
        slots,
    })
}

pub fn write_schedule(ports: usize, slots: &[SubPermutation]) -> String {
    let mut out = format!("{ports} {}\n", slots.len());
    for (d, slot) in slots.iter().enumerate() {
        let _ = write!(out, "{d}:");
        for (r, c) in slot.pairs() {
            let _ = write!(out, " {r}>{c}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_roundtrip() {
        let text = "2 2\n0 0 1 2\n0 0 3 0\n4 0 0 0\n0 5 0 0\n";
        let x = parse_matrix(text).unwrap();
        assert_eq!(x.shape(), BlockShape::new(2, 2).unwrap());
        assert_eq!(x.block(0, 1), IntMatrix::from_rows(&[[1, 2], [3, 0]]).unwrap());
        assert_eq!(write_matrix(&x), text);
        assert_eq!(parse_matrix(&write_matrix(&x)).unwrap(), x);
    }

    #[test]
    fn plain_matrix_header() {
        let x = parse_matrix("# plain\n2 1\n3 1\n\n0 0\n").unwrap();
        assert_eq!(x.shape().m(), 1);
        assert_eq!(x.data(), &IntMatrix::from_rows(&[[3, 1], [0, 0]]).unwrap());
    }

    #[test]
    fn matrix_errors_carry_positions() {
        let err = parse_matrix("2 1\n1 x\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 3, .. }), "{err}");
        let err = parse_matrix("2 1\n1 0 0\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 5, .. }), "{err}");
        let err = parse_matrix("2 1\n1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        let err = parse_matrix("2 1\n1 -1\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 3, .. }), "{err}");
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("0 2\n").is_err());
        assert!(parse_matrix("1 1\n0\n0\n").is_err());
    }

    #[test]
    fn schedule_roundtrip() {
        let slots = vec![
            SubPermutation::from_pairs(3, [(0, 1), (2, 0)]).unwrap(),
            SubPermutation::empty(3),
        ];
        let text = write_schedule(3, &slots);
        assert_eq!(text, "3 2\n0: 0>1 2>0\n1:\n");
        let file = parse_schedule(&text).unwrap();
        assert_eq!(file.to_subpermutations().unwrap(), slots);
        assert_eq!(file, ScheduleFile::from_slots(3, &slots));
    }

    #[test]
    fn schedule_conflicts_survive_parsing() {
        let file = parse_schedule("3 1\n0: 0>1 2>1\n").unwrap();
        let (d, err) = file.to_subpermutations().unwrap_err();
        assert_eq!(d, 0);
        assert_eq!(err, Error::DuplicateColumn { col: 1 });
    }

    #[test]
    fn schedule_errors_carry_positions() {
        let err = parse_schedule("3 1\n0: 0>1 2-1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 8, .. }), "{err}");
        let err = parse_schedule("3 1\n0: 0>3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_schedule("3 2\n1: 0>1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, column: 1, .. }), "{err}");
    }
}
