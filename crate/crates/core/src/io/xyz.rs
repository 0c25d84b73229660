use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Atom, Element, Molecule};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses one XYZ record. Line numbers in errors are 1-based.
///
/// ```
/// let m = molvox::io::parse_xyz("1\nlone carbon\nC 0 0 0\n").unwrap();
/// assert_eq!(m.len(), 1);
/// ```
pub fn parse_xyz(text: &str) -> Result<Molecule> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let count: usize = header
        .trim()
        .parse()
        .map_err(|_| parse_err(1, format!("expected an atom count, found `{}`", header.trim())))?;
    lines.next().ok_or_else(|| parse_err(2, "missing comment line"))?;

    let mut atoms = Vec::with_capacity(count);
    for n in 0..count {
        let line_no = n + 3;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(line_no, format!("header declares {count} atoms, found {n}")))?;
        let mut fields = line.split_whitespace();
        let symbol = fields
            .next()
            .ok_or_else(|| parse_err(line_no, "blank atom line"))?;
        let element = Element::from_symbol(symbol)
            .ok_or_else(|| parse_err(line_no, format!("unknown element `{symbol}`")))?;
        let mut position = [0.0; 3];
        for (axis, slot) in position.iter_mut().enumerate() {
            let field = fields
                .next()
                .ok_or_else(|| parse_err(line_no, format!("missing coordinate {}", axis + 1)))?;
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line_no, format!("malformed coordinate `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite coordinate `{field}`")));
            }
            *slot = v;
        }
        atoms.push(Atom::new(element, position));
    }
    for (extra, line) in lines.enumerate() {
        if !line.trim().is_empty() {
            return Err(parse_err(
                count + 3 + extra,
                format!("header declares {count} atoms but more lines follow"),
            ));
        }
    }
    Ok(Molecule::new(atoms))
}

/// Formats a molecule as XYZ with six decimals per coordinate.
pub fn write_xyz(m: &Molecule, comment: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", m.len());
    let _ = writeln!(out, "{}", comment.replace('\n', " "));
    for a in &m.atoms {
        let [x, y, z] = a.position;
        let _ = writeln!(out, "{:<2} {x:12.6} {y:12.6} {z:12.6}", a.element.symbol());
    }
    out
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<Molecule> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text)
}

pub fn write_xyz_file(path: impl AsRef<Path>, m: &Molecule, comment: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_xyz(m, comment)).map_err(|e| Error::io(path, e))
}

/// Every `*.xyz` file in a directory, sorted by file name.
pub fn read_xyz_dir(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, Molecule)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "xyz"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let m = read_xyz(&p).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse {
                    line,
                    msg: format!("{}: {msg}", p.display()),
                },
                other => other,
            })?;
            Ok((p, m))
        })
        .collect()
}
