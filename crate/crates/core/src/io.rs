//! Text persistence of grid functions.
//!
//! ```text
//! # anisolab-field v1
//! dims 2
//! q 1
//! cells 64 64
//! lower 0e0 0e0
//! upper 1e0 1e0
//! spacing 1.5625e-2 1.5625e-2
//! values
//! 0e0
//! ...
//! ```
//!
//! One value per line follows `values`, row-major with the last axis fastest,
//! `Π (cells_i + 1)` lines in total. Reals use the shortest exponent form that
//! parses back to the same `f64`. `spacing` is redundant and checked on read.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

pub const FIELD_MAGIC: &str = "# anisolab-field v1";

fn join<T: std::fmt::LowerExp>(xs: &[T]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

pub fn render_field(field: &ScalarField) -> String {
    let g = field.grid();
    let cells: Vec<String> = g.cells().iter().map(|c| c.to_string()).collect();
    let mut out = String::with_capacity(24 * g.node_count() + 256);
    let _ = writeln!(out, "{FIELD_MAGIC}");
    let _ = writeln!(out, "dims {}", g.dim());
    let _ = writeln!(out, "q {}", g.q());
    let _ = writeln!(out, "cells {}", cells.join(" "));
    let _ = writeln!(out, "lower {}", join(g.lower()));
    let _ = writeln!(out, "upper {}", join(g.upper()));
    let _ = writeln!(out, "spacing {}", join(g.spacing()));
    out.push_str("values\n");
    for v in field.values() {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines.next().ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(no, format!("expected `{key}`")));
    }
    Ok((no, parts.collect()))
}

fn numbers<T: std::str::FromStr>(no: usize, parts: &[&str], want: usize) -> Result<Vec<T>> {
    if parts.len() != want {
        return Err(parse_err(no, format!("expected {want} values, found {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| p.parse::<T>().map_err(|_| parse_err(no, format!("cannot parse `{p}`"))))
        .collect()
}

pub fn parse_field(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, l)) if l == FIELD_MAGIC => {}
        _ => return Err(parse_err(1, format!("expected `{FIELD_MAGIC}`"))),
    }
    let (no, p) = header(&mut lines, "dims")?;
    let dims: usize = numbers(no, &p, 1)?[0];
    let (no, p) = header(&mut lines, "q")?;
    let q: usize = numbers(no, &p, 1)?[0];
    let (no, p) = header(&mut lines, "cells")?;
    let cells: Vec<usize> = numbers(no, &p, dims)?;
    let (no, p) = header(&mut lines, "lower")?;
    let lower: Vec<f64> = numbers(no, &p, dims)?;
    let (no, p) = header(&mut lines, "upper")?;
    let upper: Vec<f64> = numbers(no, &p, dims)?;
    let (no, p) = header(&mut lines, "spacing")?;
    let spacing: Vec<f64> = numbers(no, &p, dims)?;
    let (no, p) = header(&mut lines, "values")?;
    if !p.is_empty() {
        return Err(parse_err(no, "`values` takes no arguments"));
    }
    let grid = Grid::new(&lower, &upper, &cells, q).map_err(|e| parse_err(no, e))?;
    for (a, (&got, &want)) in spacing.iter().zip(grid.spacing()).enumerate() {
        if (got - want).abs() > 1e-12 * want.abs() {
            return Err(Error::Parse(format!("spacing on axis {a} is {got}, grid implies {want}")));
        }
    }
    let mut values = Vec::with_capacity(grid.node_count());
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| parse_err(no, format!("cannot parse `{line}`")))?;
        if !v.is_finite() {
            return Err(parse_err(no, format!("non-finite value `{line}`")));
        }
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(Error::Parse(format!("expected {} values, found {}", grid.node_count(), values.len())));
    }
    Ok(ScalarField::from_values(Arc::new(grid), values))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, render_field(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    parse_field(&fs::read_to_string(path)?)
}
