//! Text formats.
//!
//! * Fock coefficients: header `# fock-coeffs v1`, then rows `k,re,im` with
//!   `k = 0, 1, 2, …`.
//! * Signals: header `# signal v1`, then rows `x,re,im` on a uniform grid.
//! * Regions: JSON, e.g. `{"type":"disk","center":[0,0],"r":1.0}`.
//!
//! Blank lines and further `#` comment lines are ignored. Numbers are written
//! in the shortest form that reads back to the same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::gabor::SampledSignal;
use crate::{Error, FockCoefficients, Region, Result};

pub const COEFFS_HEADER: &str = "# fock-coeffs v1";
pub const SIGNAL_HEADER: &str = "# signal v1";
/// Allowed deviation of a sample position from the uniform grid, relative to
/// the spacing.
const SPACING_TOL: f64 = 1e-6;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Data rows of a headed file as `(line number, three fields)`.
fn rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, [&'a str; 3])>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, l)) if l == header => {}
        Some((i, l)) => {
            return Err(parse_err(
                i,
                format!("expected header `{header}`, found `{l}`"),
            ))
        }
        None => {
            return Err(parse_err(
                1,
                format!("empty file, expected header `{header}`"),
            ))
        }
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        let fields: [&str; 3] = fields.try_into().map_err(|f: Vec<&str>| {
            parse_err(i, format!("expected 3 fields, found {}", f.len()))
        })?;
        out.push((i, fields));
    }
    Ok(out)
}

fn number(line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("`{s}` is not finite")));
    }
    Ok(v)
}

pub fn parse_coefficients(text: &str) -> Result<FockCoefficients> {
    let mut coeffs = Vec::new();
    for (line, [k, re, im]) in rows(text, COEFFS_HEADER)? {
        let k: usize = k
            .parse()
            .map_err(|_| parse_err(line, format!("`{k}` is not an index")))?;
        if k != coeffs.len() {
            return Err(parse_err(
                line,
                format!("expected index {}, found {k}", coeffs.len()),
            ));
        }
        coeffs.push(Complex64::new(number(line, re)?, number(line, im)?));
    }
    if coeffs.is_empty() {
        return Err(parse_err(1, "no coefficients"));
    }
    FockCoefficients::new(coeffs)
}

pub fn format_coefficients(f: &FockCoefficients) -> String {
    let mut out = format!("{COEFFS_HEADER}\n");
    for (k, c) in f.coeffs().iter().enumerate() {
        writeln!(out, "{k},{:e},{:e}", c.re, c.im).expect("write to string");
    }
    out
}

pub fn parse_signal(text: &str) -> Result<SampledSignal> {
    let mut xs = Vec::new();
    let mut samples = Vec::new();
    for (line, [x, re, im]) in rows(text, SIGNAL_HEADER)? {
        xs.push((line, number(line, x)?));
        samples.push(Complex64::new(number(line, re)?, number(line, im)?));
    }
    if xs.len() < 2 {
        return Err(parse_err(
            xs.first().map_or(1, |p| p.0),
            "a signal needs at least two samples",
        ));
    }
    let x0 = xs[0].1;
    let dx = (xs[xs.len() - 1].1 - x0) / (xs.len() - 1) as f64;
    if dx.is_nan() || dx <= 0.0 {
        return Err(parse_err(xs[1].0, "sample positions must increase"));
    }
    for (j, &(line, x)) in xs.iter().enumerate() {
        if (x - (x0 + j as f64 * dx)).abs() > SPACING_TOL * dx {
            return Err(parse_err(
                line,
                format!("x = {x} is off the uniform grid of spacing {dx}"),
            ));
        }
    }
    SampledSignal::new(samples, x0, dx)
}

pub fn format_signal(f: &SampledSignal) -> String {
    let mut out = format!("{SIGNAL_HEADER}\n");
    for (j, s) in f.samples().iter().enumerate() {
        writeln!(out, "{:e},{:e},{:e}", f.x(j), s.re, s.im).expect("write to string");
    }
    out
}

/// Parses and validates a region.
pub fn parse_region(text: &str) -> Result<Region> {
    let region: Region = serde_json::from_str(text)?;
    region.validate()?;
    Ok(region)
}

pub fn format_region(region: &Region) -> Result<String> {
    Ok(serde_json::to_string(region)?)
}

pub fn read_coefficients(path: impl AsRef<Path>) -> Result<FockCoefficients> {
    parse_coefficients(&std::fs::read_to_string(path)?)
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<SampledSignal> {
    parse_signal(&std::fs::read_to_string(path)?)
}

pub fn read_region(path: impl AsRef<Path>) -> Result<Region> {
    parse_region(&std::fs::read_to_string(path)?)
}
