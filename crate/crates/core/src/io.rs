//! CSV readers and writers, and the small spec-string grammars used on the
//! command line.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::curve::{DiscountCurve, FlatFamilyParams, InterpolatedCurve, TermStructureDensity};
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

pub const CURVE_HEADER: [&str; 2] = ["maturity_years", "discount_factor"];
pub const DENSITY_HEADER: [&str; 2] = ["maturity_years", "density_per_year"];

/// Formats `v` with 12 significant digits, like C's `%.12g`.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Deserialize)]
struct Row(f64, f64);

fn read_pairs<R: Read>(source: R, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let found = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if found.len() != 2 || found[0] != *header[0] || found[1] != *header[1] {
        return Err(Error::Parse(format!(
            "expected header `{},{}`, found `{}`",
            header[0],
            header[1],
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let Row(x, y) = row.map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Parse(format!("row {}: non-finite value", i + 2)));
        }
        xs.push(x);
        ys.push(y);
    }
    if xs.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok((xs, ys))
}

/// Reads a `maturity_years,discount_factor` CSV into an interpolated curve.
pub fn load_curve<R: Read>(source: R) -> Result<DiscountCurve> {
    let (t, p) = read_pairs(source, CURVE_HEADER)?;
    Ok(DiscountCurve::InterpolatedGrid(InterpolatedCurve::new(
        &t, &p,
    )?))
}

pub fn load_curve_file(path: &std::path::Path) -> Result<DiscountCurve> {
    load_curve(std::fs::File::open(path)?)
}

/// Reads a `maturity_years,density_per_year` CSV. Maturities must form a
/// uniform grid from zero; the tail mass is whatever the samples leave over
/// and must be non-negative within `tol`.
pub fn load_density<R: Read>(source: R, tol: f64) -> Result<TermStructureDensity> {
    let (x, v) = read_pairs(source, DENSITY_HEADER)?;
    let grid = MaturityGrid::from_nodes(x)?;
    let mass = grid.integrate(&v);
    if !(mass.is_finite()) || mass > 1.0 + tol {
        return Err(Error::NotNormalized {
            total: mass,
            tolerance: tol,
        });
    }
    TermStructureDensity::from_samples_unchecked(&grid, v, (1.0 - mass).max(0.0))
}

fn write_pairs<W: Write>(
    sink: W,
    header: [&str; 2],
    rows: impl Iterator<Item = (f64, f64)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for (x, y) in rows {
        w.write_record([fmt_sig(x), fmt_sig(y)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `curve` sampled at the nodes of `grid`.
pub fn write_curve<W: Write>(sink: W, curve: &DiscountCurve, grid: &MaturityGrid) -> Result<()> {
    write_pairs(
        sink,
        CURVE_HEADER,
        grid.nodes().iter().map(|&x| (x, curve.discount(x))),
    )
}

pub fn write_density<W: Write>(sink: W, density: &TermStructureDensity) -> Result<()> {
    let g = density.grid();
    write_pairs(
        sink,
        DENSITY_HEADER,
        g.nodes()
            .iter()
            .copied()
            .zip(density.values().iter().copied()),
    )
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: `{s}` is not a number")))?;
    if v.is_nan() {
        return Err(Error::Parse(format!("{what} is NaN")));
    }
    Ok(v)
}

fn parse_kappa(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "infinity" | "continuous" => Ok(f64::INFINITY),
        other => parse_f64(other, "compounding frequency"),
    }
}

/// Parses `flat:R` (continuous compounding) or `flat:R:κ`; `κ` may be `inf`.
pub fn parse_flat_spec(spec: &str) -> Result<FlatFamilyParams> {
    let mut parts = spec.split(':');
    if parts.next() != Some("flat") {
        return Err(Error::Parse(format!("`{spec}` is not a flat curve spec")));
    }
    let rate = parse_f64(parts.next().unwrap_or(""), "rate")?;
    let kappa = match parts.next() {
        Some(k) => parse_kappa(k)?,
        None => f64::INFINITY,
    };
    if parts.next().is_some() {
        return Err(Error::Parse(format!("trailing fields in `{spec}`")));
    }
    FlatFamilyParams::new(rate, kappa)
}

/// Parametric family named on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilySpec {
    Normal,
    FlatKappa(f64),
}

/// Parses `normal` or `flat-kappa:K`.
pub fn parse_family_spec(spec: &str) -> Result<FamilySpec> {
    let spec = spec.trim();
    if spec == "normal" {
        return Ok(FamilySpec::Normal);
    }
    match spec.split_once(':') {
        Some(("flat-kappa", k)) => {
            let kappa = parse_kappa(k)?;
            if !(kappa > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "kappa must be positive, got {kappa}"
                )));
            }
            Ok(FamilySpec::FlatKappa(kappa))
        }
        _ => Err(Error::Parse(format!(
            "unknown family `{spec}` (expected `normal` or `flat-kappa:K`)"
        ))),
    }
}

/// Parses a comma-separated list of `n` finite numbers, e.g. `0,1.5`.
pub fn parse_point(spec: &str, n: usize) -> Result<Vec<f64>> {
    let v = spec
        .split(',')
        .map(|s| parse_f64(s, "coordinate"))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != n {
        return Err(Error::Parse(format!(
            "expected {n} comma-separated values, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parse("coordinates must be finite".into()));
    }
    Ok(v)
}
