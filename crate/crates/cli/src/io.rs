use std::fs::{self, File};
use std::path::Path;

use mspline::ObservationSet;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const HEADER: [&str; 3] = ["subject", "t", "y"];

/// Seventeen significant digits, exact for `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Raw `(subject, t, y)` rows of a long-format CSV.
pub fn read_long(path: &Path) -> Result<Vec<(i64, f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(CliError::Parse {
            line: 1,
            message: format!("expected header subject,t,y, found {}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(CliError::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let parse = |i: usize, name: &str| -> Result<f64> {
            record[i].parse().map_err(|_| CliError::Parse {
                line,
                message: format!("{name} is not a number: {:?}", &record[i]),
            })
        };
        let id: i64 = record[0].parse().map_err(|_| CliError::Parse {
            line,
            message: format!("subject is not an integer: {:?}", &record[0]),
        })?;
        let t = parse(1, "t")?;
        let y = parse(2, "y")?;
        if !t.is_finite() || !y.is_finite() {
            return Err(CliError::Parse {
                line,
                message: "non-finite value".into(),
            });
        }
        rows.push((id, t, y));
    }
    Ok(rows)
}

/// Affine map from the raw time axis onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rescale {
    pub t_min: f64,
    pub t_max: f64,
}

impl Rescale {
    pub fn fit(rows: &[(i64, f64, f64)]) -> Result<Self> {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.1), hi.max(r.1))
            });
        if !(hi > lo) {
            return Err(CliError::Config(
                "rescaling needs at least two distinct time points".into(),
            ));
        }
        Ok(Self {
            t_min: lo,
            t_max: hi,
        })
    }

    pub fn identity() -> Self {
        Self {
            t_min: 0.0,
            t_max: 1.0,
        }
    }

    pub fn unit_of(&self, t: f64) -> f64 {
        ((t - self.t_min) / (self.t_max - self.t_min)).clamp(0.0, 1.0)
    }

    pub fn raw_of(&self, u: f64) -> f64 {
        self.t_min + u * (self.t_max - self.t_min)
    }

    /// Factor converting an `s`-th derivative in `u` to one in `t`.
    pub fn derivative_factor(&self, s: usize) -> f64 {
        (self.t_max - self.t_min).recip().powi(s as i32)
    }
}

/// Reads, optionally rescales, and validates the input.
pub fn load(path: &Path, rescale: bool) -> Result<(ObservationSet<f64>, Rescale)> {
    let mut rows = read_long(path)?;
    let map = if rescale {
        Rescale::fit(&rows)?
    } else {
        Rescale::identity()
    };
    if rescale {
        for r in &mut rows {
            r.1 = map.unit_of(r.1);
        }
    }
    Ok((ObservationSet::validate(&rows)?, map))
}

pub fn write_csv<I>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(File::create(dir.join(name))?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}
