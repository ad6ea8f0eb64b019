//! File formats: path CSVs, plain series files, and float formatting.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulate::SamplePath;

/// C-style `%.17g`: 17 significant digits, trailing zeros stripped, exponent
/// form only for very small or very large magnitudes. Round-trips exactly.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    strip_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `t,value` rows for `j = 0..=n`, LF line endings.
pub fn write_path_csv(path: &SamplePath, destination: &Path) -> Result<()> {
    let mut out = String::with_capacity(32 * (path.n + 2));
    out.push_str("t,value\n");
    for (t, v) in path.times().zip(&path.values) {
        out.push_str(&fmt_g17(t));
        out.push(',');
        out.push_str(&fmt_g17(*v));
        out.push('\n');
    }
    let mut file = fs::File::create(destination)
        .map_err(|e| Error::io(format!("creating {}", destination.display()), e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", destination.display()), e))
}

/// Reads a `t,value` CSV; rows are taken as grid points `j = 0..=n` in order.
pub fn read_path_csv(source: &Path) -> Result<SamplePath> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(source)?;
    let headers = reader.headers()?.clone();
    let column = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Argument(format!("{}: no `value` column", source.display())))?;
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(column).unwrap_or("");
        let v: f64 = field.parse().map_err(|_| {
            Error::Argument(format!(
                "{}: row {}: `{field}` is not a number",
                source.display(),
                row + 2
            ))
        })?;
        values.push(v);
    }
    SamplePath::from_grid_values(values)
}

/// Whitespace- or newline-separated decimal values; `#` lines are comments.
pub fn parse_series(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| {
                Error::Argument(format!("line {}: `{token}` is not a number", lineno + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Argument(format!(
                    "line {}: non-finite value `{token}`",
                    lineno + 1
                )));
            }
            values.push(v);
        }
    }
    Ok(values)
}

pub fn read_series_file(source: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(source)
        .map_err(|e| Error::io(format!("reading {}", source.display()), e))?;
    parse_series(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(0.5), "0.5");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(-2.25), "-2.25");
        assert_eq!(fmt_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(fmt_g17(123456.0), "123456");
        assert_eq!(fmt_g17(1e20), "1e+20");
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            2f64.sqrt(),
            1e-300,
            6.02e23,
            -7.5e-5,
            0.8545,
        ] {
            assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn series_parsing() {
        let v = parse_series("# header\n1 2\n3\n\n 4.5\t6\n").unwrap();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.5, 6.0]);
        assert!(parse_series("1 x 2").is_err());
    }

    #[test]
    fn path_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("p.csv");
        let p = SamplePath::from_grid_values(vec![0.0, 0.1, -0.25, 1.0 / 3.0]).unwrap();
        write_path_csv(&p, &file).unwrap();
        let text = fs::read_to_string(&file).unwrap();
        assert!(text.starts_with("t,value\n0,0\n"));
        let back = read_path_csv(&file).unwrap();
        assert_eq!(back.values, p.values);
    }
}
