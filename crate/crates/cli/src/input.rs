//! Sample ingestion and the bundled leukemia data.

use odl_core::ustat::Sample;
use thiserror::Error;

/// Survival times in days of 40 leukemia patients.
pub const LEUKEMIA: [f64; 40] = [
    115.0, 181.0, 255.0, 418.0, 441.0, 461.0, 516.0, 739.0, 743.0, 789.0, 807.0, 865.0, 924.0,
    983.0, 1024.0, 1062.0, 1063.0, 1165.0, 1191.0, 1222.0, 1222.0, 1251.0, 1277.0, 1290.0, 1357.0,
    1369.0, 1408.0, 1455.0, 1478.0, 1549.0, 1578.0, 1578.0, 1599.0, 1603.0, 1605.0, 1696.0, 1735.0,
    1799.0, 1815.0, 1852.0,
];

/// Published `Δ̂` for [`LEUKEMIA`].
pub const LEUKEMIA_PUBLISHED_DELTA_CAP: f64 = -0.871605;
/// Published standardized statistic for [`LEUKEMIA`].
pub const LEUKEMIA_PUBLISHED_Z: f64 = -3.615245;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: `{token}` is not a number")]
    BadToken {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("value {value} at position {position} is not positive")]
    NonPositive { position: usize, value: f64 },
    #[error("need at least 2 values, found {0}")]
    TooFew(usize),
}

/// Parses whitespace-, newline- or comma-separated positive numbers. Lines
/// whose first non-blank character is `#` are skipped. Input order is kept.
pub fn parse_sample(text: &str) -> Result<Sample, ParseError> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut start = None;
        // A trailing separator flushes the last token.
        for (i, c) in line
            .char_indices()
            .chain(std::iter::once((line.len(), ' ')))
        {
            let separator = c.is_whitespace() || c == ',';
            match (start, separator) {
                (None, false) => start = Some(i),
                (Some(s), true) => {
                    let token = &line[s..i];
                    let value: f64 = token.parse().map_err(|_| ParseError::BadToken {
                        line: lineno + 1,
                        column: line[..s].chars().count() + 1,
                        token: token.to_string(),
                    })?;
                    if !value.is_finite() {
                        return Err(ParseError::BadToken {
                            line: lineno + 1,
                            column: line[..s].chars().count() + 1,
                            token: token.to_string(),
                        });
                    }
                    values.push(value);
                    start = None;
                }
                _ => {}
            }
        }
    }
    if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(ParseError::NonPositive {
            position: i + 1,
            value: v,
        });
    }
    if values.len() < 2 {
        return Err(ParseError::TooFew(values.len()));
    }
    Ok(Sample::new(values).expect("values checked above"))
}

/// One value per line after a `#` header; re-parses to the same sample.
pub fn sample_to_tsv(sample: &Sample) -> String {
    let mut out = String::from("# value\n");
    for v in sample.values() {
        out.push_str(&format!("{v}\n"));
    }
    out
}
