//! Simulated null distribution of `Δ̂` for finite `n`.
//!
//! Each entry stores empirical quantiles of `Δ̂` over exponential samples at a
//! fixed set of levels. Critical values for other levels are interpolated
//! linearly in the level; sample sizes between two tabulated entries are
//! interpolated linearly in `n`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, RunningStats};

/// Levels at which null quantiles are stored. The ends are the sample
/// minimum and maximum.
pub const LEVELS: [f64; 27] = [
    0.0, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.075, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50,
    0.60, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.975, 0.99, 0.995, 0.999, 1.0,
];

const TSV_HEADER: &str = "n\tlevel\tquantile\treplicates\tseed\tnull_mean\tnull_sd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub n: usize,
    pub replicates: u64,
    pub seed: u64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
}

impl CalibrationEntry {
    /// Summarizes simulated null values of `Δ̂`, which must be sorted.
    pub fn from_sorted(n: usize, seed: u64, sorted: &[f64]) -> Result<Self> {
        if sorted.len() < 2 {
            return Err(Error::MalformedCalibration(format!(
                "n = {n}: need at least two null replicates, got {}",
                sorted.len()
            )));
        }
        let stats: RunningStats = sorted.iter().copied().collect();
        let entry = Self {
            n,
            replicates: sorted.len() as u64,
            seed,
            null_mean: stats.mean(),
            null_sd: stats.std_dev(),
            levels: LEVELS.to_vec(),
            quantiles: LEVELS.iter().map(|&p| quantile_sorted(sorted, p)).collect(),
        };
        entry.validate()?;
        Ok(entry)
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::MalformedCalibration(format!(
                "n = {}: {what}",
                self.n
            )))
        };
        if self.n < 2 {
            return bad("sample size below 2");
        }
        if self.levels.len() != self.quantiles.len() || self.levels.len() < 2 {
            return bad("levels and quantiles differ in length");
        }
        if self.levels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("level outside [0, 1]");
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels not strictly increasing");
        }
        if self.quantiles.iter().any(|q| !q.is_finite()) {
            return bad("non-finite quantile");
        }
        if self.quantiles.windows(2).any(|w| w[0] > w[1]) {
            return bad("quantiles decrease with level");
        }
        if !(self.null_sd.is_finite() && self.null_sd > 0.0 && self.null_mean.is_finite()) {
            return bad("null moments not finite and positive");
        }
        Ok(())
    }

    /// Null quantile of `Δ̂` at `level`.
    pub fn quantile(&self, level: f64) -> Result<f64> {
        let first = self.levels[0];
        let last = *self.levels.last().expect("validated non-empty");
        if !(first..=last).contains(&level) {
            return Err(Error::LevelOutOfRange(level));
        }
        let i = self.levels.partition_point(|&p| p < level);
        if self.levels[i] == level {
            return Ok(self.quantiles[i]);
        }
        let (p0, p1) = (self.levels[i - 1], self.levels[i]);
        let (q0, q1) = (self.quantiles[i - 1], self.quantiles[i]);
        Ok(q0 + (q1 - q0) * (level - p0) / (p1 - p0))
    }

    /// Interpolated null probability `P(Δ̂ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let q = &self.quantiles;
        let last = q.len() - 1;
        if x < q[0] {
            return self.levels[0];
        }
        if x >= q[last] {
            return self.levels[last];
        }
        // First index with q[i] > x; ties resolve to the highest level.
        let i = q.partition_point(|&v| v <= x);
        let (q0, q1) = (q[i - 1], q[i]);
        let (p0, p1) = (self.levels[i - 1], self.levels[i]);
        p0 + (p1 - p0) * (x - q0) / (q1 - q0)
    }
}

/// Null calibration entries keyed by sample size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    entries: BTreeMap<usize, CalibrationEntry>,
}

enum Bracket<'a> {
    Exact(&'a CalibrationEntry),
    Between(&'a CalibrationEntry, &'a CalibrationEntry, f64),
}

impl CalibrationTable {
    pub fn new(entries: Vec<CalibrationEntry>) -> Result<Self> {
        let mut table = Self::default();
        for e in entries {
            table.insert(e)?;
        }
        Ok(table)
    }

    /// Adds or replaces the entry for `entry.n`.
    pub fn insert(&mut self, entry: CalibrationEntry) -> Result<()> {
        entry.validate()?;
        self.entries.insert(entry.n, entry);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &CalibrationEntry> {
        self.entries.values()
    }

    pub fn get(&self, n: usize) -> Option<&CalibrationEntry> {
        self.entries.get(&n)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn bracket(&self, n: usize) -> Result<Bracket<'_>> {
        if let Some(e) = self.entries.get(&n) {
            return Ok(Bracket::Exact(e));
        }
        let below = self.entries.range(..n).next_back();
        let above = self.entries.range(n..).next();
        match (below, above) {
            (Some((&n0, lo)), Some((&n1, hi))) => {
                let w = (n - n0) as f64 / (n1 - n0) as f64;
                Ok(Bracket::Between(lo, hi, w))
            }
            _ => Err(Error::MissingCalibration(n)),
        }
    }

    fn interpolate<F: Fn(&CalibrationEntry) -> Result<f64>>(&self, n: usize, f: F) -> Result<f64> {
        match self.bracket(n)? {
            Bracket::Exact(e) => f(e),
            Bracket::Between(lo, hi, w) => Ok((1.0 - w) * f(lo)? + w * f(hi)?),
        }
    }

    /// Lower-tail critical value `q_α(n)`: reject when `Δ̂ ≤ q_α(n)`.
    pub fn critical_value(&self, n: usize, alpha: f64) -> Result<f64> {
        self.interpolate(n, |e| e.quantile(alpha))
    }

    /// Null lower-tail probability of `delta_cap`.
    pub fn p_value(&self, n: usize, delta_cap: f64) -> Result<f64> {
        self.interpolate(n, |e| Ok(e.cdf(delta_cap)))
            .map(|p| p.clamp(0.0, 1.0))
    }

    /// Null mean and standard deviation of `Δ̂`.
    pub fn null_moments(&self, n: usize) -> Result<(f64, f64)> {
        Ok((
            self.interpolate(n, |e| Ok(e.null_mean))?,
            self.interpolate(n, |e| Ok(e.null_sd))?,
        ))
    }

    /// Long-format TSV, one row per `(n, level)`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for e in self.entries.values() {
            for (p, q) in e.levels.iter().zip(&e.quantiles) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    e.n, p, q, e.replicates, e.seed, e.null_mean, e.null_sd
                );
            }
        }
        out
    }

    /// Parses the output of [`to_tsv`](Self::to_tsv). Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match rows.next() {
            Some((_, h)) if h.trim_end() == TSV_HEADER => {}
            _ => {
                return Err(Error::MalformedCalibration(format!(
                    "missing header `{}`",
                    TSV_HEADER.replace('\t', " ")
                )))
            }
        }
        let mut entries: BTreeMap<usize, CalibrationEntry> = BTreeMap::new();
        for (lineno, line) in rows {
            let fields: Vec<&str> = line.trim_end().split('\t').collect();
            let malformed =
                |what: String| Error::MalformedCalibration(format!("line {}: {what}", lineno + 1));
            if fields.len() != 7 {
                return Err(malformed(format!(
                    "expected 7 fields, found {}",
                    fields.len()
                )));
            }
            let float = |i: usize| {
                fields[i]
                    .parse::<f64>()
                    .map_err(|_| malformed(format!("invalid number `{}`", fields[i])))
            };
            let int = |i: usize| {
                fields[i]
                    .parse::<u64>()
                    .map_err(|_| malformed(format!("invalid integer `{}`", fields[i])))
            };
            let n = int(0)? as usize;
            let (level, quantile) = (float(1)?, float(2)?);
            let (replicates, seed) = (int(3)?, int(4)?);
            let (null_mean, null_sd) = (float(5)?, float(6)?);
            let entry = entries.entry(n).or_insert_with(|| CalibrationEntry {
                n,
                replicates,
                seed,
                null_mean,
                null_sd,
                levels: Vec::new(),
                quantiles: Vec::new(),
            });
            if entry.replicates != replicates
                || entry.seed != seed
                || entry.null_mean != null_mean
                || entry.null_sd != null_sd
            {
                return Err(malformed(format!("summary columns disagree for n = {n}")));
            }
            entry.levels.push(level);
            entry.quantiles.push(quantile);
        }
        if entries.is_empty() {
            return Err(Error::MalformedCalibration("no calibration rows".into()));
        }
        Self::new(entries.into_values().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_entry(n: usize, shift: f64) -> CalibrationEntry {
        // Null values k/1000 for k = 0..=1000, so the quantile at p is p + shift.
        let values: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0 + shift).collect();
        CalibrationEntry::from_sorted(n, 7, &values).unwrap()
    }

    #[test]
    fn quantiles_of_uniform_grid() {
        let e = uniform_entry(10, 0.0);
        for p in [0.0, 0.001, 0.05, 0.5, 0.999, 1.0] {
            assert_relative_eq!(e.quantile(p).unwrap(), p, epsilon = 1e-12);
        }
        assert_relative_eq!(e.quantile(0.06).unwrap(), 0.06, epsilon = 1e-12);
        assert!(matches!(e.quantile(1.5), Err(Error::LevelOutOfRange(_))));
        assert_relative_eq!(e.null_mean, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cdf_inverts_quantile() {
        let e = uniform_entry(10, -1.0);
        for p in [0.001, 0.02, 0.05, 0.33, 0.9] {
            assert_relative_eq!(e.cdf(e.quantile(p).unwrap()), p, epsilon = 1e-12);
        }
        assert_eq!(e.cdf(-5.0), 0.0);
        assert_eq!(e.cdf(5.0), 1.0);
    }

    #[test]
    fn interpolates_between_sizes() {
        let table =
            CalibrationTable::new(vec![uniform_entry(10, 0.0), uniform_entry(30, 1.0)]).unwrap();
        assert_relative_eq!(
            table.critical_value(20, 0.05).unwrap(),
            0.55,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            table.critical_value(15, 0.05).unwrap(),
            0.30,
            epsilon = 1e-12
        );
        assert_relative_eq!(table.null_moments(20).unwrap().0, 1.0, epsilon = 1e-12);
        assert!(matches!(
            table.critical_value(5, 0.05),
            Err(Error::MissingCalibration(5))
        ));
        assert!(matches!(
            table.critical_value(31, 0.05),
            Err(Error::MissingCalibration(31))
        ));
    }

    #[test]
    fn tsv_round_trip_is_exact() {
        let mut e = uniform_entry(40, -0.3);
        e.null_sd = 0.1 + 1e-17;
        let table = CalibrationTable::new(vec![uniform_entry(10, 0.1), e]).unwrap();
        let back = CalibrationTable::from_tsv(&table.to_tsv()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn rejects_malformed_tsv() {
        assert!(CalibrationTable::from_tsv("").is_err());
        assert!(CalibrationTable::from_tsv("n\tlevel\n").is_err());
        let table = CalibrationTable::new(vec![uniform_entry(10, 0.0)]).unwrap();
        let text = table.to_tsv().replacen("\t0.05\t", "\t0.05x\t", 1);
        assert!(matches!(
            CalibrationTable::from_tsv(&text),
            Err(Error::MalformedCalibration(_))
        ));
        // Decreasing quantiles are rejected.
        let mut e = uniform_entry(10, 0.0);
        e.quantiles.swap(3, 4);
        assert!(CalibrationTable::new(vec![e]).is_err());
    }
}
