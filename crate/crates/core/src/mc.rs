//! Monte Carlo power studies and null calibration.
//!
//! Every replicate draws from its own ChaCha8 stream whose seed packs the
//! master seed and the replicate coordinates, so results do not depend on
//! the number of workers or the order in which replicates run. Rejections are
//! aggregated as integer counts.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationEntry, CalibrationTable};
use crate::error::{Error, Result};
use crate::lifedist::{Family, LifeDistribution, Sampler};
use crate::ustat::{check_alpha, delta_cap_sorted, DecisionRule, TestMode};

/// Replicate count used when none is given.
pub const DEFAULT_REPLICATES: u64 = 10_000;

/// Smallest replicate count considered adequate for a reported table.
pub const MIN_REPORTED_REPLICATES: u64 = 1_000;

/// Seed of one replicate's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed(pub [u8; 32]);

impl StreamSeed {
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.0)
    }
}

/// Stream domains, so null calibration never reuses power-study draws.
const POWER_DOMAIN: [u8; 3] = *b"pow";
const NULL_DOMAIN: [u8; 3] = *b"nul";

fn stream_seed(
    domain: [u8; 3],
    master_seed: u64,
    family: Family,
    theta: f64,
    n: usize,
    index: u64,
) -> StreamSeed {
    let n = u32::try_from(n).expect("sample size fits in 32 bits");
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&master_seed.to_le_bytes());
    bytes[8] = family.tag();
    bytes[9..17].copy_from_slice(&theta.to_bits().to_le_bytes());
    bytes[17..21].copy_from_slice(&n.to_le_bytes());
    bytes[21..29].copy_from_slice(&index.to_le_bytes());
    bytes[29..32].copy_from_slice(&domain);
    StreamSeed(bytes)
}

/// Per-replicate stream seed for power studies.
///
/// The 32 seed bytes hold the master seed, family tag, bits of `theta`, `n`
/// and the replicate index side by side, so distinct coordinates always give
/// distinct seeds.
///
/// # Panics
///
/// If `n` exceeds `u32::MAX`.
pub fn replicate_seed(
    master_seed: u64,
    family: Family,
    theta: f64,
    n: usize,
    index: u64,
) -> StreamSeed {
    stream_seed(POWER_DOMAIN, master_seed, family, theta, n, index)
}

/// Runs `f` on a pool with `workers` threads, or on the global pool.
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidParameter {
            name: "workers",
            value: 0.0,
            reason: "must be at least 1",
        }),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|_| Error::InvalidParameter {
                    name: "workers",
                    value: k as f64,
                    reason: "thread pool could not be created",
                })?;
            Ok(pool.install(f))
        }
    }
}

fn draw_sorted<R: Rng>(sampler: &Sampler, n: usize, rng: &mut R, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend((0..n).map(|_| rng.sample(sampler)));
    buf.sort_by(f64::total_cmp);
}

/// `Δ̂` for `replicates` independent samples of size `n`, in replicate order.
/// These are the draws behind the matching cells of [`estimate_power`].
pub fn delta_cap_replicates(
    dist: &LifeDistribution,
    n: usize,
    replicates: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<f64>> {
    replicates_in(POWER_DOMAIN, dist, n, replicates, master_seed, workers)
}

fn replicates_in(
    domain: [u8; 3],
    dist: &LifeDistribution,
    n: usize,
    replicates: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewValues(n));
    }
    let sampler = dist.sampler();
    let (family, theta) = (dist.family(), dist.theta());
    with_workers(workers, || {
        (0..replicates)
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(n),
                |buf, i| {
                    let mut rng = stream_seed(domain, master_seed, family, theta, n, i).rng();
                    draw_sorted(&sampler, n, &mut rng, buf);
                    delta_cap_sorted(buf)
                },
            )
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub family: Family,
    pub thetas: Vec<f64>,
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub replicates: u64,
    pub master_seed: u64,
    pub mode: TestMode,
}

impl PowerConfig {
    pub fn new(family: Family, thetas: Vec<f64>, ns: Vec<usize>) -> Self {
        Self {
            family,
            thetas,
            ns,
            alpha: 0.05,
            replicates: DEFAULT_REPLICATES,
            master_seed: 0,
            mode: TestMode::NormalApprox,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.thetas.is_empty() || self.ns.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter {
                name: "replicates",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(Error::TooFewValues(n));
        }
        for &theta in &self.thetas {
            self.family.distribution(theta)?;
        }
        Ok(())
    }

    pub fn is_report_grade(&self) -> bool {
        self.replicates >= MIN_REPORTED_REPLICATES
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub family: Family,
    pub theta: f64,
    pub n: usize,
    pub rejections: u64,
    pub replicates: u64,
    pub rejection_rate: f64,
    pub std_error: f64,
    pub mode: TestMode,
    pub seed: u64,
}

impl PowerRow {
    fn new(cfg: &PowerConfig, theta: f64, n: usize, rejections: u64) -> Self {
        let p = rejections as f64 / cfg.replicates as f64;
        Self {
            family: cfg.family,
            theta,
            n,
            rejections,
            replicates: cfg.replicates,
            rejection_rate: p,
            std_error: (p * (1.0 - p) / cfg.replicates as f64).sqrt(),
            mode: cfg.mode,
            seed: cfg.master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub alpha: f64,
    pub rows: Vec<PowerRow>,
}

const POWER_TSV_HEADER: &str =
    "family\ttheta\tn\trejection_rate\tstd_error\trejections\treplicates\tmode\tseed";

impl PowerTable {
    pub fn get(&self, family: Family, theta: f64, n: usize) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.theta == theta && r.n == n)
    }

    /// Appends the rows of `other`, which must use the same level.
    pub fn extend(&mut self, other: PowerTable) -> Result<()> {
        if other.alpha != self.alpha {
            return Err(Error::InvalidAlpha(other.alpha));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(POWER_TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.family,
                r.theta,
                r.n,
                r.rejection_rate,
                r.std_error,
                r.rejections,
                r.replicates,
                r.mode,
                r.seed
            );
        }
        out
    }
}

/// Aligned layout: one line per (family, θ), one column per `n`.
impl fmt::Display for PowerTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut keys: Vec<(Family, f64)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.family, r.theta)) {
                keys.push((r.family, r.theta));
            }
        }
        writeln!(f, "Power estimates at alpha = {}", self.alpha)?;
        if let Some(r) = self.rows.first() {
            writeln!(
                f,
                "mode {}, {} replicates, seed {}",
                r.mode, r.replicates, r.seed
            )?;
        }
        write!(f, "{:<12}{:>8}", "family", "theta")?;
        for n in &ns {
            write!(f, "{:>10}", format!("n={n}"))?;
        }
        writeln!(f)?;
        let mut previous = None;
        for (family, theta) in keys {
            let label = if previous == Some(family) {
                ""
            } else {
                family.name()
            };
            previous = Some(family);
            write!(f, "{label:<12}{theta:>8}")?;
            for &n in &ns {
                match self.get(family, theta, n) {
                    Some(r) => write!(f, "{:>10.4}", r.rejection_rate)?,
                    None => write!(f, "{:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Rejection rates of the test over `cfg.thetas × cfg.ns`.
pub fn estimate_power(
    cfg: &PowerConfig,
    calibration: Option<&CalibrationTable>,
    workers: Option<usize>,
) -> Result<PowerTable> {
    cfg.validate()?;
    let rules = cfg
        .ns
        .iter()
        .map(|&n| DecisionRule::new(n, cfg.alpha, cfg.mode, calibration))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cfg.thetas.len() * cfg.ns.len());
    for &theta in &cfg.thetas {
        let dist = cfg.family.distribution(theta)?;
        let sampler = dist.sampler();
        for (&n, rule) in cfg.ns.iter().zip(&rules) {
            let rejections = with_workers(workers, || {
                (0..cfg.replicates)
                    .into_par_iter()
                    .map_init(
                        || Vec::with_capacity(n),
                        |buf, i| {
                            let mut rng =
                                replicate_seed(cfg.master_seed, cfg.family, theta, n, i).rng();
                            draw_sorted(&sampler, n, &mut rng, buf);
                            rule.rejects(delta_cap_sorted(buf))
                        },
                    )
                    .filter(|&reject| reject)
                    .count() as u64
            })?;
            rows.push(PowerRow::new(cfg, theta, n, rejections));
        }
    }
    Ok(PowerTable {
        alpha: cfg.alpha,
        rows,
    })
}

/// Null quantiles of `Δ̂` at sample size `n` under the unit exponential.
pub fn calibrate_null(
    n: usize,
    replicates: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<CalibrationEntry> {
    let null = LifeDistribution::exponential(1.0)?;
    let mut values = replicates_in(NULL_DOMAIN, &null, n, replicates, master_seed, workers)?;
    values.sort_by(f64::total_cmp);
    CalibrationEntry::from_sorted(n, master_seed, &values)
}

/// [`calibrate_null`] for each sample size in `ns`.
pub fn calibrate(
    ns: &[usize],
    replicates: u64,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<CalibrationTable> {
    if ns.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let entries = ns
        .iter()
        .map(|&n| calibrate_null(n, replicates, master_seed, workers))
        .collect::<Result<Vec<_>>>()?;
    CalibrationTable::new(entries)
}
