//! U-statistic test of exponentiality against overall-decreasing-life
//! alternatives.
//!
//! The kernel is
//!
//! ```text
//! Φ(x, y) = x y²/2 − x² y/2 + x³/6 − x² m + x m²/2,   m = min(x, y)
//! ```
//!
//! and the estimator averages its symmetrized form over unordered pairs.
//! `Δ̂ = δ̂ / X̄³` is scale free and tends to be negative under ODL
//! alternatives.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};
use crate::lifedist::LifeDistribution;
use crate::quad::{self, Integral};
use crate::stats::{normal_cdf, normal_quantile, Estimate};

/// Null standard deviation of `√n Δ̂` used by the normal-approximation rule.
pub const SIGMA0_REFERENCE: f64 = 1.173;

/// A positive lifetime sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewValues(values.len()));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositiveValue {
                position: i + 1,
                value: v,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Scales every value by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Sample::new(self.values.iter().map(|v| v * c).collect())
    }
}

/// The kernel `Φ(x, y)`; not symmetric in its arguments.
pub fn kernel_phi(x: f64, y: f64) -> f64 {
    let m = x.min(y);
    0.5 * x * y * y - 0.5 * x * x * y + x * x * x / 6.0 - x * x * m + 0.5 * x * m * m
}

/// `(Φ(x, y) + Φ(y, x)) / 2`.
pub fn symmetric_kernel(x: f64, y: f64) -> f64 {
    0.5 * (kernel_phi(x, y) + kernel_phi(y, x))
}

/// `Σ_{i≠j} Φ(x_i, x_j)` for ascending `sorted`, in O(n).
///
/// The `x y²` and `x² y` terms cancel over ordered pairs; the `min` terms
/// reduce to prefix sums once the values are sorted.
fn ordered_pair_sum(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let mut prefix1 = 0.0;
    let mut prefix2 = 0.0;
    let mut total = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let x2 = x * x;
        let x3 = x2 * x;
        let above = (n - 1 - k) as f64;
        total += (n - 1) as f64 * x3 / 6.0 - 0.5 * above * x3 - x2 * prefix1 + 0.5 * x * prefix2;
        prefix1 += x;
        prefix2 += x2;
    }
    total
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `δ̂` for an already sorted slice of at least two values.
fn delta_hat_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    ordered_pair_sum(sorted) / (n * (n - 1.0))
}

/// `Δ̂` for an already sorted slice of at least two values.
pub(crate) fn delta_cap_sorted(sorted: &[f64]) -> f64 {
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let scaled: Vec<f64> = sorted.iter().map(|x| x / mean).collect();
    delta_hat_sorted(&scaled)
}

/// `δ̂ = 2/(n(n−1)) Σ_{i<j} Φ̃(X_i, X_j)`.
pub fn delta_hat(sample: &Sample) -> f64 {
    delta_hat_sorted(&sorted_copy(&sample.values))
}

/// `Δ̂ = δ̂ / X̄³`.
pub fn delta_cap(sample: &Sample) -> f64 {
    delta_cap_sorted(&sorted_copy(&sample.values))
}

/// Decision rule used by [`run_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// `z = √n Δ̂ / σ₀` against the standard normal, centred at zero.
    NormalApprox,
    /// `Δ̂` against simulated null quantiles for the same `n`.
    Calibrated,
}

impl fmt::Display for TestMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMode::NormalApprox => "normal_approx",
            TestMode::Calibrated => "calibrated",
        })
    }
}

impl FromStr for TestMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal_approx" | "normal" => Ok(TestMode::NormalApprox),
            "calibrated" => Ok(TestMode::Calibrated),
            other => Err(format!(
                "unknown mode `{other}` (expected normal_approx or calibrated)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    pub delta_hat: f64,
    pub delta_cap: f64,
    /// Standardized statistic. In calibrated mode this is
    /// `(Δ̂ − null mean) / null sd` for the same `n`.
    pub z: f64,
    /// One-sided lower-tail p-value.
    pub p_value: f64,
    pub alpha: f64,
    pub mode: TestMode,
    /// `σ₀` used for standardization (`√n · null sd` in calibrated mode).
    pub sigma0_used: f64,
    pub reject: bool,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Rejection rule for a fixed sample size, level and mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRule {
    n: usize,
    alpha: f64,
    mode: TestMode,
    /// Reject when the standardized statistic is at or below this.
    z_critical: f64,
    /// Calibrated mode only: reject when `Δ̂` is at or below this.
    delta_critical: f64,
    center: f64,
    sigma0: f64,
}

impl DecisionRule {
    pub fn new(
        n: usize,
        alpha: f64,
        mode: TestMode,
        calibration: Option<&CalibrationTable>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if n < 2 {
            return Err(Error::TooFewValues(n));
        }
        let root_n = (n as f64).sqrt();
        match mode {
            TestMode::NormalApprox => Ok(Self {
                n,
                alpha,
                mode,
                z_critical: -normal_quantile(1.0 - alpha),
                delta_critical: f64::NAN,
                center: 0.0,
                sigma0: SIGMA0_REFERENCE,
            }),
            TestMode::Calibrated => {
                let table = calibration.ok_or(Error::MissingCalibration(n))?;
                let (mean, sd) = table.null_moments(n)?;
                Ok(Self {
                    n,
                    alpha,
                    mode,
                    z_critical: f64::NAN,
                    delta_critical: table.critical_value(n, alpha)?,
                    center: mean,
                    sigma0: sd * root_n,
                })
            }
        }
    }

    pub fn standardize(&self, delta_cap: f64) -> f64 {
        (self.n as f64).sqrt() * (delta_cap - self.center) / self.sigma0
    }

    pub fn rejects(&self, delta_cap: f64) -> bool {
        match self.mode {
            TestMode::NormalApprox => self.standardize(delta_cap) <= self.z_critical,
            TestMode::Calibrated => delta_cap <= self.delta_critical,
        }
    }
}

/// Runs the test on `sample` at level `alpha`.
pub fn run_test(
    sample: &Sample,
    alpha: f64,
    mode: TestMode,
    calibration: Option<&CalibrationTable>,
) -> Result<TestResult> {
    let n = sample.len();
    let rule = DecisionRule::new(n, alpha, mode, calibration)?;
    let sorted = sorted_copy(&sample.values);
    let delta_hat = delta_hat_sorted(&sorted);
    let delta_cap = delta_cap_sorted(&sorted);
    let z = rule.standardize(delta_cap);
    let p_value = match mode {
        TestMode::NormalApprox => normal_cdf(z),
        TestMode::Calibrated => calibration
            .ok_or(Error::MissingCalibration(n))?
            .p_value(n, delta_cap)?,
    };
    Ok(TestResult {
        n,
        delta_hat,
        delta_cap,
        z,
        p_value: p_value.clamp(0.0, 1.0),
        alpha,
        mode,
        sigma0_used: rule.sigma0,
        reject: rule.rejects(delta_cap),
    })
}

/// Large-sample variance of `√n Δ̂` under a life distribution, two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticVariance {
    /// The printed functional
    /// `μ⁻⁶ Var{X³/6 + E X³/6 − X³F̄(X)/2 + 3/2 (X ∫₀ˣ u² dF + ∫₀ˣ u³ dF − X² ∫₀ˣ u dF)}`.
    pub printed: Estimate,
    /// Delta-method variance of the U-statistic ratio:
    /// `μ⁻⁶ Var{2 h₁(X) − 3 (δ/μ) X}` with `h₁(x) = E Φ̃(x, X₂)`.
    pub projection: Estimate,
    /// `Δ = δ / μ³`, the limit of `Δ̂`.
    pub limit: f64,
}

impl AsymptoticVariance {
    pub fn sigma_printed(&self) -> f64 {
        self.printed.value.sqrt()
    }

    pub fn sigma_projection(&self) -> f64 {
        self.projection.value.sqrt()
    }
}

/// Partial and tail moments of a distribution at a point, with the worst
/// quadrature error seen so far.
struct MomentOracle<'a> {
    dist: &'a LifeDistribution,
    cutoffs: [f64; 4],
    worst_error: Cell<f64>,
    failure: Cell<Option<Error>>,
}

impl<'a> MomentOracle<'a> {
    fn new(dist: &'a LifeDistribution) -> Self {
        Self {
            dist,
            cutoffs: [
                0.0,
                dist.tail_cutoff(1),
                dist.tail_cutoff(2),
                dist.tail_cutoff(3),
            ],
            worst_error: Cell::new(0.0),
            failure: Cell::new(None),
        }
    }

    fn integrate(&self, k: i32, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let kf = f64::from(k);
        match quad::integrate(|y| kf * y.powi(k - 1) * self.dist.survival(y), a, b) {
            Ok(Integral {
                value, abs_error, ..
            }) => {
                self.worst_error.set(self.worst_error.get().max(abs_error));
                value
            }
            Err(e) => {
                self.failure.set(Some(e));
                f64::NAN
            }
        }
    }

    /// `∫_0^x y^k dF(y)`.
    fn partial(&self, k: i32, x: f64) -> f64 {
        let upper = x.min(self.cutoffs[k as usize]);
        self.integrate(k, 0.0, upper) - x.powi(k) * self.dist.survival(x)
    }

    /// `∫_x^∞ y^k dF(y)`.
    fn tail(&self, k: i32, x: f64) -> f64 {
        x.powi(k) * self.dist.survival(x) + self.integrate(k, x, self.cutoffs[k as usize])
    }

    fn take_failure(&self) -> Result<()> {
        match self.failure.take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// `E[g(X)]` by quadrature against the density.
fn expectation<G: Fn(f64) -> f64>(dist: &LifeDistribution, upper: f64, g: G) -> Result<Integral> {
    quad::integrate(|x| g(x) * dist.density(x), 0.0, upper)
}

pub fn asymptotic_variance(dist: &LifeDistribution) -> Result<AsymptoticVariance> {
    let mu = dist.mean();
    let m3 = dist.raw_moment(3)?;
    let oracle = MomentOracle::new(dist);
    let upper = dist.tail_cutoff(7);

    let two_h1 = |x: f64| {
        let s = dist.survival(x);
        let x2 = x * x;
        x2 * x / 6.0 + m3 / 6.0 - 0.5 * x2 * x * s - x2 * oracle.partial(1, x)
            + 0.5 * x * oracle.partial(2, x)
            - 0.5 * oracle.partial(3, x)
            - x * oracle.tail(2, x)
            + 0.5 * x2 * oracle.tail(1, x)
    };
    let printed = |x: f64| {
        let s = dist.survival(x);
        let x2 = x * x;
        x2 * x / 6.0 + m3 / 6.0 - 0.5 * x2 * x * s
            + 1.5 * (x * oracle.partial(2, x) + oracle.partial(3, x) - x2 * oracle.partial(1, x))
    };

    // E[2 h1] = 2δ
    let two_delta = expectation(dist, upper, two_h1)?;
    oracle.take_failure()?;
    let slope = 1.5 * two_delta.value / mu;
    let g = |x: f64| two_h1(x) - slope * x;
    let g1 = expectation(dist, upper, g)?;
    let g2 = expectation(dist, upper, |x| g(x).powi(2))?;
    let p1 = expectation(dist, upper, printed)?;
    let p2 = expectation(dist, upper, |x| printed(x).powi(2))?;
    oracle.take_failure()?;

    let mu6 = mu.powi(6);
    // Inner errors enter the integrands with polynomial weights of degree ≤ 2.
    let weight = 1.0 + dist.raw_moment(2)?;
    let inner = oracle.worst_error.get() * 4.0 * weight;
    let variance = |first: Integral, second: Integral| {
        let value = second.value - first.value * first.value;
        let error = second.abs_error
            + 2.0 * first.value.abs() * first.abs_error
            + 2.0 * inner * (second.value.abs().sqrt() + first.value.abs());
        Estimate {
            value: value / mu6,
            std_error: error / mu6,
        }
    };
    Ok(AsymptoticVariance {
        printed: variance(p1, p2),
        projection: variance(g1, g2),
        limit: 0.5 * two_delta.value / mu.powi(3),
    })
}
