//! Life distributions, the equilibrium (renewal) survival function and
//! numerical checks for overall-decreasing-life membership.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{self, Integral};
use crate::stats::{Estimate, RunningStats};

/// Parametric family of a [`LifeDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `F̄(x) = exp(-x/θ)`, θ being the mean.
    Exponential,
    /// `F̄(x) = exp(-x^θ)`.
    Weibull,
    /// Linear failure rate, `F̄(x) = exp(-x - θx²/2)`.
    Lfr,
    /// Unit-scale gamma with shape θ.
    Gamma,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Weibull => "weibull",
            Family::Lfr => "lfr",
            Family::Gamma => "gamma",
        }
    }

    /// Stable small-integer tag, used when deriving random streams.
    pub fn tag(self) -> u8 {
        match self {
            Family::Exponential => 0,
            Family::Weibull => 1,
            Family::Lfr => 2,
            Family::Gamma => 3,
        }
    }

    pub fn distribution(self, theta: f64) -> Result<LifeDistribution> {
        match self {
            Family::Exponential => LifeDistribution::exponential(theta),
            Family::Weibull => LifeDistribution::weibull(theta),
            Family::Lfr => LifeDistribution::lfr(theta),
            Family::Gamma => LifeDistribution::gamma(theta),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Family::Exponential),
            "weibull" => Ok(Family::Weibull),
            "lfr" | "linear-failure-rate" => Ok(Family::Lfr),
            "gamma" => Ok(Family::Gamma),
            other => Err(format!(
                "unknown family `{other}` (expected exponential, weibull, lfr or gamma)"
            )),
        }
    }
}

/// A positive life distribution with finite mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifeDistribution {
    family: Family,
    theta: f64,
    mean: f64,
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason,
    }
}

impl LifeDistribution {
    pub fn exponential(mean: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(invalid("mean", mean, "must be positive and finite"));
        }
        Ok(Self {
            family: Family::Exponential,
            theta: mean,
            mean,
        })
    }

    /// Weibull with unit scale; shape θ ≥ 1 is IFR.
    pub fn weibull(shape: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(invalid("theta", shape, "Weibull shape must be positive"));
        }
        Ok(Self {
            family: Family::Weibull,
            theta: shape,
            mean: ln_gamma(1.0 + 1.0 / shape).exp(),
        })
    }

    pub fn lfr(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope >= 0.0) {
            return Err(invalid("theta", slope, "LFR slope must be non-negative"));
        }
        let mut dist = Self {
            family: Family::Lfr,
            theta: slope,
            mean: 1.0,
        };
        dist.mean = if slope == 0.0 {
            1.0
        } else if slope >= 0.01 {
            // ∫ exp(-x - θx²/2) dx = sqrt(π/2θ) exp(1/2θ) erfc(1/sqrt(2θ))
            let a = 1.0 / (2.0 * slope);
            (std::f64::consts::PI * a).sqrt() * a.exp() * erfc(a.sqrt())
        } else {
            let cutoff = dist.cutoff(1e-18);
            quad::integrate(|x| dist.survival(x), 0.0, cutoff)?.value
        };
        Ok(dist)
    }

    pub fn gamma(shape: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(invalid("theta", shape, "gamma shape must be positive"));
        }
        Ok(Self {
            family: Family::Gamma,
            theta: shape,
            mean: shape,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Shape/slope parameter; the mean for the exponential family.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn name(&self) -> String {
        format!("{}(θ={})", self.family, self.theta)
    }

    /// Whether the family/parameter pair has an increasing failure rate.
    pub fn is_ifr(&self) -> bool {
        match self.family {
            Family::Exponential | Family::Lfr => true,
            Family::Weibull | Family::Gamma => self.theta >= 1.0,
        }
    }

    /// Survival function `F̄(x) = P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let t = self.theta;
        match self.family {
            Family::Exponential => (-x / t).exp(),
            Family::Weibull => (-x.powf(t)).exp(),
            Family::Lfr => (-x - 0.5 * t * x * x).exp(),
            Family::Gamma => {
                if x.is_infinite() {
                    0.0
                } else {
                    gamma_ur(t, x)
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let t = self.theta;
        match self.family {
            Family::Exponential => (-x / t).exp() / t,
            Family::Weibull => {
                if x == 0.0 {
                    return match t.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0,
                        _ => 0.0,
                    };
                }
                t * x.powf(t - 1.0) * (-x.powf(t)).exp()
            }
            Family::Lfr => (1.0 + t * x) * (-x - 0.5 * t * x * x).exp(),
            Family::Gamma => {
                if x == 0.0 {
                    return match t.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0,
                        _ => 0.0,
                    };
                }
                ((t - 1.0) * x.ln() - x - ln_gamma(t)).exp()
            }
        }
    }

    /// Failure rate `f(x)/F̄(x)`; `None` where the survival has underflowed
    /// and no closed form is available.
    pub fn hazard(&self, x: f64) -> Option<f64> {
        let t = self.theta;
        match self.family {
            Family::Exponential => Some(1.0 / t),
            Family::Weibull => Some(if x == 0.0 {
                self.density(0.0)
            } else {
                t * x.powf(t - 1.0)
            }),
            Family::Lfr => Some(1.0 + t * x.max(0.0)),
            Family::Gamma => {
                let s = self.survival(x);
                if s < 1e-300 {
                    None
                } else {
                    Some(self.density(x) / s)
                }
            }
        }
    }

    /// Age beyond which `F̄ < eps`.
    pub fn cutoff(&self, eps: f64) -> f64 {
        let log_eps = -eps.ln();
        let t = self.theta;
        match self.family {
            Family::Exponential => t * log_eps,
            Family::Weibull => log_eps.powf(1.0 / t),
            Family::Lfr => {
                if t == 0.0 {
                    log_eps
                } else {
                    2.0 * log_eps / ((1.0 + 2.0 * t * log_eps).sqrt() + 1.0)
                }
            }
            Family::Gamma => {
                let mut hi = t.max(1.0);
                while self.survival(hi) >= eps {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.survival(mid) >= eps {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * hi {
                        break;
                    }
                }
                hi
            }
        }
    }

    /// Truncation point for integrands of the form `x^power * F̄(x)`.
    pub fn tail_cutoff(&self, power: i32) -> f64 {
        let mut x = self.cutoff(1e-17);
        let scale = self.mean;
        while self.survival(x) * (1.0 + x / scale).powi(power) > 1e-17 {
            x *= 1.2;
        }
        x
    }

    /// `E[X^k]` for integer `k ≥ 1`.
    pub fn raw_moment(&self, k: i32) -> Result<f64> {
        let kf = f64::from(k);
        let t = self.theta;
        match self.family {
            Family::Exponential => Ok(t.powi(k) * ln_gamma(kf + 1.0).exp()),
            Family::Weibull => Ok(ln_gamma(1.0 + kf / t).exp()),
            Family::Gamma => Ok((ln_gamma(t + kf) - ln_gamma(t)).exp()),
            Family::Lfr => self.tail_moment(k, 0.0),
        }
    }

    /// `∫_0^x y^k dF(y)`, computed as `∫_0^x k y^{k-1} F̄(y) dy - x^k F̄(x)`.
    pub fn partial_moment(&self, k: i32, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let kf = f64::from(k);
        let upper = x.min(self.tail_cutoff(k));
        let body = quad::integrate(|y| kf * y.powi(k - 1) * self.survival(y), 0.0, upper)?;
        Ok(body.value - x.powi(k) * self.survival(x))
    }

    /// `∫_x^∞ y^k dF(y)`, computed as `x^k F̄(x) + ∫_x^∞ k y^{k-1} F̄(y) dy`.
    pub fn tail_moment(&self, k: i32, x: f64) -> Result<f64> {
        let x = x.max(0.0);
        let kf = f64::from(k);
        let upper = self.tail_cutoff(k);
        if x >= upper {
            return Ok(x.powi(k) * self.survival(x));
        }
        let body = quad::integrate(|y| kf * y.powi(k - 1) * self.survival(y), x, upper)?;
        Ok(x.powi(k) * self.survival(x) + body.value)
    }

    /// Maps a standard exponential draw through the inverse survival
    /// function. Not available for the gamma family.
    pub fn from_standard_exponential(&self, e: f64) -> Option<f64> {
        let t = self.theta;
        match self.family {
            Family::Exponential => Some(t * e),
            Family::Weibull => Some(e.powf(1.0 / t)),
            Family::Lfr => Some(if t == 0.0 {
                e
            } else {
                // (sqrt(1 + 2θE) - 1)/θ without cancellation
                2.0 * e / ((1.0 + 2.0 * t * e).sqrt() + 1.0)
            }),
            Family::Gamma => None,
        }
    }

    pub fn sampler(&self) -> Sampler {
        match self.family {
            Family::Gamma => Sampler::Gamma(Gamma::new(self.theta, 1.0).expect("shape validated")),
            _ => Sampler::Inverse(*self),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }
}

/// Draws from a [`LifeDistribution`]; gamma uses an exact shape-θ sampler,
/// the other families transform a standard exponential.
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Inverse(LifeDistribution),
    Gamma(Gamma<f64>),
}

impl Distribution<f64> for Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Inverse(dist) => {
                let e: f64 = Exp1.sample(rng);
                dist.from_standard_exponential(e).expect("non-gamma family")
            }
            Sampler::Gamma(g) => g.sample(rng),
        }
    }
}

/// `∫_x^∞ F̄(u) du` over the truncated support.
fn survival_tail_integral(dist: &LifeDistribution, x: f64) -> Result<Integral> {
    let upper = dist.tail_cutoff(1);
    if x >= upper {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    quad::integrate(|u| dist.survival(u), x.max(0.0), upper)
}

/// Equilibrium survival `W̃(x) = (1/Λ) ∫_x^∞ F̄(u) du`.
pub fn equilibrium_survival(dist: &LifeDistribution, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    let tail = survival_tail_integral(dist, x)?;
    Ok((tail.value / dist.mean()).clamp(0.0, 1.0))
}

fn excess_integral(dist: &LifeDistribution, t: f64) -> Result<Integral> {
    let t = t.max(0.0);
    let upper = dist.tail_cutoff(2);
    if t >= upper {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let r = quad::integrate(|u| (u - t) * dist.survival(u), t, upper)?;
    Ok(Integral {
        value: r.value / dist.mean(),
        abs_error: r.abs_error / dist.mean(),
        intervals: r.intervals,
    })
}

/// `∫_t^∞ W̃(x) dx`, evaluated as `(1/Λ) ∫_t^∞ (u - t) F̄(u) du`.
pub fn integrated_equilibrium_survival(dist: &LifeDistribution, t: f64) -> Result<f64> {
    excess_integral(dist, t).map(|i| i.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OdlVerdict {
    Odl,
    Violated,
    Boundary,
}

impl fmt::Display for OdlVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OdlVerdict::Odl => "ODL",
            OdlVerdict::Violated => "violated",
            OdlVerdict::Boundary => "boundary",
        })
    }
}

/// Margins of the inequality `∫_t^∞ W̃ ≤ Λ W̃(t)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdlReport {
    pub distribution: String,
    pub mean: f64,
    pub tol: f64,
    pub grid: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub margin: Vec<f64>,
    pub verdict: OdlVerdict,
}

impl OdlReport {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `t  lhs  rhs  margin` with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("t\tlhs\trhs\tmargin\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                self.grid[i], self.lhs[i], self.rhs[i], self.margin[i]
            ));
        }
        out
    }
}

/// 64 log-spaced points from `0.01 Λ` to `10 Λ`.
pub fn default_grid(dist: &LifeDistribution) -> Vec<f64> {
    log_grid(0.01 * dist.mean(), 10.0 * dist.mean(), 64)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

pub fn odl_check(dist: &LifeDistribution, grid: &[f64], tol: f64) -> Result<OdlReport> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid("tol", tol, "must be positive"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 0.0 {
        return Err(invalid(
            "grid",
            grid[0],
            "grid must be non-negative and strictly increasing",
        ));
    }
    let mut lhs = Vec::with_capacity(grid.len());
    let mut rhs = Vec::with_capacity(grid.len());
    let mut margin = Vec::with_capacity(grid.len());
    for &t in grid {
        let l = integrated_equilibrium_survival(dist, t)?;
        let r = survival_tail_integral(dist, t)?.value;
        lhs.push(l);
        rhs.push(r);
        margin.push(r - l);
    }
    let verdict = if margin.iter().all(|m| m.abs() <= tol) {
        OdlVerdict::Boundary
    } else if margin.iter().all(|&m| m >= -tol) {
        OdlVerdict::Odl
    } else {
        OdlVerdict::Violated
    };
    Ok(OdlReport {
        distribution: dist.name(),
        mean: dist.mean(),
        tol,
        grid: grid.to_vec(),
        lhs,
        rhs,
        margin,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardPoint {
    pub x: f64,
    /// `None` when the survival function underflowed at `x`.
    pub hazard: Option<f64>,
    pub below_inverse_mean: bool,
}

/// Pointwise comparison of the failure rate with `1/Λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardReport {
    pub inverse_mean: f64,
    pub points: Vec<HazardPoint>,
}

impl HazardReport {
    pub fn below_count(&self) -> usize {
        self.points.iter().filter(|p| p.below_inverse_mean).count()
    }

    pub fn censored_count(&self) -> usize {
        self.points.iter().filter(|p| p.hazard.is_none()).count()
    }

    /// True when every evaluated point has hazard strictly below `1/Λ`.
    pub fn criterion_holds(&self) -> bool {
        self.points
            .iter()
            .filter(|p| p.hazard.is_some())
            .all(|p| p.below_inverse_mean)
    }
}

pub fn hazard_criterion(dist: &LifeDistribution, grid: &[f64]) -> HazardReport {
    let inverse_mean = 1.0 / dist.mean();
    let points = grid
        .iter()
        .map(|&x| {
            let hazard = dist.hazard(x);
            HazardPoint {
                x,
                hazard,
                below_inverse_mean: hazard.is_some_and(|h| h < inverse_mean),
            }
        })
        .collect();
    HazardReport {
        inverse_mean,
        points,
    }
}

/// The order-`r` moment inequality evaluated two ways: the expectation
/// forms exactly as printed (Monte Carlo over iid pairs) and the defining
/// double integrals (quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub r: u32,
    /// `E{X1^{r+1}X2²/(2(r+1)) − X1^{r+2}X2/(r+2) + X1^{r+3}/(2(r+3))}`.
    pub lhs_expectation: Estimate,
    /// `Λ E{X1 M^{r+1}/(r+1) − X1 M^{r+2}/(r+2)}`, `M = min(X1, X2)`.
    pub rhs_expectation: Estimate,
    /// `Λ E{X1 M − M²/2}`, the printed right side of the `r = 0` special case.
    pub rhs_corollary: Estimate,
    /// `∫_0^∞ ∫_t^∞ t^r F̄(t) W̃(x) dx dt`.
    pub lhs_integral: Estimate,
    /// `Λ ∫_0^∞ t^r F̄(t) W̃(t) dt`.
    pub rhs_integral: Estimate,
    pub n_samples: usize,
    pub seed: u64,
}

pub fn moment_inequality_check(
    dist: &LifeDistribution,
    r: u32,
    n_samples: usize,
    seed: u64,
) -> Result<MomentReport> {
    if n_samples < 2 {
        return Err(invalid(
            "n_samples",
            n_samples as f64,
            "need at least 2 pairs",
        ));
    }
    let rf = f64::from(r);
    let ri = r as i32;
    let lambda = dist.mean();

    let sampler = dist.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs_mc = RunningStats::new();
    let mut rhs_mc = RunningStats::new();
    let mut cor_mc = RunningStats::new();
    for _ in 0..n_samples {
        let x1 = sampler.sample(&mut rng);
        let x2 = sampler.sample(&mut rng);
        let m = x1.min(x2);
        lhs_mc.push(
            x1.powi(ri + 1) * x2 * x2 / (2.0 * (rf + 1.0)) - x1.powi(ri + 2) * x2 / (rf + 2.0)
                + x1.powi(ri + 3) / (2.0 * (rf + 3.0)),
        );
        rhs_mc.push(lambda * (x1 * m.powi(ri + 1) / (rf + 1.0) - x1 * m.powi(ri + 2) / (rf + 2.0)));
        cor_mc.push(lambda * (x1 * m - 0.5 * m * m));
    }

    let upper = dist.tail_cutoff(ri + 2);
    let weight = quad::integrate(|t| t.powi(ri) * dist.survival(t), 0.0, upper)?;
    // Outer integrands cannot fail, so inner failures are parked here.
    let inner_err = Cell::new(0.0f64);
    let failure: Cell<Option<Error>> = Cell::new(None);
    let outer = |inner: &dyn Fn(f64) -> Result<Integral>| {
        quad::integrate(
            |t| match inner(t) {
                Ok(i) => {
                    inner_err.set(inner_err.get().max(i.abs_error));
                    t.powi(ri) * dist.survival(t) * i.value
                }
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            },
            0.0,
            upper,
        )
    };
    let lhs = outer(&|t| excess_integral(dist, t))?;
    let rhs = outer(&|t| survival_tail_integral(dist, t))?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let propagated = inner_err.get() * weight.value;

    Ok(MomentReport {
        r,
        lhs_expectation: lhs_mc.estimate(),
        rhs_expectation: rhs_mc.estimate(),
        rhs_corollary: cor_mc.estimate(),
        lhs_integral: Estimate {
            value: lhs.value,
            std_error: lhs.abs_error + propagated,
        },
        rhs_integral: Estimate {
            value: rhs.value,
            std_error: rhs.abs_error + propagated,
        },
        n_samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parameter_validation() {
        assert!(LifeDistribution::weibull(0.0).is_err());
        assert!(LifeDistribution::lfr(-1.0).is_err());
        assert!(LifeDistribution::gamma(f64::NAN).is_err());
        assert!(LifeDistribution::exponential(0.0).is_err());
        assert!(LifeDistribution::lfr(0.0).is_ok());
        assert!(LifeDistribution::weibull(1.0).unwrap().is_ifr());
        assert!(!LifeDistribution::weibull(0.5).unwrap().is_ifr());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Weibull".parse::<Family>().unwrap(), Family::Weibull);
        assert_eq!("lfr".parse::<Family>().unwrap(), Family::Lfr);
        assert!("cauchy".parse::<Family>().is_err());
    }

    #[test]
    fn survival_basics() {
        for dist in [
            LifeDistribution::exponential(2.0).unwrap(),
            LifeDistribution::weibull(2.0).unwrap(),
            LifeDistribution::lfr(1.5).unwrap(),
            LifeDistribution::gamma(2.5).unwrap(),
        ] {
            assert_eq!(dist.survival(0.0), 1.0);
            let mut last = 1.0;
            for i in 1..200 {
                let s = dist.survival(i as f64 * 0.1);
                assert!(s <= last);
                last = s;
            }
            assert!(dist.survival(1e3) < 1e-12);
        }
    }

    #[test]
    fn gamma_integer_shape_matches_poisson_sum() {
        let dist = LifeDistribution::gamma(3.0).unwrap();
        for x in [0.1f64, 1.0, 2.5, 7.0, 20.0] {
            let poisson = (-x).exp() * (1.0 + x + x * x / 2.0);
            assert_relative_eq!(dist.survival(x), poisson, max_relative = 1e-12);
        }
    }

    #[test]
    fn means_match_quadrature() {
        for dist in [
            LifeDistribution::weibull(2.0).unwrap(),
            LifeDistribution::weibull(0.5).unwrap(),
            LifeDistribution::lfr(1.0).unwrap(),
            LifeDistribution::lfr(0.001).unwrap(),
            LifeDistribution::gamma(0.5).unwrap(),
        ] {
            let q = quad::integrate(|x| dist.survival(x), 0.0, dist.tail_cutoff(1)).unwrap();
            assert_relative_eq!(dist.mean(), q.value, max_relative = 1e-9);
        }
        assert_relative_eq!(
            LifeDistribution::weibull(2.0).unwrap().mean(),
            std::f64::consts::PI.sqrt() / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn densities_integrate_to_one() {
        for dist in [
            LifeDistribution::weibull(3.0).unwrap(),
            LifeDistribution::lfr(2.0).unwrap(),
            LifeDistribution::gamma(2.0).unwrap(),
            LifeDistribution::gamma(0.7).unwrap(),
        ] {
            let q = quad::integrate(|x| dist.density(x), 0.0, dist.tail_cutoff(0)).unwrap();
            assert!((q.value - 1.0).abs() < 1e-8, "{} {}", dist.name(), q.value);
        }
    }

    #[test]
    fn moments_closed_form_vs_quadrature() {
        for dist in [
            LifeDistribution::weibull(2.0).unwrap(),
            LifeDistribution::gamma(2.5).unwrap(),
            LifeDistribution::exponential(1.5).unwrap(),
        ] {
            for k in 1..=6 {
                let closed = dist.raw_moment(k).unwrap();
                let q = dist.tail_moment(k, 0.0).unwrap();
                assert_relative_eq!(closed, q, max_relative = 1e-9);
                let x = dist.mean();
                let split = dist.partial_moment(k, x).unwrap() + dist.tail_moment(k, x).unwrap();
                assert_relative_eq!(split, closed, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn hazard_examples() {
        let e = LifeDistribution::exponential(2.0).unwrap();
        assert_eq!(e.hazard(0.3), Some(0.5));
        assert_eq!(e.hazard(30.0), Some(0.5));
        let w = LifeDistribution::weibull(2.0).unwrap();
        assert_relative_eq!(w.hazard(1.0).unwrap(), 2.0);
        let l = LifeDistribution::lfr(1.0).unwrap();
        assert_eq!(l.hazard(0.0), Some(1.0));
        let g = LifeDistribution::gamma(2.0).unwrap();
        assert_relative_eq!(g.hazard(1.0).unwrap(), 0.5, max_relative = 1e-12);
        assert_eq!(g.hazard(1e4), None);
        let report = hazard_criterion(&g, &[1.0, 1e4]);
        assert_eq!(report.censored_count(), 1);
    }

    #[test]
    fn hazard_criterion_disagrees_with_definition_for_weibull() {
        let w = LifeDistribution::weibull(2.0).unwrap();
        let grid = default_grid(&w);
        let hazard = hazard_criterion(&w, &grid);
        assert!(!hazard.criterion_holds());
        assert!(hazard.below_count() > 0);
        assert_eq!(odl_check(&w, &grid, 1e-6).unwrap().verdict, OdlVerdict::Odl);
    }

    #[test]
    fn sampling_transforms() {
        let w1 = LifeDistribution::weibull(1.0).unwrap();
        let l0 = LifeDistribution::lfr(0.0).unwrap();
        for e in [0.01, 0.7, 3.0] {
            assert_eq!(w1.from_standard_exponential(e), Some(e));
            assert_eq!(l0.from_standard_exponential(e), Some(e));
        }
        let l2 = LifeDistribution::lfr(2.0).unwrap();
        let x = l2.from_standard_exponential(4.0).unwrap();
        assert_relative_eq!(x, (17f64.sqrt() - 1.0) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(l2.survival(x), (-4f64).exp(), max_relative = 1e-12);
        assert_eq!(
            LifeDistribution::gamma(2.0)
                .unwrap()
                .from_standard_exponential(1.0),
            None
        );
    }

    #[test]
    fn equilibrium_survival_properties() {
        for dist in [
            LifeDistribution::weibull(0.5).unwrap(),
            LifeDistribution::lfr(1.0).unwrap(),
            LifeDistribution::gamma(2.0).unwrap(),
        ] {
            assert_eq!(equilibrium_survival(&dist, 0.0).unwrap(), 1.0);
            let mut last = 1.0;
            for x in log_grid(1e-3, 50.0, 40) {
                let w = equilibrium_survival(&dist, x).unwrap();
                assert!((0.0..=1.0).contains(&w));
                assert!(w <= last + 1e-12);
                last = w;
            }
        }
    }

    #[test]
    fn odl_grid_validation() {
        let e = LifeDistribution::exponential(1.0).unwrap();
        assert!(matches!(odl_check(&e, &[], 1e-6), Err(Error::EmptyGrid)));
        assert!(odl_check(&e, &[1.0, 0.5], 1e-6).is_err());
        assert!(odl_check(&e, &[1.0], 0.0).is_err());
        assert_eq!(default_grid(&e).len(), 64);
    }

    #[test]
    fn odl_report_tsv() {
        let e = LifeDistribution::exponential(1.0).unwrap();
        let report = odl_check(&e, &[0.5, 1.0], 1e-6).unwrap();
        let tsv = report.to_tsv();
        let lines: Vec<_> = tsv.lines().collect();
        assert_eq!(lines[0], "t\tlhs\trhs\tmargin");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split('\t').count(), 4);
    }
}
