//! Two-state dichotomous Markov noise driving the age of a unit.
//!
//! The noise takes the value `+v_plus` or `-v_minus`; it leaves the `+` state
//! at rate `lambda_plus` and the `-` state at rate `lambda_minus`. Speeds are
//! stored as magnitudes and the sign is applied in the dynamics.

use std::fmt;
use std::io::{self, Write};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Rates of the dichotomous noise process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmnParams {
    v_plus: f64,
    v_minus: f64,
    lambda_plus: f64,
    lambda_minus: f64,
}

impl DmnParams {
    pub fn new(v_plus: f64, v_minus: f64, lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        let positive = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive and finite",
                })
            }
        };
        let non_negative = |name, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be non-negative and finite",
                })
            }
        };
        positive("v_plus", v_plus)?;
        positive("v_minus", v_minus)?;
        non_negative("lambda_plus", lambda_plus)?;
        non_negative("lambda_minus", lambda_minus)?;
        if lambda_plus + lambda_minus <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "lambda_plus + lambda_minus",
                value: lambda_plus + lambda_minus,
                reason: "at least one switching rate must be positive",
            });
        }
        Ok(Self {
            v_plus,
            v_minus,
            lambda_plus,
            lambda_minus,
        })
    }

    pub fn v_plus(&self) -> f64 {
        self.v_plus
    }

    pub fn v_minus(&self) -> f64 {
        self.v_minus
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    /// Relaxation rate `lambda_plus + lambda_minus`.
    pub fn total_rate(&self) -> f64 {
        self.lambda_plus + self.lambda_minus
    }

    /// Rate of leaving `state`.
    pub fn exit_rate(&self, state: NoiseState) -> f64 {
        match state {
            NoiseState::Plus => self.lambda_plus,
            NoiseState::Minus => self.lambda_minus,
        }
    }

    /// Signed age velocity while in `state`.
    pub fn velocity(&self, state: NoiseState) -> f64 {
        match state {
            NoiseState::Plus => self.v_plus,
            NoiseState::Minus => -self.v_minus,
        }
    }
}

/// Value of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NoiseState {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl NoiseState {
    /// Row/column index in a [`TransitionMatrix`]: `-` is 0, `+` is 1.
    pub fn index(self) -> usize {
        match self {
            NoiseState::Minus => 0,
            NoiseState::Plus => 1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            NoiseState::Minus => NoiseState::Plus,
            NoiseState::Plus => NoiseState::Minus,
        }
    }
}

impl fmt::Display for NoiseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseState::Minus => "-",
            NoiseState::Plus => "+",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupationProbs {
    pub p_plus: f64,
    pub p_minus: f64,
}

/// `P[to][from]` = probability of being in `to` at time t having started in `from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionMatrix {
    entries: [[f64; 2]; 2],
}

impl TransitionMatrix {
    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn get(&self, to: NoiseState, from: NoiseState) -> f64 {
        self.entries[to.index()][from.index()]
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    /// Matrix product `self * rhs`, i.e. evolve by `rhs` first, then by `self`.
    pub fn compose(&self, rhs: &TransitionMatrix) -> TransitionMatrix {
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..2).map(|k| self.entries[i][k] * rhs.entries[k][j]).sum();
            }
        }
        TransitionMatrix { entries: out }
    }

    /// Applies the matrix to a distribution given as `(p_minus, p_plus)`.
    pub fn apply(&self, dist: [f64; 2]) -> [f64; 2] {
        [
            self.entries[0][0] * dist[0] + self.entries[0][1] * dist[1],
            self.entries[1][0] * dist[0] + self.entries[1][1] * dist[1],
        ]
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

/// Occupation probabilities at time `t` when the noise starts in `+`.
pub fn occupation_probs(params: &DmnParams, t: f64) -> Result<OccupationProbs> {
    check_time(t)?;
    let total = params.total_rate();
    let decay = (-total * t).exp();
    let p_plus = params.lambda_minus / total + params.lambda_plus / total * decay;
    Ok(OccupationProbs {
        p_plus,
        p_minus: 1.0 - p_plus,
    })
}

pub fn transition_matrix(params: &DmnParams, t: f64) -> Result<TransitionMatrix> {
    check_time(t)?;
    let (lp, lm) = (params.lambda_plus, params.lambda_minus);
    let total = lp + lm;
    // Off-diagonals are built from 1 - e^{-λt} so that each column sums to one.
    let grow = -(-total * t).exp_m1();
    let minus_to_plus = lm * grow / total;
    let plus_to_minus = lp * grow / total;
    Ok(TransitionMatrix {
        entries: [
            [1.0 - minus_to_plus, plus_to_minus],
            [minus_to_plus, 1.0 - plus_to_minus],
        ],
    })
}

/// Long-time mean velocity `V = (v_plus λ_minus − v_minus λ_plus) / (λ_plus + λ_minus)`.
pub fn drift(params: &DmnParams) -> f64 {
    (params.v_plus * params.lambda_minus - params.v_minus * params.lambda_plus)
        / params.total_rate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AgingClass {
    /// Overall increasing life, `V > 0`.
    #[serde(rename = "OIL")]
    Oil,
    /// Overall decreasing life, `V < 0`.
    #[serde(rename = "ODL")]
    Odl,
    #[serde(rename = "steady-exponential")]
    SteadyExponential,
}

impl fmt::Display for AgingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgingClass::Oil => "OIL",
            AgingClass::Odl => "ODL",
            AgingClass::SteadyExponential => "steady-exponential",
        })
    }
}

const DRIFT_ZERO_TOL: f64 = 1e-12;

fn normalized_drift_numerator(params: &DmnParams) -> f64 {
    (params.v_plus * params.lambda_minus - params.v_minus * params.lambda_plus)
        / ((params.v_plus + params.v_minus) * params.total_rate())
}

pub fn classify(params: &DmnParams) -> AgingClass {
    let s = normalized_drift_numerator(params);
    if s.abs() <= DRIFT_ZERO_TOL {
        AgingClass::SteadyExponential
    } else if s > 0.0 {
        AgingClass::Oil
    } else {
        AgingClass::Odl
    }
}

/// Mean age `Λ = v_plus v_minus / (v_minus λ_plus − v_plus λ_minus)` of the
/// exponential steady state. Only defined when the drift is negative.
pub fn steady_state_mean(params: &DmnParams) -> Result<f64> {
    let denominator = params.v_minus * params.lambda_plus - params.v_plus * params.lambda_minus;
    if classify(params) != AgingClass::Odl {
        return Err(Error::NoSteadyState { denominator });
    }
    Ok(params.v_plus * params.v_minus / denominator)
}

pub fn steady_state_pdf(params: &DmnParams, x: f64) -> Result<f64> {
    let mean = steady_state_mean(params)?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter {
            name: "x",
            value: x,
            reason: "age must be non-negative",
        });
    }
    Ok((-x / mean).exp() / mean)
}

/// Probability mass the clamped process spends at age exactly zero in the
/// long run. The remaining mass is exponential with mean [`steady_state_mean`].
pub fn steady_state_zero_atom(params: &DmnParams) -> Result<f64> {
    steady_state_mean(params)?;
    Ok(
        (params.v_minus * params.lambda_plus - params.v_plus * params.lambda_minus)
            / (params.v_minus * params.total_rate()),
    )
}

/// A sampled path of the noise and the age it drives.
///
/// `times[0] = 0` and `times[k]` is the k-th switching time, the last entry
/// being the end of the simulation. `states[k]` holds on `[times[k], times[k+1])`
/// and `ages[k]` is the age at `times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub params: DmnParams,
    pub times: Vec<f64>,
    pub states: Vec<NoiseState>,
    pub ages: Vec<f64>,
    pub seed: u64,
}

/// Piece of a segment, as (duration with positive age, ∫ age dt, duration at age zero).
#[derive(Debug, Clone, Copy, Default)]
struct SegmentTotals {
    positive_time: f64,
    age_integral: f64,
    zero_time: f64,
}

impl Trajectory {
    pub fn segments(&self) -> usize {
        self.states.len()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    fn segment(&self, k: usize) -> (NoiseState, f64, f64) {
        (
            self.states[k],
            self.ages[k],
            self.times[k + 1] - self.times[k],
        )
    }

    fn segment_totals(&self, k: usize) -> SegmentTotals {
        let (state, a, d) = self.segment(k);
        match state {
            NoiseState::Plus => {
                let v = self.params.v_plus;
                SegmentTotals {
                    positive_time: d,
                    age_integral: a * d + 0.5 * v * d * d,
                    zero_time: 0.0,
                }
            }
            NoiseState::Minus => {
                let v = self.params.v_minus;
                let hit = a / v;
                if d <= hit {
                    SegmentTotals {
                        positive_time: d,
                        age_integral: a * d - 0.5 * v * d * d,
                        zero_time: 0.0,
                    }
                } else {
                    SegmentTotals {
                        positive_time: hit,
                        age_integral: 0.5 * a * hit,
                        zero_time: d - hit,
                    }
                }
            }
        }
    }

    /// Age at time `t`, clamped to the simulated window.
    pub fn age_at(&self, t: f64) -> f64 {
        let t = t.clamp(self.times[0], *self.times.last().unwrap());
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => (p - 1).min(self.segments().saturating_sub(1)),
        };
        if self.segments() == 0 {
            return self.ages[0];
        }
        let dt = t - self.times[k];
        (self.ages[k] + self.params.velocity(self.states[k]) * dt).max(0.0)
    }

    /// Time-weighted fractions `(plus, minus)` of the trajectory.
    pub fn empirical_occupancy(&self) -> (f64, f64) {
        let plus: f64 = (0..self.segments())
            .filter(|&k| self.states[k] == NoiseState::Plus)
            .map(|k| self.times[k + 1] - self.times[k])
            .sum();
        let fraction = plus / self.duration();
        (fraction, 1.0 - fraction)
    }

    /// Batch-means standard error of the `+` occupancy fraction using
    /// `batches` windows of equal length.
    pub fn occupancy_batch_se(&self, batches: usize) -> f64 {
        let batches = batches.max(2);
        let start = self.times[0];
        let width = self.duration() / batches as f64;
        let mut plus = vec![0.0; batches];
        for k in 0..self.segments() {
            if self.states[k] != NoiseState::Plus {
                continue;
            }
            let (mut lo, hi) = (self.times[k], self.times[k + 1]);
            while lo < hi {
                let b = (((lo - start) / width) as usize).min(batches - 1);
                let edge = if b == batches - 1 {
                    hi
                } else {
                    (start + (b + 1) as f64 * width).min(hi)
                };
                plus[b] += edge - lo;
                if edge <= lo {
                    break;
                }
                lo = edge;
            }
        }
        let fractions: Vec<f64> = plus.iter().map(|p| p / width).collect();
        let mean = fractions.iter().sum::<f64>() / batches as f64;
        let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    }

    /// Time average of the age over the whole trajectory.
    pub fn time_average_age(&self) -> f64 {
        let total: f64 = (0..self.segments())
            .map(|k| self.segment_totals(k).age_integral)
            .sum();
        total / self.duration()
    }

    /// Long-run summary of the simulated age distribution.
    pub fn age_summary(&self) -> AgeSummary {
        let mut positive = 0.0;
        let mut integral = 0.0;
        let mut zero = 0.0;
        for k in 0..self.segments() {
            let s = self.segment_totals(k);
            positive += s.positive_time;
            integral += s.age_integral;
            zero += s.zero_time;
        }
        let duration = self.duration();
        AgeSummary {
            mean_age: integral / duration,
            zero_fraction: zero / duration,
            positive_mean_age: if positive > 0.0 {
                integral / positive
            } else {
                0.0
            },
        }
    }

    /// Fraction of time with `age <= x`.
    pub fn age_cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let mut below = 0.0;
        for k in 0..self.segments() {
            let (state, a, d) = self.segment(k);
            below += match state {
                NoiseState::Plus => ((x - a) / self.params.v_plus).clamp(0.0, d),
                NoiseState::Minus => {
                    if x >= a {
                        d
                    } else {
                        (d - (a - x) / self.params.v_minus).max(0.0)
                    }
                }
            };
        }
        below / self.duration()
    }

    /// Kolmogorov-Smirnov distance between the positive-age part of the
    /// time-weighted age distribution and an exponential with `mean`,
    /// evaluated on `points` equally spaced ages up to `10 * mean`.
    pub fn positive_age_ks(&self, mean: f64, points: usize) -> f64 {
        let summary = self.age_summary();
        let positive = 1.0 - summary.zero_fraction;
        if positive <= 0.0 {
            return 1.0;
        }
        let cdf0 = self.age_cdf(0.0);
        (1..=points)
            .map(|i| {
                let x = 10.0 * mean * i as f64 / points as f64;
                let conditional = (self.age_cdf(x) - cdf0) / positive;
                (conditional - (1.0 - (-x / mean).exp())).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Writes `time  state  age` rows with a header line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time\tstate\tage")?;
        for (k, (&t, &age)) in self.times.iter().zip(&self.ages).enumerate() {
            // The final row carries the state of the last segment.
            let state = self.states[k.min(self.segments() - 1)];
            writeln!(out, "{t}\t{state}\t{age}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgeSummary {
    /// Time average of the age, including time spent clamped at zero.
    pub mean_age: f64,
    /// Fraction of time spent at age zero.
    pub zero_fraction: f64,
    /// Time average of the age over the periods with positive age.
    pub positive_mean_age: f64,
}

/// Simulates the noise and the age it drives on `[0, t_end]`.
///
/// Holding times are exact exponential draws. The age moves with slope
/// `+v_plus` or `-v_minus` and is clamped at zero while in the `-` state.
pub fn simulate_trajectory(
    params: &DmnParams,
    x0: f64,
    t_end: f64,
    start: NoiseState,
    seed: u64,
) -> Result<Trajectory> {
    if !(x0.is_finite() && x0 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "x0",
            value: x0,
            reason: "initial age must be non-negative and finite",
        });
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            reason: "must be positive and finite",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = vec![0.0];
    let mut states = Vec::new();
    let mut ages = vec![x0];
    let (mut t, mut age, mut state) = (0.0, x0, start);
    while t < t_end {
        let rate = params.exit_rate(state);
        let hold = if rate > 0.0 {
            let u: f64 = rng.sample(Open01);
            -u.ln() / rate
        } else {
            f64::INFINITY
        };
        let next = if hold >= t_end - t { t_end } else { t + hold };
        if next <= t {
            // Holding time below the resolution of `t`; the switch is absorbed.
            state = state.flip();
            continue;
        }
        age = (age + params.velocity(state) * (next - t)).max(0.0);
        states.push(state);
        times.push(next);
        ages.push(age);
        t = next;
        state = state.flip();
    }
    Ok(Trajectory {
        params: *params,
        times,
        states,
        ages,
        seed,
    })
}
