//! Trace-driven FIFO timeline simulation and synthetic Monte Carlo runs of the
//! arrival/access process.
//!
//! A FIFO timeline of size `k` shows the `k` most recent posts. An access sees
//! the window ending at the newest post visible at that time; its VoA is the
//! number of posts in the window that no earlier access of the same round saw.

use chrono::{DateTime, Duration, Utc};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, VoaError};
use crate::model::{self, check_positive, ModelParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Post {
    pub id: String,
    pub publisher: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessSchedule {
    /// Accesses anchored at posts drawn uniformly from the trace.
    RandomReference,
    /// Exponential inter-access times with mean `1 / mu`.
    ExponentialClock,
    /// Accesses exactly `1 / mu` apart.
    DeterministicClock,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub k: usize,
    /// `1 / mu`.
    pub sample_interval_hours: f64,
    pub period_hours: f64,
    pub rounds: usize,
    pub seed: u64,
    pub access_schedule: AccessSchedule,
}

impl SimConfig {
    pub fn snapshots_per_round(&self) -> usize {
        (self.period_hours / self.sample_interval_hours).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(VoaError::domain("k must be >= 1"));
        }
        check_positive("sample_interval_hours", self.sample_interval_hours)?;
        check_positive("period_hours", self.period_hours)?;
        if self.rounds < 1 {
            return Err(VoaError::domain("rounds must be >= 1"));
        }
        if self.snapshots_per_round() < 1 {
            return Err(VoaError::domain("period_hours must cover at least one sample interval"));
        }
        Ok(())
    }
}

/// Mean and dispersion of per-round mean VoA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundStats {
    pub mean: f64,
    /// Sample standard deviation across rounds; 0 for a single round.
    pub std: f64,
    pub rounds: usize,
}

impl RoundStats {
    pub fn from_round_means(means: &[f64]) -> Result<Self> {
        if means.is_empty() {
            return Err(VoaError::Empty("no round produced an access"));
        }
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n;
        let std = if means.len() > 1 {
            (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(RoundStats {
            mean,
            std,
            rounds: means.len(),
        })
    }

    pub fn standard_error(&self) -> f64 {
        self.std / (self.rounds as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaKind {
    InverseMu,
    K,
    Mu,
    Rho,
    Lambda,
}

impl AbscissaKind {
    pub fn column_name(&self) -> &'static str {
        match self {
            AbscissaKind::InverseMu => "inverse_mu",
            AbscissaKind::K => "k",
            AbscissaKind::Mu => "mu",
            AbscissaKind::Rho => "rho",
            AbscissaKind::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub abscissa: f64,
    pub model_voa: f64,
    pub mean_voa: f64,
    pub std_voa: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoaCurve {
    pub abscissa_kind: AbscissaKind,
    pub points: Vec<CurvePoint>,
}

/// RNG for one simulation round: a ChaCha stream selected by the round index,
/// so rounds never share a stream and can run in any order.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

fn window_start(newest: usize, k: usize) -> usize {
    (newest + 1).saturating_sub(k)
}

/// The reference post and up to `k - 1` posts preceding it, newest first.
pub fn build_snapshot(posts: &[Post], reference_index: usize, k: usize) -> Result<Vec<&Post>> {
    if reference_index >= posts.len() {
        return Err(VoaError::IndexOutOfRange {
            index: reference_index,
            len: posts.len(),
        });
    }
    if k < 1 {
        return Err(VoaError::domain("k must be >= 1"));
    }
    let lo = window_start(reference_index, k);
    Ok(posts[lo..=reference_index].iter().rev().collect())
}

/// Checks the `(created_at, id)` ordering the simulator relies on.
pub fn ensure_sorted(posts: &[Post]) -> Result<()> {
    for (i, pair) in posts.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.created_at, &a.id) >= (b.created_at, &b.id) {
            return Err(VoaError::invalid(format!(
                "posts must be strictly ordered by (created_at, id); violated at index {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Per-access record of one simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// Access instants, hours since the first post of the trace.
    pub access_hours: Vec<f64>,
    /// Index of the newest post visible at each access, if any.
    pub newest_visible: Vec<Option<usize>>,
    pub voas: Vec<u32>,
}

impl RoundOutcome {
    pub fn mean(&self) -> Option<f64> {
        if self.voas.is_empty() {
            None
        } else {
            Some(self.voas.iter().map(|&v| f64::from(v)).sum::<f64>() / self.voas.len() as f64)
        }
    }
}

fn hours_since(origin: DateTime<Utc>, t: DateTime<Utc>) -> f64 {
    (t - origin).num_seconds() as f64 / 3600.0
}

/// Simulates one round of accesses over a sorted trace.
pub fn trace_round(posts: &[Post], config: &SimConfig, round: u64) -> Result<RoundOutcome> {
    config.validate()?;
    if posts.is_empty() {
        return Err(VoaError::Empty("trace has no posts"));
    }
    let mut rng = round_rng(config.seed, round);
    let origin = posts[0].created_at;
    let post_hours: Vec<f64> = posts.iter().map(|p| hours_since(origin, p.created_at)).collect();
    let n = config.snapshots_per_round();

    let (access_hours, newest_visible): (Vec<f64>, Vec<Option<usize>>) = match config.access_schedule {
        AccessSchedule::RandomReference => {
            let mut refs = if posts.len() >= n {
                index::sample(&mut rng, posts.len(), n).into_vec()
            } else {
                (0..n).map(|_| rng.random_range(0..posts.len())).collect()
            };
            refs.sort_unstable();
            refs.iter().map(|&i| (post_hours[i], Some(i))).unzip()
        }
        AccessSchedule::ExponentialClock | AccessSchedule::DeterministicClock => {
            let times = clock_times(config, &mut rng)?;
            times
                .into_iter()
                .map(|t| {
                    let visible = post_hours.partition_point(|&h| h <= t);
                    (t, visible.checked_sub(1))
                })
                .unzip()
        }
    };

    let mut seen = vec![false; posts.len()];
    let voas = newest_visible
        .iter()
        .map(|newest| match *newest {
            None => 0,
            Some(j) => {
                let mut novel = 0;
                for flag in &mut seen[window_start(j, config.k)..=j] {
                    if !*flag {
                        *flag = true;
                        novel += 1;
                    }
                }
                novel
            }
        })
        .collect();
    Ok(RoundOutcome {
        access_hours,
        newest_visible,
        voas,
    })
}

fn clock_times(config: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let interval = config.sample_interval_hours;
    Ok(match config.access_schedule {
        AccessSchedule::DeterministicClock => (1..=config.snapshots_per_round())
            .map(|j| j as f64 * interval)
            .collect(),
        _ => {
            let gaps = Exp::new(1.0 / interval).map_err(|e| VoaError::domain(e.to_string()))?;
            let mut times = Vec::new();
            let mut t = gaps.sample(rng);
            while t <= config.period_hours {
                times.push(t);
                t += gaps.sample(rng);
            }
            times
        }
    })
}

/// Runs `config.rounds` independent rounds over the trace. Each round is a
/// fresh user; rounds without any access are dropped from the statistics.
pub fn simulate_trace_fifo(posts: &[Post], config: &SimConfig) -> Result<RoundStats> {
    config.validate()?;
    if posts.is_empty() {
        return Err(VoaError::Empty("trace has no posts"));
    }
    ensure_sorted(posts)?;
    let outcomes: Vec<Option<f64>> = (0..config.rounds as u64)
        .into_par_iter()
        .map(|r| trace_round(posts, config, r).map(|o| o.mean()))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = outcomes.into_iter().flatten().collect();
    RoundStats::from_round_means(&means)
}

/// Per-access VoA `min(A, k)` for one synthetic round.
pub fn synthetic_round(
    params: &ModelParams,
    accesses: usize,
    seed: u64,
    round: u64,
    schedule: AccessSchedule,
) -> Result<Vec<u32>> {
    params.validate()?;
    let k = params.integer_k()?;
    let mut rng = round_rng(seed, round);
    let exp = Exp::new(params.mu).map_err(|e| VoaError::domain(e.to_string()))?;
    if schedule == AccessSchedule::RandomReference {
        return Err(VoaError::domain(
            "random-reference sampling needs a trace; use a clock schedule",
        ));
    }
    let mut voas = Vec::with_capacity(accesses);
    for _ in 0..accesses {
        let gap = match schedule {
            AccessSchedule::ExponentialClock => exp.sample(&mut rng),
            _ => 1.0 / params.mu,
        };
        let mean = params.lambda * gap;
        let arrivals = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| VoaError::domain(e.to_string()))?
                .sample(&mut rng) as u64
        } else {
            0
        };
        voas.push(arrivals.min(k) as u32);
    }
    Ok(voas)
}

/// Monte Carlo estimate of the VoA from the Poisson arrival process.
pub fn simulate_synthetic(
    params: &ModelParams,
    accesses_per_round: usize,
    rounds: usize,
    seed: u64,
    schedule: AccessSchedule,
) -> Result<RoundStats> {
    if accesses_per_round < 1 || rounds < 1 {
        return Err(VoaError::domain("accesses_per_round and rounds must be >= 1"));
    }
    let means: Vec<f64> = (0..rounds as u64)
        .into_par_iter()
        .map(|r| {
            let voas = synthetic_round(params, accesses_per_round, seed, r, schedule)?;
            Ok(voas.iter().map(|&v| f64::from(v)).sum::<f64>() / voas.len() as f64)
        })
        .collect::<Result<_>>()?;
    RoundStats::from_round_means(&means)
}

/// A synthetic trace: Poisson arrivals of rate `lambda` per hour over
/// `hours`, timestamps truncated to whole seconds.
pub fn poisson_trace(lambda: f64, hours: f64, seed: u64, start: DateTime<Utc>) -> Result<Vec<Post>> {
    check_positive("lambda", lambda)?;
    check_positive("hours", hours)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = Exp::new(lambda).map_err(|e| VoaError::domain(e.to_string()))?;
    let mut posts = Vec::new();
    let mut t = gaps.sample(&mut rng);
    while t < hours {
        let i = posts.len();
        posts.push(Post {
            id: format!("p{i:07}"),
            publisher: format!("source-{}", i % 7),
            created_at: start + Duration::seconds((t * 3600.0).floor() as i64),
        });
        t += gaps.sample(&mut rng);
    }
    posts.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    Ok(posts)
}

/// Where the simulated column of a sweep comes from.
#[derive(Debug, Clone, Copy)]
pub enum SweepSource<'a> {
    Synthetic {
        params: ModelParams,
        accesses_per_round: usize,
        rounds: usize,
        seed: u64,
        schedule: AccessSchedule,
    },
    /// `lambda` feeds the model column only.
    Trace {
        posts: &'a [Post],
        config: SimConfig,
        lambda: f64,
    },
}

fn model_column(lambda: f64, mu: f64, k: usize, schedule: AccessSchedule) -> Result<f64> {
    match schedule {
        AccessSchedule::DeterministicClock => model::voa_deterministic(lambda, 1.0 / mu, k as u64),
        _ => Ok(model::voa_exponential(&ModelParams::new(lambda, mu, k as f64, 0.0)?)?.mean),
    }
}

fn capacity(x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x <= model::MAX_SUM_CAPACITY {
        Ok(x as usize)
    } else {
        Err(VoaError::domain(format!("k must be a positive integer, got {x}")))
    }
}

/// Simulates every abscissa and pairs it with the model prediction at the
/// same parameters. Clock schedules are compared against the matching
/// inter-access model (exponential or deterministic).
pub fn sweep(source: &SweepSource<'_>, kind: AbscissaKind, values: &[f64]) -> Result<VoaCurve> {
    if values.is_empty() {
        return Err(VoaError::Empty("sweep needs at least one abscissa"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VoaError::domain("sweep abscissas must be strictly increasing"));
    }
    let mut points = Vec::with_capacity(values.len());
    for &x in values {
        check_positive(kind.column_name(), x)?;
        let (model_voa, stats) = match *source {
            SweepSource::Synthetic {
                params,
                accesses_per_round,
                rounds,
                seed,
                schedule,
            } => {
                let mut p = params;
                match kind {
                    AbscissaKind::InverseMu => p.mu = 1.0 / x,
                    AbscissaKind::Mu => p.mu = x,
                    AbscissaKind::Rho => p.mu = p.lambda / x,
                    AbscissaKind::K => p.k = capacity(x)? as f64,
                    AbscissaKind::Lambda => p.lambda = x,
                }
                let k = capacity(p.k)?;
                let stats = simulate_synthetic(&p, accesses_per_round, rounds, seed, schedule)?;
                (model_column(p.lambda, p.mu, k, schedule)?, stats)
            }
            SweepSource::Trace { posts, config, lambda } => {
                let mut c = config;
                match kind {
                    AbscissaKind::InverseMu => c.sample_interval_hours = x,
                    AbscissaKind::Mu => c.sample_interval_hours = 1.0 / x,
                    AbscissaKind::Rho => c.sample_interval_hours = x / lambda,
                    AbscissaKind::K => c.k = capacity(x)?,
                    AbscissaKind::Lambda => return Err(VoaError::domain("a trace fixes lambda; sweep another axis")),
                }
                let stats = simulate_trace_fifo(posts, &c)?;
                let mu = 1.0 / c.sample_interval_hours;
                (model_column(lambda, mu, c.k, c.access_schedule)?, stats)
            }
        };
        points.push(CurvePoint {
            abscissa: x,
            model_voa,
            mean_voa: stats.mean,
            std_voa: stats.std,
            rounds: stats.rounds,
        });
    }
    Ok(VoaCurve {
        abscissa_kind: kind,
        points,
    })
}

pub fn sweep_inverse_mu(source: &SweepSource<'_>, inverse_mu_values: &[f64]) -> Result<VoaCurve> {
    sweep(source, AbscissaKind::InverseMu, inverse_mu_values)
}
