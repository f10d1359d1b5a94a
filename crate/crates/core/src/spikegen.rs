//! Seeded spike generators.
//!
//! Trains live on the simulation grid: a [`SpikeTrain`] stores step indices,
//! so every spike time is an exact multiple of `dt` and consecutive spikes
//! are at least one step apart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    steps: Vec<u64>,
    n_steps: u64,
    dt: f64,
}

impl SpikeTrain {
    pub fn empty(n_steps: u64, dt: f64) -> Self {
        Self {
            steps: Vec::new(),
            n_steps,
            dt,
        }
    }

    /// Builds a train from step indices, checking ordering and range.
    pub fn from_steps(steps: Vec<u64>, n_steps: u64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", dt, "> 0"));
        }
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Undefined("spike steps must be strictly increasing"));
        }
        if steps.last().is_some_and(|&s| s >= n_steps) {
            return Err(Error::Undefined("spike beyond train duration"));
        }
        Ok(Self { steps, n_steps, dt })
    }

    /// Snaps times (seconds) to the nearest grid step.
    pub fn from_times(times: &[f64], duration: f64, dt: f64) -> Result<Self> {
        let n_steps = steps_for(duration, dt)?;
        let steps = times
            .iter()
            .map(|&t| {
                if !(t >= 0.0) {
                    Err(Error::param("spike time", t, ">= 0"))
                } else {
                    Ok((t / dt).round() as u64)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_steps(steps, n_steps, dt)
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|&s| s as f64 * self.dt).collect()
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rate(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            self.len() as f64 / self.duration()
        }
    }

    /// Moves every spike by `offset` steps, extending the duration.
    pub fn shifted(&self, offset: u64) -> Self {
        Self {
            steps: self.steps.iter().map(|s| s + offset).collect(),
            n_steps: self.n_steps + offset,
            dt: self.dt,
        }
    }
}

/// Number of grid steps in `duration`, which must be a multiple of `dt`
/// within one part in 1e9.
pub fn steps_for(duration: f64, dt: f64) -> Result<u64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", dt, "> 0"));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::param("duration", duration, ">= 0"));
    }
    let ratio = duration / dt;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::param("duration", duration, "an integer multiple of dt"));
    }
    Ok(n as u64)
}

/// Mixes a master seed with stream coordinates (unit index, sample index,
/// ...) into an independent 64-bit seed. SplitMix64 finaliser per part.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts
        .iter()
        .fold(mix(master), |acc, &p| mix(acc ^ mix(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bernoulli spike train with `p = rate * dt` per step. Gaps between
/// successes are drawn from the geometric distribution, which has the same
/// law as stepping through every bin.
pub fn poisson_train(rate: f64, duration: f64, dt: f64, seed: u64) -> Result<SpikeTrain> {
    let n_steps = steps_for(duration, dt)?;
    poisson_steps(rate, n_steps, dt, seed)
}

pub fn poisson_steps(rate: f64, n_steps: u64, dt: f64, seed: u64) -> Result<SpikeTrain> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::param("rate", rate, ">= 0"));
    }
    let p = rate * dt;
    if p > 1.0 {
        return Err(Error::RateTooHigh { rate, dt });
    }
    if p == 0.0 || n_steps == 0 {
        return Ok(SpikeTrain::empty(n_steps, dt));
    }
    let mut rng = rng_from_seed(seed);
    let gap = Geometric::new(p).expect("p checked to lie in (0, 1]");
    let mut steps = Vec::with_capacity((p * n_steps as f64 * 1.2) as usize + 4);
    let mut next = gap.sample(&mut rng);
    while next < n_steps {
        steps.push(next);
        next = next.saturating_add(1).saturating_add(gap.sample(&mut rng));
    }
    Ok(SpikeTrain {
        steps,
        n_steps,
        dt,
    })
}

/// `n` spikes at exactly `rate`, the first at `t = 0`.
pub fn regular_train(rate: f64, n: usize, dt: f64) -> Result<SpikeTrain> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::param("rate", rate, "> 0"));
    }
    let period = (1.0 / (rate * dt)).round() as u64;
    if period == 0 {
        return Err(Error::RateTooHigh { rate, dt });
    }
    let steps: Vec<u64> = (0..n as u64).map(|k| k * period).collect();
    Ok(SpikeTrain {
        steps,
        n_steps: n as u64 * period,
        dt,
    })
}

/// Sign of the uniform time shifts applied to the source spikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDirection {
    /// `L ~ U(-gamma / f_s, +gamma / f_s)`.
    #[default]
    Both,
    /// `L ~ U(0, +gamma / f_s)`: target spikes follow source spikes.
    Forward,
    /// `L ~ U(-gamma / f_s, 0)`: target spikes precede source spikes.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub gamma: f64,
    /// Target rate (Hz).
    pub f_g: f64,
    /// Source rate (Hz).
    pub f_s: f64,
    #[serde(default)]
    pub direction: ShiftDirection,
}

impl CorrelationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::param("gamma", self.gamma, ">= 0"));
        }
        if !(self.f_g > 0.0) {
            return Err(Error::param("f_g", self.f_g, "> 0"));
        }
        if !(self.f_s >= self.f_g) {
            return Err(Error::param("f_g", self.f_g, "<= f_s"));
        }
        Ok(())
    }

    /// Largest shift magnitude in seconds.
    pub fn max_shift(&self) -> f64 {
        self.gamma / self.f_s
    }
}

/// Derives a target train from `source`:
///
/// 1. draw a shift `L_k` per source spike,
/// 2. keep `s_k + L_k` with probability `f_g / f_s`,
/// 3. after sorting, drop any spike closer than `dt` to the previously kept
///    one.
///
/// Shifted spikes outside `[0, duration)` are dropped; the survivors are
/// snapped to the grid.
pub fn correlated_train(source: &SpikeTrain, spec: &CorrelationSpec, seed: u64) -> Result<SpikeTrain> {
    spec.validate()?;
    let dt = source.dt;
    let duration = source.duration();
    let keep_p = spec.f_g / spec.f_s;
    let half = spec.max_shift();
    let (lo, hi) = match spec.direction {
        ShiftDirection::Both => (-half, half),
        ShiftDirection::Forward => (0.0, half),
        ShiftDirection::Backward => (-half, 0.0),
    };
    let mut rng = rng_from_seed(seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    let mut shifted = Vec::with_capacity(source.len());
    for &s in &source.steps {
        let shift = lo + (hi - lo) * unit.sample(&mut rng);
        let keep = rng.random::<f64>() < keep_p;
        if !keep {
            continue;
        }
        let t = s as f64 * dt + shift;
        if t < 0.0 || t >= duration {
            continue;
        }
        shifted.push(t);
    }
    Ok(SpikeTrain {
        steps: prune_and_snap(shifted, dt, source.n_steps),
        n_steps: source.n_steps,
        dt,
    })
}

/// Sorts continuous times, drops every spike closer than `dt` to the last
/// kept one, and snaps the survivors to grid steps.
pub fn prune_and_snap(mut times: Vec<f64>, dt: f64, n_steps: u64) -> Vec<u64> {
    times.sort_by(f64::total_cmp);
    let mut steps: Vec<u64> = Vec::with_capacity(times.len());
    let mut last_kept: Option<f64> = None;
    for t in times {
        if last_kept.is_some_and(|prev| t - prev < dt * (1.0 - 1e-9)) {
            continue;
        }
        last_kept = Some(t);
        let step = (t / dt).round() as u64;
        if step >= n_steps {
            break;
        }
        if steps.last().is_some_and(|&prev| prev >= step) {
            continue;
        }
        steps.push(step);
    }
    steps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Phases uniform on `[-pi, pi]`.
    Random,
    /// Phases uniform on `[-0.1, 0.1]`.
    Correlated,
}

impl PhaseMode {
    pub fn range(self) -> (f64, f64) {
        match self {
            PhaseMode::Random => (-std::f64::consts::PI, std::f64::consts::PI),
            PhaseMode::Correlated => (-0.1, 0.1),
        }
    }
}

pub fn phase_assignment(n: usize, mode: PhaseMode, seed: u64) -> Vec<f64> {
    let (lo, hi) = mode.range();
    let dist = Uniform::new_inclusive(lo, hi).expect("valid range");
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}
