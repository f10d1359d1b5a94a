//! Single-synapse experiments: STDP and SRDP curves, rate-pairing heat-maps
//! and the trace-mean sweep.
//!
//! Both endpoints replay prescribed spike trains; no membrane dynamics are
//! involved. All runs go through the regular engine.

use serde::{Deserialize, Serialize};

use crate::engine::{run, Network, Probe, RunResult, SimConfig, Source, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::plasticity::BcallParams;
use crate::scalar::Scalar;
use crate::spikegen::{correlated_train, derive_seed, poisson_train, regular_train, CorrelationSpec, ShiftDirection, SpikeTrain};

/// Steps of silence before the first protocol spike.
const LEAD_STEPS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub repetitions: usize,
}

impl CurveResult {
    fn deterministic(x: Vec<f64>, mean: Vec<f64>) -> Self {
        let std = vec![0.0; x.len()];
        Self {
            x,
            mean,
            std,
            repetitions: 1,
        }
    }
}

fn ms_to_steps(ms: f64, dt: f64) -> Result<i64> {
    let steps = ms * 1e-3 / dt;
    let r = steps.round();
    if (steps - r).abs() > 1e-6 {
        return Err(Error::param("delta_t", ms, "a multiple of dt"));
    }
    Ok(r as i64)
}

/// Runs one replayed pair of trains through a single plastic synapse and
/// returns the final hidden weight.
pub fn replay_pair<S: Scalar>(pre: SpikeTrain, post: SpikeTrain, params: &BcallParams<S>, w_init: S) -> Result<S> {
    let n = pre.n_steps().max(post.n_steps());
    let dt = pre.dt();
    let mut net = Network::new(*params);
    let a = net.add_virtual(Source::Replay(pre));
    let b = net.add_virtual(Source::Replay(post));
    let syn = net.connect_plastic(a, b, w_init)?;
    net.record(Probe::Weight(syn), n.max(1))?;
    let r = run(net, &SimConfig::new(dt, n.max(1) as f64 * dt, 0)?)?;
    Ok(*r.series[0].values.last().expect("one sample"))
}

fn pair_trains(pre_steps: Vec<u64>, post_steps: Vec<u64>, dt: f64) -> Result<(SpikeTrain, SpikeTrain)> {
    let last = pre_steps.iter().chain(&post_steps).max().copied().unwrap_or(0);
    let n = last + 1;
    Ok((SpikeTrain::from_steps(pre_steps, n, dt)?, SpikeTrain::from_steps(post_steps, n, dt)?))
}

/// Weight change of an isolated pre/post pair for each `delta_t` (ms,
/// `t_post - t_pre`). Starts from `w_init` and uses `params` unchanged.
pub fn stdp_curve<S: Scalar>(delta_ts_ms: &[f64], params: &BcallParams<S>, w_init: S, dt: f64) -> Result<CurveResult> {
    let mut mean = Vec::with_capacity(delta_ts_ms.len());
    for &d in delta_ts_ms {
        let k = ms_to_steps(d, dt)?;
        let anchor = LEAD_STEPS + k.unsigned_abs();
        let (pre, post) = if k >= 0 {
            (vec![LEAD_STEPS], vec![LEAD_STEPS + k as u64])
        } else {
            (vec![anchor], vec![LEAD_STEPS])
        };
        let (pre, post) = pair_trains(pre, post, dt)?;
        let w = replay_pair(pre, post, params, w_init)?;
        mean.push((w - w_init).as_f64());
    }
    Ok(CurveResult::deterministic(delta_ts_ms.to_vec(), mean))
}

/// Closed-form single-pair weight change with the gate open.
pub fn stdp_oracle<S: Scalar>(delta_t_ms: f64, params: &BcallParams<S>) -> f64 {
    let p = |v: S| v.as_f64();
    if delta_t_ms < 0.0 {
        let x_j = p(params.a_j) * p(params.x_max_j) * (delta_t_ms * 1e-3 / p(params.tau_j)).exp();
        return if x_j > p(params.theta_j) { p(params.c1_d) } else { 0.0 };
    }
    if delta_t_ms == 0.0 {
        return 0.0;
    }
    let x_i = p(params.a_i) * p(params.x_max_i) * (-delta_t_ms * 1e-3 / p(params.tau_i)).exp();
    let penalty = if x_i < p(params.theta_i) { p(params.c2_d) } else { 0.0 };
    x_i * p(params.c_p) + penalty
}

/// Total weight change after `n_pairs` pairs with onsets at `freq` Hz. For
/// `delta_t > 0` each pair is pre then post; for `delta_t < 0` post then pre.
pub fn srdp_point<S: Scalar>(freq: f64, n_pairs: usize, delta_t_ms: f64, params: &BcallParams<S>, w_init: S, dt: f64) -> Result<f64> {
    if !(freq > 0.0) {
        return Err(Error::param("frequency", freq, "> 0"));
    }
    if n_pairs == 0 {
        return Err(Error::param("n_pairs", n_pairs, ">= 1"));
    }
    let k = ms_to_steps(delta_t_ms, dt)?;
    let period = 1.0 / freq;
    if period < delta_t_ms.abs() * 1e-3 {
        return Err(Error::param("frequency", freq, "<= 1 / |delta_t|"));
    }
    let mut first = Vec::with_capacity(n_pairs);
    let mut second = Vec::with_capacity(n_pairs);
    for m in 0..n_pairs {
        let onset = LEAD_STEPS + (m as f64 * period / dt).round() as u64;
        first.push(onset);
        second.push(onset + k.unsigned_abs());
    }
    let (pre, post) = if k >= 0 { (first, second) } else { (second, first) };
    let (pre, post) = pair_trains(strictly_increasing(pre), strictly_increasing(post), dt)?;
    let w = replay_pair(pre, post, params, w_init)?;
    Ok((w - w_init).as_f64())
}

/// Drops repeated steps (pairing periods shorter than `dt`).
fn strictly_increasing(mut v: Vec<u64>) -> Vec<u64> {
    v.dedup();
    v
}

pub fn srdp_curve<S: Scalar>(freqs: &[f64], n_pairs: usize, delta_t_ms: f64, params: &BcallParams<S>, w_init: S, dt: f64) -> Result<CurveResult> {
    let mean = freqs
        .iter()
        .map(|&f| srdp_point(f, n_pairs, delta_t_ms, params, w_init, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveResult::deterministic(freqs.to_vec(), mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shift {
    None,
    /// Post-synaptic spikes tend to follow pre-synaptic ones.
    Positive,
    /// Post-synaptic spikes tend to precede pre-synaptic ones.
    Negative,
}

impl std::str::FromStr for Shift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Shift::None),
            "positive" => Ok(Shift::Positive),
            "negative" => Ok(Shift::Negative),
            _ => Err(Error::param("shift", s, "one of none, positive, negative")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapConfig {
    pub gamma: f64,
    pub seeds: usize,
    /// Run length (s).
    pub duration: f64,
    pub dt: f64,
    pub w_init: f64,
    pub seed: u64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            gamma: 0.75,
            seeds: 20,
            duration: 2.0,
            dt: DEFAULT_DT,
            w_init: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub pre_rates: Vec<f64>,
    pub post_rates: Vec<f64>,
    /// `mean[i][j]` for pre rate `i`, post rate `j`.
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    pub seeds: usize,
}

impl Heatmap {
    pub fn potentiation_cells(&self) -> usize {
        self.mean.iter().flatten().filter(|&&v| v > 0.0).count()
    }

    pub fn cell(&self, pre_rate: f64, post_rate: f64) -> Option<f64> {
        let i = self.pre_rates.iter().position(|&r| r == pre_rate)?;
        let j = self.post_rates.iter().position(|&r| r == post_rate)?;
        Some(self.mean[i][j])
    }
}

/// Pre and post trains for one heat-map run. With a shift, the slower train
/// is derived from the faster one (post from pre at equal rates) with
/// one-sided shifts whose sign puts post after (positive) or before
/// (negative) pre.
pub fn heatmap_trains(pre_rate: f64, post_rate: f64, shift: Shift, cfg: &HeatmapConfig, seed: u64) -> Result<(SpikeTrain, SpikeTrain)> {
    let s_src = derive_seed(seed, &[1]);
    let s_tgt = derive_seed(seed, &[2]);
    if shift == Shift::None || pre_rate == 0.0 || post_rate == 0.0 {
        return Ok((
            poisson_train(pre_rate, cfg.duration, cfg.dt, s_src)?,
            poisson_train(post_rate, cfg.duration, cfg.dt, s_tgt)?,
        ));
    }
    let post_derived = post_rate <= pre_rate;
    let (fast, slow) = if post_derived { (pre_rate, post_rate) } else { (post_rate, pre_rate) };
    // target = source + L; post after pre means L > 0 when post is the target
    let direction = match (shift, post_derived) {
        (Shift::Positive, true) | (Shift::Negative, false) => ShiftDirection::Forward,
        _ => ShiftDirection::Backward,
    };
    let spec = CorrelationSpec {
        gamma: cfg.gamma,
        f_g: slow,
        f_s: fast,
        direction,
    };
    let source = poisson_train(fast, cfg.duration, cfg.dt, s_src)?;
    let target = correlated_train(&source, &spec, s_tgt)?;
    Ok(if post_derived { (source, target) } else { (target, source) })
}

pub fn heatmap_cell<S: Scalar>(pre_rate: f64, post_rate: f64, shift: Shift, cfg: &HeatmapConfig, params: &BcallParams<S>, seed: u64) -> Result<f64> {
    let (pre, post) = heatmap_trains(pre_rate, post_rate, shift, cfg, seed)?;
    let w0 = S::lit(cfg.w_init);
    Ok((replay_pair(pre, post, params, w0)? - w0).as_f64())
}

/// Seed of run `rep` in cell `(i, j)`; shared across shift modes so the
/// source trains match.
pub fn heatmap_seed(master: u64, i: usize, j: usize, rep: usize) -> u64 {
    derive_seed(master, &[i as u64, j as u64, rep as u64])
}

pub fn rate_heatmap<S: Scalar>(pre_rates: &[f64], post_rates: &[f64], shift: Shift, cfg: &HeatmapConfig, params: &BcallParams<S>) -> Result<Heatmap> {
    if cfg.seeds == 0 {
        return Err(Error::param("seeds", cfg.seeds, ">= 1"));
    }
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for (i, &pr) in pre_rates.iter().enumerate() {
        let mut mrow = Vec::new();
        let mut srow = Vec::new();
        for (j, &po) in post_rates.iter().enumerate() {
            let dws = (0..cfg.seeds)
                .map(|r| heatmap_cell(pr, po, shift, cfg, params, heatmap_seed(cfg.seed, i, j, r)))
                .collect::<Result<Vec<_>>>()?;
            let (m, s) = mean_std(&dws);
            mrow.push(m);
            srow.push(s);
        }
        mean.push(mrow);
        std.push(srow);
    }
    Ok(Heatmap {
        pre_rates: pre_rates.to_vec(),
        post_rates: post_rates.to_vec(),
        mean,
        std,
        seeds: cfg.seeds,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSweep {
    pub a: f64,
    pub rates: Vec<f64>,
    pub mean_trace: Vec<f64>,
    /// `mean_trace * c_p + c1_d`.
    pub dw: Vec<f64>,
    /// Rate at which `dw` first changes sign (linear interpolation).
    pub crossing: Option<f64>,
    /// Smallest and largest rate with `|dw| <= band * |c1_d|`.
    pub transition: Option<(f64, f64)>,
}

impl TraceSweep {
    pub fn transition_width(&self) -> Option<f64> {
        self.transition.map(|(lo, hi)| hi - lo)
    }
}

/// Time-averaged pre-synaptic trace of a regular `n_spikes` train at each
/// rate, with jump amplitude `a`, averaged over `[0, n_spikes / rate)`.
pub fn trace_mean_sweep<S: Scalar>(a: f64, rates: &[f64], n_spikes: usize, band: f64, params: &BcallParams<S>, dt: f64) -> Result<TraceSweep> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::param("a", a, "in (0, 1]"));
    }
    let mut p = *params;
    p.a_i = S::lit(a);
    p.validate()?;
    let tau = p.tau_i.as_f64();
    let mut mean_trace = Vec::with_capacity(rates.len());
    for &r in rates {
        let train = regular_train(r, n_spikes, dt)?;
        let n = train.n_steps();
        let mut net = Network::new(p);
        let u = net.add_virtual(Source::Replay(train));
        net.record(Probe::PreTrace(u), 1)?;
        let res = run(net, &SimConfig::new(dt, n as f64 * dt, 0)?)?;
        // sample m is x(start of step m) * f; integrating the exponential
        // over the step gives x(start) * tau (1 - f) / dt
        let f = (-dt / tau).exp();
        let sum: f64 = res.series[0].values.iter().map(|v| v.as_f64()).sum();
        mean_trace.push(sum * tau * (1.0 - f) / (f * dt * n as f64));
    }
    let c_p = params.c_p.as_f64();
    let c1 = params.c1_d.as_f64();
    let dw: Vec<f64> = mean_trace.iter().map(|m| m * c_p + c1).collect();
    let crossing = rates.windows(2).zip(dw.windows(2)).find_map(|(r, d)| {
        if d[0] <= 0.0 && d[1] > 0.0 {
            Some(r[0] + (r[1] - r[0]) * (-d[0]) / (d[1] - d[0]))
        } else {
            None
        }
    });
    let tol = band * c1.abs();
    let inside: Vec<f64> = rates.iter().zip(&dw).filter(|(_, d)| d.abs() <= tol).map(|(r, _)| *r).collect();
    let transition = match (inside.first(), inside.last()) {
        (Some(&lo), Some(&hi)) => Some((lo, hi)),
        _ => None,
    };
    Ok(TraceSweep {
        a,
        rates: rates.to_vec(),
        mean_trace,
        dw,
        crossing,
        transition,
    })
}

/// Closed-form time average of the trace over `[0, n / rate)` for a regular
/// train, in continuous time.
pub fn trace_mean_oracle(a: f64, tau: f64, rate: f64, n: usize) -> f64 {
    let period = 1.0 / rate;
    let decay = (-period / tau).exp();
    let mut x = 0.0;
    let mut integral = 0.0;
    for _ in 0..n {
        x += a * (1.0 - x);
        integral += x * tau * (1.0 - decay);
        x *= decay;
    }
    integral / (n as f64 * period)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub pre_rate: f64,
    pub post_rate: f64,
    pub duration: f64,
    pub dt: f64,
    pub w_init: f64,
    /// Sampling stride in steps.
    pub stride: u64,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            pre_rate: 15.0,
            post_rate: 20.0,
            duration: 1.0,
            dt: DEFAULT_DT,
            w_init: 0.5,
            stride: 10,
            seed: 0,
        }
    }
}

/// Two Poisson units joined by one plastic synapse; records `x_i` of the
/// pre unit, `x_j` and `x_s` of the post unit and `w_hid`.
pub fn pair_trace_dump<S: Scalar>(cfg: &PairConfig, params: &BcallParams<S>) -> Result<RunResult<S>> {
    let pre = poisson_train(cfg.pre_rate, cfg.duration, cfg.dt, derive_seed(cfg.seed, &[1]))?;
    let post = poisson_train(cfg.post_rate, cfg.duration, cfg.dt, derive_seed(cfg.seed, &[2]))?;
    pair_replay(pre, post, params, S::lit(cfg.w_init), cfg.stride)
}

/// Records the traces and weight of a pair replaying the given trains.
pub fn pair_replay<S: Scalar>(pre: SpikeTrain, post: SpikeTrain, params: &BcallParams<S>, w_init: S, stride: u64) -> Result<RunResult<S>> {
    let n = pre.n_steps().max(post.n_steps());
    let dt = pre.dt();
    let mut net = Network::new(*params);
    let a = net.add_virtual(Source::Replay(pre));
    let b = net.add_virtual(Source::Replay(post));
    let syn = net.connect_plastic(a, b, w_init)?;
    net.record(Probe::PreTrace(a), stride)?;
    net.record(Probe::PostTrace(b), stride)?;
    net.record(Probe::StopTrace(b), stride)?;
    net.record(Probe::Weight(syn), stride)?;
    net.record_spikes(a)?;
    net.record_spikes(b)?;
    run(net, &SimConfig::new(dt, n as f64 * dt, 0)?)
}
