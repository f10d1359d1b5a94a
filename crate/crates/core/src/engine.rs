//! Fixed-step simulation loop.
//!
//! Each step `k` runs, in order:
//!
//! 1. delivery of the spikes emitted at step `k - 1` (one-step transmission
//!    delay) and emission of the virtual-unit spikes scheduled for step `k`,
//! 2. membrane integration of every LIF unit, including oscillation drive,
//! 3. threshold check and spike emission,
//! 4. plasticity for every spike of step `k`,
//! 5. trace decay and bistability drift,
//! 6. recording.
//!
//! Hidden weights drift deterministically between events, so each plastic
//! synapse stores the value it had at its last event together with the step
//! of that event; the drift is applied in closed form whenever the weight is
//! read.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{NeuronKernel, NeuronParams, NeuronState, Polarity};
use crate::plasticity::{drift_weight, effective_weight, post_spike_delta, pre_spike_delta, stop_gate, trace_jump, BcallParams};
use crate::scalar::Scalar;
use crate::spikegen::{derive_seed, rng_from_seed, steps_for, SpikeTrain};

pub type UnitId = usize;
pub type SynapseId = usize;

pub const DEFAULT_DT: f64 = 1e-4;

const POISSON_STREAM: u64 = 0x5053;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step (s).
    pub dt: f64,
    /// Total simulated time (s).
    pub duration: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            duration: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64, seed: u64) -> Result<Self> {
        let c = Self { dt, duration, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        steps_for(self.duration, self.dt).map(|_| ())
    }

    pub fn n_steps(&self) -> Result<u64> {
        steps_for(self.duration, self.dt)
    }
}

/// Spike source of a stateless unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Source {
    Silent,
    /// Bernoulli spikes with probability `rate * dt` per step.
    Poisson { rate: f64 },
    /// Prescribed spikes; step indices count from the start of the run.
    Replay(SpikeTrain),
}

#[derive(Debug, Clone)]
enum UnitKind<S> {
    Lif { kernel: usize, init: NeuronState<S> },
    Virtual(Source),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedSynapse<S> {
    pub pre: UnitId,
    pub post: UnitId,
    pub weight: S,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticSynapse<S> {
    pub pre: UnitId,
    pub post: UnitId,
    pub w_hid: S,
}

/// State variable sampled by a recorder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Membrane(UnitId),
    Threshold(UnitId),
    /// Pre-synaptic calcium trace `x_i` of a unit.
    PreTrace(UnitId),
    /// Post-synaptic calcium trace `x_j` of a unit.
    PostTrace(UnitId),
    StopTrace(UnitId),
    Weight(SynapseId),
    /// Mean hidden weight over a synapse set.
    MeanWeight(Vec<SynapseId>),
}

impl Probe {
    pub fn label(&self) -> String {
        match self {
            Probe::Membrane(u) => format!("v_{u}"),
            Probe::Threshold(u) => format!("theta_{u}"),
            Probe::PreTrace(u) => format!("x_i_{u}"),
            Probe::PostTrace(u) => format!("x_j_{u}"),
            Probe::StopTrace(u) => format!("x_s_{u}"),
            Probe::Weight(s) => format!("w_hid_{s}"),
            Probe::MeanWeight(_) => "w_hid_mean".to_string(),
        }
    }
}

/// Time-ordered samples of one probe. Sample `n` holds the state at the end
/// of step `(n + 1) * stride - 1`, i.e. at time `(n + 1) * stride * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series<S> {
    pub probe: Probe,
    pub stride: u64,
    pub times: Vec<f64>,
    pub values: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult<S> {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub spikes: Vec<(UnitId, SpikeTrain)>,
    pub series: Vec<Series<S>>,
    pub wall_clock_s: f64,
}

impl<S> RunResult<S> {
    pub fn train(&self, unit: UnitId) -> Option<&SpikeTrain> {
        self.spikes.iter().find(|(u, _)| *u == unit).map(|(_, t)| t)
    }

    pub fn series(&self, probe: &Probe) -> Option<&Series<S>> {
        self.series.iter().find(|s| &s.probe == probe)
    }
}

#[derive(Debug, Clone)]
pub struct Network<S> {
    kernels: Vec<NeuronParams<S>>,
    units: Vec<UnitKind<S>>,
    fixed: Vec<FixedSynapse<S>>,
    plastic: Vec<PlasticSynapse<S>>,
    plasticity: BcallParams<S>,
    probes: Vec<(Probe, u64)>,
    spike_record: Vec<bool>,
}

impl<S: Scalar> Default for Network<S> {
    fn default() -> Self {
        Self::new(BcallParams::default())
    }
}

impl<S: Scalar> Network<S> {
    pub fn new(plasticity: BcallParams<S>) -> Self {
        Self {
            kernels: Vec::new(),
            units: Vec::new(),
            fixed: Vec::new(),
            plastic: Vec::new(),
            plasticity,
            probes: Vec::new(),
            spike_record: Vec::new(),
        }
    }

    pub fn plasticity(&self) -> &BcallParams<S> {
        &self.plasticity
    }

    pub fn set_plasticity(&mut self, params: BcallParams<S>) {
        self.plasticity = params;
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn fixed(&self) -> &[FixedSynapse<S>] {
        &self.fixed
    }

    pub fn plastic(&self) -> &[PlasticSynapse<S>] {
        &self.plastic
    }

    pub fn plastic_mut(&mut self) -> &mut [PlasticSynapse<S>] {
        &mut self.plastic
    }

    pub fn is_virtual(&self, unit: UnitId) -> bool {
        matches!(self.units.get(unit), Some(UnitKind::Virtual(_)))
    }

    pub fn add_neuron(&mut self, params: NeuronParams<S>) -> UnitId {
        let kernel = match self.kernels.iter().position(|k| *k == params) {
            Some(i) => i,
            None => {
                self.kernels.push(params);
                self.kernels.len() - 1
            }
        };
        self.units.push(UnitKind::Lif {
            kernel,
            init: NeuronState::resting(&params),
        });
        self.spike_record.push(false);
        self.units.len() - 1
    }

    pub fn add_virtual(&mut self, source: Source) -> UnitId {
        self.units.push(UnitKind::Virtual(source));
        self.spike_record.push(false);
        self.units.len() - 1
    }

    pub fn set_source(&mut self, unit: UnitId, source: Source) -> Result<()> {
        match self.units.get_mut(unit) {
            Some(UnitKind::Virtual(s)) => {
                *s = source;
                Ok(())
            }
            _ => Err(Error::param("unit", unit, "a virtual unit")),
        }
    }

    /// Sinusoidal membrane drive `amp * sin(2 pi freq t + phase)` in mV.
    pub fn set_oscillation(&mut self, unit: UnitId, amp: S, freq: S, phase: S) -> Result<()> {
        match self.units.get_mut(unit) {
            Some(UnitKind::Lif { init, .. }) => {
                init.osc_amp = amp;
                init.osc_freq = freq;
                init.osc_phase = phase;
                Ok(())
            }
            _ => Err(Error::param("unit", unit, "a LIF unit")),
        }
    }

    pub fn connect(&mut self, pre: UnitId, post: UnitId, weight: S, polarity: Polarity) -> Result<()> {
        self.check_unit(pre)?;
        if !matches!(self.units.get(post), Some(UnitKind::Lif { .. })) {
            return Err(Error::param("post", post, "a LIF unit"));
        }
        if weight < S::zero() || !weight.is_finite() {
            return Err(Error::NegativeWeight(weight.as_f64()));
        }
        self.fixed.push(FixedSynapse {
            pre,
            post,
            weight,
            polarity,
        });
        Ok(())
    }

    pub fn connect_plastic(&mut self, pre: UnitId, post: UnitId, w_hid: S) -> Result<SynapseId> {
        self.check_unit(pre)?;
        self.check_unit(post)?;
        if !(w_hid >= S::zero() && w_hid <= S::one()) {
            return Err(Error::param("w_hid", w_hid, "in [0, 1]"));
        }
        self.plastic.push(PlasticSynapse { pre, post, w_hid });
        Ok(self.plastic.len() - 1)
    }

    pub fn record(&mut self, probe: Probe, stride: u64) -> Result<usize> {
        if stride == 0 {
            return Err(Error::param("stride", stride, ">= 1"));
        }
        match &probe {
            Probe::Membrane(u) | Probe::Threshold(u) => {
                if !matches!(self.units.get(*u), Some(UnitKind::Lif { .. })) {
                    return Err(Error::param("unit", u, "a LIF unit"));
                }
            }
            Probe::PreTrace(u) | Probe::PostTrace(u) | Probe::StopTrace(u) => self.check_unit(*u)?,
            Probe::Weight(s) => self.check_synapse(*s)?,
            Probe::MeanWeight(set) => {
                if set.is_empty() {
                    return Err(Error::Undefined("mean over an empty synapse set"));
                }
                for &s in set {
                    self.check_synapse(s)?;
                }
            }
        }
        self.probes.push((probe, stride));
        Ok(self.probes.len() - 1)
    }

    pub fn record_spikes(&mut self, unit: UnitId) -> Result<()> {
        self.check_unit(unit)?;
        self.spike_record[unit] = true;
        Ok(())
    }

    pub fn record_all_spikes(&mut self) {
        self.spike_record.iter_mut().for_each(|r| *r = true);
    }

    fn check_unit(&self, unit: UnitId) -> Result<()> {
        if unit < self.units.len() {
            Ok(())
        } else {
            Err(Error::param("unit", unit, "an existing unit id"))
        }
    }

    fn check_synapse(&self, syn: SynapseId) -> Result<()> {
        if syn < self.plastic.len() {
            Ok(())
        } else {
            Err(Error::param("synapse", syn, "an existing plastic synapse id"))
        }
    }
}

/// Compressed adjacency: the entries of row `r` are `items[start[r]..start[r + 1]]`.
#[derive(Debug, Clone)]
struct Csr<T> {
    start: Vec<usize>,
    items: Vec<T>,
}

impl<T: Copy> Csr<T> {
    fn build(rows: usize, entries: impl Iterator<Item = (usize, T)> + Clone) -> Self {
        let mut start = vec![0usize; rows + 1];
        for (r, _) in entries.clone() {
            start[r + 1] += 1;
        }
        for r in 0..rows {
            start[r + 1] += start[r];
        }
        let mut fill = start.clone();
        let mut items = Vec::new();
        for (r, item) in entries {
            if items.is_empty() {
                items.resize(start[rows], item);
            }
            items[fill[r]] = item;
            fill[r] += 1;
        }
        Self { start, items }
    }

    #[inline]
    fn span(&self, r: usize) -> std::ops::Range<usize> {
        self.start[r]..self.start[r + 1]
    }

    #[inline]
    fn row(&self, r: usize) -> &[T] {
        &self.items[self.start[r]..self.start[r + 1]]
    }
}

#[derive(Debug, Clone)]
struct VirtualUnit {
    unit: UnitId,
    rng: ChaCha8Rng,
    mode: VirtualMode,
    next: u64,
}

#[derive(Debug, Clone)]
enum VirtualMode {
    Silent,
    Poisson(Option<Geometric>),
    Replay { steps: Vec<u64>, offset: u64, cursor: usize },
}

impl VirtualUnit {
    fn schedule_from(&mut self, now: u64) {
        self.next = match &mut self.mode {
            VirtualMode::Silent | VirtualMode::Poisson(None) => u64::MAX,
            VirtualMode::Poisson(Some(g)) => now.saturating_add(g.sample(&mut self.rng)),
            VirtualMode::Replay { steps, offset, cursor } => {
                while *cursor < steps.len() && steps[*cursor] + *offset < now {
                    *cursor += 1;
                }
                steps.get(*cursor).map_or(u64::MAX, |s| s + *offset)
            }
        };
    }

    fn advance_after(&mut self, fired: u64) {
        match &mut self.mode {
            VirtualMode::Replay { cursor, .. } => {
                *cursor += 1;
                self.schedule_from(fired + 1);
            }
            _ => self.schedule_from(fired + 1),
        }
    }
}

struct Recorder<S> {
    probe: Probe,
    stride: u64,
    times: Vec<f64>,
    values: Vec<S>,
}

/// Counts of weight updates that the stop-learning gate allowed or blocked,
/// per post-synaptic unit. Only events whose ungated update would be
/// non-zero are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCount {
    pub open: u64,
    pub closed: u64,
}

/// A network being advanced step by step.
pub struct Simulation<S: Scalar> {
    dt: f64,
    dt_s: S,
    seed: u64,
    step: u64,
    started: Instant,

    kernels: Vec<NeuronKernel<S>>,
    lif: Vec<(u32, u32)>,
    states: Vec<NeuronState<S>>,
    init_states: Vec<NeuronState<S>>,
    virtuals: Vec<VirtualUnit>,
    virtual_index: Vec<Option<usize>>,

    fixed_out: Csr<(u32, S, Polarity)>,
    plastic_out: Csr<u32>,
    plastic_in: Csr<u32>,
    syn_pre: Vec<u32>,
    syn_post: Vec<u32>,
    w: Vec<S>,
    stamp: Vec<u64>,

    params: BcallParams<S>,
    learning: bool,
    track_traces: bool,
    x_i: Vec<S>,
    x_j: Vec<S>,
    x_s: Vec<S>,
    decay_i: S,
    decay_j: S,
    decay_s: S,

    spiked: Vec<bool>,
    current: Vec<UnitId>,
    pending: Vec<UnitId>,
    spike_counts: Vec<u64>,
    gate: Vec<GateCount>,

    recorders: Vec<Recorder<S>>,
    spike_record: Vec<bool>,
    spike_log: Vec<Vec<u64>>,
}

impl<S: Scalar> Simulation<S> {
    pub fn new(network: Network<S>, dt: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", dt, "> 0"));
        }
        network.plasticity.validate()?;
        for k in &network.kernels {
            k.validate()?;
        }
        let dt_s = S::lit(dt);
        let n = network.units.len();
        let kernels: Vec<_> = network.kernels.iter().map(|p| NeuronKernel::new(*p, dt_s)).collect();
        let fallback = NeuronState::resting(&NeuronParams::excitatory());
        let mut lif = Vec::new();
        let mut states = Vec::with_capacity(n);
        let mut virtuals = Vec::new();
        let mut virtual_index = vec![None; n];
        for (u, kind) in network.units.iter().enumerate() {
            match kind {
                UnitKind::Lif { kernel, init } => {
                    lif.push((u as u32, *kernel as u32));
                    states.push(*init);
                }
                UnitKind::Virtual(source) => {
                    states.push(fallback);
                    let rng = rng_from_seed(derive_seed(seed, &[POISSON_STREAM, u as u64]));
                    let mut v = VirtualUnit {
                        unit: u,
                        rng,
                        mode: VirtualMode::Silent,
                        next: u64::MAX,
                    };
                    v.mode = mode_for(source, dt)?;
                    v.schedule_from(0);
                    virtual_index[u] = Some(virtuals.len());
                    virtuals.push(v);
                }
            }
        }
        let fixed_out = Csr::build(
            n,
            network
                .fixed
                .iter()
                .map(|f| (f.pre, (f.post as u32, f.weight, f.polarity))),
        );
        let plastic_out = Csr::build(n, network.plastic.iter().enumerate().map(|(i, s)| (s.pre, i as u32)));
        let plastic_in = Csr::build(n, network.plastic.iter().enumerate().map(|(i, s)| (s.post, i as u32)));
        let p = network.plasticity;
        let recorders = network
            .probes
            .iter()
            .map(|(probe, stride)| Recorder {
                probe: probe.clone(),
                stride: *stride,
                times: Vec::new(),
                values: Vec::new(),
            })
            .collect();
        Ok(Self {
            dt,
            dt_s,
            seed,
            step: 0,
            started: Instant::now(),
            kernels,
            lif,
            init_states: states.clone(),
            states,
            virtuals,
            virtual_index,
            fixed_out,
            plastic_out,
            plastic_in,
            syn_pre: network.plastic.iter().map(|s| s.pre as u32).collect(),
            syn_post: network.plastic.iter().map(|s| s.post as u32).collect(),
            w: network.plastic.iter().map(|s| s.w_hid).collect(),
            stamp: vec![0; network.plastic.len()],
            track_traces: !network.plastic.is_empty()
                || network
                    .probes
                    .iter()
                    .any(|(p, _)| matches!(p, Probe::PreTrace(_) | Probe::PostTrace(_) | Probe::StopTrace(_))),
            params: p,
            learning: true,
            x_i: vec![S::zero(); n],
            x_j: vec![S::zero(); n],
            x_s: vec![S::zero(); n],
            decay_i: (-dt_s / p.tau_i).exp(),
            decay_j: (-dt_s / p.tau_j).exp(),
            decay_s: (-dt_s / p.tau_s).exp(),
            spiked: vec![false; n],
            current: Vec::new(),
            pending: Vec::new(),
            spike_counts: vec![0; n],
            gate: vec![GateCount::default(); n],
            recorders,
            spike_record: network.spike_record,
            spike_log: vec![Vec::new(); n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Index of the next step to run.
    pub fn now(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn n_units(&self) -> usize {
        self.states.len()
    }

    pub fn neuron(&self, unit: UnitId) -> &NeuronState<S> {
        &self.states[unit]
    }

    pub fn plasticity(&self) -> &BcallParams<S> {
        &self.params
    }

    /// Replaces the rule parameters from the current step on. Weights are
    /// brought up to date first so that earlier drift uses the old values.
    pub fn set_plasticity(&mut self, params: BcallParams<S>) -> Result<()> {
        params.validate()?;
        self.materialize();
        self.decay_i = (-self.dt_s / params.tau_i).exp();
        self.decay_j = (-self.dt_s / params.tau_j).exp();
        self.decay_s = (-self.dt_s / params.tau_s).exp();
        self.params = params;
        Ok(())
    }

    /// Enables or freezes plasticity (weight updates, trace jumps and drift).
    pub fn set_learning(&mut self, on: bool) {
        if on == self.learning {
            return;
        }
        // Freezing stops the drift clock; restarting resumes it from now.
        if self.learning {
            self.materialize();
        } else {
            self.stamp.iter_mut().for_each(|s| *s = self.step);
        }
        self.learning = on;
    }

    pub fn learning(&self) -> bool {
        self.learning
    }

    pub fn set_source(&mut self, unit: UnitId, source: &Source) -> Result<()> {
        let idx = self
            .virtual_index
            .get(unit)
            .copied()
            .flatten()
            .ok_or_else(|| Error::param("unit", unit, "a virtual unit"))?;
        let mode = mode_for(source, self.dt)?;
        let v = &mut self.virtuals[idx];
        v.mode = match mode {
            VirtualMode::Replay { steps, cursor, .. } => VirtualMode::Replay {
                steps,
                offset: self.step,
                cursor,
            },
            m => m,
        };
        v.schedule_from(self.step);
        Ok(())
    }

    /// Sets a Poisson rate (Hz) starting at the current step.
    pub fn set_rate(&mut self, unit: UnitId, rate: f64) -> Result<()> {
        self.set_source(unit, &Source::Poisson { rate })
    }

    /// Clears membranes, PSPs, traces and in-flight spikes. Weights keep
    /// their values.
    pub fn reset_dynamics(&mut self) {
        self.states.copy_from_slice(&self.init_states);
        self.x_i.iter_mut().for_each(|x| *x = S::zero());
        self.x_j.iter_mut().for_each(|x| *x = S::zero());
        self.x_s.iter_mut().for_each(|x| *x = S::zero());
        self.pending.clear();
    }

    pub fn spike_counts(&self) -> &[u64] {
        &self.spike_counts
    }

    pub fn reset_spike_counts(&mut self) {
        self.spike_counts.iter_mut().for_each(|c| *c = 0);
    }

    pub fn gate_counts(&self) -> &[GateCount] {
        &self.gate
    }

    pub fn reset_gate_counts(&mut self) {
        self.gate.iter_mut().for_each(|g| *g = GateCount::default());
    }

    pub fn n_plastic(&self) -> usize {
        self.w.len()
    }

    /// Hidden weight of a plastic synapse at the start of the current step.
    pub fn w_hid(&self, syn: SynapseId) -> S {
        self.weight_at(syn, self.step)
    }

    pub fn weights(&self) -> Vec<S> {
        (0..self.w.len()).map(|s| self.weight_at(s, self.step)).collect()
    }

    pub fn set_w_hid(&mut self, syn: SynapseId, w_hid: S) -> Result<()> {
        if !(w_hid >= S::zero() && w_hid <= S::one()) {
            return Err(Error::param("w_hid", w_hid, "in [0, 1]"));
        }
        self.w[syn] = w_hid;
        self.stamp[syn] = self.step;
        Ok(())
    }

    pub fn synapse_endpoints(&self, syn: SynapseId) -> (UnitId, UnitId) {
        (self.syn_pre[syn] as usize, self.syn_post[syn] as usize)
    }

    pub fn traces(&self, unit: UnitId) -> (S, S, S) {
        (self.x_i[unit], self.x_j[unit], self.x_s[unit])
    }

    #[inline]
    fn weight_at(&self, syn: usize, step: u64) -> S {
        if !self.learning {
            return self.w[syn];
        }
        let elapsed = step.saturating_sub(self.stamp[syn]);
        if elapsed == 0 {
            self.w[syn]
        } else {
            drift_weight(self.w[syn], &self.params, S::lit(elapsed as f64) * self.dt_s)
        }
    }

    fn materialize(&mut self) {
        for s in 0..self.w.len() {
            self.w[s] = self.weight_at(s, self.step);
            self.stamp[s] = self.step;
        }
    }

    pub fn advance(&mut self, n_steps: u64) -> Result<()> {
        for _ in 0..n_steps {
            self.step_once()?;
        }
        Ok(())
    }

    pub fn advance_for(&mut self, seconds: f64) -> Result<()> {
        let n = steps_for(seconds, self.dt)?;
        self.advance(n)
    }

    fn step_once(&mut self) -> Result<()> {
        let k = self.step;

        let pending = std::mem::take(&mut self.pending);
        for &u in &pending {
            self.deliver(u, k);
        }
        self.pending = pending;
        self.pending.clear();

        let mut current = std::mem::take(&mut self.current);
        current.clear();
        for v in &mut self.virtuals {
            if v.next == k {
                current.push(v.unit);
                v.advance_after(k);
            }
        }

        let t = S::lit(k as f64 * self.dt);
        for &(u, kernel) in &self.lif {
            let u = u as usize;
            let state = &mut self.states[u];
            let spiked = self.kernels[kernel as usize].step(state, t);
            if !state.v.is_finite() || !state.theta.is_finite() {
                return Err(Error::NonFinite {
                    unit: u,
                    step: k,
                    variable: "membrane",
                });
            }
            if spiked {
                current.push(u);
            }
        }

        if self.track_traces && self.learning {
            if !current.is_empty() {
                self.plasticity_events(&current, k);
            }
            self.decay_traces();
        }

        for &u in &current {
            self.spike_counts[u] += 1;
            if self.spike_record[u] {
                self.spike_log[u].push(k);
            }
        }

        self.record(k);
        std::mem::swap(&mut self.pending, &mut current);
        self.current = current;
        self.step += 1;
        Ok(())
    }

    #[inline]
    fn deliver(&mut self, u: UnitId, k: u64) {
        for &(post, weight, polarity) in self.fixed_out.row(u) {
            let s = &mut self.states[post as usize];
            match polarity {
                Polarity::Excitatory => s.e += weight,
                Polarity::Inhibitory => s.i += weight,
            }
        }
        for &syn in self.plastic_out.row(u) {
            let syn = syn as usize;
            let w = effective_weight(self.weight_at(syn, k), &self.params);
            if w > S::zero() {
                let post = self.syn_post[syn] as usize;
                if self.virtual_index[post].is_none() {
                    self.states[post].e += w;
                }
            }
        }
    }

    fn plasticity_events(&mut self, current: &[UnitId], k: u64) {
        let p = self.params;
        for &u in current {
            self.spiked[u] = true;
        }
        for &u in current {
            for idx in self.plastic_out.span(u) {
                let syn = self.plastic_out.items[idx] as usize;
                let post = self.syn_post[syn] as usize;
                let open = stop_gate(self.x_s[post], &p);
                let mut delta = S::zero();
                if self.x_j[post] > p.theta_j {
                    count(&mut self.gate[post], open);
                    delta += pre_spike_delta(self.x_j[post], self.x_s[post], &p);
                }
                if self.spiked[post] && self.x_i[u] > S::zero() {
                    count(&mut self.gate[post], open);
                    delta += post_spike_delta(self.x_i[u], self.x_s[post], &p);
                }
                self.apply(syn, delta, k);
            }
            for idx in self.plastic_in.span(u) {
                let syn = self.plastic_in.items[idx] as usize;
                let pre = self.syn_pre[syn] as usize;
                if self.spiked[pre] || self.x_i[pre] <= S::zero() {
                    continue;
                }
                let open = stop_gate(self.x_s[u], &p);
                count(&mut self.gate[u], open);
                let delta = post_spike_delta(self.x_i[pre], self.x_s[u], &p);
                self.apply(syn, delta, k);
            }
        }
        for &u in current {
            self.spiked[u] = false;
            self.x_i[u] = trace_jump(self.x_i[u], p.a_i, p.x_max_i);
            self.x_j[u] = trace_jump(self.x_j[u], p.a_j, p.x_max_j);
            self.x_s[u] = trace_jump(self.x_s[u], p.a_s, p.x_max_s);
        }
    }

    #[inline]
    fn apply(&mut self, syn: usize, delta: S, k: u64) {
        if delta == S::zero() {
            return;
        }
        let w = self.weight_at(syn, k);
        self.w[syn] = (w + delta).clamp_unit();
        self.stamp[syn] = k;
    }

    fn decay_traces(&mut self) {
        let tiny = S::min_positive_value();
        for (xs, f) in [
            (&mut self.x_i, self.decay_i),
            (&mut self.x_j, self.decay_j),
            (&mut self.x_s, self.decay_s),
        ] {
            for x in xs.iter_mut() {
                if *x != S::zero() {
                    *x *= f;
                    if *x < tiny {
                        *x = S::zero();
                    }
                }
            }
        }
    }

    fn record(&mut self, k: u64) {
        if self.recorders.is_empty() {
            return;
        }
        let end = k + 1;
        let t = end as f64 * self.dt;
        for r in 0..self.recorders.len() {
            if !end.is_multiple_of(self.recorders[r].stride) {
                continue;
            }
            let value = match &self.recorders[r].probe {
                Probe::Membrane(u) => self.states[*u].v,
                Probe::Threshold(u) => self.states[*u].theta,
                Probe::PreTrace(u) => self.x_i[*u],
                Probe::PostTrace(u) => self.x_j[*u],
                Probe::StopTrace(u) => self.x_s[*u],
                Probe::Weight(s) => self.weight_at(*s, end),
                Probe::MeanWeight(set) => {
                    let sum: S = set.iter().map(|&s| self.weight_at(s, end)).sum();
                    sum / S::lit(set.len() as f64)
                }
            };
            let rec = &mut self.recorders[r];
            rec.times.push(t);
            rec.values.push(value);
        }
    }

    /// Ends the run and collects recorded spikes and series.
    pub fn finish(self) -> RunResult<S> {
        let n_steps = self.step;
        let dt = self.dt;
        let spikes = self
            .spike_log
            .into_iter()
            .enumerate()
            .filter(|(u, _)| self.spike_record[*u])
            .map(|(u, steps)| {
                let train = SpikeTrain::from_steps(steps, n_steps, dt).expect("engine emits ordered spikes");
                (u, train)
            })
            .collect();
        let series = self
            .recorders
            .into_iter()
            .map(|r| Series {
                probe: r.probe,
                stride: r.stride,
                times: r.times,
                values: r.values,
            })
            .collect();
        RunResult {
            dt,
            duration: n_steps as f64 * dt,
            seed: self.seed,
            spikes,
            series,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        }
    }
}

#[inline]
fn count(g: &mut GateCount, open: bool) {
    if open {
        g.open += 1;
    } else {
        g.closed += 1;
    }
}

fn mode_for(source: &Source, dt: f64) -> Result<VirtualMode> {
    Ok(match source {
        Source::Silent => VirtualMode::Silent,
        Source::Poisson { rate } => {
            if !(*rate >= 0.0) || !rate.is_finite() {
                return Err(Error::param("rate", rate, ">= 0"));
            }
            let p = rate * dt;
            if p > 1.0 {
                return Err(Error::RateTooHigh { rate: *rate, dt });
            }
            if p == 0.0 {
                VirtualMode::Poisson(None)
            } else {
                VirtualMode::Poisson(Some(Geometric::new(p).expect("p in (0, 1]")))
            }
        }
        Source::Replay(train) => {
            if (train.dt() - dt).abs() > 1e-12 * dt {
                return Err(Error::param("train dt", train.dt(), "equal to the simulation dt"));
            }
            VirtualMode::Replay {
                steps: train.steps().to_vec(),
                offset: 0,
                cursor: 0,
            }
        }
    })
}

/// Builds a simulation, runs it for `config.duration` and returns the
/// recorded output.
pub fn run<S: Scalar>(network: Network<S>, config: &SimConfig) -> Result<RunResult<S>> {
    let n = config.n_steps()?;
    let mut sim = Simulation::new(network, config.dt, config.seed)?;
    sim.advance(n)?;
    Ok(sim.finish())
}

/// Draws a uniform hidden weight in `[0, 1)`.
pub fn uniform_weight<S: Scalar>(rng: &mut impl Rng) -> S {
    S::lit(rng.random::<f64>())
}
