//! Recurrent excitatory/inhibitory network with sinusoidal membrane drive.
//!
//! Excitatory cells connect to each other through plastic synapses that
//! start in the low state. A stimulated subset of excitatory cells receives
//! strong Poisson drive; every excitatory cell also receives a subthreshold
//! sinusoid whose phase is either spread over the whole cycle or nearly
//! aligned across cells. The run reports how quickly the hidden weights
//! inside the stimulated subset grow.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{mean_resultant_length, spike_sync_trains};
use crate::engine::{Network, Probe, Simulation, Source, SynapseId, UnitId, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::neuron::{NeuronParams, Polarity, DEFAULT_OSC_AMP};
use crate::plasticity::BcallParams;
use crate::scalar::Scalar;
use crate::spikegen::{derive_seed, phase_assignment, rng_from_seed, steps_for, PhaseMode, SpikeTrain};

const WIRING_STREAM: u64 = 0x5749;
const PHASE_STREAM: u64 = 0x5048;
const RUN_STREAM: u64 = 0x524e;

/// Where the `f_inh` / `w_inh` virtual drivers project.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InhibitoryDrive {
    /// One inhibitory driver onto every neuron.
    AllNeurons,
    /// One excitatory driver onto every inhibitory neuron; excitatory cells
    /// get none.
    InhibitoryPool,
}

impl std::str::FromStr for InhibitoryDrive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_neurons" | "all-neurons" => Ok(Self::AllNeurons),
            "inhibitory_pool" | "inhibitory-pool" => Ok(Self::InhibitoryPool),
            _ => Err(Error::param("inhibitory_drive", s, "all_neurons or inhibitory_pool")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsnnConfig {
    pub n_exc: usize,
    pub n_inh: usize,
    /// Potentiated excitatory-excitatory weight (mV).
    pub w_ee: f64,
    pub w_ei: f64,
    pub w_ie: f64,
    pub w_ii: f64,
    /// Weight of the excitatory virtual drivers (mV).
    pub w_exc: f64,
    /// Weight of the inhibitory virtual drivers (mV).
    pub w_inh: f64,
    /// Excitatory driver rate (Hz).
    pub f_exc: f64,
    /// Inhibitory driver rate (Hz).
    pub f_inh: f64,
    pub p_ee: f64,
    pub p_ei: f64,
    pub p_ie: f64,
    pub p_ii: f64,
    /// Oscillation frequency (Hz).
    pub f_osc: f64,
    /// Oscillation amplitude (mV).
    pub osc_amp: f64,
    pub phase_mode: PhaseMode,
    /// The first `n_stim` excitatory cells are stimulated.
    pub n_stim: usize,
    /// Drive the non-stimulated excitatory cells at `f_exc` as well.
    pub background: bool,
    pub inhibitory_drive: InhibitoryDrive,
    /// Initial hidden weight of every plastic synapse.
    pub w_hid_init: f64,
    pub duration: f64,
    /// Mean-weight sampling stride (steps).
    pub stride: u64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for RsnnConfig {
    fn default() -> Self {
        Self {
            n_exc: 256,
            n_inh: 64,
            w_ee: 3.0,
            w_ei: 3.0,
            w_ie: 2.0,
            w_ii: 2.0,
            w_exc: 1.0,
            w_inh: 10.0,
            f_exc: 1000.0,
            f_inh: 200.0,
            p_ee: 0.5,
            p_ei: 0.25,
            p_ie: 0.25,
            p_ii: 0.5,
            f_osc: 3.0,
            osc_amp: DEFAULT_OSC_AMP,
            phase_mode: PhaseMode::Random,
            n_stim: 64,
            background: false,
            inhibitory_drive: InhibitoryDrive::InhibitoryPool,
            w_hid_init: 0.0,
            duration: 1.0,
            stride: 10,
            dt: DEFAULT_DT,
            seed: 0,
        }
    }
}

impl RsnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_exc < 2 {
            return Err(Error::param("n_exc", self.n_exc, ">= 2"));
        }
        if self.n_stim < 2 || self.n_stim > self.n_exc {
            return Err(Error::param("n_stim", self.n_stim, "in [2, n_exc]"));
        }
        for (field, p) in [("p_ee", self.p_ee), ("p_ei", self.p_ei), ("p_ie", self.p_ie), ("p_ii", self.p_ii)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(field, p, "in [0, 1]"));
            }
        }
        for (field, w) in [
            ("w_ee", self.w_ee),
            ("w_ei", self.w_ei),
            ("w_ie", self.w_ie),
            ("w_ii", self.w_ii),
            ("w_exc", self.w_exc),
            ("w_inh", self.w_inh),
            ("osc_amp", self.osc_amp),
            ("f_osc", self.f_osc),
        ] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::param(field, w, ">= 0"));
            }
        }
        for (field, f) in [("f_exc", self.f_exc), ("f_inh", self.f_inh)] {
            if !(f >= 0.0) || f * self.dt > 1.0 {
                return Err(Error::param(field, f, "in [0, 1/dt]"));
            }
        }
        if !(0.0..=1.0).contains(&self.w_hid_init) {
            return Err(Error::param("w_hid_init", self.w_hid_init, "in [0, 1]"));
        }
        if self.stride == 0 {
            return Err(Error::param("stride", self.stride, ">= 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", self.dt, "> 0"));
        }
        steps_for(self.duration, self.dt)?;
        Ok(())
    }

    pub fn stimulated(&self) -> std::ops::Range<UnitId> {
        0..self.n_stim
    }
}

/// Rule parameters for the recurrent network: gate open, potentiated
/// weight `w_ee`.
pub fn rsnn_params<S: Scalar>(config: &RsnnConfig, base: BcallParams<S>) -> BcallParams<S> {
    let mut p = base.gate_open();
    p.w_pot = S::lit(config.w_ee);
    p.w_dep = S::zero();
    p
}

#[derive(Debug, Clone)]
pub struct Rsnn<S> {
    pub network: Network<S>,
    pub exc: Vec<UnitId>,
    pub inh: Vec<UnitId>,
    /// Oscillation phase of each excitatory cell.
    pub phases: Vec<f64>,
    /// Plastic synapses with both ends in the stimulated subset.
    pub subset_synapses: Vec<SynapseId>,
}

/// Wires the network. The wiring and driver streams depend only on `seed`,
/// so the two phase modes share connectivity and input for the same seed.
pub fn build_rsnn<S: Scalar>(config: &RsnnConfig, base: BcallParams<S>) -> Result<Rsnn<S>> {
    config.validate()?;
    let mut net = Network::new(rsnn_params(config, base));
    let e_params = NeuronParams::<S>::excitatory().without_adaptation();
    let i_params = NeuronParams::<S>::inhibitory().without_adaptation();
    let exc: Vec<UnitId> = (0..config.n_exc).map(|_| net.add_neuron(e_params)).collect();
    let inh: Vec<UnitId> = (0..config.n_inh).map(|_| net.add_neuron(i_params)).collect();

    let phases = phase_assignment(config.n_exc, config.phase_mode, derive_seed(config.seed, &[PHASE_STREAM]));
    for (&u, &phi) in exc.iter().zip(&phases) {
        net.set_oscillation(u, S::lit(config.osc_amp), S::lit(config.f_osc), S::lit(phi))?;
    }

    let mut rng = rng_from_seed(derive_seed(config.seed, &[WIRING_STREAM]));
    let w_init = S::lit(config.w_hid_init);
    let stim = config.stimulated();
    let mut subset_synapses = Vec::new();
    for &pre in &exc {
        for &post in &exc {
            if pre != post && rng.random_bool(config.p_ee) {
                let id = net.connect_plastic(pre, post, w_init)?;
                if stim.contains(&pre) && stim.contains(&post) {
                    subset_synapses.push(id);
                }
            }
        }
    }
    let blocks = [
        (&exc, &inh, config.p_ei, config.w_ei, Polarity::Excitatory),
        (&inh, &exc, config.p_ie, config.w_ie, Polarity::Inhibitory),
        (&inh, &inh, config.p_ii, config.w_ii, Polarity::Inhibitory),
    ];
    for (pres, posts, p, w, polarity) in blocks {
        for &pre in pres.iter() {
            for &post in posts.iter() {
                if pre != post && rng.random_bool(p) {
                    net.connect(pre, post, S::lit(w), polarity)?;
                }
            }
        }
    }

    for (k, &u) in exc.iter().enumerate() {
        let rate = if stim.contains(&k) || config.background {
            config.f_exc
        } else {
            0.0
        };
        let d = net.add_virtual(Source::Poisson { rate });
        net.connect(d, u, S::lit(config.w_exc), Polarity::Excitatory)?;
    }
    match config.inhibitory_drive {
        InhibitoryDrive::AllNeurons => {
            for &u in exc.iter().chain(&inh) {
                let d = net.add_virtual(Source::Poisson { rate: config.f_inh });
                net.connect(d, u, S::lit(config.w_inh), Polarity::Inhibitory)?;
            }
        }
        InhibitoryDrive::InhibitoryPool => {
            for &u in &inh {
                let d = net.add_virtual(Source::Poisson { rate: config.f_inh });
                net.connect(d, u, S::lit(config.w_inh), Polarity::Excitatory)?;
            }
        }
    }

    Ok(Rsnn {
        network: net,
        exc,
        inh,
        phases,
        subset_synapses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorRunResult {
    pub phase_mode: PhaseMode,
    pub seed: u64,
    /// Spike trains of the stimulated cells, in index order.
    pub raster: Vec<SpikeTrain>,
    /// Mean rate (Hz) of each stimulated cell.
    pub rates: Vec<f64>,
    /// Sample times of `whid_mean` (s).
    pub times: Vec<f64>,
    /// Mean hidden weight over the synapses inside the stimulated subset.
    pub whid_mean: Vec<f64>,
    /// SPIKE-synchronization over the non-empty stimulated trains.
    pub sync: f64,
    /// Concentration of stimulated spikes on the oscillation cycle.
    pub phase_locking: f64,
    pub n_subset_synapses: usize,
}

impl AttractorRunResult {
    pub fn final_whid(&self) -> f64 {
        self.whid_mean.last().copied().unwrap_or(f64::NAN)
    }

    pub fn mean_rate(&self) -> f64 {
        crate::analysis::mean(&self.rates)
    }
}

/// Builds the network for `config` and runs it for `config.duration`.
pub fn run_attractor_protocol<S: Scalar>(config: &RsnnConfig, base: BcallParams<S>) -> Result<AttractorRunResult> {
    let mut rsnn = build_rsnn(config, base)?;
    if rsnn.subset_synapses.is_empty() {
        return Err(Error::Undefined("no plastic synapse inside the stimulated subset"));
    }
    let stim: Vec<UnitId> = rsnn.exc[config.stimulated()].to_vec();
    for &u in &stim {
        rsnn.network.record_spikes(u)?;
    }
    let probe = Probe::MeanWeight(rsnn.subset_synapses.clone());
    rsnn.network.record(probe.clone(), config.stride)?;

    let n_steps = steps_for(config.duration, config.dt)?;
    let mut sim = Simulation::new(rsnn.network, config.dt, derive_seed(config.seed, &[RUN_STREAM]))?;
    sim.advance(n_steps)?;
    let result = sim.finish();

    let raster: Vec<SpikeTrain> = stim
        .iter()
        .map(|&u| result.train(u).cloned().unwrap_or_else(|| SpikeTrain::empty(n_steps, config.dt)))
        .collect();
    let rates = raster.iter().map(SpikeTrain::rate).collect();
    let active: Vec<SpikeTrain> = raster.iter().filter(|t| !t.is_empty()).cloned().collect();
    let sync = if active.len() >= 2 {
        spike_sync_trains(&active)?
    } else {
        0.0
    };
    let angles: Vec<f64> = raster
        .iter()
        .flat_map(|t| t.times())
        .map(|t| (2.0 * PI * config.f_osc * t).rem_euclid(2.0 * PI))
        .collect();
    let series = result.series(&probe).expect("mean weight probe was registered");

    Ok(AttractorRunResult {
        phase_mode: config.phase_mode,
        seed: config.seed,
        raster,
        rates,
        times: series.times.clone(),
        whid_mean: series.values.iter().map(|v| v.as_f64()).collect(),
        sync,
        phase_locking: mean_resultant_length(&angles),
        n_subset_synapses: rsnn.subset_synapses.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RsnnConfig {
        RsnnConfig {
            n_exc: 40,
            n_inh: 10,
            n_stim: 10,
            duration: 0.2,
            seed: 3,
            ..RsnnConfig::default()
        }
    }

    #[test]
    fn wiring_has_no_self_loops_and_starts_low() {
        let cfg = small();
        let r = build_rsnn::<f64>(&cfg, BcallParams::default()).unwrap();
        assert!(r.network.plastic().iter().all(|s| s.pre != s.post && s.w_hid == 0.0));
        assert!(r.network.fixed().iter().all(|s| s.pre != s.post));
        assert!(r.network.plastic().iter().all(|s| s.pre < cfg.n_exc && s.post < cfg.n_exc));
        let expected = cfg.p_ee * (cfg.n_exc * (cfg.n_exc - 1)) as f64;
        let n = r.network.plastic().len() as f64;
        assert!((n - expected).abs() < 4.0 * expected.sqrt(), "{n} vs {expected}");
    }

    #[test]
    fn phases_follow_mode() {
        let mut cfg = small();
        cfg.phase_mode = PhaseMode::Correlated;
        let r = build_rsnn::<f64>(&cfg, BcallParams::default()).unwrap();
        assert!(r.phases.iter().all(|p| p.abs() <= 0.1));
    }

    #[test]
    fn modes_share_wiring() {
        let mut cfg = small();
        let a = build_rsnn::<f64>(&cfg, BcallParams::default()).unwrap();
        cfg.phase_mode = PhaseMode::Correlated;
        let b = build_rsnn::<f64>(&cfg, BcallParams::default()).unwrap();
        assert_eq!(a.network.plastic(), b.network.plastic());
        assert_eq!(a.network.fixed(), b.network.fixed());
    }

    #[test]
    fn run_is_reproducible() {
        let cfg = small();
        let a = run_attractor_protocol::<f64>(&cfg, BcallParams::default()).unwrap();
        let b = run_attractor_protocol::<f64>(&cfg, BcallParams::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.whid_mean.len(), 200);
        assert_eq!(a.raster.len(), 10);
    }

    #[test]
    fn bad_probability_is_rejected() {
        let cfg = RsnnConfig {
            p_ie: 1.5,
            ..small()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidParam { field: "p_ie", .. })));
    }
}
