//! Leaky integrate-and-fire neuron with an adaptive threshold and
//! exponentially decaying excitatory / inhibitory PSP accumulators.
//!
//! Membrane: `tau_mem dV/dt = (V_r - V) + E - I + A sin(2 pi f t + phi)`,
//! with `dE/dt = -E / tau_epsp`, `dI/dt = -I / tau_ipsp` and the threshold
//! relaxing to `V_thr` with `tau_thr`. Every variable is advanced with the
//! exponential-Euler update, which is exact for each linear sub-system.
//! On a spike `V <- V_rse` and the threshold jumps by `V_incr`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Subthreshold oscillation amplitude (mV) used when none is configured.
pub const DEFAULT_OSC_AMP: f64 = 4.5;

/// Voltages in mV, time constants in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams<S> {
    pub v_rest: S,
    pub v_reset: S,
    pub v_thr: S,
    pub v_incr: S,
    pub tau_thr: S,
    pub tau_mem: S,
    pub tau_epsp: S,
    pub tau_ipsp: S,
}

impl<S: Scalar> NeuronParams<S> {
    pub fn excitatory() -> Self {
        Self {
            v_rest: S::lit(-65.0),
            v_reset: S::lit(-65.0),
            v_thr: S::lit(-58.0),
            v_incr: S::lit(5.0),
            tau_thr: S::lit(0.020),
            tau_mem: S::lit(0.020),
            tau_epsp: S::lit(0.0035),
            tau_ipsp: S::lit(0.0055),
        }
    }

    /// The inhibitory column has no threshold adaptation; `tau_thr` is kept
    /// positive so the struct stays valid.
    pub fn inhibitory() -> Self {
        Self {
            v_rest: S::lit(-60.0),
            v_reset: S::lit(-60.0),
            v_thr: S::lit(-40.0),
            v_incr: S::zero(),
            tau_thr: S::lit(0.020),
            tau_mem: S::lit(0.010),
            tau_epsp: S::lit(0.0035),
            tau_ipsp: S::lit(0.0055),
        }
    }

    pub fn without_adaptation(mut self) -> Self {
        self.v_incr = S::zero();
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("tau_mem", self.tau_mem),
            ("tau_epsp", self.tau_epsp),
            ("tau_ipsp", self.tau_ipsp),
        ] {
            if !(v > S::zero()) {
                return Err(Error::param(field, v, "> 0"));
            }
        }
        if self.v_incr != S::zero() && !(self.tau_thr > S::zero()) {
            return Err(Error::param("tau_thr", self.tau_thr, "> 0 when v_incr != 0"));
        }
        if !(self.v_thr > self.v_reset) {
            return Err(Error::param("v_thr", self.v_thr, "> v_reset"));
        }
        for (field, v) in [("v_rest", self.v_rest), ("v_reset", self.v_reset), ("v_incr", self.v_incr)] {
            if !v.is_finite() {
                return Err(Error::param(field, v, "finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState<S> {
    pub v: S,
    /// Current (adapted) threshold.
    pub theta: S,
    pub e: S,
    pub i: S,
    pub osc_phase: S,
    pub osc_amp: S,
    pub osc_freq: S,
}

impl<S: Scalar> NeuronState<S> {
    pub fn resting(params: &NeuronParams<S>) -> Self {
        Self {
            v: params.v_rest,
            theta: params.v_thr,
            e: S::zero(),
            i: S::zero(),
            osc_phase: S::zero(),
            osc_amp: S::zero(),
            osc_freq: S::zero(),
        }
    }

    /// Clears membrane and PSP state but keeps the oscillation settings.
    pub fn reset(&mut self, params: &NeuronParams<S>) {
        self.v = params.v_rest;
        self.theta = params.v_thr;
        self.e = S::zero();
        self.i = S::zero();
    }

    #[inline]
    pub fn oscillation(&self, t: S) -> S {
        if self.osc_amp == S::zero() {
            return S::zero();
        }
        self.osc_amp * (S::TAU() * self.osc_freq * t + self.osc_phase).sin()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.theta.is_finite() && self.e.is_finite() && self.i.is_finite()
    }
}

pub fn receive_spike<S: Scalar>(
    mut state: NeuronState<S>,
    weight: S,
    polarity: Polarity,
) -> Result<NeuronState<S>> {
    if weight < S::zero() {
        return Err(Error::NegativeWeight(weight.as_f64()));
    }
    match polarity {
        Polarity::Excitatory => state.e += weight,
        Polarity::Inhibitory => state.i += weight,
    }
    Ok(state)
}

/// Per-step decay factors for one parameter set at a fixed `dt`.
#[derive(Debug, Clone, Copy)]
pub struct NeuronKernel<S> {
    params: NeuronParams<S>,
    mem: S,
    epsp: S,
    ipsp: S,
    thr: S,
}

impl<S: Scalar> NeuronKernel<S> {
    pub fn new(params: NeuronParams<S>, dt: S) -> Self {
        let thr = if params.tau_thr > S::zero() {
            (-dt / params.tau_thr).exp()
        } else {
            S::zero()
        };
        Self {
            params,
            mem: (-dt / params.tau_mem).exp(),
            epsp: (-dt / params.tau_epsp).exp(),
            ipsp: (-dt / params.tau_ipsp).exp(),
            thr,
        }
    }

    pub fn params(&self) -> &NeuronParams<S> {
        &self.params
    }

    /// Advances one step ending at time `t + dt`, driven by the inputs
    /// present at time `t`. Returns whether the neuron spiked.
    #[inline]
    pub fn step(&self, s: &mut NeuronState<S>, t: S) -> bool {
        let p = &self.params;
        let v_inf = p.v_rest + s.e - s.i + s.oscillation(t);
        s.v = v_inf + (s.v - v_inf) * self.mem;
        s.e *= self.epsp;
        s.i *= self.ipsp;
        s.theta = p.v_thr + (s.theta - p.v_thr) * self.thr;
        if s.v >= s.theta {
            s.v = p.v_reset;
            s.theta += p.v_incr;
            true
        } else {
            false
        }
    }
}

pub fn integrate<S: Scalar>(
    mut state: NeuronState<S>,
    params: &NeuronParams<S>,
    dt: S,
    t: S,
) -> (NeuronState<S>, bool) {
    let spiked = NeuronKernel::new(*params, dt).step(&mut state, t);
    (state, spiked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const DT: f64 = 1e-4;

    fn exc() -> NeuronParams<f64> {
        NeuronParams::excitatory()
    }

    #[test]
    fn accumulators_sum_linearly() {
        let s = NeuronState::resting(&exc());
        let s = receive_spike(s, 1.0, Polarity::Excitatory).unwrap();
        assert_eq!(s.e, 1.0);
        let s = receive_spike(s, 1.0, Polarity::Excitatory).unwrap();
        assert_eq!(s.e, 2.0);
        let s = receive_spike(NeuronState::resting(&exc()), 30.0, Polarity::Inhibitory).unwrap();
        assert_eq!(s.i, 30.0);
        assert_eq!(s.e, 0.0);
        assert!(receive_spike(s, -1.0, Polarity::Excitatory).is_err());
    }

    #[test]
    fn resting_state_is_fixed_point() {
        let p = exc();
        let k = NeuronKernel::new(p, DT);
        let mut s = NeuronState::resting(&p);
        for step in 0..10_000 {
            assert!(!k.step(&mut s, step as f64 * DT));
            assert_eq!(s.v, p.v_rest);
        }
    }

    #[test]
    fn strong_input_spikes_within_two_ms() {
        let p = exc();
        let k = NeuronKernel::new(p, DT);
        let mut s = receive_spike(NeuronState::resting(&p), 100.0, Polarity::Excitatory).unwrap();
        let mut fired_at = None;
        for step in 0..20 {
            if k.step(&mut s, step as f64 * DT) {
                fired_at = Some(step);
                break;
            }
        }
        assert!(fired_at.is_some(), "no spike within 2 ms");
        assert_relative_eq!(s.theta, -53.0, epsilon = 1e-9);
        assert_eq!(s.v, p.v_reset);
    }

    #[test]
    fn threshold_relaxes_with_tau_thr() {
        let p = exc();
        let k = NeuronKernel::new(p, DT);
        let mut s = NeuronState::resting(&p);
        s.theta = p.v_thr + p.v_incr;
        for step in 0..200 {
            k.step(&mut s, step as f64 * DT);
        }
        // 20 ms = one time constant
        assert_relative_eq!(s.theta, -58.0 + 5.0 * (-1.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn no_adaptation_keeps_threshold_fixed() {
        let p = exc().without_adaptation();
        let k = NeuronKernel::new(p, DT);
        let mut s = NeuronState::resting(&p);
        for step in 0..5000 {
            if step % 50 == 0 {
                s.e += 40.0;
            }
            k.step(&mut s, step as f64 * DT);
            assert_eq!(s.theta, p.v_thr);
        }
    }

    #[test]
    fn relaxes_monotonically_without_input() {
        let p = exc();
        let k = NeuronKernel::new(p, DT);
        let mut s = NeuronState::resting(&p);
        s.v = -61.0;
        let mut prev = s.v;
        for step in 0..3000 {
            assert!(!k.step(&mut s, step as f64 * DT));
            assert!(s.v <= prev && s.v >= p.v_rest);
            prev = s.v;
        }
    }

    #[test]
    fn subthreshold_response_is_linear() {
        let p = exc();
        let k = NeuronKernel::new(p, DT);
        let trace = |spikes: &[(usize, f64)]| {
            let mut s = NeuronState::resting(&p);
            let mut out = Vec::new();
            for step in 0..400 {
                for &(at, w) in spikes {
                    if at == step {
                        s.e += w;
                    }
                }
                assert!(!k.step(&mut s, step as f64 * DT));
                out.push(s.v - p.v_rest);
            }
            out
        };
        let a = trace(&[(10, 3.0)]);
        let b = trace(&[(55, 4.0)]);
        let ab = trace(&[(10, 3.0), (55, 4.0)]);
        for ((x, y), z) in a.iter().zip(&b).zip(&ab) {
            assert_relative_eq!(x + y, *z, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn default_oscillation_alone_is_subthreshold() {
        let p = exc();
        let k = NeuronKernel::new(p, DT);
        let mut s = NeuronState::resting(&p);
        s.osc_amp = DEFAULT_OSC_AMP;
        s.osc_freq = 3.0;
        for step in 0..100_000 {
            assert!(!k.step(&mut s, step as f64 * DT));
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = exc();
        p.tau_mem = 0.0;
        assert!(p.validate().is_err());
        let mut p = exc();
        p.v_thr = -70.0;
        assert!(p.validate().is_err());
        exc().validate().unwrap();
        NeuronParams::<f64>::inhibitory().validate().unwrap();
    }
}
