//! Calcium-trace Hebbian plasticity with a stop-learning gate and a bistable
//! hidden weight.
//!
//! Each neuron carries three exponentially decaying calcium traces: a
//! pre-synaptic trace `x_i` read by post-synaptic spikes, a post-synaptic
//! trace `x_j` read by pre-synaptic spikes, and a slow post-synaptic trace
//! `x_s` that gates learning. Traces jump with a soft bound
//! `x <- x + a (x_max - x)` on every spike of their neuron.
//!
//! A synapse owns only its hidden weight `w_hid` in `[0, 1]`:
//!
//! * pre spike: `w_hid += c1_d` if `x_j > theta_j` (post-pre depression),
//! * post spike: `w_hid += x_i c_p + c2_d [x_i < theta_i]` if `x_i > 0`,
//! * both weight terms are multiplied by the gate `rho = [theta_l <= x_s <= theta_u]`,
//! * between events `w_hid` drifts at `alpha / tau_w` towards 1 when
//!   `w_hid >= theta_w` and at `-beta / tau_w` towards 0 otherwise,
//! * the transmitted weight is `w_pot` when `w_hid >= theta_w`, else `w_dep`.
//!
//! Weight updates always read traces as they were before any jump caused by
//! spikes in the same time step, so a simultaneous pre and post spike applies
//! both terms and the outcome does not depend on visiting order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rule hyperparameters. Times in seconds, weights `w_pot`/`w_dep` in mV,
/// everything else dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcallParams<S> {
    pub tau_i: S,
    pub tau_j: S,
    pub tau_s: S,
    pub tau_w: S,
    pub a_i: S,
    pub a_j: S,
    pub a_s: S,
    pub x_max_i: S,
    pub x_max_j: S,
    pub x_max_s: S,
    pub theta_i: S,
    pub theta_j: S,
    pub theta_u: S,
    pub theta_l: S,
    pub theta_w: S,
    pub c1_d: S,
    pub c2_d: S,
    pub c_p: S,
    pub alpha: S,
    pub beta: S,
    pub w_pot: S,
    pub w_dep: S,
}

impl<S: Scalar> Default for BcallParams<S> {
    fn default() -> Self {
        Self {
            tau_i: S::lit(0.030),
            tau_j: S::lit(0.030),
            tau_s: S::lit(0.800),
            tau_w: S::lit(40.0),
            a_i: S::lit(0.4),
            a_j: S::lit(0.5),
            a_s: S::lit(0.075),
            x_max_i: S::one(),
            x_max_j: S::one(),
            x_max_s: S::one(),
            theta_i: S::lit(0.05),
            theta_j: S::lit(0.05),
            theta_u: S::lit(0.55),
            theta_l: S::lit(0.05),
            theta_w: S::lit(0.5),
            c1_d: S::lit(-0.026),
            c2_d: S::lit(-0.008),
            c_p: S::lit(0.18),
            alpha: S::one(),
            beta: S::one(),
            w_pot: S::one(),
            w_dep: S::zero(),
        }
    }
}

impl<S: Scalar> BcallParams<S> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_i", self.tau_i),
            ("tau_j", self.tau_j),
            ("tau_s", self.tau_s),
            ("tau_w", self.tau_w),
            ("x_max_i", self.x_max_i),
            ("x_max_j", self.x_max_j),
            ("x_max_s", self.x_max_s),
        ];
        for (field, v) in positive {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(Error::param(field, v, "> 0"));
            }
        }
        for (field, v) in [("a_i", self.a_i), ("a_j", self.a_j), ("a_s", self.a_s)] {
            if !(v > S::zero() && v <= S::one()) {
                return Err(Error::param(field, v, "in (0, 1]"));
            }
        }
        if !(self.theta_w > S::zero() && self.theta_w < S::one()) {
            return Err(Error::param("theta_w", self.theta_w, "in (0, 1)"));
        }
        if !(self.theta_l < self.theta_u) {
            return Err(Error::param("theta_l", self.theta_l, "< theta_u"));
        }
        for (field, v) in [("theta_i", self.theta_i), ("theta_j", self.theta_j)] {
            if !(v >= S::zero()) {
                return Err(Error::param(field, v, ">= 0"));
            }
        }
        if !(self.c1_d <= S::zero()) {
            return Err(Error::param("c1_d", self.c1_d, "<= 0"));
        }
        if !(self.c2_d <= S::zero()) {
            return Err(Error::param("c2_d", self.c2_d, "<= 0"));
        }
        if !(self.c_p >= S::zero()) {
            return Err(Error::param("c_p", self.c_p, ">= 0"));
        }
        if !(self.alpha >= S::zero()) {
            return Err(Error::param("alpha", self.alpha, ">= 0"));
        }
        if !(self.beta >= S::zero()) {
            return Err(Error::param("beta", self.beta, ">= 0"));
        }
        if !(self.w_pot >= S::zero() && self.w_pot.is_finite()) {
            return Err(Error::param("w_pot", self.w_pot, ">= 0"));
        }
        if !(self.w_dep >= S::zero() && self.w_dep.is_finite()) {
            return Err(Error::param("w_dep", self.w_dep, ">= 0"));
        }
        Ok(())
    }

    /// Window `[0, x_max_s]`: the gate is always open and updates equal the
    /// ungated rule.
    pub fn gate_open(mut self) -> Self {
        self.theta_l = S::zero();
        self.theta_u = self.x_max_s;
        self
    }

    pub fn without_bistability(mut self) -> Self {
        self.alpha = S::zero();
        self.beta = S::zero();
        self
    }
}

/// Traces seen by one synapse plus its hidden weight.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SynapseState<S> {
    pub x_i: S,
    pub x_j: S,
    pub x_s: S,
    pub w_hid: S,
}

impl<S: Scalar> SynapseState<S> {
    pub fn with_weight(w_hid: S) -> Self {
        Self {
            w_hid,
            ..Self::default()
        }
    }
}

pub fn decay<S: Scalar>(state: SynapseState<S>, params: &BcallParams<S>, dt: S) -> SynapseState<S> {
    SynapseState {
        x_i: state.x_i * (-dt / params.tau_i).exp(),
        x_j: state.x_j * (-dt / params.tau_j).exp(),
        x_s: state.x_s * (-dt / params.tau_s).exp(),
        w_hid: state.w_hid,
    }
}

/// Soft-bounded jump `x + a (x_max - x)`. With `a = 1` the trace is capped at
/// `x_max` and only remembers the latest spike.
#[inline]
pub fn trace_jump<S: Scalar>(x: S, a: S, x_max: S) -> S {
    (x + a * (x_max - x)).min(x_max)
}

#[inline]
pub fn stop_gate<S: Scalar>(x_s: S, params: &BcallParams<S>) -> bool {
    x_s >= params.theta_l && x_s <= params.theta_u
}

/// Weight change requested by a pre-synaptic spike, given the pre-jump
/// post-synaptic traces.
#[inline]
pub fn pre_spike_delta<S: Scalar>(x_j: S, x_s: S, params: &BcallParams<S>) -> S {
    if stop_gate(x_s, params) && x_j > params.theta_j {
        params.c1_d
    } else {
        S::zero()
    }
}

/// Weight change requested by a post-synaptic spike, given the pre-jump
/// pre-synaptic trace and the post-synaptic stop-learning trace.
#[inline]
pub fn post_spike_delta<S: Scalar>(x_i: S, x_s: S, params: &BcallParams<S>) -> S {
    if stop_gate(x_s, params) && x_i > S::zero() {
        let penalty = if x_i < params.theta_i {
            params.c2_d
        } else {
            S::zero()
        };
        x_i * params.c_p + penalty
    } else {
        S::zero()
    }
}

/// Applies the spikes of one time step. Both weight terms read the traces
/// before any jump; the jumps follow.
pub fn on_spikes<S: Scalar>(
    state: SynapseState<S>,
    params: &BcallParams<S>,
    pre: bool,
    post: bool,
) -> SynapseState<S> {
    let mut delta = S::zero();
    if pre {
        delta += pre_spike_delta(state.x_j, state.x_s, params);
    }
    if post {
        delta += post_spike_delta(state.x_i, state.x_s, params);
    }
    let mut next = state;
    next.w_hid = (state.w_hid + delta).clamp_unit();
    if pre {
        next.x_i = trace_jump(state.x_i, params.a_i, params.x_max_i);
    }
    if post {
        next.x_j = trace_jump(state.x_j, params.a_j, params.x_max_j);
        next.x_s = trace_jump(state.x_s, params.a_s, params.x_max_s);
    }
    next
}

pub fn on_pre_spike<S: Scalar>(state: SynapseState<S>, params: &BcallParams<S>) -> SynapseState<S> {
    on_spikes(state, params, true, false)
}

pub fn on_post_spike<S: Scalar>(state: SynapseState<S>, params: &BcallParams<S>) -> SynapseState<S> {
    on_spikes(state, params, false, true)
}

/// Drift slope per unit time for the current side of `theta_w`.
#[inline]
fn drift_rate<S: Scalar>(w_hid: S, params: &BcallParams<S>) -> S {
    if w_hid >= params.theta_w {
        params.alpha / params.tau_w
    } else {
        -params.beta / params.tau_w
    }
}

pub fn bistability_drift<S: Scalar>(
    state: SynapseState<S>,
    params: &BcallParams<S>,
    dt: S,
) -> SynapseState<S> {
    SynapseState {
        w_hid: drift_weight(state.w_hid, params, dt),
        ..state
    }
}

/// Drift of `w_hid` over an interval of length `elapsed` without events.
///
/// The drift never crosses `theta_w` (it points away from it), so `n` Euler
/// steps of size `dt` equal one step of size `n dt` followed by the clamp.
#[inline]
pub fn drift_weight<S: Scalar>(w_hid: S, params: &BcallParams<S>, elapsed: S) -> S {
    (w_hid + drift_rate(w_hid, params) * elapsed).clamp_unit()
}

#[inline]
pub fn effective_weight<S: Scalar>(w_hid: S, params: &BcallParams<S>) -> S {
    if w_hid >= params.theta_w {
        params.w_pot
    } else {
        params.w_dep
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> BcallParams<f64> {
        BcallParams::default()
    }

    #[test]
    fn defaults_match_reference_table() {
        let p = p();
        assert_eq!(p.tau_i, 0.030);
        assert_eq!(p.tau_j, 0.030);
        assert_eq!(p.tau_s, 0.800);
        assert_eq!(p.tau_w, 40.0);
        assert_eq!((p.a_i, p.a_j, p.a_s), (0.4, 0.5, 0.075));
        assert_eq!((p.theta_i, p.theta_j, p.theta_u, p.theta_l, p.theta_w), (0.05, 0.05, 0.55, 0.05, 0.5));
        assert_eq!((p.c1_d, p.c2_d, p.c_p), (-0.026, -0.008, 0.18));
        assert_eq!((p.x_max_i, p.x_max_j, p.x_max_s), (1.0, 1.0, 1.0));
        assert_eq!(p.w_pot, 1.0);
        p.validate().unwrap();
    }

    #[test]
    fn validation_names_field() {
        let mut q = p();
        q.theta_w = 1.5;
        let err = q.validate().unwrap_err().to_string();
        assert!(err.contains("theta_w"), "{err}");
        let mut q = p();
        q.theta_l = 0.6;
        assert!(q.validate().is_err());
        let mut q = p();
        q.c_p = -0.1;
        assert!(q.validate().is_err());
    }

    #[test]
    fn decay_closed_form() {
        let s = SynapseState { x_i: 0.4, ..Default::default() };
        let d = decay(s, &p(), 0.030);
        assert_relative_eq!(d.x_i, 0.4 * (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(d.x_i, 0.14715, epsilon = 1e-5);

        let zero = decay(SynapseState::<f64>::default(), &p(), 0.1);
        assert_eq!(zero, SynapseState::default());

        let s = SynapseState { x_s: 0.5, ..Default::default() };
        assert_eq!(decay(s, &p(), 0.0).x_s, 0.5);
    }

    #[test]
    fn soft_bound_jump() {
        assert_relative_eq!(trace_jump(0.0, 0.4, 1.0), 0.4);
        assert_relative_eq!(trace_jump(0.0755, 0.4, 1.0), 0.0755 + 0.4 * (1.0 - 0.0755), epsilon = 1e-15);
        assert_relative_eq!(trace_jump(0.0755, 0.4, 1.0), 0.4453, epsilon = 1e-12);
        assert_relative_eq!(trace_jump(0.07553, 0.4, 1.0), 0.44532, epsilon = 1e-5);
        assert_eq!(trace_jump(1.0, 1.0, 1.0), 1.0);
        assert_eq!(trace_jump(0.3, 1.0, 1.0), 1.0);
    }

    #[test]
    fn gate_window_inclusive() {
        let p = p();
        assert!(stop_gate(0.3, &p));
        assert!(!stop_gate(0.6, &p));
        assert!(stop_gate(0.05, &p));
        assert!(stop_gate(0.55, &p));
        assert!(!stop_gate(0.0, &p));
    }

    #[test]
    fn pre_spike_depresses_after_recent_post() {
        let x_j = 0.5 * (-10.0f64 / 30.0).exp();
        assert_relative_eq!(x_j, 0.35827, epsilon = 1e-5);
        let s = SynapseState { x_i: 0.0, x_j, x_s: 0.3, w_hid: 0.5 };
        let n = on_pre_spike(s, &p());
        assert_relative_eq!(n.w_hid, 0.5 - 0.026, epsilon = 1e-15);
        assert_eq!(n.x_i, 0.4);
        assert_eq!(n.x_j, x_j);

        let s = SynapseState { x_j: 0.01, x_s: 0.3, w_hid: 0.5, ..Default::default() };
        let n = on_pre_spike(s, &p());
        assert_eq!(n.w_hid, 0.5);
        assert_eq!(n.x_i, 0.4);

        // gate closed: weight frozen, trace still jumps
        let s = SynapseState { x_j: 0.35, x_s: 0.7, w_hid: 0.5, ..Default::default() };
        let n = on_pre_spike(s, &p());
        assert_eq!(n.w_hid, 0.5);
        assert_eq!(n.x_i, 0.4);
    }

    #[test]
    fn post_spike_potentiates_by_pre_trace() {
        let x_i = 0.4 * (-10.0f64 / 30.0).exp();
        assert_relative_eq!(x_i, 0.28661, epsilon = 1e-5);
        let s = SynapseState { x_i, x_j: 0.0, x_s: 0.3, w_hid: 0.5 };
        let n = on_post_spike(s, &p());
        assert_relative_eq!(n.w_hid - 0.5, x_i * 0.18, epsilon = 1e-15);
        assert_relative_eq!(n.w_hid - 0.5, 0.051590, epsilon = 1e-6);
        assert_eq!(n.x_j, 0.5);
        assert_relative_eq!(n.x_s, 0.3 + 0.075 * 0.7, epsilon = 1e-15);

        // distal pairing: trace below theta_i adds the c2 penalty
        let x_i = 0.4 * (-90.0f64 / 30.0).exp();
        assert_relative_eq!(x_i, 0.01991, epsilon = 1e-5);
        let s = SynapseState { x_i, x_s: 0.3, w_hid: 0.5, ..Default::default() };
        let n = on_post_spike(s, &p());
        assert_relative_eq!(n.w_hid - 0.5, x_i * 0.18 - 0.008, epsilon = 1e-15);
        assert_relative_eq!(n.w_hid - 0.5, -0.004416, epsilon = 1e-6);

        // no pre history: weight unchanged, traces jump
        let s = SynapseState { x_s: 0.3, w_hid: 0.5, ..Default::default() };
        let n = on_post_spike(s, &p());
        assert_eq!(n.w_hid, 0.5);
        assert_eq!(n.x_j, 0.5);
        assert!(n.x_s > 0.3);
    }

    #[test]
    fn simultaneous_spikes_read_pre_jump_traces() {
        let p = p();
        let s = SynapseState { x_i: 0.2, x_j: 0.3, x_s: 0.2, w_hid: 0.5 };
        let both = on_spikes(s, &p, true, true);
        assert_relative_eq!(both.w_hid, 0.5 - 0.026 + 0.2 * 0.18, epsilon = 1e-15);
        assert_eq!(both.x_i, trace_jump(0.2, 0.4, 1.0));
        assert_eq!(both.x_j, trace_jump(0.3, 0.5, 1.0));
    }

    #[test]
    fn drift_and_clamp() {
        let mut q = p().without_bistability();
        assert_eq!(drift_weight(0.7, &q, 1.0), 0.7);
        q.alpha = 1.0;
        q.tau_w = 40.0;
        let s = bistability_drift(SynapseState::with_weight(0.6), &q, 1.0);
        assert_relative_eq!(s.w_hid, 0.625, epsilon = 1e-15);
        assert_eq!(drift_weight(1.0, &q, 1.0), 1.0);
        let q = p();
        assert_relative_eq!(drift_weight(0.4, &q, 2.0), 0.35, epsilon = 1e-15);
        assert_eq!(drift_weight(0.01, &q, 2.0), 0.0);
    }

    #[test]
    fn binary_effective_weight() {
        let p = p();
        assert_eq!(effective_weight(0.6, &p), p.w_pot);
        assert_eq!(effective_weight(0.4, &p), p.w_dep);
        assert_eq!(effective_weight(0.5, &p), p.w_pot);
    }

    #[test]
    fn gate_neutrality() {
        let open = p().gate_open();
        for &x_s in &[0.0, 0.01, 0.3, 0.9, 1.0] {
            assert!(stop_gate(x_s, &open));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let p = BcallParams::<f32>::default();
        let s = SynapseState { x_i: 0.3f32, x_s: 0.3, w_hid: 0.5, ..Default::default() };
        let n = on_post_spike(s, &p);
        assert!((n.w_hid - (0.5 + 0.3 * 0.18)).abs() < 1e-6);
    }
}
