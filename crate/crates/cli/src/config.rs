//! Layered experiment configuration: built-in defaults, then an optional
//! JSON file, then command-line flags. Every key carries its unit.

use std::path::Path;

use bcall::protocols::Shift;
use bcall::rsnn::InhibitoryDrive;
use bcall::sfnn::{InhibitionMode, Presentation, Readout};
use bcall::spikegen::PhaseMode;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// `--help` text: the description followed by the built-in default.
pub fn help_line<T: Serialize>(doc: &str, default: &T) -> String {
    let shown = match serde_json::to_value(default) {
        Ok(Value::String(s)) if s.is_empty() => "none".to_string(),
        Ok(Value::String(s)) => s,
        Ok(Value::Array(items)) => items.iter().map(|v| v.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(","),
        Ok(v) => v.to_string(),
        Err(_) => "?".to_string(),
    };
    format!("{} [default: {shown}]", doc.trim())
}

/// Parses a snake_case enum value; dashes are accepted for underscores.
pub fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.replace('-', "_"))).map_err(|_| format!("unrecognised value `{s}`"))
}

/// Declares a config struct (serde, with defaults) and a matching clap
/// struct of optional overrides.
macro_rules! config {
    (
        $name:ident, $args:ident {
            $(
                #[doc = $doc:literal]
                $(#[arg($($extra:tt)*)])?
                $field:ident : $ty:ty = $default:expr
            ),* $(,)?
        }
        $(nested { $($nfield:ident : $nty:ty),* $(,)? })?
    ) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $( #[doc = $doc] pub $field: $ty, )*
            $($( pub $nfield: $nty, )*)?
        }

        impl Default for $name {
            fn default() -> Self {
                Self {
                    $( $field: $default, )*
                    $($( $nfield: <$nty>::default(), )*)?
                }
            }
        }

        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct $args {
            $(
                #[arg(long, allow_negative_numbers = true, help = help_line($doc, &$name::default().$field) $(, $($extra)*)?)]
                pub $field: Option<$ty>,
            )*
        }

        impl $args {
            pub fn overrides(&self) -> Map<String, Value> {
                let mut m = Map::new();
                $(
                    if let Some(v) = &self.$field {
                        m.insert(stringify!($field).to_string(), serde_json::to_value(v).expect("plain data"));
                    }
                )*
                m
            }
        }
    };
}

config! {
    RuleConfig, RuleArgs {
        /// Pre-synaptic trace time constant (ms)
        tau_i_ms: f64 = 30.0,
        /// Post-synaptic trace time constant (ms)
        tau_j_ms: f64 = 30.0,
        /// Stop-learning trace time constant (ms)
        tau_s_ms: f64 = 800.0,
        /// Bistability time constant (s)
        tau_w_s: f64 = 40.0,
        /// Pre-synaptic trace jump
        a_i: f64 = 0.4,
        /// Post-synaptic trace jump
        a_j: f64 = 0.5,
        /// Stop-learning trace jump
        a_s: f64 = 0.075,
        /// Trace ceiling
        x_max: f64 = 1.0,
        /// Pre-synaptic trace threshold
        theta_i: f64 = 0.05,
        /// Post-synaptic trace threshold
        theta_j: f64 = 0.05,
        /// Upper stop-learning bound
        theta_u: f64 = 0.55,
        /// Lower stop-learning bound
        theta_l: f64 = 0.05,
        /// Bistability threshold on w_hid
        theta_w: f64 = 0.5,
        /// Depression on pre spikes
        c1_d: f64 = -0.026,
        /// Extra depression for weak pre traces
        c2_d: f64 = -0.008,
        /// Potentiation gain
        c_p: f64 = 0.18,
        /// Upward drift rate
        alpha: f64 = 1.0,
        /// Downward drift rate
        beta: f64 = 1.0,
    }
}

impl RuleConfig {
    pub fn params(&self) -> bcall::BcallParams {
        bcall::BcallParams {
            tau_i: self.tau_i_ms * 1e-3,
            tau_j: self.tau_j_ms * 1e-3,
            tau_s: self.tau_s_ms * 1e-3,
            tau_w: self.tau_w_s,
            a_i: self.a_i,
            a_j: self.a_j,
            a_s: self.a_s,
            x_max_i: self.x_max,
            x_max_j: self.x_max,
            x_max_s: self.x_max,
            theta_i: self.theta_i,
            theta_j: self.theta_j,
            theta_u: self.theta_u,
            theta_l: self.theta_l,
            theta_w: self.theta_w,
            c1_d: self.c1_d,
            c2_d: self.c2_d,
            c_p: self.c_p,
            alpha: self.alpha,
            beta: self.beta,
            ..bcall::BcallParams::default()
        }
    }
}

config! {
    PairConfig, PairArgs {
        /// Pre-synaptic Poisson rate (Hz)
        pre_rate_hz: f64 = 15.0,
        /// Post-synaptic Poisson rate (Hz)
        post_rate_hz: f64 = 20.0,
        /// Run length (s)
        duration_s: f64 = 1.0,
        /// Initial hidden weight
        w_init: f64 = 0.5,
        /// Sampling stride (steps)
        stride_steps: u64 = 10,
        /// Replay pre spikes from a unit_id,t CSV instead of Poisson
        pre_spikes: String = String::new(),
        /// Replay post spikes from a unit_id,t CSV instead of Poisson
        post_spikes: String = String::new(),
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    StdpConfig, StdpArgs {
        /// Smallest t_post - t_pre (ms)
        #[arg(visible_alias = "dt-min")]
        dt_min_ms: f64 = -100.0,
        /// Largest t_post - t_pre (ms)
        #[arg(visible_alias = "dt-max")]
        dt_max_ms: f64 = 100.0,
        /// Grid spacing (ms)
        #[arg(visible_alias = "step")]
        step_ms: f64 = 1.0,
        /// Initial hidden weight
        w_init: f64 = 0.5,
        /// Hold the stop-learning gate open
        gate_open: bool = true,
        /// Apply the bistability drift
        bistability: bool = false,
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    SrdpConfig, SrdpArgs {
        /// Pairing frequencies (Hz)
        #[arg(value_delimiter = ',')]
        freqs_hz: Vec<f64> = vec![1.0, 5.0, 10.0, 20.0, 40.0, 50.0, 60.0],
        /// Pairs per protocol
        n_pairs: usize = 10,
        /// Pairing offset |t_post - t_pre| (ms)
        delta_t_ms: f64 = 10.0,
        /// Initial weight of the pre-then-post branch
        w_init_pos: f64 = 0.0,
        /// Initial weight of the post-then-pre branch
        w_init_neg: f64 = 0.5,
        /// Hold the stop-learning gate open
        gate_open: bool = true,
        /// Apply the bistability drift
        bistability: bool = false,
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    TraceSweepConfig, TraceSweepArgs {
        /// Pre-synaptic jump amplitudes to sweep
        #[arg(value_delimiter = ',')]
        a_values: Vec<f64> = vec![0.1, 1.0],
        /// Lowest input rate (Hz)
        rate_min_hz: f64 = 0.5,
        /// Highest input rate (Hz)
        rate_max_hz: f64 = 150.0,
        /// Rate spacing (Hz)
        rate_step_hz: f64 = 0.5,
        /// Spikes per regular train
        n_spikes: usize = 20,
        /// Transition band as a fraction of |c1_d|
        band: f64 = 0.25,
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    HeatmapCliConfig, HeatmapArgs {
        /// Pre-synaptic rates (Hz)
        #[arg(value_delimiter = ',')]
        pre_rates_hz: Vec<f64> = vec![5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
        /// Post-synaptic rates (Hz)
        #[arg(value_delimiter = ',')]
        post_rates_hz: Vec<f64> = vec![5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
        /// Timing biases to run (none, positive, negative)
        #[arg(value_delimiter = ',', value_parser = parse_enum::<Shift>)]
        shifts: Vec<Shift> = vec![Shift::None, Shift::Positive, Shift::Negative],
        /// Fraction of the maximal shift window
        gamma: f64 = 0.75,
        /// Run length (s)
        duration_s: f64 = 2.0,
        /// Initial hidden weight
        w_init: f64 = 0.5,
        /// Hold the stop-learning gate open
        gate_open: bool = true,
        /// Apply the bistability drift
        bistability: bool = false,
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    SfnnCliConfig, SfnnArgs {
        /// Digit classes to learn
        #[arg(value_delimiter = ',')]
        classes: Vec<u8> = (0..10).collect(),
        /// Training samples per class
        per_class: usize = 100,
        /// Test samples per class
        test_per_class: usize = 10,
        /// Rate for active pixels (Hz)
        f_a_hz: f64 = 20.0,
        /// Rate for inactive pixels (Hz)
        f_s_hz: f64 = 3.0,
        /// Teacher rate (Hz)
        f_t_hz: f64 = 30.0,
        /// Inhibitory base rate (Hz)
        f_i_hz: f64 = 210.0,
        /// Virtual-to-input weight (mV)
        w_v_mv: f64 = 100.0,
        /// Teacher weight (mV)
        w_t_mv: f64 = 50.0,
        /// Inhibitory weight (mV)
        w_i_mv: f64 = 30.0,
        /// Potentiated weight during training (mV)
        w_train_mv: f64 = 1.0,
        /// Potentiated weight during testing (mV)
        w_test_mv: f64 = 10.0,
        /// Presentation time per sample (s)
        t_inp_s: f64 = 1.0,
        /// Silent interval in gapped presentation (s)
        gap_s: f64 = 1.0,
        /// Inhibition rate multiplier in fixed mode
        fixed_scale: f64 = 0.19,
        /// Output neurons per class
        n_class: usize = 1,
        /// Inhibition mode (fixed, coding_level)
        #[arg(value_parser = parse_enum::<InhibitionMode>)]
        inhibition: InhibitionMode = InhibitionMode::CodingLevel,
        /// Presentation mode (continuous, gapped)
        #[arg(value_parser = parse_enum::<Presentation>)]
        presentation: Presentation = Presentation::Continuous,
        /// Use the stop-learning gate
        stop_learning: bool = true,
        /// Keep inhibition on while testing
        test_inhibition: bool = true,
        /// Readout reported as `pred` (mr, ar)
        #[arg(value_parser = parse_enum::<Readout>)]
        readout: Readout = Readout::Mr,
        /// Binarisation threshold
        threshold: u8 = 160,
        /// Pixels active in at least this fraction of every class count as overlapping
        overlap_fraction: f64 = 0.3,
        /// MNIST directory (else BCALL_MNIST_DIR, else the bundled subset)
        data_dir: String = String::new(),
        /// Hidden weights (w_hid.csv) loaded by sfnn-eval
        weights: String = String::new(),
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    RsnnCliConfig, RsnnArgs {
        /// Excitatory cells
        n_exc: usize = 256,
        /// Inhibitory cells
        n_inh: usize = 64,
        /// Potentiated excitatory-excitatory weight (mV)
        w_ee_mv: f64 = 3.0,
        /// Excitatory-to-inhibitory weight (mV)
        w_ei_mv: f64 = 3.0,
        /// Inhibitory-to-excitatory weight (mV)
        w_ie_mv: f64 = 2.0,
        /// Inhibitory-to-inhibitory weight (mV)
        w_ii_mv: f64 = 2.0,
        /// Excitatory driver weight (mV)
        w_exc_mv: f64 = 1.0,
        /// Inhibitory driver weight (mV)
        w_inh_mv: f64 = 10.0,
        /// Excitatory driver rate (Hz)
        f_exc_hz: f64 = 1000.0,
        /// Inhibitory driver rate (Hz)
        f_inh_hz: f64 = 200.0,
        /// Excitatory-excitatory connection probability
        p_ee: f64 = 0.5,
        /// Excitatory-to-inhibitory connection probability
        p_ei: f64 = 0.25,
        /// Inhibitory-to-excitatory connection probability
        p_ie: f64 = 0.25,
        /// Inhibitory-to-inhibitory connection probability
        p_ii: f64 = 0.5,
        /// Oscillation frequency (Hz)
        f_osc_hz: f64 = 3.0,
        /// Oscillation amplitude (mV)
        osc_amp_mv: f64 = bcall::neuron::DEFAULT_OSC_AMP,
        /// Oscillation phases (random, correlated)
        #[arg(value_parser = parse_enum::<PhaseMode>)]
        phase_mode: PhaseMode = PhaseMode::Random,
        /// Stimulated excitatory cells
        n_stim: usize = 64,
        /// Drive non-stimulated excitatory cells too
        background: bool = false,
        /// Target of the inhibitory drivers (inhibitory_pool, all_neurons)
        #[arg(value_parser = parse_enum::<InhibitoryDrive>)]
        inhibitory_drive: InhibitoryDrive = InhibitoryDrive::InhibitoryPool,
        /// Initial hidden weight
        w_hid_init: f64 = 0.0,
        /// Run length (s)
        duration_s: f64 = 1.0,
        /// Mean-weight sampling stride (steps)
        stride_steps: u64 = 10,
        /// Integration step (ms)
        dt_ms: f64 = 0.1,
    }
    nested { rule: RuleConfig }
}

config! {
    AnalyzeConfig, AnalyzeArgs {
        /// Spike file (unit_id,t)
        spikes: String = String::new(),
        /// Second spike file; compares rate distributions with a KS test
        compare: String = String::new(),
        /// Observation window (s)
        duration_s: f64 = 1.0,
        /// Rate histogram bin width (Hz)
        bin_hz: f64 = 1.0,
        /// Grid step used to snap spike times (ms)
        dt_ms: f64 = 0.1,
    }
}

/// Merges `patch` into `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Defaults, then the file, then flag overrides (top level and nested).
pub fn resolve<T>(file: Option<&Path>, top: Map<String, Value>, nested: &[(&str, Map<String, Value>)]) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut v = serde_json::to_value(T::default()).expect("plain data");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display().to_string(), e.to_string()))?;
        let patch: Value = serde_json::from_str(&text).map_err(|e| CliError::config(None, format!("{}: {e}", path.display())))?;
        if !patch.is_object() {
            return Err(CliError::config(None, format!("{}: expected a JSON object", path.display())));
        }
        merge(&mut v, patch);
    }
    merge(&mut v, Value::Object(top));
    for (key, m) in nested {
        let mut wrapped = Map::new();
        wrapped.insert((*key).to_string(), Value::Object(m.clone()));
        merge(&mut v, Value::Object(wrapped));
    }
    from_value(v)
}

pub fn from_value<T: DeserializeOwned>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field"))
            .map(str::to_string);
        CliError::config(field, msg)
    })
}

/// Maps a library field name onto the config key that sets it, e.g.
/// `tau_i` onto `rule.tau_i_ms`.
pub fn locate_field(config: &Value, field: &str) -> String {
    let matches = |key: &str| key == field || key.starts_with(&format!("{field}_")) || field.starts_with(&format!("{key}_"));
    if let Value::Object(top) = config {
        if let Some(k) = top.keys().find(|k| matches(k)) {
            return k.clone();
        }
        for (name, v) in top {
            if let Value::Object(inner) = v {
                if let Some(k) = inner.keys().find(|k| matches(k)) {
                    return format!("{name}.{k}");
                }
            }
        }
    }
    field.to_string()
}
