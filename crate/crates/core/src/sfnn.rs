//! Single-layer spiking classifier for binarised MNIST digits.
//!
//! Each pixel drives one input LIF neuron through a virtual Poisson unit
//! (`f_a` for active pixels, `f_s` otherwise). Input neurons project all to
//! all onto the output layer through plastic synapses. During training the
//! output pool of the current class receives teacher input; every output
//! neuron receives inhibitory input, either at a fixed rate or at a rate
//! proportional to the sample's coding level.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analysis::coding_level;
use crate::engine::{Network, Simulation, Source, UnitId, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::neuron::{NeuronParams, Polarity};
use crate::plasticity::BcallParams;
use crate::scalar::Scalar;
use crate::spikegen::{derive_seed, rng_from_seed};

pub const PIXELS: usize = 784;
pub const SIDE: usize = 28;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const INIT_STREAM: u64 = 0x494e;
const ORDER_STREAM: u64 = 0x4f52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `per_class` samples of each listed class, kept in file order.
    pub fn take_per_class(&self, classes: &[u8], per_class: usize) -> Dataset {
        let mut taken = [0usize; 10];
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (img, &l) in self.images.iter().zip(&self.labels) {
            if classes.contains(&l) && taken[l as usize] < per_class {
                taken[l as usize] += 1;
                images.push(img.clone());
                labels.push(l);
            }
        }
        Dataset {
            images,
            labels,
            split: self.split,
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(|e| Error::Idx {
            path: path.into(),
            offset: 0,
            reason: format!("gzip: {e}"),
        })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx {
            path: path.into(),
            offset: bytes.len() as u64,
            reason: format!("truncated header, expected 4 bytes at offset {offset}"),
        })
}

/// Parses an IDX image file (optionally gzip-compressed).
pub fn read_idx_images(path: &Path) -> Result<Vec<Vec<u8>>> {
    let bytes = read_all(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Idx {
            path: path.into(),
            offset: 0,
            reason: format!("bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"),
        });
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(Error::Idx {
            path: path.into(),
            offset: 8,
            reason: format!("image size {rows}x{cols}, expected {SIDE}x{SIDE}"),
        });
    }
    let need = 16 + n * PIXELS;
    if bytes.len() < need {
        return Err(Error::Idx {
            path: path.into(),
            offset: bytes.len() as u64,
            reason: format!("truncated: {n} images need {need} bytes"),
        });
    }
    Ok(bytes[16..need].chunks_exact(PIXELS).map(<[u8]>::to_vec).collect())
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_all(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Idx {
            path: path.into(),
            offset: 0,
            reason: format!("bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"),
        });
    }
    let n = be_u32(&bytes, 4, path)? as usize;
    let need = 8 + n;
    if bytes.len() < need {
        return Err(Error::Idx {
            path: path.into(),
            offset: bytes.len() as u64,
            reason: format!("truncated: {n} labels need {need} bytes"),
        });
    }
    let labels = bytes[8..need].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Idx {
            path: path.into(),
            offset: (8 + pos) as u64,
            reason: format!("label {} out of range", labels[pos]),
        });
    }
    Ok(labels)
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for name in [format!("{stem}.gz"), stem.to_string()] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{} not found in {}", stem, dir.display()),
    )))
}

/// Loads one split from a directory holding the standard MNIST file names,
/// gzip-compressed or not.
pub fn load_mnist(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let img_path = find_file(dir, &format!("{prefix}-images-idx3-ubyte"))?;
    let lbl_path = find_file(dir, &format!("{prefix}-labels-idx1-ubyte"))?;
    let images = read_idx_images(&img_path)?;
    let labels = read_idx_labels(&lbl_path)?;
    if images.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: images.len(),
            right: labels.len(),
        });
    }
    Ok(Dataset { images, labels, split })
}

/// Directory of the subset shipped with the repository.
pub fn bundled_subset_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySample {
    pub pixels: Vec<bool>,
    pub label: u8,
    pub coding_level: f64,
}

/// Pixel is active iff its intensity exceeds `threshold`.
pub fn binarize(image: &[u8], label: u8, threshold: u8) -> BinarySample {
    let pixels: Vec<bool> = image.iter().map(|&p| p > threshold).collect();
    let coding_level = coding_level(&pixels);
    BinarySample {
        pixels,
        label,
        coding_level,
    }
}

pub fn binarize_all(data: &Dataset, threshold: u8) -> Vec<BinarySample> {
    data.images
        .iter()
        .zip(&data.labels)
        .map(|(img, &l)| binarize(img, l, threshold))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InhibitionMode {
    Fixed,
    CodingLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presentation {
    Continuous,
    /// A silent interval (fixed-rate inhibition only) after every sample.
    Gapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// Pool of the single most active neuron.
    Mr,
    /// Pool with the highest mean rate.
    Ar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfnnConfig {
    /// Input rate for active pixels (Hz).
    pub f_a: f64,
    /// Input rate for inactive pixels (Hz).
    pub f_s: f64,
    /// Teacher rate (Hz).
    pub f_t: f64,
    /// Inhibitory base rate (Hz).
    pub f_i: f64,
    /// Virtual-to-input weight (mV).
    pub w_v: f64,
    /// Teacher weight (mV).
    pub w_t: f64,
    /// Inhibitory weight (mV).
    pub w_i: f64,
    /// Potentiated weight during training (mV).
    pub w_train: f64,
    /// Potentiated weight during inference (mV).
    pub w_test: f64,
    /// Presentation time per sample (s).
    pub t_inp: f64,
    /// Silent interval between samples in gapped mode (s).
    pub gap: f64,
    /// Rate multiplier in fixed inhibition mode.
    pub fixed_scale: f64,
    pub n_class: usize,
    pub classes: Vec<u8>,
    pub inhibition: InhibitionMode,
    pub presentation: Presentation,
    pub stop_learning: bool,
    /// Keep inhibition active during inference.
    pub test_inhibition: bool,
    pub threshold: u8,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SfnnConfig {
    fn default() -> Self {
        Self {
            f_a: 20.0,
            f_s: 3.0,
            f_t: 30.0,
            f_i: 210.0,
            w_v: 100.0,
            w_t: 50.0,
            w_i: 30.0,
            w_train: 1.0,
            w_test: 10.0,
            t_inp: 1.0,
            gap: 1.0,
            fixed_scale: 0.19,
            n_class: 1,
            classes: (0..10).collect(),
            inhibition: InhibitionMode::CodingLevel,
            presentation: Presentation::Continuous,
            stop_learning: true,
            test_inhibition: true,
            threshold: 160,
            dt: DEFAULT_DT,
            seed: 0,
        }
    }
}

impl SfnnConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("f_a", self.f_a), ("f_s", self.f_s), ("f_t", self.f_t), ("f_i", self.f_i)] {
            if !(v >= 0.0) || v * self.dt > 1.0 {
                return Err(Error::param(field, v, "in [0, 1/dt]"));
            }
        }
        for (field, v) in [
            ("w_v", self.w_v),
            ("w_t", self.w_t),
            ("w_i", self.w_i),
            ("w_train", self.w_train),
            ("w_test", self.w_test),
            ("fixed_scale", self.fixed_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(field, v, ">= 0"));
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", self.dt, "> 0"));
        }
        crate::spikegen::steps_for(self.t_inp, self.dt).map_err(|_| Error::param("t_inp", self.t_inp, "a positive multiple of dt"))?;
        crate::spikegen::steps_for(self.gap, self.dt).map_err(|_| Error::param("gap", self.gap, "a multiple of dt"))?;
        if self.t_inp <= 0.0 {
            return Err(Error::param("t_inp", self.t_inp, "> 0"));
        }
        if self.n_class == 0 {
            return Err(Error::param("n_class", self.n_class, ">= 1"));
        }
        if self.classes.is_empty() {
            return Err(Error::param("classes", "[]", "non-empty"));
        }
        let mut seen = [false; 10];
        for &c in &self.classes {
            if c > 9 || seen[c as usize] {
                return Err(Error::param("classes", c, "distinct digits 0-9"));
            }
            seen[c as usize] = true;
        }
        Ok(())
    }

    pub fn class_index(&self, label: u8) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }

    pub fn n_outputs(&self) -> usize {
        self.classes.len() * self.n_class
    }
}

/// Inhibitory rate (Hz) for a sample under the configured mode.
pub fn inhibition_rate(sample: &BinarySample, config: &SfnnConfig) -> f64 {
    match config.inhibition {
        InhibitionMode::Fixed => config.fixed_scale * config.f_i,
        InhibitionMode::CodingLevel => config.f_i * sample.coding_level,
    }
}

/// Statistics of one training presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresentationStats {
    pub class: usize,
    pub coding_level: f64,
    /// Mean rate of each class pool (Hz).
    pub pool_rates: Vec<f64>,
    /// Gate counts over the outputs of the presented class.
    pub gate_open: u64,
    pub gate_closed: u64,
}

impl PresentationStats {
    pub fn gated_fraction(&self) -> Option<f64> {
        let total = self.gate_open + self.gate_closed;
        (total > 0).then(|| self.gate_closed as f64 / total as f64)
    }

    pub fn teacher_selective(&self) -> bool {
        let target = self.pool_rates[self.class];
        self.pool_rates
            .iter()
            .enumerate()
            .all(|(c, &r)| c == self.class || target > r)
    }
}

pub struct Sfnn<S: Scalar> {
    pub config: SfnnConfig,
    sim: Simulation<S>,
    train_params: BcallParams<S>,
    test_params: BcallParams<S>,
    drivers: Vec<UnitId>,
    inputs: Vec<UnitId>,
    outputs: Vec<UnitId>,
    teachers: Vec<UnitId>,
    inhibitors: Vec<UnitId>,
    t_steps: u64,
    gap_steps: u64,
}

/// Rule parameters for a configuration: the defaults with `w_pot` set to
/// the training weight and the gate opened when stop-learning is off.
pub fn sfnn_params<S: Scalar>(config: &SfnnConfig, base: &BcallParams<S>) -> BcallParams<S> {
    let mut p = *base;
    p.w_pot = S::lit(config.w_train);
    p.w_dep = S::zero();
    if !config.stop_learning {
        p = p.gate_open();
    }
    p
}

pub fn build_sfnn<S: Scalar>(config: &SfnnConfig, base: &BcallParams<S>) -> Result<Sfnn<S>> {
    config.validate()?;
    let train_params = sfnn_params(config, base);
    train_params.validate()?;
    let mut test_params = train_params;
    test_params.w_pot = S::lit(config.w_test);

    let cell = NeuronParams::<S>::excitatory();
    let mut net = Network::new(train_params);
    let mut drivers = Vec::with_capacity(PIXELS);
    let mut inputs = Vec::with_capacity(PIXELS);
    for _ in 0..PIXELS {
        let v = net.add_virtual(Source::Silent);
        let n = net.add_neuron(cell);
        net.connect(v, n, S::lit(config.w_v), Polarity::Excitatory)?;
        drivers.push(v);
        inputs.push(n);
    }
    let n_out = config.n_outputs();
    let mut outputs = Vec::with_capacity(n_out);
    let mut teachers = Vec::with_capacity(n_out);
    let mut inhibitors = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        let o = net.add_neuron(cell);
        let t = net.add_virtual(Source::Silent);
        let i = net.add_virtual(Source::Silent);
        net.connect(t, o, S::lit(config.w_t), Polarity::Excitatory)?;
        net.connect(i, o, S::lit(config.w_i), Polarity::Inhibitory)?;
        outputs.push(o);
        teachers.push(t);
        inhibitors.push(i);
    }
    let mut rng = rng_from_seed(derive_seed(config.seed, &[INIT_STREAM]));
    for &o in &outputs {
        for &n in &inputs {
            net.connect_plastic(n, o, crate::engine::uniform_weight(&mut rng))?;
        }
    }
    let sim = Simulation::new(net, config.dt, config.seed)?;
    Ok(Sfnn {
        t_steps: crate::spikegen::steps_for(config.t_inp, config.dt)?,
        gap_steps: crate::spikegen::steps_for(config.gap, config.dt)?,
        config: config.clone(),
        sim,
        train_params,
        test_params,
        drivers,
        inputs,
        outputs,
        teachers,
        inhibitors,
    })
}

impl<S: Scalar> Sfnn<S> {
    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_plastic(&self) -> usize {
        self.sim.n_plastic()
    }

    pub fn simulation(&self) -> &Simulation<S> {
        &self.sim
    }

    /// Synapse id of pixel `p` onto output `o`.
    pub fn synapse(&self, output: usize, pixel: usize) -> usize {
        output * PIXELS + pixel
    }

    pub fn w_hid(&self, output: usize) -> Vec<S> {
        (0..PIXELS).map(|p| self.sim.w_hid(self.synapse(output, p))).collect()
    }

    /// Binary weight matrix of an output neuron (`w_hid >= theta_w`).
    pub fn matrix(&self, output: usize) -> Vec<bool> {
        let theta = self.train_params.theta_w;
        self.w_hid(output).into_iter().map(|w| w >= theta).collect()
    }

    pub fn matrices(&self) -> Vec<Vec<bool>> {
        (0..self.outputs.len()).map(|o| self.matrix(o)).collect()
    }

    /// Output indices belonging to class index `c`.
    pub fn pool(&self, c: usize) -> std::ops::Range<usize> {
        c * self.config.n_class..(c + 1) * self.config.n_class
    }

    fn set_inputs(&mut self, sample: Option<&BinarySample>) -> Result<()> {
        for p in 0..PIXELS {
            let rate = match sample {
                Some(s) if s.pixels[p] => self.config.f_a,
                Some(_) => self.config.f_s,
                None => 0.0,
            };
            self.sim.set_rate(self.drivers[p], rate)?;
        }
        Ok(())
    }

    fn set_teacher(&mut self, class: Option<usize>) -> Result<()> {
        for o in 0..self.outputs.len() {
            let on = class.is_some_and(|c| o / self.config.n_class == c);
            let rate = if on { self.config.f_t } else { 0.0 };
            self.sim.set_rate(self.teachers[o], rate)?;
        }
        Ok(())
    }

    fn set_inhibition(&mut self, rate: f64) -> Result<()> {
        for o in 0..self.outputs.len() {
            self.sim.set_rate(self.inhibitors[o], rate)?;
        }
        Ok(())
    }

    fn pool_rates(&self, seconds: f64) -> Vec<f64> {
        let counts = self.sim.spike_counts();
        (0..self.config.classes.len())
            .map(|c| {
                let pool = self.pool(c);
                let total: u64 = pool.clone().map(|o| counts[self.outputs[o]]).sum();
                total as f64 / (pool.len() as f64 * seconds)
            })
            .collect()
    }

    /// Presents one sample with its teacher signal and plasticity on.
    pub fn present(&mut self, sample: &BinarySample) -> Result<PresentationStats> {
        let class = self
            .config
            .class_index(sample.label)
            .ok_or_else(|| Error::param("label", sample.label, "one of the configured classes"))?;
        self.sim.set_learning(true);
        self.sim.set_plasticity(self.train_params)?;
        self.set_inputs(Some(sample))?;
        self.set_teacher(Some(class))?;
        self.set_inhibition(inhibition_rate(sample, &self.config))?;
        self.sim.reset_spike_counts();
        self.sim.reset_gate_counts();
        self.sim.advance(self.t_steps)?;
        let gate = self.sim.gate_counts();
        let (mut open, mut closed) = (0, 0);
        for o in self.pool(class) {
            open += gate[self.outputs[o]].open;
            closed += gate[self.outputs[o]].closed;
        }
        let stats = PresentationStats {
            class,
            coding_level: sample.coding_level,
            pool_rates: self.pool_rates(self.config.t_inp),
            gate_open: open,
            gate_closed: closed,
        };
        if self.config.presentation == Presentation::Gapped && self.gap_steps > 0 {
            self.set_inputs(None)?;
            self.set_teacher(None)?;
            self.set_inhibition(self.config.fixed_scale * self.config.f_i)?;
            self.sim.advance(self.gap_steps)?;
        }
        Ok(stats)
    }

    /// Presents every sample once in a seeded random order.
    pub fn train(&mut self, samples: &[BinarySample]) -> Result<Vec<PresentationStats>> {
        let order = self.training_order(samples.len());
        order.into_iter().map(|i| self.present(&samples[i])).collect()
    }

    pub fn training_order(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(self.config.seed, &[ORDER_STREAM])));
        order
    }

    /// Mean output rates (Hz) for a sample with plasticity frozen, teachers
    /// silent and the inference weight. Dynamics are reset first.
    pub fn infer(&mut self, sample: &BinarySample) -> Result<Vec<f64>> {
        self.sim.set_learning(false);
        self.sim.set_plasticity(self.test_params)?;
        self.sim.reset_dynamics();
        self.set_inputs(Some(sample))?;
        self.set_teacher(None)?;
        let inh = if self.config.test_inhibition {
            inhibition_rate(sample, &self.config)
        } else {
            0.0
        };
        self.set_inhibition(inh)?;
        self.sim.reset_spike_counts();
        self.sim.advance(self.t_steps)?;
        let counts = self.sim.spike_counts();
        Ok(self
            .outputs
            .iter()
            .map(|&o| counts[o] as f64 / self.config.t_inp)
            .collect())
    }

    /// Replaces every hidden weight, indexed like [`Sfnn::synapse`].
    pub fn set_weights(&mut self, w_hid: &[f64]) -> Result<()> {
        if w_hid.len() != self.n_plastic() {
            return Err(Error::LengthMismatch {
                left: w_hid.len(),
                right: self.n_plastic(),
            });
        }
        for (i, &w) in w_hid.iter().enumerate() {
            self.sim.set_w_hid(i, S::lit(w))?;
        }
        Ok(())
    }

    /// Sets the potentiated weight used at inference.
    pub fn set_test_weight(&mut self, w: f64) {
        self.test_params.w_pot = S::lit(w);
        self.config.w_test = w;
    }

    pub fn input_units(&self) -> &[UnitId] {
        &self.inputs
    }
}

/// Predicted class index. Ties go to the lowest class index.
pub fn classify(rates: &[f64], n_class: usize, method: Readout) -> Result<usize> {
    if n_class == 0 || rates.is_empty() || !rates.len().is_multiple_of(n_class) {
        return Err(Error::param("rates", rates.len(), "a non-empty multiple of n_class"));
    }
    let argmax = |v: &mut dyn Iterator<Item = f64>| {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, x) in v.enumerate() {
            if x > best.1 {
                best = (i, x);
            }
        }
        best.0
    };
    Ok(match method {
        Readout::Mr => {
            // highest pool-maximum; equal maxima resolve to the lower class
            let classes = rates.len() / n_class;
            argmax(&mut (0..classes).map(|c| rates[c * n_class..(c + 1) * n_class].iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        }
        Readout::Ar => argmax(&mut rates.chunks(n_class).map(|p| p.iter().sum::<f64>() / n_class as f64)),
    })
}

/// Pixels active in at least `fraction` of the samples of every listed
/// class.
pub fn overlap_pixels(samples: &[BinarySample], classes: &[u8], fraction: f64) -> Vec<usize> {
    let freq: Vec<Vec<f64>> = classes.iter().map(|&c| pixel_frequency(samples, c)).collect();
    (0..PIXELS)
        .filter(|&p| freq.iter().all(|f| f[p] >= fraction))
        .collect()
}

/// Fraction of samples of class `label` with each pixel active.
pub fn pixel_frequency(samples: &[BinarySample], label: u8) -> Vec<f64> {
    let mut counts = vec![0usize; PIXELS];
    let mut n = 0usize;
    for s in samples.iter().filter(|s| s.label == label) {
        n += 1;
        for (c, &on) in counts.iter_mut().zip(&s.pixels) {
            if on {
                *c += 1;
            }
        }
    }
    counts.iter().map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 }).collect()
}

/// Pixelwise majority image of a class (active in at least half the samples).
pub fn prototype(samples: &[BinarySample], label: u8) -> Vec<bool> {
    pixel_frequency(samples, label).into_iter().map(|f| f >= 0.5).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ones: usize, label: u8) -> BinarySample {
        let img: Vec<u8> = (0..PIXELS).map(|p| if p < ones { 255 } else { 0 }).collect();
        binarize(&img, label, 160)
    }

    #[test]
    fn binarize_extremes() {
        let z = binarize(&[0u8; PIXELS], 3, 160);
        assert_eq!(z.coding_level, 0.0);
        assert!(z.pixels.iter().all(|p| !p));
        let f = binarize(&[255u8; PIXELS], 3, 160);
        assert_eq!(f.coding_level, 1.0);
        let edge = binarize(&[160u8; PIXELS], 3, 160);
        assert_eq!(edge.coding_level, 0.0);
    }

    #[test]
    fn inhibition_modes() {
        let mut cfg = SfnnConfig {
            inhibition: InhibitionMode::Fixed,
            ..Default::default()
        };
        assert!((inhibition_rate(&sample(10, 0), &cfg) - 39.9).abs() < 1e-12);
        cfg.inhibition = InhibitionMode::CodingLevel;
        let mut s = sample(0, 0);
        s.coding_level = 0.16;
        assert!((inhibition_rate(&s, &cfg) - 33.6).abs() < 1e-12);
        assert_eq!(inhibition_rate(&sample(0, 0), &cfg), 0.0);
    }

    #[test]
    fn classify_examples() {
        let r = [5.0, 9.0, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(classify(&r, 1, Readout::Mr).unwrap(), 1);
        assert_eq!(classify(&r, 1, Readout::Ar).unwrap(), 1);
        let pools = [10.0, 0.0, 6.0, 6.0];
        assert_eq!(classify(&pools, 2, Readout::Mr).unwrap(), 0);
        assert_eq!(classify(&pools, 2, Readout::Ar).unwrap(), 1);
        assert_eq!(classify(&[2.0; 10], 1, Readout::Mr).unwrap(), 0);
        assert_eq!(classify(&[2.0; 10], 1, Readout::Ar).unwrap(), 0);
        assert!(classify(&[1.0; 3], 2, Readout::Ar).is_err());
    }

    #[test]
    fn build_counts_and_init() {
        let cfg = SfnnConfig::default();
        let net = build_sfnn::<f64>(&cfg, &BcallParams::default()).unwrap();
        assert_eq!(net.n_outputs(), 10);
        assert_eq!(net.n_plastic(), 7840);
        let pot: usize = net.matrices().iter().flatten().filter(|&&b| b).count();
        let frac = pot as f64 / 7840.0;
        assert!((0.47..=0.53).contains(&frac), "{frac}");

        let cfg = SfnnConfig { n_class: 4, ..Default::default() };
        let net = build_sfnn::<f64>(&cfg, &BcallParams::default()).unwrap();
        assert_eq!(net.n_outputs(), 40);
        assert_eq!(net.n_plastic(), 31360);
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = SfnnConfig { n_class: 0, ..Default::default() };
        match cfg.validate() {
            Err(Error::InvalidParam { field, .. }) => assert_eq!(field, "n_class"),
            other => panic!("{other:?}"),
        }
        let cfg = SfnnConfig { classes: vec![1, 1], ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn blank_input_without_background_is_silent() {
        let cfg = SfnnConfig {
            classes: vec![0, 1],
            f_s: 0.0,
            ..Default::default()
        };
        let mut net = build_sfnn::<f64>(&cfg, &BcallParams::default()).unwrap();
        let rates = net.infer(&sample(0, 0)).unwrap();
        assert_eq!(rates, vec![0.0, 0.0]);
    }

    #[test]
    fn overlap_and_prototype() {
        let a = sample(100, 0);
        let b = sample(50, 1);
        let ov = overlap_pixels(&[a.clone(), b.clone()], &[0, 1], 0.5);
        assert_eq!(ov, (0..50).collect::<Vec<_>>());
        let proto = prototype(&[a.clone(), a, sample(0, 0)], 0);
        assert_eq!(proto.iter().filter(|&&p| p).count(), 100);
    }
}
