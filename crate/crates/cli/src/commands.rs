//! Experiment runners. Each takes a resolved config and returns the files it
//! wrote, relative paths included in the manifest.

use std::path::{Path, PathBuf};

use bcall::analysis::{ks_two_sample, mean, rate_histogram, spike_synchronization};
use bcall::io::{read_table, read_trains, write_run, write_synapses, write_table};
use bcall::plasticity::effective_weight;
use bcall::protocols::{heatmap_cell, heatmap_seed, mean_std, pair_replay, srdp_curve, stdp_curve, trace_mean_sweep, HeatmapConfig, Shift};
use bcall::rsnn::{run_attractor_protocol, RsnnConfig};
use bcall::sfnn::{binarize_all, build_sfnn, classify, load_mnist, overlap_pixels, BinarySample, Readout, Sfnn, SfnnConfig, Split, PIXELS};
use bcall::spikegen::{derive_seed, poisson_train};
use bcall::{BcallParams, SpikeTrain};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;
use crate::error::CliError;

type Res<T> = Result<T, CliError>;

pub struct Ctx {
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    /// Resolved config, used to name offending keys in library errors.
    pub config: Value,
}

impl Ctx {
    fn core<T>(&self, r: bcall::Result<T>) -> Res<T> {
        r.map_err(|e| CliError::from_core(e, &self.config))
    }

    /// Output directory of one seed; the root when there is only one.
    fn seed_dir(&self, seed: u64) -> PathBuf {
        if self.seeds.len() == 1 {
            self.out.clone()
        } else {
            self.out.join(format!("seed_{seed}"))
        }
    }

    /// Runs `f` for every seed on at most `jobs` threads, results in seed
    /// order.
    fn per_seed<T: Send>(&self, f: impl Fn(u64) -> Res<T> + Sync) -> Res<Vec<T>> {
        self.parallel(&self.seeds, |&s| f(s))
    }

    fn parallel<I: Sync, T: Send>(&self, items: &[I], f: impl Fn(&I) -> Res<T> + Sync) -> Res<Vec<T>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| CliError::runtime(e.to_string()))?;
        pool.install(|| items.par_iter().map(&f).collect())
    }

    fn table(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Res<PathBuf> {
        let path = self.out.join(name);
        self.core(write_table(&path, header, rows))?;
        Ok(path)
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> Res<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// `lo, lo + step, ..., hi`, rejecting grids that do not land on `hi`.
fn grid(lo: f64, hi: f64, step: f64, field: &str) -> Res<Vec<f64>> {
    if !lo.is_finite() || !hi.is_finite() || !step.is_finite() || step <= 0.0 || hi < lo {
        return Err(CliError::config(Some(field.into()), format!("need step > 0 and max >= min (got {lo}..{hi} by {step})")));
    }
    let n = (hi - lo) / step;
    if (n - n.round()).abs() > 1e-9 || n > 1e7 {
        return Err(CliError::config(Some(field.into()), format!("{lo}..{hi} is not a whole number of {step} steps")));
    }
    Ok((0..=n.round() as u64).map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9).collect())
}

fn single_protocol_params(rule: &RuleConfig, gate_open: bool, bistability: bool) -> BcallParams {
    let mut p = rule.params();
    if gate_open {
        p = p.gate_open();
    }
    if !bistability {
        p = p.without_bistability();
    }
    p
}

fn validated(ctx: &Ctx, p: BcallParams) -> Res<BcallParams> {
    ctx.core(p.validate())?;
    Ok(p)
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::from)
}

pub fn pair(cfg: &PairConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let params = validated(ctx, cfg.rule.params())?;
    let dt = cfg.dt_ms * 1e-3;
    let load = |path: &str, rate: f64, seed: u64| -> Res<SpikeTrain> {
        if path.is_empty() {
            return ctx.core(poisson_train(rate, cfg.duration_s, dt, seed));
        }
        let trains = ctx.core(read_trains(Path::new(path), cfg.duration_s, dt))?;
        match trains.len() {
            0 => ctx.core(poisson_train(0.0, cfg.duration_s, dt, seed)),
            1 => Ok(trains.into_iter().next().expect("one train").1),
            n => Err(CliError::data(path, format!("expected one unit, found {n}"))),
        }
    };
    let written = ctx.per_seed(|seed| {
        let pre = load(&cfg.pre_spikes, cfg.pre_rate_hz, derive_seed(seed, &[1]))?;
        let post = load(&cfg.post_spikes, cfg.post_rate_hz, derive_seed(seed, &[2]))?;
        let result = ctx.core(pair_replay(pre, post, &params, cfg.w_init, cfg.stride_steps))?;
        ctx.core(write_run(&ctx.seed_dir(seed), &result))
    })?;
    Ok(written.into_iter().flatten().collect())
}

pub fn stdp(cfg: &StdpConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let params = validated(ctx, single_protocol_params(&cfg.rule, cfg.gate_open, cfg.bistability))?;
    let dts = grid(cfg.dt_min_ms, cfg.dt_max_ms, cfg.step_ms, "step_ms")?;
    let curve = ctx.core(stdp_curve(&dts, &params, cfg.w_init, cfg.dt_ms * 1e-3))?;
    let rows = (0..curve.x.len()).map(|i| vec![curve.x[i], curve.mean[i], curve.std[i]]);
    Ok(vec![ctx.table("curve.csv", &["delta_t_ms", "dw_mean", "dw_std"], rows)?])
}

pub fn srdp(cfg: &SrdpConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let params = validated(ctx, single_protocol_params(&cfg.rule, cfg.gate_open, cfg.bistability))?;
    let dt = cfg.dt_ms * 1e-3;
    let pos = ctx.core(srdp_curve(&cfg.freqs_hz, cfg.n_pairs, cfg.delta_t_ms, &params, cfg.w_init_pos, dt))?;
    let neg = ctx.core(srdp_curve(&cfg.freqs_hz, cfg.n_pairs, -cfg.delta_t_ms, &params, cfg.w_init_neg, dt))?;
    let rows = (0..pos.x.len()).map(|i| vec![pos.x[i], pos.mean[i], neg.mean[i]]);
    Ok(vec![ctx.table("curve.csv", &["freq_hz", "dw_pos", "dw_neg"], rows)?])
}

pub fn tracesweep(cfg: &TraceSweepConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let params = validated(ctx, cfg.rule.params())?;
    let rates = grid(cfg.rate_min_hz, cfg.rate_max_hz, cfg.rate_step_hz, "rate_step_hz")?;
    if rates[0] <= 0.0 {
        return Err(CliError::config(Some("rate_min_hz".into()), "must be > 0"));
    }
    let sweeps = ctx.parallel(&cfg.a_values, |&a| {
        ctx.core(trace_mean_sweep(a, &rates, cfg.n_spikes, cfg.band, &params, cfg.dt_ms * 1e-3))
    })?;
    let rows = sweeps
        .iter()
        .flat_map(|s| (0..s.rates.len()).map(move |i| vec![s.a, s.rates[i], s.mean_trace[i], s.dw[i]]));
    let sweep = ctx.table("curve.csv", &["a", "rate_hz", "mean_trace", "dw"], rows)?;
    let summary: Vec<Value> = sweeps
        .iter()
        .map(|s| {
            json!({
                "a": s.a,
                "crossing_hz": opt(s.crossing),
                "transition_lo_hz": opt(s.transition.map(|t| t.0)),
                "transition_hi_hz": opt(s.transition.map(|t| t.1)),
                "width_hz": opt(s.transition_width()),
            })
        })
        .collect();
    Ok(vec![sweep, write_json(&ctx.out.join("summary.json"), &summary)?])
}

pub fn heatmap(cfg: &HeatmapCliConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let params = validated(ctx, single_protocol_params(&cfg.rule, cfg.gate_open, cfg.bistability))?;
    let hm = HeatmapConfig {
        gamma: cfg.gamma,
        seeds: ctx.seeds.len(),
        duration: cfg.duration_s,
        dt: cfg.dt_ms * 1e-3,
        w_init: cfg.w_init,
        seed: ctx.seeds[0],
    };
    let cells: Vec<(usize, usize)> = (0..cfg.pre_rates_hz.len())
        .flat_map(|i| (0..cfg.post_rates_hz.len()).map(move |j| (i, j)))
        .collect();
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for &shift in &cfg.shifts {
        let stats = ctx.parallel(&cells, |&(i, j)| {
            let dws = (0..hm.seeds)
                .map(|r| heatmap_cell(cfg.pre_rates_hz[i], cfg.post_rates_hz[j], shift, &hm, &params, heatmap_seed(hm.seed, i, j, r)))
                .collect::<bcall::Result<Vec<f64>>>();
            Ok(mean_std(&ctx.core(dws)?))
        })?;
        let code = match shift {
            Shift::Negative => -1.0,
            Shift::None => 0.0,
            Shift::Positive => 1.0,
        };
        for (&(i, j), &(m, s)) in cells.iter().zip(&stats) {
            rows.push(vec![code, cfg.pre_rates_hz[i], cfg.post_rates_hz[j], m, s]);
        }
        let potentiation = stats.iter().filter(|(m, _)| *m > 0.0).count();
        let name = serde_json::to_value(shift)?.as_str().unwrap_or("none").to_string();
        summary.insert(name, json!({ "potentiation_cells": potentiation }));
    }
    let curve = ctx.table("curve.csv", &["shift", "pre_rate_hz", "post_rate_hz", "dw_mean", "dw_std"], rows)?;
    let summary = json!({ "repetitions": hm.seeds, "master_seed": hm.seed, "shifts": summary });
    Ok(vec![curve, write_json(&ctx.out.join("summary.json"), &summary)?])
}

/// Dataset directory: config, then `BCALL_MNIST_DIR`, then the bundled subset.
pub fn resolve_data_dir(configured: &str) -> String {
    if !configured.is_empty() {
        return configured.to_string();
    }
    match std::env::var("BCALL_MNIST_DIR") {
        Ok(d) if !d.is_empty() => d,
        _ => bcall::sfnn::bundled_subset_dir().display().to_string(),
    }
}

fn sfnn_core(cfg: &SfnnCliConfig, seed: u64) -> SfnnConfig {
    SfnnConfig {
        f_a: cfg.f_a_hz,
        f_s: cfg.f_s_hz,
        f_t: cfg.f_t_hz,
        f_i: cfg.f_i_hz,
        w_v: cfg.w_v_mv,
        w_t: cfg.w_t_mv,
        w_i: cfg.w_i_mv,
        w_train: cfg.w_train_mv,
        w_test: cfg.w_test_mv,
        t_inp: cfg.t_inp_s,
        gap: cfg.gap_s,
        fixed_scale: cfg.fixed_scale,
        n_class: cfg.n_class,
        classes: cfg.classes.clone(),
        inhibition: cfg.inhibition,
        presentation: cfg.presentation,
        stop_learning: cfg.stop_learning,
        test_inhibition: cfg.test_inhibition,
        threshold: cfg.threshold,
        dt: cfg.dt_ms * 1e-3,
        seed,
    }
}

fn samples(cfg: &SfnnCliConfig, split: Split, per_class: usize) -> Res<Vec<BinarySample>> {
    let dir = resolve_data_dir(&cfg.data_dir);
    let data = load_mnist(Path::new(&dir), split).map_err(|e| CliError::data(dir.clone(), e.to_string()))?;
    let data = data.take_per_class(&cfg.classes, per_class);
    for &c in &cfg.classes {
        let n = data.labels.iter().filter(|&&l| l == c).count();
        if n < per_class {
            return Err(CliError::data(dir, format!("only {n} samples of class {c} in the {split:?} split, {per_class} requested")));
        }
    }
    Ok(binarize_all(&data, cfg.threshold))
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    n_test: usize,
    cr_mr: f64,
    cr_ar: f64,
    /// `pool_rates[c][k]`: mean rate of pool `k` over test samples of class `c`.
    pool_rates_hz: Vec<Vec<f64>>,
}

/// Tests every sample, writes `test_rates.csv` and returns the summary.
fn evaluate(ctx: &Ctx, net: &mut Sfnn<f64>, tests: &[BinarySample], dir: &Path, readout: Readout) -> Res<EvalSummary> {
    let n_out = net.n_outputs();
    let n_class = net.config.n_class;
    let classes = net.config.classes.clone();
    let mut header = vec!["sample".to_string(), "label".to_string()];
    header.extend((0..n_out).map(|o| format!("rate_{o}")));
    header.extend(["pred".to_string(), "pred_mr".to_string(), "pred_ar".to_string()]);
    let mut rows = Vec::new();
    let (mut hits_mr, mut hits_ar) = (0usize, 0usize);
    let mut sums = vec![vec![0.0; classes.len()]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for (i, s) in tests.iter().enumerate() {
        let rates = ctx.core(net.infer(s))?;
        let mr = ctx.core(classify(&rates, n_class, Readout::Mr))?;
        let ar = ctx.core(classify(&rates, n_class, Readout::Ar))?;
        let truth = net.config.class_index(s.label).expect("configured class");
        hits_mr += usize::from(mr == truth);
        hits_ar += usize::from(ar == truth);
        counts[truth] += 1;
        for (k, chunk) in rates.chunks(n_class).enumerate() {
            sums[truth][k] += mean(chunk);
        }
        let pred = if readout == Readout::Mr { mr } else { ar };
        let mut row = vec![i as f64, s.label as f64];
        row.extend(&rates);
        row.extend([classes[pred] as f64, classes[mr] as f64, classes[ar] as f64]);
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.core(write_table(&dir.join("test_rates.csv"), &header, rows))?;
    let n = tests.len().max(1) as f64;
    Ok(EvalSummary {
        n_test: tests.len(),
        cr_mr: hits_mr as f64 / n,
        cr_ar: hits_ar as f64 / n,
        pool_rates_hz: sums
            .into_iter()
            .zip(&counts)
            .map(|(row, &c)| row.into_iter().map(|v| v / c.max(1) as f64).collect())
            .collect(),
    })
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    seed: u64,
    /// Mean HD between each class's training samples and its pool matrices.
    mean_hd: Vec<f64>,
    /// Fraction of depressed synapses from overlap pixels, over all outputs.
    depressed_overlap_fraction: Option<f64>,
    n_overlap_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<EvalSummary>,
}

fn write_weights(ctx: &Ctx, net: &Sfnn<f64>, path: &Path) -> Res<()> {
    let sim = net.simulation();
    let params = *sim.plasticity();
    let ends: Vec<(usize, usize)> = (0..net.n_plastic())
        .map(|syn| (syn % PIXELS, syn / PIXELS))
        .collect();
    ctx.core(write_synapses(path, &ends, &sim.weights(), |w| effective_weight(w, &params)))
}

pub fn sfnn_train(cfg: &SfnnCliConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let base = validated(ctx, cfg.rule.params())?;
    ctx.core(sfnn_core(cfg, 0).validate())?;
    if !(0.0..=1.0).contains(&cfg.overlap_fraction) {
        return Err(CliError::config(Some("overlap_fraction".into()), "must be in [0, 1]"));
    }
    let train = samples(cfg, Split::Train, cfg.per_class)?;
    let tests = if cfg.test_per_class > 0 {
        samples(cfg, Split::Test, cfg.test_per_class)?
    } else {
        Vec::new()
    };
    let overlap = if cfg.classes.len() > 1 {
        overlap_pixels(&train, &cfg.classes, cfg.overlap_fraction)
    } else {
        Vec::new()
    };
    let results = ctx.per_seed(|seed| {
        let dir = ctx.seed_dir(seed);
        let mut net = ctx.core(build_sfnn::<f64>(&sfnn_core(cfg, seed), &base))?;
        let order = net.training_order(train.len());
        let stats = ctx.core(net.train(&train))?;
        let mut files = Vec::new();

        let rows = order.iter().zip(&stats).enumerate().map(|(k, (&i, st))| {
            let target = st.pool_rates[st.class];
            let other = st
                .pool_rates
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != st.class)
                .map(|(_, &r)| r)
                .fold(f64::NAN, f64::max);
            vec![k as f64, i as f64, train[i].label as f64, st.coding_level, target, other, st.gated_fraction().unwrap_or(f64::NAN)]
        });
        let path = dir.join("presentations.csv");
        ctx.core(write_table(&path, &["order", "sample", "label", "coding_level", "target_rate_hz", "max_other_rate_hz", "gated_fraction"], rows))?;
        files.push(path);

        let path = dir.join("w_hid.csv");
        write_weights(ctx, &net, &path)?;
        files.push(path);

        let matrices = net.matrices();
        let mut hd_rows = Vec::new();
        let mut hd_sum = vec![0.0; cfg.classes.len()];
        let mut hd_n = vec![0usize; cfg.classes.len()];
        for (i, s) in train.iter().enumerate() {
            let c = net.config.class_index(s.label).expect("configured class");
            let pool = net.pool(c);
            let hds: Vec<f64> = pool
                .map(|o| ctx.core(bcall::analysis::hamming(&s.pixels, &matrices[o])).map(|h| h as f64))
                .collect::<Res<_>>()?;
            let hd = mean(&hds);
            hd_sum[c] += hd;
            hd_n[c] += 1;
            hd_rows.push(vec![i as f64, s.label as f64, s.coding_level, hd]);
        }
        let path = dir.join("hd.csv");
        ctx.core(write_table(&path, &["sample", "label", "coding_level", "hd"], hd_rows))?;
        files.push(path);

        let depressed = (!overlap.is_empty()).then(|| {
            let total = overlap.len() * matrices.len();
            let down: usize = matrices.iter().map(|m| overlap.iter().filter(|&&p| !m[p]).count()).sum();
            down as f64 / total as f64
        });
        let test = if tests.is_empty() {
            None
        } else {
            files.push(dir.join("test_rates.csv"));
            Some(evaluate(ctx, &mut net, &tests, &dir, cfg.readout)?)
        };
        let summary = TrainSummary {
            seed,
            mean_hd: hd_sum.iter().zip(&hd_n).map(|(s, &n)| s / n.max(1) as f64).collect(),
            depressed_overlap_fraction: depressed,
            n_overlap_pixels: overlap.len(),
            test,
        };
        if ctx.seeds.len() > 1 {
            files.push(write_json(&dir.join("summary.json"), &summary)?);
        }
        Ok((files, summary))
    })?;
    let (files, summaries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut files: Vec<PathBuf> = files.into_iter().flatten().collect();
    let summary = json!({ "classes": cfg.classes, "seeds": summaries });
    files.push(write_json(&ctx.out.join("summary.json"), &summary)?);
    Ok(files)
}

fn read_weights(path: &Path) -> Res<Vec<f64>> {
    let (header, rows) = read_table(path).map_err(|e| CliError::data(path.display().to_string(), e.to_string()))?;
    let id = header.iter().position(|h| h == "synapse_id");
    let w = header.iter().position(|h| h == "w_hid");
    let (Some(id), Some(w)) = (id, w) else {
        return Err(CliError::data(path.display().to_string(), "expected synapse_id and w_hid columns"));
    };
    let mut out = vec![f64::NAN; rows.len()];
    for row in &rows {
        let k = row[id];
        if k < 0.0 || k.fract() != 0.0 || k as usize >= out.len() || !out[k as usize].is_nan() {
            return Err(CliError::data(path.display().to_string(), format!("bad synapse id {k}")));
        }
        out[k as usize] = row[w];
    }
    Ok(out)
}

pub fn sfnn_eval(cfg: &SfnnCliConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    if cfg.weights.is_empty() {
        return Err(CliError::config(Some("weights".into()), "sfnn-eval needs a w_hid.csv file"));
    }
    let base = validated(ctx, cfg.rule.params())?;
    ctx.core(sfnn_core(cfg, 0).validate())?;
    let weights = read_weights(Path::new(&cfg.weights))?;
    let tests = samples(cfg, Split::Test, cfg.test_per_class)?;
    let results = ctx.per_seed(|seed| {
        let dir = ctx.seed_dir(seed);
        let mut net = ctx.core(build_sfnn::<f64>(&sfnn_core(cfg, seed), &base))?;
        ctx.core(net.set_weights(&weights))?;
        let s = evaluate(ctx, &mut net, &tests, &dir, cfg.readout)?;
        Ok((dir.join("test_rates.csv"), json!({ "seed": seed, "test": s })))
    })?;
    let (mut files, summaries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    files.push(write_json(&ctx.out.join("summary.json"), &json!({ "classes": cfg.classes, "seeds": summaries }))?);
    Ok(files)
}

fn rsnn_core(cfg: &RsnnCliConfig, seed: u64) -> RsnnConfig {
    RsnnConfig {
        n_exc: cfg.n_exc,
        n_inh: cfg.n_inh,
        w_ee: cfg.w_ee_mv,
        w_ei: cfg.w_ei_mv,
        w_ie: cfg.w_ie_mv,
        w_ii: cfg.w_ii_mv,
        w_exc: cfg.w_exc_mv,
        w_inh: cfg.w_inh_mv,
        f_exc: cfg.f_exc_hz,
        f_inh: cfg.f_inh_hz,
        p_ee: cfg.p_ee,
        p_ei: cfg.p_ei,
        p_ie: cfg.p_ie,
        p_ii: cfg.p_ii,
        f_osc: cfg.f_osc_hz,
        osc_amp: cfg.osc_amp_mv,
        phase_mode: cfg.phase_mode,
        n_stim: cfg.n_stim,
        background: cfg.background,
        inhibitory_drive: cfg.inhibitory_drive,
        w_hid_init: cfg.w_hid_init,
        duration: cfg.duration_s,
        stride: cfg.stride_steps,
        dt: cfg.dt_ms * 1e-3,
        seed,
    }
}

pub fn rsnn(cfg: &RsnnCliConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let base = validated(ctx, cfg.rule.params())?;
    ctx.core(rsnn_core(cfg, 0).validate())?;
    let runs = ctx.per_seed(|seed| {
        let r = ctx.core(run_attractor_protocol::<f64>(&rsnn_core(cfg, seed), base))?;
        let dir = ctx.seed_dir(seed);
        let raster: Vec<(usize, SpikeTrain)> = r.raster.iter().cloned().enumerate().collect();
        let raster_path = dir.join("raster.csv");
        ctx.core(bcall::io::write_spikes(&raster_path, &raster))?;
        let rates_path = dir.join("rates.csv");
        let rows = r.rates.iter().enumerate().map(|(i, &x)| vec![i as f64, x]);
        ctx.core(write_table(&rates_path, &["unit_id", "rate_hz"], rows))?;
        Ok((vec![raster_path, rates_path], r))
    })?;
    let (files, runs): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mut files: Vec<PathBuf> = files.into_iter().flatten().collect();

    let mut header = vec!["t".to_string(), "mean".to_string(), "std".to_string()];
    header.extend(ctx.seeds.iter().map(|s| format!("seed_{s}")));
    let rows = (0..runs[0].times.len()).map(|i| {
        let vals: Vec<f64> = runs.iter().map(|r| r.whid_mean[i]).collect();
        let (m, s) = mean_std(&vals);
        let mut row = vec![runs[0].times[i], m, s];
        row.extend(vals);
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    files.push(ctx.table("whid_mean.csv", &header, rows)?);

    let per_seed: Vec<Value> = runs
        .iter()
        .map(|r| {
            json!({
                "seed": r.seed,
                "sync": r.sync,
                "phase_locking": r.phase_locking,
                "mean_rate_hz": r.mean_rate(),
                "final_whid": r.final_whid(),
            })
        })
        .collect();
    let syncs: Vec<f64> = runs.iter().map(|r| r.sync).collect();
    let whids: Vec<f64> = runs.iter().map(|r| r.final_whid()).collect();
    let (sync_mean, sync_std) = mean_std(&syncs);
    let (whid_mean, whid_std) = mean_std(&whids);
    let summary = json!({
        "phase_mode": cfg.phase_mode,
        "sync_mean": sync_mean,
        "sync_std": sync_std,
        "final_whid_mean": whid_mean,
        "final_whid_std": whid_std,
        "n_subset_synapses": runs[0].n_subset_synapses,
        "seeds": per_seed,
    });
    files.push(write_json(&ctx.out.join("sync.json"), &summary)?);
    Ok(files)
}

fn rates_of(trains: &[(usize, SpikeTrain)], duration: f64) -> Vec<f64> {
    trains.iter().map(|(_, t)| t.len() as f64 / duration).collect()
}

pub fn analyze(cfg: &AnalyzeConfig, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    if cfg.spikes.is_empty() {
        return Err(CliError::config(Some("spikes".into()), "analyze needs a spike file"));
    }
    let dt = cfg.dt_ms * 1e-3;
    let trains = ctx.core(read_trains(Path::new(&cfg.spikes), cfg.duration_s, dt))?;
    let rates = rates_of(&trains, cfg.duration_s);
    let times: Vec<Vec<f64>> = trains.iter().filter(|(_, t)| !t.is_empty()).map(|(_, t)| t.times()).collect();
    let refs: Vec<&[f64]> = times.iter().map(Vec::as_slice).collect();
    let sync = if refs.len() >= 2 {
        Some(ctx.core(spike_synchronization(&refs, 0.0, cfg.duration_s))?)
    } else {
        None
    };
    let hist = ctx.core(rate_histogram(&rates, cfg.bin_hz))?;
    let edges = hist.edges();
    let rows = hist.mass.iter().enumerate().map(|(i, &m)| vec![edges[i], edges[i + 1], m]);
    let hist_path = ctx.table("rate_hist.csv", &["lo_hz", "hi_hz", "mass"], rows)?;
    let mut report = json!({
        "n_trains": trains.len(),
        "sync": opt(sync),
        "mean_rate_hz": mean(&rates),
        "rates_hz": trains.iter().map(|(u, t)| json!({"unit_id": u, "rate_hz": t.len() as f64 / cfg.duration_s})).collect::<Vec<_>>(),
    });
    if !cfg.compare.is_empty() {
        let other = ctx.core(read_trains(Path::new(&cfg.compare), cfg.duration_s, dt))?;
        let ks = ctx.core(ks_two_sample(&rates, &rates_of(&other, cfg.duration_s)))?;
        report["ks"] = json!({ "statistic": ks.statistic, "p_value": ks.p_value });
    }
    Ok(vec![hist_path, write_json(&ctx.out.join("analysis.json"), &report)?])
}

/// Runs `subcommand` on a resolved config value.
pub fn dispatch(subcommand: &str, ctx: &Ctx) -> Res<Vec<PathBuf>> {
    let v = ctx.config.clone();
    match subcommand {
        "pair" => pair(&from_value(v)?, ctx),
        "stdp" => stdp(&from_value(v)?, ctx),
        "srdp" => srdp(&from_value(v)?, ctx),
        "tracesweep" => tracesweep(&from_value(v)?, ctx),
        "heatmap" => heatmap(&from_value(v)?, ctx),
        "sfnn-train" => sfnn_train(&from_value(v)?, ctx),
        "sfnn-eval" => sfnn_eval(&from_value(v)?, ctx),
        "rsnn" => rsnn(&from_value(v)?, ctx),
        "analyze" => analyze(&from_value(v)?, ctx),
        other => Err(CliError::usage(format!("unknown subcommand `{other}`"))),
    }
}
