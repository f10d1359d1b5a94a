use bcall::analysis::hamming;
use bcall::rsnn::{build_rsnn, run_attractor_protocol, InhibitoryDrive, RsnnConfig};
use bcall::sfnn::{binarize_all, build_sfnn, bundled_subset_dir, load_mnist, SfnnConfig, Split};
use bcall::spikegen::PhaseMode;
use bcall::BcallParams;

#[test]
fn rsnn_structure() {
    let cfg = RsnnConfig::default();
    let r = build_rsnn::<f64>(&cfg, BcallParams::default()).unwrap();
    let n = r.network.plastic().len() as f64;
    let expected = 0.5 * 256.0 * 255.0;
    assert!((n - expected).abs() < 5.0 * (expected * 0.25).sqrt(), "{n}");
    let expected_subset = 0.5 * 64.0 * 63.0;
    let m = r.subset_synapses.len() as f64;
    assert!((m - expected_subset).abs() < 5.0 * (expected_subset * 0.25).sqrt(), "{m}");
    assert!(r.network.plastic().iter().all(|s| s.pre != s.post));
    assert!(r.network.fixed().iter().all(|s| s.pre != s.post));
}

#[test]
fn rsnn_modes_control_rate_but_not_timing() {
    let (mut rates, mut whid, mut lock) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    for (k, mode) in [PhaseMode::Random, PhaseMode::Correlated].into_iter().enumerate() {
        for seed in 0..4 {
            let cfg = RsnnConfig { phase_mode: mode, seed, ..RsnnConfig::default() };
            let r = run_attractor_protocol::<f64>(&cfg, BcallParams::default()).unwrap();
            assert_eq!(r.whid_mean.len(), 1000);
            // One sample per oscillation cycle (1 ms stride, 3 Hz).
            let coarse: Vec<f64> = [332, 665, 998].iter().map(|&i| r.whid_mean[i]).collect();
            assert!(coarse.windows(2).all(|w| w[1] >= w[0]), "{mode:?} {seed}: {coarse:?}");
            rates[k] += r.mean_rate();
            whid[k] += r.final_whid();
            lock[k] += r.phase_locking;
        }
    }
    assert!((rates[0] - rates[1]).abs() < 0.1 * rates[0], "{rates:?}");
    assert!(whid[1] > whid[0], "{whid:?}");
    assert!(lock[1] > lock[0], "{lock:?}");
}

#[test]
fn rsnn_oscillation_alone_is_subthreshold() {
    let cfg = RsnnConfig {
        f_exc: 0.0,
        f_inh: 0.0,
        duration: 2.0,
        ..RsnnConfig::default()
    };
    let r = run_attractor_protocol::<f64>(&cfg, BcallParams::default()).unwrap();
    assert!(r.raster.iter().all(|t| t.is_empty()));
}

#[test]
fn rsnn_literal_inhibitory_drive_is_silent() {
    let cfg = RsnnConfig {
        inhibitory_drive: InhibitoryDrive::AllNeurons,
        duration: 0.3,
        ..RsnnConfig::default()
    };
    let r = run_attractor_protocol::<f64>(&cfg, BcallParams::default()).unwrap();
    assert_eq!(r.mean_rate(), 0.0);
}

#[test]
fn sfnn_teacher_drives_its_pool() {
    let data = load_mnist(&bundled_subset_dir(), Split::Train).unwrap();
    let samples = binarize_all(&data.take_per_class(&[0, 1], 3), 160);
    let cfg = SfnnConfig {
        classes: vec![0, 1],
        t_inp: 0.3,
        seed: 5,
        ..SfnnConfig::default()
    };
    let mut net = build_sfnn::<f64>(&cfg, &BcallParams::default()).unwrap();
    let before = net.matrices();
    let stats = net.train(&samples).unwrap();
    assert_eq!(stats.len(), 6);
    assert!(stats.iter().all(|s| s.teacher_selective()), "{stats:?}");
    let after = net.matrices();
    assert!(hamming(&before[0], &after[0]).unwrap() > 0);
    let rates = net.infer(&samples[0]).unwrap();
    assert_eq!(rates.len(), 2);
    assert_eq!(net.matrices(), after);
}
