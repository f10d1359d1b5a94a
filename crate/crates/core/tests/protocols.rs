use bcall::protocols::{
    heatmap_cell, pair_trace_dump, rate_heatmap, srdp_point, stdp_curve, stdp_oracle, HeatmapConfig, PairConfig, Shift,
};
use bcall::BcallParams;

const DT: f64 = 1e-4;

fn open() -> BcallParams {
    BcallParams::default().gate_open().without_bistability()
}

/// Single pair, literal rule constants.
fn pair_delta(dt_ms: f64) -> f64 {
    if dt_ms < 0.0 {
        if 0.5 * (dt_ms / 30.0).exp() > 0.05 {
            -0.026
        } else {
            0.0
        }
    } else if dt_ms == 0.0 {
        0.0
    } else {
        let x = 0.4 * (-dt_ms / 30.0).exp();
        0.18 * x + if x < 0.05 { -0.008 } else { 0.0 }
    }
}

#[test]
fn stdp_matches_pair_oracle_every_millisecond() {
    let grid: Vec<f64> = (-100..=100).map(f64::from).collect();
    let curve = stdp_curve(&grid, &open(), 0.5, DT).unwrap();
    for (d, w) in grid.iter().zip(&curve.mean) {
        assert!((w - pair_delta(*d)).abs() < 1e-9, "dt {d}: {w} vs {}", pair_delta(*d));
        assert!((w - stdp_oracle(*d, &open())).abs() < 1e-9);
    }
}

#[test]
fn depression_window_edge() {
    // x_j = 0.5 exp(-|dt| / 30 ms) drops below 0.05 after 69.08 ms.
    let curve = stdp_curve(&[-69.0, -70.0], &open(), 0.5, DT).unwrap();
    assert!((curve.mean[0] + 0.026).abs() < 1e-12);
    assert_eq!(curve.mean[1], 0.0);
}

#[test]
fn widely_spaced_pairs_add_up() {
    let params = open();
    let one = srdp_point(0.5, 1, 10.0, &params, 0.3, DT).unwrap();
    let five = srdp_point(0.5, 5, 10.0, &params, 0.3, DT).unwrap();
    assert!((five - 5.0 * one).abs() < 1e-9, "{five} vs {one}");
    assert!((one - pair_delta(10.0)).abs() < 1e-9);
}

#[test]
fn stop_gate_needs_post_history() {
    // x_s starts below theta_l: a leading pre spike is gated out, while a
    // leading post spike lifts x_s to 0.075 and opens the gate.
    let params = BcallParams::default().without_bistability();
    let c = stdp_curve(&[10.0, -10.0], &params, 0.5, DT).unwrap();
    assert_eq!(c.mean[0], 0.0);
    assert!((c.mean[1] + 0.026).abs() < 1e-12);
}

#[test]
fn heatmap_is_seed_deterministic() {
    let cfg = HeatmapConfig { seeds: 3, duration: 0.5, ..HeatmapConfig::default() };
    let params = BcallParams::default().gate_open();
    let a = rate_heatmap(&[5.0, 40.0], &[5.0, 40.0], Shift::Positive, &cfg, &params).unwrap();
    let b = rate_heatmap(&[5.0, 40.0], &[5.0, 40.0], Shift::Positive, &cfg, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.mean.len(), 2);
    let cell = heatmap_cell(40.0, 5.0, Shift::None, &cfg, &params, 9).unwrap();
    assert_eq!(cell, heatmap_cell(40.0, 5.0, Shift::None, &cfg, &params, 9).unwrap());
}

#[test]
fn pair_dump_traces_are_bounded() {
    let r = pair_trace_dump(&PairConfig::default(), &BcallParams::default()).unwrap();
    assert_eq!(r.series.len(), 4);
    for s in &r.series {
        assert_eq!(s.values.len(), 1000);
        assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
