use std::fs;

use bcall::analysis::coding_level;
use bcall::io::{read_table, write_run, write_synapses};
use bcall::plasticity::effective_weight;
use bcall::BcallParams;
use bcall::protocols::{pair_trace_dump, PairConfig};
use bcall::sfnn::{binarize_all, bundled_subset_dir, load_mnist, read_idx_images, read_idx_labels, Split};
use bcall::Error;

fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
    let mut v = magic.to_be_bytes().to_vec();
    for d in dims {
        v.extend(d.to_be_bytes());
    }
    v
}

#[test]
fn truncated_images_report_offset() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("img");
    let mut bytes = header(0x803, &[2, 28, 28]);
    bytes.extend(vec![0u8; 784 + 100]);
    fs::write(&p, &bytes).unwrap();
    match read_idx_images(&p) {
        Err(Error::Idx { offset, .. }) => assert_eq!(offset, 16 + 884),
        other => panic!("{other:?}"),
    }
}

#[test]
fn truncated_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("img");
    fs::write(&p, [0u8, 0, 8, 3, 0, 0]).unwrap();
    assert!(matches!(read_idx_images(&p), Err(Error::Idx { offset: 6, .. })));
}

#[test]
fn wrong_magic_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lbl");
    fs::write(&p, header(0x803, &[0])).unwrap();
    assert!(matches!(read_idx_labels(&p), Err(Error::Idx { offset: 0, .. })));
}

#[test]
fn raw_idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = header(0x803, &[3, 28, 28]);
    for k in 0..3u8 {
        img.extend(vec![k * 100; 784]);
    }
    let mut lbl = header(0x801, &[3]);
    lbl.extend([4, 0, 9]);
    fs::write(dir.path().join("t10k-images-idx3-ubyte"), img).unwrap();
    fs::write(dir.path().join("t10k-labels-idx1-ubyte"), lbl).unwrap();
    let d = load_mnist(dir.path(), Split::Test).unwrap();
    assert_eq!(d.labels, vec![4, 0, 9]);
    assert_eq!(d.images[2][783], 200);
    let bits = binarize_all(&d, 160);
    assert_eq!(bits[1].coding_level, 0.0);
    assert_eq!(bits[2].coding_level, 1.0);
}

#[test]
fn bundled_subset_loads() {
    let train = load_mnist(&bundled_subset_dir(), Split::Train).unwrap();
    let test = load_mnist(&bundled_subset_dir(), Split::Test).unwrap();
    assert_eq!(train.len(), 5000);
    assert_eq!(test.len(), 1000);
    for c in 0..10u8 {
        assert_eq!(train.labels.iter().filter(|&&l| l == c).count(), 500);
    }
}

#[test]
fn digit_zero_coding_level() {
    let train = load_mnist(&bundled_subset_dir(), Split::Train).unwrap();
    let zeros = binarize_all(&train.take_per_class(&[0], 500), 160);
    let mean = zeros.iter().map(|s| coding_level(&s.pixels)).sum::<f64>() / zeros.len() as f64;
    assert!((mean - 0.16).abs() < 0.01, "{mean}");
    let ones = binarize_all(&train.take_per_class(&[1], 500), 160);
    let mean1 = ones.iter().map(|s| s.coding_level).sum::<f64>() / ones.len() as f64;
    assert!(mean1 < 0.6 * mean, "{mean1}");
}

#[test]
fn run_output_is_byte_identical() {
    let params = BcallParams::default();
    let cfg = PairConfig { seed: 11, ..PairConfig::default() };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    for d in &dirs {
        let r = pair_trace_dump(&cfg, &params).unwrap();
        files.push(write_run(d.path(), &r).unwrap());
    }
    assert_eq!(files[0].len(), 5);
    for (a, b) in files[0].iter().zip(&files[1]) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
    let (head, rows) = read_table(&dirs[0].path().join("w_hid.csv")).unwrap();
    assert_eq!(head, vec!["t", "0"]);
    assert_eq!(rows.len(), 1000);
    assert!((rows[999][0] - 1.0).abs() < 1e-12);
}

#[test]
fn synapse_dump_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("syn.csv");
    let params = BcallParams { w_pot: 3.0, ..BcallParams::default() };
    write_synapses(&p, &[(0, 1), (2, 1)], &[0.2, 0.7], |w| effective_weight(w, &params)).unwrap();
    let (head, rows) = read_table(&p).unwrap();
    assert_eq!(head, vec!["synapse_id", "pre_id", "post_id", "w_hid", "w_eff"]);
    assert_eq!(rows[0], vec![0.0, 0.0, 1.0, 0.2, 0.0]);
    assert_eq!(rows[1], vec![1.0, 2.0, 1.0, 0.7, 3.0]);
}
