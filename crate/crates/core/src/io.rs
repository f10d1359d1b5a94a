//! Text serialisation of run output.
//!
//! Every floating-point value is written with 12 significant digits so that
//! identical runs give byte-identical files on every platform.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::{Probe, RunResult, Series};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spikegen::SpikeTrain;

/// Formats like C's `%.12g`.
pub fn fmt_num(v: f64) -> String {
    fmt_sig(v, 12)
}

pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes a table with a header row. Values are formatted with [`fmt_num`].
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: header.len(),
            });
        }
        let line: Vec<String> = row.into_iter().map(fmt_num).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV with one header line.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>(),
        None => {
            return Err(Error::Csv {
                path: path.into(),
                line: 1,
                reason: "empty file".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Csv {
                    path: path.into(),
                    line: i + 2,
                    reason: format!("`{f}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::Csv {
                path: path.into(),
                line: i + 2,
                reason: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Spike times as `unit_id,t`, sorted by unit then time.
pub fn write_spikes(path: &Path, trains: &[(usize, SpikeTrain)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "unit_id,t")?;
    let mut sorted: Vec<&(usize, SpikeTrain)> = trains.iter().collect();
    sorted.sort_by_key(|(u, _)| *u);
    for (u, train) in sorted {
        for t in train.times() {
            writeln!(w, "{u},{}", fmt_num(t))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `unit_id,t` rows back into per-unit time lists.
pub fn read_spikes(path: &Path) -> Result<BTreeMap<usize, Vec<f64>>> {
    let (header, rows) = read_table(path)?;
    if header.len() != 2 || header[0] != "unit_id" || header[1] != "t" {
        return Err(Error::Csv {
            path: path.into(),
            line: 1,
            reason: "expected header `unit_id,t`".into(),
        });
    }
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        if row[0] < 0.0 || row[0].fract() != 0.0 {
            return Err(Error::Csv {
                path: path.into(),
                line: i + 2,
                reason: format!("bad unit id {}", row[0]),
            });
        }
        out.entry(row[0] as usize).or_default().push(row[1]);
    }
    for times in out.values_mut() {
        times.sort_by(f64::total_cmp);
    }
    Ok(out)
}

/// Reads spikes and snaps them onto the `dt` grid.
pub fn read_trains(path: &Path, duration: f64, dt: f64) -> Result<Vec<(usize, SpikeTrain)>> {
    read_spikes(path)?
        .into_iter()
        .map(|(u, times)| Ok((u, SpikeTrain::from_times(&times, duration, dt)?)))
        .collect()
}

fn probe_kind(p: &Probe) -> (&'static str, Option<usize>) {
    match p {
        Probe::Membrane(u) => ("membrane", Some(*u)),
        Probe::Threshold(u) => ("threshold", Some(*u)),
        Probe::PreTrace(u) => ("x_i", Some(*u)),
        Probe::PostTrace(u) => ("x_j", Some(*u)),
        Probe::StopTrace(u) => ("x_s", Some(*u)),
        Probe::Weight(s) => ("w_hid", Some(*s)),
        Probe::MeanWeight(_) => ("w_hid_mean", None),
    }
}

/// Writes one CSV per recorded variable (`t,<id...>`) plus `spikes.csv`.
/// Returns the written paths in a fixed order.
pub fn write_run<S: Scalar>(dir: &Path, result: &RunResult<S>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let spikes = dir.join("spikes.csv");
    write_spikes(&spikes, &result.spikes)?;
    written.push(spikes);

    let mut groups: BTreeMap<(&'static str, u64), Vec<&Series<S>>> = BTreeMap::new();
    for s in &result.series {
        groups.entry((probe_kind(&s.probe).0, s.stride)).or_default().push(s);
    }
    let multi_stride: BTreeMap<&str, usize> = groups.keys().fold(BTreeMap::new(), |mut m, (k, _)| {
        *m.entry(*k).or_insert(0) += 1;
        m
    });
    for ((kind, stride), series) in groups {
        let name = if multi_stride[kind] > 1 {
            format!("{kind}_stride{stride}.csv")
        } else {
            format!("{kind}.csv")
        };
        let mut header = vec!["t".to_string()];
        for s in &series {
            header.push(match probe_kind(&s.probe).1 {
                Some(id) => id.to_string(),
                None => "mean".to_string(),
            });
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let n = series[0].times.len();
        let rows = (0..n).map(|i| {
            let mut row = vec![series[0].times[i]];
            row.extend(series.iter().map(|s| s.values[i].as_f64()));
            row
        });
        let path = dir.join(name);
        write_table(&path, &header_refs, rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Dumps plastic synapses as `synapse_id,pre_id,post_id,w_hid,w_eff`.
pub fn write_synapses<S: Scalar>(
    path: &Path,
    endpoints: &[(usize, usize)],
    w_hid: &[S],
    w_eff: impl Fn(S) -> S,
) -> Result<()> {
    if endpoints.len() != w_hid.len() {
        return Err(Error::LengthMismatch {
            left: endpoints.len(),
            right: w_hid.len(),
        });
    }
    let rows = endpoints.iter().zip(w_hid).enumerate().map(|(i, (&(pre, post), &w))| {
        vec![i as f64, pre as f64, post as f64, w.as_f64(), w_eff(w).as_f64()]
    });
    write_table(path, &["synapse_id", "pre_id", "post_id", "w_hid", "w_eff"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.026), "-0.026");
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_num(1e-7), "1e-07");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(-65.0), "-65");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn spikes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let a = SpikeTrain::from_steps(vec![1, 5, 900], 1000, 1e-4).unwrap();
        let b = SpikeTrain::from_steps(vec![3], 1000, 1e-4).unwrap();
        write_spikes(&p, &[(7, b.clone()), (2, a.clone())]).unwrap();
        let back = read_trains(&p, 0.1, 1e-4).unwrap();
        assert_eq!(back, vec![(2, a), (7, b)]);
    }

    #[test]
    fn table_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        match read_table(&p) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
