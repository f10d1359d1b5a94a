//! Post-hoc metrics on weight matrices, spike trains and rate samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spikegen::SpikeTrain;

pub fn hamming(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

pub fn coding_level(bits: &[bool]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    bits.iter().filter(|&&b| b).count() as f64 / bits.len() as f64
}

/// Percentage of active matrix entries that are inactive in the prototype.
pub fn noise_percentage(matrix: &[bool], prototype: &[bool]) -> Result<f64> {
    if matrix.len() != prototype.len() {
        return Err(Error::LengthMismatch {
            left: matrix.len(),
            right: prototype.len(),
        });
    }
    let active = matrix.iter().filter(|&&m| m).count();
    if active == 0 {
        return Err(Error::Undefined("noise percentage of an all-zero matrix"));
    }
    let noise = matrix.iter().zip(prototype).filter(|(&m, &p)| m && !p).count();
    Ok(100.0 * noise as f64 / active as f64)
}

/// Spike times of one train inside an observation window.
#[derive(Debug, Clone, Copy)]
struct Windowed<'a> {
    t: &'a [f64],
    start: f64,
    end: f64,
}

impl Windowed<'_> {
    /// Half the smaller of the two intervals around spike `i`; a missing
    /// neighbour is replaced by the window edge.
    fn half_isi(&self, i: usize) -> (f64, f64) {
        let before = if i == 0 { self.t[0] - self.start } else { self.t[i] - self.t[i - 1] };
        let after = if i + 1 == self.t.len() {
            self.end - self.t[i]
        } else {
            self.t[i + 1] - self.t[i]
        };
        (before, after)
    }

    /// Index of the spike nearest to `x`; ties go to the earlier spike.
    fn nearest(&self, x: f64) -> usize {
        let pos = self.t.partition_point(|&s| s < x);
        if pos == 0 {
            0
        } else if pos == self.t.len() || x - self.t[pos - 1] <= self.t[pos] - x {
            pos - 1
        } else {
            pos
        }
    }
}

fn coincident(a: &Windowed, i: usize, b: &Windowed) -> bool {
    let j = b.nearest(a.t[i]);
    let d = (a.t[i] - b.t[j]).abs();
    if d == 0.0 {
        return true;
    }
    let (a0, a1) = a.half_isi(i);
    let (b0, b1) = b.half_isi(j);
    let tau = 0.5 * a0.min(a1).min(b0).min(b1);
    d < tau
}

/// Multivariate SPIKE-synchronization of spike-time lists observed on
/// `[t_start, t_end]`.
///
/// Each spike is checked against every other train: it is coincident when
/// the nearest spike there lies closer than half the smallest of the four
/// inter-spike intervals around the two spikes. Exact coincidences always
/// count. The score is the fraction of (spike, other train) checks that
/// are coincident.
pub fn spike_synchronization(trains: &[&[f64]], t_start: f64, t_end: f64) -> Result<f64> {
    if trains.len() < 2 {
        return Err(Error::Undefined("SPIKE-synchronization needs at least two trains"));
    }
    if !(t_end >= t_start) {
        return Err(Error::param("t_end", t_end, ">= t_start"));
    }
    for t in trains {
        if t.is_empty() {
            return Err(Error::Undefined("SPIKE-synchronization of an empty train"));
        }
        if t.windows(2).any(|w| w[0] >= w[1]) || t[0] < t_start || t[t.len() - 1] > t_end {
            return Err(Error::Undefined("spike times must be increasing and inside the window"));
        }
    }
    let w: Vec<Windowed> = trains
        .iter()
        .map(|t| Windowed {
            t,
            start: t_start,
            end: t_end,
        })
        .collect();
    let mut hits = 0u64;
    let mut checks = 0u64;
    for (n, a) in w.iter().enumerate() {
        for (m, b) in w.iter().enumerate() {
            if n == m {
                continue;
            }
            for i in 0..a.t.len() {
                checks += 1;
                if coincident(a, i, b) {
                    hits += 1;
                }
            }
        }
    }
    Ok(hits as f64 / checks as f64)
}

/// SPIKE-synchronization of grid trains over `[0, duration]`.
pub fn spike_sync_trains(trains: &[SpikeTrain]) -> Result<f64> {
    let times: Vec<Vec<f64>> = trains.iter().map(SpikeTrain::times).collect();
    let refs: Vec<&[f64]> = times.iter().map(Vec::as_slice).collect();
    let end = trains.iter().map(SpikeTrain::duration).fold(0.0, f64::max);
    spike_synchronization(&refs, 0.0, end)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolVariability {
    /// Mean of the per-network mean Hamming distances.
    pub mean: f64,
    /// Mean of the per-network variances.
    pub var: f64,
    pub std: f64,
}

/// Within-pool variability. `networks[k][c]` is the pool of class `c` in
/// network `k`, one binary matrix per output neuron. For every network the
/// Hamming distances of all unordered pairs inside each pool are pooled
/// over classes; their mean and variance are then averaged over networks.
pub fn pool_variability(networks: &[Vec<Vec<Vec<bool>>>]) -> Result<PoolVariability> {
    if networks.is_empty() {
        return Err(Error::Undefined("pool variability of zero networks"));
    }
    let mut means = Vec::with_capacity(networks.len());
    let mut vars = Vec::with_capacity(networks.len());
    for pools in networks {
        let mut hds = Vec::new();
        for pool in pools {
            if pool.len() < 2 {
                return Err(Error::param("n_class", pool.len(), ">= 2"));
            }
            for i in 0..pool.len() {
                for j in i + 1..pool.len() {
                    hds.push(hamming(&pool[i], &pool[j])? as f64);
                }
            }
        }
        if hds.is_empty() {
            return Err(Error::Undefined("network without pools"));
        }
        let n = hds.len() as f64;
        let m = hds.iter().sum::<f64>() / n;
        means.push(m);
        vars.push(hds.iter().map(|h| (h - m) * (h - m)).sum::<f64>() / n);
    }
    let k = networks.len() as f64;
    let var = vars.iter().sum::<f64>() / k;
    Ok(PoolVariability {
        mean: means.iter().sum::<f64>() / k,
        var,
        std: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Left edge of the first bin.
    pub start: f64,
    pub width: f64,
    /// Probability mass per bin; sums to 1 for non-empty input.
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.mass.len()).map(|i| self.start + i as f64 * self.width).collect()
    }
}

/// Probability-normalised histogram with bins aligned to multiples of
/// `width`.
pub fn rate_histogram(rates: &[f64], width: f64) -> Result<Histogram> {
    if !(width > 0.0) {
        return Err(Error::param("bin width", width, "> 0"));
    }
    if rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::Undefined("non-finite rate"));
    }
    if rates.is_empty() {
        return Ok(Histogram {
            start: 0.0,
            width,
            mass: Vec::new(),
        });
    }
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (lo / width).floor() * width;
    let bins = (((hi - start) / width).floor() as usize + 1).max(1);
    let mut mass = vec![0.0; bins];
    let unit = 1.0 / rates.len() as f64;
    for &r in rates {
        let b = (((r - start) / width).floor() as usize).min(bins - 1);
        mass[b] += unit;
    }
    Ok(Histogram { start, width, mass })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value (Stephens'
/// small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Undefined("KS test on an empty sample"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `n` fair coin flips.
pub fn sign_test(wins: usize, n: usize) -> f64 {
    let mut p = 0.0;
    for k in wins..=n {
        p += binomial(n, k);
    }
    p / 2f64.powi(n as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Length of the mean resultant vector of a set of angles (radians).
pub fn mean_resultant_length(angles: &[f64]) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    (s * s + c * c).sqrt() / angles.len() as f64
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn hamming_examples() {
        let a = vec![true; 784];
        let b: Vec<bool> = a.iter().map(|x| !x).collect();
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &b).unwrap(), 784);
        assert_eq!(hamming(&bits("1100"), &bits("1010")).unwrap(), 2);
        assert!(hamming(&bits("1"), &bits("10")).is_err());
    }

    #[test]
    fn noise_examples() {
        assert_eq!(noise_percentage(&bits("0110"), &bits("1110")).unwrap(), 0.0);
        let m = bits("1111111111000000");
        let p = bits("1111110000000000");
        assert_eq!(noise_percentage(&m, &p).unwrap(), 40.0);
        assert!(noise_percentage(&bits("000"), &bits("111")).is_err());
    }

    #[test]
    fn sync_examples() {
        let a = [0.1, 0.3, 0.5];
        assert_eq!(spike_synchronization(&[&a, &a], 0.0, 1.0).unwrap(), 1.0);
        let far = spike_synchronization(&[&[0.1], &[0.9]], 0.0, 1.0).unwrap();
        assert_eq!(far, 0.0);
        assert!(spike_synchronization(&[&[0.1], &[]], 0.0, 1.0).is_err());
        assert!(spike_synchronization(&[&[0.1]], 0.0, 1.0).is_err());
    }

    #[test]
    fn sync_hand_case() {
        // a: 0.2, 0.6; b: 0.21, 0.9
        // a0 vs b: nearest 0.21, d=0.01, isi a0: (0.2, 0.4), b0: (0.21, 0.69) -> tau 0.1 -> hit
        // a1 vs b: nearest 0.9 (0.3 vs 0.39), d=0.3, tau=0.5*min(0.4,0.4,0.69,0.1)=0.05 -> miss
        // b0 vs a: hit (symmetric); b1 vs a: nearest 0.6, d=0.3 -> miss
        let s = spike_synchronization(&[&[0.2, 0.6], &[0.21, 0.9]], 0.0, 1.0).unwrap();
        assert_eq!(s, 0.5);
    }

    #[test]
    fn histogram_basics() {
        let h = rate_histogram(&[12.0], 5.0).unwrap();
        assert_eq!(h.mass, vec![1.0]);
        assert_eq!(h.start, 10.0);
        let rates: Vec<f64> = (0..1000).map(|i| i as f64 * 0.05).collect();
        let h = rate_histogram(&rates, 5.0).unwrap();
        assert_eq!(h.mass.len(), 10);
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(h.mass.iter().all(|m| (m - 0.1).abs() < 1e-9));
    }

    #[test]
    fn pool_variability_hand_case() {
        let pool_same = vec![bits("1100"), bits("1100")];
        let net = vec![pool_same.clone(), pool_same];
        let v = pool_variability(&[net]).unwrap();
        assert_eq!((v.mean, v.std), (0.0, 0.0));

        // net A: pool hds {2} and {0} -> mean 1, var 1
        // net B: pool of three: hds {1, 1, 2} and pool {4} -> mean 2, var 1.5
        let a = vec![vec![bits("1100"), bits("1010")], vec![bits("1111"), bits("1111")]];
        let b = vec![
            vec![bits("1000"), bits("1100"), bits("0100")],
            vec![bits("0000"), bits("1111")],
        ];
        let v = pool_variability(&[a, b]).unwrap();
        assert!((v.mean - 1.5).abs() < 1e-12);
        assert!((v.var - 1.25).abs() < 1e-12);
        assert!(pool_variability(&[vec![vec![bits("1")]]]).is_err());
    }

    #[test]
    fn ks_test_behaviour() {
        let a: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let b: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let same = ks_two_sample(&a, &b).unwrap();
        assert!(same.p_value > 0.9, "{same:?}");
        let c: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        let diff = ks_two_sample(&a, &c).unwrap();
        assert!((diff.statistic - 0.3).abs() < 0.01);
        assert!(diff.p_value < 1e-6);
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test(15, 20) - 0.020694732666015625).abs() < 1e-15);
        assert_eq!(sign_test(0, 5), 1.0);
    }

    #[test]
    fn resultant_length() {
        assert!((mean_resultant_length(&[0.3, 0.3, 0.3]) - 1.0).abs() < 1e-12);
        assert!(mean_resultant_length(&[0.0, std::f64::consts::PI]) < 1e-12);
    }
}
