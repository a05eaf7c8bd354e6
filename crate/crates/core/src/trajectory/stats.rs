//! Statistics of zero-crossing times across an ensemble of trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{fmt_float, Csv};

use super::TrajectoryRecord;

/// Below this many samples an index is flagged as low confidence.
pub const MIN_CONFIDENT_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingStatistics {
    pub index: usize,
    pub mean_time: f64,
    pub variance: f64,
    pub count: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityTest {
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `z_skew² + z_kurt²`, compared with the 1% point of χ²(2).
    pub k_squared: f64,
    pub rejected_at_1pct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub per_index: Vec<CrossingStatistics>,
    /// Least-squares slope of variance against mean crossing time.
    pub slope: f64,
    pub slope_stderr: f64,
    /// `slope · Δν²`: the phase diffusion coefficient.
    pub phase_diffusion: f64,
    pub normality: Option<NormalityTest>,
}

impl CrossingReport {
    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["crossing_index", "mean_time", "variance", "count"]);
        for s in &self.per_index {
            csv.row(&[s.index.to_string(), fmt_float(s.mean_time), fmt_float(s.variance), s.count.to_string()]);
        }
        csv
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Moment-based normality check with the large-sample standard errors
/// `√(6/n)` and `√(24/n)`.
pub fn normality(samples: &[f64]) -> Option<NormalityTest> {
    let n = samples.len();
    if n < 8 {
        return None;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if m2 == 0.0 {
        return None;
    }
    let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let zs = skewness / (6.0 / nf).sqrt();
    let zk = excess_kurtosis / (24.0 / nf).sqrt();
    let k_squared = zs * zs + zk * zk;
    Some(NormalityTest {
        n,
        skewness,
        excess_kurtosis,
        k_squared,
        // χ²(2) upper 1% point
        rejected_at_1pct: k_squared > 9.2103,
    })
}

/// Mean and variance of the `k`-th debounced crossing time for each
/// requested `k`, and a linear fit of variance against mean time over the
/// confident indices. The normality check uses the last confident index.
pub fn crossing_statistics(records: &[TrajectoryRecord], indices: &[usize], delta_nu: f64) -> Result<CrossingReport> {
    if indices.is_empty() {
        return Err(Error::InvalidParams("no crossing indices requested".into()));
    }
    let mut per_index = Vec::new();
    let mut last_samples = None;
    for &k in indices {
        let samples: Vec<f64> = records.iter().filter_map(|r| r.crossings.get(k).copied()).collect();
        if samples.is_empty() {
            continue;
        }
        let (mean_time, variance) = mean_var(&samples);
        let low_confidence = samples.len() < MIN_CONFIDENT_SAMPLES;
        if !low_confidence {
            last_samples = Some(samples.clone());
        }
        per_index.push(CrossingStatistics {
            index: k,
            mean_time,
            variance,
            count: samples.len(),
            low_confidence,
        });
    }
    let pts: Vec<(f64, f64)> = per_index
        .iter()
        .filter(|s| !s.low_confidence)
        .map(|s| (s.mean_time, s.variance))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Trajectory(format!(
            "need at least 3 crossing indices with {MIN_CONFIDENT_SAMPLES}+ samples, got {}",
            pts.len()
        )));
    }
    let (slope, slope_stderr) = linear_slope(&pts);
    Ok(CrossingReport {
        per_index,
        slope,
        slope_stderr,
        phase_diffusion: slope * delta_nu * delta_nu,
        normality: last_samples.as_deref().and_then(normality),
    })
}

/// Ordinary least-squares slope and its standard error.
pub fn linear_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = if pts.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn record(crossings: Vec<f64>) -> TrajectoryRecord {
        TrajectoryRecord {
            seed: 0,
            times: vec![],
            conditional_signal: vec![],
            sz: vec![],
            crossings,
            jumps: 0,
            final_norm_drift: 0.0,
        }
    }

    #[test]
    fn recovers_synthetic_diffusion() {
        // crossing k at (kπ − φ(t))/Δν with φ a Wiener process of rate D
        let (dnu, d) = (10.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records: Vec<_> = (0..4000)
            .map(|_| {
                let mut phi = 0.0;
                let mut prev = 0.0;
                (1..=20)
                    .map(|k| {
                        let t = k as f64 * std::f64::consts::PI / dnu;
                        let z: f64 = StandardNormal.sample(&mut rng);
                        phi += (d * (t - prev)).sqrt() * z;
                        prev = t;
                        t - phi / dnu
                    })
                    .collect()
            })
            .map(record)
            .collect();
        let idx: Vec<usize> = (0..20).collect();
        let rep = crossing_statistics(&records, &idx, dnu).unwrap();
        assert!((rep.phase_diffusion - d).abs() < 0.1 * d, "{}", rep.phase_diffusion);
        assert!(!rep.normality.unwrap().rejected_at_1pct);
    }

    #[test]
    fn skewed_samples_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = Exp::new(1.0).unwrap();
        let xs: Vec<f64> = (0..500).map(|_| e.sample(&mut rng)).collect();
        assert!(normality(&xs).unwrap().rejected_at_1pct);
    }

    #[test]
    fn sparse_indices_flagged() {
        let records: Vec<_> = (0..40)
            .map(|i| record(if i < 10 { vec![1.0, 2.0, 3.0, 4.0] } else { vec![1.0, 2.0, 3.0] }))
            .collect();
        let rep = crossing_statistics(&records, &[0, 1, 2, 3], 1.0).unwrap();
        assert!(rep.per_index[3].low_confidence);
        assert_eq!(rep.per_index[3].count, 10);
        assert!(rep.per_index[..3].iter().all(|s| !s.low_confidence));
    }
}
