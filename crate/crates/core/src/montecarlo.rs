//! Seeded Monte Carlo estimation of the law of M(Σ).
//!
//! Draws are chunked through [`crate::rng::map_chunks`]; per-chunk partial
//! results (counts, Welford summaries) are merged in chunk order, so every
//! estimate is a pure function of its inputs and the stream.

use serde::{Deserialize, Serialize};

use crate::corrmat::{gram_factor, CorrelationMatrix, GramFactor};
use crate::error::{Error, Result};
use crate::rng::{map_chunks, Gaussians, RngStream};

pub use crate::rng::RngStream as Stream;

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;
/// Guard band, in combined standard errors, for dominance flags.
pub const DOMINANCE_GUARD: f64 = 4.0;

/// min_j |⟨z, u_j⟩| for one fresh standard Gaussian z.
pub(crate) fn draw_min(gf: &GramFactor, g: &mut Gaussians, z: &mut [f64]) -> f64 {
    g.fill_normal(z);
    min_abs_projection(gf.as_slice(), gf.k(), z)
}

/// min over the rows u of |⟨z, u⟩| for row-major `rows` of width `k`.
#[inline]
pub(crate) fn min_abs_projection(rows: &[f64], k: usize, z: &[f64]) -> f64 {
    rows.chunks_exact(k)
        .map(|u| u.iter().zip(z).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(f64::INFINITY, f64::min)
}

/// Independent draws of M(Σ) realized as min_j |⟨z, u_j⟩|.
pub fn sample_min(gf: &GramFactor, count: usize, stream: RngStream) -> Vec<f64> {
    map_chunks(count, stream, |g, len| {
        let mut z = vec![0.0; gf.k()];
        (0..len).map(|_| draw_min(gf, g, &mut z)).collect::<Vec<_>>()
    })
    .concat()
}

/// Streaming mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Summary) -> Summary {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Summary { count, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::default();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub fn estimate_moment_from_factor(gf: &GramFactor, p: f64, count: usize, stream: RngStream) -> Result<MomentEstimate> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    if count < 2 {
        return Err(Error::InvalidArgument("moment estimation needs count >= 2".into()));
    }
    let summary = map_chunks(count, stream, |g, len| {
        let mut z = vec![0.0; gf.k()];
        (0..len).map(|_| draw_min(gf, g, &mut z).powf(p)).collect::<Summary>()
    })
    .into_iter()
    .fold(Summary::default(), Summary::merge);
    Ok(MomentEstimate { p, mean: summary.mean, std_error: summary.std_error(), samples: count })
}

/// Sample mean of M(Σ)^p with its CLT standard error.
pub fn estimate_moment(m: &CorrelationMatrix, p: f64, count: usize, stream: RngStream) -> Result<MomentEstimate> {
    estimate_moment_from_factor(&gram_factor(m)?, p, count, stream)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub thresholds: Vec<f64>,
    pub estimates: Vec<f64>,
    /// 99% normal-approximation half-widths.
    pub half_widths: Vec<f64>,
    pub samples: usize,
}

impl TailCurve {
    fn from_counts(thresholds: Vec<f64>, counts: &[u64], samples: usize) -> Self {
        let n = samples as f64;
        let estimates: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let half_widths = estimates.iter().map(|&p| Z_99 * binomial_se(p, samples)).collect();
        TailCurve { thresholds, estimates, half_widths, samples }
    }

    /// Standard errors (half-width / z₀.₉₉₅).
    pub fn std_errors(&self) -> Vec<f64> {
        self.estimates.iter().map(|&p| binomial_se(p, self.samples)).collect()
    }
}

fn binomial_se(p: f64, samples: usize) -> f64 {
    (p * (1.0 - p) / samples as f64).max(0.0).sqrt()
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument("thresholds must be finite and >= 0".into()));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("thresholds must be ascending".into()));
    }
    Ok(())
}

/// Empirical P[M ≥ t] at every threshold from one shared sample set.
pub fn estimate_tail_curve_from_factor(gf: &GramFactor, thresholds: &[f64], count: usize, stream: RngStream) -> Result<TailCurve> {
    check_thresholds(thresholds)?;
    if count < 100 {
        return Err(Error::InvalidArgument("tail curves need count >= 100".into()));
    }
    let per_chunk = map_chunks(count, stream, |g, len| {
        let mut z = vec![0.0; gf.k()];
        let mut counts = vec![0u64; thresholds.len()];
        for _ in 0..len {
            let m = draw_min(gf, g, &mut z);
            // Thresholds ascend, so M ≥ t holds for a prefix.
            let hits = thresholds.partition_point(|&t| m >= t);
            counts[..hits].iter_mut().for_each(|c| *c += 1);
        }
        counts
    });
    let mut counts = vec![0u64; thresholds.len()];
    for chunk in per_chunk {
        counts.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
    }
    Ok(TailCurve::from_counts(thresholds.to_vec(), &counts, count))
}

pub fn estimate_tail_curve(m: &CorrelationMatrix, thresholds: &[f64], count: usize, stream: RngStream) -> Result<TailCurve> {
    estimate_tail_curve_from_factor(&gram_factor(m)?, thresholds, count, stream)
}

/// Sub-stream keyed by the matrix entries: equal matrices share draws,
/// distinct matrices get unrelated streams.
pub fn matrix_stream(base: RngStream, m: &CorrelationMatrix) -> RngStream {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for v in m.entries().iter() {
        for byte in v.to_bits().to_le_bytes() {
            h = (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
        }
    }
    base.with_stream(base.stream_id.wrapping_add(h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub t: f64,
    pub candidate_tail: f64,
    pub candidate_se: f64,
    pub reference_tail: f64,
    pub reference_se: f64,
    /// (candidate − reference) / combined SE; positive is evidence against
    /// the candidate being dominated.
    pub z: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub rows: Vec<DominanceRow>,
    pub flagged: Vec<f64>,
    pub max_z: f64,
}

/// Tests P[M(candidate) ≥ t] ≤ P[M(reference) ≥ t] threshold by threshold,
/// flagging exceedances beyond [`DOMINANCE_GUARD`] combined standard errors.
pub fn dominance_check(
    candidate: &CorrelationMatrix,
    reference: &CorrelationMatrix,
    thresholds: &[f64],
    count: usize,
    stream: RngStream,
) -> Result<DominanceReport> {
    if candidate.n() != reference.n() {
        return Err(Error::DimensionMismatch(candidate.n(), reference.n()));
    }
    if count < 10_000 {
        return Err(Error::InvalidArgument("dominance checks need count >= 10^4".into()));
    }
    let cand = estimate_tail_curve(candidate, thresholds, count, matrix_stream(stream, candidate))?;
    let refc = estimate_tail_curve(reference, thresholds, count, matrix_stream(stream, reference))?;
    let (cand_se, ref_se) = (cand.std_errors(), refc.std_errors());
    let rows: Vec<DominanceRow> = thresholds
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let diff = cand.estimates[i] - refc.estimates[i];
            let se = cand_se[i].hypot(ref_se[i]);
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            DominanceRow {
                t,
                candidate_tail: cand.estimates[i],
                candidate_se: cand_se[i],
                reference_tail: refc.estimates[i],
                reference_se: ref_se[i],
                z,
                flagged: z > DOMINANCE_GUARD,
            }
        })
        .collect();
    let flagged = rows.iter().filter(|r| r.flagged).map(|r| r.t).collect();
    let max_z = rows.iter().map(|r| r.z).fold(f64::NEG_INFINITY, f64::max);
    Ok(DominanceReport { rows, flagged, max_z })
}

/// `steps` evenly spaced thresholds max/steps, 2·max/steps, ..., max.
pub fn threshold_grid(max: f64, steps: usize) -> Vec<f64> {
    (1..=steps).map(|i| max * i as f64 / steps as f64).collect()
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a − F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::{cosine_covariance, identity_covariance, simplex_covariance};

    fn stream() -> RngStream {
        RngStream::new(2024, 0)
    }

    #[test]
    fn summary_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let whole: Summary = xs.iter().copied().collect();
        let left: Summary = xs[..333].iter().copied().collect();
        let right: Summary = xs[333..].iter().copied().collect();
        let merged = left.merge(right);
        assert!((whole.mean - merged.mean).abs() < 1e-12);
        assert!((whole.variance() - merged.variance()).abs() < 1e-9);
    }

    #[test]
    fn sample_min_is_deterministic() {
        let gf = gram_factor(&cosine_covariance(4).unwrap()).unwrap();
        let a = sample_min(&gf, 50_000, stream());
        assert_eq!(a, sample_min(&gf, 50_000, stream()));
        assert_ne!(a, sample_min(&gf, 50_000, stream().with_stream(1)));
        assert!(a.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn moment_of_single_coordinate() {
        let est = estimate_moment(&identity_covariance(1).unwrap(), 2.0, 1_000_000, stream()).unwrap();
        assert!((est.mean - 1.0).abs() < 4.0 * est.std_error);
        assert!(estimate_moment(&identity_covariance(1).unwrap(), 0.0, 10, stream()).is_err());
        assert!(estimate_moment(&identity_covariance(1).unwrap(), 1.0, 1, stream()).is_err());
    }

    #[test]
    fn tail_curve_edges() {
        let m = simplex_covariance(4).unwrap();
        let c = estimate_tail_curve(&m, &[0.0, 0.5, 20.0], 10_000, stream()).unwrap();
        assert_eq!(c.estimates[0], 1.0);
        assert_eq!(c.half_widths[0], 0.0);
        assert_eq!(c.estimates[2], 0.0);
        assert!(estimate_tail_curve(&m, &[0.5, 0.1], 10_000, stream()).is_err());
        assert!(estimate_tail_curve(&m, &[0.5], 99, stream()).is_err());
    }

    #[test]
    fn dominance_self_comparison_is_clean() {
        let m = simplex_covariance(5).unwrap();
        let r = dominance_check(&m, &m, &threshold_grid(2.0, 20), 20_000, stream()).unwrap();
        assert!(r.flagged.is_empty());
        assert!(r.rows.iter().all(|row| row.candidate_tail == row.reference_tail));
        assert!(dominance_check(&m, &identity_covariance(4).unwrap(), &[0.1], 20_000, stream()).is_err());
        assert!(dominance_check(&m, &m, &[0.1], 100, stream()).is_err());
    }

    #[test]
    fn ks_statistics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_critical(100_000, 100_000, 0.001) - 1.9495 * (2.0f64 / 100_000.0).sqrt()).abs() < 1e-4);
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&u, |x| x) <= 0.0005 + 1e-12);
    }

    #[test]
    fn grid() {
        let g = threshold_grid(2.0, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.1).abs() < 1e-15 && g[19] == 2.0);
    }
}
