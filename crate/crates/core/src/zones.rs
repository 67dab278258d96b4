//! Spherical zones Z(u, α) = {v ∈ S^{d−1} : |⟨v, u⟩| ≤ sin α} and measures
//! of their unions under the normalized surface measure σ_{d−1}.
//!
//! Also hosts the slab/zone decomposition: with r = ‖g‖ independent of
//! g/‖g‖, P[M(Σ) ≤ t] is the probability that g/‖g‖ falls in the union of
//! zones of half-width [`alpha_of`]`(t, r)` around the Gram vectors of Σ.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::corrmat::GramFactor;
use crate::error::{Error, Result};
use crate::montecarlo::{min_abs_projection, Summary, Z_99};
use crate::quad::{self, MAX_EVALUATIONS};
use crate::rng::{map_chunks, RngStream};

/// Arc gaps narrower than this (radians) count as covered in the exact
/// circle computation, absorbing rounding in the arc endpoints.
pub const ARC_MERGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    d: usize,
    alpha: f64,
    centers: Vec<Vec<f64>>,
}

impl ZoneConfig {
    pub fn new(d: usize, alpha: f64, centers: Vec<Vec<f64>>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension { n: d, reason: "zones need d >= 2" });
        }
        check_alpha(alpha)?;
        for (j, c) in centers.iter().enumerate() {
            if c.len() != d {
                return Err(Error::DimensionMismatch(d, c.len()));
            }
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("center {j} has norm {norm}")));
            }
        }
        Ok(Self { d, alpha, centers })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }

    fn flat_centers(&self) -> Vec<f64> {
        self.centers.concat()
    }

    /// Inner-product bound sin α; infinite at α = π/2 so that the whole
    /// sphere counts regardless of rounding in |⟨v, u⟩|.
    fn bound(&self) -> f64 {
        zone_bound(self.alpha)
    }
}

fn zone_bound(alpha: f64) -> f64 {
    if alpha >= FRAC_PI_2 {
        f64::INFINITY
    } else {
        alpha.sin()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, pi/2]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    /// 99% half-width; zero for exact values.
    pub half_width: f64,
    pub method: MeasureMethod,
}

impl MeasureEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, half_width: 0.0, method: MeasureMethod::Exact }
    }

    fn from_hits(hits: u64, count: usize) -> Self {
        let value = hits as f64 / count as f64;
        let se = (value * (1.0 - value) / count as f64).sqrt();
        Self { value, half_width: Z_99 * se, method: MeasureMethod::MonteCarlo }
    }

    pub fn std_error(&self) -> f64 {
        self.half_width / Z_99
    }
}

/// Centers v_j = (cos((j−1)π/n), sin((j−1)π/n), 0, ..., 0), j = 1..n.
pub fn evenly_spaced_config(n: usize, d: usize, alpha: f64) -> Result<ZoneConfig> {
    if n == 0 {
        return Err(Error::InvalidDimension { n, reason: "need n >= 1" });
    }
    if d < 2 {
        return Err(Error::InvalidDimension { n: d, reason: "zones need d >= 2" });
    }
    let centers = (0..n)
        .map(|j| {
            let angle = j as f64 * PI / n as f64;
            let mut c = vec![0.0; d];
            (c[1], c[0]) = angle.sin_cos();
            c
        })
        .collect();
    ZoneConfig::new(d, alpha, centers)
}

/// σ_{d−1}(Z(u, α)) for a single zone: the latitude density is
/// proportional to cos^{d−2} φ in the angle φ from the equator.
pub fn single_zone_measure(d: usize, alpha: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension { n: d, reason: "zones need d >= 2" });
    }
    check_alpha(alpha)?;
    let power = (d - 2) as i32;
    let density = |phi: f64| phi.cos().powi(power);
    let part = quad::integrate(density, 0.0, alpha, 1e-15, MAX_EVALUATIONS).value;
    let whole = quad::integrate(density, 0.0, FRAC_PI_2, 1e-15, MAX_EVALUATIONS).value;
    Ok((part / whole).clamp(0.0, 1.0))
}

/// Fraction of uniform sphere points within some zone of `config`.
pub fn union_measure_mc(config: &ZoneConfig, count: usize, stream: RngStream) -> Result<MeasureEstimate> {
    if config.centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if count < 1000 {
        return Err(Error::InvalidArgument("union measure needs count >= 10^3".into()));
    }
    let centers = config.flat_centers();
    let (d, bound) = (config.d, config.bound());
    let hits: u64 = map_chunks(count, stream, |g, len| {
        let mut v = vec![0.0; d];
        (0..len)
            .filter(|_| {
                g.unit_vector(&mut v);
                min_abs_projection(&centers, d, &v) <= bound
            })
            .count() as u64
    })
    .into_iter()
    .sum();
    Ok(MeasureEstimate::from_hits(hits, count))
}

/// Union measures for several half-widths on one shared point set, so the
/// result is pointwise monotone in α.
pub fn union_measure_mc_alphas(config: &ZoneConfig, alphas: &[f64], count: usize, stream: RngStream) -> Result<Vec<MeasureEstimate>> {
    if config.centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    let centers = config.flat_centers();
    let d = config.d;
    let bounds: Vec<f64> = alphas.iter().map(|&a| zone_bound(a)).collect();
    let per_chunk = map_chunks(count, stream, |g, len| {
        let mut v = vec![0.0; d];
        let mut hits = vec![0u64; bounds.len()];
        for _ in 0..len {
            g.unit_vector(&mut v);
            let m = min_abs_projection(&centers, d, &v);
            for (h, &b) in hits.iter_mut().zip(&bounds) {
                *h += u64::from(m <= b);
            }
        }
        hits
    });
    let mut hits = vec![0u64; bounds.len()];
    for chunk in per_chunk {
        hits.iter_mut().zip(chunk).for_each(|(a, b)| *a += b);
    }
    Ok(hits.into_iter().map(|h| MeasureEstimate::from_hits(h, count)).collect())
}

/// Exact union measure on the circle. Zone j is the pair of antipodal arcs
/// of half-width α centred perpendicular to u_j, so the union is computed
/// as a merged arc set on the half-circle [0, π).
pub fn union_measure_d2_exact(config: &ZoneConfig) -> Result<MeasureEstimate> {
    if config.d != 2 {
        return Err(Error::InvalidDimension { n: config.d, reason: "exact union needs d = 2" });
    }
    if config.centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    let alpha = config.alpha;
    if alpha >= FRAC_PI_2 {
        return Ok(MeasureEstimate::exact(1.0));
    }
    let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(2 * config.centers.len());
    for c in &config.centers {
        let mid = (c[1].atan2(c[0]) + FRAC_PI_2).rem_euclid(PI);
        let (start, end) = (mid - alpha, mid + alpha);
        if start < 0.0 {
            arcs.push((start + PI, PI));
            arcs.push((0.0, end));
        } else if end > PI {
            arcs.push((start, PI));
            arcs.push((0.0, end - PI));
        } else {
            arcs.push((start, end));
        }
    }
    arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in arcs {
        match merged.last_mut() {
            Some(last) if s <= last.1 + ARC_MERGE_EPS => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    let mut uncovered = 0.0;
    for w in merged.windows(2) {
        uncovered += w[1].0 - w[0].1;
    }
    let wrap = merged[0].0 + (PI - merged[merged.len() - 1].1);
    if wrap > ARC_MERGE_EPS {
        uncovered += wrap;
    }
    Ok(MeasureEstimate::exact((1.0 - uncovered / PI).clamp(0.0, 1.0)))
}

/// Zone half-width that turns the sphere of radius r into the slab union
/// at level t: π/2 when r ≤ t, arcsin(t/r) otherwise.
pub fn alpha_of(t: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius r = {r} must be > 0")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("threshold t = {t} must be >= 0")));
    }
    Ok(if r <= t { FRAC_PI_2 } else { (t / r).asin() })
}

/// Estimates P[M(Σ) ≤ t] by drawing g ~ N(0, I_k) and testing whether
/// g/‖g‖ lies in ∪_j Z(u_j, alpha_of(t, ‖g‖)).
pub fn slab_prob_via_zones(gf: &GramFactor, t: f64, count: usize, stream: RngStream) -> Result<MeasureEstimate> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("threshold t = {t} must be > 0")));
    }
    if count < 1000 {
        return Err(Error::InvalidArgument("count must be >= 10^3".into()));
    }
    let k = gf.k();
    let hits: u64 = map_chunks(count, stream, |g, len| {
        let mut v = vec![0.0; k];
        let mut hits = 0u64;
        for _ in 0..len {
            g.fill_normal(&mut v);
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r == 0.0 {
                hits += 1;
                continue;
            }
            v.iter_mut().for_each(|x| *x /= r);
            let alpha = if r <= t { FRAC_PI_2 } else { (t / r).asin() };
            if min_abs_projection(gf.as_slice(), k, &v) <= zone_bound(alpha) {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    Ok(MeasureEstimate::from_hits(hits, count))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTrial {
    pub trial: usize,
    pub measure: f64,
    /// Paired z-statistic of (random − evenly spaced) on shared points.
    pub z: f64,
    pub centers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub samples: usize,
    pub even_measure: f64,
    pub even_half_width: f64,
    pub max_random: f64,
    pub max_trial: usize,
    pub max_config: Vec<Vec<f64>>,
    pub exceedance_z: f64,
    pub trials: Vec<ScanTrial>,
}

impl ScanReport {
    /// Trials whose measure exceeds the evenly spaced one by more than
    /// `guard` paired standard errors.
    pub fn exceedances(&self, guard: f64) -> Vec<&ScanTrial> {
        self.trials.iter().filter(|t| t.z > guard).collect()
    }
}

/// Compares random center configurations against the evenly spaced one.
/// All configurations are measured on the same sphere points.
pub fn zone_conjecture_scan(n: usize, d: usize, alpha: f64, trials: usize, count: usize, stream: RngStream) -> Result<ScanReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if count < 1000 {
        return Err(Error::InvalidArgument("count must be >= 10^3".into()));
    }
    let even = evenly_spaced_config(n, d, alpha)?;
    let even_centers = even.flat_centers();
    let bound = even.bound();
    let even_estimate = union_measure_mc(&even, count, stream)?;

    let mut results = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut g = stream.with_stream(stream.stream_id.wrapping_add(1 + trial as u64)).generator();
        let centers: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut c = vec![0.0; d];
                g.unit_vector(&mut c);
                c
            })
            .collect();
        let flat = centers.concat();
        let paired = map_chunks(count, stream, |g, len| {
            let mut v = vec![0.0; d];
            let mut diff = Summary::default();
            let mut hits = 0u64;
            for _ in 0..len {
                g.unit_vector(&mut v);
                let random_hit = min_abs_projection(&flat, d, &v) <= bound;
                let even_hit = min_abs_projection(&even_centers, d, &v) <= bound;
                hits += u64::from(random_hit);
                diff.push(f64::from(u8::from(random_hit)) - f64::from(u8::from(even_hit)));
            }
            (hits, diff)
        });
        let (hits, diff) = paired
            .into_iter()
            .fold((0u64, Summary::default()), |(h, s), (h2, s2)| (h + h2, s.merge(s2)));
        let se = diff.std_error();
        let z = if se > 0.0 { diff.mean / se } else { 0.0 };
        results.push(ScanTrial { trial, measure: hits as f64 / count as f64, z, centers });
    }
    let best = results
        .iter()
        .max_by(|a, b| a.measure.total_cmp(&b.measure).then(b.trial.cmp(&a.trial)))
        .expect("trials >= 1");
    if best.z > 4.0 {
        log::warn!(
            "random configuration {} exceeds the evenly spaced union measure by z = {:.2}",
            best.trial,
            best.z
        );
    }
    Ok(ScanReport {
        n,
        d,
        alpha,
        samples: count,
        even_measure: even_estimate.value,
        even_half_width: even_estimate.half_width,
        max_random: best.measure,
        max_trial: best.trial,
        max_config: best.centers.clone(),
        exceedance_z: best.z,
        trials: results,
    })
}
