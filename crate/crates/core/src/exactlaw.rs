//! Exact law of M(Σ^cos).
//!
//! With r² ~ χ²(2) and θ ~ Unif[0, π/(2n)] independent, M(Σ^cos) has the
//! law of r·sin θ. Tails and moments reduce to one-dimensional integrals
//! over θ, evaluated here by adaptive quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, QuadratureResult, MAX_EVALUATIONS};
use crate::rng::{map_chunks, RngStream};

/// Absolute quadrature target for tails and moments.
pub const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosineLaw {
    n: usize,
}

impl CosineLaw {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension { n, reason: "need n >= 1" });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Upper end of the angle range, π/(2n).
    pub fn max_angle(&self) -> f64 {
        PI / (2.0 * self.n as f64)
    }

    /// P[M ≥ t] together with the quadrature diagnostics.
    pub fn tail_quadrature(&self, t: f64) -> QuadratureResult {
        let scale = 1.0 / self.max_angle();
        if t == 0.0 {
            return QuadratureResult { value: 1.0, error_estimate: 0.0, evaluations: 0 };
        }
        let half_t2 = 0.5 * t * t;
        let integrand = |theta: f64| {
            if theta <= 0.0 {
                return 0.0;
            }
            let s = theta.sin();
            (-half_t2 / (s * s)).exp()
        };
        // Scale the target so the normalized result meets QUAD_TOL.
        let mut r = quad::integrate(integrand, 0.0, self.max_angle(), QUAD_TOL / scale, MAX_EVALUATIONS);
        r.value = (r.value * scale).clamp(0.0, 1.0);
        r.error_estimate *= scale;
        r
    }

    pub fn tail(&self, t: f64) -> f64 {
        self.tail_quadrature(t).value
    }

    pub fn moment_quadrature(&self, p: f64) -> Result<QuadratureResult> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        let prefactor = 2f64.powf(p / 2.0) * quad::gamma(1.0 + p / 2.0) / self.max_angle();
        let mut r = quad::integrate(|theta: f64| theta.sin().powf(p), 0.0, self.max_angle(), QUAD_TOL / prefactor, MAX_EVALUATIONS);
        r.value *= prefactor;
        r.error_estimate *= prefactor;
        Ok(r)
    }

    pub fn moment(&self, p: f64) -> Result<f64> {
        Ok(self.moment_quadrature(p)?.value)
    }

    /// E[M²] = 1 − n·sin(π/n)/π.
    pub fn moment_p2(&self) -> f64 {
        let n = self.n as f64;
        1.0 - n * (PI / n).sin() / PI
    }

    /// Draws r·sin θ with r = √(−2 ln U) and θ = U'·π/(2n).
    pub fn sample(&self, count: usize, stream: RngStream) -> Vec<f64> {
        let max_angle = self.max_angle();
        map_chunks(count, stream, |g, len| {
            (0..len)
                .map(|_| {
                    let r = (-2.0 * g.uniform_open0().ln()).sqrt();
                    let theta = g.uniform() * max_angle;
                    r * theta.sin()
                })
                .collect::<Vec<_>>()
        })
        .concat()
    }
}

pub fn cos_tail(n: usize, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("threshold t = {t} must be >= 0")));
    }
    Ok(CosineLaw::new(n)?.tail(t))
}

pub fn cos_moment(n: usize, p: f64) -> Result<f64> {
    CosineLaw::new(n)?.moment(p)
}

pub fn cos_moment_p2(n: usize) -> Result<f64> {
    Ok(CosineLaw::new(n)?.moment_p2())
}

pub fn sample_cos_min(n: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    Ok(CosineLaw::new(n)?.sample(count, RngStream::new(seed, 0)))
}

/// P[min_i |g_i| ≥ t] for independent standard coordinates: the n = 1
/// cosine tail raised to the n-th power.
pub fn independent_tail(n: usize, t: f64) -> Result<f64> {
    Ok(cos_tail(1, t)?.powi(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2(1 − Φ(x)) = 1 − erf(x/√2) from the Maclaurin series of erf.
    fn two_sided_normal_tail(x: f64) -> f64 {
        let y = x / 2f64.sqrt();
        let mut term = y;
        let mut sum = y;
        for k in 1..200 {
            term *= -y * y / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        1.0 - 2.0 / PI.sqrt() * sum
    }

    #[test]
    fn tail_examples() {
        assert_eq!(cos_tail(4, 0.0).unwrap(), 1.0);
        let oracle = two_sided_normal_tail(1.0);
        assert!((oracle - 0.317_310_507_86).abs() < 1e-10);
        assert!((cos_tail(1, 1.0).unwrap() - oracle).abs() < 1e-11);
        for t in [0.1, 0.5, 2.0, 3.5] {
            assert!((cos_tail(1, t).unwrap() - two_sided_normal_tail(t)).abs() < 1e-11, "t={t}");
        }
        assert!(cos_tail(4, -1.0).is_err());
        assert!(cos_tail(0, 1.0).is_err());
    }

    #[test]
    fn tail_shape() {
        for n in [1, 2, 4, 8, 16, 32] {
            assert!(cos_tail(n, 10.0).unwrap() < 1e-12);
        }
        for n in [1, 2, 4, 8] {
            let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.03).collect();
            let vals: Vec<f64> = grid.iter().map(|&t| cos_tail(n, t).unwrap()).collect();
            assert_eq!(vals[0], 1.0);
            assert!(vals.windows(2).all(|w| w[1] < w[0]), "n={n}");
        }
    }

    #[test]
    fn moment_examples() {
        let m = cos_moment(4, 2.0).unwrap();
        assert!((0.099683..=0.099684).contains(&m));
        assert!((cos_moment(1, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(cos_moment(4, 0.0), Err(Error::InvalidExponent(_))));
        assert!(matches!(cos_moment(4, -1.0), Err(Error::InvalidExponent(_))));
        // E|g| for n = 1 is √(2/π).
        assert!((cos_moment(1, 1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_p2() {
        assert!((cos_moment_p2(4).unwrap() - (1.0 - 2.0 * 2f64.sqrt() / PI)).abs() < 1e-15);
        assert!((cos_moment_p2(1).unwrap() - 1.0).abs() < 1e-15);
        assert!((cos_moment_p2(2).unwrap() - 0.363_380_227_632_418_6).abs() < 1e-15);
        for n in 1..=32 {
            assert!((cos_moment(n, 2.0).unwrap() - cos_moment_p2(n).unwrap()).abs() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn tail_integrates_to_moment() {
        for n in [2, 4, 8] {
            let law = CosineLaw::new(n).unwrap();
            for p in [1.0, 2.0] {
                let outer = quad::integrate(|t: f64| p * t.powf(p - 1.0) * law.tail(t), 0.0, 10.0, 1e-11, MAX_EVALUATIONS);
                let direct = law.moment(p).unwrap();
                assert!((outer.value - direct).abs() < 1e-8, "n={n} p={p}: {} vs {direct}", outer.value);
            }
        }
    }

    #[test]
    fn sampler_basics() {
        let s = sample_cos_min(4, 1_000_000, 3).unwrap();
        assert!(s.iter().all(|&x| x >= 0.0));
        let n = s.len() as f64;
        let sq: Vec<f64> = s.iter().map(|x| x * x).collect();
        let mean = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - cos_moment_p2(4).unwrap()).abs() < 4.0 * (var / n).sqrt());
        assert_eq!(s[..100], sample_cos_min(4, 100, 3).unwrap()[..]);
        assert!(sample_cos_min(4, 0, 3).is_err());
    }

    #[test]
    fn independent_tail_matches_product() {
        let t = 0.4;
        let single = two_sided_normal_tail(t);
        assert!((independent_tail(3, t).unwrap() - single.powi(3)).abs() < 1e-11);
    }
}
