//! Black-box minimization of f_p(Σ) = E[M(Σ)^p] and g_t(Σ) = P[M(Σ) ≥ t]
//! over correlation matrices of bounded rank.
//!
//! A point in the search space is an n × k array of raw reals; rows are
//! normalized to unit vectors whose Gram matrix is the candidate Σ. The
//! objective is estimated on one fixed set of Gaussian draws per search
//! (common random numbers), so it is a deterministic function of the
//! parameters.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrmat::{canonical_distance_auto, cosine_covariance, gram_factor, simplex_covariance, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::montecarlo::{min_abs_projection, Summary};
use crate::rng::{map_chunks, RngStream};

/// Rows shorter than this are redrawn before normalization.
pub const DEGENERATE_ROW: f64 = 1e-12;
/// Differential evolution mutation factor.
pub const DE_MUTATION: f64 = 0.7;
/// Differential evolution crossover rate.
pub const DE_CROSSOVER: f64 = 0.9;
/// Central-difference step in raw parameter space.
pub const FD_STEP: f64 = 1e-3;
/// Canonical distance below which a run counts as having found Σ^cos.
pub const RECOVERY_THRESHOLD: f64 = 0.05;

const REDRAW_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    n: usize,
    rank: usize,
    /// Seed for redrawing degenerate rows.
    reseed: u64,
}

impl SearchSpace {
    pub fn new(n: usize, rank: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension { n, reason: "need n >= 1" });
        }
        if rank < 1 || rank > n {
            return Err(Error::InvalidRank { n, rank });
        }
        Ok(Self { n, rank, reseed: 0 })
    }

    pub fn with_reseed(self, reseed: u64) -> Self {
        Self { reseed, ..self }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn param_len(&self) -> usize {
        self.n * self.rank
    }

    /// Unit rows, row-major n × rank.
    pub fn decode_rows(&self, params: &[f64]) -> Result<Vec<f64>> {
        if params.len() != self.param_len() {
            return Err(Error::DimensionMismatch(self.param_len(), params.len()));
        }
        let k = self.rank;
        let mut rows = params.to_vec();
        for (i, row) in rows.chunks_mut(k).enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Evaluation(format!("row {i} has non-finite entries")));
            }
            let mut norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut attempt = 0;
            while norm < DEGENERATE_ROW {
                if attempt == REDRAW_ATTEMPTS {
                    return Err(Error::Evaluation(format!("row {i} stayed degenerate after redrawing")));
                }
                let mut g = RngStream::new(self.reseed, (i as u64) << 8 | attempt).generator();
                g.fill_normal(row);
                norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                attempt += 1;
            }
            row.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(rows)
    }

    pub fn decode(&self, params: &[f64]) -> Result<CorrelationMatrix> {
        CorrelationMatrix::from_unit_rows(&self.decode_rows(params)?, self.n, self.rank)
    }

    /// Parameters reproducing `m`; fails when rank(m) exceeds the space rank.
    pub fn encode(&self, m: &CorrelationMatrix) -> Result<Vec<f64>> {
        if m.n() != self.n {
            return Err(Error::DimensionMismatch(self.n, m.n()));
        }
        let gf = gram_factor(m)?;
        if gf.k() > self.rank {
            return Err(Error::InvalidRank { n: self.n, rank: gf.k() });
        }
        let mut params = Vec::with_capacity(self.param_len());
        for row in gf.rows() {
            params.extend_from_slice(row);
            params.extend(std::iter::repeat_n(0.0, self.rank - gf.k()));
        }
        Ok(params)
    }

    /// Uniform draw from [−1, 1]^{n·k}.
    pub fn random_params(&self, stream: RngStream) -> Vec<f64> {
        let mut g = stream.generator();
        (0..self.param_len()).map(|_| 2.0 * g.uniform() - 1.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// E[M^p]
    Moment { p: f64 },
    /// P[M ≥ t]
    Tail { t: f64 },
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::Moment { p } => write!(f, "moment:{p}"),
            ObjectiveKind::Tail { t } => write!(f, "tail:{t}"),
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("objective {s:?} is not moment:<p> or tail:<t>")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("objective parameter in {s:?} is not a number")))?;
        let parsed = match kind.trim() {
            "moment" => ObjectiveKind::Moment { p: value },
            "tail" => ObjectiveKind::Tail { t: value },
            other => return Err(Error::InvalidArgument(format!("unknown objective kind {other:?}"))),
        };
        parsed.check()?;
        Ok(parsed)
    }
}

impl ObjectiveKind {
    fn check(&self) -> Result<()> {
        match *self {
            ObjectiveKind::Moment { p } if !(p > 0.0) || !p.is_finite() => Err(Error::InvalidExponent(p)),
            ObjectiveKind::Tail { t } if !(t > 0.0) || !t.is_finite() => {
                Err(Error::InvalidArgument(format!("tail objective needs t > 0, got {t}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    fn score(&self, m: f64) -> f64 {
        match *self {
            ObjectiveKind::Moment { p } if p == 2.0 => m * m,
            ObjectiveKind::Moment { p } if p == 1.0 => m,
            ObjectiveKind::Moment { p } => m.powf(p),
            ObjectiveKind::Tail { t } => f64::from(u8::from(m >= t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub samples: usize,
    pub seed: u64,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, samples: usize, seed: u64) -> Result<Self> {
        kind.check()?;
        if samples < 2 {
            return Err(Error::InvalidArgument("objective needs at least 2 samples".into()));
        }
        Ok(Self { kind, samples, seed })
    }
}

/// Objective bound to one search space with its Gaussian draws fixed.
pub struct ObjectiveEvaluator {
    space: SearchSpace,
    objective: Objective,
    draws: Vec<f64>,
}

impl ObjectiveEvaluator {
    pub fn new(space: SearchSpace, objective: Objective) -> Result<Self> {
        objective.kind.check()?;
        let k = space.rank;
        let draws = map_chunks(objective.samples, RngStream::new(objective.seed, 0), |g, len| {
            let mut out = vec![0.0; len * k];
            g.fill_normal(&mut out);
            out
        })
        .concat();
        Ok(Self { space, objective, draws })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Objective value at `params`.
    pub fn evaluate(&self, params: &[f64]) -> Result<f64> {
        let rows = self.space.decode_rows(params)?;
        Ok(self.evaluate_rows(&rows))
    }

    /// Value and standard error at `params`.
    pub fn evaluate_with_error(&self, params: &[f64]) -> Result<(f64, f64)> {
        let rows = self.space.decode_rows(params)?;
        let k = self.space.rank;
        let summary: Summary = self
            .draws
            .chunks_exact(k)
            .map(|z| self.objective.kind.score(min_abs_projection(&rows, k, z)))
            .collect();
        Ok((self.evaluate_rows(&rows), summary.std_error()))
    }

    fn evaluate_rows(&self, rows: &[f64]) -> f64 {
        let k = self.space.rank;
        let kind = self.objective.kind;
        let total: f64 = self
            .draws
            .chunks_exact(k)
            .map(|z| kind.score(min_abs_projection(rows, k, z)))
            .sum();
        total / self.objective.samples as f64
    }

    /// Central finite-difference gradient with step `h`.
    pub fn gradient(&self, params: &[f64], h: f64) -> Result<Vec<f64>> {
        (0..params.len())
            .into_par_iter()
            .map(|i| {
                let mut x = params.to_vec();
                x[i] = params[i] + h;
                let plus = self.evaluate(&x)?;
                x[i] = params[i] - h;
                let minus = self.evaluate(&x)?;
                Ok((plus - minus) / (2.0 * h))
            })
            .collect()
    }
}

/// One-shot objective evaluation; builds the draws from `objective.seed`.
pub fn evaluate_objective(space: &SearchSpace, params: &[f64], objective: &Objective) -> Result<f64> {
    ObjectiveEvaluator::new(*space, *objective)?.evaluate(params)
}

/// Objective value of Σ^Δ with draws from the same seed, in its own
/// dimension n − 1. `None` for n < 2.
pub fn simplex_baseline(n: usize, objective: &Objective) -> Result<Option<f64>> {
    if n < 2 {
        return Ok(None);
    }
    let space = SearchSpace::new(n, n - 1)?;
    let params = space.encode(&simplex_covariance(n)?)?;
    Ok(Some(ObjectiveEvaluator::new(space, *objective)?.evaluate(&params)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    DifferentialEvolution,
    LocalSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub method: MethodName,
    pub n: usize,
    pub rank: usize,
    pub objective: Objective,
    pub best_params: Vec<f64>,
    pub best_matrix: CorrelationMatrix,
    pub best_value: f64,
    pub best_std_error: f64,
    /// Best value after each iteration; entry 0 is the starting point.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub distance_to_cosine: f64,
    pub distance_certified: bool,
    pub simplex_baseline: Option<f64>,
    /// Baseline minus best value; positive means Σ^Δ was beaten.
    pub improvement_over_simplex: Option<f64>,
    /// Gradient norm at the final point (local search only).
    pub final_gradient_norm: Option<f64>,
}

impl SearchReport {
    pub fn recovered_cosine(&self) -> bool {
        self.distance_to_cosine < RECOVERY_THRESHOLD
    }
}

fn finish_report(
    evaluator: &ObjectiveEvaluator,
    method: MethodName,
    best_params: Vec<f64>,
    best_value: f64,
    history: Vec<f64>,
    evaluations: usize,
    final_gradient_norm: Option<f64>,
) -> Result<SearchReport> {
    let space = evaluator.space;
    let best_matrix = space.decode(&best_params)?;
    let (_, best_std_error) = evaluator.evaluate_with_error(&best_params)?;
    let distance = canonical_distance_auto(&best_matrix, &cosine_covariance(space.n)?)?;
    let baseline = simplex_baseline(space.n, &evaluator.objective)?;
    Ok(SearchReport {
        method,
        n: space.n,
        rank: space.rank,
        objective: evaluator.objective,
        best_params,
        best_matrix,
        best_value,
        best_std_error,
        history,
        evaluations,
        distance_to_cosine: distance.distance,
        distance_certified: distance.certified,
        simplex_baseline: baseline,
        improvement_over_simplex: baseline.map(|b| b - best_value),
        final_gradient_norm,
    })
}

/// rand/1/bin differential evolution with F = [`DE_MUTATION`] and
/// CR = [`DE_CROSSOVER`]. Trial vectors are generated in index order from
/// `stream` and evaluated in parallel, so the run is deterministic.
pub fn differential_evolution(
    space: &SearchSpace,
    objective: &Objective,
    population: usize,
    generations: usize,
    stream: RngStream,
) -> Result<SearchReport> {
    if population < 4 {
        return Err(Error::InvalidArgument("differential evolution needs population >= 4".into()));
    }
    let space = space.with_reseed(stream.seed ^ stream.stream_id.rotate_left(32));
    let evaluator = ObjectiveEvaluator::new(space, *objective)?;
    let dim = space.param_len();
    let mut g = stream.generator();
    let mut pop: Vec<Vec<f64>> = (0..population)
        .map(|_| (0..dim).map(|_| 2.0 * g.uniform() - 1.0).collect())
        .collect();
    let mut values: Vec<f64> = pop.par_iter().map(|x| evaluator.evaluate(x)).collect::<Result<_>>()?;
    let mut evaluations = population;
    let best_of = |values: &[f64]| {
        (0..values.len()).fold(0, |b, i| if values[i] < values[b] { i } else { b })
    };
    let mut history = vec![values[best_of(&values)]];

    for _ in 0..generations {
        let trials: Vec<Vec<f64>> = (0..population)
            .map(|i| {
                let pick = |g: &mut crate::rng::Gaussians, taken: &[usize]| loop {
                    let r = g.below(population);
                    if !taken.contains(&r) {
                        return r;
                    }
                };
                let r1 = pick(&mut g, &[i]);
                let r2 = pick(&mut g, &[i, r1]);
                let r3 = pick(&mut g, &[i, r1, r2]);
                let forced = g.below(dim);
                (0..dim)
                    .map(|j| {
                        if j == forced || g.uniform() < DE_CROSSOVER {
                            pop[r1][j] + DE_MUTATION * (pop[r2][j] - pop[r3][j])
                        } else {
                            pop[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_values: Vec<f64> = trials.par_iter().map(|x| evaluator.evaluate(x)).collect::<Result<_>>()?;
        evaluations += population;
        for (i, (trial, value)) in trials.into_iter().zip(trial_values).enumerate() {
            if value <= values[i] {
                pop[i] = trial;
                values[i] = value;
            }
        }
        history.push(values[best_of(&values)]);
    }
    let best = best_of(&values);
    finish_report(&evaluator, MethodName::DifferentialEvolution, pop[best].clone(), values[best], history, evaluations, None)
}

/// BFGS on the common-random-number objective with central-difference
/// gradients (step [`FD_STEP`]) and Armijo backtracking.
pub fn local_search(
    space: &SearchSpace,
    objective: &Objective,
    start_params: &[f64],
    iterations: usize,
    stream: RngStream,
) -> Result<SearchReport> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("local search needs iterations >= 1".into()));
    }
    let space = space.with_reseed(stream.seed ^ stream.stream_id.rotate_left(32));
    let evaluator = ObjectiveEvaluator::new(space, *objective)?;
    let dim = space.param_len();
    if start_params.len() != dim {
        return Err(Error::DimensionMismatch(dim, start_params.len()));
    }
    let finite = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("non-finite {what}: {v}")))
        }
    };
    let mut x = start_params.to_vec();
    let mut fx = finite(evaluator.evaluate(&x)?, "objective at start")?;
    let mut grad = evaluator.gradient(&x, FD_STEP)?;
    let mut evaluations = 1 + 2 * dim;
    let mut inv_hessian = identity(dim);
    let mut history = vec![fx];

    for _ in 0..iterations {
        if norm(&grad) < 1e-10 {
            break;
        }
        let mut step = None;
        for reset in [false, true] {
            if reset {
                inv_hessian = identity(dim);
            }
            let direction: Vec<f64> = mat_vec(&inv_hessian, &grad).iter().map(|v| -v).collect();
            let slope = dot(&grad, &direction);
            if slope >= 0.0 {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..40 {
                let candidate: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + alpha * d).collect();
                let fc = evaluator.evaluate(&candidate)?;
                evaluations += 1;
                if fc.is_finite() && fc <= fx + 1e-4 * alpha * slope {
                    step = Some((candidate, fc));
                    break;
                }
                alpha *= 0.5;
            }
            if step.is_some() {
                break;
            }
        }
        let Some((x_new, f_new)) = step else {
            break;
        };
        let grad_new = evaluator.gradient(&x_new, FD_STEP)?;
        evaluations += 2 * dim;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        bfgs_update(&mut inv_hessian, &s, &y);
        x = x_new;
        fx = finite(f_new, "objective")?;
        grad = grad_new;
        history.push(fx);
    }
    let grad_norm = norm(&grad);
    finish_report(&evaluator, MethodName::LocalSearch, x, fx, history, evaluations, Some(grad_norm))
}

fn identity(dim: usize) -> Vec<Vec<f64>> {
    (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, skipped when the curvature
/// condition sᵀy > 0 fails.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let sy = dot(s, y);
    if sy <= 1e-14 {
        return;
    }
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let dim = s.len();
    for i in 0..dim {
        for j in 0..dim {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Method {
    De { population: usize, generations: usize },
    Local { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignCell {
    pub n: usize,
    pub rank: usize,
    pub objective: ObjectiveKind,
    pub samples: usize,
    pub method: Method,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub cells: Vec<CampaignCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub best_value: f64,
    pub distance_to_cosine: f64,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: CampaignCell,
    pub runs: Vec<RunSummary>,
    pub best_value: Option<f64>,
    pub mean_best_value: Option<f64>,
    pub recovered_fraction: Option<f64>,
    /// Fraction of runs strictly below the simplex baseline.
    pub beat_simplex_fraction: Option<f64>,
    pub simplex_baseline: Option<f64>,
    pub improvement_over_simplex: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub cells: Vec<CellSummary>,
}

/// Runs every (cell, seed) pair. Each seed drives both the objective draws
/// and the optimizer stream.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignSummary> {
    let mut cells = Vec::with_capacity(config.cells.len());
    for cell in &config.cells {
        let space = SearchSpace::new(cell.n, cell.rank)?;
        let mut runs = Vec::with_capacity(cell.seeds.len());
        let mut baseline = None;
        for &seed in &cell.seeds {
            let objective = Objective::new(cell.objective, cell.samples, seed)?;
            let stream = RngStream::new(seed, 1);
            let report = match cell.method {
                Method::De { population, generations } => {
                    differential_evolution(&space, &objective, population, generations, stream)?
                }
                Method::Local { iterations } => {
                    let start = space.random_params(stream.with_stream(2));
                    local_search(&space, &objective, &start, iterations, stream)?
                }
            };
            baseline = baseline.or(report.simplex_baseline);
            runs.push(RunSummary {
                seed,
                best_value: report.best_value,
                distance_to_cosine: report.distance_to_cosine,
                recovered: report.recovered_cosine(),
            });
        }
        let count = runs.len() as f64;
        let (best_value, mean_best_value, recovered_fraction, beat) = if runs.is_empty() {
            (None, None, None, None)
        } else {
            let best = runs.iter().map(|r| r.best_value).fold(f64::INFINITY, f64::min);
            let mean = runs.iter().map(|r| r.best_value).sum::<f64>() / count;
            let recovered = runs.iter().filter(|r| r.recovered).count() as f64 / count;
            let beat = baseline.map(|b| runs.iter().filter(|r| r.best_value < b).count() as f64 / count);
            (Some(best), Some(mean), Some(recovered), beat)
        };
        cells.push(CellSummary {
            cell: cell.clone(),
            runs,
            best_value,
            mean_best_value,
            recovered_fraction,
            beat_simplex_fraction: beat,
            simplex_baseline: baseline,
            improvement_over_simplex: baseline.zip(best_value).map(|(b, v)| b - v),
        });
    }
    Ok(CampaignSummary { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::{identity_covariance, SignedPermutation};

    #[test]
    fn objective_parsing() {
        assert_eq!("moment:2".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::Moment { p: 2.0 });
        assert_eq!("tail:0.5".parse::<ObjectiveKind>().unwrap(), ObjectiveKind::Tail { t: 0.5 });
        assert!("moment:0".parse::<ObjectiveKind>().is_err());
        assert!("tail:-1".parse::<ObjectiveKind>().is_err());
        assert!("median:1".parse::<ObjectiveKind>().is_err());
        assert!("moment".parse::<ObjectiveKind>().is_err());
        assert_eq!(ObjectiveKind::Moment { p: 2.0 }.to_string(), "moment:2");
    }

    #[test]
    fn decode_redraws_zero_rows() {
        let space = SearchSpace::new(3, 2).unwrap().with_reseed(5);
        let rows = space.decode_rows(&[0.0, 0.0, 3.0, 4.0, 0.0, -2.0]).unwrap();
        assert!((rows[0].hypot(rows[1]) - 1.0).abs() < 1e-15);
        assert_eq!(&rows[2..4], &[0.6, 0.8]);
        assert_eq!(rows, space.decode_rows(&[0.0, 0.0, 3.0, 4.0, 0.0, -2.0]).unwrap());
        assert!(space.decode_rows(&[f64::NAN, 0.0, 1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(space.decode_rows(&[1.0]).is_err());
        assert!(SearchSpace::new(3, 4).is_err());
    }

    #[test]
    fn encode_round_trip() {
        let space = SearchSpace::new(4, 2).unwrap();
        let c = cosine_covariance(4).unwrap();
        let back = space.decode(&space.encode(&c).unwrap()).unwrap();
        assert!(back.frobenius_distance(&c) < 1e-12);
        assert!(space.encode(&identity_covariance(4).unwrap()).is_err());
    }

    #[test]
    fn single_coordinate_objective() {
        let space = SearchSpace::new(1, 1).unwrap();
        let objective = Objective::new(ObjectiveKind::Moment { p: 2.0 }, 200_000, 3).unwrap();
        let v = evaluate_objective(&space, &[1.0], &objective).unwrap();
        assert!((v - 1.0).abs() < 0.02);
        assert_eq!(v, evaluate_objective(&space, &[-7.0], &objective).unwrap());
    }

    #[test]
    fn objective_is_symmetric_under_signed_permutations() {
        let space = SearchSpace::new(5, 3).unwrap();
        let objective = Objective::new(ObjectiveKind::Moment { p: 1.5 }, 20_000, 9).unwrap();
        let eval = ObjectiveEvaluator::new(space, objective).unwrap();
        let tail = ObjectiveEvaluator::new(space, Objective { kind: ObjectiveKind::Tail { t: 0.3 }, ..objective }).unwrap();
        for seed in 0..20 {
            let params = space.random_params(RngStream::new(seed, 0));
            let sp = SignedPermutation::random(5, RngStream::new(seed, 1));
            let image = sp.apply_rows(&params, 3);
            assert_eq!(eval.evaluate(&params).unwrap(), eval.evaluate(&image).unwrap());
            assert_eq!(tail.evaluate(&params).unwrap(), tail.evaluate(&image).unwrap());
        }
    }

    #[test]
    fn de_with_zero_generations_reports_initial_best() {
        let space = SearchSpace::new(3, 2).unwrap();
        let objective = Objective::new(ObjectiveKind::Moment { p: 2.0 }, 5_000, 1).unwrap();
        let stream = RngStream::new(4, 0);
        let report = differential_evolution(&space, &objective, 4, 0, stream).unwrap();
        let eval = ObjectiveEvaluator::new(space, objective).unwrap();
        let mut g = stream.generator();
        let initial: Vec<f64> = (0..4)
            .map(|_| {
                let x: Vec<f64> = (0..6).map(|_| 2.0 * g.uniform() - 1.0).collect();
                eval.evaluate(&x).unwrap()
            })
            .collect();
        assert_eq!(report.history, vec![initial.iter().copied().fold(f64::INFINITY, f64::min)]);
        assert_eq!(report.best_value, report.history[0]);
        assert!(differential_evolution(&space, &objective, 3, 1, stream).is_err());
    }

    #[test]
    fn empty_campaign() {
        let summary = run_campaign(&CampaignConfig {
            cells: vec![CampaignCell {
                n: 4,
                rank: 2,
                objective: ObjectiveKind::Moment { p: 2.0 },
                samples: 1000,
                method: Method::De { population: 8, generations: 2 },
                seeds: vec![],
            }],
        })
        .unwrap();
        assert!(summary.cells[0].runs.is_empty());
        assert_eq!(summary.cells[0].best_value, None);
        assert!(run_campaign(&CampaignConfig { cells: vec![] }).unwrap().cells.is_empty());
    }
}
