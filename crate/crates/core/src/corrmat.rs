//! Correlation matrices, their Gram factors, and comparison up to the
//! signed-permutation symmetry under which the law of M(Σ) is invariant.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance on the smallest eigenvalue (and on entry range).
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues at or below this are dropped when factoring.
pub const RANK_TOL: f64 = 1e-9;
/// Largest n for which [`canonical_distance`] enumerates the full group.
pub const EXHAUSTIVE_LIMIT: usize = 10;
const SLOW_PATH_FROM: usize = 9;

/// Symmetric positive semidefinite matrix with exactly unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

/// Wire format: `{"n": int, "entries": [[float, ...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub entries: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for CorrelationMatrix {
    type Error = Error;

    fn try_from(raw: MatrixJson) -> Result<Self> {
        if raw.entries.len() != raw.n {
            return Err(Error::DimensionMismatch(raw.n, raw.entries.len()));
        }
        CorrelationMatrix::from_rows(&raw.entries)
    }
}

impl From<CorrelationMatrix> for MatrixJson {
    fn from(m: CorrelationMatrix) -> Self {
        MatrixJson { n: m.n(), entries: m.to_rows() }
    }
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let report = validate(&entries);
        if report.valid {
            Ok(Self { entries })
        } else {
            Err(Error::InvalidMatrix(report))
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDimension { n, reason: "matrix must be non-empty" });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(n, bad.len()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Gram matrix of `n` unit rows of length `k`, stored row-major.
    /// The diagonal is set to exactly 1 and the result is exactly symmetric.
    pub fn from_unit_rows(rows: &[f64], n: usize, k: usize) -> Result<Self> {
        assert_eq!(rows.len(), n * k);
        let mut m = DMatrix::from_element(n, n, 1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let dot: f64 = rows[i * k..(i + 1) * k]
                    .iter()
                    .zip(&rows[j * k..(j + 1) * k])
                    .map(|(a, b)| a * b)
                    .sum();
                m[(i, j)] = dot;
                m[(j, i)] = dot;
            }
        }
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.entries[(i, j)]).collect())
            .collect()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.entries)
    }

    /// Row-major `(i, j, value)` triples with 1-based indices.
    pub fn csv_triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| (0..n).map(move |j| (i + 1, j + 1, self.entries[(i, j)])))
    }

    pub fn frobenius_distance(&self, other: &CorrelationMatrix) -> f64 {
        (&self.entries - &other.entries).norm()
    }
}

/// Σ^cos with entries cos(π(i − j)/n).
pub fn cosine_covariance(n: usize) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension { n, reason: "need n >= 1" });
    }
    let step = PI / n as f64;
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            (step * (i as f64 - j as f64).abs()).cos()
        }
    });
    CorrelationMatrix::new(m)
}

/// Gram matrix of the regular simplex in R^{n−1}: off-diagonal −1/(n−1).
pub fn simplex_covariance(n: usize) -> Result<CorrelationMatrix> {
    if n < 2 {
        return Err(Error::InvalidDimension { n, reason: "simplex covariance needs n >= 2" });
    }
    let off = -1.0 / (n as f64 - 1.0);
    CorrelationMatrix::new(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { off }))
}

pub fn identity_covariance(n: usize) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension { n, reason: "need n >= 1" });
    }
    CorrelationMatrix::new(DMatrix::identity(n, n))
}

/// Gram matrix of `n` independent uniform unit vectors in R^rank.
pub fn random_correlation(n: usize, rank: usize, seed: u64) -> Result<CorrelationMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension { n, reason: "need n >= 1" });
    }
    if rank < 1 || rank > n {
        return Err(Error::InvalidRank { n, rank });
    }
    let mut g = RngStream::new(seed, 0).generator();
    let mut rows = vec![0.0; n * rank];
    for row in rows.chunks_mut(rank) {
        g.unit_vector(row);
    }
    CorrelationMatrix::from_unit_rows(&rows, n, rank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub square: bool,
    /// First diagonal index whose entry is not exactly 1.
    pub diagonal_violation: Option<usize>,
    /// First (i, j) with entries[i][j] != entries[j][i].
    pub symmetry_violation: Option<(usize, usize)>,
    /// First (i, j) outside [−1 − tol, 1 + tol].
    pub range_violation: Option<(usize, usize)>,
    pub min_eigenvalue: f64,
    pub psd: bool,
    pub valid: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return write!(f, "valid {}x{} correlation matrix", self.n, self.n);
        }
        let mut problems = Vec::new();
        if !self.square {
            problems.push("not square".to_string());
        }
        if let Some(i) = self.diagonal_violation {
            problems.push(format!("diagonal entry {i} is not 1"));
        }
        if let Some((i, j)) = self.symmetry_violation {
            problems.push(format!("asymmetric at ({i}, {j})"));
        }
        if let Some((i, j)) = self.range_violation {
            problems.push(format!("entry ({i}, {j}) outside [-1, 1]"));
        }
        if !self.psd {
            problems.push(format!("minimum eigenvalue {:e} below -{PSD_TOL:e}", self.min_eigenvalue));
        }
        write!(f, "{}", problems.join("; "))
    }
}

/// Checks unit diagonal, exact symmetry, entry range and positive
/// semidefiniteness (smallest eigenvalue >= −[`PSD_TOL`]).
pub fn validate(m: &DMatrix<f64>) -> ValidationReport {
    let n = m.nrows();
    let square = m.is_square() && n > 0;
    if !square {
        return ValidationReport {
            n,
            square,
            diagonal_violation: None,
            symmetry_violation: None,
            range_violation: None,
            min_eigenvalue: f64::NAN,
            psd: false,
            valid: false,
        };
    }
    let diagonal_violation = (0..n).find(|&i| m[(i, i)] != 1.0);
    let mut symmetry_violation = None;
    let mut range_violation = None;
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if symmetry_violation.is_none() && j > i && v != m[(j, i)] {
                symmetry_violation = Some((i, j));
            }
            if range_violation.is_none() && !(v.abs() <= 1.0 + PSD_TOL) {
                range_violation = Some((i, j));
            }
        }
    }
    let min_eigenvalue = if m.iter().all(|v| v.is_finite()) {
        let sym = (m + m.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    let psd = min_eigenvalue >= -PSD_TOL;
    let valid = diagonal_violation.is_none()
        && symmetry_violation.is_none()
        && range_violation.is_none()
        && psd;
    ValidationReport {
        n,
        square,
        diagonal_violation,
        symmetry_violation,
        range_violation,
        min_eigenvalue,
        psd,
        valid,
    }
}

/// `n` unit vectors in R^k, stored row-major, whose Gram matrix is a
/// given correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramFactor {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl GramFactor {
    /// Wraps explicit vectors; each must have norm within 1e-12 of 1.
    pub fn new(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        let k = vectors.first().map_or(0, Vec::len);
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument("gram factor needs at least one non-empty vector".into()));
        }
        let mut data = Vec::with_capacity(n * k);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != k {
                return Err(Error::DimensionMismatch(k, v.len()));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("vector {i} has norm {norm}")));
            }
            data.extend_from_slice(v);
        }
        Ok(Self { n, k, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn gram(&self) -> Result<CorrelationMatrix> {
        CorrelationMatrix::from_unit_rows(&self.data, self.n, self.k)
    }

    /// Same Gram matrix realized in R^{k + extra}: each vector is rotated
    /// by a fixed random orthogonal map after zero-padding.
    pub fn embed(&self, extra: usize, seed: u64) -> GramFactor {
        let dim = self.k + extra;
        let mut g = RngStream::new(seed, 0).generator();
        let mut raw = DMatrix::zeros(dim, dim);
        for x in raw.iter_mut() {
            *x = g.normal();
        }
        let q = raw.qr().q();
        let mut data = Vec::with_capacity(self.n * dim);
        for row in self.rows() {
            let mut out = vec![0.0; dim];
            for (r, o) in out.iter_mut().enumerate() {
                *o = row.iter().enumerate().map(|(c, v)| q[(r, c)] * v).sum();
            }
            let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            data.extend(out.iter().map(|x| x / norm));
        }
        GramFactor { n: self.n, k: dim, data }
    }
}

/// Factors `m` by symmetric eigendecomposition. The ambient dimension is
/// the number of eigenvalues above [`RANK_TOL`]; rows are renormalized to
/// exactly unit length afterwards.
pub fn gram_factor(m: &CorrelationMatrix) -> Result<GramFactor> {
    let report = m.validate();
    if !report.valid {
        return Err(Error::InvalidMatrix(report));
    }
    let n = m.n();
    let eig = SymmetricEigen::new(m.entries().clone());
    let mut kept: Vec<usize> = (0..n).filter(|&c| eig.eigenvalues[c] > RANK_TOL).collect();
    kept.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = kept.len();
    let mut data = Vec::with_capacity(n * k);
    for i in 0..n {
        let start = data.len();
        data.extend(kept.iter().map(|&c| eig.eigenvectors[(i, c)] * eig.eigenvalues[c].sqrt()));
        let norm = data[start..].iter().map(|x| x * x).sum::<f64>().sqrt();
        data[start..].iter_mut().for_each(|x| *x /= norm);
    }
    Ok(GramFactor { n, k, data })
}

/// Coordinate permutation followed by sign flips: maps Σ to D P Σ Pᵀ D,
/// i.e. entry (i, j) becomes signs[i]·signs[j]·Σ[perm[i]][perm[j]].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let n = perm.len();
        if signs.len() != n {
            return Err(Error::DimensionMismatch(n, signs.len()));
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("signs must be +1 or -1".into()));
        }
        Ok(Self { perm, signs })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n).collect(), signs: vec![1; n] }
    }

    pub fn random(n: usize, stream: RngStream) -> Self {
        let mut g = stream.generator();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, g.below(i + 1));
        }
        let signs = (0..n).map(|_| if g.uniform() < 0.5 { 1 } else { -1 }).collect();
        Self { perm, signs }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn apply(&self, m: &CorrelationMatrix) -> CorrelationMatrix {
        assert_eq!(m.n(), self.perm.len());
        let n = m.n();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            let s = f64::from(self.signs[i] * self.signs[j]);
            s * m.get(self.perm[i], self.perm[j])
        });
        CorrelationMatrix { entries }
    }

    /// Reorders and negates the rows of an `n × k` row-major array the same
    /// way [`apply`](Self::apply) acts on the Gram matrix.
    pub fn apply_rows(&self, rows: &[f64], k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len());
        for (i, &p) in self.perm.iter().enumerate() {
            let s = f64::from(self.signs[i]);
            out.extend(rows[p * k..(p + 1) * k].iter().map(|x| s * x));
        }
        out
    }
}

/// Minimum Frobenius distance ‖D P a Pᵀ D − b‖ over all signed permutations,
/// by exhaustive branch and bound. Refuses n > [`EXHAUSTIVE_LIMIT`].
pub fn canonical_distance(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<f64> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch(n, b.n()));
    }
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::ExhaustiveInfeasible { n, limit: EXHAUSTIVE_LIMIT });
    }
    if n >= SLOW_PATH_FROM {
        log::warn!("exhaustive canonical distance at n = {n} may take a long time");
    }
    let mut search = BranchAndBound {
        a: a.entries(),
        b: b.entries(),
        n,
        assigned: vec![0; n],
        signs: vec![1.0; n],
        used: vec![false; n],
        best: frob_sq_identity(a, b),
    };
    search.descend(0, 0.0);
    Ok(search.best.max(0.0).sqrt())
}

fn frob_sq_identity(a: &CorrelationMatrix, b: &CorrelationMatrix) -> f64 {
    (a.entries() - b.entries()).norm_squared()
}

struct BranchAndBound<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DMatrix<f64>,
    n: usize,
    assigned: Vec<usize>,
    signs: Vec<f64>,
    used: Vec<bool>,
    best: f64,
}

impl BranchAndBound<'_> {
    fn descend(&mut self, pos: usize, partial: f64) {
        if pos == self.n {
            if partial < self.best {
                self.best = partial;
            }
            return;
        }
        // A global sign flip leaves D P a Pᵀ D unchanged, so fix the first sign.
        let sign_choices: &[f64] = if pos == 0 { &[1.0] } else { &[1.0, -1.0] };
        for cand in 0..self.n {
            if self.used[cand] {
                continue;
            }
            for &s in sign_choices {
                let mut cost = partial + sq(self.a[(cand, cand)] - self.b[(pos, pos)]);
                for prev in 0..pos {
                    let v = s * self.signs[prev] * self.a[(cand, self.assigned[prev])];
                    cost += 2.0 * sq(v - self.b[(pos, prev)]);
                }
                if cost >= self.best {
                    continue;
                }
                self.used[cand] = true;
                self.assigned[pos] = cand;
                self.signs[pos] = s;
                self.descend(pos + 1, cost);
                self.used[cand] = false;
            }
        }
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub distance: f64,
    /// True only when the full group was enumerated.
    pub certified: bool,
}

/// Upper bound on the canonical distance from random restarts followed by
/// greedy swap and sign-flip improvement. Never certified.
pub fn canonical_distance_heuristic(
    a: &CorrelationMatrix,
    b: &CorrelationMatrix,
    restarts: usize,
    seed: u64,
) -> Result<DistanceEstimate> {
    let n = a.n();
    if b.n() != n {
        return Err(Error::DimensionMismatch(n, b.n()));
    }
    let cost = |p: &SignedPermutation| (p.apply(a).entries() - b.entries()).norm_squared();
    let mut best = cost(&SignedPermutation::identity(n));
    for r in 0..restarts.max(1) {
        let mut cur = SignedPermutation::random(n, RngStream::new(seed, r as u64));
        let mut cur_cost = cost(&cur);
        loop {
            let mut improved = false;
            for i in 0..n {
                let mut flipped = cur.clone();
                flipped.signs[i] = -flipped.signs[i];
                let c = cost(&flipped);
                if c < cur_cost - 1e-15 {
                    (cur, cur_cost, improved) = (flipped, c, true);
                }
                for j in (i + 1)..n {
                    let mut swapped = cur.clone();
                    swapped.perm.swap(i, j);
                    swapped.signs.swap(i, j);
                    let c = cost(&swapped);
                    if c < cur_cost - 1e-15 {
                        (cur, cur_cost, improved) = (swapped, c, true);
                    }
                }
            }
            if !improved {
                break;
            }
        }
        best = best.min(cur_cost);
    }
    Ok(DistanceEstimate { distance: best.max(0.0).sqrt(), certified: false })
}

/// Exhaustive when n <= [`EXHAUSTIVE_LIMIT`], heuristic otherwise.
pub fn canonical_distance_auto(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<DistanceEstimate> {
    if a.n() <= EXHAUSTIVE_LIMIT {
        Ok(DistanceEstimate { distance: canonical_distance(a, b)?, certified: true })
    } else {
        canonical_distance_heuristic(a, b, 64, 0)
    }
}
