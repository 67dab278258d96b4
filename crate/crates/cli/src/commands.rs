use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gaussmin::corrmat::{
    cosine_covariance, identity_covariance, random_correlation, simplex_covariance, CorrelationMatrix,
};
use gaussmin::exactlaw::{cos_moment, cos_tail, independent_tail};
use gaussmin::interval::{verify_counterexample, DEFAULT_SUBDIVISIONS};
use gaussmin::montecarlo::{dominance_check, estimate_moment, estimate_tail_curve, threshold_grid};
use gaussmin::rng::RngStream;
use gaussmin::search::{
    differential_evolution, local_search, run_campaign, CampaignConfig, Objective, ObjectiveKind, SearchSpace,
};
use gaussmin::zones::{evenly_spaced_config, union_measure_d2_exact, union_measure_mc, zone_conjecture_scan};

use crate::output::{csv_string, print_stdout, Format, Sink};

pub struct Context {
    pub seed: u64,
    pub format: Format,
    pub out_dir: Option<PathBuf>,
}

impl Context {
    fn sink<A: Serialize>(&self, command: &str, args: &A) -> Sink {
        Sink::new(command, args, self.seed, self.format, self.out_dir.clone())
    }
}

/// Invalid flag combination; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `cos`, `simplex`, `identity`, `random[:rank[:seed]]`, or a JSON file
/// in the `{"n": .., "entries": [[..]]}` format.
fn resolve_matrix(spec: &str, n: usize) -> Result<CorrelationMatrix> {
    let m = match spec {
        "cos" | "cosine" => cosine_covariance(n)?,
        "simplex" => simplex_covariance(n)?,
        "identity" => identity_covariance(n)?,
        s if s == "random" || s.starts_with("random:") => {
            let mut parts = s.split(':').skip(1);
            let rank = match parts.next() {
                Some(r) => r.parse().map_err(|_| usage(format!("bad rank in {s:?}")))?,
                None => n,
            };
            let seed = match parts.next() {
                Some(r) => r.parse().map_err(|_| usage(format!("bad seed in {s:?}")))?,
                None => 0,
            };
            random_correlation(n, rank, seed)?
        }
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("matrix {path:?} is neither a named family nor a readable file: {e}")))?;
            let m: CorrelationMatrix = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
            if m.n() != n {
                bail!(usage(format!("matrix file has n = {} but --n is {n}", m.n())));
            }
            m
        }
    };
    Ok(m)
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Boxes per axis for the simplex integral.
    #[arg(long, default_value_t = DEFAULT_SUBDIVISIONS, value_parser = positive)]
    pub subdivisions: usize,
}

pub fn verify(ctx: &Context, args: &VerifyArgs) -> Result<u8> {
    let out_dir = ctx.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let sink = Sink::new("verify", args, ctx.seed, ctx.format, Some(out_dir));
    let cert = verify_counterexample(args.subdivisions)?;
    let value = serde_json::to_value(cert)?;
    sink.emit("certificate", None, Some(&value))?;
    sink.finish()?;
    if !cert.verdict {
        eprintln!(
            "verdict false: cosine upper bound {:e} is not below simplex lower bound {:e}",
            cert.cosine_bound.hi(),
            cert.simplex_bound.lo()
        );
    }
    Ok(if cert.verdict { 0 } else { 1 })
}

#[derive(Debug, Args, Serialize)]
pub struct MomentsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    /// Quadrature of the exact law (cosine covariance only).
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value = "cos")]
    pub matrix: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
}

pub fn moments(ctx: &Context, args: &MomentsArgs) -> Result<u8> {
    let sink = ctx.sink("moments", args);
    if args.exact {
        if !matches!(args.matrix.as_str(), "cos" | "cosine") {
            bail!(usage("--exact is only available for the cosine covariance"));
        }
        let value = cos_moment(args.n, args.p)?;
        let csv = csv_string(&["n", "p", "value"], [(args.n, args.p, value)])?;
        let json = json!({"n": args.n, "p": args.p, "value": value, "method": "exact"});
        sink.emit("moments", Some(&csv), Some(&json))?;
    } else {
        let m = resolve_matrix(&args.matrix, args.n)?;
        let est = estimate_moment(&m, args.p, args.samples, RngStream::new(ctx.seed, 0))?;
        let csv = csv_string(
            &["n", "p", "value", "std_error", "samples"],
            [(args.n, args.p, est.mean, est.std_error, est.samples)],
        )?;
        let json = json!({"n": args.n, "p": args.p, "value": est.mean, "std_error": est.std_error,
                          "samples": est.samples, "method": "monte_carlo", "matrix": args.matrix});
        sink.emit("moments", Some(&csv), Some(&json))?;
    }
    sink.finish()?;
    Ok(0)
}

#[derive(Debug, Args, Serialize)]
pub struct TailsArgs {
    #[arg(long)]
    pub n: usize,
    /// Exact tails (cosine or identity covariance).
    #[arg(long)]
    pub exact: bool,
    /// Explicit thresholds; overrides the grid.
    #[arg(long = "t", num_args = 1..)]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 30)]
    pub grid_steps: usize,
    #[arg(long, default_value = "cos")]
    pub matrix: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Curve label in the CSV output (defaults to the matrix spec).
    #[arg(long)]
    pub label: Option<String>,
}

fn grid_with_zero(max: f64, steps: usize) -> Vec<f64> {
    std::iter::once(0.0).chain(threshold_grid(max, steps)).collect()
}

pub fn tails(ctx: &Context, args: &TailsArgs) -> Result<u8> {
    let sink = ctx.sink("tails", args);
    let thresholds = if args.t.is_empty() { grid_with_zero(args.grid_max, args.grid_steps) } else { args.t.clone() };
    if args.exact {
        let exact: Box<dyn Fn(f64) -> gaussmin::Result<f64>> = match args.matrix.as_str() {
            "cos" | "cosine" => Box::new(|t| cos_tail(args.n, t)),
            "identity" => Box::new(|t| independent_tail(args.n, t)),
            _ => bail!(usage("--exact is only available for the cosine and identity covariances")),
        };
        let rows = thresholds.iter().map(|&t| Ok((args.n, t, exact(t)?))).collect::<Result<Vec<_>>>()?;
        let json = json!({"n": args.n, "matrix": args.matrix,
                          "thresholds": thresholds, "tails": rows.iter().map(|r| r.2).collect::<Vec<_>>()});
        sink.emit("tails", Some(&csv_string(&["n", "t", "tail"], &rows)?), Some(&json))?;
    } else {
        let m = resolve_matrix(&args.matrix, args.n)?;
        let curve = estimate_tail_curve(&m, &thresholds, args.samples, RngStream::new(ctx.seed, 0))?;
        let label = args.label.clone().unwrap_or_else(|| args.matrix.clone());
        let rows = (0..curve.thresholds.len())
            .map(|i| (curve.thresholds[i], curve.estimates[i], curve.half_widths[i], label.as_str()));
        let csv = csv_string(&["t", "tail", "ci_half", "label"], rows)?;
        sink.emit("tails", Some(&csv), Some(&serde_json::to_value(&curve)?))?;
    }
    sink.finish()?;
    Ok(0)
}

#[derive(Debug, Args, Serialize)]
pub struct DominanceArgs {
    #[arg(long, default_value = "cos")]
    pub candidate: String,
    #[arg(long, default_value = "simplex")]
    pub reference: String,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2.0)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 20)]
    pub grid_steps: usize,
}

pub fn dominance(ctx: &Context, args: &DominanceArgs) -> Result<u8> {
    let sink = ctx.sink("dominance", args);
    let candidate = resolve_matrix(&args.candidate, args.n)?;
    let reference = resolve_matrix(&args.reference, args.n)?;
    let grid = threshold_grid(args.grid_max, args.grid_steps);
    let report = dominance_check(&candidate, &reference, &grid, args.samples, RngStream::new(ctx.seed, 0))?;
    let rows = report.rows.iter().map(|r| {
        (r.t, r.candidate_tail, r.candidate_se, r.reference_tail, r.reference_se, r.z, r.flagged)
    });
    let csv = csv_string(
        &["t", "candidate_tail", "candidate_se", "reference_tail", "reference_se", "z", "flagged"],
        rows,
    )?;
    sink.emit("dominance", Some(&csv), Some(&serde_json::to_value(&report)?))?;
    if ctx.format == Format::Csv {
        eprintln!("{}", json!({"flagged": report.flagged, "max_z": report.max_z}));
    }
    sink.finish()?;
    Ok(if report.flagged.is_empty() { 0 } else { 1 })
}

#[derive(Debug, Args, Serialize)]
pub struct ZonesArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
}

pub fn zones(ctx: &Context, args: &ZonesArgs) -> Result<u8> {
    let sink = ctx.sink("zones", args);
    let report = zone_conjecture_scan(args.n, args.d, args.alpha, args.trials, args.samples, RngStream::new(ctx.seed, 0))?;
    let csv = csv_string(&["trial", "measure", "z"], report.trials.iter().map(|t| (t.trial, t.measure, t.z)))?;
    let json = json!({
        "n": report.n, "d": report.d, "alpha": report.alpha, "samples": report.samples,
        "even_measure": report.even_measure, "even_half_width": report.even_half_width,
        "max_random": report.max_random, "max_trial": report.max_trial,
        "max_config": report.max_config, "exceedance_z": report.exceedance_z,
    });
    sink.emit("zones", Some(&csv), Some(&json))?;
    sink.finish()?;
    if report.exceedance_z > 4.0 {
        eprintln!(
            "EXCEEDANCE: random configuration {} has union measure {} above the evenly spaced {} (z = {:.2})",
            report.max_trial, report.max_random, report.even_measure, report.exceedance_z
        );
        return Ok(1);
    }
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    De,
    Local,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Rank bound of the search space (defaults to n).
    #[arg(long)]
    pub rank: Option<usize>,
    /// `moment:<p>` or `tail:<t>`.
    #[arg(long, default_value = "moment:2")]
    pub objective: String,
    #[arg(long, value_enum, default_value_t = MethodArg::De)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 32)]
    pub population: usize,
    /// Generations (differential evolution) or iterations (local search).
    #[arg(long, default_value_t = 200)]
    pub generations: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

pub fn search(ctx: &Context, args: &SearchArgs) -> Result<u8> {
    let sink = ctx.sink("search", args);
    let kind: ObjectiveKind = args.objective.parse().map_err(|e: gaussmin::Error| usage(e.to_string()))?;
    let space = SearchSpace::new(args.n, args.rank.unwrap_or(args.n))?;
    let objective = Objective::new(kind, args.samples, ctx.seed)?;
    let stream = RngStream::new(ctx.seed, 1);
    let report = match args.method {
        MethodArg::De => differential_evolution(&space, &objective, args.population, args.generations, stream)?,
        MethodArg::Local => {
            let start = space.random_params(stream.with_stream(2));
            local_search(&space, &objective, &start, args.generations, stream)?
        }
    };
    let csv = csv_string(&["iter", "best_value"], report.history.iter().enumerate())?;
    sink.emit("search", Some(&csv), Some(&serde_json::to_value(&report)?))?;
    sink.finish()?;
    Ok(0)
}

#[derive(Debug, Args, Serialize)]
pub struct CampaignArgs {
    /// JSON campaign description.
    #[arg(long)]
    pub config: PathBuf,
}

pub fn campaign(ctx: &Context, args: &CampaignArgs) -> Result<u8> {
    let sink = ctx.sink("campaign", args);
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let config: CampaignConfig = serde_json::from_str(&text).map_err(|e| usage(format!("bad campaign config: {e}")))?;
    let summary = run_campaign(&config)?;
    let rows = summary.cells.iter().enumerate().flat_map(|(c, cell)| {
        cell.runs.iter().map(move |r| {
            (c, cell.cell.n, cell.cell.rank, cell.cell.objective.to_string(), r.seed, r.best_value, r.distance_to_cosine, r.recovered)
        })
    });
    let csv = csv_string(&["cell", "n", "rank", "objective", "seed", "best_value", "distance_to_cosine", "recovered"], rows)?;
    sink.emit("campaign", Some(&csv), Some(&serde_json::to_value(&summary)?))?;
    sink.finish()?;
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Cov,
    Tails,
    Zones,
}

#[derive(Debug, Args, Serialize)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub which: FigureId,
    /// Matrix size (defaults: 16 for cov, 8 for tails, 4 for zones).
    #[arg(long)]
    pub n: Option<usize>,
    /// Random covariances of each kind in the tails figure.
    #[arg(long, default_value_t = 50)]
    pub random: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 3.0)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 60)]
    pub grid_steps: usize,
    /// Ambient dimension for the zones figure.
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Zone half-width for the zones figure.
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
}

pub fn figure(ctx: &Context, args: &FigureArgs) -> Result<u8> {
    let out_dir = ctx.out_dir.clone().unwrap_or_else(|| PathBuf::from("figures"));
    let sink = Sink::new("figure", args, ctx.seed, ctx.format, Some(out_dir.clone()));
    let written = match args.which {
        FigureId::Cov => figure_cov(&sink, &out_dir, args.n.unwrap_or(16))?,
        FigureId::Tails => figure_tails(&sink, &out_dir, args, ctx.seed)?,
        FigureId::Zones => figure_zones(&sink, &out_dir, args, ctx.seed)?,
    };
    sink.finish()?;
    let listing: String = written.iter().map(|name| format!("{}\n", out_dir.join(name).display())).collect();
    print_stdout(&listing)?;
    Ok(0)
}

fn matrix_csv(m: &CorrelationMatrix) -> Result<String> {
    csv_string(&["i", "j", "value"], m.csv_triples())
}

fn figure_cov(sink: &Sink, dir: &Path, n: usize) -> Result<Vec<String>> {
    let files = [
        (format!("cov_cosine_n{n}.csv"), cosine_covariance(n)?),
        (format!("cov_simplex_n{n}.csv"), simplex_covariance(n)?),
    ];
    let mut names = Vec::new();
    for (name, m) in files {
        sink.write_file(dir, &name, matrix_csv(&m)?.as_bytes())?;
        names.push(name);
    }
    Ok(names)
}

fn figure_tails(sink: &Sink, dir: &Path, args: &FigureArgs, seed: u64) -> Result<Vec<String>> {
    let n = args.n.unwrap_or(8);
    let grid = grid_with_zero(args.grid_max, args.grid_steps);
    let mut rows: Vec<(f64, f64, f64, String)> = Vec::new();
    for &t in &grid {
        rows.push((t, cos_tail(n, t)?, 0.0, "cosine".into()));
    }
    for &t in &grid {
        rows.push((t, independent_tail(n, t)?, 0.0, "identity".into()));
    }
    let mut mc: Vec<(String, CorrelationMatrix)> = vec![("simplex".into(), simplex_covariance(n)?)];
    for i in 0..args.random {
        mc.push((format!("random_full_{i:02}"), random_correlation(n, n, seed.wrapping_mul(1000).wrapping_add(i as u64))?));
    }
    for i in 0..args.random {
        let rank = 2.min(n);
        mc.push((format!("random_rank2_{i:02}"), random_correlation(n, rank, seed.wrapping_mul(1000).wrapping_add(500 + i as u64))?));
    }
    for (idx, (label, m)) in mc.iter().enumerate() {
        let curve = estimate_tail_curve(m, &grid, args.samples, RngStream::new(seed, 100 + idx as u64))?;
        for i in 0..grid.len() {
            rows.push((grid[i], curve.estimates[i], curve.half_widths[i], label.clone()));
        }
    }
    let name = format!("tails_n{n}.csv");
    sink.write_file(dir, &name, csv_string(&["t", "tail", "ci_half", "label"], rows)?.as_bytes())?;
    Ok(vec![name])
}

fn figure_zones(sink: &Sink, dir: &Path, args: &FigureArgs, seed: u64) -> Result<Vec<String>> {
    let n = args.n.unwrap_or(4);
    let config = evenly_spaced_config(n, args.d, args.alpha)?;
    let mut header: Vec<String> = vec!["j".into()];
    header.extend((1..=args.d).map(|c| format!("x{c}")));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for (j, c) in config.centers().iter().enumerate() {
        let mut record = vec![(j + 1).to_string()];
        record.extend(c.iter().map(|x| x.to_string()));
        w.write_record(&record)?;
    }
    let csv = String::from_utf8(w.into_inner()?)?;
    let measure = if args.d == 2 {
        union_measure_d2_exact(&config)?
    } else {
        union_measure_mc(&config, args.samples, RngStream::new(seed, 0))?
    };
    let json = json!({"n": n, "d": args.d, "alpha": args.alpha, "centers": config.centers(), "union_measure": measure});
    let csv_name = format!("zones_n{n}_d{}.csv", args.d);
    let json_name = format!("zones_n{n}_d{}.json", args.d);
    sink.write_file(dir, &csv_name, csv.as_bytes())?;
    sink.write_file(dir, &json_name, format!("{}\n", serde_json::to_string_pretty(&json)?).as_bytes())?;
    Ok(vec![csv_name, json_name])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_matrix_specs() {
        assert_eq!(resolve_matrix("cos", 4).unwrap(), cosine_covariance(4).unwrap());
        assert_eq!(resolve_matrix("simplex", 3).unwrap(), simplex_covariance(3).unwrap());
        assert_eq!(resolve_matrix("random:2:9", 5).unwrap(), random_correlation(5, 2, 9).unwrap());
        assert_eq!(resolve_matrix("random", 5).unwrap(), random_correlation(5, 5, 0).unwrap());
        let bad = resolve_matrix("random:x", 5).unwrap_err();
        assert!(bad.downcast_ref::<UsageError>().is_some());
        assert!(resolve_matrix("missing.json", 3).unwrap_err().downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn matrix_from_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, r#"{"n": 2, "entries": [[1.0, 0.5], [0.5, 1.0]]}"#).unwrap();
        let m = resolve_matrix(path.to_str().unwrap(), 2).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert!(resolve_matrix(path.to_str().unwrap(), 3).is_err());
    }

    #[test]
    fn positive_integers() {
        assert_eq!(positive("400"), Ok(400));
        assert!(positive("0").is_err());
        assert!(positive("-3").is_err());
    }

    #[test]
    fn grid_starts_at_zero() {
        let grid = grid_with_zero(1.0, 4);
        assert_eq!(grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
