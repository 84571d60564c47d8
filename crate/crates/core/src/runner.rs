//! Subcommand dispatch and artifact emission.
//!
//! Every artifact is a pure function of the config (seed included). JSON
//! reports carry a `provenance` block, CSV files open with a
//! `# config_sha256=... seed=...` comment line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, GraphSpec};
use crate::dist::{Distribution, Prob, ProbSpec};
use crate::graph::Graph;
use crate::limit::{normal_cdf, sample_limit, LimitLaw};
use crate::mixture::{split, verify_mixture_identity, MixturePair};
use crate::rng::RngStream;
use crate::sampler::{row_stats_fast_bipartite, sample_row, stream_sequence, Construction, RowStats, SeqPoint};
use crate::verify::{
    audit_independence, gap_filling_check, ks_one_sample, ks_two_sample, sample_mean, sample_variance, Arithmetic,
    EmpiricalDist, GapReport, GapSettings, IndependenceReport,
};

/// Child streams of the master seed.
const ROW_STREAM: u64 = 0;
const PATH_STREAM: u64 = 1;
const LIMIT_STREAM: u64 = 2;
const GAP_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Split,
    SimulateRow,
    SimulateSeq,
    LimitSample,
    VerifyIndependence,
    KsTest,
    GapCheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Split,
        Subcommand::SimulateRow,
        Subcommand::SimulateSeq,
        Subcommand::LimitSample,
        Subcommand::VerifyIndependence,
        Subcommand::KsTest,
        Subcommand::GapCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Split => "split",
            Subcommand::SimulateRow => "simulate-row",
            Subcommand::SimulateSeq => "simulate-seq",
            Subcommand::LimitSample => "limit-sample",
            Subcommand::VerifyIndependence => "verify-independence",
            Subcommand::KsTest => "ks-test",
            Subcommand::GapCheck => "gap-check",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl RunError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        RunError::Invalid(e.to_string())
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    ToleranceFailure,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::ToleranceFailure
        }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub artifacts: Vec<PathBuf>,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Pass => 0,
            Outcome::ToleranceFailure => 2,
        }
    }
}

/// Exit status for an error: every error is a validation error.
pub const VALIDATION_EXIT: i32 = 1;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: PathBuf,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config_sha256: &'a str,
    seed: u64,
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    provenance: Provenance<'a>,
    config: &'a ExperimentConfig,
    report: &'a T,
}

struct Emitter<'a> {
    config: &'a ExperimentConfig,
    sub: Subcommand,
    hash: String,
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn json<T: Serialize>(&mut self, report: &T) -> Result<(), RunError> {
        let artifact = Artifact {
            provenance: Provenance {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                subcommand: self.sub.name(),
                config_sha256: &self.hash,
                seed: self.config.seed,
            },
            config: self.config,
            report,
        };
        let path = self.dir.join(format!("{}.json", self.sub.name()));
        let mut text = serde_json::to_string_pretty(&artifact).map_err(RunError::invalid)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn csv<I>(&mut self, header: &[&str], rows: I) -> Result<(), RunError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.dir.join(format!("{}.csv", self.sub.name()));
        let file = fs::File::create(&path).map_err(|e| RunError::io(&path, e))?;
        let mut file = std::io::BufWriter::new(file);
        writeln!(file, "# config_sha256={} seed={}", self.hash, self.config.seed).map_err(|e| RunError::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(|e| RunError::io(&path, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| RunError::io(&path, e))?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

/// Runs one subcommand and writes its artifacts into `opts.out_dir`.
pub fn run(config: &ExperimentConfig, sub: Subcommand, opts: &RunOptions) -> Result<RunResult, RunError> {
    config.validate()?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| RunError::io(&opts.out_dir, e))?;
    let mut out = Emitter {
        config,
        sub,
        hash: config.hash(),
        dir: &opts.out_dir,
        written: Vec::new(),
    };
    let master = RngStream::new(config.seed);
    let outcome = match sub {
        Subcommand::Split => run_split(config, &mut out)?,
        Subcommand::SimulateRow => run_simulate_row(config, opts, &master, &mut out)?,
        Subcommand::SimulateSeq => run_simulate_seq(config, opts, &master, &mut out)?,
        Subcommand::LimitSample => run_limit_sample(config, &master, &mut out)?,
        Subcommand::VerifyIndependence => run_verify_independence(config, opts, &mut out)?,
        Subcommand::KsTest => run_ks_test(config, opts, &master, &mut out)?,
        Subcommand::GapCheck => run_gap_check(config, opts, &master, &mut out)?,
    };
    Ok(RunResult {
        outcome,
        artifacts: out.written,
    })
}

fn pair_of(config: &ExperimentConfig) -> Result<(MixturePair, Prob), RunError> {
    let tau = config.tau_value()?;
    let pair = split(&config.distribution, &tau).map_err(RunError::invalid)?;
    Ok((pair, tau))
}

fn construction(config: &ExperimentConfig) -> Result<Construction, RunError> {
    let (pair, _) = pair_of(config)?;
    Construction::new(config.ell, &pair, &config.distribution).map_err(RunError::invalid)
}

#[derive(Serialize)]
struct SplitReport<'a> {
    w: &'a Distribution,
    tau: ProbSpec,
    pair: &'a MixturePair,
    mixture_deviation: f64,
    /// Limit-law coefficient, present when `tau = 1/ell`.
    r: Option<f64>,
}

fn run_split(config: &ExperimentConfig, out: &mut Emitter) -> Result<Outcome, RunError> {
    let (pair, tau) = pair_of(config)?;
    let r = Construction::new(config.ell, &pair, &config.distribution)
        .ok()
        .and_then(|ctx| LimitLaw::for_pair(config.ell, &pair, ctx.sigma()).ok())
        .map(|law| law.r);
    out.json(&SplitReport {
        w: &config.distribution,
        tau: ProbSpec::from_prob(&tau),
        pair: &pair,
        mixture_deviation: verify_mixture_identity(&pair, &config.distribution),
        r,
    })?;
    Ok(Outcome::Pass)
}

/// Row statistics for `reps` independent rows, in replication order.
pub fn simulate_rows(
    config: &ExperimentConfig,
    ctx: &Construction,
    base_dir: &Path,
    master: &RngStream,
) -> Result<Vec<RowStats>, RunError> {
    let base = master.derive(ROW_STREAM);
    let rows = match config.graph {
        GraphSpec::CompleteBipartite { m_max, .. } => (0..config.reps)
            .into_par_iter()
            .map(|i| row_stats_fast_bipartite(m_max, ctx, &mut base.derive(i as u64)))
            .collect(),
        _ => {
            let g: Graph = config.row_graph(base_dir)?;
            (0..config.reps)
                .into_par_iter()
                .map(|i| {
                    let row = sample_row(&g, ctx, &mut base.derive(i as u64));
                    RowStats {
                        xi: row.xi,
                        xi_star: row.xi_star,
                        s_star: row.s_star,
                    }
                })
                .collect()
        }
    };
    Ok(rows)
}

#[derive(Serialize)]
struct Summary {
    count: usize,
    mean: f64,
    variance: f64,
}

impl Summary {
    fn of(xs: &[f64]) -> Self {
        Summary {
            count: xs.len(),
            mean: sample_mean(xs),
            variance: if xs.len() > 1 { sample_variance(xs) } else { 0.0 },
        }
    }
}

#[derive(Serialize)]
struct RowReport {
    edges: usize,
    xi_star: Summary,
    s_star: Summary,
}

fn run_simulate_row(
    config: &ExperimentConfig,
    opts: &RunOptions,
    master: &RngStream,
    out: &mut Emitter,
) -> Result<Outcome, RunError> {
    let ctx = construction(config)?;
    let rows = simulate_rows(config, &ctx, &opts.base_dir, master)?;
    let edges = match config.graph {
        GraphSpec::CompleteBipartite { m_max, .. } => m_max * m_max,
        _ => config.row_graph(&opts.base_dir)?.num_edges(),
    };
    let xi: Vec<f64> = rows.iter().map(|r| r.xi_star).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.s_star).collect();
    out.csv(
        &["rep", "xi", "xi_star", "s_star"],
        rows.iter()
            .enumerate()
            .map(|(i, r)| vec![i.to_string(), r.xi.to_string(), f(r.xi_star), f(r.s_star)]),
    )?;
    out.json(&RowReport {
        edges,
        xi_star: Summary::of(&xi),
        s_star: Summary::of(&s),
    })?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct SeqReport {
    n_max: usize,
    paths: usize,
    final_s_n: Summary,
}

fn run_simulate_seq(
    config: &ExperimentConfig,
    opts: &RunOptions,
    master: &RngStream,
    out: &mut Emitter,
) -> Result<Outcome, RunError> {
    let ctx = construction(config)?;
    let gs = config.graph_seq(&opts.base_dir)?;
    let total = gs.edge_union().map(|u| u.len()).map_err(|id| RunError::Invalid(format!("edge {id} changes endpoints")))?;
    let n_max = config.n_max.unwrap_or(total);
    if n_max == 0 {
        return Err(RunError::Config(ConfigError {
            field: "n_max".into(),
            line: None,
            column: None,
            message: "must be at least 1".into(),
        }));
    }
    let base = master.derive(PATH_STREAM);
    let paths: Vec<Vec<SeqPoint>> = (0..config.reps)
        .into_par_iter()
        .map(|i| stream_sequence(&gs, &ctx, n_max, &mut base.derive(i as u64)).map(|s| s.collect()))
        .collect::<Result<_, _>>()
        .map_err(RunError::invalid)?;
    let last: Vec<f64> = paths.iter().map(|p| p[p.len() - 1].s_n).collect();
    out.csv(
        &["rep", "n", "edge", "summand", "xi", "s_n"],
        paths.iter().enumerate().flat_map(|(i, p)| {
            p.iter().map(move |pt| {
                vec![i.to_string(), pt.n.to_string(), pt.edge.to_string(), f(pt.summand), pt.xi.to_string(), f(pt.s_n)]
            })
        }),
    )?;
    out.json(&SeqReport {
        n_max,
        paths: config.reps,
        final_s_n: Summary::of(&last),
    })?;
    Ok(Outcome::Pass)
}

fn limit_law(config: &ExperimentConfig, ctx: &Construction) -> Result<LimitLaw, RunError> {
    LimitLaw::for_pair(config.ell, ctx.pair(), ctx.sigma()).map_err(RunError::invalid)
}

#[derive(Serialize)]
struct LimitReport<'a> {
    law: &'a LimitLaw,
    sample: Summary,
}

fn run_limit_sample(config: &ExperimentConfig, master: &RngStream, out: &mut Emitter) -> Result<Outcome, RunError> {
    let ctx = construction(config)?;
    let law = limit_law(config, &ctx)?;
    let xs = sample_limit(&law, &mut master.derive(LIMIT_STREAM), config.reps);
    out.csv(&["index", "value"], xs.iter().enumerate().map(|(i, x)| vec![i.to_string(), f(*x)]))?;
    out.json(&LimitReport {
        law: &law,
        sample: Summary::of(&xs),
    })?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct IndependenceSummary {
    graphs: Vec<IndependenceReport>,
    pass: bool,
}

fn run_verify_independence(config: &ExperimentConfig, opts: &RunOptions, out: &mut Emitter) -> Result<Outcome, RunError> {
    let (pair, _) = pair_of(config)?;
    let gs = config.graph_seq(&opts.base_dir)?;
    let tolerance = match config.arithmetic {
        Arithmetic::Exact => config.tolerances.exact,
        Arithmetic::Float => config.tolerances.float,
    };
    let graphs = gs
        .graphs()
        .iter()
        .map(|g| {
            audit_independence(g, config.ell, &pair.u, &pair.v, config.tuple_size, tolerance, config.arithmetic)
                .map_err(RunError::invalid)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pass = graphs.iter().all(|r| r.pass);
    out.json(&IndependenceSummary { graphs, pass })?;
    Ok(Outcome::from_pass(pass))
}

/// Reads one numeric column of a CSV file, skipping `#` comment lines.
pub fn read_sample_column(path: &Path, column: &str) -> Result<Vec<f64>, RunError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| RunError::io(path, e))?;
    let headers = reader.headers().map_err(|e| RunError::io(path, e))?;
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| RunError::Invalid(format!("{}: no column `{column}`", path.display())))?;
    let mut xs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| RunError::io(path, e))?;
        let cell = record.get(idx).unwrap_or("");
        let x: f64 = cell
            .parse()
            .map_err(|_| RunError::Invalid(format!("{}: record {}: `{cell}` is not a number", path.display(), line + 1)))?;
        xs.push(x);
    }
    Ok(xs)
}

#[derive(Serialize)]
struct KsReport<'a> {
    law: &'a LimitLaw,
    samples: usize,
    reference_samples: usize,
    ks_limit: f64,
    ks_standard_normal: f64,
    ks_moment_matched_normal: f64,
    ks_tolerance: f64,
    normal_floor: Option<f64>,
    pass: bool,
}

fn run_ks_test(config: &ExperimentConfig, opts: &RunOptions, master: &RngStream, out: &mut Emitter) -> Result<Outcome, RunError> {
    let ctx = construction(config)?;
    let law = limit_law(config, &ctx)?;
    let sample = match &config.ks.input {
        Some(input) => read_sample_column(&opts.base_dir.join(&input.path), &input.column)?,
        None => simulate_rows(config, &ctx, &opts.base_dir, master)?
            .iter()
            .map(|r| r.s_star)
            .collect(),
    };
    let sample = EmpiricalDist::new(sample).map_err(RunError::invalid)?;
    let reference = sample_limit(&law, &mut master.derive(LIMIT_STREAM), config.ks.reference_samples);
    let reference = EmpiricalDist::new(reference).map_err(RunError::invalid)?;
    let ks_limit = ks_two_sample(&sample, &reference);
    let ks_standard_normal = ks_one_sample(&sample, normal_cdf);
    let (m, sd) = (sample.mean(), sample.variance().sqrt());
    let ks_moment_matched_normal = if sd > 0.0 {
        ks_one_sample(&sample, |x| normal_cdf((x - m) / sd))
    } else {
        ks_one_sample(&sample, |x| if x >= m { 1.0 } else { 0.0 })
    };
    let tol = &config.tolerances;
    let pass = ks_limit <= tol.ks && tol.normal_floor.is_none_or(|floor| ks_standard_normal >= floor);
    out.json(&KsReport {
        law: &law,
        samples: sample.len(),
        reference_samples: reference.len(),
        ks_limit,
        ks_standard_normal,
        ks_moment_matched_normal,
        ks_tolerance: tol.ks,
        normal_floor: tol.normal_floor,
        pass,
    })?;
    Ok(Outcome::from_pass(pass))
}

fn run_gap_check(config: &ExperimentConfig, opts: &RunOptions, master: &RngStream, out: &mut Emitter) -> Result<Outcome, RunError> {
    let ctx = construction(config)?;
    let gs = config.graph_seq(&opts.base_dir)?;
    let settings = GapSettings {
        reps: config.reps,
        checkpoint: config.gap.checkpoint,
        reference_samples: config.gap.reference_samples,
        ks_tolerance: config.tolerances.gap_ks,
        checkpoint_ks_tolerance: config.tolerances.ks,
        sigma_band: config.tolerances.sigma_band,
    };
    let report: GapReport = gap_filling_check(&gs, &ctx, &settings, &master.derive(GAP_STREAM)).map_err(RunError::invalid)?;
    out.csv(
        &["n", "expected_variance", "empirical_variance", "standard_error", "within_band"],
        report.increments.iter().map(|r| {
            vec![r.n.to_string(), f(r.expected), f(r.empirical), f(r.standard_error), r.within_band.to_string()]
        }),
    )?;
    out.json(&report)?;
    Ok(Outcome::from_pass(report.pass))
}

