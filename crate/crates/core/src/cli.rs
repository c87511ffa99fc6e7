//! Command-line surface and the end-to-end analysis it drives.
//!
//! [`execute`] loads data, runs the chains (or the complete-graph
//! baseline), computes every summary and returns a [`Report`];
//! [`write_outputs`] turns a report into the result files.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    association_summary, degree_and_association_summary, edge_inclusion_probs, expected_cell_counts, mean_correlation,
    AssociationSummary, CellMethod, DegreeRow, EmpiricalMarginal,
};
use crate::io;
use crate::latent::ObservedData;
use crate::sampler::{copula_full_baseline, run_chains, Acceptance, RunOutput, SamplerConfig};

/// Version of the `summary.json` layout.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Whitespace-separated cell counts, last variable fastest.
    Table,
    /// CSV with a header row, `NA` for missing values.
    Cases,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Model averaging over graphs.
    Cggm,
    /// Fixed complete graph with direct Wishart updates.
    CopulaFull,
}

/// Bayesian copula Gaussian graphical models for binary, ordinal and
/// continuous data.
#[derive(Debug, Clone, Parser)]
#[command(name = "cggm", version)]
pub struct Args {
    /// Input file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Comma-separated category counts per variable, e.g. `2,2,3`.
    /// Required for tables; for case files `0` marks a continuous column
    /// and omitting the flag infers kinds.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Iterations per chain, burn-in included.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 25)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "sigma-p", default_value_t = 0.1)]
    pub sigma_p: f64,
    #[arg(long = "sigma-g", default_value_t = 0.1)]
    pub sigma_g: f64,
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// Monte Carlo samples per normalizing constant.
    #[arg(long = "nc-samples", default_value_t = 2_000)]
    pub nc_samples: usize,
    /// Threshold of both interval-null Bayes factor tests.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Monte Carlo draws per thinned sample for expected cell counts.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// Bayes factor below which an association counts as zero in `degrees.csv`.
    #[arg(long = "bf-threshold", default_value_t = 100.0)]
    pub bf_threshold: f64,
    #[arg(long, value_enum, default_value_t = Baseline::Cggm)]
    pub baseline: Baseline,
    /// Output directory (created if missing).
    #[arg(long, default_value = "cggm-out")]
    pub out: PathBuf,
    /// Also write every thinned draw to `samples.csv`.
    #[arg(long)]
    pub samples: bool,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub format: Format,
    pub levels: Option<Vec<usize>>,
    pub sampler: SamplerConfig,
    pub draws: usize,
    pub bf_threshold: f64,
    pub baseline: Baseline,
    pub out: PathBuf,
    pub write_samples: bool,
}

impl TryFrom<Args> for RunConfig {
    type Error = Error;

    fn try_from(a: Args) -> Result<Self> {
        let sampler = SamplerConfig {
            delta: a.delta,
            sigma_p: a.sigma_p,
            sigma_g: a.sigma_g,
            iterations: a.iters,
            burn_in: a.burnin,
            thin: a.thin,
            chains: a.chains,
            master_seed: a.seed,
            nc_samples: a.nc_samples,
            epsilon: a.epsilon,
        };
        sampler.validate()?;
        if a.draws == 0 {
            return Err(Error::Config("draws must be at least 1".into()));
        }
        if a.format == Format::Table && a.levels.is_none() {
            return Err(Error::Config("--levels is required with --format table".into()));
        }
        Ok(Self {
            data: a.data,
            format: a.format,
            levels: a.levels,
            sampler,
            draws: a.draws,
            bf_threshold: a.bf_threshold,
            baseline: a.baseline,
            out: a.out,
            write_samples: a.samples,
        })
    }
}

impl RunConfig {
    pub fn load_data(&self) -> Result<ObservedData> {
        match self.format {
            Format::Table => io::parse_contingency_table(&self.data, self.levels.as_deref().unwrap_or_default()),
            Format::Cases => io::parse_case_data(&self.data, self.levels.as_deref()),
        }
    }
}

/// Summaries that need every variable to be discrete.
#[derive(Debug, Clone)]
pub struct TableReport {
    pub levels: Vec<usize>,
    pub association: AssociationSummary,
    pub observed: Vec<usize>,
    pub expected: Vec<f64>,
    /// `Σ (observed - expected)²` over all cells.
    pub sse: f64,
    pub degrees: Vec<DegreeRow>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub n: usize,
    pub run: RunOutput,
    pub edge_probs: DMatrix<f64>,
    pub correlation: DMatrix<f64>,
    pub tables: Option<TableReport>,
}

/// Loads the data and runs the full analysis.
pub fn execute(config: &RunConfig) -> Result<Report> {
    let data = config.load_data()?;
    analyze(config, &data)
}

/// Runs the configured sampler on `data` and computes all summaries.
pub fn analyze(config: &RunConfig, data: &ObservedData) -> Result<Report> {
    let run = match config.baseline {
        Baseline::Cggm => run_chains(&config.sampler, data)?,
        Baseline::CopulaFull => copula_full_baseline(&config.sampler, data)?,
    };
    summarize(config, data, run)
}

/// Computes all summaries from finished chains.
pub fn summarize(config: &RunConfig, data: &ObservedData, run: RunOutput) -> Result<Report> {
    let edge_probs = edge_inclusion_probs(&run.summary)?;
    let correlation = mean_correlation(&run.summary)?;
    let tables = if data.all_discrete() && !run.summary.thinned().is_empty() {
        let marginals = EmpiricalMarginal::from_data(data)?;
        let association = association_summary(&run.summary, &marginals, config.sampler.epsilon)?;
        let expected = expected_cell_counts(
            &run.summary,
            &marginals,
            data.n(),
            CellMethod::MonteCarlo { draws: config.draws },
            config.sampler.master_seed,
        )?;
        let observed = io::tabulate(data)?;
        let sse = observed
            .iter()
            .zip(&expected)
            .map(|(&o, e)| (o as f64 - e).powi(2))
            .sum();
        let degrees = degree_and_association_summary(&edge_probs, &association, config.bf_threshold);
        Some(TableReport {
            levels: io::discrete_levels(data)?,
            association,
            observed,
            expected,
            sse,
            degrees,
        })
    } else {
        None
    };
    Ok(Report {
        config: config.clone(),
        names: data.names(),
        n: data.n(),
        run,
        edge_probs,
        correlation,
        tables,
    })
}

#[derive(Serialize)]
struct ChainJson {
    chain: usize,
    seed: u64,
    initial_edges: usize,
    mean_edge_count: f64,
    acceptance: RatesJson,
}

#[derive(Serialize)]
struct RatesJson {
    diagonal: f64,
    off_diagonal: f64,
    edge_add: f64,
    edge_delete: f64,
    completion_failures: u64,
}

impl From<&Acceptance> for RatesJson {
    fn from(a: &Acceptance) -> Self {
        Self {
            diagonal: a.diagonal.rate(),
            off_diagonal: a.off_diagonal.rate(),
            edge_add: a.edge_add.rate(),
            edge_delete: a.edge_delete.rate(),
            completion_failures: a.completion_failures,
        }
    }
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    schema_version: u32,
    tool_version: &'static str,
    model: Baseline,
    data: &'a Path,
    format: Format,
    n: usize,
    p: usize,
    variables: &'a [String],
    config: &'a SamplerConfig,
    draws: usize,
    bf_threshold: f64,
    retained_samples: u64,
    thinned_samples: usize,
    mean_edge_count: f64,
    acceptance: RatesJson,
    chains: Vec<ChainJson>,
    sum_squared_errors: Option<f64>,
}

/// Writes `edges.csv`, `correlation.csv`, `summary.json` and `trace.csv`,
/// plus `cramers_v.csv`, `cells.csv` and `degrees.csv` for all-discrete data.
pub fn write_outputs(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let names = &report.names;
    io::write_edges_csv(&dir.join("edges.csv"), names, &report.edge_probs)?;
    io::write_matrix_csv(&dir.join("correlation.csv"), names, &report.correlation)?;
    io::write_trace_csv(&dir.join("trace.csv"), &report.run.chains)?;
    if let Some(t) = &report.tables {
        io::write_cramers_v_csv(&dir.join("cramers_v.csv"), names, &t.association)?;
        io::write_cells_csv(&dir.join("cells.csv"), &t.levels, &t.observed, &t.expected)?;
        io::write_degrees_csv(&dir.join("degrees.csv"), names, &t.degrees)?;
    }
    if report.config.write_samples {
        io::write_samples_csv(&dir.join("samples.csv"), &report.run.summary)?;
    }
    let cfg = &report.config;
    let json = SummaryJson {
        schema_version: SUMMARY_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        model: cfg.baseline,
        data: &cfg.data,
        format: cfg.format,
        n: report.n,
        p: names.len(),
        variables: names,
        config: &cfg.sampler,
        draws: cfg.draws,
        bf_threshold: cfg.bf_threshold,
        retained_samples: report.run.summary.samples(),
        thinned_samples: report.run.summary.thinned().len(),
        mean_edge_count: report.run.summary.mean_edge_count()?,
        acceptance: (&report.run.acceptance()).into(),
        chains: report
            .run
            .chains
            .iter()
            .map(|c| ChainJson {
                chain: c.chain,
                seed: c.seed,
                initial_edges: c.initial_edges,
                mean_edge_count: c.mean_edge_count,
                acceptance: (&c.acceptance).into(),
            })
            .collect(),
        sum_squared_errors: report.tables.as_ref().map(|t| t.sse),
    };
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

/// One-screen plain-text summary.
pub fn summary_text(report: &Report) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let names = &report.names;
    let p = names.len();
    let summary = &report.run.summary;
    let _ = writeln!(
        s,
        "cases {}  variables {}  retained samples {}",
        report.n,
        p,
        summary.samples()
    );
    let mean = summary.mean_edge_count().unwrap_or(f64::NAN);
    let _ = writeln!(s, "mean edge count {mean:.2} of {}", p * (p - 1) / 2);
    for c in &report.run.chains {
        let _ = writeln!(
            s,
            "  chain {}: mean edges {:.2} (start {})",
            c.chain, c.mean_edge_count, c.initial_edges
        );
    }
    let a = report.run.acceptance();
    let _ = writeln!(
        s,
        "acceptance: diagonal {:.3}  off-diagonal {:.3}  add {:.3}  delete {:.3}",
        a.diagonal.rate(),
        a.off_diagonal.rate(),
        a.edge_add.rate(),
        a.edge_delete.rate()
    );
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|x| (x + 1..p).map(move |y| (x, y))).collect();
    pairs.sort_by(|&x, &y| report.edge_probs[y].total_cmp(&report.edge_probs[x]).then(x.cmp(&y)));
    let _ = writeln!(s, "top edges (inclusion probability, mean correlation):");
    for &(x, y) in pairs.iter().take(10) {
        let _ = writeln!(
            s,
            "  {:>10} - {:<10} {:.3}  {:+.3}",
            names[x],
            names[y],
            report.edge_probs[(x, y)],
            report.correlation[(x, y)]
        );
    }
    if let Some(t) = &report.tables {
        let _ = writeln!(s, "sum of squared cell errors {:.2}", t.sse);
    }
    s
}

/// Parses arguments, runs, writes outputs and prints the summary. Returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match RunConfig::try_from(args).and_then(|cfg| {
        let report = execute(&cfg)?;
        write_outputs(&report, &cfg.out)?;
        Ok(report)
    }) {
        Ok(report) => {
            print!("{}", summary_text(&report));
            println!("outputs written to {}", report.config.out.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
