//! Command-line front end: prior fitting, estimation tables, synthetic data
//! generation, and the Monte Carlo study, all with reproducible run
//! manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rateshrink::distributions::fit_beta_moments;
use rateshrink::estimators::{descending_ranks, estimate_records};
use rateshrink::ingestion::{load_csv, Dataset};
use rateshrink::intervals::{credible_interval, wald_interval};
use rateshrink::manifest::RunManifest;
use rateshrink::simulation::{build_truths, run_simulation, SimulationConfig};
use rateshrink::synthetic::{self, SyntheticConfig};
use rateshrink::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rateshrink",
    version,
    about = "Empirical-Bayes shrinkage estimation of binomial rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the beta prior to one year's pooled rates by the method of
    /// moments and emit quantile-quantile pairs for the fit.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        year: i32,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Per-town estimates: MLE, shrinkage, James-Stein, delta weight,
    /// intervals, information ratios, and ranks.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        year: i32,
        /// Interval level.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Rows in the top-N view.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Also emit a year-pair rate table (for regression-to-the-mean
        /// plots) against this year.
        #[arg(long)]
        compare_year: Option<i32>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo risk and coverage study on truths pooled from the
    /// dataset's full history.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        /// Reference year for populations.
        #[arg(long)]
        year: i32,
        #[arg(long)]
        reps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Fit the prior once from the truths instead of refitting per
        /// replication.
        #[arg(long)]
        freeze_prior: bool,
        /// Worker threads (default: machine parallelism).
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Generate a synthetic benchmark dataset as counts/population CSVs.
    Synth {
        #[arg(long, default_value_t = 430)]
        towns: usize,
        #[arg(long, default_value_t = synthetic::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Counts CSV (town,year,count[,category]).
    #[arg(long, requires = "population")]
    counts: Option<PathBuf>,
    /// Populations CSV (town,year,population).
    #[arg(long, requires = "counts")]
    population: Option<PathBuf>,
    /// Crime category filter (requires a category column).
    #[arg(long)]
    category: Option<String>,
    /// Normalized dataset CSV (town,year,count,population), alternative to
    /// --counts/--population.
    #[arg(long, conflicts_with_all = ["counts", "population", "category"])]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (default: $RATESHRINK_OUT_DIR or the working
    /// directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl OutArgs {
    fn dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os("RATESHRINK_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

impl InputArgs {
    fn load(&self, manifest: &mut RunManifest) -> Result<Dataset> {
        if let Some(data) = &self.data {
            manifest.record_input(data)?;
            return Dataset::load_normalized(data);
        }
        let (Some(counts), Some(population)) = (&self.counts, &self.population) else {
            return Err(Error::Data(
                "either --data or both --counts and --population are required".to_string(),
            ));
        };
        manifest.record_input(counts)?;
        manifest.record_input(population)?;
        let report = load_csv(counts, population, self.category.as_deref())?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        Ok(report.dataset)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, std::env::args().skip(1).collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Data(_) | Error::Csv(_) | Error::Io(_) | Error::Json(_) => {
                    ExitCode::from(2)
                }
                Error::Domain(_)
                | Error::Degenerate(_)
                | Error::Convergence(_)
                | Error::LengthMismatch { .. } => ExitCode::from(3),
            }
        }
    }
}

fn run(command: Command, argv: Vec<String>) -> Result<()> {
    match command {
        Command::Fit { input, year, out } => cmd_fit(input, year, out, argv),
        Command::Estimate {
            input,
            year,
            level,
            top,
            compare_year,
            out,
        } => cmd_estimate(input, year, level, top, compare_year, out, argv),
        Command::Simulate {
            input,
            year,
            reps,
            seed,
            level,
            freeze_prior,
            workers,
            out,
        } => cmd_simulate(
            input,
            year,
            reps,
            seed,
            level,
            freeze_prior,
            workers,
            out,
            argv,
        ),
        Command::Synth { towns, seed, out } => cmd_synth(towns, seed, out, argv),
        Command::Replay { manifest } => {
            let recorded = RunManifest::load(&manifest)?;
            let mut full = vec!["rateshrink".to_string()];
            full.extend(recorded.command.iter().cloned());
            let cli = Cli::try_parse_from(&full)
                .map_err(|e| Error::Data(format!("manifest command does not parse: {e}")))?;
            run(cli.command, recorded.command)
        }
    }
}

fn finish_manifest(
    mut manifest: RunManifest,
    seed: Option<u64>,
    outputs: &[&Path],
    path: &Path,
) -> Result<()> {
    manifest.seed = seed;
    manifest.outputs = outputs
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    manifest.save(path)
}

fn cmd_fit(input: InputArgs, year: i32, out: OutArgs, argv: Vec<String>) -> Result<()> {
    let mut manifest = RunManifest::new(argv);
    let dataset = input.load(&mut manifest)?;
    let rates = dataset.rates(year)?;
    let prior = fit_beta_moments(&rates)?;

    println!("prior fit for {year} ({} towns)", rates.len());
    println!("  alpha    = {:.6}", prior.alpha());
    println!("  beta     = {:.6}", prior.beta());
    println!("  mean     = {:.8}", rates.mean());
    println!("  variance = {:.6e}", rates.variance());

    let dir = out.dir();
    fs::create_dir_all(&dir)?;
    let prior_path = dir.join("prior.json");
    let report = serde_json::json!({
        "year": year,
        "towns": rates.len(),
        "alpha": prior.alpha(),
        "beta": prior.beta(),
        "rate_mean": rates.mean(),
        "rate_variance": rates.variance(),
    });
    fs::write(&prior_path, serde_json::to_string_pretty(&report)? + "\n")?;

    // quantile-quantile pairs: empirical order statistics vs fitted law
    let qq_path = dir.join("qq.csv");
    let mut sorted = rates.as_slice().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut w = csv::Writer::from_path(&qq_path)?;
    w.write_record(["p", "empirical", "fitted"])?;
    for (i, rate) in sorted.iter().enumerate() {
        let p = (i as f64 + 0.5) / sorted.len() as f64;
        w.write_record([
            format!("{p:.8}"),
            format!("{rate:.10}"),
            format!("{:.10}", prior.quantile(p)?),
        ])?;
    }
    w.flush()?;

    finish_manifest(
        manifest,
        None,
        &[&prior_path, &qq_path],
        &dir.join("fit.manifest.json"),
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    input: InputArgs,
    year: i32,
    level: f64,
    top: usize,
    compare_year: Option<i32>,
    out: OutArgs,
    argv: Vec<String>,
) -> Result<()> {
    let mut manifest = RunManifest::new(argv);
    let dataset = input.load(&mut manifest)?;
    let observations: Vec<_> = dataset
        .year_observations(year)?
        .into_iter()
        .cloned()
        .collect();
    let prior = fit_beta_moments(&dataset.rates(year)?)?;
    let records = estimate_records(&observations, &prior)?;

    let towns: Vec<String> = records.iter().map(|r| r.town.clone()).collect();
    let mles: Vec<f64> = records.iter().map(|r| r.mle).collect();
    let shrunk: Vec<f64> = records.iter().map(|r| r.shrinkage).collect();
    let mle_ranks = descending_ranks(&towns, &mles);
    let shrink_ranks = descending_ranks(&towns, &shrunk);

    let dir = out.dir();
    fs::create_dir_all(&dir)?;
    let estimates_path = dir.join("estimates.csv");
    let mut w = csv::Writer::from_path(&estimates_path)?;
    w.write_record([
        "town",
        "count",
        "population",
        "mle",
        "shrinkage",
        "js",
        "delta",
        "wald_lo",
        "wald_hi",
        "cred_lo",
        "cred_hi",
        "info_ratio_success",
        "info_ratio_failure",
        "rank_mle",
        "rank_shrinkage",
    ])?;
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_default();
    let mut rows = Vec::new();
    for (i, (record, obs)) in records.iter().zip(&observations).enumerate() {
        let wald = wald_interval(obs, level)?;
        let cred = credible_interval(&record.posterior, level)?;
        rows.push((record, wald, cred, mle_ranks[i], shrink_ranks[i]));
    }
    for (record, wald, cred, rank_mle, rank_shrink) in &rows {
        w.write_record([
            record.town.clone(),
            record.count.to_string(),
            record.population.to_string(),
            format!("{:.10}", record.mle),
            format!("{:.10}", record.shrinkage),
            format!("{:.10}", record.js),
            format!("{:.10}", record.delta),
            format!("{:.10}", wald.lower),
            format!("{:.10}", wald.upper),
            format!("{:.10}", cred.lower),
            format!("{:.10}", cred.upper),
            fmt_opt(record.info_ratio_success),
            fmt_opt(record.info_ratio_failure),
            rank_mle.to_string(),
            rank_shrink.to_string(),
        ])?;
    }
    w.flush()?;

    // top-N view by shrinkage rank
    let top_path = dir.join("top.csv");
    let mut by_rank: Vec<_> = rows.iter().collect();
    by_rank.sort_by_key(|(_, _, _, _, rank_shrink)| *rank_shrink);
    let mut w = csv::Writer::from_path(&top_path)?;
    w.write_record(["rank", "town", "mle", "shrinkage", "cred_lo", "cred_hi"])?;
    println!("top {top} towns by shrinkage estimate ({year}, level {level}):");
    println!("{:<5}{:<20}{:>12}{:>12}", "rank", "town", "mle", "shrink");
    for (record, _, cred, _, rank) in by_rank.into_iter().take(top) {
        w.write_record([
            rank.to_string(),
            record.town.clone(),
            format!("{:.10}", record.mle),
            format!("{:.10}", record.shrinkage),
            format!("{:.10}", cred.lower),
            format!("{:.10}", cred.upper),
        ])?;
        println!(
            "{:<5}{:<20}{:>12.6}{:>12.6}",
            rank, record.town, record.mle, record.shrinkage
        );
    }
    w.flush()?;

    let mut outputs: Vec<PathBuf> = vec![estimates_path, top_path];
    if let Some(other) = compare_year {
        let pair_path = dir.join("year_pair.csv");
        let mut w = csv::Writer::from_path(&pair_path)?;
        w.write_record([
            "town".to_string(),
            format!("rate_{other}"),
            format!("rate_{year}"),
        ])?;
        let other_obs = dataset.year_observations(other)?;
        for obs in other_obs {
            if let Some(record) = records.iter().find(|r| r.town == obs.town()) {
                let other_rate = obs.count() as f64 / obs.population() as f64;
                w.write_record([
                    obs.town().to_string(),
                    format!("{other_rate:.10}"),
                    format!("{:.10}", record.mle),
                ])?;
            }
        }
        w.flush()?;
        outputs.push(pair_path);
    }

    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    finish_manifest(manifest, None, &refs, &dir.join("estimate.manifest.json"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    input: InputArgs,
    year: i32,
    reps: u32,
    seed: u64,
    level: f64,
    freeze_prior: bool,
    workers: Option<usize>,
    out: OutArgs,
    argv: Vec<String>,
) -> Result<()> {
    let mut manifest = RunManifest::new(argv);
    let dataset = input.load(&mut manifest)?;
    let (_, truths, populations) = build_truths(dataset.observations(), year)?;

    let config = SimulationConfig {
        truths,
        populations,
        replications: reps,
        level,
        seed,
        refit_prior_each_rep: !freeze_prior,
        workers,
    };
    let summary = run_simulation(&config)?;

    println!("monte carlo study: {} replications, seed {seed}", reps);
    println!(
        "  risk      mle {:.6e}   shrinkage {:.6e}   js {:.6e}",
        summary.risk_mle, summary.risk_shrinkage, summary.risk_js
    );
    println!(
        "  coverage  wald {:.4}   credible {:.4}   (nominal {level})",
        summary.coverage_wald, summary.coverage_credible
    );
    if summary.failed_replications > 0 {
        println!("  failed replications: {}", summary.failed_replications);
    }

    let dir = out.dir();
    fs::create_dir_all(&dir)?;
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;

    let samples_path = dir.join("samples.csv");
    let mut w = csv::Writer::from_path(&samples_path)?;
    w.write_record([
        "replication",
        "loss_mle",
        "loss_shrinkage",
        "loss_js",
        "coverage_wald",
        "coverage_credible",
    ])?;
    for (i, (loss, cov)) in summary
        .loss_samples
        .iter()
        .zip(&summary.coverage_samples)
        .enumerate()
    {
        w.write_record([
            i.to_string(),
            format!("{:.12e}", loss.mle),
            format!("{:.12e}", loss.shrinkage),
            format!("{:.12e}", loss.js),
            format!("{:.8}", cov.wald),
            format!("{:.8}", cov.credible),
        ])?;
    }
    w.flush()?;

    finish_manifest(
        manifest,
        Some(seed),
        &[&summary_path, &samples_path],
        &dir.join("simulate.manifest.json"),
    )
}

fn cmd_synth(towns: usize, seed: u64, out: OutArgs, argv: Vec<String>) -> Result<()> {
    let manifest = RunManifest::new(argv);
    let mut config = SyntheticConfig::reference_bundle(seed);
    config.towns = towns;
    let dataset = synthetic::generate(&config)?;

    let dir = out.dir();
    fs::create_dir_all(&dir)?;
    let counts_path = dir.join("counts.csv");
    let mut w = csv::Writer::from_path(&counts_path)?;
    w.write_record(["town", "year", "count"])?;
    for o in dataset.observations() {
        w.write_record([o.town().to_string(), o.year().to_string(), o.count().to_string()])?;
    }
    w.flush()?;

    let pop_path = dir.join("population.csv");
    let mut w = csv::Writer::from_path(&pop_path)?;
    w.write_record(["town", "year", "population"])?;
    for o in dataset.observations() {
        w.write_record([
            o.town().to_string(),
            o.year().to_string(),
            o.population().to_string(),
        ])?;
    }
    w.flush()?;

    println!(
        "wrote synthetic dataset: {} observations over years {:?}",
        dataset.observations().len(),
        dataset.years()
    );

    finish_manifest(
        manifest,
        Some(seed),
        &[&counts_path, &pop_path],
        &dir.join("synth.manifest.json"),
    )
}
