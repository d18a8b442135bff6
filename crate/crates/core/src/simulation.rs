//! Monte Carlo risk and coverage study.
//!
//! Truths come from multi-year pooling of observed rates; each replication
//! simulates counts binomially, re-estimates everything from scratch, and
//! records total squared-error loss per estimator and internal coverage per
//! interval kind. Replications run on independent RNG substreams keyed by
//! replication index, so results are bit-identical for a fixed seed at any
//! worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{fit_beta_moments, sample_binomial, BetaParams, RateSample, RngState};
use crate::estimators::{efron_morris, pooled_variance, TownObservation};
use crate::intervals::{credible_interval, wald_interval, Interval};
use crate::{Error, Result};

/// Inputs of one Monte Carlo study.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationConfig {
    /// Per-town true rates.
    pub truths: Vec<f64>,
    /// Per-town populations (reference-year sizes).
    pub populations: Vec<u64>,
    pub replications: u32,
    /// Interval level, e.g. 0.95.
    pub level: f64,
    pub seed: u64,
    /// Refit the beta prior from each replication's simulated rates
    /// (default). When false the prior is fit once from the truths.
    pub refit_prior_each_rep: bool,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl SimulationConfig {
    pub fn new(truths: Vec<f64>, populations: Vec<u64>, replications: u32, seed: u64) -> Self {
        Self {
            truths,
            populations,
            replications,
            level: 0.95,
            seed,
            refit_prior_each_rep: true,
            workers: None,
        }
    }
}

/// Losses of one replication, one entry per estimator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossSample {
    pub mle: f64,
    pub shrinkage: f64,
    pub js: f64,
}

/// Internal coverage of one replication, one entry per interval kind.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverageSample {
    pub wald: f64,
    pub credible: f64,
}

/// Monte Carlo standard errors of the summary statistics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McStandardErrors {
    pub risk_mle: f64,
    pub risk_shrinkage: f64,
    pub risk_js: f64,
    pub coverage_wald: f64,
    pub coverage_credible: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub risk_mle: f64,
    pub risk_shrinkage: f64,
    pub risk_js: f64,
    pub coverage_wald: f64,
    pub coverage_credible: f64,
    pub mc_standard_errors: McStandardErrors,
    pub replications: u32,
    /// Replications whose moment fit degenerated; excluded from the means
    /// and from the sample arrays.
    pub failed_replications: u32,
    pub seed: u64,
    pub level: f64,
    #[serde(skip)]
    pub loss_samples: Vec<LossSample>,
    #[serde(skip)]
    pub coverage_samples: Vec<CoverageSample>,
}

/// Pools each town's yearly rates into their unweighted mean (the simulation
/// "truth") and takes populations from the reference year. Every town must
/// be observed in the reference year.
pub fn build_truths(
    history: &[TownObservation],
    reference_year: i32,
) -> Result<(Vec<String>, Vec<f64>, Vec<u64>)> {
    if history.is_empty() {
        return Err(Error::Data("cannot build truths from an empty history".into()));
    }
    let mut per_town: BTreeMap<&str, (f64, u32, Option<u64>)> = BTreeMap::new();
    for obs in history {
        let entry = per_town.entry(obs.town()).or_insert((0.0, 0, None));
        entry.0 += obs.count() as f64 / obs.population() as f64;
        entry.1 += 1;
        if obs.year() == reference_year {
            entry.2 = Some(obs.population());
        }
    }
    let mut towns = Vec::with_capacity(per_town.len());
    let mut truths = Vec::with_capacity(per_town.len());
    let mut populations = Vec::with_capacity(per_town.len());
    for (town, (rate_sum, years, pop)) in per_town {
        let pop = pop.ok_or_else(|| {
            Error::Data(format!(
                "town {town} has no observation in reference year {reference_year}"
            ))
        })?;
        towns.push(town.to_string());
        truths.push(rate_sum / years as f64);
        populations.push(pop);
    }
    Ok((towns, truths, populations))
}

/// Total squared-error loss L(θ, θ̂) = Σ(θᵢ − θ̂ᵢ)².
pub fn total_squared_loss(truths: &[f64], estimates: &[f64]) -> Result<f64> {
    if truths.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            left: truths.len(),
            right: estimates.len(),
        });
    }
    Ok(truths
        .iter()
        .zip(estimates)
        .map(|(t, e)| (t - e) * (t - e))
        .sum())
}

/// Fraction of towns whose truth lies inside its interval, endpoints
/// inclusive.
pub fn internal_coverage(truths: &[f64], intervals: &[Interval]) -> Result<f64> {
    if truths.len() != intervals.len() {
        return Err(Error::LengthMismatch {
            left: truths.len(),
            right: intervals.len(),
        });
    }
    let hits = truths
        .iter()
        .zip(intervals)
        .filter(|(t, iv)| iv.contains(**t))
        .count();
    Ok(hits as f64 / truths.len() as f64)
}

struct Replication {
    loss: LossSample,
    coverage: CoverageSample,
}

fn run_replication(
    config: &SimulationConfig,
    frozen_prior: Option<&BetaParams>,
    rep: u32,
) -> Result<Replication> {
    let m = config.truths.len();
    let mut rng = RngState::new(config.seed, rep as u64);

    let mut observations = Vec::with_capacity(m);
    let mut rates = Vec::with_capacity(m);
    for (i, (&theta, &n)) in config.truths.iter().zip(&config.populations).enumerate() {
        let k = sample_binomial(n, theta, &mut rng)?;
        observations.push(TownObservation::new(format!("t{i}"), 0, k, n)?);
        rates.push(k as f64 / n as f64);
    }

    let prior = match frozen_prior {
        Some(p) => *p,
        None => fit_beta_moments(&RateSample::new(rates.clone())?)?,
    };

    let shrunk: Vec<f64> = observations
        .iter()
        .map(|o| crate::estimators::shrinkage_estimate(o, &prior))
        .collect();
    let pooled = pooled_variance(&observations)?;
    let js = efron_morris(&rates, pooled, false)?;

    let mut wald = Vec::with_capacity(m);
    let mut cred = Vec::with_capacity(m);
    for o in &observations {
        wald.push(wald_interval(o, config.level)?);
        let post = crate::estimators::posterior(o, &prior);
        cred.push(credible_interval(&post, config.level)?);
    }

    Ok(Replication {
        loss: LossSample {
            mle: total_squared_loss(&config.truths, &rates)?,
            shrinkage: total_squared_loss(&config.truths, &shrunk)?,
            js: total_squared_loss(&config.truths, &js)?,
        },
        coverage: CoverageSample {
            wald: internal_coverage(&config.truths, &wald)?,
            credible: internal_coverage(&config.truths, &cred)?,
        },
    })
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the full study. Deterministic for a fixed seed, independent of the
/// worker count: every replication draws from its own (seed, index)
/// substream and the reduction happens in index order.
///
/// A replication whose prior fit degenerates is recorded as failed and
/// excluded; the run aborts if more than 0.1% of replications fail.
pub fn run_simulation(config: &SimulationConfig) -> Result<SimulationSummary> {
    if config.truths.len() != config.populations.len() {
        return Err(Error::LengthMismatch {
            left: config.truths.len(),
            right: config.populations.len(),
        });
    }
    if config.truths.len() < 3 {
        return Err(Error::Degenerate(
            "simulation needs at least 3 towns".to_string(),
        ));
    }
    if config.replications == 0 {
        return Err(Error::Domain("replications must be positive".to_string()));
    }
    if !(0.0 < config.level && config.level < 1.0) {
        return Err(Error::Domain(format!(
            "interval level must be in (0, 1), got {}",
            config.level
        )));
    }
    if let Some(bad) = config
        .truths
        .iter()
        .find(|t| !t.is_finite() || !(0.0..=1.0).contains(*t))
    {
        return Err(Error::Domain(format!("truth {bad} outside [0, 1]")));
    }

    let frozen_prior = if config.refit_prior_each_rep {
        None
    } else {
        Some(fit_beta_moments(&RateSample::new(config.truths.clone())?)?)
    };

    let run_all = || -> Result<Vec<Result<Replication>>> {
        Ok((0..config.replications)
            .into_par_iter()
            .map(|rep| run_replication(config, frozen_prior.as_ref(), rep))
            .collect())
    };
    // collect() preserves index order, so aggregation below is
    // schedule-independent
    let results: Vec<Result<Replication>> = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Data(format!("failed to build worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let mut loss_samples = Vec::with_capacity(results.len());
    let mut coverage_samples = Vec::with_capacity(results.len());
    let mut failed = 0u32;
    for r in results {
        match r {
            Ok(rep) => {
                loss_samples.push(rep.loss);
                coverage_samples.push(rep.coverage);
            }
            Err(Error::Degenerate(_)) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if f64::from(failed) > 0.001 * f64::from(config.replications) {
        return Err(Error::Degenerate(format!(
            "{failed} of {} replications had a degenerate prior fit",
            config.replications
        )));
    }
    if loss_samples.is_empty() {
        return Err(Error::Degenerate("every replication failed".to_string()));
    }

    let (risk_mle, se_mle) = mean_and_se(loss_samples.iter().map(|l| l.mle));
    let (risk_shrinkage, se_shrink) = mean_and_se(loss_samples.iter().map(|l| l.shrinkage));
    let (risk_js, se_js) = mean_and_se(loss_samples.iter().map(|l| l.js));
    let (coverage_wald, se_wald) = mean_and_se(coverage_samples.iter().map(|c| c.wald));
    let (coverage_credible, se_cred) = mean_and_se(coverage_samples.iter().map(|c| c.credible));

    Ok(SimulationSummary {
        risk_mle,
        risk_shrinkage,
        risk_js,
        coverage_wald,
        coverage_credible,
        mc_standard_errors: McStandardErrors {
            risk_mle: se_mle,
            risk_shrinkage: se_shrink,
            risk_js: se_js,
            coverage_wald: se_wald,
            coverage_credible: se_cred,
        },
        replications: config.replications,
        failed_replications: failed,
        seed: config.seed,
        level: config.level,
        loss_samples,
        coverage_samples,
    })
}
