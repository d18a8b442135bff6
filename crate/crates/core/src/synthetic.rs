//! Deterministic synthetic benchmark datasets.
//!
//! The reference bundle stands in for the published town-level data: a few
//! hundred towns with log-uniform populations whose reference-year rates
//! are constructed so that the method-of-moments prior fit lands on the
//! target beta law. Three anchor towns with fixed counts pin the familiar
//! reference points (a small high-rate town, a small low-rate town, and a
//! metropolis sitting on the prior mean). Other years are simulated
//! binomially, so multi-year pooling and regression to the mean behave
//! naturally.

use crate::distributions::{fit_beta_from_moments, sample_binomial, BetaParams, RngState};
use crate::estimators::TownObservation;
use crate::ingestion::{Dataset, Provenance};
use crate::Result;

/// Seed used by the bundled reference dataset.
pub const DEFAULT_SEED: u64 = 2016;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub towns: usize,
    pub years: Vec<i32>,
    pub reference_year: i32,
    pub seed: u64,
    /// Beta law the pooled reference-year rates should follow.
    pub target: BetaParams,
    /// Log-uniform population range, inclusive.
    pub population_range: (u64, u64),
    /// Include the three fixed anchor towns.
    pub anchors: bool,
    /// Construct reference-year counts as rounded expectations calibrated
    /// so the moment fit of the pooled rates recovers `target`; when false
    /// every year is an independent binomial draw from the latent rates.
    pub calibrate_reference_year: bool,
}

impl SyntheticConfig {
    /// The bundled stand-in for the published dataset.
    pub fn reference_bundle(seed: u64) -> Self {
        Self {
            towns: 430,
            years: vec![2014, 2015, 2016],
            reference_year: 2016,
            seed,
            target: BetaParams::new(5.0, 917.0).expect("static shapes"),
            population_range: (250, 700_000),
            anchors: true,
            calibrate_reference_year: true,
        }
    }

    /// A single fully random year, for funnel-style checks.
    pub fn funnel(towns: usize, seed: u64) -> Self {
        Self {
            towns,
            years: vec![2016],
            reference_year: 2016,
            seed,
            target: BetaParams::new(5.0, 917.0).expect("static shapes"),
            population_range: (250, 700_000),
            anchors: false,
            calibrate_reference_year: false,
        }
    }
}

/// Fixed anchor towns: (name, reference-year count, population).
const ANCHORS: [(&str, u64, u64); 3] = [
    ("anchor-small-high", 19, 1054),
    ("anchor-small-low", 7, 4132),
    ("anchor-metro", 3570, 658_390),
];

pub fn generate(config: &SyntheticConfig) -> Result<Dataset> {
    if config.towns < 3 {
        return Err(crate::Error::Domain(
            "synthetic dataset needs at least 3 towns".to_string(),
        ));
    }
    if !config.years.contains(&config.reference_year) {
        return Err(crate::Error::Domain(format!(
            "reference year {} not among configured years",
            config.reference_year
        )));
    }
    let m = config.towns;
    let (lo, hi) = config.population_range;
    if lo < 2 || hi <= lo {
        return Err(crate::Error::Domain(format!(
            "bad population range ({lo}, {hi})"
        )));
    }

    let mut pop_rng = RngState::new(config.seed, 0);
    let populations: Vec<u64> = (0..m)
        .map(|_| log_uniform(lo, hi, &mut pop_rng))
        .collect();

    let latent = if config.calibrate_reference_year {
        calibrate_latent(config, &populations)?
    } else {
        // latent rates drawn straight from the target law
        let mut rng = RngState::new(config.seed, 1);
        (0..m)
            .map(|_| config.target.quantile(rng_uniform_open(&mut rng)))
            .collect::<Result<Vec<_>>>()?
    };

    let mut observations = Vec::new();
    let mut count_rng = RngState::new(config.seed, 2);
    for (i, (&n, &theta)) in populations.iter().zip(&latent).enumerate() {
        let town = format!("town{:04}", i + 1);
        for &year in &config.years {
            let k = if config.calibrate_reference_year && year == config.reference_year {
                expected_count(n, theta)
            } else {
                sample_binomial(n, theta, &mut count_rng)?
            };
            observations.push(TownObservation::new(&town, year, k, n)?);
        }
    }

    if config.anchors {
        for (name, k_ref, n) in ANCHORS {
            let theta = k_ref as f64 / n as f64;
            for &year in &config.years {
                let k = if year == config.reference_year {
                    k_ref
                } else {
                    sample_binomial(n, theta, &mut count_rng)?
                };
                observations.push(TownObservation::new(name, year, k, n)?);
            }
        }
    }

    Dataset::new(
        observations,
        Provenance {
            sources: vec![format!(
                "synthetic:seed={},towns={},years={:?}",
                config.seed, config.towns, config.years
            )],
            checksum: String::new(),
        },
    )
}

/// The bundled reference dataset on the default seed.
pub fn reference_dataset() -> Result<Dataset> {
    generate(&SyntheticConfig::reference_bundle(DEFAULT_SEED))
}

/// Uniform kept strictly inside (0, 1) so it is a valid quantile argument.
fn rng_uniform_open(rng: &mut RngState) -> f64 {
    loop {
        let u = uniform(rng);
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

fn uniform(rng: &mut RngState) -> f64 {
    crate::distributions::raw_uniform(rng)
}

fn log_uniform(lo: u64, hi: u64, rng: &mut RngState) -> u64 {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let v = (a + uniform(rng) * (b - a)).exp().round() as u64;
    v.clamp(lo, hi)
}

fn expected_count(n: u64, theta: f64) -> u64 {
    ((n as f64 * theta).round().max(0.0) as u64).min(n)
}

/// Picks latent rates (stratified quantiles of a beta law) whose rounded
/// expected counts, pooled with the anchors, reproduce the target moments
/// in the reference year. Fixed-point iteration on the latent mean and
/// variance; deterministic given the populations.
fn calibrate_latent(config: &SyntheticConfig, populations: &[u64]) -> Result<Vec<f64>> {
    let m = populations.len();
    let target_mean = config.target.mean();
    let target_var = config.target.variance();

    let mut mean = target_mean;
    let mut var = target_var * 0.6; // rounding and anchors add spread
    let mut latent = Vec::new();
    for _ in 0..25 {
        let var_cap = 0.99 * mean * (1.0 - mean);
        let law = fit_beta_from_moments(mean, var.min(var_cap).max(1e-16))?;
        latent = (0..m)
            .map(|i| law.quantile((i as f64 + 0.5) / m as f64))
            .collect::<Result<Vec<_>>>()?;

        let mut rates: Vec<f64> = populations
            .iter()
            .zip(&latent)
            .map(|(&n, &t)| expected_count(n, t) as f64 / n as f64)
            .collect();
        if config.anchors {
            rates.extend(ANCHORS.iter().map(|&(_, k, n)| k as f64 / n as f64));
        }
        let len = rates.len() as f64;
        let got_mean = rates.iter().sum::<f64>() / len;
        let got_var = rates
            .iter()
            .map(|r| (r - got_mean) * (r - got_mean))
            .sum::<f64>()
            / (len - 1.0);

        let mean_err = (got_mean - target_mean).abs() / target_mean;
        let var_err = (got_var - target_var).abs() / target_var;
        if mean_err < 1e-6 && var_err < 1e-4 {
            break;
        }
        mean += target_mean - got_mean;
        var *= target_var / got_var;
    }
    Ok(latent)
}
