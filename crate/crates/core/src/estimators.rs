//! Point estimators: MLE, conjugate-posterior shrinkage, the δ-weight
//! decomposition, pooled variance, James-Stein (to zero), Efron-Morris
//! (to the grand mean), and the posterior information ratios.
//!
//! All functions are pure and safe to map over towns in parallel.

use serde::{Deserialize, Serialize};

use crate::distributions::BetaParams;
use crate::{Error, Result};

/// One (town, year) record: event count and population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TownObservation {
    town: String,
    year: i32,
    count: u64,
    population: u64,
}

impl TownObservation {
    pub fn new(town: impl Into<String>, year: i32, count: u64, population: u64) -> Result<Self> {
        let town = town.into();
        if population == 0 {
            return Err(Error::Domain(format!(
                "{town} ({year}): population must be at least 1"
            )));
        }
        if count > population {
            return Err(Error::Domain(format!(
                "{town} ({year}): count {count} exceeds population {population}"
            )));
        }
        Ok(Self {
            town,
            year,
            count,
            population,
        })
    }

    pub fn town(&self) -> &str {
        &self.town
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn population(&self) -> u64 {
        self.population
    }
}

/// Per-town estimate bundle produced for reports.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub town: String,
    pub count: u64,
    pub population: u64,
    pub mle: f64,
    pub posterior: BetaParams,
    pub shrinkage: f64,
    pub js: f64,
    pub delta: f64,
    pub info_ratio_success: Option<f64>,
    pub info_ratio_failure: Option<f64>,
}

/// Maximum likelihood estimate k/n.
pub fn mle(obs: &TownObservation) -> f64 {
    obs.count as f64 / obs.population as f64
}

/// Conjugate update: Beta(α, β) prior with k successes out of n trials
/// gives Beta(α + k, β + n − k).
pub fn posterior(obs: &TownObservation, prior: &BetaParams) -> BetaParams {
    BetaParams::new(
        prior.alpha() + obs.count as f64,
        prior.beta() + (obs.population - obs.count) as f64,
    )
    .expect("posterior parameters are positive by construction")
}

/// Posterior mean (α + k)/(α + β + n), the shrinkage estimate.
pub fn shrinkage_estimate(obs: &TownObservation, prior: &BetaParams) -> f64 {
    (prior.alpha() + obs.count as f64) / (prior.alpha() + prior.beta() + obs.population as f64)
}

/// δ = (α + β)/(α + β + n): the prior's share of the posterior mean.
/// Strictly inside (0, 1) and decreasing in n.
pub fn shrinkage_weight(obs: &TownObservation, prior: &BetaParams) -> f64 {
    let s = prior.alpha() + prior.beta();
    s / (s + obs.population as f64)
}

/// Pooled variance Σ(nᵢ−1)σ̂ᵢ² / Σ(nᵢ−1) with σ̂ᵢ² = kᵢ(nᵢ−kᵢ)/nᵢ³.
pub fn pooled_variance(observations: &[TownObservation]) -> Result<f64> {
    if observations.len() < 2 {
        return Err(Error::Degenerate(
            "pooled variance needs at least 2 towns".to_string(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for obs in observations {
        let n = obs.population as f64;
        let k = obs.count as f64;
        let sigma2 = k * (n - k) / (n * n * n);
        num += (n - 1.0) * sigma2;
        den += n - 1.0;
    }
    if den == 0.0 {
        return Err(Error::Degenerate(
            "pooled variance undefined when every population is 1".to_string(),
        ));
    }
    Ok(num / den)
}

/// Plain James-Stein shrinkage toward zero:
/// θ̂ᵢᴶˢ = (1 − (m−2)σ̂ₚ²/Σθ̂ᵢ²)·θ̂ᵢ.
///
/// No positive-part clamp unless `positive_part` is set; outputs are not
/// clamped to [0, 1].
pub fn james_stein_zero(rates: &[f64], pooled_var: f64, positive_part: bool) -> Result<Vec<f64>> {
    if rates.len() < 3 {
        return Err(Error::Degenerate(format!(
            "James-Stein needs at least 3 rates, got {}",
            rates.len()
        )));
    }
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    if sum_sq == 0.0 {
        return Err(Error::Degenerate(
            "James-Stein undefined when all rates are zero".to_string(),
        ));
    }
    let mut factor = 1.0 - (rates.len() as f64 - 2.0) * pooled_var / sum_sq;
    if positive_part {
        factor = factor.max(0.0);
    }
    Ok(rates.iter().map(|r| factor * r).collect())
}

/// Efron-Morris variant, shrinking toward the grand mean:
/// θ̂ᵢᴶˢ = θ̄ + (1 − (m−2)σ̂ₚ²/Σ(θ̂ᵢ−θ̄)²)·(θ̂ᵢ−θ̄).
///
/// The grand mean of the outputs equals the grand mean of the inputs.
pub fn efron_morris(rates: &[f64], pooled_var: f64, positive_part: bool) -> Result<Vec<f64>> {
    if rates.len() < 3 {
        return Err(Error::Degenerate(format!(
            "Efron-Morris needs at least 3 rates, got {}",
            rates.len()
        )));
    }
    let m = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / m;
    let spread: f64 = rates.iter().map(|r| (r - mean) * (r - mean)).sum();
    if spread == 0.0 || rates.iter().all(|r| *r == rates[0]) {
        return Err(Error::Degenerate(
            "Efron-Morris undefined when all rates are equal".to_string(),
        ));
    }
    let mut factor = 1.0 - (m - 2.0) * pooled_var / spread;
    if positive_part {
        factor = factor.max(0.0);
    }
    Ok(rates.iter().map(|r| mean + factor * (r - mean)).collect())
}

/// Figure-of-merit ratios ((α+k)/k, (β+n−k)/(n−k)): the relative information
/// the prior adds in successes and failures. A ratio is absent when its
/// denominator is zero.
pub fn information_ratios(
    obs: &TownObservation,
    prior: &BetaParams,
) -> (Option<f64>, Option<f64>) {
    let k = obs.count as f64;
    let fails = (obs.population - obs.count) as f64;
    let success = if obs.count > 0 {
        Some((prior.alpha() + k) / k)
    } else {
        None
    };
    let failure = if obs.population > obs.count {
        Some((prior.beta() + fails) / fails)
    } else {
        None
    };
    (success, failure)
}

/// Full per-town estimate bundle for a single year's observations.
/// The James-Stein column uses the Efron-Morris variant so both shrinkage
/// methods pull toward the same point.
pub fn estimate_records(
    observations: &[TownObservation],
    prior: &BetaParams,
) -> Result<Vec<EstimateRecord>> {
    let rates: Vec<f64> = observations.iter().map(mle).collect();
    let pooled = pooled_variance(observations)?;
    let js = efron_morris(&rates, pooled, false)?;
    Ok(observations
        .iter()
        .zip(rates.iter().zip(js.iter()))
        .map(|(obs, (&rate, &js))| {
            let (irs, irf) = information_ratios(obs, prior);
            EstimateRecord {
                town: obs.town().to_string(),
                count: obs.count(),
                population: obs.population(),
                mle: rate,
                posterior: posterior(obs, prior),
                shrinkage: shrinkage_estimate(obs, prior),
                js,
                delta: shrinkage_weight(obs, prior),
                info_ratio_success: irs,
                info_ratio_failure: irf,
            }
        })
        .collect())
}

/// 1-based ranks in descending order of `values`; ties break by ascending
/// town identifier for deterministic reports.
pub fn descending_ranks(towns: &[String], values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap()
            .then_with(|| towns[i].cmp(&towns[j]))
    });
    let mut ranks = vec![0; values.len()];
    for (rank, &i) in idx.iter().enumerate() {
        ranks[i] = rank + 1;
    }
    ranks
}
