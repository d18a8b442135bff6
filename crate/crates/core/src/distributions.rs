//! Beta and binomial distribution support: moments, density, method-of-moments
//! fitting, and exact binomial sampling on reproducible substreams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::specfun::{beta_quantile, log_beta, reg_inc_beta};
use crate::{Error, Result};

/// Shape pair of a beta distribution, used both as prior and as posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::Domain(format!(
                "beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// α / (α + β)
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// αβ / ((α+β)² (α+β+1))
    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Density at x in [0, 1]. May be +∞ at an endpoint when the matching
    /// shape is below one.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("pdf requires x in [0, 1], got {x}")));
        }
        let ln_b = log_beta(self.alpha, self.beta)?;
        Ok(((self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (1.0 - x).ln() - ln_b).exp())
    }

    /// CDF at x, i.e. I_x(α, β).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        reg_inc_beta(x, self.alpha, self.beta)
    }

    /// Inverse CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        beta_quantile(p, self.alpha, self.beta)
    }
}

/// An ordered pool of observed rates (per-town MLEs), the input to the
/// method-of-moments prior fit.
#[derive(Debug, Clone)]
pub struct RateSample {
    rates: Vec<f64>,
}

impl RateSample {
    /// Requires at least two rates, all in [0, 1], with positive sample
    /// variance. Exact zeros and ones are allowed.
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::Degenerate(format!(
                "rate sample needs at least 2 entries, got {}",
                rates.len()
            )));
        }
        if let Some(bad) = rates
            .iter()
            .find(|r| !r.is_finite() || !(0.0..=1.0).contains(*r))
        {
            return Err(Error::Domain(format!("rate {bad} outside [0, 1]")));
        }
        let s = Self { rates };
        if s.variance() <= 0.0 {
            return Err(Error::Degenerate(
                "rate sample has zero variance".to_string(),
            ));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }

    pub fn mean(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }

    /// Sample variance with the m−1 denominator.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.rates.iter().map(|r| (r - m) * (r - m)).sum::<f64>()
            / (self.rates.len() as f64 - 1.0)
    }
}

/// Method-of-moments fit of a beta distribution to pooled rates:
/// α = ((1−θ̄)/S² − 1/θ̄)·θ̄², β = α(1−θ̄)/θ̄.
///
/// Fails when the sample moments are incompatible with any beta law
/// (S² ≥ θ̄(1−θ̄)) or when θ̄ falls on a boundary.
pub fn fit_beta_moments(sample: &RateSample) -> Result<BetaParams> {
    fit_beta_from_moments(sample.mean(), sample.variance())
}

/// Moment fit from explicit (mean, variance).
pub fn fit_beta_from_moments(mean: f64, variance: f64) -> Result<BetaParams> {
    if !(0.0 < mean && mean < 1.0) {
        return Err(Error::Domain(format!(
            "moment fit requires mean in (0, 1), got {mean}"
        )));
    }
    if variance <= 0.0 {
        return Err(Error::Degenerate(format!(
            "moment fit requires positive variance, got {variance}"
        )));
    }
    if variance >= mean * (1.0 - mean) {
        return Err(Error::Degenerate(format!(
            "sample variance {variance} is incompatible with a beta law at mean {mean}"
        )));
    }
    let alpha = ((1.0 - mean) / variance - 1.0 / mean) * mean * mean;
    let beta = alpha * (1.0 - mean) / mean;
    BetaParams::new(alpha, beta)
}

/// Reproducible RNG handle: identical (seed, stream) pairs yield identical
/// draw sequences regardless of platform or thread count. A single value
/// must not be advanced from two threads at once; clone or derive a new
/// stream instead.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh state on the same seed but a different stream.
    pub fn substream(&self, stream: u64) -> Self {
        Self::new(self.seed, stream)
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

pub(crate) fn raw_uniform(rng: &mut RngState) -> f64 {
    rng.uniform()
}

/// Exact binomial draw: inversion by sequential search when
/// n·min(p, 1−p) < 30, BTPE rejection otherwise. No normal approximation
/// anywhere.
pub fn sample_binomial(n: u64, p: f64, rng: &mut RngState) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("binomial requires n >= 1".to_string()));
    }
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "binomial requires p in [0, 1], got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(n);
    }
    let r = p.min(1.0 - p);
    let flipped = p > 0.5;
    let k = if (n as f64) * r < 30.0 {
        binomial_inversion(n, r, rng)
    } else {
        binomial_btpe(n, r, rng)
    };
    Ok(if flipped { n - k } else { k })
}

/// Sequential-search inversion of the CDF, valid while n·r stays small.
fn binomial_inversion(n: u64, r: f64, rng: &mut RngState) -> u64 {
    let q = 1.0 - r;
    let s = r / q;
    // n*r < 30 keeps q^n well above underflow; ln1p form stays accurate
    // when n is huge and r tiny
    let f0 = (n as f64 * (-r).ln_1p()).exp();
    loop {
        let mut u = rng.uniform();
        let mut f = f0;
        let mut x: u64 = 0;
        let mut overran = false;
        while u > f {
            u -= f;
            x += 1;
            if x > n {
                overran = true;
                break;
            }
            f *= s * (n - x + 1) as f64 / x as f64;
        }
        if !overran {
            return x;
        }
        // accumulated rounding pushed u past the total mass; redraw
    }
}

fn stirling_tail(f: f64, f2: f64) -> f64 {
    (13860.0 - (462.0 - (132.0 - (99.0 - 140.0 / f2) / f2) / f2) / f2) / f / 166320.0
}

/// BTPE (Kachitvichyanukul & Schmeiser): triangle/parallelogram/exponential
/// envelope with squeeze acceptance. Requires n·r ≥ 30 and r ≤ 0.5.
fn binomial_btpe(n: u64, r: f64, rng: &mut RngState) -> u64 {
    let nf = n as f64;
    let q = 1.0 - r;
    let nrq = nf * r * q;
    let fm = nf * r + r;
    let m = fm.floor();
    let p1 = (2.195 * nrq.sqrt() - 4.6 * q).floor() + 0.5;
    let xm = m + 0.5;
    let xl = xm - p1;
    let xr = xm + p1;
    let c = 0.134 + 20.5 / (15.3 + m);
    let al = (fm - xl) / (fm - xl * r);
    let lambda_l = al * (1.0 + 0.5 * al);
    let ar = (xr - fm) / (xr * q);
    let lambda_r = ar * (1.0 + 0.5 * ar);
    let p2 = p1 * (1.0 + 2.0 * c);
    let p3 = p2 + c / lambda_l;
    let p4 = p3 + c / lambda_r;

    loop {
        let u = rng.uniform() * p4;
        let mut v = rng.uniform();

        let y: f64;
        if u <= p1 {
            // central triangle: accept immediately
            return (xm - p1 * v + u).floor() as u64;
        } else if u <= p2 {
            // parallelogram
            let x = xl + (u - p1) / c;
            v = v * c + 1.0 - (m - x + 0.5).abs() / p1;
            if v > 1.0 {
                continue;
            }
            y = x.floor();
        } else if u <= p3 {
            // left exponential tail
            y = (xl + v.ln() / lambda_l).floor();
            if y < 0.0 {
                continue;
            }
            v *= (u - p2) * lambda_l;
        } else {
            // right exponential tail
            y = (xr - v.ln() / lambda_r).floor();
            if y > nf {
                continue;
            }
            v *= (u - p3) * lambda_r;
        }

        let k = (y - m).abs();
        if k <= 20.0 || k >= nrq / 2.0 - 1.0 {
            // evaluate the pmf ratio f(y)/f(m) directly
            let s = r / q;
            let aa = s * (nf + 1.0);
            let mut f = 1.0;
            if m < y {
                let mut i = m + 1.0;
                while i <= y {
                    f *= aa / i - s;
                    i += 1.0;
                }
            } else if m > y {
                let mut i = y + 1.0;
                while i <= m {
                    f /= aa / i - s;
                    i += 1.0;
                }
            }
            if v <= f {
                return y as u64;
            }
            continue;
        }

        // squeeze bounds on ln(f(y)/f(m))
        let rho = (k / nrq) * ((k * (k / 3.0 + 0.625) + 1.0 / 6.0) / nrq + 0.5);
        let t = -k * k / (2.0 * nrq);
        let big_a = v.ln();
        if big_a < t - rho {
            return y as u64;
        }
        if big_a > t + rho {
            continue;
        }

        // final acceptance test via Stirling-corrected log ratio
        let x1 = y + 1.0;
        let f1 = m + 1.0;
        let z = nf + 1.0 - m;
        let w = nf - y + 1.0;
        let x2 = x1 * x1;
        let f2 = f1 * f1;
        let z2 = z * z;
        let w2 = w * w;
        let bound = xm * (f1 / x1).ln()
            + (nf - m + 0.5) * (z / w).ln()
            + (y - m) * (w * r / (x1 * q)).ln()
            + stirling_tail(f1, f2)
            + stirling_tail(z, z2)
            - stirling_tail(x1, x2)
            - stirling_tail(w, w2);
        if big_a <= bound {
            return y as u64;
        }
    }
}
