//! Numerical checks of the closed-form entropy results.
//!
//! Enumeration mode walks every outcome of a multinomial draw and is exact up
//! to rounding. Monte Carlo mode draws distributions from the flat density on
//! the simplex (normalized unit-rate exponentials) and compares sample
//! moments against the closed forms.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{kahan_sum, tsallis_of, CountSample, Distribution};
use crate::rng;
use crate::teb;

pub const DEFAULT_OUTCOME_CAP: f64 = 2e6;
pub const ENUMERATION_TOL: f64 = 1e-10;
pub const PROP2_SIGMAS: f64 = 4.0;
pub const PROP3_RELATIVE_TOL: f64 = 0.05;

const MC_CHUNKS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    Sigmas(f64),
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub draws_or_outcomes: u64,
    pub tolerance: Tolerance,
    pub passed: bool,
}

impl ValidationReport {
    fn judge(closed_form: f64, estimate: f64, std_error: f64, draws: u64, tolerance: Tolerance) -> Self {
        let err = (estimate - closed_form).abs();
        let passed = match tolerance {
            Tolerance::Absolute(t) => err <= t,
            Tolerance::Sigmas(k) => err <= k * std_error,
            Tolerance::Relative(r) => err <= r * closed_form.abs(),
        };
        ValidationReport {
            closed_form,
            estimate,
            std_error,
            draws_or_outcomes: draws,
            tolerance,
            passed,
        }
    }
}

/// `C(n+m-1, m-1)`, the number of size-`n` count vectors over `m` bins.
pub fn outcome_count(m: usize, n: u64) -> f64 {
    // after step j the accumulator is C(n + j, j), an integer
    (1..m).fold(1.0, |acc, j| (acc * (n as f64 + j as f64) / j as f64).round())
}

/// Every size-`n` outcome with its multinomial probability under `d`.
pub fn enumerate_sampling_law(d: &Distribution, n: u64) -> Result<Vec<(CountSample, f64)>> {
    enumerate_sampling_law_capped(d, n, DEFAULT_OUTCOME_CAP)
}

pub fn enumerate_sampling_law_capped(
    d: &Distribution,
    n: u64,
    cap: f64,
) -> Result<Vec<(CountSample, f64)>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let m = d.len();
    let outcomes = outcome_count(m, n);
    if outcomes > cap {
        return Err(Error::OutcomeCapExceeded { outcomes, cap });
    }

    let mut ln_fact = vec![0.0; n as usize + 1];
    for k in 1..=n as usize {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let ln_p: Vec<f64> = d.probs().iter().map(|p| p.ln()).collect();

    let mut out = Vec::with_capacity(outcomes as usize);
    let mut x = vec![0u64; m];
    x[m - 1] = n;
    loop {
        // 0^0 = 1: bins with zero count contribute nothing; a positive count on
        // a zero-probability bin makes the outcome impossible.
        let mut lp = ln_fact[n as usize];
        for (i, &xi) in x.iter().enumerate() {
            if xi > 0 {
                lp += xi as f64 * ln_p[i] - ln_fact[xi as usize];
            }
        }
        let prob = if lp == f64::NEG_INFINITY { 0.0 } else { lp.exp() };
        out.push((CountSample::new(x.clone())?, prob));

        // odometer over the first m-1 parts; the last bin holds the remainder
        if x[m - 1] > 0 {
            x[m - 2] += 1;
            x[m - 1] -= 1;
            continue;
        }
        let j = (0..m - 1).rev().find(|&i| x[i] > 0).unwrap_or(0);
        if j == 0 {
            break;
        }
        x[m - 1] = x[j] - 1;
        x[j] = 0;
        x[j - 1] += 1;
    }
    Ok(out)
}

/// Exact check of `E[T[P̂_n]] = (n-1)/n · T[P]` by enumeration.
pub fn validate_prop1(d: &Distribution, n: u64) -> Result<ValidationReport> {
    let law = enumerate_sampling_law(d, n)?;
    let estimate = kahan_sum(
        law.iter()
            .map(|(s, pr)| pr * tsallis_of(s.to_distribution().probs())),
    );
    let closed = teb::expected_sampling_tsallis(d, n)?;
    Ok(ValidationReport::judge(
        closed,
        estimate,
        0.0,
        law.len() as u64,
        Tolerance::Absolute(ENUMERATION_TOL),
    ))
}

/// A draw from the flat density on the `m`-simplex.
pub fn uniform_simplex<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m)
        .map(|_| loop {
            let e: f64 = rng.sample(Exp1);
            if e > 0.0 {
                break e;
            }
        })
        .collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Sample moments of `(n-1)/n · T[P]` for `P` uniform on the simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorMoments {
    pub mean: f64,
    pub std: f64,
    pub se_mean: f64,
    pub se_std: f64,
    pub draws: u64,
}

pub fn uniform_prior_moments(m: usize, n: u64, draws: u64, seed: u64) -> Result<PriorMoments> {
    if m < 2 {
        return Err(Error::TooFewBins(m));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least 2 draws".into()));
    }
    let factor = (n - 1) as f64 / n as f64;
    // fixed chunking keeps results independent of the thread count
    let chunk_values: Vec<Vec<f64>> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let lo = draws * c / MC_CHUNKS;
            let hi = draws * (c + 1) / MC_CHUNKS;
            let mut rng = rng::stream(seed, &[m as u64, c]);
            (lo..hi)
                .map(|_| factor * tsallis_of(&uniform_simplex(m, &mut rng)))
                .collect()
        })
        .collect();
    let nf = draws as f64;
    let mean = kahan_sum(chunk_values.iter().flatten().copied()) / nf;
    let m2 = kahan_sum(chunk_values.iter().flatten().map(|v| (v - mean).powi(2))) / (nf - 1.0);
    let m4 = kahan_sum(chunk_values.iter().flatten().map(|v| (v - mean).powi(4))) / nf;
    let std = m2.sqrt();
    let se_std = ((m4 - m2 * m2).max(0.0) / (4.0 * m2 * nf)).sqrt();
    Ok(PriorMoments {
        mean,
        std,
        se_mean: std / nf.sqrt(),
        se_std,
        draws,
    })
}

/// Monte Carlo check of the uniform-prior expected sampling entropy.
pub fn validate_prop2(m: usize, n: u64, draws: u64, seed: u64) -> Result<ValidationReport> {
    if draws < 1000 {
        return Err(Error::InvalidArgument("validate_prop2 needs at least 1000 draws".into()));
    }
    let mom = uniform_prior_moments(m, n, draws, seed)?;
    Ok(ValidationReport::judge(
        teb::bayesian_expected_tsallis(m, n)?,
        mom.mean,
        mom.se_mean,
        draws,
        Tolerance::Sigmas(PROP2_SIGMAS),
    ))
}

/// Monte Carlo check of the standard deviation of the expected sampling
/// entropy under the uniform prior.
pub fn validate_prop3(m: usize, n: u64, draws: u64, seed: u64) -> Result<ValidationReport> {
    if draws < 1000 {
        return Err(Error::InvalidArgument("validate_prop3 needs at least 1000 draws".into()));
    }
    let mom = uniform_prior_moments(m, n, draws, seed)?;
    Ok(ValidationReport::judge(
        teb::teb_std(m, n)?,
        mom.std,
        mom.se_std,
        draws,
        Tolerance::Relative(PROP3_RELATIVE_TOL),
    ))
}
