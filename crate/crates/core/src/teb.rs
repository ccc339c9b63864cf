//! Entropy bias estimates.
//!
//! The expected Tsallis entropy of a size-`n` sampling distribution is
//! `(n-1)/n` times the entropy of the distribution it was drawn from, so a
//! sample's entropy needs a positive correction `ΔT`. This module provides
//! the frequentist corrections (closed-form and resampling), the uniform-prior
//! Bayesian correction, the Miller-style Shannon correction used by the
//! comparison models, and the spread of the expected entropy under the
//! uniform prior.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{tsallis_entropy, CountSample, Distribution};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BiasKind {
    FrequentistNaive,
    FrequentistBootstrap,
    BayesianUniform,
    ShannonMiller,
}

impl BiasKind {
    /// Whether the correction applies to Shannon rather than Tsallis entropy.
    pub fn is_shannon(self) -> bool {
        matches!(self, BiasKind::ShannonMiller)
    }
}

/// A nonnegative entropy correction and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    pub kind: BiasKind,
    pub delta: f64,
    /// Resampling slope, an estimate of the Tsallis entropy of the source.
    #[serde(rename = "khat", skip_serializing_if = "Option::is_none", default)]
    pub slope_khat: Option<f64>,
    /// Set when a negative raw bootstrap correction was clamped to zero.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub clamped: bool,
}

impl BiasEstimate {
    fn closed_form(kind: BiasKind, delta: f64) -> Self {
        BiasEstimate {
            kind,
            delta,
            slope_khat: None,
            clamped: false,
        }
    }
}

/// `ΔT = T[P̂] / (n-1)`.
pub fn frequentist_teb_naive(s: &CountSample) -> Result<BiasEstimate> {
    if s.n() < 2 {
        return Err(Error::SampleTooSmall(s.n()));
    }
    let t = tsallis_entropy(&s.to_distribution());
    Ok(BiasEstimate::closed_form(
        BiasKind::FrequentistNaive,
        t / (s.n() - 1) as f64,
    ))
}

fn check_mn(m: usize, n: u64) -> Result<()> {
    if m < 2 {
        return Err(Error::TooFewBins(m));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// `ΔT = (m-1) / (n(m+1))`.
pub fn bayesian_teb(m: usize, n: u64) -> Result<BiasEstimate> {
    check_mn(m, n)?;
    let m = m as f64;
    Ok(BiasEstimate::closed_form(
        BiasKind::BayesianUniform,
        (m - 1.0) / (n as f64 * (m + 1.0)),
    ))
}

/// Shannon entropy correction `ΔS = (m-1) / (2n)`.
pub fn seb(m: usize, n: u64) -> Result<BiasEstimate> {
    check_mn(m, n)?;
    Ok(BiasEstimate::closed_form(
        BiasKind::ShannonMiller,
        (m as f64 - 1.0) / (2.0 * n as f64),
    ))
}

/// `E[T[P̂_n]] = (n-1)/n · T[P]`.
pub fn expected_sampling_tsallis(d: &Distribution, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    Ok((n - 1) as f64 / n as f64 * tsallis_entropy(d))
}

/// Expected sampling entropy averaged over the uniform prior on the simplex,
/// `(n-1)(m-1) / (n(m+1))`.
pub fn bayesian_expected_tsallis(m: usize, n: u64) -> Result<f64> {
    check_mn(m, n)?;
    let (m, n) = (m as f64, n as f64);
    Ok((n - 1.0) * (m - 1.0) / (n * (m + 1.0)))
}

/// Standard deviation of the expected sampling entropy under the uniform
/// prior: `2 / sqrt((m-1)(m+2)(m+3))` times its mean.
pub fn teb_std(m: usize, n: u64) -> Result<f64> {
    let mean = bayesian_expected_tsallis(m, n)?;
    let mf = m as f64;
    Ok(2.0 / ((mf - 1.0) * (mf + 2.0) * (mf + 3.0)).sqrt() * mean)
}

/// Resampling schedule for [`frequentist_teb_bootstrap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates_per_size: usize,
    pub size_grid: Vec<u64>,
    pub seed: u64,
}

impl BootstrapConfig {
    /// 16 geometrically spaced sizes in `[max(2, n/16), n-1]`, 200 draws each.
    pub fn default_for(n: u64, seed: u64) -> Self {
        let hi = n.saturating_sub(1).max(2);
        let lo = (n / 16).max(2).min(hi);
        let steps = 16;
        let mut grid: Vec<u64> = (0..steps)
            .map(|k| {
                let t = k as f64 / (steps - 1) as f64;
                ((lo as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as u64
            })
            .map(|i| i.clamp(lo, hi))
            .collect();
        grid.dedup();
        BootstrapConfig {
            replicates_per_size: 200,
            size_grid: grid,
            seed,
        }
    }
}

/// Least-squares slope `K̂` fitted to resampled mean entropies
/// `Ê_i ≈ (i-1)/i · K`, and `ΔT = max(0, K̂ - T[P̂])`.
///
/// Each resample is a subsample drawn without replacement from the observed
/// items, which makes it an exact size-`i` sample from the source
/// distribution.
pub fn frequentist_teb_bootstrap(s: &CountSample, cfg: &BootstrapConfig) -> Result<BiasEstimate> {
    let n = s.n();
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    if cfg.size_grid.is_empty() {
        return Err(Error::InvalidArgument("empty bootstrap size grid".into()));
    }
    if cfg.replicates_per_size == 0 {
        return Err(Error::InvalidArgument("replicates_per_size must be positive".into()));
    }
    if let Some(&bad) = cfg.size_grid.iter().find(|&&i| i < 2 || i > n) {
        return Err(Error::InvalidArgument(format!(
            "bootstrap size {bad} outside [2, {n}]"
        )));
    }

    let labels: Vec<usize> = s
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(bin, &c)| std::iter::repeat_n(bin, c as usize))
        .collect();
    let mut rng = rng::stream(cfg.seed, &[n]);
    let mut tally = vec![0u64; s.m()];

    let mut num = 0.0;
    let mut den = 0.0;
    for &size in &cfg.size_grid {
        let mut total = 0.0;
        for _ in 0..cfg.replicates_per_size {
            tally.iter_mut().for_each(|c| *c = 0);
            for idx in index::sample(&mut rng, labels.len(), size as usize) {
                tally[labels[idx]] += 1;
            }
            let sq: f64 = tally.iter().map(|&c| (c * c) as f64).sum();
            total += 1.0 - sq / (size * size) as f64;
        }
        let mean = total / cfg.replicates_per_size as f64;
        let w = (size - 1) as f64 / size as f64;
        num += w * mean;
        den += w * w;
    }
    let khat = num / den;
    let raw = khat - tsallis_entropy(&s.to_distribution());
    Ok(BiasEstimate {
        kind: BiasKind::FrequentistBootstrap,
        delta: raw.max(0.0),
        slope_khat: Some(khat),
        clamped: raw < 0.0,
    })
}
