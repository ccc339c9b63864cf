//! Lidstone estimators, including the entropy-bias-matched rates, and the
//! Good-Turing baselines.

mod good_turing;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{shannon_of, CountSample, Distribution};
use crate::teb::{self, BiasEstimate};

pub use good_turing::{good_turing_simplest, simple_good_turing};

/// Rate used when the target entropy is at or beyond that of the uniform
/// distribution.
pub const F_MAX: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LidstoneClamp {
    None,
    /// Target entropy not above the sample's; `f = 0`.
    AtZero,
    /// Target entropy at or above the uniform distribution's; `f = F_MAX`.
    AtUniformCap,
    /// Quadratic without real roots; vertex taken, floored at 0.
    VertexFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidstoneFit {
    pub f: f64,
    /// `1 - target Tsallis entropy`, i.e. the target sum of squares.
    pub alpha: f64,
    pub clamped: LidstoneClamp,
}

/// `(x_i + f) / (n + f m)`.
pub fn lidstone(s: &CountSample, f: f64) -> Result<Distribution> {
    if !(f >= 0.0) || !f.is_finite() {
        return Err(Error::InvalidArgument(format!("Lidstone rate must be finite and >= 0, got {f}")));
    }
    Distribution::new(lidstone_probs(s, f))
}

fn lidstone_probs(s: &CountSample, f: f64) -> Vec<f64> {
    let denom = s.n() as f64 + f * s.m() as f64;
    s.counts().iter().map(|&x| (x as f64 + f) / denom).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedLidstone {
    /// `f = 1`
    Laplace,
    /// Expected likelihood estimate, `f = 1/2`.
    Ele,
    /// `f = 1/n`
    AddTiny,
}

impl NamedLidstone {
    pub fn rate(self, n: u64) -> f64 {
        match self {
            Self::Laplace => 1.0,
            Self::Ele => 0.5,
            Self::AddTiny => 1.0 / n as f64,
        }
    }
}

pub fn named_lidstone(s: &CountSample, name: NamedLidstone) -> Distribution {
    Distribution::new(lidstone_probs(s, name.rate(s.n()))).expect("Lidstone output is a distribution")
}

/// Rate whose Lidstone estimate has Tsallis entropy `T[p_hat] + delta`.
///
/// Matching `1 - sum((x_i + f) / (n + f m))^2 = 1 - alpha` and using
/// `sum x_i = n` gives
/// `(alpha m^2 - m) f^2 + 2 n (alpha m - 1) f + (alpha n^2 - sum x_i^2) = 0`.
pub fn solve_teb_lidstone_f(s: &CountSample, bias: &BiasEstimate) -> Result<LidstoneFit> {
    if bias.kind.is_shannon() {
        return Err(Error::InvalidArgument("TEB-Lidstone needs a Tsallis bias estimate".into()));
    }
    let m = s.m() as f64;
    let n = s.n() as f64;
    let sum_sq = s.sum_squares() / (n * n);
    let alpha = sum_sq - bias.delta;
    let fit = |f, clamped| Ok(LidstoneFit { f, alpha, clamped });
    if bias.delta <= 0.0 {
        let clamped = if bias.delta < 0.0 { LidstoneClamp::AtZero } else { LidstoneClamp::None };
        return fit(0.0, clamped);
    }
    if alpha * m <= 1.0 {
        return fit(F_MAX, LidstoneClamp::AtUniformCap);
    }
    let a = alpha * m * m - m;
    let b = 2.0 * n * (alpha * m - 1.0);
    let c = alpha * n * n - s.sum_squares();
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return fit((-b / (2.0 * a)).max(0.0), LidstoneClamp::VertexFallback);
    }
    // a, b > 0 and c < 0 here, so this is the positive root without cancellation
    fit((-2.0 * c / (b + disc.sqrt())).max(0.0), LidstoneClamp::None)
}

/// Rate whose Lidstone estimate has Shannon entropy `S[p_hat] + delta`,
/// found by bisection (the entropy increases along the path to uniform).
pub fn solve_seb_lidstone_f(s: &CountSample, bias: &BiasEstimate) -> Result<LidstoneFit> {
    if !bias.kind.is_shannon() {
        return Err(Error::InvalidArgument("SEB-Lidstone needs a Shannon bias estimate".into()));
    }
    let entropy = |f: f64| shannon_of(&lidstone_probs(s, f));
    let target = entropy(0.0) + bias.delta;
    let fit = |f: f64, clamped| {
        let alpha = lidstone_probs(s, f).iter().map(|p| p * p).sum();
        Ok(LidstoneFit { f, alpha, clamped })
    };
    if bias.delta <= 0.0 {
        let clamped = if bias.delta < 0.0 { LidstoneClamp::AtZero } else { LidstoneClamp::None };
        return fit(0.0, clamped);
    }
    if target >= (s.m() as f64).ln() {
        return fit(F_MAX, LidstoneClamp::AtUniformCap);
    }
    let mut hi = 1.0;
    while entropy(hi) < target {
        hi *= 2.0;
        if hi >= F_MAX {
            return fit(F_MAX, LidstoneClamp::AtUniformCap);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if entropy(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f = if (entropy(lo) - target).abs() <= (entropy(hi) - target).abs() { lo } else { hi };
    fit(f, LidstoneClamp::None)
}

/// Estimators addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMethod {
    Sample,
    Laplace,
    Ele,
    #[serde(rename = "addtiny")]
    AddTiny,
    FLidstone,
    BLidstone,
    SebLidstone,
    SimplestGt,
    Sgt,
}

impl SmoothingMethod {
    pub const ALL: [SmoothingMethod; 9] = [
        Self::Sample,
        Self::Laplace,
        Self::Ele,
        Self::AddTiny,
        Self::FLidstone,
        Self::BLidstone,
        Self::SebLidstone,
        Self::SimplestGt,
        Self::Sgt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sample => "sample",
            Self::Laplace => "laplace",
            Self::Ele => "ele",
            Self::AddTiny => "addtiny",
            Self::FLidstone => "f-lidstone",
            Self::BLidstone => "b-lidstone",
            Self::SebLidstone => "seb-lidstone",
            Self::SimplestGt => "simplest-gt",
            Self::Sgt => "sgt",
        }
    }

    /// Bias estimate a Lidstone variant uses by default.
    pub fn default_bias(self, s: &CountSample) -> Result<Option<BiasEstimate>> {
        Ok(match self {
            Self::FLidstone => Some(teb::frequentist_teb_naive(s)?),
            Self::BLidstone => Some(teb::bayesian_teb(s.m(), s.n())?),
            Self::SebLidstone => Some(teb::seb(s.m(), s.n())?),
            _ => None,
        })
    }

    pub fn estimate(self, s: &CountSample) -> Result<Distribution> {
        let bias = self.default_bias(s)?;
        self.estimate_with_bias(s, bias.as_ref())
    }

    /// As [`Self::estimate`], with the bias of the TEB/SEB Lidstone variants
    /// supplied by the caller. Other methods ignore `bias`.
    pub fn estimate_with_bias(self, s: &CountSample, bias: Option<&BiasEstimate>) -> Result<Distribution> {
        let needs = |b: Option<&BiasEstimate>| {
            b.copied()
                .ok_or_else(|| Error::InvalidArgument(format!("{} needs a bias estimate", self.name())))
        };
        match self {
            Self::Sample => Ok(s.to_distribution()),
            Self::Laplace => Ok(named_lidstone(s, NamedLidstone::Laplace)),
            Self::Ele => Ok(named_lidstone(s, NamedLidstone::Ele)),
            Self::AddTiny => Ok(named_lidstone(s, NamedLidstone::AddTiny)),
            Self::FLidstone | Self::BLidstone => {
                lidstone(s, solve_teb_lidstone_f(s, &needs(bias)?)?.f)
            }
            Self::SebLidstone => lidstone(s, solve_seb_lidstone_f(s, &needs(bias)?)?.f),
            Self::SimplestGt => good_turing_simplest(s),
            Self::Sgt => simple_good_turing(s),
        }
    }
}

impl std::str::FromStr for SmoothingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown smoothing method {s:?}")))
    }
}
