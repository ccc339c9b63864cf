//! Probability vectors on the simplex, count samples, and the entropies and
//! divergences every estimator in the crate is measured with.
//!
//! All logarithms are natural. Tsallis entropy is fixed at index `q = 2`
//! with the Boltzmann constant dropped, so `T[p] = 1 - Σ p_i²`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σ p_i - 1|` accepted by [`Distribution::new`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point on the probability simplex with at least two bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionJson", into = "DistributionJson")]
pub struct Distribution {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionJson {
    p: Vec<f64>,
}

impl TryFrom<DistributionJson> for Distribution {
    type Error = Error;
    fn try_from(j: DistributionJson) -> Result<Self> {
        Distribution::new(j.p)
    }
}

impl From<Distribution> for DistributionJson {
    fn from(d: Distribution) -> Self {
        DistributionJson { p: d.probs }
    }
}

fn check_entries(v: &[f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::TooFewBins(v.len()));
    }
    for (index, &value) in v.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidProbability { index, value });
        }
    }
    Ok(())
}

impl Distribution {
    /// Validates without renormalizing: entries must be nonnegative and sum
    /// to one within [`SIMPLEX_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_entries(&probs)?;
        let sum = kahan_sum(probs.iter().copied());
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Distribution { probs })
    }

    /// Scales nonnegative weights onto the simplex.
    pub fn normalize(weights: Vec<f64>) -> Result<Self> {
        check_entries(&weights)?;
        let sum = kahan_sum(weights.iter().copied());
        if sum <= 0.0 {
            return Err(Error::NotNormalized(sum));
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        Ok(Distribution { probs })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::TooFewBins(m));
        }
        Ok(Distribution {
            probs: vec![1.0 / m as f64; m],
        })
    }

    /// Unit mass on `index`.
    pub fn degenerate(m: usize, index: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::TooFewBins(m));
        }
        if index >= m {
            return Err(Error::InvalidArgument(format!("index {index} out of range for {m} bins")));
        }
        let mut probs = vec![0.0; m];
        probs[index] = 1.0;
        Ok(Distribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Σ p_i².
    pub fn sum_squares(&self) -> f64 {
        self.probs.iter().map(|p| p * p).sum()
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

/// Integer event counts over `m` bins; the sample size is their sum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountSample {
    counts: Vec<u64>,
    n: u64,
}

impl CountSample {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::TooFewBins(counts.len()));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        Ok(CountSample { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sample size.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of bins, including bins with zero count.
    pub fn m(&self) -> usize {
        self.counts.len()
    }

    /// The sampling distribution `x_i / n`.
    pub fn to_distribution(&self) -> Distribution {
        let n = self.n as f64;
        Distribution {
            probs: self.counts.iter().map(|&c| c as f64 / n).collect(),
        }
    }

    /// Σ x_i².
    pub fn sum_squares(&self) -> f64 {
        self.counts.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    /// Parses either one count per line or a single comma-separated row.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut counts = Vec::new();
        for field in text.split(['\n', ',']) {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let c: u64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("not a nonnegative integer: {field:?}")))?;
            counts.push(c);
        }
        CountSample::new(counts)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }
}

/// `1 - Σ p_i²`, in `[0, 1 - 1/m]`.
pub fn tsallis_entropy(d: &Distribution) -> f64 {
    tsallis_of(d.probs())
}

pub(crate) fn tsallis_of(p: &[f64]) -> f64 {
    1.0 - p.iter().map(|x| x * x).sum::<f64>()
}

/// `-Σ p_i ln p_i` with `0 ln 0 = 0`.
pub fn shannon_entropy(d: &Distribution) -> f64 {
    shannon_of(d.probs())
}

pub(crate) fn shannon_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

fn check_len(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// `D[p|q] = Σ p_i ln(p_i/q_i)`; `+∞` when some `p_i > 0` meets `q_i = 0`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_len(p, q)?;
    Ok(kl_of(p.probs(), q.probs()))
}

pub(crate) fn kl_of(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).ln();
    }
    acc.max(0.0)
}

/// Jensen-Shannon divergence `½D[p|M] + ½D[q|M]` with `M = (p+q)/2`.
/// Always finite and bounded by `ln 2`.
pub fn js_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_len(p, q)?;
    Ok(js_of(p.probs(), q.probs()))
}

pub(crate) fn js_of(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            acc += pi * (pi / mi).ln();
        }
        if qi > 0.0 {
            acc += qi * (qi / mi).ln();
        }
    }
    (0.5 * acc).clamp(0.0, std::f64::consts::LN_2)
}

/// Compensated summation; used wherever long reductions must not depend on
/// the order partial results arrive in.
pub fn kahan_sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tsallis_examples() {
        assert_abs_diff_eq!(tsallis_entropy(&d(&[0.5, 0.5])), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tsallis_entropy(&d(&[1.0, 0.0, 0.0])), 0.0);
        assert_abs_diff_eq!(tsallis_entropy(&d(&[0.3, 0.7])), 0.42, epsilon = 1e-15);
    }

    #[test]
    fn shannon_examples() {
        assert_abs_diff_eq!(shannon_entropy(&d(&[0.5, 0.5])), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(shannon_entropy(&d(&[0.0, 1.0])), 0.0);
        // direct summation: -(0.25 ln 0.25 + 0.75 ln 0.75)
        let oracle = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert_abs_diff_eq!(oracle, 0.5623351446188083, epsilon = 1e-15);
        assert_abs_diff_eq!(shannon_entropy(&d(&[0.25, 0.75])), oracle, epsilon = 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let v = kl_divergence(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::LN_2, epsilon = 1e-15);
        let inf = kl_divergence(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap();
        assert!(inf.is_infinite() && inf > 0.0);
        assert_eq!(
            kl_divergence(&p, &d(&[0.5, 0.5])),
            Err(Error::LengthMismatch(3, 2))
        );
    }

    #[test]
    fn js_examples() {
        let p = d(&[0.2, 0.3, 0.5]);
        assert_eq!(js_divergence(&p, &p).unwrap(), 0.0);
        let v = js_divergence(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::LN_2, epsilon = 1e-15);
        assert!(js_divergence(&p, &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn construction_rules() {
        assert_eq!(Distribution::new(vec![1.0]), Err(Error::TooFewBins(1)));
        assert!(matches!(Distribution::new(vec![0.5, 0.6]), Err(Error::NotNormalized(_))));
        assert!(matches!(
            Distribution::new(vec![-0.1, 1.1]),
            Err(Error::InvalidProbability { index: 0, .. })
        ));
        let n = Distribution::normalize(vec![1.0, 3.0]).unwrap();
        assert_eq!(n.probs(), &[0.25, 0.75]);
        assert!(CountSample::new(vec![0, 0]).is_err());
    }

    #[test]
    fn json_form() {
        let p: Distribution = serde_json::from_str(r#"{"p":[0.25,0.75]}"#).unwrap();
        assert_eq!(p.probs(), &[0.25, 0.75]);
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"p":[0.25,0.75]}"#);
        assert!(serde_json::from_str::<Distribution>(r#"{"p":[0.5,0.6]}"#).is_err());
    }

    #[test]
    fn counts_csv_forms() {
        let a = CountSample::parse_csv("3\n1\n0\n").unwrap();
        let b = CountSample::parse_csv("3, 1, 0").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n(), 4);
        assert!(CountSample::parse_csv("3\n-1\n").is_err());
    }

    fn simplex(m: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.0f64..1.0, m).prop_filter_map("zero mass", |w| {
            Distribution::normalize(w).ok()
        })
    }

    fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
        (2usize..12).prop_flat_map(|m| (simplex(m), simplex(m)))
    }

    proptest! {
        #[test]
        fn tsallis_bounds(p in (2usize..20).prop_flat_map(simplex)) {
            let m = p.len() as f64;
            let t = tsallis_entropy(&p);
            prop_assert!(t >= -1e-15 && t <= 1.0 - 1.0 / m + 1e-12);
        }

        #[test]
        fn js_symmetric_bounded((p, q) in pair()) {
            let a = js_divergence(&p, &q).unwrap();
            let b = js_divergence(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
            prop_assert!((0.0..=std::f64::consts::LN_2).contains(&a));
        }

        #[test]
        fn gibbs_inequality((p, q) in pair()) {
            prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn counts_round_trip(counts in prop::collection::vec(0u64..50, 2..20)) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let s = CountSample::new(counts.clone()).unwrap();
            let dist = s.to_distribution();
            let back: Vec<u64> = dist.probs().iter().map(|p| (p * s.n() as f64).round() as u64).collect();
            prop_assert_eq!(back, counts);
            prop_assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tsallis_extremes() {
        for m in 2..10 {
            let u = Distribution::uniform(m).unwrap();
            assert_abs_diff_eq!(tsallis_entropy(&u), 1.0 - 1.0 / m as f64, epsilon = 1e-14);
            assert_eq!(tsallis_entropy(&Distribution::degenerate(m, m - 1).unwrap()), 0.0);
        }
    }
}
