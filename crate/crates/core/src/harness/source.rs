//! Real distributions: synthesized from a source family or read from files,
//! and multinomial sampling from them.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Beta, Binomial, ChiSquared, Distribution as _, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{CountSample, Distribution};
use crate::rng::{self, StreamRng};

/// Column of a delimited file, by header name or 0-based position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Uniform01,
    AbsStdNormal,
    Normal { mean: f64, std: f64 },
    ChiSquare { df: f64 },
    Binomial { trials: u64, prob: f64 },
    Beta { a: f64, b: f64 },
    /// One nonnegative count per line (or comma separated).
    FileCounts { path: PathBuf },
    /// A numeric column of a CSV file with a header row, cut into `bins`
    /// equal-width intervals.
    FileFeatureBinned { path: PathBuf, column: ColumnRef, bins: usize },
}

impl SourceSpec {
    /// Label used as the dataset column of reports.
    pub fn label(&self) -> String {
        let stem = |p: &Path| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        };
        match self {
            Self::Uniform01 => "U(0;1)".into(),
            Self::AbsStdNormal => "|N(0;1)|".into(),
            Self::Normal { mean, std } => format!("N({mean};{std})"),
            Self::ChiSquare { df } => format!("chi2({df})"),
            Self::Binomial { trials, prob } => format!("B({trials};{prob})"),
            Self::Beta { a, b } => format!("beta({a};{b})"),
            Self::FileCounts { path } => stem(path),
            Self::FileFeatureBinned { path, column, bins } => match column {
                ColumnRef::Index(i) => format!("{}[{i}]/{bins}", stem(path)),
                ColumnRef::Name(n) => format!("{}[{n}]/{bins}", stem(path)),
            },
        }
    }

    pub fn is_file(&self) -> bool {
        matches!(self, Self::FileCounts { .. } | Self::FileFeatureBinned { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("{}: {what}", self.label())));
        match *self {
            Self::Normal { mean, std } if !(std > 0.0 && std.is_finite() && mean.is_finite()) => {
                bad("std must be positive")
            }
            Self::ChiSquare { df } if !(df > 0.0 && df.is_finite()) => bad("df must be positive"),
            Self::Binomial { trials, prob } if trials == 0 || !(prob > 0.0 && prob < 1.0) => {
                bad("need trials >= 1 and 0 < prob < 1")
            }
            Self::Beta { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                bad("shape parameters must be positive")
            }
            Self::FileFeatureBinned { bins, .. } if bins < 2 => bad("need at least 2 bins"),
            _ => Ok(()),
        }
    }

    fn draw(&self, r: &mut StreamRng) -> Result<f64> {
        let err = |e: &dyn std::fmt::Display| Error::InvalidArgument(format!("{}: {e}", self.label()));
        Ok(match *self {
            Self::Uniform01 => r.random::<f64>(),
            Self::AbsStdNormal => r.sample::<f64, _>(StandardNormal).abs(),
            Self::Normal { mean, std } => Normal::new(mean, std).map_err(|e| err(&e))?.sample(r).abs(),
            Self::ChiSquare { df } => ChiSquared::new(df).map_err(|e| err(&e))?.sample(r),
            Self::Binomial { trials, prob } => {
                Binomial::new(trials, prob).map_err(|e| err(&e))?.sample(r) as f64
            }
            Self::Beta { a, b } => Beta::new(a, b).map_err(|e| err(&e))?.sample(r),
            Self::FileCounts { .. } | Self::FileFeatureBinned { .. } => {
                return Err(Error::InvalidArgument(format!(
                    "{} is a file source; use ingest_counts",
                    self.label()
                )))
            }
        })
    }
}

/// `m` positive draws from the source family, normalized. Exact zeros are
/// redrawn.
pub fn gen_real_distribution(spec: &SourceSpec, m: usize, seed: u64) -> Result<Distribution> {
    spec.validate()?;
    if m < 2 {
        return Err(Error::TooFewBins(m));
    }
    let mut r = rng::stream(seed, &[]);
    let mut points = Vec::with_capacity(m);
    while points.len() < m {
        let x = spec.draw(&mut r)?;
        if x > 0.0 && x.is_finite() {
            points.push(x);
        }
    }
    Distribution::normalize(points)
}

/// One size-`n` multinomial sample, drawn as a chain of binomials.
pub fn sample_counts_with<R: Rng + ?Sized>(real: &Distribution, n: u64, r: &mut R) -> Result<CountSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut counts = Vec::with_capacity(real.len());
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in real.probs().iter().enumerate() {
        if i + 1 == real.len() {
            counts.push(left);
            break;
        }
        let c = if left == 0 || p <= 0.0 {
            0
        } else if p >= mass {
            left
        } else {
            Binomial::new(left, (p / mass).clamp(0.0, 1.0))
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(r)
        };
        counts.push(c);
        left -= c;
        mass -= p;
    }
    CountSample::new(counts)
}

pub fn sample_counts(real: &Distribution, n: u64, seed: u64) -> Result<CountSample> {
    sample_counts_with(real, n, &mut rng::stream(seed, &[]))
}

fn zero_bin_check(counts: &[u64]) -> Result<()> {
    match counts.iter().position(|&c| c == 0) {
        Some(i) => Err(Error::ZeroCountBin(i + 1)),
        None => Ok(()),
    }
}

fn bin_feature(path: &Path, column: &ColumnRef, bins: usize) -> Result<Vec<u64>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let idx = match column {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => reader
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("no column named {name:?}")))?,
    };
    let mut values = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = rec
            .get(idx)
            .ok_or_else(|| Error::Parse(format!("record {} has no column {idx}", line + 1)))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("record {}: {field:?} is not a number", line + 1)))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("record {}: non-finite value", line + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in values {
        let b = if width > 0.0 { ((v - lo) / width) as usize } else { 0 };
        counts[b.min(bins - 1)] += 1;
    }
    Ok(counts)
}

/// Real distribution of a file source. Every bin must be populated.
pub fn ingest_counts(spec: &SourceSpec) -> Result<Distribution> {
    spec.validate()?;
    let counts = match spec {
        SourceSpec::FileCounts { path } => CountSample::read_csv(path)?.counts().to_vec(),
        SourceSpec::FileFeatureBinned { path, column, bins } => bin_feature(path, column, *bins)?,
        _ => {
            return Err(Error::InvalidArgument(format!("{} is not a file source", spec.label())));
        }
    };
    zero_bin_check(&counts)?;
    Ok(CountSample::new(counts)?.to_distribution())
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn synth() -> Vec<SourceSpec> {
        vec![
            SourceSpec::Uniform01,
            SourceSpec::AbsStdNormal,
            SourceSpec::Normal { mean: 3.0, std: 1.0 },
            SourceSpec::ChiSquare { df: 10.0 },
            SourceSpec::Binomial { trials: 30, prob: 0.2 },
            SourceSpec::Beta { a: 3.0, b: 6.0 },
        ]
    }

    #[test]
    fn synthesized_distributions_are_positive_and_reproducible() {
        for spec in synth() {
            let d = gen_real_distribution(&spec, 200, 4).unwrap();
            assert!(d.probs().iter().all(|&p| p > 0.0));
            assert_eq!(d, gen_real_distribution(&spec, 200, 4).unwrap());
            assert_ne!(d, gen_real_distribution(&spec, 200, 5).unwrap());
        }
    }

    #[test]
    fn binomial_source_mean() {
        let spec = SourceSpec::Binomial { trials: 30, prob: 0.2 };
        let mut r = rng::stream(8, &[]);
        let m = 10_000;
        let draws: Vec<f64> = (0..m).map(|_| spec.draw(&mut r).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let sd = (30.0f64 * 0.2 * 0.8).sqrt() / (m as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * sd, "{mean}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        for spec in [
            SourceSpec::Normal { mean: 0.0, std: 0.0 },
            SourceSpec::ChiSquare { df: -1.0 },
            SourceSpec::Binomial { trials: 10, prob: 1.0 },
            SourceSpec::Beta { a: 0.0, b: 1.0 },
        ] {
            assert!(gen_real_distribution(&spec, 5, 1).is_err());
        }
    }

    #[test]
    fn multinomial_basics() {
        let d = Distribution::degenerate(4, 2).unwrap();
        assert_eq!(sample_counts(&d, 50, 1).unwrap().counts(), &[0, 0, 50, 0]);
        let real = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let a = sample_counts(&real, 100, 9).unwrap();
        assert_eq!(a.n(), 100);
        assert_eq!(a, sample_counts(&real, 100, 9).unwrap());
    }

    #[test]
    fn multinomial_means_and_goodness_of_fit() {
        let real = Distribution::new(vec![0.05, 0.15, 0.3, 0.5]).unwrap();
        let n = 40;
        let reps = 10_000;
        let mut r = rng::stream(21, &[]);
        let mut totals = [0u64; 4];
        for _ in 0..reps {
            let s = sample_counts_with(&real, n, &mut r).unwrap();
            for (t, c) in totals.iter_mut().zip(s.counts()) {
                *t += c;
            }
        }
        let big_n = (n * reps) as f64;
        let mut chi2 = 0.0;
        for (i, &p) in real.probs().iter().enumerate() {
            let mean = totals[i] as f64 / reps as f64;
            let sd = (n as f64 * p * (1.0 - p) / reps as f64).sqrt();
            assert!((mean - n as f64 * p).abs() < 4.0 * sd);
            let e = big_n * p;
            chi2 += (totals[i] as f64 - e).powi(2) / e;
        }
        // chi-square(3) 99th percentile
        assert!(chi2 < 11.345, "{chi2}");
    }

    fn temp_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn counts_files() {
        let f = temp_file("30\n10\n");
        let d = ingest_counts(&SourceSpec::FileCounts { path: f.path().into() }).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);
        let f = temp_file("3\n1\n0\n");
        assert_eq!(
            ingest_counts(&SourceSpec::FileCounts { path: f.path().into() }),
            Err(Error::ZeroCountBin(3))
        );
        let f = temp_file("");
        assert!(ingest_counts(&SourceSpec::FileCounts { path: f.path().into() }).is_err());
    }

    #[test]
    fn feature_binning() {
        // two clusters: 3 values near 0, 5 near 10
        let f = temp_file("id,x\n1,0.1\n2,0.0\n3,0.4\n4,9.5\n5,10\n6,9.9\n7,9.7\n8,9.8\n");
        let spec = SourceSpec::FileFeatureBinned {
            path: f.path().into(),
            column: ColumnRef::Name("x".into()),
            bins: 2,
        };
        assert_eq!(ingest_counts(&spec).unwrap().probs(), &[3.0 / 8.0, 5.0 / 8.0]);
        let by_index = SourceSpec::FileFeatureBinned {
            path: f.path().into(),
            column: ColumnRef::Index(1),
            bins: 3,
        };
        assert_eq!(ingest_counts(&by_index), Err(Error::ZeroCountBin(2)));
    }

    #[test]
    fn source_json() {
        let spec: SourceSpec = serde_json::from_str(r#"{"kind":"beta","a":3,"b":6}"#).unwrap();
        assert_eq!(spec, SourceSpec::Beta { a: 3.0, b: 6.0 });
        assert!(serde_json::from_str::<SourceSpec>(r#"{"kind":"beta","a":3,"b":6,"c":1}"#).is_err());
        let spec: SourceSpec =
            serde_json::from_str(r#"{"kind":"file_feature_binned","path":"x.csv","column":2,"bins":5}"#).unwrap();
        assert!(matches!(spec, SourceSpec::FileFeatureBinned { column: ColumnRef::Index(2), .. }));
    }
}
