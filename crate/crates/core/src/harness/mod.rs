//! Experiment driver: synthesize or load real distributions, sample from
//! them, run every configured method and score the results.

mod source;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{Criterion, PsMode, ScoreTable};
use crate::maxent::{self, BoxSpec, CertainConstraint, MaxentVariant};
use crate::prob::{CountSample, Distribution};
use crate::rng;
use crate::smoothing::SmoothingMethod;
use crate::solver::SolverConfig;
use crate::teb::{self, BiasEstimate};

pub use source::{
    gen_real_distribution, ingest_counts, sample_counts, sample_counts_with, ColumnRef, SourceSpec,
};

const ROLE_REAL: u64 = 1;
const ROLE_CERTAIN: u64 = 2;
const ROLE_SAMPLE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    Maxent,
    Smoothing,
}

/// Which TEB a TEBC model compensates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TebSource {
    Frequentist,
    Bayesian,
}

/// Methods of the Maxent track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaxentMethod {
    Sample,
    Tebc(MaxentVariant, TebSource),
    Seb(MaxentVariant),
    Sme,
}

impl MaxentMethod {
    pub fn all() -> Vec<MaxentMethod> {
        let mut out = vec![Self::Sample];
        for src in [TebSource::Frequentist, TebSource::Bayesian] {
            for v in [MaxentVariant::L22Tebc, MaxentVariant::JsdTebc, MaxentVariant::MlTebc] {
                out.push(Self::Tebc(v, src));
            }
        }
        for v in [MaxentVariant::L22Seb, MaxentVariant::JsdSeb, MaxentVariant::MlSeb] {
            out.push(Self::Seb(v));
        }
        out.push(Self::Sme);
        out
    }

    pub fn name(self) -> String {
        match self {
            Self::Sample => "sample".into(),
            Self::Tebc(v, TebSource::Frequentist) => format!("f-{}", v.name()),
            Self::Tebc(v, TebSource::Bayesian) => format!("b-{}", v.name()),
            Self::Seb(v) => v.name().into(),
            Self::Sme => "sme".into(),
        }
    }

    pub fn is_tebc(self) -> bool {
        matches!(self, Self::Tebc(..))
    }

    pub fn is_seb(self) -> bool {
        matches!(self, Self::Seb(_))
    }
}

impl std::str::FromStr for MaxentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown maxent method {s:?}")))
    }
}

fn default_sources() -> Vec<SourceSpec> {
    vec![SourceSpec::Uniform01]
}
fn default_m() -> usize {
    100
}
fn default_r() -> usize {
    10
}
fn default_s() -> usize {
    20
}
fn default_delta() -> f64 {
    6e-4
}
fn default_threshold_factor() -> f64 {
    0.2
}

/// Benchmark configuration. Unset `n`, `k` and `methods` resolve to `10 m`,
/// `0.2 m` and every method of the track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_sources")]
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub n: Option<u64>,
    /// Real distributions per source.
    #[serde(default = "default_r")]
    pub r: usize,
    /// Samples per real distribution.
    #[serde(default = "default_s")]
    pub s: usize,
    /// Certain constraints per real distribution (Maxent track).
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ps_mode: PsMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n(&self) -> u64 {
        self.n.unwrap_or(10 * self.m as u64)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or((0.2 * self.m as f64).round() as usize)
    }

    pub fn method_names(&self, track: Track) -> Vec<String> {
        match &self.methods {
            Some(names) => names.clone(),
            None => match track {
                Track::Smoothing => SmoothingMethod::ALL.iter().map(|m| m.name().to_string()).collect(),
                Track::Maxent => MaxentMethod::all().into_iter().map(MaxentMethod::name).collect(),
            },
        }
    }

    pub fn validate(&self, track: Track) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sources.is_empty() {
            return bad("no sources configured".into());
        }
        for s in &self.sources {
            s.validate()?;
        }
        if self.m < 2 {
            return bad(format!("m = {} must be at least 2", self.m));
        }
        if self.n() < 2 {
            return bad(format!("n = {} must be at least 2", self.n()));
        }
        if self.r == 0 || self.s == 0 {
            return bad("r and s must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta = {} must be positive", self.delta));
        }
        if !(self.threshold_factor >= 0.0 && self.threshold_factor.is_finite()) {
            return bad(format!("threshold_factor = {} must be >= 0", self.threshold_factor));
        }
        let names = self.method_names(track);
        if names.is_empty() {
            return bad("no methods configured".into());
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name) {
                return bad(format!("method {name} listed twice"));
            }
            match track {
                Track::Smoothing => drop(name.parse::<SmoothingMethod>()?),
                Track::Maxent => drop(name.parse::<MaxentMethod>()?),
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self, track: Track) -> String {
        let mut resolved = self.clone();
        resolved.n = Some(self.n());
        resolved.k = Some(self.k());
        resolved.methods = Some(self.method_names(track));
        let text = serde_json::to_string(&(track, resolved)).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Values of one method on one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub dataset: String,
    pub method: String,
    pub replicate: usize,
    pub js_divergence: Option<f64>,
    pub expected_log_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Entropy floor lowered to the attainable maximum.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub clamped: bool,
    /// Box radius enlarged to admit a feasible point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxed_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub dataset: String,
    pub method: String,
    pub failed_replicates: usize,
    pub first_error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub track: Track,
    pub config: ExperimentConfig,
    pub table: ScoreTable,
    pub failures: Vec<CellFailure>,
    pub replicates: Vec<ReplicateRecord>,
    pub metadata: RunMetadata,
}

impl BenchmarkReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.table.write_csv(out)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Mean of `criterion` for `method` over every dataset's replicates.
    pub fn mean_value(&self, method: &str, criterion: Criterion) -> Option<f64> {
        let rows: Vec<f64> = self
            .table
            .rows
            .iter()
            .filter(|r| r.method == method && r.criterion == criterion)
            .map(|r| r.mean_value)
            .collect();
        (!rows.is_empty()).then(|| rows.iter().sum::<f64>() / rows.len() as f64)
    }
}

struct Outcome {
    estimate: Result<Distribution>,
    clamped: bool,
    relaxed_delta: Option<f64>,
}

impl From<Result<Distribution>> for Outcome {
    fn from(estimate: Result<Distribution>) -> Self {
        Self {
            estimate,
            clamped: false,
            relaxed_delta: None,
        }
    }
}

struct Biases {
    frequentist: Result<BiasEstimate>,
    bayesian: Result<BiasEstimate>,
    shannon: Result<BiasEstimate>,
}

fn run_maxent(
    method: MaxentMethod,
    s: &CountSample,
    biases: &Biases,
    certain: &[CertainConstraint],
    boxes: &BoxSpec,
    cfg: &SolverConfig,
) -> Outcome {
    let solve = |variant, bias: Option<&BiasEstimate>, boxes: Option<&BoxSpec>| {
        match maxent::estimate_with_report(s, variant, bias, certain, boxes, cfg) {
            Ok((model, report)) => Outcome {
                estimate: Ok(report.solution),
                clamped: model.clamped,
                relaxed_delta: model.relaxed_delta,
            },
            Err(e) => Outcome::from(Err(e)),
        }
    };
    let with_bias = |variant, bias: &Result<BiasEstimate>| match bias {
        Ok(b) => solve(variant, Some(b), None),
        Err(e) => Outcome::from(Err(e.clone())),
    };
    match method {
        MaxentMethod::Sample => Outcome::from(Ok(s.to_distribution())),
        MaxentMethod::Tebc(v, TebSource::Frequentist) => with_bias(v, &biases.frequentist),
        MaxentMethod::Tebc(v, TebSource::Bayesian) => with_bias(v, &biases.bayesian),
        MaxentMethod::Seb(v) => with_bias(v, &biases.shannon),
        MaxentMethod::Sme => solve(MaxentVariant::Sme, None, Some(boxes)),
    }
}

enum Method {
    Smoothing(SmoothingMethod),
    Maxent(MaxentMethod),
}

/// One real distribution with its certain constraints.
struct Replicate {
    source: usize,
    index: usize,
    real: Distribution,
    certain: Vec<CertainConstraint>,
}

/// Run the configured benchmark. Method failures on individual samples are
/// recorded in the report; only configuration and data-loading problems are
/// errors.
pub fn run_benchmark(cfg: &ExperimentConfig, track: Track) -> Result<BenchmarkReport> {
    let started = Instant::now();
    cfg.validate(track)?;
    let names = cfg.method_names(track);
    let methods: Vec<Method> = names
        .iter()
        .map(|n| {
            Ok(match track {
                Track::Smoothing => Method::Smoothing(n.parse()?),
                Track::Maxent => Method::Maxent(n.parse()?),
            })
        })
        .collect::<Result<_>>()?;
    let labels: Vec<String> = cfg.sources.iter().map(SourceSpec::label).collect();
    let n = cfg.n();
    let solver_cfg = SolverConfig::default();
    let boxes = BoxSpec {
        delta: cfg.delta,
        threshold_factor: cfg.threshold_factor,
    };

    let mut replicates = Vec::new();
    for (si, spec) in cfg.sources.iter().enumerate() {
        let loaded = if spec.is_file() { Some(ingest_counts(spec)?) } else { None };
        for ri in 0..cfg.r {
            let real = match &loaded {
                Some(d) => d.clone(),
                None => gen_real_distribution(
                    spec,
                    cfg.m,
                    rng::derive_seed(cfg.seed, &[si as u64, ri as u64, ROLE_REAL]),
                )?,
            };
            let certain = match track {
                Track::Maxent => maxent::generate_certain_constraints(
                    &real,
                    cfg.k(),
                    rng::derive_seed(cfg.seed, &[si as u64, ri as u64, ROLE_CERTAIN]),
                )?,
                Track::Smoothing => Vec::new(),
            };
            replicates.push(Replicate {
                source: si,
                index: ri,
                real,
                certain,
            });
        }
    }

    let tasks: Vec<(usize, usize)> = (0..replicates.len())
        .flat_map(|i| (0..cfg.s).map(move |j| (i, j)))
        .collect();
    let records: Vec<Vec<ReplicateRecord>> = tasks
        .par_iter()
        .map(|&(i, j)| {
            let rep = &replicates[i];
            let seed = rng::derive_seed(
                cfg.seed,
                &[rep.source as u64, rep.index as u64, j as u64, ROLE_SAMPLE],
            );
            let sample = sample_counts(&rep.real, n, seed);
            let biases = sample.as_ref().ok().map(|s| Biases {
                frequentist: teb::frequentist_teb_naive(s),
                bayesian: teb::bayesian_teb(s.m(), s.n()),
                shannon: teb::seb(s.m(), s.n()),
            });
            methods
                .iter()
                .zip(&names)
                .map(|(method, name)| {
                    let outcome = match (&sample, &biases) {
                        (Ok(s), Some(b)) => match method {
                            Method::Smoothing(m) => Outcome::from(m.estimate(s)),
                            Method::Maxent(m) => run_maxent(*m, s, b, &rep.certain, &boxes, &solver_cfg),
                        },
                        (Err(e), _) => Outcome::from(Err(e.clone())),
                        (Ok(_), None) => unreachable!("biases exist for every drawn sample"),
                    };
                    record(&labels[rep.source], name, rep.index * cfg.s + j, &rep.real, n, outcome)
                })
                .collect()
        })
        .collect();
    let records: Vec<ReplicateRecord> = records.into_iter().flatten().collect();

    let mut table = ScoreTable::default();
    let mut failures = Vec::new();
    for label in dedup(&labels) {
        let mut per_criterion: BTreeMap<Criterion, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for name in &names {
            let rows: Vec<&ReplicateRecord> = records
                .iter()
                .filter(|r| &r.dataset == label && &r.method == name)
                .collect();
            let failed: Vec<&&ReplicateRecord> = rows.iter().filter(|r| r.error.is_some()).collect();
            if let Some(first) = failed.first() {
                failures.push(CellFailure {
                    dataset: label.clone(),
                    method: name.clone(),
                    failed_replicates: failed.len(),
                    first_error: first.error.clone().unwrap_or_default(),
                });
                continue;
            }
            for c in Criterion::ALL {
                let values = rows
                    .iter()
                    .map(|r| match c {
                        Criterion::JsDivergence => r.js_divergence,
                        Criterion::ExpectedLogLoss => r.expected_log_loss,
                    })
                    .collect::<Option<Vec<f64>>>()
                    .unwrap_or_default();
                per_criterion.entry(c).or_default().insert(name.clone(), values);
            }
        }
        for (c, cell) in per_criterion {
            if !cell.is_empty() {
                table.push_cell(label, c, &cell, cfg.ps_mode)?;
            }
        }
    }
    // method order as configured, datasets in source order
    let order = |r: &crate::eval::ScoreRow| {
        (
            labels.iter().position(|l| *l == r.dataset),
            r.criterion,
            names.iter().position(|m| *m == r.method),
        )
    };
    table.rows.sort_by_key(order);

    Ok(BenchmarkReport {
        track,
        config: cfg.clone(),
        table,
        failures,
        replicates: records,
        metadata: RunMetadata {
            seed: cfg.seed,
            config_hash: cfg.hash(track),
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}

fn dedup(labels: &[String]) -> Vec<&String> {
    let mut out: Vec<&String> = Vec::new();
    for l in labels {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    out
}

fn record(
    dataset: &str,
    method: &str,
    replicate: usize,
    real: &Distribution,
    n: u64,
    outcome: Outcome,
) -> ReplicateRecord {
    let mut rec = ReplicateRecord {
        dataset: dataset.to_string(),
        method: method.to_string(),
        replicate,
        js_divergence: None,
        expected_log_loss: None,
        error: None,
        clamped: outcome.clamped,
        relaxed_delta: outcome.relaxed_delta,
    };
    let evaluated = outcome.estimate.and_then(|est| {
        Ok((
            Criterion::JsDivergence.evaluate(real, &est, n)?,
            Criterion::ExpectedLogLoss.evaluate(real, &est, n)?,
        ))
    });
    match evaluated {
        Ok((js, ll)) => {
            rec.js_divergence = Some(js);
            rec.expected_log_loss = Some(ll);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(_track: Track) -> ExperimentConfig {
        ExperimentConfig {
            m: 8,
            n: Some(40),
            r: 2,
            s: 3,
            k: Some(2),
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_follow_the_parameter_table() {
        let c = ExperimentConfig::default();
        assert_eq!((c.m, c.n(), c.r, c.s, c.k()), (100, 1000, 10, 20, 20));
        assert_eq!(c.delta, 6e-4);
        assert_eq!(c.threshold_factor, 0.2);
        assert_eq!(c.ps_mode, PsMode::AverageThenScore);
        assert!(ExperimentConfig::from_json(r#"{"m": 5, "bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        let mut c = small(Track::Smoothing);
        c.methods = Some(vec!["sgt".into(), "nope".into()]);
        assert!(c.validate(Track::Smoothing).is_err());
        c.methods = Some(vec!["f-ml-tebc".into()]);
        assert!(c.validate(Track::Smoothing).is_err());
        assert!(c.validate(Track::Maxent).is_ok());
        c.r = 0;
        assert!(c.validate(Track::Maxent).is_err());
    }

    #[test]
    fn maxent_method_names() {
        let names: Vec<String> = MaxentMethod::all().into_iter().map(MaxentMethod::name).collect();
        assert_eq!(
            names,
            [
                "sample", "f-l22-tebc", "f-jsd-tebc", "f-ml-tebc", "b-l22-tebc", "b-jsd-tebc",
                "b-ml-tebc", "l22-seb", "jsd-seb", "ml-seb", "sme"
            ]
        );
        for n in names {
            assert_eq!(n.parse::<MaxentMethod>().unwrap().name(), n);
        }
    }

    #[test]
    fn single_method_scores_are_all_one() {
        let mut c = small(Track::Smoothing);
        c.methods = Some(vec!["sample".into()]);
        let rep = run_benchmark(&c, Track::Smoothing).unwrap();
        assert_eq!(rep.table.rows.len(), 2);
        assert!(rep.table.rows.iter().all(|r| r.performance_score == 1.0));
    }

    #[test]
    fn smoothing_run_is_complete_and_deterministic() {
        let c = small(Track::Smoothing);
        let a = run_benchmark(&c, Track::Smoothing).unwrap();
        let b = run_benchmark(&c, Track::Smoothing).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.table.rows.len(), 9 * 2);
        assert_eq!(a.replicates.len(), 9 * c.r * c.s);
        assert!(a.failures.is_empty());
        assert_eq!(a.metadata.config_hash, b.metadata.config_hash);
    }

    #[test]
    fn adding_a_method_does_not_perturb_data() {
        let mut c = small(Track::Smoothing);
        c.methods = Some(vec!["sample".into()]);
        let a = run_benchmark(&c, Track::Smoothing).unwrap();
        c.methods = Some(vec!["laplace".into(), "sample".into()]);
        let b = run_benchmark(&c, Track::Smoothing).unwrap();
        let pick = |r: &BenchmarkReport| {
            r.replicates
                .iter()
                .filter(|x| x.method == "sample")
                .map(|x| x.js_divergence)
                .collect::<Vec<_>>()
        };
        assert_eq!(pick(&a), pick(&b));
    }

    #[test]
    fn maxent_run_covers_every_cell() {
        let c = small(Track::Maxent);
        let rep = run_benchmark(&c, Track::Maxent).unwrap();
        assert!(rep.failures.is_empty(), "{:?}", rep.failures);
        assert_eq!(rep.table.rows.len(), 11 * 2);
        let json = {
            let mut v = Vec::new();
            rep.write_json(&mut v).unwrap();
            String::from_utf8(v).unwrap()
        };
        assert!(json.contains("config_hash") && json.contains("wall_time_secs"));
    }
}
