//! Evaluation criteria and the Performance Score used to compare methods.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{js_divergence, Distribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    JsDivergence,
    ExpectedLogLoss,
}

impl Criterion {
    pub const ALL: [Criterion; 2] = [Self::JsDivergence, Self::ExpectedLogLoss];

    pub fn name(self) -> &'static str {
        match self {
            Self::JsDivergence => "js_divergence",
            Self::ExpectedLogLoss => "expected_log_loss",
        }
    }

    /// Value for an estimate of `real` from a size-`n` sample; lower is better.
    pub fn evaluate(self, real: &Distribution, est: &Distribution, n: u64) -> Result<f64> {
        match self {
            Self::JsDivergence => js_divergence(real, est),
            Self::ExpectedLogLoss => expected_log_loss(real, est, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub criterion: Criterion,
    pub value: f64,
}

/// `-n sum p_i ln est_i`; infinite when `est` misses mass of `real`.
pub fn expected_log_loss(real: &Distribution, est: &Distribution, n: u64) -> Result<f64> {
    if real.len() != est.len() {
        return Err(Error::LengthMismatch(real.len(), est.len()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("log loss needs n >= 1".into()));
    }
    let mut cross = 0.0;
    for (&p, &q) in real.probs().iter().zip(est.probs()) {
        if p > 0.0 {
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            cross -= p * q.ln();
        }
    }
    Ok(n as f64 * cross)
}

/// `(C(A) - C(worst)) / (C(best) - C(worst))` for lower-is-better values.
///
/// Infinite values are the worst and score 0; finite values are scored over
/// the finite range, so the worst finite method also scores 0. If all finite
/// values are equal they score 1, as does every method when all are equal.
pub fn performance_score(values: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("performance score of no methods".into()));
    }
    if let Some((name, _)) = values.iter().find(|(_, v)| v.is_nan() || **v == f64::NEG_INFINITY) {
        return Err(Error::InvalidArgument(format!("criterion value of {name} is not comparable")));
    }
    let finite = || values.values().copied().filter(|v| v.is_finite());
    let best = finite().fold(f64::INFINITY, f64::min);
    let worst = finite().fold(f64::NEG_INFINITY, f64::max);
    Ok(values
        .iter()
        .map(|(k, &v)| {
            let score = if v.is_infinite() {
                if best.is_finite() { 0.0 } else { 1.0 }
            } else if best == worst {
                1.0
            } else if v == worst {
                0.0
            } else {
                (v - worst) / (best - worst)
            };
            (k.clone(), score)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsMode {
    /// Average each method's replicate values, then score the means.
    #[default]
    AverageThenScore,
    /// Score every replicate across methods, then average the scores.
    ScoreThenAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub dataset: String,
    pub method: String,
    pub criterion: Criterion,
    pub mean_value: f64,
    pub performance_score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

fn mean(values: &[f64]) -> f64 {
    if values.iter().any(|v| v.is_infinite()) {
        return f64::INFINITY;
    }
    crate::prob::kahan_sum(values.iter().copied()) / values.len() as f64
}

impl ScoreTable {
    /// Score one (dataset, criterion) cell from per-method replicate values.
    pub fn push_cell(
        &mut self,
        dataset: &str,
        criterion: Criterion,
        replicates: &BTreeMap<String, Vec<f64>>,
        mode: PsMode,
    ) -> Result<()> {
        if replicates.values().any(|v| v.is_empty()) {
            return Err(Error::InvalidArgument(format!("{dataset}: method without replicates")));
        }
        let means: BTreeMap<String, f64> =
            replicates.iter().map(|(k, v)| (k.clone(), mean(v))).collect();
        let scores = match mode {
            PsMode::AverageThenScore => performance_score(&means)?,
            PsMode::ScoreThenAverage => {
                let reps = replicates.values().map(Vec::len).min().unwrap_or(0);
                if replicates.values().any(|v| v.len() != reps) {
                    return Err(Error::InvalidArgument(format!(
                        "{dataset}: methods have different replicate counts"
                    )));
                }
                let mut sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for j in 0..reps {
                    let column = replicates.iter().map(|(k, v)| (k.clone(), v[j])).collect();
                    for (k, s) in performance_score(&column)? {
                        sums.entry(k).or_default().push(s);
                    }
                }
                sums.into_iter().map(|(k, v)| (k, mean(&v))).collect()
            }
        };
        for (method, mean_value) in means {
            self.rows.push(ScoreRow {
                dataset: dataset.to_string(),
                performance_score: scores[&method],
                method,
                criterion,
                mean_value,
            });
        }
        Ok(())
    }

    pub fn get(&self, dataset: &str, method: &str, criterion: Criterion) -> Option<&ScoreRow> {
        self.rows
            .iter()
            .find(|r| r.dataset == dataset && r.method == method && r.criterion == criterion)
    }

    /// Mean performance score of `method` for `criterion` over all datasets.
    pub fn average_score(&self, method: &str, criterion: Criterion) -> Option<f64> {
        let scores: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.criterion == criterion)
            .map(|r| r.performance_score)
            .collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    }

    /// CSV with header `dataset,method,criterion,mean_value,performance_score`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
