//! Maxent models: Tsallis-bias-compensated (TEBC) Models 1-3, their Shannon
//! (SEB) counterparts and standard Maxent (SME), plus the constraint
//! generators used in the experiments.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{CountSample, Distribution};
use crate::rng;
use crate::solver::{
    self, BoxConstraint, ConvexProgram, EntropyKind, Objective, SolveReport, SolveStatus,
    SolverConfig,
};
use crate::teb::BiasEstimate;

/// Distance between a clamped entropy floor and the attainable maximum.
pub const CLAMP_MARGIN: f64 = 1e-9;

/// Extra radius added on top of the minimal relaxation of conflicting boxes,
/// so the relaxed program keeps a strictly feasible interior.
pub const BOX_RELAX_MARGIN: f64 = 1e-6;

/// `sum_{i in indices} p_i = value` under the generating distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertainConstraint {
    pub indices: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub delta: f64,
    /// Boxes go on bins with `p_hat >= threshold_factor / m`.
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
}

fn default_threshold_factor() -> f64 {
    0.2
}

impl Default for BoxSpec {
    fn default() -> Self {
        Self {
            delta: 6e-4,
            threshold_factor: default_threshold_factor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxentVariant {
    L22Tebc,
    JsdTebc,
    MlTebc,
    L22Seb,
    JsdSeb,
    MlSeb,
    Sme,
}

impl MaxentVariant {
    pub const ALL: [MaxentVariant; 7] = [
        Self::L22Tebc,
        Self::JsdTebc,
        Self::MlTebc,
        Self::L22Seb,
        Self::JsdSeb,
        Self::MlSeb,
        Self::Sme,
    ];

    pub fn is_tebc(self) -> bool {
        matches!(self, Self::L22Tebc | Self::JsdTebc | Self::MlTebc)
    }

    pub fn is_seb(self) -> bool {
        matches!(self, Self::L22Seb | Self::JsdSeb | Self::MlSeb)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::L22Tebc => "l22-tebc",
            Self::JsdTebc => "jsd-tebc",
            Self::MlTebc => "ml-tebc",
            Self::L22Seb => "l22-seb",
            Self::JsdSeb => "jsd-seb",
            Self::MlSeb => "ml-seb",
            Self::Sme => "sme",
        }
    }

    fn floor_kind(self) -> Option<EntropyKind> {
        if self.is_tebc() {
            Some(EntropyKind::Tsallis)
        } else if self.is_seb() {
            Some(EntropyKind::Shannon)
        } else {
            None
        }
    }
}

impl std::str::FromStr for MaxentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown maxent variant {s:?}")))
    }
}

/// A built program plus what was adjusted to make it solvable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxentModel {
    pub program: ConvexProgram,
    /// The entropy target exceeded what the constraints allow and was lowered.
    pub clamped: bool,
    /// Requested floor level before clamping.
    pub target_level: Option<f64>,
    /// Box radius actually used when the requested one admitted no
    /// strictly feasible point.
    pub relaxed_delta: Option<f64>,
}

pub fn build_model(
    s: &CountSample,
    variant: MaxentVariant,
    bias: Option<&BiasEstimate>,
    certain: &[CertainConstraint],
    boxes: Option<&BoxSpec>,
    cfg: &SolverConfig,
) -> Result<MaxentModel> {
    let m = s.m();
    let p_hat = s.to_distribution();
    let objective = match variant {
        MaxentVariant::L22Tebc | MaxentVariant::L22Seb => Objective::L22Distance(p_hat.clone()),
        MaxentVariant::JsdTebc | MaxentVariant::JsdSeb => Objective::JsdToTarget(p_hat.clone()),
        MaxentVariant::MlTebc | MaxentVariant::MlSeb => Objective::NegLogLikelihood(s.clone()),
        MaxentVariant::Sme => Objective::NegShannonEntropy,
    };
    let mut program = ConvexProgram::new(m, objective);
    for c in certain {
        program = program.with_equality(c.indices.clone(), c.value);
    }

    let mut model = MaxentModel {
        program,
        clamped: false,
        target_level: None,
        relaxed_delta: None,
    };

    match (variant.floor_kind(), bias, boxes) {
        (Some(kind), Some(b), None) => {
            if b.kind.is_shannon() != (kind == EntropyKind::Shannon) {
                return Err(Error::InvalidArgument(format!(
                    "{} needs a {} bias estimate, got {:?}",
                    variant.name(),
                    if kind == EntropyKind::Shannon { "Shannon" } else { "Tsallis" },
                    b.kind
                )));
            }
            let target = kind.of(&p_hat) + b.delta;
            let best = solver::max_feasible_entropy(&model.program, kind, cfg)?;
            let level = if target > best - CLAMP_MARGIN {
                model.clamped = true;
                best - CLAMP_MARGIN
            } else {
                target
            };
            model.target_level = Some(target);
            model.program = model.program.with_floor(kind, level);
        }
        (None, None, Some(spec)) => {
            let generated = generate_box_constraints(s, spec)?;
            if !generated.is_empty() {
                model.program.box_constraints = generated;
                if let Some(u) = solver::minimal_box_relaxation(&model.program, cfg)? {
                    if u > -BOX_RELAX_MARGIN.min(0.1 * spec.delta) {
                        let delta = spec.delta + u.max(0.0) + BOX_RELAX_MARGIN;
                        for b in &mut model.program.box_constraints {
                            b.radius = delta;
                        }
                        model.relaxed_delta = Some(delta);
                    }
                }
            }
        }
        (None, None, None) => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{}: bias goes with TEBC/SEB variants and boxes with SME",
                variant.name()
            )))
        }
    }
    Ok(model)
}

/// Build, solve and return the report; a solve that stops early is an error.
pub fn estimate_with_report(
    s: &CountSample,
    variant: MaxentVariant,
    bias: Option<&BiasEstimate>,
    certain: &[CertainConstraint],
    boxes: Option<&BoxSpec>,
    cfg: &SolverConfig,
) -> Result<(MaxentModel, SolveReport)> {
    let model = build_model(s, variant, bias, certain, boxes, cfg)?;
    let report = solver::solve(&model.program, cfg)?;
    if report.status != SolveStatus::Optimal {
        return Err(Error::IterationLimit(report.iterations));
    }
    Ok((model, report))
}

pub fn estimate(
    s: &CountSample,
    variant: MaxentVariant,
    bias: Option<&BiasEstimate>,
    certain: &[CertainConstraint],
    boxes: Option<&BoxSpec>,
    cfg: &SolverConfig,
) -> Result<Distribution> {
    estimate_with_report(s, variant, bias, certain, boxes, cfg).map(|(_, r)| r.solution)
}

/// `k` distinct random index-set constraints with exact values under `real`.
/// Set sizes are uniform on `1..m`; duplicates are redrawn.
pub fn generate_certain_constraints(
    real: &Distribution,
    k: usize,
    seed: u64,
) -> Result<Vec<CertainConstraint>> {
    let m = real.len();
    let distinct = if m >= 63 { u64::MAX } else { (1u64 << m) - 2 };
    if k as u64 > distinct {
        return Err(Error::InvalidArgument(format!(
            "only {distinct} proper index sets exist for m = {m}, asked for {k}"
        )));
    }
    let mut r = rng::stream(seed, &[]);
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let size = r.random_range(1..m);
        let mut indices = index::sample(&mut r, m, size).into_vec();
        indices.sort_unstable();
        if !seen.insert(indices.clone()) {
            continue;
        }
        let value = indices.iter().map(|&i| real.probs()[i]).sum();
        out.push(CertainConstraint { indices, value });
    }
    Ok(out)
}

/// One box of radius `delta` around every bin with `p_hat >= threshold_factor / m`.
pub fn generate_box_constraints(s: &CountSample, spec: &BoxSpec) -> Result<Vec<BoxConstraint>> {
    if !(spec.delta > 0.0 && spec.delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("box delta must be positive, got {}", spec.delta)));
    }
    let th = spec.threshold_factor / s.m() as f64;
    let n = s.n() as f64;
    Ok(s.counts()
        .iter()
        .enumerate()
        .filter_map(|(index, &c)| {
            let center = c as f64 / n;
            (c > 0 && center >= th).then_some(BoxConstraint {
                index,
                center,
                radius: spec.delta,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::prob::{js_of, tsallis_entropy};
    use crate::teb::{frequentist_teb_naive, seb};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn sample(c: &[u64]) -> CountSample {
        CountSample::new(c.to_vec()).unwrap()
    }

    #[test]
    fn two_bin_l22_instance() {
        let s = sample(&[8, 2]);
        let b = frequentist_teb_naive(&s).unwrap();
        let d = estimate(&s, MaxentVariant::L22Tebc, Some(&b), &[], None, &cfg()).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.76874, epsilon = 1e-5);
        assert_abs_diff_eq!(d.probs()[1], 0.23126, epsilon = 1e-5);
    }

    #[test]
    fn uniform_sample_is_clamped_to_uniform() {
        let s = sample(&[5, 5]);
        let b = frequentist_teb_naive(&s).unwrap();
        for v in [MaxentVariant::L22Tebc, MaxentVariant::JsdTebc, MaxentVariant::MlTebc] {
            let model = build_model(&s, v, Some(&b), &[], None, &cfg()).unwrap();
            assert!(model.clamped);
            assert_abs_diff_eq!(model.target_level.unwrap(), 0.5 + 0.5 / 9.0, epsilon = 1e-12);
            let d = estimate(&s, v, Some(&b), &[], None, &cfg()).unwrap();
            assert_abs_diff_eq!(d.probs()[0], 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn sme_with_one_certain_constraint() {
        let s = sample(&[3, 4, 3]);
        let certain = [CertainConstraint {
            indices: vec![0],
            value: 0.3,
        }];
        let d = estimate(&s, MaxentVariant::Sme, None, &certain, None, &cfg()).unwrap();
        assert_abs_diff_eq!(d.probs()[0], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(d.probs()[1], 0.35, epsilon = 1e-7);
        assert_abs_diff_eq!(d.probs()[2], 0.35, epsilon = 1e-7);
    }

    #[test]
    fn two_bin_variants_agree() {
        let b_cfg = cfg();
        for counts in [[8u64, 2], [1, 9], [3, 4], [17, 3], [10, 0]] {
            let s = sample(&counts);
            let b = frequentist_teb_naive(&s).unwrap();
            let sols: Vec<f64> = [MaxentVariant::L22Tebc, MaxentVariant::JsdTebc, MaxentVariant::MlTebc]
                .into_iter()
                .map(|v| estimate(&s, v, Some(&b), &[], None, &b_cfg).unwrap().probs()[0])
                .collect();
            assert_abs_diff_eq!(sols[0], sols[1], epsilon = 1e-6);
            assert_abs_diff_eq!(sols[0], sols[2], epsilon = 1e-6);
        }
    }

    #[test]
    fn jsd_solution_beats_random_feasible_points() {
        let s = sample(&[9, 5, 3, 2, 1, 0]);
        let b = frequentist_teb_naive(&s).unwrap();
        let (model, report) =
            estimate_with_report(&s, MaxentVariant::JsdTebc, Some(&b), &[], None, &cfg()).unwrap();
        let level = model.program.entropy_floor.unwrap().level;
        let p_hat = s.to_distribution();
        let best = js_of(report.solution.probs(), p_hat.probs());
        let mut r = rng::stream(5, &[]);
        let mut checked = 0;
        while checked < 1000 {
            let q = crate::validate::uniform_simplex(6, &mut r);
            if crate::prob::tsallis_of(&q) >= level {
                assert!(best <= js_of(&q, p_hat.probs()) + 1e-9);
                checked += 1;
            }
        }
    }

    #[test]
    fn floor_binds_when_unclamped() {
        let s = sample(&[12, 5, 2, 1, 0, 0]);
        let b = frequentist_teb_naive(&s).unwrap();
        for v in [MaxentVariant::L22Tebc, MaxentVariant::JsdTebc, MaxentVariant::MlTebc] {
            let (model, rep) = estimate_with_report(&s, v, Some(&b), &[], None, &cfg()).unwrap();
            assert!(!model.clamped);
            let t = tsallis_entropy(&rep.solution);
            assert_abs_diff_eq!(t, model.target_level.unwrap(), epsilon = 1e-6);
        }
    }

    #[test]
    fn seb_variants_use_shannon_floor() {
        let s = sample(&[12, 5, 2, 1]);
        let b = seb(4, 20).unwrap();
        let model = build_model(&s, MaxentVariant::JsdSeb, Some(&b), &[], None, &cfg()).unwrap();
        assert_eq!(model.program.entropy_floor.unwrap().kind, EntropyKind::Shannon);
        let wrong = frequentist_teb_naive(&s).unwrap();
        assert!(build_model(&s, MaxentVariant::JsdSeb, Some(&wrong), &[], None, &cfg()).is_err());
        assert!(build_model(&s, MaxentVariant::L22Tebc, Some(&b), &[], None, &cfg()).is_err());
        assert!(build_model(&s, MaxentVariant::Sme, Some(&b), &[], None, &cfg()).is_err());
    }

    #[test]
    fn sme_limits() {
        let s = sample(&[12, 5, 2, 1]);
        let wide = BoxSpec {
            delta: 10.0,
            threshold_factor: 0.2,
        };
        let d = estimate(&s, MaxentVariant::Sme, None, &[], Some(&wide), &cfg()).unwrap();
        for &p in d.probs() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-7);
        }
        let tight = BoxSpec {
            delta: 1e-7,
            threshold_factor: 0.2,
        };
        let (model, rep) =
            estimate_with_report(&s, MaxentVariant::Sme, None, &[], Some(&tight), &cfg()).unwrap();
        assert!(model.relaxed_delta.is_none());
        for (p, c) in rep.solution.probs().iter().zip(s.counts()) {
            assert_abs_diff_eq!(*p, *c as f64 / 20.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn conflicting_boxes_are_relaxed() {
        let s = sample(&[12, 5, 2, 1]);
        let certain = [CertainConstraint {
            indices: vec![0],
            value: 0.5,
        }];
        let spec = BoxSpec::default();
        let (model, rep) =
            estimate_with_report(&s, MaxentVariant::Sme, None, &certain, Some(&spec), &cfg()).unwrap();
        // p_0 must move from 0.6 to 0.5, a gap of 0.1 against radius 6e-4
        let delta = model.relaxed_delta.unwrap();
        assert_abs_diff_eq!(delta, 0.1 + BOX_RELAX_MARGIN, epsilon = 1e-7);
        assert_abs_diff_eq!(rep.solution.probs()[0], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn box_generation() {
        let s = sample(&[8, 2]);
        assert_eq!(generate_box_constraints(&s, &BoxSpec::default()).unwrap().len(), 2);
        let s = sample(&[8, 2, 0]);
        let boxes = generate_box_constraints(&s, &BoxSpec::default()).unwrap();
        assert!(boxes.iter().all(|b| b.index != 2));
        assert_eq!(BoxSpec::default().delta, 6e-4);
        let bad = BoxSpec {
            delta: 0.0,
            threshold_factor: 0.2,
        };
        assert!(generate_box_constraints(&s, &bad).is_err());
    }

    #[test]
    fn certain_constraints_basics() {
        let real = Distribution::normalize((1..=8).map(f64::from).collect()).unwrap();
        assert!(generate_certain_constraints(&real, 0, 1).unwrap().is_empty());
        let a = generate_certain_constraints(&real, 20, 9).unwrap();
        assert_eq!(a, generate_certain_constraints(&real, 20, 9).unwrap());
        let distinct: HashSet<_> = a.iter().map(|c| c.indices.clone()).collect();
        assert_eq!(distinct.len(), 20);
        let two = Distribution::uniform(2).unwrap();
        assert_eq!(generate_certain_constraints(&two, 2, 3).unwrap().len(), 2);
        assert!(generate_certain_constraints(&two, 3, 3).is_err());
    }

    proptest! {
        #[test]
        fn certain_values_are_exact_partial_sums(seed in 0u64..1000, m in 2usize..30, k in 0usize..10) {
            let real = Distribution::normalize((0..m).map(|i| 1.0 + (i * 7 % 5) as f64).collect()).unwrap();
            let k = k.min((1usize << m.min(20)) - 2);
            let cs = generate_certain_constraints(&real, k, seed).unwrap();
            prop_assert_eq!(cs.len(), k);
            for c in cs {
                prop_assert!(!c.indices.is_empty() && c.indices.len() < m);
                let sum: f64 = c.indices.iter().map(|&i| real.probs()[i]).sum();
                prop_assert_eq!(sum, c.value);
            }
        }
    }
}
