//! Interior-point solver for convex programs over the probability simplex.
//!
//! A program has one of five convex objectives, linear equalities on index
//! sums, box constraints on single coordinates and an optional lower bound on
//! Tsallis or Shannon entropy. Equalities are eliminated through an orthonormal
//! null-space basis; everything else goes into a log barrier.

mod barrier;
mod linalg;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{CountSample, Distribution};
use barrier::{Engine, Floor, LinearSlack, SmoothObjective, Stage};
use linalg::AffineHull;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyKind {
    Tsallis,
    Shannon,
}

impl EntropyKind {
    pub fn of(self, d: &Distribution) -> f64 {
        self.eval(d.probs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Squared Euclidean distance to the target.
    L22Distance(Distribution),
    /// Jensen-Shannon divergence to the target.
    JsdToTarget(Distribution),
    /// Multinomial negative log-likelihood of the counts.
    NegLogLikelihood(CountSample),
    NegShannonEntropy,
    NegTsallisEntropy,
}

/// `sum_{i in indices} p_i = value`, indices 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityConstraint {
    pub indices: Vec<usize>,
    pub value: f64,
}

/// `|p_index - center| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxConstraint {
    pub index: usize,
    pub center: f64,
    pub radius: f64,
}

/// Entropy of the solution must be at least `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyFloor {
    pub kind: EntropyKind,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    pub dimension: usize,
    pub objective: Objective,
    pub equality_constraints: Vec<EqualityConstraint>,
    pub box_constraints: Vec<BoxConstraint>,
    pub entropy_floor: Option<EntropyFloor>,
}

impl ConvexProgram {
    /// Program over the bare simplex; the sum-to-one row is included.
    pub fn new(dimension: usize, objective: Objective) -> Self {
        Self {
            dimension,
            objective,
            equality_constraints: vec![EqualityConstraint {
                indices: (0..dimension).collect(),
                value: 1.0,
            }],
            box_constraints: Vec::new(),
            entropy_floor: None,
        }
    }

    pub fn with_equality(mut self, indices: Vec<usize>, value: f64) -> Self {
        self.equality_constraints.push(EqualityConstraint { indices, value });
        self
    }

    pub fn with_box(mut self, index: usize, center: f64, radius: f64) -> Self {
        self.box_constraints.push(BoxConstraint {
            index,
            center,
            radius,
        });
        self
    }

    pub fn with_floor(mut self, kind: EntropyKind, level: f64) -> Self {
        self.entropy_floor = Some(EntropyFloor { kind, level });
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dimension;
        if m < 2 {
            return Err(Error::TooFewBins(m));
        }
        let check_len = |len: usize| {
            if len == m {
                Ok(())
            } else {
                Err(Error::LengthMismatch(m, len))
            }
        };
        match &self.objective {
            Objective::L22Distance(t) | Objective::JsdToTarget(t) => check_len(t.len())?,
            Objective::NegLogLikelihood(s) => check_len(s.m())?,
            Objective::NegShannonEntropy | Objective::NegTsallisEntropy => {}
        }
        for c in &self.equality_constraints {
            if c.indices.is_empty() || !c.value.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "equality constraint needs indices and a finite value: {c:?}"
                )));
            }
            let mut seen = vec![false; m];
            for &i in &c.indices {
                if i >= m || seen[i] {
                    return Err(Error::InvalidArgument(format!(
                        "bad index {i} in equality constraint over {m} bins"
                    )));
                }
                seen[i] = true;
            }
        }
        for b in &self.box_constraints {
            if b.index >= m || !b.center.is_finite() || !(b.radius > 0.0 && b.radius.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad box constraint {b:?}")));
            }
        }
        if let Some(f) = &self.entropy_floor {
            if !f.level.is_finite() {
                return Err(Error::InvalidArgument("entropy floor must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub mu0: f64,
    pub mu_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_outer: 200,
            max_inner: 50,
            mu0: 1.0,
            mu_factor: 0.2,
        }
    }
}

/// Infeasible programs are reported through [`Error::Infeasible`], so a
/// report is either optimal or stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub solution: Distribution,
    pub objective_value: f64,
    pub max_equality_residual: f64,
    pub max_inequality_violation: f64,
    /// Entropy minus the floor level; `None` without a floor.
    pub entropy_floor_slack: Option<f64>,
    /// Reduced gradient of the Lagrangian, relative to the objective gradient.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// The barrier path is followed until the duality gap is this fraction of
/// `tol`. Optima on the boundary with a vanishing multiplier (an L22 target
/// with an empty bin, say) are only approached at rate `sqrt(gap)`.
const FINAL_GAP_FACTOR: f64 = 1e-4;

struct Prepared {
    hull: AffineHull,
    objective: SmoothObjective,
    slacks: Vec<LinearSlack>,
    floor: Option<Floor>,
}

impl Prepared {
    fn new(program: &ConvexProgram) -> Result<Self> {
        program.validate()?;
        let m = program.dimension;
        let mut rows = Vec::with_capacity(program.equality_constraints.len() + 1);
        let mut rhs = Vec::with_capacity(rows.capacity());
        rows.push(DVector::from_element(m, 1.0));
        rhs.push(1.0);
        for c in &program.equality_constraints {
            let mut row = DVector::zeros(m);
            for &i in &c.indices {
                row[i] = 1.0;
            }
            rows.push(row);
            rhs.push(c.value);
        }
        let hull = linalg::affine_hull(m, &rows, &rhs)?;

        let objective = match &program.objective {
            Objective::L22Distance(t) => SmoothObjective::L22(t.probs().to_vec()),
            Objective::JsdToTarget(t) => SmoothObjective::Jsd(t.probs().to_vec()),
            Objective::NegLogLikelihood(s) => {
                SmoothObjective::NegLogLik(s.counts().iter().map(|&c| c as f64).collect())
            }
            Objective::NegShannonEntropy => SmoothObjective::NegEntropy(EntropyKind::Shannon),
            Objective::NegTsallisEntropy => SmoothObjective::NegEntropy(EntropyKind::Tsallis),
        };

        let mut slacks: Vec<LinearSlack> = (0..m)
            .map(|index| LinearSlack {
                index,
                sign: 1.0,
                offset: 0.0,
                elastic: true,
            })
            .collect();
        for b in &program.box_constraints {
            let (lo, hi) = (b.center - b.radius, b.center + b.radius);
            // sides implied by the simplex add nothing but conditioning trouble
            if lo > 0.0 {
                slacks.push(LinearSlack {
                    index: b.index,
                    sign: 1.0,
                    offset: -lo,
                    elastic: true,
                });
            }
            if hi < 1.0 {
                slacks.push(LinearSlack {
                    index: b.index,
                    sign: -1.0,
                    offset: hi,
                    elastic: true,
                });
            }
        }
        let floor = program.entropy_floor.map(|f| Floor {
            kind: f.kind,
            level: f.level,
        });
        Ok(Self {
            hull,
            objective,
            slacks,
            floor,
        })
    }

    fn reduce(&self, p: &DVector<f64>) -> DVector<f64> {
        self.hull.z.tr_mul(&(p - &self.hull.p0))
    }

    /// Phase 1: minimize the common shift `u` of the elastic slacks.
    /// Returns the point and the optimal shift.
    fn phase1(
        &self,
        slacks: &[LinearSlack],
        start: &DVector<f64>,
        cfg: &SolverConfig,
    ) -> (DVector<f64>, f64, usize) {
        let d = self.hull.z.ncols();
        let p = start.as_slice();
        let worst = slacks
            .iter()
            .filter(|s| s.elastic)
            .map(|s| s.eval(p))
            .fold(f64::INFINITY, f64::min);
        let mut z0 = DVector::zeros(d + 1);
        z0.rows_mut(0, d).copy_from(&self.reduce(start));
        z0[d] = (-worst).max(0.0) + 1.0;
        let engine = Engine {
            hull: &self.hull,
            stage: Stage::Phase1 { slacks },
        };
        let out = engine.run(z0, cfg, cfg.tol);
        (engine.point(&out.z), out.z[d], out.newton_steps)
    }

    /// A point strictly inside every linear inequality.
    fn interior_point(&self, cfg: &SolverConfig) -> Result<(DVector<f64>, usize)> {
        let (p, u, steps) = self.phase1(&self.slacks, &self.hull.p0, cfg);
        let strict = self.slacks.iter().all(|s| s.eval(p.as_slice()) > 0.0);
        if u >= 0.0 || !strict {
            return Err(Error::Infeasible(format!(
                "no strictly feasible point (largest attainable minimum slack {:e})",
                -u
            )));
        }
        Ok((p, steps))
    }

    fn minimize(
        &self,
        objective: &SmoothObjective,
        floor: Option<Floor>,
        start: &DVector<f64>,
        cfg: &SolverConfig,
    ) -> barrier::Outcome {
        let engine = Engine {
            hull: &self.hull,
            stage: Stage::Phase2 {
                objective,
                slacks: &self.slacks,
                floor,
            },
        };
        engine.run(self.reduce(start), cfg, cfg.tol * FINAL_GAP_FACTOR)
    }

    fn max_entropy(
        &self,
        kind: EntropyKind,
        start: &DVector<f64>,
        cfg: &SolverConfig,
    ) -> (DVector<f64>, usize) {
        let objective = SmoothObjective::NegEntropy(kind);
        let out = self.minimize(&objective, None, start, cfg);
        (self.hull.point(&out.z), out.newton_steps)
    }
}

/// Solve `program`; infeasibility is an error, slow convergence is a status.
pub fn solve(program: &ConvexProgram, cfg: &SolverConfig) -> Result<SolveReport> {
    let prep = Prepared::new(program)?;
    let (mut start, mut iterations) = prep.interior_point(cfg)?;
    if let Some(f) = prep.floor {
        if f.kind.eval(start.as_slice()) - f.level <= 0.0 {
            let (p, steps) = prep.max_entropy(f.kind, &start, cfg);
            iterations += steps;
            let best = f.kind.eval(p.as_slice());
            if best - f.level <= 0.0 {
                return Err(Error::Infeasible(format!(
                    "entropy floor {} exceeds the attainable maximum {best}",
                    f.level
                )));
            }
            start = p;
        }
    }
    let out = prep.minimize(&prep.objective, prep.floor, &start, cfg);
    iterations += out.newton_steps;
    let p = prep.hull.point(&out.z);
    report(program, &prep, p.as_slice(), out.kkt, out.converged, iterations, cfg)
}

fn report(
    program: &ConvexProgram,
    prep: &Prepared,
    p: &[f64],
    kkt: f64,
    converged: bool,
    iterations: usize,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let sum: f64 = p.iter().sum();
    let max_equality_residual = program
        .equality_constraints
        .iter()
        .map(|c| (c.indices.iter().map(|&i| p[i]).sum::<f64>() - c.value).abs())
        .fold((sum - 1.0).abs(), f64::max);
    let entropy_floor_slack = program
        .entropy_floor
        .map(|f| f.kind.eval(p) - f.level);
    let max_inequality_violation = p
        .iter()
        .map(|&x| -x)
        .chain(
            program
                .box_constraints
                .iter()
                .map(|b| (p[b.index] - b.center).abs() - b.radius),
        )
        .chain(entropy_floor_slack.map(|s| -s))
        .fold(0.0, f64::max);
    let status = if converged
        && kkt <= cfg.tol
        && max_equality_residual <= cfg.tol
        && max_inequality_violation <= cfg.tol
    {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterationLimit
    };
    let objective_value = prep.objective.value(p);
    let solution = Distribution::new(p.to_vec()).or_else(|_| Distribution::normalize(p.to_vec()))?;
    Ok(SolveReport {
        solution,
        objective_value,
        max_equality_residual,
        max_inequality_violation,
        entropy_floor_slack,
        kkt_residual: kkt,
        iterations,
        status,
    })
}

/// Largest entropy of `kind` attainable under the equality and box
/// constraints of `program` (its objective and floor are ignored).
pub fn max_feasible_entropy(
    program: &ConvexProgram,
    kind: EntropyKind,
    cfg: &SolverConfig,
) -> Result<f64> {
    let mut bare = program.clone();
    bare.entropy_floor = None;
    let prep = Prepared::new(&bare)?;
    let (start, _) = prep.interior_point(cfg)?;
    let (p, _) = prep.max_entropy(kind, &start, cfg);
    Ok(kind.eval(p.as_slice()))
}

/// Smallest uniform enlargement `u` of every box radius for which the program
/// has a point with all coordinates positive. Negative when the boxes already
/// leave room; `None` when the program has no box constraints.
pub fn minimal_box_relaxation(program: &ConvexProgram, cfg: &SolverConfig) -> Result<Option<f64>> {
    if program.box_constraints.is_empty() {
        return Ok(None);
    }
    let mut bare = program.clone();
    bare.box_constraints.clear();
    bare.entropy_floor = None;
    let prep = Prepared::new(&bare)?;
    let (start, _) = prep.interior_point(cfg)?;
    let mut slacks: Vec<LinearSlack> = prep
        .slacks
        .iter()
        .map(|s| LinearSlack {
            elastic: false,
            ..*s
        })
        .collect();
    for b in &program.box_constraints {
        slacks.push(LinearSlack {
            index: b.index,
            sign: 1.0,
            offset: b.radius - b.center,
            elastic: true,
        });
        slacks.push(LinearSlack {
            index: b.index,
            sign: -1.0,
            offset: b.radius + b.center,
            elastic: true,
        });
    }
    let (_, u, _) = prep.phase1(&slacks, &start, cfg);
    Ok(Some(u))
}
