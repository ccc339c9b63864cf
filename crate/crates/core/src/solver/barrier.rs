//! Log-barrier Newton engine over the reduced coordinates `p = p0 + Z y`.

use nalgebra::{DMatrix, DVector};

use super::linalg::{self, AffineHull};
use super::{EntropyKind, SolverConfig};
use crate::prob::{shannon_of, tsallis_of};

/// Linear slack `sign * p[index] + offset > 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinearSlack {
    pub index: usize,
    pub sign: f64,
    pub offset: f64,
    pub elastic: bool,
}

impl LinearSlack {
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.sign * p[self.index] + self.offset
    }
}

#[derive(Debug, Clone)]
pub(crate) enum SmoothObjective {
    L22(Vec<f64>),
    Jsd(Vec<f64>),
    NegLogLik(Vec<f64>),
    NegEntropy(EntropyKind),
}

impl SmoothObjective {
    pub fn value(&self, p: &[f64]) -> f64 {
        match self {
            Self::L22(t) => p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum(),
            Self::Jsd(t) => crate::prob::js_of(p, t),
            Self::NegLogLik(x) => -p
                .iter()
                .zip(x)
                .filter(|(_, &c)| c > 0.0)
                .map(|(pi, c)| c * pi.ln())
                .sum::<f64>(),
            Self::NegEntropy(kind) => -kind.eval(p),
        }
    }

    /// Gradient plus the (diagonal) Hessian.
    fn derivatives(&self, p: &[f64], grad: &mut [f64], diag: &mut [f64]) {
        for i in 0..p.len() {
            let pi = p[i];
            let (g, h) = match self {
                Self::L22(t) => (2.0 * (pi - t[i]), 2.0),
                Self::Jsd(t) => {
                    let mid = 0.5 * (pi + t[i]);
                    (0.5 * (pi / mid).ln(), 0.5 * t[i] / (pi * (pi + t[i])))
                }
                Self::NegLogLik(x) => (-x[i] / pi, x[i] / (pi * pi)),
                Self::NegEntropy(EntropyKind::Shannon) => (pi.ln() + 1.0, 1.0 / pi),
                Self::NegEntropy(EntropyKind::Tsallis) => (2.0 * pi, 2.0),
            };
            grad[i] = g;
            diag[i] = h;
        }
    }
}

impl EntropyKind {
    pub(crate) fn eval(self, p: &[f64]) -> f64 {
        match self {
            Self::Tsallis => tsallis_of(p),
            Self::Shannon => shannon_of(p),
        }
    }

    /// Gradient and the diagonal of the Hessian.
    fn derivatives(self, p: &[f64]) -> (DVector<f64>, DVector<f64>) {
        match self {
            Self::Tsallis => (
                DVector::from_iterator(p.len(), p.iter().map(|x| -2.0 * x)),
                DVector::from_element(p.len(), -2.0),
            ),
            Self::Shannon => (
                DVector::from_iterator(p.len(), p.iter().map(|x| -(x.ln() + 1.0))),
                DVector::from_iterator(p.len(), p.iter().map(|x| -1.0 / x)),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Floor {
    pub kind: EntropyKind,
    pub level: f64,
}

/// Either a phase-1 program (minimize the elastic shift `u`) or a phase-2
/// program (minimize the objective), both under log barriers.
pub(crate) enum Stage<'a> {
    Phase1 {
        slacks: &'a [LinearSlack],
    },
    Phase2 {
        objective: &'a SmoothObjective,
        slacks: &'a [LinearSlack],
        floor: Option<Floor>,
    },
}

pub(crate) struct Engine<'a> {
    pub hull: &'a AffineHull,
    pub stage: Stage<'a>,
}

pub(crate) struct Outcome {
    pub z: DVector<f64>,
    pub newton_steps: usize,
    pub kkt: f64,
    pub converged: bool,
}

struct Derivs {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    /// Scale used to make the stationarity residual relative.
    grad_scale: f64,
}

impl Engine<'_> {
    fn d(&self) -> usize {
        self.hull.z.ncols()
    }

    pub fn dim(&self) -> usize {
        match self.stage {
            Stage::Phase1 { .. } => self.d() + 1,
            Stage::Phase2 { .. } => self.d(),
        }
    }

    fn barrier_count(&self) -> usize {
        match &self.stage {
            Stage::Phase1 { slacks } => slacks.len(),
            Stage::Phase2 { slacks, floor, .. } => slacks.len() + usize::from(floor.is_some()),
        }
    }

    pub fn point(&self, z: &DVector<f64>) -> DVector<f64> {
        self.hull.point(z)
    }

    fn shift(&self, z: &DVector<f64>) -> f64 {
        match self.stage {
            Stage::Phase1 { .. } => z[self.d()],
            Stage::Phase2 { .. } => 0.0,
        }
    }

    /// Barrier-augmented value, `None` outside the open domain.
    fn value(&self, z: &DVector<f64>, mu: f64) -> Option<f64> {
        let p = self.point(z);
        let p = p.as_slice();
        let u = self.shift(z);
        let mut log_sum = 0.0;
        let slacks = match &self.stage {
            Stage::Phase1 { slacks } | Stage::Phase2 { slacks, .. } => slacks,
        };
        for s in slacks.iter() {
            let v = s.eval(p) + if s.elastic { u } else { 0.0 };
            if !(v > 0.0) {
                return None;
            }
            log_sum += v.ln();
        }
        let base = match &self.stage {
            Stage::Phase1 { .. } => u,
            Stage::Phase2 {
                objective, floor, ..
            } => {
                if let Some(f) = floor {
                    let v = f.kind.eval(p) - f.level;
                    if !(v > 0.0) {
                        return None;
                    }
                    log_sum += v.ln();
                }
                objective.value(p)
            }
        };
        let total = base - mu * log_sum;
        total.is_finite().then_some(total)
    }

    fn derivatives(&self, z: &DVector<f64>, mu: f64) -> Derivs {
        let m = self.hull.p0.len();
        let d = self.d();
        let zmat = &self.hull.z;
        let pv = self.point(z);
        let p = pv.as_slice();
        let u = self.shift(z);

        let mut grad_p = vec![0.0; m];
        let mut diag_p = vec![0.0; m];
        let mut grad_scale = 1.0_f64;
        let mut rank_one: Option<(f64, DVector<f64>)> = None;
        let mut cross = DVector::zeros(m);
        let mut g_u = 0.0;
        let mut h_uu = 0.0;
        let mut value;

        let slacks = match &self.stage {
            Stage::Phase1 { slacks } => {
                g_u = 1.0;
                value = u;
                slacks
            }
            Stage::Phase2 {
                objective,
                slacks,
                floor,
            } => {
                objective.derivatives(p, &mut grad_p, &mut diag_p);
                grad_scale = grad_scale.max(grad_p.iter().fold(0.0_f64, |a, g| a.max(g.abs())));
                value = objective.value(p);
                if let Some(f) = floor {
                    let s = f.kind.eval(p) - f.level;
                    let (g, h) = f.kind.derivatives(p);
                    for i in 0..m {
                        grad_p[i] -= mu * g[i] / s;
                        diag_p[i] -= mu * h[i] / s;
                    }
                    value -= mu * s.ln();
                    rank_one = Some((mu / (s * s), g));
                }
                slacks
            }
        };
        for s in slacks.iter() {
            let v = s.eval(p) + if s.elastic { u } else { 0.0 };
            value -= mu * v.ln();
            grad_p[s.index] -= mu * s.sign / v;
            diag_p[s.index] += mu / (v * v);
            if s.elastic && matches!(self.stage, Stage::Phase1 { .. }) {
                g_u -= mu / v;
                h_uu += mu / (v * v);
                cross[s.index] += mu * s.sign / (v * v);
            }
        }

        let gp = DVector::from_vec(grad_p);
        let mut scaled = zmat.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= diag_p[i];
        }
        let mut h_yy = zmat.tr_mul(&scaled);
        if let Some((w, v)) = rank_one {
            let zv = zmat.tr_mul(&v);
            h_yy.ger(w, &zv, &zv, 1.0);
        }
        let g_y = zmat.tr_mul(&gp);

        let n = self.dim();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        grad.rows_mut(0, d).copy_from(&g_y);
        hess.view_mut((0, 0), (d, d)).copy_from(&h_yy);
        if n > d {
            let h_yu = zmat.tr_mul(&cross);
            grad[d] = g_u;
            hess[(d, d)] = h_uu;
            for j in 0..d {
                hess[(j, d)] = h_yu[j];
                hess[(d, j)] = h_yu[j];
            }
        }
        Derivs {
            value,
            grad,
            hess,
            grad_scale,
        }
    }

    fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
        let n = grad.len();
        let scale = (0..n).fold(0.0_f64, |a, i| a.max(hess[(i, i)].abs())).max(1e-300);
        let mut ridge = 0.0;
        for _ in 0..12 {
            let mut h = hess.clone();
            for i in 0..n {
                h[(i, i)] += ridge;
            }
            if let Some(ch) = h.cholesky() {
                let dir = ch.solve(&(-grad));
                if dir.iter().all(|x| x.is_finite()) {
                    return Some(dir);
                }
            }
            ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
        }
        None
    }

    /// Largest step in `(0, 1]` along `dir` that stays in the open domain.
    fn feasible_step(&self, z: &DVector<f64>, dir: &DVector<f64>, mu: f64) -> Option<f64> {
        let mut alpha = 1.0;
        for _ in 0..80 {
            if self.value(&(z + dir * alpha), mu).is_some() {
                return Some(alpha);
            }
            alpha *= 0.5;
        }
        None
    }

    /// Newton-centre at `mu`; returns (newton steps, centred). Centrality is
    /// judged by the decrement of `F / mu`, which is scale free.
    fn centre(&self, z: &mut DVector<f64>, mu: f64, cfg: &SolverConfig) -> (usize, bool) {
        let mut steps = 0;
        for _ in 0..cfg.max_inner {
            let dv = self.derivatives(z, mu);
            if dv.grad.amax() / dv.grad_scale <= cfg.tol * 1e-2 {
                return (steps, true);
            }
            let Some(dir) = Self::newton_direction(&dv.hess, &dv.grad) else {
                return (steps, false);
            };
            let decrement = -dv.grad.dot(&dir) / mu;
            if decrement * 0.5 <= 1e-10 {
                return (steps, true);
            }
            let Some(mut alpha) = self.feasible_step(z, &dir, mu) else {
                return (steps, false);
            };
            let mut accepted = false;
            while alpha > 1e-12 {
                let trial = &*z + &dir * alpha;
                if let Some(v) = self.value(&trial, mu) {
                    if v <= dv.value - 0.01 * alpha * decrement * mu {
                        *z = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // Armijo lost to round-off; fall back to a gradient-norm merit.
                let alpha = self.feasible_step(z, &dir, mu).unwrap_or(0.0);
                let trial = &*z + &dir * alpha;
                let g_new = self.derivatives(&trial, mu).grad.amax();
                if alpha > 0.0 && g_new < dv.grad.amax() {
                    *z = trial;
                } else {
                    return (steps, decrement * 0.5 <= 1e-6);
                }
            }
            steps += 1;
        }
        (steps, false)
    }

    /// Relative stationarity of the Lagrangian. Multipliers of constraints
    /// with slack below `sqrt(mu)` are fitted by least squares (projected out), since their
    /// slacks carry cancellation error; the rest use `mu / s`.
    fn kkt_residual(&self, z: &DVector<f64>, mu: f64) -> f64 {
        let Stage::Phase2 {
            objective,
            slacks,
            floor,
        } = &self.stage
        else {
            let dv = self.derivatives(z, mu);
            return dv.grad.amax() / dv.grad_scale;
        };
        let zmat = &self.hull.z;
        let d = zmat.ncols();
        let pv = self.point(z);
        let p = pv.as_slice();
        let m = p.len();
        let mut grad = vec![0.0; m];
        let mut diag = vec![0.0; m];
        objective.derivatives(p, &mut grad, &mut diag);
        let scale = grad.iter().fold(1.0_f64, |a, g| a.max(g.abs()));
        let mut r = zmat.tr_mul(&DVector::from_vec(grad));
        let cut = mu.sqrt();
        let mut active: Vec<DVector<f64>> = Vec::new();
        for s in slacks.iter() {
            let g = zmat.row(s.index).transpose() * s.sign;
            let v = s.eval(p);
            if v <= cut {
                active.push(g);
            } else {
                r.axpy(-mu / v, &g, 1.0);
            }
        }
        if let Some(f) = floor {
            let (g, _) = f.kind.derivatives(p);
            let g = zmat.tr_mul(&g);
            let v = f.kind.eval(p) - f.level;
            if v <= cut {
                active.push(g);
            } else {
                r.axpy(-mu / v, &g, 1.0);
            }
        }
        if d > 0 {
            linalg::project_out(&mut r, active);
        }
        r.amax() / scale
    }

    /// Barrier path-following from a strictly feasible `z0`.
    pub fn run(&self, z0: DVector<f64>, cfg: &SolverConfig, gap_tol: f64) -> Outcome {
        let mut z = z0;
        let mut mu = cfg.mu0;
        let k = self.barrier_count().max(1) as f64;
        let mut newton_steps = 0;
        let mut outer = 0;
        if self.dim() == 0 {
            return Outcome {
                z,
                newton_steps,
                kkt: 0.0,
                converged: true,
            };
        }
        loop {
            let (steps, centred) = self.centre(&mut z, mu, cfg);
            newton_steps += steps;
            outer += 1;
            if k * mu <= gap_tol || outer >= cfg.max_outer {
                let kkt = self.kkt_residual(&z, mu);
                return Outcome {
                    z,
                    newton_steps,
                    kkt,
                    converged: k * mu <= gap_tol && (centred || kkt <= cfg.tol),
                };
            }
            mu *= cfg.mu_factor;
        }
    }
}
