//! Bounded-variable revised primal simplex.
//!
//! Rows are handled through logical variables: the constraint system is
//! `A x − w = 0` with `lower_r ≤ w_r ≤ upper_r`, so the all-logical basis is
//! always available as a starting point. Phase 1 minimizes the sum of bound
//! violations of the basic variables with a long-step ratio test; phase 2
//! uses a two-pass Harris ratio test. After a run of degenerate pivots the
//! pricing and ratio rules switch to Bland's rule until progress resumes.

use super::factor::{Column, Factor};
use crate::error::{Error, Result};

const DEGENERATE_SWITCH: usize = 50;
const REFACTOR_EVERY: usize = 50;
const DUAL_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarStatus {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Column-compressed LP over the active rows. Variables `0..n` are
/// structural, `n..n+m` the row logicals.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub n: usize,
    pub m: usize,
    pub col_start: Vec<usize>,
    pub col_row: Vec<usize>,
    pub col_val: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    fn column(&self, j: usize) -> Column {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            self.col_row[r.clone()]
                .iter()
                .copied()
                .zip(self.col_val[r].iter().copied())
                .collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|k| self.col_val[k] * y[self.col_row[k]])
                .sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Status a nonbasic variable takes when none is prescribed.
    pub fn default_status(&self, j: usize) -> VarStatus {
        if self.lower[j].is_finite() {
            VarStatus::Lower
        } else if self.upper[j].is_finite() {
            VarStatus::Upper
        } else {
            VarStatus::Zero
        }
    }

    /// Logicals basic, structurals at a finite bound.
    pub fn slack_basis(&self) -> Vec<VarStatus> {
        (0..self.n + self.m)
            .map(|j| {
                if j >= self.n {
                    VarStatus::Basic
                } else {
                    self.default_status(j)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub outcome: Outcome,
    /// Values of structurals then logicals.
    pub x: Vec<f64>,
    pub status: Vec<VarStatus>,
    /// Row duals.
    pub y: Vec<f64>,
    pub iterations: usize,
}

fn feas_tol(bound: f64) -> f64 {
    FEAS_TOL * bound.abs().max(1.0)
}

enum Step {
    Flip,
    Leave { pos: usize, to_upper: bool },
    Unbounded,
}

struct Simplex<'a> {
    lp: &'a LpData,
    cost: Vec<f64>,
    cost_scale: f64,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    x: Vec<f64>,
    factor: Option<Factor>,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpData, start: Vec<VarStatus>) -> Self {
        let nt = lp.n + lp.m;
        let cmax = lp.cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let cost_scale = if cmax > 0.0 { cmax } else { 1.0 };
        let mut cost = vec![0.0; nt];
        for (c, v) in cost.iter_mut().zip(&lp.cost) {
            *c = v / cost_scale;
        }
        let mut status = start;
        if status.len() != nt || status.iter().filter(|s| **s == VarStatus::Basic).count() != lp.m
        {
            status = lp.slack_basis();
        }
        for (j, s) in status.iter_mut().enumerate() {
            let ok = match s {
                VarStatus::Basic => true,
                VarStatus::Lower => lp.lower[j].is_finite(),
                VarStatus::Upper => lp.upper[j].is_finite(),
                VarStatus::Zero => !lp.lower[j].is_finite() && !lp.upper[j].is_finite(),
            };
            if !ok {
                *s = lp.default_status(j);
            }
        }
        let head = (0..nt).filter(|&j| status[j] == VarStatus::Basic).collect();
        let mut s = Simplex {
            lp,
            cost,
            cost_scale,
            head,
            status,
            x: vec![0.0; nt],
            factor: None,
            iterations: 0,
        };
        for j in 0..nt {
            s.x[j] = s.nonbasic_value(j);
        }
        s
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::Lower => self.lp.lower[j],
            VarStatus::Upper => self.lp.upper[j],
            VarStatus::Zero | VarStatus::Basic => 0.0,
        }
    }

    fn factor(&self) -> &Factor {
        self.factor.as_ref().expect("factored basis")
    }

    /// Factors the current basis, swapping dependent columns for logicals.
    fn refactor(&mut self) {
        loop {
            let cols = self.head.iter().map(|&j| self.lp.column(j)).collect();
            match Factor::new(self.lp.m, cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    return;
                }
                Err(s) => {
                    for (&p, &r) in s.positions.iter().zip(&s.rows) {
                        let out = self.head[p];
                        let st = self.lp.default_status(out);
                        let keep = self.x[out];
                        self.status[out] = match st {
                            VarStatus::Lower
                                if self.lp.upper[out].is_finite()
                                    && (self.lp.upper[out] - keep).abs()
                                        < (keep - self.lp.lower[out]).abs() =>
                            {
                                VarStatus::Upper
                            }
                            other => other,
                        };
                        self.x[out] = self.nonbasic_value(out);
                        let logical = self.lp.n + r;
                        self.head[p] = logical;
                        self.status[logical] = VarStatus::Basic;
                    }
                }
            }
        }
    }

    fn compute_primal(&mut self) {
        let lp = self.lp;
        let mut rhs = vec![0.0; lp.m];
        for j in 0..lp.n + lp.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            self.x[j] = self.nonbasic_value(j);
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < lp.n {
                for k in lp.col_start[j]..lp.col_start[j + 1] {
                    rhs[lp.col_row[k]] -= lp.col_val[k] * v;
                }
            } else {
                rhs[j - lp.n] += v;
            }
        }
        let xb = self.factor().ftran(&rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn max_residual(&self) -> f64 {
        let lp = self.lp;
        let mut act = vec![0.0; lp.m];
        for j in 0..lp.n {
            for k in lp.col_start[j]..lp.col_start[j + 1] {
                act[lp.col_row[k]] += lp.col_val[k] * self.x[j];
            }
        }
        (0..lp.m)
            .map(|r| (act[r] - self.x[lp.n + r]).abs() / (1.0 + self.x[lp.n + r].abs()))
            .fold(0.0, f64::max)
    }

    fn run(&mut self, iter_limit: usize) -> Result<Outcome> {
        let lp = self.lp;
        let nt = lp.n + lp.m;
        self.refactor();
        self.compute_primal();
        let mut fresh = true;
        let mut residual_retry = false;
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= iter_limit {
                return Err(Error::Numerical(format!(
                    "simplex iteration limit {iter_limit} reached"
                )));
            }
            if self.factor().updates() >= REFACTOR_EVERY {
                self.refactor();
                self.compute_primal();
                fresh = true;
            }

            let mut cb = vec![0.0; lp.m];
            let mut phase1 = false;
            for (p, &k) in self.head.iter().enumerate() {
                if self.x[k] < lp.lower[k] - feas_tol(lp.lower[k]) {
                    cb[p] = -1.0;
                    phase1 = true;
                } else if self.x[k] > lp.upper[k] + feas_tol(lp.upper[k]) {
                    cb[p] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for (p, &k) in self.head.iter().enumerate() {
                    cb[p] = self.cost[k];
                }
            }
            let y = self.factor().btran(&cb);

            // pricing
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..nt {
                let st = self.status[j];
                if st == VarStatus::Basic || lp.lower[j] == lp.upper[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - lp.dot(j, &y);
                let dir = match st {
                    VarStatus::Lower if d < -DUAL_TOL => 1.0,
                    VarStatus::Upper if d > DUAL_TOL => -1.0,
                    VarStatus::Zero if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                if entering.is_none_or(|(_, best, _)| d.abs() > best.abs()) {
                    entering = Some((j, d, dir));
                }
            }

            let Some((q, dq, dir)) = entering else {
                if !fresh {
                    self.refactor();
                    self.compute_primal();
                    fresh = true;
                    continue;
                }
                if phase1 {
                    return Ok(Outcome::Infeasible);
                }
                if self.max_residual() > RESIDUAL_TOL {
                    if residual_retry {
                        return Err(Error::Numerical(format!(
                            "primal residual {:.3e} after refactorization",
                            self.max_residual()
                        )));
                    }
                    residual_retry = true;
                    self.refactor();
                    self.compute_primal();
                    continue;
                }
                return Ok(Outcome::Optimal);
            };

            let mut rhs = vec![0.0; lp.m];
            for (r, v) in lp.column(q) {
                rhs[r] += v;
            }
            let alpha = self.factor().ftran(&rhs);
            let amax = alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let piv_tol = 1e-9 * amax.max(1.0);
            let range = lp.upper[q] - lp.lower[q];

            let (t, step) = if phase1 {
                self.ratio_phase1(&alpha, dir, dq.abs(), range, piv_tol, bland)
            } else {
                self.ratio_phase2(&alpha, dir, range, piv_tol, bland)
            };
            if let Step::Unbounded = step {
                if phase1 {
                    return Err(Error::Numerical("unbounded phase-1 direction".into()));
                }
                return Ok(Outcome::Unbounded);
            }

            self.iterations += 1;
            fresh = false;
            if t <= 1e-12 {
                degenerate += 1;
                if degenerate >= DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.head[p]] -= dir * a * t;
                }
            }
            match step {
                Step::Flip => {
                    self.status[q] = if dir > 0.0 {
                        VarStatus::Upper
                    } else {
                        VarStatus::Lower
                    };
                    self.x[q] = self.nonbasic_value(q);
                }
                Step::Leave { pos, to_upper } => {
                    self.x[q] += dir * t;
                    let out = self.head[pos];
                    self.status[out] = if to_upper {
                        VarStatus::Upper
                    } else {
                        VarStatus::Lower
                    };
                    self.x[out] = self.nonbasic_value(out);
                    self.head[pos] = q;
                    self.status[q] = VarStatus::Basic;
                    self.factor.as_mut().expect("factored basis").update(pos, &alpha);
                }
                Step::Unbounded => unreachable!(),
            }
        }
    }

    /// Two-pass Harris ratio test (exact minimum ratio in Bland mode).
    fn ratio_phase2(
        &self,
        alpha: &[f64],
        dir: f64,
        range: f64,
        piv_tol: f64,
        bland: bool,
    ) -> (f64, Step) {
        let lp = self.lp;
        let mut theta = f64::INFINITY;
        let mut cands = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= piv_tol {
                continue;
            }
            let k = self.head[p];
            let delta = -dir * a;
            let (bound, to_upper) = if delta > 0.0 {
                (lp.upper[k], true)
            } else {
                (lp.lower[k], false)
            };
            if !bound.is_finite() {
                continue;
            }
            let exact = ((bound - self.x[k]) / delta).max(0.0);
            let tol = if bland { 0.0 } else { feas_tol(bound) };
            let relaxed = ((bound - self.x[k]) + tol * delta.signum()) / delta;
            theta = theta.min(relaxed.max(0.0));
            cands.push((exact, p, a.abs(), to_upper));
        }
        if range <= theta {
            return if range.is_finite() {
                (range, Step::Flip)
            } else {
                (0.0, Step::Unbounded)
            };
        }
        let best = if bland {
            let tmin = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.0 <= tmin)
                .min_by_key(|c| self.head[c.1])
                .copied()
        } else {
            cands
                .iter()
                .filter(|c| c.0 <= theta)
                .fold(None, |acc: Option<(f64, usize, f64, bool)>, c| match acc {
                    Some(b) if b.2 >= c.2 => Some(b),
                    _ => Some(*c),
                })
        };
        let (t, pos, _, to_upper) = best.expect("blocking candidate within theta");
        (t, Step::Leave { pos, to_upper })
    }

    /// Long-step ratio test on the sum of infeasibilities: the step runs
    /// through breakpoints where infeasible basics become feasible for as
    /// long as the objective keeps decreasing.
    fn ratio_phase1(
        &self,
        alpha: &[f64],
        dir: f64,
        dq: f64,
        range: f64,
        piv_tol: f64,
        bland: bool,
    ) -> (f64, Step) {
        let lp = self.lp;
        let mut soft: Vec<(f64, usize, f64, bool)> = Vec::new();
        let mut hard: Vec<(f64, usize, f64, bool)> = Vec::new();
        let mut theta = f64::INFINITY;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= piv_tol {
                continue;
            }
            let k = self.head[p];
            let delta = -dir * a;
            let (l, u, xk) = (lp.lower[k], lp.upper[k], self.x[k]);
            if xk < l - feas_tol(l) {
                if delta > 0.0 {
                    soft.push(((l - xk) / delta, p, delta.abs(), false));
                    if u.is_finite() {
                        let t = (u - xk) / delta;
                        theta = theta.min(t);
                        hard.push((t, p, a.abs(), true));
                    }
                }
            } else if xk > u + feas_tol(u) {
                if delta < 0.0 {
                    soft.push(((u - xk) / delta, p, delta.abs(), true));
                    if l.is_finite() {
                        let t = (l - xk) / delta;
                        theta = theta.min(t);
                        hard.push((t, p, a.abs(), false));
                    }
                }
            } else {
                let (bound, to_upper) = if delta > 0.0 { (u, true) } else { (l, false) };
                if !bound.is_finite() {
                    continue;
                }
                let exact = ((bound - xk) / delta).max(0.0);
                let tol = if bland { 0.0 } else { feas_tol(bound) };
                let relaxed = ((bound - xk) + tol * delta.signum()) / delta;
                theta = theta.min(relaxed.max(0.0));
                hard.push((exact, p, a.abs(), to_upper));
            }
        }
        let limit = theta.min(range);
        soft.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut slope = -dq;
        let mut last = None;
        for s in &soft {
            if s.0 > limit {
                break;
            }
            last = Some(*s);
            slope += s.2;
            if slope >= 0.0 || bland {
                return (s.0.max(0.0), Step::Leave { pos: s.1, to_upper: s.3 });
            }
        }
        if range <= theta && range.is_finite() {
            return (range, Step::Flip);
        }
        if theta.is_finite() {
            let best = hard
                .iter()
                .filter(|c| c.0 <= theta)
                .fold(None, |acc: Option<(f64, usize, f64, bool)>, c| match acc {
                    Some(b) if b.2 >= c.2 => Some(b),
                    _ => Some(*c),
                });
            if let Some((t, pos, _, to_upper)) = best {
                return (t.max(0.0), Step::Leave { pos, to_upper });
            }
        }
        match last {
            Some(s) => (s.0.max(0.0), Step::Leave { pos: s.1, to_upper: s.3 }),
            None => (0.0, Step::Unbounded),
        }
    }
}

/// Solves the LP from the given starting statuses (length n+m, exactly m
/// basic; anything else falls back to the slack basis).
pub(crate) fn simplex(lp: &LpData, start: Vec<VarStatus>) -> Result<SimplexResult> {
    let mut s = Simplex::new(lp, start);
    let limit = 20 * (lp.n + lp.m) + 20_000;
    let outcome = s.run(limit)?;
    let cb: Vec<f64> = s.head.iter().map(|&k| s.cost[k]).collect();
    let y = s
        .factor()
        .btran(&cb)
        .into_iter()
        .map(|v| v * s.cost_scale)
        .collect();
    Ok(SimplexResult {
        outcome,
        x: s.x,
        status: s.status,
        y,
        iterations: s.iterations,
    })
}
