use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rayon::prelude::*;

use super::simplex::{simplex, LpData, Outcome, VarStatus};
use super::{LpSolution, LpStatus, MilpInstance, MipResult, MipStatus, SolveOptions, Tolerances};
use crate::error::{Error, Result};

/// Solves the relaxation (binaries relaxed to their bounds) restricted to
/// `active_rows`.
pub fn solve_lp(instance: &MilpInstance, active_rows: &[usize]) -> Result<LpSolution> {
    let pool = RowPool::with_rows(instance, active_rows.to_vec());
    let lp = pool.build(&instance.lower, &instance.upper);
    let res = simplex(&lp, lp.slack_basis())?;
    let status = match res.outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    let values = res.x[..instance.n_vars()].to_vec();
    let objective = match status {
        LpStatus::Optimal => instance.evaluate(&values),
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::Unbounded => f64::NEG_INFINITY,
    };
    Ok(LpSolution {
        status,
        objective,
        values,
        duals: pool.active.iter().copied().zip(res.y).collect(),
        iterations: res.iterations,
    })
}

/// The set of rows currently loaded into the LP.
#[derive(Clone)]
struct RowPool<'a> {
    inst: &'a MilpInstance,
    active: Vec<usize>,
    is_active: Vec<bool>,
    /// Lazy rows by group.
    groups: Vec<Vec<usize>>,
}

impl<'a> RowPool<'a> {
    fn with_rows(inst: &'a MilpInstance, active: Vec<usize>) -> Self {
        let mut is_active = vec![false; inst.n_rows()];
        for &r in &active {
            is_active[r] = true;
        }
        RowPool {
            inst,
            active,
            is_active,
            groups: Vec::new(),
        }
    }

    fn initial(inst: &'a MilpInstance, lazy: bool, per_group: usize) -> Self {
        if !lazy {
            return Self::with_rows(inst, (0..inst.n_rows()).collect());
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut active = Vec::new();
        for (r, row) in inst.rows.iter().enumerate() {
            match row.lazy_group {
                Some(g) => {
                    if groups.len() <= g {
                        groups.resize(g + 1, Vec::new());
                    }
                    groups[g].push(r);
                }
                None => active.push(r),
            }
        }
        for g in &groups {
            let mut order = g.clone();
            order.sort_by(|&a, &b| {
                inst.rows[b]
                    .lower
                    .total_cmp(&inst.rows[a].lower)
                    .then(a.cmp(&b))
            });
            active.extend(order.into_iter().take(per_group));
        }
        let mut pool = Self::with_rows(inst, active);
        pool.groups = groups;
        pool
    }

    fn add(&mut self, rows: &[usize]) -> usize {
        let mut added = 0;
        for &r in rows {
            if !self.is_active[r] {
                self.is_active[r] = true;
                self.active.push(r);
                added += 1;
            }
        }
        added
    }

    fn build(&self, lower: &[f64], upper: &[f64]) -> LpData {
        let inst = self.inst;
        let n = inst.n_vars();
        let m = self.active.len();
        let mut count = vec![0usize; n + 1];
        for &r in &self.active {
            for &(j, _) in &inst.rows[r].coefs {
                count[j + 1] += 1;
            }
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let col_start = count.clone();
        let mut fill = count;
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (local, &r) in self.active.iter().enumerate() {
            for &(j, a) in &inst.rows[r].coefs {
                col_row[fill[j]] = local;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        lo.extend(self.active.iter().map(|&r| inst.rows[r].lower));
        hi.extend(self.active.iter().map(|&r| inst.rows[r].upper));
        LpData {
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost: inst.objective.clone(),
            lower: lo,
            upper: hi,
        }
    }

    /// Most violated inactive row of every group.
    fn separate(&self, x: &[f64], tol: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for g in &self.groups {
            let mut best: Option<(f64, usize)> = None;
            for &r in g {
                if self.is_active[r] {
                    continue;
                }
                let row = &self.inst.rows[r];
                let act = row.activity(x);
                let v = (row.lower - act).max(act - row.upper);
                if v > tol && best.is_none_or(|b| v > b.0) {
                    best = Some((v, r));
                }
            }
            if let Some((_, r)) = best {
                out.push(r);
            }
        }
        out
    }
}

/// Statuses of structurals and of every row of the instance (rows never
/// loaded count as basic, which is what a newly added row starts as).
#[derive(Clone)]
struct Basis {
    vars: Vec<VarStatus>,
    rows: Vec<VarStatus>,
}

impl Basis {
    fn start(&self, pool: &RowPool) -> Vec<VarStatus> {
        let mut s = self.vars.clone();
        s.extend(pool.active.iter().map(|&r| self.rows[r]));
        s
    }

    fn capture(pool: &RowPool, status: &[VarStatus]) -> Basis {
        let n = pool.inst.n_vars();
        let mut rows = vec![VarStatus::Basic; pool.inst.n_rows()];
        for (k, &r) in pool.active.iter().enumerate() {
            rows[r] = status[n + k];
        }
        Basis {
            vars: status[..n].to_vec(),
            rows,
        }
    }
}

struct NodeLp {
    objective: f64,
    values: Vec<f64>,
    basis: Basis,
}

struct NodeSolve {
    /// `None` when the node relaxation is infeasible.
    lp: Option<NodeLp>,
    rows_added: Vec<usize>,
    rounds: usize,
    iterations: usize,
}

/// Solves a node relaxation, adding violated lazy rows until none remain.
fn solve_with_rows(
    pool: &mut RowPool,
    lower: &[f64],
    upper: &[f64],
    warm: Option<&Basis>,
    tol: &Tolerances,
) -> Result<NodeSolve> {
    let mut basis = warm.cloned();
    let mut out = NodeSolve {
        lp: None,
        rows_added: Vec::new(),
        rounds: 0,
        iterations: 0,
    };
    loop {
        let lp = pool.build(lower, upper);
        let start = match &basis {
            Some(b) => b.start(pool),
            None => lp.slack_basis(),
        };
        let res = simplex(&lp, start)?;
        out.iterations += res.iterations;
        match res.outcome {
            Outcome::Infeasible => return Ok(out),
            Outcome::Unbounded => {
                return Err(Error::Numerical("relaxation is unbounded".into()));
            }
            Outcome::Optimal => {}
        }
        let n = pool.inst.n_vars();
        let values = res.x[..n].to_vec();
        let cut = pool.separate(&values, tol.row_violation);
        let captured = Basis::capture(pool, &res.status);
        if cut.is_empty() {
            out.lp = Some(NodeLp {
                objective: pool.inst.evaluate(&values),
                values,
                basis: captured,
            });
            return Ok(out);
        }
        pool.add(&cut);
        out.rows_added.extend_from_slice(&cut);
        out.rounds += 1;
        basis = Some(captured);
    }
}

struct Node {
    bound: f64,
    branch_var: usize,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then lowest branching
    // variable, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.branch_var.cmp(&self.branch_var))
            .then(other.id.cmp(&self.id))
    }
}

/// Outcome of one node: its relaxation and the rounded-and-fixed re-solve.
struct NodeWork {
    relax: NodeSolve,
    rounded: Option<NodeSolve>,
    fractional: Option<usize>,
}

fn most_fractional(inst: &MilpInstance, x: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &j in &inst.binaries {
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if dist > tol && best.is_none_or(|b| dist > b.0 + 1e-12) {
            best = Some((dist, j));
        }
    }
    best.map(|b| b.1)
}

fn work_node<'a>(
    mut pool: RowPool<'a>,
    node: &Node,
    opts: &SolveOptions,
) -> Result<(NodeWork, RowPool<'a>)> {
    let warm = node.basis.as_deref().filter(|_| opts.warm_start);
    let relax = solve_with_rows(&mut pool, &node.lower, &node.upper, warm, &opts.tolerances)?;
    let mut work = NodeWork {
        relax,
        rounded: None,
        fractional: None,
    };
    if let Some(lp) = &work.relax.lp {
        let inst = pool.inst;
        work.fractional = most_fractional(inst, &lp.values, opts.tolerances.integer);
        let (mut lo, mut hi) = (node.lower.clone(), node.upper.clone());
        for &j in &inst.binaries {
            let v = lp.values[j].round().clamp(lo[j], hi[j]);
            lo[j] = v;
            hi[j] = v;
        }
        let basis = lp.basis.clone();
        let warm = Some(&basis).filter(|_| opts.warm_start);
        work.rounded = Some(solve_with_rows(&mut pool, &lo, &hi, warm, &opts.tolerances)?);
    }
    Ok((work, pool))
}

/// Best-first branch-and-bound over the binaries.
pub fn solve_milp(instance: &MilpInstance, opts: &SolveOptions) -> Result<MipResult> {
    if instance.binaries.len() > 64 {
        return Err(Error::Dimension(format!(
            "{} binaries exceed the supported 64",
            instance.binaries.len()
        )));
    }
    let mut pool = RowPool::initial(instance, opts.lazy_rows, opts.initial_rows_per_group);
    let initial_rows = pool.active.len();
    let tol = opts.tolerances;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        branch_var: 0,
        id: 0,
        lower: instance.lower.clone(),
        upper: instance.upper.clone(),
        basis: None,
    });
    let mut next_id = 1;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut pruned_bound = f64::INFINITY;
    let mut root_bound = f64::NAN;
    let mut nodes = 0usize;
    let mut rounds = 0usize;
    let mut iterations = 0usize;
    let mut log = Vec::new();
    let batch_size = opts.parallel_batch.max(1);

    let cutoff = |inc: &Option<(f64, Vec<f64>)>| match inc {
        Some((v, _)) => v - tol.gap_rel * v.abs().max(1.0),
        None => f64::INFINITY,
    };

    while !heap.is_empty() {
        let mut batch = Vec::new();
        while batch.len() < batch_size {
            let Some(node) = heap.pop() else { break };
            if node.bound >= cutoff(&incumbent) {
                if node.bound < incumbent.as_ref().map_or(f64::INFINITY, |i| i.0) {
                    pruned_bound = pruned_bound.min(node.bound);
                }
                continue;
            }
            batch.push(node);
        }
        if batch.is_empty() {
            break;
        }
        if nodes + batch.len() > opts.node_limit {
            return Err(Error::IterationLimit {
                nodes,
                best: incumbent.map(|(objective, values)| {
                    Box::new(MipResult {
                        status: MipStatus::Optimal,
                        values,
                        objective,
                        bound: heap.peek().map_or(objective, |n| n.bound),
                        root_bound,
                        nodes,
                        rows_generated: pool.active.len() - initial_rows,
                        separation_rounds: rounds,
                        lp_iterations: iterations,
                        log: log.clone(),
                    })
                }),
            });
        }

        let results: Vec<Result<(NodeWork, RowPool)>> = if batch.len() == 1 {
            vec![work_node(pool.clone(), &batch[0], opts)]
        } else {
            batch
                .par_iter()
                .map(|node| work_node(pool.clone(), node, opts))
                .collect()
        };

        for (node, res) in batch.iter().zip(results) {
            let (work, _) = res?;
            nodes += 1;
            for s in std::iter::once(&work.relax).chain(work.rounded.as_ref()) {
                pool.add(&s.rows_added);
                rounds += s.rounds;
                iterations += s.iterations;
            }
            let Some(lp) = work.relax.lp else {
                continue;
            };
            if node.id == 0 {
                root_bound = lp.objective;
            }
            if let Some(r) = work.rounded.as_ref().and_then(|r| r.lp.as_ref()) {
                if incumbent.as_ref().is_none_or(|i| r.objective < i.0) {
                    incumbent = Some((r.objective, r.values.clone()));
                }
            }
            if opts.log {
                log.push(format!(
                    "{},{},{},{},{}",
                    node.id,
                    lp.objective,
                    incumbent.as_ref().map_or(f64::INFINITY, |i| i.0),
                    pool.active.len() - initial_rows,
                    heap.len()
                ));
            }
            if lp.objective >= cutoff(&incumbent) {
                if lp.objective < incumbent.as_ref().map_or(f64::INFINITY, |i| i.0) {
                    pruned_bound = pruned_bound.min(lp.objective);
                }
                continue;
            }
            let Some(j) = work.fractional else {
                continue;
            };
            let basis = Arc::new(lp.basis);
            for v in [0.0, 1.0] {
                let mut lower = node.lower.clone();
                let mut upper = node.upper.clone();
                lower[j] = v;
                upper[j] = v;
                heap.push(Node {
                    bound: lp.objective,
                    branch_var: j,
                    id: next_id,
                    lower,
                    upper,
                    basis: Some(basis.clone()),
                });
                next_id += 1;
            }
        }
    }

    let rows_generated = pool.active.len() - initial_rows;
    let Some((objective, values)) = incumbent else {
        return Ok(MipResult {
            status: MipStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            root_bound,
            nodes,
            rows_generated,
            separation_rounds: rounds,
            lp_iterations: iterations,
            log,
        });
    };
    let slack = 1e-6 * objective.abs().max(1.0);
    if root_bound > objective + slack {
        return Err(Error::Numerical(format!(
            "root relaxation {root_bound} exceeds integer objective {objective}"
        )));
    }
    Ok(MipResult {
        status: MipStatus::Optimal,
        values,
        objective,
        bound: pruned_bound.min(objective),
        root_bound,
        nodes,
        rows_generated,
        separation_rounds: rounds,
        lp_iterations: iterations,
        log,
    })
}
