//! Dense two-phase tableau simplex with Bland's rule. Slow and simple on
//! purpose: it shares no code with the library solver.

use cpdispatch::milpsolve::MilpInstance;

const EPS: f64 = 1e-10;

pub struct DenseLp {
    pub cost: Vec<f64>,
    pub offset: f64,
    /// `(coefficients, lower, upper)`.
    pub rows: Vec<(Vec<f64>, f64, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DenseLp {
    pub fn from_instance(inst: &MilpInstance, lower: &[f64], upper: &[f64]) -> DenseLp {
        let n = inst.n_vars();
        let rows = inst
            .rows
            .iter()
            .map(|r| {
                let mut a = vec![0.0; n];
                for &(j, v) in &r.coefs {
                    a[j] += v;
                }
                (a, r.lower, r.upper)
            })
            .collect();
        DenseLp {
            cost: inst.objective.clone(),
            offset: inst.objective_offset,
            rows,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        }
    }
}

#[derive(Debug)]
pub enum Outcome {
    Optimal(f64, Vec<f64>),
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
    Eq,
}

struct Tableau {
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r && row[c] != 0.0 {
                let f = row[c];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost·x` over the columns allowed by `allowed`. Returns
    /// false when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> bool {
        let m = self.t.len();
        let rhs = self.cols;
        loop {
            let mut entering = None;
            for c in 0..self.cols {
                if !allowed(c) || self.basis.contains(&c) {
                    continue;
                }
                let mut d = cost[c];
                for i in 0..m {
                    d -= cost[self.basis[i]] * self.t[i][c];
                }
                if d < -1e-9 {
                    entering = Some(c);
                    break;
                }
            }
            let Some(c) = entering else { return true };
            let mut leave: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                if self.t[i][c] > EPS {
                    let ratio = self.t[i][rhs] / self.t[i][c];
                    let better = match leave {
                        None => true,
                        Some((r, _, b)) => {
                            ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.basis[i] < b)
                        }
                    };
                    if better {
                        leave = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match leave {
                Some((_, r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Requires finite lower bounds on every variable.
pub fn solve(lp: &DenseLp) -> Outcome {
    let n = lp.cost.len();
    // shift x = lower + x', x' >= 0
    let mut cons: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for (a, lo, hi) in &lp.rows {
        let shift: f64 = a.iter().zip(&lp.lower).map(|(x, l)| x * l).sum();
        if lo == hi {
            cons.push((a.clone(), Sense::Eq, lo - shift));
        } else {
            if hi.is_finite() {
                cons.push((a.clone(), Sense::Le, hi - shift));
            }
            if lo.is_finite() {
                cons.push((a.clone(), Sense::Ge, lo - shift));
            }
        }
    }
    for j in 0..n {
        assert!(lp.lower[j].is_finite(), "oracle needs finite lower bounds");
        if lp.upper[j].is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            cons.push((a, Sense::Le, lp.upper[j] - lp.lower[j]));
        }
    }
    let m = cons.len();
    let n_slack = cons.iter().filter(|c| c.1 != Sense::Eq).count();
    let cols = n + n_slack + m;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut slack = n;
    for (i, (a, sense, b)) in cons.iter().enumerate() {
        t[i][..n].copy_from_slice(a);
        match sense {
            Sense::Le => {
                t[i][slack] = 1.0;
                slack += 1;
            }
            Sense::Ge => {
                t[i][slack] = -1.0;
                slack += 1;
            }
            Sense::Eq => {}
        }
        t[i][cols] = *b;
        if *b < 0.0 {
            for v in t[i].iter_mut() {
                *v = -*v;
            }
        }
        t[i][n + n_slack + i] = 1.0;
    }
    let art0 = n + n_slack;
    let mut tab = Tableau {
        t,
        basis: (art0..art0 + m).collect(),
        cols,
    };

    let mut c1 = vec![0.0; cols];
    for c in c1.iter_mut().skip(art0) {
        *c = 1.0;
    }
    tab.optimize(&c1, |_| true);
    let infeas: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= art0)
        .map(|i| tab.t[i][cols])
        .sum();
    if infeas > 1e-7 {
        return Outcome::Infeasible;
    }
    // drive zero-level artificials out of the basis
    for i in 0..m {
        if tab.basis[i] >= art0 {
            if let Some(c) = (0..art0).find(|&c| tab.t[i][c].abs() > 1e-9) {
                tab.pivot(i, c);
            }
        }
    }
    let mut c2 = vec![0.0; cols];
    c2[..n].copy_from_slice(&lp.cost);
    if !tab.optimize(&c2, |c| c < art0) {
        return Outcome::Unbounded;
    }
    let mut x = lp.lower.clone();
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] += tab.t[i][cols];
        }
    }
    let obj = lp.offset + lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    Outcome::Optimal(obj, x)
}
