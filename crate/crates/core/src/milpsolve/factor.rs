//! Basis factorization.
//!
//! The basis is permuted to block upper-triangular form
//!
//! ```text
//!   [ U11 U12 U13 ]
//!   [  0  M22 X23 ]
//!   [  0   0  L33 ]
//! ```
//!
//! where U11 collects column singletons, L33 row singletons and M22 is the
//! remaining bump, factored densely with partial pivoting. Updates are kept
//! in product form until the next refactorization.

/// Sparse column, `(row, value)` pairs.
pub(crate) type Column = Vec<(usize, f64)>;

const SINGLETON_TOL: f64 = 1e-9;
const LU_TOL: f64 = 1e-11;

#[derive(Debug)]
pub(crate) struct Singular {
    /// Basis positions whose columns are dependent.
    pub positions: Vec<usize>,
    /// Rows left without a pivot, as many as `positions`.
    pub rows: Vec<usize>,
}

struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

struct Pivot {
    row: usize,
    pos: usize,
    value: f64,
}

pub(crate) struct Factor {
    m: usize,
    cols: Vec<Column>,
    front: Vec<Pivot>,
    back: Vec<Pivot>,
    bump_rows: Vec<usize>,
    bump_pos: Vec<usize>,
    /// Row-major k×k LU of the permuted bump, unit lower part implicit.
    lu: Vec<f64>,
    /// `perm[i]` is the bump-local row in position i.
    perm: Vec<usize>,
    etas: Vec<Eta>,
}

impl Factor {
    /// Factors the basis whose column at position p is `cols[p]`.
    pub fn new(m: usize, cols: Vec<Column>) -> Result<Factor, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut row_pos: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (p, c) in cols.iter().enumerate() {
            for &(r, v) in c {
                if v != 0.0 {
                    row_pos[r].push(p);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut pos_active = vec![true; m];

        // column singletons
        let mut col_cnt: Vec<usize> = cols
            .iter()
            .map(|c| c.iter().filter(|e| e.1 != 0.0).count())
            .collect();
        let mut queue: Vec<usize> = (0..m).filter(|&p| col_cnt[p] == 1).collect();
        queue.reverse();
        let mut front = Vec::new();
        while let Some(p) = queue.pop() {
            if !pos_active[p] || col_cnt[p] != 1 {
                continue;
            }
            let Some(&(r, v)) = cols[p].iter().find(|e| e.1 != 0.0 && row_active[e.0]) else {
                continue;
            };
            let cmax = cols[p].iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
            if v.abs() < SINGLETON_TOL * cmax.max(1.0) {
                continue;
            }
            front.push(Pivot { row: r, pos: p, value: v });
            pos_active[p] = false;
            row_active[r] = false;
            for &q in &row_pos[r] {
                if pos_active[q] {
                    col_cnt[q] -= 1;
                    if col_cnt[q] == 1 {
                        queue.push(q);
                    }
                }
            }
        }

        // row singletons among what is left
        let mut row_cnt: Vec<usize> = (0..m)
            .map(|r| {
                if row_active[r] {
                    row_pos[r].iter().filter(|&&p| pos_active[p]).count()
                } else {
                    0
                }
            })
            .collect();
        let mut queue: Vec<usize> = (0..m).filter(|&r| row_active[r] && row_cnt[r] == 1).collect();
        queue.reverse();
        let mut back = Vec::new();
        while let Some(r) = queue.pop() {
            if !row_active[r] || row_cnt[r] != 1 {
                continue;
            }
            let Some(&p) = row_pos[r].iter().find(|&&p| pos_active[p]) else {
                continue;
            };
            let v = cols[p]
                .iter()
                .filter(|e| e.0 == r)
                .map(|e| e.1)
                .sum::<f64>();
            let cmax = cols[p].iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
            if v.abs() < SINGLETON_TOL * cmax.max(1.0) {
                continue;
            }
            back.push(Pivot { row: r, pos: p, value: v });
            row_active[r] = false;
            pos_active[p] = false;
            for &(s, a) in &cols[p] {
                if a != 0.0 && row_active[s] {
                    row_cnt[s] -= 1;
                    if row_cnt[s] == 1 {
                        queue.push(s);
                    }
                }
            }
        }

        let bump_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let bump_pos: Vec<usize> = (0..m).filter(|&p| pos_active[p]).collect();
        let k = bump_rows.len();
        debug_assert_eq!(k, bump_pos.len());
        let mut local = vec![usize::MAX; m];
        for (i, &r) in bump_rows.iter().enumerate() {
            local[r] = i;
        }
        let mut lu = vec![0.0; k * k];
        for (j, &p) in bump_pos.iter().enumerate() {
            for &(r, v) in &cols[p] {
                if local[r] != usize::MAX {
                    lu[local[r] * k + j] += v;
                }
            }
        }

        // Dense LU with partial pivoting. A column without an acceptable
        // pivot is recorded as dependent and skipped.
        let mut perm: Vec<usize> = (0..k).collect();
        let mut dependent = Vec::new();
        let mut next = 0;
        let mut pivot_col = Vec::with_capacity(k);
        let scale = lu.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for j in 0..k {
            if next == k {
                dependent.push(j);
                continue;
            }
            let (best, bval) = (next..k)
                .map(|i| (i, lu[i * k + j].abs()))
                .fold((next, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if bval <= LU_TOL * scale {
                dependent.push(j);
                continue;
            }
            if best != next {
                for c in 0..k {
                    lu.swap(best * k + c, next * k + c);
                }
                perm.swap(best, next);
            }
            let piv = lu[next * k + j];
            for i in next + 1..k {
                let f = lu[i * k + j] / piv;
                if f != 0.0 {
                    lu[i * k + j] = f;
                    for c in j + 1..k {
                        lu[i * k + c] -= f * lu[next * k + c];
                    }
                } else {
                    lu[i * k + j] = 0.0;
                }
            }
            pivot_col.push(j);
            next += 1;
        }
        if !dependent.is_empty() {
            return Err(Singular {
                positions: dependent.iter().map(|&j| bump_pos[j]).collect(),
                rows: perm[next..].iter().map(|&i| bump_rows[i]).collect(),
            });
        }

        Ok(Factor {
            m,
            cols,
            front,
            back,
            bump_rows,
            bump_pos,
            lu,
            perm,
            etas: Vec::new(),
        })
    }

    pub fn updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves M z = b in place for the bump.
    fn bump_solve(&self, b: &mut [f64]) {
        let k = self.bump_rows.len();
        let mut z: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..k {
            let row = &self.lu[i * k..i * k + i];
            let s: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
            z[i] -= s;
        }
        for i in (0..k).rev() {
            let row = &self.lu[i * k..(i + 1) * k];
            let s: f64 = row[i + 1..].iter().zip(&z[i + 1..]).map(|(a, b)| a * b).sum();
            z[i] = (z[i] - s) / row[i];
        }
        b.copy_from_slice(&z);
    }

    /// Solves Mᵀ y = c in place for the bump.
    fn bump_solve_t(&self, c: &mut [f64]) {
        let k = self.bump_rows.len();
        let mut z = c.to_vec();
        for i in 0..k {
            let mut s = z[i];
            for l in 0..i {
                s -= self.lu[l * k + i] * z[l];
            }
            z[i] = s / self.lu[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = z[i];
            for l in i + 1..k {
                s -= self.lu[l * k + i] * z[l];
            }
            z[i] = s;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            c[p] = z[i];
        }
    }

    /// Solves B x = rhs; `rhs` is indexed by row, the result by basis position.
    pub fn ftran(&self, rhs: &[f64]) -> Vec<f64> {
        let mut w = rhs.to_vec();
        let mut x = vec![0.0; self.m];
        for p in &self.back {
            let xp = w[p.row] / p.value;
            x[p.pos] = xp;
            if xp != 0.0 {
                for &(s, a) in &self.cols[p.pos] {
                    w[s] -= a * xp;
                }
            }
        }
        if !self.bump_rows.is_empty() {
            let mut b: Vec<f64> = self.bump_rows.iter().map(|&r| w[r]).collect();
            self.bump_solve(&mut b);
            for (j, &p) in self.bump_pos.iter().enumerate() {
                x[p] = b[j];
                if b[j] != 0.0 {
                    for &(s, a) in &self.cols[p] {
                        w[s] -= a * b[j];
                    }
                }
            }
        }
        for p in self.front.iter().rev() {
            let xp = w[p.row] / p.value;
            x[p.pos] = xp;
            if xp != 0.0 {
                for &(s, a) in &self.cols[p.pos] {
                    w[s] -= a * xp;
                }
            }
        }
        for e in &self.etas {
            let xp = x[e.pos];
            if xp != 0.0 {
                let xp = xp / e.pivot;
                x[e.pos] = xp;
                for &(i, d) in &e.entries {
                    x[i] -= d * xp;
                }
            }
        }
        x
    }

    /// Solves Bᵀ y = c; `c` is indexed by basis position, the result by row.
    pub fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for e in self.etas.iter().rev() {
            let s: f64 = e.entries.iter().map(|&(i, d)| c[i] * d).sum();
            c[e.pos] = (c[e.pos] - s) / e.pivot;
        }
        let mut y = vec![0.0; self.m];
        let dot = |col: &Column, y: &[f64]| col.iter().map(|&(s, a)| a * y[s]).sum::<f64>();
        for p in &self.front {
            y[p.row] = (c[p.pos] - dot(&self.cols[p.pos], &y)) / p.value;
        }
        if !self.bump_rows.is_empty() {
            let mut rhs: Vec<f64> = self
                .bump_pos
                .iter()
                .map(|&p| c[p] - dot(&self.cols[p], &y))
                .collect();
            self.bump_solve_t(&mut rhs);
            for (i, &r) in self.bump_rows.iter().enumerate() {
                y[r] = rhs[i];
            }
        }
        for p in self.back.iter().rev() {
            y[p.row] = (c[p.pos] - dot(&self.cols[p.pos], &y)) / p.value;
        }
        y
    }

    /// Replaces the column at `pos` given its transformed column `d = B⁻¹a`.
    pub fn update(&mut self, pos: usize, d: &[f64]) {
        let entries = d
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != pos && v.abs() > 1e-14)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: d[pos],
            entries,
        });
    }
}
