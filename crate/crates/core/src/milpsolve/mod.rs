//! Exact solver for the small mixed-binary programs built by `schedopt`:
//! a bounded-variable revised primal simplex for relaxations and a
//! best-first branch-and-bound over the binaries, with optional lazy
//! generation of grouped rows.

mod bnb;
mod factor;
pub mod lpformat;
mod simplex;
mod verify;

use serde::{Deserialize, Serialize};

pub use bnb::{solve_lp, solve_milp};
pub use verify::{verify_solution, VerifyReport, Violation};

/// One linear row `lower ≤ Σ coef·x ≤ upper`. Rows sharing a `lazy_group`
/// are candidates for lazy generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
    pub lazy_group: Option<usize>,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// A minimization problem over bounded variables, some of them binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<f64>,
    /// Constant added to the linear objective.
    pub objective_offset: f64,
    pub rows: Vec<Row>,
    pub binaries: Vec<usize>,
}

impl MilpInstance {
    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Copy with the lazy-group tags removed, so every row is always active.
    pub fn dense(&self) -> MilpInstance {
        let mut out = self.clone();
        out.rows.iter_mut().for_each(|r| r.lazy_group = None);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// `(row index, dual)` for every row in the active set.
    pub duals: Vec<(usize, f64)>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative optimality gap at which branch-and-bound stops.
    pub gap_rel: f64,
    pub integer: f64,
    /// A lazy row violated by more than this is added.
    pub row_violation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gap_rel: 1e-9,
            integer: 1e-6,
            row_violation: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tolerances: Tolerances,
    /// Generate grouped rows lazily instead of loading them all up front.
    pub lazy_rows: bool,
    /// Rows per group loaded initially, chosen by largest lower bound.
    pub initial_rows_per_group: usize,
    /// Start every node from the parent's basis.
    pub warm_start: bool,
    pub node_limit: usize,
    /// Nodes solved concurrently per batch; 1 is strictly sequential.
    pub parallel_batch: usize,
    /// Record `node,bound,incumbent,rows,active` lines in the result.
    pub log: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerances: Tolerances::default(),
            lazy_rows: true,
            initial_rows_per_group: 3,
            warm_start: true,
            node_limit: 100_000,
            parallel_batch: 1,
            log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub root_bound: f64,
    pub nodes: usize,
    pub rows_generated: usize,
    pub separation_rounds: usize,
    pub lp_iterations: usize,
    pub log: Vec<String>,
}
