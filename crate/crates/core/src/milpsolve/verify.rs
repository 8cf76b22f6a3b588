use serde::{Deserialize, Serialize};

use super::{MilpInstance, MipResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Row { index: usize, name: String },
    Bound { var: usize, name: String },
    Integrality { var: usize, name: String },
}

/// Constraint check of a solution against the raw instance data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub max_violation: f64,
    /// Where `max_violation` occurs; `None` when nothing is violated.
    pub worst: Option<Violation>,
    /// Objective recomputed from the values.
    pub objective: f64,
    /// |recomputed − reported| objective.
    pub objective_error: f64,
}

pub fn verify_solution(instance: &MilpInstance, result: &MipResult) -> VerifyReport {
    let x = &result.values;
    let mut worst: Option<Violation> = None;
    let mut max = 0.0;
    let mut consider = |v: f64, what: &dyn Fn() -> Violation| {
        if v > max {
            max = v;
            worst = Some(what());
        }
    };
    for (j, &v) in x.iter().enumerate() {
        let viol = (instance.lower[j] - v).max(v - instance.upper[j]);
        consider(viol, &|| Violation::Bound {
            var: j,
            name: instance.names[j].clone(),
        });
    }
    for &j in &instance.binaries {
        consider((x[j] - x[j].round()).abs(), &|| Violation::Integrality {
            var: j,
            name: instance.names[j].clone(),
        });
    }
    for (i, row) in instance.rows.iter().enumerate() {
        let act = row.activity(x);
        consider((row.lower - act).max(act - row.upper), &|| Violation::Row {
            index: i,
            name: row.name.clone(),
        });
    }
    let objective = instance.evaluate(x);
    VerifyReport {
        max_violation: max,
        worst,
        objective,
        objective_error: (objective - result.objective).abs(),
    }
}
