//! Two-hour Gaussian toy model and its closed-form conditional moments.

use cpdispatch::model::{Entity, HolidayCalendar, ScenarioSet};
use cpdispatch::scengen::{JointLoadModel, Transform};

// Two-hour toy: A hours first, then B.
pub const MU: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
pub const SAA: [[f64; 2]; 2] = [[1.0, 0.3], [0.3, 1.0]];
pub const SBA: [[f64; 2]; 2] = [[0.6, 0.2], [0.1, 0.5]];
pub const SBB: [[f64; 2]; 2] = [[2.0, 0.8], [0.8, 2.0]];
pub const COND: [f64; 2] = [1.5, 1.0];

pub fn toy_cov(sba: [[f64; 2]; 2]) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = SAA[i][j];
            c[2 + i][2 + j] = SBB[i][j];
            c[2 + i][j] = sba[i][j];
            c[j][2 + i] = sba[i][j];
        }
    }
    c
}

pub fn toy(sba: [[f64; 2]; 2]) -> JointLoadModel {
    JointLoadModel::from_parts(
        Entity::new("A"),
        Entity::new(Entity::MG_NET),
        Transform::Identity,
        false,
        [MU.to_vec(), MU.to_vec()],
        toy_cov(sba),
        HolidayCalendar::UsFederal,
    )
    .unwrap()
}

/// Closed-form conditional mean and covariance of B given A = a, with the
/// 2×2 inverse written out.
pub fn oracle(sba: [[f64; 2]; 2], a: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let det = SAA[0][0] * SAA[1][1] - SAA[0][1] * SAA[1][0];
    let inv = [
        [SAA[1][1] / det, -SAA[0][1] / det],
        [-SAA[1][0] / det, SAA[0][0] / det],
    ];
    let mut gain = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            gain[i][j] = sba[i][0] * inv[0][j] + sba[i][1] * inv[1][j];
        }
    }
    let da = [a[0] - MU[0], a[1] - MU[1]];
    let mean = [
        MU[2] + gain[0][0] * da[0] + gain[0][1] * da[1],
        MU[3] + gain[1][0] * da[0] + gain[1][1] * da[1],
    ];
    let mut cov = SBB;
    for i in 0..2 {
        for j in 0..2 {
            // Σ_BA Σ_AA⁻¹ Σ_AB = gain · Σ_BAᵀ
            cov[i][j] -= gain[i][0] * sba[j][0] + gain[i][1] * sba[j][1];
        }
    }
    (mean, cov)
}

pub fn moments(set: &ScenarioSet) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = set.len() as f64;
    let mut m = [0.0; 2];
    for p in set.paths() {
        m[0] += p[0] / n;
        m[1] += p[1] / n;
    }
    let mut c = [[0.0; 2]; 2];
    for p in set.paths() {
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += (p[i] - m[i]) * (p[j] - m[j]) / (n - 1.0);
            }
        }
    }
    (m, c)
}
