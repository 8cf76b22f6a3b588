//! Counting oracles for peak probabilities, written independently of the
//! library: a path's maximum by sorting, its peak hour as the first index
//! holding it.

pub fn oracle_max(p: &[f64]) -> f64 {
    let mut v = p.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v[0]
}

pub fn oracle_day(rows: &[Vec<f64>], level: f64) -> f64 {
    let mut hits = 0;
    for r in rows {
        if oracle_max(r) > level {
            hits += 1;
        }
    }
    hits as f64 / rows.len() as f64
}

pub fn oracle_hist(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; rows[0].len()];
    for r in rows {
        let m = oracle_max(r);
        let k = r.iter().position(|v| *v == m).unwrap();
        h[k] += 1.0;
    }
    h.iter().map(|c| c / rows.len() as f64).collect()
}
