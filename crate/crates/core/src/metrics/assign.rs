use crate::error::{Error, Result};

/// Largest problem accepted by the exhaustive search.
pub const PIT_MAX_SOURCES: usize = 8;

/// Minimum-cost bijection. `permutation[i]` is the estimate assigned to
/// source `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

fn validate(cost: &[Vec<f64>]) -> Result<usize> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty cost matrix".into()));
    }
    if let Some(row) = cost.iter().find(|r| r.len() != n) {
        return Err(Error::shape(format!("{n}x{n}"), format!("row of length {}", row.len())));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix entry".into()));
    }
    Ok(n)
}

fn permutation_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Costs within this distance of the optimum count as ties.
fn tie_tolerance(best: f64) -> f64 {
    1e-9 * best.abs().max(1.0)
}

/// Shortest augmenting path Hungarian method with row/column potentials,
/// O(n^3). Returns the optimal cost and one optimal assignment.
fn solve(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    // 1-based potentials with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = col0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        col1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    (permutation_cost(cost, &perm), perm)
}

/// Hungarian assignment, breaking ties toward the lexicographically
/// smallest optimal permutation.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<AssignmentResult> {
    let n = validate(cost)?;
    let (best, _) = solve(cost);
    let bound = best + tie_tolerance(best);

    // Fix rows in order, each to the smallest column that still admits an
    // optimal completion of the remaining rows.
    let mut permutation = Vec::with_capacity(n);
    let mut free: Vec<usize> = (0..n).collect();
    let mut prefix = 0.0;
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut chosen = None;
        for (slot, &col) in free.iter().enumerate() {
            let rest_cols: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
            let rest = if rest_rows.is_empty() {
                0.0
            } else {
                let sub: Vec<Vec<f64>> = rest_rows
                    .iter()
                    .map(|&r| rest_cols.iter().map(|&c| cost[r][c]).collect())
                    .collect();
                solve(&sub).0
            };
            if prefix + cost[row][col] + rest <= bound {
                chosen = Some(slot);
                break;
            }
        }
        // The optimum itself always completes, so a slot exists; fall back to
        // the first free column only under pathological rounding.
        let slot = chosen.unwrap_or(0);
        let col = free.remove(slot);
        prefix += cost[row][col];
        permutation.push(col);
    }
    let total_cost = permutation_cost(cost, &permutation);
    Ok(AssignmentResult {
        permutation,
        total_cost,
    })
}

/// Exhaustive permutation search, same tie rule as [`hungarian_assign`].
pub fn pit_brute_force(cost: &[Vec<f64>]) -> Result<AssignmentResult> {
    let n = validate(cost)?;
    if n > PIT_MAX_SOURCES {
        return Err(Error::InvalidInput(format!(
            "exhaustive search limited to {PIT_MAX_SOURCES} sources, got {n}"
        )));
    }
    let perms = lexicographic_permutations(n);
    let best = perms
        .iter()
        .map(|p| permutation_cost(cost, p))
        .fold(f64::INFINITY, f64::min);
    let bound = best + tie_tolerance(best);
    let permutation = perms
        .into_iter()
        .find(|p| permutation_cost(cost, p) <= bound)
        .expect("at least one permutation attains the minimum");
    let total_cost = permutation_cost(cost, &permutation);
    Ok(AssignmentResult {
        permutation,
        total_cost,
    })
}

fn lexicographic_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
        p.swap(i, j);
        p[i + 1..].reverse();
    }
    out
}
