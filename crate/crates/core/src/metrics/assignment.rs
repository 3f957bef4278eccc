use super::MetricsError;

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `cols[i]` is the column assigned to row `i`.
    pub cols: Vec<usize>,
    pub cost: f64,
}

fn check(cost: &[Vec<f64>]) -> Result<(), MetricsError> {
    let n = cost.len();
    for (row, r) in cost.iter().enumerate() {
        if r.len() != n {
            return Err(MetricsError::NotSquare { row, len: r.len(), expected: n });
        }
        if let Some(col) = r.iter().position(|c| !c.is_finite()) {
            return Err(MetricsError::NonFiniteCost { row, col });
        }
    }
    Ok(())
}

fn total(cost: &[Vec<f64>], cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Shortest augmenting path Hungarian algorithm. Returns the row-to-column
/// matching plus row and column potentials `u`, `v` with
/// `u[i] + v[j] <= c[i][j]`, tight on the matching.
fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j]: row (1-based) matched to column j; column 0 is a sentinel.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0; n];
    for j in 1..=n {
        cols[p[j] - 1] = j - 1;
    }
    (cols, u[1..].to_vec(), v[1..].to_vec())
}

/// Looks for an alternating path from `row` to the free column `target`,
/// using only allowed edges among rows/columns not yet fixed.
fn reroute(
    row: usize,
    target: usize,
    allowed: &[Vec<bool>],
    row_of: &mut [usize],
    col_of: &mut [usize],
    fixed_col: &[bool],
    seen: &mut [bool],
) -> bool {
    for j in 0..allowed.len() {
        if !allowed[row][j] || fixed_col[j] || seen[j] {
            continue;
        }
        seen[j] = true;
        if j == target {
            col_of[row] = j;
            row_of[j] = row;
            return true;
        }
        let next = row_of[j];
        if reroute(next, target, allowed, row_of, col_of, fixed_col, seen) {
            col_of[row] = j;
            row_of[j] = row;
            return true;
        }
    }
    false
}

/// Exact minimum-cost perfect matching on a square matrix. Among optimal
/// matchings the lexicographically smallest column sequence is returned.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Result<Assignment, MetricsError> {
    check(cost)?;
    let n = cost.len();
    if n == 0 {
        return Ok(Assignment { cols: Vec::new(), cost: 0.0 });
    }
    let (mut col_of, u, v) = hungarian(cost);
    let scale = 1.0 + cost.iter().flatten().fold(0.0f64, |m, c| m.max(c.abs()));
    let eps = 1e-9 * scale;
    // Every optimal matching uses only edges with zero reduced cost, and any
    // perfect matching on those edges is optimal.
    let mut allowed: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| cost[i][j] - u[i] - v[j] <= eps).collect())
        .collect();
    for (i, &j) in col_of.iter().enumerate() {
        allowed[i][j] = true;
    }
    let mut row_of = vec![0; n];
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }
    let mut fixed_col = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if fixed_col[j] || !allowed[i][j] {
                continue;
            }
            if col_of[i] == j {
                break;
            }
            // Take (i, j): the row holding j must reach i's old column.
            let freed = col_of[i];
            let displaced = row_of[j];
            let mut trial_fixed = fixed_col.clone();
            trial_fixed[j] = true;
            let mut seen = vec![false; n];
            let (mut r2, mut c2) = (row_of.clone(), col_of.clone());
            r2[freed] = usize::MAX;
            if reroute(displaced, freed, &allowed, &mut r2, &mut c2, &trial_fixed, &mut seen) {
                c2[i] = j;
                r2[j] = i;
                row_of = r2;
                col_of = c2;
                break;
            }
        }
        fixed_col[col_of[i]] = true;
    }
    let cost_sum = total(cost, &col_of);
    Ok(Assignment { cols: col_of, cost: cost_sum })
}

/// Exhaustive search over all permutations in lexicographic order. Only
/// usable for small matrices; kept as a reference implementation.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> Result<Assignment, MetricsError> {
    check(cost)?;
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = Assignment { cols: perm.clone(), cost: total(cost, &perm) };
    loop {
        // next lexicographic permutation
        let Some(k) = (0..n.saturating_sub(1)).rev().find(|&k| perm[k] < perm[k + 1]) else {
            break;
        };
        let l = (k + 1..n).rev().find(|&l| perm[l] > perm[k]).unwrap();
        perm.swap(k, l);
        perm[k + 1..].reverse();
        let c = total(cost, &perm);
        if c < best.cost - 1e-12 {
            best = Assignment { cols: perm.clone(), cost: c };
        }
    }
    Ok(best)
}
