//! Optimal rectangular linear assignment (shortest augmenting path Hungarian
//! method with row/column potentials).

/// Outcome of [`solve_assignment`]; indices refer to rows (tracks) and
/// columns (detections) of the cost matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentResult {
    /// `(row, col, cost)` sorted by row.
    pub matches: Vec<(usize, usize, f64)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    pub fn total_cost(&self) -> f64 {
        self.matches.iter().map(|m| m.2).sum()
    }
}

/// Square-or-wide core: `n <= m`, returns the column of every row.
fn hungarian(cost: &[Vec<f64>], n: usize, m: usize) -> Vec<usize> {
    debug_assert!(n <= m);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    // p[j]: row matched to column j (1-based, 0 = free); column 0 is the
    // virtual root of each augmenting search.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
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
            for j in 0..=m {
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
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-cost one-to-one matching between rows and columns.
///
/// Entries above `max_cost` (or non-finite) are forbidden. Among matchings
/// that use only allowed pairs, the solver first maximizes the number of
/// pairs and then minimizes their total cost. Without forbidden entries
/// this is the classic optimal assignment of `min(rows, cols)` pairs.
pub fn solve_assignment(cost: &[Vec<f64>], max_cost: f64) -> AssignmentResult {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    debug_assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    if n == 0 || m == 0 {
        return AssignmentResult { matches: vec![], unmatched_rows: (0..n).collect(), unmatched_cols: (0..m).collect() };
    }
    let allowed = |c: f64| c.is_finite() && c <= max_cost;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &c in cost.iter().flatten().filter(|&&c| allowed(c)) {
        lo = lo.min(c);
        hi = hi.max(c);
    }
    if lo > hi {
        return AssignmentResult { matches: vec![], unmatched_rows: (0..n).collect(), unmatched_cols: (0..m).collect() };
    }
    // One forbidden pair must outweigh any difference between allowed sums.
    let k = n.min(m) as f64;
    let big = hi + (k + 1.0) * (hi - lo + 1.0);

    let transposed = n > m;
    let (rn, rm) = if transposed { (m, n) } else { (n, m) };
    let work: Vec<Vec<f64>> = (0..rn)
        .map(|i| {
            (0..rm)
                .map(|j| {
                    let c = if transposed { cost[j][i] } else { cost[i][j] };
                    if allowed(c) {
                        c
                    } else {
                        big
                    }
                })
                .collect()
        })
        .collect();
    let assign = hungarian(&work, rn, rm);

    let mut matches = Vec::new();
    for (i, &j) in assign.iter().enumerate() {
        let (r, c) = if transposed { (j, i) } else { (i, j) };
        if allowed(cost[r][c]) {
            matches.push((r, c, cost[r][c]));
        }
    }
    matches.sort_by_key(|m| m.0);
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    for &(r, c, _) in &matches {
        row_used[r] = true;
        col_used[c] = true;
    }
    AssignmentResult {
        matches,
        unmatched_rows: (0..n).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..m).filter(|&c| !col_used[c]).collect(),
    }
}
