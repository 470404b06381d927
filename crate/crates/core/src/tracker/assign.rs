//! Minimum-cost assignment (Hungarian / Jonker-Volgenant style) with a
//! deterministic lexicographic tie-break.

use crate::numkit::{sorted_sum, Matrix};

/// Solve the square/rectangular assignment problem for `cost` (rows x cols),
/// minimizing total cost over matchings of size `min(rows, cols)`.
///
/// Returns `(row, col)` pairs sorted by row. Among equal-cost optima the
/// lexicographically smallest mapping wins: lower rows are matched to lower
/// columns, and matching a row is preferred over skipping it.
pub fn assign(cost: &Matrix) -> Vec<(usize, usize)> {
    let n = cost.rows();
    let m = cost.cols();
    let size = n.min(m);
    if size == 0 {
        return Vec::new();
    }

    let all_cols: Vec<usize> = (0..m).collect();
    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(size);
    let mut avail = all_cols;

    // Greedy canonicalization: for each row in order, pick the choice (a
    // specific column, or skipping the row when affordable) whose completed
    // total cost is smallest; break exact ties toward the smallest column and
    // toward matching. Every candidate total is a canonically ordered sum of
    // the full matching, so equal-cost options compare exactly equal.
    for r in 0..n {
        if fixed.len() == size {
            break;
        }
        let needed = size - fixed.len();
        let rows_after = n - r - 1;

        let mut totals: Vec<f64> = Vec::with_capacity(avail.len() + 1);
        let mut options: Vec<Option<usize>> = Vec::with_capacity(avail.len() + 1);
        for &c in &avail {
            let rest: Vec<usize> = avail.iter().copied().filter(|&x| x != c).collect();
            if let Some(sub) = solve_subproblem(cost, r + 1, &rest, needed - 1) {
                let mut terms: Vec<f64> = fixed.iter().map(|&(rr, cc)| cost.at(rr, cc)).collect();
                terms.push(cost.at(r, c));
                terms.extend(sub.iter().map(|&(rr, cc)| cost.at(rr, cc)));
                totals.push(sorted_sum(&mut terms));
                options.push(Some(c));
            }
        }
        if rows_after >= needed {
            if let Some(sub) = solve_subproblem(cost, r + 1, &avail, needed) {
                let mut terms: Vec<f64> = fixed.iter().map(|&(rr, cc)| cost.at(rr, cc)).collect();
                terms.extend(sub.iter().map(|&(rr, cc)| cost.at(rr, cc)));
                totals.push(sorted_sum(&mut terms));
                options.push(None);
            }
        }

        let best = totals.iter().copied().fold(f64::INFINITY, f64::min);
        let pick = totals.iter().position(|&t| t == best).expect("assignment always feasible");
        if let Some(c) = options[pick] {
            fixed.push((r, c));
            avail.retain(|&x| x != c);
        }
    }
    fixed
}

/// Optimal matching of rows `row_start..` against the column subset `cols`,
/// of exactly `k` pairs. Returns `None` only if infeasible (k larger than
/// either side).
fn solve_subproblem(cost: &Matrix, row_start: usize, cols: &[usize], k: usize) -> Option<Vec<(usize, usize)>> {
    let rows: Vec<usize> = (row_start..cost.rows()).collect();
    if k > rows.len() || k > cols.len() {
        return None;
    }
    if k == 0 {
        return Some(Vec::new());
    }
    // A full min(|rows|, |cols|)-sized optimal matching restricted to this
    // submatrix always has size min(|rows|, |cols|) >= k, and since k equals
    // that minimum whenever this is called from `assign`, solve directly.
    let sub = min_cost_matching(cost, &rows, cols);
    debug_assert_eq!(sub.len(), rows.len().min(cols.len()));
    Some(sub)
}

/// Jonker-Volgenant shortest augmenting path solver on a submatrix view.
/// Requires nothing about shape; internally orients so rows <= cols.
fn min_cost_matching(cost: &Matrix, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize)> {
    if rows.is_empty() || cols.is_empty() {
        return Vec::new();
    }
    let transposed = rows.len() > cols.len();
    let (r_idx, c_idx): (&[usize], &[usize]) = if transposed { (cols, rows) } else { (rows, cols) };
    let n = r_idx.len();
    let m = c_idx.len();
    let at = |i: usize, j: usize| -> f64 {
        if transposed {
            cost.at(c_idx[j], r_idx[i])
        } else {
            cost.at(r_idx[i], c_idx[j])
        }
    };

    // Potentials-based shortest augmenting path, 1-indexed internally.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1]; // p[j]: row matched to column j (0 = none)
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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

    let mut pairs = Vec::with_capacity(n);
    for j in 1..=m {
        if p[j] != 0 {
            let (ri, ci) = (r_idx[p[j] - 1], c_idx[j - 1]);
            if transposed {
                pairs.push((ci, ri));
            } else {
                pairs.push((ri, ci));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}
