//! Maximum-weight bipartite matching (Kuhn-Munkres with potentials).

use alloc::vec;
use alloc::vec::Vec;

/// Best assignment of rows to columns for a nonnegative weight matrix given
/// as `rows x cols` in row-major order. Returns the total weight and, per
/// row, the matched column (`None` for rows left over when `rows > cols`).
pub(crate) fn max_weight_matching(weights: &[f64], rows: usize, cols: usize) -> (f64, Vec<Option<usize>>) {
    debug_assert_eq!(weights.len(), rows * cols);
    let n = rows.max(cols);
    if n == 0 {
        return (0.0, Vec::new());
    }
    // Square cost matrix, 1-based; padding cells weigh zero.
    let cost = |i: usize, j: usize| -> f64 {
        if i <= rows && j <= cols {
            -weights[(i - 1) * cols + (j - 1)]
        } else {
            0.0
        }
    };

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
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
                let cur = cost(i0, j) - u[i0] - v[j];
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

    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
            total += weights[(i - 1) * cols + (j - 1)];
        }
    }
    (total, assignment)
}
