//! Maximum-weight perfect matching on a square weight matrix, used to label
//! eigenvectors by the sites they concentrate on.
//!
//! Weights may be `f64::NEG_INFINITY` to forbid an edge. The solver is the
//! classical Hungarian algorithm with row and column potentials, run on a
//! finite surrogate matrix: forbidden edges are replaced by a value low
//! enough that any matching using one scores strictly worse than every
//! all-finite matching, so the optimum avoids forbidden edges exactly when a
//! finite perfect matching exists.

/// Maximum-weight assignment of rows to columns.
///
/// Returns `assignment` with `assignment[row] = col`, maximizing the sum of
/// `weights[row][assignment[row]]`, or `None` if every perfect matching uses
/// a forbidden (`-inf`) edge. Entries must be finite or `-inf`; the matrix
/// must be square.
///
/// Ties are broken deterministically by the fixed scan order of the
/// augmenting-path search, so equal inputs give equal outputs.
pub fn max_assignment(weights: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = weights.len();
    if n == 0 {
        return Some(Vec::new());
    }
    for row in weights {
        assert_eq!(row.len(), n, "weight matrix must be square");
        for &w in row {
            assert!(
                !w.is_nan() && w < f64::INFINITY,
                "weights must be finite or -inf, got {w}"
            );
        }
    }
    let finite: Vec<f64> = weights.iter().flatten().copied().filter(|w| w.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    let wmax = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wmin = finite.iter().copied().fold(f64::INFINITY, f64::min);
    // Any matching with a forbidden edge scores below sentinel + (n-1)*wmax,
    // which is below the n*wmin floor of all-finite matchings.
    let sentinel = wmin - (wmax - wmin + 1.0) * n as f64;
    let cost: Vec<Vec<f64>> = weights
        .iter()
        .map(|row| row.iter().map(|&w| if w.is_finite() { -w } else { -sentinel }).collect())
        .collect();
    let assignment = hungarian_min(&cost);
    if assignment.iter().enumerate().any(|(i, &j)| !weights[i][j].is_finite()) {
        return None;
    }
    Some(assignment)
}

/// Total weight of an assignment.
pub fn assignment_weight(weights: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| weights[i][j]).sum()
}

/// O(n^3) Hungarian algorithm, minimizing over a finite square cost matrix.
/// Column `n` is a virtual start column for the augmenting-path search.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    const FREE: usize = usize::MAX;
    let n = cost.len();
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n + 1];
    let mut col_row = vec![FREE; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 0..n {
        col_row[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
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
            debug_assert!(delta.is_finite());
            for j in 0..=n {
                if used[j] {
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == FREE {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    let mut row_col = vec![FREE; n];
    for j in 0..n {
        if col_row[j] != FREE {
            row_col[col_row[j]] = j;
        }
    }
    debug_assert!(row_col.iter().all(|&j| j != FREE));
    row_col
}
