//! Dense phase-one simplex for feasibility of `A x = b, x >= 0`.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Feasibility {
    /// Sum of artificial variables at the phase-one optimum.
    pub infeasibility: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

/// Minimises the sum of artificials with Bland's rule. Rows with negative
/// right-hand side are negated first.
pub(crate) fn phase_one(a: &[Vec<f64>], b: &[f64], max_pivots: usize) -> Result<Feasibility> {
    let m = a.len();
    assert_eq!(m, b.len());
    let n = a.first().map_or(0, Vec::len);
    let width = n + m + 1;
    let rhs = n + m;

    let mut tab = vec![vec![0.0; width]; m];
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in row.iter().enumerate() {
            tab[i][j] = sign * v;
        }
        tab[i][n + i] = 1.0;
        tab[i][rhs] = sign * bi;
    }
    // reduced costs for cost 1 on artificials, 0 elsewhere
    let mut cost = vec![0.0; width];
    for row in &tab {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[rhs] -= row[rhs];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    while let Some(enter) = (0..n + m).find(|&j| cost[j] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[i][enter];
            if coef > PIVOT_EPS {
                let ratio = tab[i][rhs] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
        }
        // phase one is bounded below by zero, so a column without a
        // positive entry can only be round-off
        let Some((row, _)) = leave else {
            cost[enter] = 0.0;
            continue;
        };
        pivot(&mut tab, &mut cost, row, enter);
        basis[row] = enter;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Numeric(format!(
                "phase-one simplex exceeded {max_pivots} pivots"
            )));
        }
    }

    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = tab[i][rhs].max(0.0);
        }
    }
    Ok(Feasibility {
        infeasibility: (-cost[rhs]).max(0.0),
        x,
        pivots,
    })
}

fn pivot(tab: &mut [Vec<f64>], cost: &mut [f64], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    let f = cost[col];
    if f != 0.0 {
        for (v, pv) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_feasible_point() {
        // x + y = 1, x - y = 0.5
        let a = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        let res = phase_one(&a, &[1.0, 0.5], 100).unwrap();
        assert!(res.infeasibility < 1e-12);
        assert!((res.x[0] - 0.75).abs() < 1e-12 && (res.x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        // x + y = 1, x + y = 2
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let res = phase_one(&a, &[1.0, 2.0], 100).unwrap();
        assert!((res.infeasibility - 1.0).abs() < 1e-12);
        // x = -1 with x >= 0
        let res = phase_one(&[vec![1.0]], &[-1.0], 100).unwrap();
        assert!(res.infeasibility > 0.5);
    }

    #[test]
    fn tolerates_redundant_rows() {
        let a = vec![
            vec![1.0, 1.0, 0.0],
            vec![2.0, 2.0, 0.0],
            vec![0.0, 1.0, 1.0],
        ];
        let res = phase_one(&a, &[1.0, 2.0, 1.0], 100).unwrap();
        assert!(res.infeasibility < 1e-12);
    }
}
