//! Dense elimination helpers shared by the facet check and the LP kernel.

use std::collections::BTreeSet;

use crate::scalar::Scalar;

/// Rank of a set of row vectors by Gaussian elimination. Exact for
/// rationals; for doubles pivots below `tol` count as zero.
pub fn rank<T: Scalar>(mut rows: Vec<Vec<T>>, tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows.len() {
            break;
        }
        // Largest pivot for doubles, first nonzero is enough for rationals.
        let pivot = (rank..rows.len())
            .filter(|&r| !rows[r][col].is_zero_tol(tol))
            .max_by(|&a, &b| {
                rows[a][col]
                    .to_f64()
                    .abs()
                    .partial_cmp(&rows[b][col].to_f64().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(pivot) = pivot else { continue };
        rows.swap(rank, pivot);
        let inv = T::one() / rows[rank][col].clone();
        let pivot_row: Vec<T> = rows[rank].iter().map(|v| v.clone() * inv.clone()).collect();
        let nz: Vec<usize> = (col..cols).filter(|&j| !pivot_row[j].is_zero_tol(0.0)).collect();
        for r in rank + 1..rows.len() {
            let factor = rows[r][col].clone();
            if factor.is_zero_tol(0.0) {
                continue;
            }
            for &j in &nz {
                rows[r][j].sub_mul_assign(&factor, &pivot_row[j]);
            }
        }
        rows[rank] = pivot_row;
        rank += 1;
    }
    rank
}

/// Affine dimension of a point set: rank of the homogenized points minus 1
/// (−1 for the empty set, encoded as `None`).
pub fn affine_dimension<T: Scalar>(points: &[Vec<T>], tol: f64) -> Option<usize> {
    if points.is_empty() {
        return None;
    }
    let rows = points
        .iter()
        .map(|p| {
            let mut h = Vec::with_capacity(p.len() + 1);
            h.push(T::one());
            h.extend(p.iter().cloned());
            h
        })
        .collect();
    Some(rank(rows, tol) - 1)
}

/// Inverse of a square matrix, or `None` if it is singular.
pub fn inverse<T: Scalar>(matrix: &[Vec<T>], tol: f64) -> Option<Vec<Vec<T>>> {
    let n = matrix.len();
    let rows: Vec<Vec<(usize, T)>> = matrix
        .iter()
        .map(|r| r.iter().cloned().enumerate().filter(|(_, v)| !v.is_zero_tol(0.0)).collect())
        .collect();
    let identity: Vec<Vec<(usize, T)>> = (0..n).map(|i| vec![(i, T::one())]).collect();
    let x = sparse_solve(rows, identity, tol)?;
    Some(
        x.into_iter()
            .map(|r| {
                let mut dense = vec![T::zero(); n];
                for (j, v) in r {
                    dense[j] = v;
                }
                dense
            })
            .collect(),
    )
}

/// Solves `A X = R` for square sparse `A` (given by rows) and sparse
/// right-hand sides `R` (rows, any width). Returns the rows of `X`.
///
/// Pivots are chosen Markowitz-style: the column with the fewest active
/// entries, then the shortest row. In double mode only entries within a
/// factor 10 of the column's largest are eligible and magnitudes up to
/// `tol` count as zero.
pub fn sparse_solve<T: Scalar>(
    a: Vec<Vec<(usize, T)>>,
    r: Vec<Vec<(usize, T)>>,
    tol: f64,
) -> Option<Vec<Vec<(usize, T)>>> {
    let n = a.len();
    let mut a = a;
    let mut r = r;
    for row in a.iter_mut() {
        row.sort_by_key(|(j, _)| *j);
    }
    for row in r.iter_mut() {
        row.sort_by_key(|(j, _)| *j);
    }
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in a.iter().enumerate() {
        for (j, _) in row {
            col_rows[*j].insert(i);
        }
    }
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(n);
    for _ in 0..n {
        let c = (0..n)
            .filter(|&j| !col_done[j])
            .min_by_key(|&j| col_rows[j].len())?;
        if col_rows[c].is_empty() {
            return None;
        }
        let value_at = |row: &Vec<(usize, T)>| {
            row.binary_search_by_key(&c, |(j, _)| *j).ok().map(|k| row[k].1.clone())
        };
        let exact = tol == 0.0;
        let max_mag = if exact {
            0.0
        } else {
            col_rows[c]
                .iter()
                .filter_map(|&i| value_at(&a[i]).map(|v| v.to_f64().abs()))
                .fold(0.0, f64::max)
        };
        if !exact && max_mag <= tol {
            return None;
        }
        let p = *col_rows[c]
            .iter()
            .filter(|&&i| exact || value_at(&a[i]).is_some_and(|v| v.to_f64().abs() >= 0.1 * max_mag))
            .min_by_key(|&&i| a[i].len())?;
        let pivot = value_at(&a[p]).expect("pivot entry");
        row_done[p] = true;
        col_done[c] = true;
        order.push((p, c));
        for (j, _) in &a[p] {
            col_rows[*j].remove(&p);
        }
        let targets: Vec<usize> = col_rows[c].iter().copied().collect();
        let prow = a[p].clone();
        let prhs = r[p].clone();
        for i in targets {
            let factor = value_at(&a[i]).expect("column entry") / pivot.clone();
            let old: Vec<usize> = a[i].iter().map(|(j, _)| *j).collect();
            a[i] = axpy(&a[i], &factor, &prow, tol, Some(c));
            r[i] = axpy(&r[i], &factor, &prhs, tol, None);
            for j in old {
                col_rows[j].remove(&i);
            }
            for (j, _) in &a[i] {
                col_rows[*j].insert(i);
            }
        }
    }
    // Back substitution in reverse pivot order.
    let mut x: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for &(p, c) in order.iter().rev() {
        let mut acc = r[p].clone();
        let mut pivot = T::one();
        for (j, v) in &a[p] {
            if *j == c {
                pivot = v.clone();
            } else {
                acc = axpy(&acc, v, &x[*j], tol, None);
            }
        }
        let inv = T::one() / pivot;
        x[c] = acc.into_iter().map(|(j, v)| (j, v * inv.clone())).collect();
    }
    Some(x)
}

/// `u − f·v` on sorted sparse vectors; `drop` removes one index outright.
fn axpy<T: Scalar>(u: &[(usize, T)], f: &T, v: &[(usize, T)], tol: f64, drop: Option<usize>) -> Vec<(usize, T)> {
    let mut out = Vec::with_capacity(u.len() + v.len());
    let (mut i, mut k) = (0, 0);
    while i < u.len() || k < v.len() {
        let ju = u.get(i).map_or(usize::MAX, |e| e.0);
        let jv = v.get(k).map_or(usize::MAX, |e| e.0);
        let (j, val) = if ju < jv {
            i += 1;
            (ju, u[i - 1].1.clone())
        } else if jv < ju {
            k += 1;
            let mut t = T::zero();
            t.sub_mul_assign(f, &v[k - 1].1);
            (jv, t)
        } else {
            i += 1;
            k += 1;
            let mut t = u[i - 1].1.clone();
            t.sub_mul_assign(f, &v[k - 1].1);
            (ju, t)
        };
        if Some(j) != drop && !val.is_zero_tol(tol * 1e-3) {
            out.push((j, val));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    #[test]
    fn rank_of_dependent_rows() {
        let rows = vec![
            vec![ratio(1, 1), ratio(2, 1), ratio(3, 1)],
            vec![ratio(2, 1), ratio(4, 1), ratio(6, 1)],
            vec![ratio(0, 1), ratio(1, 1), ratio(1, 1)],
        ];
        assert_eq!(rank(rows, 0.0), 2);
        assert_eq!(rank::<f64>(vec![], 0.0), 0);
    }

    #[test]
    fn affine_dimension_of_simplex() {
        let pts: Vec<Vec<Rational>> = vec![
            vec![ratio(0, 1), ratio(0, 1)],
            vec![ratio(1, 1), ratio(0, 1)],
            vec![ratio(0, 1), ratio(1, 1)],
        ];
        assert_eq!(affine_dimension(&pts, 0.0), Some(2));
        assert_eq!(affine_dimension(&pts[..1], 0.0), Some(0));
        assert_eq!(affine_dimension::<Rational>(&[], 0.0), None);
    }

    #[test]
    fn inverse_exact() {
        let m = vec![
            vec![ratio(0, 1), ratio(1, 1), ratio(0, 1)],
            vec![ratio(2, 1), ratio(0, 1), ratio(1, 1)],
            vec![ratio(1, 1), ratio(0, 1), ratio(1, 1)],
        ];
        let inv = inverse(&m, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = ratio(0, 1);
                for k in 0..3 {
                    s += m[i][k].clone() * inv[k][j].clone();
                }
                assert_eq!(s, if i == j { ratio(1, 1) } else { ratio(0, 1) });
            }
        }
        let singular = vec![vec![ratio(1, 1), ratio(1, 1)], vec![ratio(2, 1), ratio(2, 1)]];
        assert!(inverse(&singular, 0.0).is_none());
    }
}
