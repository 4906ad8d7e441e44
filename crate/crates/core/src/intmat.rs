//! Exact integer and rational arithmetic on loop and incidence matrices.

#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;

pub type IntMatrix = DMatrix<i32>;

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn rank(m: &IntMatrix) -> usize {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<i128>> = (0..rows)
        .map(|r| (0..cols).map(|c| m[(r, c)] as i128).collect())
        .collect();
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(pivot) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, pivot);
        let p = a[rank][col];
        for r in rank + 1..rows {
            let f = a[r][col];
            for c in col..cols {
                a[r][c] = (p * a[r][c] - f * a[rank][c]) / prev;
            }
        }
        prev = p;
        rank += 1;
    }
    rank
}

/// Exact product `a * b` with overflow checks in debug builds.
pub fn mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    assert_eq!(a.ncols(), b.nrows(), "dimension mismatch in integer product");
    a * b
}

pub fn is_zero(m: &IntMatrix) -> bool {
    m.iter().all(|&v| v == 0)
}

pub fn entries_unit(m: &IntMatrix) -> bool {
    m.iter().all(|&v| (-1..=1).contains(&v))
}

/// Basis of the right null space of `m` over the rationals, scaled to integer
/// vectors. Computed by reduced row echelon form with `i128` fractions.
pub fn null_space(m: &IntMatrix) -> Vec<Vec<i64>> {
    let (rows, cols) = m.shape();
    // rational entries as (num, den) with den > 0
    let mut a: Vec<Vec<(i128, i128)>> = (0..rows)
        .map(|r| (0..cols).map(|c| (m[(r, c)] as i128, 1)).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let Some(p) = (row..rows).find(|&r| a[r][col].0 != 0) else {
            continue;
        };
        a.swap(row, p);
        let piv = a[row][col];
        for c in 0..cols {
            a[row][c] = div(a[row][c], piv);
        }
        for r in 0..rows {
            if r != row && a[r][col].0 != 0 {
                let f = a[r][col];
                for c in 0..cols {
                    let t = mulq(f, a[row][c]);
                    a[r][c] = sub(a[r][c], t);
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![(0i128, 1i128); cols];
            v[fc] = (1, 1);
            for (r, &pc) in pivots.iter().enumerate() {
                let e = a[r][fc];
                v[pc] = (-e.0, e.1);
            }
            let l = v.iter().fold(1i128, |acc, &(_, d)| lcm(acc, d));
            v.iter().map(|&(n, d)| (n * (l / d)) as i64).collect()
        })
        .collect()
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: i128, b: i128) -> i128 {
    a / gcd(a, b) * b
}

fn norm((n, d): (i128, i128)) -> (i128, i128) {
    if n == 0 {
        return (0, 1);
    }
    let g = gcd(n, d);
    let s = if d < 0 { -1 } else { 1 };
    (s * n / g, s * d / g)
}

fn mulq(a: (i128, i128), b: (i128, i128)) -> (i128, i128) {
    norm((a.0 * b.0, a.1 * b.1))
}

fn div(a: (i128, i128), b: (i128, i128)) -> (i128, i128) {
    norm((a.0 * b.1, a.1 * b.0))
}

fn sub(a: (i128, i128), b: (i128, i128)) -> (i128, i128) {
    norm((a.0 * b.1 - b.0 * a.1, a.1 * b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_dependent_rows() {
        let i = IntMatrix::identity(4, 4);
        assert_eq!(rank(&i), 4);
        let m = IntMatrix::from_row_slice(3, 3, &[1, -1, 0, 0, 1, -1, 1, 0, -1]);
        assert_eq!(rank(&m), 2);
        assert_eq!(rank(&IntMatrix::zeros(2, 5)), 0);
    }

    #[test]
    fn null_space_of_path_incidence() {
        // triangle incidence: one independent cycle
        let m = IntMatrix::from_row_slice(3, 3, &[-1, 0, 1, 1, -1, 0, 0, 1, -1]);
        let ns = null_space(&m);
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        for r in 0..3 {
            let s: i64 = (0..3).map(|c| m[(r, c)] as i64 * v[c]).sum();
            assert_eq!(s, 0);
        }
    }
}
