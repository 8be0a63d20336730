//! Exact rank of integer matrices by fraction-free (Bareiss) elimination.

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// Rank of an integer matrix given by rows. Ragged rows are zero-padded.
pub fn rank(rows: &[Vec<i64>]) -> usize {
    let big: Vec<Vec<BigInt>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
        .collect();
    rank_bigint(big)
}

pub fn rank_bigint(mut a: Vec<Vec<BigInt>>) -> usize {
    let nrows = a.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = a.iter().map(Vec::len).max().unwrap_or(0);
    for row in &mut a {
        row.resize(ncols, BigInt::zero());
    }
    let mut prev = BigInt::one();
    let mut r = 0;
    for col in 0..ncols {
        let Some(pivot) = (r..nrows).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(r, pivot);
        for i in r + 1..nrows {
            for j in col + 1..ncols {
                // Sylvester's identity keeps every division exact.
                let v = (&a[r][col] * &a[i][j] - &a[i][col] * &a[r][j]) / &prev;
                a[i][j] = v;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[r][col].clone();
        r += 1;
        if r == nrows {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ranks() {
        assert_eq!(rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(rank(&[vec![1, 2], vec![3, 4]]), 2);
        assert_eq!(rank(&[vec![0, 0], vec![0, 0]]), 0);
        assert_eq!(rank(&[]), 0);
        assert_eq!(rank(&[vec![0, 1, 2], vec![0, 2, 4], vec![1, 0, 0]]), 2);
    }

    #[test]
    fn rank_deficient_product() {
        // A 6x6 product of 6x3 and 3x6 integer matrices has rank 3.
        let left: Vec<Vec<i64>> = (0..6)
            .map(|i| (0..3).map(|j| (i * 7 + j * 3) % 5 - 2).collect())
            .collect();
        let right: Vec<Vec<i64>> = (0..3)
            .map(|i| (0..6).map(|j| (i * 11 + j * 2) % 7 - 3).collect())
            .collect();
        let prod: Vec<Vec<i64>> = (0..6)
            .map(|i| {
                (0..6)
                    .map(|j| (0..3).map(|k| left[i][k] * right[k][j]).sum())
                    .collect()
            })
            .collect();
        assert_eq!(rank(&left), 3);
        assert_eq!(rank(&right), 3);
        assert_eq!(rank(&prod), 3);
    }

    #[test]
    fn hilbert_like_matrix_is_full_rank() {
        // Scaled Hilbert matrix: entries lcm / (i + j + 1), full rank.
        let n = 8;
        let lcm: i64 = 720720;
        let rows: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| lcm / (i + j + 1) as i64).collect())
            .collect();
        assert_eq!(rank(&rows), n);
    }
}
