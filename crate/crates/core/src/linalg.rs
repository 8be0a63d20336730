//! Dense symmetric eigensolvers and a tridiagonal linear solver.

use crate::error::{LabError, Result};

/// Dense square matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    /// Symmetric tridiagonal matrix from its diagonal and first off-diagonal.
    pub fn tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        assert_eq!(off.len() + 1, n.max(1));
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, diag[i]);
        }
        for (i, &e) in off.iter().enumerate() {
            m.set(i, i + 1, e);
            m.set(i + 1, i, e);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    fn bandwidth_is_tridiagonal(&self) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                if i.abs_diff(j) > 1 && self.get(i, j) != 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

/// All eigenvalues of a symmetric matrix in ascending order.
///
/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson shifts. Input that is already tridiagonal skips the reduction.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (diag, off) = if a.bandwidth_is_tridiagonal() {
        let diag = (0..n).map(|i| a.get(i, i)).collect();
        let off = (0..n - 1).map(|i| a.get(i, i + 1)).collect();
        (diag, off)
    } else {
        householder_tridiagonal(a)
    };
    let mut vals = tridiagonal_ql(diag, off)?;
    vals.sort_by(|x, y| x.total_cmp(y));
    Ok(vals)
}

/// Reduces a symmetric matrix to tridiagonal form; returns (diagonal, off-diagonal).
fn householder_tridiagonal(a: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: f64 = ((k + 1)..n).map(|i| m.get(i, k).powi(2)).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let x0 = m.get(k + 1, k);
        let alpha = if x0 >= 0.0 {
            -alpha_sq.sqrt()
        } else {
            alpha_sq.sqrt()
        };
        for vi in v.iter_mut() {
            *vi = 0.0;
        }
        v[k + 1] = x0 - alpha;
        for i in (k + 2)..n {
            v[i] = m.get(i, k);
        }
        let vnorm_sq: f64 = v[(k + 1)..].iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        // A <- H A H with H = I - 2 v v^T / (v^T v), applied to the trailing block.
        for i in (k + 1)..n {
            let mut s = 0.0;
            for j in (k + 1)..n {
                s += m.get(i, j) * v[j];
            }
            p[i] = 2.0 * s / vnorm_sq;
        }
        let kdot: f64 = ((k + 1)..n).map(|i| v[i] * p[i]).sum::<f64>() / vnorm_sq;
        for i in (k + 1)..n {
            p[i] -= kdot * v[i];
        }
        for i in (k + 1)..n {
            for j in (k + 1)..n {
                let val = m.get(i, j) - v[i] * p[j] - p[i] * v[j];
                m.set(i, j, val);
            }
        }
        m.set(k + 1, k, alpha);
        m.set(k, k + 1, alpha);
        for i in (k + 2)..n {
            m.set(i, k, 0.0);
            m.set(k, i, 0.0);
        }
    }
    let diag = (0..n).map(|i| m.get(i, i)).collect();
    let off = (0..n - 1).map(|i| m.get(i, i + 1)).collect();
    (diag, off)
}

/// Implicit QL iteration for a symmetric tridiagonal matrix.
pub fn tridiagonal_ql(mut d: Vec<f64>, off: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    let mut e = off;
    e.push(0.0);
    const MAX_ITER: usize = 60;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_ITER {
                return Err(LabError::NoConvergence {
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Cyclic Jacobi rotations; returns ascending eigenvalues.
pub fn jacobi_eigenvalues(a: &DenseMatrix, max_sweeps: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut m = a.clone();
    let scale: f64 = (0..n)
        .map(|i| m.get(i, i).abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let off_norm = |m: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m.get(i, j).powi(2);
            }
        }
        s.sqrt()
    };
    for _sweep in 0..max_sweeps {
        let off = off_norm(&m);
        if off <= 1e-15 * scale {
            let mut vals: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
            vals.sort_by(|x, y| x.total_cmp(y));
            return Ok(vals);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.get(p, k);
                    let aqk = m.get(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Err(LabError::NoConvergence {
        iterations: max_sweeps,
        residual: off_norm(&m),
    })
}

/// Solves a tridiagonal system `sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if rhs.len() != n || sub.len() + 1 != n || sup.len() + 1 != n {
        return Err(LabError::LinearSolve(format!(
            "inconsistent band lengths for n = {n}"
        )));
    }
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(LabError::LinearSolve("zero pivot at row 0".into()));
    }
    if n > 1 {
        c[0] = sup[0] / denom;
    }
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i - 1] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(LabError::LinearSolve(format!("zero pivot at row {i}")));
        }
        if i + 1 < n {
            c[i] = sup[i] / denom;
        }
        x[i] = (rhs[i] - sub[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> DenseMatrix {
        DenseMatrix::from_rows(&[
            vec![4.0, 1.0, -2.0, 2.0],
            vec![1.0, 2.0, 0.0, 1.0],
            vec![-2.0, 0.0, 3.0, -2.0],
            vec![2.0, 1.0, -2.0, -1.0],
        ])
    }

    #[test]
    fn householder_ql_agrees_with_jacobi() {
        let a = sample_matrix();
        let ql = symmetric_eigenvalues(&a).unwrap();
        let jac = jacobi_eigenvalues(&a, 50).unwrap();
        for (x, y) in ql.iter().zip(&jac) {
            assert!((x - y).abs() < 1e-12, "{ql:?} vs {jac:?}");
        }
        let trace: f64 = ql.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        // Dirichlet second difference: 2 - 2 cos(k pi / (n + 1)).
        let n = 40;
        let a = DenseMatrix::tridiagonal(&vec![2.0; n], &vec![-1.0; n - 1]);
        let vals = symmetric_eigenvalues(&a).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
        let dense_path = householder_tridiagonal(&a);
        let vals2 = tridiagonal_ql(dense_path.0, dense_path.1).unwrap();
        let mut vals2 = vals2;
        vals2.sort_by(|x, y| x.total_cmp(y));
        for (x, y) in vals.iter().zip(&vals2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn thomas_solver() {
        let x = solve_tridiagonal(&[1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0], &[5.0, 6.0, 5.0])
            .unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(solve_tridiagonal(&[1.0], &[0.0, 1.0], &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn asymmetry_detects_perturbation() {
        let mut a = sample_matrix();
        assert_eq!(a.asymmetry(), 0.0);
        a.set(0, 1, 1.5);
        assert!(a.asymmetry() > 0.1);
    }
}
