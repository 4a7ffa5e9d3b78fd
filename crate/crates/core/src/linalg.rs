//! Small dense helpers shared by the numeric modules.

use nalgebra::{DMatrix, DVector};

/// Determinant of a row-major `m×m` buffer by Gaussian elimination with
/// partial pivoting. The buffer is overwritten.
pub fn det_in_place(a: &mut [f64], m: usize) -> f64 {
    debug_assert_eq!(a.len(), m * m);
    let mut det = 1.0;
    for col in 0..m {
        let mut piv = col;
        let mut best = a[col * m + col].abs();
        for row in col + 1..m {
            let v = a[row * m + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..m {
                a.swap(col * m + j, piv * m + j);
            }
            det = -det;
        }
        let d = a[col * m + col];
        det *= d;
        for row in col + 1..m {
            let f = a[row * m + col] / d;
            if f != 0.0 {
                for j in col + 1..m {
                    a[row * m + j] -= f * a[col * m + j];
                }
            }
        }
    }
    det
}

/// The `dim` eigenvectors of `aᵀa` with the smallest eigenvalues, as
/// orthonormal columns. When `a` has rank `ncols - dim` these span its
/// null space.
pub fn null_space(a: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = a.ncols();
    let eig = nalgebra::SymmetricEigen::new(a.transpose() * a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap());
    let vecs: Vec<DVector<f64>> = order
        .into_iter()
        .take(dim)
        .map(|j| eig.eigenvectors.column(j).into_owned())
        .collect();
    if vecs.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&vecs)
    }
}

/// Modified Gram–Schmidt on the columns of `v` with respect to the inner
/// product `g` (identity when `None`). Returns `None` when the columns are
/// numerically dependent.
pub fn orthonormalize(v: &DMatrix<f64>, g: Option<&DMatrix<f64>>) -> Option<DMatrix<f64>> {
    let mut out = v.clone();
    let ip = |a: &DVector<f64>, b: &DVector<f64>| match g {
        Some(g) => (a.transpose() * g * b)[(0, 0)],
        None => a.dot(b),
    };
    let scale = (0..v.ncols())
        .map(|j| ip(&v.column(j).into_owned(), &v.column(j).into_owned()).sqrt())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..out.ncols() {
        let mut col = out.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let prev = out.column(i).into_owned();
                let c = ip(&prev, &col);
                col -= prev * c;
            }
        }
        let norm = ip(&col, &col).max(0.0).sqrt();
        if norm <= 1e-12 * scale {
            return None;
        }
        out.set_column(j, &(col / norm));
    }
    Some(out)
}

/// Extend orthonormal columns `v` (under `g`) to a full orthonormal basis of
/// ℝⁿ; the first `v.ncols()` columns of the result are `v` itself.
pub fn complete_basis(v: &DMatrix<f64>, g: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = v.nrows();
    let mut cols: Vec<DVector<f64>> = (0..v.ncols()).map(|j| v.column(j).into_owned()).collect();
    let ip = |a: &DVector<f64>, b: &DVector<f64>| match g {
        Some(g) => (a.transpose() * g * b)[(0, 0)],
        None => a.dot(b),
    };
    // candidates ordered by how far they stick out of the current span
    let mut e = 0;
    while cols.len() < n && e < n {
        let mut cand = DVector::zeros(n);
        cand[e] = 1.0;
        for _pass in 0..2 {
            for c in &cols {
                let k = ip(c, &cand);
                cand -= c * k;
            }
        }
        let norm = ip(&cand, &cand).max(0.0).sqrt();
        if norm > 1e-8 {
            cols.push(cand / norm);
        }
        e += 1;
    }
    DMatrix::from_columns(&cols)
}

pub fn spd_min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_with_pivoting() {
        let mut a = vec![0.0, 1.0, 1.0, 0.0];
        assert_eq!(det_in_place(&mut a, 2), -1.0);
        let mut b = vec![2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 4.0];
        assert!((det_in_place(&mut b, 3) - 24.0).abs() < 1e-14);
        let mut c = vec![1.0, 2.0, 2.0, 4.0];
        assert_eq!(det_in_place(&mut c, 2), 0.0);
    }

    #[test]
    fn null_space_of_covectors() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let ns = null_space(&a, 2);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-12);
    }

    #[test]
    fn completion_is_orthonormal() {
        let v = DMatrix::from_column_slice(3, 1, &[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0]);
        let b = complete_basis(&v, None);
        assert_eq!(b.ncols(), 3);
        assert!((b.transpose() * &b - DMatrix::identity(3, 3)).norm() < 1e-12);
    }
}
