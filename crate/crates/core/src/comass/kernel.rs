//! Flat, allocation-free evaluation of a form and its gradient on frames.

use crate::exterior::AlternatingForm;
use crate::linalg::det_in_place;

/// A form flattened into (index list, coefficient) arrays. Frames are
/// column-major `n×m` slices.
#[derive(Clone, Debug)]
pub(crate) struct CompiledForm {
    pub n: usize,
    pub m: usize,
    idx: Vec<usize>,
    coeff: Vec<f64>,
}

impl CompiledForm {
    pub fn new(phi: &AlternatingForm) -> Self {
        let terms = phi.terms();
        let mut idx = Vec::with_capacity(terms.len() * phi.degree());
        let mut coeff = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            idx.extend_from_slice(i.as_slice());
            coeff.push(c);
        }
        CompiledForm { n: phi.dim(), m: phi.degree(), idx, coeff }
    }

    pub fn value(&self, u: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let (n, m) = (self.n, self.m);
        scratch.resize(m * m, 0.0);
        let mut total = 0.0;
        for (t, &c) in self.coeff.iter().enumerate() {
            let rows = &self.idx[t * m..(t + 1) * m];
            for (r, &i) in rows.iter().enumerate() {
                for col in 0..m {
                    scratch[r * m + col] = u[col * n + i];
                }
            }
            total += c * det_in_place(scratch, m);
        }
        total
    }

    /// Value and Euclidean gradient with respect to the frame entries.
    pub fn value_grad(&self, u: &[f64], grad: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let (n, m) = (self.n, self.m);
        grad.iter_mut().for_each(|g| *g = 0.0);
        if m == 0 {
            return self.coeff.first().copied().unwrap_or(0.0);
        }
        let mm = m * m;
        let sub = (m - 1) * (m - 1);
        scratch.resize(mm + sub.max(1), 0.0);
        let mut total = 0.0;
        for (t, &c) in self.coeff.iter().enumerate() {
            let rows = &self.idx[t * m..(t + 1) * m];
            let (minor, cof) = scratch.split_at_mut(mm);
            for (r, &i) in rows.iter().enumerate() {
                for col in 0..m {
                    minor[r * m + col] = u[col * n + i];
                }
            }
            // cofactor expansion along the first row gives the determinant
            let mut det = 0.0;
            for r in 0..m {
                for col in 0..m {
                    let cf = cofactor(minor, m, r, col, cof);
                    grad[col * n + rows[r]] += c * cf;
                    if r == 0 {
                        det += minor[col] * cf;
                    }
                }
            }
            total += c * det;
        }
        total
    }
}

fn cofactor(minor: &[f64], m: usize, row: usize, col: usize, buf: &mut [f64]) -> f64 {
    if m == 1 {
        return 1.0;
    }
    let k = m - 1;
    let mut p = 0;
    for r in 0..m {
        if r == row {
            continue;
        }
        for c in 0..m {
            if c == col {
                continue;
            }
            buf[p] = minor[r * m + c];
            p += 1;
        }
    }
    let sign = if (row + col).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * det_in_place(&mut buf[..k * k], k)
}

/// Modified Gram–Schmidt on `n×m` column-major data in place. Keeps the
/// orientation (positive diagonal of the triangular factor). Returns the
/// product of the column norms removed, i.e. the Gram norm of the input.
pub(crate) fn orthonormalize_cols(u: &mut [f64], n: usize, m: usize) -> f64 {
    let mut vol = 1.0;
    for j in 0..m {
        for _ in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..n).map(|r| u[i * n + r] * u[j * n + r]).sum();
                for r in 0..n {
                    u[j * n + r] -= dot * u[i * n + r];
                }
            }
        }
        let norm: f64 = (0..n).map(|r| u[j * n + r] * u[j * n + r]).sum::<f64>().sqrt();
        vol *= norm;
        if norm == 0.0 {
            return 0.0;
        }
        for r in 0..n {
            u[j * n + r] /= norm;
        }
    }
    vol
}
