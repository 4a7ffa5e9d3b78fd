use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use super::index::{binomial, MultiIndex};
use super::simple::SimpleVector;
use crate::error::{Error, Result};
use crate::linalg::det_in_place;

/// Ambient dimensions up to this use dense lexicographic coefficient storage.
pub const DENSE_LIMIT: usize = 16;

#[derive(Clone, Debug, PartialEq)]
enum Coeffs {
    Dense(Vec<f64>),
    Sparse(BTreeMap<MultiIndex, f64>),
}

/// Constant-coefficient alternating m-form on ℝⁿ,
/// `φ = Σ_I a_I dx_{i₁}∧…∧dx_{i_m}` over strictly increasing `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingForm {
    n: usize,
    m: usize,
    coeffs: Coeffs,
}

impl AlternatingForm {
    pub fn zero(n: usize, m: usize) -> Self {
        let coeffs = if n <= DENSE_LIMIT {
            Coeffs::Dense(vec![0.0; binomial(n, m)])
        } else {
            Coeffs::Sparse(BTreeMap::new())
        };
        AlternatingForm { n, m, coeffs }
    }

    pub fn from_terms<I>(n: usize, m: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        if m > n {
            return Err(Error::invalid(format!("degree {m} exceeds dimension {n}")));
        }
        let mut f = Self::zero(n, m);
        for (idx, c) in terms {
            if idx.degree() != m {
                return Err(Error::DegreeMismatch { expected: m, found: idx.degree() });
            }
            if idx.as_slice().last().is_some_and(|&i| i >= n) {
                return Err(Error::invalid(format!("index {idx} outside ℝ^{n}")));
            }
            f.add_to(&idx, c);
        }
        Ok(f)
    }

    /// `dx_{i₁}∧…∧dx_{i_m}` for zero-based, strictly increasing indices.
    pub fn basis(n: usize, indices: &[usize]) -> Result<Self> {
        let idx = MultiIndex::new(indices.to_vec(), n)?;
        Self::from_terms(n, indices.len(), [(idx, 1.0)])
    }

    /// The 1-form `x ↦ ⟨t, x⟩`.
    pub fn covector(t: &[f64]) -> Self {
        let n = t.len();
        let mut f = Self::zero(n, 1);
        for (i, &c) in t.iter().enumerate() {
            f.add_to(&MultiIndex::from_sorted(vec![i]), c);
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.coeffs, Coeffs::Dense(_))
    }

    pub fn get(&self, idx: &MultiIndex) -> f64 {
        match &self.coeffs {
            Coeffs::Dense(v) => v[idx.rank(self.n)],
            Coeffs::Sparse(map) => map.get(idx).copied().unwrap_or(0.0),
        }
    }

    pub fn set(&mut self, idx: &MultiIndex, c: f64) {
        match &mut self.coeffs {
            Coeffs::Dense(v) => v[idx.rank(self.n)] = c,
            Coeffs::Sparse(map) => {
                if c == 0.0 {
                    map.remove(idx);
                } else {
                    map.insert(idx.clone(), c);
                }
            }
        }
    }

    fn add_to(&mut self, idx: &MultiIndex, c: f64) {
        if c == 0.0 {
            return;
        }
        let cur = self.get(idx);
        self.set(idx, cur + c);
    }

    /// Nonzero coefficients in lexicographic order.
    pub fn terms(&self) -> Vec<(MultiIndex, f64)> {
        match &self.coeffs {
            Coeffs::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(r, &c)| (MultiIndex::unrank(r, self.n, self.m), c))
                .collect(),
            Coeffs::Sparse(map) => map.iter().map(|(k, &c)| (k.clone(), c)).collect(),
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        match &self.coeffs {
            Coeffs::Dense(v) => v.iter().fold(0.0f64, |a, c| a.max(c.abs())),
            Coeffs::Sparse(map) => map.values().fold(0.0f64, |a, c| a.max(c.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs_coeff() == 0.0
    }

    /// Max coefficient difference; `∞` if shapes differ.
    pub fn distance(&self, other: &AlternatingForm) -> f64 {
        if self.n != other.n || self.m != other.m {
            return f64::INFINITY;
        }
        (self - other).max_abs_coeff()
    }

    pub fn approx_eq(&self, other: &AlternatingForm, tol: f64) -> bool {
        self.distance(other) <= tol
    }

    fn check_same_space(&self, other: &AlternatingForm) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    /// Exterior product `φ∧ψ`, with `(φ∧ψ)_K = Σ sign(I,J) a_I b_J` over
    /// disjoint `I ∪ J = K`.
    pub fn wedge(&self, other: &AlternatingForm) -> Result<AlternatingForm> {
        self.check_same_space(other)?;
        let deg = self.m + other.m;
        if deg > self.n {
            return Err(Error::invalid(format!(
                "wedge degree {deg} exceeds ambient dimension {}",
                self.n
            )));
        }
        let mut out = AlternatingForm::zero(self.n, deg);
        let rhs = other.terms();
        for (i, a) in self.terms() {
            for (j, b) in &rhs {
                if let Some((k, sign)) = i.shuffle(j) {
                    out.add_to(&k, sign * a * b);
                }
            }
        }
        Ok(out)
    }

    /// Interior product with one vector: `(ι_v φ)(w…) = φ(v, w…)`.
    pub fn interior(&self, v: &DVector<f64>) -> Result<AlternatingForm> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.len() });
        }
        if self.m == 0 {
            return Err(Error::invalid("cannot contract a 0-form"));
        }
        let mut out = AlternatingForm::zero(self.n, self.m - 1);
        for (idx, c) in self.terms() {
            let s = idx.as_slice();
            for (pos, &i) in s.iter().enumerate() {
                if v[i] == 0.0 {
                    continue;
                }
                // moving slot `pos` to the front costs `pos` transpositions
                let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                let rest: Vec<usize> =
                    s.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &x)| x).collect();
                out.add_to(&MultiIndex::from_sorted(rest), sign * v[i] * c);
            }
        }
        Ok(out)
    }

    /// `ψ(v₁…v_{p−r}) = φ(η₁,…,η_r, v₁,…,v_{p−r})`.
    pub fn contract(&self, eta: &SimpleVector) -> Result<AlternatingForm> {
        if eta.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: eta.dim() });
        }
        if eta.degree() > self.m {
            return Err(Error::invalid(format!(
                "cannot contract a degree-{} vector into a {}-form",
                eta.degree(),
                self.m
            )));
        }
        let mut out = self.clone();
        for j in 0..eta.degree() {
            out = out.interior(&eta.factor(j))?;
        }
        Ok(out)
    }

    /// `φ(v₁,…,v_m)` for the columns of an `n×m` matrix.
    pub fn evaluate_columns(&self, v: &DMatrix<f64>) -> Result<f64> {
        if v.nrows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: v.nrows() });
        }
        if v.ncols() != self.m {
            return Err(Error::DegreeMismatch { expected: self.m, found: v.ncols() });
        }
        let m = self.m;
        let mut buf = vec![0.0; m * m];
        let mut total = 0.0;
        for (idx, c) in self.terms() {
            for (r, &i) in idx.as_slice().iter().enumerate() {
                for col in 0..m {
                    buf[r * m + col] = v[(i, col)];
                }
            }
            total += c * det_in_place(&mut buf, m);
        }
        Ok(total)
    }

    pub fn evaluate(&self, q: &SimpleVector) -> Result<f64> {
        self.evaluate_columns(q.matrix())
    }

    /// `(A*φ)(v₁,…,v_m) = φ(Av₁,…,Av_m)` for `A: ℝᵏ → ℝⁿ` given as an `n×k`
    /// matrix.
    pub fn pullback(&self, a: &DMatrix<f64>) -> Result<AlternatingForm> {
        if a.nrows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: a.nrows() });
        }
        let k = a.ncols();
        if self.m > k {
            return Err(Error::invalid(format!(
                "cannot pull a {}-form back to ℝ^{k}",
                self.m
            )));
        }
        let mut out = AlternatingForm::zero(k, self.m);
        let mut cols = DMatrix::zeros(self.n, self.m);
        for j in MultiIndex::all(k, self.m) {
            for (slot, &src) in j.as_slice().iter().enumerate() {
                cols.set_column(slot, &a.column(src));
            }
            let val = self.evaluate_columns(&cols)?;
            if val != 0.0 {
                out.set(&j, val);
            }
        }
        Ok(out)
    }

    /// Skew-symmetric coefficient matrix of a 2-form, `φ(u,v) = uᵀAv`.
    pub fn skew_matrix(&self) -> Result<DMatrix<f64>> {
        if self.m != 2 {
            return Err(Error::DegreeMismatch { expected: 2, found: self.m });
        }
        let mut a = DMatrix::zeros(self.n, self.n);
        for (idx, c) in self.terms() {
            let (i, j) = (idx.as_slice()[0], idx.as_slice()[1]);
            a[(i, j)] = c;
            a[(j, i)] = -c;
        }
        Ok(a)
    }

    /// Embed into `ℝ^{n_total}` through coordinates `offset..offset+n`.
    pub fn embed(&self, n_total: usize, offset: usize) -> Result<AlternatingForm> {
        if offset + self.n > n_total {
            return Err(Error::invalid("block embedding exceeds target dimension"));
        }
        let terms = self.terms().into_iter().map(|(idx, c)| {
            let shifted = idx.as_slice().iter().map(|&i| i + offset).collect();
            (MultiIndex::from_sorted(shifted), c)
        });
        AlternatingForm::from_terms(n_total, self.m, terms)
    }

    fn zip_with(&self, other: &AlternatingForm, f: impl Fn(f64, f64) -> f64) -> AlternatingForm {
        assert_eq!((self.n, self.m), (other.n, other.m), "form shapes differ");
        let mut out = AlternatingForm::zero(self.n, self.m);
        match (&self.coeffs, &other.coeffs, &mut out.coeffs) {
            (Coeffs::Dense(a), Coeffs::Dense(b), Coeffs::Dense(o)) => {
                for ((o, &x), &y) in o.iter_mut().zip(a).zip(b) {
                    *o = f(x, y);
                }
            }
            _ => {
                let mut keys: Vec<MultiIndex> = self.terms().into_iter().map(|t| t.0).collect();
                keys.extend(other.terms().into_iter().map(|t| t.0));
                keys.sort();
                keys.dedup();
                for k in keys {
                    out.set(&k, f(self.get(&k), other.get(&k)));
                }
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> AlternatingForm {
        let mut out = self.clone();
        match &mut out.coeffs {
            Coeffs::Dense(v) => v.iter_mut().for_each(|x| *x *= c),
            Coeffs::Sparse(map) => map.values_mut().for_each(|x| *x *= c),
        }
        out
    }
}

impl Add for &AlternatingForm {
    type Output = AlternatingForm;
    fn add(self, rhs: &AlternatingForm) -> AlternatingForm {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &AlternatingForm {
    type Output = AlternatingForm;
    fn sub(self, rhs: &AlternatingForm) -> AlternatingForm {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &AlternatingForm {
    type Output = AlternatingForm;
    fn neg(self) -> AlternatingForm {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &AlternatingForm {
    type Output = AlternatingForm;
    fn mul(self, c: f64) -> AlternatingForm {
        self.scaled(c)
    }
}
