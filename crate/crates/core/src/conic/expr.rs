//! Affine expressions over the flat vector of real scalars that backs every
//! decision variable, plus typed handles for real, complex and Hermitian blocks.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, CVector, C64};

/// `sum_i coef_i x[idx_i] + constant`. Duplicate indices are allowed until
/// [`AffExpr::compress`] merges them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn term(idx: usize, coef: f64) -> Self {
        Self { terms: vec![(idx, coef)], constant: 0.0 }
    }

    pub fn var(idx: usize) -> Self {
        Self::term(idx, 1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// `|constant| + sum |coef_i x_i|`, the magnitude against which violations are scaled.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| (c * x[i]).abs()).sum::<f64>() + self.constant.abs()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }

    /// Sorts by index, merges duplicates and drops exact zeros.
    pub fn compress(&mut self) {
        self.terms.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    pub fn compressed(mut self) -> Self {
        self.compress();
        self
    }

    pub fn scaled(mut self, f: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= f;
        }
        self.constant *= f;
        self
    }

    pub fn sum<I: IntoIterator<Item = AffExpr>>(items: I) -> Self {
        items.into_iter().fold(AffExpr::zero(), |acc, e| acc + e)
    }
}

impl From<f64> for AffExpr {
    fn from(c: f64) -> Self {
        AffExpr::constant(c)
    }
}

impl AddAssign<AffExpr> for AffExpr {
    fn add_assign(&mut self, rhs: AffExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl AddAssign<&AffExpr> for AffExpr {
    fn add_assign(&mut self, rhs: &AffExpr) {
        self.terms.extend_from_slice(&rhs.terms);
        self.constant += rhs.constant;
    }
}

impl SubAssign<AffExpr> for AffExpr {
    fn sub_assign(&mut self, rhs: AffExpr) {
        *self += rhs.scaled(-1.0);
    }
}

impl Add for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: AffExpr) -> AffExpr {
        self += rhs;
        self
    }
}

impl Add<f64> for AffExpr {
    type Output = AffExpr;
    fn add(mut self, rhs: f64) -> AffExpr {
        self.constant += rhs;
        self
    }
}

impl Sub for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: AffExpr) -> AffExpr {
        self -= rhs;
        self
    }
}

impl Sub<f64> for AffExpr {
    type Output = AffExpr;
    fn sub(mut self, rhs: f64) -> AffExpr {
        self.constant -= rhs;
        self
    }
}

impl Neg for AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for AffExpr {
    type Output = AffExpr;
    fn mul(self, rhs: f64) -> AffExpr {
        self.scaled(rhs)
    }
}

/// Complex affine expression held as real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CAffExpr {
    pub re: AffExpr,
    pub im: AffExpr,
}

impl CAffExpr {
    pub fn constant(c: C64) -> Self {
        Self { re: AffExpr::constant(c.re), im: AffExpr::constant(c.im) }
    }

    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    /// `c * self`.
    pub fn scale(&self, c: C64) -> Self {
        Self {
            re: self.re.clone() * c.re - self.im.clone() * c.im,
            im: self.re.clone() * c.im + self.im.clone() * c.re,
        }
    }

    /// `Re(c * self)`.
    pub fn re_scaled(&self, c: C64) -> AffExpr {
        self.re.clone() * c.re - self.im.clone() * c.im
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }
}

impl Add for CAffExpr {
    type Output = CAffExpr;
    fn add(self, rhs: CAffExpr) -> CAffExpr {
        CAffExpr { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Add<C64> for CAffExpr {
    type Output = CAffExpr;
    fn add(self, rhs: C64) -> CAffExpr {
        CAffExpr { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

/// Kind flag recorded in the variable registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Real,
    Complex,
    Hermitian,
}

impl VarKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VarKind::Real => "real",
            VarKind::Complex => "complex",
            VarKind::Hermitian => "hermitian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(VarKind::Real),
            "complex" => Some(VarKind::Complex),
            "hermitian" => Some(VarKind::Hermitian),
            _ => None,
        }
    }
}

/// One registry entry. `dim` is the logical size (vector length or matrix
/// order); `offset..offset + n_scalars` is its slice of the flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
    pub dim: usize,
    pub offset: usize,
}

impl VarInfo {
    pub fn n_scalars(&self) -> usize {
        match self.kind {
            VarKind::Real => self.dim,
            VarKind::Complex => 2 * self.dim,
            VarKind::Hermitian => self.dim * self.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RealVar {
    pub offset: usize,
    pub len: usize,
}

impl RealVar {
    pub fn at(&self, i: usize) -> AffExpr {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        AffExpr::var(self.offset + i)
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        x[self.offset..self.offset + self.len].to_vec()
    }
}

/// Complex vector stored as `[re_0..re_{n-1}, im_0..im_{n-1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexVar {
    pub offset: usize,
    pub len: usize,
}

impl ComplexVar {
    pub fn at(&self, i: usize) -> CAffExpr {
        assert!(i < self.len);
        CAffExpr { re: AffExpr::var(self.offset + i), im: AffExpr::var(self.offset + self.len + i) }
    }

    /// `a^H x` for a fixed vector `a`.
    pub fn inner_from(&self, a: &CVector) -> CAffExpr {
        assert_eq!(a.len(), self.len);
        let mut re = AffExpr::zero();
        let mut im = AffExpr::zero();
        for (i, ai) in a.iter().enumerate() {
            let (r, s) = (self.offset + i, self.offset + self.len + i);
            // conj(a)(x_r + i x_s) = (a.re x_r + a.im x_s) + i(a.re x_s - a.im x_r)
            re.terms.push((r, ai.re));
            re.terms.push((s, ai.im));
            im.terms.push((s, ai.re));
            im.terms.push((r, -ai.im));
        }
        CAffExpr { re: re.compressed(), im: im.compressed() }
    }

    /// Real scalars `(Re x, Im x)` as expressions, in storage order.
    pub fn real_parts(&self) -> Vec<AffExpr> {
        (0..2 * self.len).map(|i| AffExpr::var(self.offset + i)).collect()
    }

    pub fn value(&self, x: &[f64]) -> CVector {
        CVector::from_fn(self.len, |i, _| C64::new(x[self.offset + i], x[self.offset + self.len + i]))
    }
}

/// Hermitian `n x n` matrix stored as `n` diagonal reals followed by
/// `(Re, Im)` pairs of the strict upper triangle in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVar {
    pub offset: usize,
    pub n: usize,
}

impl HermitianVar {
    fn upper_slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        // pairs preceding row i: sum_{r<i} (n-1-r)
        let before = i * (self.n - 1) - i * (i.saturating_sub(1)) / 2;
        self.offset + self.n + 2 * (before + (j - i - 1))
    }

    pub fn entry(&self, i: usize, j: usize) -> CAffExpr {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => CAffExpr { re: AffExpr::var(self.offset + i), im: AffExpr::zero() },
            Ordering::Less => {
                let s = self.upper_slot(i, j);
                CAffExpr { re: AffExpr::var(s), im: AffExpr::var(s + 1) }
            }
            Ordering::Greater => self.entry(j, i).conj(),
        }
    }

    pub fn trace(&self) -> AffExpr {
        AffExpr::sum((0..self.n).map(|i| AffExpr::var(self.offset + i)))
    }

    /// `h^H R h`, expanded into the real parametrization.
    pub fn quad_form(&self, h: &CVector) -> AffExpr {
        assert_eq!(h.len(), self.n);
        let mut e = AffExpr::zero();
        for i in 0..self.n {
            e.terms.push((self.offset + i, h[i].norm_sqr()));
            for j in i + 1..self.n {
                let c = h[i].conj() * h[j];
                let s = self.upper_slot(i, j);
                e.terms.push((s, 2.0 * c.re));
                e.terms.push((s + 1, -2.0 * c.im));
            }
        }
        e.compressed()
    }

    /// Realified `2n x 2n` symmetric matrix `[[Re R, -Im R], [Im R, Re R]]` of expressions.
    pub fn realified(&self) -> Vec<Vec<AffExpr>> {
        let n = self.n;
        let mut m = vec![vec![AffExpr::zero(); 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let e = self.entry(i, j);
                m[i][j] = e.re.clone();
                m[i + n][j + n] = e.re;
                m[i][j + n] = -e.im.clone();
                m[i + n][j] = e.im;
            }
        }
        m
    }

    pub fn value(&self, x: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = self.entry(i, j).eval(x);
            }
        }
        m
    }

    /// Flat parameters for a fixed Hermitian matrix (upper triangle is read).
    pub fn params_of(&self, m: &CMatrix) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            out.push((self.offset + i, m[(i, i)].re));
            for j in i + 1..self.n {
                let s = self.upper_slot(i, j);
                out.push((s, m[(i, j)].re));
                out.push((s + 1, m[(i, j)].im));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, quad_form};
    use crate::scenario::stream_rng;

    #[test]
    fn compress_merges_and_drops() {
        let e = (AffExpr::term(2, 1.0) + AffExpr::term(0, 3.0) + AffExpr::term(2, -1.0) + 4.0).compressed();
        assert_eq!(e.terms, vec![(0, 3.0)]);
        assert_eq!(e.constant, 4.0);
    }

    #[test]
    fn hermitian_parametrization_roundtrips() {
        let h = HermitianVar { offset: 3, n: 4 };
        let mut rng = stream_rng(1, 1);
        let a = CMatrix::from_fn(4, 4, |_, _| complex_gaussian(&mut rng));
        let m = &a + a.adjoint();
        let mut x = vec![0.0; 3 + 16];
        for (i, v) in h.params_of(&m) {
            x[i] = v;
        }
        assert!(crate::linalg::max_abs(&(h.value(&x) - &m)) < 1e-14);
        let mut slots: Vec<usize> = h.params_of(&m).iter().map(|p| p.0).collect();
        slots.sort();
        slots.dedup();
        assert_eq!(slots, (3..19).collect::<Vec<_>>());

        let v = CVector::from_fn(4, |_, _| complex_gaussian(&mut rng));
        assert!((h.quad_form(&v).eval(&x) - quad_form(&m, &v)).abs() < 1e-12);
        let tr: f64 = (0..4).map(|i| m[(i, i)].re).sum();
        assert!((h.trace().eval(&x) - tr).abs() < 1e-12);
    }

    #[test]
    fn complex_inner_matches_dense() {
        let cv = ComplexVar { offset: 1, len: 3 };
        let mut rng = stream_rng(2, 1);
        let a = CVector::from_fn(3, |_, _| complex_gaussian(&mut rng));
        let w = CVector::from_fn(3, |_, _| complex_gaussian(&mut rng));
        let mut x = vec![0.0; 7];
        for i in 0..3 {
            x[1 + i] = w[i].re;
            x[4 + i] = w[i].im;
        }
        assert!((cv.inner_from(&a).eval(&x) - a.dotc(&w)).norm() < 1e-12);
        assert!((cv.value(&x) - &w).norm() < 1e-15);
    }
}
