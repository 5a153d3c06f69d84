//! Small dense complex helpers shared by the model and the program builders.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `a^H b`.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

/// `h^H M h` (real part; exact for Hermitian `M`).
pub fn quad_form(m: &CMatrix, h: &CVector) -> f64 {
    h.dotc(&(m * h)).re
}

/// Largest entry modulus.
pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitian_eigen(m: &CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(sym)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_eigen(m).eigenvalues.min()
}

/// `F` with `F F^H = M` for Hermitian PSD `M`; negative eigenvalues are clipped.
pub fn psd_factor(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let eig = hermitian_eigen(m);
    let mut f = CMatrix::zeros(n, n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 0.0 {
            let col = eig.eigenvectors.column(i) * C64::new(lambda.sqrt(), 0.0);
            f.set_column(i, &col);
        }
    }
    f
}

/// Unit eigenvector of the largest eigenvalue of a Hermitian matrix.
pub fn dominant_eigenvector(m: &CMatrix) -> CVector {
    let eig = hermitian_eigen(m);
    let idx = eig.eigenvalues.imax();
    eig.eigenvectors.column(idx).into_owned()
}

/// Projector onto the orthogonal complement of `span{cols}`.
pub fn null_projector(cols: &[CVector], n: usize) -> CMatrix {
    let mut p = CMatrix::identity(n, n);
    if cols.is_empty() {
        return p;
    }
    let a = CMatrix::from_columns(cols);
    let gram = a.adjoint() * &a;
    let eig = hermitian_eigen(&gram);
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    // A (A^H A)^+ A^H through the eigen-decomposition of the Gram matrix.
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > 1e-12 * scale {
            let u = &a * eig.eigenvectors.column(i);
            p -= (&u * u.adjoint()) / C64::new(lambda, 0.0);
        }
    }
    p
}

/// Real embedding `[[Re, -Im], [Im, Re]]` of a complex matrix.
pub fn realify(m: &CMatrix) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

pub fn real_vector(v: &CVector) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::stream_rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = stream_rng(seed, 99);
        CMatrix::from_fn(n, n, |_, _| complex_gaussian(&mut rng))
    }

    #[test]
    fn psd_factor_reconstructs() {
        let a = random_matrix(4, 3);
        let m = &a * a.adjoint();
        let f = psd_factor(&m);
        assert!(max_abs(&(&f * f.adjoint() - &m)) < 1e-10);
    }

    #[test]
    fn null_projector_annihilates_columns() {
        let mut rng = stream_rng(5, 1);
        let cols: Vec<CVector> = (0..2).map(|_| CVector::from_fn(4, |_, _| complex_gaussian(&mut rng))).collect();
        let p = null_projector(&cols, 4);
        for c in &cols {
            assert!((&p * c).norm() < 1e-10);
        }
        assert!(max_abs(&(&p * &p - &p)) < 1e-10);
    }

    #[test]
    fn realify_preserves_products() {
        let a = random_matrix(3, 7);
        let mut rng = stream_rng(8, 2);
        let x = CVector::from_fn(3, |_, _| complex_gaussian(&mut rng));
        let lhs = realify(&a) * real_vector(&x);
        let rhs = real_vector(&(&a * &x));
        assert!((lhs - rhs).amax() < 1e-12);
    }
}
