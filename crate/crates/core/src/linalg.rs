//! Dense complex matrix/vector kernel: products, tensor products, adjoints,
//! norms, and Hermitian spectral decomposition.
//!
//! Storage is row-major, values are immutable after construction, and every
//! operation is a pure function. Dimensions stay at desk scale (≤ ~1024), so
//! there is no sparse path.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Dense complex vector.
#[derive(Clone, PartialEq)]
pub struct CVector {
    data: Vec<Complex64>,
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl std::fmt::Debug for CVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CVector(dim {})", self.dim())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let nr = rows.len();
        let nc = if nr > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(nr * nc);
        for r in rows {
            assert_eq!(r.len(), nc, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nr,
            cols: nc,
            data,
        }
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let lhs = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (o, b) in dst.iter_mut().zip(lhs) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^k` for k ≥ 0 via repeated multiplication. Exponents here are
    /// small (k < d), so no squaring ladder is needed.
    pub fn pow(&self, k: usize) -> Self {
        assert!(self.is_square());
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector shape mismatch");
        let out = self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(v.entries()).map(|(a, x)| a * x).sum())
            .collect();
        CVector::new(out)
    }

    /// Frobenius distance to the adjoint, the Hermiticity defect.
    pub fn hermiticity_residual(&self) -> f64 {
        self.sub(&self.adjoint()).frobenius_norm()
    }
}

impl CVector {
    pub fn new(data: Vec<Complex64>) -> Self {
        Self { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[index] = Complex64::new(1.0, 0.0);
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            data: self.data.iter().map(|z| z / n).collect(),
        }
    }

    /// ⟨self|other⟩ with the left argument conjugated.
    pub fn dot(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self { data }
    }
}

/// Kronecker product of an ordered list of factors. The first factor owns
/// the most significant index: party 1 is leftmost throughout the library.
pub fn tensor_product(factors: &[&CMatrix]) -> Result<CMatrix> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument(
            "tensor_product requires at least one factor".into(),
        ));
    }
    for (i, f) in factors.iter().enumerate() {
        if !f.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tensor_product factor {i} has non-finite entries"
            )));
        }
    }
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        let (ar, ac) = (acc.rows(), acc.cols());
        let (br, bc) = (f.rows(), f.cols());
        let mut out = CMatrix::zeros(ar * br, ac * bc);
        for i in 0..ar {
            for j in 0..ac {
                let a = acc[(i, j)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for p in 0..br {
                    for q in 0..bc {
                        out[(i * br + p, j * bc + q)] = a * f[(p, q)];
                    }
                }
            }
        }
        acc = out;
    }
    Ok(acc)
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending with matching orthonormal eigenvectors,
/// so that `M = Σ λᵢ vᵢvᵢ†`. The input must be Hermitian within
/// `tol · ‖M‖_F`; the defect is reported otherwise.
pub fn hermitian_spectrum(m: &CMatrix, tol: f64) -> Result<(Vec<f64>, Vec<CVector>)> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "hermitian_spectrum needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let scale = m.frobenius_norm().max(1e-300);
    let asym = m.hermiticity_residual();
    if asym > tol * scale {
        return Err(Error::ContractViolation {
            check: "hermitian_spectrum input Hermiticity".into(),
            residual: asym / scale,
            tol,
        });
    }
    let n = m.rows();
    let dm = nalgebra::DMatrix::from_fn(n, n, |r, c| {
        // symmetrize so the backend sees an exactly Hermitian operand
        (m[(r, c)] + m[(c, r)].conj()) * Complex64::new(0.5, 0.0)
    });
    let eig = dm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors: Vec<CVector> = order
        .iter()
        .map(|&i| CVector::new(eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    Ok((eigenvalues, eigenvectors))
}

/// Report from [`check_root_of_unity_observable`].
#[derive(Debug, Clone, Copy)]
pub struct RootOfUnityReport {
    pub is_unitary: bool,
    pub order_d_holds: bool,
    pub max_residual: f64,
}

/// Checks that `a` is unitary and that `a^d = I`, i.e. that its spectrum
/// lies in the d-th roots of unity.
pub fn check_root_of_unity_observable(
    a: &CMatrix,
    d: usize,
    tol: f64,
) -> Result<RootOfUnityReport> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!(
            "observable must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let id = CMatrix::identity(n);
    let unitary_residual = a.adjoint().matmul(a).sub(&id).frobenius_norm();
    let order_residual = a.pow(d).sub(&id).frobenius_norm();
    Ok(RootOfUnityReport {
        is_unitary: unitary_residual <= tol,
        order_d_holds: order_residual <= tol,
        max_residual: unitary_residual.max(order_residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_complex_matrix(n: usize, seed: u64) -> CMatrix {
        // small deterministic LCG; good enough to fill test matrices
        let mut state = seed
            .wrapping_mul(2862933555777941757)
            .wrapping_add(3037000493);
        let mut next = move || {
            state = state
                .wrapping_mul(2862933555777941757)
                .wrapping_add(3037000493);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn tensor_identity_case() {
        let i2 = CMatrix::identity(2);
        let t = tensor_product(&[&i2, &i2]).unwrap();
        assert_eq!(t, CMatrix::identity(4));
    }

    #[test]
    fn tensor_diagonal_case() {
        let z = CMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let t = tensor_product(&[&z, &z]).unwrap();
        let expect = CMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(t, expect);
    }

    #[test]
    fn tensor_respects_factorized_action() {
        // oracle: evaluate (A⊗B)(x⊗y) and (Ax)⊗(By) independently
        let a = rand_complex_matrix(2, 11);
        let b = rand_complex_matrix(2, 23);
        let x = CVector::new(vec![c(0.3, -0.4), c(-0.7, 0.2)]);
        let y = CVector::new(vec![c(0.1, 0.9), c(0.5, -0.6)]);
        let lhs = tensor_product(&[&a, &b]).unwrap().apply(&x.tensor(&y));
        let rhs = a.apply(&x).tensor(&b.apply(&y));
        assert!(lhs.sub(&rhs).norm() < 1e-12);
    }

    #[test]
    fn tensor_empty_list_rejected() {
        assert!(matches!(
            tensor_product(&[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tensor_associative_exactly_on_dyadic_entries() {
        // entries are dyadic rationals, so all products are exact in f64
        let a = CMatrix::from_rows(&[
            &[c(1.0, 0.5), c(-0.25, 0.0)],
            &[c(0.0, -2.0), c(0.5, 0.125)],
        ]);
        let b = CMatrix::from_rows(&[&[c(0.5, 0.0), c(1.0, -1.0)], &[c(2.0, 0.25), c(0.0, 0.5)]]);
        let d = CMatrix::from_rows(&[&[c(-1.0, 0.0), c(0.5, 0.5)], &[c(0.25, 0.0), c(1.0, 2.0)]]);
        let left = tensor_product(&[&tensor_product(&[&a, &b]).unwrap(), &d]).unwrap();
        let right = tensor_product(&[&a, &tensor_product(&[&b, &d]).unwrap()]).unwrap();
        assert_eq!(left, right);
        let flat = tensor_product(&[&a, &b, &d]).unwrap();
        assert_eq!(left, flat);
    }

    #[test]
    fn spectrum_identity() {
        let (vals, _) = hermitian_spectrum(&CMatrix::identity(3), 1e-9).unwrap();
        for v in vals {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_diagonal_case() {
        let m = CMatrix::diagonal(&[c(-1.0, 0.0), c(2.0, 0.0)]);
        let (vals, vecs) = hermitian_spectrum(&m, 1e-9).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        assert!((vecs[0].entries()[0].norm() - 1.0).abs() < 1e-10);
        assert!((vecs[1].entries()[1].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spectrum_reconstructs_random_hermitian() {
        let g = rand_complex_matrix(8, 77);
        let h = g.add(&g.adjoint()).scaled(c(0.5, 0.0));
        let (vals, vecs) = hermitian_spectrum(&h, 1e-9).unwrap();
        let mut recon = CMatrix::zeros(8, 8);
        for (lam, v) in vals.iter().zip(&vecs) {
            for r in 0..8 {
                for cc in 0..8 {
                    recon[(r, cc)] += c(*lam, 0.0) * v.entries()[r] * v.entries()[cc].conj();
                }
            }
        }
        assert!(recon.sub(&h).frobenius_norm() < 1e-9 * h.frobenius_norm().max(1.0));
        // orthonormality
        for i in 0..8 {
            for j in 0..8 {
                let g = vecs[i].dot(&vecs[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expect, 0.0)).norm() < 1e-10);
            }
        }
        // eigenvalue sum equals trace
        let tr = h.trace();
        assert!((vals.iter().sum::<f64>() - tr.re).abs() < 1e-9 * 8.0);
        // ascending
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn spectrum_rejects_non_hermitian() {
        let m = CMatrix::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        match hermitian_spectrum(&m, 1e-9) {
            Err(Error::ContractViolation { residual, .. }) => assert!(residual > 0.5),
            other => panic!("expected contract violation, got {other:?}"),
        }
    }

    #[test]
    fn frobenius_invariant_under_unitary_conjugation() {
        let u = observables::fourier_matrix(5).unwrap();
        let g = rand_complex_matrix(5, 5);
        let conj = u.matmul(&g).matmul(&u.adjoint());
        assert!((conj.frobenius_norm() - g.frobenius_norm()).abs() < 1e-10);
    }

    #[test]
    fn root_of_unity_check_pauli_case() {
        let z2 = CMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let rep = check_root_of_unity_observable(&z2, 2, 1e-10).unwrap();
        assert!(rep.is_unitary && rep.order_d_holds);
    }

    #[test]
    fn root_of_unity_check_wrong_order() {
        let theta = std::f64::consts::PI / 3.0;
        let m = CMatrix::diagonal(&[c(1.0, 0.0), c(theta.cos(), theta.sin())]);
        let rep = check_root_of_unity_observable(&m, 2, 1e-10).unwrap();
        assert!(rep.is_unitary);
        assert!(!rep.order_d_holds);
    }

    #[test]
    fn root_of_unity_check_canonical_t() {
        let (_, t) = observables::canonical_pair(3, 2).unwrap();
        let rep = check_root_of_unity_observable(t.matrix(), 3, 1e-9).unwrap();
        assert!(rep.is_unitary && rep.order_d_holds);
        assert!(rep.max_residual < 1e-12);
    }

    #[test]
    fn root_of_unity_check_rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(
            check_root_of_unity_observable(&m, 2, 1e-10),
            Err(Error::InvalidArgument(_))
        ));
    }
}
