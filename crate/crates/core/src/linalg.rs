//! Dense complex linear algebra for small spaces.
//!
//! Everything here is sized for desk-scale problems (a few hundred basis
//! vectors at most), so matrices are plain row-major `Vec<Complex64>`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numerical tolerances used to realize exact equalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    /// State and matrix equality, nullity and support pruning.
    pub eq_eps: f64,
    /// Width of the indifference band when comparing scores.
    pub tie_eps: f64,
    /// Relative perturbation radius for continuity checks.
    pub cont_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eq_eps: 1e-9,
            tie_eps: 1e-12,
            cont_eps: 1e-3,
        }
    }
}

impl Tolerance {
    pub const MAX: f64 = 1e-3;

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eq_eps", self.eq_eps),
            ("tie_eps", self.tie_eps),
            ("cont_eps", self.cont_eps),
        ] {
            if !(v > 0.0 && v <= Self::MAX) {
                return Err(Error::Config(format!(
                    "tolerance {name} = {v} must lie in (0, {}]",
                    Self::MAX
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct ComplexVector {
    entries: Vec<Complex64>,
}

impl From<Vec<[f64; 2]>> for ComplexVector {
    fn from(pairs: Vec<[f64; 2]>) -> Self {
        ComplexVector {
            entries: pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        }
    }
}

impl From<ComplexVector> for Vec<[f64; 2]> {
    fn from(v: ComplexVector) -> Self {
        v.entries.into_iter().map(|z| [z.re, z.im]).collect()
    }
}

impl fmt::Debug for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        ComplexVector { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexVector {
            entries: vec![ZERO; dim],
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.entries[index] = ONE;
        v
    }

    pub fn from_real(values: &[f64]) -> Self {
        ComplexVector {
            entries: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<ComplexVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &ComplexVector) -> Result<Complex64> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scale(&self, c: Complex64) -> ComplexVector {
        ComplexVector {
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &ComplexVector) -> Result<ComplexVector> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(ComplexVector {
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &ComplexVector) -> Result<ComplexVector> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(ComplexVector {
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn distance(&self, other: &ComplexVector) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// Sum of |entry|² over the given indices.
    pub fn mass_on(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        indices.into_iter().map(|i| self.entries[i].norm_sqr()).sum()
    }

    pub fn gather(&self, indices: &[usize]) -> ComplexVector {
        ComplexVector {
            entries: indices.iter().map(|&i| self.entries[i]).collect(),
        }
    }
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("vector dims {a} and {b}")));
    }
    Ok(())
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            if row.iter().any(|z| *z != ZERO) {
                writeln!(f, "  {r}: {row:?}")?;
            }
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix with a zero dimension".into()));
        }
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix given {} entries",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: &[ComplexVector]) -> Result<Self> {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            m.set_column(j, c)?;
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, z: Complex64) {
        self.data[r * self.cols + c] = z;
    }

    pub fn column(&self, c: usize) -> ComplexVector {
        ComplexVector::new((0..self.rows).map(|r| self.get(r, c)).collect())
    }

    pub fn columns(&self) -> Vec<ComplexVector> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &ComplexVector) -> Result<()> {
        if v.dim() != self.rows {
            return Err(Error::Dimension(format!(
                "column of length {} into {} rows",
                v.dim(),
                self.rows
            )));
        }
        for (r, z) in v.entries().iter().enumerate() {
            self.set(r, c, *z);
        }
        Ok(())
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                let row_out = &mut out.data[r * other.cols..(r + 1) * other.cols];
                let row_b = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in row_out.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("matrix shapes differ".into()));
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of the sub-block made of the given rows.
    pub fn rows_norm(&self, rows: impl IntoIterator<Item = usize>) -> f64 {
        rows.into_iter()
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn select_columns(&self, cols: &[usize]) -> ComplexMatrix {
        let mut out = Self::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> ComplexMatrix {
        let mut out = Self::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            out.data[i * self.cols..(i + 1) * self.cols]
                .copy_from_slice(&self.data[r * self.cols..(r + 1) * self.cols]);
        }
        out
    }
}

/// True iff M†M is within `tol.eq_eps` of the identity in max-entry norm.
pub fn is_isometry(m: &ComplexMatrix, tol: &Tolerance) -> Result<bool> {
    Ok(isometry_defect(m)? <= tol.eq_eps)
}

/// max |(M†M − 1)_ij|.
pub fn isometry_defect(m: &ComplexMatrix) -> Result<f64> {
    if m.rows() < m.cols() {
        return Err(Error::Dimension(format!(
            "an isometry needs rows >= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let gram = m.adjoint().mul(m)?;
    Ok(gram.sub(&ComplexMatrix::identity(m.cols()))?.max_abs())
}

pub fn apply(m: &ComplexMatrix, v: &ComplexVector) -> Result<ComplexVector> {
    if m.cols() != v.dim() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix applied to a vector of dim {}",
            m.rows(),
            m.cols(),
            v.dim()
        )));
    }
    let x = v.entries();
    let out = (0..m.rows())
        .map(|r| {
            m.data()[r * m.cols()..(r + 1) * m.cols()]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(ComplexVector::new(out))
}

/// Diagonal 0/1 projector selecting `indices` of a `dim`-dimensional space.
pub fn projector(indices: &BTreeSet<usize>, dim: usize) -> Result<ComplexMatrix> {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for &i in indices {
        if i >= dim {
            return Err(Error::Dimension(format!("projector index {i} >= dim {dim}")));
        }
        m.set(i, i, ONE);
    }
    Ok(m)
}

/// Extends the orthonormal family `given` with `count` further orthonormal
/// vectors drawn from span{e_i : i ∈ support}, via Gram–Schmidt over the
/// standard basis vectors of the support.
pub fn orthonormal_completion(
    dim: usize,
    given: &[ComplexVector],
    support: &[usize],
    count: usize,
) -> Result<Vec<ComplexVector>> {
    let mut family: Vec<ComplexVector> = given.to_vec();
    let mut extra = Vec::with_capacity(count);
    for &i in support {
        if extra.len() == count {
            break;
        }
        let mut v = ComplexVector::basis(dim, i);
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for f in &family {
                let c = f.inner(&v)?;
                v = v.sub(&f.scale(c))?;
            }
        }
        if let Some(u) = v.normalized().filter(|_| v.norm() > 1e-8) {
            family.push(u.clone());
            extra.push(u);
        }
    }
    if extra.len() < count {
        return Err(Error::Capacity(format!(
            "support of size {} cannot hold {} more orthonormal vectors",
            support.len(),
            count
        )));
    }
    Ok(extra)
}

/// Re-orthonormalizes the columns of `m` in order (modified Gram–Schmidt).
/// Fails if the columns are numerically dependent.
pub fn orthonormalize_columns(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let mut cols: Vec<ComplexVector> = Vec::with_capacity(m.cols());
    for c in m.columns() {
        let mut v = c;
        for _ in 0..2 {
            for f in &cols {
                let coef = f.inner(&v)?;
                v = v.sub(&f.scale(coef))?;
            }
        }
        let n = v.norm();
        if n < 1e-12 {
            return Err(Error::Validation("columns are linearly dependent".into()));
        }
        cols.push(v.scale(Complex64::new(1.0 / n, 0.0)));
    }
    ComplexMatrix::from_columns(m.rows(), &cols)
}

pub fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Uniformly distributed unit vector (complex Gaussian, normalized).
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    loop {
        let v = ComplexVector::new((0..dim).map(|_| random_complex(rng)).collect());
        if v.norm() > 1e-6 {
            return v.normalized().expect("nonzero");
        }
    }
}

/// Random n×n unitary: Gram–Schmidt of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    loop {
        let g = ComplexMatrix {
            rows: n,
            cols: n,
            data: (0..n * n).map(|_| random_complex(rng)).collect(),
        };
        if let Ok(q) = orthonormalize_columns(&g) {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_is_isometry() {
        assert!(is_isometry(&ComplexMatrix::identity(2), &tol()).unwrap());
    }

    #[test]
    fn single_unit_column_is_isometry() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = ComplexMatrix::from_row_major(2, 1, vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        assert!(is_isometry(&m, &tol()).unwrap());
    }

    #[test]
    fn short_column_is_not_isometry() {
        // |0.9|² = 0.81, so (M†M)₀₀ − 1 = −0.19
        let m = ComplexMatrix::from_row_major(2, 1, vec![c(0.9, 0.0), ZERO]).unwrap();
        assert!((isometry_defect(&m).unwrap() - 0.19).abs() < 1e-15);
        assert!(!is_isometry(&m, &tol()).unwrap());
    }

    #[test]
    fn wide_matrix_is_structural_error() {
        let m = ComplexMatrix::zeros(1, 2);
        assert!(matches!(is_isometry(&m, &tol()), Err(Error::Dimension(_))));
    }

    #[test]
    fn apply_identity_and_projector() {
        let v = ComplexVector::new(vec![c(0.3, 0.1), c(-0.2, 0.5)]);
        assert_eq!(apply(&ComplexMatrix::identity(2), &v).unwrap(), v);

        let p = projector(&BTreeSet::from([0]), 2).unwrap();
        let pv = apply(&p, &v).unwrap();
        assert_eq!(pv.entries(), &[c(0.3, 0.1), ZERO]);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let v = ComplexVector::zeros(3);
        assert!(matches!(
            apply(&ComplexMatrix::identity(2), &v),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn projector_edge_cases() {
        let all: BTreeSet<usize> = (0..4).collect();
        assert_eq!(projector(&all, 4).unwrap(), ComplexMatrix::identity(4));
        assert_eq!(projector(&BTreeSet::new(), 4).unwrap(), ComplexMatrix::zeros(4, 4));
        assert!(matches!(
            projector(&BTreeSet::from([4]), 4),
            Err(Error::Dimension(_))
        ));

        let v = ComplexVector::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, -1.0)]);
        let p = projector(&BTreeSet::from([0, 2]), 3).unwrap();
        assert_eq!(apply(&p, &v).unwrap().entries(), &[c(1.0, 0.0), ZERO, c(3.0, -1.0)]);
    }

    #[test]
    fn random_unitary_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(&mut rng, 3);
        assert!(is_isometry(&u, &tol()).unwrap());
        let v = random_unit_vector(&mut rng, 3).scale(c(2.5, 0.0));
        let uv = apply(&u, &v).unwrap();
        assert!((uv.norm() - v.norm()).abs() < tol().eq_eps);
    }

    #[test]
    fn completion_is_orthonormal() {
        let first = ComplexVector::from_real(&[0.6, 0.8, 0.0, 0.0]);
        let extra = orthonormal_completion(4, &[first.clone()], &[0, 1, 2, 3], 3).unwrap();
        let mut all = vec![first];
        all.extend(extra);
        let m = ComplexMatrix::from_columns(4, &all).unwrap();
        assert!(is_isometry(&m, &tol()).unwrap());
        assert!(matches!(
            orthonormal_completion(4, &all, &[0, 1], 1),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn tolerance_bounds() {
        assert!(Tolerance::default().validate().is_ok());
        let bad = Tolerance {
            eq_eps: 0.0,
            ..Tolerance::default()
        };
        assert!(bad.validate().is_err());
        let big = Tolerance {
            tie_eps: 0.5,
            ..Tolerance::default()
        };
        assert!(big.validate().is_err());
    }

    fn index_set(dim: usize) -> impl Strategy<Value = BTreeSet<usize>> {
        proptest::collection::btree_set(0..dim, 0..=dim)
    }

    proptest! {
        #[test]
        fn projector_idempotent_and_multiplicative(s in index_set(6), t in index_set(6)) {
            let ps = projector(&s, 6).unwrap();
            let pt = projector(&t, 6).unwrap();
            prop_assert_eq!(ps.mul(&ps).unwrap(), ps.clone());
            let inter: BTreeSet<usize> = s.intersection(&t).copied().collect();
            prop_assert_eq!(ps.mul(&pt).unwrap(), projector(&inter, 6).unwrap());
        }

        #[test]
        fn unitary_norm_preservation(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(&mut rng, n);
            let v = random_unit_vector(&mut rng, n);
            let uv = apply(&u, &v).unwrap();
            prop_assert!((uv.norm_sqr() - v.norm_sqr()).abs() < 1e-9);
        }
    }
}
