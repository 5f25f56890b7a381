//! Small dense helpers: column-major vectorization, superoperators and a
//! Hermitian eigensolver with reproducible ordering.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Operator;

pub type SuperOperator = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// `vec(ρ)[a + d·b] = ρ[a, b]`.
pub fn vectorize(rho: &Operator) -> DVector<Complex64> {
    DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &DVector<Complex64>, d: usize) -> Operator {
    Operator::from_column_slice(d, d, v.as_slice())
}

pub fn vec_index(a: usize, b: usize, d: usize) -> usize {
    a + d * b
}

/// Superoperator of `ρ ↦ A ρ B`.
pub fn sandwich(a: &Operator, b: &Operator) -> SuperOperator {
    b.transpose().kronecker(a)
}

/// Superoperator of `ρ ↦ A ρ`.
pub fn left(a: &Operator) -> SuperOperator {
    Operator::identity(a.nrows(), a.nrows()).kronecker(a)
}

/// Superoperator of `ρ ↦ ρ B`.
pub fn right(b: &Operator) -> SuperOperator {
    b.transpose().kronecker(&Operator::identity(b.nrows(), b.nrows()))
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &Operator) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn projector(d: usize, k: usize) -> Operator {
    transition(d, k, k)
}

/// `|to⟩⟨from|`.
pub fn transition(d: usize, to: usize, from: usize) -> Operator {
    let mut m = Operator::zeros(d, d);
    m[(to, from)] = ONE;
    m
}

/// Eigenpairs of a Hermitian matrix, ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Operator,
}

/// Hermitian eigendecomposition with ascending eigenvalues. Each
/// eigenvector's largest component is made real and positive, and equal
/// eigenvalues are ordered lexicographically on component magnitudes.
pub fn hermitian_eigen(m: &Operator, tol: f64) -> Result<HermitianEigen> {
    let defect = hermiticity_defect(m);
    if defect > tol {
        return Err(Error::NonHermitian(defect));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut cols: Vec<(f64, DVector<Complex64>)> = (0..n)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            let pivot = (0..n)
                .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()))
                .unwrap_or(0);
            if v[pivot].norm() > 0.0 {
                let phase = v[pivot].conj() / v[pivot].norm();
                v *= phase;
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    cols.sort_by(|(ea, va), (eb, vb)| {
        ea.total_cmp(eb).then_with(|| {
            va.iter()
                .zip(vb.iter())
                .map(|(x, y)| y.norm().total_cmp(&x.norm()))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut vectors = Operator::zeros(n, n);
    for (k, (_, v)) in cols.iter().enumerate() {
        vectors.set_column(k, v);
    }
    Ok(HermitianEigen {
        values: cols.iter().map(|(e, _)| *e).collect(),
        vectors,
    })
}

/// Real symmetric eigendecomposition, eigenvalues descending, each
/// eigenvector's largest-magnitude component made positive.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let pivot = (0..n)
                .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .unwrap_or(0);
            if v.get(pivot).is_some_and(|&p| p < 0.0) {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}
