//! Small dense linear-algebra helpers over complex doubles.

use ndarray::{Array1, Array2, ArrayBase, ArrayView2, Data, Ix1, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};

use crate::{LabError, Result, C64};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

/// Pauli matrices sigma_1, sigma_2, sigma_3.
pub fn pauli() -> [Array2<C64>; 3] {
    let z = ZERO;
    [
        ndarray::arr2(&[[z, ONE], [ONE, z]]),
        ndarray::arr2(&[[z, -I], [I, z]]),
        ndarray::arr2(&[[ONE, z], [z, -ONE]]),
    ]
}

pub fn adjoint(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn frobenius(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm<S: Data<Elem = C64>>(v: &ArrayBase<S, Ix1>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate-linear in the first argument.
pub fn dot<S1: Data<Elem = C64>, S2: Data<Elem = C64>>(a: &ArrayBase<S1, Ix1>, b: &ArrayBase<S2, Ix1>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Max entrywise deviation of `a` from its adjoint, relative to max |a_ij|.
pub fn hermitian_deviation(a: &ArrayView2<C64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    let scale = max_abs(a);
    if scale == 0.0 {
        0.0
    } else {
        dev / scale
    }
}

/// Column-major copy; LAPACK reads a row-major complex matrix as its transpose.
fn fortran(a: &Array2<C64>) -> Array2<C64> {
    let mut f = Array2::zeros(a.raw_dim().f());
    f.assign(a);
    f
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    Ok(fortran(a).eigh(UPLO::Upper)?)
}

/// Spectral norm via the largest eigenvalue of a^dagger a.
pub fn op_norm(a: &ArrayView2<C64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let g = adjoint(a).dot(a);
    let (w, _) = eigh(&g)?;
    Ok(w.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt())
}

/// Lower Cholesky factor of a real SPD matrix (small sizes only).
pub fn cholesky_real(g: &Array2<f64>) -> Result<Array2<f64>> {
    let n = g.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let d = g[[i, i]] - s;
                if d <= 0.0 {
                    return Err(LabError::InvalidParameter(
                        "metric is not positive definite".into(),
                    ));
                }
                l[[i, i]] = d.sqrt();
            } else {
                l[[i, j]] = (g[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Inverse of a small lower-triangular real matrix.
pub fn lower_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[[i, k]] * inv[[k, col]];
            }
            inv[[i, col]] = s / l[[i, i]];
        }
    }
    inv
}

/// Determinant of a small real matrix (m <= 3).
pub fn det_small(g: &Array2<f64>) -> f64 {
    match g.nrows() {
        1 => g[[0, 0]],
        2 => g[[0, 0]] * g[[1, 1]] - g[[0, 1]] * g[[1, 0]],
        3 => {
            g[[0, 0]] * (g[[1, 1]] * g[[2, 2]] - g[[1, 2]] * g[[2, 1]])
                - g[[0, 1]] * (g[[1, 0]] * g[[2, 2]] - g[[1, 2]] * g[[2, 0]])
                + g[[0, 2]] * (g[[1, 0]] * g[[2, 1]] - g[[1, 1]] * g[[2, 0]])
        }
        _ => panic!("det_small supports m <= 3"),
    }
}

/// Solves A X = B for Hermitian positive definite A by Cholesky.
pub fn cholesky_solve(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    use ndarray_linalg::{FactorizeC, SolveC, UPLO};
    let fac = fortran(a).factorizec(UPLO::Lower)?;
    let mut x = Array2::<C64>::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        x.column_mut(j).assign(&fac.solvec(&col.to_owned())?);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_returns_eigenvectors_of_the_input() {
        let a = Array2::from_shape_fn((4, 4), |(i, j)| {
            let z = c((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.7);
            if i == j { c(z.re, 0.0) } else { z }
        });
        let a = &a + &adjoint(&a.view());
        let (w, v) = eigh(&a).unwrap();
        let r = a.dot(&v) - &v * &w.mapv(|x| c(x, 0.0));
        assert!(max_abs(&r.view()) < 1e-12, "{}", max_abs(&r.view()));
    }

    #[test]
    fn cholesky_solve_solves_complex_system() {
        let b = Array2::from_shape_fn((3, 3), |(i, j)| c(i as f64 - 0.5 * j as f64, 0.4 * (i * j) as f64 - 0.2));
        let a = adjoint(&b.view()).dot(&b) + eye(3);
        let rhs = Array2::from_shape_fn((3, 2), |(i, j)| c(i as f64, 1.0 - j as f64));
        let x = cholesky_solve(&a, &rhs).unwrap();
        assert!(max_abs(&(a.dot(&x) - &rhs).view()) < 1e-12);
    }

    #[test]
    fn pauli_algebra() {
        let [s1, s2, s3] = pauli();
        let prod = s1.dot(&s2);
        assert!(max_abs(&(prod - s3.mapv(|z| z * I)).view()) < 1e-15);
    }

    #[test]
    fn cholesky_roundtrip() {
        let g = ndarray::arr2(&[[2.0, 0.3], [0.3, 1.5]]);
        let l = cholesky_real(&g).unwrap();
        let back = l.dot(&l.t());
        assert!((back - &g).iter().all(|x| x.abs() < 1e-14));
        let li = lower_inverse(&l);
        let id = li.dot(&l);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-14 && id[[1, 0]].abs() < 1e-14);
    }

    #[test]
    fn op_norm_of_diagonal() {
        let a = Array2::from_diag(&ndarray::arr1(&[c(3.0, 0.0), c(0.0, -4.0)]));
        assert!((op_norm(&a.view()).unwrap() - 4.0).abs() < 1e-12);
    }
}
