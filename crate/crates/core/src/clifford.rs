//! Clifford modules over the flat torus: gamma matrices, Clifford
//! multiplication and the chirality operator.

use ndarray::{Array1, Array2};

use crate::linalg::{cholesky_real, eye, lower_inverse, pauli, I, ONE};
use crate::{LabError, Result, C64};

/// Complex Clifford module of rank n over an m-dimensional flat torus.
///
/// `gammas[a]` represents cl(e^a) for a G-orthonormal coframe e^a; the
/// coordinate covector dx^j acts as sum_a coframe[a][j] gammas[a].
#[derive(Clone, Debug)]
pub struct CliffordModule {
    m: usize,
    n: usize,
    gammas: Vec<Array2<C64>>,
    coframe: Array2<f64>,
}

impl CliffordModule {
    /// Irreducible module: rank 1 with c_1 = i for m = 1, rank 2 with c_a = i sigma_a for m = 2.
    pub fn build(m: usize, metric: &Array2<f64>) -> Result<Self> {
        if metric.dim() != (m, m) {
            return Err(LabError::DimensionMismatch { expected: m, got: metric.nrows() });
        }
        let gammas = match m {
            1 => vec![Array2::from_elem((1, 1), I)],
            2 => {
                let [s1, s2, _] = pauli();
                vec![s1.mapv(|z| z * I), s2.mapv(|z| z * I)]
            }
            _ => return Err(LabError::UnsupportedDimension(m)),
        };
        let l = cholesky_real(metric)?;
        let coframe = lower_inverse(&l);
        Ok(CliffordModule { m, n: gammas[0].nrows(), gammas, coframe })
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    /// Gamma matrices in the orthonormal coframe.
    pub fn gammas(&self) -> &[Array2<C64>] {
        &self.gammas
    }

    /// Orthonormalizing factor B with theta_hat = B theta and B^T B = G^{-1}.
    pub fn coframe(&self) -> &Array2<f64> {
        &self.coframe
    }

    /// Components of a coordinate covector in the orthonormal coframe.
    pub fn orthonormal_components(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|a| (0..self.m).map(|j| self.coframe[[a, j]] * theta[j]).sum())
            .collect()
    }

    /// cl(theta) as an n x n matrix for a coordinate covector theta.
    pub fn cl(&self, theta: &[f64]) -> Result<Array2<C64>> {
        if theta.len() != self.m {
            return Err(LabError::DimensionMismatch { expected: self.m, got: theta.len() });
        }
        let hat = self.orthonormal_components(theta);
        let mut out = Array2::<C64>::zeros((self.n, self.n));
        for (a, g) in self.gammas.iter().enumerate() {
            out.scaled_add(C64::new(hat[a], 0.0), g);
        }
        Ok(out)
    }

    /// cl(dx^j).
    pub fn cl_coord(&self, j: usize) -> Array2<C64> {
        let mut e = vec![0.0; self.m];
        e[j] = 1.0;
        self.cl(&e).expect("coordinate covector has matching dimension")
    }

    pub fn clifford_mult(&self, theta: &[f64], v: &Array1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.n {
            return Err(LabError::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok(self.cl(theta)?.dot(v))
    }

    /// gamma = i^{ceil(m/2)} c_1 ... c_m.
    pub fn chirality(&self) -> Array2<C64> {
        let mut g = eye(self.n);
        for c in &self.gammas {
            g = g.dot(c);
        }
        let mut phase = ONE;
        for _ in 0..self.m.div_ceil(2) {
            phase *= I;
        }
        g.mapv(|z| z * phase)
    }

    /// Largest residual of c_j c_k + c_k c_j = -2 delta_jk Id.
    pub fn anticommutation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.m {
            for k in 0..self.m {
                let mut r = self.gammas[j].dot(&self.gammas[k]) + self.gammas[k].dot(&self.gammas[j]);
                if j == k {
                    r = r + eye(self.n).mapv(|z| z * 2.0);
                }
                worst = worst.max(crate::linalg::max_abs(&r.view()));
            }
        }
        worst
    }

    /// Largest residual of c_j^dagger = -c_j.
    pub fn skew_residual(&self) -> f64 {
        self.gammas
            .iter()
            .map(|g| crate::linalg::max_abs(&(crate::linalg::adjoint(&g.view()) + g).view()))
            .fold(0.0, f64::max)
    }

    /// Largest residual of cl(a)cl(b) + cl(b)cl(a) = -2 g(a, b) for coordinate covectors.
    pub fn coordinate_relation_residual(&self, metric_inverse: &Array2<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.m {
            for k in 0..self.m {
                let (a, b) = (self.cl_coord(j), self.cl_coord(k));
                let r = a.dot(&b) + b.dot(&a) + eye(self.n).mapv(|z| z * 2.0 * metric_inverse[[j, k]]);
                worst = worst.max(crate::linalg::max_abs(&r.view()));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};

    #[test]
    fn chirality_is_sigma3() {
        let cm = CliffordModule::build(2, &Array2::eye(2)).unwrap();
        let g = cm.chirality();
        let expect = ndarray::arr2(&[[ONE, c(0.0, 0.0)], [c(0.0, 0.0), -ONE]]);
        assert!(max_abs(&(g - expect).view()) < 1e-15);
    }

    #[test]
    fn rank_one_module() {
        let cm = CliffordModule::build(1, &Array2::eye(1)).unwrap();
        assert_eq!(cm.gammas()[0][[0, 0]], I);
        assert!(cm.anticommutation_residual() < 1e-15);
    }

    #[test]
    fn multiplication_example() {
        let cm = CliffordModule::build(2, &Array2::eye(2)).unwrap();
        let v = ndarray::arr1(&[ONE, c(0.0, 0.0)]);
        let w = cm.clifford_mult(&[1.0, 0.0], &v).unwrap();
        assert!((w[0]).norm() < 1e-15 && (w[1] - I).norm() < 1e-15);
    }

    #[test]
    fn rejects_m3() {
        assert!(matches!(
            CliffordModule::build(3, &Array2::eye(3)),
            Err(LabError::UnsupportedDimension(3))
        ));
    }
}
