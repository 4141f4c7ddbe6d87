use std::collections::BTreeMap;

use ndarray::Array2;

use crate::linalg::{adjoint, eye, max_abs, I};
use crate::{LabError, Result, C64};

/// Connection one-form A = sum_j A_j dx^j as a trigonometric polynomial,
/// A_j(x) = sum_q Ahat_j(q) e^{i kappa_q . x}, with anti-Hermitian values.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionSpec {
    m: usize,
    n: usize,
    coeffs: BTreeMap<Vec<i64>, Vec<Array2<C64>>>,
}

impl ConnectionSpec {
    pub fn zero(m: usize, n: usize) -> Self {
        ConnectionSpec { m, n, coeffs: BTreeMap::new() }
    }

    /// Constant twist A_j = i a_j Id.
    pub fn constant_scalar(a: &[f64], n: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        if a.iter().any(|&v| v != 0.0) {
            coeffs.insert(vec![0; a.len()], a.iter().map(|&v| eye(n).mapv(|z| z * I * v)).collect());
        }
        ConnectionSpec { m: a.len(), n, coeffs }
    }

    /// Scalar connection A_j = i a_j(x) Id with real trigonometric a_j whose
    /// Fourier coefficients are given for a half set of modes; the conjugate
    /// modes are added automatically.
    pub fn scalar_trig(m: usize, n: usize, terms: &[(Vec<i64>, Vec<C64>)]) -> Result<Self> {
        let mut spec = ConnectionSpec::zero(m, n);
        for (q, alpha) in terms {
            if q.len() != m || alpha.len() != m {
                return Err(LabError::DimensionMismatch { expected: m, got: q.len().min(alpha.len()) });
            }
            let neg: Vec<i64> = q.iter().map(|v| -v).collect();
            if neg == *q {
                if alpha.iter().any(|z| z.im != 0.0) {
                    return Err(LabError::InvalidConnection("zero-mode coefficient must be real".into()));
                }
                spec.add_term(q, alpha.iter().map(|z| eye(n).mapv(|e| e * I * z)).collect());
            } else {
                spec.add_term(q, alpha.iter().map(|z| eye(n).mapv(|e| e * I * z)).collect());
                spec.add_term(&neg, alpha.iter().map(|z| eye(n).mapv(|e| e * I * z.conj())).collect());
            }
        }
        Ok(spec)
    }

    /// Arbitrary coefficient map; validity is checked when a bundle is built.
    pub fn from_coefficients(m: usize, n: usize, coeffs: BTreeMap<Vec<i64>, Vec<Array2<C64>>>) -> Self {
        ConnectionSpec { m, n, coeffs }
    }

    pub fn add_term(&mut self, q: &[i64], comps: Vec<Array2<C64>>) {
        let entry = self
            .coeffs
            .entry(q.to_vec())
            .or_insert_with(|| vec![Array2::<C64>::zeros((self.n, self.n)); self.m]);
        for (e, c) in entry.iter_mut().zip(comps) {
            *e = &*e + &c;
        }
        if entry.iter().all(|a| max_abs(&a.view()) == 0.0) {
            self.coeffs.remove(q);
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn coefficient(&self, q: &[i64]) -> Option<&Vec<Array2<C64>>> {
        self.coeffs.get(q)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&Vec<i64>, &Vec<Array2<C64>>)> {
        self.coeffs.iter()
    }

    /// K_A = max |q|_inf over nonzero coefficients.
    pub fn bandwidth(&self) -> usize {
        self.coeffs.keys().map(|q| q.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.keys().all(|q| q.iter().all(|&v| v == 0))
    }

    /// Pointwise value A_j(x) for x in coordinates.
    pub fn evaluate(&self, periods: &[f64], x: &[f64]) -> Vec<Array2<C64>> {
        let mut out = vec![Array2::<C64>::zeros((self.n, self.n)); self.m];
        for (q, comps) in &self.coeffs {
            let phase: f64 =
                q.iter().zip(periods).zip(x).map(|((&k, &p), &xx)| 2.0 * std::f64::consts::PI * k as f64 / p * xx).sum();
            let e = C64::from_polar(1.0, phase);
            for j in 0..self.m {
                out[j] = &out[j] + &comps[j].mapv(|z| z * e);
            }
        }
        out
    }

    /// Checks pointwise anti-Hermitian values, Ahat(-q) = -Ahat(q)^dagger, and
    /// compatibility with Clifford multiplication, [A_j, cl] = 0.
    pub fn validate(&self, cls: &[Array2<C64>]) -> Result<()> {
        let mut problems = Vec::new();
        for (q, comps) in &self.coeffs {
            if comps.len() != self.m {
                problems.push(format!("mode {q:?}: {} components for m = {}", comps.len(), self.m));
                continue;
            }
            let neg: Vec<i64> = q.iter().map(|v| -v).collect();
            for j in 0..self.m {
                let partner = self.coeffs.get(&neg).map(|c| c[j].clone()).unwrap_or_else(|| Array2::zeros((self.n, self.n)));
                let dev = max_abs(&(&partner + &adjoint(&comps[j].view())).view());
                if dev > 1e-12 {
                    problems.push(format!("mode {q:?}, component {j}: not anti-Hermitian (deviation {dev:.2e})"));
                }
                for (a, cl) in cls.iter().enumerate() {
                    let comm = max_abs(&(comps[j].dot(cl) - cl.dot(&comps[j])).view());
                    if comm > 1e-12 {
                        problems.push(format!(
                            "mode {q:?}, component {j}: does not commute with cl(dx^{a}) (deviation {comm:.2e})"
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(LabError::InvalidConnection(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CliffordModule;

    #[test]
    fn non_scalar_connection_rejected() {
        let cm = CliffordModule::build(2, &Array2::eye(2)).unwrap();
        let cls: Vec<_> = (0..2).map(|j| cm.cl_coord(j)).collect();
        let mut map = BTreeMap::new();
        let [_, _, s3] = crate::linalg::pauli();
        map.insert(vec![0, 0], vec![s3.mapv(|z| z * I), Array2::zeros((2, 2))]);
        let conn = ConnectionSpec::from_coefficients(2, 2, map);
        assert!(conn.validate(&cls).is_err());
    }

    #[test]
    fn trig_connection_is_pointwise_anti_hermitian() {
        let conn = ConnectionSpec::scalar_trig(2, 2, &[(vec![1, 0], vec![C64::new(0.2, 0.1), C64::new(0.0, 0.3)])]).unwrap();
        let p = 2.0 * std::f64::consts::PI;
        for x in [[0.1, 0.2], [1.3, 4.0]] {
            for a in conn.evaluate(&[p, p], &x) {
                assert!(max_abs(&(&a + &adjoint(&a.view())).view()) < 1e-15);
            }
        }
        assert_eq!(conn.bandwidth(), 1);
        assert!(!conn.is_constant());
    }
}
