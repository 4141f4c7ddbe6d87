//! Gauge transformations, connection recovery from the squared operator and
//! the chirality extension of positive spectral data.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, SVD};

use crate::dirac::{DiracBundle, DiracOperator, SpectralResolution};
use crate::fractional::RestrictedSection;
use crate::grid::{FourierBasis, Section};
use crate::linalg::{adjoint, eye, max_abs, vec_norm};
use crate::{LabError, Result, C64};

/// U(x) = exp(i theta(x)) V with theta a real trigonometric polynomial and V
/// a constant unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGauge {
    pub theta: BTreeMap<Vec<i64>, C64>,
    pub frame: Array2<C64>,
}

impl ScalarGauge {
    pub fn new(theta: BTreeMap<Vec<i64>, C64>, frame: Array2<C64>) -> Result<Self> {
        let n = frame.nrows();
        let dev = max_abs(&(adjoint(&frame.view()).dot(&frame) - eye(n)).view());
        if dev > 1e-12 {
            return Err(LabError::NonUnitary(dev));
        }
        // theta must be real for exp(i theta) to be unitary.
        for (q, v) in &theta {
            let neg: Vec<i64> = q.iter().map(|k| -k).collect();
            let partner = theta.get(&neg).copied().unwrap_or(C64::new(0.0, 0.0));
            let d = (partner - v.conj()).norm();
            if d > 1e-12 {
                return Err(LabError::NonUnitary(d));
            }
        }
        Ok(ScalarGauge { theta, frame })
    }

    pub fn identity(n: usize) -> Self {
        ScalarGauge { theta: BTreeMap::new(), frame: eye(n) }
    }

    pub fn theta_at(&self, periods: &[f64], x: &[f64]) -> f64 {
        self.theta
            .iter()
            .map(|(q, v)| {
                let ph: f64 = q.iter().zip(periods).zip(x).map(|((&k, &p), &xx)| 2.0 * std::f64::consts::PI * k as f64 / p * xx).sum();
                (v * C64::from_polar(1.0, ph)).re
            })
            .sum()
    }
}

/// A -> U A U^dagger - (dU) U^dagger; for U = e^{i theta} V this is
/// V A V^dagger - i d theta, and cl -> V cl V^dagger.
pub fn gauge_transform(bundle: &DiracBundle, gauge: &ScalarGauge) -> Result<DiracBundle> {
    let n = bundle.rank();
    let m = bundle.torus.dim();
    if gauge.frame.nrows() != n {
        return Err(LabError::DimensionMismatch { expected: n, got: gauge.frame.nrows() });
    }
    let v = &gauge.frame;
    let vh = adjoint(&v.view());
    let mut coeffs: BTreeMap<Vec<i64>, Vec<Array2<C64>>> = BTreeMap::new();
    for (q, comps) in bundle.connection.coefficients() {
        coeffs.insert(q.clone(), comps.iter().map(|a| v.dot(a).dot(&vh)).collect());
    }
    let mut spec = crate::dirac::ConnectionSpec::from_coefficients(m, n, coeffs);
    let periods = bundle.torus.periods();
    for (q, th) in &gauge.theta {
        // -i d_j theta has coefficient -i (i kappa_j) theta_q = kappa_j theta_q.
        let comps = (0..m)
            .map(|j| {
                let kap = 2.0 * std::f64::consts::PI * q[j] as f64 / periods[j];
                eye(n).mapv(|e| e * th * kap)
            })
            .collect();
        spec.add_term(q, comps);
    }
    DiracBundle::with_frame(bundle.torus.clone(), bundle.clifford.clone(), v.dot(&bundle.frame), spec)
}

/// The discrete gauge unitary: multiplication by e^{i theta_p} at the nodes,
/// as a matrix on Fourier coefficients.
pub fn nodal_gauge_matrix(basis: &FourierBasis, theta: &[f64]) -> Result<Array2<C64>> {
    if theta.len() != basis.n_points() {
        return Err(LabError::DimensionMismatch { expected: basis.n_points(), got: theta.len() });
    }
    let dim = basis.dim();
    let mut u = Array2::<C64>::zeros((dim, dim));
    let mut e = Array1::<C64>::zeros(dim);
    for col in 0..dim {
        e.fill(C64::new(0.0, 0.0));
        e[col] = C64::new(1.0, 0.0);
        let mut nodal = basis.to_nodal(&e);
        for (p, mut row) in nodal.rows_mut().into_iter().enumerate() {
            row *= C64::from_polar(1.0, theta[p]);
        }
        u.column_mut(col).assign(&basis.from_nodal(&nodal));
    }
    Ok(u)
}

/// U D U^dagger for the nodal gauge; equals D on sections near nodes where
/// theta vanishes.
pub fn nodal_gauge_conjugate(op: &DiracOperator, theta: &[f64]) -> Result<Array2<C64>> {
    let u = nodal_gauge_matrix(&op.basis, theta)?;
    Ok(u.dot(&op.matrix).dot(&adjoint(&u.view())))
}

/// Recovered coefficients A_j(x) (n x n each) at a grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionSample {
    pub node: usize,
    pub point: Vec<f64>,
    pub a: Vec<Array2<C64>>,
    pub condition: f64,
}

/// Largest entrywise difference between two recovered charts.
pub fn chart_difference(a: &[ConnectionSample], b: &[ConnectionSample]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.a.iter().zip(&y.a).map(|(p, q)| max_abs(&(p - q).view())))
        .fold(0.0, f64::max)
}

/// Condition limit for the gradient matrix of the probes.
pub const MAX_PROBE_CONDITION: f64 = 1e8;

/// Recovers A_j(x) at the given nodes from the matrix of D: probes
/// phi = b(y) (y - x)_k e_l vanish at x, so ((D^2 - Delta_0) phi)(x) =
/// -2 g^{ij} A_i d_j phi(x), with Delta_0 = d^* d applied fiberwise.
pub fn recover_connection(
    basis: &FourierBasis,
    d: &Array2<C64>,
    nodes: &[usize],
    probe_radius: f64,
) -> Result<Vec<ConnectionSample>> {
    let torus = basis.torus();
    let m = torus.dim();
    let n = basis.rank();
    let ginv = torus.metric().inv().map_err(LabError::from)?;
    let lap0: Vec<f64> = (0..basis.n_modes())
        .map(|q| {
            let k = basis.kappa(&basis.mode(q));
            (0..m).map(|i| (0..m).map(|j| k[i] * ginv[[i, j]] * k[j]).sum::<f64>()).sum()
        })
        .collect();
    let mut out = Vec::with_capacity(nodes.len());
    for &p in nodes {
        let x = torus.grid_point(p);
        let mut support = 0;
        let mut profiles = vec![Array1::<f64>::zeros(basis.n_points()); m];
        for y in 0..basis.n_points() {
            let disp = torus.displacement(&x, &torus.grid_point(y));
            let r = torus.norm_sq(&disp).sqrt() / probe_radius;
            if r < 1.0 {
                support += 1;
                let b = (1.0 - r * r).powi(3);
                for k in 0..m {
                    profiles[k][y] = b * disp[k];
                }
            }
        }
        if support <= 2 * m {
            return Err(LabError::GridTooCoarse(f64::INFINITY));
        }
        // Gradient matrix M_ik = g^{ij} d_j phi_k(x).
        let mut grad = Array2::<C64>::zeros((m, m));
        let mut probes = Vec::with_capacity(m);
        for k in 0..m {
            let mut nodal = Array2::<C64>::zeros((basis.n_points(), n));
            for y in 0..basis.n_points() {
                nodal[[y, 0]] = C64::new(profiles[k][y], 0.0);
            }
            let phi = basis.from_nodal(&nodal);
            for j in 0..m {
                let dj = basis.to_nodal(&basis.derivative(&phi, j))[[p, 0]];
                for i in 0..m {
                    grad[[i, k]] += dj * ginv[[i, j]];
                }
            }
            probes.push(phi);
        }
        let (_, sv, _) = grad.svd(false, false)?;
        let cond = sv[0] / sv[m - 1].max(f64::MIN_POSITIVE);
        if !(cond < MAX_PROBE_CONDITION) {
            return Err(LabError::GridTooCoarse(cond));
        }
        let grad_inv = grad.inv()?;
        let mut a = vec![Array2::<C64>::zeros((n, n)); m];
        for l in 0..n {
            let mut r = Array2::<C64>::zeros((n, m));
            for k in 0..m {
                // Move the fiber-0 probe to fiber l.
                let mut phi = Array1::<C64>::zeros(basis.dim());
                for q in 0..basis.n_modes() {
                    phi[q * n + l] = probes[k][q * n];
                }
                let d2 = d.dot(&d.dot(&phi));
                let mut diff = d2;
                for q in 0..basis.n_modes() {
                    for f in 0..n {
                        diff[q * n + f] -= phi[q * n + f] * lap0[q];
                    }
                }
                let val = basis.to_nodal(&diff);
                for f in 0..n {
                    r[[f, k]] = val[[p, f]];
                }
            }
            let cols = r.dot(&grad_inv).mapv(|z| z * -0.5);
            for i in 0..m {
                for f in 0..n {
                    a[i][[f, l]] = cols[[f, i]];
                }
            }
        }
        out.push(ConnectionSample { node: p, point: x, a, condition: cond });
    }
    Ok(out)
}

/// Applies a fiber endomorphism to every node of a restricted section.
fn apply_fiberwise(g: &Array2<C64>, s: &RestrictedSection) -> RestrictedSection {
    RestrictedSection { nodes: s.nodes.clone(), values: s.values.dot(&g.t()) }
}

/// Doubles positive eigendata on O: (lambda, phi|_O) -> (-lambda, gamma phi|_O).
pub fn extend_spectral_data(
    positive: &[(f64, RestrictedSection)],
    chirality: &Array2<C64>,
    m: usize,
) -> Result<Vec<(f64, RestrictedSection)>> {
    if m % 2 == 1 {
        return Err(LabError::OddDimension(m));
    }
    let mut out = Vec::with_capacity(2 * positive.len());
    for (lam, phi) in positive {
        if !(*lam > 0.0) {
            return Err(LabError::InvalidParameter(format!("eigenvalue {lam} is not positive")));
        }
        out.push((*lam, phi.clone()));
        out.push((-lam, apply_fiberwise(chirality, phi)));
    }
    Ok(out)
}

/// gamma applied fiberwise to a global section.
pub fn apply_chirality(basis: &FourierBasis, gamma: &Array2<C64>, f: &Section) -> Section {
    let n = basis.rank();
    let mut out = f.clone();
    for q in 0..basis.n_modes() {
        let block = f.slice(ndarray::s![q * n..(q + 1) * n]);
        out.slice_mut(ndarray::s![q * n..(q + 1) * n]).assign(&gamma.dot(&block));
    }
    out
}

/// max_k ||D(gamma phi_k) + lambda_k gamma phi_k|| over the `count` lowest
/// positive eigenpairs (verification against the assembled operator).
pub fn chirality_extension_residual(op: &DiracOperator, res: &SpectralResolution, count: usize) -> Result<f64> {
    let m = op.bundle.torus.dim();
    if m % 2 == 1 {
        return Err(LabError::OddDimension(m));
    }
    let gamma = op.bundle.chirality();
    let lams = res.eigenvalues();
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    for (i, &lam) in lams.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let phi = res.vector(i);
        let gphi = apply_chirality(&op.basis, &gamma, &phi);
        let r = &op.apply(&gphi) + &gphi.mapv(|z| z * lam);
        worst = worst.max(vec_norm(&r));
        seen += 1;
        if seen == count {
            break;
        }
    }
    Ok(worst)
}
