//! Generalized Dirac operators D = sum_j cl(dx^j)(d_j + A_j) on the truncated
//! Fourier x fiber basis, their spectral resolution and the Bochner check.

mod connection;
mod spectral;

pub use connection::ConnectionSpec;
pub use spectral::{spectral_resolution, SpectralResolution, KERNEL_TOL};

use std::collections::BTreeMap;

use ndarray::{s, Array2};

use crate::clifford::CliffordModule;
use crate::geometry::FlatTorus;
use crate::grid::{FourierBasis, Section};
use crate::linalg::{adjoint, eye, hermitian_deviation, max_abs, I};
use crate::{LabError, Result, C64};

/// The tuple (M, E, g, h_E, nabla^E) realized on a flat torus.
///
/// `frame` is a constant unitary V applied to the Clifford action
/// (cl -> V cl V^dagger); it records constant gauge rotations.
#[derive(Clone, Debug)]
pub struct DiracBundle {
    pub torus: FlatTorus,
    pub clifford: CliffordModule,
    pub frame: Array2<C64>,
    pub connection: ConnectionSpec,
}

impl DiracBundle {
    pub fn new(torus: FlatTorus, connection: ConnectionSpec) -> Result<Self> {
        let clifford = CliffordModule::build(torus.dim(), torus.metric())?;
        let frame = eye(clifford.rank());
        DiracBundle::with_frame(torus, clifford, frame, connection)
    }

    pub fn with_frame(
        torus: FlatTorus,
        clifford: CliffordModule,
        frame: Array2<C64>,
        connection: ConnectionSpec,
    ) -> Result<Self> {
        if clifford.base_dim() != torus.dim() {
            return Err(LabError::DimensionMismatch { expected: torus.dim(), got: clifford.base_dim() });
        }
        if connection.dim() != torus.dim() || connection.rank() != clifford.rank() {
            return Err(LabError::DimensionMismatch { expected: clifford.rank(), got: connection.rank() });
        }
        let dev = max_abs(&(adjoint(&frame.view()).dot(&frame) - eye(clifford.rank())).view());
        if dev > 1e-12 {
            return Err(LabError::NonUnitary(dev));
        }
        let bundle = DiracBundle { torus, clifford, frame, connection };
        bundle.connection.validate(&bundle.cl_all())?;
        Ok(bundle)
    }

    /// The untwisted rank-2 bundle on the standard 2 pi torus.
    pub fn trivial(n: usize) -> Self {
        DiracBundle::new(FlatTorus::standard(n), ConnectionSpec::zero(2, 2)).expect("trivial bundle")
    }

    /// cl(dx^j) in the bundle frame.
    pub fn cl_coord(&self, j: usize) -> Array2<C64> {
        let c = self.clifford.cl_coord(j);
        self.frame.dot(&c).dot(&adjoint(&self.frame.view()))
    }

    fn cl_all(&self) -> Vec<Array2<C64>> {
        (0..self.torus.dim()).map(|j| self.cl_coord(j)).collect()
    }

    /// Chirality operator in the bundle frame.
    pub fn chirality(&self) -> Array2<C64> {
        self.frame.dot(&self.clifford.chirality()).dot(&adjoint(&self.frame.view()))
    }

    pub fn rank(&self) -> usize {
        self.clifford.rank()
    }
}

/// Assembled Dirac operator with its basis.
#[derive(Clone, Debug)]
pub struct DiracOperator {
    pub basis: FourierBasis,
    pub bundle: DiracBundle,
    pub matrix: Array2<C64>,
}

/// Fourier block sum_j cl_j (i kappa_j + A_j(0)) for a constant connection.
pub fn mode_block(bundle: &DiracBundle, basis: &FourierBasis, mode: &[i64]) -> Array2<C64> {
    let n = bundle.rank();
    let kap = basis.kappa(mode);
    let mut block = Array2::<C64>::zeros((n, n));
    let zero_mode = vec![0i64; mode.len()];
    for j in 0..bundle.torus.dim() {
        let cl = bundle.cl_coord(j);
        let mut inner = eye(n).mapv(|z| z * I * kap[j]);
        if let Some(a) = bundle.connection.coefficient(&zero_mode) {
            inner = inner + &a[j];
        }
        block = block + cl.dot(&inner);
    }
    block
}

/// Matrix of D in the Fourier x fiber basis with cutoff K.
pub fn assemble_dirac(bundle: &DiracBundle, k: usize) -> Result<DiracOperator> {
    let k_a = bundle.connection.bandwidth();
    if k < k_a + 1 {
        return Err(LabError::CutoffTooSmall { k, k_a });
    }
    let basis = FourierBasis::new(&bundle.torus, k, bundle.rank())?;
    let n = bundle.rank();
    let dim = basis.dim();
    let m = bundle.torus.dim();
    let cls: Vec<Array2<C64>> = (0..m).map(|j| bundle.cl_coord(j)).collect();
    // cl_j A_j(q) summed over j, per connection mode q.
    let mut coupling: BTreeMap<Vec<i64>, Array2<C64>> = BTreeMap::new();
    for (q, comps) in bundle.connection.coefficients() {
        let mut acc = Array2::<C64>::zeros((n, n));
        for j in 0..m {
            acc = acc + cls[j].dot(&comps[j]);
        }
        coupling.insert(q.clone(), acc);
    }
    let mut mat = Array2::<C64>::zeros((dim, dim));
    for row in 0..basis.n_modes() {
        let kr = basis.mode(row);
        let kap = basis.kappa(&kr);
        let mut diag = Array2::<C64>::zeros((n, n));
        for j in 0..m {
            diag = diag + cls[j].mapv(|z| z * I * kap[j]);
        }
        mat.slice_mut(s![row * n..(row + 1) * n, row * n..(row + 1) * n]).assign(&diag);
        for (q, blk) in &coupling {
            let kc: Vec<i64> = kr.iter().zip(q).map(|(a, b)| a - b).collect();
            if let Some(col) = basis.mode_index(&kc) {
                let mut view = mat.slice_mut(s![row * n..(row + 1) * n, col * n..(col + 1) * n]);
                view += blk;
            }
        }
    }
    Ok(DiracOperator { basis, bundle: bundle.clone(), matrix: mat })
}

impl DiracOperator {
    pub fn apply(&self, f: &Section) -> Section {
        self.matrix.dot(f)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.matrix.view())
    }

    /// Chirality extended diagonally over Fourier modes.
    pub fn chirality_matrix(&self) -> Array2<C64> {
        let g = self.bundle.chirality();
        let n = self.bundle.rank();
        let mut out = Array2::<C64>::zeros((self.basis.dim(), self.basis.dim()));
        for q in 0..self.basis.n_modes() {
            out.slice_mut(s![q * n..(q + 1) * n, q * n..(q + 1) * n]).assign(&g);
        }
        out
    }

    /// max |gamma D gamma + D| relative to max |D|.
    pub fn chirality_anticommutator(&self) -> f64 {
        let g = self.bundle.chirality();
        let n = self.bundle.rank();
        let nm = self.basis.n_modes();
        let mut worst: f64 = 0.0;
        for r in 0..nm {
            for c in 0..nm {
                let blk = self.matrix.slice(s![r * n..(r + 1) * n, c * n..(c + 1) * n]);
                let res = g.dot(&blk).dot(&g) + blk;
                worst = worst.max(max_abs(&res.view()));
            }
        }
        worst / max_abs(&self.matrix.view()).max(f64::MIN_POSITIVE)
    }

    /// Spectral resolution; per-mode blocks when the connection is constant.
    pub fn resolve(&self) -> Result<SpectralResolution> {
        if self.bundle.connection.is_constant() {
            let blocks = (0..self.basis.n_modes())
                .map(|q| mode_block(&self.bundle, &self.basis, &self.basis.mode(q)))
                .collect();
            SpectralResolution::from_blocks(self.basis.clone(), blocks)
        } else {
            spectral_resolution(&self.basis, &self.matrix)
        }
    }

    /// Diagonal block (k, k) of D^2.
    pub fn square_block(&self, mode: &[i64]) -> Option<Array2<C64>> {
        let n = self.bundle.rank();
        let q = self.basis.mode_index(mode)?;
        let rows = self.matrix.slice(s![q * n..(q + 1) * n, ..]);
        let cols = self.matrix.slice(s![.., q * n..(q + 1) * n]);
        Some(rows.dot(&cols))
    }
}

/// Outcome of the principal-symbol comparison of D^2 with |xi|^2_G Id.
#[derive(Clone, Debug)]
pub struct BochnerReport {
    /// max relative deviation of the second-order coefficient from |kappa|^2_G Id
    pub deviation: f64,
    /// largest first-order coefficient magnitude along the probed rays
    pub first_order: f64,
    /// largest zeroth-order coefficient magnitude along the probed rays
    pub zeroth_order: f64,
}

/// Fit D^2 diagonal blocks along rays k = t v as quadratics in t and compare
/// the leading coefficient with the metric symbol.
pub fn bochner_compare(op: &DiracOperator) -> Result<BochnerReport> {
    let m = op.bundle.torus.dim();
    let k = op.basis.cutoff() as i64;
    let k_a = op.bundle.connection.bandwidth() as i64;
    let reach = k - k_a;
    if reach < 3 {
        return Err(LabError::CutoffTooSmall { k: k as usize, k_a: k_a as usize });
    }
    let dirs: Vec<Vec<i64>> = if m == 1 { vec![vec![1]] } else { vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]] };
    let ginv = {
        let cm = &op.bundle.clifford;
        cm.coframe().t().dot(cm.coframe())
    };
    let n = op.bundle.rank();
    let ts: Vec<i64> = vec![reach - 2, reach - 1, reach];
    let mut report = BochnerReport { deviation: 0.0, first_order: 0.0, zeroth_order: 0.0 };
    for v in &dirs {
        let samples: Vec<Array2<C64>> = ts
            .iter()
            .map(|&t| {
                let mode: Vec<i64> = v.iter().map(|x| x * t).collect();
                op.square_block(&mode).expect("mode within cutoff")
            })
            .collect();
        // Exact quadratic through three equally spaced samples t0, t0+1, t0+2.
        let t0 = ts[0] as f64;
        let d2 = (&samples[2] - &samples[1].mapv(|z| z * 2.0) + &samples[0]).mapv(|z| z * 0.5);
        let d1 = &samples[1] - &samples[0] - d2.mapv(|z| z * (2.0 * t0 + 1.0));
        let d0 = &samples[0] - &d1.mapv(|z| z * t0) - d2.mapv(|z| z * t0 * t0);
        let kap = op.basis.kappa(v);
        let mut sym = 0.0;
        for i in 0..m {
            for j in 0..m {
                sym += kap[i] * ginv[[i, j]] * kap[j];
            }
        }
        let dev = max_abs(&(&d2 - &eye(n).mapv(|z| z * sym)).view()) / sym;
        report.deviation = report.deviation.max(dev);
        report.first_order = report.first_order.max(max_abs(&d1.view()));
        report.zeroth_order = report.zeroth_order.max(max_abs(&d0.view()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mode_block_vanishes() {
        let b = DiracBundle::trivial(9);
        let op = assemble_dirac(&b, 4).unwrap();
        let q = op.basis.mode_index(&[0, 0]).unwrap();
        let blk = op.matrix.slice(s![2 * q..2 * q + 2, 2 * q..2 * q + 2]);
        assert_eq!(max_abs(&blk.to_owned().view()), 0.0);
    }

    #[test]
    fn cutoff_guard() {
        let torus = FlatTorus::standard(9);
        let conn = ConnectionSpec::scalar_trig(2, 2, &[(vec![1, 0], vec![C64::new(0.1, 0.0), C64::new(0.0, 0.0)])]).unwrap();
        let b = DiracBundle::new(torus, conn).unwrap();
        assert!(matches!(assemble_dirac(&b, 1), Err(LabError::CutoffTooSmall { .. })));
    }
}
