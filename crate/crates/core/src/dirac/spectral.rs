use ndarray::{s, Array1, Array2};

use crate::grid::{FourierBasis, Section};
use crate::linalg::{adjoint, eigh, hermitian_deviation, max_abs};
use crate::{LabError, Result, C64};

/// Kernel threshold relative to the spectral radius.
pub const KERNEL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
enum Repr {
    /// Per-mode n x n eigenvectors; `order[i] = (mode, local column)`.
    Blocks { n: usize, vecs: Vec<Array2<C64>>, order: Vec<(usize, usize)>, position: Vec<usize> },
    /// Dense eigenvector columns in sorted order.
    Dense(Array2<C64>),
}

/// Eigenvalues sorted by |lambda| then sign, orthonormal eigensections,
/// kernel dimension and multiplicities.
#[derive(Clone, Debug)]
pub struct SpectralResolution {
    basis: FourierBasis,
    raw: Vec<f64>,
    eigenvalues: Vec<f64>,
    kernel_dim: usize,
    norm: f64,
    multiplicities: Vec<(f64, usize)>,
    repr: Repr,
}

/// Sort permutation: cluster equal eigenvalues, then order clusters by |lambda| then sign.
fn spectral_order(vals: &[f64], tol: f64) -> (Vec<usize>, Vec<(f64, usize)>) {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &idx {
        match clusters.last_mut() {
            Some(c) if (vals[i] - vals[*c.last().unwrap()]).abs() <= tol => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let center = |c: &Vec<usize>| c.iter().map(|&i| vals[i]).sum::<f64>() / c.len() as f64;
    clusters.sort_by(|a, b| {
        let (ca, cb) = (center(a), center(b));
        ca.abs().total_cmp(&cb.abs()).then(ca.total_cmp(&cb))
    });
    let mult = clusters.iter().map(|c| (center(c), c.len())).collect();
    (clusters.into_iter().flatten().collect(), mult)
}

impl SpectralResolution {
    fn finish(basis: FourierBasis, vals: Vec<f64>, build: impl FnOnce(&[usize]) -> Repr) -> Self {
        let norm = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = KERNEL_TOL * norm.max(f64::MIN_POSITIVE);
        let (perm, mut multiplicities) = spectral_order(&vals, tol);
        let raw: Vec<f64> = perm.iter().map(|&i| vals[i]).collect();
        let eigenvalues: Vec<f64> = raw.iter().map(|&v| if v.abs() < tol { 0.0 } else { v }).collect();
        let kernel_dim = eigenvalues.iter().filter(|v| **v == 0.0).count();
        for m in multiplicities.iter_mut() {
            if m.0.abs() < tol {
                m.0 = 0.0;
            }
        }
        let repr = build(&perm);
        SpectralResolution { basis, raw, eigenvalues, kernel_dim, norm, multiplicities, repr }
    }

    /// Resolution of a block-diagonal operator given its per-mode blocks.
    pub fn from_blocks(basis: FourierBasis, blocks: Vec<Array2<C64>>) -> Result<Self> {
        let n = basis.rank();
        let mut vals = Vec::with_capacity(basis.dim());
        let mut vecs = Vec::with_capacity(blocks.len());
        let mut ids = Vec::with_capacity(basis.dim());
        for (q, b) in blocks.iter().enumerate() {
            let scale = max_abs(&b.view());
            if scale > 0.0 && hermitian_deviation(&b.view()) > 1e-12 {
                return Err(LabError::NotHermitian(hermitian_deviation(&b.view())));
            }
            let (w, v) = eigh(b)?;
            for (j, &x) in w.iter().enumerate() {
                vals.push(x);
                ids.push((q, j));
            }
            vecs.push(v);
        }
        let dim = vals.len();
        Ok(Self::finish(basis, vals, |perm| {
            let order: Vec<(usize, usize)> = perm.iter().map(|&i| ids[i]).collect();
            let mut position = vec![0; dim];
            for (i, &(q, j)) in order.iter().enumerate() {
                position[q * n + j] = i;
            }
            Repr::Blocks { n, vecs, order, position }
        }))
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues with kernel values set to exactly zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalues as computed, before kernel snapping.
    pub fn raw_eigenvalues(&self) -> &[f64] {
        &self.raw
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    /// Spectral radius ||D||.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// (eigenvalue, multiplicity) clusters in sorted order.
    pub fn multiplicities(&self) -> &[(f64, usize)] {
        &self.multiplicities
    }

    /// Smallest nonzero |lambda|.
    pub fn first_nonzero(&self) -> Option<f64> {
        self.eigenvalues.iter().find(|v| **v != 0.0).map(|v| v.abs())
    }

    pub fn is_block_diagonal(&self) -> bool {
        matches!(self.repr, Repr::Blocks { .. })
    }

    /// Coefficients <phi_i, f> in sorted order.
    pub fn to_eigen(&self, f: &Section) -> Array1<C64> {
        match &self.repr {
            Repr::Dense(v) => v.t().mapv(|z| z.conj()).dot(f),
            Repr::Blocks { n, vecs, position, .. } => {
                let mut out = Array1::<C64>::zeros(f.len());
                for (q, v) in vecs.iter().enumerate() {
                    let local = f.slice(s![q * n..(q + 1) * n]);
                    for j in 0..*n {
                        let mut acc = C64::new(0.0, 0.0);
                        for l in 0..*n {
                            acc += v[[l, j]].conj() * local[l];
                        }
                        out[position[q * n + j]] = acc;
                    }
                }
                out
            }
        }
    }

    /// Section sum_i a_i phi_i.
    pub fn from_eigen(&self, a: &Array1<C64>) -> Section {
        match &self.repr {
            Repr::Dense(v) => v.dot(a),
            Repr::Blocks { n, vecs, position, .. } => {
                let mut out = Array1::<C64>::zeros(a.len());
                for (q, v) in vecs.iter().enumerate() {
                    for l in 0..*n {
                        let mut acc = C64::new(0.0, 0.0);
                        for j in 0..*n {
                            acc += v[[l, j]] * a[position[q * n + j]];
                        }
                        out[q * n + l] = acc;
                    }
                }
                out
            }
        }
    }

    /// sum_i func(lambda_i) <phi_i, f> phi_i.
    pub fn apply_fn(&self, f: &Section, func: impl Fn(f64) -> f64) -> Section {
        let mut a = self.to_eigen(f);
        for (z, &lam) in a.iter_mut().zip(&self.eigenvalues) {
            *z *= func(lam);
        }
        self.from_eigen(&a)
    }

    /// Eigensection phi_i.
    pub fn vector(&self, i: usize) -> Section {
        match &self.repr {
            Repr::Dense(v) => v.column(i).to_owned(),
            Repr::Blocks { n, vecs, order, .. } => {
                let (q, j) = order[i];
                let mut out = Array1::<C64>::zeros(self.dim());
                out.slice_mut(s![q * n..(q + 1) * n]).assign(&vecs[q].column(j));
                out
            }
        }
    }

    /// All eigenvectors as dense columns (sorted order).
    pub fn dense_vectors(&self) -> Array2<C64> {
        match &self.repr {
            Repr::Dense(v) => v.clone(),
            Repr::Blocks { .. } => {
                let mut out = Array2::<C64>::zeros((self.dim(), self.dim()));
                for i in 0..self.dim() {
                    out.column_mut(i).assign(&self.vector(i));
                }
                out
            }
        }
    }

    /// Kernel eigensections.
    pub fn kernel_vectors(&self) -> Vec<Section> {
        (0..self.dim()).filter(|&i| self.eigenvalues[i] == 0.0).map(|i| self.vector(i)).collect()
    }

    /// max |V^dagger V - I|.
    pub fn unitarity_defect(&self) -> f64 {
        let v = self.dense_vectors();
        let g = adjoint(&v.view()).dot(&v);
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let e = if i == j { g[[i, j]] - 1.0 } else { g[[i, j]] };
                worst = worst.max(e.norm());
            }
        }
        worst
    }

    /// max_k ||D phi_k - lambda_k phi_k|| / ||D||.
    pub fn residual(&self, d: &Array2<C64>) -> f64 {
        let v = self.dense_vectors();
        let mut r = d.dot(&v);
        for (i, &lam) in self.raw.iter().enumerate() {
            let mut col = r.column_mut(i);
            col.scaled_add(C64::new(-lam, 0.0), &v.column(i));
        }
        let worst = (0..r.ncols())
            .map(|i| r.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        worst / self.norm.max(f64::MIN_POSITIVE)
    }
}

/// Full eigendecomposition of a Hermitian operator matrix.
pub fn spectral_resolution(basis: &FourierBasis, matrix: &Array2<C64>) -> Result<SpectralResolution> {
    if matrix.dim() != (basis.dim(), basis.dim()) {
        return Err(LabError::DimensionMismatch { expected: basis.dim(), got: matrix.nrows() });
    }
    let dev = hermitian_deviation(&matrix.view());
    if dev > 1e-12 {
        return Err(LabError::NotHermitian(dev));
    }
    let (w, v) = eigh(matrix)?;
    let vals = w.to_vec();
    Ok(SpectralResolution::finish(basis.clone(), vals, |perm| {
        let mut sorted = Array2::<C64>::zeros(v.dim());
        for (i, &p) in perm.iter().enumerate() {
            sorted.column_mut(i).assign(&v.column(p));
        }
        Repr::Dense(sorted)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_by_modulus_then_sign() {
        let (perm, mult) = spectral_order(&[2.0, -1.0, 0.0, 1.0, -2.0, 1.0], 1e-12);
        let sorted: Vec<f64> = perm.iter().map(|&i| [2.0, -1.0, 0.0, 1.0, -2.0, 1.0][i]).collect();
        assert_eq!(sorted, vec![0.0, -1.0, 1.0, 1.0, -2.0, 2.0]);
        assert_eq!(mult, vec![(0.0, 1), (-1.0, 1), (1.0, 2), (-2.0, 1), (2.0, 1)]);
    }
}
