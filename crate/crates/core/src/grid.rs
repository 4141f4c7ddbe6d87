//! Truncated Fourier x fiber basis and its nodal (collocation) grid.
//!
//! Basis sections are e^{i kappa.x} f_l / sqrt(Vol) with kappa_j = 2 pi k_j / P_j
//! and |k|_inf <= K. The collocation grid has N = 2K + 1 nodes per axis, so the
//! discrete Fourier transform between coefficients and nodal values is unitary
//! up to the cell-volume weight.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rustfft::{Fft, FftPlanner};

use crate::geometry::FlatTorus;
use crate::{LabError, Result, C64};

/// Coefficient vector in the Fourier x fiber basis (index = mode * rank + fiber).
pub type Section = Array1<C64>;

#[derive(Clone)]
pub struct FourierBasis {
    torus: FlatTorus,
    k: usize,
    rank: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierBasis").field("k", &self.k).field("rank", &self.rank).finish()
    }
}

impl FourierBasis {
    /// Basis with cutoff K on a torus whose grid has N = 2K + 1 points per axis.
    pub fn new(torus: &FlatTorus, k: usize, rank: usize) -> Result<Self> {
        if k == 0 {
            return Err(LabError::InvalidParameter("cutoff K must be >= 1".into()));
        }
        if torus.dim() > 2 {
            return Err(LabError::UnsupportedDimension(torus.dim()));
        }
        let n = 2 * k + 1;
        let torus = if torus.grid_size() == n {
            torus.clone()
        } else {
            FlatTorus::new(torus.periods().to_vec(), torus.metric().clone(), n)?
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(FourierBasis { torus, k, rank, forward, inverse })
    }

    pub fn torus(&self) -> &FlatTorus {
        &self.torus
    }

    pub fn cutoff(&self) -> usize {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn side(&self) -> usize {
        2 * self.k + 1
    }

    pub fn n_modes(&self) -> usize {
        self.side().pow(self.torus.dim() as u32)
    }

    pub fn dim(&self) -> usize {
        self.n_modes() * self.rank
    }

    pub fn n_points(&self) -> usize {
        self.n_modes()
    }

    pub fn mode(&self, idx: usize) -> Vec<i64> {
        self.torus.multi_index(idx).iter().map(|&i| i as i64 - self.k as i64).collect()
    }

    /// Index of mode k, or None when |k|_inf > K.
    pub fn mode_index(&self, mode: &[i64]) -> Option<usize> {
        let kk = self.k as i64;
        if mode.iter().any(|&v| v.abs() > kk) {
            return None;
        }
        Some(mode.iter().fold(0usize, |acc, &v| acc * self.side() + (v + kk) as usize))
    }

    /// Physical wave covector kappa_j = 2 pi k_j / P_j.
    pub fn kappa(&self, mode: &[i64]) -> Vec<f64> {
        mode.iter()
            .zip(self.torus.periods())
            .map(|(&v, &p)| 2.0 * std::f64::consts::PI * v as f64 / p)
            .collect()
    }

    fn bin(&self, v: i64) -> usize {
        v.rem_euclid(self.side() as i64) as usize
    }

    fn fft_axes(&self, data: &mut [C64], inverse: bool) {
        let n = self.side();
        let plan = if inverse { &self.inverse } else { &self.forward };
        match self.torus.dim() {
            1 => plan.process(data),
            _ => {
                for row in data.chunks_mut(n) {
                    plan.process(row);
                }
                let mut col = vec![C64::new(0.0, 0.0); n];
                for j in 0..n {
                    for i in 0..n {
                        col[i] = data[i * n + j];
                    }
                    plan.process(&mut col);
                    for i in 0..n {
                        data[i * n + j] = col[i];
                    }
                }
            }
        }
    }

    fn fft_index(&self, mode_idx: usize) -> usize {
        let mode = self.mode(mode_idx);
        mode.iter().fold(0usize, |acc, &v| acc * self.side() + self.bin(v))
    }

    /// Nodal values (points x fibers) of a coefficient vector.
    pub fn to_nodal(&self, coeffs: &Section) -> Array2<C64> {
        let np = self.n_points();
        let scale = 1.0 / self.torus.volume().sqrt();
        let mut out = Array2::<C64>::zeros((np, self.rank));
        let mut buf = vec![C64::new(0.0, 0.0); np];
        for l in 0..self.rank {
            buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for q in 0..np {
                buf[self.fft_index(q)] = coeffs[q * self.rank + l];
            }
            self.fft_axes(&mut buf, true);
            for p in 0..np {
                out[[p, l]] = buf[p] * scale;
            }
        }
        out
    }

    /// Coefficients of the band-limited section with the given nodal values.
    pub fn from_nodal(&self, nodal: &Array2<C64>) -> Section {
        let np = self.n_points();
        let scale = self.torus.volume().sqrt() / np as f64;
        let mut out = Array1::<C64>::zeros(self.dim());
        let mut buf = vec![C64::new(0.0, 0.0); np];
        for l in 0..self.rank {
            for p in 0..np {
                buf[p] = nodal[[p, l]];
            }
            self.fft_axes(&mut buf, false);
            for q in 0..np {
                out[q * self.rank + l] = buf[self.fft_index(q)] * scale;
            }
        }
        out
    }

    /// Point evaluation at an arbitrary point.
    pub fn evaluate(&self, coeffs: &Section, x: &[f64]) -> Array1<C64> {
        let scale = 1.0 / self.torus.volume().sqrt();
        let mut out = Array1::<C64>::zeros(self.rank);
        for q in 0..self.n_modes() {
            let kap = self.kappa(&self.mode(q));
            let phase: f64 = kap.iter().zip(x).map(|(a, b)| a * b).sum();
            let e = C64::from_polar(scale, phase);
            for l in 0..self.rank {
                out[l] += coeffs[q * self.rank + l] * e;
            }
        }
        out
    }

    /// Coefficients of the nodal delta at grid node p in fiber direction l
    /// (nodal value 1 at p, 0 elsewhere).
    pub fn nodal_delta(&self, node: usize, fiber: usize) -> Section {
        let w = self.torus.cell_volume();
        let x = self.torus.grid_point(node);
        let scale = w / self.torus.volume().sqrt();
        let mut out = Array1::<C64>::zeros(self.dim());
        for q in 0..self.n_modes() {
            let kap = self.kappa(&self.mode(q));
            let phase: f64 = kap.iter().zip(&x).map(|(a, b)| a * b).sum();
            out[q * self.rank + fiber] = C64::from_polar(scale, -phase);
        }
        out
    }

    /// Coefficients of the coordinate derivative d_j.
    pub fn derivative(&self, coeffs: &Section, j: usize) -> Section {
        let mut out = coeffs.clone();
        for q in 0..self.n_modes() {
            let kap = self.kappa(&self.mode(q))[j];
            for l in 0..self.rank {
                out[q * self.rank + l] *= C64::new(0.0, kap);
            }
        }
        out
    }

    /// Largest nodal amplitude outside the given sorted index set.
    pub fn max_outside(&self, coeffs: &Section, inside: &[usize]) -> f64 {
        let nodal = self.to_nodal(coeffs);
        let mut worst: f64 = 0.0;
        for p in 0..self.n_points() {
            if inside.binary_search(&p).is_err() {
                for l in 0..self.rank {
                    worst = worst.max(nodal[[p, l]].norm());
                }
            }
        }
        worst
    }

    /// Whether a mode set keeps |k|_inf <= bound.
    pub fn band_limited(&self, coeffs: &Section, bound: usize) -> bool {
        (0..self.n_modes()).all(|q| {
            let inside = self.mode(q).iter().all(|&v| v.unsigned_abs() as usize <= bound);
            inside || (0..self.rank).all(|l| coeffs[q * self.rank + l].norm() == 0.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_roundtrip() {
        let t = FlatTorus::standard(9);
        let b = FourierBasis::new(&t, 4, 2).unwrap();
        let mut c = Array1::<C64>::zeros(b.dim());
        for (i, z) in c.iter_mut().enumerate() {
            *z = C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos());
        }
        let back = b.from_nodal(&b.to_nodal(&c));
        let err: f64 = (&back - &c).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn delta_has_unit_nodal_value() {
        let t = FlatTorus::standard(11);
        let b = FourierBasis::new(&t, 5, 2).unwrap();
        let d = b.nodal_delta(17, 1);
        let v = b.to_nodal(&d);
        for p in 0..b.n_points() {
            let expect = if p == 17 { 1.0 } else { 0.0 };
            assert!((v[[p, 1]].re - expect).abs() < 1e-13 && v[[p, 0]].norm() < 1e-13);
        }
    }

    #[test]
    fn pointwise_matches_nodal() {
        let t = FlatTorus::standard(7);
        let b = FourierBasis::new(&t, 3, 1).unwrap();
        let mut c = Array1::<C64>::zeros(b.dim());
        c[5] = C64::new(1.0, 2.0);
        c[30] = C64::new(-0.5, 0.25);
        let nodal = b.to_nodal(&c);
        let x = b.torus().grid_point(12);
        assert!((b.evaluate(&c, &x)[0] - nodal[[12, 0]]).norm() < 1e-13);
    }
}
