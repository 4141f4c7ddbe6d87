//! Local wave data: sources supported in a region O and the map f -> u|_O.

use ndarray::{Array1, Array2};

use crate::geometry::{FlatTorus, Region};
use crate::grid::FourierBasis;
use crate::dirac::SpectralResolution;
use crate::wave::{local_field, LocalField, SpaceTimeSource};
use crate::{LabError, Result, C64};

/// Gauss-Legendre nodes on [0, 1] (4 points).
pub const GL_NODES: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_87,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
/// Matching weights (sum to 1).
pub const GL_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// Space-time source supported on the nodes of a region, piecewise linear in
/// time: rows are (node position in O) * rank + fiber, columns are time nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSource {
    pub dt: f64,
    pub rank: usize,
    pub coeffs: Array2<C64>,
}

impl LocalSource {
    pub fn zeros(n_nodes: usize, rank: usize, dt: f64, steps: usize) -> Self {
        LocalSource { dt, rank, coeffs: Array2::zeros((n_nodes * rank, steps + 1)) }
    }

    pub fn steps(&self) -> usize {
        self.coeffs.ncols() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.coeffs.nrows() / self.rank
    }

    /// Unit time hat of half-width `half` steps centred at step `center`.
    pub fn add_hat(&mut self, pos: usize, fiber: usize, center: usize, half: usize, amp: C64) {
        let row = pos * self.rank + fiber;
        let lo = center.saturating_sub(half);
        let hi = (center + half).min(self.steps());
        for j in lo..=hi {
            let v = 1.0 - (j as f64 - center as f64).abs() / half as f64;
            if v > 0.0 {
                self.coeffs[[row, j]] += amp * v;
            }
        }
    }

    /// Global section-valued source on the Fourier basis.
    pub fn to_space_time(&self, basis: &FourierBasis, region: &Region) -> Result<SpaceTimeSource> {
        if self.n_nodes() != region.len() || self.rank != basis.rank() {
            return Err(LabError::DimensionMismatch { expected: region.len() * basis.rank(), got: self.coeffs.nrows() });
        }
        let mut values = Vec::with_capacity(self.steps() + 1);
        for j in 0..=self.steps() {
            let mut nodal = Array2::<C64>::zeros((basis.n_points(), basis.rank()));
            let mut any = false;
            for (i, &p) in region.indices.iter().enumerate() {
                for l in 0..self.rank {
                    let v = self.coeffs[[i * self.rank + l, j]];
                    if v != C64::new(0.0, 0.0) {
                        any = true;
                    }
                    nodal[[p, l]] = v;
                }
            }
            values.push(if any { basis.from_nodal(&nodal) } else { Array1::zeros(basis.dim()) });
        }
        SpaceTimeSource::new(self.dt, values)
    }

    /// Space-time L^2 norm (cell-weighted, exact for the linear interpolant).
    pub fn l2_norm(&self, cell_volume: f64) -> f64 {
        let mut acc = 0.0;
        for row in self.coeffs.rows() {
            for j in 0..self.steps() {
                let (a, b) = (row[j], row[j + 1]);
                acc += self.dt * (a.norm_sqr() + b.norm_sqr() + (a.conj() * b).re) / 3.0;
            }
        }
        (acc * cell_volume).sqrt()
    }
}

/// The local source-to-solution map L^wave on a region O. Implementations
/// expose nothing beyond O's nodes, fiber rank and cell volume.
pub trait LocalWaveMap {
    fn region(&self) -> &Region;
    fn rank(&self) -> usize;
    fn cell_volume(&self) -> f64;
    /// u|_O at samples t_i + xi_q dt for panels i and offsets xi_q, then t_M.
    fn apply(&self, f: &LocalSource, offsets: &[f64]) -> Result<LocalField>;
}

/// L^wave computed from a global spectral resolution.
pub struct SpectralWaveMap<'a> {
    res: &'a SpectralResolution,
    region: Region,
}

impl<'a> SpectralWaveMap<'a> {
    pub fn new(res: &'a SpectralResolution, region: Region) -> Self {
        SpectralWaveMap { res, region }
    }
}

impl LocalWaveMap for SpectralWaveMap<'_> {
    fn region(&self) -> &Region {
        &self.region
    }

    fn rank(&self) -> usize {
        self.res.basis().rank()
    }

    fn cell_volume(&self) -> f64 {
        self.res.basis().torus().cell_volume()
    }

    fn apply(&self, f: &LocalSource, offsets: &[f64]) -> Result<LocalField> {
        let src = f.to_space_time(self.res.basis(), &self.region)?;
        Ok(local_field(self.res, &self.region, &src, offsets))
    }
}

/// Opaque wrapper: only the trait surface of the inner map is reachable.
pub struct SealedWaveMap<'a> {
    inner: Box<dyn LocalWaveMap + 'a>,
}

impl<'a> SealedWaveMap<'a> {
    pub fn new(inner: impl LocalWaveMap + 'a) -> Self {
        SealedWaveMap { inner: Box::new(inner) }
    }
}

impl LocalWaveMap for SealedWaveMap<'_> {
    fn region(&self) -> &Region {
        self.inner.region()
    }

    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn cell_volume(&self) -> f64 {
        self.inner.cell_volume()
    }

    fn apply(&self, f: &LocalSource, offsets: &[f64]) -> Result<LocalField> {
        self.inner.apply(f, offsets)
    }
}

/// (O, g|_O, h_E|_O, L^wave) on the horizon [0, 2T] with a uniform step.
pub struct LocalWaveData<'a> {
    pub map: &'a dyn LocalWaveMap,
    /// Flat chart for displacements between points of O (metric g|_O).
    pub chart: FlatTorus,
    pub fiber_metric: Array2<C64>,
    pub half_horizon: f64,
    pub dt: f64,
}

impl<'a> LocalWaveData<'a> {
    pub fn new(map: &'a dyn LocalWaveMap, chart: FlatTorus, half_horizon: f64, dt: f64) -> Result<Self> {
        let n = half_horizon / dt;
        if !(dt > 0.0) || (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(LabError::TimeGridMismatch(format!("T = {half_horizon} is not a positive multiple of dt = {dt}")));
        }
        let fiber_metric = crate::linalg::eye(map.rank());
        Ok(LocalWaveData { map, chart, fiber_metric, half_horizon, dt })
    }

    pub fn region(&self) -> &Region {
        self.map.region()
    }

    pub fn rank(&self) -> usize {
        self.map.rank()
    }

    /// Steps in [0, T].
    pub fn half_steps(&self) -> usize {
        (self.half_horizon / self.dt).round() as usize
    }

    /// Steps in [0, 2T].
    pub fn steps(&self) -> usize {
        2 * self.half_steps()
    }

    pub fn node_point(&self, pos: usize) -> Vec<f64> {
        self.chart.grid_point(self.region().indices[pos])
    }

    /// Positions (within O) of nodes in the open ball B_r(c).
    pub fn nodes_in_ball(&self, c: &[f64], r: f64) -> Vec<usize> {
        (0..self.region().len())
            .filter(|&i| self.chart.geodesic_distance(c, &self.node_point(i)) < r)
            .collect()
    }

    pub fn zero_source(&self) -> LocalSource {
        LocalSource::zeros(self.region().len(), self.rank(), self.dt, self.steps())
    }

    pub fn check_source(&self, f: &LocalSource) -> Result<()> {
        if f.n_nodes() != self.region().len() || f.rank != self.rank() {
            return Err(LabError::DimensionMismatch { expected: self.region().len() * self.rank(), got: f.coeffs.nrows() });
        }
        if f.steps() != self.steps() || (f.dt - self.dt).abs() > 1e-14 * self.dt {
            return Err(LabError::TimeGridMismatch(format!(
                "source has {} steps of {}, data has {} steps of {}",
                f.steps(),
                f.dt,
                self.steps(),
                self.dt
            )));
        }
        Ok(())
    }

    /// Max deviation between the stored map and a global solve on a source.
    pub fn construction_check(&self, res: &SpectralResolution, f: &LocalSource) -> Result<f64> {
        let local = self.map.apply(f, &[0.0])?;
        let global = local_field(res, self.region(), &f.to_space_time(res.basis(), self.region())?, &[0.0]);
        Ok((&local.data - &global.data).iter().fold(0.0f64, |m, z| m.max(z.norm())))
    }
}

/// J phi(t) = 1/2 int_t^{2T-t} phi(s) ds on the grid t_i = i ds (trapezoid);
/// phi is sampled on [0, 2T] with an odd number of points.
pub fn time_average_j(phi: &[C64], ds: f64, half_horizon: f64) -> Result<Vec<C64>> {
    if phi.len() % 2 == 0 || phi.len() < 3 {
        return Err(LabError::TimeGridMismatch(format!("{} samples do not cover [0, 2T] symmetrically", phi.len())));
    }
    let n = (phi.len() - 1) / 2;
    if ((n as f64) * ds - half_horizon).abs() > 1e-9 * half_horizon.max(1.0) {
        return Err(LabError::TimeGridMismatch(format!("{n} steps of {ds} do not reach T = {half_horizon}")));
    }
    let mut cum = vec![C64::new(0.0, 0.0); phi.len()];
    for i in 1..phi.len() {
        cum[i] = cum[i - 1] + (phi[i - 1] + phi[i]) * (0.5 * ds);
    }
    Ok((0..=n).map(|i| (cum[2 * n - i] - cum[i]) * 0.5).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_of_constant_and_linear() {
        let ds = 0.01;
        let ones = vec![C64::new(1.0, 0.0); 201];
        let j = time_average_j(&ones, ds, 1.0).unwrap();
        for (i, v) in j.iter().enumerate() {
            assert!((v.re - (1.0 - i as f64 * ds)).abs() < 1e-12);
        }
        let lin: Vec<C64> = (0..201).map(|i| C64::new(i as f64 * ds, 0.0)).collect();
        let j = time_average_j(&lin, ds, 1.0).unwrap();
        assert!((j[30].re - 1.0 * (1.0 - 0.3)).abs() < 1e-12);
        assert!(j[100].norm() < 1e-15);
    }

    #[test]
    fn j_rejects_even_grid() {
        assert!(time_average_j(&[C64::new(1.0, 0.0); 4], 0.1, 0.15).is_err());
    }

    #[test]
    fn gauss_legendre_exact_degree_seven() {
        let v: f64 = GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * x.powi(7)).sum();
        assert!((v - 1.0 / 8.0).abs() < 1e-15);
    }
}
