//! Flat tori, geodesic balls, distances, cut times and causal sets.

use ndarray::Array2;

use crate::linalg::cholesky_real;
use crate::{LabError, Result};

/// Lattice translates searched per axis in `geodesic_distance`.
pub const TRANSLATE_BOUND: i64 = 3;
/// Largest unit-cell condition number for which `TRANSLATE_BOUND` is sufficient.
pub const MAX_CELL_CONDITION: f64 = 9.0;

/// Flat torus R^m / (P_1 Z x ... x P_m Z) with a constant metric and an N^m grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatTorus {
    m: usize,
    periods: Vec<f64>,
    metric: Array2<f64>,
    n: usize,
}

impl FlatTorus {
    pub fn new(periods: Vec<f64>, metric: Array2<f64>, n: usize) -> Result<Self> {
        let m = periods.len();
        if m == 0 {
            return Err(LabError::InvalidParameter("torus needs at least one period".into()));
        }
        if metric.dim() != (m, m) {
            return Err(LabError::DimensionMismatch { expected: m, got: metric.nrows() });
        }
        if periods.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(LabError::InvalidParameter("periods must be positive".into()));
        }
        if n < 4 {
            return Err(LabError::InvalidParameter(format!("grid resolution N = {n} < 4")));
        }
        for i in 0..m {
            for j in 0..m {
                if (metric[[i, j]] - metric[[j, i]]).abs() > 1e-14 * metric[[i, i]].abs().max(1.0) {
                    return Err(LabError::InvalidParameter("metric is not symmetric".into()));
                }
            }
        }
        cholesky_real(&metric)?;
        let torus = FlatTorus { m, periods, metric, n };
        let cond = torus.cell_condition();
        if cond > MAX_CELL_CONDITION {
            return Err(LabError::InvalidParameter(format!(
                "unit-cell condition number {cond:.3} exceeds {MAX_CELL_CONDITION} (translate search bound)"
            )));
        }
        Ok(torus)
    }

    /// The 2-torus with periods 2 pi, Euclidean metric and N points per axis.
    pub fn standard(n: usize) -> Self {
        let p = 2.0 * std::f64::consts::PI;
        FlatTorus::new(vec![p, p], Array2::eye(2), n).expect("standard torus is valid")
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn metric(&self) -> &Array2<f64> {
        &self.metric
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    pub fn n_points(&self) -> usize {
        self.n.pow(self.m as u32)
    }

    /// Riemannian volume P_1...P_m sqrt(det G).
    pub fn volume(&self) -> f64 {
        self.periods.iter().product::<f64>() * crate::linalg::det_small(&self.metric).sqrt()
    }

    /// Quadrature weight of one grid node.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.n_points() as f64
    }

    fn cell_condition(&self) -> f64 {
        let mut h = self.metric.clone();
        for i in 0..self.m {
            for j in 0..self.m {
                h[[i, j]] *= self.periods[i] * self.periods[j];
            }
        }
        let (w, _) = crate::linalg::eigh(&h.mapv(|x| crate::C64::new(x, 0.0))).expect("eigh of small SPD");
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.iter().cloned().fold(0.0, f64::max);
        hi / lo
    }

    /// Canonical representative in [0, P_i).
    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.periods)
            .map(|(&v, &p)| {
                let r = v.rem_euclid(p);
                if r >= p {
                    0.0
                } else {
                    r
                }
            })
            .collect()
    }

    /// Multi-index of a flattened grid index (axis 0 slowest).
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.m];
        let mut r = idx;
        for a in (0..self.m).rev() {
            out[a] = r % self.n;
            r /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.n + (i % self.n))
    }

    pub fn grid_point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx)
            .iter()
            .zip(&self.periods)
            .map(|(&i, &p)| i as f64 * p / self.n as f64)
            .collect()
    }

    /// Squared G-length of a coordinate displacement.
    pub fn norm_sq(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                s += v[i] * self.metric[[i, j]] * v[j];
            }
        }
        s
    }

    /// Shortest displacement from x to y among lattice translates.
    pub fn displacement(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let base: Vec<f64> = (0..self.m)
            .map(|i| {
                let p = self.periods[i];
                let d = (y[i] - x[i]).rem_euclid(p);
                if d > p / 2.0 {
                    d - p
                } else {
                    d
                }
            })
            .collect();
        let span = (2 * TRANSLATE_BOUND + 1) as usize;
        let mut best = base.clone();
        let mut best_len = f64::INFINITY;
        let mut v = base.clone();
        for code in 0..span.pow(self.m as u32) {
            let mut c = code;
            for i in 0..self.m {
                let shift = (c % span) as i64 - TRANSLATE_BOUND;
                c /= span;
                v[i] = base[i] + shift as f64 * self.periods[i];
            }
            let len = self.norm_sq(&v);
            if len < best_len {
                best_len = len;
                best.copy_from_slice(&v);
            }
        }
        best
    }

    pub fn geodesic_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.norm_sq(&self.displacement(x, y)).sqrt()
    }

    /// Largest distance from a point, found on the grid refined by 4.
    pub fn diameter(&self) -> f64 {
        let fine = FlatTorus { n: self.n * 4, ..self.clone() };
        let origin = vec![0.0; self.m];
        (0..fine.n_points())
            .map(|i| fine.geodesic_distance(&origin, &fine.grid_point(i)))
            .fold(0.0, f64::max)
    }

    /// Grid spacing along each axis, measured in G-length.
    pub fn spacing(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.periods[i] / self.n as f64 * self.metric[[i, i]].sqrt())
            .collect()
    }
}

/// Open geodesic ball with its resolved grid-index set.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub center: Vec<f64>,
    pub radius: f64,
    pub indices: Vec<usize>,
}

impl Region {
    pub fn ball(torus: &FlatTorus, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != torus.dim() {
            return Err(LabError::DimensionMismatch { expected: torus.dim(), got: center.len() });
        }
        if !(radius >= 0.0) {
            return Err(LabError::InvalidParameter(format!("radius {radius} < 0")));
        }
        let center = torus.reduce(center);
        let indices = (0..torus.n_points())
            .filter(|&i| torus.geodesic_distance(&center, &torus.grid_point(i)) < radius)
            .collect();
        Ok(Region { center, radius, indices })
    }

    pub fn contains_index(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    /// d_g(x, O) for the open ball O.
    pub fn distance_from(&self, torus: &FlatTorus, x: &[f64]) -> f64 {
        (torus.geodesic_distance(&self.center, x) - self.radius).max(0.0)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Unit-speed geodesic t -> y + t xi.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicRay {
    pub base: Vec<f64>,
    pub direction: Vec<f64>,
}

impl GeodesicRay {
    pub fn new(torus: &FlatTorus, base: &[f64], direction: &[f64]) -> Result<Self> {
        if base.len() != torus.dim() || direction.len() != torus.dim() {
            return Err(LabError::DimensionMismatch { expected: torus.dim(), got: direction.len() });
        }
        let len2 = torus.norm_sq(direction);
        if (len2 - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidParameter(format!(
                "ray direction not unit: |xi|_G^2 = {len2}"
            )));
        }
        Ok(GeodesicRay { base: torus.reduce(base), direction: direction.to_vec() })
    }

    /// Ray with the direction rescaled to unit G-length.
    pub fn normalized(torus: &FlatTorus, base: &[f64], direction: &[f64]) -> Result<Self> {
        let len = torus.norm_sq(direction).sqrt();
        if len == 0.0 {
            return Err(LabError::InvalidParameter("zero ray direction".into()));
        }
        let unit: Vec<f64> = direction.iter().map(|v| v / len).collect();
        GeodesicRay::new(torus, base, &unit)
    }

    pub fn point(&self, torus: &FlatTorus, t: f64) -> Vec<f64> {
        let p: Vec<f64> = self.base.iter().zip(&self.direction).map(|(b, d)| b + t * d).collect();
        torus.reduce(&p)
    }
}

fn minimizing(torus: &FlatTorus, ray: &GeodesicRay, t: f64) -> bool {
    let d = torus.geodesic_distance(&ray.base, &ray.point(torus, t));
    d >= t - 1e-11 * t.max(1.0)
}

/// tau(y, xi) = sup{t > 0 : d(y, gamma(t)) = t}, by scan and bisection.
pub fn cut_time(torus: &FlatTorus, ray: &GeodesicRay) -> f64 {
    let step = torus.spacing().iter().cloned().fold(f64::INFINITY, f64::min) / 8.0;
    let limit = 2.0 * torus.diameter() + 1.0;
    let mut lo = 0.0;
    let mut hi = step;
    while minimizing(torus, ray, hi) {
        lo = hi;
        hi += step;
        assert!(hi < limit, "cut time scan exceeded twice the diameter");
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if minimizing(torus, ray, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// M(T, O) = {x : d(x, O) <= T} on the grid.
pub fn domain_of_dependence(torus: &FlatTorus, region: &Region, t: f64) -> Result<Vec<usize>> {
    if t < 0.0 {
        return Err(LabError::NegativeTime(t));
    }
    Ok((0..torus.n_points())
        .filter(|&i| region.distance_from(torus, &torus.grid_point(i)) <= t + 1e-12)
        .collect())
}

/// Slices of C(T, O) = {(t, x) : 0 < t < 2T, d(x, O) <= min(t, 2T - t)} at the given times.
pub fn double_cone(
    torus: &FlatTorus,
    region: &Region,
    t_half: f64,
    times: &[f64],
) -> Result<Vec<Vec<usize>>> {
    if !(t_half > 0.0) {
        return Err(LabError::InvalidParameter(format!("double cone needs T > 0, got {t_half}")));
    }
    let dist: Vec<f64> =
        (0..torus.n_points()).map(|i| region.distance_from(torus, &torus.grid_point(i))).collect();
    Ok(times
        .iter()
        .map(|&t| {
            if t <= 0.0 || t >= 2.0 * t_half {
                return Vec::new();
            }
            let reach = t.min(2.0 * t_half - t);
            (0..dist.len()).filter(|&i| dist[i] <= reach + 1e-12).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn distance_examples() {
        let t = FlatTorus::standard(16);
        assert_eq!(t.geodesic_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((t.geodesic_distance(&[0.0, 0.0], &[PI, 0.0]) - PI).abs() < 1e-15);
        assert!((t.geodesic_distance(&[0.0, 0.0], &[1.5 * PI, 0.0]) - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn cut_time_examples() {
        let t = FlatTorus::standard(16);
        let axis = GeodesicRay::new(&t, &[0.3, 1.0], &[1.0, 0.0]).unwrap();
        assert!((cut_time(&t, &axis) - PI).abs() < 1e-8);
        let diag = GeodesicRay::normalized(&t, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((cut_time(&t, &diag) - PI * 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_tori() {
        assert!(FlatTorus::new(vec![1.0, -1.0], Array2::eye(2), 8).is_err());
        assert!(FlatTorus::new(vec![1.0, 1.0], Array2::eye(2), 3).is_err());
        let bad = ndarray::arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(FlatTorus::new(vec![1.0, 1.0], bad, 8).is_err());
        let skewed = ndarray::arr2(&[[20.0, 0.0], [0.0, 1.0]]);
        assert!(FlatTorus::new(vec![1.0, 1.0], skewed, 8).is_err());
    }

    #[test]
    fn ray_must_be_unit() {
        let t = FlatTorus::standard(8);
        assert!(GeodesicRay::new(&t, &[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn double_cone_slices() {
        let t = FlatTorus::standard(24);
        let o = Region::ball(&t, &[0.0, 0.0], 0.5).unwrap();
        let slices = double_cone(&t, &o, 2.0, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(slices[1], domain_of_dependence(&t, &o, 2.0).unwrap());
        assert_eq!(slices[0], domain_of_dependence(&t, &o, 1.0).unwrap());
        assert_eq!(slices[0], slices[2]);
        assert!(slices[3].is_empty());
    }
}
