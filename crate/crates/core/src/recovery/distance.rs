//! Travel-time distances from first arrivals of local waves.

use ndarray::Array2;

use super::local::LocalWaveData;
use crate::geometry::{FlatTorus, Region};
use crate::{LabError, Result, C64};

/// Arrival detection parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalParams {
    /// Threshold relative to the source's space-time L^2 norm.
    pub delta: f64,
    /// Duration of the sin^2 time pulse starting at t = 0.
    pub pulse: f64,
}

impl Default for ArrivalParams {
    fn default() -> Self {
        ArrivalParams { delta: 1e-2, pulse: 0.2 }
    }
}

/// Recovered distance with the probe that achieved it.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    pub probes: usize,
    pub dt: f64,
}

/// Infimal first-arrival time in B_eps(y) over pulses emitted from the nodes
/// of B_eps(x), both balls taken within O.
pub fn recover_distance(data: &LocalWaveData, x: &[f64], y: &[f64], eps: f64, params: ArrivalParams) -> Result<DistanceEstimate> {
    let src_nodes = data.nodes_in_ball(x, eps);
    let recv_nodes = data.nodes_in_ball(y, eps);
    if src_nodes.is_empty() || recv_nodes.is_empty() {
        return Err(LabError::InvalidParameter(format!("ball of radius {eps} contains no nodes of O")));
    }
    let rank = data.rank();
    let dt = data.dt;
    let steps = data.steps();
    let mut best: Option<usize> = None;
    let mut probes = 0;
    for &pos in &src_nodes {
        for fiber in 0..rank {
            let mut src = data.zero_source();
            for j in 0..=steps {
                let t = j as f64 * dt;
                if t < params.pulse {
                    let s = (std::f64::consts::PI * t / params.pulse).sin();
                    src.coeffs[[pos * rank + fiber, j]] = C64::new(s * s, 0.0);
                }
            }
            let threshold = params.delta * src.l2_norm(data.map.cell_volume());
            let field = data.map.apply(&src, &[0.0])?;
            probes += 1;
            let limit = best.unwrap_or(steps + 1);
            for j in 0..limit.min(steps + 1) {
                let peak = recv_nodes
                    .iter()
                    .flat_map(|&r| (0..rank).map(move |l| (r, l)))
                    .fold(0.0f64, |m, (r, l)| m.max(field.data[[r * rank + l, j]].norm()));
                if peak > threshold {
                    best = Some(j);
                    break;
                }
            }
        }
    }
    match best {
        Some(j) => Ok(DistanceEstimate { value: j as f64 * dt, probes, dt }),
        None => Err(LabError::NoArrival),
    }
}

/// Functions r_i = d(x_i, .)|_O sampled on O's nodes (rows = base points).
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceProfile {
    pub base: Vec<Vec<f64>>,
    pub nodes: Vec<usize>,
    pub values: Array2<f64>,
}

impl DistanceProfile {
    /// Profiles from the geodesic distance (reference values).
    pub fn from_geometry(torus: &FlatTorus, base: Vec<Vec<f64>>, region: &Region) -> Self {
        let mut values = Array2::zeros((base.len(), region.len()));
        for (i, x) in base.iter().enumerate() {
            for (j, &p) in region.indices.iter().enumerate() {
                values[[i, j]] = torus.geodesic_distance(x, &torus.grid_point(p));
            }
        }
        DistanceProfile { base, nodes: region.indices.clone(), values }
    }

    /// Profiles of base points in O recovered from local wave data.
    pub fn recover(data: &LocalWaveData, base_nodes: &[usize], eps: f64, params: ArrivalParams) -> Result<Self> {
        let n = data.region().len();
        let mut values = Array2::zeros((base_nodes.len(), n));
        for (i, &b) in base_nodes.iter().enumerate() {
            let x = data.node_point(b);
            for j in 0..n {
                values[[i, j]] = recover_distance(data, &x, &data.node_point(j), eps, params)?.value;
            }
        }
        let base = base_nodes.iter().map(|&b| data.node_point(b)).collect();
        Ok(DistanceProfile { base, nodes: data.region().indices.clone(), values })
    }

    /// Largest violation of r >= 0 and |r(y) - r(y')| <= d(y, y') + slack.
    pub fn lipschitz_violation(&self, torus: &FlatTorus, slack: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for row in self.values.rows() {
            for (a, &pa) in self.nodes.iter().enumerate() {
                worst = worst.max(-row[a]);
                for (b, &pb) in self.nodes.iter().enumerate().skip(a + 1) {
                    let d = torus.geodesic_distance(&torus.grid_point(pa), &torus.grid_point(pb));
                    worst = worst.max((row[a] - row[b]).abs() - d - slack);
                }
            }
        }
        worst
    }
}
