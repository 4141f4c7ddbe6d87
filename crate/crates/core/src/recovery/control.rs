//! Tikhonov controllability, fiber frames at a point and cut-time search,
//! all driven by Gram matrices of hat-family wave states.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use super::blago::{HatMember, ReferenceBank};
use super::local::LocalWaveData;
use crate::dirac::SpectralResolution;
use crate::geometry::{GeodesicRay, Region};
use crate::grid::Section;
use crate::linalg::{adjoint, cholesky_solve, eigh, max_abs};
use crate::wave::hat_response;
use crate::{LabError, Result, C64};

/// Hat family on the given node positions and fibers with lags
/// half, 2 half, ..., up to `max_lag` steps (temporal support (T - r, T)).
pub fn hat_family(positions: &[usize], fibers: &[usize], half: usize, max_lag: usize) -> Vec<HatMember> {
    let mut fam = Vec::new();
    for &pos in positions {
        for &fiber in fibers {
            let mut lag = half;
            while lag <= max_lag {
                fam.push(HatMember { pos, fiber, lag });
                lag += half;
            }
        }
    }
    fam
}

/// Tikhonov solution of min ||W f(T) - target||^2 + beta ||f||^2.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSolution {
    pub coeffs: Array1<C64>,
    pub residual: f64,
    pub beta: f64,
}

/// Solves (G + beta M) c = b with G the state Gram, M the source Gram and
/// b_a = <W f_a(T), target>.
pub fn controllability_solve(
    gram: &Array2<C64>,
    source_gram: &Array2<f64>,
    cross: &Array1<C64>,
    target_norm_sq: f64,
    beta: f64,
) -> Result<ControlSolution> {
    if !(beta > 0.0) {
        return Err(LabError::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let a = gram + &source_gram.mapv(|v| C64::new(beta * v, 0.0));
    let rhs = cross.clone().insert_axis(ndarray::Axis(1));
    let c = cholesky_solve(&a, &rhs).map_err(|_| LabError::SingularGram(beta))?.column(0).to_owned();
    let cb: C64 = c.iter().zip(cross).map(|(x, y)| x.conj() * y).sum();
    let gc = gram.dot(&c);
    let cgc: C64 = c.iter().zip(&gc).map(|(x, y)| x.conj() * y).sum();
    let r2 = target_norm_sq - 2.0 * cb.re + cgc.re;
    Ok(ControlSolution { coeffs: c, residual: r2.max(0.0).sqrt(), beta })
}

/// Verification-mode access to W f_a(T) for hat members via a global
/// resolution; not used by the local reconstruction itself.
pub struct GlobalStates<'a> {
    res: &'a SpectralResolution,
    dt: f64,
    half: usize,
    deltas: BTreeMap<(usize, usize), Array1<C64>>,
}

impl<'a> GlobalStates<'a> {
    pub fn new(res: &'a SpectralResolution, region: &Region, dt: f64, half: usize) -> Self {
        let basis = res.basis();
        let mut deltas = BTreeMap::new();
        for (pos, &p) in region.indices.iter().enumerate() {
            for l in 0..basis.rank() {
                deltas.insert((pos, l), res.to_eigen(&basis.nodal_delta(p, l)));
            }
        }
        GlobalStates { res, dt, half, deltas }
    }

    /// Eigen-coefficients of W f(T) for a combination of members.
    pub fn state_eigen(&self, fam: &[HatMember], coeffs: &Array1<C64>) -> Array1<C64> {
        let lams = self.res.eigenvalues();
        let h = self.half as f64 * self.dt;
        let mut out = Array1::<C64>::zeros(self.res.dim());
        for (m, &c) in fam.iter().zip(coeffs) {
            let d = &self.deltas[&(m.pos, m.fiber)];
            let tau = m.lag as f64 * self.dt;
            for k in 0..out.len() {
                out[k] += c * d[k] * hat_response(lams[k], tau, h);
            }
        }
        out
    }

    /// b_a = <W f_a(T), target> for every member.
    pub fn cross_terms(&self, fam: &[HatMember], target: &Section) -> Array1<C64> {
        let t = self.res.to_eigen(target);
        let lams = self.res.eigenvalues();
        let h = self.half as f64 * self.dt;
        fam.iter()
            .map(|m| {
                let d = &self.deltas[&(m.pos, m.fiber)];
                let tau = m.lag as f64 * self.dt;
                (0..t.len()).map(|k| (d[k] * hat_response(lams[k], tau, h)).conj() * t[k]).sum()
            })
            .collect()
    }

    pub fn section(&self, eigen: &Array1<C64>) -> Section {
        self.res.from_eigen(eigen)
    }
}

/// Parameters of the fiber-frame construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberBasisParams {
    /// Width of the Gaussian target bump (value 1 at the point).
    pub sigma: f64,
    /// Temporal support length r of the controls.
    pub reach: f64,
    pub beta: f64,
    /// Hat half-width in time steps.
    pub half: usize,
}

/// Frame at a point: control coefficients, Gram reports and rank.
#[derive(Clone, Debug)]
pub struct FiberBasisReport {
    pub family: Vec<HatMember>,
    pub controls: Vec<Array1<C64>>,
    pub residuals: Vec<f64>,
    /// Normalized identity-based Gram of the raw controls.
    pub local_gram: Array2<C64>,
    /// True pointwise Gram of the orthonormalized frame at x.
    pub pointwise_gram: Array2<C64>,
    pub deviation: f64,
    pub rank: usize,
}

/// Gaussian bump at x in fiber direction l, built from nodal values.
pub fn bump_target(res: &SpectralResolution, x: &[f64], sigma: f64, fiber: usize) -> Section {
    let basis = res.basis();
    let torus = basis.torus();
    let mut nodal = Array2::<C64>::zeros((basis.n_points(), basis.rank()));
    for p in 0..basis.n_points() {
        let d = torus.geodesic_distance(x, &torus.grid_point(p));
        nodal[[p, fiber]] = C64::new((-0.5 * d * d / (sigma * sigma)).exp(), 0.0);
    }
    basis.from_nodal(&nodal)
}

/// Controls g_l steering toward bump targets at x, orthonormalized with
/// the identity Gram; the verification oracle evaluates W g_l(T)(x).
pub fn fiber_basis_at_point(
    data: &LocalWaveData,
    oracle: &GlobalStates,
    x: &[f64],
    params: FiberBasisParams,
) -> Result<FiberBasisReport> {
    let dist = data.region().distance_from(&data.chart, x);
    if dist >= data.half_horizon {
        return Err(LabError::Unreachable { dist, t: data.half_horizon });
    }
    if params.reach > data.half_horizon + 1e-12 {
        return Err(LabError::InvalidParameter(format!("reach {} exceeds T = {}", params.reach, data.half_horizon)));
    }
    let rank = data.rank();
    let positions: Vec<usize> = (0..data.region().len()).collect();
    let fibers: Vec<usize> = (0..rank).collect();
    let keys: Vec<(usize, usize)> = positions.iter().flat_map(|&p| fibers.iter().map(move |&l| (p, l))).collect();
    let bank = ReferenceBank::build(data, &keys, params.half)?;
    let max_lag = ((params.reach / data.dt).round() as usize).min(data.half_steps()) - params.half;
    let family = hat_family(&positions, &fibers, params.half, max_lag);
    let gram = bank.gram_hermitian(&family)?;
    let mass = bank.source_gram(&family);
    let mut controls = Vec::with_capacity(rank);
    let mut residuals = Vec::with_capacity(rank);
    let mut target_norm_sq = 0.0;
    for l in 0..rank {
        let target = bump_target(oracle.res, x, params.sigma, l);
        target_norm_sq = target.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let cross = oracle.cross_terms(&family, &target);
        let sol = controllability_solve(&gram, &mass, &cross, target_norm_sq, params.beta)?;
        residuals.push(sol.residual / target_norm_sq.sqrt());
        controls.push(sol.coeffs);
    }
    // Identity-based Gram of the controls, scaled by the target norm.
    let mut cmat = Array2::<C64>::zeros((family.len(), rank));
    for (l, c) in controls.iter().enumerate() {
        cmat.column_mut(l).assign(c);
    }
    let local_gram = adjoint(&cmat.view()).dot(&gram.dot(&cmat)) / C64::new(target_norm_sq, 0.0);
    let (vals, vecs) = eigh(&local_gram)?;
    let top = vals.iter().cloned().fold(0.0f64, f64::max);
    let numerical_rank = vals.iter().filter(|&&v| v > 1e-6 * top).count();
    if numerical_rank < rank {
        return Err(LabError::RankDeficient { rank: numerical_rank, expected: rank });
    }
    let inv_sqrt = Array2::from_diag(&vals.mapv(|v| C64::new(v.powf(-0.5), 0.0)));
    let lowdin = vecs.dot(&inv_sqrt).dot(&adjoint(&vecs.view()));
    let frame = cmat.dot(&lowdin);
    // Verification: pointwise values W g_l(T)(x).
    let basis = oracle.res.basis();
    let mut vals_at_x = Array2::<C64>::zeros((rank, rank));
    for l in 0..rank {
        let state = oracle.section(&oracle.state_eigen(&family, &frame.column(l).to_owned()));
        vals_at_x.column_mut(l).assign(&basis.evaluate(&state, x));
    }
    let pointwise_gram = adjoint(&vals_at_x.view()).dot(&data.fiber_metric.dot(&vals_at_x));
    let deviation = max_abs(&(&pointwise_gram - &crate::linalg::eye(rank)).view());
    Ok(FiberBasisReport {
        family,
        controls: (0..rank).map(|l| frame.column(l).to_owned()).collect(),
        residuals,
        local_gram,
        pointwise_gram,
        deviation,
        rank: numerical_rank,
    })
}

/// Parameters of the cut-time search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutTimeParams {
    /// Radius of the emitting balls around y and around x = gamma(s).
    pub probe_radius: f64,
    /// Arc length s of the resolvable geodesic piece inside O.
    pub arc: f64,
    /// Excess radius epsilon of the tested ball B_{r + eps}(x).
    pub excess: f64,
    /// Inclusion is declared when the projection defect is at most this.
    pub threshold: f64,
    pub beta: f64,
    pub half: usize,
    /// Search grid for l = s + r.
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Single fiber used by the emitting families.
    pub fiber: usize,
}

/// Statistic per grid value and the recovered infimum.
#[derive(Clone, Debug, PartialEq)]
pub struct CutTimeReport {
    pub value: f64,
    pub grid_step: f64,
    pub statistics: Vec<(f64, f64)>,
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
fn spectral_norm_estimate(g: &Array2<C64>) -> f64 {
    let n = g.nrows();
    let mut v = Array1::from_elem(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut est = 0.0;
    for _ in 0..50 {
        let w = g.dot(&v);
        let norm = crate::linalg::vec_norm(&w);
        if norm == 0.0 {
            return 0.0;
        }
        est = norm;
        v = w / C64::new(norm, 0.0);
    }
    est
}

/// Projection defect ||(P_big - P_l) Q|| of the orthonormalized test span Q
/// from Gram blocks only.
fn projection_defect(
    g: &Array2<C64>,
    a: &[usize],
    b: &[usize],
    t: &[usize],
    beta: f64,
) -> Result<f64> {
    let sub = |r: &[usize], c: &[usize]| {
        Array2::from_shape_fn((r.len(), c.len()), |(i, j)| g[[r[i], c[j]]])
    };
    let gtt = sub(t, t);
    let (vals, vecs) = eigh(&gtt)?;
    let top = vals.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-6 * top).collect();
    let w = Array2::from_shape_fn((t.len(), keep.len()), |(i, j)| vecs[[i, keep[j]]] / vals[keep[j]].sqrt());
    let solve = |s: &[usize]| -> Result<(Array2<C64>, Array2<C64>)> {
        let gss = sub(s, s);
        let scale = spectral_norm_estimate(&gss);
        let mut reg = gss.clone();
        for i in 0..s.len() {
            reg[[i, i]] += C64::new(beta * scale, 0.0);
        }
        let x = cholesky_solve(&reg, &sub(s, t).dot(&w)).map_err(|_| LabError::SingularGram(beta))?;
        Ok((gss, x))
    };
    let (gaa, xa) = solve(a)?;
    let (gbb, xb) = solve(b)?;
    let gab = sub(a, b);
    let xa_h = adjoint(&xa.view());
    let xb_h = adjoint(&xb.view());
    let cross = xa_h.dot(&gab).dot(&xb);
    let m = xa_h.dot(&gaa).dot(&xa) - &cross - adjoint(&cross.view()) + xb_h.dot(&gbb).dot(&xb);
    let (ev, _) = eigh(&m)?;
    Ok(ev.iter().cloned().fold(0.0f64, f64::max).max(0.0).sqrt())
}

/// Smallest l = s + r on the search grid for which B_{r + eps}(gamma(s)) is
/// decided to lie in the closed ball of radius l about y.
pub fn recover_cut_time(data: &LocalWaveData, ray: &GeodesicRay, params: CutTimeParams) -> Result<CutTimeReport> {
    let y = ray.base.clone();
    let x = ray.point(&data.chart, params.arc);
    let ynodes = data.nodes_in_ball(&y, params.probe_radius);
    let xnodes = data.nodes_in_ball(&x, params.probe_radius);
    if ynodes.is_empty() || xnodes.is_empty() {
        return Err(LabError::InvalidParameter("probe balls contain no nodes of O".into()));
    }
    let dt = data.dt;
    let half = params.half;
    let h = half as f64 * dt;
    let n = data.half_steps();
    let max_lag = n - half;
    let lag_cap = |reach: f64| -> usize {
        let w = reach - params.probe_radius;
        let m = ((w / h) + 1e-9).floor().max(1.0) as usize;
        (m * half).min(max_lag)
    };
    let fiber = [params.fiber];
    let big = hat_family(&ynodes, &fiber, half, max_lag);
    let test_max = hat_family(&xnodes, &fiber, half, lag_cap(params.stop - params.arc + params.excess));
    let mut all = big.clone();
    all.extend_from_slice(&test_max);
    let mut keys: Vec<(usize, usize)> = all.iter().map(|m| (m.pos, m.fiber)).collect();
    keys.sort_unstable();
    keys.dedup();
    let bank = ReferenceBank::build(data, &keys, half)?;
    let g = bank.gram_hermitian(&all)?;
    let b_idx: Vec<usize> = (0..big.len()).collect();
    let mut statistics = Vec::new();
    let mut found = None;
    let steps = ((params.stop - params.start) / params.step).round() as usize;
    for i in 0..=steps {
        let ell = params.start + i as f64 * params.step;
        let a_cap = lag_cap(ell);
        let t_cap = lag_cap(ell - params.arc + params.excess);
        let a_idx: Vec<usize> = (0..big.len()).filter(|&k| big[k].lag <= a_cap).collect();
        let t_idx: Vec<usize> =
            (0..test_max.len()).filter(|&k| test_max[k].lag <= t_cap).map(|k| big.len() + k).collect();
        let v = projection_defect(&g, &a_idx, &b_idx, &t_idx, params.beta)?;
        statistics.push((ell, v));
        if v <= params.threshold {
            found = Some(ell);
            break;
        }
    }
    match found {
        Some(value) => Ok(CutTimeReport { value, grid_step: params.step, statistics }),
        None => Err(LabError::SearchExhausted),
    }
}
