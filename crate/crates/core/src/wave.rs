//! Wave equation (d_t^2 + Delta) u = f with zero Cauchy data, solved exactly
//! per eigenmode for sources that are piecewise linear in time.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::dirac::SpectralResolution;
use crate::geometry::Region;
use crate::grid::{FourierBasis, Section};
use crate::linalg::vec_norm;
use crate::{LabError, Result, C64};

/// sin(lam a) / lam, continuous at lam = 0.
pub fn sdiv(lam: f64, a: f64) -> f64 {
    let x = lam * a;
    if x.abs() < 1e-4 {
        a * (1.0 - x * x / 6.0)
    } else {
        x.sin() / lam
    }
}

/// K1(tau) = int_0^tau sin(lam s)/lam ds = (1 - cos lam tau)/lam^2.
pub fn k1(lam: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let s = sdiv(lam, tau / 2.0);
    2.0 * s * s
}

/// (x - 2 sin(x/2)) / x^3.
fn psi3(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        1.0 / 24.0 - x2 / 1920.0 + x2 * x2 / 322_560.0 - x2 * x2 * x2 / 92_897_280.0
    } else {
        (x - 2.0 * (x / 2.0).sin()) / (x * x * x)
    }
}

/// K2(tau) = (lam tau - sin lam tau)/lam^3, the second antiderivative of the kernel.
pub fn k2(lam: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let x = lam * tau;
    if x.abs() < 0.1 {
        let x2 = x * x;
        tau * tau * tau * (1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0 - x2 * x2 * x2 / 362_880.0)
    } else {
        (x - x.sin()) / (lam * lam * lam)
    }
}

/// K2(t1) - K2(t2) for t1 >= t2 >= 0 without cancellation.
pub fn k2_diff(lam: f64, t1: f64, t2: f64) -> f64 {
    let d = t1 - t2;
    let mid = 0.5 * (t1 + t2);
    let s = sdiv(lam, mid / 2.0);
    2.0 * d * s * s + (lam * mid).cos() * d * d * d * psi3(lam * d)
}

/// Response at lag tau to a unit hat of half-width h centred at lag 0.
pub fn hat_response(lam: f64, tau: f64, h: f64) -> f64 {
    if tau <= -h {
        0.0
    } else if tau < 0.0 {
        k2(lam, tau + h) / h
    } else if tau < h {
        (k2_diff(lam, tau + h, tau) - k2(lam, tau)) / h
    } else {
        let s = sdiv(lam, h / 2.0);
        4.0 / h * sdiv(lam, tau) * s * s
    }
}

/// Response at time tau to the half hat 1 - s/h on [0, h].
pub fn half_hat_response(lam: f64, tau: f64, h: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        k1(lam, tau) - k2_diff(lam, tau, (tau - h).max(0.0)) / h
    }
}

/// Exact Duhamel integral int_0^t sin(lam (t-s))/lam psi(s) ds for psi piecewise
/// linear through samples psi_j at s = j dt.
pub fn modal_duhamel(lam: f64, psi: &[C64], dt: f64, t: f64) -> C64 {
    let mut acc = psi[0] * k1(lam, t);
    for j in 0..psi.len() - 1 {
        let a = j as f64 * dt;
        if a >= t {
            break;
        }
        let b = ((j + 1) as f64 * dt).min(t);
        let slope = (psi[j + 1] - psi[j]) / dt;
        acc += slope * k2_diff(lam, t - a, t - b);
    }
    acc
}

/// Modal solution at samples t_i + xi_q dt (panel-major, i < M) followed by t_M.
pub fn modal_samples(lam: f64, psi: &[C64], dt: f64, offsets: &[f64]) -> Vec<C64> {
    let m = psi.len() - 1;
    let mut out = Vec::with_capacity(m * offsets.len() + 1);
    let zero = C64::new(0.0, 0.0);
    // Interior hats j = 1..i-1 through running sums.
    let (mut sp, mut sm) = (zero, zero);
    let (mut s0, mut s1) = (zero, zero);
    let s_half = sdiv(lam, dt / 2.0);
    let amp = 4.0 / dt * s_half * s_half;
    let node_term = |i: usize, xi: f64, sp: C64, sm: C64, s0: C64, s1: C64| -> C64 {
        let s = (i as f64 + xi) * dt;
        let mut v = if lam == 0.0 {
            dt * (s0 * s - s1)
        } else {
            let e = C64::from_polar(1.0, lam * s);
            (e * sp - e.conj() * sm) / C64::new(0.0, 2.0) * (amp / lam)
        };
        if lam == 0.0 {
            v *= 1.0;
        }
        v += psi[0] * half_hat_response(lam, s, dt);
        if i >= 1 {
            v += psi[i] * hat_response(lam, xi * dt, dt);
        }
        if i < m {
            v += psi[i + 1] * hat_response(lam, (xi - 1.0) * dt, dt);
        }
        v
    };
    for i in 0..=m {
        if i >= 2 {
            let j = i - 1;
            let tj = j as f64 * dt;
            if lam == 0.0 {
                s0 += psi[j];
                s1 += psi[j] * tj;
            } else {
                let e = C64::from_polar(1.0, -lam * tj);
                sp += psi[j] * e;
                sm += psi[j] * e.conj();
            }
        }
        if i == m {
            out.push(node_term(i, 0.0, sp, sm, s0, s1));
        } else {
            for &xi in offsets {
                out.push(node_term(i, xi, sp, sm, s0, s1));
            }
        }
    }
    out
}

/// Sample times matching `modal_samples`.
pub fn sample_times(dt: f64, steps: usize, offsets: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(steps * offsets.len() + 1);
    for i in 0..steps {
        for &xi in offsets {
            t.push((i as f64 + xi) * dt);
        }
    }
    t.push(steps as f64 * dt);
    t
}

/// Time series of sections on a uniform grid, linearly interpolated in time.
#[derive(Clone, Debug)]
pub struct SpaceTimeSource {
    pub dt: f64,
    pub values: Vec<Section>,
    pub region: Option<Region>,
    pub support: (f64, f64),
}

impl SpaceTimeSource {
    pub fn new(dt: f64, values: Vec<Section>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(LabError::InvalidParameter(format!("time step {dt} <= 0")));
        }
        if values.len() < 2 {
            return Err(LabError::InvalidParameter("source needs at least two time nodes".into()));
        }
        let t_end = dt * (values.len() - 1) as f64;
        Ok(SpaceTimeSource { dt, values, region: None, support: (0.0, t_end) })
    }

    pub fn zero(dim: usize, dt: f64, steps: usize) -> Result<Self> {
        SpaceTimeSource::new(dt, vec![Array1::zeros(dim); steps + 1])
    }

    /// Separable source psi(t) f.
    pub fn separable(dt: f64, steps: usize, profile: impl Fn(f64) -> f64, f: &Section) -> Result<Self> {
        let values = (0..=steps).map(|i| f.mapv(|z| z * profile(i as f64 * dt))).collect();
        SpaceTimeSource::new(dt, values)
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    /// Declares and verifies spatial and temporal supports.
    pub fn with_support(mut self, basis: &FourierBasis, region: Option<Region>, support: (f64, f64)) -> Result<Self> {
        for (i, v) in self.values.iter().enumerate() {
            let t = i as f64 * self.dt;
            let peak = vec_norm(v);
            if (t < support.0 - 1e-12 || t > support.1 + 1e-12) && peak > 0.0 {
                return Err(LabError::SupportViolation(peak));
            }
            if let Some(r) = &region {
                let off = basis.max_outside(v, &r.indices);
                if off > 1e-12 * peak.max(f64::MIN_POSITIVE) {
                    return Err(LabError::SupportViolation(off));
                }
            }
        }
        self.region = region;
        self.support = support;
        Ok(self)
    }

    /// The source delayed by whole time steps (zero-padded at the start, truncated at the end).
    pub fn shifted(&self, steps: usize) -> Self {
        let dim = self.values[0].len();
        let mut values = vec![Array1::zeros(dim); self.values.len()];
        for i in steps..self.values.len() {
            values[i] = self.values[i - steps].clone();
        }
        SpaceTimeSource {
            dt: self.dt,
            values,
            region: self.region.clone(),
            support: (self.support.0 + steps as f64 * self.dt, self.support.1 + steps as f64 * self.dt),
        }
    }

    /// Space-time L^2 norm with the piecewise-linear interpolant in time.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.values.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let aa: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let bb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
            let ab: f64 = a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum();
            acc += self.dt * (aa + bb + ab) / 3.0;
        }
        acc.sqrt()
    }

    /// Writes rows t_index,k,fiber,re,im for nonzero coefficients; k is written as
    /// semicolon-separated integers.
    pub fn write_csv<W: Write>(&self, basis: &FourierBasis, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(w);
        wr.write_record(["t_index", "k", "fiber", "re", "im"])?;
        let n = basis.rank();
        for (i, v) in self.values.iter().enumerate() {
            for (idx, z) in v.iter().enumerate() {
                if *z != C64::new(0.0, 0.0) {
                    let mode = basis.mode(idx / n);
                    let k = mode.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
                    wr.write_record([
                        i.to_string(),
                        k,
                        (idx % n).to_string(),
                        format!("{:e}", z.re),
                        format!("{:e}", z.im),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the format of `write_csv`; `steps` fixes the time grid length.
    pub fn read_csv<R: Read>(basis: &FourierBasis, dt: f64, steps: usize, r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut values = vec![Array1::<C64>::zeros(basis.dim()); steps + 1];
        let bad = |line: usize, msg: &str| LabError::InvalidParameter(format!("source CSV record {line}: {msg}"));
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(bad(line + 1, "expected 5 fields"));
            }
            let t: usize = rec[0].trim().parse().map_err(|_| bad(line + 1, "bad t_index"))?;
            let mode: Vec<i64> = rec[1]
                .split(';')
                .map(|s| s.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(line + 1, "bad k multi-index"))?;
            let fiber: usize = rec[2].trim().parse().map_err(|_| bad(line + 1, "bad fiber index"))?;
            let re: f64 = rec[3].trim().parse().map_err(|_| bad(line + 1, "bad re"))?;
            let im: f64 = rec[4].trim().parse().map_err(|_| bad(line + 1, "bad im"))?;
            if t > steps {
                return Err(bad(line + 1, "t_index beyond time grid"));
            }
            if fiber >= basis.rank() || mode.len() != basis.torus().dim() {
                return Err(bad(line + 1, "index out of range"));
            }
            let q = basis.mode_index(&mode).ok_or_else(|| bad(line + 1, "mode beyond cutoff"))?;
            values[t][q * basis.rank() + fiber] = C64::new(re, im);
        }
        SpaceTimeSource::new(dt, values)
    }
}

/// sin(t sqrt(Delta))/sqrt(Delta) f; the kernel contributes t times its projection.
pub fn sine_propagator(res: &SpectralResolution, t: f64, f: &Section) -> Result<Section> {
    if t < 0.0 {
        return Err(LabError::NegativeTime(t));
    }
    Ok(res.apply_fn(f, |lam| sdiv(lam, t)))
}

pub fn cosine_propagator(res: &SpectralResolution, t: f64, f: &Section) -> Section {
    res.apply_fn(f, |lam| (lam * t).cos())
}

/// Eigen-coefficients of a source per time node (rows = time nodes).
fn modal_source(res: &SpectralResolution, f: &SpaceTimeSource) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros((f.values.len(), res.dim()));
    for (i, v) in f.values.iter().enumerate() {
        if v.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            out.row_mut(i).assign(&res.to_eigen(v));
        }
    }
    out
}

/// u(t_eval) for the wave equation with source f and zero Cauchy data.
pub fn wave_solve(res: &SpectralResolution, f: &SpaceTimeSource, t_eval: f64) -> Result<Section> {
    if !(0.0..=f.t_end() + 1e-12).contains(&t_eval) {
        return Err(LabError::TimeOutOfRange { t: t_eval, t_end: f.t_end() });
    }
    let psi = modal_source(res, f);
    let mut a = Array1::<C64>::zeros(res.dim());
    for (k, &lam) in res.eigenvalues().iter().enumerate() {
        let col: Vec<C64> = psi.column(k).to_vec();
        if col.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            a[k] = modal_duhamel(lam, &col, f.dt, t_eval);
        }
    }
    Ok(res.from_eigen(&a))
}

/// Modal solution at all sample times (rows = samples, columns = eigenmodes).
pub fn modal_solution(res: &SpectralResolution, f: &SpaceTimeSource, offsets: &[f64]) -> Array2<C64> {
    let psi = modal_source(res, f);
    let n_samples = f.steps() * offsets.len() + 1;
    let mut out = Array2::<C64>::zeros((n_samples, res.dim()));
    for (k, &lam) in res.eigenvalues().iter().enumerate() {
        let col: Vec<C64> = psi.column(k).to_vec();
        if col.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            for (s, v) in modal_samples(lam, &col, f.dt, offsets).into_iter().enumerate() {
                out[[s, k]] = v;
            }
        }
    }
    out
}

/// Solution at every time grid node.
pub fn wave_solve_grid(res: &SpectralResolution, f: &SpaceTimeSource) -> Vec<Section> {
    let modal = modal_solution(res, f, &[0.0]);
    modal.rows().into_iter().map(|r| res.from_eigen(&r.to_owned())).collect()
}

/// Nodal values on a region at sample times: rows = node * rank + fiber, columns = samples.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalField {
    pub times: Vec<f64>,
    pub nodes: Vec<usize>,
    pub rank: usize,
    pub data: Array2<C64>,
}

impl LocalField {
    pub fn series(&self, node_pos: usize, fiber: usize) -> ndarray::ArrayView1<'_, C64> {
        self.data.row(node_pos * self.rank + fiber)
    }
}

/// Region values of the solution at the sample times defined by `offsets`.
pub fn local_field(res: &SpectralResolution, region: &Region, f: &SpaceTimeSource, offsets: &[f64]) -> LocalField {
    let basis = res.basis();
    let n = basis.rank();
    let modal = modal_solution(res, f, offsets);
    let times = sample_times(f.dt, f.steps(), offsets);
    let mut data = Array2::<C64>::zeros((region.len() * n, times.len()));
    for (s, row) in modal.rows().into_iter().enumerate() {
        if row.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        let nodal = basis.to_nodal(&res.from_eigen(&row.to_owned()));
        for (i, &p) in region.indices.iter().enumerate() {
            for l in 0..n {
                data[[i * n + l, s]] = nodal[[p, l]];
            }
        }
    }
    LocalField { times, nodes: region.indices.clone(), rank: n, data }
}

/// L^wave_{D,O} f = u|_O at every time grid node.
pub fn wave_source_to_solution(res: &SpectralResolution, region: &Region, f: &SpaceTimeSource) -> Result<LocalField> {
    let basis = res.basis();
    for v in &f.values {
        let peak = basis.to_nodal(v).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let off = basis.max_outside(v, &region.indices);
        if off > 1e-12 * peak.max(f64::MIN_POSITIVE) {
            return Err(LabError::SupportViolation(off));
        }
    }
    Ok(local_field(res, region, f, &[0.0]))
}

/// max over interior grid times of ||(d_t^2 + Delta) u - f|| with a centred
/// second difference in t.
pub fn pde_residual(res: &SpectralResolution, f: &SpaceTimeSource) -> f64 {
    let psi = modal_source(res, f);
    let modal = modal_solution(res, f, &[0.0]);
    let dt = f.dt;
    let mut worst: f64 = 0.0;
    for i in 1..f.steps() {
        let mut acc = 0.0;
        for (k, &lam) in res.eigenvalues().iter().enumerate() {
            let fd = (modal[[i + 1, k]] - modal[[i, k]] * 2.0 + modal[[i - 1, k]]) / (dt * dt);
            acc += (fd + modal[[i, k]] * lam * lam - psi[[i, k]]).norm_sqr();
        }
        worst = worst.max(acc.sqrt());
    }
    worst
}

/// Energy ||u_t||^2 + ||sqrt(Delta) u||^2 of the homogeneous solution with data (u0, u1).
pub fn homogeneous_energy(res: &SpectralResolution, u0: &Section, u1: &Section, t: f64) -> f64 {
    let a0 = res.to_eigen(u0);
    let a1 = res.to_eigen(u1);
    let mut e = 0.0;
    for (k, &lam) in res.eigenvalues().iter().enumerate() {
        let (c, s) = ((lam * t).cos(), (lam * t).sin());
        let u = a0[k] * c + a1[k] * sdiv(lam, t);
        let ut = a0[k] * (-lam * s) + a1[k] * c;
        e += ut.norm_sqr() + lam * lam * u.norm_sqr();
    }
    e
}

/// max |u(t, x)| over the open cone d(x, p) < T - t on the grid.
pub fn finite_speed_check(res: &SpectralResolution, p: &[f64], t_cone: f64, f: &SpaceTimeSource) -> Result<f64> {
    let basis = res.basis();
    let torus = basis.torus();
    let dist: Vec<f64> = (0..torus.n_points()).map(|i| torus.geodesic_distance(p, &torus.grid_point(i))).collect();
    let steps = ((t_cone / f.dt).floor() as usize).min(f.steps());
    for i in 0..=steps {
        let t = i as f64 * f.dt;
        let nodal = basis.to_nodal(&f.values[i]);
        let peak = nodal.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let inside = (0..dist.len())
            .filter(|&x| dist[x] < t_cone - t)
            .flat_map(|x| (0..basis.rank()).map(move |l| (x, l)))
            .fold(0.0f64, |m, (x, l)| m.max(nodal[[x, l]].norm()));
        if inside > 1e-8 * peak.max(1.0) {
            return Err(LabError::SupportViolation(inside));
        }
    }
    let sols = wave_solve_grid(res, f);
    let mut worst: f64 = 0.0;
    for (i, u) in sols.iter().enumerate().take(steps + 1) {
        let t = i as f64 * f.dt;
        let nodal = basis.to_nodal(u);
        for x in 0..dist.len() {
            if dist[x] < t_cone - t {
                for l in 0..basis.rank() {
                    worst = worst.max(nodal[[x, l]].norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Result of comparing the transmutation integral with the heat semigroup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KannaiReport {
    pub fitted_constant: f64,
    pub relative_error: f64,
}

/// (4 pi t)^{-1/2} t^{-1} int_0^inf e^{-tau/4t} sin(sqrt(tau) lam)/lam dtau, with
/// tau = s^2 and the trapezoid rule on the even integrand.
pub fn kannai_factor(lam: f64, t: f64, lam_max: f64) -> f64 {
    let s_max = (4.0 * t * 45.0).sqrt();
    let h = (std::f64::consts::PI / (lam_max + 14.0 / t.sqrt())).min(s_max / 64.0);
    let n = (s_max / h).ceil() as usize;
    let h = s_max / n as f64;
    let mut acc = 0.0;
    for i in 1..=n {
        let s = i as f64 * h;
        let w = if i == n { 0.5 } else { 1.0 };
        acc += w * 2.0 * s * (-s * s / (4.0 * t)).exp() * sdiv(lam, s);
    }
    acc * h / ((4.0 * std::f64::consts::PI * t).sqrt() * t)
}

/// Fits c in c * (transmutation integral) = e^{-t Delta} f and reports the relative error.
pub fn kannai_check(res: &SpectralResolution, t: f64, f: &Section) -> Result<KannaiReport> {
    if !(t > 0.0) {
        return Err(LabError::InvalidParameter(format!("Kannai check needs t > 0, got {t}")));
    }
    let lam_max = res.norm();
    let integral = res.apply_fn(f, |lam| kannai_factor(lam, t, lam_max));
    let heat = res.apply_fn(f, |lam| (-t * lam * lam).exp());
    let num: C64 = integral.iter().zip(heat.iter()).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = integral.iter().map(|z| z.norm_sqr()).sum();
    let c = num.re / den;
    let diff = &integral.mapv(|z| z * c) - &heat;
    Ok(KannaiReport { fitted_constant: c, relative_error: vec_norm(&diff) / vec_norm(&heat) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(lam: f64, psi: impl Fn(f64) -> f64, t: f64) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        (0..n).map(|i| {
            let s = (i as f64 + 0.5) * h;
            sdiv(lam, t - s) * psi(s) * h
        }).sum()
    }

    #[test]
    fn hat_matches_quadrature() {
        let h = 0.1;
        for &lam in &[0.0, 0.7, 5.0] {
            for &tau in &[-0.05, 0.03, 0.1, 0.8] {
                let hat = |s: f64| (1.0 - (s - 1.0).abs() / h).max(0.0);
                let exact = brute(lam, hat, 1.0 + tau);
                assert!((hat_response(lam, tau, h) - exact).abs() < 1e-9, "lam {lam} tau {tau}");
            }
        }
    }

    #[test]
    fn constant_source_closed_form() {
        let psi = vec![C64::new(1.0, 0.0); 11];
        let u = modal_duhamel(1.0, &psi, 0.3, 2.5);
        assert!((u.re - (1.0 - 2.5f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn samples_agree_with_direct() {
        let psi: Vec<C64> = (0..21).map(|i| C64::new((i as f64 * 0.4).sin(), (i as f64 * 0.13).cos())).collect();
        let offsets = [0.0, 0.3, 0.8];
        for &lam in &[0.0, 0.4, 3.0] {
            let fast = modal_samples(lam, &psi, 0.05, &offsets);
            let times = sample_times(0.05, 20, &offsets);
            for (v, t) in fast.iter().zip(times) {
                assert!((v - modal_duhamel(lam, &psi, 0.05, t)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn kannai_single_mode_constant() {
        let v = kannai_factor(1.0, 0.5, 1.0);
        assert!((v / (-0.5f64).exp() - 2.0).abs() < 1e-10);
    }
}
