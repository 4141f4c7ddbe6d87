//! Inner products of wave states at time T from local data only:
//! <u^f(T), u^g(T)> = int_0^T <f, J u^g> - int_0^T <u^f, J g>.

use ndarray::{Array1, Array2};

use super::local::{LocalSource, LocalWaveData, GL_NODES, GL_WEIGHTS};
use crate::{LabError, Result, C64};

const Q: usize = GL_NODES.len();

/// Cumulative integral Phi(tau) = int_0^tau f of a piecewise-linear series.
fn cumulative(row: ndarray::ArrayView1<C64>, dt: f64) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); row.len()];
    for j in 1..row.len() {
        c[j] = c[j - 1] + (row[j - 1] + row[j]) * (0.5 * dt);
    }
    c
}

fn eval_cumulative(row: ndarray::ArrayView1<C64>, cum: &[C64], dt: f64, tau: f64) -> C64 {
    let m = row.len() - 1;
    let k = ((tau / dt).floor() as usize).min(m - 1);
    let th = tau / dt - k as f64;
    cum[k] + (row[k] * th + (row[k + 1] - row[k]) * (0.5 * th * th)) * dt
}

/// Evaluates the identity for general local sources f, g on [0, 2T].
pub fn blago_inner_product(data: &LocalWaveData, f: &LocalSource, g: &LocalSource) -> Result<C64> {
    data.check_source(f)?;
    data.check_source(g)?;
    let dt = data.dt;
    let n = data.half_steps();
    let t_half = data.half_horizon;
    let w = data.map.cell_volume();
    let uf = data.map.apply(f, &GL_NODES)?;
    let ug = data.map.apply(g, &GL_NODES)?;
    let cf: Vec<Vec<C64>> = f.coeffs.rows().into_iter().map(|r| cumulative(r, dt)).collect();
    let cg: Vec<Vec<C64>> = g.coeffs.rows().into_iter().map(|r| cumulative(r, dt)).collect();
    let mut term1 = C64::new(0.0, 0.0);
    let mut term2 = C64::new(0.0, 0.0);
    for (row, (fr, gr)) in f.coeffs.rows().into_iter().zip(g.coeffs.rows()).enumerate() {
        let ug_row = ug.data.row(row);
        let uf_row = uf.data.row(row);
        for i in 0..2 * n {
            for q in 0..Q {
                let s = (i as f64 + GL_NODES[q]) * dt;
                let tau = s.min(2.0 * t_half - s);
                let phi = eval_cumulative(fr, &cf[row], dt, tau);
                term1 += phi.conj() * ug_row[i * Q + q] * (0.5 * GL_WEIGHTS[q] * dt);
                if i < n {
                    let jg = (eval_cumulative(gr, &cg[row], dt, 2.0 * t_half - s) - eval_cumulative(gr, &cg[row], dt, s)) * 0.5;
                    term2 += uf_row[i * Q + q].conj() * jg * (GL_WEIGHTS[q] * dt);
                }
            }
        }
    }
    Ok((term1 - term2) * w)
}

/// A time hat of half-width `half` steps at (node position, fiber), centred
/// `lag` steps before T; supported in (0, T] when half <= lag <= N - half.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HatMember {
    pub pos: usize,
    pub fiber: usize,
    pub lag: usize,
}

/// Reference responses of one hat per (node, fiber) key, sampled at the
/// Gauss points of every panel of [0, 2T]. Responses to shifted hats follow
/// by time-translation invariance.
pub struct ReferenceBank {
    pub half: usize,
    pub keys: Vec<(usize, usize)>,
    dt: f64,
    n: usize,
    cell_volume: f64,
    /// samples[key_source][key_receiver] -> series over panel-major samples.
    samples: Vec<Vec<Array1<C64>>>,
    /// cumulative integrals at panel nodes, same indexing.
    cumul: Vec<Vec<Vec<C64>>>,
}

impl ReferenceBank {
    pub fn build(data: &LocalWaveData, keys: &[(usize, usize)], half: usize) -> Result<Self> {
        let n = data.half_steps();
        if half == 0 || 2 * half > n {
            return Err(LabError::InvalidParameter(format!("hat half-width {half} steps does not fit in T = {n} steps")));
        }
        let dt = data.dt;
        let rank = data.rank();
        let mut samples = Vec::with_capacity(keys.len());
        let mut cumul = Vec::with_capacity(keys.len());
        for &(pos, fiber) in keys {
            let mut src = data.zero_source();
            src.add_hat(pos, fiber, half, half, C64::new(1.0, 0.0));
            let field = data.map.apply(&src, &GL_NODES)?;
            let mut per_recv = Vec::with_capacity(keys.len());
            let mut per_cum = Vec::with_capacity(keys.len());
            for &(rp, rf) in keys {
                let series = field.data.row(rp * rank + rf).to_owned();
                let mut c = vec![C64::new(0.0, 0.0); 2 * n + 1];
                for i in 0..2 * n {
                    let mut acc = C64::new(0.0, 0.0);
                    for q in 0..Q {
                        acc += series[i * Q + q] * GL_WEIGHTS[q];
                    }
                    c[i + 1] = c[i] + acc * dt;
                }
                per_recv.push(series);
                per_cum.push(c);
            }
            samples.push(per_recv);
            cumul.push(per_cum);
        }
        Ok(ReferenceBank { half, keys: keys.to_vec(), dt, n, cell_volume: data.map.cell_volume(), samples, cumul })
    }

    fn key_index(&self, pos: usize, fiber: usize) -> Result<usize> {
        self.keys
            .iter()
            .position(|&k| k == (pos, fiber))
            .ok_or_else(|| LabError::InvalidParameter(format!("no reference response for node {pos}, fiber {fiber}")))
    }

    /// Shift (steps) of a member relative to the reference hat.
    fn shift(&self, m: &HatMember) -> Result<usize> {
        if m.lag < self.half || m.lag + self.half > self.n {
            return Err(LabError::SupportViolation(m.lag as f64 * self.dt));
        }
        Ok(self.n - m.lag - self.half)
    }

    /// Cumulative ramp of the unit hat, H * rho((tau - sigma)/H).
    fn ramp(&self, sigma: usize, tau: f64) -> f64 {
        let h = self.half as f64 * self.dt;
        let v = (tau - sigma as f64 * self.dt) / h;
        let r = if v <= 0.0 {
            0.0
        } else if v <= 1.0 {
            0.5 * v * v
        } else if v <= 2.0 {
            1.0 - 0.5 * (2.0 - v) * (2.0 - v)
        } else {
            1.0
        };
        h * r
    }

    fn sample(&self, src: usize, recv: usize, shift: usize, panel: usize, q: usize) -> C64 {
        if panel < shift {
            C64::new(0.0, 0.0)
        } else {
            self.samples[src][recv][(panel - shift) * Q + q]
        }
    }

    fn cum(&self, src: usize, recv: usize, shift: usize, node: usize) -> C64 {
        if node <= shift {
            C64::new(0.0, 0.0)
        } else {
            self.cumul[src][recv][node - shift]
        }
    }

    /// G_ab = <u^a(T), u^b(T)> through the identity.
    pub fn entry(&self, a: &HatMember, b: &HatMember) -> Result<C64> {
        let (ka, kb) = (self.key_index(a.pos, a.fiber)?, self.key_index(b.pos, b.fiber)?);
        let (sa, sb) = (self.shift(a)?, self.shift(b)?);
        let p = self.half;
        let h = p as f64 * self.dt;
        let dt = self.dt;
        let two_t = 2.0 * self.n as f64 * dt;
        // Term 1: u = u^b at a's node/fiber.
        let mut t1 = (self.cum(kb, ka, sb, 2 * self.n - sa - 2 * p) - self.cum(kb, ka, sb, sa + 2 * p)) * h;
        for panel in sa..sa + 2 * p {
            for q in 0..Q {
                let s = (panel as f64 + GL_NODES[q]) * dt;
                t1 += self.sample(kb, ka, sb, panel, q) * (self.ramp(sa, s) * GL_WEIGHTS[q] * dt);
            }
        }
        for panel in 2 * self.n - sa - 2 * p..2 * self.n - sa {
            for q in 0..Q {
                let s = (panel as f64 + GL_NODES[q]) * dt;
                t1 += self.sample(kb, ka, sb, panel, q) * (self.ramp(sa, two_t - s) * GL_WEIGHTS[q] * dt);
            }
        }
        // Term 2: u = u^a at b's node/fiber, J g = (H - ramp_b)/2 on [0, T].
        let mut t2 = self.cum(ka, kb, sa, sb).conj() * h;
        for panel in sb..sb + 2 * p {
            for q in 0..Q {
                let s = (panel as f64 + GL_NODES[q]) * dt;
                t2 += self.sample(ka, kb, sa, panel, q).conj() * ((h - self.ramp(sb, s)) * GL_WEIGHTS[q] * dt);
            }
        }
        Ok((t1 - t2) * (0.5 * self.cell_volume))
    }

    /// Gram matrix between two families (rows a, columns b).
    pub fn gram(&self, fa: &[HatMember], fb: &[HatMember]) -> Result<Array2<C64>> {
        let mut g = Array2::<C64>::zeros((fa.len(), fb.len()));
        for (i, a) in fa.iter().enumerate() {
            for (j, b) in fb.iter().enumerate() {
                g[[i, j]] = self.entry(a, b)?;
            }
        }
        Ok(g)
    }

    /// Hermitian Gram of one family, symmetrized.
    pub fn gram_hermitian(&self, fam: &[HatMember]) -> Result<Array2<C64>> {
        let mut g = Array2::<C64>::zeros((fam.len(), fam.len()));
        for i in 0..fam.len() {
            for j in i..fam.len() {
                let v = if i == j {
                    C64::new(self.entry(&fam[i], &fam[i])?.re, 0.0)
                } else {
                    0.5 * (self.entry(&fam[i], &fam[j])? + self.entry(&fam[j], &fam[i])?.conj())
                };
                g[[i, j]] = v;
                g[[j, i]] = v.conj();
            }
        }
        Ok(g)
    }

    /// Space-time L^2 Gram of the sources themselves.
    pub fn source_gram(&self, fam: &[HatMember]) -> Array2<f64> {
        let h = self.half as f64 * self.dt;
        let mut m = Array2::<f64>::zeros((fam.len(), fam.len()));
        for (i, a) in fam.iter().enumerate() {
            for (j, b) in fam.iter().enumerate() {
                if (a.pos, a.fiber) == (b.pos, b.fiber) {
                    let d = (a.lag as f64 - b.lag as f64).abs() * self.dt;
                    let v = if d <= h {
                        2.0 * h / 3.0 - d * d / h + d * d * d / (2.0 * h * h)
                    } else if d < 2.0 * h {
                        (2.0 * h - d).powi(3) / (6.0 * h * h)
                    } else {
                        0.0
                    };
                    m[[i, j]] = v * self.cell_volume;
                }
            }
        }
        m
    }

    /// The member as a general local source.
    pub fn member_source(&self, data: &LocalWaveData, m: &HatMember) -> Result<LocalSource> {
        let mut s = data.zero_source();
        s.add_hat(m.pos, m.fiber, self.n - m.lag, self.half, C64::new(1.0, 0.0));
        let _ = self.shift(m)?;
        Ok(s)
    }
}
