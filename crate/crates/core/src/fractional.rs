//! Spectral fractional calculus of D: powers, the Poisson problem
//! D^alpha u = f, heat semigroup and the Gamma-integral representation.

use ndarray::{Array1, Array2};
use statrs::function::gamma::gamma;

use crate::dirac::{DiracOperator, SpectralResolution};
use crate::geometry::Region;
use crate::grid::Section;
use crate::linalg::{dot, vec_norm};
use crate::{LabError, Result, C64};

/// Kernel-orthogonality tolerance for Poisson sources.
pub const KERNEL_ORTHO_TOL: f64 = 1e-10;
/// Nodal support tolerance relative to the section's largest nodal value.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Order alpha in (0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(FractionalOrder(alpha))
        } else {
            Err(LabError::OrderOutOfRange(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// sign(lambda) |lambda|^p, zero on the kernel.
pub fn signed_power(lam: f64, p: f64) -> f64 {
    if lam == 0.0 {
        0.0
    } else {
        lam.signum() * lam.abs().powf(p)
    }
}

/// D^alpha f = sum sign(lambda_k) |lambda_k|^alpha <f, phi_k> phi_k.
pub fn fractional_dirac_apply(res: &SpectralResolution, alpha: f64, f: &Section) -> Result<Section> {
    let a = FractionalOrder::new(alpha)?.value();
    Ok(res.apply_fn(f, |lam| signed_power(lam, a)))
}

/// Signed power for any real exponent (used for limits and checks).
pub fn signed_power_apply(res: &SpectralResolution, p: f64, f: &Section) -> Section {
    res.apply_fn(f, |lam| signed_power(lam, p))
}

/// |<f, phi>| for each kernel eigensection phi.
pub fn kernel_inner_products(res: &SpectralResolution, f: &Section) -> Vec<f64> {
    res.kernel_vectors().iter().map(|phi| dot(phi, f).norm()).collect()
}

pub fn project_off_kernel(res: &SpectralResolution, f: &Section) -> Section {
    res.apply_fn(f, |lam| if lam == 0.0 { 0.0 } else { 1.0 })
}

fn check_kernel(res: &SpectralResolution, f: &Section) -> Result<()> {
    let ips = kernel_inner_products(res, f);
    let scale = vec_norm(f).max(1.0);
    if ips.iter().any(|&v| v > KERNEL_ORTHO_TOL * scale) {
        return Err(LabError::KernelComponent(ips));
    }
    Ok(())
}

/// Checks that the nodal values of f vanish off the region.
pub fn check_support(res: &SpectralResolution, region: &Region, f: &Section) -> Result<()> {
    let basis = res.basis();
    let nodal = basis.to_nodal(f);
    let peak = nodal.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let off = basis.max_outside(f, &region.indices);
    if off > SUPPORT_TOL * peak.max(f64::MIN_POSITIVE) {
        return Err(LabError::SupportViolation(off));
    }
    Ok(())
}

/// u = D^{-alpha} f for f orthogonal to Ker(D).
pub fn solve_poisson(res: &SpectralResolution, alpha: f64, f: &Section) -> Result<Section> {
    let a = FractionalOrder::new(alpha)?.value();
    check_kernel(res, f)?;
    Ok(res.apply_fn(f, |lam| signed_power(lam, -a)))
}

/// Nodal values of a section on the grid points of a region.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedSection {
    pub nodes: Vec<usize>,
    /// nodes x fibers
    pub values: Array2<C64>,
}

impl RestrictedSection {
    pub fn from_section(res: &SpectralResolution, region: &Region, f: &Section) -> Self {
        let nodal = res.basis().to_nodal(f);
        let n = res.basis().rank();
        let mut values = Array2::<C64>::zeros((region.len(), n));
        for (i, &p) in region.indices.iter().enumerate() {
            for l in 0..n {
                values[[i, l]] = nodal[[p, l]];
            }
        }
        RestrictedSection { nodes: region.indices.clone(), values }
    }

    /// Flattened (node-major) values.
    pub fn flat(&self) -> Array1<C64> {
        Array1::from_iter(self.values.iter().cloned())
    }
}

/// L_{D,O} f = (D^{-alpha} f)|_O for f supported in O and orthogonal to Ker(D).
pub fn source_to_solution(
    res: &SpectralResolution,
    alpha: f64,
    region: &Region,
    f: &Section,
) -> Result<RestrictedSection> {
    check_support(res, region, f)?;
    let u = solve_poisson(res, alpha, f)?;
    Ok(RestrictedSection::from_section(res, region, &u))
}

/// e^{-t Delta} f = sum e^{-t lambda_k^2} <f, phi_k> phi_k.
pub fn heat_apply(res: &SpectralResolution, t: f64, f: &Section) -> Result<Section> {
    if t < 0.0 {
        return Err(LabError::NegativeTime(t));
    }
    Ok(res.apply_fn(f, |lam| (-t * lam * lam).exp()))
}

/// Trapezoid rule in s = log t on [-head, log t_max].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaQuadrature {
    pub step: f64,
    pub head: f64,
    pub t_max: f64,
}

impl GammaQuadrature {
    /// Truncations with e^{-lambda_1^2 t_max} <= 1e-12 and head error <= 1e-12.
    pub fn for_spectrum(res: &SpectralResolution, alpha: f64) -> Self {
        let lam1 = res.first_nonzero().unwrap_or(1.0);
        let tail = 12.0 * std::f64::consts::LN_10;
        let t_max = (tail + 5.0) / (lam1 * lam1);
        let head = (tail - (alpha * gamma(alpha)).ln()) / alpha + 1.0;
        GammaQuadrature { step: 0.05, head, t_max }
    }

    /// Quadrature value of (1/Gamma(alpha)) int e^{-t mu} t^{alpha-1} dt.
    pub fn weight(&self, mu: f64, alpha: f64) -> f64 {
        let upper = self.t_max.ln();
        let n = ((upper + self.head) / self.step).ceil() as usize;
        let h = (upper + self.head) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let s = -self.head + i as f64 * h;
            let t = s.exp();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * (-t * mu).exp() * (alpha * s).exp();
        }
        acc * h / gamma(alpha)
    }
}

/// Delta^{-alpha} f from the Gamma-integral representation of mu^{-alpha}
/// applied to the heat semigroup.
pub fn gamma_integral_inverse_power(
    res: &SpectralResolution,
    alpha: f64,
    f: &Section,
    quad: Option<GammaQuadrature>,
) -> Result<Section> {
    let a = FractionalOrder::new(alpha)?.value();
    check_kernel(res, f)?;
    let q = quad.unwrap_or_else(|| GammaQuadrature::for_spectrum(res, a));
    Ok(res.apply_fn(f, |lam| if lam == 0.0 { 0.0 } else { q.weight(lam * lam, a) }))
}

/// Spectral Delta^{-alpha} f.
pub fn laplace_inverse_power(res: &SpectralResolution, alpha: f64, f: &Section) -> Section {
    res.apply_fn(f, |lam| if lam == 0.0 { 0.0 } else { (lam * lam).powf(-alpha) })
}

/// ||D^alpha f - D Delta^{(alpha-1)/2} f|| / ||f|| with D applied as the assembled matrix.
pub fn factorization_check(res: &SpectralResolution, op: &DiracOperator, alpha: f64, f: &Section) -> Result<f64> {
    let lhs = fractional_dirac_apply(res, alpha, f)?;
    let half = res.apply_fn(f, |lam| if lam == 0.0 { 0.0 } else { lam.abs().powf(alpha - 1.0) });
    let rhs = op.apply(&half);
    let diff = &lhs - &rhs;
    Ok(vec_norm(&diff) / vec_norm(f).max(f64::MIN_POSITIVE))
}

/// Orthonormal basis (in the discrete L^2 sense, as coefficient vectors) of
/// sources supported on the region's nodes and orthogonal to every given
/// kernel section.
pub fn admissible_sources(res: &SpectralResolution, region: &Region, kernels: &[Section]) -> Result<Vec<Section>> {
    let basis = res.basis();
    let n = basis.rank();
    let dim = region.len() * n;
    // Restricted kernel vectors as rows of a constraint matrix in nodal coordinates
    // (nodal inner product = cell volume x Euclidean).
    let mut cons = Array2::<C64>::zeros((kernels.len(), dim));
    for (r, k) in kernels.iter().enumerate() {
        let nodal = basis.to_nodal(k);
        for (i, &p) in region.indices.iter().enumerate() {
            for l in 0..n {
                cons[[r, i * n + l]] = nodal[[p, l]];
            }
        }
    }
    // Complement of the constraint row space via Gram-Schmidt on unit vectors.
    let mut frame: Vec<Array1<C64>> = Vec::new();
    for r in 0..cons.nrows() {
        let mut v = cons.row(r).mapv(|z| z.conj());
        for u in &frame {
            let c = dot(u, &v);
            v.scaled_add(-c, u);
        }
        let nv = vec_norm(&v);
        if nv > 1e-10 {
            frame.push(v.mapv(|z| z / nv));
        }
    }
    let n_cons = frame.len();
    for e in 0..dim {
        let mut v = Array1::<C64>::zeros(dim);
        v[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for u in &frame {
                let c = dot(u, &v);
                v.scaled_add(-c, u);
            }
        }
        let nv = vec_norm(&v);
        if nv > 1e-8 {
            frame.push(v.mapv(|z| z / nv));
        }
    }
    let w = basis.torus().cell_volume().sqrt();
    let mut out = Vec::new();
    for v in frame.into_iter().skip(n_cons) {
        let mut nodal = Array2::<C64>::zeros((basis.n_points(), n));
        for (i, &p) in region.indices.iter().enumerate() {
            for l in 0..n {
                nodal[[p, l]] = v[i * n + l] / w;
            }
        }
        out.push(basis.from_nodal(&nodal));
    }
    Ok(out)
}

/// Matrix of L_{D,O} on an orthonormal admissible source basis, with outputs
/// in weighted nodal coordinates on O (so the operator norm is the L^2 norm).
pub fn source_to_solution_matrix(
    res: &SpectralResolution,
    alpha: f64,
    region: &Region,
    sources: &[Section],
) -> Result<Array2<C64>> {
    let n = res.basis().rank();
    let w = res.basis().torus().cell_volume().sqrt();
    let mut mat = Array2::<C64>::zeros((region.len() * n, sources.len()));
    for (c, f) in sources.iter().enumerate() {
        let u = source_to_solution(res, alpha, region, f)?;
        for (r, z) in u.flat().iter().enumerate() {
            mat[[r, c]] = z * w;
        }
    }
    Ok(mat)
}

/// Heat kernel e^{-t Delta}(x_i, x_j) on O x O in weighted nodal coordinates.
pub fn heat_kernel_on_region(res: &SpectralResolution, t: f64, region: &Region) -> Result<Array2<C64>> {
    let basis = res.basis();
    let n = basis.rank();
    let w = basis.torus().cell_volume();
    let size = region.len() * n;
    let mut mat = Array2::<C64>::zeros((size, size));
    for (c, &p) in region.indices.iter().enumerate() {
        for l in 0..n {
            let src = basis.nodal_delta(p, l).mapv(|z| z / w.sqrt());
            let out = RestrictedSection::from_section(res, region, &heat_apply(res, t, &src)?);
            for (r, z) in out.flat().iter().enumerate() {
                mat[[r, c * n + l]] = z * w.sqrt();
            }
        }
    }
    Ok(mat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.0).is_err());
        assert!(FractionalOrder::new(0.5).is_ok());
    }

    #[test]
    fn gamma_weight_closed_forms() {
        let q = GammaQuadrature { step: 0.05, head: 60.0, t_max: 40.0 };
        assert!((q.weight(1.0, 0.5) - 1.0).abs() < 1e-6);
        assert!((q.weight(4.0, 0.5) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn signed_power_signs() {
        assert_eq!(signed_power(4.0, 0.5), 2.0);
        assert_eq!(signed_power(-4.0, 0.5), -2.0);
        assert_eq!(signed_power(0.0, -0.5), 0.0);
    }
}
