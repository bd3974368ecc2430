//! Complex amplitude fields on the screen plane.
//!
//! A field is stored in polar form: a phase-free kernel `e^{iφ}|ψ|` plus the
//! absolute phase constant `α`, so that `ψ = e^{iα} · kernel`. Densities only
//! ever look at the kernel, which makes them independent of `α` by
//! construction.
//!
//! Fields are snapshots at the arrival time on the screen; there is no time
//! argument.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::phases::Phase;
use crate::quadrature::{integrate_2d, integrate_2d_complex, Rect};
use crate::scalar::Real;
use crate::screen::Cluster;

/// Overlap (`∫|ψ_i||ψ_j|`) above which eigenpackets count as overlapping.
pub const SEPARATION_OVERLAP: f64 = 1e-3;

/// Half-width of a Gaussian packet's support, in units of its width.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{0} coefficients for {1} eigenpackets")]
    LengthMismatch(usize, usize),
    #[error("coefficient vector has zero norm")]
    ZeroNorm,
    #[error("eigenpackets {0} and {1} overlap ({2:.3e}); pass Overlap::Allow to accept")]
    Overlapping(usize, usize, f64),
    #[error("integration domains do not intersect")]
    DomainMismatch,
    #[error("cluster {0} does not overlap the packet; contraction undefined")]
    ZeroOverlap(usize),
    #[error("window is degenerate")]
    DegenerateWindow,
    #[error("field is not normalizable: {0}")]
    NotNormalizable(String),
}

pub type Kernel<T> = Arc<dyn Fn(T, T) -> Complex<T> + Send + Sync>;

/// Anything that can be evaluated as a complex amplitude on the screen.
pub trait Amplitude<T: Real>: Send + Sync {
    /// Phase-free part `e^{iφ}|ψ|`.
    fn kernel(&self, x: T, z: T) -> Complex<T>;

    fn phase_constant(&self) -> Phase<T>;

    /// Region over which the field is normalized.
    fn norm_domain(&self) -> Rect<T>;

    /// Suggested midpoint grid (cells along x, cells along z) over the
    /// normalization domain.
    fn quad_cells(&self) -> (usize, usize);

    fn amplitude(&self, x: T, z: T) -> Complex<T> {
        Complex::from_polar(T::one(), self.phase_constant().value()) * self.kernel(x, z)
    }

    fn density(&self, x: T, z: T) -> T {
        self.kernel(x, z).norm_sqr()
    }

    fn norm_sqr(&self) -> T {
        let (nx, nz) = self.quad_cells();
        integrate_2d(&self.norm_domain(), nx, nz, |x, z| self.density(x, z))
    }
}

/// A single evaluable wavepacket with metadata.
#[derive(Clone)]
pub struct Field<T: Real> {
    kernel: Kernel<T>,
    phase_constant: Phase<T>,
    support: Rect<T>,
    norm_domain: Rect<T>,
    cells: (usize, usize),
}

impl<T: Real> Field<T> {
    pub fn from_kernel(kernel: Kernel<T>, support: Rect<T>, norm_domain: Rect<T>, cells: (usize, usize)) -> Self {
        Field {
            kernel,
            phase_constant: Phase::zero(),
            support,
            norm_domain,
            cells,
        }
    }

    pub fn with_phase(mut self, alpha: Phase<T>) -> Self {
        self.phase_constant = alpha;
        self
    }

    /// Bounding box outside which the amplitude is negligible (or zero).
    pub fn support(&self) -> Rect<T> {
        self.support
    }
}

impl<T: Real> Amplitude<T> for Field<T> {
    fn kernel(&self, x: T, z: T) -> Complex<T> {
        (self.kernel)(x, z)
    }

    fn phase_constant(&self) -> Phase<T> {
        self.phase_constant
    }

    fn norm_domain(&self) -> Rect<T> {
        self.norm_domain
    }

    fn quad_cells(&self) -> (usize, usize) {
        self.cells
    }
}

impl<T: Real> fmt::Debug for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("phase_constant", &self.phase_constant)
            .field("support", &self.support)
            .field("norm_domain", &self.norm_domain)
            .finish_non_exhaustive()
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<T, FieldError> {
    if v.is_finite() && v > T::zero() {
        Ok(v)
    } else {
        Err(FieldError::NonPositive {
            name,
            value: v.to_f64_lossy(),
        })
    }
}

/// Normalized 2-D Gaussian packet with density `∝ exp(-r²/(2σ²))` and a
/// plane-wave carrier `exp(i k·r)`.
///
/// The packet is truncated to `center ± 5σ` and normalized over that box, so
/// that packets whose boxes do not intersect are exactly orthogonal.
pub fn gaussian_packet<T: Real>(center: (T, T), width: T, carrier: (T, T)) -> Result<Field<T>, FieldError> {
    let sigma = positive("width", width)?;
    let half = sigma * T::lit(GAUSSIAN_SUPPORT_WIDTHS);
    let support = Rect::centered(center.0, center.1, half);
    let edge = statrs::function::erf::erf(GAUSSIAN_SUPPORT_WIDTHS / std::f64::consts::SQRT_2);
    // ∫_box exp(-r²/2σ²) dA = 2πσ² erf(5/√2)²
    let mass = T::tau() * sigma * sigma * T::lit(edge * edge);
    let scale = mass.sqrt().recip();
    let four_var = T::lit(4.0) * sigma * sigma;
    let (cx, cz) = center;
    let (kx, kz) = carrier;
    let kernel: Kernel<T> = Arc::new(move |x, z| {
        if !support.contains(x, z) {
            return Complex::new(T::zero(), T::zero());
        }
        let (dx, dz) = (x - cx, z - cz);
        let envelope = (-(dx * dx + dz * dz) / four_var).exp() * scale;
        Complex::from_polar(envelope, kx * dx + kz * dz)
    });
    Ok(Field::from_kernel(kernel, support, support, (400, 400)))
}

/// Geometry of a two-slit far-field pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitGeometry<T> {
    pub separation: T,
    pub slit_width: T,
    pub wavelength: T,
    pub screen_distance: T,
}

impl<T: Real> SlitGeometry<T> {
    /// Distance between neighbouring bright fringes, `λL/d`.
    pub fn fringe_period(&self) -> T {
        self.wavelength * self.screen_distance / self.separation
    }

    /// Unnormalized real amplitude `cos(πdx/λL) · sinc(πax/λL)` with
    /// `sinc(u) = sin(u)/u`. A zero slit width gives pure cosine fringes.
    pub fn raw_amplitude(&self, x: T) -> T {
        let scale = T::PI() * x / (self.wavelength * self.screen_distance);
        let fringe = (scale * self.separation).cos();
        let u = scale * self.slit_width;
        let sinc = if u.abs() < T::lit(1e-8) { T::one() } else { u.sin() / u };
        fringe * sinc
    }
}

/// Far-field (Fraunhofer) two-slit amplitude, uniform along z and
/// normalized over `window`.
pub fn double_slit_amplitude<T: Real>(geometry: SlitGeometry<T>, window: Rect<T>) -> Result<Field<T>, FieldError> {
    positive("slit_separation", geometry.separation)?;
    positive("wavelength", geometry.wavelength)?;
    positive("screen_distance", geometry.screen_distance)?;
    if !(geometry.slit_width.is_finite() && geometry.slit_width >= T::zero()) {
        return Err(FieldError::NonPositive {
            name: "slit_width",
            value: geometry.slit_width.to_f64_lossy(),
        });
    }
    if !window.is_proper() {
        return Err(FieldError::DegenerateWindow);
    }
    let fringes = (window.width() / geometry.fringe_period()).to_f64_lossy().ceil().max(1.0);
    let nx = ((fringes * 1024.0) as usize).clamp(4096, 1 << 22);
    let line = crate::quadrature::integrate_1d(window.x0, window.x1, nx * 8, |x| {
        let a = geometry.raw_amplitude(x);
        a * a
    });
    let norm = line * window.height();
    if !(norm.is_finite() && norm > T::zero()) {
        return Err(FieldError::NotNormalizable("double-slit window holds no intensity".into()));
    }
    let scale = norm.sqrt().recip();
    let kernel: Kernel<T> = Arc::new(move |x, z| {
        if !window.contains(x, z) {
            return Complex::new(T::zero(), T::zero());
        }
        Complex::new(geometry.raw_amplitude(x) * scale, T::zero())
    });
    Ok(Field::from_kernel(kernel, window, window, (nx, 1)))
}

/// Whether `superpose` tolerates spatially overlapping eigenpackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overlap {
    Reject,
    Allow,
}

/// Superposition `e^{iα} Σ c_n ψ_n` of eigenpackets sharing one phase
/// constant.
#[derive(Clone)]
pub struct Superposition<T: Real> {
    terms: Arc<Vec<(Complex<T>, Field<T>)>>,
    phase_constant: Phase<T>,
    norm_domain: Rect<T>,
    cells: (usize, usize),
}

/// Builds a normalized superposition from separated eigenpackets.
pub fn superpose<T: Real>(
    coeffs: &[Complex<T>],
    eigenpackets: &[Field<T>],
    alpha: Phase<T>,
) -> Result<Superposition<T>, FieldError> {
    Superposition::new(coeffs, eigenpackets, alpha, Overlap::Reject)
}

impl<T: Real> Superposition<T> {
    pub fn new(
        coeffs: &[Complex<T>],
        eigenpackets: &[Field<T>],
        alpha: Phase<T>,
        overlap: Overlap,
    ) -> Result<Self, FieldError> {
        if coeffs.len() != eigenpackets.len() || coeffs.is_empty() {
            return Err(FieldError::LengthMismatch(coeffs.len(), eigenpackets.len()));
        }
        let plain: T = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if plain.is_nan() || plain <= T::zero() {
            return Err(FieldError::ZeroNorm);
        }
        let n = eigenpackets.len();
        // Gram matrix; off-diagonal entries vanish for disjoint supports.
        let mut norm_sqr = Complex::new(T::zero(), T::zero());
        for i in 0..n {
            for j in 0..n {
                let g = if i == j {
                    Complex::new(eigenpackets[i].norm_sqr(), T::zero())
                } else {
                    let g = inner_product(&eigenpackets[i], &eigenpackets[j]).unwrap_or_default();
                    if i < j {
                        let touch = magnitude_overlap(&eigenpackets[i], &eigenpackets[j]);
                        if overlap == Overlap::Reject && touch >= T::lit(SEPARATION_OVERLAP) {
                            return Err(FieldError::Overlapping(i, j, touch.to_f64_lossy()));
                        }
                    }
                    g
                };
                norm_sqr = norm_sqr + coeffs[i].conj() * coeffs[j] * g;
            }
        }
        if norm_sqr.re.is_nan() || norm_sqr.re <= T::zero() {
            return Err(FieldError::ZeroNorm);
        }
        let scale = norm_sqr.re.sqrt().recip();
        let terms: Vec<_> = coeffs
            .iter()
            .zip(eigenpackets)
            .map(|(c, p)| (*c * scale, p.clone().with_phase(alpha)))
            .collect();
        let domain = terms[1..]
            .iter()
            .fold(terms[0].1.norm_domain(), |acc, (_, p)| acc.union(&p.norm_domain()));
        let cells = terms.iter().fold((1usize, 1usize), |acc, (_, p)| {
            let d = p.norm_domain();
            let (cx, cz) = p.quad_cells();
            let sx = (domain.width() / d.width()).to_f64_lossy();
            let sz = (domain.height() / d.height()).to_f64_lossy();
            (
                acc.0.max((cx as f64 * sx).ceil() as usize),
                acc.1.max((cz as f64 * sz).ceil() as usize),
            )
        });
        Ok(Superposition {
            terms: Arc::new(terms),
            phase_constant: alpha,
            norm_domain: domain,
            cells: (cells.0.min(4096), cells.1.min(4096)),
        })
    }

    /// Same superposition carrying a different phase constant.
    pub fn with_phase(&self, alpha: Phase<T>) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(c, p)| (*c, p.clone().with_phase(alpha)))
            .collect();
        Superposition {
            terms: Arc::new(terms),
            phase_constant: alpha,
            ..self.clone()
        }
    }

    pub fn terms(&self) -> &[(Complex<T>, Field<T>)] {
        &self.terms
    }

    pub fn coefficients(&self) -> Vec<Complex<T>> {
        self.terms.iter().map(|(c, _)| *c).collect()
    }

    /// Wraps a single field as a one-term superposition.
    pub fn single(field: Field<T>) -> Result<Self, FieldError> {
        let alpha = field.phase_constant();
        Self::new(&[Complex::new(T::one(), T::zero())], &[field], alpha, Overlap::Allow)
    }
}

impl<T: Real> Amplitude<T> for Superposition<T> {
    fn kernel(&self, x: T, z: T) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (c, p) in self.terms.iter() {
            acc = acc + *c * p.kernel(x, z);
        }
        acc
    }

    fn phase_constant(&self) -> Phase<T> {
        self.phase_constant
    }

    fn norm_domain(&self) -> Rect<T> {
        self.norm_domain
    }

    fn quad_cells(&self) -> (usize, usize) {
        self.cells
    }
}

impl<T: Real> fmt::Debug for Superposition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Superposition")
            .field("coefficients", &self.coefficients())
            .field("phase_constant", &self.phase_constant)
            .field("norm_domain", &self.norm_domain)
            .finish()
    }
}

fn scaled_cells<T: Real>(cells: (usize, usize), full: &Rect<T>, part: &Rect<T>) -> (usize, usize) {
    let fx = (part.width() / full.width()).to_f64_lossy();
    let fz = (part.height() / full.height()).to_f64_lossy();
    (
        ((cells.0 as f64 * fx).ceil() as usize).max(64),
        ((cells.1 as f64 * fz).ceil() as usize).max(if cells.1 == 1 { 1 } else { 64 }),
    )
}

/// `∫ a* b dA` over the intersection of both normalization domains.
pub fn inner_product<T: Real>(a: &impl Amplitude<T>, b: &impl Amplitude<T>) -> Result<Complex<T>, FieldError> {
    let domain = a.norm_domain().intersect(&b.norm_domain()).ok_or(FieldError::DomainMismatch)?;
    let (nx, nz) = scaled_cells(a.quad_cells(), &a.norm_domain(), &domain);
    let (mx, mz) = scaled_cells(b.quad_cells(), &b.norm_domain(), &domain);
    Ok(integrate_2d_complex(&domain, nx.max(mx), nz.max(mz), |x, z| {
        a.amplitude(x, z).conj() * b.amplitude(x, z)
    }))
}

fn magnitude_overlap<T: Real>(a: &Field<T>, b: &Field<T>) -> T {
    match a.norm_domain().intersect(&b.norm_domain()) {
        None => T::zero(),
        Some(domain) => {
            let (nx, nz) = scaled_cells(a.quad_cells(), &a.norm_domain(), &domain);
            integrate_2d(&domain, nx, nz, |x, z| a.kernel(x, z).norm() * b.kernel(x, z).norm())
        }
    }
}

/// Projection `c_n = (ψ_n, ψ_s)` by quadrature.
pub fn project_coefficient<T: Real>(
    eigenpacket: &impl Amplitude<T>,
    psi: &impl Amplitude<T>,
) -> Result<Complex<T>, FieldError> {
    inner_product(eigenpacket, psi)
}

/// Half-width of the contraction domain around a cluster, in cluster widths.
const CONTRACTION_WIDTHS: f64 = 6.0;

/// Piece of `psi` cut out by a cluster: `ψ_c = ψ_s · |ψ_cl|² / N` with a
/// Gaussian cluster envelope `exp(-|r - r0|²/(2σ_cl²))`. The phase constant
/// of `psi` is carried over unchanged.
pub fn contract<T, A>(psi: &A, cluster: &Cluster<T>) -> Result<Field<T>, FieldError>
where
    T: Real,
    A: Amplitude<T> + Clone + 'static,
{
    let (cx, cz, sigma) = (cluster.x, cluster.z, cluster.sigma);
    let two_var = T::lit(2.0) * sigma * sigma;
    let envelope = move |x: T, z: T| {
        let (dx, dz) = (x - cx, z - cz);
        (-(dx * dx + dz * dz) / two_var).exp()
    };
    let window = Rect::centered(cx, cz, sigma * T::lit(CONTRACTION_WIDTHS));
    contract_with_envelope(psi, envelope, window, cluster.index)
}

/// Contraction with an arbitrary real envelope restricted to `window`.
pub fn contract_with_envelope<T, A, E>(
    psi: &A,
    envelope: E,
    window: Rect<T>,
    cluster_index: usize,
) -> Result<Field<T>, FieldError>
where
    T: Real,
    A: Amplitude<T> + Clone + 'static,
    E: Fn(T, T) -> T + Send + Sync + 'static,
{
    let full = psi.norm_domain();
    let domain = full.intersect(&window).ok_or(FieldError::ZeroOverlap(cluster_index))?;
    let cells = if domain == full {
        psi.quad_cells()
    } else {
        (128, 128)
    };
    let norm_sqr = integrate_2d(&domain, cells.0, cells.1, |x, z| {
        let w = envelope(x, z);
        psi.density(x, z) * w * w
    });
    if !norm_sqr.is_finite() || norm_sqr <= T::zero() {
        return Err(FieldError::ZeroOverlap(cluster_index));
    }
    let scale = norm_sqr.sqrt().recip();
    let source = psi.clone();
    let kernel: Kernel<T> = Arc::new(move |x, z| {
        if !domain.contains(x, z) {
            return Complex::new(T::zero(), T::zero());
        }
        source.kernel(x, z) * (envelope(x, z) * scale)
    });
    Ok(Field::from_kernel(kernel, domain, domain, cells).with_phase(psi.phase_constant()))
}

/// Density-weighted centre `∫ r |ψ|² dA` over the normalization domain.
pub fn centroid<T: Real>(field: &impl Amplitude<T>) -> (T, T) {
    let (nx, nz) = field.quad_cells();
    let d = field.norm_domain();
    let m = integrate_2d(&d, nx, nz, |x, z| field.density(x, z));
    let mx = integrate_2d(&d, nx, nz, |x, z| x * field.density(x, z));
    let mz = integrate_2d(&d, nx, nz, |x, z| z * field.density(x, z));
    (mx / m, mz / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::Phase;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn pair() -> (Field<f64>, Field<f64>) {
        let a = gaussian_packet((-1.0, 0.0), 0.05, (0.0, 0.0)).unwrap();
        let b = gaussian_packet((1.0, 0.0), 0.05, (0.0, 0.0)).unwrap();
        (a, b)
    }

    #[test]
    fn gaussian_norm_and_shape() {
        let g = gaussian_packet((0.0f64, 0.0), 1.0, (3.0, 0.0)).unwrap();
        assert!((g.norm_sqr() - 1.0).abs() < 1e-6);
        let peak = g.amplitude(0.0, 0.0).norm();
        let off = g.amplitude(1.0, 0.0).norm();
        assert!((off / peak - (-0.25f64).exp()).abs() < 1e-12);
        for i in -10..=10 {
            for j in -10..=10 {
                let v = g.amplitude(i as f64 * 0.5, j as f64 * 0.5).norm();
                assert!(v <= peak);
            }
        }
        assert!(matches!(
            gaussian_packet((0.0, 0.0), 0.0, (0.0, 0.0)),
            Err(FieldError::NonPositive { .. })
        ));
        assert!(gaussian_packet((0.0, 0.0), -1.0f64, (0.0, 0.0)).is_err());
    }

    #[test]
    fn gaussian_in_single_precision() {
        let g = gaussian_packet((0.0f32, 0.0), 1.0, (0.0, 0.0)).unwrap();
        assert!((g.norm_sqr() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn single_term_is_phase_shifted_packet() {
        let (a, _) = pair();
        let alpha = Phase::new(1.2);
        let s = superpose(&[c(1.0, 0.0)], std::slice::from_ref(&a), alpha).unwrap();
        for &(x, z) in &[(-1.0, 0.0), (-1.03, 0.02), (-0.95, -0.04)] {
            let expect = Complex::from_polar(1.0, 1.2) * a.amplitude(x, z);
            // Equal up to the quadrature estimate of the packet norm.
            assert!((s.amplitude(x, z) - expect).norm() <= 1e-6 * expect.norm());
        }
    }

    #[test]
    fn two_packets_normalize_and_project() {
        let (a, b) = pair();
        let s = superpose(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], &[a.clone(), b.clone()], Phase::zero())
            .unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);

        let s = superpose(&[c(1.0, 0.0), c(0.0, 0.0)], &[a.clone(), b.clone()], Phase::zero()).unwrap();
        assert!((project_coefficient(&a, &s).unwrap() - c(1.0, 0.0)).norm() < 1e-4);
        assert!(project_coefficient(&b, &s).unwrap().norm() < 1e-4);
        assert_eq!(s.density(1.0, 0.0), 0.0);
        assert!(s.density(-1.0, 0.0) > 0.0);

        let s = superpose(&[c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)], &[a, b.clone()], Phase::zero()).unwrap();
        let got = project_coefficient(&b, &s).unwrap();
        assert!((got - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-4, "{got}");
    }

    #[test]
    fn superpose_errors() {
        let (a, b) = pair();
        assert_eq!(
            superpose(&[c(1.0, 0.0)], &[a.clone(), b.clone()], Phase::zero()).unwrap_err(),
            FieldError::LengthMismatch(1, 2)
        );
        assert_eq!(
            superpose(&[c(0.0, 0.0), c(0.0, 0.0)], &[a.clone(), b], Phase::zero()).unwrap_err(),
            FieldError::ZeroNorm
        );
        let near = gaussian_packet((-0.9, 0.0), 0.05, (0.0, 0.0)).unwrap();
        let err = superpose(&[c(1.0, 0.0), c(1.0, 0.0)], &[a.clone(), near.clone()], Phase::zero()).unwrap_err();
        assert!(matches!(err, FieldError::Overlapping(0, 1, _)));
        // Accepted when flagged, and the Gram matrix keeps the norm at one.
        let s = Superposition::new(&[c(1.0, 0.0), c(1.0, 0.0)], &[a, near], Phase::zero(), Overlap::Allow).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn disjoint_domains_are_a_mismatch() {
        let a = gaussian_packet((0.0, 0.0), 0.1, (0.0, 0.0)).unwrap();
        let far = gaussian_packet((10.0, 0.0), 0.1, (0.0, 0.0)).unwrap();
        assert_eq!(project_coefficient(&far, &a).unwrap_err(), FieldError::DomainMismatch);
    }

    fn cluster(x: f64, z: f64, sigma: f64) -> Cluster<f64> {
        Cluster {
            index: 3,
            x,
            z,
            sigma,
            area: sigma * sigma,
            phase: Phase::new(0.4),
            sensitive: true,
        }
    }

    #[test]
    fn broad_envelope_leaves_packet_unchanged() {
        let (a, b) = pair();
        let s = superpose(&[c(0.6, 0.0), c(0.0, 0.8)], &[a, b], Phase::new(2.0)).unwrap();
        let out = contract(&s, &cluster(0.0, 0.0, 1e7)).unwrap();
        assert_eq!(out.phase_constant(), s.phase_constant());
        for &(x, z) in &[(-1.0, 0.0), (1.02, 0.01), (0.97, -0.03)] {
            assert!((out.amplitude(x, z) - s.amplitude(x, z)).norm() < 1e-6 * s.amplitude(x, z).norm().max(1.0));
        }
    }

    #[test]
    fn narrow_contraction_localizes() {
        let g = gaussian_packet((0.0, 0.0), 1.0, (2.0, 0.5)).unwrap();
        let s = Superposition::single(g.with_phase(Phase::new(5.5))).unwrap();
        let cl = cluster(0.7, -0.4, 0.01);
        let out = contract(&s, &cl).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-6);
        assert_eq!(out.phase_constant().value(), 5.5);
        let (mx, mz) = centroid(&out);
        assert!(((mx - 0.7).powi(2) + (mz + 0.4).powi(2)).sqrt() < 0.01);
    }

    #[test]
    fn contraction_outside_support_fails() {
        let g = gaussian_packet((0.0, 0.0), 1.0, (0.0, 0.0)).unwrap();
        let s = Superposition::single(g).unwrap();
        assert_eq!(contract(&s, &cluster(50.0, 0.0, 0.01)).unwrap_err(), FieldError::ZeroOverlap(3));
    }

    fn slit() -> (SlitGeometry<f64>, Rect<f64>) {
        let geo = SlitGeometry {
            separation: 1e-6,
            slit_width: 1e-7,
            wavelength: 5.4e-12,
            screen_distance: 1.0,
        };
        (geo, Rect::new(-2.5e-5, 2.5e-5, -2e-9, 2e-9))
    }

    #[test]
    fn double_slit_symmetry_null_and_norm() {
        let (geo, win) = slit();
        let f = double_slit_amplitude(geo, win).unwrap();
        for i in 0..50 {
            let x = i as f64 * 4.7e-7;
            assert!((f.amplitude(x, 0.0) - f.amplitude(-x, 0.0)).norm() < 1e-9 * f.amplitude(0.0, 0.0).norm());
        }
        let null = geo.wavelength * geo.screen_distance / (2.0 * geo.separation);
        assert!(f.density(null, 0.0) < 1e-20 * f.density(0.0, 0.0));
        assert!((f.norm_sqr() - 1.0).abs() < 1e-6);
        assert!((geo.fringe_period() - 5.4e-6).abs() < 1e-18);
    }

    #[test]
    fn double_slit_fringe_spacing() {
        let (geo, win) = slit();
        let f = double_slit_amplitude(geo, win).unwrap();
        let n = 200_000;
        let h = win.width() / n as f64;
        let d: Vec<f64> = (0..=n).map(|i| f.density(win.x0 + i as f64 * h, 0.0)).collect();
        let peaks: Vec<f64> = (1..n)
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1] && d[i] > 1e-3 * d[n / 2])
            .map(|i| win.x0 + i as f64 * h)
            .collect();
        assert!(peaks.len() >= 7);
        let spacing = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
        // Sinc envelope pulls off-centre maxima slightly; well under one cell per peak.
        assert!((spacing - geo.fringe_period()).abs() < 0.01 * geo.fringe_period(), "{spacing}");
        let central = peaks.iter().cloned().fold(f64::INFINITY, |a, p| if p.abs() < a.abs() { p } else { a });
        assert!(central.abs() <= h);
    }

    #[test]
    fn double_slit_rejects_bad_geometry() {
        let (mut geo, win) = slit();
        geo.wavelength = 0.0;
        assert!(double_slit_amplitude(geo, win).is_err());
        let (geo, _) = slit();
        assert_eq!(
            double_slit_amplitude(geo, Rect::new(0.0, 0.0, 0.0, 1.0)).unwrap_err(),
            FieldError::DegenerateWindow
        );
    }

    #[test]
    fn density_ignores_global_phase() {
        let (a, b) = pair();
        let s1 = superpose(&[c(0.3, 0.1), c(-0.2, 0.9)], &[a, b], Phase::new(0.1)).unwrap();
        let s2 = s1.with_phase(Phase::new(PI));
        for i in 0..40 {
            let x = -1.2 + i as f64 * 0.06;
            assert_eq!(s1.density(x, 0.01), s2.density(x, 0.01));
        }
    }
}
