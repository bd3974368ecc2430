//! The sensitive screen: a uniform aggregate of small clusters, each with
//! its own pseudorandom phase constant.
//!
//! Geometry (positions, sensitivity flags) is fixed when the screen is
//! generated. Phase constants are redrawn for every incoming packet with
//! [`Screen::refresh_phases`]; geometry is shared between refreshed copies.

use std::cmp::Ordering;
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::phases::{stream_tags, Phase, SeededStream};
use crate::quadrature::Rect;
use crate::scalar::Real;

/// Upper bound on clusters per screen; protects against unit mistakes in
/// the density (m⁻² vs cm⁻²).
pub const MAX_CLUSTERS: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreenError {
    #[error("screen window has zero or non-finite area")]
    ZeroArea,
    #[error("cluster density rho must be positive and finite, got {0}")]
    BadDensity(f64),
    #[error("cluster size sigma_cl must be positive and finite, got {0}")]
    BadClusterSize(f64),
    #[error("efficiency eta must lie in [0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("{0} clusters requested, limit is {MAX_CLUSTERS}")]
    TooManyClusters(usize),
}

/// One cluster of the screen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cluster<T> {
    pub index: usize,
    pub x: T,
    pub z: T,
    /// Linear size σ_cl (width of the Gaussian contraction envelope).
    pub sigma: T,
    /// Area a_cl = σ_cl², the 2-D stand-in for the cluster volume.
    pub area: T,
    pub phase: Phase<T>,
    pub sensitive: bool,
}

impl<T: Real> Cluster<T> {
    /// Square of area `a_cl` centred on the cluster.
    pub fn cell(&self) -> Rect<T> {
        Rect::centered(self.x, self.z, self.area.sqrt() * T::lit(0.5))
    }
}

/// Declarative screen parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenSpec<T> {
    pub window: Rect<T>,
    /// Clusters per unit area.
    pub rho: T,
    pub sigma_cl: T,
    pub eta: T,
    /// Depth gradient `(dy/dx, dy/dz)` of the screen surface along the
    /// propagation axis; `(0, 0)` is a flat screen.
    pub tilt: (T, T),
}

#[derive(Clone, Debug)]
struct Geometry<T> {
    xs: Vec<T>,
    zs: Vec<T>,
    sensitive: Vec<bool>,
    order: Vec<usize>,
    order_is_identity: bool,
}

#[derive(Clone, Debug)]
pub struct Screen<T> {
    spec: ScreenSpec<T>,
    generation_seed: u64,
    geometry: Arc<Geometry<T>>,
    phases: Arc<Vec<Phase<T>>>,
}

/// Generates a screen deterministically from `stream`. Positions, phases and
/// sensitivity flags come from independent sub-streams of it.
pub fn generate_screen<T: Real>(spec: ScreenSpec<T>, stream: &SeededStream) -> Result<Screen<T>, ScreenError> {
    let area = spec.window.area();
    if !(spec.window.is_proper() && area.is_finite()) {
        return Err(ScreenError::ZeroArea);
    }
    if !(spec.rho.is_finite() && spec.rho > T::zero()) {
        return Err(ScreenError::BadDensity(spec.rho.to_f64_lossy()));
    }
    if !(spec.sigma_cl.is_finite() && spec.sigma_cl > T::zero()) {
        return Err(ScreenError::BadClusterSize(spec.sigma_cl.to_f64_lossy()));
    }
    if !(spec.eta >= T::zero() && spec.eta <= T::one()) {
        return Err(ScreenError::BadEfficiency(spec.eta.to_f64_lossy()));
    }
    let expected = (spec.rho * area).to_f64_lossy().round();
    if expected.is_nan() || expected > MAX_CLUSTERS as f64 {
        return Err(ScreenError::TooManyClusters(expected.min(usize::MAX as f64) as usize));
    }
    let count = expected as usize;
    let packing = spec.rho * spec.sigma_cl * spec.sigma_cl;
    if packing > T::one() {
        log::warn!(
            "cluster packing fraction rho*sigma_cl^2 = {packing:.3} exceeds 1; clusters overlap on average"
        );
    }

    let mut pos = stream.substream(stream_tags::SCREEN_POSITIONS);
    let mut xs = Vec::with_capacity(count);
    let mut zs = Vec::with_capacity(count);
    for _ in 0..count {
        let u = T::lit(pos.next_unit());
        let v = T::lit(pos.next_unit());
        xs.push(spec.window.x0 + u * spec.window.width());
        zs.push(spec.window.z0 + v * spec.window.height());
    }
    let mut sens = stream.substream(stream_tags::SCREEN_SENSITIVITY);
    let eta = spec.eta.to_f64_lossy();
    let sensitive = (0..count).map(|_| sens.next_unit() < eta).collect();
    let order = arrival_order_of(&xs, &zs, spec.tilt);
    let order_is_identity = order.iter().enumerate().all(|(i, &k)| i == k);
    let geometry = Geometry {
        xs,
        zs,
        sensitive,
        order,
        order_is_identity,
    };
    let mut phase_stream = stream.substream(stream_tags::SCREEN_PHASES);
    let phases = (0..count).map(|_| phase_stream.draw_phase()).collect();
    Ok(Screen {
        spec,
        generation_seed: stream.seed(),
        geometry: Arc::new(geometry),
        phases: Arc::new(phases),
    })
}

fn arrival_order_of<T: Real>(xs: &[T], zs: &[T], tilt: (T, T)) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    if tilt.0 == T::zero() && tilt.1 == T::zero() {
        return order;
    }
    let depth = |i: usize| tilt.0 * xs[i] + tilt.1 * zs[i];
    order.sort_by(|&a, &b| {
        depth(a)
            .partial_cmp(&depth(b))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

impl<T: Real> Screen<T> {
    pub fn spec(&self) -> &ScreenSpec<T> {
        &self.spec
    }

    pub fn window(&self) -> Rect<T> {
        self.spec.window
    }

    pub fn eta(&self) -> T {
        self.spec.eta
    }

    pub fn rho(&self) -> T {
        self.spec.rho
    }

    pub fn sigma_cl(&self) -> T {
        self.spec.sigma_cl
    }

    pub fn cluster_area(&self) -> T {
        self.spec.sigma_cl * self.spec.sigma_cl
    }

    pub fn generation_seed(&self) -> u64 {
        self.generation_seed
    }

    pub fn len(&self) -> usize {
        self.geometry.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, i: usize) -> (T, T) {
        (self.geometry.xs[i], self.geometry.zs[i])
    }

    pub fn is_sensitive(&self, i: usize) -> bool {
        self.geometry.sensitive[i]
    }

    pub fn phase(&self, i: usize) -> Phase<T> {
        self.phases[i]
    }

    pub fn phases(&self) -> &[Phase<T>] {
        &self.phases
    }

    pub fn cluster(&self, i: usize) -> Cluster<T> {
        Cluster {
            index: i,
            x: self.geometry.xs[i],
            z: self.geometry.zs[i],
            sigma: self.spec.sigma_cl,
            area: self.cluster_area(),
            phase: self.phases[i],
            sensitive: self.geometry.sensitive[i],
        }
    }

    pub fn clusters(&self) -> impl Iterator<Item = Cluster<T>> + '_ {
        (0..self.len()).map(move |i| self.cluster(i))
    }

    /// Same geometry and sensitivity flags; phase `i` is the `i`-th draw
    /// taken from `stream`.
    pub fn refresh_phases(&self, stream: &mut SeededStream) -> Screen<T> {
        let phases = (0..self.len()).map(|_| stream.draw_phase()).collect();
        Screen {
            phases: Arc::new(phases),
            ..self.clone()
        }
    }

    /// Order in which an incoming packet meets the clusters: ascending depth
    /// along the propagation axis, ties by ascending index.
    pub fn arrival_order(&self) -> &[usize] {
        &self.geometry.order
    }

    /// True when the arrival order is plain index order (flat screen).
    pub fn arrival_is_index_order(&self) -> bool {
        self.geometry.order_is_identity
    }

    pub fn sensitive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.geometry.sensitive.iter().filter(|&&s| s).count() as f64 / self.len() as f64
    }

    /// Cluster table as CSV: `index,x,z,alpha2,sensitive`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,x,z,alpha2,sensitive")?;
        for c in self.clusters() {
            writeln!(
                out,
                "{},{},{},{},{}",
                c.index,
                crate::io::fmt_f64(c.x.to_f64_lossy()),
                crate::io::fmt_f64(c.z.to_f64_lossy()),
                crate::io::fmt_f64(c.phase.value().to_f64_lossy()),
                u8::from(c.sensitive)
            )?;
        }
        Ok(())
    }
}

/// Arrival order as a fresh vector, for callers that own a screen.
pub fn arrival_order<T: Real>(screen: &Screen<T>) -> Vec<usize> {
    screen.arrival_order().to_vec()
}
