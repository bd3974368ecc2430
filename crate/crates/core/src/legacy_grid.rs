//! The grid-based build-up algorithm: the screen is cut into `nx × nz` equal
//! areas in normalized coordinates `[0, 1]²`; every draw picks an area and a
//! threshold `R`, and a point is set iff `η |ψ|²/|ψ|²max ≥ R`.
//!
//! Independent of the cluster model, so it serves as a reference path for
//! the point densities it produces.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::fmt_f64;
use crate::phases::SeededStream;
use crate::quadrature::Rect;
use crate::wavepackets::Amplitude;

/// Draws between progress log lines.
const PROGRESS_EVERY: u64 = 10_000_000;

/// `|ψ|²` (unnormalized) on the unit square.
pub type GridDensity = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegacyError {
    #[error("grid needs nx, nz >= 1, got {nx} x {nz}")]
    EmptyGrid { nx: usize, nz: usize },
    #[error("eta must lie in [0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("density is zero (or not finite) on every grid area")]
    ZeroDensity,
    #[error("n_points_target must be at least 1")]
    NoTarget,
    #[error("draw budget of {draws} exhausted with {accepted} of {target} points set")]
    DrawBudget { draws: u64, accepted: usize, target: usize },
}

/// Declarative description of the legacy pattern on `[0, 1]²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPattern {
    Uniform,
    /// Two-slit far field across x with `fringes` periods over the grid and
    /// a single-slit envelope whose first zero sits `envelope` widths from
    /// the centre (`0` disables the envelope).
    DoubleSlit { fringes: f64, envelope: f64 },
}

impl GridPattern {
    pub fn density(&self) -> GridDensity {
        match *self {
            GridPattern::Uniform => Arc::new(|_, _| 1.0),
            GridPattern::DoubleSlit { fringes, envelope } => Arc::new(move |x, _| {
                let u = x - 0.5;
                let c = (PI * fringes * u).cos();
                let s = if envelope > 0.0 {
                    let b = PI * u / envelope;
                    if b == 0.0 {
                        1.0
                    } else {
                        b.sin() / b
                    }
                } else {
                    1.0
                };
                (c * s).powi(2)
            }),
        }
    }
}

#[derive(Clone)]
pub struct GridConfig {
    pub nx: usize,
    pub nz: usize,
    pub eta: f64,
    pub density: GridDensity,
    /// Upper bound on draws in [`legacy_buildup`].
    pub max_draws: u64,
}

impl fmt::Debug for GridConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridConfig")
            .field("nx", &self.nx)
            .field("nz", &self.nz)
            .field("eta", &self.eta)
            .field("max_draws", &self.max_draws)
            .finish_non_exhaustive()
    }
}

impl GridConfig {
    pub fn new(nx: usize, nz: usize, eta: f64, pattern: &GridPattern) -> Self {
        GridConfig {
            nx,
            nz,
            eta,
            density: pattern.density(),
            max_draws: 1_000_000_000,
        }
    }

    /// Uses `|ψ|²` of a field, with `[0, 1]²` mapped onto `window`.
    pub fn from_field(nx: usize, nz: usize, eta: f64, field: impl Amplitude<f64> + 'static, window: Rect<f64>) -> Self {
        let density: GridDensity = Arc::new(move |u, v| {
            field.density(window.x0 + u * window.width(), window.z0 + v * window.height())
        });
        GridConfig {
            nx,
            nz,
            eta,
            density,
            max_draws: 1_000_000_000,
        }
    }
}

/// `η · ratio ≥ R`, inclusive.
pub fn legacy_decision(psi_sq_ratio: f64, eta: f64, r: f64) -> bool {
    eta * psi_sq_ratio >= r
}

/// The grid with `|ψ|²/|ψ|²max` tabulated at area centres.
#[derive(Clone, Debug)]
pub struct Grid {
    nx: usize,
    nz: usize,
    eta: f64,
    ratio: Vec<f64>,
}

impl Grid {
    pub fn new(config: &GridConfig) -> Result<Grid, LegacyError> {
        let (nx, nz) = (config.nx, config.nz);
        if nx == 0 || nz == 0 {
            return Err(LegacyError::EmptyGrid { nx, nz });
        }
        if !(0.0..=1.0).contains(&config.eta) {
            return Err(LegacyError::BadEfficiency(config.eta));
        }
        let mut ratio = Vec::with_capacity(nx * nz);
        for j in 0..nz {
            for i in 0..nx {
                let (x, z) = center(i, j, nx, nz);
                let d = (config.density)(x, z);
                ratio.push(if d.is_finite() && d > 0.0 { d } else { 0.0 });
            }
        }
        let max = ratio.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(LegacyError::ZeroDensity);
        }
        for r in &mut ratio {
            *r /= max;
        }
        Ok(Grid {
            nx,
            nz,
            eta: config.eta,
            ratio,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.ratio[j * self.nx + i]
    }

    /// Mean of `|ψ|²/|ψ|²max` over all areas.
    pub fn mean_ratio(&self) -> f64 {
        self.ratio.iter().sum::<f64>() / self.ratio.len() as f64
    }

    /// `|ψ|²` normalized over the grid, per area, row-major in `z`.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.ratio.iter().sum();
        self.ratio.iter().map(|r| r / total).collect()
    }

    /// One draw: area `(X, Z)` then threshold `R`. Returns the area when a
    /// point is set.
    pub fn draw(&self, stream: &mut SeededStream) -> Option<(usize, usize)> {
        let i = stream.next_below(self.nx as u64) as usize;
        let j = stream.next_below(self.nz as u64) as usize;
        let r = stream.next_unit();
        legacy_decision(self.ratio(i, j), self.eta, r).then_some((i, j))
    }
}

fn center(i: usize, j: usize, nx: usize, nz: usize) -> (f64, f64) {
    ((i as f64 + 0.5) / nx as f64, (j as f64 + 0.5) / nz as f64)
}

/// A cumulative snapshot: the first `points` accepted points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub milestone: usize,
    pub points: usize,
    /// Draws needed to reach the milestone.
    pub draws: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Buildup {
    pub nx: usize,
    pub nz: usize,
    /// Accepted areas in acceptance order.
    pub cells: Vec<(usize, usize)>,
    pub frames: Vec<Frame>,
    pub draws: u64,
}

impl Buildup {
    /// Accepted points at area centres in `[0, 1]²`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.cells.iter().map(|&(i, j)| center(i, j, self.nx, self.nz)).collect()
    }

    /// Per-area counts of the first `prefix` points, row-major in `z`.
    pub fn counts(&self, prefix: usize) -> Vec<u64> {
        let mut c = vec![0u64; self.nx * self.nz];
        for &(i, j) in &self.cells[..prefix.min(self.cells.len())] {
            c[j * self.nx + i] += 1;
        }
        c
    }

    pub fn write_points_csv<W: Write>(&self, mut out: W, prefix: usize) -> io::Result<()> {
        writeln!(out, "x,z")?;
        for (x, z) in self.points().into_iter().take(prefix) {
            writeln!(out, "{},{}", fmt_f64(x), fmt_f64(z))?;
        }
        Ok(())
    }

    /// Binary greyscale image of the first `prefix` points: white background,
    /// every area holding a point drawn black, row 0 at the top (largest z).
    pub fn write_pgm<W: Write>(&self, mut out: W, prefix: usize) -> io::Result<()> {
        let counts = self.counts(prefix);
        write!(out, "P5\n{} {}\n255\n", self.nx, self.nz)?;
        let mut row = vec![0u8; self.nx];
        for j in (0..self.nz).rev() {
            for (i, px) in row.iter_mut().enumerate() {
                *px = if counts[j * self.nx + i] > 0 { 0 } else { 255 };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }
}

/// Decimal milestones `10, 100, …` not exceeding `target`.
pub fn milestones(target: usize) -> Vec<usize> {
    std::iter::successors(Some(10usize), |m| m.checked_mul(10))
        .take_while(|&m| m <= target)
        .collect()
}

/// Repeats draws until `n_points_target` points are set, recording a frame
/// at each decimal milestone. Fails once `max_draws` draws are spent.
pub fn legacy_buildup(
    config: &GridConfig,
    stream: &mut SeededStream,
    n_points_target: usize,
) -> Result<Buildup, LegacyError> {
    if n_points_target == 0 {
        return Err(LegacyError::NoTarget);
    }
    let grid = Grid::new(config)?;
    let marks = milestones(n_points_target);
    let mut cells = Vec::with_capacity(n_points_target.min(1 << 24));
    let mut frames = Vec::with_capacity(marks.len());
    let mut draws = 0u64;
    while cells.len() < n_points_target {
        if draws >= config.max_draws {
            return Err(LegacyError::DrawBudget {
                draws,
                accepted: cells.len(),
                target: n_points_target,
            });
        }
        draws += 1;
        if draws.is_multiple_of(PROGRESS_EVERY) {
            log::info!("legacy: {draws} draws, {} of {n_points_target} points", cells.len());
        }
        if let Some(cell) = grid.draw(stream) {
            cells.push(cell);
            if marks.get(frames.len()) == Some(&cells.len()) {
                frames.push(Frame {
                    milestone: cells.len(),
                    points: cells.len(),
                    draws,
                });
            }
        }
    }
    Ok(Buildup {
        nx: grid.nx,
        nz: grid.nz,
        cells,
        frames,
        draws,
    })
}

/// Exactly `draws` draws; returns the number of points set.
pub fn legacy_sample(config: &GridConfig, stream: &mut SeededStream, draws: u64) -> Result<u64, LegacyError> {
    let grid = Grid::new(config)?;
    Ok((0..draws).filter(|_| grid.draw(stream).is_some()).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{chi_square, merge_sparse_bins, HistogramBin};

    fn config(nx: usize, nz: usize, eta: f64, pattern: GridPattern) -> GridConfig {
        GridConfig::new(nx, nz, eta, &pattern)
    }

    #[test]
    fn decision_examples() {
        for ratio in [0.0, 0.5, 1.0] {
            assert!(!legacy_decision(ratio, 0.0, 1e-9));
        }
        assert!(legacy_decision(1.0, 1.0, 0.5));
        assert!(legacy_decision(0.3, 0.5, 0.15));
        assert!(!legacy_decision(0.3, 0.5, 0.150_000_001));
    }

    #[test]
    fn uniform_field_accepts_everything() {
        let c = config(20, 10, 1.0, GridPattern::Uniform);
        let b = legacy_buildup(&c, &mut SeededStream::new(5, 0), 20_000).unwrap();
        assert_eq!(b.draws, 20_000);
        let counts = b.counts(b.cells.len());
        let bins = counts
            .iter()
            .map(|&o| HistogramBin {
                lo: 0.0,
                hi: 1.0,
                observed: o,
                expected: 100.0,
            })
            .collect();
        let r = chi_square(bins);
        assert!(r.p_value > 0.001, "{r:?}");
    }

    #[test]
    fn double_slit_minima_are_dark() {
        let pattern = GridPattern::DoubleSlit {
            fringes: 8.0,
            envelope: 0.0,
        };
        let c = config(160, 1, 1.0, pattern);
        let b = legacy_buildup(&c, &mut SeededStream::new(9, 0), 10_000).unwrap();
        let counts = b.counts(b.cells.len());
        // 20 areas per fringe; maxima at u = k/8, minima half-way between.
        let bin = |centre: f64| -> u64 {
            let i = (centre * 160.0) as usize;
            counts[i.saturating_sub(2)..(i + 2).min(160)].iter().sum()
        };
        for k in 1..8 {
            let max_at = 0.5 + (k as f64 - 4.0) / 8.0;
            let min_at = max_at + 1.0 / 16.0;
            assert!((bin(min_at) as f64) < 0.05 * bin(max_at) as f64, "fringe {k}");
        }
    }

    #[test]
    fn acceptance_rate_matches_mean_ratio() {
        let pattern = GridPattern::DoubleSlit {
            fringes: 6.0,
            envelope: 0.7,
        };
        let c = config(200, 50, 0.6, pattern);
        let grid = Grid::new(&c).unwrap();
        let n = 1_000_000;
        let accepted = legacy_sample(&c, &mut SeededStream::new(1, 2), n).unwrap();
        let expected = 0.6 * grid.mean_ratio();
        let rate = accepted as f64 / n as f64;
        assert!((rate - expected).abs() / expected < 0.02, "{rate} vs {expected}");
    }

    #[test]
    fn histogram_converges_to_density() {
        let pattern = GridPattern::DoubleSlit {
            fringes: 4.0,
            envelope: 1.5,
        };
        let c = config(40, 4, 1.0, pattern);
        let grid = Grid::new(&c).unwrap();
        let b = legacy_buildup(&c, &mut SeededStream::new(77, 0), 50_000).unwrap();
        let n = b.cells.len() as f64;
        let bins: Vec<HistogramBin> = b
            .counts(b.cells.len())
            .into_iter()
            .zip(grid.probabilities())
            .map(|(o, p)| HistogramBin {
                lo: 0.0,
                hi: 1.0,
                observed: o,
                expected: n * p,
            })
            .collect();
        let r = chi_square(merge_sparse_bins(bins, 5.0));
        assert!(r.p_value > 0.001, "{r:?}");
    }

    #[test]
    fn zero_efficiency_exhausts_budget() {
        let mut c = config(10, 10, 0.0, GridPattern::Uniform);
        c.max_draws = 10_000;
        let err = legacy_buildup(&c, &mut SeededStream::new(1, 0), 1).unwrap_err();
        assert_eq!(
            err,
            LegacyError::DrawBudget {
                draws: 10_000,
                accepted: 0,
                target: 1
            }
        );
        assert_eq!(legacy_sample(&c, &mut SeededStream::new(1, 0), 100_000).unwrap(), 0);
    }

    #[test]
    fn frames_are_prefixes_and_deterministic() {
        let c = config(30, 30, 0.9, GridPattern::DoubleSlit { fringes: 3.0, envelope: 0.0 });
        let a = legacy_buildup(&c, &mut SeededStream::new(3, 1), 1500).unwrap();
        let b = legacy_buildup(&c, &mut SeededStream::new(3, 1), 1500).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames.iter().map(|f| f.milestone).collect::<Vec<_>>(), vec![10, 100, 1000]);
        assert!(a.frames.windows(2).all(|w| w[0].points < w[1].points && w[0].draws < w[1].draws));
        let one = legacy_buildup(&c, &mut SeededStream::new(3, 1), 10).unwrap();
        assert_eq!(one.frames.len(), 1);
        assert_eq!(one.cells[..], a.cells[..10]);
    }

    #[test]
    fn pgm_layout() {
        let c = config(4, 3, 1.0, GridPattern::Uniform);
        let b = legacy_buildup(&c, &mut SeededStream::new(0, 0), 5).unwrap();
        let mut buf = Vec::new();
        b.write_pgm(&mut buf, 5).unwrap();
        let header = b"P5\n4 3\n255\n";
        assert!(buf.starts_with(header));
        assert_eq!(buf.len(), header.len() + 12);
        let dark = buf[header.len()..].iter().filter(|&&p| p == 0).count();
        assert!((1..=5).contains(&dark));
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(
            Grid::new(&config(0, 3, 1.0, GridPattern::Uniform)),
            Err(LegacyError::EmptyGrid { .. })
        ));
        assert!(matches!(
            Grid::new(&config(3, 3, 1.5, GridPattern::Uniform)),
            Err(LegacyError::BadEfficiency(_))
        ));
        assert_eq!(milestones(9), Vec::<usize>::new());
        assert_eq!(milestones(10_000), vec![10, 100, 1000, 10_000]);
    }
}
