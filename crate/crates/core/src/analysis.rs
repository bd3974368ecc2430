//! Statistical verification: goodness-of-fit tests of spot ensembles against
//! `|ψ|²`, region frequencies against `|c_n|²`, the phase-interval occupancy
//! formulas with a brute-force birthday oracle, and closed-form kinematics.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::collapse::{Constants, SpotRecord};
use crate::phases::{stream_tags, SeededStream};
use crate::quadrature::{integrate_1d, integrate_2d, Rect};
use crate::wavepackets::Amplitude;

/// Bins whose expected count falls below this are merged with neighbours.
pub const MIN_EXPECTED_PER_BIN: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {need} registered spots, have {have}")]
    TooFewSpots { have: usize, need: usize },
    #[error("spot of trial {trial_id} at ({x:e}, {z:e}) lies outside every region of region_map")]
    SpotOutsideRegions { trial_id: u64, x: f64, z: f64 },
    #[error("region_map is empty")]
    NoRegions,
    #[error("{regions} regions but {coefficients} coefficients")]
    RegionMismatch { regions: usize, coefficients: usize },
    #[error("interval [{lo}, {hi}] lies outside the range [{range_lo}, {range_hi}]")]
    IntervalOutside { lo: f64, hi: f64, range_lo: f64, range_hi: f64 },
    #[error("density integrates to {0} over its range, expected 1")]
    NotNormalized(f64),
    #[error("need at least one bin")]
    NoBins,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub observed: u64,
    pub expected: f64,
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub total: u64,
    pub bins: Vec<HistogramBin>,
}

impl GofReport {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }

    /// Plot-ready `(bin_lo, bin_hi, observed, expected)` rows.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("lo,hi,observed,expected\n");
        for b in &self.bins {
            s.push_str(&format!(
                "{},{},{},{}\n",
                crate::io::fmt_f64(b.lo),
                crate::io::fmt_f64(b.hi),
                b.observed,
                crate::io::fmt_f64(b.expected)
            ));
        }
        s
    }
}

/// Greedy left-to-right merge until every bin expects at least `min_expected`
/// counts; a short tail is folded into the last complete bin.
pub fn merge_sparse_bins(bins: Vec<HistogramBin>, min_expected: f64) -> Vec<HistogramBin> {
    let mut out: Vec<HistogramBin> = Vec::with_capacity(bins.len());
    let mut pending: Option<HistogramBin> = None;
    for b in bins {
        let cur = match pending.take() {
            None => b,
            Some(mut p) => {
                p.hi = b.hi;
                p.observed += b.observed;
                p.expected += b.expected;
                p
            }
        };
        if cur.expected >= min_expected {
            out.push(cur);
        } else {
            pending = Some(cur);
        }
    }
    if let Some(tail) = pending {
        match out.last_mut() {
            Some(last) => {
                last.hi = tail.hi;
                last.observed += tail.observed;
                last.expected += tail.expected;
            }
            None => out.push(tail),
        }
    }
    out
}

/// Pearson chi-square over the given bins, `k - 1` degrees of freedom.
pub fn chi_square(bins: Vec<HistogramBin>) -> GofReport {
    let total = bins.iter().map(|b| b.observed).sum();
    let statistic: f64 = bins
        .iter()
        .map(|b| {
            let d = b.observed as f64 - b.expected;
            if b.expected > 0.0 {
                d * d / b.expected
            } else if b.observed > 0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if !statistic.is_finite() {
        0.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive dof");
        dist.sf(statistic)
    };
    GofReport {
        statistic,
        dof,
        p_value,
        total,
        bins,
    }
}

/// Bin placement along the x axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    EqualWidth(usize),
    /// Edges at quantiles of the expected distribution.
    EqualProbability(usize),
}

impl Binning {
    pub fn count(&self) -> usize {
        match *self {
            Binning::EqualWidth(n) | Binning::EqualProbability(n) => n,
        }
    }
}

/// Tabulated marginal distribution of `|ψ|²` along x.
#[derive(Clone, Debug)]
pub struct Marginal {
    edges: Vec<f64>,
    cdf: Vec<f64>,
}

impl Marginal {
    pub fn of_field(field: &impl Amplitude<f64>, cells: usize) -> Marginal {
        Self::over(field, field.norm_domain(), cells)
    }

    /// Marginal of the density restricted to `domain`.
    pub fn over(field: &impl Amplitude<f64>, domain: Rect<f64>, cells: usize) -> Marginal {
        let nx = cells.max(field.quad_cells().0).max(16);
        let nz = field.quad_cells().1.max(1);
        let h = domain.width() / nx as f64;
        let mut edges = Vec::with_capacity(nx + 1);
        let mut cdf = Vec::with_capacity(nx + 1);
        let mut acc = 0.0;
        edges.push(domain.x0);
        cdf.push(0.0);
        for i in 0..nx {
            let lo = domain.x0 + i as f64 * h;
            let strip = Rect::new(lo, lo + h, domain.z0, domain.z1);
            acc += integrate_2d(&strip, 1, nz, |x, z| field.density(x, z));
            edges.push(lo + h);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        Marginal { edges, cdf }
    }

    /// Same interface over a 1-D density.
    pub fn of_density(density: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Marginal {
        let n = cells.max(16);
        let h = (hi - lo) / n as f64;
        let mut edges = vec![lo];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for i in 0..n {
            let a = lo + i as f64 * h;
            acc += integrate_1d(a, a + h, 4, &density);
            edges.push(a + h);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Marginal { edges, cdf }
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        *self.edges.last().expect("non-empty")
    }

    /// Cumulative probability at `x` (piecewise linear).
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo() {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let i = self.edges.partition_point(|&e| e <= x) - 1;
        let t = (x - self.edges[i]) / (self.edges[i + 1] - self.edges[i]);
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse CDF (piecewise linear).
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.edges[i - 1] + t * (self.edges[i] - self.edges[i - 1])
    }

    pub fn probability(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(hi) - self.cdf(lo)
    }

    pub fn edges_for(&self, binning: Binning) -> Vec<f64> {
        let n = binning.count().max(1);
        let mut edges: Vec<f64> = match binning {
            Binning::EqualWidth(_) => (0..=n)
                .map(|i| self.lo() + (self.hi() - self.lo()) * i as f64 / n as f64)
                .collect(),
            Binning::EqualProbability(_) => (0..=n).map(|i| self.quantile(i as f64 / n as f64)).collect(),
        };
        edges[0] = self.lo();
        edges[n] = self.hi();
        edges
    }
}

/// Histogram of `values` against the marginal, before merging.
pub fn histogram(values: &[f64], marginal: &Marginal, binning: Binning) -> Vec<HistogramBin> {
    let edges = marginal.edges_for(binning);
    let n = values.len() as f64;
    let mut bins: Vec<HistogramBin> = edges
        .windows(2)
        .map(|w| HistogramBin {
            lo: w[0],
            hi: w[1],
            observed: 0,
            expected: n * marginal.probability(w[0], w[1]),
        })
        .collect();
    let last = bins.len() - 1;
    for &v in values {
        let k = edges.partition_point(|&e| e <= v).saturating_sub(1).min(last);
        bins[k].observed += 1;
    }
    bins
}

/// Chi-square test of registered spot x-positions against the x-marginal of
/// `|ψ|²` over `field`'s normalization domain. Requires at least
/// `min_per_bin · bins` registered spots.
pub fn born_density_test(
    spots: &[SpotRecord<f64>],
    field: &impl Amplitude<f64>,
    binning: Binning,
    min_per_bin: usize,
) -> Result<GofReport, AnalysisError> {
    if binning.count() == 0 {
        return Err(AnalysisError::NoBins);
    }
    let xs: Vec<f64> = spots.iter().filter(|s| s.registered).map(|s| s.x).collect();
    let need = min_per_bin * binning.count();
    if xs.len() < need || xs.is_empty() {
        return Err(AnalysisError::TooFewSpots {
            have: xs.len(),
            need: need.max(1),
        });
    }
    let marginal = Marginal::of_field(field, 8192);
    let bins = histogram(&xs, &marginal, binning);
    Ok(chi_square(merge_sparse_bins(bins, MIN_EXPECTED_PER_BIN)))
}

/// Labelled spatial region `Δ_n` carrying eigenvalue `o_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: String,
    pub rect: Rect<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionOutcome {
    pub label: String,
    pub observed: u64,
    pub frequency: f64,
    pub expected_probability: f64,
    /// Binomial standard deviation of the frequency at the expected value.
    pub sigma: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub total: u64,
    pub regions: Vec<RegionOutcome>,
    pub gof: GofReport,
}

impl RegionReport {
    /// Every region frequency within `k` binomial sigmas of `|c_n|²`.
    pub fn within_sigmas(&self, k: f64) -> bool {
        self.regions
            .iter()
            .all(|r| (r.frequency - r.expected_probability).abs() <= k * r.sigma)
    }
}

/// Compares region frequencies of registered spots with `|c_n|²`.
pub fn discrete_region_test(
    spots: &[SpotRecord<f64>],
    regions: &[Region],
    coefficients: &[Complex<f64>],
) -> Result<RegionReport, AnalysisError> {
    if regions.is_empty() {
        return Err(AnalysisError::NoRegions);
    }
    if regions.len() != coefficients.len() {
        return Err(AnalysisError::RegionMismatch {
            regions: regions.len(),
            coefficients: coefficients.len(),
        });
    }
    let mut counts = vec![0u64; regions.len()];
    for s in spots.iter().filter(|s| s.registered) {
        let k = regions
            .iter()
            .position(|r| r.rect.contains(s.x, s.z))
            .ok_or(AnalysisError::SpotOutsideRegions {
                trial_id: s.trial_id,
                x: s.x,
                z: s.z,
            })?;
        counts[k] += 1;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(AnalysisError::TooFewSpots { have: 0, need: 1 });
    }
    let weight: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    let n = total as f64;
    let mut outcomes = Vec::new();
    let mut bins = Vec::new();
    for (i, (r, c)) in regions.iter().zip(coefficients).enumerate() {
        let p = c.norm_sqr() / weight;
        let f = counts[i] as f64 / n;
        let sigma = (p * (1.0 - p) / n).sqrt();
        let z_score = if sigma > 0.0 {
            (f - p) / sigma
        } else if f == p {
            0.0
        } else {
            f64::INFINITY
        };
        outcomes.push(RegionOutcome {
            label: r.label.clone(),
            observed: counts[i],
            frequency: f,
            expected_probability: p,
            sigma,
            z_score,
        });
        bins.push(HistogramBin {
            lo: i as f64,
            hi: i as f64 + 1.0,
            observed: counts[i],
            expected: n * p,
        });
    }
    // Regions that can never be hit carry no information.
    bins.retain(|b| b.expected > 0.0 || b.observed > 0);
    Ok(RegionReport {
        total,
        regions: outcomes,
        gof: chi_square(bins),
    })
}

/// Cells used by [`continuous_interval_probability`] per full range.
const INTERVAL_CELLS: usize = 200_000;

/// `∫_interval ρ(a) da` for a density normalized on `range`.
pub fn continuous_interval_probability(
    density: impl Fn(f64) -> f64,
    range: (f64, f64),
    interval: (f64, f64),
) -> Result<f64, AnalysisError> {
    let (a, b) = range;
    let (lo, hi) = interval;
    if lo < a || hi > b || lo > hi {
        return Err(AnalysisError::IntervalOutside {
            lo,
            hi,
            range_lo: a,
            range_hi: b,
        });
    }
    let total = integrate_1d(a, b, INTERVAL_CELLS, &density);
    if (total - 1.0).abs() > 1e-6 {
        return Err(AnalysisError::NotNormalized(total));
    }
    let cells = ((INTERVAL_CELLS as f64 * (hi - lo) / (b - a)).ceil() as usize).max(1000);
    Ok(integrate_1d(lo, hi, cells, &density))
}

/// Chi-square test of angular spot positions (stored in `x`) against a 1-D
/// density on `range`, with expected bin mass from
/// [`continuous_interval_probability`].
pub fn angular_test(
    spots: &[SpotRecord<f64>],
    density: impl Fn(f64) -> f64,
    range: (f64, f64),
    bins: usize,
) -> Result<GofReport, AnalysisError> {
    if bins == 0 {
        return Err(AnalysisError::NoBins);
    }
    let xs: Vec<f64> = spots.iter().filter(|s| s.registered).map(|s| s.x).collect();
    if xs.is_empty() {
        return Err(AnalysisError::TooFewSpots { have: 0, need: 1 });
    }
    let n = xs.len() as f64;
    let w = (range.1 - range.0) / bins as f64;
    let mut hist = Vec::with_capacity(bins);
    for i in 0..bins {
        let lo = range.0 + i as f64 * w;
        let hi = if i + 1 == bins { range.1 } else { lo + w };
        let p = continuous_interval_probability(&density, range, (lo, hi))?;
        hist.push(HistogramBin {
            lo,
            hi,
            observed: 0,
            expected: n * p,
        });
    }
    for &x in &xs {
        let k = (((x - range.0) / w) as usize).min(bins - 1);
        hist[k].observed += 1;
    }
    Ok(chi_square(merge_sparse_bins(hist, MIN_EXPECTED_PER_BIN)))
}

/// How the linear occupancy approximation counts sections.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionConvention {
    /// `n / sections` (861 for αs ≈ 1/137).
    #[default]
    Sections,
    /// `n · αs / 2π` without rounding the section count.
    AlphaS,
}

/// Mean fraction of phase sections occupied by `n` clusters,
/// `1 - exp(-c1 n)`.
pub fn overlap_fraction_exact(n: u64, constants: &Constants<f64>) -> f64 {
    -(-constants.c1 * n as f64).exp_m1()
}

/// Non-overlapping approximation `n αs / 2π`.
pub fn overlap_fraction_linear(n: u64, constants: &Constants<f64>, convention: SectionConvention) -> f64 {
    match convention {
        SectionConvention::Sections => n as f64 / f64::from(constants.sections),
        SectionConvention::AlphaS => n as f64 * constants.alpha_s / std::f64::consts::TAU,
    }
}

/// Relative error of the linear approximation, `(linear - exact)/exact`.
pub fn linear_relative_error(n: u64, constants: &Constants<f64>, convention: SectionConvention) -> f64 {
    let exact = overlap_fraction_exact(n, constants);
    if exact == 0.0 {
        return 0.0;
    }
    (overlap_fraction_linear(n, constants, convention) - exact) / exact
}

/// Monte-Carlo occupancy estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthdayEstimate {
    pub sections: u32,
    pub balls: u64,
    pub trials: u64,
    pub mean_occupied_fraction: f64,
    pub mean_empty: f64,
    /// Standard error of `mean_occupied_fraction`.
    pub std_error: f64,
}

const BIRTHDAY_CHUNK: u64 = 1024;

/// Drops `n` balls uniformly into `sections` boxes, `trials` times, and
/// averages the occupied fraction. Chunks of trials use their own indexed
/// sub-streams; counts are integers, so the result does not depend on how
/// chunks are scheduled.
pub fn birthday_oracle(sections: u32, n: u64, trials: u64, stream: &SeededStream) -> BirthdayEstimate {
    let sections = sections.max(1);
    let trials = trials.max(1);
    let chunks = trials.div_ceil(BIRTHDAY_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = stream.indexed(stream_tags::BIRTHDAY, c);
            let mut stamp = vec![u64::MAX; sections as usize];
            let lo = c * BIRTHDAY_CHUNK;
            let hi = (lo + BIRTHDAY_CHUNK).min(trials);
            let mut sum = 0u64;
            let mut sum_sq = 0u128;
            for t in lo..hi {
                let mut occupied = 0u64;
                for _ in 0..n {
                    let b = s.next_below(u64::from(sections)) as usize;
                    if stamp[b] != t {
                        stamp[b] = t;
                        occupied += 1;
                    }
                }
                sum += occupied;
                sum_sq += u128::from(occupied) * u128::from(occupied);
            }
            (sum, sum_sq)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let k = f64::from(sections);
    let t = trials as f64;
    let mean = sum as f64 / t;
    let var = (sum_sq as f64 / t - mean * mean).max(0.0);
    BirthdayEstimate {
        sections,
        balls: n,
        trials,
        mean_occupied_fraction: mean / k,
        mean_empty: k - mean,
        std_error: (var / t).sqrt() / k,
    }
}

/// Closed-form mean number of empty boxes, `k ((k-1)/k)^n`.
pub fn mean_empty_closed_form(sections: u32, n: u64) -> f64 {
    let k = f64::from(sections);
    k * ((k - 1.0) / k).powf(n as f64)
}

/// Physical constants (SI).
pub mod si {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const ELECTRON_VOLT: f64 = 1.602_176_634e-19;
    pub const LIGHT_SPEED: f64 = 299_792_458.0;
    pub const ELECTRON_REST_KEV: f64 = 510.999;
}

/// Relativistic momentum (kg·m/s) of an electron with kinetic energy in keV,
/// `pc = sqrt(T² + 2 T mc²)`.
pub fn electron_momentum(kinetic_kev: f64) -> f64 {
    let pc_kev = (kinetic_kev * kinetic_kev + 2.0 * kinetic_kev * si::ELECTRON_REST_KEV).sqrt();
    pc_kev * 1e3 * si::ELECTRON_VOLT / si::LIGHT_SPEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            expected,
            tolerance,
            pass: (value - expected).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicsReport {
    pub checks: Vec<Check>,
    /// `ħ/(2Δx)` for the Bohr-radius sized cluster.
    pub min_transverse_momentum_spread: f64,
    pub electron_momentum: f64,
    pub de_broglie_wavelength: f64,
}

impl KinematicsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Recomputes the wavepacket-size and momentum-spread numbers for 50 keV
/// electrons contracted to Bohr-radius scale.
pub fn kinematics_checks() -> KinematicsReport {
    let sigma = 1e-10;
    let lambda0 = 5.4e-12;
    let dx = 0.5e-10;
    let dp_quoted = 1e-24;
    let p = electron_momentum(50.0);
    let dp_min = si::HBAR / (2.0 * dx);
    let angle_deg = (lambda0 / (4.0 * std::f64::consts::PI * sigma)).to_degrees();
    KinematicsReport {
        checks: vec![
            Check::new("sigma_over_lambda0", sigma / lambda0, 18.5, 0.1),
            Check::new("spreading_angle_deg", angle_deg, 0.25, 0.01),
            Check::new("delta_p_over_p", dp_quoted / p, 0.009, 0.001),
            Check::new("min_delta_p_x_exceeds_1e-24", f64::from(u8::from(dp_min >= 1e-24)), 1.0, 0.0),
        ],
        min_transverse_momentum_spread: dp_min,
        electron_momentum: p,
        de_broglie_wavelength: si::PLANCK / p,
    }
}

/// Probability that a trial contracts (or registers, with
/// `registered_only`), obtained by integrating the per-cluster firing
/// probabilities over the packet phase:
///
/// `P = (1/2π) ∫ dα1 Σ_j p_j(α1) s_j Π_{i before j} (1 - p_j(α1))`,
///
/// with `p_j(α1) = |[α1 - αs/2, α1 + αs/2] ∩ [0, 2πK_j]| / 2π`. `coverage`
/// and `sensitive` are given in arrival order. Assumes the continue policy.
pub fn expected_contraction_probability(
    coverage: &[f64],
    sensitive: &[bool],
    constants: &Constants<f64>,
    registered_only: bool,
    alpha_points: usize,
) -> f64 {
    use std::f64::consts::TAU;
    let half = constants.alpha_s / 2.0;
    let k_max = coverage.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = (-half, TAU * k_max + half);
    let n = alpha_points.max(16);
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    for s in 0..n {
        let a = lo + (s as f64 + 0.5) * h;
        let mut survive = 1.0;
        let mut fire = 0.0;
        for (k, &sens) in coverage.iter().zip(sensitive) {
            let overlap = ((a + half).min(TAU * k) - (a - half).max(0.0)).max(0.0);
            let p = overlap / TAU;
            if !registered_only || sens {
                fire += survive * p;
            }
            survive *= 1.0 - p;
        }
        total += fire;
    }
    total * h / TAU
}

/// Registered spots drawn directly from `|ψ|²` by inverse-CDF sampling of
/// the x-marginal (z uniform over the domain). Bypasses the collapse model.
pub fn oracle_spots(field: &impl Amplitude<f64>, n: usize, stream: &mut SeededStream) -> Vec<SpotRecord<f64>> {
    let marginal = Marginal::of_field(field, 8192);
    let d = field.norm_domain();
    (0..n)
        .map(|i| {
            let x = marginal.quantile(stream.next_unit());
            let z = d.z0 + stream.next_unit() * d.height();
            SpotRecord {
                trial_id: i as u64,
                cluster_index: i,
                x,
                z,
                alpha1: crate::phases::Phase::zero(),
                alpha2: crate::phases::Phase::zero(),
                coverage: 0.0,
                registered: true,
                scan_length: 0,
            }
        })
        .collect()
}
