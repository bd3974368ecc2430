//! The phase-matching collapse criterion and the single-trial scan.
//!
//! A packet with phase constant `α1` contracts at the first cluster, in
//! arrival order, whose phase constant `α2` satisfies both
//!
//! * `|α1 - α2| ≤ αs/2` (modulo 2π), and
//! * `K ≥ α2/2π`, where `K` is the packet probability inside the cluster.
//!
//! At most one contraction happens per trial. A spot is registered when the
//! contracting cluster is sensitive.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::phases::{circular_distance, stream_tags, Phase, SeededStream};
use crate::quadrature::integrate_2d;
use crate::scalar::Real;
use crate::screen::{Cluster, Screen};
use crate::wavepackets::{Amplitude, Superposition};

/// CODATA 2018 fine-structure constant.
pub const ALPHA_S_CODATA: f64 = 0.007_297_352_569_3;
/// Rounded value used for the hand arithmetic (`2π/αs ≈ 861`).
pub const ALPHA_S_ROUNDED: f64 = 0.007_30;

/// Width of the phase-matching window and the derived occupancy constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants<T> {
    pub alpha_s: T,
    /// Number of αs-wide sections of the full turn, `round(2π/αs)`.
    pub sections: u32,
    /// `-ln(1 - 1/sections)`, ≈ 1/860.5 for 861 sections.
    pub c1: T,
}

impl<T: Real> Constants<T> {
    /// Derives `sections` and `c1` from `alpha_s`; `None` unless
    /// `0 < alpha_s ≤ 2π`.
    pub fn from_alpha_s(alpha_s: T) -> Option<Self> {
        if !(alpha_s > T::zero() && alpha_s <= T::tau()) {
            return None;
        }
        let sections = (T::tau() / alpha_s).round().to_u32()?.max(1);
        let inv = T::one() / T::lit(f64::from(sections));
        let c1 = if sections == 1 { T::infinity() } else { -(-inv).ln_1p() };
        Some(Constants { alpha_s, sections, c1 })
    }

    pub fn codata() -> Self {
        Self::from_alpha_s(T::lit(ALPHA_S_CODATA)).expect("valid constant")
    }

    pub fn rounded() -> Self {
        Self::from_alpha_s(T::lit(ALPHA_S_ROUNDED)).expect("valid constant")
    }

    /// Probability that one uniformly random phase matches a given one,
    /// `αs/2π`.
    pub fn match_probability(&self) -> T {
        (self.alpha_s / T::tau()).min(T::one())
    }
}

impl<T: Real> Default for Constants<T> {
    fn default() -> Self {
        Self::codata()
    }
}

/// Phase-matching condition, boundary inclusive.
pub fn phase_matches<T: Real>(alpha1: Phase<T>, alpha2: Phase<T>, constants: &Constants<T>) -> bool {
    circular_distance(alpha1, alpha2) <= constants.alpha_s * T::lit(0.5)
}

/// Overlap condition `K ≥ α2/2π`, boundary inclusive.
pub fn overlap_condition<T: Real>(k: T, alpha2: Phase<T>) -> bool {
    k >= alpha2.turns()
}

/// How the packet probability inside a cluster is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMode {
    /// `a_cl · |ψ(r0)|²` (mean-value approximation).
    #[default]
    Pointwise,
    /// Midpoint quadrature of `|ψ|²` over the cluster square.
    Exact,
}

/// What happens when a phase-matching cluster fails the overlap condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPolicy {
    /// Keep scanning later clusters.
    #[default]
    Continue,
    /// The trial ends without contraction.
    StopAtFirstMatch,
}

/// How cluster phases are refreshed between trials in an ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRefresh {
    /// Every cluster gets a fresh uniform phase, drawn in index order from
    /// the trial stream.
    #[default]
    Dense,
    /// Only phase-matching clusters are materialized: the gap to the next
    /// match is geometric with success probability `αs/2π` and the matched
    /// phase is uniform on the matching arc. Same law as `Dense`, cost
    /// proportional to the number of matches instead of the screen size.
    Sparse,
}

/// Cells per axis for exact coverage quadrature.
const COVERAGE_CELLS: usize = 16;

/// Packet probability `K` inside a cluster, clamped to `[0, 1]`.
pub fn coverage_k<T: Real>(psi: &impl Amplitude<T>, cluster: &Cluster<T>, mode: CoverageMode) -> T {
    let k = match mode {
        CoverageMode::Pointwise => cluster.area * psi.density(cluster.x, cluster.z),
        CoverageMode::Exact => {
            let full = psi.norm_domain();
            match cluster.cell().intersect(&full) {
                None => T::zero(),
                Some(cell) => {
                    let (px, pz) = psi.quad_cells();
                    let fx = (cell.width() / full.width()).to_f64_lossy();
                    let fz = (cell.height() / full.height()).to_f64_lossy();
                    let nx = ((px as f64 * fx).ceil() as usize).max(COVERAGE_CELLS);
                    let nz = ((pz as f64 * fz).ceil() as usize).max(COVERAGE_CELLS);
                    integrate_2d(&cell, nx, nz, |x, z| psi.density(x, z))
                }
            }
        }
    };
    k.max(T::zero()).min(T::one())
}

/// Outcome of a trial in which a contraction occurred.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotRecord<T> {
    pub trial_id: u64,
    pub cluster_index: usize,
    pub x: T,
    pub z: T,
    pub alpha1: Phase<T>,
    pub alpha2: Phase<T>,
    /// Coverage `K` at the contracting cluster.
    pub coverage: T,
    /// Whether the contraction left a macroscopic spot (sensitive cluster).
    pub registered: bool,
    /// Clusters examined, including the contracting one.
    pub scan_length: usize,
}

impl<T: Real> SpotRecord<T> {
    /// Re-checks both criterion inequalities from the stored fields.
    pub fn witnesses_hold(&self, constants: &Constants<T>) -> bool {
        phase_matches(self.alpha1, self.alpha2, constants) && overlap_condition(self.coverage, self.alpha2)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOptions {
    pub policy: ScanPolicy,
    pub coverage: CoverageMode,
}

/// Scans `screen` (with its current phases) for the contracting cluster of
/// `psi`. `psi` carries `α1` as its phase constant.
pub fn run_trial<T: Real>(
    psi: &impl Amplitude<T>,
    screen: &Screen<T>,
    constants: &Constants<T>,
    trial_id: u64,
    options: TrialOptions,
) -> Option<SpotRecord<T>> {
    let alpha1 = psi.phase_constant();
    for (n, &i) in screen.arrival_order().iter().enumerate() {
        let cluster = screen.cluster(i);
        if !phase_matches(alpha1, cluster.phase, constants) {
            continue;
        }
        let k = coverage_k(psi, &cluster, options.coverage);
        if overlap_condition(k, cluster.phase) {
            return Some(record(trial_id, &cluster, alpha1, k, n + 1));
        }
        if options.policy == ScanPolicy::StopAtFirstMatch {
            return None;
        }
    }
    None
}

fn record<T: Real>(trial_id: u64, c: &Cluster<T>, alpha1: Phase<T>, k: T, scan_length: usize) -> SpotRecord<T> {
    SpotRecord {
        trial_id,
        cluster_index: c.index,
        x: c.x,
        z: c.z,
        alpha1,
        alpha2: c.phase,
        coverage: k,
        registered: c.sensitive,
        scan_length,
    }
}

/// Per-cluster coverage for a fixed packet density and screen geometry.
#[derive(Clone, Debug)]
pub struct CoverageTable<T> {
    values: Vec<T>,
    max: T,
    sum: T,
}

impl<T: Real> CoverageTable<T> {
    pub fn compute(psi: &impl Amplitude<T>, screen: &Screen<T>, mode: CoverageMode) -> Self {
        let values: Vec<T> = screen.clusters().map(|c| coverage_k(psi, &c, mode)).collect();
        let max = values.iter().copied().fold(T::zero(), T::max);
        let sum = values.iter().copied().sum();
        CoverageTable { values, max, sum }
    }

    pub fn get(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max(&self) -> T {
        self.max
    }

    /// `Σ K`, the expected number of clusters passing the overlap test for
    /// a phase-matched packet.
    pub fn total(&self) -> T {
        self.sum
    }

    pub fn mean(&self) -> T {
        if self.values.is_empty() {
            T::zero()
        } else {
            self.sum / T::lit(self.values.len() as f64)
        }
    }
}

/// A packet density in front of a screen, with everything that stays fixed
/// across trials precomputed.
#[derive(Clone)]
pub struct Apparatus<T: Real> {
    psi: Superposition<T>,
    screen: Screen<T>,
    constants: Constants<T>,
    options: TrialOptions,
    refresh: PhaseRefresh,
    coverage: CoverageTable<T>,
}

impl<T: Real> fmt::Debug for Apparatus<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Apparatus")
            .field("clusters", &self.screen.len())
            .field("constants", &self.constants)
            .field("options", &self.options)
            .field("refresh", &self.refresh)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Apparatus<T> {
    pub fn new(
        psi: Superposition<T>,
        screen: Screen<T>,
        constants: Constants<T>,
        options: TrialOptions,
        refresh: PhaseRefresh,
    ) -> Self {
        let coverage = CoverageTable::compute(&psi, &screen, options.coverage);
        Apparatus {
            psi,
            screen,
            constants,
            options,
            refresh,
            coverage,
        }
    }

    pub fn psi(&self) -> &Superposition<T> {
        &self.psi
    }

    pub fn screen(&self) -> &Screen<T> {
        &self.screen
    }

    pub fn constants(&self) -> &Constants<T> {
        &self.constants
    }

    pub fn coverage(&self) -> &CoverageTable<T> {
        &self.coverage
    }

    pub fn options(&self) -> TrialOptions {
        self.options
    }

    /// False when no cluster can possibly contract a packet with phase
    /// `alpha1`: a contraction needs `α2 ≤ 2πK ≤ 2πK_max` and `α2` within
    /// `αs/2` of `α1`. Conservative by a small margin.
    pub fn can_fire(&self, alpha1: Phase<T>) -> bool {
        let band = T::tau() * self.coverage.max;
        let a = alpha1.value();
        let gap = if a <= band { T::zero() } else { (a - band).min(T::tau() - a) };
        gap <= self.constants.alpha_s * T::lit(0.5) + T::lit(1e-9)
    }

    /// One trial for a packet with phase `alpha1`, drawing cluster phases
    /// from `phase_stream` according to the refresh mode.
    pub fn trial(&self, alpha1: Phase<T>, trial_id: u64, phase_stream: SeededStream) -> Option<SpotRecord<T>> {
        if self.screen.is_empty() || !self.can_fire(alpha1) {
            return None;
        }
        match self.refresh {
            PhaseRefresh::Dense => self.dense_trial(alpha1, trial_id, phase_stream),
            PhaseRefresh::Sparse => self.sparse_trial(alpha1, trial_id, phase_stream),
        }
    }

    fn check(&self, i: usize, alpha1: Phase<T>, alpha2: Phase<T>) -> Option<Option<Cluster<T>>> {
        // Some(Some(c)): contraction; Some(None): trial over; None: keep going.
        if !phase_matches(alpha1, alpha2, &self.constants) {
            return None;
        }
        let mut c = self.screen.cluster(i);
        c.phase = alpha2;
        if overlap_condition(self.coverage.get(i), alpha2) {
            Some(Some(c))
        } else if self.options.policy == ScanPolicy::StopAtFirstMatch {
            Some(None)
        } else {
            None
        }
    }

    fn dense_trial(&self, alpha1: Phase<T>, trial_id: u64, mut stream: SeededStream) -> Option<SpotRecord<T>> {
        if self.screen.arrival_is_index_order() {
            // Lazily drawing phase i as the i-th word is the same as a full
            // refresh followed by an index-order scan.
            for i in 0..self.screen.len() {
                let alpha2 = stream.draw_phase();
                if let Some(hit) = self.check(i, alpha1, alpha2) {
                    return hit.map(|c| record(trial_id, &c, alpha1, self.coverage.get(i), i + 1));
                }
            }
            return None;
        }
        let refreshed = self.screen.refresh_phases(&mut stream);
        for (n, &i) in self.screen.arrival_order().iter().enumerate() {
            if let Some(hit) = self.check(i, alpha1, refreshed.phase(i)) {
                return hit.map(|c| record(trial_id, &c, alpha1, self.coverage.get(i), n + 1));
            }
        }
        None
    }

    fn sparse_trial(&self, alpha1: Phase<T>, trial_id: u64, mut stream: SeededStream) -> Option<SpotRecord<T>> {
        let p = self.constants.match_probability().to_f64_lossy();
        let order = self.screen.arrival_order();
        let half = self.constants.alpha_s * T::lit(0.5);
        let log_miss = (-p).ln_1p();
        let mut pos: u64 = 0;
        loop {
            let gap = if p >= 1.0 {
                0
            } else {
                let u = stream.next_unit();
                let g = (-u).ln_1p() / log_miss;
                if g.is_finite() && g < order.len() as f64 {
                    g as u64
                } else {
                    u64::MAX
                }
            };
            pos = pos.saturating_add(gap);
            if pos >= order.len() as u64 {
                return None;
            }
            let v = T::lit(stream.next_unit());
            // Uniform on the closed matching arc, kept strictly inside so that
            // rounding never breaks the witness.
            let offset = (v * T::lit(2.0) - T::one()) * half * T::lit(1.0 - 1e-12);
            let alpha2 = Phase::new(alpha1.value() + offset);
            let i = order[pos as usize];
            if let Some(hit) = self.check(i, alpha1, alpha2) {
                return hit.map(|c| record(trial_id, &c, alpha1, self.coverage.get(i), pos as usize + 1));
            }
            pos += 1;
        }
    }
}

/// Stream addressing for ensembles: the packet phase of trial `t` is word
/// `t` of the packet stream; the cluster phases of trial `t` come from a
/// trial-indexed sub-stream.
#[derive(Clone, Debug)]
pub struct TrialStreams {
    root: SeededStream,
    packet_stream_id: u64,
}

impl TrialStreams {
    pub fn new(master_seed: u64) -> Self {
        Self::for_label(master_seed, 0)
    }

    /// Independent family of trial streams under the same master seed.
    pub fn for_label(master_seed: u64, label: u64) -> Self {
        let root = SeededStream::new(master_seed, 0).substream(label);
        let packet_stream_id = root.substream(stream_tags::PACKET_PHASES).stream_id();
        TrialStreams { root, packet_stream_id }
    }

    pub fn packet_phase<T: Real>(&self, trial_id: u64) -> Phase<T> {
        SeededStream::at(self.root.seed(), self.packet_stream_id, trial_id).draw_phase()
    }

    pub fn cluster_stream(&self, trial_id: u64) -> SeededStream {
        self.root.indexed(stream_tags::TRIAL_PHASES, trial_id)
    }
}

/// Aggregate counts of an ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub trials: u64,
    pub contractions: u64,
    pub registered: u64,
    pub contraction_fraction: f64,
    pub registered_fraction: f64,
    pub clusters: usize,
    /// `Σ K` over the screen.
    pub total_coverage: f64,
    pub mean_coverage: f64,
    pub max_coverage: f64,
    /// `ρ a_cl (αs/2π) η`, the combined efficiency factor in front of `|ψ|²`.
    pub zeta: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult<T> {
    pub records: Vec<SpotRecord<T>>,
    pub summary: EnsembleSummary,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EnsembleError {
    #[error("n_trials must be at least 1")]
    NoTrials,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

const BLOCK: u64 = 8192;

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, EnsembleError> {
    match threads {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| EnsembleError::ThreadPool(e.to_string())),
    }
}

fn run_block<T: Real>(apparatus: &Apparatus<T>, streams: &TrialStreams, lo: u64, hi: u64) -> Vec<SpotRecord<T>> {
    (lo..hi)
        .filter_map(|t| apparatus.trial(streams.packet_phase(t), t, streams.cluster_stream(t)))
        .collect()
}

fn run_range<T: Real>(apparatus: &Apparatus<T>, streams: &TrialStreams, lo: u64, hi: u64) -> Vec<SpotRecord<T>> {
    let blocks: Vec<(u64, u64)> = (lo..hi)
        .step_by(BLOCK as usize)
        .map(|b| (b, (b + BLOCK).min(hi)))
        .collect();
    let parts: Vec<Vec<SpotRecord<T>>> = blocks
        .into_par_iter()
        .map(|(a, b)| run_block(apparatus, streams, a, b))
        .collect();
    parts.into_iter().flatten().collect()
}

/// Runs trials `0..n_trials`: each trial draws a fresh packet phase, refreshes
/// the cluster phases and scans. Records come back in trial order and do not
/// depend on `threads`.
pub fn ensemble_run<T: Real>(
    apparatus: &Apparatus<T>,
    n_trials: u64,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<EnsembleResult<T>, EnsembleError> {
    if n_trials == 0 {
        return Err(EnsembleError::NoTrials);
    }
    let streams = TrialStreams::new(master_seed);
    let records = in_pool(threads, || run_range(apparatus, &streams, 0, n_trials))?;
    Ok(EnsembleResult {
        summary: summarize(apparatus, n_trials, &records),
        records,
    })
}

/// Runs trials in order until `target` spots are registered (or `max_trials`
/// is reached) and truncates after the trial that registered the last one.
pub fn ensemble_until_registered<T: Real>(
    apparatus: &Apparatus<T>,
    target: u64,
    max_trials: u64,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<EnsembleResult<T>, EnsembleError> {
    if max_trials == 0 {
        return Err(EnsembleError::NoTrials);
    }
    let streams = TrialStreams::new(master_seed);
    let chunk = BLOCK * 64;
    let (records, trials) = in_pool(threads, || {
        let mut records = Vec::new();
        let mut registered = 0u64;
        let mut next = 0u64;
        while registered < target && next < max_trials {
            let hi = (next + chunk).min(max_trials);
            for r in run_range(apparatus, &streams, next, hi) {
                if registered >= target {
                    break;
                }
                registered += u64::from(r.registered);
                records.push(r);
            }
            next = hi;
        }
        let trials = if registered >= target {
            records.last().map_or(next, |r| r.trial_id + 1)
        } else {
            next
        };
        (records, trials)
    })?;
    Ok(EnsembleResult {
        summary: summarize(apparatus, trials, &records),
        records,
    })
}

fn summarize<T: Real>(apparatus: &Apparatus<T>, trials: u64, records: &[SpotRecord<T>]) -> EnsembleSummary {
    let contractions = records.len() as u64;
    let registered = records.iter().filter(|r| r.registered).count() as u64;
    let screen = apparatus.screen();
    let zeta = screen.rho().to_f64_lossy()
        * screen.cluster_area().to_f64_lossy()
        * apparatus.constants().match_probability().to_f64_lossy()
        * screen.eta().to_f64_lossy();
    EnsembleSummary {
        trials,
        contractions,
        registered,
        contraction_fraction: contractions as f64 / trials as f64,
        registered_fraction: registered as f64 / trials as f64,
        clusters: screen.len(),
        total_coverage: apparatus.coverage().total().to_f64_lossy(),
        mean_coverage: apparatus.coverage().mean().to_f64_lossy(),
        max_coverage: apparatus.coverage().max().to_f64_lossy(),
        zeta,
    }
}
