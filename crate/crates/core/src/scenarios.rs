//! Experiment builders: double slit, Stern-Gerlach, a chain of alternating
//! Stern-Gerlach apparatuses, and a scattering shell. Builders produce
//! [`ScenarioConfig`] values; [`instantiate`] turns a config and a seed into
//! a ready [`Apparatus`].

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Region;
use crate::collapse::{in_pool, Apparatus, Constants, EnsembleError, PhaseRefresh, TrialOptions};
use crate::config::{
    AngularAmplitude, Axis, ConfigError, ConstantsConfig, FieldSpec, RegionConfig, RunConfig, ScenarioConfig,
    ScreenConfig, ShellMeasure, Window,
};
use crate::phases::{stream_tags, Phase, SeededStream};
use crate::quadrature::{integrate_1d, integrate_2d, Rect};
use crate::screen::{generate_screen, Screen, ScreenError, ScreenSpec};
use crate::wavepackets::{
    double_slit_amplitude, gaussian_packet, Amplitude, Field, FieldError, Kernel, Overlap, SlitGeometry,
    Superposition, GAUSSIAN_SUPPORT_WIDTHS,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("screen: {0}")]
    Screen(#[from] ScreenError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("{0}")]
    Precondition(String),
}

/// Parameters of the double-slit scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleSlitParams {
    pub separation: f64,
    pub slit_width: f64,
    pub wavelength: f64,
    pub screen_distance: f64,
    /// Screen extends over `|x| ≤ half_width`.
    pub half_width: f64,
    /// Screen extent along z.
    pub height: f64,
    pub rho: f64,
    pub sigma_cl: f64,
    pub eta: f64,
}

impl Default for DoubleSlitParams {
    /// 50 keV electrons through slits 1 µm apart, screen at 1 m; about 9
    /// fringes and 10⁶ clusters whose coverages add up to 5.
    fn default() -> Self {
        DoubleSlitParams {
            separation: 1e-6,
            slit_width: 1e-7,
            wavelength: 5.4e-12,
            screen_distance: 1.0,
            half_width: 2.5e-5,
            height: 4e-9,
            rho: 5e18,
            sigma_cl: 1e-9,
            eta: 1.0,
        }
    }
}

pub fn build_double_slit(p: DoubleSlitParams) -> Result<ScenarioConfig, ConfigError> {
    let config = ScenarioConfig {
        name: "double_slit".into(),
        field: FieldSpec::DoubleSlit {
            separation: p.separation,
            slit_width: p.slit_width,
            wavelength: p.wavelength,
            screen_distance: p.screen_distance,
        },
        screen: ScreenConfig {
            window: Some(Window {
                x_min: -p.half_width,
                x_max: p.half_width,
                z_min: 0.0,
                z_max: p.height,
            }),
            rho: p.rho,
            sigma_cl: p.sigma_cl,
            eta: p.eta,
            tilt: [0.0, 0.0],
        },
        constants: ConstantsConfig::default(),
        run: RunConfig {
            phase_refresh: PhaseRefresh::Sparse,
            ..RunConfig::default()
        },
        region_map: None,
    };
    config.validate()?;
    Ok(config)
}

/// Default Stern-Gerlach screen: 3·10⁶ clusters with total coverage 1.
pub const SG_RHO: f64 = 1e16;
pub const SG_SIGMA_CL: f64 = 1e-8;

/// Spin-½ preparation amplitudes `(cos θ/2, sin θ/2)`.
pub fn spin_coefficients(theta: f64) -> [Complex<f64>; 2] {
    [
        Complex::new((theta / 2.0).cos(), 0.0),
        Complex::new((theta / 2.0).sin(), 0.0),
    ]
}

/// Window holding both truncated packets; the axis coordinate is symmetric.
pub fn stern_gerlach_window(separation: f64, packet_width: f64, axis: Axis) -> Rect<f64> {
    let across = GAUSSIAN_SUPPORT_WIDTHS * packet_width;
    let along = separation / 2.0 + across;
    match axis {
        Axis::Z => Rect::new(-across, across, -along, along),
        Axis::X => Rect::new(-along, along, -across, across),
    }
}

/// Half-planes `o = +½` (positive axis coordinate) and `o = -½`.
pub fn stern_gerlach_regions(window: Rect<f64>, axis: Axis) -> Vec<RegionConfig> {
    let (plus, minus) = match axis {
        Axis::Z => (
            Rect::new(window.x0, window.x1, 0.0, window.z1),
            Rect::new(window.x0, window.x1, window.z0, 0.0),
        ),
        Axis::X => (
            Rect::new(0.0, window.x1, window.z0, window.z1),
            Rect::new(window.x0, 0.0, window.z0, window.z1),
        ),
    };
    vec![RegionConfig::new("+1/2", 0.5, plus), RegionConfig::new("-1/2", -0.5, minus)]
}

pub fn build_stern_gerlach(theta: f64, separation: f64, packet_width: f64) -> Result<ScenarioConfig, ConfigError> {
    stern_gerlach_config(theta, separation, packet_width, Axis::Z, SG_RHO, SG_SIGMA_CL)
}

pub fn stern_gerlach_config(
    theta: f64,
    separation: f64,
    packet_width: f64,
    axis: Axis,
    rho: f64,
    sigma_cl: f64,
) -> Result<ScenarioConfig, ConfigError> {
    let mut config = ScenarioConfig {
        name: "stern_gerlach".into(),
        field: FieldSpec::SternGerlach {
            theta,
            separation,
            packet_width,
            axis,
        },
        screen: ScreenConfig {
            window: None,
            rho,
            sigma_cl,
            eta: 1.0,
            tilt: [0.0, 0.0],
        },
        constants: ConstantsConfig::default(),
        run: RunConfig {
            phase_refresh: PhaseRefresh::Sparse,
            ..RunConfig::default()
        },
        region_map: None,
    };
    config.validate()?;
    let window = stern_gerlach_window(separation, packet_width, axis);
    config.region_map = Some(stern_gerlach_regions(window, axis));
    Ok(config)
}

/// Isotropic scattering onto a ring of radius `radius` over `θ ∈ [0, π]`.
pub fn build_scattering_shell(amplitude: AngularAmplitude, radius: f64) -> Result<ScenarioConfig, ConfigError> {
    let theta_max = match amplitude {
        AngularAmplitude::Cosine => FRAC_PI_2,
        _ => PI,
    };
    let config = ScenarioConfig {
        name: "scattering_shell".into(),
        field: FieldSpec::ScatteringShell {
            amplitude,
            radius,
            theta_min: 0.0,
            theta_max,
            band: radius * 1e-4,
            measure: ShellMeasure::Ring,
            packet_width: 1e-10,
            wavelength: 5.4e-12,
        },
        screen: ScreenConfig {
            window: None,
            // 10⁶ clusters per radian of ring with total coverage 2.
            rho: 1e10 / (radius * radius),
            sigma_cl: radius * 1.414e-5,
            eta: 1.0,
            tilt: [0.0, 0.0],
        },
        constants: ConstantsConfig::default(),
        run: RunConfig {
            phase_refresh: PhaseRefresh::Sparse,
            ..RunConfig::default()
        },
        region_map: None,
    };
    config.validate()?;
    Ok(config)
}

/// Normalized angular density on `[θ_min, θ_max]`.
#[derive(Clone, Debug)]
pub struct AngularDensity {
    pub amplitude: AngularAmplitude,
    pub measure: ShellMeasure,
    pub range: (f64, f64),
    norm: f64,
}

/// Cells for angular normalization.
const ANGULAR_CELLS: usize = 1 << 16;

impl AngularDensity {
    pub fn new(amplitude: AngularAmplitude, measure: ShellMeasure, range: (f64, f64)) -> Result<Self, FieldError> {
        let norm = integrate_1d(range.0, range.1, ANGULAR_CELLS, |t| {
            amplitude.eval(t).powi(2) * measure.weight(t)
        });
        if !(norm.is_finite() && norm > 0.0) {
            return Err(FieldError::NotNormalizable(format!(
                "∫|f(θ)|² dθ over [{}, {}] is {norm}",
                range.0, range.1
            )));
        }
        Ok(AngularDensity {
            amplitude,
            measure,
            range,
            norm,
        })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        if theta < self.range.0 || theta > self.range.1 {
            return 0.0;
        }
        self.amplitude.eval(theta).powi(2) * self.measure.weight(theta) / self.norm
    }
}

/// `σ/λ0` of the scattered packet; the shell picture needs it well above 1.
pub fn coherence_ratio(packet_width: f64, wavelength: f64) -> f64 {
    packet_width / wavelength
}

/// A scenario ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub apparatus: Apparatus<f64>,
    /// Labelled regions with their expected probabilities `∫_Δn |ψ|²`.
    pub regions: Option<(Vec<Region>, Vec<f64>)>,
    pub angular: Option<AngularDensity>,
}

impl Scenario {
    pub fn psi(&self) -> &Superposition<f64> {
        self.apparatus.psi()
    }

    /// Region probabilities as real amplitudes `√P_n`.
    pub fn region_coefficients(&self) -> Option<Vec<Complex<f64>>> {
        self.regions
            .as_ref()
            .map(|(_, p)| p.iter().map(|&p| Complex::new(p.sqrt(), 0.0)).collect())
    }
}

/// Stream from which the screen geometry of a scenario is generated.
pub fn screen_stream(master_seed: u64) -> SeededStream {
    SeededStream::new(master_seed, 0).substream(stream_tags::SCREEN_GEOMETRY)
}

/// Packet field, the screen window it covers, and the angular density of a
/// scattering shell.
pub type FieldParts = (Superposition<f64>, Rect<f64>, Option<AngularDensity>);

/// Builds the packet field of a scenario and the screen window it covers.
pub fn build_field(config: &ScenarioConfig) -> Result<FieldParts, ScenarioError> {
    match config.field {
        FieldSpec::DoubleSlit {
            separation,
            slit_width,
            wavelength,
            screen_distance,
        } => {
            let window = config.screen.window.expect("validated").rect();
            let geometry = SlitGeometry {
                separation,
                slit_width,
                wavelength,
                screen_distance,
            };
            let f = double_slit_amplitude(geometry, window)?;
            Ok((Superposition::single(f)?, window, None))
        }
        FieldSpec::Gaussian {
            center,
            width,
            carrier,
        } => {
            let window = config.screen.window.expect("validated").rect();
            let f = gaussian_packet((center[0], center[1]), width, (carrier[0], carrier[1]))?;
            Ok((Superposition::single(f)?, window, None))
        }
        FieldSpec::SternGerlach {
            theta,
            separation,
            packet_width,
            axis,
        } => {
            let half = separation / 2.0;
            let (plus, minus) = match axis {
                Axis::Z => ((0.0, half), (0.0, -half)),
                Axis::X => ((half, 0.0), (-half, 0.0)),
            };
            let packets = [
                gaussian_packet(plus, packet_width, (0.0, 0.0))?,
                gaussian_packet(minus, packet_width, (0.0, 0.0))?,
            ];
            let psi = Superposition::new(&spin_coefficients(theta), &packets, Phase::zero(), Overlap::Reject)?;
            let default = stern_gerlach_window(separation, packet_width, axis);
            let window = config.screen.window.map_or(default, |w| w.rect());
            if !window.contains_rect(&default) {
                return Err(ConfigError::precondition("screen.window", "must contain both eigenpackets").into());
            }
            Ok((psi, window, None))
        }
        FieldSpec::ScatteringShell {
            ref amplitude,
            radius,
            theta_min,
            theta_max,
            band,
            measure,
            ..
        } => {
            let angular = AngularDensity::new(amplitude.clone(), measure, (theta_min, theta_max))?;
            let window = Rect::new(theta_min, theta_max, 0.0, band / radius);
            let scale = (angular.norm * window.height()).sqrt().recip();
            let a = amplitude.clone();
            let kernel: Kernel<f64> = std::sync::Arc::new(move |t, z| {
                if !window.contains(t, z) {
                    return Complex::new(0.0, 0.0);
                }
                Complex::new(a.eval(t) * measure.weight(t).sqrt() * scale, 0.0)
            });
            let f = Field::from_kernel(kernel, window, window, (ANGULAR_CELLS, 1));
            Ok((Superposition::single(f)?, window, Some(angular)))
        }
    }
}

fn screen_spec(config: &ScenarioConfig, window: Rect<f64>) -> ScreenSpec<f64> {
    let s = &config.screen;
    let (rho, sigma_cl) = match config.field {
        // Physical cluster parameters expressed per radian of the ring.
        FieldSpec::ScatteringShell { radius, .. } => (s.rho * radius * radius, s.sigma_cl / radius),
        _ => (s.rho, s.sigma_cl),
    };
    ScreenSpec {
        window,
        rho,
        sigma_cl,
        eta: s.eta,
        tilt: (s.tilt[0], s.tilt[1]),
    }
}

/// `∫_Δ |ψ|² dA` for each region.
pub fn region_probabilities(psi: &impl Amplitude<f64>, regions: &[Region]) -> Vec<f64> {
    let full = psi.norm_domain();
    let (nx, nz) = psi.quad_cells();
    regions
        .iter()
        .map(|r| match r.rect.intersect(&full) {
            None => 0.0,
            Some(d) => {
                let fx = (nx as f64 * d.width() / full.width()).ceil() as usize;
                let fz = (nz as f64 * d.height() / full.height()).ceil() as usize;
                integrate_2d(&d, fx.max(1), fz.max(1), |x, z| psi.density(x, z))
            }
        })
        .collect()
}

/// Validates `config`, builds the field and generates the screen from
/// `master_seed`.
pub fn instantiate(config: &ScenarioConfig, master_seed: u64) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    let constants = config.constants.resolve()?;
    let (psi, window, angular) = build_field(config)?;
    let screen = generate_screen(screen_spec(config, window), &screen_stream(master_seed))?;
    let regions = config.region_map.as_ref().map(|rs| {
        let regions: Vec<Region> = rs
            .iter()
            .map(|r| Region {
                label: r.label.clone(),
                rect: r.window().rect(),
            })
            .collect();
        let p = region_probabilities(&psi, &regions);
        (regions, p)
    });
    let apparatus = Apparatus::new(psi, screen, constants, config.run.trial_options(), config.run.phase_refresh);
    Ok(Scenario {
        config: config.clone(),
        apparatus,
        regions,
        angular,
    })
}

/// Parameters of a chain of Stern-Gerlach apparatuses with alternating axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerParams {
    pub stages: usize,
    pub trials: u64,
    /// Preparation angle of the particle entering the first (z) apparatus.
    pub theta: f64,
    pub separation: f64,
    pub packet_width: f64,
    pub rho: f64,
    pub sigma_cl: f64,
    /// Fresh-phase attempts per stage before the particle counts as lost.
    pub attempts: u32,
}

impl Default for WignerParams {
    fn default() -> Self {
        WignerParams {
            stages: 10,
            trials: 10_000,
            theta: 0.0,
            separation: 2e-5,
            packet_width: 1e-6,
            rho: 2e15,
            sigma_cl: 2.236e-8,
            attempts: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub axis: Axis,
    pub plus: u64,
    pub minus: u64,
    pub frequency_plus: f64,
    /// Expected `|c₊|²` of the stage's input.
    pub expected_plus: f64,
    /// Binomial standard deviation at the expected value.
    pub sigma: f64,
    /// Empirical outcome entropy in bits.
    pub entropy_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerReport {
    pub params: WignerParams,
    pub master_seed: u64,
    pub stages: Vec<StageReport>,
    /// Packet phases drawn and discarded because no cluster of some stage
    /// could ever match them.
    pub discarded_phases: u64,
    /// Particles for which some stage never contracted within the attempt
    /// budget.
    pub lost: u64,
    /// Per particle, outcome `+1`/`-1` of each completed stage.
    pub sequences: Vec<Vec<i8>>,
}

/// Upper bound on packet-phase draws per particle.
const MAX_PHASE_DRAWS: u32 = 10_000_000;

fn axis_of(stage: usize) -> Axis {
    if stage.is_multiple_of(2) {
        Axis::Z
    } else {
        Axis::X
    }
}

/// Sends `trials` particles through `stages` apparatuses whose axes
/// alternate z, x, z, …. A particle keeps its phase constant `α1` through
/// the whole chain; each stage re-prepares the contracted branch as an
/// equal-weight pair along the next axis and scans a screen with freshly
/// drawn cluster phases. Particles are independent, so the chain runs in
/// parallel without affecting results.
pub fn run_wigner_chain(
    params: &WignerParams,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<WignerReport, ScenarioError> {
    if params.stages < 2 {
        return Err(ScenarioError::Precondition(format!(
            "stages must be at least 2, got {}",
            params.stages
        )));
    }
    if params.trials == 0 || params.attempts == 0 {
        return Err(ScenarioError::Precondition("trials and attempts must be positive".into()));
    }
    let constants = Constants::<f64>::rounded();
    let options = TrialOptions::default();
    let root = SeededStream::new(master_seed, 0).substream(stream_tags::WIGNER);
    let build = |theta: f64, axis: Axis, screen: Option<&Screen<f64>>| -> Result<Apparatus<f64>, ScenarioError> {
        let config = stern_gerlach_config(theta, params.separation, params.packet_width, axis, params.rho, params.sigma_cl)?;
        let (psi, window, _) = build_field(&config)?;
        let screen = match screen {
            Some(s) => s.clone(),
            None => generate_screen(screen_spec(&config, window), &root.indexed(stream_tags::SCREEN_GEOMETRY, axis as u64))?,
        };
        Ok(Apparatus::new(psi, screen, constants, options, PhaseRefresh::Sparse))
    };
    let first = build(params.theta, Axis::Z, None)?;
    let z_stage = build(FRAC_PI_2, Axis::Z, Some(first.screen()))?;
    let x_stage = build(FRAC_PI_2, Axis::X, None)?;
    let apparatus = |stage: usize| match (stage, axis_of(stage)) {
        (0, _) => &first,
        (_, Axis::Z) => &z_stage,
        (_, Axis::X) => &x_stage,
    };

    let particle = |p: u64| -> (u64, Vec<i8>) {
        let base = root.indexed(stream_tags::PACKET_PHASES, p);
        let mut phases = base.clone();
        let mut discarded = 0u64;
        let alpha1 = loop {
            let a: Phase<f64> = phases.draw_phase();
            if [&first, &z_stage, &x_stage].iter().all(|app| app.can_fire(a)) {
                break Some(a);
            }
            discarded += 1;
            if discarded >= u64::from(MAX_PHASE_DRAWS) {
                break None;
            }
        };
        let Some(alpha1) = alpha1 else {
            return (discarded, Vec::new());
        };
        let mut outcomes = Vec::with_capacity(params.stages);
        'stages: for stage in 0..params.stages {
            let app = apparatus(stage);
            for attempt in 0..params.attempts {
                let stream = base.indexed(stage as u64, u64::from(attempt));
                if let Some(spot) = app.trial(alpha1, p, stream) {
                    let coordinate = match axis_of(stage) {
                        Axis::Z => spot.z,
                        Axis::X => spot.x,
                    };
                    outcomes.push(if coordinate >= 0.0 { 1 } else { -1 });
                    continue 'stages;
                }
            }
            break;
        }
        (discarded, outcomes)
    };

    let results: Vec<(u64, Vec<i8>)> = in_pool(threads, || (0..params.trials).into_par_iter().map(particle).collect())?;
    let discarded_phases = results.iter().map(|r| r.0).sum();
    let sequences: Vec<Vec<i8>> = results.into_iter().map(|r| r.1).collect();
    let lost = sequences.iter().filter(|s| s.len() < params.stages).count() as u64;
    let stages = (0..params.stages)
        .map(|stage| {
            let plus = sequences.iter().filter(|s| s.get(stage) == Some(&1)).count() as u64;
            let minus = sequences.iter().filter(|s| s.get(stage) == Some(&-1)).count() as u64;
            let n = (plus + minus).max(1) as f64;
            let theta = if stage == 0 { params.theta } else { FRAC_PI_2 };
            let expected_plus = (theta / 2.0).cos().powi(2);
            let f = plus as f64 / n;
            StageReport {
                stage: stage + 1,
                axis: axis_of(stage),
                plus,
                minus,
                frequency_plus: f,
                expected_plus,
                sigma: (expected_plus * (1.0 - expected_plus) / n).sqrt(),
                entropy_bits: binary_entropy(f),
            }
        })
        .collect();
    Ok(WignerReport {
        params: *params,
        master_seed,
        stages,
        discarded_phases,
        lost,
        sequences,
    })
}

/// Entropy in bits of a two-outcome distribution `(p, 1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    [p, 1.0 - p]
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| -q * q.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{continuous_interval_probability, discrete_region_test};
    use crate::collapse::ensemble_until_registered;
    use std::f64::consts::FRAC_PI_3;

    #[test]
    fn double_slit_defaults() {
        let c = build_double_slit(DoubleSlitParams::default()).unwrap();
        let FieldSpec::DoubleSlit {
            separation,
            wavelength,
            screen_distance,
            ..
        } = c.field
        else {
            panic!("wrong field kind");
        };
        let period = wavelength * screen_distance / separation;
        assert!((period - 5.4e-6).abs() < 1e-18);
        let s = instantiate(&c, 1).unwrap();
        assert_eq!(s.apparatus.screen().len(), 1_000_000);
        let psi = s.psi();
        for x in [1e-7, 2.2e-6, 1.3e-5] {
            assert!((psi.density(x, 1e-9) - psi.density(-x, 1e-9)).abs() <= 1e-9 * psi.density(x, 1e-9));
        }
        let total = s.apparatus.coverage().total();
        assert!((total - 5.0).abs() < 0.05, "{total}");
    }

    #[test]
    fn narrow_slits_give_pure_cosine_fringes() {
        let p = DoubleSlitParams {
            slit_width: 0.0,
            rho: 1e17,
            ..DoubleSlitParams::default()
        };
        let s = instantiate(&build_double_slit(p).unwrap(), 1).unwrap();
        let psi = s.psi();
        let peak = psi.density(0.0, 1e-9);
        // Every bright fringe inside the window reaches the central peak.
        for k in 1..4 {
            let x = k as f64 * 5.4e-6;
            assert!((psi.density(x, 1e-9) / peak - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stern_gerlach_coefficients() {
        assert!(build_stern_gerlach(0.0, 4e-6, 1e-6).is_err());
        for (theta, plus) in [(0.0, 1.0), (FRAC_PI_2, 0.5), (FRAC_PI_3, 0.75)] {
            let c = spin_coefficients(theta);
            assert!((c[0].norm_sqr() - plus).abs() < 1e-12);
            let config = stern_gerlach_config(theta, 2e-5, 1e-6, Axis::Z, 1e14, 1e-7).unwrap();
            let s = instantiate(&config, 4).unwrap();
            let (_, p) = s.regions.as_ref().unwrap();
            assert!((p[0] - plus).abs() < 1e-6, "{p:?}");
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_branch_lands_in_plus_region() {
        let config = stern_gerlach_config(0.0, 2e-5, 1e-6, Axis::Z, 1e15, 3e-8).unwrap();
        let s = instantiate(&config, 8).unwrap();
        let run = ensemble_until_registered(&s.apparatus, 200, 10_000_000, 3, None).unwrap();
        assert_eq!(run.records.len(), 200);
        let (regions, _) = s.regions.as_ref().unwrap();
        let report = discrete_region_test(&run.records, regions, &s.region_coefficients().unwrap()).unwrap();
        assert_eq!(report.regions[0].observed, 200);
        assert_eq!(report.regions[1].observed, 0);
    }

    #[test]
    fn scattering_shell_densities() {
        let iso = AngularDensity::new(AngularAmplitude::Isotropic, ShellMeasure::Ring, (0.0, PI)).unwrap();
        assert!((iso.eval(0.3) - 1.0 / PI).abs() < 1e-9);
        let cos = AngularDensity::new(AngularAmplitude::Cosine, ShellMeasure::Ring, (0.0, FRAC_PI_2)).unwrap();
        let p = continuous_interval_probability(|t| cos.eval(t), (0.0, FRAC_PI_2), (0.0, FRAC_PI_2)).unwrap();
        assert!((p - 1.0).abs() < 1e-6);
        let zero = AngularDensity::new(
            AngularAmplitude::Legendre { coefficients: vec![] },
            ShellMeasure::Ring,
            (0.0, PI),
        );
        assert!(matches!(zero, Err(FieldError::NotNormalizable(_))));
        let c = build_scattering_shell(AngularAmplitude::Isotropic, 0.01).unwrap();
        let FieldSpec::ScatteringShell {
            packet_width,
            wavelength,
            ..
        } = c.field
        else {
            panic!("wrong field kind");
        };
        assert!((coherence_ratio(packet_width, wavelength) - 18.5).abs() < 0.1);
        let s = instantiate(&c, 2).unwrap();
        let psi = s.psi();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-6);
        assert!((s.apparatus.coverage().total() - 2.0).abs() < 0.05);
    }

    #[test]
    fn phase_constants_add_modulo_two_pi() {
        let a = Phase::new(5.0);
        let b = Phase::new(4.0);
        assert!(((a + b).value() - (9.0 - std::f64::consts::TAU)).abs() < 1e-12);
        assert_eq!(Phase::new(1.0) + Phase::zero(), Phase::new(1.0));
    }

    #[test]
    fn wigner_chain_small() {
        let params = WignerParams {
            stages: 4,
            trials: 400,
            rho: 2e14,
            sigma_cl: 7.07e-8,
            ..WignerParams::default()
        };
        let a = run_wigner_chain(&params, 5, None).unwrap();
        assert_eq!(a.stages[0].minus, 0);
        assert!(a.stages[0].plus >= 400 - a.lost);
        // Phases at the rim of the feasible window rarely fire.
        assert!(a.lost < 40, "{}", a.lost);
        for s in &a.stages[1..] {
            assert!((s.frequency_plus - 0.5).abs() <= 4.0 * s.sigma, "{s:?}");
        }
        let b = run_wigner_chain(&params, 5, Some(1)).unwrap();
        assert_eq!(a, b);
        let c = run_wigner_chain(&params, 6, None).unwrap();
        assert_ne!(a.sequences, c.sequences);
        assert!(run_wigner_chain(&WignerParams { stages: 1, ..params }, 5, None).is_err());
    }
}
