//! Scenario files: a TOML schema for fields, screens, constants, run options
//! and region maps, with validation that names the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::collapse::{
    Constants, CoverageMode, PhaseRefresh, ScanPolicy, TrialOptions, ALPHA_S_CODATA, ALPHA_S_ROUNDED,
};
use crate::quadrature::Rect;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Precondition { field: String, message: String },
}

impl ConfigError {
    pub fn precondition(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Precondition {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Axis-aligned rectangle as written in scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Window {
    pub fn rect(&self) -> Rect<f64> {
        Rect::new(self.x_min, self.x_max, self.z_min, self.z_max)
    }

    pub fn from_rect(r: Rect<f64>) -> Self {
        Window {
            x_min: r.x0,
            x_max: r.x1,
            z_min: r.z0,
            z_max: r.z1,
        }
    }

    fn validate(&self, field: &str) -> Result<Rect<f64>, ConfigError> {
        let r = self.rect();
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max].iter().all(|v| v.is_finite());
        if !finite || !r.is_proper() {
            return Err(ConfigError::precondition(field, "needs finite x_min < x_max and z_min < z_max"));
        }
        Ok(r)
    }
}

/// Measurement axis of a Stern-Gerlach apparatus: the direction along which
/// the two eigenpackets are displaced on the screen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[default]
    Z,
    X,
}

/// Angular amplitude `f(θ)` of a scattered wave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum AngularAmplitude {
    Isotropic,
    Cosine,
    /// `Σ_l a_l P_l(cos θ)`.
    Legendre { coefficients: Vec<f64> },
}

impl AngularAmplitude {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            AngularAmplitude::Isotropic => 1.0,
            AngularAmplitude::Cosine => theta.cos(),
            AngularAmplitude::Legendre { coefficients } => {
                let x = theta.cos();
                let (mut p0, mut p1) = (1.0, x);
                let mut sum = 0.0;
                for (l, a) in coefficients.iter().enumerate() {
                    let p = match l {
                        0 => p0,
                        1 => p1,
                        _ => {
                            let lf = l as f64;
                            let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
                            p0 = p1;
                            p1 = p2;
                            p2
                        }
                    };
                    sum += a * p;
                }
                sum
            }
        }
    }
}

/// Weight of the angular coordinate on the shell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellMeasure {
    /// Flat ring: spot density in θ is `|f(θ)|²`.
    #[default]
    Ring,
    /// Band of a sphere at fixed azimuth: density `|f(θ)|² sin θ`.
    Sphere,
}

impl ShellMeasure {
    pub fn weight(&self, theta: f64) -> f64 {
        match self {
            ShellMeasure::Ring => 1.0,
            ShellMeasure::Sphere => theta.sin(),
        }
    }
}

fn default_slit_width() -> f64 {
    1e-7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    DoubleSlit {
        separation: f64,
        #[serde(default = "default_slit_width")]
        slit_width: f64,
        wavelength: f64,
        screen_distance: f64,
    },
    SternGerlach {
        /// Preparation angle; `c₊ = cos(θ/2)`, `c₋ = sin(θ/2)`.
        theta: f64,
        separation: f64,
        packet_width: f64,
        #[serde(default)]
        axis: Axis,
    },
    Gaussian {
        center: [f64; 2],
        width: f64,
        #[serde(default)]
        carrier: [f64; 2],
    },
    ScatteringShell {
        amplitude: AngularAmplitude,
        radius: f64,
        theta_min: f64,
        theta_max: f64,
        /// Width of the ring across θ, in metres.
        band: f64,
        #[serde(default)]
        measure: ShellMeasure,
        /// Packet width and carrier wavelength for the coherence check.
        packet_width: f64,
        wavelength: f64,
    },
}

impl FieldSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldSpec::DoubleSlit { .. } => "double_slit",
            FieldSpec::SternGerlach { .. } => "stern_gerlach",
            FieldSpec::Gaussian { .. } => "gaussian",
            FieldSpec::ScatteringShell { .. } => "scattering_shell",
        }
    }
}

fn default_eta() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenConfig {
    /// Required for double-slit and Gaussian fields; derived from the
    /// geometry otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    /// Clusters per square metre.
    pub rho: f64,
    /// Cluster size in metres.
    pub sigma_cl: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub tilt: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `αs = 0.00730`, 861 sections.
    #[default]
    Rounded,
    Codata,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default)]
    pub convention: Convention,
    /// Overrides the convention's value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_s: Option<f64>,
}

impl ConstantsConfig {
    pub fn resolve(&self) -> Result<Constants<f64>, ConfigError> {
        let alpha_s = self.alpha_s.unwrap_or(match self.convention {
            Convention::Rounded => ALPHA_S_ROUNDED,
            Convention::Codata => ALPHA_S_CODATA,
        });
        Constants::from_alpha_s(alpha_s)
            .ok_or_else(|| ConfigError::precondition("constants.alpha_s", format!("must lie in (0, 2π], got {alpha_s}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scan_policy: ScanPolicy,
    #[serde(default)]
    pub coverage: CoverageMode,
    #[serde(default)]
    pub phase_refresh: PhaseRefresh,
}

impl RunConfig {
    pub fn trial_options(&self) -> TrialOptions {
        TrialOptions {
            policy: self.scan_policy,
            coverage: self.coverage,
        }
    }
}

/// Region `Δ_n` of the screen labelled with eigenvalue `o_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub label: String,
    pub eigenvalue: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl RegionConfig {
    pub fn new(label: &str, eigenvalue: f64, rect: Rect<f64>) -> Self {
        RegionConfig {
            label: label.to_string(),
            eigenvalue,
            x_min: rect.x0,
            x_max: rect.x1,
            z_min: rect.z0,
            z_max: rect.z1,
        }
    }

    pub fn window(&self) -> Window {
        Window {
            x_min: self.x_min,
            x_max: self.x_max,
            z_min: self.z_min,
            z_max: self.z_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub field: FieldSpec,
    pub screen: ScreenConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_map: Option<Vec<RegionConfig>>,
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::precondition(field, format!("must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// SHA-256 over the canonical serialization, so that formatting and
    /// comments do not change a scenario's identity.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checks everything that does not need the field to be built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::precondition("name", "must not be empty"));
        }
        match self.field {
            FieldSpec::DoubleSlit {
                separation,
                slit_width,
                wavelength,
                screen_distance,
            } => {
                positive("field.separation", separation)?;
                positive("field.wavelength", wavelength)?;
                positive("field.screen_distance", screen_distance)?;
                if !(slit_width.is_finite() && slit_width >= 0.0) {
                    return Err(ConfigError::precondition("field.slit_width", "must be finite and non-negative"));
                }
            }
            FieldSpec::SternGerlach {
                theta,
                separation,
                packet_width,
                ..
            } => {
                if !theta.is_finite() {
                    return Err(ConfigError::precondition("field.theta", "must be finite"));
                }
                positive("field.packet_width", packet_width)?;
                positive("field.separation", separation)?;
                if separation <= 4.0 * packet_width {
                    return Err(ConfigError::precondition(
                        "field.separation",
                        format!("must exceed 4 packet widths ({}), got {separation}", 4.0 * packet_width),
                    ));
                }
            }
            FieldSpec::Gaussian {
                center,
                width,
                carrier,
            } => {
                positive("field.width", width)?;
                if !center.iter().chain(&carrier).all(|v| v.is_finite()) {
                    return Err(ConfigError::precondition("field.center", "center and carrier must be finite"));
                }
            }
            FieldSpec::ScatteringShell {
                radius,
                theta_min,
                theta_max,
                band,
                packet_width,
                wavelength,
                ..
            } => {
                positive("field.radius", radius)?;
                positive("field.band", band)?;
                positive("field.packet_width", packet_width)?;
                positive("field.wavelength", wavelength)?;
                if !(theta_min.is_finite() && theta_max.is_finite() && 0.0 <= theta_min && theta_min < theta_max)
                    || theta_max > std::f64::consts::PI + 1e-12
                {
                    return Err(ConfigError::precondition("field.theta_max", "need 0 <= theta_min < theta_max <= π"));
                }
            }
        }
        match (&self.field, &self.screen.window) {
            (FieldSpec::DoubleSlit { .. } | FieldSpec::Gaussian { .. }, None) => {
                return Err(ConfigError::precondition(
                    "screen.window",
                    format!("required for {} fields", self.field.kind()),
                ));
            }
            (FieldSpec::ScatteringShell { .. }, Some(_)) => {
                return Err(ConfigError::precondition(
                    "screen.window",
                    "is derived from the angular range for scattering_shell fields",
                ));
            }
            (_, Some(w)) => {
                w.validate("screen.window")?;
            }
            _ => {}
        }
        positive("screen.rho", self.screen.rho)?;
        positive("screen.sigma_cl", self.screen.sigma_cl)?;
        if !(0.0..=1.0).contains(&self.screen.eta) {
            return Err(ConfigError::precondition("screen.eta", "must lie in [0, 1]"));
        }
        if !self.screen.tilt.iter().all(|t| t.is_finite()) {
            return Err(ConfigError::precondition("screen.tilt", "must be finite"));
        }
        self.constants.resolve()?;
        if let Some(regions) = &self.region_map {
            if regions.is_empty() {
                return Err(ConfigError::precondition("region_map", "must list at least one region"));
            }
            let rects = regions
                .iter()
                .map(|r| r.window().validate("region_map"))
                .collect::<Result<Vec<_>, _>>()?;
            for i in 0..rects.len() {
                for j in i + 1..rects.len() {
                    // Touching edges are allowed; shared area is not.
                    if let Some(o) = rects[i].intersect(&rects[j]) {
                        if o.area() > 0.0 {
                            return Err(ConfigError::precondition(
                                "region_map",
                                format!("regions {:?} and {:?} overlap", regions[i].label, regions[j].label),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
