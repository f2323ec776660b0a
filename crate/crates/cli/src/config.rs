//! Declarative run configurations. One TOML file per run; unknown keys are
//! rejected so typos in physics parameters fail loudly.

use pomsim::gaussian::BathSpec;
use pomsim::hilbert::CatAxis;
use pomsim::measurement::MeasurementSpec;
use pomsim::protocol::SequenceConfig;
use pomsim::pulse::{EnvelopeShape, PhysicalParams};
use serde::Deserialize;

use crate::CliError;

pub fn parse<T: serde::de::DeserializeOwned>(text: &str, expected_version: &str) -> Result<T, CliError> {
    #[derive(Deserialize)]
    struct VersionProbe {
        version: String,
    }
    let probe: VersionProbe = toml::from_str(text)
        .map_err(|e| CliError::Config(format!("missing or malformed `version`: {e}")))?;
    if probe.version != expected_version {
        return Err(CliError::Config(format!(
            "config version `{}` does not match expected `{expected_version}`",
            probe.version
        )));
    }
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// `pulse-config v1`: drive and cavity description for `pomsim pulse`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    #[allow(dead_code)]
    pub version: String,
    /// Geometry route: derive kappa and g0 from physical parameters.
    #[serde(default)]
    pub physical: Option<PhysicalParams>,
    /// Direct route: specify the cavity rates.
    #[serde(default)]
    pub cavity: Option<CavityRates>,
    pub pulse: PulseTable,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityRates {
    pub kappa: f64,
    pub g0: f64,
    /// Needed for the finite-evolution coefficients.
    #[serde(default)]
    pub omega_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTable {
    pub n_photons: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub envelope: EnvelopeChoice,
    #[serde(default)]
    pub span_over_kappa: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeChoice {
    #[default]
    Optimal,
    Gaussian {
        sigma: f64,
    },
    Square {
        half_width: f64,
    },
    OneSidedExp {
        rate: f64,
    },
    File {
        path: String,
    },
}

impl EnvelopeChoice {
    pub fn as_shape(&self) -> Option<EnvelopeShape> {
        match *self {
            EnvelopeChoice::Optimal => Some(EnvelopeShape::Optimal),
            EnvelopeChoice::Gaussian { sigma } => Some(EnvelopeShape::Gaussian { sigma }),
            EnvelopeChoice::Square { half_width } => Some(EnvelopeShape::Square { half_width }),
            EnvelopeChoice::OneSidedExp { rate } => Some(EnvelopeShape::OneSidedExp { rate }),
            EnvelopeChoice::File { .. } => None,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// `tomography-config v1`: state, measurement and reconstruction settings
/// for `pomsim tomography`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    #[allow(dead_code)]
    pub version: String,
    #[serde(default)]
    pub master_seed: Option<u64>,
    pub state: StateTable,
    pub measurement: MeasurementSpec,
    pub scan: ScanTable,
    #[serde(default)]
    pub grids: GridsTable,
    #[serde(default)]
    pub deconvolution: DeconvolutionTable,
    pub reconstruction: ReconstructionTable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum StateTable {
    Thermal { nbar: f64, n_max: Option<usize> },
    Coherent { re: f64, im: f64, n_max: Option<usize> },
    Cat { delta: f64, axis: CatAxis, n_max: Option<usize> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanTable {
    pub angles: usize,
    /// 0 runs the exact-density pipeline; otherwise shots per angle.
    pub shots: usize,
    /// Shots used for the kernel calibration histogram.
    #[serde(default = "default_kernel_shots")]
    pub kernel_shots: usize,
}

fn default_kernel_shots() -> usize {
    200_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsTable {
    #[serde(default = "default_phase_half_width")]
    pub phase_half_width: f64,
    #[serde(default = "default_phase_points")]
    pub phase_points: usize,
    #[serde(default)]
    pub marginal_half_width: Option<f64>,
    #[serde(default = "default_marginal_points")]
    pub marginal_points: usize,
}

impl Default for GridsTable {
    fn default() -> Self {
        Self {
            phase_half_width: default_phase_half_width(),
            phase_points: default_phase_points(),
            marginal_half_width: None,
            marginal_points: default_marginal_points(),
        }
    }
}

fn default_phase_half_width() -> f64 {
    8.0
}

fn default_phase_points() -> usize {
    201
}

fn default_marginal_points() -> usize {
    451
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvolutionTable {
    #[serde(default = "default_reg")]
    pub regularization: f64,
}

impl Default for DeconvolutionTable {
    fn default() -> Self {
        Self {
            regularization: default_reg(),
        }
    }
}

fn default_reg() -> f64 {
    pomsim::tomography::DEFAULT_DECONV_REG
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionTable {
    pub n_max: usize,
}

/// `protocol-config v1`: either the two-pulse purification shortcut or a
/// full pulse sequence, for `pomsim purify`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[allow(dead_code)]
    pub version: String,
    #[serde(default)]
    pub purify: Option<PurifyTable>,
    #[serde(default)]
    pub sequence: Option<SequenceConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurifyTable {
    pub nbar: f64,
    pub chi: f64,
    #[serde(default)]
    pub bath: Option<BathTable>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathTable {
    pub quality: f64,
    pub omega_m: f64,
    /// Either a bath occupation or a temperature to derive it from.
    #[serde(default)]
    pub nbar_bath: Option<f64>,
    #[serde(default)]
    pub temperature_kelvin: Option<f64>,
}

impl BathTable {
    pub fn build(&self) -> Result<BathSpec, CliError> {
        let nbar = match (self.nbar_bath, self.temperature_kelvin) {
            (Some(n), None) => n,
            (None, Some(t)) => pomsim::gaussian::bose_einstein_occupation(t, self.omega_m),
            _ => {
                return Err(CliError::Config(
                    "bath needs exactly one of `nbar_bath` or `temperature_kelvin`".into(),
                ))
            }
        };
        BathSpec::from_quality(self.quality, nbar, self.omega_m).map_err(CliError::from)
    }
}
