//! Run configuration: TOML schema, unit-suffixed quantities, and sweep axes.
//!
//! Every frequency and temperature crosses the boundary as a string with an
//! explicit unit suffix ("477kHz", "115mK") and is converted to the library's
//! internal units (angular rad/us, kelvin) the moment it is parsed. Bare
//! numbers are rejected so a config can never be silently misread by a factor
//! of two pi or a thousand.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

use qdiss::constants::{ghz, khz, mhz, mk};
use qdiss::experiments::linspace;
use qdiss::model::DeviceParams;

/// A frequency or rate held in angular rad/us.
///
/// Parses from `"<number><suffix>"` where the suffix is one of `GHz`, `MHz`,
/// `kHz`, or `rad/us` (a bare `/us` is accepted for plain rates). Serializes
/// back as the raw rad/us number so manifests echo exactly what the run used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency(pub f64);

/// A temperature held in kelvin. Parses from `"<number>K"` or `"<number>mK"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Temperature(pub f64);

/// Unit suffixes tried longest-first so `rad/us` wins over `/us` and `mK`
/// over `K`. Matching is ASCII case-insensitive on the lowercased input.
const FREQUENCY_UNITS: [(&str, fn(f64) -> f64); 5] = [
    ("rad/us", identity),
    ("ghz", ghz),
    ("mhz", mhz),
    ("khz", khz),
    ("/us", identity),
];

const TEMPERATURE_UNITS: [(&str, fn(f64) -> f64); 2] = [("mk", mk), ("k", identity)];

fn identity(x: f64) -> f64 {
    x
}

fn parse_suffixed(
    text: &str,
    units: &[(&str, fn(f64) -> f64)],
    expected: &str,
) -> Result<f64, String> {
    let trimmed = text.trim();
    let lower = trimmed.to_ascii_lowercase();
    for (suffix, convert) in units {
        if let Some(number) = lower.strip_suffix(suffix) {
            let value: f64 = number
                .trim()
                .parse()
                .map_err(|_| format!("'{trimmed}' has no numeric value before the unit"))?;
            if !value.is_finite() {
                return Err(format!("'{trimmed}' is not finite"));
            }
            return Ok(convert(value));
        }
    }
    Err(format!(
        "'{trimmed}' needs an explicit unit suffix: one of {expected}"
    ))
}

impl FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_suffixed(s, &FREQUENCY_UNITS, "GHz, MHz, kHz, rad/us").map(Frequency)
    }
}

impl FromStr for Temperature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_suffixed(s, &TEMPERATURE_UNITS, "K, mK").map(Temperature)
    }
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        struct FrequencyVisitor;

        impl Visitor<'_> for FrequencyVisitor {
            type Value = Frequency;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a frequency string with an explicit unit suffix, e.g. \"477kHz\"")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<Frequency, E> {
                s.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_str(FrequencyVisitor)
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: Deserializer<'de>,
    {
        struct TemperatureVisitor;

        impl Visitor<'_> for TemperatureVisitor {
            type Value = Temperature;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a temperature string with an explicit unit suffix, e.g. \"115mK\"")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<Temperature, E> {
                s.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_str(TemperatureVisitor)
    }
}

/// A sweep axis of frequencies: either an explicit `values` list or a
/// `start`/`stop`/`count` range, never both. An empty table means "use the
/// experiment's default axis".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyAxis {
    pub start: Option<Frequency>,
    pub stop: Option<Frequency>,
    pub count: Option<usize>,
    pub values: Option<Vec<Frequency>>,
}

impl FrequencyAxis {
    pub fn resolve(&self, field: &str) -> Result<Option<Vec<f64>>, String> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(values), None, None, None) => {
                if values.is_empty() {
                    Err(format!("{field}.values must not be empty"))
                } else {
                    Ok(Some(values.iter().map(|f| f.0).collect()))
                }
            }
            (None, Some(start), Some(stop), Some(count)) => {
                if count == 0 {
                    Err(format!("{field}.count must be at least 1"))
                } else {
                    Ok(Some(linspace(start.0, stop.0, count)))
                }
            }
            (None, None, None, None) => Ok(None),
            _ => Err(format!(
                "{field}: give either `values` or all of `start`, `stop`, `count`"
            )),
        }
    }
}

/// A sweep axis of plain numbers (times in us, flux in units of the quantum).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumberAxis {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    pub values: Option<Vec<f64>>,
}

impl NumberAxis {
    pub fn resolve(&self, field: &str) -> Result<Option<Vec<f64>>, String> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(values), None, None, None) => {
                if values.is_empty() {
                    Err(format!("{field}.values must not be empty"))
                } else {
                    Ok(Some(values.clone()))
                }
            }
            (None, Some(start), Some(stop), Some(count)) => {
                if count == 0 {
                    Err(format!("{field}.count must be at least 1"))
                } else {
                    Ok(Some(linspace(start, stop, count)))
                }
            }
            (None, None, None, None) => Ok(None),
            _ => Err(format!(
                "{field}: give either `values` or all of `start`, `stop`, `count`"
            )),
        }
    }
}

/// Which experiment a config file is written for. Optional; when present it
/// must match the subcommand, which catches passing the wrong file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Ringdown,
    Reset,
    Cool,
    Spectroscopy,
    Analytic,
    Fit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Ringdown => "ringdown",
            ExperimentKind::Reset => "reset",
            ExperimentKind::Cool => "cool",
            ExperimentKind::Spectroscopy => "spectroscopy",
            ExperimentKind::Analytic => "analytic",
            ExperimentKind::Fit => "fit",
        }
    }
}

/// Device overrides. Any field left out keeps the default device value, so a
/// config only states what differs from the reference chip.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    pub omega_c: Option<Frequency>,
    pub omega_q: Option<Frequency>,
    pub omega_f: Option<Frequency>,
    pub omega_diss_max: Option<Frequency>,
    pub alpha_q: Option<Frequency>,
    pub alpha_diss: Option<Frequency>,
    pub g_q: Option<Frequency>,
    pub g_c: Option<Frequency>,
    pub g_f: Option<Frequency>,
    pub kappa_c: Option<Frequency>,
    pub kappa_f: Option<Frequency>,
    pub kappa_diss: Option<Frequency>,
    pub chi: Option<Frequency>,
    pub d: Option<f64>,
    pub t_zero: Option<Temperature>,
    pub t_bath: Option<Temperature>,
}

impl DeviceSection {
    /// Applies the overrides to the default device and validates the result.
    pub fn to_params(&self) -> Result<DeviceParams, String> {
        let mut params = DeviceParams::default();
        if let Some(f) = self.omega_c {
            params.omega_c = f.0;
        }
        if let Some(f) = self.omega_q {
            params.omega_q = f.0;
        }
        if let Some(f) = self.omega_f {
            params.omega_f = f.0;
        }
        if let Some(f) = self.omega_diss_max {
            params.omega_diss_max = f.0;
        }
        if let Some(f) = self.alpha_q {
            params.alpha_q = f.0;
        }
        if let Some(f) = self.alpha_diss {
            params.alpha_diss = f.0;
        }
        if let Some(f) = self.g_q {
            params.g_q = f.0;
        }
        if let Some(f) = self.g_c {
            params.g_c = f.0;
        }
        if let Some(f) = self.g_f {
            params.g_f = f.0;
        }
        if let Some(f) = self.kappa_c {
            params.kappa_c = f.0;
        }
        if let Some(f) = self.kappa_f {
            params.kappa_f = f.0;
        }
        if let Some(f) = self.kappa_diss {
            params.kappa_diss = f.0;
        }
        if let Some(f) = self.chi {
            params.chi = f.0;
        }
        if let Some(d) = self.d {
            params.d = d;
        }
        if let Some(t) = self.t_zero {
            params.t_zero_k = t.0;
        }
        if let Some(t) = self.t_bath {
            params.t_bath_k = t.0;
        }
        params.validate().map_err(|e| e.to_string())?;
        Ok(params)
    }
}

/// Settings for the induced-loss ringdown map.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingdownSection {
    pub omega_p: FrequencyAxis,
    pub g_p: FrequencyAxis,
    pub cavity_dim: Option<usize>,
    pub initial_level: Option<usize>,
    pub samples: Option<usize>,
    pub window_factor: Option<f64>,
    pub settle_factor: Option<f64>,
    pub noise_sigma: Option<f64>,
}

/// Settings for the reset recovery-time experiment.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResetSection {
    pub n_bar0: Option<f64>,
    pub tau: NumberAxis,
    pub epsilon_p: Option<Frequency>,
    pub omega_p: Option<Frequency>,
    pub gap: Option<f64>,
    pub gamma_2_0: Option<f64>,
    pub recovery_fraction: Option<f64>,
    pub gamma_cav: Option<f64>,
}

/// Settings for the dephasing-versus-pump refrigeration map.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoolSection {
    pub g_p: FrequencyAxis,
    pub injected: Option<Vec<f64>>,
    pub gamma_2_0: Option<f64>,
}

/// Settings for the flux-bias mode spectroscopy sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectroscopySection {
    pub phi: NumberAxis,
    pub include_qubit: Option<bool>,
}

/// The full run configuration. Unknown keys anywhere in the file are errors,
/// so typos fail loudly instead of silently falling back to defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub device: DeviceSection,
    pub ringdown: RingdownSection,
    pub reset: ResetSection,
    pub cool: CoolSection,
    pub spectroscopy: SpectroscopySection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| e.to_string())
    }
}
