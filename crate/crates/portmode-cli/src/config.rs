//! The run-configuration file: one TOML document carries all the physics
//! of a run (input system, ports, circuit, excitation, directions,
//! synthesis setup). Command-line flags only select verbosity,
//! parallelism and output paths, so the config file alone reproduces a
//! result.

use std::path::PathBuf;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub ports: PortsConfig,
    #[serde(default)]
    pub circuit: CircuitConfig,
    pub excitation: Option<ExcitationConfig>,
    #[serde(default)]
    pub direction: Vec<DirectionConfig>,
    pub synthesis: Option<SynthesisConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Path to an operator bundle directory (single frequency).
    pub bundle: Option<PathBuf>,
    /// Inline dipole-array description, rebuilt per sweep frequency.
    pub dipole: Option<DipoleConfig>,
    /// Bundle symmetry handling: "strict" (default) or "lenient".
    #[serde(default)]
    pub strictness: StrictnessConfig,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrictnessConfig {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleConfig {
    pub frequency_start: f64,
    /// Defaults to `frequency_start`.
    pub frequency_stop: Option<f64>,
    #[serde(default = "one")]
    pub frequency_count: usize,
    pub segments_per_dipole: usize,
    /// Conductivity in S/m; omitted means a perfect conductor.
    pub conductivity: Option<f64>,
    pub element: Vec<ElementConfig>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementConfig {
    pub length: f64,
    pub radius: f64,
    pub center: [f64; 3],
    pub axis: [f64; 3],
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortsConfig {
    /// Explicit basis indices hosting ports.
    pub positions: Option<Vec<usize>>,
    /// Place one port at the center of every dipole (generated systems
    /// and bundles that carry basis geometry).
    #[serde(default)]
    pub dipole_centers: bool,
    /// Candidate regions for `synthesize`.
    pub regions: Option<Vec<Vec<usize>>>,
    /// Candidate positions for `scan-port` (defaults to every basis
    /// function).
    pub candidates: Option<Vec<usize>>,
}

/// Shared or per-port real circuit values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Spread {
    Shared(f64),
    PerPort(Vec<f64>),
}

impl Spread {
    pub fn resolve(&self, p: usize, what: &str) -> Result<Vec<f64>, CliError> {
        match self {
            Spread::Shared(x) => Ok(vec![*x; p]),
            Spread::PerPort(v) if v.len() == p => Ok(v.clone()),
            Spread::PerPort(v) => Err(CliError::config(format!(
                "{what}: expected {p} per-port values, got {}",
                v.len()
            ))),
        }
    }

    pub fn shared(&self, what: &str) -> Result<f64, CliError> {
        match self {
            Spread::Shared(x) => Ok(*x),
            Spread::PerPort(_) => Err(CliError::config(format!(
                "{what} must be a single shared value for this command"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    #[serde(default = "default_r0")]
    pub r0: Spread,
    #[serde(default = "default_bl")]
    pub bl: Spread,
}

fn default_r0() -> Spread {
    Spread::Shared(50.0)
}

fn default_bl() -> Spread {
    Spread::Shared(0.0)
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            r0: default_r0(),
            bl: default_bl(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    /// Unit voltage at every port.
    #[serde(default)]
    pub uniform: bool,
    /// Explicit complex voltages as [re, im] pairs.
    pub v: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionConfig {
    pub label: String,
    pub e_hat: [f64; 3],
    pub r_hat: [f64; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Strategy letter: "a" uniform, "b" optimal excitation, "c" perfect
    /// match, "d" matched + refined.
    pub strategy: String,
    /// Symmetry permutations of the basis indices (identity implied).
    #[serde(default)]
    pub symmetry: Vec<Vec<usize>>,
    /// "indexed" (default) or "direct".
    pub scoring: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Target directory for `generate`.
    pub bundle: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match (&self.input.bundle, &self.input.dipole) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "exactly one of input.bundle and input.dipole must be given, got both",
                ))
            }
            (None, None) => {
                return Err(CliError::config(
                    "exactly one of input.bundle and input.dipole must be given, got neither",
                ))
            }
            _ => {}
        }
        if let Some(d) = &self.input.dipole {
            if d.frequency_count < 1 {
                return Err(CliError::config("frequency_count must be at least 1"));
            }
            if d.element.is_empty() {
                return Err(CliError::config("dipole input needs at least one element"));
            }
            if !(d.frequency_start > 0.0) {
                return Err(CliError::config("frequency_start must be positive"));
            }
        }
        if let Some(e) = &self.excitation {
            if e.uniform == e.v.is_some() {
                return Err(CliError::config(
                    "excitation: exactly one of uniform = true or an explicit v",
                ));
            }
        }
        Ok(())
    }

    /// Sweep frequencies: a linear grid for generated systems, the stored
    /// frequency for a bundle.
    pub fn frequencies(&self, bundle_frequency: Option<f64>) -> Vec<f64> {
        match &self.input.dipole {
            Some(d) => {
                let stop = d.frequency_stop.unwrap_or(d.frequency_start);
                let n = d.frequency_count;
                (0..n)
                    .map(|i| {
                        if n == 1 {
                            d.frequency_start
                        } else {
                            d.frequency_start
                                + (stop - d.frequency_start) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            }
            None => vec![bundle_frequency.expect("bundle frequency known after read")],
        }
    }
}
