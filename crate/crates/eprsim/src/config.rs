//! Scenario files (TOML) and their translation into a [`Scenario`].
//!
//! ```toml
//! id = "nominal"
//! detection = "paper_scheme"        # or "homodyne_baseline"
//! electronic_noise = 0.0
//! analysis_frequency = "5 MHz"      # carried through to every record
//!
//! [source]
//! alpha = 100.0
//! r = 1.0
//! mode = "deamp"                    # or "amp"
//! excess_noise = 0.0
//! efficiency = 1.0
//!
//! [[chain]]
//! kind = "qwp"
//! angle_deg = 0.0
//!
//! [[chain]]
//! kind = "hwp"
//! angle_deg = 22.5
//!
//! [[chain]]
//! kind = "pbs"
//! extinction = 0.0
//!
//! [noise]
//! common_phase_rms = 0.0
//! differential_phase_rms = 0.0
//!
//! [mc]
//! samples = 1000000
//! seed = 24301
//! batch = 10000
//!
//! [sweep]
//! param = "common_phase"
//! grid = "0:6.283185307179586:100"  # or an explicit list
//!
//! [output]
//! format = "csv"
//! path = "out.csv"
//! ```

use std::path::{Path, PathBuf};

use eprsim_core::oracle::McConfig;
use eprsim_core::optics::{PumpPhase, SourceSpec, WavePlateSpec};
use eprsim_core::scenario::{set_loss, Element, PhaseNoise, Scenario, Scheme, SweepParameter, Target};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    #[serde(alias = "deamplification")]
    #[value(alias = "deamplification")]
    Deamp,
    #[serde(alias = "amplification")]
    #[value(alias = "amplification")]
    Amp,
}

impl From<Mode> for PumpPhase {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Deamp => PumpPhase::Deamplification,
            Mode::Amp => PumpPhase::Amplification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    #[default]
    PaperScheme,
    HomodyneBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetConfig {
    Signal,
    Idler,
    Both,
}

impl From<TargetConfig> for Target {
    fn from(t: TargetConfig) -> Self {
        match t {
            TargetConfig::Signal => Target::Signal,
            TargetConfig::Idler => Target::Idler,
            TargetConfig::Both => Target::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ElementConfig {
    Qwp {
        angle_deg: f64,
    },
    Hwp {
        angle_deg: f64,
    },
    /// Optical phase, radians.
    Phase {
        target: TargetConfig,
        theta: f64,
    },
    /// Rotation of the fluctuations relative to the carrier, radians.
    SqueezingPhase {
        target: TargetConfig,
        theta: f64,
    },
    Loss {
        target: TargetConfig,
        eta: f64,
    },
    Pbs {
        #[serde(default)]
        extinction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub alpha: f64,
    pub r: f64,
    pub mode: Mode,
    pub excess_noise: f64,
    pub efficiency: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        let s = SourceSpec::default();
        SourceConfig {
            alpha: s.alpha,
            r: s.r,
            mode: Mode::Deamp,
            excess_noise: s.excess_noise,
            efficiency: s.efficiency,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub common_phase_rms: f64,
    pub differential_phase_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: u64,
    pub seed: u64,
    pub batch: u64,
}

impl Default for McSection {
    fn default() -> Self {
        let c = McConfig::default();
        McSection {
            samples: c.n_samples,
            seed: c.seed,
            batch: c.batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    List(Vec<f64>),
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub param: Option<String>,
    pub grid: Option<GridConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub source: SourceConfig,
    /// `None` selects the standard quarter-wave, half-wave, PBS chain.
    pub chain: Option<Vec<ElementConfig>>,
    pub detection: Detection,
    pub electronic_noise: f64,
    pub analysis_frequency: String,
    pub noise: NoiseConfig,
    pub mc: Option<McSection>,
    pub sweep: SweepSection,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            id: "default".into(),
            source: SourceConfig::default(),
            chain: None,
            detection: Detection::PaperScheme,
            electronic_noise: 0.0,
            analysis_frequency: String::new(),
            noise: NoiseConfig::default(),
            mc: None,
            sweep: SweepSection::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub r: Option<f64>,
    pub mode: Option<Mode>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub batch: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub id: String,
    pub analysis_frequency: String,
    pub scenario: Scenario,
    /// Loss on both beams ahead of the chain, if any.
    pub eta: Option<f64>,
    pub mc: Option<McConfig>,
    pub sweep: SweepSection,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(config: ScenarioConfig, o: &Overrides) -> Result<Self, CliError> {
        let mode = o.mode.unwrap_or(config.source.mode);
        let source = SourceSpec {
            alpha: o.alpha.unwrap_or(config.source.alpha),
            r: o.r.unwrap_or(config.source.r),
            pump_phase: mode.into(),
            excess_noise: config.source.excess_noise,
            efficiency: config.source.efficiency,
        };
        source.validate()?;

        let (elements, extinction) = match &config.chain {
            None => (Scenario::direct(source).elements, 0.0),
            Some(chain) => build_chain(chain, config.detection)?,
        };
        let scheme = match config.detection {
            Detection::PaperScheme => Scheme::Direct,
            Detection::HomodyneBaseline => Scheme::Homodyne,
        };
        let noise = PhaseNoise {
            common_rms: config.noise.common_phase_rms,
            differential_rms: config.noise.differential_phase_rms,
        };
        for (name, v) in [
            ("noise.common_phase_rms", noise.common_rms),
            ("noise.differential_phase_rms", noise.differential_rms),
            ("electronic_noise", config.electronic_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let mut scenario = Scenario {
            source,
            elements,
            pbs_extinction: extinction,
            scheme,
            electronic_noise: config.electronic_noise,
            noise,
        };
        if let Some(eta) = o.eta {
            check_eta(eta)?;
            set_loss(&mut scenario, eta);
        }

        let wants_mc = config.mc.is_some() || o.seed.is_some() || o.samples.is_some() || o.batch.is_some();
        let mc = if wants_mc {
            let m = config.mc.unwrap_or_default();
            let mc = McConfig {
                n_samples: o.samples.unwrap_or(m.samples),
                seed: o.seed.unwrap_or(m.seed),
                batch: o.batch.unwrap_or(m.batch),
            };
            mc.validate()?;
            Some(mc)
        } else {
            None
        };

        Ok(Settings {
            id: config.id,
            analysis_frequency: config.analysis_frequency,
            scenario,
            eta: o.eta,
            mc,
            sweep: config.sweep,
            format: o.format.unwrap_or(config.output.format),
            out: o.out.clone().or(config.output.path),
        })
    }

    /// The Monte Carlo settings, falling back to the library defaults.
    pub fn mc_or_default(&self) -> McConfig {
        self.mc.unwrap_or_default()
    }
}

fn check_eta(eta: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(CliError::Config(format!("eta must lie in [0, 1], got {eta}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be finite, got {v}")))
    }
}

fn build_chain(chain: &[ElementConfig], detection: Detection) -> Result<(Vec<Element>, f64), CliError> {
    let mut elements = Vec::with_capacity(chain.len());
    let mut extinction = 0.0;
    for (i, e) in chain.iter().enumerate() {
        let el = match *e {
            ElementConfig::Qwp { angle_deg } => {
                Element::WavePlate(WavePlateSpec::quarter(finite("qwp.angle_deg", angle_deg)?))
            }
            ElementConfig::Hwp { angle_deg } => {
                Element::WavePlate(WavePlateSpec::half(finite("hwp.angle_deg", angle_deg)?))
            }
            ElementConfig::Phase { target, theta } => Element::Phase {
                target: target.into(),
                theta: finite("phase.theta", theta)?,
            },
            ElementConfig::SqueezingPhase { target, theta } => Element::SqueezingPhase {
                target: target.into(),
                theta: finite("squeezing_phase.theta", theta)?,
            },
            ElementConfig::Loss { target, eta } => {
                check_eta(eta)?;
                Element::Loss {
                    target: target.into(),
                    eta,
                }
            }
            ElementConfig::Pbs { extinction: eps } => {
                if i + 1 != chain.len() {
                    return Err(CliError::Config("pbs must be the last chain element".into()));
                }
                if detection == Detection::HomodyneBaseline {
                    return Err(CliError::Config(
                        "pbs has no role in homodyne_baseline detection".into(),
                    ));
                }
                extinction = finite("pbs.extinction", eps)?;
                continue;
            }
        };
        elements.push(el);
    }
    Ok((elements, extinction))
}

/// Parses `start:stop:points` (inclusive, evenly spaced) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Config(format!("bad grid {spec:?}: {what}"));
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:points"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad("start"))?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad("stop"))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad("points"))?;
        match n {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..n)
                .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(s.trim())))
            .collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(bad(&format!("non-finite value {v}")));
    }
    Ok(grid)
}

pub fn parse_param(name: &str) -> Result<SweepParameter, CliError> {
    SweepParameter::parse(name).ok_or_else(|| {
        let known: Vec<&str> = SweepParameter::ALL.iter().map(|p| p.name()).collect();
        CliError::Config(format!("unknown sweep parameter {name:?} (expected one of {})", known.join(", ")))
    })
}

/// Sweep parameter and grid from flags, else from the file.
pub fn sweep_plan(
    settings: &Settings,
    param: Option<&str>,
    grid: Option<&str>,
) -> Result<(SweepParameter, Vec<f64>), CliError> {
    let name = param
        .or(settings.sweep.param.as_deref())
        .ok_or_else(|| CliError::Config("sweep needs --param".into()))?;
    let p = parse_param(name)?;
    let grid = match (grid, &settings.sweep.grid) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(GridConfig::Spec(g))) => parse_grid(g)?,
        (None, Some(GridConfig::List(g))) if !g.is_empty() => g.clone(),
        _ => return Err(CliError::Config("sweep needs a non-empty --grid".into())),
    };
    Ok((p, grid))
}
