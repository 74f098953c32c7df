//! JSON experiment configuration. Every dimensioned field carries an
//! explicit unit tag, e.g. `{"value": 90, "unit": "a0"}`.

use std::f64::consts::PI;
use std::path::Path;

use logbec::dkc::{KickMode, KickSpec};
use logbec::units::{Dimension, UnitSystem, BOHR_RADIUS, ELECTRON_VOLT, RB87_MASS};
use logbec::{
    BECParams, Experiment, GaussianState, IntegratorSettings, Species, TrapSchedule, TrapSegment,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub trait Unit: Copy {
    const DIMENSION: Dimension;
    /// SI value of one of this unit.
    fn si(self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LengthUnit {
    #[serde(rename = "m")]
    Metre,
    #[serde(rename = "mm")]
    Millimetre,
    #[serde(rename = "um", alias = "µm")]
    Micrometre,
    #[serde(rename = "nm")]
    Nanometre,
    #[serde(rename = "a0")]
    Bohr,
}

impl Unit for LengthUnit {
    const DIMENSION: Dimension = Dimension::Length;
    fn si(self) -> f64 {
        match self {
            LengthUnit::Metre => 1.0,
            LengthUnit::Millimetre => 1e-3,
            LengthUnit::Micrometre => 1e-6,
            LengthUnit::Nanometre => 1e-9,
            LengthUnit::Bohr => BOHR_RADIUS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeUnit {
    #[serde(rename = "s")]
    Second,
    #[serde(rename = "ms")]
    Millisecond,
    #[serde(rename = "us", alias = "µs")]
    Microsecond,
    #[serde(rename = "ns")]
    Nanosecond,
}

impl Unit for TimeUnit {
    const DIMENSION: Dimension = Dimension::Time;
    fn si(self) -> f64 {
        match self {
            TimeUnit::Second => 1.0,
            TimeUnit::Millisecond => 1e-3,
            TimeUnit::Microsecond => 1e-6,
            TimeUnit::Nanosecond => 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyUnit {
    #[serde(rename = "J")]
    Joule,
    #[serde(rename = "eV")]
    ElectronVolt,
}

impl Unit for EnergyUnit {
    const DIMENSION: Dimension = Dimension::Energy;
    fn si(self) -> f64 {
        match self {
            EnergyUnit::Joule => 1.0,
            EnergyUnit::ElectronVolt => ELECTRON_VOLT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VelocityUnit {
    #[serde(rename = "m/s")]
    MetrePerSecond,
    #[serde(rename = "mm/s")]
    MillimetrePerSecond,
    #[serde(rename = "um/s", alias = "µm/s")]
    MicrometrePerSecond,
}

impl Unit for VelocityUnit {
    const DIMENSION: Dimension = Dimension::Velocity;
    fn si(self) -> f64 {
        match self {
            VelocityUnit::MetrePerSecond => 1.0,
            VelocityUnit::MillimetrePerSecond => 1e-3,
            VelocityUnit::MicrometrePerSecond => 1e-6,
        }
    }
}

/// Angular frequency; `Hz` values are multiplied by 2π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    #[serde(rename = "rad/s")]
    RadianPerSecond,
    #[serde(rename = "Hz")]
    Hertz,
}

impl Unit for FrequencyUnit {
    const DIMENSION: Dimension = Dimension::Frequency;
    fn si(self) -> f64 {
        match self {
            FrequencyUnit::RadianPerSecond => 1.0,
            FrequencyUnit::Hertz => 2.0 * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quantity<U> {
    pub value: f64,
    pub unit: U,
}

impl<U: Unit> Quantity<U> {
    pub fn new(value: f64, unit: U) -> Self {
        Quantity { value, unit }
    }

    pub fn si(&self) -> f64 {
        self.value * self.unit.si()
    }

    pub fn internal(&self, units: &UnitSystem) -> f64 {
        units.to_internal(self.si(), U::DIMENSION)
    }
}

/// One value for all three axes, or `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<U> {
    Isotropic(Quantity<U>),
    Axes([Quantity<U>; 3]),
}

impl<U: Unit> PerAxis<U> {
    pub fn internal(&self, units: &UnitSystem) -> [f64; 3] {
        match self {
            PerAxis::Isotropic(q) => [q.internal(units); 3],
            PerAxis::Axes(qs) => qs.map(|q| q.internal(units)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub name: String,
    pub mass_kg: f64,
}

impl Default for SpeciesConfig {
    fn default() -> Self {
        SpeciesConfig {
            name: "Rb87".into(),
            mass_kg: RB87_MASS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub start: Quantity<TimeUnit>,
    pub end: Quantity<TimeUnit>,
    pub omega: PerAxis<FrequencyUnit>,
}

/// A collimation pulse. Without `omega` the frequency is solved so that
/// the rate vanishes after the pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickConfig {
    pub time: Quantity<TimeUnit>,
    pub duration: Quantity<TimeUnit>,
    #[serde(default)]
    pub omega: Option<Quantity<FrequencyUnit>>,
    #[serde(default)]
    pub mode: KickMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub max_step: Option<Quantity<TimeUnit>>,
}

fn default_rtol() -> f64 {
    IntegratorSettings::default().rtol
}

fn default_atol() -> f64 {
    IntegratorSettings::default().atol
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: default_rtol(),
            atol: default_atol(),
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Variational,
    Pde,
    Both,
}

/// Radial-solver overrides; anything left out is chosen from the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub r_max: Option<Quantity<LengthUnit>>,
    #[serde(default)]
    pub time_step: Option<Quantity<TimeUnit>>,
    #[serde(default)]
    pub density_floor_ratio: Option<f64>,
}

fn default_reference_length() -> Quantity<LengthUnit> {
    Quantity::new(1.0, LengthUnit::Micrometre)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub species: SpeciesConfig,
    #[serde(default = "default_reference_length")]
    pub reference_length: Quantity<LengthUnit>,
    pub atom_number: f64,
    pub scatter_length: Quantity<LengthUnit>,
    pub log_strength: Quantity<EnergyUnit>,
    pub initial_width: PerAxis<LengthUnit>,
    #[serde(default)]
    pub initial_rate: Option<PerAxis<VelocityUnit>>,
    #[serde(default)]
    pub schedule: Vec<SegmentConfig>,
    #[serde(default)]
    pub kick: Option<KickConfig>,
    pub t_end: Quantity<TimeUnit>,
    pub sample_interval: Quantity<TimeUnit>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default)]
    pub pde: PdeConfig,
    /// Also run with b = 0 and report the width difference.
    #[serde(default)]
    pub compare_linear: bool,
}

/// Parse JSON, reporting the failing field path and source position.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            CliError::Config(inner.to_string())
        } else {
            CliError::Config(format!("field `{path}`: {inner}"))
        }
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn field<T>(name: &str, r: logbec::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("field `{name}`: {e}")))
}

fn finite(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "field `{name}`: value must be finite"
        )))
    }
}

/// A validated config in internal units.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub t_end: f64,
    pub solver: SolverKind,
    pub pde: PdeConfig,
    pub compare_linear: bool,
}

impl ExperimentConfig {
    pub fn units(&self) -> Result<UnitSystem, CliError> {
        finite("species.mass_kg", self.species.mass_kg)?;
        let l = finite("reference_length", self.reference_length.si())?;
        field("reference_length", UnitSystem::new(l, self.species.mass_kg))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let units = self.units()?;
        let species = Species {
            name: self.species.name.clone(),
            mass_kg: self.species.mass_kg,
        };
        finite("atom_number", self.atom_number)?;
        finite("scatter_length.value", self.scatter_length.value)?;
        finite("log_strength.value", self.log_strength.value)?;
        let params = field(
            "atom_number",
            BECParams::with_species(
                self.atom_number,
                self.scatter_length.internal(&units),
                self.log_strength.internal(&units),
                species,
            ),
        )?;
        if self.log_strength.value < 0.0 {
            return Err(CliError::Config(
                "field `log_strength`: must be >= 0".into(),
            ));
        }

        let widths = self.initial_width.internal(&units);
        let rates = self
            .initial_rate
            .map(|r| r.internal(&units))
            .unwrap_or([0.0; 3]);
        let initial = field("initial_width", GaussianState::new(widths, rates, 0.0))?;

        let segments = self
            .schedule
            .iter()
            .map(|s| TrapSegment {
                start: s.start.internal(&units),
                end: s.end.internal(&units),
                omega: s.omega.internal(&units),
            })
            .collect();
        let schedule = field("schedule", TrapSchedule::new(segments))?;

        let kick = match &self.kick {
            None => None,
            Some(k) => {
                let spec = KickSpec {
                    kick_time: k.time.internal(&units),
                    duration: k.duration.internal(&units),
                    omega: k.omega.map(|w| w.internal(&units)),
                    mode: k.mode,
                };
                field("kick", spec.validate())?;
                Some(spec)
            }
        };

        let settings = IntegratorSettings {
            rtol: self.integrator.rtol,
            atol: self.integrator.atol,
            max_step: self
                .integrator
                .max_step
                .map(|q| q.internal(&units))
                .unwrap_or(f64::INFINITY),
            sample_interval: self.sample_interval.internal(&units),
        };
        field("integrator", settings.validate())?;

        let t_end = self.t_end.internal(&units);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(CliError::Config("field `t_end`: must be positive".into()));
        }
        if let Some(n) = self.pde.points {
            if n < 256 || !n.is_power_of_two() {
                return Err(CliError::Config(
                    "field `pde.points`: must be a power of two >= 256".into(),
                ));
            }
        }

        Ok(Resolved {
            experiment: Experiment {
                units,
                params,
                initial,
                schedule,
                kick,
                settings,
            },
            t_end,
            solver: self.solver,
            pde: self.pde.clone(),
            compare_linear: self.compare_linear,
        })
    }
}
