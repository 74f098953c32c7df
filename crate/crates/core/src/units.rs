//! Physical constants and the internal unit system.
//!
//! All numerical work runs in units where ħ = m = 1 and lengths are measured
//! in multiples of a reference length (1 µm by default). The time unit is
//! then `m·L²/ħ` and the energy unit `ħ/T`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054571817e-34;
/// Bohr radius [m].
pub const BOHR_RADIUS: f64 = 5.29177211e-11;
/// Electron volt [J].
pub const ELECTRON_VOLT: f64 = 1.602176634e-19;
/// Mass of a ⁸⁷Rb atom [kg].
pub const RB87_MASS: f64 = 1.44316060e-25;

pub const MICROMETER: f64 = 1e-6;

/// Physical dimensions the unit system knows how to convert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Length,
    Time,
    Energy,
    Frequency,
    Velocity,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Length,
        Dimension::Time,
        Dimension::Energy,
        Dimension::Frequency,
        Dimension::Velocity,
    ];
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(Dimension::Length),
            "time" => Ok(Dimension::Time),
            "energy" => Ok(Dimension::Energy),
            "frequency" => Ok(Dimension::Frequency),
            "velocity" => Ok(Dimension::Velocity),
            other => Err(Error::config(format!("unknown dimension kind `{other}`"))),
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Energy => "energy",
            Dimension::Frequency => "frequency",
            Dimension::Velocity => "velocity",
        };
        f.write_str(s)
    }
}

/// Scaling between SI and internal units for one species and length scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitSystem {
    reference_length: f64,
    species_mass: f64,
    time_unit: f64,
    energy_unit: f64,
}

impl UnitSystem {
    pub fn new(reference_length: f64, species_mass: f64) -> Result<Self> {
        if !(reference_length.is_finite() && reference_length > 0.0) {
            return Err(Error::config(format!(
                "reference length must be positive, got {reference_length:e} m"
            )));
        }
        if !(species_mass.is_finite() && species_mass > 0.0) {
            return Err(Error::config(format!(
                "species mass must be positive, got {species_mass:e} kg"
            )));
        }
        let time_unit = species_mass * reference_length * reference_length / HBAR;
        Ok(Self {
            reference_length,
            species_mass,
            time_unit,
            energy_unit: HBAR / time_unit,
        })
    }

    /// ⁸⁷Rb with a 1 µm reference length.
    pub fn rubidium87() -> Self {
        Self::new(MICROMETER, RB87_MASS).expect("constants are positive")
    }

    pub fn reference_length(&self) -> f64 {
        self.reference_length
    }

    pub fn species_mass(&self) -> f64 {
        self.species_mass
    }

    /// Seconds per internal time unit.
    pub fn time_unit(&self) -> f64 {
        self.time_unit
    }

    /// Joules per internal energy unit.
    pub fn energy_unit(&self) -> f64 {
        self.energy_unit
    }

    /// SI value of one internal unit of `dim`.
    pub fn scale(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Length => self.reference_length,
            Dimension::Time => self.time_unit,
            Dimension::Energy => self.energy_unit,
            Dimension::Frequency => 1.0 / self.time_unit,
            Dimension::Velocity => self.reference_length / self.time_unit,
        }
    }

    pub fn to_internal(&self, value: f64, dim: Dimension) -> f64 {
        value / self.scale(dim)
    }

    pub fn from_internal(&self, value: f64, dim: Dimension) -> f64 {
        value * self.scale(dim)
    }

    /// String-keyed variant for config loaders.
    pub fn to_internal_named(&self, value: f64, dim: &str) -> Result<f64> {
        Ok(self.to_internal(value, dim.parse()?))
    }

    pub fn from_internal_named(&self, value: f64, dim: &str) -> Result<f64> {
        Ok(self.from_internal(value, dim.parse()?))
    }

    /// Acceleration scale `L/T²` in m/s².
    pub fn acceleration_scale(&self) -> f64 {
        self.reference_length / (self.time_unit * self.time_unit)
    }
}
