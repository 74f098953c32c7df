//! Domain types shared by the physics modules. All quantities are in
//! internal units (ħ = m = 1) unless a field says otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::units::{UnitSystem, RB87_MASS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub name: String,
    /// SI mass, kept for reporting; internally m = 1.
    pub mass_kg: f64,
}

impl Species {
    pub fn rubidium87() -> Self {
        Species {
            name: "Rb87".into(),
            mass_kg: RB87_MASS,
        }
    }
}

/// Interaction constants of the logarithmic Gross-Pitaevskii model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BECParams {
    pub atom_number: f64,
    /// s-wave scattering length; any sign.
    pub scatter_length: f64,
    /// Strength `b` of the logarithmic nonlinearity (energy).
    pub log_strength: f64,
    pub species: Species,
}

impl BECParams {
    pub fn new(atom_number: f64, scatter_length: f64, log_strength: f64) -> Result<Self> {
        Self::with_species(
            atom_number,
            scatter_length,
            log_strength,
            Species::rubidium87(),
        )
    }

    pub fn with_species(
        atom_number: f64,
        scatter_length: f64,
        log_strength: f64,
        species: Species,
    ) -> Result<Self> {
        if !(atom_number.is_finite() && atom_number >= 0.0) {
            return Err(Error::config(format!(
                "atom number must be >= 0, got {atom_number}"
            )));
        }
        if !scatter_length.is_finite() {
            return Err(Error::config("scatter length must be finite"));
        }
        if !log_strength.is_finite() {
            return Err(Error::config("log strength must be finite"));
        }
        Ok(BECParams {
            atom_number,
            scatter_length,
            log_strength,
            species,
        })
    }

    /// Coefficient `ħ²Na/(4m²√π)` of the Gross-Pitaevskii width force.
    pub fn interaction_coefficient(&self) -> f64 {
        self.atom_number * self.scatter_length / (4.0 * std::f64::consts::PI.sqrt())
    }

    /// Contact coupling `g = 4πħ²a/m`.
    pub fn contact_coupling(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.scatter_length
    }

    pub fn with_log_strength(&self, b: f64) -> Self {
        BECParams {
            log_strength: b,
            ..self.clone()
        }
    }

    pub fn unit_system(&self, reference_length: f64) -> Result<UnitSystem> {
        UnitSystem::new(reference_length, self.species.mass_kg)
    }
}

/// Gaussian ansatz at one instant: widths, their rates and the phase
/// parameters of each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub widths: [f64; 3],
    pub rates: [f64; 3],
    /// Linear phase (centre-of-mass velocity); always zero here.
    pub alpha: [f64; 3],
    /// Quadratic phase, tied to the rates by `m·σ̇ = −2ħ·β·σ`.
    pub beta: [f64; 3],
    pub time: f64,
}

/// Curvature phase implied by a width and its rate.
pub fn curvature_from_rate(width: f64, rate: f64) -> f64 {
    -rate / (2.0 * width)
}

impl GaussianState {
    pub fn new(widths: [f64; 3], rates: [f64; 3], time: f64) -> Result<Self> {
        for (i, (&s, &v)) in widths.iter().zip(&rates).enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::domain(format!(
                    "width on axis {} must be positive, got {s:e}",
                    Axis::from_index(i)
                )));
            }
            if !v.is_finite() {
                return Err(Error::domain(format!(
                    "width rate on axis {} is not finite",
                    Axis::from_index(i)
                )));
            }
        }
        if !time.is_finite() {
            return Err(Error::domain("state time is not finite"));
        }
        let mut beta = [0.0; 3];
        for i in 0..3 {
            beta[i] = curvature_from_rate(widths[i], rates[i]);
        }
        Ok(GaussianState {
            widths,
            rates,
            alpha: [0.0; 3],
            beta,
            time,
        })
    }

    /// All three axes equal, at t = 0.
    pub fn spherical(width: f64, rate: f64) -> Result<Self> {
        Self::new([width; 3], [rate; 3], 0.0)
    }

    pub fn at_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn is_spherical(&self) -> bool {
        self.widths[0] == self.widths[1]
            && self.widths[1] == self.widths[2]
            && self.rates[0] == self.rates[1]
            && self.rates[1] == self.rates[2]
    }

    /// Width and rate of a spherical state; domain error otherwise.
    pub fn spherical_parts(&self) -> Result<(f64, f64)> {
        if !self.is_spherical() {
            return Err(Error::domain(
                "operation requires a spherically symmetric state",
            ));
        }
        Ok((self.widths[0], self.rates[0]))
    }

    pub fn width(&self, axis: Axis) -> f64 {
        self.widths[axis.index()]
    }

    pub fn rate(&self, axis: Axis) -> f64 {
        self.rates[axis.index()]
    }

    /// Replace the rates, keeping β consistent.
    pub fn with_rates(&self, rates: [f64; 3]) -> Result<Self> {
        Self::new(self.widths, rates, self.time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSegment {
    pub start: f64,
    pub end: f64,
    /// Angular trap frequency per axis.
    pub omega: [f64; 3],
}

impl TrapSegment {
    pub fn isotropic(start: f64, end: f64, omega: f64) -> Self {
        TrapSegment {
            start,
            end,
            omega: [omega; 3],
        }
    }

    fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Piecewise-constant harmonic trap. Times not covered by a segment are
/// free flight.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrapSchedule {
    segments: Vec<TrapSegment>,
}

impl TrapSchedule {
    pub fn free_flight() -> Self {
        Self::default()
    }

    /// Segments are sorted by start time before validation.
    pub fn new(mut segments: Vec<TrapSegment>) -> Result<Self> {
        segments.sort_by(|a, b| a.start.total_cmp(&b.start));
        for s in &segments {
            if !(s.start.is_finite() && s.end.is_finite()) || s.start >= s.end {
                return Err(Error::config(format!(
                    "trap segment must satisfy start < end, got [{:e}, {:e}]",
                    s.start, s.end
                )));
            }
            if s.omega.iter().any(|w| !w.is_finite()) {
                return Err(Error::config("trap frequency must be finite"));
            }
        }
        for pair in segments.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::config(format!(
                    "trap segments overlap: [{:e}, {:e}] and [{:e}, {:e}]",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        Ok(TrapSchedule { segments })
    }

    pub fn segments(&self) -> &[TrapSegment] {
        &self.segments
    }

    pub fn with_segment(&self, segment: TrapSegment) -> Result<Self> {
        let mut segments = self.segments.clone();
        segments.push(segment);
        Self::new(segments)
    }

    /// Trap frequencies active at `t` (segments are closed on the left).
    pub fn omega_at(&self, t: f64) -> [f64; 3] {
        self.segments
            .iter()
            .find(|s| s.contains(t))
            .map_or([0.0; 3], |s| s.omega)
    }

    /// Frequencies on the open interval (t0, t1), which must not contain a
    /// boundary.
    pub fn omega_between(&self, t0: f64, t1: f64) -> [f64; 3] {
        self.omega_at(0.5 * (t0 + t1))
    }

    /// Segment boundaries strictly inside (t0, t1), ascending.
    pub fn boundaries_within(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .segments
            .iter()
            .flat_map(|s| [s.start, s.end])
            .filter(|&t| t > t0 && t < t1)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn max_omega(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.omega)
            .fold(0.0, |m, w| m.max(w.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub widths: [f64; 3],
    pub rates: [f64; 3],
    pub energy: f64,
}

impl TrajectorySample {
    pub fn state(&self) -> GaussianState {
        GaussianState::new(self.widths, self.rates, self.time)
            .expect("trajectory samples hold valid states")
    }
}

/// Sampled solution of the width equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub params: BECParams,
    pub schedule: TrapSchedule,
    pub rtol: f64,
    pub atol: f64,
}

impl WidthTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn widths(&self, axis: Axis) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| s.widths[axis.index()])
            .collect()
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> GaussianState {
        self.last().state()
    }

    /// Largest sampled width over all axes.
    pub fn max_width(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.widths)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sample taken exactly at `t`, if any.
    pub fn sample_at(&self, t: f64) -> Option<&TrajectorySample> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.samples.iter().find(|s| (s.time - t).abs() <= tol)
    }

    /// Append a continuation that starts where this trajectory ends; the
    /// duplicated junction sample is dropped.
    pub fn extend(&mut self, other: WidthTrajectory) {
        let last_t = self.last().time;
        self.samples
            .extend(other.samples.into_iter().filter(|s| s.time > last_t));
        self.schedule = other.schedule;
    }

    pub fn is_spherical(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.widths[0] == s.widths[1] && s.widths[1] == s.widths[2])
    }
}
