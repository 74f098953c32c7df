//! A complete expansion scenario: species, initial state, trap schedule and
//! an optional collimation kick.

use crate::dkc::{self, KickOutcome, KickSpec};
use crate::error::Result;
use crate::model::{BECParams, GaussianState, TrapSchedule, WidthTrajectory};
use crate::units::{Dimension, UnitSystem, BOHR_RADIUS, ELECTRON_VOLT, MICROMETER};
use crate::variational::{self, IntegratorSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub units: UnitSystem,
    pub params: BECParams,
    pub initial: GaussianState,
    pub schedule: TrapSchedule,
    pub kick: Option<KickSpec>,
    pub settings: IntegratorSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub trajectory: WidthTrajectory,
    pub kick: Option<KickOutcome>,
}

impl Experiment {
    /// ⁸⁷Rb, N = 5·10⁴, a = 90 a₀, σ(0) = 2.5 µm at rest, free flight,
    /// 1 ms output sampling. `b_ev` is the log strength in eV.
    pub fn baseline(b_ev: f64) -> Self {
        let units = UnitSystem::rubidium87();
        let params = BECParams::new(
            5e4,
            units.to_internal(90.0 * BOHR_RADIUS, Dimension::Length),
            units.to_internal(b_ev * ELECTRON_VOLT, Dimension::Energy),
        )
        .expect("default parameters are valid");
        let initial =
            GaussianState::spherical(units.to_internal(2.5 * MICROMETER, Dimension::Length), 0.0)
                .expect("positive width");
        let settings = IntegratorSettings::default()
            .with_sample_interval(units.to_internal(1e-3, Dimension::Time));
        Experiment {
            units,
            params,
            initial,
            schedule: TrapSchedule::free_flight(),
            kick: None,
            settings,
        }
    }

    pub fn with_kick(mut self, kick: KickSpec) -> Self {
        self.kick = Some(kick);
        self
    }

    pub fn with_log_strength(&self, b: f64) -> Self {
        Experiment {
            params: self.params.with_log_strength(b),
            ..self.clone()
        }
    }

    pub fn with_initial(&self, initial: GaussianState) -> Self {
        Experiment {
            initial,
            ..self.clone()
        }
    }

    /// Convert an SI time to internal units.
    pub fn internal_time(&self, seconds: f64) -> f64 {
        self.units.to_internal(seconds, Dimension::Time)
    }

    pub fn sample_times(&self, t_end: f64) -> Vec<f64> {
        variational::sample_grid(self.initial.time, t_end, self.settings.sample_interval)
    }

    /// Run to `t_end` (internal units) on the configured sample grid.
    pub fn run(&self, t_end: f64) -> Result<ExperimentRun> {
        self.run_at(t_end, &self.sample_times(t_end))
    }

    pub fn run_at(&self, t_end: f64, sample_times: &[f64]) -> Result<ExperimentRun> {
        match &self.kick {
            None => Ok(ExperimentRun {
                trajectory: variational::integrate_at(
                    &self.initial,
                    &self.params,
                    &self.schedule,
                    t_end,
                    sample_times,
                    &self.settings,
                )?,
                kick: None,
            }),
            Some(kick) => {
                let (trajectory, outcome) = dkc::run_with_kick(
                    &self.initial,
                    &self.params,
                    &self.schedule,
                    kick,
                    t_end,
                    sample_times,
                    &self.settings,
                )?;
                Ok(ExperimentRun {
                    trajectory,
                    kick: Some(outcome),
                })
            }
        }
    }
}
