//! Gaussian-ansatz width dynamics and the closed-form quantities that go
//! with them (energy per particle, χ, maximum width, Gausson width).

mod dopri;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::model::{BECParams, GaussianState, TrajectorySample, TrapSchedule, WidthTrajectory};

use dopri::Dopri5;

/// Widths below this (internal units) abort the integration.
pub const WIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Spacing of output samples, internal time units.
    pub sample_interval: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: f64::INFINITY,
            sample_interval: 1.0,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::config("integrator tolerances must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::config("max step must be positive"));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::config("sample interval must be positive and finite"));
        }
        Ok(())
    }

    pub fn with_sample_interval(self, sample_interval: f64) -> Self {
        IntegratorSettings {
            sample_interval,
            ..self
        }
    }
}

fn check_widths(widths: &[f64; 3]) -> Result<()> {
    for (i, &s) in widths.iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::domain(format!(
                "width on axis {} must be positive, got {s:e}",
                Axis::from_index(i)
            )));
        }
    }
    Ok(())
}

#[inline]
fn axis_acceleration(i: usize, widths: &[f64; 3], omega: f64, coupling: f64, b: f64) -> f64 {
    let s = widths[i];
    let (s1, s2) = (widths[(i + 1) % 3], widths[(i + 2) % 3]);
    0.25 / (s * s * s) - omega * omega * s + coupling / (s * s * s1 * s2) - b / s
}

/// Width accelerations of the anisotropic Gaussian ansatz.
pub fn rhs_anisotropic(
    state: &GaussianState,
    params: &BECParams,
    omega: [f64; 3],
) -> Result<[f64; 3]> {
    check_widths(&state.widths)?;
    let g = params.interaction_coefficient();
    let b = params.log_strength;
    Ok([0, 1, 2].map(|i| axis_acceleration(i, &state.widths, omega[i], g, b)))
}

/// Width acceleration of a spherically symmetric condensate.
pub fn rhs_spherical(width: f64, params: &BECParams, omega: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(Error::domain(format!(
            "width must be positive, got {width:e}"
        )));
    }
    let g = params.interaction_coefficient();
    Ok(axis_acceleration(
        0,
        &[width; 3],
        omega,
        g,
        params.log_strength,
    ))
}

/// Energy per particle, with the arbitrary additive constant set to zero.
///
/// For anisotropic states each axis contributes a third of the spherical
/// kinetic, pressure, trap and log terms; the interaction term uses the
/// product of the three widths.
pub fn energy_per_particle(
    state: &GaussianState,
    params: &BECParams,
    omega: [f64; 3],
) -> Result<f64> {
    check_widths(&state.widths)?;
    let b = params.log_strength;
    let mut e = 0.0;
    for i in 0..3 {
        let s = state.widths[i];
        let v = state.rates[i];
        e += 0.5 * v * v + 0.125 / (s * s) + 0.5 * omega[i] * omega[i] * s * s + b * s.ln();
    }
    let [sx, sy, sz] = state.widths;
    e += params.atom_number * params.scatter_length / (4.0 * PI.sqrt() * sx * sy * sz);
    Ok(e)
}

/// Ratio of the initial non-logarithmic energy to `b`.
pub fn chi(state0: &GaussianState, params: &BECParams) -> Result<f64> {
    let (s, v) = state0.spherical_parts()?;
    if params.log_strength == 0.0 {
        return Err(Error::domain("chi is undefined for b = 0"));
    }
    chi_from_parts(s, v, params)
}

pub(crate) fn chi_from_parts(s: f64, v: f64, params: &BECParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain("initial width must be positive"));
    }
    let initial = 1.5 * v * v
        + 3.0 / (8.0 * s * s)
        + params.atom_number * params.scatter_length / (4.0 * PI.sqrt() * s * s * s);
    Ok(initial / (3.0 * params.log_strength))
}

/// A-priori upper bound `σ(0)·exp(χ)` on the width of a confined condensate.
pub fn sigma_max(state0: &GaussianState, params: &BECParams) -> Result<f64> {
    if !(params.log_strength > 0.0) {
        return Err(Error::domain("maximum width bound requires b > 0"));
    }
    let c = chi(state0, params)?;
    Ok(state0.widths[0] * c.exp())
}

/// Width `ħ/(2√(mb))` of the stationary Gaussian soliton (N = 0).
pub fn gausson_width(params: &BECParams) -> Result<f64> {
    if !(params.log_strength > 0.0) {
        return Err(Error::domain("Gausson width requires b > 0"));
    }
    Ok(0.5 / params.log_strength.sqrt())
}

/// Output instants `t0 + k·interval` strictly inside (t0, t_end).
pub fn sample_grid(t0: f64, t_end: f64, interval: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1u64;
    loop {
        let t = t0 + k as f64 * interval;
        // Skip instants that would coincide with t_end up to rounding.
        if t >= t_end - 1e-9 * interval {
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}

/// Integrate the width equations from `state0` to `t_end`, sampling every
/// `settings.sample_interval` plus at every schedule boundary.
pub fn integrate(
    state0: &GaussianState,
    params: &BECParams,
    schedule: &TrapSchedule,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<WidthTrajectory> {
    settings.validate()?;
    let grid = sample_grid(state0.time, t_end, settings.sample_interval);
    integrate_at(state0, params, schedule, t_end, &grid, settings)
}

/// Like [`integrate`] but with explicit output instants. Instants outside
/// (state0.time, t_end) are ignored; the initial state, every schedule
/// boundary and `t_end` are always sampled.
pub fn integrate_at(
    state0: &GaussianState,
    params: &BECParams,
    schedule: &TrapSchedule,
    t_end: f64,
    sample_times: &[f64],
    settings: &IntegratorSettings,
) -> Result<WidthTrajectory> {
    settings.validate()?;
    check_widths(&state0.widths)?;
    let t0 = state0.time;
    if !(t_end > t0) {
        return Err(Error::config(format!(
            "end time {t_end:e} must be after the initial time {t0:e}"
        )));
    }

    let mut targets: Vec<f64> = sample_times
        .iter()
        .copied()
        .filter(|&t| t > t0 && t < t_end)
        .chain(schedule.boundaries_within(t0, t_end))
        .chain(std::iter::once(t_end))
        .collect();
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let coupling = params.interaction_coefficient();
    let b = params.log_strength;

    let points: Vec<([f64; 3], [f64; 3])> = if coupling == 0.0 {
        // Without the contact term the axes are independent problems.
        let mut per_axis = Vec::with_capacity(3);
        for i in 0..3 {
            let omega_of = |ta: f64, tb: f64| schedule.omega_between(ta, tb)[i];
            let ys = march::<2, _, _, _>(
                [state0.widths[i], state0.rates[i]],
                t0,
                &targets,
                settings,
                |omega: f64| {
                    move |_t: f64, y: &[f64; 2]| {
                        let s = y[0];
                        [y[1], 0.25 / (s * s * s) - omega * omega * s - b / s]
                    }
                },
                omega_of,
                |t, y| floor_check(Axis::from_index(i), t, y[0]),
            )?;
            per_axis.push(ys);
        }
        (0..targets.len())
            .map(|k| {
                (
                    [per_axis[0][k][0], per_axis[1][k][0], per_axis[2][k][0]],
                    [per_axis[0][k][1], per_axis[1][k][1], per_axis[2][k][1]],
                )
            })
            .collect()
    } else {
        let y0 = [
            state0.widths[0],
            state0.widths[1],
            state0.widths[2],
            state0.rates[0],
            state0.rates[1],
            state0.rates[2],
        ];
        let ys = march::<6, _, _, _>(
            y0,
            t0,
            &targets,
            settings,
            |omega: [f64; 3]| {
                move |_t: f64, y: &[f64; 6]| {
                    let w = [y[0], y[1], y[2]];
                    [
                        y[3],
                        y[4],
                        y[5],
                        axis_acceleration(0, &w, omega[0], coupling, b),
                        axis_acceleration(1, &w, omega[1], coupling, b),
                        axis_acceleration(2, &w, omega[2], coupling, b),
                    ]
                }
            },
            |ta, tb| schedule.omega_between(ta, tb),
            |t, y| {
                for i in 0..3 {
                    floor_check(Axis::from_index(i), t, y[i])?;
                }
                Ok(())
            },
        )?;
        ys.iter()
            .map(|y| ([y[0], y[1], y[2]], [y[3], y[4], y[5]]))
            .collect()
    };

    let mut samples = Vec::with_capacity(points.len() + 1);
    samples.push(TrajectorySample {
        time: t0,
        widths: state0.widths,
        rates: state0.rates,
        energy: energy_per_particle(state0, params, schedule.omega_at(t0))?,
    });
    for (&t, (widths, rates)) in targets.iter().zip(points) {
        let state = GaussianState::new(widths, rates, t)?;
        samples.push(TrajectorySample {
            time: t,
            widths,
            rates,
            energy: energy_per_particle(&state, params, schedule.omega_at(t))?,
        });
    }

    Ok(WidthTrajectory {
        samples,
        params: params.clone(),
        schedule: schedule.clone(),
        rtol: settings.rtol,
        atol: settings.atol,
    })
}

fn floor_check(axis: Axis, time: f64, width: f64) -> Result<()> {
    if width < WIDTH_FLOOR || !width.is_finite() {
        return Err(Error::Collapse { axis, time, width });
    }
    Ok(())
}

/// Advance through each target in turn with a fresh right-hand side per
/// interval, so steps never straddle a change of trap frequency.
fn march<const D: usize, W, M, R>(
    y0: [f64; D],
    t0: f64,
    targets: &[f64],
    settings: &IntegratorSettings,
    make_rhs: M,
    omega_of: impl Fn(f64, f64) -> W,
    check: impl Fn(f64, &[f64; D]) -> Result<()>,
) -> Result<Vec<[f64; D]>>
where
    W: Copy + PartialEq,
    M: Fn(W) -> R,
    R: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut stepper = Dopri5::new(settings.rtol, settings.atol, settings.max_step);
    let mut out = Vec::with_capacity(targets.len());
    let mut t = t0;
    let mut y = y0;
    let mut current: Option<W> = None;
    for &target in targets {
        let omega = omega_of(t, target);
        if current.is_some_and(|w| w != omega) {
            // Restart step-size selection after a discontinuity.
            stepper = Dopri5::new(settings.rtol, settings.atol, settings.max_step);
        }
        current = Some(omega);
        let rhs = make_rhs(omega);
        y = stepper.advance(&rhs, t, y, target, &check)?;
        t = target;
        out.push(y);
    }
    Ok(out)
}
