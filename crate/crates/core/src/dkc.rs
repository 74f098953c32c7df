//! Delta-kick collimation: short harmonic pulses that cancel the expansion
//! rate of a spherical condensate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BECParams, GaussianState, TrapSchedule, TrapSegment, WidthTrajectory};
use crate::variational::{self, IntegratorSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickMode {
    /// Instantaneous impulse `σ̇ → σ̇ − ω²Δt·σ`.
    ThinLens,
    /// The harmonic pulse integrated through the full width equations.
    #[default]
    FinitePulse,
}

/// A single collimation pulse. `omega = None` means the frequency is chosen
/// at kick time so that the rate vanishes after the pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickSpec {
    pub kick_time: f64,
    pub duration: f64,
    pub omega: Option<f64>,
    pub mode: KickMode,
}

impl KickSpec {
    pub fn collimating(kick_time: f64, duration: f64, mode: KickMode) -> Result<Self> {
        let spec = KickSpec {
            kick_time,
            duration,
            omega: None,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kick_time > 0.0 && self.kick_time.is_finite()) {
            return Err(Error::config("kick time must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("pulse duration must be positive"));
        }
        if let Some(w) = self.omega {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config("kick frequency must be non-negative"));
            }
        }
        Ok(())
    }

    /// Set when the pulse is not short compared with the kick time.
    pub fn warning(&self) -> Option<String> {
        (self.duration >= self.kick_time / 10.0).then(|| {
            format!(
                "pulse duration {:e} is not small against kick time {:e}; thin-lens picture is poor",
                self.duration, self.kick_time
            )
        })
    }
}

/// Thin-lens frequency that nulls the rate: `ω² = σ̇/(σ·Δt)`.
pub fn collimation_frequency(state: &GaussianState, duration: f64) -> Result<f64> {
    let (s, v) = state.spherical_parts()?;
    if !(duration > 0.0) {
        return Err(Error::domain("pulse duration must be positive"));
    }
    if !(v > 0.0) {
        return Err(Error::domain(format!(
            "width rate {v:e} is not positive; nothing to collimate"
        )));
    }
    Ok((v / (s * duration)).sqrt())
}

pub fn apply_thin_lens(state: &GaussianState, omega: f64, duration: f64) -> Result<GaussianState> {
    let mut rates = state.rates;
    for (r, s) in rates.iter_mut().zip(state.widths) {
        *r -= omega * omega * duration * s;
    }
    GaussianState::new(state.widths, rates, state.time + duration)
}

pub fn apply_finite_pulse(
    state: &GaussianState,
    omega: f64,
    duration: f64,
    params: &BECParams,
    settings: &IntegratorSettings,
) -> Result<GaussianState> {
    if !(duration > 0.0) {
        return Err(Error::domain("pulse duration must be positive"));
    }
    let t0 = state.time;
    let schedule = TrapSchedule::new(vec![TrapSegment::isotropic(t0, t0 + duration, omega)])?;
    let traj = variational::integrate_at(state, params, &schedule, t0 + duration, &[], settings)?;
    Ok(traj.final_state())
}

/// Frequency for which a finite pulse leaves `σ̇ = 0` at its end. The
/// thin-lens value seeds a bracket on ω², refined by bisection.
pub fn collimation_frequency_finite(
    state: &GaussianState,
    duration: f64,
    params: &BECParams,
    settings: &IntegratorSettings,
) -> Result<f64> {
    let thin = collimation_frequency(state, duration)?;
    let rate_after = |w2: f64| -> Result<f64> {
        Ok(apply_finite_pulse(state, w2.sqrt(), duration, params, settings)?.rates[0])
    };

    let mut lo = 0.0;
    let mut hi = thin * thin;
    let mut expansions = 0;
    while rate_after(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::domain("could not bracket the collimating frequency"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_after(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KickOutcome {
    pub omega: f64,
    pub before: GaussianState,
    pub after: GaussianState,
}

/// Free flight to the kick, the pulse, then the rest of `schedule` up to
/// `t_end`. Output samples lie on `sample_times` plus all boundaries.
pub fn run_with_kick(
    state0: &GaussianState,
    params: &BECParams,
    schedule: &TrapSchedule,
    kick: &KickSpec,
    t_end: f64,
    sample_times: &[f64],
    settings: &IntegratorSettings,
) -> Result<(WidthTrajectory, KickOutcome)> {
    kick.validate()?;
    let t_kick = kick.kick_time;
    let t_after = t_kick + kick.duration;
    if !(t_kick > state0.time && t_after < t_end) {
        return Err(Error::config(format!(
            "kick interval [{t_kick:e}, {t_after:e}] must lie inside ({:e}, {t_end:e})",
            state0.time
        )));
    }
    let mut traj =
        variational::integrate_at(state0, params, schedule, t_kick, sample_times, settings)?;
    let before = traj.final_state();

    let omega = match (kick.omega, kick.mode) {
        (Some(w), _) => w,
        (None, KickMode::ThinLens) => collimation_frequency(&before, kick.duration)?,
        (None, KickMode::FinitePulse) => {
            collimation_frequency_finite(&before, kick.duration, params, settings)?
        }
    };
    let pulse = TrapSegment::isotropic(t_kick, t_after, omega);
    let full_schedule = schedule.with_segment(pulse)?;

    let after = match kick.mode {
        KickMode::ThinLens => {
            let after = apply_thin_lens(&before, omega, kick.duration)?;
            let mut jump = variational::integrate_at(
                &before,
                params,
                &TrapSchedule::free_flight(),
                t_after,
                &[],
                settings,
            )?;
            // The lens is instantaneous; record the kicked state at the end
            // of the pulse window instead of the free-flight one.
            let last = jump.samples.last_mut().expect("non-empty");
            last.widths = after.widths;
            last.rates = after.rates;
            last.energy = variational::energy_per_particle(&after, params, [0.0; 3])?;
            traj.extend(jump);
            after
        }
        KickMode::FinitePulse => {
            let pulse_traj = variational::integrate_at(
                &before,
                params,
                &full_schedule,
                t_after,
                sample_times,
                settings,
            )?;
            let after = pulse_traj.final_state();
            traj.extend(pulse_traj);
            after
        }
    };

    let rest = variational::integrate_at(
        &after,
        params,
        &full_schedule,
        t_end,
        sample_times,
        settings,
    )?;
    traj.extend(rest);
    traj.schedule = full_schedule;
    Ok((
        traj,
        KickOutcome {
            omega,
            before,
            after,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{Dimension, UnitSystem};
    use approx::assert_relative_eq;

    fn free() -> BECParams {
        BECParams::new(0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn far_field_frequency() {
        // Far field: σ̇·t_DK = σ, so ω² = 1/(t_DK·Δt).
        let u = UnitSystem::rubidium87();
        let t_dk = u.to_internal(1e-2, Dimension::Time);
        let dt = u.to_internal(1e-5, Dimension::Time);
        let state = GaussianState::spherical(3.0 * t_dk, 3.0).unwrap();
        let w = collimation_frequency(&state, dt).unwrap();
        let w_si = u.from_internal(w, Dimension::Frequency);
        assert_relative_eq!(w_si, (1.0 / (1e-2 * 1e-5f64)).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(w_si, 3162.2776601683795, max_relative = 1e-12);
    }

    #[test]
    fn nothing_to_collimate() {
        let s = GaussianState::spherical(1.0, 0.0).unwrap();
        assert!(matches!(
            collimation_frequency(&s, 0.1),
            Err(Error::Domain(_))
        ));
        let s = GaussianState::spherical(1.0, -0.2).unwrap();
        assert!(collimation_frequency(&s, 0.1).is_err());
    }

    #[test]
    fn thin_lens_nulls_rate() {
        let s = GaussianState::spherical(7.0, 0.3).unwrap().at_time(2.0);
        let w = collimation_frequency(&s, 0.01).unwrap();
        let k = apply_thin_lens(&s, w, 0.01).unwrap();
        assert_eq!(k.widths, s.widths);
        assert!(k.rates[0].abs() < 1e-15, "{:?}", k.rates);
        assert_eq!(k.beta[0], -k.rates[0] / (2.0 * k.widths[0]));
        assert_eq!(k.time, 2.01);
        // Idempotence: nothing left to collimate.
        assert!(collimation_frequency(&k, 0.01).is_err());
    }

    #[test]
    fn thin_lens_impulse() {
        let s = GaussianState::spherical(4.0, 0.5).unwrap();
        assert_eq!(apply_thin_lens(&s, 0.0, 0.3).unwrap().rates, s.rates);
        let k = apply_thin_lens(&s, 2.0, 0.01).unwrap();
        assert_relative_eq!(k.rates[0], 0.5 - 4.0 * 0.01 * 4.0, max_relative = 1e-15);
    }

    #[test]
    fn finite_pulse_without_trap_is_free_flight() {
        let s = GaussianState::spherical(2.0, 0.1).unwrap();
        let out =
            apply_finite_pulse(&s, 0.0, 3.0, &free(), &IntegratorSettings::default()).unwrap();
        let v_inf2 = 0.01 + 0.25 / 4.0;
        let exact = (4.0 + 2.0 * 2.0 * 0.1 * 3.0 + v_inf2 * 9.0f64).sqrt();
        assert_relative_eq!(out.widths[0], exact, max_relative = 1e-10);
        assert_relative_eq!(out.time, 3.0, max_relative = 1e-15);
    }

    #[test]
    fn finite_pulse_agrees_with_thin_lens() {
        let u = UnitSystem::rubidium87();
        let dt = u.to_internal(1e-5, Dimension::Time);
        let s = GaussianState::spherical(10.0, 0.6).unwrap();
        let p = BECParams::new(
            5e4,
            u.to_internal(90.0 * crate::units::BOHR_RADIUS, Dimension::Length),
            0.0,
        )
        .unwrap();
        let w = collimation_frequency(&s, dt).unwrap();
        let thin = apply_thin_lens(&s, w, dt).unwrap();
        let finite = apply_finite_pulse(&s, w, dt, &p, &IntegratorSettings::default()).unwrap();
        let impulse = w * w * dt * s.widths[0];
        let rel = (finite.rates[0] - thin.rates[0]).abs() / impulse;
        assert!(rel < 1e-2, "{rel:e}");
    }

    #[test]
    fn impulse_invariance() {
        let s = GaussianState::spherical(10.0, 0.6).unwrap();
        let settings = IntegratorSettings::default();
        let (w2, dt): (f64, f64) = (0.5, 0.02);
        let a = apply_finite_pulse(&s, w2.sqrt(), dt, &free(), &settings).unwrap();
        let b = apply_finite_pulse(&s, (2.0 * w2).sqrt(), dt / 2.0, &free(), &settings).unwrap();
        let da = a.rates[0] - s.rates[0];
        let db = b.rates[0] - s.rates[0];
        // Same impulse, first-order agreement; residual is O(Δt).
        let impulse = w2 * dt * s.widths[0];
        assert!(((da - db) / impulse).abs() < 0.05, "{da} {db}");
    }

    #[test]
    fn finite_pulse_converges_linearly_to_thin_lens() {
        let s = GaussianState::spherical(10.0, 0.6).unwrap();
        let settings = IntegratorSettings::default();
        let impulse = 0.05; // ω²Δt
        let gap = |dt: f64| {
            let w = (impulse / dt).sqrt();
            let thin = apply_thin_lens(&s, w, dt).unwrap();
            let fin = apply_finite_pulse(&s, w, dt, &free(), &settings).unwrap();
            (fin.rates[0] - thin.rates[0]).abs()
        };
        let errs: Vec<f64> = [0.08, 0.04, 0.02, 0.01].iter().map(|&dt| gap(dt)).collect();
        for pair in errs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((1.6..2.5).contains(&ratio), "{errs:?}");
        }
    }

    #[test]
    fn finite_collimation_nulls_rate() {
        let s = GaussianState::spherical(10.0, 0.6).unwrap();
        let p = BECParams::new(5e4, 4.76e-3, 0.0068).unwrap();
        let settings = IntegratorSettings::default();
        let w = collimation_frequency_finite(&s, 0.01, &p, &settings).unwrap();
        let out = apply_finite_pulse(&s, w, 0.01, &p, &settings).unwrap();
        assert!(out.rates[0].abs() < 1e-12, "{:?}", out.rates);
        let thin = collimation_frequency(&s, 0.01).unwrap();
        assert_relative_eq!(w, thin, max_relative = 1e-2);
    }

    #[test]
    fn kick_spec_checks() {
        assert!(KickSpec::collimating(0.0, 1.0, KickMode::ThinLens).is_err());
        assert!(KickSpec::collimating(1.0, -1.0, KickMode::ThinLens).is_err());
        let k = KickSpec::collimating(10.0, 0.01, KickMode::FinitePulse).unwrap();
        assert!(k.warning().is_none());
        let k = KickSpec::collimating(10.0, 2.0, KickMode::FinitePulse).unwrap();
        assert!(k.warning().is_some());
    }

    #[test]
    fn kicked_run_collimates() {
        let p = BECParams::new(5e4, 4.76e-3, 0.0).unwrap();
        let s0 = GaussianState::spherical(2.5, 0.0).unwrap();
        let settings = IntegratorSettings::default();
        for mode in [KickMode::ThinLens, KickMode::FinitePulse] {
            let kick = KickSpec::collimating(7.3, 0.0073, mode).unwrap();
            let grid = variational::sample_grid(0.0, 50.0, 1.0);
            let (traj, out) = run_with_kick(
                &s0,
                &p,
                &TrapSchedule::free_flight(),
                &kick,
                50.0,
                &grid,
                &settings,
            )
            .unwrap();
            assert!(out.after.rates[0].abs() < 1e-12);
            assert!(traj.samples.windows(2).all(|w| w[0].time < w[1].time));
            assert!(traj.sample_at(7.3).is_some());
            assert!(traj.sample_at(7.3 + 0.0073).is_some());
            assert_eq!(traj.last().time, 50.0);
            // After collimation only the residual interaction energy drives
            // expansion, far slower than before the kick.
            assert!(traj.last().rates[0] < 0.1 * out.before.rates[0]);
        }
    }
}
