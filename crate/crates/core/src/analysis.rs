//! Far-field expansion rate, its error budget, width-difference maps and
//! the parasitic-trap threshold.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::Experiment;
use crate::model::{BECParams, GaussianState};
use crate::units::{Dimension, UnitSystem, ELECTRON_VOLT, MICROMETER};
use crate::variational;

/// Squared contributions to the asymptotic (b = 0) expansion rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FarFieldRate {
    pub residual_sq: f64,
    pub heisenberg_sq: f64,
    pub interaction_sq: f64,
}

impl FarFieldRate {
    pub fn total(&self) -> f64 {
        self.total_sq().sqrt()
    }

    pub fn total_sq(&self) -> f64 {
        self.residual_sq + self.heisenberg_sq + self.interaction_sq
    }

    /// Component rates `(σ̇_R, σ̇_HU, σ̇_GP)`; a negative square (attractive
    /// interaction) comes back as a negative rate.
    pub fn components(&self) -> (f64, f64, f64) {
        let signed = |x: f64| x.signum() * x.abs().sqrt();
        (
            signed(self.residual_sq),
            signed(self.heisenberg_sq),
            signed(self.interaction_sq),
        )
    }
}

pub fn farfield_rate(state0: &GaussianState, params: &BECParams) -> Result<FarFieldRate> {
    let (s, v) = state0.spherical_parts()?;
    if !(s > 0.0) {
        return Err(Error::domain("initial width must be positive"));
    }
    Ok(FarFieldRate {
        residual_sq: v * v,
        heisenberg_sq: 0.25 / (s * s),
        interaction_sq: params.atom_number * params.scatter_length / (6.0 * PI.sqrt() * s * s * s),
    })
}

/// Relative uncertainties of the inputs to the far-field rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub atom_number: f64,
    pub scatter_length: f64,
    pub initial_width: f64,
    pub initial_rate: f64,
}

impl RelativeErrors {
    pub fn uniform(e: f64) -> Self {
        RelativeErrors {
            atom_number: e,
            scatter_length: e,
            initial_width: e,
            initial_rate: e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("atom number", self.atom_number),
            ("scatter length", self.scatter_length),
            ("initial width", self.initial_width),
            ("initial rate", self.initial_rate),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "relative error of {name} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateError {
    pub relative: f64,
    /// Same units as the rate.
    pub absolute: f64,
}

pub fn rate_error(
    state0: &GaussianState,
    params: &BECParams,
    errs: &RelativeErrors,
) -> Result<RateError> {
    errs.validate()?;
    let rate = farfield_rate(state0, params)?;
    let (r2, hu2, gp2) = (rate.residual_sq, rate.heisenberg_sq, rate.interaction_sq);
    let width_term = 1.5 * gp2 + hu2;
    let var = r2 * r2 * errs.initial_rate.powi(2)
        + width_term * width_term * errs.initial_width.powi(2)
        + 0.25 * gp2 * gp2 * (errs.scatter_length.powi(2) + errs.atom_number.powi(2));
    let relative = var.sqrt() / rate.total_sq();
    Ok(RateError {
        relative,
        absolute: relative * rate.total(),
    })
}

/// Largest parasitic harmonic frequency still distinguishable from the log
/// term: `b/ħ` (internal units, where ħ = 1).
pub fn magnetic_threshold(params: &BECParams) -> Result<f64> {
    if !(params.log_strength > 0.0) {
        return Err(Error::domain("threshold requires b > 0"));
    }
    Ok(params.log_strength)
}

/// Initial width (at rest) whose χ equals `target`, searched between
/// 0.01 µm and 1000 µm.
pub fn initial_width_for_chi(target: f64, params: &BECParams, units: &UnitSystem) -> Result<f64> {
    if !(params.log_strength > 0.0) {
        return Err(Error::domain("chi sweep requires b > 0"));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::domain(format!(
            "chi must be positive, got {target:e}"
        )));
    }
    let mut lo = units.to_internal(0.01 * MICROMETER, Dimension::Length);
    let mut hi = units.to_internal(1000.0 * MICROMETER, Dimension::Length);
    let chi_at = |s: f64| variational::chi_from_parts(s, 0.0, params);
    // chi decreases with width.
    let (c_lo, c_hi) = (chi_at(lo)?, chi_at(hi)?);
    if !(c_hi <= target && target <= c_lo) {
        return Err(Error::domain(format!(
            "chi = {target:e} unattainable for widths in [0.01, 1000] um (range [{c_hi:e}, {c_lo:e}])"
        )));
    }
    while (hi - lo) > 1e-10 * lo {
        let mid = (lo * hi).sqrt();
        if chi_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Sweep χ by changing σ(0) at fixed b.
    Chi,
    /// Sweep the log strength b (internal units).
    LogStrength,
}

/// `σ(t; b=0) − σ(t; b)` on a time × sweep-value grid (internal lengths).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceMap {
    pub axis: SweepAxis,
    pub times: Vec<f64>,
    pub sweep_values: Vec<f64>,
    /// `cells[i][j]` belongs to `times[i]` and `sweep_values[j]`.
    pub cells: Vec<Vec<f64>>,
}

/// Paired runs per sweep value; cells are independent and evaluated in
/// parallel, assembly order follows `values`.
pub fn difference_map(
    base: &Experiment,
    axis: SweepAxis,
    values: &[f64],
    times: &[f64],
) -> Result<DifferenceMap> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    if times.is_empty() || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(
            "time grid must be non-empty and strictly increasing",
        ));
    }
    let t0 = base.initial.time;
    if times[0] <= t0 {
        return Err(Error::config("time grid must start after the initial time"));
    }
    let t_end = *times.last().expect("non-empty");

    let columns: Vec<Vec<f64>> = values
        .par_iter()
        .map(|&v| -> Result<Vec<f64>> {
            let test = match axis {
                SweepAxis::Chi => {
                    let s0 = initial_width_for_chi(v, &base.params, &base.units)?;
                    base.with_initial(GaussianState::spherical(s0, 0.0)?.at_time(t0))
                }
                SweepAxis::LogStrength => base.with_log_strength(v),
            };
            let linear = test.with_log_strength(0.0);
            let a = linear.run_at(t_end, times)?.trajectory;
            let b = test.run_at(t_end, times)?.trajectory;
            times
                .iter()
                .map(|&t| {
                    let (sa, sb) = (a.sample_at(t), b.sample_at(t));
                    match (sa, sb) {
                        (Some(x), Some(y)) => Ok(x.widths[0] - y.widths[0]),
                        _ => Err(Error::domain(format!("no sample at t = {t:e}"))),
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let cells = (0..times.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    Ok(DifferenceMap {
        axis,
        times: times.to_vec(),
        sweep_values: values.to_vec(),
        cells,
    })
}

/// Scientific notation with nine significant digits.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.8e}")
}

impl DifferenceMap {
    /// CSV with a header of sweep values (χ, or b in eV), first column the
    /// time in seconds, cells in metres.
    pub fn write_csv<W: Write>(&self, units: &UnitSystem, out: &mut W) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("t_s".to_string())
            .chain(self.sweep_values.iter().map(|&v| match self.axis {
                SweepAxis::Chi => fmt_sci(v),
                SweepAxis::LogStrength => {
                    fmt_sci(units.from_internal(v, Dimension::Energy) / ELECTRON_VOLT)
                }
            }))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.cells) {
            let mut line = fmt_sci(units.from_internal(*t, Dimension::Time));
            for c in row {
                line.push(',');
                line.push_str(&fmt_sci(units.from_internal(*c, Dimension::Length)));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrapSchedule;
    use crate::units::{BOHR_RADIUS, HBAR, RB87_MASS};
    use crate::variational::IntegratorSettings;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(s: f64, v: f64) -> GaussianState {
        GaussianState::spherical(s, v).unwrap()
    }

    #[test]
    fn farfield_at_baseline() {
        let e = Experiment::baseline(0.0);
        let r = farfield_rate(&e.initial, &e.params).unwrap();
        // SI evaluation of σ̇∞² = ħ²/(4m²σ²) + ħ²Na/(6√π m²σ³).
        let (m, s) = (RB87_MASS, 2.5e-6);
        let hu2 = HBAR * HBAR / (4.0 * m * m * s * s);
        let gp2 = HBAR * HBAR * 5e4 * 90.0 * BOHR_RADIUS / (6.0 * PI.sqrt() * m * m * s * s * s);
        let total = e.units.from_internal(r.total(), Dimension::Velocity);
        assert_relative_eq!(total, (hu2 + gp2).sqrt(), max_relative = 1e-10);
        assert_relative_eq!(total, 8.869e-4, max_relative = 1e-3);
        assert_relative_eq!(
            r.interaction_sq / r.heisenberg_sq,
            35.83,
            max_relative = 1e-3
        );
        assert_eq!(r.residual_sq, 0.0);
    }

    #[test]
    fn farfield_single_term_limit() {
        let p = BECParams::new(0.0, 0.0, 0.0).unwrap();
        let r = farfield_rate(&state(4.0, 0.0), &p).unwrap();
        assert_eq!(r.total(), 1.0 / 8.0);
        assert!(farfield_rate(
            &GaussianState::new([1.0, 2.0, 1.0], [0.0; 3], 0.0).unwrap(),
            &p
        )
        .is_err());
    }

    #[test]
    fn simulated_rate_reaches_farfield_value() {
        let e = Experiment::baseline(0.0);
        let s0 = e.initial.widths[0];
        let t = 20.0 * s0 * s0;
        let traj = variational::integrate(
            &e.initial,
            &e.params,
            &TrapSchedule::free_flight(),
            t,
            &IntegratorSettings::default(),
        )
        .unwrap();
        let v_inf = farfield_rate(&e.initial, &e.params).unwrap().total();
        let v = traj.last().rates[0];
        assert!(v < v_inf);
        assert!((v / v_inf - 1.0).abs() < 0.01, "{v} vs {v_inf}");
        // Monotone approach from below.
        assert!(traj
            .samples
            .windows(2)
            .all(|w| w[1].rates[0] >= w[0].rates[0]));
    }

    #[test]
    fn zero_errors_give_zero() {
        let e = Experiment::baseline(0.0);
        let r = rate_error(&e.initial, &e.params, &RelativeErrors::default()).unwrap();
        assert_eq!(r.relative, 0.0);
        assert_eq!(r.absolute, 0.0);
        assert!(rate_error(
            &e.initial,
            &e.params,
            &RelativeErrors {
                atom_number: -0.1,
                ..Default::default()
            }
        )
        .unwrap_err()
        .is_config());
    }

    #[test]
    fn rate_error_hand_evaluation() {
        // σ̇_R² = 1, σ̇_HU² = 1/4σ² = 1/16 (σ=2), σ̇_GP² = g/(6√π·8).
        let p = BECParams::new(100.0, 0.1, 0.0).unwrap();
        let st = state(2.0, 1.0);
        let errs = RelativeErrors {
            atom_number: 0.1,
            scatter_length: 0.2,
            initial_width: 0.3,
            initial_rate: 0.4,
        };
        let r2: f64 = 1.0;
        let hu2 = 1.0 / 16.0;
        let gp2 = 10.0 / (6.0 * PI.sqrt() * 8.0);
        let num =
            (r2 * r2 * 0.16 + (1.5 * gp2 + hu2).powi(2) * 0.09 + 0.25 * gp2 * gp2 * (0.04 + 0.01))
                .sqrt();
        let rel = num / (r2 + hu2 + gp2);
        let out = rate_error(&st, &p, &errs).unwrap();
        assert_relative_eq!(out.relative, rel, max_relative = 1e-14);
        assert_relative_eq!(
            out.absolute,
            rel * (r2 + hu2 + gp2).sqrt(),
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn rate_error_symmetric_in_n_and_a(
            da in 0.0f64..0.5, dn in 0.0f64..0.5, ds in 0.0f64..0.5, dv in 0.0f64..0.5,
            s in 0.5f64..30.0, v in 0.0f64..1.0,
        ) {
            let e = Experiment::baseline(0.0);
            let st = state(s, v);
            let x = rate_error(&st, &e.params, &RelativeErrors {
                atom_number: dn, scatter_length: da, initial_width: ds, initial_rate: dv,
            }).unwrap();
            let y = rate_error(&st, &e.params, &RelativeErrors {
                atom_number: da, scatter_length: dn, initial_width: ds, initial_rate: dv,
            }).unwrap();
            prop_assert_eq!(x.relative.to_bits(), y.relative.to_bits());
            prop_assert_eq!(x.absolute.to_bits(), y.absolute.to_bits());
        }

        #[test]
        fn rate_error_is_linear_in_errors(k in 0.1f64..10.0, e0 in 0.001f64..0.1) {
            let e = Experiment::baseline(0.0);
            let a = rate_error(&e.initial, &e.params, &RelativeErrors::uniform(e0)).unwrap();
            let b = rate_error(&e.initial, &e.params, &RelativeErrors::uniform(k * e0)).unwrap();
            prop_assert!((b.absolute / (k * a.absolute) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn magnetic_threshold_values() {
        let e = Experiment::baseline(3.3e-15);
        let w = magnetic_threshold(&e.params).unwrap();
        let w_si = e.units.from_internal(w, Dimension::Frequency);
        assert_relative_eq!(w_si, 3.3e-15 * ELECTRON_VOLT / HBAR, max_relative = 1e-12);
        assert_relative_eq!(w_si, 5.0136, max_relative = 1e-4);

        let one_hz = e.units.to_internal(HBAR * 1.0, Dimension::Energy);
        let w1 = magnetic_threshold(&e.params.with_log_strength(one_hz)).unwrap();
        assert_relative_eq!(
            e.units.from_internal(w1, Dimension::Frequency),
            1.0,
            max_relative = 1e-14
        );

        let half =
            magnetic_threshold(&e.params.with_log_strength(e.params.log_strength / 2.0)).unwrap();
        assert_eq!(half, w / 2.0);
        assert!(magnetic_threshold(&e.params.with_log_strength(0.0)).is_err());
    }

    #[test]
    fn chi_inversion_round_trip() {
        let e = Experiment::baseline(3.3e-15);
        for chi in [1e-1, 1.0, 10.0, 1e3] {
            let s = initial_width_for_chi(chi, &e.params, &e.units).unwrap();
            let back = variational::chi(&state(s, 0.0), &e.params).unwrap();
            assert_relative_eq!(back, chi, max_relative = 1e-9);
        }
        assert!(initial_width_for_chi(1e30, &e.params, &e.units).is_err());
        assert!(initial_width_for_chi(1e-30, &e.params, &e.units).is_err());
        assert!(initial_width_for_chi(1.0, &e.params.with_log_strength(0.0), &e.units).is_err());
    }

    #[test]
    fn zero_b_map_is_identically_zero() {
        let e = Experiment::baseline(0.0);
        let times: Vec<f64> = (1..=5).map(|k| e.internal_time(0.02 * k as f64)).collect();
        let map = difference_map(
            &e,
            SweepAxis::LogStrength,
            &[0.0, e.params.log_strength],
            &times,
        )
        .unwrap();
        for row in &map.cells {
            assert_eq!(row[0], 0.0);
        }
    }

    #[test]
    fn map_shape_and_sign() {
        let e = Experiment::baseline(3.3e-15);
        let times: Vec<f64> = (1..=4).map(|k| e.internal_time(0.05 * k as f64)).collect();
        let bs = [1e-16, 1e-15, 3.3e-15]
            .map(|b| e.units.to_internal(b * ELECTRON_VOLT, Dimension::Energy));
        let map = difference_map(&e, SweepAxis::LogStrength, &bs, &times).unwrap();
        assert_eq!(map.cells.len(), 4);
        assert!(map.cells.iter().all(|r| r.len() == 3));
        for row in &map.cells {
            assert!(row.iter().all(|&c| c >= 0.0 && c.is_finite()));
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
        let chi_map = difference_map(&e, SweepAxis::Chi, &[1e3, 1.0, 1e-1], &times).unwrap();
        assert!(chi_map
            .cells
            .iter()
            .flatten()
            .all(|&c| c >= -1e-9 && c.is_finite()));
        assert!(difference_map(&e, SweepAxis::Chi, &[1e40], &times).is_err());
        assert!(difference_map(&e, SweepAxis::Chi, &[], &times).is_err());
    }

    #[test]
    fn csv_layout() {
        let u = UnitSystem::rubidium87();
        let map = DifferenceMap {
            axis: SweepAxis::Chi,
            times: vec![u.to_internal(0.5, Dimension::Time)],
            sweep_values: vec![0.1, 1000.0],
            cells: vec![vec![2.0, 20.0]],
        };
        let mut buf = Vec::new();
        map.write_csv(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t_s,1.00000000e-1,1.00000000e3\n5.00000000e-1,2.00000000e-6,2.00000000e-5\n"
        );
    }
}
