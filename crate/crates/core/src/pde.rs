//! Split-step solver for the spherically symmetric logarithmic
//! Gross-Pitaevskii equation.
//!
//! The field is stored as `u(r) = r·Ψ(r)` on the interior points
//! `r_j = j·h`, `j = 1..n−1`, with `u(0) = u(R) = 0`. The kinetic operator
//! `−½ ∂²/∂r²` is diagonal in the sine basis, applied through a length-2n
//! FFT of the odd extension. The wavefunction is normalized to one
//! particle; the contact term carries the factor N.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BECParams, TrapSchedule};

/// Density cutoff for the log term, relative to the initial peak density.
pub const DENSITY_FLOOR_RATIO: f64 = 1e-12;
/// Norm drift that aborts a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-4;
/// Largest allowed `dt·max|V|`.
pub const PHASE_LIMIT: f64 = 0.1;
/// Phase per step targeted by [`default_time_step`].
pub const DEFAULT_PHASE_FACTOR: f64 = 0.05;
pub const DEFAULT_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::config("grid radius must be positive"));
        }
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "grid point count must be a power of two >= 256, got {n}"
            )));
        }
        Ok(RadialGrid { r_max, n })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / self.n as f64
    }

    /// Radius of stored sample `i` (interior index, `r = (i+1)·h`).
    pub fn radius(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing()
    }

    fn interior(&self) -> usize {
        self.n - 1
    }

    pub fn check_resolves(&self, width: f64) -> Result<()> {
        if self.spacing() > width / 8.0 {
            return Err(Error::config(format!(
                "grid spacing {:e} does not resolve width {width:e} (need h <= sigma/8)",
                self.spacing()
            )));
        }
        if self.r_max < 8.0 * width {
            return Err(Error::config(format!(
                "grid radius {:e} too small for width {width:e} (need R >= 8 sigma)",
                self.r_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: RadialGrid,
    /// `r·Ψ` at the interior points.
    pub u: Vec<Complex64>,
    pub time: f64,
}

impl RadialField {
    /// `4π ∫ |Ψ|² r² dr`.
    pub fn norm(&self) -> f64 {
        4.0 * PI * self.grid.spacing() * self.u.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `|Ψ|²` at interior index `i`.
    pub fn density(&self, i: usize) -> f64 {
        let r = self.grid.radius(i);
        self.u[i].norm_sqr() / (r * r)
    }

    pub fn peak_density(&self) -> f64 {
        (0..self.u.len())
            .map(|i| self.density(i))
            .fold(0.0, f64::max)
    }

    /// RMS width per axis, `√(⟨r²⟩/3)`, with ⟨r²⟩ taken relative to the
    /// current norm.
    pub fn width(&self) -> f64 {
        let h = self.grid.spacing();
        let (mut m0, mut m2) = (0.0, 0.0);
        for (i, z) in self.u.iter().enumerate() {
            let w = z.norm_sqr();
            let r = (i + 1) as f64 * h;
            m0 += w;
            m2 += w * r * r;
        }
        (m2 / (3.0 * m0)).sqrt()
    }

    /// Rate of the RMS width from the probability current:
    /// `d⟨r²⟩/dt = 8π ∫ r·Im(ū u′) dr` with ħ = m = 1.
    pub fn width_rate(&self) -> f64 {
        let h = self.grid.spacing();
        let zero = Complex64::new(0.0, 0.0);
        let n = self.u.len();
        let mut flux = 0.0;
        for i in 0..n {
            let prev = if i == 0 { zero } else { self.u[i - 1] };
            let next = if i + 1 == n { zero } else { self.u[i + 1] };
            let du = (next - prev) / (2.0 * h);
            flux += self.grid.radius(i) * (self.u[i].conj() * du).im;
        }
        let d_r2 = 8.0 * PI * h * flux / self.norm();
        d_r2 / (6.0 * self.width())
    }

    /// Plain-text dump: `# key = value` header lines, then `r re im` per
    /// grid point including both boundary zeros.
    pub fn write_snapshot<W: Write>(
        &self,
        header: &[(&str, String)],
        out: &mut W,
    ) -> io::Result<()> {
        writeln!(out, "# t = {:.8e}", self.time)?;
        writeln!(out, "# r_max = {:.8e}", self.grid.r_max())?;
        writeln!(out, "# points = {}", self.grid.points())?;
        for (k, v) in header {
            writeln!(out, "# {k} = {v}")?;
        }
        writeln!(out, "{:.8e} {:.8e} {:.8e}", 0.0, 0.0, 0.0)?;
        for (i, z) in self.u.iter().enumerate() {
            writeln!(out, "{:.8e} {:.8e} {:.8e}", self.grid.radius(i), z.re, z.im)?;
        }
        writeln!(out, "{:.8e} {:.8e} {:.8e}", self.grid.r_max(), 0.0, 0.0)
    }
}

/// Gaussian with density ∝ exp(−r²/2σ₀²), normalized to one, carrying the
/// quadratic phase of an expansion rate σ̇₀.
pub fn init_gaussian(grid: RadialGrid, width: f64, rate: f64) -> Result<RadialField> {
    if !(width > 0.0 && width.is_finite()) || !rate.is_finite() {
        return Err(Error::config(
            "initial width must be positive and rate finite",
        ));
    }
    grid.check_resolves(width)?;
    // Velocity field (σ̇/σ)·r, i.e. phase σ̇ r²/(2σ) with ħ = m = 1.
    let chirp = rate / (2.0 * width);
    let mut u: Vec<Complex64> = (0..grid.interior())
        .map(|i| {
            let r = grid.radius(i);
            let amp = r * (-r * r / (4.0 * width * width)).exp();
            Complex64::from_polar(amp, chirp * r * r)
        })
        .collect();
    let norm = 4.0 * PI * grid.spacing() * u.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let scale = 1.0 / norm.sqrt();
    for z in &mut u {
        *z *= scale;
    }
    Ok(RadialField { grid, u, time: 0.0 })
}

pub fn width(field: &RadialField) -> f64 {
    field.width()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeSample {
    pub time: f64,
    pub width: f64,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct PdeRun {
    pub samples: Vec<PdeSample>,
    pub field: RadialField,
    pub steps: usize,
}

impl PdeRun {
    pub fn sample_at(&self, t: f64) -> Option<&PdeSample> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.samples.iter().find(|s| (s.time - t).abs() <= tol)
    }
}

fn isotropic_omega(schedule: &TrapSchedule) -> Result<()> {
    for s in schedule.segments() {
        if s.omega[0] != s.omega[1] || s.omega[1] != s.omega[2] {
            return Err(Error::config(
                "radial solver needs isotropic trap frequencies",
            ));
        }
    }
    Ok(())
}

/// Effective potential at one point.
#[inline]
fn potential(r: f64, rho: f64, omega: f64, gn: f64, b: f64, floor: f64) -> f64 {
    0.5 * omega * omega * r * r + gn * rho - b * rho.max(floor).ln()
}

/// Largest `|V_eff|` over the occupied part of the grid (density above the
/// log floor) for every trap setting the run will see.
pub fn max_potential(field: &RadialField, params: &BECParams, schedule: &TrapSchedule) -> f64 {
    let floor = DENSITY_FLOOR_RATIO * field.peak_density();
    let gn = params.atom_number * params.contact_coupling();
    let b = params.log_strength;
    let omegas: Vec<f64> = std::iter::once(0.0)
        .chain(schedule.segments().iter().map(|s| s.omega[0]))
        .collect();
    let mut vmax: f64 = 0.0;
    for i in 0..field.u.len() {
        let rho = field.density(i);
        let r = field.grid.radius(i);
        for &w in &omegas {
            let w = if rho >= floor { w } else { 0.0 };
            vmax = vmax.max(potential(r, rho, w, gn, b, floor).abs());
        }
    }
    vmax
}

/// Step with `dt·max|V| = 0.05`.
pub fn default_time_step(field: &RadialField, params: &BECParams, schedule: &TrapSchedule) -> f64 {
    DEFAULT_PHASE_FACTOR / max_potential(field, params, schedule).max(1e-300)
}

/// Rough upper estimate of the width at `t`: the b = 0 far-field expansion,
/// capped by the log-confinement bound σ·exp(χ) when b > 0. Traps are
/// ignored. Used to size the grid before a run.
pub fn expected_width(width: f64, rate: f64, params: &BECParams, t: f64) -> f64 {
    let gp =
        (params.atom_number * params.scatter_length / (6.0 * PI.sqrt() * width.powi(3))).max(0.0);
    let v2 = rate * rate + 0.25 / (width * width) + gp;
    let free = (width * width + 2.0 * width * rate.max(0.0) * t + v2 * t * t).sqrt();
    if params.log_strength > 0.0 {
        if let Ok(chi) = crate::variational::chi_from_parts(width, rate, params) {
            return free.min(width * chi.max(0.0).exp());
        }
    }
    free
}

/// Owns the FFT plans and scratch buffers for one grid. Not shared between
/// concurrent runs.
pub struct SplitStepSolver {
    grid: RadialGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    kinetic_dt: f64,
    floor_ratio: f64,
}

impl SplitStepSolver {
    pub fn new(grid: RadialGrid) -> Self {
        let len = 2 * grid.points();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        SplitStepSolver {
            grid,
            forward,
            inverse,
            buffer: vec![Complex64::new(0.0, 0.0); len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            kinetic: Vec::new(),
            kinetic_dt: f64::NAN,
            floor_ratio: DENSITY_FLOOR_RATIO,
        }
    }

    /// Override the log-term density cutoff (relative to the initial peak).
    pub fn with_density_floor_ratio(mut self, ratio: f64) -> Self {
        self.floor_ratio = ratio;
        self
    }

    fn prepare_kinetic(&mut self, dt: f64) {
        if self.kinetic_dt == dt {
            return;
        }
        let n = self.grid.points();
        let len = 2 * n;
        let dk = PI / self.grid.r_max();
        // Includes the 1/(2n) normalization of the inverse FFT.
        let scale = 1.0 / len as f64;
        self.kinetic = (0..len)
            .map(|k| {
                let m = k.min(len - k) as f64;
                let kappa = m * dk;
                Complex64::from_polar(scale, -0.5 * kappa * kappa * dt)
            })
            .collect();
        self.kinetic_dt = dt;
    }

    /// Exact free propagation of `u` over `dt` in the sine basis.
    fn kinetic_step(&mut self, u: &mut [Complex64], dt: f64) {
        self.prepare_kinetic(dt);
        let n = self.grid.points();
        let zero = Complex64::new(0.0, 0.0);
        self.buffer[0] = zero;
        self.buffer[n] = zero;
        for (i, &z) in u.iter().enumerate() {
            let j = i + 1;
            self.buffer[j] = z;
            self.buffer[2 * n - j] = -z;
        }
        self.forward
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (x, k) in self.buffer.iter_mut().zip(&self.kinetic) {
            *x *= k;
        }
        self.inverse
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (i, z) in u.iter_mut().enumerate() {
            *z = self.buffer[i + 1];
        }
    }

    fn potential_step(
        &self,
        u: &mut [Complex64],
        tau: f64,
        omega: f64,
        gn: f64,
        b: f64,
        floor: f64,
    ) {
        let h = self.grid.spacing();
        for (i, z) in u.iter_mut().enumerate() {
            let r = (i + 1) as f64 * h;
            let rho = z.norm_sqr() / (r * r);
            let v = potential(r, rho, omega, gn, b, floor);
            *z *= Complex64::from_polar(1.0, -v * tau);
        }
    }

    /// Strang-split evolution to `t_end` with steps no longer than `dt`.
    /// Time is cut at schedule boundaries and at `sample_times`; each piece
    /// is covered by equal steps. Norm is never renormalized.
    pub fn evolve(
        &mut self,
        field: &RadialField,
        params: &BECParams,
        schedule: &TrapSchedule,
        t_end: f64,
        dt: f64,
        sample_times: &[f64],
    ) -> Result<PdeRun> {
        if field.grid != self.grid {
            return Err(Error::config("field grid does not match solver grid"));
        }
        isotropic_omega(schedule)?;
        let t0 = field.time;
        if !(t_end > t0) {
            return Err(Error::config("end time must be after the field time"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config("time step must be positive"));
        }
        let vmax = max_potential(field, params, schedule);
        if dt * vmax >= PHASE_LIMIT {
            return Err(Error::config(format!(
                "time step {dt:e} too large: dt*max|V| = {:.3e} >= {PHASE_LIMIT}",
                dt * vmax
            )));
        }
        let w0 = field.width();
        let expected = expected_width(w0, field.width_rate(), params, t_end - t0).max(w0);
        if self.grid.r_max() < 6.0 * expected {
            return Err(Error::config(format!(
                "grid radius {:e} below 6x expected final width {expected:e}",
                self.grid.r_max()
            )));
        }

        let floor = self.floor_ratio * field.peak_density();
        let gn = params.atom_number * params.contact_coupling();
        let b = params.log_strength;
        let norm0 = field.norm();

        let mut targets: Vec<f64> = sample_times
            .iter()
            .copied()
            .filter(|&t| t > t0 && t < t_end)
            .chain(schedule.boundaries_within(t0, t_end))
            .chain(std::iter::once(t_end))
            .collect();
        targets.sort_by(f64::total_cmp);
        targets.dedup();

        let mut u = field.u.clone();
        let mut t = t0;
        let mut steps = 0usize;
        let mut samples = vec![PdeSample {
            time: t0,
            width: w0,
            norm: norm0,
        }];

        for &target in &targets {
            let span = target - t;
            let count = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            let h = span / count as f64;
            let omega = schedule.omega_between(t, target)[0];
            for _ in 0..count {
                self.potential_step(&mut u, 0.5 * h, omega, gn, b, floor);
                self.kinetic_step(&mut u, h);
                self.potential_step(&mut u, 0.5 * h, omega, gn, b, floor);
            }
            steps += count;
            t = target;
            let snapshot = RadialField {
                grid: self.grid,
                u: u.clone(),
                time: t,
            };
            let norm = snapshot.norm();
            let drift = (norm - norm0).abs();
            if drift > NORM_DRIFT_LIMIT || !norm.is_finite() {
                return Err(Error::NormDrift {
                    time: t,
                    drift,
                    limit: NORM_DRIFT_LIMIT,
                });
            }
            samples.push(PdeSample {
                time: t,
                width: snapshot.width(),
                norm,
            });
        }

        Ok(PdeRun {
            samples,
            field: RadialField {
                grid: self.grid,
                u,
                time: t,
            },
            steps,
        })
    }
}

/// Convenience wrapper that builds a solver for the field's grid.
pub fn evolve(
    field: &RadialField,
    params: &BECParams,
    schedule: &TrapSchedule,
    t_end: f64,
    dt: f64,
    sample_times: &[f64],
) -> Result<PdeRun> {
    SplitStepSolver::new(field.grid).evolve(field, params, schedule, t_end, dt, sample_times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrapSegment;
    use approx::assert_relative_eq;

    fn grid() -> RadialGrid {
        RadialGrid::new(40.0, 1024).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(RadialGrid::new(10.0, 100).unwrap_err().is_config());
        assert!(RadialGrid::new(10.0, 128).is_err());
        assert!(RadialGrid::new(-1.0, 256).is_err());
        let g = RadialGrid::new(10.0, 256).unwrap();
        assert_eq!(g.spacing(), 10.0 / 256.0);
        assert!(g.check_resolves(0.1).is_err());
        assert!(g.check_resolves(2.0).is_err());
        assert!(g.check_resolves(1.0).is_ok());
    }

    #[test]
    fn gaussian_initialization() {
        let f = init_gaussian(grid(), 2.0, 0.0).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        assert_relative_eq!(f.width(), 2.0, max_relative = 1e-4);
        assert!(f.u.iter().all(|z| z.im == 0.0));
        // Analytic peak density (2πσ²)^(-3/2); the grid misses r = 0.
        let rho0 = (2.0 * PI * 4.0f64).powf(-1.5);
        assert_relative_eq!(f.density(0), rho0, max_relative = 1e-3);
    }

    #[test]
    fn init_rejects_coarse_grid() {
        assert!(init_gaussian(grid(), 0.1, 0.0).unwrap_err().is_config());
        assert!(init_gaussian(grid(), 6.0, 0.0).unwrap_err().is_config());
    }

    #[test]
    fn shell_width() {
        let g = grid();
        let mut u = vec![Complex64::new(0.0, 0.0); 1023];
        u[499] = Complex64::new(0.3, 0.4);
        let f = RadialField {
            grid: g,
            u,
            time: 0.0,
        };
        let r = g.radius(499);
        assert_relative_eq!(f.width(), r / 3f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn kinetic_step_is_unitary_and_exact_on_modes() {
        let g = RadialGrid::new(10.0, 256).unwrap();
        let mut solver = SplitStepSolver::new(g);
        let k = 7usize;
        let kappa = PI * k as f64 / 10.0;
        let mut u: Vec<Complex64> = (0..255)
            .map(|i| Complex64::new((kappa * g.radius(i)).sin(), 0.0))
            .collect();
        let before: Vec<Complex64> = u.clone();
        solver.kinetic_step(&mut u, 0.3);
        let phase = Complex64::from_polar(1.0, -0.5 * kappa * kappa * 0.3);
        for (a, b) in u.iter().zip(&before) {
            assert!((a - b * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn free_gaussian_follows_closed_form() {
        let p = BECParams::new(0.0, 0.0, 0.0).unwrap();
        let g = RadialGrid::new(80.0, 2048).unwrap();
        let f = init_gaussian(g, 2.0, 0.0).unwrap();
        let times: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
        let run = evolve(&f, &p, &TrapSchedule::free_flight(), 20.0, 0.05, &times).unwrap();
        for s in &run.samples {
            let exact = (4.0 + s.time * s.time / 16.0).sqrt();
            assert_relative_eq!(s.width, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn width_rate_from_current() {
        let f = init_gaussian(grid(), 2.0, 0.3).unwrap();
        // Central differences, O(h²).
        assert_relative_eq!(f.width_rate(), 0.3, max_relative = 1e-3);
        let f = init_gaussian(grid(), 2.0, 0.0).unwrap();
        assert_eq!(f.width_rate(), 0.0);
    }

    #[test]
    fn expanding_phase_expands() {
        let p = BECParams::new(0.0, 0.0, 0.0).unwrap();
        let f = init_gaussian(grid(), 2.0, 0.1).unwrap();
        let run = evolve(&f, &p, &TrapSchedule::free_flight(), 10.0, 0.05, &[5.0]).unwrap();
        let exact = |t: f64| (4.0 + 2.0 * 2.0 * 0.1 * t + (0.01 + 1.0 / 16.0) * t * t).sqrt();
        for s in &run.samples {
            assert_relative_eq!(s.width, exact(s.time), max_relative = 1e-6);
        }
    }

    #[test]
    fn gausson_is_stationary() {
        let p = BECParams::new(0.0, 0.0, 0.25).unwrap();
        let g = RadialGrid::new(16.0, 1024).unwrap();
        let f = init_gaussian(g, 1.0, 0.0).unwrap();
        let times: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let run = evolve(&f, &p, &TrapSchedule::free_flight(), 20.0, 0.01, &times).unwrap();
        for s in &run.samples {
            assert!((s.width - 1.0).abs() < 1e-4, "{s:?}");
        }
    }

    #[test]
    fn harmonic_trap_ground_state() {
        // Linear oscillator ground state: σ² = 1/(2ω).
        let p = BECParams::new(0.0, 0.0, 0.0).unwrap();
        let g = RadialGrid::new(32.0, 2048).unwrap();
        let omega = 0.5;
        let f = init_gaussian(g, 1.0, 0.0).unwrap();
        let sched = TrapSchedule::new(vec![TrapSegment::isotropic(0.0, 10.0, omega)]).unwrap();
        let run = evolve(&f, &p, &sched, 10.0, 0.01, &[]).unwrap();
        assert!((run.field.width() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_large_step_and_small_grid() {
        let p = BECParams::new(5e4, 4.76e-3, 0.0).unwrap();
        let f = init_gaussian(grid(), 2.5, 0.0).unwrap();
        assert!(evolve(&f, &p, &TrapSchedule::free_flight(), 1.0, 0.1, &[])
            .unwrap_err()
            .is_config());
        let dt = default_time_step(&f, &p, &TrapSchedule::free_flight());
        assert!(evolve(&f, &p, &TrapSchedule::free_flight(), 100.0, dt, &[])
            .unwrap_err()
            .is_config());
        let aniso = TrapSchedule::new(vec![TrapSegment {
            start: 0.0,
            end: 1.0,
            omega: [1.0, 2.0, 1.0],
        }])
        .unwrap();
        assert!(evolve(&f, &p, &aniso, 1.0, dt, &[])
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn snapshot_format() {
        let f = init_gaussian(RadialGrid::new(4.0, 256).unwrap(), 0.5, 0.0).unwrap();
        let mut buf = Vec::new();
        f.write_snapshot(&[("b", "0".into())], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 257);
        assert!(text.contains("# b = 0"));
        assert_eq!(data[0], "0.00000000e0 0.00000000e0 0.00000000e0");
        assert_eq!(data[256].split(' ').count(), 3);
    }
}
