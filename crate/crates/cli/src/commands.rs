use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use logbec::analysis::{self, fmt_sci, RelativeErrors, SweepAxis};
use logbec::pde::{self, PdeRun, RadialGrid, SplitStepSolver};
use logbec::units::{Dimension, UnitSystem, ELECTRON_VOLT, MICROMETER};
use logbec::variational;
use logbec::{ExperimentRun, GaussianState, TrapSegment, WidthTrajectory};

use crate::config::{self, ExperimentConfig, Resolved, SolverKind};
use crate::CliError;

/// Largest automatically chosen radial grid.
const MAX_AUTO_POINTS: usize = 1 << 20;

#[derive(Debug, Clone)]
pub struct Context {
    pub out_dir: PathBuf,
    /// Relative tolerance for `validate`.
    pub tolerance: f64,
}

impl Context {
    fn create(&self, name: &str) -> Result<(PathBuf, fs::File), CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        let file = fs::File::create(&path)?;
        Ok((path, file))
    }
}

fn header(command: &str, cfg: &ExperimentConfig, r: &Resolved, extra: &[(&str, String)]) -> String {
    let u = &r.experiment.units;
    let e = &r.experiment;
    let mut h = String::new();
    let json = serde_json::to_string(cfg).expect("config serializes");
    let _ = writeln!(h, "# logbec {command} {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# config: {json}");
    let _ = writeln!(
        h,
        "# units: length_m={} time_s={} energy_J={} velocity_m_per_s={} frequency_rad_per_s={}",
        fmt_sci(u.scale(Dimension::Length)),
        fmt_sci(u.scale(Dimension::Time)),
        fmt_sci(u.scale(Dimension::Energy)),
        fmt_sci(u.scale(Dimension::Velocity)),
        fmt_sci(u.scale(Dimension::Frequency)),
    );
    let w = e.initial.widths.map(fmt_sci).join(";");
    let v = e.initial.rates.map(fmt_sci).join(";");
    let _ = writeln!(
        h,
        "# internal: atom_number={} scatter_length={} log_strength={} initial_width={w} initial_rate={v} t_end={} sample_interval={}",
        fmt_sci(e.params.atom_number),
        fmt_sci(e.params.scatter_length),
        fmt_sci(e.params.log_strength),
        fmt_sci(r.t_end),
        fmt_sci(e.settings.sample_interval),
    );
    for (k, v) in extra {
        let _ = writeln!(h, "# {k}: {v}");
    }
    h
}

fn si(units: &UnitSystem, v: f64, dim: Dimension) -> String {
    fmt_sci(units.from_internal(v, dim))
}

fn write_trajectory(
    out: &mut impl Write,
    head: &str,
    traj: &WidthTrajectory,
    units: &UnitSystem,
) -> std::io::Result<()> {
    out.write_all(head.as_bytes())?;
    let spherical = traj.is_spherical();
    if spherical {
        writeln!(out, "t_s,sigma_m,sigma_dot_m_per_s,energy_J")?;
    } else {
        writeln!(
            out,
            "t_s,sigma_x_m,sigma_y_m,sigma_z_m,sigma_dot_x_m_per_s,sigma_dot_y_m_per_s,sigma_dot_z_m_per_s,energy_J"
        )?;
    }
    let axes = if spherical { 1 } else { 3 };
    for s in &traj.samples {
        let mut line = si(units, s.time, Dimension::Time);
        for i in 0..axes {
            line.push(',');
            line.push_str(&si(units, s.widths[i], Dimension::Length));
        }
        for i in 0..axes {
            line.push(',');
            line.push_str(&si(units, s.rates[i], Dimension::Velocity));
        }
        line.push(',');
        line.push_str(&si(units, s.energy, Dimension::Energy));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn write_pde(
    out: &mut impl Write,
    head: &str,
    run: &PdeRun,
    units: &UnitSystem,
) -> std::io::Result<()> {
    out.write_all(head.as_bytes())?;
    writeln!(out, "t_s,sigma_m,norm")?;
    for s in &run.samples {
        writeln!(
            out,
            "{},{},{}",
            si(units, s.time, Dimension::Time),
            si(units, s.width, Dimension::Length),
            fmt_sci(s.norm)
        )?;
    }
    Ok(())
}

fn um(units: &UnitSystem, v: f64) -> f64 {
    units.from_internal(v, Dimension::Length) / MICROMETER
}

fn um_per_s(units: &UnitSystem, v: f64) -> f64 {
    units.from_internal(v, Dimension::Velocity) / MICROMETER
}

/// Grid, step and schedule actually used for a radial run.
struct PdeSetup {
    solver: SplitStepSolver,
    field: pde::RadialField,
    schedule: logbec::TrapSchedule,
    dt: f64,
    notes: Vec<(&'static str, String)>,
}

fn pde_setup(r: &Resolved, run: &ExperimentRun) -> Result<PdeSetup, CliError> {
    let e = &r.experiment;
    let (s0, v0) = e.initial.spherical_parts().map_err(|_| {
        CliError::Config("the radial solver needs a spherical initial state".into())
    })?;
    let mut schedule = e.schedule.clone();
    if let (Some(k), Some(outcome)) = (&e.kick, &run.kick) {
        schedule = schedule.with_segment(TrapSegment::isotropic(
            k.kick_time,
            k.kick_time + k.duration,
            outcome.omega,
        ))?;
    }
    let r_max = match &r.pde.r_max {
        Some(q) => q.internal(&e.units),
        None => 8.0 * pde::expected_width(s0, v0, &e.params, r.t_end - e.initial.time).max(s0),
    };
    let points = match r.pde.points {
        Some(n) => n,
        None => {
            let needed = (8.0 * r_max / s0).ceil() as usize;
            let n = needed.next_power_of_two().max(pde::DEFAULT_POINTS);
            if n > MAX_AUTO_POINTS {
                return Err(CliError::Config(format!(
                    "radial grid would need {n} points; set `pde.points` and `pde.r_max` explicitly"
                )));
            }
            n
        }
    };
    let grid = RadialGrid::new(r_max, points)?;
    grid.check_resolves(s0)?;
    let field = pde::init_gaussian(grid, s0, v0)?;
    let mut solver = SplitStepSolver::new(grid);
    if let Some(ratio) = r.pde.density_floor_ratio {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(CliError::Config(
                "field `pde.density_floor_ratio`: must lie in (0, 1)".into(),
            ));
        }
        solver = solver.with_density_floor_ratio(ratio);
    }
    let dt = match &r.pde.time_step {
        Some(q) => q.internal(&e.units),
        None => pde::default_time_step(&field, &e.params, &schedule),
    };
    let notes = vec![(
        "pde",
        format!(
            "points={points} r_max_m={} time_step_s={}",
            si(&e.units, r_max, Dimension::Length),
            si(&e.units, dt, Dimension::Time)
        ),
    )];
    Ok(PdeSetup {
        solver,
        field,
        schedule,
        dt,
        notes,
    })
}

fn run_pde(r: &Resolved, setup: &mut PdeSetup) -> Result<PdeRun, CliError> {
    let e = &r.experiment;
    let times = e.sample_times(r.t_end);
    Ok(setup.solver.evolve(
        &setup.field,
        &e.params,
        &setup.schedule,
        r.t_end,
        setup.dt,
        &times,
    )?)
}

fn kick_notes(r: &Resolved, run: &ExperimentRun) -> Vec<(&'static str, String)> {
    match &run.kick {
        Some(k) => vec![(
            "kick",
            format!(
                "omega_rad_per_s={}",
                si(&r.experiment.units, k.omega, Dimension::Frequency)
            ),
        )],
        None => Vec::new(),
    }
}

pub fn simulate(config_path: &Path, ctx: &Context) -> Result<String, CliError> {
    let cfg = config::load(config_path)?;
    let r = cfg.resolve()?;
    let e = &r.experiment;
    let u = &e.units;
    let mut report = String::new();
    if let Some(w) = e.kick.as_ref().and_then(|k| k.warning()) {
        let _ = writeln!(report, "warning: {w}");
    }

    let run = e.run(r.t_end)?;
    let mut notes = kick_notes(&r, &run);
    let traj = &run.trajectory;

    if r.solver != SolverKind::Pde {
        let head = header("simulate", &cfg, &r, &notes);
        let (path, mut f) = ctx.create("trajectory.csv")?;
        write_trajectory(&mut f, &head, traj, u)?;
        let _ = writeln!(report, "wrote {}", path.display());
    }
    let pde_run = if r.solver != SolverKind::Variational {
        let mut setup = pde_setup(&r, &run)?;
        let pde_run = run_pde(&r, &mut setup)?;
        notes.extend(setup.notes);
        let head = header("simulate", &cfg, &r, &notes);
        let (path, mut f) = ctx.create("trajectory_pde.csv")?;
        write_pde(&mut f, &head, &pde_run, u)?;
        let _ = writeln!(report, "wrote {}", path.display());
        Some(pde_run)
    } else {
        None
    };

    let _ = writeln!(report, "t_end_s: {}", si(u, r.t_end, Dimension::Time));
    match variational::chi(&e.initial, &e.params) {
        Ok(chi) => {
            let smax = variational::sigma_max(&e.initial, &e.params)?;
            let seq = variational::gausson_width(&e.params)?;
            let _ = writeln!(report, "chi: {}", fmt_sci(chi));
            let _ = writeln!(report, "sigma_max_m: {}", si(u, smax, Dimension::Length));
            let _ = writeln!(report, "sigma_eq_m: {}", si(u, seq, Dimension::Length));
        }
        Err(err) => {
            let _ = writeln!(report, "chi: n/a ({err})");
        }
    }
    if let Some(k) = &run.kick {
        let _ = writeln!(
            report,
            "kick_omega_rad_per_s: {}",
            si(u, k.omega, Dimension::Frequency)
        );
        let _ = writeln!(
            report,
            "post_kick_rate_m_per_s: {}",
            si(u, k.after.rates[0], Dimension::Velocity)
        );
    }
    let last = traj.last();
    let spherical = traj.is_spherical();
    let axes: &[usize] = if spherical { &[0] } else { &[0, 1, 2] };
    let label = |i: usize| {
        if spherical {
            String::new()
        } else {
            format!("_{}", ["x", "y", "z"][i])
        }
    };
    for &i in axes {
        let _ = writeln!(
            report,
            "final_width{}_m: {}",
            label(i),
            si(u, last.widths[i], Dimension::Length)
        );
    }
    if let Some(p) = &pde_run {
        let w = p.samples.last().expect("non-empty").width;
        let _ = writeln!(report, "final_width_pde_m: {}", si(u, w, Dimension::Length));
    }
    if r.compare_linear {
        let linear = e.with_log_strength(0.0).run(r.t_end)?.trajectory;
        for &i in axes {
            let d = linear.last().widths[i] - last.widths[i];
            let _ = writeln!(
                report,
                "difference_vs_b0{}_m: {} ({:.3} um)",
                label(i),
                si(u, d, Dimension::Length),
                um(u, d)
            );
        }
    }
    fs::create_dir_all(&ctx.out_dir)?;
    fs::write(ctx.out_dir.join("summary.txt"), &report)?;
    Ok(report)
}

pub fn sweep(
    config_path: &Path,
    axis: SweepAxis,
    values: &[f64],
    t_end_s: f64,
    ctx: &Context,
) -> Result<String, CliError> {
    let mut cfg = config::load(config_path)?;
    if !(t_end_s > 0.0 && t_end_s.is_finite()) {
        return Err(CliError::Config("--t-end must be positive".into()));
    }
    cfg.t_end = config::Quantity::new(t_end_s, config::TimeUnit::Second);
    let r = cfg.resolve()?;
    let e = &r.experiment;
    let u = &e.units;
    let internal: Vec<f64> = match axis {
        SweepAxis::Chi => values.to_vec(),
        SweepAxis::LogStrength => values
            .iter()
            .map(|v| u.to_internal(v * ELECTRON_VOLT, Dimension::Energy))
            .collect(),
    };
    let mut times = e.sample_times(r.t_end);
    times.push(r.t_end);
    let map = analysis::difference_map(e, axis, &internal, &times)?;

    let (name, axis_note) = match axis {
        SweepAxis::Chi => (
            "sweep_chi.csv",
            "chi (columns), width difference b=0 minus b in m",
        ),
        SweepAxis::LogStrength => (
            "sweep_b.csv",
            "b in eV (columns), width difference b=0 minus b in m",
        ),
    };
    let head = header("sweep", &cfg, &r, &[("sweep", axis_note.to_string())]);
    let (path, mut f) = ctx.create(name)?;
    f.write_all(head.as_bytes())?;
    map.write_csv(u, &mut f)?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "wrote {} ({} times x {} values)",
        path.display(),
        times.len(),
        values.len()
    );
    let final_row = map.cells.last().expect("non-empty");
    for (v, d) in values.iter().zip(final_row) {
        let _ = writeln!(
            report,
            "value {}: difference at t_end {} m ({:.3} um)",
            fmt_sci(*v),
            si(u, *d, Dimension::Length),
            um(u, *d)
        );
    }
    Ok(report)
}

pub fn error_budget(
    config_path: &Path,
    errors: &[f64],
    _ctx: &Context,
) -> Result<String, CliError> {
    let cfg = config::load(config_path)?;
    let r = cfg.resolve()?;
    let e = &r.experiment;
    let u = &e.units;
    let errs = match *errors {
        [dn, da, ds] => RelativeErrors {
            atom_number: dn,
            scatter_length: da,
            initial_width: ds,
            initial_rate: 0.0,
        },
        [dn, da, ds, dv] => RelativeErrors {
            atom_number: dn,
            scatter_length: da,
            initial_width: ds,
            initial_rate: dv,
        },
        _ => {
            return Err(CliError::Config(
                "--errors takes dN,da,dsigma0[,dsigmadot0] as relative values".into(),
            ))
        }
    };
    errs.validate()?;

    let mut report = String::new();
    // After a kick the far-field formulas are applied to the post-kick
    // state with the clock restarted.
    let state = match &e.kick {
        Some(_) => {
            let run = e.run(r.t_end)?;
            let after = run.kick.expect("kicked run").after;
            let _ = writeln!(report, "state: post-kick (time reset to 0)");
            GaussianState::new(after.widths, after.rates, 0.0)?
        }
        None => {
            let _ = writeln!(report, "state: initial");
            e.initial
        }
    };
    let rate = analysis::farfield_rate(&state, &e.params)?;
    let (vr, vhu, vgp) = rate.components();
    let budget = analysis::rate_error(&state, &e.params, &errs)?;
    let _ = writeln!(
        report,
        "errors: atom_number={} scatter_length={} initial_width={} initial_rate={}",
        errs.atom_number, errs.scatter_length, errs.initial_width, errs.initial_rate
    );
    let _ = writeln!(report, "sigma_dot_R_um_per_s: {:.6}", um_per_s(u, vr));
    let _ = writeln!(report, "sigma_dot_HU_um_per_s: {:.6}", um_per_s(u, vhu));
    let _ = writeln!(report, "sigma_dot_GP_um_per_s: {:.6}", um_per_s(u, vgp));
    let _ = writeln!(
        report,
        "sigma_dot_inf_um_per_s: {:.6}",
        um_per_s(u, rate.total())
    );
    let _ = writeln!(report, "delta_sigma_dot: {}", fmt_sci(budget.relative));
    let _ = writeln!(
        report,
        "Delta_sigma_dot_um_per_s: {:.6}",
        um_per_s(u, budget.absolute)
    );
    match analysis::magnetic_threshold(&e.params) {
        Ok(b) => {
            let _ = writeln!(
                report,
                "magnetic_threshold_b_over_hbar_per_s: {:.6} (direct evaluation; the commonly quoted ~1 s^-1 is an order-of-magnitude figure)",
                u.from_internal(b, Dimension::Frequency)
            );
        }
        Err(_) => {
            let _ = writeln!(report, "magnetic_threshold_b_over_hbar_per_s: n/a (b = 0)");
        }
    }
    Ok(report)
}

pub fn validate(config_path: &Path, ctx: &Context) -> Result<String, CliError> {
    let cfg = config::load(config_path)?;
    let r = cfg.resolve()?;
    if r.solver != SolverKind::Both {
        return Err(CliError::Config(
            "validate needs `\"solver\": \"both\"`".into(),
        ));
    }
    if !(ctx.tolerance > 0.0 && ctx.tolerance.is_finite()) {
        return Err(CliError::Config("--tolerance must be positive".into()));
    }
    let e = &r.experiment;
    let u = &e.units;
    let run = e.run(r.t_end)?;
    let mut setup = pde_setup(&r, &run)?;
    let pde_run = run_pde(&r, &mut setup)?;
    let mut notes = kick_notes(&r, &run);
    notes.extend(setup.notes);

    let head = header("validate", &cfg, &r, &notes);
    let (path, mut f) = ctx.create("validation.csv")?;
    f.write_all(head.as_bytes())?;
    writeln!(f, "t_s,sigma_variational_m,sigma_pde_m,relative_difference")?;
    let mut worst: f64 = 0.0;
    let mut worst_t = 0.0;
    for s in &pde_run.samples {
        let Some(v) = run.trajectory.sample_at(s.time) else {
            continue;
        };
        let rel = (s.width / v.widths[0] - 1.0).abs();
        if rel > worst {
            worst = rel;
            worst_t = s.time;
        }
        writeln!(
            f,
            "{},{},{},{}",
            si(u, s.time, Dimension::Time),
            si(u, v.widths[0], Dimension::Length),
            si(u, s.width, Dimension::Length),
            fmt_sci(rel)
        )?;
    }

    let pass = worst <= ctx.tolerance;
    let mut report = String::new();
    let _ = writeln!(report, "wrote {}", path.display());
    let _ = writeln!(report, "pde_steps: {}", pde_run.steps);
    let _ = writeln!(
        report,
        "max_relative_width_discrepancy: {} at t = {} s",
        fmt_sci(worst),
        si(u, worst_t, Dimension::Time)
    );
    let _ = writeln!(report, "tolerance: {}", fmt_sci(ctx.tolerance));
    let _ = writeln!(report, "result: {}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(report)
    } else {
        Err(CliError::Validation(report))
    }
}
