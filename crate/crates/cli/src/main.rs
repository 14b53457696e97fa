//! `qwork` command-line driver.
//!
//! Exit codes: 0 on success, 1 when a physics guard fires (unbounded
//! spectrum, series overflow, cutoff caps), 2 on usage errors.

mod args;
mod output;

use clap::Parser;
use rayon::prelude::*;

use args::{
    caps_from_env, resolve_explicit_truncation, resolve_params, resolve_sweep, Cli, Command,
    CoarseGrainArgs, KernelFlag, OracleArgs, PointArgs, SweepArgs,
};
use output::{Document, SweepRow};
use qwork::analysis::{self, GridSpec, Kernel};
use qwork::params::{CouplingKind, PhysicalParams};
use qwork::truncation::{resolve_truncation, thermal_truncation, HardCaps, Truncation};
use qwork::work::CharFunctionSample;
use qwork::{linear, oracle, quadratic, Error, Result};

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_physics_guard() {
                1
            } else {
                2
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Chi(a) => cmd_chi(a),
        Command::Dist(a) => cmd_dist(a),
        Command::Moments(a) => cmd_moments(a),
        Command::FreeEnergy(a) => cmd_free_energy(a),
        Command::Check(a) => cmd_check(a),
        Command::CoarseGrain(a) => cmd_coarse_grain(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

/// Truncation for distribution-type runs: explicit overrides win,
/// otherwise the thermal rule. Without a quench the distribution is a
/// point mass at any truncation, so the phonon cap is immaterial then.
fn point_truncation(
    a: &args::ParamArgs,
    params: &PhysicalParams<f64>,
    caps: HardCaps,
) -> Result<Truncation<f64>> {
    if let Some(t) = resolve_explicit_truncation(a, params, caps)? {
        return Ok(t);
    }
    match thermal_truncation(params, a.tail_tol, caps) {
        Ok(t) => Ok(t),
        Err(Error::DimensionCap { axis: "phonon", .. })
            if params.coupling == 0.0 && params.displacement == 0.0 =>
        {
            Ok(resolve_truncation(params, a.tail_tol, caps, false)?.trunc)
        }
        Err(e) => Err(e),
    }
}

/// Truncation for series-type runs (chi, free energy): the phonon side
/// need not fit, so fall back to the resolved photon-exact form.
fn series_truncation(
    a: &args::ParamArgs,
    params: &PhysicalParams<f64>,
    caps: HardCaps,
    guard: bool,
) -> Result<Truncation<f64>> {
    if let Some(t) = resolve_explicit_truncation(a, params, caps)? {
        if guard {
            qwork::truncation::guard_unbounded(params, t.n_max)?;
        }
        return Ok(t);
    }
    Ok(resolve_truncation(params, a.tail_tol, caps, guard)?.trunc)
}

fn cmd_chi(a: PointArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    let trunc = series_truncation(&a.params, &params, caps, false)?;
    if a.u_points < 2 || !(a.u_max > 0.0) {
        return Err(Error::InvalidSpec(
            "chi needs --u-points >= 2 and --u-max > 0".into(),
        ));
    }
    let grid = CharFunctionSample::uniform_grid(a.u_max, a.u_points);
    let sample = match params.coupling_kind {
        CouplingKind::Linear => linear::chi_linear_grid(&grid, &params, &trunc)?,
        CouplingKind::Quadratic => quadratic::chi_quadratic_grid(&grid, &params, &trunc)?,
    };
    Document::new(&params, Some(&trunc), None)?
        .with_chi(&sample.u, &sample.values)
        .emit(a.params.output.as_ref(), a.params.format)
}

fn cmd_dist(a: PointArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    let trunc = point_truncation(&a.params, &params, caps)?;
    let dist = match params.coupling_kind {
        CouplingKind::Linear => linear::work_distribution_linear(&params, &trunc)?,
        CouplingKind::Quadratic => quadratic::work_distribution_quadratic(&params, &trunc)?,
    };
    Document::new(&params, Some(&trunc), Some(dist.deficit()))?
        .with_atoms(&dist)
        .emit(a.params.output.as_ref(), a.params.format)
}

fn cmd_moments(a: PointArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    let _ = caps;
    let moments = match params.coupling_kind {
        CouplingKind::Linear => linear::moments_linear(&params)?,
        CouplingKind::Quadratic => quadratic::moments_quadratic(&params)?,
    };
    Document::new(&params, None, None)?
        .with_summary(
            &moments,
            &["mean", "variance", "skewness", "distribution_derived"],
        )
        .emit(a.params.output.as_ref(), a.params.format)
}

fn cmd_free_energy(a: PointArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    let trunc = series_truncation(&a.params, &params, caps, true)?;
    let delta_f = match params.coupling_kind {
        CouplingKind::Linear => linear::delta_f_linear(&params, &trunc)?,
        CouplingKind::Quadratic => quadratic::delta_f_quadratic(&params, &trunc)?,
    };
    #[derive(serde::Serialize)]
    struct FreeEnergy {
        delta_f: f64,
    }
    Document::new(&params, Some(&trunc), None)?
        .with_summary(&FreeEnergy { delta_f }, &["delta_f"])
        .emit(a.params.output.as_ref(), a.params.format)
}

fn cmd_check(a: PointArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    let trunc = series_truncation(&a.params, &params, caps, true)?;
    let report = analysis::fluctuation_checks(&params, &trunc)?;
    Document::new(&params, Some(&trunc), report.deficit)?
        .with_summary(
            &report.summary,
            &[
                "mean",
                "variance",
                "skewness",
                "delta_f",
                "w_irr",
                "jarzynski_residual",
                "crooks_residual_max",
            ],
        )
        .emit(a.params.output.as_ref(), a.params.format)
}

fn cmd_coarse_grain(a: CoarseGrainArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    let trunc = point_truncation(&a.params, &params, caps)?;
    let dist = match params.coupling_kind {
        CouplingKind::Linear => linear::work_distribution_linear(&params, &trunc)?,
        CouplingKind::Quadratic => quadratic::work_distribution_quadratic(&params, &trunc)?,
    };
    let cg = if a.cdf {
        analysis::smoothed_cdf_density(&dist, a.width)?
    } else {
        let kernel = match a.kernel {
            KernelFlag::Gaussian => Kernel::Gaussian,
            KernelFlag::Lorentzian => Kernel::Lorentzian,
        };
        let pad = if kernel == Kernel::Lorentzian {
            // the truncated Lorentzian reaches 40 widths
            a.pad.max(41.0)
        } else {
            a.pad.max(5.0)
        };
        let grid = GridSpec::covering(&dist, a.width, pad);
        analysis::coarse_grain(&dist, kernel, a.width, &grid)?
    };
    Document::new(&params, Some(&trunc), Some(dist.deficit()))?
        .with_density(&cg)
        .emit(a.params.output.as_ref(), a.params.format)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let (axis, points) = resolve_sweep(&a)?;
    let evaluate = |point: &args::SweepPoint, value: f64| -> Result<SweepRow> {
        let params = point.resolve().map_err(|e| {
            Error::InvalidSpec(format!("sweep point {}={value}: {e}", axis.flag))
        })?;
        let resolved = resolve_truncation(&params, a.tail_tol, caps, true)?;
        let report = analysis::fluctuation_checks(&params, &resolved.trunc)?;
        Ok(SweepRow {
            value,
            summary: report.summary,
            deficit: report.deficit,
        })
    };
    let jobs: Vec<(args::SweepPoint, f64)> = points
        .into_iter()
        .zip(axis.values.iter().copied())
        .collect();
    let rows: Result<Vec<SweepRow>> = if a.workers == 1 {
        jobs.iter().map(|(p, v)| evaluate(p, *v)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(a.workers)
            .build()
            .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(|(p, v)| evaluate(p, *v)).collect())
    };
    let rows = rows?;

    // header echoes the base configuration of the first point
    let params = jobs[0].0.resolve()?;
    Document::new(&params, None, None)?
        .with_rows(axis.flag, &rows)
        .emit(a.output.as_ref(), a.format)
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let caps = caps_from_env()?;
    let params = resolve_params(&a.params)?;
    // dense diagonalization: default to the verification scale, whose
    // photon tail is far above the default tail tolerance
    let trunc = match resolve_explicit_truncation(&a.params, &params, caps)? {
        Some(t) => t,
        None => Truncation::new(
            6.min(caps.n),
            120.min(caps.k),
            a.params.tail_tol.max(1e-4),
        )?,
    };
    let dist = oracle::two_point_measurement(&params, &trunc)?;
    Document::new(&params, Some(&trunc), Some(dist.deficit()))?
        .with_atoms(&dist)
        .emit(a.params.output.as_ref(), a.params.format)
}
