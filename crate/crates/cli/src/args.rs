//! Flag parsing and parameter resolution.

use clap::{Args, Parser, Subcommand, ValueEnum};

use qwork::params::{CouplingKind, PhysicalParams};
use qwork::truncation::{HardCaps, Truncation};
use qwork::{Error, Result};

/// Work statistics of suddenly quenched optomechanical couplings.
///
/// Computes characteristic functions, discrete work distributions,
/// moments, free-energy differences and fluctuation-theorem residuals for
/// the sudden quench of a linear or quadratic optomechanical coupling,
/// with a brute-force Fock-space oracle for verification. All energies are
/// in units of hbar*omega_m, the time-like variable u in 1/omega_m.
#[derive(Debug, Parser)]
#[command(name = "qwork", version, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characteristic function chi(u) on a u grid.
    Chi(PointArgs),
    /// Discrete work distribution P(W).
    Dist(PointArgs),
    /// Mean, variance and skewness of the work.
    Moments(PointArgs),
    /// Free-energy difference of the quench.
    FreeEnergy(PointArgs),
    /// Full thermodynamic summary with fluctuation-theorem residuals.
    Check(PointArgs),
    /// Coarse-grained work density (kernel convolution or CDF smoothing).
    CoarseGrain(CoarseGrainArgs),
    /// Thermodynamic summaries over a ranged parameter (start:stop:count[:log]).
    Sweep(SweepArgs),
    /// Brute-force two-point-measurement distribution from dense
    /// diagonalization.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindFlag {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatFlag {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelFlag {
    Gaussian,
    Lorentzian,
}

/// Physical-parameter and output flags shared by all subcommands.
#[derive(Debug, Args, Clone)]
pub struct ParamArgs {
    /// Coupling kind.
    #[arg(long, value_enum, default_value = "linear")]
    pub kind: KindFlag,

    /// Linear coupling strength g [omega_m].
    #[arg(long, conflicts_with = "kappa")]
    pub g: Option<f64>,

    /// Quadratic coupling strength kappa [omega_m].
    #[arg(long)]
    pub kappa: Option<f64>,

    /// Mean thermal photon number N_c (overrides --omega-c given beta).
    #[arg(long)]
    pub nc: Option<f64>,

    /// Mean thermal phonon number N_m (overrides --beta).
    #[arg(long)]
    pub nm: Option<f64>,

    /// Inverse temperature beta [1/(hbar*omega_m)].
    #[arg(long, default_value_t = 1e-3)]
    pub beta: f64,

    /// Cavity frequency omega_c [omega_m].
    #[arg(long, default_value_t = 500.0)]
    pub omega_c: f64,

    /// Mechanical drive amplitude E (displaced-oscillator variant).
    #[arg(long, default_value_t = 0.0)]
    pub e: f64,

    /// Acceptable probability mass outside the cutoffs.
    #[arg(long, default_value_t = 1e-12)]
    pub tail_tol: f64,

    /// Photon cutoff override.
    #[arg(long)]
    pub n_max: Option<usize>,

    /// Phonon cutoff override.
    #[arg(long)]
    pub k_max: Option<usize>,

    /// Output file (stdout when omitted). Files are written atomically:
    /// nothing is emitted on error.
    #[arg(long)]
    pub output: Option<std::path::PathBuf>,

    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatFlag,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub params: ParamArgs,

    /// Upper end of the u grid [1/omega_m] (chi only).
    #[arg(long, default_value_t = 4.0 * std::f64::consts::PI)]
    pub u_max: f64,

    /// Number of u grid points (chi only).
    #[arg(long, default_value_t = 512)]
    pub u_points: usize,
}

#[derive(Debug, Args)]
pub struct CoarseGrainArgs {
    #[command(flatten)]
    pub params: ParamArgs,

    /// Smoothing kernel.
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kernel: KernelFlag,

    /// Kernel width / smoothing window [hbar*omega_m].
    #[arg(long, default_value_t = 0.5)]
    pub width: f64,

    /// Use the CDF-interpolation route instead of kernel convolution.
    #[arg(long)]
    pub cdf: bool,

    /// Grid padding beyond the atom support, in kernel widths.
    #[arg(long, default_value_t = 5.0)]
    pub pad: f64,
}

/// Sweep flags: same parameter surface, but every physical flag accepts a
/// range `start:stop:count[:log]`; exactly one flag must carry a range.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "linear")]
    pub kind: KindFlag,

    #[arg(long, conflicts_with = "kappa")]
    pub g: Option<String>,

    #[arg(long)]
    pub kappa: Option<String>,

    #[arg(long)]
    pub nc: Option<String>,

    #[arg(long)]
    pub nm: Option<String>,

    #[arg(long, default_value = "1e-3")]
    pub beta: String,

    #[arg(long, default_value = "500")]
    pub omega_c: String,

    #[arg(long, default_value = "0")]
    pub e: String,

    #[arg(long, default_value_t = 1e-12)]
    pub tail_tol: f64,

    /// Worker threads for evaluating sweep points (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,

    #[arg(long)]
    pub output: Option<std::path::PathBuf>,

    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatFlag,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}

impl From<KindFlag> for CouplingKind {
    fn from(k: KindFlag) -> Self {
        match k {
            KindFlag::Linear => CouplingKind::Linear,
            KindFlag::Quadratic => CouplingKind::Quadratic,
        }
    }
}

/// Hard caps, lowered by QW_MAX_DIM when set (constrained CI
/// environments).
pub fn caps_from_env() -> Result<HardCaps> {
    match std::env::var("QW_MAX_DIM") {
        Ok(v) => {
            let limit: usize = v.parse().map_err(|_| {
                Error::InvalidSpec(format!("QW_MAX_DIM must be a positive integer, got {v:?}"))
            })?;
            Ok(HardCaps::clamped(limit))
        }
        Err(_) => Ok(HardCaps::default()),
    }
}

/// Resolve the physical parameters from flags: `--nm` fixes beta, `--nc`
/// then fixes omega_c; coupling comes from the flag matching the kind.
pub fn resolve_params(a: &ParamArgs) -> Result<PhysicalParams<f64>> {
    let kind: CouplingKind = a.kind.into();
    let coupling = match kind {
        CouplingKind::Linear => {
            if a.kappa.is_some() {
                return Err(Error::InvalidSpec(
                    "--kappa given but the coupling kind is linear (use --g or --kind quadratic)"
                        .into(),
                ));
            }
            a.g.unwrap_or(0.0)
        }
        CouplingKind::Quadratic => {
            if a.g.is_some() {
                return Err(Error::InvalidSpec(
                    "--g given but the coupling kind is quadratic (use --kappa or --kind linear)"
                        .into(),
                ));
            }
            a.kappa.unwrap_or(0.0)
        }
    };
    let mut beta = a.beta;
    if let Some(nm) = a.nm {
        if !(nm > 0.0) {
            return Err(Error::InvalidSpec("--nm must be positive".into()));
        }
        beta = (1.0 + 1.0 / nm).ln();
    }
    let mut omega_c = a.omega_c;
    if let Some(nc) = a.nc {
        if !(nc > 0.0) {
            return Err(Error::InvalidSpec("--nc must be positive".into()));
        }
        omega_c = (1.0 + 1.0 / nc).ln() / beta;
    }
    let p = PhysicalParams {
        omega_c,
        omega_m: 1.0,
        coupling,
        coupling_kind: kind,
        beta,
        displacement: a.e,
    };
    p.validate()?;
    Ok(p)
}

/// Truncation for a point run: explicit overrides win, otherwise the
/// thermal rule at the requested tail tolerance.
pub fn resolve_explicit_truncation(
    a: &ParamArgs,
    params: &PhysicalParams<f64>,
    caps: HardCaps,
) -> Result<Option<Truncation<f64>>> {
    if a.n_max.is_none() && a.k_max.is_none() {
        return Ok(None);
    }
    let auto = qwork::truncation::thermal_truncation(params, a.tail_tol, caps).ok();
    let n_max = match a.n_max {
        Some(n) => n,
        None => auto.as_ref().map(|t| t.n_max).ok_or_else(|| {
            Error::InvalidSpec("--k-max override requires --n-max in this regime".into())
        })?,
    };
    let k_max = match a.k_max {
        Some(k) => k,
        None => auto.as_ref().map(|t| t.k_max).ok_or_else(|| {
            Error::InvalidSpec("--n-max override requires --k-max in this regime".into())
        })?,
    };
    if n_max > caps.n {
        return Err(Error::DimensionCap {
            axis: "photon",
            required: n_max,
            cap: caps.n,
        });
    }
    if k_max > caps.k {
        return Err(Error::DimensionCap {
            axis: "phonon",
            required: k_max,
            cap: caps.k,
        });
    }
    Ok(Some(Truncation::new(n_max, k_max, a.tail_tol)?))
}

/// One parsed sweep axis.
#[derive(Debug, Clone)]
pub struct RangeSpec {
    pub flag: &'static str,
    pub values: Vec<f64>,
}

fn parse_scalar(flag: &'static str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| Error::InvalidSpec(format!("--{flag}: expected a number, got {text:?}")))
}

fn parse_ranged(flag: &'static str, text: &str) -> Result<Option<RangeSpec>> {
    if !text.contains(':') {
        return Ok(None);
    }
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(Error::InvalidSpec(format!(
            "--{flag}: range must be start:stop:count[:log], got {text:?}"
        )));
    }
    let start = parse_scalar(flag, parts[0])?;
    let stop = parse_scalar(flag, parts[1])?;
    let count: usize = parts[2].parse().map_err(|_| {
        Error::InvalidSpec(format!("--{flag}: count must be a positive integer"))
    })?;
    if count == 0 {
        return Err(Error::InvalidSpec(format!("--{flag}: count must be >= 1")));
    }
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(&"lin") => false,
        Some(other) => {
            return Err(Error::InvalidSpec(format!(
                "--{flag}: spacing must be 'lin' or 'log', got {other:?}"
            )))
        }
    };
    let values = if count == 1 {
        vec![start]
    } else if log {
        if !(start > 0.0 && stop > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "--{flag}: log spacing needs positive endpoints"
            )));
        }
        let (ls, le) = (start.ln(), stop.ln());
        (0..count)
            .map(|i| (ls + (le - ls) * i as f64 / (count - 1) as f64).exp())
            .collect()
    } else {
        (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect()
    };
    Ok(Some(RangeSpec { flag, values }))
}

/// Scalar parameter values of one sweep point, before resolution.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub kind: CouplingKind,
    pub coupling: f64,
    pub nc: Option<f64>,
    pub nm: Option<f64>,
    pub beta: f64,
    pub omega_c: f64,
    pub e: f64,
}

impl SweepPoint {
    pub fn resolve(&self) -> Result<PhysicalParams<f64>> {
        let mut beta = self.beta;
        if let Some(nm) = self.nm {
            if !(nm > 0.0) {
                return Err(Error::InvalidSpec("--nm must be positive".into()));
            }
            beta = (1.0 + 1.0 / nm).ln();
        }
        let mut omega_c = self.omega_c;
        if let Some(nc) = self.nc {
            if !(nc > 0.0) {
                return Err(Error::InvalidSpec("--nc must be positive".into()));
            }
            omega_c = (1.0 + 1.0 / nc).ln() / beta;
        }
        let p = PhysicalParams {
            omega_c,
            omega_m: 1.0,
            coupling: self.coupling,
            coupling_kind: self.kind,
            beta,
            displacement: self.e,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Parse the sweep flags into the swept axis plus the per-point scalar
/// configurations. Exactly one flag must carry a range spec.
pub fn resolve_sweep(a: &SweepArgs) -> Result<(RangeSpec, Vec<SweepPoint>)> {
    let kind: CouplingKind = a.kind.into();
    let coupling_flag: (&'static str, Option<&String>) = match kind {
        CouplingKind::Linear => {
            if a.kappa.is_some() {
                return Err(Error::InvalidSpec(
                    "--kappa given but the coupling kind is linear".into(),
                ));
            }
            ("g", a.g.as_ref())
        }
        CouplingKind::Quadratic => {
            if a.g.is_some() {
                return Err(Error::InvalidSpec(
                    "--g given but the coupling kind is quadratic".into(),
                ));
            }
            ("kappa", a.kappa.as_ref())
        }
    };

    let mut ranged: Vec<RangeSpec> = Vec::new();
    let mut scalar = |flag: &'static str, text: Option<&String>, default: f64| -> Result<f64> {
        match text {
            None => Ok(default),
            Some(t) => match parse_ranged(flag, t)? {
                Some(spec) => {
                    let first = spec.values[0];
                    ranged.push(spec);
                    Ok(first)
                }
                None => parse_scalar(flag, t),
            },
        }
    };

    let coupling = scalar(coupling_flag.0, coupling_flag.1, 0.0)?;
    let nc = match &a.nc {
        None => None,
        Some(t) => Some(scalar("nc", Some(t), 0.0)?),
    };
    let nm = match &a.nm {
        None => None,
        Some(t) => Some(scalar("nm", Some(t), 0.0)?),
    };
    let beta = scalar("beta", Some(&a.beta), 1e-3)?;
    let omega_c = scalar("omega-c", Some(&a.omega_c), 500.0)?;
    let e = scalar("e", Some(&a.e), 0.0)?;

    if ranged.len() != 1 {
        return Err(Error::InvalidSpec(format!(
            "sweep needs exactly one ranged flag (start:stop:count[:log]); found {}",
            ranged.len()
        )));
    }
    let axis = ranged.pop().unwrap();

    let base = SweepPoint {
        kind,
        coupling,
        nc,
        nm,
        beta,
        omega_c,
        e,
    };
    let points = axis
        .values
        .iter()
        .map(|&v| {
            let mut p = base.clone();
            match axis.flag {
                "g" | "kappa" => p.coupling = v,
                "nc" => p.nc = Some(v),
                "nm" => p.nm = Some(v),
                "beta" => p.beta = v,
                "omega-c" => p.omega_c = v,
                "e" => p.e = v,
                _ => unreachable!(),
            }
            p
        })
        .collect();
    Ok((axis, points))
}
