//! Thermodynamic post-processing: coarse-graining, CDF smoothing,
//! fluctuation-theorem residuals and summary assembly.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle;
use crate::params::{CouplingKind, PhysicalParams};
use crate::real::Real;
use crate::truncation::Truncation;
use crate::work::WorkDistribution;
use crate::{linear, quadratic};

/// Smoothing kernel of a coarse-grained density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gaussian,
    Lorentzian,
    /// Moving-average window (the CDF-smoothing route).
    Boxcar,
}

/// Uniform work grid `min, min+step, ..., <= max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub min: T,
    pub max: T,
    pub step: T,
}

impl<T: Real> GridSpec<T> {
    /// Grid covering the atom support padded by `pad_widths` kernel widths,
    /// at the default spacing `width/8`.
    pub fn covering(dist: &WorkDistribution<T>, width: T, pad_widths: T) -> Self {
        let (lo, hi) = dist.support().unwrap_or((T::zero(), T::zero()));
        GridSpec {
            min: lo - pad_widths * width,
            max: hi + pad_widths * width,
            step: width / T::lit(8.0),
        }
    }

    pub fn points(&self) -> Vec<T> {
        let n = ((self.max - self.min) / self.step)
            .ceil()
            .to_usize()
            .unwrap_or(0);
        (0..=n).map(|i| self.min + T::from_index(i) * self.step).collect()
    }
}

/// Continuous density on a uniform work grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGrainedDensity<T> {
    pub grid: Vec<T>,
    pub density: Vec<T>,
    pub kernel: Kernel,
    pub width: T,
    /// Kernel mass kept inside the truncation window before
    /// renormalization (1 for the Gaussian; `(2/pi) atan(40)` for the
    /// Lorentzian truncated at 40 widths).
    pub kernel_mass: T,
    /// Probability mass removed by clipping negative smoothed values
    /// (CDF-smoothing route only).
    pub clipped_mass: T,
}

impl<T: Real> CoarseGrainedDensity<T> {
    fn step(&self) -> T {
        if self.grid.len() >= 2 {
            self.grid[1] - self.grid[0]
        } else {
            T::zero()
        }
    }

    /// Trapezoid mass of the density.
    pub fn mass(&self) -> T {
        trapezoid(&self.density, self.step())
    }

    /// Trapezoid mean and variance of the density.
    pub fn moments(&self) -> (T, T) {
        let h = self.step();
        let m0 = self.mass();
        let weighted: Vec<T> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(&w, &d)| w * d)
            .collect();
        let mean = trapezoid(&weighted, h) / m0;
        let centered: Vec<T> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(&w, &d)| (w - mean) * (w - mean) * d)
            .collect();
        (mean, trapezoid(&centered, h) / m0)
    }

    /// Density interpolated at `w` (nearest grid point).
    pub fn at(&self, w: T) -> Option<T> {
        if self.grid.is_empty() || w < self.grid[0] || w > *self.grid.last().unwrap() {
            return None;
        }
        let idx = ((w - self.grid[0]) / self.step())
            .round()
            .to_usize()
            .unwrap_or(0)
            .min(self.density.len() - 1);
        Some(self.density[idx])
    }
}

fn trapezoid<T: Real>(values: &[T], h: T) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let inner: T = values[1..values.len() - 1]
        .iter()
        .fold(T::zero(), |s, &v| s + v);
    (inner + (values[0] + *values.last().unwrap()) / T::lit(2.0)) * h
}

/// Lorentzian truncation radius in kernel widths (heavy tails).
const LORENTZIAN_CUT: f64 = 40.0;

/// Convolve the discrete measure with a normalized kernel of the given
/// width on the grid: `density(W) = sum_j p_j K(W - W_j)`.
pub fn coarse_grain<T: Real>(
    dist: &WorkDistribution<T>,
    kernel: Kernel,
    width: T,
    grid: &GridSpec<T>,
) -> Result<CoarseGrainedDensity<T>> {
    if !(width > T::zero()) {
        return Err(Error::InvalidParams("kernel width must be > 0".into()));
    }
    if grid.step > width / T::lit(4.0) {
        return Err(Error::GridTooCoarse {
            spacing: grid.step.to_f64().unwrap_or(f64::NAN),
            limit: (width / T::lit(4.0)).to_f64().unwrap_or(f64::NAN),
        });
    }
    if let Some((lo, hi)) = dist.support() {
        let pad = T::lit(5.0) * width;
        if grid.min > lo - pad || grid.max < hi + pad {
            return Err(Error::InvalidSpec(
                "grid must cover the atom support padded by 5 kernel widths".into(),
            ));
        }
    }
    let points = grid.points();
    let mut density = vec![T::zero(); points.len()];
    let (eval, kernel_mass): (Box<dyn Fn(T) -> T>, T) = match kernel {
        Kernel::Gaussian => {
            let norm = (width * T::lit((2.0 * std::f64::consts::PI).sqrt())).recip();
            let s2 = T::lit(2.0) * width * width;
            (
                Box::new(move |x: T| norm * (-x * x / s2).exp()),
                T::one(),
            )
        }
        Kernel::Lorentzian => {
            // mass kept inside the cut, used to renormalize
            let kept = T::lit(2.0 / std::f64::consts::PI * LORENTZIAN_CUT.atan());
            let g2 = width * width;
            let cut = T::lit(LORENTZIAN_CUT) * width;
            let norm = (width / T::pi()) / kept;
            (
                Box::new(move |x: T| {
                    if x.abs() > cut {
                        T::zero()
                    } else {
                        norm / (x * x + g2)
                    }
                }),
                kept,
            )
        }
        Kernel::Boxcar => {
            let half = width / T::lit(2.0);
            let norm = width.recip();
            (
                Box::new(move |x: T| if x.abs() <= half { norm } else { T::zero() }),
                T::one(),
            )
        }
    };
    for atom in dist.atoms() {
        for (i, &w) in points.iter().enumerate() {
            density[i] += atom.prob * eval(w - atom.work);
        }
    }
    Ok(CoarseGrainedDensity {
        grid: points,
        density,
        kernel,
        width,
        kernel_mass,
        clipped_mass: T::zero(),
    })
}

/// Continuous density via the cumulative distribution: build the CDF of
/// the atoms, smooth it with a moving average of the given window,
/// differentiate by central differences, clip at zero (clipped mass
/// recorded).
pub fn smoothed_cdf_density<T: Real>(
    dist: &WorkDistribution<T>,
    window: T,
) -> Result<CoarseGrainedDensity<T>> {
    if !(window > T::zero()) {
        return Err(Error::InvalidParams("smoothing window must be > 0".into()));
    }
    let grid = GridSpec::covering(dist, window, T::lit(5.0));
    let points = grid.points();
    let h = grid.step;
    // monotone step CDF sampled on the grid
    let atoms = dist.atoms();
    let mut cdf = vec![T::zero(); points.len()];
    let mut acc = T::zero();
    let mut j = 0;
    for (i, &w) in points.iter().enumerate() {
        while j < atoms.len() && atoms[j].work <= w {
            acc += atoms[j].prob;
            j += 1;
        }
        cdf[i] = acc;
    }
    // moving average over the window
    let half = ((window / (T::lit(2.0) * h)).round())
        .to_usize()
        .unwrap_or(0)
        .max(1);
    let n = cdf.len();
    let mut smooth = vec![T::zero(); n];
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let mut s = T::zero();
        for v in &cdf[lo..=hi] {
            s += *v;
        }
        // clamp at the edges keeps the CDF flat outside the support
        let count = T::from_index(hi - lo + 1);
        smooth[i] = s / count;
    }
    // central-difference derivative, one-sided at the ends
    let mut density = vec![T::zero(); n];
    for i in 0..n {
        density[i] = if i == 0 {
            (smooth[1] - smooth[0]) / h
        } else if i == n - 1 {
            (smooth[n - 1] - smooth[n - 2]) / h
        } else {
            (smooth[i + 1] - smooth[i - 1]) / (T::lit(2.0) * h)
        };
    }
    let mut clipped = T::zero();
    for d in &mut density {
        if *d < T::zero() {
            clipped += -*d * h;
            *d = T::zero();
        }
    }
    Ok(CoarseGrainedDensity {
        grid: points,
        density,
        kernel: Kernel::Boxcar,
        width: window,
        kernel_mass: T::one(),
        clipped_mass: clipped,
    })
}

/// Least-squares exponential fit `ln density = intercept + slope * W` over
/// a work window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

pub fn exponential_tail_fit<T: Real>(
    density: &CoarseGrainedDensity<T>,
    window: (T, T),
) -> Result<TailFit<T>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&w, &d) in density.grid.iter().zip(&density.density) {
        if w >= window.0 && w <= window.1 {
            if d <= T::zero() {
                return Err(Error::NonPositiveDensity {
                    at: w.to_f64().unwrap_or(f64::NAN),
                });
            }
            xs.push(w);
            ys.push(d.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::InvalidSpec(format!(
            "tail window contains only {} grid points (need >= 3)",
            xs.len()
        )));
    }
    let nf = T::from_index(xs.len());
    let mean_x = xs.iter().fold(T::zero(), |s, &x| s + x) / nf;
    let mean_y = ys.iter().fold(T::zero(), |s, &y| s + y) / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy > T::zero() {
        (sxy * sxy) / (sxx * syy)
    } else {
        T::one()
    };
    Ok(TailFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Thermodynamic figures of merit for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoSummary<T> {
    pub mean: T,
    /// `None` only for the displaced variant when its distribution-derived
    /// value is over budget.
    pub variance: Option<T>,
    /// `None` when degenerate (zero-photon initial state or zero quench)
    /// or unavailable as for `variance`.
    pub skewness: Option<T>,
    pub delta_f: T,
    /// Irreversible work `<W> - dF`.
    pub w_irr: T,
    /// `|<e^{-beta W}> e^{beta dF} - 1|` over the truncated atom sum;
    /// `None` when the distribution is too large to enumerate.
    pub jarzynski_residual: Option<T>,
    /// `max_u |-(1/beta) ln[chi(u)/chi~(i beta - u)] - dF|` on a 16-point
    /// grid at oracle scale; `None` when the oracle does not fit.
    pub crooks_residual_max: Option<T>,
}

/// Summary plus the deficit of the distribution that backed the Jarzynski
/// residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport<T> {
    pub summary: ThermoSummary<T>,
    pub deficit: Option<T>,
}

/// Cost caps for the Tasaki-Crooks oracle run (beyond these the residual
/// is reported as `None`).
const CROOKS_K_CAP: usize = 1024;
const CROOKS_ORACLE_N: usize = 8;
const CROOKS_ORACLE_K: usize = 160;

/// Assemble the fluctuation-theorem summary for one parameter point:
/// closed forms from the matching quench module, the Jarzynski residual
/// from the enumerated distribution, and the Tasaki-Crooks residual from
/// the forward/backward oracle characteristic functions.
pub fn fluctuation_checks<T: Real + nalgebra::RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<FluctuationReport<T>> {
    params.validate()?;
    let (mean, variance, skewness, delta_f) = match params.coupling_kind {
        CouplingKind::Linear => {
            let df = linear::delta_f_linear(params, trunc)?;
            match linear::moments_linear(params) {
                Ok(m) => (m.mean, Some(m.variance), m.skewness, df),
                // displaced variant over the distribution budget: the mean
                // closed form still applies
                Err(Error::DimensionCap { .. }) if params.displacement != T::zero() => {
                    let mean = T::lit(2.0)
                        * params.coupling
                        * params.displacement
                        * params.n_c()?.value();
                    (mean, None, None, df)
                }
                Err(e) => return Err(e),
            }
        }
        CouplingKind::Quadratic => {
            let m = quadratic::moments_quadratic(params)?;
            let df = quadratic::delta_f_quadratic(params, trunc)?;
            (m.mean, Some(m.variance), m.skewness, df)
        }
    };
    let w_irr = mean - delta_f;

    // Jarzynski over the enumerated atoms
    let mut deficit = None;
    let jarzynski_residual = if crate::truncation::distribution_cost_ok(trunc) {
        let dist = match params.coupling_kind {
            CouplingKind::Linear => linear::work_distribution_linear(params, trunc),
            CouplingKind::Quadratic => quadratic::work_distribution_quadratic(params, trunc),
        };
        match dist {
            Ok(d) => {
                deficit = Some(d.deficit());
                let lhs = d.exp_beta_work(params.beta);
                Some(num_traits::Float::abs(
                    lhs * num_traits::Float::exp(params.beta * delta_f) - T::one(),
                ))
            }
            Err(Error::Truncation { .. }) | Err(Error::DimensionCap { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    // Tasaki-Crooks at oracle scale
    let crooks_residual_max = if trunc.k_max <= CROOKS_K_CAP {
        let oracle_trunc = Truncation {
            n_max: trunc.n_max.min(CROOKS_ORACLE_N),
            k_max: trunc.k_max.min(CROOKS_ORACLE_K),
            tail_tol: trunc.tail_tol,
        };
        match crooks_residual(params, &oracle_trunc, delta_f, 16) {
            Ok(r) => Some(r),
            Err(Error::UnboundedSpectrum { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    Ok(FluctuationReport {
        summary: ThermoSummary {
            mean,
            variance,
            skewness,
            delta_f,
            w_irr,
            jarzynski_residual,
            crooks_residual_max,
        },
        deficit,
    })
}

/// `max_u | -(1/beta) ln[chi(u) / chi~(i beta - u)] - delta_f |` over a
/// uniform u grid on `(0, 2 pi/omega_m]`.
pub fn crooks_residual<T: Real + nalgebra::RealField>(
    params: &PhysicalParams<T>,
    oracle_trunc: &Truncation<T>,
    delta_f: T,
    grid_points: usize,
) -> Result<T> {
    let mut worst = T::zero();
    let span = T::lit(2.0) * <T as Real>::pi() / params.omega_m;
    for i in 1..=grid_points {
        let u = span * T::from_index(i) / T::from_index(grid_points);
        let fwd = oracle::chi_by_trace(Complex::new(u, T::zero()), params, oracle_trunc)?;
        let bwd = oracle::backward_chi(Complex::new(-u, params.beta), params, oracle_trunc)?;
        let val = -(fwd / bwd).ln() / params.beta;
        let dev = (val - Complex::new(delta_f, T::zero())).norm();
        if dev > worst {
            worst = dev;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::{choose_truncation, thermal_truncation, HardCaps};
    use approx::assert_relative_eq;

    fn point_mass() -> WorkDistribution<f64> {
        WorkDistribution::from_raw(vec![(0.0, 1.0)], 1e-9).unwrap()
    }

    #[test]
    fn single_atom_becomes_a_unit_gaussian() {
        let d = point_mass();
        let grid = GridSpec::covering(&d, 0.5, 9.0);
        let cg = coarse_grain(&d, Kernel::Gaussian, 0.5, &grid).unwrap();
        assert_relative_eq!(cg.mass(), 1.0, epsilon = 1e-9);
        let peak = cg.at(0.0).unwrap();
        let expect = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert_relative_eq!(peak, expect, max_relative = 1e-12);
        let (mean, var) = cg.moments();
        assert!(mean.abs() <= 1e-12);
        assert_relative_eq!(var, 0.25, max_relative = 1e-6);
    }

    #[test]
    fn two_atom_mixture_matches_closed_form() {
        let d = WorkDistribution::from_raw(vec![(-1.0, 0.3), (2.0, 0.7)], 1e-9).unwrap();
        let grid = GridSpec::covering(&d, 0.4, 8.0);
        let cg = coarse_grain(&d, Kernel::Gaussian, 0.4, &grid).unwrap();
        let sigma2 = 0.32f64;
        let norm = 1.0 / (0.4 * (2.0 * std::f64::consts::PI).sqrt());
        for (&w, &dens) in cg.grid.iter().zip(&cg.density) {
            let expect = 0.3 * norm * (-(w + 1.0) * (w + 1.0) / sigma2).exp()
                + 0.7 * norm * (-(w - 2.0) * (w - 2.0) / sigma2).exp();
            assert!((dens - expect).abs() <= 1e-12, "w={w}");
        }
    }

    #[test]
    fn gaussian_convolution_identities() {
        // mean preserved, variance increased by width^2
        let d = WorkDistribution::from_raw(
            vec![(-2.0, 0.2), (-0.5, 0.1), (0.7, 0.4), (3.0, 0.3)],
            1e-9,
        )
        .unwrap();
        let m_in = d.moments();
        let width: f64 = 0.5;
        let grid = GridSpec::covering(&d, width, 9.0);
        let cg = coarse_grain(&d, Kernel::Gaussian, width, &grid).unwrap();
        let (mean, var) = cg.moments();
        assert!((mean - m_in.mean).abs() <= 1e-6);
        assert!((var - (m_in.variance + width * width)).abs() <= 1e-6);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let d = point_mass();
        let grid = GridSpec {
            min: -5.0,
            max: 5.0,
            step: 0.2,
        };
        let err = coarse_grain(&d, Kernel::Gaussian, 0.5, &grid).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }

    #[test]
    fn lorentzian_is_renormalized() {
        let d = point_mass();
        let grid = GridSpec::covering(&d, 0.5, 45.0);
        let cg = coarse_grain(&d, Kernel::Lorentzian, 0.5, &grid).unwrap();
        assert_relative_eq!(
            cg.kernel_mass,
            2.0 / std::f64::consts::PI * 40f64.atan(),
            max_relative = 1e-12
        );
        assert_relative_eq!(cg.mass(), 1.0, epsilon = 2e-4);
    }

    #[test]
    fn cdf_route_recovers_a_delta() {
        let d = point_mass();
        let cg = smoothed_cdf_density(&d, 0.5).unwrap();
        assert!((cg.mass() - 1.0).abs() <= 1e-9);
        // mass concentrates near the atom
        let (mean, var) = cg.moments();
        assert!(mean.abs() <= 0.05);
        assert!(var <= 0.25);
    }

    #[test]
    fn cdf_route_flattens_a_comb() {
        // uniform 10-atom comb -> roughly constant density over the support
        // (pointwise up to the boxcar granularity, exact on average)
        let atoms: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.3, 0.1)).collect();
        let d = WorkDistribution::from_raw(atoms, 1e-9).unwrap();
        let cg = smoothed_cdf_density(&d, 0.6).unwrap();
        let expect = 0.1 / 0.3;
        let mut acc = 0.0;
        let mut count = 0usize;
        for (&w, &dens) in cg.grid.iter().zip(&cg.density) {
            if w > 0.8 && w < 1.9 {
                assert!(
                    (dens - expect).abs() <= 0.35 * expect,
                    "w={w}: {dens} vs {expect}"
                );
                acc += dens;
                count += 1;
            }
        }
        let avg = acc / count as f64;
        assert!((avg - expect).abs() <= 0.05 * expect, "avg {avg} vs {expect}");
    }

    #[test]
    fn exponential_fit_recovers_an_exact_slope() {
        let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let density: Vec<f64> = grid.iter().map(|w| (1.3 - 0.8 * w).exp()).collect();
        let cg = CoarseGrainedDensity {
            grid,
            density,
            kernel: Kernel::Gaussian,
            width: 0.4,
            kernel_mass: 1.0,
            clipped_mass: 0.0,
        };
        let fit = exponential_tail_fit(&cg, (0.5, 4.5)).unwrap();
        assert!((fit.slope + 0.8).abs() <= 1e-10);
        assert!((fit.intercept - 1.3).abs() <= 1e-10);
        assert!((fit.r_squared - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fit_rejects_nonpositive_density() {
        let cg = CoarseGrainedDensity {
            grid: vec![0.0, 0.1, 0.2, 0.3],
            density: vec![1.0, 0.0, 0.5, 0.2],
            kernel: Kernel::Gaussian,
            width: 0.4,
            kernel_mass: 1.0,
            clipped_mass: 0.0,
        };
        let err = exponential_tail_fit(&cg, (0.0, 0.3)).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDensity { .. }));
    }

    #[test]
    fn no_quench_summary_is_all_zero() {
        for kind in [CouplingKind::Linear, CouplingKind::Quadratic] {
            let p = PhysicalParams::from_occupations(kind, 0.1, 1.0, 0.0).unwrap();
            let t = thermal_truncation(&p, 1e-12, HardCaps::default()).unwrap();
            let r = fluctuation_checks(&p, &t).unwrap();
            assert_eq!(r.summary.mean, 0.0);
            assert_eq!(r.summary.delta_f, 0.0);
            assert_eq!(r.summary.w_irr, 0.0);
            assert!(r.summary.jarzynski_residual.unwrap() <= 1e-12);
            assert!(r.summary.crooks_residual_max.unwrap() <= 1e-9);
        }
    }

    #[test]
    fn linear_irreversible_work_is_minus_delta_f() {
        // E = 0: <W> = 0, so W_irr = -dF > 0. At the figure temperature the
        // phonon side is over budget: the residuals are unavailable but the
        // free-energy chain must be intact.
        let p = PhysicalParams::linear(500.0, 0.5, 1e-3);
        let r = crate::truncation::resolve_truncation(&p, 1e-12, HardCaps::default(), true)
            .unwrap();
        assert!(!r.distribution_feasible);
        let f = fluctuation_checks(&p, &r.trunc).unwrap();
        assert_eq!(f.summary.mean, 0.0);
        assert!(f.summary.w_irr > 0.0);
        assert_relative_eq!(f.summary.w_irr, -f.summary.delta_f, max_relative = 1e-14);
        assert!(f.summary.jarzynski_residual.is_none());
        assert!(f.summary.crooks_residual_max.is_none());
    }

    #[test]
    fn jarzynski_residual_tracks_the_deficit() {
        let p = PhysicalParams::from_occupations(CouplingKind::Quadratic, 0.1, 1.0, 0.3).unwrap();
        let t = thermal_truncation(&p, 1e-12, HardCaps::default()).unwrap();
        let r = fluctuation_checks(&p, &t).unwrap();
        let residual = r.summary.jarzynski_residual.unwrap();
        let deficit: f64 = r.deficit.unwrap();
        assert!(
            residual <= 10.0 * deficit.max(1e-13),
            "residual {residual} deficit {:?}",
            r.deficit
        );
    }
}
