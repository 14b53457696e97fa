//! Closed-form work statistics for the sudden quench of the quadratic
//! (position-squared) coupling.
//!
//! Within a fixed photon manifold the post-quench evolution is a squeeze
//! and a rotation of the mechanical mode (a two-excitation su(1,1)
//! structure); the characteristic function per manifold is the reciprocal
//! square root of a quadratic polynomial in the phonon occupation, with the
//! complex branch tracked continuously from `chi(0) = 1`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::overlap::squeeze_overlap_cached;
use crate::params::{thermal_weight, CouplingKind, PhysicalParams};
use crate::real::Real;
use crate::special::LnFactorial;
use crate::truncation::Truncation;
use crate::work::{CharFunctionSample, Moments, WorkDistribution};

fn require_quadratic<T: Real>(params: &PhysicalParams<T>) -> Result<()> {
    params.validate()?;
    if params.coupling_kind != CouplingKind::Quadratic {
        return Err(Error::InvalidParams(
            "quadratic-quench operation called with linear coupling".into(),
        ));
    }
    Ok(())
}

/// Disentangling factors of the post-quench propagator in the n-photon
/// manifold: `exp(-i u H_{F,n})` restricted to the mechanical mode equals
/// `S(xi_n) exp(-i eta_n (b'b + 1/2))` with `S(z) = exp(z* b^2/2 - z b'^2/2)`
/// and `xi_n = xi_abs exp(i phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeFactors<T> {
    /// Rotation angle, unwrapped to the branch continuous in `u` with
    /// `eta(0) = 0`.
    pub eta: T,
    /// Squeeze magnitude `|xi_n|`.
    pub xi_abs: T,
    /// Squeeze phase.
    pub phi: T,
    /// Static diagonalizing squeeze parameter
    /// `zeta_n = (1/4) ln(1 + 4 (kappa/omega_m) n)`.
    pub zeta: T,
}

/// Frequency scale of the n-photon manifold, `sqrt(1 + 4 (kappa/omega_m) n)`.
pub fn manifold_scale<T: Real>(n: usize, params: &PhysicalParams<T>) -> T {
    (T::one() + T::lit(4.0) * params.coupling_ratio() * T::from_index(n)).sqrt()
}

/// Static squeeze parameter `zeta_n` of the n-photon manifold.
pub fn zeta_n<T: Real>(n: usize, params: &PhysicalParams<T>) -> T {
    manifold_scale(n, params).ln() / T::lit(2.0)
}

pub fn squeeze_factors<T: Real>(n: usize, u: T, params: &PhysicalParams<T>) -> SqueezeFactors<T> {
    let kt = params.coupling_ratio();
    let nf = T::from_index(n);
    let s = manifold_scale(n, params);
    let c = T::one() + T::lit(2.0) * kt * nf;
    let theta = params.omega_m * u * s;
    let pi = T::pi();
    // eta(theta) crosses multiples of pi exactly where theta does, so the
    // continuous branch is the principal value shifted by round(theta/pi)*pi
    let m = (theta / pi).round();
    let rest = theta - m * pi;
    let eta = m * pi + (c * rest.sin()).atan2(s * rest.cos());
    let r = (T::lit(2.0) * kt * nf / s * theta.sin()).asinh();
    let half_pi = pi / T::lit(2.0);
    let phi = if r < T::zero() {
        half_pi - eta + pi
    } else {
        half_pi - eta
    };
    SqueezeFactors {
        eta,
        xi_abs: r.abs(),
        phi,
        zeta: zeta_n(n, params),
    }
}

/// The complex coefficient `chi_{n,0}(u)`.
fn chi_n0<T: Real>(n: usize, u: T, params: &PhysicalParams<T>) -> Complex<T> {
    let kt = params.coupling_ratio();
    let nf = T::from_index(n);
    let s = manifold_scale(n, params);
    let c = (T::one() + T::lit(2.0) * kt * nf) / s;
    let th0 = params.omega_m * u;
    let ths = th0 * s;
    let re = th0.cos() * ths.cos() + c * th0.sin() * ths.sin();
    let im = th0.sin() * ths.cos() - c * th0.cos() * ths.sin();
    Complex::new(re, im)
}

/// Polynomial under the square root:
/// `z_n = chi_{n,0} + chi_{n,1} N_m + chi_{n,2} N_m^2` with
/// `chi_{n,1} = 2 (chi_{n,0} - 1)` and `chi_{n,2} = 2 [Re(chi_{n,0}) - 1]`.
fn z_poly<T: Real>(chi0: Complex<T>, n_m: T) -> Complex<T> {
    let two = T::lit(2.0);
    let chi1 = (chi0 - T::one()) * two;
    let chi2 = two * (chi0.re - T::one());
    chi0 + chi1 * n_m + Complex::new(chi2 * n_m * n_m, T::zero())
}

/// Continuous square-root tracker: follows the branch of `sqrt(z(u))`
/// starting from `sqrt(z(0)) = 1` as `u` advances in small steps.
struct BranchWalker<T> {
    w: Complex<T>,
}

impl<T: Real> BranchWalker<T> {
    fn new() -> Self {
        Self {
            w: Complex::new(T::one(), T::zero()),
        }
    }

    fn advance(&mut self, z: Complex<T>, u: T) -> Result<Complex<T>> {
        let wp = z.sqrt();
        let d_plus = (wp - self.w).norm();
        let d_minus = (wp + self.w).norm();
        let (w, d, d_other) = if d_plus <= d_minus {
            (wp, d_plus, d_minus)
        } else {
            (-wp, d_minus, d_plus)
        };
        // the step is safe only while the two branch candidates are clearly
        // separated; near-parity means the phase advanced ~pi per step
        if d > T::lit(0.75) * d_other {
            return Err(Error::BranchTracking {
                u: u.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.w = w;
        Ok(w)
    }
}

/// Characteristic function of the quadratic-quench work distribution on a
/// grid of real `u` values (ascending). One continuous branch walk per
/// photon manifold serves the whole grid.
pub fn chi_quadratic_grid<T: Real>(
    u_grid: &[T],
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<CharFunctionSample<T>> {
    require_quadratic(params)?;
    for w in u_grid.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidSpec(
                "u grid must be ascending for branch tracking".into(),
            ));
        }
    }
    if u_grid.iter().any(|u| *u < T::zero()) {
        return Err(Error::InvalidSpec(
            "u grid must be non-negative; use chi(-u) = conj(chi(u))".into(),
        ));
    }
    let n_c = params.n_c()?;
    let n_m = params.n_m()?.value();
    let s_max = manifold_scale(trunc.n_max, params);
    // internal refinement step: the phase of z advances at a rate up to
    // ~(1+2N_m)(1+s) omega near the revival points, so the step keeps each
    // advance well below pi
    let h = T::pi()
        / (T::lit(8.0)
            * params.omega_m
            * (T::one() + s_max)
            * (T::one() + T::lit(2.0) * n_m));

    let mut values = vec![Complex::new(T::zero(), T::zero()); u_grid.len()];
    let mut norm = T::zero();
    for n in 0..=trunc.n_max {
        let p = thermal_weight(n, n_c);
        norm += p;
        let mut walker = BranchWalker::new();
        let mut u_cur = T::zero();
        for (j, &u_target) in u_grid.iter().enumerate() {
            while u_cur < u_target {
                u_cur = (u_cur + h).min(u_target);
                walker.advance(z_poly(chi_n0(n, u_cur, params), n_m), u_cur)?;
            }
            let w = if u_target == T::zero() {
                Complex::new(T::one(), T::zero())
            } else {
                walker.w
            };
            values[j] = values[j] + w.inv() * p;
        }
    }
    for v in &mut values {
        *v = *v / norm;
    }
    Ok(CharFunctionSample {
        u: u_grid.to_vec(),
        values,
    })
}

/// `chi_quadratic` at a single real `u >= 0` (internally walks the branch
/// from 0).
pub fn chi_quadratic<T: Real>(
    u: T,
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<Complex<T>> {
    let sample = chi_quadratic_grid(&[u], params, trunc)?;
    Ok(sample.values[0])
}

/// Discrete work distribution of the quadratic quench.
///
/// Atoms derive from the post-quench eigenvalues
/// `E_{n,k'} = omega_c n + omega_m sqrt(1+4 (kappa/omega_m) n) (k'+1/2)`:
/// `W = omega_m [sqrt(1+4 kt n)(k'+1/2) - (k+1/2)]` with probability
/// `p_n p_k |<k'|S(zeta_n)|k>|^2`. Only `k'-k` even contributes (parity
/// selection of the squeeze kernel).
pub fn work_distribution_quadratic<T: Real>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<WorkDistribution<T>> {
    require_quadratic(params)?;
    if params.coupling == T::zero() {
        // identity kernel: P(W) = delta(W) exactly, at any truncation
        return WorkDistribution::from_raw(vec![(T::zero(), T::one())], trunc.tail_tol);
    }
    let raw = quadratic_raw_atoms(params, trunc, &|_, _, _| true)?;
    WorkDistribution::from_raw(raw, trunc.tail_tol)
}

/// Same measure restricted to `k, k' <= max_level` (oracle comparisons).
/// No deficit check is applied.
pub fn work_distribution_quadratic_windowed<T: Real>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
    max_level: usize,
) -> Result<WorkDistribution<T>> {
    work_distribution_quadratic_filtered(params, trunc, &|_, k, kp| {
        k <= max_level && kp <= max_level
    })
}

/// Same measure restricted to index triples `(n, k, k')` accepted by
/// `keep` (verification surface). No deficit check is applied.
pub fn work_distribution_quadratic_filtered<T: Real>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
    keep: &dyn Fn(usize, usize, usize) -> bool,
) -> Result<WorkDistribution<T>> {
    let raw = quadratic_raw_atoms(params, trunc, keep)?;
    WorkDistribution::from_raw(raw, T::infinity())
}

fn quadratic_raw_atoms<T: Real>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
    keep: &dyn Fn(usize, usize, usize) -> bool,
) -> Result<Vec<(T, T)>> {
    require_quadratic(params)?;
    let n_c = params.n_c()?;
    let n_m = params.n_m()?;
    let fact = LnFactorial::up_to(trunc.k_max);
    let half = T::lit(0.5);
    let prune = T::lit(1e-300);

    let mut raw = Vec::new();
    for n in 0..=trunc.n_max {
        let pn = thermal_weight(n, n_c);
        let s = manifold_scale(n, params);
        let zeta = zeta_n(n, params);
        for k in 0..=trunc.k_max {
            let pk = thermal_weight(k, n_m);
            let pnk = pn * pk;
            if pnk < prune {
                continue;
            }
            let mut kp = k % 2;
            while kp <= trunc.k_max {
                if keep(n, k, kp) {
                    let p = pnk * squeeze_overlap_cached(&fact, k, kp, zeta);
                    if p != T::zero() {
                        let w = params.omega_m
                            * (s * (T::from_index(kp) + half) - (T::from_index(k) + half));
                        raw.push((w, p));
                    }
                }
                kp += 2;
            }
        }
    }
    Ok(raw)
}

/// Closed-form mean, variance and skewness of the quadratic-quench work:
/// `<W> = kappa N_c (1+2N_m)`, `var = kappa^2 N_c (3+5N_c)(1+2N_m)^2`, and
/// the skewness (with `kt = kappa/omega_m`)
/// `gamma = [4 + 8N_c + kt (15 + 81N_c + 74N_c^2)(1+2N_m)^2]
///          / [kt sqrt(N_c) (3+5N_c)^{3/2} (1+2N_m)^2]`.
pub fn moments_quadratic<T: Real>(params: &PhysicalParams<T>) -> Result<Moments<T>> {
    require_quadratic(params)?;
    let n_c = params.n_c()?.value();
    let n_m = params.n_m()?.value();
    let kappa = params.coupling;
    let kt = params.coupling_ratio();
    let c = T::one() + T::lit(2.0) * n_m;
    let mean = kappa * n_c * c;
    let variance = kappa * kappa * n_c * (T::lit(3.0) + T::lit(5.0) * n_c) * c * c;
    let skewness = if n_c > T::zero() && kappa > T::zero() {
        let num = T::lit(4.0)
            + T::lit(8.0) * n_c
            + kt * (T::lit(15.0) + T::lit(81.0) * n_c + T::lit(74.0) * n_c * n_c) * c * c;
        let den = kt
            * n_c.sqrt()
            * (T::lit(3.0) + T::lit(5.0) * n_c).powf(T::lit(1.5))
            * c
            * c;
        Some(num / den)
    } else {
        None // degenerate: zero-photon initial state or zero quench
    };
    Ok(Moments {
        mean,
        variance,
        skewness,
        distribution_derived: false,
    })
}

/// Free-energy difference of the quadratic quench:
/// `dF = -(1/beta) { ln[ sum_n p_n cosech(s_n x) ] - ln sum_n p_n
/// + ln sinh(x) }` with `x = beta omega_m / 2` and
/// `s_n = sqrt(1 + 4 (kappa/omega_m) n)`, over the renormalized retained
/// photon range. Converges for every `kappa >= 0`.
pub fn delta_f_quadratic<T: Real>(params: &PhysicalParams<T>, trunc: &Truncation<T>) -> Result<T> {
    require_quadratic(params)?;
    if params.coupling == T::zero() {
        return Ok(T::zero());
    }
    let n_c = params.n_c()?;
    let beta = params.beta;
    let x = beta * params.omega_m / T::lit(2.0);
    let ln_sinh = |y: T| -> T {
        // ln sinh y = y + ln(1 - exp(-2y)) - ln 2, stable for all y > 0
        y + (-(-T::lit(2.0) * y).exp()).ln_1p() - T::lit(std::f64::consts::LN_2)
    };
    let mut max_ln = T::neg_infinity();
    let mut lns = Vec::with_capacity(trunc.n_max + 1);
    let mut norm = T::zero();
    for n in 0..=trunc.n_max {
        let p = thermal_weight(n, n_c);
        norm += p;
        let s = manifold_scale(n, params);
        let ln_term = if p > T::zero() {
            p.ln() - ln_sinh(s * x)
        } else {
            T::neg_infinity()
        };
        if ln_term > max_ln {
            max_ln = ln_term;
        }
        lns.push(ln_term);
    }
    let sum: T = lns
        .iter()
        .map(|&l| (l - max_ln).exp())
        .fold(T::zero(), |s, v| s + v);
    Ok(-(max_ln + sum.ln() - norm.ln() + ln_sinh(x)) / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truncation::{thermal_truncation, HardCaps};
    use approx::assert_relative_eq;

    fn params(n_c: f64, n_m: f64, kappa: f64) -> PhysicalParams<f64> {
        PhysicalParams::from_occupations(CouplingKind::Quadratic, n_c, n_m, kappa).unwrap()
    }

    fn trunc(p: &PhysicalParams<f64>) -> Truncation<f64> {
        thermal_truncation(p, 1e-12, HardCaps::default()).unwrap()
    }

    #[test]
    fn factors_of_the_uncoupled_manifold() {
        // n = 0: free rotation eta = omega_m u, no squeezing
        let p = params(0.1, 1.0, 0.3);
        for &u in &[0.0, 0.7, 2.0, 9.42, 30.0] {
            let f = squeeze_factors(0, u, &p);
            assert_relative_eq!(f.eta, u, max_relative = 1e-12, epsilon = 1e-12);
            assert_eq!(f.xi_abs, 0.0);
            assert_eq!(f.zeta, 0.0);
        }
        // kappa = 0: same for every n
        let p0 = PhysicalParams {
            coupling: 0.0,
            ..params(0.1, 1.0, 0.1)
        };
        for &u in &[0.4, 3.3] {
            let f = squeeze_factors(5, u, &p0);
            assert_relative_eq!(f.eta, u, max_relative = 1e-12);
            assert_eq!(f.xi_abs, 0.0);
            assert_eq!(f.zeta, 0.0);
        }
    }

    #[test]
    fn eta_is_continuous_and_pinned_at_zero() {
        let p = params(0.1, 1.0, 0.8);
        let mut prev = 0.0;
        let mut u = 0.0;
        let f0 = squeeze_factors(3, 0.0, &p);
        assert_eq!(f0.eta, 0.0);
        while u < 12.0 {
            u += 0.01;
            let f = squeeze_factors(3, u, &p);
            assert!(
                (f.eta - prev).abs() < 0.1,
                "eta jump at u={u}: {} -> {}",
                prev,
                f.eta
            );
            prev = f.eta;
        }
        // eta grows roughly like the dressed frequency
        assert!(prev > 12.0);
    }

    #[test]
    fn chi_normalization_and_no_quench() {
        let p = params(0.1, 1.0, 0.8);
        let t = trunc(&p);
        let v = chi_quadratic(0.0, &p, &t).unwrap();
        assert!((v.re - 1.0).abs() <= 1e-14 && v.im.abs() <= 1e-14);

        let p0 = PhysicalParams {
            coupling: 0.0,
            ..params(0.1, 1.0, 0.1)
        };
        let t0 = trunc(&p0);
        for &u in &[0.3, 4.0, 11.0] {
            let v = chi_quadratic(u, &p0, &t0).unwrap();
            assert!((v.re - 1.0).abs() <= 1e-12 && v.im.abs() <= 1e-12, "u={u}");
        }
    }

    #[test]
    fn chi_modulus_bounded() {
        let p = params(0.1, 1.0, 0.8);
        let t = trunc(&p);
        let grid = CharFunctionSample::uniform_grid(4.0 * std::f64::consts::PI, 257);
        let sample = chi_quadratic_grid(&grid, &p, &t).unwrap();
        for (u, v) in sample.u.iter().zip(&sample.values) {
            assert!(v.norm() <= 1.0 + 1e-12, "u={u}: {}", v.norm());
        }
    }

    #[test]
    fn chi_matches_distribution_fourier_sum() {
        let p = params(0.1, 1.0, 0.3);
        let t = trunc(&p);
        let d = work_distribution_quadratic(&p, &t).unwrap();
        let tol = 10.0 * d.deficit().max(1e-13);
        let grid = CharFunctionSample::uniform_grid(4.0 * std::f64::consts::PI, 64);
        let sample = chi_quadratic_grid(&grid, &p, &t).unwrap();
        for (u, v) in sample.u.iter().zip(&sample.values) {
            let direct = d.chi_at(*u);
            assert!(
                (direct - v).norm() <= tol,
                "u={u}: dev {} tol {tol}",
                (direct - v).norm()
            );
        }
    }

    #[test]
    fn no_quench_distribution_is_a_point_mass() {
        let p = PhysicalParams {
            coupling: 0.0,
            ..params(0.1, 1.0, 0.1)
        };
        let t = trunc(&p);
        let d = work_distribution_quadratic(&p, &t).unwrap();
        assert_eq!(d.atoms().len(), 1);
        assert_eq!(d.atoms()[0].work, 0.0);
        assert!((d.atoms()[0].prob - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn manifold_spacing_is_exact() {
        // adjacent-k' atoms within one manifold are spaced by
        // omega_m sqrt(1 + 4 kt n), exactly
        let p = params(0.05, 0.2, 0.7);
        for n in [1usize, 3] {
            let s = manifold_scale(n, &p);
            let w = |kp: usize| s * (kp as f64 + 0.5) - 0.5;
            assert_relative_eq!(w(4) - w(2), 2.0 * s, max_relative = 1e-14);
        }
    }

    #[test]
    fn closed_form_moments_match_distribution() {
        let p = params(0.1, 1.0, 0.1);
        let t = trunc(&p);
        let d = work_distribution_quadratic(&p, &t).unwrap();
        let dm = d.moments();
        let cm = moments_quadratic(&p).unwrap();
        assert_relative_eq!(dm.mean, cm.mean, max_relative = 1e-8);
        assert_relative_eq!(dm.variance, cm.variance, max_relative = 1e-8);
        assert_relative_eq!(
            dm.skewness.unwrap(),
            cm.skewness.unwrap(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn moments_degenerate_cases() {
        let p = PhysicalParams {
            coupling: 0.0,
            ..params(0.1, 1.0, 0.1)
        };
        let m = moments_quadratic(&p).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.0);
        assert!(m.skewness.is_none());
    }

    #[test]
    fn skewness_limits() {
        // N_m >> 1: gamma -> 5/sqrt(3 N_c) for N_c << 1
        let p = params(1e-3, 50.0, 1.0);
        let g = moments_quadratic(&p).unwrap().skewness.unwrap();
        let limit = 5.0 / (3.0 * 1e-3f64).sqrt();
        assert!((g / limit - 1.0).abs() < 0.05, "{g} vs {limit}");
        // and 74/(5 sqrt 5) for N_c >> 1
        let p = params(100.0, 50.0, 1.0);
        let g = moments_quadratic(&p).unwrap().skewness.unwrap();
        let limit = 74.0 / (5.0 * 5f64.sqrt());
        assert!((g / limit - 1.0).abs() < 0.02, "{g} vs {limit}");
    }

    #[test]
    fn delta_f_zero_without_quench() {
        let p = PhysicalParams {
            coupling: 0.0,
            ..params(0.1, 1.0, 0.1)
        };
        let t = trunc(&p);
        assert_eq!(delta_f_quadratic(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn mean_exceeds_delta_f() {
        // <W> >= dF (second law) and <W> >= 0 for kappa >= 0
        for &(nc, nm, kap) in &[(0.1, 1.0, 0.3), (0.5, 0.2, 0.9), (0.05, 3.0, 0.05)] {
            let p = params(nc, nm, kap);
            let t = trunc(&p);
            let m = moments_quadratic(&p).unwrap();
            let df = delta_f_quadratic(&p, &t).unwrap();
            assert!(m.mean >= 0.0);
            assert!(m.mean >= df, "mean {} < dF {df}", m.mean);
        }
    }
}
