//! Cutoff selection for every series summation.
//!
//! Thermal tails fix the raw photon/phonon cutoffs; the phonon cutoff is
//! then inflated by the support spread of the displacement or squeeze
//! kernel. For the linear coupling, the free-energy series must still be
//! decreasing at the photon cutoff, otherwise the post-quench spectrum is
//! effectively unbounded from below and the sum has no meaningful value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{CouplingKind, PhysicalParams, ThermalOccupation};
use crate::real::Real;

/// Hard dimension caps; exceeding them is an explicit error, never a
/// silent truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardCaps {
    pub n: usize,
    pub k: usize,
}

impl Default for HardCaps {
    fn default() -> Self {
        Self { n: 4096, k: 8192 }
    }
}

impl HardCaps {
    /// Lower both caps to `limit` (used by constrained environments).
    pub fn clamped(limit: usize) -> Self {
        let d = Self::default();
        Self {
            n: d.n.min(limit),
            k: d.k.min(limit),
        }
    }
}

/// Series cutoffs: photon index `n <= n_max`, phonon index `k <= k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation<T = f64> {
    pub n_max: usize,
    pub k_max: usize,
    /// Acceptable probability mass outside the cutoffs.
    pub tail_tol: T,
}

impl<T: Real> Truncation<T> {
    pub fn new(n_max: usize, k_max: usize, tail_tol: T) -> Result<Self> {
        if !(tail_tol > T::zero() && tail_tol < T::one()) {
            return Err(Error::InvalidParams(format!(
                "tail_tol must lie in (0, 1), got {tail_tol}"
            )));
        }
        Ok(Self {
            n_max,
            k_max,
            tail_tol,
        })
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.k_max + 1)
    }
}

/// Smallest cutoff `M` with thermal tail mass `<= tail_tol`,
/// i.e. `(N/(1+N))^(M+1) <= tail_tol`.
pub fn thermal_cutoff<T: Real>(occ: ThermalOccupation<T>, tail_tol: T, cap: usize) -> Result<usize> {
    let n = occ.value();
    if n == T::zero() {
        return Ok(0);
    }
    let ln_q = n.ln() - n.ln_1p(); // < 0
    // smallest M with (M+1) * ln q <= ln tol
    let needed = (tail_tol.ln() / ln_q).ceil();
    let m = needed.to_usize().unwrap_or(usize::MAX).saturating_sub(1);
    if m > cap {
        return Err(Error::DimensionCap {
            axis: "phonon/photon",
            required: m,
            cap,
        });
    }
    Ok(m)
}

/// Photon cutoff at a quarter of the tail budget (the distribution deficit
/// collects photon tail + phonon tail + kernel-spread loss, and must stay
/// below the full `tail_tol`).
fn photon_cutoff<T: Real>(params: &PhysicalParams<T>, tail_tol: T, caps: HardCaps) -> Result<usize> {
    thermal_cutoff(params.n_c()?, tail_tol / T::lit(4.0), caps.n).map_err(|e| match e {
        Error::DimensionCap { required, cap, .. } => Error::DimensionCap {
            axis: "photon",
            required,
            cap,
        },
        other => other,
    })
}

/// Phonon cutoff (quarter budget, see [`photon_cutoff`]) inflated by the
/// kernel support spread.
fn phonon_cutoff<T: Real>(
    params: &PhysicalParams<T>,
    n_th: usize,
    tail_tol: T,
    caps: HardCaps,
) -> Result<usize> {
    let k_th = thermal_cutoff(params.n_m()?, tail_tol / T::lit(4.0), caps.k).map_err(|e| match e {
        Error::DimensionCap { required, cap, .. } => Error::DimensionCap {
            axis: "phonon",
            required,
            cap,
        },
        other => other,
    })?;
    let ratio = params.coupling_ratio();
    let k_max = if ratio == T::zero() && params.displacement == T::zero() {
        // identity kernel, no spread
        k_th
    } else {
        match params.coupling_kind {
            CouplingKind::Linear => {
                // displacement shifts the support by ~lambda^2 = (g n/omega_m)^2
                let infl = (T::lit(10.0) * ratio.abs() * T::from_index(n_th) + T::lit(10.0))
                    .ceil()
                    .to_usize()
                    .unwrap_or(usize::MAX);
                k_th.saturating_add(infl)
            }
            CouplingKind::Quadratic => {
                // squeezing spreads the support by e^{2 zeta_nmax} = sqrt(1+4 kt n),
                // with a pad sized from the geometric tail ratio tanh^2(zeta)
                let spread = (T::one() + T::lit(4.0) * ratio * T::from_index(n_th)).sqrt();
                let zeta = spread.ln() / T::lit(2.0);
                (T::from_index(k_th) * spread)
                    .ceil()
                    .to_usize()
                    .unwrap_or(usize::MAX)
                    .saturating_add(squeeze_pad(zeta))
            }
        }
    };
    if k_max > caps.k {
        return Err(Error::DimensionCap {
            axis: "phonon",
            required: k_max,
            cap: caps.k,
        });
    }
    Ok(k_max)
}

/// Extra phonon levels needed for the squeeze-kernel tail (ratio
/// `tanh^2(zeta)` per two levels) to decay below ~1e-20.
pub(crate) fn squeeze_pad<T: Real>(zeta: T) -> usize {
    let tr = zeta.tanh() * zeta.tanh();
    if tr <= T::zero() {
        return 10;
    }
    let per_pair = -tr.ln();
    let pairs = (T::lit(46.0) / per_pair.max(T::lit(0.05)))
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX);
    10 + 2 * pairs
}

/// Thermal-tail truncation plus kernel-spread inflation of the phonon
/// cutoff. Does not apply the linear free-energy monotonicity guard; use
/// [`choose_truncation`] where the free-energy series is involved.
pub fn thermal_truncation<T: Real>(
    params: &PhysicalParams<T>,
    tail_tol: T,
    caps: HardCaps,
) -> Result<Truncation<T>> {
    params.validate()?;
    if !(tail_tol > T::zero() && tail_tol < T::one()) {
        return Err(Error::InvalidParams(format!(
            "tail_tol must lie in (0, 1), got {tail_tol}"
        )));
    }
    let n_th = photon_cutoff(params, tail_tol, caps)?;
    let k_max = phonon_cutoff(params, n_th, tail_tol, caps)?;
    Truncation::new(n_th, k_max, tail_tol)
}

/// Largest photon index at which the linear free-energy series is still
/// decreasing, `None` when every index qualifies (g = 0).
///
/// The series term is `p_n exp(beta g^2 n^2/omega_m - 2 beta g n E)`; the
/// term ratio exceeds 1 once `g^2 (2n+1)/omega_m - 2 g E >= omega_c`.
fn monotone_limit<T: Real>(params: &PhysicalParams<T>) -> Option<usize> {
    let g = params.coupling;
    if g == T::zero() {
        return None;
    }
    let lhs = |n: T| {
        g * g * (T::lit(2.0) * n + T::one()) / params.omega_m
            - T::lit(2.0) * g * params.displacement
    };
    if lhs(T::zero()) >= params.omega_c {
        return Some(0);
    }
    // largest n with lhs(n) < omega_c
    let bound = ((params.omega_c + T::lit(2.0) * g * params.displacement) * params.omega_m
        / (g * g)
        - T::one())
        / T::lit(2.0);
    let mut n = bound.floor().to_usize().unwrap_or(usize::MAX);
    // guard against floating-point edge cases on the boundary
    while n > 0 && lhs(T::from_index(n)) >= params.omega_c {
        n -= 1;
    }
    Some(n.saturating_add(1))
}

/// Smallest cutoffs meeting the thermal-tail requirement, with the phonon
/// cutoff inflated for kernel spread. For the linear coupling this
/// additionally requires the free-energy series to be decreasing at
/// `n_max`; when no such cutoff exists below the cap the configuration is
/// in the unbounded-spectrum regime and an error is returned (checked
/// before the phonon cap, the guard is the more fundamental refusal).
pub fn choose_truncation<T: Real>(
    params: &PhysicalParams<T>,
    tail_tol: T,
    caps: HardCaps,
) -> Result<Truncation<T>> {
    params.validate()?;
    if !(tail_tol > T::zero() && tail_tol < T::one()) {
        return Err(Error::InvalidParams(format!(
            "tail_tol must lie in (0, 1), got {tail_tol}"
        )));
    }
    let n_th = photon_cutoff(params, tail_tol, caps)?;
    guard_unbounded(params, n_th)?;
    let k_max = phonon_cutoff(params, n_th, tail_tol, caps)?;
    Truncation::new(n_th, k_max, tail_tol)
}

/// Fail with the unbounded-spectrum error when the linear free-energy
/// series is no longer decreasing at the required photon cutoff.
pub fn guard_unbounded<T: Real>(params: &PhysicalParams<T>, n_max: usize) -> Result<()> {
    if params.coupling_kind == CouplingKind::Linear {
        if let Some(limit) = monotone_limit(params) {
            if n_max >= limit {
                return Err(Error::UnboundedSpectrum {
                    required_n_max: n_max,
                    monotone_limit: limit,
                });
            }
        }
    }
    Ok(())
}

/// A truncation resolved against the caps and a cost budget.
///
/// The photon side is always exact (it controls every free-energy series);
/// when the phonon side cannot fit the caps or the enumeration budget even
/// after relaxing the tail tolerance, the distribution is marked
/// infeasible and `k_max` is pinned at the cap (free-energy and
/// characteristic-function work never reads it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTruncation<T> {
    pub trunc: Truncation<T>,
    /// Tail tolerance actually achieved by the phonon side.
    pub effective_tail: T,
    /// Whether enumerating the work distribution is within caps and budget.
    pub distribution_feasible: bool,
}

/// Atom-enumeration budget: `(n_max+1) (k_max+1)^2` capped, and a hard
/// phonon ceiling (each atom costs up to `O(k)` kernel terms).
pub fn distribution_cost_ok<T: Real>(trunc: &Truncation<T>) -> bool {
    let n = (trunc.n_max + 1) as f64;
    let k = (trunc.k_max + 1) as f64;
    trunc.k_max <= 2048 && n * k * k <= 3.0e8
}

/// Resolve cutoffs for a full summary run: exact photon side (optionally
/// guarded for the linear free-energy series), phonon side relaxed through
/// `tail -> 1e3 * tail` steps until the distribution fits, or marked
/// infeasible.
pub fn resolve_truncation<T: Real>(
    params: &PhysicalParams<T>,
    tail_tol: T,
    caps: HardCaps,
    guard: bool,
) -> Result<ResolvedTruncation<T>> {
    params.validate()?;
    let n_th = photon_cutoff(params, tail_tol, caps)?;
    if guard {
        guard_unbounded(params, n_th)?;
    }
    let mut t = tail_tol;
    while t <= T::lit(2e-3) {
        if let Ok(k_max) = phonon_cutoff(params, n_th, t, caps) {
            let trunc = Truncation::new(n_th, k_max, t)?;
            if distribution_cost_ok(&trunc) {
                return Ok(ResolvedTruncation {
                    trunc,
                    effective_tail: t,
                    distribution_feasible: true,
                });
            }
        }
        t = t * T::lit(1000.0);
    }
    Ok(ResolvedTruncation {
        trunc: Truncation::new(n_th, caps.k, tail_tol)?,
        effective_tail: tail_tol,
        distribution_feasible: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::thermal_weight;

    fn direct_scan(n: f64, tol: f64) -> usize {
        let occ = ThermalOccupation::new(n).unwrap();
        let mut acc = 0.0;
        for m in 0..100_000 {
            acc += thermal_weight(m, occ);
            if 1.0 - acc <= tol {
                return m;
            }
        }
        panic!("scan did not converge");
    }

    #[test]
    fn ground_state_needs_no_levels() {
        // beta so large both occupations underflow to ~0, g = 0
        let p = PhysicalParams::linear(500.0f64, 0.0, 800.0);
        let t = thermal_truncation(&p, 1e-12, HardCaps::default()).unwrap();
        assert_eq!(t.n_max, 0);
        assert_eq!(t.k_max, 0);
    }

    #[test]
    fn inflation_follows_the_kernel_spread_rule() {
        let p = PhysicalParams::from_occupations(CouplingKind::Linear, 0.1f64, 1.0, 0.1).unwrap();
        let t = thermal_truncation(&p, 1e-12, HardCaps::default()).unwrap();
        // per-axis budget is a quarter of the total tail tolerance
        let n_scan = direct_scan(0.1, 0.25e-12);
        let k_scan = direct_scan(1.0, 0.25e-12);
        assert_eq!(t.n_max, n_scan);
        let infl = (10.0 * 0.1 * n_scan as f64 + 10.0).ceil() as usize;
        assert_eq!(t.k_max, k_scan + infl);
    }

    #[test]
    fn cutoffs_match_direct_cumulative_scan() {
        for &(occ, tol) in &[(0.1f64, 1e-12), (1.0, 1e-12), (2.7, 1e-9), (999.5, 1e-6)] {
            let o = ThermalOccupation::new(occ).unwrap();
            assert_eq!(
                thermal_cutoff(o, tol, 1 << 20).unwrap(),
                direct_scan(occ, tol),
                "occ={occ} tol={tol}"
            );
        }
    }

    #[test]
    fn figure_regime_is_accepted() {
        // omega_c = 500, g = 0.5, beta = 1e-3: g^2 (2n+1) < omega_c holds
        // for every retained n, so the free-energy series is usable even
        // though the phonon side (N_m ~ 1000) cannot fit the caps
        let p = PhysicalParams::linear(500.0f64, 0.5, 1e-3);
        let r = resolve_truncation(&p, 1e-12, HardCaps::default(), true).unwrap();
        assert!(!r.distribution_feasible);
        for n in 0..=r.trunc.n_max {
            assert!(0.25 * (2.0 * n as f64 + 1.0) < 500.0);
        }
        let nc = p.n_c().unwrap();
        assert_eq!(r.trunc.n_max, thermal_cutoff(nc, 0.25e-12, 4096).unwrap());

        // at a temperature where phonons fit, choose_truncation succeeds in
        // full
        let p2 = PhysicalParams::linear(500.0f64, 0.5, 0.5);
        let t2 = choose_truncation(&p2, 1e-12, HardCaps::default()).unwrap();
        assert!(t2.k_max <= 8192);
    }

    #[test]
    fn divergent_regime_is_refused() {
        // g = 1.2, omega_c = 100 at the default temperature: the thermal
        // tail needs far more photons than the monotone window allows
        let p = PhysicalParams::linear(100.0f64, 1.2, 1e-3);
        let err = choose_truncation(&p, 1e-12, HardCaps::default()).unwrap_err();
        assert!(matches!(err, Error::UnboundedSpectrum { .. }), "{err:?}");
    }

    #[test]
    fn quadratic_never_hits_the_monotone_guard() {
        let p = PhysicalParams::quadratic(100.0f64, 1.2, 1e-3);
        // the phonon side needs very generous caps at this temperature, but
        // no divergence guard fires
        let caps = HardCaps {
            n: 1 << 20,
            k: 1 << 20,
        };
        assert!(choose_truncation(&p, 1e-9, caps).is_ok());
        // strong coupling, modest temperature: fully within default caps
        let p2 = PhysicalParams::quadratic(100.0f64, 1.2, 0.3);
        assert!(choose_truncation(&p2, 1e-9, HardCaps::default()).is_ok());
    }

    #[test]
    fn caps_are_enforced() {
        let p = PhysicalParams::linear(500.0f64, 0.1, 1e-6);
        let err = thermal_truncation(&p, 1e-12, HardCaps::clamped(64)).unwrap_err();
        assert!(matches!(err, Error::DimensionCap { .. }));
    }
}
