//! Quench configuration and thermal statistics.
//!
//! Internal unit convention: `hbar = 1` and the mechanical frequency sets
//! the scale (`omega_m = 1` by default). All energies and work values are
//! in units of `hbar*omega_m`, all times and `u` arguments in `1/omega_m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Which coupling is quenched on at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// Radiation pressure: interaction `g * a'a (b + b')`.
    Linear,
    /// Position squared: interaction `kappa * a'a (b + b')^2`.
    Quadratic,
}

/// Sudden-quench configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams<T = f64> {
    /// Cavity frequency in units of `omega_m`.
    pub omega_c: T,
    /// Mechanical frequency; the internal unit, normally 1.
    pub omega_m: T,
    /// Coupling strength (`g` or `kappa` depending on `coupling_kind`),
    /// in units of `omega_m`.
    pub coupling: T,
    pub coupling_kind: CouplingKind,
    /// Inverse temperature in units of `1/(hbar*omega_m)`.
    pub beta: T,
    /// Mechanical drive amplitude `E` (dimensionless); zero for the plain
    /// quench, nonzero selects the displaced-oscillator variant.
    pub displacement: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn linear(omega_c: T, g: T, beta: T) -> Self {
        Self {
            omega_c,
            omega_m: T::one(),
            coupling: g,
            coupling_kind: CouplingKind::Linear,
            beta,
            displacement: T::zero(),
        }
    }

    pub fn quadratic(omega_c: T, kappa: T, beta: T) -> Self {
        Self {
            omega_c,
            omega_m: T::one(),
            coupling: kappa,
            coupling_kind: CouplingKind::Quadratic,
            beta,
            displacement: T::zero(),
        }
    }

    /// Build parameters that realize the requested thermal occupations
    /// exactly: `beta` from `N_m` (at `omega_m = 1`) and `omega_c` from
    /// `N_c`.
    pub fn from_occupations(kind: CouplingKind, n_c: T, n_m: T, coupling: T) -> Result<Self> {
        if !(n_c > T::zero()) || !(n_m > T::zero()) {
            return Err(Error::InvalidParams(
                "occupations must be positive to invert for (beta, omega_c)".into(),
            ));
        }
        let beta = (T::one() + T::one() / n_m).ln();
        let omega_c = (T::one() + T::one() / n_c).ln() / beta;
        let p = Self {
            omega_c,
            omega_m: T::one(),
            coupling,
            coupling_kind: kind,
            beta,
            displacement: T::zero(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_displacement(mut self, e: T) -> Self {
        self.displacement = e;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > T::zero() && self.omega_c.is_finite()) {
            return Err(Error::InvalidParams("omega_c must be > 0".into()));
        }
        if !(self.omega_m > T::zero() && self.omega_m.is_finite()) {
            return Err(Error::InvalidParams("omega_m must be > 0".into()));
        }
        if !(self.beta > T::zero() && self.beta.is_finite()) {
            return Err(Error::InvalidParams("beta must be > 0".into()));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidParams("coupling must be finite".into()));
        }
        if self.coupling_kind == CouplingKind::Quadratic && self.coupling < T::zero() {
            return Err(Error::InvalidParams(
                "quadratic coupling must be non-negative".into(),
            ));
        }
        if !self.displacement.is_finite() {
            return Err(Error::InvalidParams("displacement must be finite".into()));
        }
        if self.coupling_kind == CouplingKind::Quadratic && self.displacement != T::zero() {
            return Err(Error::InvalidParams(
                "the displaced-oscillator variant exists for the linear coupling only".into(),
            ));
        }
        Ok(())
    }

    /// Mean thermal photon number of the cavity mode.
    pub fn n_c(&self) -> Result<ThermalOccupation<T>> {
        thermal_occupation(self.omega_c, self.beta)
    }

    /// Mean thermal phonon number of the mechanical mode.
    pub fn n_m(&self) -> Result<ThermalOccupation<T>> {
        thermal_occupation(self.omega_m, self.beta)
    }

    /// Dimensionless quench parameter `coupling / omega_m`.
    pub fn coupling_ratio(&self) -> T {
        self.coupling / self.omega_m
    }
}

/// Mean excitation number of a bosonic mode in thermal equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ThermalOccupation<T>(T);

impl<T: Real> ThermalOccupation<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParams(format!(
                "thermal occupation must be finite and >= 0, got {value}"
            )))
        }
    }

    pub fn value(&self) -> T {
        self.0
    }
}

/// Bose occupation `1 / (exp(beta*omega) - 1)`.
///
/// Fails when `beta*omega` underflows so far that the occupation is not
/// finite (the cutoff machinery could not cope with such a state anyway).
pub fn thermal_occupation<T: Real>(omega: T, beta: T) -> Result<ThermalOccupation<T>> {
    assert!(omega > T::zero() && beta > T::zero(), "omega, beta > 0");
    let x = beta * omega;
    let denom = x.exp_m1();
    if denom <= T::zero() {
        return Err(Error::TemperatureTooHigh {
            beta_omega: x.to_f64().unwrap_or(0.0),
        });
    }
    let n = denom.recip();
    if !n.is_finite() {
        return Err(Error::TemperatureTooHigh {
            beta_omega: x.to_f64().unwrap_or(0.0),
        });
    }
    ThermalOccupation::new(n)
}

/// Thermal (geometric) weight `p_n = N^n / (1+N)^(n+1)`.
pub fn thermal_weight<T: Real>(n: usize, occ: ThermalOccupation<T>) -> T {
    let nv = occ.value();
    if nv == T::zero() {
        return if n == 0 { T::one() } else { T::zero() };
    }
    // log-space keeps this exact down to the underflow floor for n in the
    // thousands
    let ln_p = T::from_index(n) * nv.ln() - T::from_index(n + 1) * nv.ln_1p();
    ln_p.exp()
}

/// Natural log of `thermal_weight`, for assembling products in log space.
pub fn ln_thermal_weight<T: Real>(n: usize, occ: ThermalOccupation<T>) -> T {
    let nv = occ.value();
    if nv == T::zero() {
        return if n == 0 { T::zero() } else { T::neg_infinity() };
    }
    T::from_index(n) * nv.ln() - T::from_index(n + 1) * nv.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn occupation_frozen_values() {
        // beta -> infinity limit, probed at beta = 700
        let n = thermal_occupation(1.0f64, 700.0).unwrap();
        assert!(n.value() >= 0.0 && n.value() < 1e-300);

        // e^{ln 2} - 1 = 1
        let n = thermal_occupation(1.0f64, std::f64::consts::LN_2).unwrap();
        assert_relative_eq!(n.value(), 1.0, max_relative = 1e-14);

        // direct scalar evaluation, cross-checked against 40-digit
        // arithmetic: 1/(e^{0.5} - 1) = 1.5414940825367982841...
        let n = thermal_occupation(500.0f64, 1e-3).unwrap();
        assert_relative_eq!(n.value(), 1.541_494_082_536_798_3, max_relative = 1e-15);
        assert_relative_eq!(n.value(), (0.5f64).exp_m1().recip(), max_relative = 1e-15);
    }

    #[test]
    fn occupation_guard_fires_on_underflow() {
        let err = thermal_occupation(1e-300f64, 1e-300).unwrap_err();
        assert!(matches!(err, Error::TemperatureTooHigh { .. }));
    }

    #[test]
    fn thermal_weight_examples() {
        let zero = ThermalOccupation::new(0.0f64).unwrap();
        assert_eq!(thermal_weight(0, zero), 1.0);
        assert_eq!(thermal_weight(3, zero), 0.0);

        let one = ThermalOccupation::new(1.0f64).unwrap();
        assert_relative_eq!(thermal_weight(1, one), 0.25, max_relative = 1e-15);

        // independent geometric evaluation: p_n = q^n (1 - q), q = N/(1+N)
        let occ = ThermalOccupation::new(0.1f64).unwrap();
        let q: f64 = 0.1 / 1.1;
        let expect = q.powi(5) * (1.0 - q);
        assert_relative_eq!(thermal_weight(5, occ), expect, max_relative = 1e-13);
    }

    #[test]
    fn thermal_weights_sum_geometrically() {
        // sum_{n<=M} p_n = 1 - q^(M+1), the closed-form geometric check
        let occ = ThermalOccupation::new(2.5f64).unwrap();
        let q: f64 = 2.5 / 3.5;
        for m in [0usize, 3, 17] {
            let sum: f64 = (0..=m).map(|n| thermal_weight(n, occ)).sum();
            assert_relative_eq!(sum, 1.0 - q.powi(m as i32 + 1), max_relative = 1e-13);
        }
    }

    #[test]
    fn occupation_roundtrip_through_params() {
        let p =
            PhysicalParams::from_occupations(CouplingKind::Linear, 0.1f64, 1.0, 0.3).unwrap();
        assert_relative_eq!(p.n_c().unwrap().value(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(p.n_m().unwrap().value(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_input() {
        let mut p = PhysicalParams::linear(500.0f64, 0.5, 1e-3);
        assert!(p.validate().is_ok());
        p.beta = -1.0;
        assert!(p.validate().is_err());

        let q = PhysicalParams::quadratic(500.0f64, -0.1, 1e-3);
        assert!(q.validate().is_err());
    }
}
