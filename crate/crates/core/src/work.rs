//! Discrete work measures and sampled characteristic functions.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// One atom of the discrete work measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkAtom<T> {
    /// Work value in units of `hbar*omega_m`.
    pub work: T,
    pub prob: T,
}

/// Two work values closer than this (in `hbar*omega_m`) are merged into a
/// single atom: distinct index triples can collide on the work lattice and
/// downstream consumers need a measure, not a multiset.
pub const MERGE_TOL: f64 = 1e-9;

/// Discrete work measure: atoms sorted by strictly increasing work value
/// plus the recorded normalization deficit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkDistribution<T = f64> {
    atoms: Vec<WorkAtom<T>>,
    deficit: T,
}

/// Moments of a work distribution (or of closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    pub mean: T,
    pub variance: T,
    /// `None` when degenerate (zero-photon initial state or zero quench).
    pub skewness: Option<T>,
    /// True when the values came from a distribution sum rather than a
    /// closed form.
    pub distribution_derived: bool,
}

impl<T: Real> WorkDistribution<T> {
    /// Merge raw `(work, prob)` pairs on the lattice and record the deficit
    /// `1 - sum(prob)`. Fails when the deficit exceeds `tail_tol`.
    pub fn from_raw(mut raw: Vec<(T, T)>, tail_tol: T) -> Result<Self> {
        raw.retain(|&(_, p)| p != T::zero());
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite work value"));
        let tol = T::lit(MERGE_TOL);
        let mut atoms: Vec<WorkAtom<T>> = Vec::with_capacity(raw.len());
        for (w, p) in raw {
            match atoms.last_mut() {
                Some(last) if w - last.work < tol => {
                    // weighted position keeps the merged atom on the lattice
                    let total = last.prob + p;
                    if total > T::zero() {
                        last.work = (last.work * last.prob + w * p) / total;
                    }
                    last.prob = total;
                }
                _ => atoms.push(WorkAtom { work: w, prob: p }),
            }
        }
        let total: T = atoms.iter().map(|a| a.prob).fold(T::zero(), |s, p| s + p);
        let deficit = (T::one() - total).max(T::zero());
        if deficit > tail_tol {
            return Err(Error::Truncation {
                deficit: deficit.to_f64().unwrap_or(f64::NAN),
                tail_tol: tail_tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { atoms, deficit })
    }

    pub fn atoms(&self) -> &[WorkAtom<T>] {
        &self.atoms
    }

    /// Recorded normalization deficit `1 - sum(prob)`.
    pub fn deficit(&self) -> T {
        self.deficit
    }

    pub fn total_prob(&self) -> T {
        T::one() - self.deficit
    }

    /// Unnormalized sum `sum p W^r`.
    pub fn raw_moment(&self, r: u32) -> T {
        self.atoms
            .iter()
            .map(|a| a.prob * a.work.powi(r as i32))
            .fold(T::zero(), |s, x| s + x)
    }

    /// Mean, variance and skewness of the normalized measure.
    pub fn moments(&self) -> Moments<T> {
        let total = self.total_prob();
        if total <= T::zero() || self.atoms.is_empty() {
            return Moments {
                mean: T::zero(),
                variance: T::zero(),
                skewness: None,
                distribution_derived: true,
            };
        }
        let mean = self.raw_moment(1) / total;
        let mut m2 = T::zero();
        let mut m3 = T::zero();
        for a in &self.atoms {
            let d = a.work - mean;
            m2 += a.prob * d * d;
            m3 += a.prob * d * d * d;
        }
        m2 = m2 / total;
        m3 = m3 / total;
        let skewness = if m2 > T::zero() {
            Some(m3 / m2.powf(T::lit(1.5)))
        } else {
            None
        };
        Moments {
            mean,
            variance: m2,
            skewness,
            distribution_derived: true,
        }
    }

    /// `sum p exp(i u W)` (the characteristic function of the measure).
    pub fn chi_at(&self, u: T) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for a in &self.atoms {
            let phase = u * a.work;
            acc = acc + Complex::new(phase.cos(), phase.sin()) * a.prob;
        }
        acc
    }

    /// `sum p exp(-beta W)` (the Jarzynski average over the truncated
    /// measure).
    pub fn exp_beta_work(&self, beta: T) -> T {
        self.atoms
            .iter()
            .map(|a| a.prob * (-beta * a.work).exp())
            .fold(T::zero(), |s, x| s + x)
    }

    /// Support bounds `(min work, max work)`.
    pub fn support(&self) -> Option<(T, T)> {
        match (self.atoms.first(), self.atoms.last()) {
            (Some(a), Some(b)) => Some((a.work, b.work)),
            _ => None,
        }
    }
}

/// Complex characteristic function sampled on a grid of the time-like
/// variable `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharFunctionSample<T> {
    pub u: Vec<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> CharFunctionSample<T> {
    /// Uniform grid over `[0, span]` with `points` samples (the default
    /// grid spans `[0, 4 pi / omega_m]` at 512 points).
    pub fn uniform_grid(span: T, points: usize) -> Vec<T> {
        assert!(points >= 2, "need at least two grid points");
        let step = span / T::from_index(points - 1);
        (0..points).map(|i| T::from_index(i) * step).collect()
    }
}
