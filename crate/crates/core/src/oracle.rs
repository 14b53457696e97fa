//! Brute-force verification in the bare Fock basis.
//!
//! Both post-quench Hamiltonians conserve the photon number, so every
//! operator here is block diagonal over photon manifolds: blocks are built
//! from truncated ladder operators, diagonalized densely, and the
//! two-point-measurement protocol is executed literally on the spectra.
//! Truncation artifacts are confined to the top phonon levels; comparisons
//! against closed forms exclude that window.

use nalgebra::{DMatrix, RealField, SymmetricEigen};
use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::params::{thermal_weight, CouplingKind, PhysicalParams};
use crate::real::Real;
use crate::special::{laguerre_ln, LnFactorial};
use crate::truncation::Truncation;
use crate::work::WorkDistribution;

// `T: Real + RealField` pulls in two trait families with overlapping
// method names; scalar math goes through `Float` explicitly.
#[inline]
fn fexp<T: Real>(x: T) -> T {
    Float::exp(x)
}
#[inline]
fn fabs<T: Real>(x: T) -> T {
    Float::abs(x)
}

/// Dense operator over the product basis `|n> (x) |k>`, row-major with the
/// photon index outer and the phonon index inner.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator<T: Real + RealField> {
    dim_photon: usize,
    dim_phonon: usize,
    entries: DMatrix<Complex<T>>,
}

impl<T: Real + RealField> TruncatedOperator<T> {
    pub fn dim_photon(&self) -> usize {
        self.dim_photon
    }

    pub fn dim_phonon(&self) -> usize {
        self.dim_phonon
    }

    pub fn dim(&self) -> usize {
        self.dim_photon * self.dim_phonon
    }

    pub fn entries(&self) -> &DMatrix<Complex<T>> {
        &self.entries
    }

    fn from_blocks(dim_photon: usize, dim_phonon: usize, blocks: Vec<DMatrix<Complex<T>>>) -> Self {
        let dim = dim_photon * dim_phonon;
        let mut entries = DMatrix::zeros(dim, dim);
        for (n, block) in blocks.iter().enumerate() {
            let off = n * dim_phonon;
            for i in 0..dim_phonon {
                for j in 0..dim_phonon {
                    entries[(off + i, off + j)] = block[(i, j)];
                }
            }
        }
        Self {
            dim_photon,
            dim_phonon,
            entries,
        }
    }

    /// The `(n, n)` photon-diagonal block.
    pub fn photon_block(&self, n: usize) -> DMatrix<Complex<T>> {
        let off = n * self.dim_phonon;
        let mut block = DMatrix::zeros(self.dim_phonon, self.dim_phonon);
        for i in 0..self.dim_phonon {
            for j in 0..self.dim_phonon {
                block[(i, j)] = self.entries[(off + i, off + j)];
            }
        }
        block
    }

    /// Max-entry deviation from Hermiticity, `max |H - H'|`.
    pub fn hermiticity_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Largest entry magnitude outside the photon-diagonal blocks
    /// (zero iff the operator commutes with the photon number).
    pub fn photon_offblock_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if i / self.dim_phonon != j / self.dim_phonon {
                    let d = self.entries[(i, j)].norm();
                    if d > worst {
                        worst = d;
                    }
                }
            }
        }
        worst
    }

    pub fn trace(&self) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.dim() {
            acc += self.entries[(i, i)];
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let d = (self.entries[(i, j)] - other.entries[(i, j)]).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Eigenvalues of a Hermitian operator, via the real symmetric
    /// embedding `[[Re, -Im], [Im, Re]]` (each eigenvalue appears twice).
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<T>> {
        let dim = self.dim();
        let mut embed = DMatrix::<T>::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = self.entries[(i, j)];
                embed[(i, j)] = z.re;
                embed[(dim + i, dim + j)] = z.re;
                embed[(i, dim + j)] = -z.im;
                embed[(dim + i, j)] = z.im;
            }
        }
        let eig = SymmetricEigen::try_new(embed, Float::epsilon(), 100_000)
            .ok_or(Error::EigenFailure { block: usize::MAX })?;
        let mut vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("non-finite eigenvalue"));
        // the embedding doubles every eigenvalue; keep one of each pair
        Ok(vals.into_iter().step_by(2).collect())
    }

    /// Trace distance `(1/2) sum |eig(self - other)|` between Hermitian
    /// operators.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        let diff = Self {
            dim_photon: self.dim_photon,
            dim_phonon: self.dim_phonon,
            entries: &self.entries - &other.entries,
        };
        let vals = diff.hermitian_eigenvalues()?;
        let sum = vals.iter().fold(T::zero(), |s, &v| s + fabs(v));
        Ok(sum / T::lit(2.0))
    }
}

/// Annihilation operator on a truncated phonon space.
fn ladder<T: Real + RealField>(dim: usize) -> DMatrix<T> {
    let mut b = DMatrix::zeros(dim, dim);
    for k in 1..dim {
        b[(k - 1, k)] = Float::sqrt(T::from_index(k));
    }
    b
}

/// Mechanical block of the pre-quench Hamiltonian (with the drive term of
/// the displaced variant). Real symmetric.
fn mech_initial_block<T: Real + RealField>(params: &PhysicalParams<T>, k_max: usize) -> DMatrix<T> {
    let dim = k_max + 1;
    let b = ladder::<T>(dim);
    let x = &b + &b.transpose();
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        h[(k, k)] = params.omega_m * (T::from_index(k) + T::lit(0.5));
    }
    if params.displacement != T::zero() {
        h -= x * (params.displacement * params.omega_m);
    }
    h
}

/// Mechanical block of the post-quench Hamiltonian in the n-photon
/// manifold, assembled from truncated ladder operators. Real symmetric.
fn mech_final_block<T: Real + RealField>(
    params: &PhysicalParams<T>,
    n: usize,
    k_max: usize,
) -> DMatrix<T> {
    let dim = k_max + 1;
    let b = ladder::<T>(dim);
    let x = &b + &b.transpose();
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        h[(k, k)] = params.omega_m * (T::from_index(k) + T::lit(0.5));
    }
    let nf = T::from_index(n);
    match params.coupling_kind {
        CouplingKind::Linear => {
            let amp = params.coupling * nf - params.displacement * params.omega_m;
            if amp != T::zero() {
                h += &x * amp;
            }
        }
        CouplingKind::Quadratic => {
            if params.coupling != T::zero() && n > 0 {
                h += (&x * &x) * (params.coupling * nf);
            }
        }
    }
    h
}

/// Assemble the full pre- and post-quench Hamiltonians over the product
/// basis.
pub fn build_hamiltonians<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<(TruncatedOperator<T>, TruncatedOperator<T>)> {
    params.validate()?;
    let (np, kp) = (trunc.n_max + 1, trunc.k_max + 1);
    let complexify = |m: &DMatrix<T>, shift: T| {
        let mut out = DMatrix::<Complex<T>>::zeros(kp, kp);
        for i in 0..kp {
            for j in 0..kp {
                out[(i, j)] = Complex::new(m[(i, j)], T::zero());
            }
            out[(i, i)] += Complex::new(shift, T::zero());
        }
        out
    };
    let hi_mech = mech_initial_block(params, trunc.k_max);
    let mut hi_blocks = Vec::with_capacity(np);
    let mut hf_blocks = Vec::with_capacity(np);
    for n in 0..np {
        let photon = params.omega_c * T::from_index(n);
        hi_blocks.push(complexify(&hi_mech, photon));
        hf_blocks.push(complexify(&mech_final_block(params, n, trunc.k_max), photon));
    }
    Ok((
        TruncatedOperator::from_blocks(np, kp, hi_blocks),
        TruncatedOperator::from_blocks(np, kp, hf_blocks),
    ))
}

/// Spectrum of one photon block: energies ascending (including the photon
/// part `omega_c n`), eigenvectors as columns in matching order.
struct BlockEigen<T: Real + RealField> {
    energies: Vec<T>,
    vectors: DMatrix<T>,
}

fn eigen_sorted<T: Real + RealField>(
    block: DMatrix<T>,
    photon_energy: T,
    block_idx: usize,
) -> Result<BlockEigen<T>> {
    let dim = block.nrows();
    let eig = SymmetricEigen::try_new(block, Float::epsilon(), 100_000)
        .ok_or(Error::EigenFailure { block: block_idx })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("non-finite eigenvalue")
    });
    let mut energies = Vec::with_capacity(dim);
    let mut vectors = DMatrix::zeros(dim, dim);
    for (new, &old) in order.iter().enumerate() {
        energies.push(eig.eigenvalues[old] + photon_energy);
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    Ok(BlockEigen { energies, vectors })
}

/// Pre-quench spectra per manifold. Without displacement the bare basis is
/// exact by construction; the eigensolver only runs for the displaced
/// variant.
fn initial_eigens<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<Vec<BlockEigen<T>>> {
    let dim = trunc.k_max + 1;
    let mut out = Vec::with_capacity(trunc.n_max + 1);
    for n in 0..=trunc.n_max {
        let photon = params.omega_c * T::from_index(n);
        if params.displacement == T::zero() {
            let energies = (0..dim)
                .map(|k| photon + params.omega_m * (T::from_index(k) + T::lit(0.5)))
                .collect();
            out.push(BlockEigen {
                energies,
                vectors: DMatrix::identity(dim, dim),
            });
        } else {
            out.push(eigen_sorted(
                mech_initial_block(params, trunc.k_max),
                photon,
                n,
            )?);
        }
    }
    Ok(out)
}

fn final_eigens<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<Vec<BlockEigen<T>>> {
    (0..=trunc.n_max)
        .map(|n| {
            eigen_sorted(
                mech_final_block(params, n, trunc.k_max),
                params.omega_c * T::from_index(n),
                n,
            )
        })
        .collect()
}

/// One realization channel of the two-point measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointOutcome<T> {
    /// `(n, k)` of the first projective measurement.
    pub initial_index: (usize, usize),
    /// `(n', k')` of the second; `n' = n` (photon number is conserved).
    pub final_index: (usize, usize),
    pub work: T,
    pub probability: T,
}

/// Enumerate the two-point measurement protocol with the sudden quench
/// (`U = 1`): `p = p_n p_k |<v'_{n,j} | n,k>|^2`,
/// `W = E'_{n,j} - E_{n,k}`. Outcomes are ordered by `(n, k, j)`.
pub fn two_point_outcomes<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<Vec<TwoPointOutcome<T>>> {
    params.validate()?;
    let n_c = params.n_c()?;
    let n_m = params.n_m()?;
    let initial = initial_eigens(params, trunc)?;
    let finals = final_eigens(params, trunc)?;
    let dim = trunc.k_max + 1;
    let mut out = Vec::new();
    for n in 0..=trunc.n_max {
        let pn = thermal_weight(n, n_c);
        // transition amplitudes <v_k | v'_j>
        let m = initial[n].vectors.transpose() * &finals[n].vectors;
        for k in 0..dim {
            let pk = thermal_weight(k, n_m);
            let pnk = pn * pk;
            for j in 0..dim {
                let amp = m[(k, j)];
                let p = pnk * amp * amp;
                if p == T::zero() {
                    continue;
                }
                out.push(TwoPointOutcome {
                    initial_index: (n, k),
                    final_index: (n, j),
                    work: finals[n].energies[j] - initial[n].energies[k],
                    probability: p,
                });
            }
        }
    }
    Ok(out)
}

/// Work distribution from the full two-point enumeration.
pub fn two_point_measurement<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<WorkDistribution<T>> {
    let outcomes = two_point_outcomes(params, trunc)?;
    let raw: Vec<(T, T)> = outcomes.iter().map(|o| (o.work, o.probability)).collect();
    WorkDistribution::from_raw(raw, trunc.tail_tol)
}

/// Same, restricted to initial and final phonon indices `<= max_level`
/// (excludes truncation-corrupted top levels for comparisons). No deficit
/// check is applied.
pub fn two_point_measurement_windowed<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
    max_level: usize,
) -> Result<WorkDistribution<T>> {
    two_point_measurement_filtered(params, trunc, &|_, k, j| k <= max_level && j <= max_level)
}

/// Same, restricted to outcome index triples `(n, k, j)` accepted by
/// `keep` (verification surface). No deficit check is applied.
pub fn two_point_measurement_filtered<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
    keep: &dyn Fn(usize, usize, usize) -> bool,
) -> Result<WorkDistribution<T>> {
    let outcomes = two_point_outcomes(params, trunc)?;
    let raw: Vec<(T, T)> = outcomes
        .iter()
        .filter(|o| keep(o.initial_index.0, o.initial_index.1, o.final_index.1))
        .map(|o| (o.work, o.probability))
        .collect();
    WorkDistribution::from_raw(raw, T::infinity())
}

/// Characteristic function by spectral decomposition,
/// `chi(u) = Tr[e^{iuH_F} e^{-iuH_I} rho_beta]` with the thermal state
/// normalized on the truncated space. Valid at complex `u`; the Wick
/// rotation `u -> i beta` yields the Jarzynski average.
pub fn chi_by_trace<T: Real + RealField>(
    u: Complex<T>,
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<Complex<T>> {
    params.validate()?;
    let n_c = params.n_c()?;
    let n_m = params.n_m()?;
    let initial = initial_eigens(params, trunc)?;
    let finals = final_eigens(params, trunc)?;
    let dim = trunc.k_max + 1;
    let threshold = T::exp_overflow_threshold();
    let i_unit = Complex::new(T::zero(), T::one());

    let norm_k: T = (0..dim)
        .map(|k| thermal_weight(k, n_m))
        .fold(T::zero(), |s, p| s + p);
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut norm_n = T::zero();
    for n in 0..=trunc.n_max {
        let pn = thermal_weight(n, n_c);
        norm_n += pn;
        let m = initial[n].vectors.transpose() * &finals[n].vectors;
        let mut block = Complex::new(T::zero(), T::zero());
        for k in 0..dim {
            let pk = thermal_weight(k, n_m) / norm_k;
            for j in 0..dim {
                let amp = m[(k, j)];
                let p = pk * amp * amp;
                if p == T::zero() {
                    continue;
                }
                let w = finals[n].energies[j] - initial[n].energies[k];
                let exponent = i_unit * u * w;
                // guard the weighted term: overflow only when the retained
                // contribution itself would not be representable
                let ln_mag = Float::ln(p) + exponent.re;
                if !(ln_mag <= threshold) {
                    return Err(Error::SeriesOverflow {
                        n,
                        exponent: exponent.re.to_f64().unwrap_or(f64::INFINITY),
                    });
                }
                if ln_mag < -threshold {
                    continue; // underflows to zero
                }
                block += Complex::from_polar(fexp(ln_mag), exponent.im);
            }
        }
        acc += block * pn;
    }
    Ok(acc / norm_n)
}

/// Backward-process characteristic function:
/// `chi~(u) = Tr[e^{iuH_I} e^{-iuH_F} rho~]` with `rho~` the Gibbs state of
/// the truncated post-quench Hamiltonian. For the linear coupling this
/// state only exists when the retained manifolds still have increasing
/// ground energies (the unbounded-spectrum guard).
pub fn backward_chi<T: Real + RealField>(
    u: Complex<T>,
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<Complex<T>> {
    params.validate()?;
    guard_backward_gibbs(params, trunc)?;
    let initial = initial_eigens(params, trunc)?;
    let finals = final_eigens(params, trunc)?;
    let dim = trunc.k_max + 1;
    let threshold = T::exp_overflow_threshold();
    let i_unit = Complex::new(T::zero(), T::one());

    // Gibbs weights of H_F from the block spectra, shifted by the global
    // ground energy before exponentiation
    let ground = finals
        .iter()
        .flat_map(|b| b.energies.iter().copied())
        .fold(T::infinity(), |a, b| if b < a { b } else { a });
    let mut z = T::zero();
    for b in &finals {
        for &e in &b.energies {
            z += fexp(-params.beta * (e - ground));
        }
    }
    let ln_z = Float::ln(z);

    let mut acc = Complex::new(T::zero(), T::zero());
    for n in 0..=trunc.n_max {
        let m = initial[n].vectors.transpose() * &finals[n].vectors;
        for j in 0..dim {
            let ln_pj = -params.beta * (finals[n].energies[j] - ground) - ln_z;
            for k in 0..dim {
                let amp = m[(k, j)];
                let p = amp * amp;
                if p == T::zero() {
                    continue;
                }
                // backward work: quench H_F -> H_I
                let w = initial[n].energies[k] - finals[n].energies[j];
                let exponent = i_unit * u * w;
                let ln_mag = ln_pj + Float::ln(p) + exponent.re;
                if !(ln_mag <= threshold) {
                    return Err(Error::SeriesOverflow {
                        n,
                        exponent: exponent.re.to_f64().unwrap_or(f64::INFINITY),
                    });
                }
                if ln_mag < -threshold {
                    continue;
                }
                acc += Complex::from_polar(fexp(ln_mag), exponent.im);
            }
        }
    }
    Ok(acc)
}

/// Linear coupling: refuse a truncated Gibbs state of `H_F` whose manifold
/// weights grow at the cutoff (the divergence the free-energy series
/// inherits).
fn guard_backward_gibbs<T: Real + RealField>(
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<()> {
    if params.coupling_kind != CouplingKind::Linear || params.coupling == T::zero() {
        return Ok(());
    }
    let g = params.coupling;
    // manifold ground energies must still increase at n = n_max:
    // omega_c > g^2 (2n+1)/omega_m - 2 g E
    let n = T::from_index(trunc.n_max);
    let lhs = g * g * (T::lit(2.0) * n + T::one()) / params.omega_m
        - T::lit(2.0) * g * params.displacement;
    if lhs >= params.omega_c {
        return Err(Error::UnboundedSpectrum {
            required_n_max: trunc.n_max,
            monotone_limit: trunc.n_max,
        });
    }
    Ok(())
}

/// Evolved state `rho(t) = e^{-itH_F} rho_c (x) rho_m e^{itH_F}` on the
/// truncated space, with the thermal factors normalized there.
///
/// For the linear coupling the factored propagator (Kerr phase x
/// conditional displacement x free rotation) is used; the quadratic case
/// uses the spectral propagator of each block.
pub fn evolve_state<T: Real + RealField>(
    t: T,
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<TruncatedOperator<T>> {
    params.validate()?;
    let n_c = params.n_c()?;
    let n_m = params.n_m()?;
    let dim = trunc.k_max + 1;
    let norm_n: T = (0..=trunc.n_max)
        .map(|n| thermal_weight(n, n_c))
        .fold(T::zero(), |s, p| s + p);
    let norm_k: T = (0..dim)
        .map(|k| thermal_weight(k, n_m))
        .fold(T::zero(), |s, p| s + p);

    let mut blocks = Vec::with_capacity(trunc.n_max + 1);
    for n in 0..=trunc.n_max {
        let pn = thermal_weight(n, n_c) / norm_n;
        let u_n = match params.coupling_kind {
            CouplingKind::Linear => linear_block_propagator(n, t, params, trunc.k_max),
            CouplingKind::Quadratic => spectral_block_propagator(n, t, params, trunc)?,
        };
        // U_n diag(p_k) U_n'
        let mut rho = DMatrix::<Complex<T>>::zeros(dim, dim);
        for k in 0..dim {
            let pk = Complex::new(thermal_weight(k, n_m) / norm_k * pn, T::zero());
            for i in 0..dim {
                let ui = u_n[(i, k)] * pk;
                if ui.norm_sqr() == T::zero() {
                    continue;
                }
                for j in 0..dim {
                    rho[(i, j)] += ui * u_n[(j, k)].conj();
                }
            }
        }
        blocks.push(rho);
    }
    Ok(TruncatedOperator::from_blocks(trunc.n_max + 1, dim, blocks))
}

/// Factored propagator of the linear quench in the n-photon manifold:
/// Kerr phase, conditional displacement `D(-a_n (1 - e^{-i omega t}))`
/// with `a_n = (g/omega_m) n - E`, free rotation, photon and zero-point
/// phases. Matrix elements come from the Laguerre closed form, which is
/// exact on the untruncated space.
pub fn linear_block_propagator<T: Real + RealField>(
    n: usize,
    t: T,
    params: &PhysicalParams<T>,
    k_max: usize,
) -> DMatrix<Complex<T>> {
    let dim = k_max + 1;
    let om = params.omega_m;
    let nf = T::from_index(n);
    let a_n = params.coupling_ratio() * nf - params.displacement;
    let phase_t = om * t;
    let i_unit = Complex::new(T::zero(), T::one());
    let eta = Complex::new(T::one(), T::zero()) - (-i_unit * phase_t).exp();
    let z = -eta * a_n;
    let kerr = a_n * a_n * (phase_t - Float::sin(phase_t));
    let scalar =
        (i_unit * (kerr - params.omega_c * t * nf - om * t / T::lit(2.0))).exp();

    let d = displacement_matrix(z, dim);
    let mut u = DMatrix::<Complex<T>>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            // free rotation acts first (rightmost), on the column index
            let rot = (-i_unit * (phase_t * T::from_index(j))).exp();
            u[(i, j)] = scalar * d[(i, j)] * rot;
        }
    }
    u
}

/// Spectral propagator `V e^{-i t Lambda} V'` of one block.
pub fn spectral_block_propagator<T: Real + RealField>(
    n: usize,
    t: T,
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<DMatrix<Complex<T>>> {
    let eig = eigen_sorted(
        mech_final_block(params, n, trunc.k_max),
        params.omega_c * T::from_index(n),
        n,
    )?;
    let dim = trunc.k_max + 1;
    let i_unit = Complex::new(T::zero(), T::one());
    let mut u = DMatrix::<Complex<T>>::zeros(dim, dim);
    for a in 0..dim {
        let phase = (-i_unit * (eig.energies[a] * t)).exp();
        for i in 0..dim {
            let vi = phase * eig.vectors[(i, a)];
            for j in 0..dim {
                u[(i, j)] += vi * eig.vectors[(j, a)];
            }
        }
    }
    Ok(u)
}

/// Matrix elements of the displacement operator `D(z) = exp(z b' - z* b)`
/// on a truncated space, from the Laguerre closed form.
pub fn displacement_matrix<T: Real + RealField>(z: Complex<T>, dim: usize) -> DMatrix<Complex<T>> {
    let mut d = DMatrix::<Complex<T>>::zeros(dim, dim);
    let r = z.norm();
    if r == T::zero() {
        for i in 0..dim {
            d[(i, i)] = Complex::new(T::one(), T::zero());
        }
        return d;
    }
    let x = r * r;
    let arg = Float::atan2(z.im, z.re);
    let fact = LnFactorial::<T>::up_to(dim - 1);
    for col in 0..dim {
        for row in 0..dim {
            let (lo, hi) = if row >= col { (col, row) } else { (row, col) };
            let delta = hi - lo;
            let lag = laguerre_ln(lo, T::from_index(delta), x);
            if lag.sign == 0 {
                continue;
            }
            let ln_mag = (fact.fact(lo) - fact.fact(hi)) / T::lit(2.0)
                + T::from_index(delta) * Float::ln(r)
                - x / T::lit(2.0)
                + lag.ln_abs;
            let mag = fexp(ln_mag) * T::from_i8(lag.sign).unwrap();
            // phase: z^delta above the diagonal, (-z*)^delta below
            let phase = if row >= col {
                T::from_index(delta) * arg
            } else {
                T::from_index(delta) * (<T as Real>::pi() - arg)
            };
            d[(row, col)] = Complex::from_polar(mag, phase);
        }
    }
    d
}

/// `Tr[(H_F - H_I)^order rho_beta]` for `order` in {1, 2}, evaluated per
/// photon block with the thermal state normalized on the truncated space.
pub fn work_moment_by_trace<T: Real + RealField>(
    order: u32,
    params: &PhysicalParams<T>,
    trunc: &Truncation<T>,
) -> Result<T> {
    assert!(order == 1 || order == 2, "only first and second moments");
    params.validate()?;
    let n_c = params.n_c()?;
    let n_m = params.n_m()?;
    let dim = trunc.k_max + 1;
    let norm_n: T = (0..=trunc.n_max)
        .map(|n| thermal_weight(n, n_c))
        .fold(T::zero(), |s, p| s + p);
    let norm_k: T = (0..dim)
        .map(|k| thermal_weight(k, n_m))
        .fold(T::zero(), |s, p| s + p);
    let hi = mech_initial_block(params, trunc.k_max);
    let mut acc = T::zero();
    for n in 0..=trunc.n_max {
        let pn = thermal_weight(n, n_c) / norm_n;
        let dh = mech_final_block(params, n, trunc.k_max) - &hi;
        for k in 0..dim {
            let pk = thermal_weight(k, n_m) / norm_k;
            let v = match order {
                1 => dh[(k, k)],
                _ => (0..dim)
                    .map(|j| dh[(k, j)] * dh[(k, j)])
                    .fold(T::zero(), |s, x| s + x),
            };
            acc += pn * pk * v;
        }
    }
    Ok(acc)
}
