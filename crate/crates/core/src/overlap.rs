//! Number-state matrix elements of the displacement and squeeze operators.
//!
//! These are the transition kernels of the two-point-measurement protocol:
//! `|<k'|D(lambda)|k>|^2` for the linear quench and `|<k'|S(zeta)|k>|^2`
//! for the quadratic one. Everything is assembled in log space and
//! exponentiated last.

use crate::real::Real;
use crate::special::{laguerre_ln, ln_factorial, LnFactorial};

/// `|<k'|D(lambda)|k>|^2` for real displacement `lambda`,
/// with `D(z) = exp(z b' - z* b)`.
///
/// Closed form (for `k' >= k`, with `x = lambda^2`):
/// `(k!/k'!) e^{-x} x^{k'-k} [L_k^{(k'-k)}(x)]^2`; the `k' < k` branch
/// follows from the symmetry of the modulus, so the roles are swapped and
/// the numerically stable orientation is always used.
pub fn displacement_overlap<T: Real>(k: usize, k_prime: usize, lambda: T) -> T {
    let (lo, hi) = if k <= k_prime { (k, k_prime) } else { (k_prime, k) };
    displacement_overlap_ordered(
        lo,
        hi,
        lambda,
        ln_factorial::<T>(lo),
        ln_factorial::<T>(hi),
    )
}

/// Table-backed variant for batch assembly.
pub(crate) fn displacement_overlap_cached<T: Real>(
    fact: &LnFactorial<T>,
    k: usize,
    k_prime: usize,
    lambda: T,
) -> T {
    let (lo, hi) = if k <= k_prime { (k, k_prime) } else { (k_prime, k) };
    displacement_overlap_ordered(lo, hi, lambda, fact.fact(lo), fact.fact(hi))
}

fn displacement_overlap_ordered<T: Real>(lo: usize, hi: usize, lambda: T, ln_lo: T, ln_hi: T) -> T {
    let x = lambda * lambda;
    if x == T::zero() {
        return if lo == hi { T::one() } else { T::zero() };
    }
    let delta = hi - lo;
    let lag = laguerre_ln(lo, T::from_index(delta), x);
    if lag.sign == 0 {
        return T::zero();
    }
    let ln_p = ln_lo - ln_hi + T::from_index(delta) * x.ln() - x
        + T::lit(2.0) * lag.ln_abs;
    ln_p.exp()
}

/// `|<k'|S(zeta)|k>|^2` for real squeeze parameter `zeta`,
/// with `S(z) = exp(z* b^2/2 - z b'^2/2)`.
///
/// Evaluated as `k! k'! / (cosh zeta)^{2k+1} [S(k,k',zeta)]^2` where the
/// kernel sum runs over `m <= floor(k'/2)`, `l <= floor(k/2)` constrained
/// by `k' - 2m = k - 2l`. Exactly zero when `k' - k` is odd (parity
/// selection rule).
pub fn squeeze_overlap<T: Real>(k: usize, k_prime: usize, zeta: T) -> T {
    let max = k.max(k_prime);
    let fact = LnFactorial::up_to(max);
    squeeze_overlap_cached(&fact, k, k_prime, zeta)
}

/// Table-backed variant for batch assembly.
pub(crate) fn squeeze_overlap_cached<T: Real>(
    fact: &LnFactorial<T>,
    k: usize,
    k_prime: usize,
    zeta: T,
) -> T {
    if (k_prime % 2) != (k % 2) {
        return T::zero();
    }
    let t = zeta.tanh();
    if t == T::zero() {
        return if k == k_prime { T::one() } else { T::zero() };
    }
    let ln_abs_t = t.abs().ln();
    let t_negative = t < T::zero();
    let ln_cosh = ln_cosh(zeta);
    let ln2 = T::lit(std::f64::consts::LN_2);

    // Kronecker constraint: m = l + (k' - k)/2 with 0 <= m <= floor(k'/2),
    // 0 <= l <= floor(k/2)
    let half_diff = k_prime as isize - k as isize; // even
    let shift = half_diff / 2;
    let l_min = if shift < 0 { (-shift) as usize } else { 0 };
    let l_max_m = if shift > 0 {
        (k_prime / 2).saturating_sub(shift as usize)
    } else {
        k_prime / 2 + shift.unsigned_abs()
    };
    let l_max = (k / 2).min(l_max_m);
    if l_min > l_max {
        return T::zero();
    }

    // pass 1: peak magnitude of the alternating terms
    let ln_term = |l: usize| {
        let m = (l as isize + shift) as usize;
        -T::from_index(m + l) * ln2 - fact.fact(m) - fact.fact(l)
            + T::from_index(m + l) * ln_abs_t
            - fact.fact(k - 2 * l)
            + T::lit(2.0) * T::from_index(l) * ln_cosh
    };
    let mut peak = T::neg_infinity();
    for l in l_min..=l_max {
        let lt = ln_term(l);
        if lt > peak {
            peak = lt;
        }
    }
    if peak == T::neg_infinity() {
        return T::zero();
    }

    // pass 2: scaled signed accumulation
    let mut acc = T::zero();
    for l in l_min..=l_max {
        let m = (l as isize + shift) as usize;
        let lt = ln_term(l);
        let mut sign_neg = m % 2 == 1; // (-1)^(3m+2l) = (-1)^m
        if t_negative && (m + l) % 2 == 1 {
            sign_neg = !sign_neg;
        }
        let contrib = (lt - peak).exp();
        if sign_neg {
            acc -= contrib;
        } else {
            acc += contrib;
        }
    }
    if acc == T::zero() {
        return T::zero();
    }
    let ln_p = fact.fact(k) + fact.fact(k_prime)
        - (T::lit(2.0) * T::from_index(k) + T::one()) * ln_cosh
        + T::lit(2.0) * (peak + acc.abs().ln());
    ln_p.exp()
}

/// `ln(cosh x)` without overflow for large `|x|`.
fn ln_cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-T::lit(2.0) * a).exp().ln_1p() - T::lit(std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Brute-force operator exponential on a truncated space, independent
    /// of the closed forms above: scaling-and-squaring Taylor expansion.
    pub(crate) mod expm_oracle {
        pub fn ladder(dim: usize) -> Vec<Vec<f64>> {
            // b[k-1][k] = sqrt(k)
            let mut b = vec![vec![0.0; dim]; dim];
            for k in 1..dim {
                b[k - 1][k] = (k as f64).sqrt();
            }
            b
        }

        pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
            let n = a.len();
            let mut c = vec![vec![0.0; n]; n];
            for i in 0..n {
                for l in 0..n {
                    let ail = a[i][l];
                    if ail == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        c[i][j] += ail * b[l][j];
                    }
                }
            }
            c
        }

        pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
            let n = a.len();
            let mut c = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    c[j][i] = a[i][j];
                }
            }
            c
        }

        pub fn sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
            a.iter()
                .zip(b)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
                .collect()
        }

        pub fn scale(a: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
            a.iter()
                .map(|r| r.iter().map(|x| x * s).collect())
                .collect()
        }

        /// exp(A) by scaling-and-squaring with a Taylor series.
        pub fn expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
            let n = a.len();
            let norm: f64 = a
                .iter()
                .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
            let scaled = scale(a, 0.5f64.powi(squarings as i32));
            let mut result = vec![vec![0.0; n]; n];
            for (i, row) in result.iter_mut().enumerate() {
                row[i] = 1.0;
            }
            let mut term = result.clone();
            for order in 1..=30 {
                term = scale(&matmul(&term, &scaled), 1.0 / order as f64);
                for i in 0..n {
                    for j in 0..n {
                        result[i][j] += term[i][j];
                    }
                }
            }
            let mut out = result;
            for _ in 0..squarings {
                out = matmul(&out, &out);
            }
            out
        }

        /// D(lambda) = exp(lambda (b' - b)) on a truncated space.
        pub fn displacement(dim: usize, lambda: f64) -> Vec<Vec<f64>> {
            let b = ladder(dim);
            let bd = transpose(&b);
            expm(&scale(&sub(&bd, &b), lambda))
        }

        /// S(zeta) = exp(zeta/2 (b^2 - b'^2)) on a truncated space.
        pub fn squeeze(dim: usize, zeta: f64) -> Vec<Vec<f64>> {
            let b = ladder(dim);
            let bd = transpose(&b);
            let b2 = matmul(&b, &b);
            let bd2 = matmul(&bd, &bd);
            expm(&scale(&sub(&b2, &bd2), zeta / 2.0))
        }
    }

    #[test]
    fn displacement_trivial_cases() {
        assert_eq!(displacement_overlap(3, 3, 0.0f64), 1.0);
        assert_eq!(displacement_overlap(3, 5, 0.0f64), 0.0);
        // vacuum overlap |<0|D|0>|^2 = e^{-lambda^2}
        assert_relative_eq!(
            displacement_overlap(0, 0, 0.7f64),
            (-0.49f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn displacement_matches_matrix_exponential() {
        let d = expm_oracle::displacement(60, 0.6);
        for k in 0..10 {
            for kp in 0..14 {
                let expect = d[kp][k] * d[kp][k];
                let got = displacement_overlap(k, kp, 0.6f64);
                assert!(
                    (got - expect).abs() <= 1e-10,
                    "({k},{kp}): {got} vs {expect}"
                );
            }
        }
        // the spec'd spot check
        let got = displacement_overlap(2, 5, 0.6f64);
        assert!((got - d[5][2] * d[5][2]).abs() <= 1e-10);
    }

    #[test]
    fn displacement_symmetry_and_sign() {
        for &(k, kp) in &[(0usize, 4usize), (2, 7), (5, 3), (9, 9)] {
            let a = displacement_overlap(k, kp, 1.3f64);
            let b = displacement_overlap(kp, k, 1.3f64);
            assert_relative_eq!(a, b, max_relative = 1e-13);
            let c = displacement_overlap(k, kp, -1.3f64);
            assert_relative_eq!(a, c, max_relative = 1e-13);
        }
    }

    #[test]
    fn displacement_completeness() {
        // sum over k' approaches 1 with deficit < 1e-10 at
        // K = k + 20 ceil(lambda^2 + lambda + 1)
        for &(k, lambda) in &[(0usize, 0.5f64), (3, 1.1), (10, 2.0), (25, 0.8)] {
            let cap = k + 20 * ((lambda * lambda + lambda + 1.0).ceil() as usize);
            let sum: f64 = (0..=cap).map(|kp| displacement_overlap(k, kp, lambda)).sum();
            assert!((1.0 - sum).abs() < 1e-10, "k={k} lambda={lambda}: {sum}");
        }
    }

    #[test]
    fn squeeze_trivial_cases() {
        assert_eq!(squeeze_overlap(4, 4, 0.0f64), 1.0);
        // parity selection rule
        assert_eq!(squeeze_overlap(0, 1, 0.3f64), 0.0);
        assert_eq!(squeeze_overlap(3, 8, 0.9f64), 0.0);
    }

    #[test]
    fn squeeze_matches_matrix_exponential() {
        let s = expm_oracle::squeeze(60, 0.4);
        for k in 0..10 {
            for kp in 0..14 {
                let expect = s[kp][k] * s[kp][k];
                let got = squeeze_overlap(k, kp, 0.4f64);
                assert!(
                    (got - expect).abs() <= 1e-10,
                    "({k},{kp}): {got} vs {expect}"
                );
            }
        }
        let got = squeeze_overlap(0, 2, 0.4f64);
        assert!((got - s[2][0] * s[2][0]).abs() <= 1e-10);
    }

    #[test]
    fn squeeze_even_in_zeta_and_negative_argument() {
        let s = expm_oracle::squeeze(60, -0.55);
        for &(k, kp) in &[(0usize, 2usize), (3, 7), (6, 2), (5, 5)] {
            let got = squeeze_overlap(k, kp, -0.55f64);
            let expect = s[kp][k] * s[kp][k];
            assert!((got - expect).abs() <= 1e-10, "({k},{kp})");
            assert_relative_eq!(
                got,
                squeeze_overlap(k, kp, 0.55f64),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn squeeze_completeness_at_inflated_cutoff() {
        for &(k, zeta) in &[(0usize, 0.4f64), (5, 0.7), (18, 0.9), (40, 0.5)] {
            let cap = ((k as f64) * (2.0 * zeta).exp()).ceil() as usize
                + crate::truncation::squeeze_pad(zeta);
            let sum: f64 = (0..=cap).map(|kp| squeeze_overlap(k, kp, zeta)).sum();
            assert!(
                (1.0 - sum).abs() < 1e-8,
                "k={k} zeta={zeta}: deficit {}",
                1.0 - sum
            );
        }
    }

    #[test]
    fn kernels_work_in_f32() {
        let p = displacement_overlap(1, 3, 0.5f32);
        let q = displacement_overlap(1, 3, 0.5f64);
        assert!((p as f64 - q).abs() < 1e-5);
        let p = squeeze_overlap(2, 4, 0.3f32);
        let q = squeeze_overlap(2, 4, 0.3f64);
        assert!((p as f64 - q).abs() < 1e-5);
    }
}
