//! Gauss hypergeometric function ₂F₁(a, b; c; z) for real z < 1.
//!
//! Negative arguments are mapped into [0, 1) with the Pfaff transformation
//! and summed as a power series. Far along the negative axis (z < -9) the
//! transformed argument approaches 1 and the series crawls, so there the
//! 1/z connection formula is used instead, which needs Γ.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

const MAX_TERMS: usize = 20_000_000;

// Beyond this magnitude the Pfaff-transformed series is replaced by the
// 1/z connection formula.
const CONNECTION_THRESHOLD: f64 = 9.0;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_non_positive_integer<T: Scalar>(x: T) -> bool {
    x <= T::zero() && x == x.round()
}

fn lanczos_sum<T: Scalar>(x: T) -> T {
    let mut acc = lit::<T>(LANCZOS[0]);
    for (i, &p) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + lit::<T>(p) / (x + lit(i as f64));
    }
    acc
}

/// Γ(x) by the Lanczos approximation (g = 7), with reflection for x < 1/2.
pub fn gamma<T: Scalar>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        if is_non_positive_integer(x) {
            return T::nan();
        }
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let t = x + lit(LANCZOS_G) + half;
    (T::TAU()).sqrt() * t.powf(x + half) * (-t).exp() * lanczos_sum(x)
}

/// 1/Γ(x), equal to zero at the poles of Γ.
pub fn recip_gamma<T: Scalar>(x: T) -> T {
    if is_non_positive_integer(x) {
        T::zero()
    } else {
        T::one() / gamma(x)
    }
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::PI();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let t = x + lit(LANCZOS_G) + half;
    half * T::TAU().ln() + (x + half) * t.ln() - t + lanczos_sum(x).ln()
}

/// Power series of ₂F₁ for |z| < 1, truncated once a geometric bound on the
/// remaining tail drops below `eps · |sum|`.
pub(crate) fn series<T: Scalar>(a: T, b: T, c: T, z: T) -> Result<T> {
    let eps = T::series_eps();
    let mut sum = T::one();
    let mut term = T::one();
    let az = z.abs();
    for n in 0..MAX_TERMS {
        let nf = lit::<T>(n as f64);
        let ratio = (a + nf) * (b + nf) / ((c + nf) * (nf + T::one())) * z;
        term = term * ratio;
        sum = sum + term;
        if term == T::zero() {
            return Ok(sum);
        }
        let rho = ratio.abs().max(az);
        if rho < T::one() && term.abs() * rho / (T::one() - rho) <= eps * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence { terms: MAX_TERMS })
}

/// Pfaff transformation: ₂F₁(a,b;c;z) = (1-z)^(-a) ₂F₁(a, c-b; c; z/(z-1)).
fn pfaff<T: Scalar>(a: T, b: T, c: T, z: T) -> Result<T> {
    let w = z / (z - T::one());
    Ok((T::one() - z).powf(-a) * series(a, c - b, c, w)?)
}

/// Connection formula to 1/z, valid for z < -1 when b - a is not an integer.
fn connection<T: Scalar>(a: T, b: T, c: T, z: T) -> Option<Result<T>> {
    let diff = b - a;
    if diff == diff.round() {
        return None;
    }
    let inv = T::one() / z;
    let mz = -z;
    let g_c = gamma(c);
    let first = || -> Result<T> {
        let coef = g_c * gamma(b - a) * recip_gamma(b) * recip_gamma(c - a);
        if coef == T::zero() {
            return Ok(T::zero());
        }
        Ok(coef * mz.powf(-a) * series(a, a - c + T::one(), a - b + T::one(), inv)?)
    };
    let second = || -> Result<T> {
        let coef = g_c * gamma(a - b) * recip_gamma(a) * recip_gamma(c - b);
        if coef == T::zero() {
            return Ok(T::zero());
        }
        Ok(coef * mz.powf(-b) * series(b, b - c + T::one(), b - a + T::one(), inv)?)
    };
    Some(first().and_then(|f| second().map(|s| f + s)))
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) for real z < 1.
///
/// The negative half-line is the supported domain for full accuracy
/// (relative error around 1e-12 in `f64`); `0 < z < 1` falls back to the
/// direct series.
pub fn hyp2f1<T: Scalar>(a: T, b: T, c: T, z: T) -> Result<T> {
    if is_non_positive_integer(c) {
        return Err(Error::ParameterPole(crate::scalar::to_f64(c)));
    }
    if !z.is_finite() || z >= T::one() {
        return Err(crate::error::invalid("z", "hyp2f1 requires z < 1"));
    }
    if z == T::zero() {
        return Ok(T::one());
    }
    if z > T::zero() {
        return series(a, b, c, z);
    }
    if z < -lit::<T>(CONNECTION_THRESHOLD) {
        if let Some(v) = connection(a, b, c, z) {
            return v;
        }
    }
    pfaff(a, b, c, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma(5.0f64), 24.0) < 1e-14);
        assert!(rel(gamma(0.5f64), std::f64::consts::PI.sqrt()) < 1e-14);
        assert!(rel(gamma(-0.5f64), -2.0 * std::f64::consts::PI.sqrt()) < 1e-13);
        assert_eq!(recip_gamma(-3.0f64), 0.0);
        assert!(rel(ln_gamma(10.0f64), 362_880f64.ln()) < 1e-14);
    }

    #[test]
    fn zero_argument_is_one() {
        assert_eq!(hyp2f1(1.3f64, -0.7, 2.1, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn binomial_identity() {
        // b = c gives (1 - z)^(-a).
        assert!(rel(hyp2f1(1.0f64, 2.5, 2.5, -1.0).unwrap(), 0.5) < 1e-12);
        for &z in &[-0.3, -4.0, -50.0, -1e4, -1e6] {
            let expect = (1.0f64 - z).powf(-0.7);
            assert!(rel(hyp2f1(0.7f64, 1.9, 1.9, z).unwrap(), expect) < 1e-10, "z={z}");
        }
    }

    #[test]
    fn logarithm_identity() {
        // z ₂F₁(1, 1; 2; -z) = ln(1 + z).
        for &z in &[0.1f64, 0.9, 3.0, 20.0, 1e3] {
            let v = hyp2f1(1.0, 1.0, 2.0, -z).unwrap();
            assert!(rel(z * v, z.ln_1p()) < 1e-11, "z={z}");
        }
    }

    #[test]
    fn arctan_identity() {
        // ₂F₁(1/2, 1; 3/2; -z²) = atan(z)/z, which hits the integer b - a
        // fallback for large z.
        for &z in &[0.5f64, 2.0, 3.5] {
            let v = hyp2f1(0.5, 1.0, 1.5, -z * z).unwrap();
            assert!(rel(v, z.atan() / z) < 1e-10, "z={z}");
        }
    }

    #[test]
    fn pole_in_c_is_error() {
        assert!(matches!(hyp2f1(1.0f64, 1.0, -2.0, -0.5), Err(Error::ParameterPole(_))));
    }

    #[test]
    fn rejects_z_at_or_above_one() {
        assert!(hyp2f1(1.0f64, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn transformed_matches_direct_series() {
        // Where the defining series converges the two routes must coincide.
        for &alpha in &[2.5f64, 3.0, 3.7, 4.5] {
            let b = 1.0 - 2.0 / alpha;
            for k in 1..40 {
                let z = -(k as f64) / 40.0 * 0.999;
                let direct = series(1.0, b, b + 1.0, z).unwrap();
                let via = hyp2f1(1.0, b, b + 1.0, z).unwrap();
                assert!(rel(via, direct) < 1e-9, "alpha={alpha} z={z}");
            }
        }
    }

    #[test]
    fn connection_matches_pfaff_across_threshold() {
        let (a, b, c) = (1.0f64, 1.0 - 2.0 / 3.7, 2.0 - 2.0 / 3.7);
        for &z in &[-9.5f64, -30.0, -500.0, -2e4] {
            let conn = connection(a, b, c, z).unwrap().unwrap();
            let pf = pfaff(a, b, c, z).unwrap();
            assert!(rel(conn, pf) < 1e-10, "z={z}: {conn} vs {pf}");
        }
    }

    #[test]
    fn single_precision() {
        let v = hyp2f1(1.0f32, 0.5, 1.5, -0.25).unwrap();
        assert!((v - 0.5f32.atan() / 0.5).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]
            #[test]
            fn pfaff_agrees_with_series_inside_unit_disk(
                a in 0.2f64..2.0, b in -0.9f64..1.5, dc in 0.3f64..2.0, z in -0.98f64..0.0
            ) {
                let c = a.max(b) + dc;
                let direct = series(a, b, c, z).unwrap();
                let via = hyp2f1(a, b, c, z).unwrap();
                prop_assert!(rel(via, direct) < 1e-9);
            }

            #[test]
            fn laplace_parameters_on_wide_range(alpha in 2.1f64..6.0, lz in -6.0f64..6.0) {
                // The interference closed form needs z ∈ [-1e6, 0]. Compare
                // against quadrature of the Euler integral
                // ₂F₁(1,b;b+1;-z) = b ∫₀¹ t^(b-1)/(1+z t) dt.
                let b = 1.0 - 2.0 / alpha;
                let z = 10f64.powf(lz);
                let v = hyp2f1(1.0, b, b + 1.0, -z).unwrap();
                let tol = crate::quad::Tolerance { rel: 1e-12, abs: 1e-15, max_evals: 2_000_000 };
                // substitute t = s^(1/b) to remove the endpoint singularity
                let q = crate::quad::integrate(|s: f64| 1.0 / (1.0 + z * s.powf(1.0 / b)), 0.0, 1.0, &tol).unwrap();
                prop_assert!(rel(v, q.value) < 1e-9, "alpha={} z={} v={} q={}", alpha, z, v, q.value);
            }
        }
    }
}
