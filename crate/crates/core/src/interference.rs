//! Laplace functionals of the aggregate interference from a PPP of
//! other-cell UEs outside an exclusion disk around the BS.
//!
//! Interferers transmit with power `P_t` and see independent unit-mean
//! exponential fading towards each measurement point (and in each slot).
//! Measurement points are the BS at the origin and a relay at `(d, 0)`.
//!
//! The joint transforms are evaluated by splitting the polar integrand
//!
//! ```text
//! 1 - O(r) / (1 + a(r, θ)) = (1 - O(r)) + O(r) · a / (1 + a)
//! ```
//!
//! where `O(r)` collects the origin factors and `a` is the relay term, so the
//! angular integral only has to be done once for the relay term and can be
//! shared between many origin-side argument sets.

use crate::error::{invalid, Result};
use crate::model::{interferer_arrival_angle, AntennaPattern, NetworkParams};
use crate::quad::{self, hyp2f1, Tolerance};
use crate::scalar::{lit, Scalar};

/// Arguments of the most general functional: `s` at the relay `(d, 0)`,
/// `t` and `u` at the origin (slot 1 and slot 2), exclusion radius `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceArgs<T> {
    pub s: T,
    pub t: T,
    pub u: T,
    pub d: T,
    pub x: T,
}

impl<T: Scalar> LaplaceArgs<T> {
    pub fn new(s: T, t: T, u: T, d: T, x: T) -> Self {
        Self { s, t, u, d, x }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s", self.s), ("t", self.t), ("u", self.u), ("d", self.d), ("x", self.x)] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(invalid(name, "Laplace arguments and distances must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

fn check_params<T: Scalar>(params: &NetworkParams<T>) -> Result<()> {
    if !(params.alpha > lit(2.0)) {
        return Err(invalid("alpha", "interference integrals need alpha > 2"));
    }
    if !(params.lambda >= T::zero()) {
        return Err(invalid("lambda", "must be non-negative"));
    }
    Ok(())
}

/// `-ln 𝓛(s, x)` from the hypergeometric closed form.
pub fn single_exponent<T: Scalar>(params: &NetworkParams<T>, s: T, x: T) -> Result<T> {
    check_params(params)?;
    LaplaceArgs::new(s, T::zero(), T::zero(), T::zero(), x).validate()?;
    if s == T::zero() || params.lambda == T::zero() {
        return Ok(T::zero());
    }
    let alpha = params.alpha;
    let two = lit::<T>(2.0);
    let spa = s * params.pt_a();
    let scale = T::TAU() * params.lambda;
    if x == T::zero() {
        // ∫₀^∞ r / (1 + r^α / c) dr = c^{2/α} (π/α) / sin(2π/α).
        let delta = two / alpha;
        return Ok(scale * spa.powf(delta) * (T::PI() / alpha) / (T::PI() * delta).sin());
    }
    let z = -spa / x.powf(alpha);
    let f = hyp2f1(T::one(), T::one() - two / alpha, two - two / alpha, z)?;
    Ok(scale * spa * x.powf(two - alpha) / (alpha - two) * f)
}

/// `𝓛(s, x) = E[exp(-s I)]` at the BS with exclusion radius `x`.
///
/// Uses the hypergeometric closed form and falls back to quadrature if that
/// path fails.
pub fn laplace_single<T: Scalar>(params: &NetworkParams<T>, s: T, x: T) -> Result<T> {
    match single_exponent(params, s, x) {
        Ok(e) if e.is_finite() => Ok((-e).exp()),
        Err(e @ crate::Error::InvalidParameter { .. }) => Err(e),
        _ => laplace_single_quadrature(params, s, x, &Tolerance::default()),
    }
}

/// `𝓛(s, x)` by direct quadrature of `2πλ ∫_x^∞ sP_tA r / (r^α + sP_tA) dr`.
pub fn laplace_single_quadrature<T: Scalar>(
    params: &NetworkParams<T>,
    s: T,
    x: T,
    tol: &Tolerance<T>,
) -> Result<T> {
    check_params(params)?;
    LaplaceArgs::new(s, T::zero(), T::zero(), T::zero(), x).validate()?;
    if s == T::zero() || params.lambda == T::zero() {
        return Ok(T::one());
    }
    let spa = s * params.pt_a();
    let alpha = params.alpha;
    let knee = spa.powf(alpha.recip());
    let radial = |r: T, out: &mut [T]| {
        out[0] = r / (T::one() + r.powf(alpha) / spa);
        Ok(())
    };
    let integral = radial_integral(radial, x, &[knee], 1, tol)?;
    Ok((-(T::TAU() * params.lambda * integral[0])).exp())
}

/// Integrates `f` over `[x, ∞)`, splitting at the given interior breakpoints.
fn radial_integral<T, F>(mut f: F, x: T, breaks: &[T], n: usize, tol: &Tolerance<T>) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(T, &mut [T]) -> Result<()>,
{
    let mut points: Vec<T> = breaks.iter().copied().filter(|b| *b > x && b.is_finite()).collect();
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    points.dedup();
    let mut total = vec![T::zero(); n];
    let mut lo = x;
    for &hi in &points {
        let part = quad::integrate_vec(&mut f, lo, hi, n, tol)?;
        for (acc, v) in total.iter_mut().zip(&part.values) {
            *acc = *acc + *v;
        }
        lo = hi;
    }
    let scale = lo.max(T::one());
    let tail = quad::integrate_semi_infinite_vec(&mut f, lo, scale, n, tol)?;
    for (acc, v) in total.iter_mut().zip(&tail.values) {
        *acc = *acc + *v;
    }
    Ok(total)
}

/// Relay-side angular kernel `K(r) = ∫₀^{2π} a / (1 + a) dθ` with
/// `a = s P_tA f(arrival angle) ρ^{-α}`.
fn relay_kernel<T: Scalar>(
    spa: T,
    alpha: T,
    d: T,
    r: T,
    pattern: &AntennaPattern<T>,
    tol: &Tolerance<T>,
) -> Result<T> {
    let omni_gain = if pattern.is_omni() { Some(pattern.peak_gain()) } else { None };
    let neg_half_alpha = -alpha * lit(0.5);
    let two = lit::<T>(2.0);
    let integrand = |th: T| {
        let rho2 = (r * r + d * d - two * r * d * th.cos()).max(T::zero());
        if rho2 == T::zero() {
            return T::one();
        }
        let gain = match omni_gain {
            Some(g) => g,
            None => pattern.gain(interferer_arrival_angle(r, th, rho2.sqrt())),
        };
        let a = spa * gain * rho2.powf(neg_half_alpha);
        a / (T::one() + a)
    };
    if d == T::zero() {
        // Rotationally symmetric apart from the antenna gain.
        if omni_gain.is_some() {
            return Ok(T::TAU() * integrand(T::zero()));
        }
    }
    // The integrand is even in θ.
    let half = quad::integrate(integrand, T::zero(), T::PI(), tol)?;
    Ok(two * half.value)
}

/// Joint transforms sharing one relay argument.
///
/// Returns `E[exp(-s I_R - t_j I_B1 - u_j I_B2)]` for every `[t_j, u_j]` in
/// `origin`, where `I_R` is measured at `(d, 0)` through `pattern` and
/// `I_B1`, `I_B2` at the origin in two slots.
pub fn joint_laplace_batch<T: Scalar>(
    params: &NetworkParams<T>,
    pattern: &AntennaPattern<T>,
    s: T,
    d: T,
    x: T,
    origin: &[[T; 2]],
    tol: &Tolerance<T>,
) -> Result<Vec<T>> {
    check_params(params)?;
    pattern.validate()?;
    for o in origin {
        LaplaceArgs::new(s, o[0], o[1], d, x).validate()?;
    }
    LaplaceArgs::new(s, T::zero(), T::zero(), d, x).validate()?;
    let n = origin.len();
    if params.lambda == T::zero() || n == 0 {
        return Ok(vec![T::one(); n]);
    }
    let pa = params.pt_a();
    let alpha = params.alpha;
    let spa = s * pa;
    let inner_tol = tol.tightened(lit(0.1));

    let radial = |r: T, out: &mut [T]| {
        let kernel = if spa > T::zero() { relay_kernel(spa, alpha, d, r, pattern, &inner_tol)? } else { T::zero() };
        let c = pa * r.powf(-alpha);
        for (slot, o) in out.iter_mut().zip(origin) {
            let ln_o = -((o[0] * c).ln_1p() + (o[1] * c).ln_1p());
            let one_minus_o = -ln_o.exp_m1();
            let o_val = ln_o.exp();
            *slot = r * (T::TAU() * one_minus_o + o_val * kernel);
        }
        Ok(())
    };

    let largest = origin.iter().flat_map(|o| [o[0], o[1]]).fold(s, T::max);
    let knee = (largest * pa).powf(alpha.recip());
    let exponents = radial_integral(radial, x, &[d, knee], n, tol)?;
    Ok(exponents.into_iter().map(|e| (-(params.lambda * e)).exp()).collect())
}

/// `𝓛_d(s, t, x) = E[exp(-s I_1 - t I_2)]`, `I_1` at `(d, 0)`, `I_2` at the
/// origin, omnidirectional reception.
pub fn laplace_joint2<T: Scalar>(params: &NetworkParams<T>, s: T, t: T, d: T, x: T) -> Result<T> {
    laplace_joint2_antenna(params, s, t, d, x, &AntennaPattern::omni())
}

/// [`laplace_joint2`] with the relay-side path gain weighted by `pattern`.
pub fn laplace_joint2_antenna<T: Scalar>(
    params: &NetworkParams<T>,
    s: T,
    t: T,
    d: T,
    x: T,
    pattern: &AntennaPattern<T>,
) -> Result<T> {
    let v = joint_laplace_batch(params, pattern, s, d, x, &[[t, T::zero()]], &Tolerance::default())?;
    Ok(v[0])
}

/// `𝓛_{d,0}(s, t, u, x)`: `I_1` at `(d, 0)` in slot 1, `I_2` and `I_3` at the
/// origin in slots 1 and 2. Omnidirectional reception.
pub fn laplace_joint3<T: Scalar>(params: &NetworkParams<T>, s: T, t: T, u: T, d: T, x: T) -> Result<T> {
    laplace_joint3_antenna(params, s, t, u, d, x, &AntennaPattern::omni())
}

pub fn laplace_joint3_antenna<T: Scalar>(
    params: &NetworkParams<T>,
    s: T,
    t: T,
    u: T,
    d: T,
    x: T,
    pattern: &AntennaPattern<T>,
) -> Result<T> {
    let v = joint_laplace_batch(params, pattern, s, d, x, &[[t, u]], &Tolerance::default())?;
    Ok(v[0])
}

/// Reference route: the joint transform by two-dimensional polar quadrature
/// of the unsplit integrand `1 - 1 / ((1 + a)(1 + t c)(1 + u c))`.
///
/// Much slower than [`joint_laplace_batch`]; used to cross-check it.
pub fn joint_laplace_polar<T: Scalar>(
    params: &NetworkParams<T>,
    pattern: &AntennaPattern<T>,
    args: &LaplaceArgs<T>,
    tol: &Tolerance<T>,
) -> Result<T> {
    check_params(params)?;
    args.validate()?;
    if params.lambda == T::zero() {
        return Ok(T::one());
    }
    let pa = params.pt_a();
    let alpha = params.alpha;
    let two = lit::<T>(2.0);
    let LaplaceArgs { s, t, u, d, x } = *args;
    let g = |r: T, th: T| {
        let c = pa * r.powf(-alpha);
        let rho2 = r * r + d * d - two * r * d * th.cos();
        let rho = rho2.max(T::zero()).sqrt();
        let relay = if s == T::zero() {
            T::zero()
        } else if rho == T::zero() {
            T::infinity()
        } else {
            s * pa * pattern.gain(interferer_arrival_angle(r, th, rho)) * rho.powf(-alpha)
        };
        let ln_keep = -(relay.ln_1p() + (t * c).ln_1p() + (u * c).ln_1p());
        -ln_keep.exp_m1()
    };
    let e = quad::integrate_polar_annulus(g, x, tol)?;
    Ok((-(params.lambda * e.value)).exp())
}
