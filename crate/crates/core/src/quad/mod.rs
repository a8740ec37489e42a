//! Deterministic adaptive quadrature on finite, semi-infinite and polar
//! domains, and the Gauss hypergeometric function on the negative real axis.
//!
//! All integrators use a globally adaptive 21-point Gauss–Kronrod rule with
//! the QUADPACK error heuristic. Vector-valued integrands share abscissae so
//! that several related integrals can be computed for the price of one.

mod hypergeometric;

pub use hypergeometric::{gamma, hyp2f1, ln_gamma, recip_gamma};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// Error-control request for an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub rel: T,
    pub abs: T,
    pub max_evals: usize,
}

impl<T: Scalar> Default for Tolerance<T> {
    fn default() -> Self {
        Self { rel: T::default_rel_tol(), abs: T::default_abs_tol(), max_evals: 1_000_000 }
    }
}

impl<T: Scalar> Tolerance<T> {
    pub fn new(rel: T, abs: T, max_evals: usize) -> Result<Self> {
        let tol = Self { rel, abs, max_evals };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel > T::zero()) || !(self.abs > T::zero()) {
            return Err(crate::error::invalid("tolerance", "rel and abs must be positive"));
        }
        if self.max_evals < 1000 {
            return Err(crate::error::invalid("tolerance", "max_evals must be at least 1000"));
        }
        Ok(())
    }

    /// Same tolerance with both targets scaled by `factor`. The relative
    /// target never drops below the rule's round-off floor.
    pub fn tightened(&self, factor: T) -> Self {
        let floor = lit::<T>(60.0) * T::epsilon();
        Self { rel: (self.rel * factor).max(floor), abs: self.abs * factor, max_evals: self.max_evals }
    }
}

/// Result of a scalar integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: T,
    pub evals: usize,
}

/// Result of a vector-valued integration.
#[derive(Debug, Clone, PartialEq)]
pub struct VecIntegral<T> {
    pub values: Vec<T>,
    pub errors: Vec<T>,
    pub evals: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_289_943_686,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod abscissae.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const EVALS_PER_RULE: usize = 21;

struct Segment<T> {
    a: T,
    b: T,
    values: Vec<T>,
    errors: Vec<T>,
    splittable: bool,
}

/// Applies the 21-point Kronrod rule on `[a, b]` to every component.
fn gk21<T, F>(f: &mut F, a: T, b: T, n: usize, buf: &mut Rule<T>) -> Result<(Vec<T>, Vec<T>)>
where
    T: Scalar,
    F: FnMut(T, &mut [T]) -> Result<()>,
{
    let half = lit::<T>(0.5);
    let centre = (a + b) * half;
    let half_len = (b - a) * half;
    let abs_half_len = half_len.abs();

    // Sample all 21 abscissae first: fv[0] is the centre, then (left, right)
    // pairs in XGK order.
    let mut eval = |x: T, out: &mut [T]| -> Result<()> {
        f(x, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { at: to_f64(x) });
        }
        Ok(())
    };
    eval(centre, &mut buf.samples[0..n])?;
    for (j, &node) in XGK.iter().take(10).enumerate() {
        let dx = half_len * lit::<T>(node);
        let (left, right) = buf.pair_mut(j, n);
        eval(centre - dx, left)?;
        eval(centre + dx, right)?;
    }

    let mut values = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n);
    let eps = T::epsilon();
    for c in 0..n {
        let fc = buf.samples[c];
        let mut res_k = lit::<T>(WGK[10]) * fc;
        let mut res_g = T::zero();
        let mut res_abs = res_k.abs();
        for j in 0..10 {
            let (l, r) = buf.pair(j, n);
            let (fl, fr) = (l[c], r[c]);
            let w = lit::<T>(WGK[j]);
            res_k = res_k + w * (fl + fr);
            res_abs = res_abs + w * (fl.abs() + fr.abs());
            if j % 2 == 1 {
                res_g = res_g + lit::<T>(WG[j / 2]) * (fl + fr);
            }
        }
        let mean = res_k * half;
        let mut res_asc = lit::<T>(WGK[10]) * (fc - mean).abs();
        for (j, &w) in WGK.iter().enumerate().take(10) {
            let (l, r) = buf.pair(j, n);
            res_asc = res_asc + lit::<T>(w) * ((l[c] - mean).abs() + (r[c] - mean).abs());
        }
        let value = res_k * half_len;
        res_abs = res_abs * abs_half_len;
        res_asc = res_asc * abs_half_len;
        let mut err = ((res_k - res_g) * half_len).abs();
        if res_asc != T::zero() && err != T::zero() {
            let scale = (lit::<T>(200.0) * err / res_asc).powf(lit(1.5));
            err = res_asc * scale.min(T::one());
        }
        if res_abs > T::min_positive_value() / (lit::<T>(50.0) * eps) {
            err = err.max(lit::<T>(50.0) * eps * res_abs);
        }
        values.push(value);
        errors.push(err);
    }
    Ok((values, errors))
}

struct Rule<T> {
    samples: Vec<T>,
}

impl<T: Scalar> Rule<T> {
    fn new(n: usize) -> Self {
        Self { samples: vec![T::zero(); 21 * n] }
    }

    fn pair(&self, j: usize, n: usize) -> (&[T], &[T]) {
        let base = n * (1 + 2 * j);
        (&self.samples[base..base + n], &self.samples[base + n..base + 2 * n])
    }

    fn pair_mut(&mut self, j: usize, n: usize) -> (&mut [T], &mut [T]) {
        let base = n * (1 + 2 * j);
        let (l, r) = self.samples[base..base + 2 * n].split_at_mut(n);
        (l, r)
    }
}

/// Globally adaptive integration of an `n`-component integrand on `[a, b]`.
///
/// The integrand writes its `n` values into the output slice. Subdivision
/// continues until every component meets `max(abs, rel * |value|)`.
pub fn integrate_vec<T, F>(mut f: F, a: T, b: T, n: usize, tol: &Tolerance<T>) -> Result<VecIntegral<T>>
where
    T: Scalar,
    F: FnMut(T, &mut [T]) -> Result<()>,
{
    tol.validate()?;
    if n == 0 {
        return Ok(VecIntegral { values: Vec::new(), errors: Vec::new(), evals: 0 });
    }
    let mut buf = Rule::new(n);
    if a == b {
        return Ok(VecIntegral { values: vec![T::zero(); n], errors: vec![T::zero(); n], evals: 0 });
    }
    let (values, errors) = gk21(&mut f, a, b, n, &mut buf)?;
    let mut evals = EVALS_PER_RULE;
    let mut segments = vec![Segment { a, b, values, errors, splittable: true }];

    loop {
        let mut total = vec![T::zero(); n];
        let mut total_err = vec![T::zero(); n];
        for s in &segments {
            for c in 0..n {
                total[c] = total[c] + s.values[c];
                total_err[c] = total_err[c] + s.errors[c];
            }
        }
        let targets: Vec<T> = total.iter().map(|v| tol.abs.max(tol.rel * v.abs())).collect();
        let converged = total_err.iter().zip(&targets).all(|(e, t)| *e <= *t);
        if converged {
            return Ok(VecIntegral { values: total, errors: total_err, evals });
        }

        // Worst segment by error relative to the per-component target.
        let mut worst: Option<(usize, T)> = None;
        for (i, s) in segments.iter().enumerate() {
            if !s.splittable {
                continue;
            }
            let score = s
                .errors
                .iter()
                .zip(&targets)
                .map(|(e, t)| *e / *t)
                .fold(T::zero(), T::max);
            if worst.is_none_or(|(_, w)| score > w) {
                worst = Some((i, score));
            }
        }
        let Some((idx, _)) = worst else {
            // Every remaining segment is at the resolution limit.
            let err = total_err.iter().copied().fold(T::zero(), T::max);
            return Err(Error::BudgetExhausted {
                evals,
                value: to_f64(total[0]),
                error: to_f64(err),
            });
        };
        if evals + 2 * EVALS_PER_RULE > tol.max_evals {
            let err = total_err.iter().copied().fold(T::zero(), T::max);
            return Err(Error::BudgetExhausted { evals, value: to_f64(total[0]), error: to_f64(err) });
        }

        let seg = segments.swap_remove(idx);
        let mid = (seg.a + seg.b) * lit(0.5);
        if !(mid > seg.a.min(seg.b) && mid < seg.a.max(seg.b)) {
            segments.push(Segment { splittable: false, ..seg });
            continue;
        }
        let (lv, le) = gk21(&mut f, seg.a, mid, n, &mut buf)?;
        let (rv, re) = gk21(&mut f, mid, seg.b, n, &mut buf)?;
        evals += 2 * EVALS_PER_RULE;
        segments.push(Segment { a: seg.a, b: mid, values: lv, errors: le, splittable: true });
        segments.push(Segment { a: mid, b: seg.b, values: rv, errors: re, splittable: true });
    }
}

/// Adaptive integration of a scalar function on the finite interval `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, tol: &Tolerance<T>) -> Result<Integral<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let r = integrate_vec(
        |x, out: &mut [T]| {
            out[0] = f(x);
            Ok(())
        },
        a,
        b,
        1,
        tol,
    )?;
    Ok(Integral { value: r.values[0], error: r.errors[0], evals: r.evals })
}

/// Integrates a vector-valued integrand over `[a, ∞)`.
///
/// Uses `r = a + scale * u / (1 - u)` on `u ∈ [0, 1)`. `scale` should be of
/// the order of the length over which the integrand varies.
pub fn integrate_semi_infinite_vec<T, F>(
    mut f: F,
    a: T,
    scale: T,
    n: usize,
    tol: &Tolerance<T>,
) -> Result<VecIntegral<T>>
where
    T: Scalar,
    F: FnMut(T, &mut [T]) -> Result<()>,
{
    if !(scale > T::zero()) {
        return Err(crate::error::invalid("scale", "must be positive"));
    }
    integrate_vec(
        |u, out: &mut [T]| {
            let one_minus = T::one() - u;
            let r = a + scale * u / one_minus;
            let jac = scale / (one_minus * one_minus);
            f(r, out)?;
            for v in out.iter_mut() {
                *v = *v * jac;
            }
            Ok(())
        },
        T::zero(),
        T::one(),
        n,
        tol,
    )
}

/// Integrates `f` over `[a, ∞)`; the integrand must be absolutely integrable.
pub fn integrate_semi_infinite<T, F>(mut f: F, a: T, tol: &Tolerance<T>) -> Result<Integral<T>>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let scale = a.abs().max(T::one());
    let r = integrate_semi_infinite_vec(
        |x, out: &mut [T]| {
            out[0] = f(x);
            Ok(())
        },
        a,
        scale,
        1,
        tol,
    )?;
    Ok(Integral { value: r.values[0], error: r.errors[0], evals: r.evals })
}

/// Integrates `g(r, θ) r dr dθ` over the exterior `{r ≥ r0, θ ∈ [0, 2π)}`.
///
/// Nested adaptive rules: the angular integral is resolved at every radial
/// abscissa with a tolerance ten times tighter than `tol`.
pub fn integrate_polar_annulus<T, G>(mut g: G, r0: T, tol: &Tolerance<T>) -> Result<Integral<T>>
where
    T: Scalar,
    G: FnMut(T, T) -> T,
{
    let inner_tol = tol.tightened(lit(0.1));
    let two_pi = T::TAU();
    let scale = r0.max(T::one());
    let mut evals = 0usize;
    let r = integrate_semi_infinite_vec(
        |r, out: &mut [T]| {
            let ring = integrate(|th| g(r, th), T::zero(), two_pi, &inner_tol)?;
            evals += ring.evals;
            out[0] = ring.value * r;
            Ok(())
        },
        r0,
        scale,
        1,
        tol,
    )?;
    Ok(Integral { value: r.values[0], error: r.errors[0], evals: evals + r.evals })
}

/// Vector-valued integral over the rectangle `[x0, x1] × [y0, y1]`,
/// inner dimension `y`.
pub fn integrate_rect_vec<T, F>(
    mut f: F,
    (x0, x1): (T, T),
    (y0, y1): (T, T),
    n: usize,
    tol: &Tolerance<T>,
) -> Result<VecIntegral<T>>
where
    T: Scalar,
    F: FnMut(T, T, &mut [T]) -> Result<()>,
{
    let inner_tol = tol.tightened(lit(0.1));
    let mut evals = 0usize;
    let mut r = integrate_vec(
        |x, out: &mut [T]| {
            let inner = integrate_vec(|y, o: &mut [T]| f(x, y, o), y0, y1, n, &inner_tol)?;
            evals += inner.evals;
            out.copy_from_slice(&inner.values);
            Ok(())
        },
        x0,
        x1,
        n,
        tol,
    )?;
    r.evals += evals;
    Ok(r)
}
