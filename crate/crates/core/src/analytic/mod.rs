//! Semi-analytic engine: decoding probabilities, per-position throughput and
//! energy of every scheme, and their averages and distributions over the
//! served UE's position.
//!
//! Every joint expectation at one UE position shares the relay-side Laplace
//! argument, so all of them are obtained from a single batched evaluation of
//! the joint transform.

mod sc;

pub use sc::{beta_direct_opt, beta_relay_opt, sc_betas, sc_multipliers, sc_probs, throughput_sc, ScExpectations};

use crate::error::{invalid, Error, Result};
use crate::interference::{joint_laplace_batch, laplace_single};
use crate::model::{derive_link_geometry, LinkGeometry, NetworkParams, Protocol, Receiver, SchemeSpec, UePolar};
use crate::quad::{self, Tolerance};
use crate::scalar::{lit, Scalar};

/// Success probabilities of the links and link combinations at one UE
/// position, SIC receiver at the BS.
///
/// `ub`/`ub2` refer to the UE's direct transmission without a concurrent
/// relay transmission, `ubi` to the same with the relay forwarding, `rb` to
/// the relay's forward decoded under SIC, `ub1` to the slot-1 direct link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiExpectations<T> {
    pub e_ub: T,
    pub e_ur: T,
    pub e_ur_rb: T,
    pub e_ur_ub: T,
    pub e_ur_ubi: T,
    pub e_ub1_ur_rb: T,
    pub e_ub1_ur_ub2i: T,
    pub e_ub1_ur_ub2: T,
}

impl<T: Scalar> ChiExpectations<T> {
    /// Packets delivered per slot pair, SIC receiver.
    pub fn throughput(&self, protocol: Protocol) -> T {
        let baseline = self.e_ur_rb + self.e_ub - self.e_ur_ub + self.e_ur_ubi;
        let selection = baseline + self.e_ub - self.e_ub1_ur_rb;
        match protocol {
            Protocol::Basic => lit::<T>(2.0) * self.e_ub,
            Protocol::BaselineRelay => baseline,
            Protocol::SelectionRelay => selection,
            Protocol::FeedbackRelay => selection - self.e_ub1_ur_ub2i + self.e_ub1_ur_ub2,
        }
    }

    pub fn as_array(&self) -> [T; 8] {
        [
            self.e_ub,
            self.e_ur,
            self.e_ur_rb,
            self.e_ur_ub,
            self.e_ur_ubi,
            self.e_ub1_ur_rb,
            self.e_ub1_ur_ub2i,
            self.e_ub1_ur_ub2,
        ]
    }

    pub const NAMES: [&'static str; 8] =
        ["ub", "ur", "ur_rb", "ur_ub", "ur_ubi", "ub1_ur_rb", "ub1_ur_ub2i", "ub1_ur_ub2"];
}

/// Success probabilities needed by the receivers without SIC, where the UE
/// is silent while its relay forwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoSicExpectations<T> {
    /// Relay decodes in slot 1 and its lone forward is decoded.
    pub e_ur_rb: T,
    pub e_ub1_ur_rb: T,
    /// Direct packets decoded in both slots (feedback, BS already has slot 1).
    pub e_ub1_ub2: T,
}

/// Relay energy accounting for the feedback protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyAccounting {
    /// Relay forward probability `E[χ_ur](1 - E[χ_ub1])`, marginals
    /// multiplied.
    #[default]
    AsPrinted,
    /// Exact `E[χ_ur] - E[χ_ur χ_ub1]`, keeping the interference
    /// correlation between the two links.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticOptions<T> {
    /// Tolerance of the Laplace-functional integrals.
    pub laplace_tol: Tolerance<T>,
    /// Tolerance of averages over the UE position.
    pub cell_tol: Tolerance<T>,
    pub energy: EnergyAccounting,
}

impl<T: Scalar> Default for AnalyticOptions<T> {
    fn default() -> Self {
        Self {
            laplace_tol: Tolerance::default(),
            cell_tol: Tolerance { rel: lit(1e-6), abs: lit(1e-9), max_evals: 2_000_000 },
            energy: EnergyAccounting::AsPrinted,
        }
    }
}

/// Expected per-slot-pair quantities of one scheme at one UE position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointOutcome<T> {
    /// Packets delivered per slot pair.
    pub throughput: T,
    /// Expected number of UE transmissions per slot pair.
    pub ue_slots: T,
    /// Expected number of relay forwards per slot pair.
    pub relay_slots: T,
}

impl<T: Scalar> PointOutcome<T> {
    /// Expected energy spent per slot pair [J].
    pub fn energy_spent(&self, params: &NetworkParams<T>) -> T {
        params.slot_t * (params.pt * self.ue_slots + params.pr_actual() * self.relay_slots)
    }

    /// Renewal-reward energy per delivered packet [J].
    pub fn energy_per_packet(&self, params: &NetworkParams<T>) -> Result<T> {
        energy_ratio(self.energy_spent(params), self.throughput)
    }
}

fn energy_ratio<T: Scalar>(spent: T, delivered: T) -> Result<T> {
    if delivered > T::zero() {
        Ok(spent / delivered)
    } else {
        Err(Error::ZeroThroughput)
    }
}

/// `e^{-k/γ}`, with `γ = ∞` allowed.
pub(crate) fn decay<T: Scalar>(k: T, gamma: T) -> T {
    (-(k / gamma)).exp()
}

/// Probability that a direct transmission from `d_ub` is decoded.
pub fn p_direct<T: Scalar>(params: &NetworkParams<T>, d_ub: T) -> Result<T> {
    if !(d_ub > T::zero()) || !d_ub.is_finite() {
        return Err(invalid("d_ub", "must be positive"));
    }
    let gamma = params.mean_snr(params.pt, d_ub, params.rx_pattern_bs.peak_gain());
    let sigma = params.theta / (params.noise * gamma);
    Ok(decay(params.theta, gamma) * laplace_single(params, sigma, d_ub)?)
}

/// Probability that two simultaneous signals with mean SNRs `gamma1`,
/// `gamma2` are both decoded by SIC at normalized interference `i_hat`.
pub fn sic_pair_prob<T: Scalar>(gamma1: T, gamma2: T, theta: T, i_hat: T) -> Result<T> {
    if !(gamma1 > T::zero()) || !(gamma2 > T::zero()) {
        return Err(invalid("gamma", "mean SNRs must be positive"));
    }
    if !(theta >= T::one()) {
        return Err(invalid("theta", "the SIC model requires theta >= 1"));
    }
    if !(i_hat >= T::zero()) {
        return Err(invalid("i_hat", "must be non-negative"));
    }
    let w = theta * (i_hat + T::one());
    let both = decay(w, gamma1) * decay(w, gamma2);
    // Signal 1 stronger and decoded first, then signal 2 on its own.
    let first = both * decay(theta * w, gamma1) / (T::one() + theta * gamma2 / gamma1);
    let second = both * decay(theta * w, gamma2) / (T::one() + theta * gamma1 / gamma2);
    Ok(first + second)
}

/// SIC coefficients for the relay's forward decoded at the BS while the UE
/// transmits: relay first (`.0`) or UE first then relay (`.1`), each as
/// `(factor, Laplace argument at the BS)`.
pub(crate) struct SicSplit<T> {
    pub direct: (T, T),
    pub cancelled: (T, T),
}

/// Coefficients for decoding the signal with mean SNR `g_want` while the
/// other, `g_other`, is also present.
pub(crate) fn sic_split<T: Scalar>(params: &NetworkParams<T>, g_want: T, g_other: T) -> SicSplit<T> {
    let th = params.theta;
    let n0 = params.noise;
    let one = T::one();
    let direct_factor = decay(th, g_want) / (one + th * g_other / g_want);
    let direct_arg = th / (n0 * g_want);
    let mult = (th + one) / g_other + one / g_want;
    let cancelled_factor = (-(th * mult)).exp() / (one + th * g_want / g_other);
    let cancelled_arg = th / n0 * mult;
    SicSplit { direct: (direct_factor, direct_arg), cancelled: (cancelled_factor, cancelled_arg) }
}

/// Joint transforms at the relay with argument `s_relay` for each of
/// `origin`, using the configured relay pattern.
pub(crate) fn joint_batch<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    s_relay: T,
    origin: &[[T; 2]],
    tol: &Tolerance<T>,
) -> Result<Vec<T>> {
    joint_laplace_batch(params, &params.rx_pattern_relay, s_relay, params.d_rb, geom.ue.d_ub, origin, tol)
}

/// All SIC-receiver expectations at one UE position.
pub fn chi_expectations<T: Scalar>(params: &NetworkParams<T>, geom: &LinkGeometry<T>) -> Result<ChiExpectations<T>> {
    chi_expectations_with(params, geom, &Tolerance::default())
}

pub fn chi_expectations_with<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    tol: &Tolerance<T>,
) -> Result<ChiExpectations<T>> {
    let th = params.theta;
    let n0 = params.noise;
    let (g_ub, g_rb, g_ur) = (geom.gamma_ub, geom.gamma_rb, geom.gamma_ur);
    let s_ub = th / (n0 * g_ub);
    let s_ur = th / (n0 * g_ur);
    let rb = sic_split(params, g_rb, g_ub);
    let ubi = sic_split(params, g_ub, g_rb);
    let z = T::zero();
    let j = joint_batch(
        params,
        geom,
        s_ur,
        &[
            [z, z],
            [rb.direct.1, z],
            [rb.cancelled.1, z],
            [s_ub, z],
            [ubi.cancelled.1, z],
            [s_ub, rb.direct.1],
            [s_ub, rb.cancelled.1],
            [s_ub, s_ub],
            [s_ub, ubi.cancelled.1],
        ],
        tol,
    )?;
    let e_ub = decay(th, g_ub) * laplace_single(params, s_ub, geom.ue.d_ub)?;
    let ur = decay(th, g_ur);
    let ub = decay(th, g_ub);
    // ubi.direct's Laplace argument equals s_ub.
    Ok(ChiExpectations {
        e_ub,
        e_ur: ur * j[0],
        e_ur_rb: ur * (rb.direct.0 * j[1] + rb.cancelled.0 * j[2]),
        e_ur_ub: ur * ub * j[3],
        e_ur_ubi: ur * (ubi.direct.0 * j[3] + ubi.cancelled.0 * j[4]),
        e_ub1_ur_rb: ub * ur * (rb.direct.0 * j[5] + rb.cancelled.0 * j[6]),
        e_ub1_ur_ub2i: ub * ur * (ubi.direct.0 * j[7] + ubi.cancelled.0 * j[8]),
        e_ub1_ur_ub2: ub * ur * ub * j[7],
    })
}

/// Expectations for the no-SIC receivers: `lower` keeps other-cell
/// interference in the relay slot, otherwise that slot is interference-free.
pub fn nosic_expectations<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    lower: bool,
    tol: &Tolerance<T>,
) -> Result<NoSicExpectations<T>> {
    let th = params.theta;
    let n0 = params.noise;
    let (g_ub, g_rb, g_ur) = (geom.gamma_ub, geom.gamma_rb, geom.gamma_ur);
    let s_ub = th / (n0 * g_ub);
    let s_ur = th / (n0 * g_ur);
    let s_rb = if lower { th / (n0 * g_rb) } else { T::zero() };
    let j = joint_batch(params, geom, s_ur, &[[T::zero(), s_rb], [s_ub, s_rb]], tol)?;
    let base = decay(th, g_ur) * decay(th, g_rb);
    let slot2 = if lower {
        let same_point = joint_laplace_batch(
            params,
            &params.rx_pattern_relay,
            T::zero(),
            T::zero(),
            geom.ue.d_ub,
            &[[s_ub, s_ub]],
            tol,
        )?;
        same_point[0]
    } else {
        laplace_single(params, s_ub, geom.ue.d_ub)?
    };
    Ok(NoSicExpectations {
        e_ur_rb: base * j[0],
        e_ub1_ur_rb: base * decay(th, g_ub) * j[1],
        e_ub1_ub2: decay(th, g_ub) * decay(th, g_ub) * slot2,
    })
}

/// Per-position evaluator that caches the shared expectations across
/// several schemes.
pub struct PointEvaluator<'a, T: Scalar> {
    params: &'a NetworkParams<T>,
    geom: LinkGeometry<T>,
    opts: &'a AnalyticOptions<T>,
    chi: Option<ChiExpectations<T>>,
    nosic: [Option<NoSicExpectations<T>>; 2],
    sc: Vec<ScExpectations<T>>,
}

impl<'a, T: Scalar> PointEvaluator<'a, T> {
    pub fn new(params: &'a NetworkParams<T>, geom: LinkGeometry<T>, opts: &'a AnalyticOptions<T>) -> Self {
        Self { params, geom, opts, chi: None, nosic: [None, None], sc: Vec::new() }
    }

    pub fn geometry(&self) -> &LinkGeometry<T> {
        &self.geom
    }

    pub fn chi(&mut self) -> Result<ChiExpectations<T>> {
        if let Some(c) = self.chi {
            return Ok(c);
        }
        let c = chi_expectations_with(self.params, &self.geom, &self.opts.laplace_tol)?;
        self.chi = Some(c);
        Ok(c)
    }

    fn nosic(&mut self, lower: bool) -> Result<NoSicExpectations<T>> {
        let idx = usize::from(lower);
        if let Some(n) = self.nosic[idx] {
            return Ok(n);
        }
        let n = nosic_expectations(self.params, &self.geom, lower, &self.opts.laplace_tol)?;
        self.nosic[idx] = Some(n);
        Ok(n)
    }

    pub fn sc(&mut self, beta: T) -> Result<ScExpectations<T>> {
        if let Some(e) = self.sc.iter().find(|e| e.beta == beta) {
            return Ok(*e);
        }
        let e = sc::sc_probs_with(self.params, &self.geom, beta, &self.opts.laplace_tol)?;
        self.sc.push(e);
        Ok(e)
    }

    /// Expected outcome of `scheme` at this position.
    pub fn outcome(&mut self, scheme: &SchemeSpec<T>) -> Result<PointOutcome<T>> {
        scheme.validate()?;
        if scheme.sc.is_on() {
            return sc::sc_outcome(self, scheme);
        }
        let two = lit::<T>(2.0);
        let chi = self.chi()?;
        let throughput;
        let mut ue_slots = two;
        let relay_slots;
        match scheme.receiver {
            Receiver::Sic => {
                throughput = chi.throughput(scheme.protocol);
                relay_slots = match scheme.protocol {
                    Protocol::Basic => T::zero(),
                    Protocol::BaselineRelay | Protocol::SelectionRelay => chi.e_ur,
                    Protocol::FeedbackRelay => self.feedback_relay_slots(chi.e_ur, chi.e_ub, chi.e_ur_ub),
                };
            }
            Receiver::NoSicLowerBound | Receiver::NoSicUpperBound => {
                let n = self.nosic(scheme.receiver == Receiver::NoSicLowerBound)?;
                ue_slots = T::one();
                match scheme.protocol {
                    Protocol::Basic => unreachable!("rejected by SchemeSpec::validate"),
                    Protocol::BaselineRelay => {
                        throughput = n.e_ur_rb;
                        relay_slots = chi.e_ur;
                    }
                    Protocol::SelectionRelay => {
                        throughput = chi.e_ub + n.e_ur_rb - n.e_ub1_ur_rb;
                        relay_slots = chi.e_ur;
                    }
                    Protocol::FeedbackRelay => {
                        throughput = chi.e_ub + n.e_ub1_ub2 + n.e_ur_rb - n.e_ub1_ur_rb;
                        ue_slots = T::one() + chi.e_ub;
                        relay_slots = self.feedback_relay_slots(chi.e_ur, chi.e_ub, chi.e_ur_ub);
                    }
                }
            }
        }
        Ok(PointOutcome { throughput, ue_slots, relay_slots })
    }

    pub(crate) fn feedback_relay_slots(&self, e_ur: T, e_ub1: T, e_ur_ub1: T) -> T {
        match self.opts.energy {
            EnergyAccounting::AsPrinted => e_ur * (T::one() - e_ub1),
            EnergyAccounting::Joint => e_ur - e_ur_ub1,
        }
    }

    pub(crate) fn params(&self) -> &NetworkParams<T> {
        self.params
    }
}

/// Throughput of a non-SC scheme at one position, packets per slot pair.
pub fn throughput_scheme<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    scheme: &SchemeSpec<T>,
) -> Result<T> {
    if scheme.sc.is_on() {
        return Err(invalid("scheme", "use throughput_sc for superposition-coded schemes"));
    }
    let opts = AnalyticOptions::default();
    Ok(PointEvaluator::new(params, *geom, &opts).outcome(scheme)?.throughput)
}

/// Energy per delivered packet at one position [J].
pub fn energy_per_packet<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    scheme: &SchemeSpec<T>,
    opts: &AnalyticOptions<T>,
) -> Result<T> {
    PointEvaluator::new(params, *geom, opts).outcome(scheme)?.energy_per_packet(params)
}

/// Evaluates several schemes at one position, sharing the expensive
/// transforms.
pub fn evaluate_point<T: Scalar>(
    params: &NetworkParams<T>,
    ue: UePolar<T>,
    schemes: &[SchemeSpec<T>],
    opts: &AnalyticOptions<T>,
) -> Result<Vec<PointOutcome<T>>> {
    let geom = derive_link_geometry(params, ue)?;
    let mut eval = PointEvaluator::new(params, geom, opts);
    schemes.iter().map(|s| eval.outcome(s)).collect()
}

/// Cell-averaged expectations of one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAverage<T> {
    pub throughput: T,
    pub ue_slots: T,
    pub relay_slots: T,
    /// Integration error estimate of the throughput.
    pub throughput_error: T,
}

impl<T: Scalar> CellAverage<T> {
    /// Long-run energy per packet over all UE positions: mean energy per slot
    /// pair over mean packets per slot pair.
    pub fn energy_per_packet(&self, params: &NetworkParams<T>) -> Result<T> {
        let spent = params.slot_t * (params.pt * self.ue_slots + params.pr_actual() * self.relay_slots);
        energy_ratio(spent, self.throughput)
    }
}

/// Maps `u ∈ [0, 1)` to the serving distance whose CDF equals `u`.
pub fn distance_quantile<T: Scalar>(params: &NetworkParams<T>, u: T) -> T {
    (-(-u).ln_1p() / (params.lambda * T::PI())).sqrt()
}

/// Averages of every scheme over the served UE's position.
///
/// With `u = 1 - exp(-λπr²)` the position density is uniform on
/// `[0, 1) × [-π/k_r, π/k_r]`; the integrand is even in the angle.
pub fn average_schemes<T: Scalar>(
    params: &NetworkParams<T>,
    schemes: &[SchemeSpec<T>],
    opts: &AnalyticOptions<T>,
) -> Result<Vec<CellAverage<T>>> {
    params.validate()?;
    if !(params.lambda > T::zero()) {
        return Err(invalid("lambda", "cell averages need a positive UE density"));
    }
    for s in schemes {
        s.validate()?;
    }
    let n = schemes.len();
    let half_width = params.sector_half_width();
    let r = quad::integrate_rect_vec(
        |th, u, out: &mut [T]| {
            let ue = UePolar::new(distance_quantile(params, u), th);
            let outcomes = evaluate_point(params, ue, schemes, opts)?;
            for (k, o) in outcomes.iter().enumerate() {
                out[3 * k] = o.throughput;
                out[3 * k + 1] = o.ue_slots;
                out[3 * k + 2] = o.relay_slots;
            }
            Ok(())
        },
        (T::zero(), half_width),
        (T::zero(), T::one()),
        3 * n,
        &opts.cell_tol,
    )?;
    let norm = half_width.recip();
    Ok((0..n)
        .map(|k| CellAverage {
            throughput: r.values[3 * k] * norm,
            ue_slots: r.values[3 * k + 1] * norm,
            relay_slots: r.values[3 * k + 2] * norm,
            throughput_error: r.errors[3 * k] * norm,
        })
        .collect())
}

/// Cell-average throughput of one scheme.
pub fn average_throughput<T: Scalar>(params: &NetworkParams<T>, scheme: &SchemeSpec<T>) -> Result<T> {
    Ok(average_schemes(params, std::slice::from_ref(scheme), &AnalyticOptions::default())?[0].throughput)
}

/// Distribution of the per-position throughput over the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve<T> {
    pub thresholds: Vec<T>,
    pub probs: Vec<T>,
}

/// Per-position throughputs on an equal-weight midpoint grid of
/// `n_radial × n_angular` cells in `(u, θ)`; sorted ascending.
pub fn throughput_samples<T: Scalar>(
    params: &NetworkParams<T>,
    scheme: &SchemeSpec<T>,
    n_radial: usize,
    n_angular: usize,
    opts: &AnalyticOptions<T>,
) -> Result<Vec<T>> {
    params.validate()?;
    if n_radial == 0 || n_angular == 0 {
        return Err(invalid("grid", "CDF grid needs at least one cell per axis"));
    }
    let half_width = params.sector_half_width();
    let mut values = Vec::with_capacity(n_radial * n_angular);
    for i in 0..n_radial {
        let u = (lit::<T>(i as f64) + lit(0.5)) / lit(n_radial as f64);
        let d_ub = distance_quantile(params, u);
        for j in 0..n_angular {
            let th = (lit::<T>(j as f64) + lit(0.5)) / lit(n_angular as f64) * half_width;
            let o = evaluate_point(params, UePolar::new(d_ub, th), std::slice::from_ref(scheme), opts)?;
            values.push(o[0].throughput);
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite throughput"));
    Ok(values)
}

/// `P[T(r, θ) ≤ t]` at each threshold from sorted samples.
pub fn cdf_from_samples<T: Scalar>(sorted: &[T], thresholds: &[T]) -> CdfCurve<T> {
    let n = lit::<T>(sorted.len() as f64);
    let probs = thresholds
        .iter()
        .map(|t| {
            let count = sorted.partition_point(|v| *v <= *t);
            lit::<T>(count as f64) / n
        })
        .collect();
    CdfCurve { thresholds: thresholds.to_vec(), probs }
}

/// Throughput CDF of one scheme at the given thresholds.
pub fn throughput_cdf<T: Scalar>(
    params: &NetworkParams<T>,
    scheme: &SchemeSpec<T>,
    thresholds: &[T],
    opts: &AnalyticOptions<T>,
) -> Result<CdfCurve<T>> {
    let samples = throughput_samples(params, scheme, 400, 24, opts)?;
    Ok(cdf_from_samples(&samples, thresholds))
}
