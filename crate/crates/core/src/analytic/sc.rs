//! Superposition coding: the UE's first transmission carries two packets,
//! `x` with power fraction `β` and `y` with `1 - β`, separated by SIC at the
//! receiver.

use super::{decay, joint_batch, sic_split, AnalyticOptions, PointEvaluator, PointOutcome};
use crate::error::{invalid, Result};
use crate::interference::laplace_single;
use crate::model::{LinkGeometry, NetworkParams, Protocol, SchemeSpec, ScMode};
use crate::quad::Tolerance;
use crate::scalar::{lit, Scalar};

/// Decoding probabilities with superposition coding at power split `beta`.
///
/// `x` means only the stronger packet was decoded, `y` that both were.
/// Joint terms pair the slot-1 SC events with the plain slot-2 events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScExpectations<T> {
    pub beta: T,
    /// BS decodes at least the stronger packet.
    pub p_first_ub: T,
    pub e_ub_x: T,
    pub e_ub_y: T,
    pub e_ur_y: T,
    pub e_ury_rb: T,
    pub e_ury_ub: T,
    pub e_ury_ubi: T,
    pub e_uby_ury_rb: T,
    pub e_uby_ury_ubi: T,
    pub e_uby_ury_ub: T,
    pub e_ury_uby: T,
    /// Plain direct transmission without SC (slot 2).
    pub e_ub: T,
}

impl<T: Scalar> ScExpectations<T> {
    /// Basic scheme with SC in both slots.
    pub fn direct_throughput(&self) -> T {
        lit::<T>(4.0) * self.e_ub_y
    }

    /// Relaying protocols with SC in the first slot.
    pub fn relay_throughput(&self, protocol: Protocol) -> T {
        let baseline = self.e_ub_x + self.e_ub + self.e_ury_rb - self.e_ury_ub + self.e_ury_ubi;
        let selection = baseline + self.e_ub_y - self.e_uby_ury_rb;
        match protocol {
            Protocol::Basic => self.direct_throughput(),
            Protocol::BaselineRelay => baseline,
            Protocol::SelectionRelay => selection,
            Protocol::FeedbackRelay => selection - self.e_uby_ury_ubi + self.e_uby_ury_ub,
        }
    }
}

/// Fading thresholds `(k1, k2)` in units of `(Î + 1)/γ` for decoding the
/// stronger packet, and both packets. `k1 = ∞` when `β(ϑ+1) ≤ ϑ`.
pub fn sc_multipliers<T: Scalar>(theta: T, beta: T) -> (T, T) {
    let margin = beta * (theta + T::one()) - theta;
    if !(margin > T::zero()) {
        return (T::infinity(), T::infinity());
    }
    let k1 = theta / margin;
    let k2 = k1.max(theta / (T::one() - beta));
    (k1, k2)
}

/// Split maximizing the probability that the BS decodes both packets.
pub fn beta_direct_opt<T: Scalar>(theta: T) -> T {
    (theta + T::one()) / (theta + lit(2.0))
}

/// Split minimizing `1/(γ_ub[β(ϑ+1)-ϑ]) + 1/(γ_ur(1-β))`, clamped below
/// at [`beta_direct_opt`]; `q = γ_ur/γ_ub`.
///
/// Written as `1 - 1/(ϑ+1+√(q(ϑ+1)))`, which equals the textbook
/// `1 - (1-√(q/(ϑ+1)))/(ϑ+1-q)` and has no removable singularity at
/// `q = ϑ+1`.
pub fn beta_relay_opt<T: Scalar>(theta: T, q: T) -> T {
    let a = theta + T::one();
    let unconstrained = T::one() - (a + (q * a).sqrt()).recip();
    unconstrained.max(beta_direct_opt(theta))
}

/// `(β^opt, β_R^opt)` at one position.
pub fn sc_betas<T: Scalar>(params: &NetworkParams<T>, geom: &LinkGeometry<T>) -> Result<(T, T)> {
    if !(params.theta >= T::one()) {
        return Err(invalid("theta", "the SC model requires theta >= 1"));
    }
    if !(geom.d_ur > T::zero()) {
        return Err(invalid("d_ur", "must be positive"));
    }
    let q = geom.gamma_ur / geom.gamma_ub;
    Ok((beta_direct_opt(params.theta), beta_relay_opt(params.theta, q)))
}

/// SC decoding probabilities at one position.
pub fn sc_probs<T: Scalar>(params: &NetworkParams<T>, geom: &LinkGeometry<T>, beta: T) -> Result<ScExpectations<T>> {
    sc_probs_with(params, geom, beta, &Tolerance::default())
}

pub(super) fn sc_probs_with<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    beta: T,
    tol: &Tolerance<T>,
) -> Result<ScExpectations<T>> {
    if !(beta >= lit(0.5) && beta < T::one()) {
        return Err(invalid("beta", "power split must lie in [0.5, 1)"));
    }
    let th = params.theta;
    let n0 = params.noise;
    let x = geom.ue.d_ub;
    let (g_ub, g_rb, g_ur) = (geom.gamma_ub, geom.gamma_rb, geom.gamma_ur);
    let s_ub = th / (n0 * g_ub);
    let ub = decay(th, g_ub);
    let e_ub = ub * laplace_single(params, s_ub, x)?;

    let (k1, k2) = sc_multipliers(th, beta);
    let z = T::zero();
    if !k1.is_finite() {
        return Ok(ScExpectations {
            beta,
            p_first_ub: z,
            e_ub_x: z,
            e_ub_y: z,
            e_ur_y: z,
            e_ury_rb: z,
            e_ury_ub: z,
            e_ury_ubi: z,
            e_uby_ury_rb: z,
            e_uby_ury_ubi: z,
            e_uby_ury_ub: z,
            e_ury_uby: z,
            e_ub,
        });
    }
    let p_first_ub = decay(k1, g_ub) * laplace_single(params, k1 / (n0 * g_ub), x)?;
    let tau = k2 / (n0 * g_ub);
    let p_both_ub = decay(k2, g_ub) * laplace_single(params, tau, x)?;

    let rb = sic_split(params, g_rb, g_ub);
    let ubi = sic_split(params, g_ub, g_rb);
    let j = joint_batch(
        params,
        geom,
        k2 / (n0 * g_ur),
        &[
            [z, z],
            [rb.direct.1, z],
            [rb.cancelled.1, z],
            [s_ub, z],
            [ubi.cancelled.1, z],
            [tau, rb.direct.1],
            [tau, rb.cancelled.1],
            [tau, s_ub],
            [tau, ubi.cancelled.1],
            [tau, z],
        ],
        tol,
    )?;
    let ur = decay(k2, g_ur);
    let uby = decay(k2, g_ub);
    Ok(ScExpectations {
        beta,
        p_first_ub,
        e_ub_x: (p_first_ub - p_both_ub).max(z),
        e_ub_y: p_both_ub,
        e_ur_y: ur * j[0],
        e_ury_rb: ur * (rb.direct.0 * j[1] + rb.cancelled.0 * j[2]),
        e_ury_ub: ur * ub * j[3],
        e_ury_ubi: ur * (ubi.direct.0 * j[3] + ubi.cancelled.0 * j[4]),
        e_uby_ury_rb: uby * ur * (rb.direct.0 * j[5] + rb.cancelled.0 * j[6]),
        e_uby_ury_ubi: uby * ur * (ubi.direct.0 * j[7] + ubi.cancelled.0 * j[8]),
        e_uby_ury_ub: uby * ur * ub * j[7],
        e_ury_uby: ur * uby * j[9],
        e_ub,
    })
}

pub(super) fn sc_outcome<T: Scalar>(
    eval: &mut PointEvaluator<'_, T>,
    scheme: &SchemeSpec<T>,
) -> Result<PointOutcome<T>> {
    let (beta_dir, beta_rel) = sc_betas(eval.params(), eval.geometry())?;
    let two = lit::<T>(2.0);
    let direct = |e: &ScExpectations<T>| PointOutcome {
        throughput: e.direct_throughput(),
        ue_slots: two,
        relay_slots: T::zero(),
    };
    if scheme.protocol == Protocol::Basic {
        let beta = match scheme.sc {
            ScMode::FixedBeta(b) => b,
            _ => beta_dir,
        };
        return Ok(direct(&eval.sc(beta)?));
    }
    let beta = match scheme.sc {
        ScMode::FixedBeta(b) => b,
        _ => beta_rel,
    };
    let e = eval.sc(beta)?;
    let relay_slots = match scheme.protocol {
        Protocol::FeedbackRelay => eval.feedback_relay_slots(e.e_ur_y, e.e_ub_y, e.e_ury_uby),
        _ => e.e_ur_y,
    };
    let relayed = PointOutcome { throughput: e.relay_throughput(scheme.protocol), ue_slots: two, relay_slots };
    if scheme.sc == ScMode::OptimalBetaSelect {
        let alt = direct(&eval.sc(beta_dir)?);
        if alt.throughput > relayed.throughput {
            return Ok(alt);
        }
    }
    Ok(relayed)
}

/// Throughput of a superposition-coded scheme at one position.
pub fn throughput_sc<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    scheme: &SchemeSpec<T>,
) -> Result<T> {
    if !scheme.sc.is_on() {
        return Err(invalid("scheme", "superposition coding is off"));
    }
    let opts = AnalyticOptions::default();
    Ok(PointEvaluator::new(params, *geom, &opts).outcome(scheme)?.throughput)
}
