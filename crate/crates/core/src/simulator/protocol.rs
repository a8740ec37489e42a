//! Slot-pair state machines of every scheme, executed on one shared draw of
//! fading and interference so that all schemes see the same randomness.

use rand::Rng;

use crate::analytic::{beta_direct_opt, beta_relay_opt, sc_multipliers, AnalyticOptions, PointEvaluator};
use crate::error::Result;
use crate::model::{LinkGeometry, NetworkParams, Protocol, Receiver, SchemeSpec, ScMode};
use crate::scalar::{lit, Scalar};

use super::deployment::{Deployment, Window};

/// Fading and interference of one slot pair.
///
/// Interference is normalized by the noise power, so a signal with mean SNR
/// `γ` and fading `h` is decoded at threshold `ϑ` iff `hγ ≥ ϑ(1 + Î)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState<T> {
    pub gamma_ub: T,
    pub gamma_ur: T,
    pub gamma_rb: T,
    pub h_ub1: T,
    pub h_ur: T,
    pub h_ub2: T,
    pub h_rb: T,
    /// Interference at the relay in slot 1.
    pub i_r1: T,
    /// Interference at the BS in slots 1 and 2.
    pub i_b1: T,
    pub i_b2: T,
}

fn exp1<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    -lit::<T>(1.0 - rng.random::<f64>()).ln()
}

/// Draws independent unit-mean exponential fading for every link, slot and
/// interferer, and aggregates the interference of `deployment`.
pub fn draw_channels<T: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    deployment: &Deployment<T>,
    window: &Window<T>,
    rng: &mut R,
) -> ChannelState<T> {
    let h_ub1 = exp1(rng);
    let h_ur = exp1(rng);
    let h_ub2 = exp1(rng);
    let h_rb = exp1(rng);
    let half_alpha = params.alpha * lit(0.5);
    let d_rb = params.d_rb;
    let pattern = &params.rx_pattern_relay;
    let (mut i_r1, mut i_b1, mut i_b2) = (T::zero(), T::zero(), T::zero());
    for &[x, y] in &deployment.interferers {
        let r2 = x * x + y * y;
        let bs_path = r2.powf(-half_alpha);
        i_b1 = i_b1 + exp1::<T, R>(rng) * bs_path;
        i_b2 = i_b2 + exp1::<T, R>(rng) * bs_path;
        let dx = x - d_rb;
        let rho2 = dx * dx + y * y;
        let mut relay_path = exp1::<T, R>(rng) * rho2.powf(-half_alpha);
        if !pattern.is_omni() {
            // The interferer's arrival angle as folded onto the front lobe.
            let rho = rho2.sqrt();
            let s = if rho > T::zero() { (y / rho).max(-T::one()).min(T::one()) } else { T::zero() };
            relay_path = relay_path * pattern.gain(s.asin());
        } else {
            relay_path = relay_path * pattern.peak_gain();
        }
        i_r1 = i_r1 + relay_path;
    }
    let scale = params.pt_a() / params.noise;
    let tail_bs = window.tail_bs(params, geom.ue.d_ub);
    ChannelState {
        gamma_ub: geom.gamma_ub,
        gamma_ur: geom.gamma_ur,
        gamma_rb: geom.gamma_rb,
        h_ub1,
        h_ur,
        h_ub2,
        h_rb,
        i_r1: i_r1 * scale + window.tail_relay(params, geom.ue.d_ub),
        i_b1: i_b1 * scale + tail_bs,
        i_b2: i_b2 * scale + tail_bs,
    }
}

pub(crate) fn decodes<T: Scalar>(h: T, gamma: T, threshold: T, i_hat: T) -> bool {
    h * gamma >= threshold * (T::one() + i_hat)
}

/// Two simultaneous signals at one receiver: the stronger is decoded against
/// the weaker plus noise and interference, cancelled on success, and then
/// the weaker is decoded on its own. Returns `(first decoded, second decoded)`.
pub fn sic_decode<T: Scalar>(s1: T, s2: T, theta: T, i_hat: T) -> (bool, bool) {
    let w = T::one() + i_hat;
    let (strong, weak, first_is_strong) = if s1 >= s2 { (s1, s2, true) } else { (s2, s1, false) };
    let strong_ok = strong >= theta * (weak + w);
    let weak_ok = strong_ok && weak >= theta * w;
    if first_is_strong {
        (strong_ok, weak_ok)
    } else {
        (weak_ok, strong_ok)
    }
}

/// Counting rule for superposition-coded slot pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScCounting {
    /// Evaluates the closed-form throughput expressions' indicator sums per
    /// trial, so that the estimate targets exactly the analytic quantity.
    #[default]
    AsPrinted,
    /// Counts distinct packets delivered: one for a lone stronger packet,
    /// two when both are decoded.
    PerPacket,
}

/// A scheme with its power split and, for the select mode, the direct/relay
/// choice fixed for one UE position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedScheme<T> {
    pub protocol: Protocol,
    pub receiver: Receiver,
    /// Power split of the first transmission; `None` without SC.
    pub beta: Option<T>,
}

/// Fixes the SC parameters of `scheme` at one position. The optimal-β modes
/// act as a genie that knows the mean SNRs; the select mode compares the
/// expected throughputs of the two options with the analytic engine.
pub fn resolve_scheme<T: Scalar>(
    params: &NetworkParams<T>,
    geom: &LinkGeometry<T>,
    scheme: &SchemeSpec<T>,
) -> Result<ResolvedScheme<T>> {
    scheme.validate()?;
    let beta_dir = beta_direct_opt(params.theta);
    let beta_rel = beta_relay_opt(params.theta, geom.gamma_ur / geom.gamma_ub);
    let relay = scheme.protocol.uses_relay();
    let (protocol, beta) = match scheme.sc {
        ScMode::Off => (scheme.protocol, None),
        ScMode::FixedBeta(b) => (scheme.protocol, Some(b)),
        ScMode::OptimalBetaRelay => (scheme.protocol, Some(if relay { beta_rel } else { beta_dir })),
        ScMode::OptimalBetaSelect if !relay => (Protocol::Basic, Some(beta_dir)),
        ScMode::OptimalBetaSelect => {
            let opts = AnalyticOptions::default();
            let mut eval = PointEvaluator::new(params, *geom, &opts);
            let direct = eval.sc(beta_dir)?.direct_throughput();
            let relayed = eval.sc(beta_rel)?.relay_throughput(scheme.protocol);
            if direct > relayed {
                (Protocol::Basic, Some(beta_dir))
            } else {
                (scheme.protocol, Some(beta_rel))
            }
        }
    };
    Ok(ResolvedScheme { protocol, receiver: scheme.receiver, beta })
}

/// Realized decoding events of one slot pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeFlags {
    /// BS decodes the slot-1 transmission (with SC: both packets).
    pub ub1: bool,
    /// Relay decodes the slot-1 transmission (with SC: both packets).
    pub ur: bool,
    /// Relay forwards in slot 2.
    pub relay_tx: bool,
    /// BS decodes the relay's forward.
    pub rb: bool,
    /// BS decodes the UE's slot-2 packet, relay silent.
    pub ub2: bool,
    /// BS decodes the UE's slot-2 packet while the relay forwards.
    pub ub2i: bool,
    /// With SC: the BS decodes the stronger slot-1 packet.
    pub ub1_first: bool,
    /// With SC in slot 2 (basic scheme): stronger and both packets.
    pub ub2_first: bool,
    pub ub2_both: bool,
}

/// Result of one slot pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotPairOutcome<T> {
    pub packets_delivered: u8,
    pub ue_transmissions: u8,
    pub relay_transmissions: u8,
    /// `T(P_t · UE transmissions + P̄_r · relay transmissions)` [J].
    pub energy_spent: T,
    pub flags: DecodeFlags,
    /// `(Î_R, Î_B1, Î_B2)` of the slot pair.
    pub interference: (T, T, T),
}

/// Executes the two-slot protocol of `scheme` on the drawn channel state.
pub fn execute_slot_pair<T: Scalar>(
    params: &NetworkParams<T>,
    scheme: &ResolvedScheme<T>,
    ch: &ChannelState<T>,
    counting: ScCounting,
) -> SlotPairOutcome<T> {
    let th = params.theta;
    let mut f = DecodeFlags::default();
    let (packets, ue_tx, relay_tx) = match scheme.beta {
        None => plain(th, scheme, ch, &mut f),
        Some(beta) => superposed(th, beta, scheme.protocol, ch, counting, &mut f),
    };
    f.relay_tx = relay_tx > 0;
    let energy_spent =
        params.slot_t * (params.pt * lit(f64::from(ue_tx)) + params.pr_actual() * lit(f64::from(relay_tx)));
    SlotPairOutcome {
        packets_delivered: packets,
        ue_transmissions: ue_tx,
        relay_transmissions: relay_tx,
        energy_spent,
        flags: f,
        interference: (ch.i_r1, ch.i_b1, ch.i_b2),
    }
}

/// Slot 2 under SIC: the relay forwards iff `forward`, the UE always sends a
/// new packet. Returns `(relay decoded, UE decoded)`.
fn slot2_sic<T: Scalar>(th: T, ch: &ChannelState<T>, forward: bool, f: &mut DecodeFlags) -> (bool, bool) {
    f.ub2 = decodes(ch.h_ub2, ch.gamma_ub, th, ch.i_b2);
    let (ue, relay) = sic_decode(ch.h_ub2 * ch.gamma_ub, ch.h_rb * ch.gamma_rb, th, ch.i_b2);
    f.ub2i = ue;
    f.rb = relay;
    if forward {
        (relay, ue)
    } else {
        (false, f.ub2)
    }
}

fn plain<T: Scalar>(th: T, scheme: &ResolvedScheme<T>, ch: &ChannelState<T>, f: &mut DecodeFlags) -> (u8, u8, u8) {
    f.ub1 = decodes(ch.h_ub1, ch.gamma_ub, th, ch.i_b1);
    f.ur = decodes(ch.h_ur, ch.gamma_ur, th, ch.i_r1);
    let p = scheme.protocol;
    if p == Protocol::Basic {
        f.ub2 = decodes(ch.h_ub2, ch.gamma_ub, th, ch.i_b2);
        return (u8::from(f.ub1) + u8::from(f.ub2), 2, 0);
    }
    let forward = match p {
        Protocol::FeedbackRelay => f.ur && !f.ub1,
        _ => f.ur,
    };
    // Baseline ignores the BS's own slot-1 reception.
    let direct1 = p != Protocol::BaselineRelay && f.ub1;
    match scheme.receiver {
        Receiver::Sic => {
            let (relayed, ue2) = slot2_sic(th, ch, forward, f);
            (u8::from(direct1 || relayed) + u8::from(ue2), 2, u8::from(forward))
        }
        Receiver::NoSicLowerBound | Receiver::NoSicUpperBound => {
            let i2 = if scheme.receiver == Receiver::NoSicLowerBound { ch.i_b2 } else { T::zero() };
            f.rb = decodes(ch.h_rb, ch.gamma_rb, th, i2);
            f.ub2 = decodes(ch.h_ub2, ch.gamma_ub, th, i2);
            let relayed = forward && f.rb;
            // With feedback the UE reuses slot 2 once the BS holds its packet.
            let ue2 = p == Protocol::FeedbackRelay && f.ub1;
            let packets = u8::from(direct1 || relayed) + u8::from(ue2 && f.ub2);
            (packets, 1 + u8::from(ue2), u8::from(forward))
        }
    }
}

fn superposed<T: Scalar>(
    th: T,
    beta: T,
    protocol: Protocol,
    ch: &ChannelState<T>,
    counting: ScCounting,
    f: &mut DecodeFlags,
) -> (u8, u8, u8) {
    let (k1, k2) = sc_multipliers(th, beta);
    let first = |h: T, g: T, i: T| k1.is_finite() && decodes(h, g, k1, i);
    let both = |h: T, g: T, i: T| k2.is_finite() && decodes(h, g, k2, i);
    f.ub1_first = first(ch.h_ub1, ch.gamma_ub, ch.i_b1);
    f.ub1 = both(ch.h_ub1, ch.gamma_ub, ch.i_b1);
    if protocol == Protocol::Basic {
        f.ub2_first = first(ch.h_ub2, ch.gamma_ub, ch.i_b2);
        f.ub2_both = both(ch.h_ub2, ch.gamma_ub, ch.i_b2);
        let packets = match counting {
            ScCounting::AsPrinted => 2 * (u8::from(f.ub1) + u8::from(f.ub2_both)),
            ScCounting::PerPacket => {
                u8::from(f.ub1_first) + u8::from(f.ub1) + u8::from(f.ub2_first) + u8::from(f.ub2_both)
            }
        };
        return (packets, 2, 0);
    }
    f.ur = both(ch.h_ur, ch.gamma_ur, ch.i_r1);
    let forward = match protocol {
        Protocol::FeedbackRelay => f.ur && !f.ub1,
        _ => f.ur,
    };
    let (relayed, ue2) = slot2_sic(th, ch, forward, f);
    let packets = match counting {
        ScCounting::AsPrinted => {
            let i = |b: bool| i32::from(b);
            let (x_only, ub1, ur, rb, ub2, ub2i) =
                (i(f.ub1_first && !f.ub1), i(f.ub1), i(f.ur), i(f.rb), i(f.ub2), i(f.ub2i));
            let baseline = x_only + ub2 + ur * rb - ur * ub2 + ur * ub2i;
            let selection = baseline + ub1 - ub1 * ur * rb;
            let v = match protocol {
                Protocol::BaselineRelay => baseline,
                Protocol::SelectionRelay => selection,
                _ => selection - ub1 * ur * ub2i + ub1 * ur * ub2,
            };
            u8::try_from(v).expect("printed indicator sums are non-negative")
        }
        ScCounting::PerPacket => {
            let y_direct = protocol != Protocol::BaselineRelay && f.ub1;
            u8::from(f.ub1_first) + u8::from(y_direct || relayed) + u8::from(ue2)
        }
    };
    (packets, 2, u8::from(forward))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(h: [f64; 4], i: [f64; 3]) -> ChannelState<f64> {
        ChannelState {
            gamma_ub: 10.0,
            gamma_ur: 40.0,
            gamma_rb: 80.0,
            h_ub1: h[0],
            h_ur: h[1],
            h_ub2: h[2],
            h_rb: h[3],
            i_r1: i[0],
            i_b1: i[1],
            i_b2: i[2],
        }
    }

    fn plain_scheme(p: Protocol, r: Receiver) -> ResolvedScheme<f64> {
        ResolvedScheme { protocol: p, receiver: r, beta: None }
    }

    #[test]
    fn sic_decodes_stronger_first() {
        // Strong enough to be decoded over the weaker one.
        assert_eq!(sic_decode(100.0, 10.0, 2.0, 0.0), (true, true));
        assert_eq!(sic_decode(10.0, 100.0, 2.0, 0.0), (true, true));
        // Stronger fails, so nothing is decoded.
        assert_eq!(sic_decode(15.0, 10.0, 2.0, 0.0), (false, false));
        // Stronger succeeds, weaker below threshold on its own.
        assert_eq!(sic_decode(100.0, 1.5, 2.0, 0.0), (true, false));
    }

    #[test]
    fn relay_failure_leaves_direct_transmission_only() {
        let p = NetworkParams::<f64>::reference();
        // Relay fading tiny: relay cannot decode.
        let ch = state([0.0, 1e-6, 5.0, 5.0], [0.0; 3]);
        for proto in [Protocol::BaselineRelay, Protocol::SelectionRelay, Protocol::FeedbackRelay] {
            let o = execute_slot_pair(&p, &plain_scheme(proto, Receiver::Sic), &ch, ScCounting::AsPrinted);
            assert!(!o.flags.ur && !o.flags.relay_tx);
            assert_eq!(o.relay_transmissions, 0);
            assert_eq!(o.packets_delivered, 1);
        }
    }

    #[test]
    fn feedback_relay_silent_after_direct_success() {
        let p = NetworkParams::<f64>::reference();
        let ch = state([5.0, 5.0, 5.0, 5.0], [0.0; 3]);
        let o = execute_slot_pair(&p, &plain_scheme(Protocol::FeedbackRelay, Receiver::Sic), &ch, ScCounting::AsPrinted);
        assert!(o.flags.ub1 && o.flags.ur);
        assert_eq!(o.relay_transmissions, 0);
        assert_eq!(o.energy_spent, p.slot_t * 2.0 * p.pt);
        assert_eq!(o.packets_delivered, 2);
        let s = execute_slot_pair(&p, &plain_scheme(Protocol::SelectionRelay, Receiver::Sic), &ch, ScCounting::AsPrinted);
        assert_eq!(s.relay_transmissions, 1);
        assert_eq!(s.energy_spent, p.slot_t * (2.0 * p.pt + p.pr_actual()));
    }

    #[test]
    fn nosic_upper_bound_ignores_slot_two_interference() {
        let p = NetworkParams::<f64>::reference();
        let ch = state([0.0, 5.0, 1.0, 1.0], [0.0, 0.0, 1e3]);
        let lower = plain_scheme(Protocol::BaselineRelay, Receiver::NoSicLowerBound);
        let upper = plain_scheme(Protocol::BaselineRelay, Receiver::NoSicUpperBound);
        assert_eq!(execute_slot_pair(&p, &lower, &ch, ScCounting::AsPrinted).packets_delivered, 0);
        let o = execute_slot_pair(&p, &upper, &ch, ScCounting::AsPrinted);
        assert_eq!((o.packets_delivered, o.ue_transmissions), (1, 1));
    }

    #[test]
    fn superposition_counting_rules() {
        let p = NetworkParams::<f64>::reference();
        let beta = 0.9;
        let (k1, k2) = sc_multipliers(p.theta, beta);
        // Slot 1 between the two thresholds, slot 2 above both.
        let h1 = 0.5 * (k1 + k2) / 10.0;
        let ch = state([h1, 0.0, 2.0 * k2 / 10.0, 0.0], [0.0; 3]);
        let basic = ResolvedScheme { protocol: Protocol::Basic, receiver: Receiver::Sic, beta: Some(beta) };
        assert_eq!(execute_slot_pair(&p, &basic, &ch, ScCounting::AsPrinted).packets_delivered, 2);
        assert_eq!(execute_slot_pair(&p, &basic, &ch, ScCounting::PerPacket).packets_delivered, 3);
    }
}
