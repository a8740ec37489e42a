//! Network parameters, deployment geometry, antenna patterns and scheme
//! descriptors shared by the analytic and Monte Carlo engines.
//!
//! Units are SI throughout: powers in watts, distances in metres, angles in
//! radians, thresholds and gains linear.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Scalar};

/// `P[W] = 10^((P[dBm] - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Raised-cosine receive pattern `((1 + cos θ) / 2)^k`, optionally scaled by
/// its directivity `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern<T> {
    pub k: T,
    pub normalized: bool,
}

impl<T: Scalar> AntennaPattern<T> {
    pub fn omni() -> Self {
        Self { k: T::zero(), normalized: false }
    }

    pub fn new(k: T, normalized: bool) -> Result<Self> {
        let p = Self { k, normalized };
        p.validate()?;
        Ok(p)
    }

    /// Normalized pattern with the given 3 dB beamwidth.
    pub fn from_beamwidth(theta_3db: T) -> Result<Self> {
        Ok(Self { k: k_from_beamwidth(theta_3db)?, normalized: true })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= T::zero()) || !self.k.is_finite() {
            return Err(invalid("antenna.k", "directivity exponent must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn is_omni(&self) -> bool {
        self.k == T::zero()
    }

    /// Gain towards `theta`, measured from boresight.
    pub fn gain(&self, theta: T) -> T {
        if self.k == T::zero() {
            return self.peak_gain();
        }
        let base = ((T::one() + theta.cos()) * lit(0.5)).max(T::zero());
        base.powf(self.k) * self.peak_gain()
    }

    pub fn peak_gain(&self) -> T {
        if self.normalized {
            self.k + T::one()
        } else {
            T::one()
        }
    }

    /// Mean gain over a full turn in the plane, `(1/2π) ∫ f(θ) dθ`.
    pub fn planar_mean_gain(&self) -> T {
        // ∫((1+cos θ)/2)^k dθ / 2π = Γ(k+1/2) / (√π Γ(k+1)).
        let half = lit::<T>(0.5);
        let ln = crate::quad::ln_gamma(self.k + half)
            - crate::quad::ln_gamma(self.k + T::one())
            - half * T::PI().ln();
        ln.exp() * self.peak_gain()
    }

    pub fn beamwidth(&self) -> Result<T> {
        beamwidth_from_k(self.k)
    }
}

/// Full 3 dB beamwidth of the raised-cosine pattern with exponent `k`.
pub fn beamwidth_from_k<T: Scalar>(k: T) -> Result<T> {
    if !(k > T::zero()) || !k.is_finite() {
        return Err(invalid("k", "beamwidth is undefined for an omnidirectional pattern (k = 0)"));
    }
    let half_power = lit::<T>(2.0) * lit::<T>(2.0).powf(-T::one() / k) - T::one();
    Ok(lit::<T>(2.0) * half_power.acos())
}

/// Inverse of [`beamwidth_from_k`].
pub fn k_from_beamwidth<T: Scalar>(theta_3db: T) -> Result<T> {
    if !(theta_3db > T::zero()) || theta_3db >= T::TAU() {
        return Err(invalid("theta_3db", "beamwidth must lie in (0, 2π)"));
    }
    let level = (T::one() + (theta_3db * lit(0.5)).cos()) * lit(0.5);
    // level in (0, 1): the pattern halves at θ_3dB / 2.
    Ok(-T::LN_2() / level.ln())
}

/// Scalar parameters of the network model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams<T> {
    /// Density of UEs on the carrier [m⁻²].
    pub lambda: T,
    /// Path-loss constant `A` in `A d^-α`.
    pub path_loss_const: T,
    pub alpha: T,
    /// Noise power [W].
    pub noise: T,
    /// UE transmit power [W].
    pub pt: T,
    /// Relay effective transmit power [W], backhaul antenna gain included.
    pub pr: T,
    /// Relay backhaul antenna gain.
    pub eta: T,
    /// SINR decoding threshold (linear).
    pub theta: T,
    pub kr: u32,
    /// Relay–BS distance [m].
    pub d_rb: T,
    /// Slot duration [s].
    pub slot_t: T,
    pub rx_pattern_relay: AntennaPattern<T>,
    pub rx_pattern_bs: AntennaPattern<T>,
}

impl<T: Scalar> NetworkParams<T> {
    /// Evaluation scenario: λ = 4.6e-6 m⁻², A = 1e-3, α = 3.7, N₀ = -103 dBm,
    /// P_t = 23 dBm, ϑ = 3 dB, three relays at 150 m with P_r = 2 P_t, η = 10.
    pub fn reference() -> Self {
        let pt = dbm_to_watts(23.0);
        Self {
            lambda: lit(4.6e-6),
            path_loss_const: lit(1e-3),
            alpha: lit(3.7),
            noise: lit(dbm_to_watts(-103.0)),
            pt: lit(pt),
            pr: lit(2.0 * pt),
            eta: lit(10.0),
            theta: lit(db_to_linear(3.0)),
            kr: 3,
            d_rb: lit(150.0),
            slot_t: lit(1e-3),
            rx_pattern_relay: AntennaPattern::omni(),
            rx_pattern_bs: AntennaPattern::omni(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: T| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be finite"))
            }
        };
        for (name, v) in [
            ("lambda", self.lambda),
            ("A", self.path_loss_const),
            ("alpha", self.alpha),
            ("N0", self.noise),
            ("Pt", self.pt),
            ("Pr", self.pr),
            ("eta", self.eta),
            ("theta", self.theta),
            ("d_rb", self.d_rb),
            ("slot_t", self.slot_t),
        ] {
            finite(name, v)?;
        }
        if !(self.alpha > lit(2.0)) {
            return Err(invalid("alpha", "path-loss exponent must exceed 2"));
        }
        if !(self.theta >= T::one()) {
            return Err(invalid(
                "theta",
                "decoding threshold must be >= 1 (0 dB): the SIC decoding-order model assumes it",
            ));
        }
        if self.lambda < T::zero() {
            return Err(invalid("lambda", "density must be non-negative"));
        }
        for (name, v) in [
            ("A", self.path_loss_const),
            ("N0", self.noise),
            ("Pt", self.pt),
            ("Pr", self.pr),
            ("slot_t", self.slot_t),
        ] {
            if !(v > T::zero()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(self.eta > T::zero()) {
            return Err(invalid("eta", "must be positive"));
        }
        if self.d_rb < T::zero() {
            return Err(invalid("d_rb", "must be non-negative"));
        }
        if self.kr < 1 {
            return Err(invalid("kr", "at least one relay per cell"));
        }
        self.rx_pattern_relay.validate()?;
        self.rx_pattern_bs.validate()?;
        if !self.rx_pattern_bs.is_omni() {
            return Err(Error::Unsupported(
                "directional BS reception: only k = 0 is implemented for the BS pattern".into(),
            ));
        }
        Ok(())
    }

    /// Power actually drawn by the relay, `P_r / η`.
    pub fn pr_actual(&self) -> T {
        self.pr / self.eta
    }

    /// `P_t A`, the received-power scale of every UE transmitter.
    pub fn pt_a(&self) -> T {
        self.pt * self.path_loss_const
    }

    /// Mean SNR `A P g / (N₀ d^α)`.
    pub fn mean_snr(&self, power: T, distance: T, gain: T) -> T {
        self.path_loss_const * power * gain / (self.noise * distance.powf(self.alpha))
    }

    /// Half-width of the angular sector served by one relay.
    pub fn sector_half_width(&self) -> T {
        T::PI() / lit(self.kr as f64)
    }
}

/// Position of the served UE relative to the BS and its serving relay's axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePolar<T> {
    pub d_ub: T,
    pub theta_u: T,
}

impl<T: Scalar> UePolar<T> {
    pub fn new(d_ub: T, theta_u: T) -> Self {
        Self { d_ub, theta_u }
    }
}

/// Derived distances, arrival angle and mean SNRs for one UE position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T> {
    pub ue: UePolar<T>,
    pub d_ur: T,
    /// Angle between the relay's boresight (pointing away from the BS) and
    /// the UE as seen from the relay.
    pub theta_ur: T,
    pub gamma_ub: T,
    pub gamma_rb: T,
    pub gamma_ur: T,
}

/// Geometry of a UE at `ue` served by the relay at `(d_rb, 0)`.
pub fn derive_link_geometry<T: Scalar>(params: &NetworkParams<T>, ue: UePolar<T>) -> Result<LinkGeometry<T>> {
    let slack = lit::<T>(1e-12) * T::PI();
    if !(ue.d_ub >= T::zero()) || !ue.d_ub.is_finite() {
        return Err(invalid("d_ub", "must be finite and non-negative"));
    }
    if !(ue.theta_u.abs() <= params.sector_half_width() + slack) {
        return Err(invalid("theta_u", "must lie within the relay sector [-π/k_r, π/k_r]"));
    }
    if ue.d_ub == T::zero() {
        return Err(Error::DegenerateGeometry("UE co-located with the BS".into()));
    }
    let d_rb = params.d_rb;
    let two = lit::<T>(2.0);
    let d_ur = (ue.d_ub * ue.d_ub + d_rb * d_rb - two * ue.d_ub * d_rb * ue.theta_u.cos())
        .max(T::zero())
        .sqrt();
    if d_ur == T::zero() {
        return Err(Error::DegenerateGeometry("UE co-located with the relay".into()));
    }
    let dx = ue.d_ub * ue.theta_u.cos() - d_rb;
    let dy = ue.d_ub * ue.theta_u.sin();
    let theta_ur = dy.atan2(dx);

    let gamma_ub = params.mean_snr(params.pt, ue.d_ub, params.rx_pattern_bs.peak_gain());
    let gamma_rb = params.mean_snr(params.pr, d_rb, T::one());
    let gamma_ur = params.mean_snr(params.pt, d_ur, params.rx_pattern_relay.gain(theta_ur));
    Ok(LinkGeometry { ue, d_ur, theta_ur, gamma_ub, gamma_rb, gamma_ur })
}

/// Arrival angle at a relay on the positive x axis of an interferer at polar
/// `(r, θ)` about the BS, `asin(r sin θ / ρ)` with `ρ` the interferer–relay
/// distance.
///
/// This folds the two half-planes either side of the relay onto the front
/// lobe; both engines use it for interference so that they describe the same
/// model.
pub fn interferer_arrival_angle<T: Scalar>(r: T, theta: T, rho: T) -> T {
    if rho == T::zero() {
        return T::zero();
    }
    (r * theta.sin() / rho).max(-T::one()).min(T::one()).asin()
}

/// Joint density of the served UE's `(d_ub, θ_u)` on the relay sector:
/// `k_r λ r exp(-λπr²)`.
pub fn ue_position_density<T: Scalar>(params: &NetworkParams<T>, r: T, theta: T) -> T {
    if r < T::zero() || theta.abs() > params.sector_half_width() {
        return T::zero();
    }
    lit::<T>(params.kr as f64) * params.lambda * r * (-params.lambda * T::PI() * r * r).exp()
}

/// Protocol run over each pair of slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Basic,
    BaselineRelay,
    SelectionRelay,
    FeedbackRelay,
}

impl Protocol {
    pub const ALL: [Protocol; 4] =
        [Protocol::Basic, Protocol::BaselineRelay, Protocol::SelectionRelay, Protocol::FeedbackRelay];

    pub fn uses_relay(self) -> bool {
        self != Protocol::Basic
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Basic => "basic",
            Protocol::BaselineRelay => "baseline",
            Protocol::SelectionRelay => "selection",
            Protocol::FeedbackRelay => "feedback",
        }
    }
}

/// BS receiver in the relay slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    /// Two-signal successive interference cancellation; the UE keeps
    /// transmitting while the relay forwards.
    Sic,
    /// No SIC, UE silent while its relay forwards; every other-cell UE
    /// transmits in the relay slot.
    NoSicLowerBound,
    /// No SIC, UE silent while its relay forwards; the relay slot is free of
    /// inter-cell interference.
    NoSicUpperBound,
}

impl Receiver {
    pub fn name(self) -> &'static str {
        match self {
            Receiver::Sic => "sic",
            Receiver::NoSicLowerBound => "nosic-lower",
            Receiver::NoSicUpperBound => "nosic-upper",
        }
    }
}

/// Superposition-coding mode of the UE's first transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScMode<T> {
    Off,
    /// Fraction `β ∈ [1/2, 1)` of the power on the first packet.
    FixedBeta(T),
    /// `β^opt` for the basic scheme, `β_R^opt` for relaying schemes.
    OptimalBetaRelay,
    /// Per UE position, the better of direct SC at `β^opt` and the relaying
    /// protocol at `β_R^opt`.
    OptimalBetaSelect,
}

impl<T: Scalar> ScMode<T> {
    pub fn is_on(&self) -> bool {
        !matches!(self, ScMode::Off)
    }

    pub fn label(&self) -> String {
        match self {
            ScMode::Off => "off".into(),
            ScMode::FixedBeta(b) => format!("fixed-{b}"),
            ScMode::OptimalBetaRelay => "opt-relay".into(),
            ScMode::OptimalBetaSelect => "opt-select".into(),
        }
    }
}

/// A protocol together with its receiver and SC mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeSpec<T> {
    pub protocol: Protocol,
    pub receiver: Receiver,
    pub sc: ScMode<T>,
}

impl<T: Scalar> SchemeSpec<T> {
    pub fn new(protocol: Protocol) -> Self {
        Self { protocol, receiver: Receiver::Sic, sc: ScMode::Off }
    }

    pub fn with_receiver(mut self, receiver: Receiver) -> Self {
        self.receiver = receiver;
        self
    }

    pub fn with_sc(mut self, sc: ScMode<T>) -> Self {
        self.sc = sc;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let ScMode::FixedBeta(b) = self.sc {
            if !(b >= lit(0.5) && b < T::one()) {
                return Err(invalid("beta", "power split must lie in [0.5, 1)"));
            }
        }
        if self.receiver != Receiver::Sic {
            if self.protocol == Protocol::Basic {
                return Err(invalid("receiver", "the no-SIC bounds only apply to relaying protocols"));
            }
            if self.sc.is_on() {
                return Err(invalid("receiver", "superposition coding requires the SIC receiver"));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for SchemeSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.protocol.name())?;
        if self.receiver != Receiver::Sic {
            write!(f, "/{}", self.receiver.name())?;
        }
        match self.sc {
            ScMode::Off => Ok(()),
            ScMode::FixedBeta(b) => write!(f, "/sc-{b}"),
            ScMode::OptimalBetaRelay => write!(f, "/sc-opt-relay"),
            ScMode::OptimalBetaSelect => write!(f, "/sc-opt-select"),
        }
    }
}

impl<T: Scalar> FromStr for SchemeSpec<T> {
    type Err = Error;

    /// Parses `protocol[/receiver][/sc-mode]`, e.g. `feedback`,
    /// `selection/nosic-lower`, `basic/sc-0.75`, `feedback/sc-opt-select`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split('/');
        let protocol = match parts.next().unwrap_or("").trim() {
            "basic" => Protocol::Basic,
            "baseline" => Protocol::BaselineRelay,
            "selection" => Protocol::SelectionRelay,
            "feedback" => Protocol::FeedbackRelay,
            other => return Err(invalid("scheme", format!("unknown protocol `{other}`"))),
        };
        let mut spec = SchemeSpec::new(protocol);
        for part in parts {
            let part = part.trim();
            match part {
                "sic" => spec.receiver = Receiver::Sic,
                "nosic-lower" => spec.receiver = Receiver::NoSicLowerBound,
                "nosic-upper" => spec.receiver = Receiver::NoSicUpperBound,
                "sc-opt-relay" => spec.sc = ScMode::OptimalBetaRelay,
                "sc-opt-select" => spec.sc = ScMode::OptimalBetaSelect,
                _ => {
                    let beta = part
                        .strip_prefix("sc-")
                        .and_then(|b| b.parse::<f64>().ok())
                        .ok_or_else(|| invalid("scheme", format!("unknown scheme qualifier `{part}`")))?;
                    spec.sc = ScMode::FixedBeta(lit(beta));
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> NetworkParams<f64> {
        NetworkParams::reference()
    }

    #[test]
    fn reference_scenario_values() {
        let p = params();
        assert!((p.pt - 0.199_526_231_5).abs() < 1e-9);
        assert!((p.noise - 5.011_872_336e-14).abs() < 1e-22);
        assert!((p.theta - 1.995_262_315).abs() < 1e-9);
        p.validate().unwrap();
    }

    #[test]
    fn unit_conversions_round_trip() {
        assert!((watts_to_dbm(dbm_to_watts(17.3)) - 17.3).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(-4.0)) + 4.0).abs() < 1e-12);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn right_triangle_distance() {
        let mut p = params();
        p.kr = 1;
        let g = derive_link_geometry(&p, UePolar::new(150.0, PI / 2.0)).unwrap();
        assert!((g.d_ur - 150.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn relay_at_bs_gives_direct_distance() {
        let mut p = params();
        p.d_rb = 0.0;
        let g = derive_link_geometry(&p, UePolar::new(321.0, 0.4)).unwrap();
        assert!((g.d_ur - 321.0).abs() < 1e-9);
    }

    #[test]
    fn distance_matches_planar_coordinates() {
        let mut p = params();
        p.kr = 3;
        let (d_ub, th) = (200.0, PI / 6.0);
        let g = derive_link_geometry(&p, UePolar::new(d_ub, th)).unwrap();
        let ue = (d_ub * th.cos(), d_ub * th.sin());
        let relay = (150.0, 0.0);
        let brute = ((ue.0 - relay.0).powi(2) + (ue.1 - relay.1).powi(2)).sqrt();
        assert!((g.d_ur - brute).abs() < 1e-9);
        // The UE is in front of the relay's outward boresight.
        let expect_angle = (ue.1 - relay.1).atan2(ue.0 - relay.0);
        assert!((g.theta_ur - expect_angle).abs() < 1e-12);
    }

    #[test]
    fn coincident_ue_and_relay_is_degenerate() {
        let p = params();
        let r = derive_link_geometry(&p, UePolar::new(150.0, 0.0));
        assert!(matches!(r, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn out_of_sector_angle_rejected() {
        let p = params();
        assert!(derive_link_geometry(&p, UePolar::new(100.0, 1.2)).is_err());
    }

    #[test]
    fn mean_snrs_follow_path_loss() {
        let p = params();
        let g = derive_link_geometry(&p, UePolar::new(250.0, 0.3)).unwrap();
        let expect_ub = p.path_loss_const * p.pt / (p.noise * 250f64.powf(p.alpha));
        assert!((g.gamma_ub / expect_ub - 1.0).abs() < 1e-12);
        let expect_rb = p.path_loss_const * p.pr / (p.noise * 150f64.powf(p.alpha));
        assert!((g.gamma_rb / expect_rb - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antenna_gain_examples() {
        let omni = AntennaPattern::<f64>::omni();
        for th in [-3.0, -1.0, 0.0, 0.5, 3.1] {
            assert_eq!(omni.gain(th), 1.0);
        }
        let norm = AntennaPattern::<f64>::new(2.0, true).unwrap();
        assert!((norm.gain(0.0) - 3.0).abs() < 1e-15);
        let raw = AntennaPattern::<f64>::new(2.0, false).unwrap();
        assert!((raw.gain(PI / 2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn normalization_factor_is_directivity() {
        // (k+1) = 4π / ∫∫ f(θ) sin θ dθ dφ for the unnormalized pattern.
        let tol = crate::quad::Tolerance { rel: 1e-12, abs: 1e-14, max_evals: 100_000 };
        for k in [0.0, 1.0, 2.0, 5.0, 10.0] {
            let f = AntennaPattern::new(k, false).unwrap();
            let polar = crate::quad::integrate(|th: f64| f.gain(th) * th.sin(), 0.0, PI, &tol).unwrap();
            let directivity = 4.0 * PI / (2.0 * PI * polar.value);
            assert!((directivity - (k + 1.0)).abs() < 1e-8, "k={k}: {directivity}");
        }
    }

    #[test]
    fn planar_mean_gain_matches_quadrature() {
        let tol = crate::quad::Tolerance::default();
        for k in [0.0, 1.0, 2.5, 7.0] {
            let f = AntennaPattern::new(k, true).unwrap();
            let q = crate::quad::integrate(|th: f64| f.gain(th), -PI, PI, &tol).unwrap();
            assert!((q.value / (2.0 * PI) - f.planar_mean_gain()).abs() < 1e-10);
        }
    }

    #[test]
    fn beamwidth_at_k_one_is_pi() {
        assert!((beamwidth_from_k(1.0f64).unwrap() - PI).abs() < 1e-12);
        assert!(beamwidth_from_k(0.0f64).is_err());
    }

    #[test]
    fn beamwidth_shrinks_with_k() {
        let mut prev = f64::INFINITY;
        for k in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0, 1e4] {
            let bw = beamwidth_from_k(k).unwrap();
            assert!(bw < prev);
            prev = bw;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn beamwidth_inverse_matches_bisection() {
        // Independent bisection on the forward map.
        let target = PI / 3.0;
        let (mut lo, mut hi) = (1e-3f64, 1e4f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if beamwidth_from_k(mid).unwrap() > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = k_from_beamwidth(target).unwrap();
        assert!((k - lo).abs() / lo < 1e-9);
        assert!((beamwidth_from_k(k).unwrap() - target).abs() < 1e-9);
    }

    #[test]
    fn density_normalizes_for_every_relay_count() {
        let tol = crate::quad::Tolerance { rel: 1e-12, abs: 1e-15, max_evals: 1_000_000 };
        for kr in 1..=6 {
            let mut p = params();
            p.kr = kr;
            let w = p.sector_half_width();
            let total = crate::quad::integrate_rect_vec(
                |r, th, out: &mut [f64]| {
                    out[0] = ue_position_density(&p, r, th);
                    Ok(())
                },
                (0.0, 5000.0),
                (-w, w),
                1,
                &tol,
            )
            .unwrap();
            assert!((total.values[0] - 1.0).abs() < 1e-9, "kr={kr}: {}", total.values[0]);
        }
    }

    #[test]
    fn mean_serving_distance() {
        let p = params();
        let tol = crate::quad::Tolerance { rel: 1e-12, abs: 1e-15, max_evals: 1_000_000 };
        let w = p.sector_half_width();
        let mean = crate::quad::integrate_rect_vec(
            |r, th, out: &mut [f64]| {
                out[0] = r * ue_position_density(&p, r, th);
                Ok(())
            },
            (0.0, 6000.0),
            (-w, w),
            1,
            &tol,
        )
        .unwrap()
        .values[0];
        assert!((mean - 0.5 / p.lambda.sqrt()).abs() < 1e-6);
        assert!((mean - 233.1).abs() < 0.05);
    }

    #[test]
    fn density_mode_shrinks_with_density() {
        let mode = |lambda: f64| {
            let mut p = params();
            p.lambda = lambda;
            (1..20_000)
                .map(|i| i as f64 * 0.1)
                .max_by(|a, b| ue_position_density(&p, *a, 0.0).total_cmp(&ue_position_density(&p, *b, 0.0)))
                .unwrap()
        };
        let (m1, m2) = (mode(4.6e-6), mode(2e-5));
        assert!(m2 < m1);
        assert!((m1 - 1.0 / (2.0 * PI * 4.6e-6f64).sqrt()).abs() < 0.1);
    }

    #[test]
    fn params_reject_low_threshold() {
        let mut p = params();
        p.theta = db_to_linear(-0.5);
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains(">= 1"), "{err}");
    }

    #[test]
    fn params_reject_small_alpha() {
        let mut p = params();
        p.alpha = 2.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn scheme_strings_round_trip() {
        for s in ["basic", "baseline", "selection/nosic-lower", "feedback/nosic-upper", "basic/sc-0.75", "feedback/sc-opt-select"] {
            let spec: SchemeSpec<f64> = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("basic/nosic-lower".parse::<SchemeSpec<f64>>().is_err());
        assert!("feedback/sc-0.3".parse::<SchemeSpec<f64>>().is_err());
        assert!("relay".parse::<SchemeSpec<f64>>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(2000))]
            #[test]
            fn triangle_inequality(d_ub in 1e-3f64..5e3, frac in -1.0f64..1.0, d_rb in 0.0f64..500.0, kr in 1u32..7) {
                let mut p = NetworkParams::<f64>::reference();
                p.kr = kr;
                p.d_rb = d_rb;
                let th = frac * p.sector_half_width();
                if let Ok(g) = derive_link_geometry(&p, UePolar::new(d_ub, th)) {
                    let eps = 1e-9 * (d_ub + d_rb);
                    prop_assert!(g.d_ur >= (d_ub - d_rb).abs() - eps);
                    prop_assert!(g.d_ur <= d_ub + d_rb + eps);
                }
            }

            #[test]
            fn gain_even_and_decreasing(k in 0.0f64..30.0, a in 0.0f64..PI, b in 0.0f64..PI, normalized: bool) {
                let f = AntennaPattern::new(k, normalized).unwrap();
                prop_assert_eq!(f.gain(a), f.gain(-a));
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(f.gain(hi) <= f.gain(lo));
            }
        }
    }
}
