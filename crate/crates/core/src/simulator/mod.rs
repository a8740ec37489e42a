//! Monte Carlo engine: samples deployments, fading and slot-pair protocol
//! executions, independent of the analytic formulas.
//!
//! Every trial draws its randomness from its own counter-based ChaCha
//! stream, so results depend only on the master seed and the trial count.
//! All schemes of a run execute on the same channel draw of each trial, which
//! couples them pathwise. Tallies are integers, so the reduction over worker
//! threads is exact.

mod deployment;
mod protocol;
mod voronoi;

pub use deployment::{
    relay_positions, sample_deployment, sample_deployment_into, sample_serving_distance, sample_ue_position,
    Deployment, DeploymentModel, Window,
};
pub use protocol::{
    draw_channels, execute_slot_pair, resolve_scheme, sic_decode, ChannelState, DecodeFlags, ResolvedScheme,
    ScCounting, SlotPairOutcome,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytic::{cdf_from_samples, sc_multipliers, CdfCurve};
use crate::error::{invalid, Error, Result};
use crate::model::{derive_link_geometry, LinkGeometry, NetworkParams, SchemeSpec, UePolar};
use crate::scalar::{lit, Scalar};

use protocol::decodes;

/// Seeding contract: trial `i` uses stream `i` of the ChaCha8 generator keyed
/// by the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPolicy {
    pub master_seed: u64,
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(trial);
        rng
    }

    /// Independent policy for an auxiliary purpose identified by `tag`.
    pub fn derive(&self, tag: u64) -> Self {
        Self { master_seed: splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(0x5eed))) }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const FROZEN_TAG: u64 = 1;
const POSITION_TAG: u64 = 2;
const CHUNK: u64 = 2048;

/// Where the served UE is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement<T> {
    /// Conditional on a fixed position; interferers redrawn every trial.
    Fixed(UePolar<T>),
    /// Served UE redrawn every trial from the position density.
    CellAverage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_trials: u64,
    pub seed: u64,
    pub model: DeploymentModel,
    pub counting: ScCounting,
    /// Draw the deployment (interferers and, for cell averages, the served
    /// UE) once and redraw only the fading.
    pub frozen: bool,
}

impl McConfig {
    pub fn new(n_trials: u64, seed: u64) -> Self {
        Self { n_trials, seed, model: DeploymentModel::UePpp, counting: ScCounting::AsPrinted, frozen: false }
    }

    pub fn with_model(mut self, model: DeploymentModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_counting(mut self, counting: ScCounting) -> Self {
        self.counting = counting;
        self
    }

    pub fn with_frozen(mut self, frozen: bool) -> Self {
        self.frozen = frozen;
        self
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate<T> {
    pub mean: T,
    pub se: T,
}

impl<T: Scalar> MeanEstimate<T> {
    fn from_sums(n: u64, s1: u64, s2: u64) -> Self {
        let nf = n as f64;
        let mean = s1 as f64 / nf;
        let var = if n > 1 { ((s2 as f64 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { mean: lit(mean), se: lit((var / nf).sqrt()) }
    }

    /// Number of standard errors between the estimate and `value`.
    pub fn z_score(&self, value: T) -> T {
        (self.mean - value) / self.se
    }
}

/// Named indicator means.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectations<T> {
    pub names: &'static [&'static str],
    pub values: Vec<MeanEstimate<T>>,
}

impl<T: Scalar> Expectations<T> {
    fn from_counts(names: &'static [&'static str], n: u64, counts: &[u64]) -> Self {
        // Indicators: the sum of squares equals the sum.
        Self { names, values: counts.iter().map(|&c| MeanEstimate::from_sums(n, c, c)).collect() }
    }

    pub fn get(&self, name: &str) -> Option<MeanEstimate<T>> {
        self.names.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

/// Names of the SIC-receiver indicators, matching
/// [`ChiExpectations::NAMES`](crate::analytic::ChiExpectations::NAMES).
pub const CHI_NAMES: [&str; 8] = crate::analytic::ChiExpectations::<f64>::NAMES;
/// Indicators of the no-SIC receivers: relay forward decoded alone, the same
/// with slot-1 direct success, and direct success in both slots.
pub const NOSIC_NAMES: [&str; 3] = ["ur_rb", "ub1_ur_rb", "ub1_ub2"];
/// Superposition-coding indicators, named after the fields of
/// [`ScExpectations`](crate::analytic::ScExpectations).
pub const SC_NAMES: [&str; 11] = [
    "p_first_ub",
    "ub_x",
    "ub_y",
    "ur_y",
    "ury_rb",
    "ury_ub",
    "ury_ubi",
    "uby_ury_rb",
    "uby_ury_ubi",
    "uby_ury_ub",
    "ury_uby",
];

fn chi_indicators<T: Scalar>(th: T, ch: &ChannelState<T>) -> [bool; 8] {
    let ub1 = decodes(ch.h_ub1, ch.gamma_ub, th, ch.i_b1);
    let ur = decodes(ch.h_ur, ch.gamma_ur, th, ch.i_r1);
    let ub2 = decodes(ch.h_ub2, ch.gamma_ub, th, ch.i_b2);
    let (ub2i, rb) = sic_decode(ch.h_ub2 * ch.gamma_ub, ch.h_rb * ch.gamma_rb, th, ch.i_b2);
    [ub1, ur, ur && rb, ur && ub2, ur && ub2i, ub1 && ur && rb, ub1 && ur && ub2i, ub1 && ur && ub2]
}

fn nosic_indicators<T: Scalar>(th: T, ch: &ChannelState<T>, lower: bool) -> [bool; 3] {
    let i2 = if lower { ch.i_b2 } else { T::zero() };
    let ub1 = decodes(ch.h_ub1, ch.gamma_ub, th, ch.i_b1);
    let ur = decodes(ch.h_ur, ch.gamma_ur, th, ch.i_r1);
    let rb = decodes(ch.h_rb, ch.gamma_rb, th, i2);
    let ub2 = decodes(ch.h_ub2, ch.gamma_ub, th, i2);
    [ur && rb, ub1 && ur && rb, ub1 && ub2]
}

fn sc_indicators<T: Scalar>(th: T, beta: T, ch: &ChannelState<T>) -> [bool; 11] {
    let (k1, k2) = sc_multipliers(th, beta);
    let first = k1.is_finite() && decodes(ch.h_ub1, ch.gamma_ub, k1, ch.i_b1);
    let uby = k2.is_finite() && decodes(ch.h_ub1, ch.gamma_ub, k2, ch.i_b1);
    let ury = k2.is_finite() && decodes(ch.h_ur, ch.gamma_ur, k2, ch.i_r1);
    let ub2 = decodes(ch.h_ub2, ch.gamma_ub, th, ch.i_b2);
    let (ub2i, rb) = sic_decode(ch.h_ub2 * ch.gamma_ub, ch.h_rb * ch.gamma_rb, th, ch.i_b2);
    [
        first,
        first && !uby,
        uby,
        ury,
        ury && rb,
        ury && ub2,
        ury && ub2i,
        uby && ury && rb,
        uby && ury && ub2i,
        uby && ury && ub2,
        ury && uby,
    ]
}

#[derive(Debug, Clone, Default)]
struct SchemeTally {
    d: u64,
    d2: u64,
    u: u64,
    u2: u64,
    r: u64,
    r2: u64,
    ur: u64,
    ud: u64,
    rd: u64,
    sc: [u64; 11],
}

impl SchemeTally {
    fn add(&mut self, o: &SlotPairOutcome<impl Scalar>) {
        let (d, u, r) = (u64::from(o.packets_delivered), u64::from(o.ue_transmissions), u64::from(o.relay_transmissions));
        self.d += d;
        self.d2 += d * d;
        self.u += u;
        self.u2 += u * u;
        self.r += r;
        self.r2 += r * r;
        self.ur += u * r;
        self.ud += u * d;
        self.rd += r * d;
    }

    fn merge(&mut self, o: &Self) {
        self.d += o.d;
        self.d2 += o.d2;
        self.u += o.u;
        self.u2 += o.u2;
        self.r += o.r;
        self.r2 += o.r2;
        self.ur += o.ur;
        self.ud += o.ud;
        self.rd += o.rd;
        for (a, b) in self.sc.iter_mut().zip(o.sc) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    n: u64,
    schemes: Vec<SchemeTally>,
    chi: [u64; 8],
    nosic: [[u64; 3]; 2],
}

impl Tally {
    fn new(n_schemes: usize) -> Self {
        Self { schemes: vec![SchemeTally::default(); n_schemes], ..Self::default() }
    }

    fn merge(&mut self, o: &Self) {
        self.n += o.n;
        for (a, b) in self.schemes.iter_mut().zip(&o.schemes) {
            a.merge(b);
        }
        for (a, b) in self.chi.iter_mut().zip(o.chi) {
            *a += b;
        }
        for k in 0..2 {
            for (a, b) in self.nosic[k].iter_mut().zip(o.nosic[k]) {
                *a += b;
            }
        }
    }
}

fn count(acc: &mut [u64], flags: &[bool]) {
    for (a, &f) in acc.iter_mut().zip(flags) {
        *a += u64::from(f);
    }
}

/// Monte Carlo estimates of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeEstimate<T> {
    pub scheme: SchemeSpec<T>,
    /// Packets delivered per slot pair.
    pub throughput: MeanEstimate<T>,
    /// Ratio of total energy to total packets, with a delta-method standard
    /// error; infinite when no packet was delivered.
    pub energy_per_packet: MeanEstimate<T>,
    pub ue_slots: MeanEstimate<T>,
    pub relay_slots: MeanEstimate<T>,
    pub packets: u64,
    pub ue_transmissions: u64,
    pub relay_transmissions: u64,
    /// Energy spent over the whole run [J].
    pub total_energy: T,
    /// SC stream indicators at the scheme's power split; `None` without SC.
    pub sc: Option<Expectations<T>>,
}

/// Result of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate<T> {
    pub n_trials: u64,
    pub seed: u64,
    pub schemes: Vec<SchemeEstimate<T>>,
    /// SIC-receiver indicators, see [`CHI_NAMES`].
    pub chi: Expectations<T>,
    pub nosic_lower: Expectations<T>,
    pub nosic_upper: Expectations<T>,
}

fn scheme_estimate<T: Scalar>(params: &NetworkParams<T>, scheme: SchemeSpec<T>, n: u64, t: &SchemeTally) -> SchemeEstimate<T> {
    let nf = n as f64;
    let a = crate::scalar::to_f64(params.slot_t * params.pt);
    let b = crate::scalar::to_f64(params.slot_t * params.pr_actual());
    let (d, d2, u, u2, r, r2) = (t.d as f64, t.d2 as f64, t.u as f64, t.u2 as f64, t.r as f64, t.r2 as f64);
    let (ur, ud, rd) = (t.ur as f64, t.ud as f64, t.rd as f64);
    let e_sum = a * u + b * r;
    let energy_per_packet = if t.d == 0 {
        MeanEstimate { mean: T::infinity(), se: T::infinity() }
    } else {
        let ratio = e_sum / d;
        let e2 = a * a * u2 + 2.0 * a * b * ur + b * b * r2;
        let ed = a * ud + b * rd;
        // The residual E - R·D has zero sample mean by construction.
        let resid = ((e2 - 2.0 * ratio * ed + ratio * ratio * d2) / (nf - 1.0).max(1.0)).max(0.0);
        let d_mean = d / nf;
        MeanEstimate { mean: lit(ratio), se: lit((resid / nf).sqrt() / d_mean) }
    };
    SchemeEstimate {
        scheme,
        throughput: MeanEstimate::from_sums(n, t.d, t.d2),
        energy_per_packet,
        ue_slots: MeanEstimate::from_sums(n, t.u, t.u2),
        relay_slots: MeanEstimate::from_sums(n, t.r, t.r2),
        packets: t.d,
        ue_transmissions: t.u,
        relay_transmissions: t.r,
        total_energy: lit(e_sum),
        sc: scheme.sc.is_on().then(|| Expectations::from_counts(&SC_NAMES, n, &t.sc)),
    }
}

fn check_schemes<T: Scalar>(schemes: &[SchemeSpec<T>], model: DeploymentModel) -> Result<()> {
    if schemes.is_empty() {
        return Err(invalid("schemes", "at least one scheme is required"));
    }
    for s in schemes {
        s.validate()?;
        if model == DeploymentModel::BsVoronoi && s.protocol.uses_relay() {
            return Err(Error::Unsupported(format!(
                "the BS-Voronoi deployment is only implemented for the basic scheme, not `{s}`"
            )));
        }
    }
    Ok(())
}

/// Draws the deployment and channels of one trial and executes `scheme`.
pub fn run_slot_pair<T: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<T>,
    scheme: &SchemeSpec<T>,
    deployment: &Deployment<T>,
    counting: ScCounting,
    rng: &mut R,
) -> Result<SlotPairOutcome<T>> {
    let window = Window::new(params)?;
    let geom = derive_link_geometry(params, deployment.ue)?;
    let resolved = resolve_scheme(params, &geom, scheme)?;
    let ch = draw_channels(params, &geom, deployment, &window, rng);
    Ok(execute_slot_pair(params, &resolved, &ch, counting))
}

struct Fixed<T> {
    geom: LinkGeometry<T>,
    resolved: Vec<ResolvedScheme<T>>,
}

fn resolve_all<T: Scalar>(params: &NetworkParams<T>, ue: UePolar<T>, schemes: &[SchemeSpec<T>]) -> Result<Fixed<T>> {
    let geom = derive_link_geometry(params, ue)?;
    let resolved = schemes.iter().map(|s| resolve_scheme(params, &geom, s)).collect::<Result<_>>()?;
    Ok(Fixed { geom, resolved })
}

/// Estimates throughput, energy per packet and the decoding indicators of
/// every scheme from `cfg.n_trials` coupled slot pairs.
pub fn estimate<T: Scalar>(
    params: &NetworkParams<T>,
    schemes: &[SchemeSpec<T>],
    placement: Placement<T>,
    cfg: &McConfig,
) -> Result<McEstimate<T>> {
    params.validate()?;
    check_schemes(schemes, cfg.model)?;
    if cfg.n_trials < 1000 {
        return Err(invalid("n_trials", "at least 1000 trials are required"));
    }
    let window = Window::new(params)?;
    let policy = RngPolicy::new(cfg.seed);
    let fixed_ue = match placement {
        Placement::Fixed(ue) => Some(ue),
        Placement::CellAverage => None,
    };
    let frozen = if cfg.frozen {
        let mut rng = policy.derive(FROZEN_TAG).trial_rng(0);
        let mut dep = Deployment::empty(cfg.model);
        sample_deployment_into(params, cfg.model, fixed_ue, &window, &mut rng, &mut dep)?;
        Some(dep)
    } else {
        None
    };
    let shared = match (&frozen, fixed_ue) {
        (Some(dep), _) => Some(resolve_all(params, dep.ue, schemes)?),
        (None, Some(ue)) => Some(resolve_all(params, ue, schemes)?),
        (None, None) => None,
    };
    let th = params.theta;
    let n_chunks = cfg.n_trials.div_ceil(CHUNK);
    let run_chunk = |c: u64| -> Result<Tally> {
        let mut tally = Tally::new(schemes.len());
        let mut dep = Deployment::empty(cfg.model);
        let mut per_trial: Option<Fixed<T>> = None;
        let end = ((c + 1) * CHUNK).min(cfg.n_trials);
        for trial in c * CHUNK..end {
            let mut rng = policy.trial_rng(trial);
            let deployment = match &frozen {
                Some(d) => d,
                None => {
                    sample_deployment_into(params, cfg.model, fixed_ue, &window, &mut rng, &mut dep)?;
                    &dep
                }
            };
            let plan = match &shared {
                Some(s) => s,
                None => per_trial.insert(resolve_all(params, deployment.ue, schemes)?),
            };
            let ch = draw_channels(params, &plan.geom, deployment, &window, &mut rng);
            tally.n += 1;
            count(&mut tally.chi, &chi_indicators(th, &ch));
            count(&mut tally.nosic[0], &nosic_indicators(th, &ch, true));
            count(&mut tally.nosic[1], &nosic_indicators(th, &ch, false));
            for ((acc, res), spec) in tally.schemes.iter_mut().zip(&plan.resolved).zip(schemes) {
                let o = execute_slot_pair(params, res, &ch, cfg.counting);
                acc.add(&o);
                if let Some(beta) = res.beta {
                    // The select mode reports the relaying split's streams.
                    let beta = if spec.protocol.uses_relay() && res.protocol != spec.protocol {
                        crate::analytic::beta_relay_opt(th, plan.geom.gamma_ur / plan.geom.gamma_ub)
                    } else {
                        beta
                    };
                    count(&mut acc.sc, &sc_indicators(th, beta, &ch));
                }
            }
        }
        Ok(tally)
    };
    let parts: Vec<Tally> = (0..n_chunks).into_par_iter().map(run_chunk).collect::<Result<_>>()?;
    let mut total = Tally::new(schemes.len());
    for p in &parts {
        total.merge(p);
    }
    let n = total.n;
    Ok(McEstimate {
        n_trials: n,
        seed: cfg.seed,
        schemes: schemes.iter().zip(&total.schemes).map(|(s, t)| scheme_estimate(params, *s, n, t)).collect(),
        chi: Expectations::from_counts(&CHI_NAMES, n, &total.chi),
        nosic_lower: Expectations::from_counts(&NOSIC_NAMES, n, &total.nosic[0]),
        nosic_upper: Expectations::from_counts(&NOSIC_NAMES, n, &total.nosic[1]),
    })
}

/// Conditional mean throughputs of `scheme` at `n_positions` UE positions
/// drawn from the position density, `trials_per_position` trials each;
/// sorted ascending.
pub fn conditional_throughputs<T: Scalar>(
    params: &NetworkParams<T>,
    scheme: &SchemeSpec<T>,
    n_positions: usize,
    trials_per_position: u64,
    cfg: &McConfig,
) -> Result<Vec<T>> {
    if n_positions == 0 {
        return Err(invalid("n_positions", "at least one position is required"));
    }
    if cfg.model != DeploymentModel::UePpp {
        return Err(Error::Unsupported("conditional throughputs need the UE-PPP deployment".into()));
    }
    let policy = RngPolicy::new(cfg.seed);
    let positions = policy.derive(POSITION_TAG);
    let mut values = (0..n_positions as u64)
        .into_par_iter()
        .map(|j| {
            let ue = sample_ue_position(params, &mut positions.trial_rng(j));
            let sub = McConfig { n_trials: trials_per_position, seed: policy.derive(POSITION_TAG + 1 + j).master_seed, ..*cfg };
            let est = estimate(params, std::slice::from_ref(scheme), Placement::Fixed(ue), &sub)?;
            Ok(est.schemes[0].throughput.mean)
        })
        .collect::<Result<Vec<T>>>()?;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite throughput"));
    Ok(values)
}

/// Empirical CDF of conditional throughput samples at `thresholds`.
pub fn empirical_cdf<T: Scalar>(samples: &[T], thresholds: &[T]) -> CdfCurve<T> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    cdf_from_samples(&sorted, thresholds)
}

/// Half-width of the Dvoretzky–Kiefer–Wolfowitz band around an empirical CDF
/// of `n` samples at the given confidence level.
pub fn dkw_band(n: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests;
