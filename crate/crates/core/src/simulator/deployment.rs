//! Sampling of the served UE and the other-cell interferers.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::model::{NetworkParams, UePolar};
use crate::scalar::{lit, to_f64, Scalar};

use super::voronoi;

/// How UEs and BSs are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeploymentModel {
    /// UEs form a PPP; the BS at the origin serves its nearest UE and every
    /// farther UE interferes.
    #[default]
    UePpp,
    /// BSs form a PPP and each serves one UE placed uniformly in its Voronoi
    /// cell. Only the basic scheme is supported.
    BsVoronoi,
}

/// One realization of the network around the BS at the origin.
///
/// Coordinates are in the frame of the serving relay, which sits at
/// `(d_rb, 0)`; the served UE lies in its sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment<T> {
    pub model: DeploymentModel,
    pub ue: UePolar<T>,
    /// Other-cell UEs inside the simulation window.
    pub interferers: Vec<[T; 2]>,
    /// All `k_r` relays of the cell.
    pub relays: Vec<[T; 2]>,
}

impl<T: Scalar> Deployment<T> {
    pub fn empty(model: DeploymentModel) -> Self {
        Self { model, ue: UePolar::new(T::one(), T::zero()), interferers: Vec::new(), relays: Vec::new() }
    }
}

/// Finite simulation window with the deterministic mean of the interference
/// from beyond it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub radius: T,
    /// Mean relay gain of far interferers relative to an omni pattern.
    relay_tail_gain: T,
}

impl<T: Scalar> Window<T> {
    /// `R = max(5/√λ, R_v)` with `R_v` the radius beyond which the variance
    /// of the interference is below `1e-4·N₀²`.
    pub fn new(params: &NetworkParams<T>) -> Result<Self> {
        params.validate()?;
        if !(params.lambda > T::zero()) {
            return Err(invalid("lambda", "the simulator needs a positive UE density"));
        }
        let pa = params.pt_a();
        let two = lit::<T>(2.0);
        let a = params.alpha;
        // Var = λ E[h²] (PA)² 2π R^{2-2α}/(2α-2) with E[h²] = 2.
        let var_coeff = params.lambda * lit(4.0) * T::PI() * pa * pa / (two * a - two);
        let target = lit::<T>(1e-4) * params.noise * params.noise;
        let r_var = (var_coeff / target).powf((two * a - two).recip());
        let radius = r_var.max(lit::<T>(5.0) / params.lambda.sqrt());
        Ok(Self { radius, relay_tail_gain: folded_mean_gain(params) })
    }

    /// Mean of the interference from beyond `max(R, inner)` at the BS,
    /// normalized by the noise power.
    pub fn tail_bs(&self, params: &NetworkParams<T>, inner: T) -> T {
        let r = self.radius.max(inner);
        let a = params.alpha;
        params.lambda * T::TAU() * params.pt_a() * r.powf(lit::<T>(2.0) - a) / ((a - lit(2.0)) * params.noise)
    }

    /// Same at the relay, treating the far field as centred on the BS.
    pub fn tail_relay(&self, params: &NetworkParams<T>, inner: T) -> T {
        self.tail_bs(params, inner) * self.relay_tail_gain
    }
}

/// `(1/π) ∫_{-π/2}^{π/2} f(ψ) dψ`: far interferers arrive uniformly in angle
/// and the printed arrival angle folds them onto the front half-plane.
fn folded_mean_gain<T: Scalar>(params: &NetworkParams<T>) -> T {
    let pattern = &params.rx_pattern_relay;
    if pattern.is_omni() {
        return pattern.peak_gain();
    }
    let n = 4096;
    let mut sum = T::zero();
    for i in 0..n {
        let psi = (lit::<T>(i as f64 + 0.5) / lit(n as f64) - lit(0.5)) * T::PI();
        sum = sum + pattern.gain(psi);
    }
    sum / lit(n as f64)
}

/// Relay positions `d_rb·(cos 2πj/k_r, sin 2πj/k_r)`.
pub fn relay_positions<T: Scalar>(params: &NetworkParams<T>) -> Vec<[T; 2]> {
    (0..params.kr)
        .map(|j| {
            let phi = T::TAU() * lit(f64::from(j)) / lit(f64::from(params.kr));
            [params.d_rb * phi.cos(), params.d_rb * phi.sin()]
        })
        .collect()
}

/// Distance of the nearest point of a PPP of density `λ`.
pub fn sample_serving_distance<T: Scalar, R: Rng + ?Sized>(params: &NetworkParams<T>, rng: &mut R) -> T {
    let e = -lit::<T>(1.0 - rng.random::<f64>()).ln();
    (e / (params.lambda * T::PI())).sqrt()
}

/// Served UE position drawn from the position density: nearest-point
/// distance and a uniform angle in the relay sector.
pub fn sample_ue_position<T: Scalar, R: Rng + ?Sized>(params: &NetworkParams<T>, rng: &mut R) -> UePolar<T> {
    let d = sample_serving_distance(params, rng);
    let half = params.sector_half_width();
    let theta = (lit::<T>(rng.random::<f64>()) * lit(2.0) - T::one()) * half;
    UePolar::new(d, theta)
}

/// Draws a deployment into `out`, reusing its buffers.
///
/// With `ue = Some(p)` (UE-PPP only) the served UE is placed at `p` and the
/// interferers are conditioned on lying farther from the BS; otherwise the
/// served UE is drawn as well. Interferers cover the annulus up to the
/// window radius.
pub fn sample_deployment_into<T: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<T>,
    model: DeploymentModel,
    ue: Option<UePolar<T>>,
    window: &Window<T>,
    rng: &mut R,
    out: &mut Deployment<T>,
) -> Result<()> {
    out.model = model;
    out.interferers.clear();
    out.relays.clear();
    out.relays.extend(relay_positions(params));
    match model {
        DeploymentModel::UePpp => {
            // Drawing the nearest point directly from its law conditions on
            // the PPP having at least one point.
            out.ue = match ue {
                Some(p) => p,
                None => sample_ue_position(params, rng),
            };
            let inner = out.ue.d_ub;
            let outer = window.radius;
            if inner < outer {
                let (in2, out2) = (inner * inner, outer * outer);
                let mean = params.lambda * T::PI() * (out2 - in2);
                let count = poisson_count(to_f64(mean), rng)?;
                out.interferers.reserve(count);
                for _ in 0..count {
                    let r = (in2 + lit::<T>(rng.random::<f64>()) * (out2 - in2)).sqrt();
                    let phi = lit::<T>(rng.random::<f64>()) * T::TAU();
                    out.interferers.push([r * phi.cos(), r * phi.sin()]);
                }
            }
        }
        DeploymentModel::BsVoronoi => {
            if ue.is_some() {
                return Err(Error::Unsupported(
                    "the BS-Voronoi model draws the served UE from its cell; fixed positions are not defined".into(),
                ));
            }
            let served = voronoi::sample_voronoi_ues(params, window.radius, rng, &mut out.interferers);
            // Rotate so that the served UE falls into the sector of the
            // relay on the positive x-axis; interference at the BS is
            // rotation invariant.
            let sector = T::TAU() / lit(f64::from(params.kr));
            let angle = served[1].atan2(served[0]);
            let rot = -(angle / sector).round() * sector;
            let (c, s) = (rot.cos(), rot.sin());
            for p in out.interferers.iter_mut() {
                *p = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
            }
            let d = (served[0] * served[0] + served[1] * served[1]).sqrt();
            let th = (angle + rot).max(-params.sector_half_width()).min(params.sector_half_width());
            out.ue = UePolar::new(d, th);
        }
    }
    Ok(())
}

/// Allocating form of [`sample_deployment_into`].
pub fn sample_deployment<T: Scalar, R: Rng + ?Sized>(
    params: &NetworkParams<T>,
    model: DeploymentModel,
    ue: Option<UePolar<T>>,
    rng: &mut R,
) -> Result<Deployment<T>> {
    let window = Window::new(params)?;
    let mut out = Deployment::empty(model);
    sample_deployment_into(params, model, ue, &window, rng, &mut out)?;
    Ok(out)
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<usize> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| invalid("window", format!("bad interferer mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}
