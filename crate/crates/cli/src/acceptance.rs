//! The acceptance checks behind `relaylab validate`.
//!
//! Every check reports the values it compared and the tolerance it used.
//! Tolerances and budgets come from the `[validate]` config section, whose
//! defaults are the pinned acceptance values.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use relaylab::analytic::{
    average_schemes, beta_direct_opt, chi_expectations, distance_quantile, evaluate_point, sc_betas, sc_probs,
    sic_pair_prob, AnalyticOptions, CellAverage, EnergyAccounting,
};
use relaylab::interference::{laplace_joint2, laplace_joint3, laplace_single, laplace_single_quadrature};
use relaylab::model::{derive_link_geometry, NetworkParams, Protocol, SchemeSpec, ScMode, UePolar};
use relaylab::quad::Tolerance;
use relaylab::simulator::{
    estimate, run_slot_pair, sample_deployment, DeploymentModel, McConfig, Placement, RngPolicy, ScCounting, CHI_NAMES,
};

use crate::config::{ExperimentConfig, SweepSection};
use crate::run::{run_to_writer, RunOptions};
use crate::CliError;

/// Outcome of one acceptance check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    /// Compared values and tolerances, one fact per line.
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckReport {
    /// `[PASS] 3 cross-engine master check (12.3 s)`.
    pub fn headline(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("[{verdict}] {:>2} {} ({:.1} s)", self.id, self.name, self.elapsed.as_secs_f64())
    }
}

pub const CHECK_NAMES: [&str; 12] = [
    "hypergeometric closed form vs quadrature",
    "Laplace functional reductions",
    "cross-engine master check",
    "SIC pair micro-oracle",
    "power split optimality",
    "scheme ordering",
    "relay distance curve shape",
    "relay count and power monotonicity",
    "energy per packet",
    "deployment models",
    "superposition coding gain",
    "determinism across thread counts",
];

type Outcome = Result<(bool, String), CliError>;

/// Runs check `id` (1-based).
pub fn run_check(id: u32, cfg: &ExperimentConfig) -> CheckReport {
    let t0 = Instant::now();
    let name = CHECK_NAMES.get((id as usize).wrapping_sub(1)).copied().unwrap_or("unknown check");
    let outcome: Outcome = match id {
        1 => check_hypergeometric(cfg),
        2 => check_laplace_reductions(cfg),
        3 => check_cross_engine(cfg),
        4 => check_sic_oracle(cfg),
        5 => check_beta_optimality(cfg),
        6 => check_ordering(cfg),
        7 => check_drb_curve(cfg),
        8 => check_monotonicity(cfg),
        9 => check_energy(cfg),
        10 => check_deployment(cfg),
        11 => check_sc_gain(cfg),
        12 => check_determinism(cfg),
        _ => Err(CliError::Config(format!("no acceptance check numbered {id}"))),
    };
    let elapsed = t0.elapsed();
    let (passed, detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckReport { id, name, passed, detail, elapsed }
}

/// Checks selected by `validate.checks`; all of them when it is empty.
pub fn selected_ids(cfg: &ExperimentConfig) -> Vec<u32> {
    if cfg.validate.checks.is_empty() {
        (1..=12).collect()
    } else {
        cfg.validate.checks.clone()
    }
}

fn line(out: &mut String, args: std::fmt::Arguments<'_>) {
    out.write_fmt(args).expect("write to String");
    out.push('\n');
}

macro_rules! note {
    ($out:expr, $($arg:tt)*) => { line(&mut $out, format_args!($($arg)*)) };
}

/// Laplace argument that makes `s P_t A x^{-α}` equal to `k`.
fn s_for(p: &NetworkParams<f64>, k: f64, x: f64) -> f64 {
    k * x.powf(p.alpha) / p.pt_a()
}

fn time_limit(out: &mut String, t0: Instant, limit_s: f64) -> bool {
    let t = t0.elapsed().as_secs_f64();
    note!(*out, "runtime {t:.2} s (limit {limit_s} s)");
    t < limit_s
}

fn check_hypergeometric(cfg: &ExperimentConfig) -> Outcome {
    let t0 = Instant::now();
    let p = cfg.params()?;
    let tol = cfg.validate.hypergeometric_rel_tol;
    let quad_tol = Tolerance::new(1e-12, 1e-300, 1_000_000)?;
    let mut worst = 0.0f64;
    let mut out = String::new();
    for x in [50.0, 200.0, 500.0] {
        for i in 0..7 {
            let k = 10f64.powi(i - 3);
            let s = s_for(&p, k, x);
            let closed = laplace_single(&p, s, x)?;
            let quad = laplace_single_quadrature(&p, s, x, &quad_tol)?;
            worst = worst.max((closed / quad - 1.0).abs());
        }
    }
    note!(out, "3 x 7 grid (x in {{50, 200, 500}} m, s P_t A x^-alpha in 1e-3..1e3)");
    note!(out, "max relative difference {worst:.2e} (tolerance {tol:.0e})");
    let fast = time_limit(&mut out, t0, 1.0);
    Ok((worst < tol && fast, out))
}

fn check_laplace_reductions(cfg: &ExperimentConfig) -> Outcome {
    let t0 = Instant::now();
    let p = cfg.params()?;
    let tol = cfg.validate.laplace_rel_tol;
    let mut out = String::new();
    let mut ok = true;

    let mut worst3 = 0.0f64;
    for (d, x, ks, kt) in [(150.0, 300.0, 0.7, 2.0), (150.0, 100.0, 3.0, 0.2), (300.0, 250.0, 0.05, 8.0)] {
        let (s, t) = (s_for(&p, ks, x), s_for(&p, kt, x));
        let j2 = laplace_joint2(&p, s, t, d, x)?;
        let j3 = laplace_joint3(&p, s, t, 0.0, d, x)?;
        worst3 = worst3.max((j3 / j2 - 1.0).abs());
    }
    note!(out, "joint3(u = 0) vs joint2: max relative difference {worst3:.2e} (tolerance {tol:.0e})");
    ok &= worst3 < tol;

    // Independent fading per measurement point makes the d = 0 integrand a
    // product, whose partial fractions give the single-point transforms.
    let mut worst0 = 0.0f64;
    let x = 200.0;
    for (ks, kt) in [(2.0, 0.5), (0.1, 3.0), (10.0, 0.01)] {
        let (s, t) = (s_for(&p, ks, x), s_for(&p, kt, x));
        let ls = laplace_single(&p, s, x)?.ln();
        let lt = laplace_single(&p, t, x)?.ln();
        let expect = ((s * ls - t * lt) / (s - t)).exp();
        worst0 = worst0.max((laplace_joint2(&p, s, t, 0.0, x)? / expect - 1.0).abs());
    }
    note!(out, "joint2(d = 0) vs product-form identity: max relative difference {worst0:.2e} (tolerance {tol:.0e})");
    ok &= worst0 < tol;

    let mut violations = 0;
    let mut evaluated = 0;
    let ks = [0.0, 0.3, 1.0, 4.0];
    for &x in &[80.0, 250.0] {
        for &d in &[0.0, 150.0] {
            for (i, &a) in ks.iter().enumerate() {
                for (j, &b) in ks.iter().enumerate() {
                    for (k, &c) in ks.iter().enumerate() {
                        let v = laplace_joint3(&p, s_for(&p, a, x), s_for(&p, b, x), s_for(&p, c, x), d, x)?;
                        evaluated += 1;
                        if !(v > 0.0 && v <= 1.0) {
                            violations += 1;
                        }
                        // Each argument raised by one grid step.
                        for (axis, next) in [(0, ks.get(i + 1)), (1, ks.get(j + 1)), (2, ks.get(k + 1))] {
                            let Some(&n) = next else { continue };
                            let mut args = [a, b, c];
                            args[axis] = n;
                            let w = laplace_joint3(
                                &p,
                                s_for(&p, args[0], x),
                                s_for(&p, args[1], x),
                                s_for(&p, args[2], x),
                                d,
                                x,
                            )?;
                            if w > v + 1e-12 {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
        let s = s_for(&p, 1.0, 100.0);
        if laplace_single(&p, s, x)? > laplace_single(&p, s, x * 1.5)? + 1e-15 {
            violations += 1;
        }
    }
    note!(out, "range (0, 1] and monotonicity over {evaluated} argument sets: {violations} violations");
    ok &= violations == 0;
    ok &= time_limit(&mut out, t0, 10.0);
    Ok((ok, out))
}

fn check_cross_engine(cfg: &ExperimentConfig) -> Outcome {
    let p = cfg.params()?;
    let v = &cfg.validate;
    let schemes: Vec<SchemeSpec<f64>> = Protocol::ALL.iter().map(|&x| SchemeSpec::new(x)).collect();
    // The printed feedback energy multiplies marginals that are correlated
    // through the shared interference; the exact joint term is compared.
    let opts = AnalyticOptions { energy: EnergyAccounting::Joint, ..AnalyticOptions::default() };
    let mut out = String::new();
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (i, d_ub) in [100.0, 250.0, 400.0].into_iter().enumerate() {
        let ue = UePolar::new(d_ub, PI / 6.0);
        let geom = derive_link_geometry(&p, ue)?;
        let mc = estimate(&p, &schemes, Placement::Fixed(ue), &McConfig::new(v.cross_trials, v.seed + i as u64))?;
        let chi = chi_expectations(&p, &geom)?.as_array();
        let mut local = Vec::new();
        for (name, a) in CHI_NAMES.iter().zip(chi) {
            local.push((format!("E[chi_{name}]"), mc.chi.get(name).expect("named indicator").z_score(a)));
        }
        let analytic = evaluate_point(&p, ue, &schemes, &opts)?;
        for (s, a) in mc.schemes.iter().zip(&analytic) {
            local.push((format!("{} throughput", s.scheme), s.throughput.z_score(a.throughput)));
            let e = a.energy_per_packet(&p)?;
            local.push((format!("{} energy", s.scheme), s.energy_per_packet.z_score(e)));
        }
        let (name, z) = local.iter().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).expect("non-empty");
        note!(out, "d_ub = {d_ub} m: {} quantities, largest |z| = {:.2} ({name})", local.len(), z.abs());
        compared += local.len();
        worst = local.iter().map(|(_, z)| z.abs()).fold(worst, f64::max);
    }
    note!(out, "{compared} comparisons at {} trials each position, max |z| {worst:.2} (limit {})", v.cross_trials, v.z_max);
    Ok((worst < v.z_max, out))
}

fn check_sic_oracle(cfg: &ExperimentConfig) -> Outcome {
    let t0 = Instant::now();
    let v = &cfg.validate;
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed ^ 0x5ea1);
    let tuples: Vec<(f64, f64, f64, f64)> = (0..5)
        .map(|_| {
            let g1 = 10f64.powf(rng.random_range(-0.3..1.7));
            let g2 = 10f64.powf(rng.random_range(-0.3..1.7));
            (g1, g2, rng.random_range(1.0..4.0), rng.random_range(0.0..3.0))
        })
        .collect();
    let n = v.sic_samples;
    let mut out = String::new();
    let mut worst = 0.0f64;
    for (i, &(g1, g2, th, ih)) in tuples.iter().enumerate() {
        let exact = sic_pair_prob(g1, g2, th, ih)?;
        let chunks = 64u64;
        let hits: u64 = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut r = RngPolicy::new(v.seed).derive(i as u64 + 1).trial_rng(c);
                let w = 1.0 + ih;
                let mut hits = 0u64;
                for _ in 0..(n / chunks + u64::from(c < n % chunks)) {
                    let s1 = -(1.0 - r.random::<f64>()).ln() * g1;
                    let s2 = -(1.0 - r.random::<f64>()).ln() * g2;
                    let (hi, lo) = if s1 >= s2 { (s1, s2) } else { (s2, s1) };
                    if hi >= th * (w + lo) && lo >= th * w {
                        hits += 1;
                    }
                }
                hits
            })
            .sum();
        let mean = hits as f64 / n as f64;
        // Score test against the known value: the null-hypothesis SE stays
        // meaningful when a tuple's probability is too small to be observed.
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        let z = (mean - exact) / se;
        worst = worst.max(z.abs());
        note!(out, "gamma = ({g1:.2}, {g2:.2}), theta = {th:.2}, I = {ih:.2}: exact {exact:.3e}, brute force {mean:.3e}, z = {z:.2}");
    }
    note!(out, "{n} samples per tuple, max |z| {worst:.2} (limit {})", v.z_max);
    let fast = time_limit(&mut out, t0, 30.0);
    Ok((worst < v.z_max && fast, out))
}

fn check_beta_optimality(cfg: &ExperimentConfig) -> Outcome {
    let t0 = Instant::now();
    let base = cfg.params()?;
    let step = 1e-3;
    let slack = step * (1.0 + 1e-9);
    let mut out = String::new();
    let mut ok = true;
    for theta in [1.0, 1.5, 2.0, 4.0] {
        let mut p = base;
        p.theta = theta;
        p.lambda = 0.0;
        let geom = derive_link_geometry(&p, UePolar::new(200.0, 0.2))?;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..500 {
            let beta = 0.5 + i as f64 * step;
            let both = sc_probs(&p, &geom, beta)?.e_ub_y;
            if both > best.0 {
                best = (both, beta);
            }
        }
        let closed = (theta + 1.0) / (theta + 2.0);
        let hit = (best.1 - closed).abs() <= slack;
        ok &= hit;
        note!(out, "theta = {theta}: grid argmax {:.3}, (theta+1)/(theta+2) = {closed:.4}", best.1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.validate.seed ^ 0xbe7a);
    let mut worst = 0.0f64;
    let half = base.sector_half_width();
    for _ in 0..10 {
        let mut p = base;
        p.d_rb = rng.random_range(40.0..320.0);
        let ue = UePolar::new(rng.random_range(20.0..500.0), rng.random_range(-half..half));
        let geom = derive_link_geometry(&p, ue)?;
        let th = p.theta;
        let objective = |b: f64| 1.0 / (geom.gamma_ub * (b * (th + 1.0) - th)) + 1.0 / (geom.gamma_ur * (1.0 - b));
        let argmin = (1..1000)
            .map(|i| i as f64 * step)
            .filter(|b| b * (th + 1.0) > th)
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .expect("non-empty grid");
        let grid = argmin.max(beta_direct_opt(th));
        let (_, closed) = sc_betas(&p, &geom)?;
        worst = worst.max((grid - closed).abs());
    }
    note!(out, "relay split on 10 random geometries: max |grid - closed form| {worst:.2e} (one step {step})");
    ok &= worst <= slack;
    ok &= time_limit(&mut out, t0, 10.0);
    Ok((ok, out))
}

fn check_ordering(cfg: &ExperimentConfig) -> Outcome {
    let base = cfg.params()?;
    let v = &cfg.validate;
    let relaying = [Protocol::BaselineRelay, Protocol::SelectionRelay, Protocol::FeedbackRelay];
    let schemes: Vec<SchemeSpec<f64>> = relaying.iter().map(|&x| SchemeSpec::new(x)).collect();
    let opts = AnalyticOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed ^ 0x0de5);
    let half = base.sector_half_width();
    let geometries: Vec<(f64, UePolar<f64>)> = (0..v.ordering_geometries)
        .map(|_| {
            let d_ub = distance_quantile(&base, rng.random_range(0.0..0.999));
            (rng.random_range(30.0..350.0), UePolar::new(d_ub, rng.random_range(-half..half)))
        })
        .collect();
    let slack = v.ordering_slack;
    let worst = geometries
        .par_iter()
        .map(|&(d_rb, ue)| {
            let p = NetworkParams { d_rb, ..base };
            let o = evaluate_point(&p, ue, &schemes, &opts)?;
            // Positive when an ordering is violated.
            Ok((o[0].throughput - o[1].throughput).max(o[1].throughput - o[2].throughput))
        })
        .collect::<Result<Vec<f64>, CliError>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::new();
    note!(out, "analytic: {} geometries, max(T_baseline - T_selection, T_selection - T_feedback) = {worst:.2e} (slack {slack:.0e})", geometries.len());

    let policy = RngPolicy::new(v.seed);
    let violations: u64 = (0..v.ordering_trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = policy.trial_rng(trial);
            let dep = sample_deployment(&base, DeploymentModel::UePpp, None, &mut r)?;
            let mut delivered = [0u8; 3];
            for (k, s) in schemes.iter().enumerate() {
                let mut shared = r.clone();
                delivered[k] = run_slot_pair(&base, s, &dep, ScCounting::AsPrinted, &mut shared)?.packets_delivered;
            }
            Ok(u64::from(delivered[0] > delivered[1] || delivered[1] > delivered[2]))
        })
        .collect::<Result<Vec<u64>, CliError>>()?
        .into_iter()
        .sum();
    note!(out, "coupled MC: {} trials, {violations} trials out of order", v.ordering_trials);
    Ok((worst <= slack && violations == 0, out))
}

fn sweep_options(cfg: &ExperimentConfig) -> Result<AnalyticOptions<f64>, CliError> {
    let mut opts = cfg.analytic.to_options()?;
    let d = opts.cell_tol;
    opts.cell_tol = Tolerance::new(cfg.validate.sweep_cell_rel_tol, d.abs, d.max_evals)?;
    Ok(opts)
}

/// Cell averages of `schemes` at each parameter set, computed in parallel.
fn curves(
    sets: &[NetworkParams<f64>],
    schemes: &[SchemeSpec<f64>],
    opts: &AnalyticOptions<f64>,
) -> Result<Vec<Vec<CellAverage<f64>>>, CliError> {
    Ok(sets.par_iter().map(|p| average_schemes(p, schemes, opts)).collect::<Result<Vec<_>, _>>()?)
}

const D_RB_GRID: [f64; 6] = [50.0, 100.0, 150.0, 200.0, 250.0, 300.0];

fn with_d_rb(p: &NetworkParams<f64>) -> Vec<NetworkParams<f64>> {
    D_RB_GRID.iter().map(|&d_rb| NetworkParams { d_rb, ..*p }).collect()
}

fn fmt_curve(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

fn check_drb_curve(cfg: &ExperimentConfig) -> Outcome {
    let p = cfg.params()?;
    let schemes: Vec<SchemeSpec<f64>> =
        [Protocol::Basic, Protocol::SelectionRelay, Protocol::FeedbackRelay].map(SchemeSpec::new).to_vec();
    let c = curves(&with_d_rb(&p), &schemes, &sweep_options(cfg)?)?;
    let mut out = String::new();
    note!(out, "d_rb = {D_RB_GRID:?} m");
    let mut ok = true;
    for (k, s) in schemes.iter().enumerate() {
        let curve: Vec<f64> = c.iter().map(|row| row[k].throughput).collect();
        note!(out, "{s}: {}", fmt_curve(curve.iter().copied()));
        if k > 0 {
            let max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let interior = curve[0] < max && curve[curve.len() - 1] < max;
            note!(out, "{s}: interior maximum {interior}");
            ok &= interior;
        }
    }
    let (best_i, best) = c
        .iter()
        .enumerate()
        .map(|(i, row)| (i, row[1].throughput / row[0].throughput - 1.0))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty sweep");
    note!(out, "selection gain over basic at best d_rb = {} m: {:.1}% (band 10% to 30%)", D_RB_GRID[best_i], 100.0 * best);
    ok &= (0.10..=0.30).contains(&best);
    Ok((ok, out))
}

fn check_monotonicity(cfg: &ExperimentConfig) -> Outcome {
    let base = cfg.params()?;
    let opts = sweep_options(cfg)?;
    let schemes: Vec<SchemeSpec<f64>> =
        [Protocol::BaselineRelay, Protocol::SelectionRelay, Protocol::FeedbackRelay].map(SchemeSpec::new).to_vec();
    let mut out = String::new();
    let mut ok = true;
    for d_rb in [100.0, 150.0] {
        let kr_sets: Vec<NetworkParams<f64>> = (2..=6).map(|kr| NetworkParams { kr, d_rb, ..base }).collect();
        let pr_sets: Vec<NetworkParams<f64>> =
            [1.0, 2.0, 4.0, 8.0].iter().map(|m| NetworkParams { pr: m * base.pt, d_rb, ..base }).collect();
        let kr_c = curves(&kr_sets, &schemes, &opts)?;
        let pr_c = curves(&pr_sets, &schemes, &opts)?;
        for (k, s) in schemes.iter().enumerate() {
            let kr: Vec<&CellAverage<f64>> = kr_c.iter().map(|r| &r[k]).collect();
            let pr: Vec<&CellAverage<f64>> = pr_c.iter().map(|r| &r[k]).collect();
            // A step may only go down by the integration error of its ends.
            let rising = |c: &[&CellAverage<f64>]| {
                c.windows(2).all(|w| w[1].throughput >= w[0].throughput - w[0].throughput_error - w[1].throughput_error)
            };
            let inc = |c: &[&CellAverage<f64>], i: usize| c[i + 1].throughput - c[i].throughput;
            let kr_ok = rising(&kr) && inc(&kr, 3) < inc(&kr, 0);
            let pr_ok = rising(&pr) && inc(&pr, 2) < 0.25 * inc(&pr, 0);
            note!(out, "d_rb = {d_rb} m, {s}, k_r = 2..6: {} [non-decreasing, diminishing: {kr_ok}]", fmt_curve(kr.iter().map(|c| c.throughput)));
            note!(out, "d_rb = {d_rb} m, {s}, P_r/P_t = 1, 2, 4, 8: {} [non-decreasing, 4->8 step < 25% of 1->2 step: {pr_ok}]", fmt_curve(pr.iter().map(|c| c.throughput)));
            ok &= kr_ok && pr_ok;
        }
    }
    Ok((ok, out))
}

fn check_energy(cfg: &ExperimentConfig) -> Outcome {
    let p = cfg.params()?;
    let schemes: Vec<SchemeSpec<f64>> = Protocol::ALL.map(SchemeSpec::new).to_vec();
    let sets = with_d_rb(&p);
    let c = curves(&sets, &schemes, &sweep_options(cfg)?)?;
    let energy: Vec<Vec<f64>> = c
        .iter()
        .zip(&sets)
        .map(|(row, q)| row.iter().map(|a| a.energy_per_packet(q)).collect::<Result<Vec<f64>, _>>())
        .collect::<Result<_, _>>()?;
    let mut out = String::new();
    note!(out, "eta = {}, P_r/P_t = {:.3}, d_rb = {D_RB_GRID:?} m", p.eta, p.pr / p.pt);
    let mut ok = true;
    for k in 1..4 {
        let normalized: Vec<f64> = energy.iter().map(|e| e[k] / e[0]).collect();
        let best = normalized.iter().copied().fold(f64::INFINITY, f64::min);
        note!(out, "{} normalized energy: {} (best {best:.4}, must be < 1)", schemes[k], fmt_curve(normalized.iter().copied()));
        ok &= best < 1.0;
    }
    let ordered = energy.iter().all(|e| e[3] <= e[2] * (1.0 + 1e-9) && e[2] <= e[1] * (1.0 + 1e-9));
    note!(out, "feedback <= selection <= baseline at every d_rb: {ordered}");
    Ok((ok && ordered, out))
}

fn check_deployment(cfg: &ExperimentConfig) -> Outcome {
    let p = cfg.params()?;
    let v = &cfg.validate;
    let basic = [SchemeSpec::new(Protocol::Basic)];
    let ppp = estimate(&p, &basic, Placement::CellAverage, &McConfig::new(v.deployment_trials, v.seed))?;
    let vor = estimate(
        &p,
        &basic,
        Placement::CellAverage,
        &McConfig::new(v.deployment_trials, v.seed + 1).with_model(DeploymentModel::BsVoronoi),
    )?;
    let (a, b) = (ppp.schemes[0].throughput, vor.schemes[0].throughput);
    let rel = (b.mean - a.mean).abs() / a.mean;
    let mut out = String::new();
    note!(out, "basic cell average, {} trials each", v.deployment_trials);
    note!(out, "UE PPP: {:.4} +/- {:.4}; BS Voronoi: {:.4} +/- {:.4}", a.mean, a.se, b.mean, b.se);
    note!(out, "relative difference {:.2}% (tolerance {:.0}%)", 100.0 * rel, 100.0 * v.deployment_rel_tol);
    Ok((rel < v.deployment_rel_tol, out))
}

fn check_sc_gain(cfg: &ExperimentConfig) -> Outcome {
    let p = cfg.params()?;
    let opt = SchemeSpec::new(Protocol::FeedbackRelay).with_sc(ScMode::OptimalBetaSelect);
    let mut schemes = vec![SchemeSpec::new(Protocol::Basic), opt];
    // Fixed split policies: β^opt for direct transmission, β_R^opt for relaying.
    schemes.extend(Protocol::ALL.map(|x| SchemeSpec::new(x).with_sc(ScMode::OptimalBetaRelay)));
    let c = curves(&with_d_rb(&p), &schemes, &sweep_options(cfg)?)?;
    let mut out = String::new();
    note!(out, "d_rb = {D_RB_GRID:?} m");
    for (k, s) in schemes.iter().enumerate() {
        note!(out, "{s}: {}", fmt_curve(c.iter().map(|row| row[k].throughput)));
    }
    let (best_i, gain) = c
        .iter()
        .enumerate()
        .map(|(i, row)| (i, row[1].throughput / row[0].throughput - 1.0))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty sweep");
    note!(out, "{opt} gain over non-SC basic at best d_rb = {} m: {:.1}% (band 25% to 55%)", D_RB_GRID[best_i], 100.0 * gain);
    let dominates = c.iter().all(|row| {
        row[2..].iter().all(|f| row[1].throughput >= f.throughput - row[1].throughput_error - f.throughput_error)
    });
    note!(out, "{opt} >= every fixed-policy SC curve at every d_rb: {dominates}");
    Ok(((0.25..=0.55).contains(&gain) && dominates, out))
}

/// A small `run` configuration exercising both engines and SC.
pub fn determinism_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut small = cfg.clone();
    small.schemes = vec!["basic".into(), "selection".into(), "feedback/sc-opt-relay".into(), "baseline/nosic-lower".into()];
    small.engine = crate::config::Engine::Both;
    small.position = Some(crate::config::PositionSection { d_ub: 260.0, theta_u: 0.3 });
    small.sweep = Some(SweepSection { axis: crate::config::SweepAxis::DRb, values: vec![100.0, 200.0] });
    small.mc.trials = cfg.validate.determinism_trials;
    small.mc.seed = cfg.validate.seed;
    small.output = None;
    small
}

fn check_determinism(cfg: &ExperimentConfig) -> Outcome {
    let small = determinism_config(cfg);
    let mut outputs = Vec::new();
    for threads in [1, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        let mut buf = Vec::new();
        pool.install(|| run_to_writer(&small, &mut buf, RunOptions::default()))?;
        outputs.push((threads, buf));
    }
    let mut out = String::new();
    let same = outputs.windows(2).all(|w| w[0].1 == w[1].1);
    for (t, b) in &outputs {
        note!(out, "--threads {t}: {} bytes, {} rows", b.len(), b.iter().filter(|&&c| c == b'\n').count() - 1);
    }
    note!(out, "byte-identical: {same}");
    Ok((same, out))
}
