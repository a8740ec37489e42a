use super::*;
use crate::analytic::{chi_expectations, p_direct};
use crate::model::Protocol;

fn params() -> NetworkParams<f64> {
    NetworkParams::reference()
}

fn all_protocols() -> Vec<SchemeSpec<f64>> {
    Protocol::ALL.iter().map(|&p| SchemeSpec::new(p)).collect()
}

/// Kolmogorov–Smirnov statistic of `samples` against `cdf`.
fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn trial_streams_are_independent_of_scheduling() {
    let policy = RngPolicy::new(42);
    let a: f64 = policy.trial_rng(17).random();
    let _ = policy.trial_rng(3).random::<f64>();
    let b: f64 = policy.trial_rng(17).random();
    assert_eq!(a, b);
    assert_ne!(a, policy.trial_rng(18).random::<f64>());
    assert_ne!(policy.derive(1).master_seed, policy.derive(2).master_seed);
}

#[test]
fn window_meets_tail_variance_rule() {
    let p = params();
    let w = Window::new(&p).unwrap();
    let a = p.alpha;
    let var = p.lambda * 4.0 * std::f64::consts::PI * p.pt_a().powi(2) * w.radius.powf(2.0 - 2.0 * a) / (2.0 * a - 2.0);
    assert!(var <= 1.0001e-4 * p.noise * p.noise);
    assert!(w.radius >= 5.0 / p.lambda.sqrt());
    // Reference scenario: the variance rule dominates.
    assert!(w.radius > 5.0 / p.lambda.sqrt() + 1.0, "{}", w.radius);
}

#[test]
fn serving_distance_follows_nearest_point_law() {
    let mut p = params();
    p.lambda = 1e-8;
    let policy = RngPolicy::new(1);
    let mut d: Vec<f64> = (0..100_000).map(|i| sample_serving_distance(&p, &mut policy.trial_rng(i))).collect();
    let lambda = p.lambda;
    let ks = ks_statistic(&mut d, |r| 1.0 - (-lambda * std::f64::consts::PI * r * r).exp());
    // Critical value at p = 0.01.
    assert!(ks < 1.63 / (100_000f64).sqrt(), "KS = {ks}");
}

#[test]
fn interferer_count_matches_poisson_mean() {
    let p = params();
    let window = Window::new(&p).unwrap();
    let ue = UePolar::new(200.0, 0.1);
    let policy = RngPolicy::new(2);
    let n = 20_000;
    let mut dep = Deployment::empty(DeploymentModel::UePpp);
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            sample_deployment_into(&p, DeploymentModel::UePpp, Some(ue), &window, &mut policy.trial_rng(i), &mut dep)
                .unwrap();
            assert!(dep.interferers.iter().all(|q| q[0].hypot(q[1]) >= 200.0));
            dep.interferers.len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expected = p.lambda * std::f64::consts::PI * (window.radius.powi(2) - 200.0f64.powi(2));
    assert!((mean - expected).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expected}");
    assert_eq!(dep.relays.len(), p.kr as usize);
}

#[test]
fn voronoi_served_ue_lies_in_the_relay_sector() {
    let p = params();
    let window = Window::new(&p).unwrap();
    let policy = RngPolicy::new(3);
    let mut dep = Deployment::empty(DeploymentModel::BsVoronoi);
    for i in 0..200 {
        sample_deployment_into(&p, DeploymentModel::BsVoronoi, None, &window, &mut policy.trial_rng(i), &mut dep).unwrap();
        assert!(dep.ue.theta_u.abs() <= p.sector_half_width() + 1e-12);
        assert!(dep.ue.d_ub > 0.0);
        assert!(dep.interferers.iter().all(|q| q[0].hypot(q[1]) <= window.radius));
    }
}

#[test]
fn voronoi_interferer_density_is_lambda_far_from_the_bs() {
    let p = params();
    let window = Window::new(&p).unwrap();
    let policy = RngPolicy::new(4);
    let mut dep = Deployment::empty(DeploymentModel::BsVoronoi);
    let (r0, r1) = (1000.0, 2000.0);
    let n = 300;
    let mut total = 0usize;
    for i in 0..n {
        sample_deployment_into(&p, DeploymentModel::BsVoronoi, None, &window, &mut policy.trial_rng(i), &mut dep).unwrap();
        total += dep.interferers.iter().filter(|q| (r0..r1).contains(&q[0].hypot(q[1]))).count();
    }
    let expected = p.lambda * std::f64::consts::PI * (r1 * r1 - r0 * r0) * n as f64;
    // One UE per cell is more regular than Poisson; the Poisson SE bounds it.
    assert!((total as f64 - expected).abs() < 3.0 * expected.sqrt(), "{total} vs {expected}");
}

#[test]
fn estimates_are_identical_across_thread_counts() {
    let p = params();
    let schemes = all_protocols();
    let cfg = McConfig::new(5000, 9);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate(&p, &schemes, Placement::CellAverage, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn energy_is_conserved_over_a_campaign() {
    let p = params();
    let schemes = all_protocols();
    let est = estimate(&p, &schemes, Placement::CellAverage, &McConfig::new(4000, 5)).unwrap();
    for s in &est.schemes {
        let expected = 2.0 * p.pt * p.slot_t * est.n_trials as f64 + p.pr_actual() * p.slot_t * s.relay_transmissions as f64;
        assert_eq!(s.ue_transmissions, 2 * est.n_trials);
        assert!((s.total_energy - expected).abs() <= 1e-12 * expected);
    }
    assert_eq!(est.schemes[0].relay_transmissions, 0);
}

#[test]
fn energy_of_each_slot_pair_is_one_of_two_levels() {
    let p = params();
    let window = Window::new(&p).unwrap();
    let policy = RngPolicy::new(6);
    let ue = UePolar::new(220.0, 0.2);
    let geom = derive_link_geometry(&p, ue).unwrap();
    let mut dep = Deployment::empty(DeploymentModel::UePpp);
    let low = 2.0 * p.pt * p.slot_t;
    let high = low + p.pr_actual() * p.slot_t;
    for i in 0..2000 {
        let mut rng = policy.trial_rng(i);
        sample_deployment_into(&p, DeploymentModel::UePpp, Some(ue), &window, &mut rng, &mut dep).unwrap();
        let ch = draw_channels(&p, &geom, &dep, &window, &mut rng);
        for s in all_protocols() {
            let r = resolve_scheme(&p, &geom, &s).unwrap();
            let o = execute_slot_pair(&p, &r, &ch, ScCounting::AsPrinted);
            assert!(o.packets_delivered <= 2);
            let level = if o.flags.relay_tx { high } else { low };
            assert!((o.energy_spent - level).abs() <= 1e-15 * level);
        }
    }
}

#[test]
fn schemes_are_ordered_on_every_trial() {
    let p = params();
    let window = Window::new(&p).unwrap();
    let policy = RngPolicy::new(8);
    let mut dep = Deployment::empty(DeploymentModel::UePpp);
    let schemes = all_protocols();
    for i in 0..20_000 {
        let mut rng = policy.trial_rng(i);
        sample_deployment_into(&p, DeploymentModel::UePpp, None, &window, &mut rng, &mut dep).unwrap();
        let geom = derive_link_geometry(&p, dep.ue).unwrap();
        let ch = draw_channels(&p, &geom, &dep, &window, &mut rng);
        let d: Vec<u8> = schemes
            .iter()
            .map(|s| {
                let r = resolve_scheme(&p, &geom, s).unwrap();
                execute_slot_pair(&p, &r, &ch, ScCounting::AsPrinted).packets_delivered
            })
            .collect();
        assert!(d[3] >= d[2] && d[2] >= d[1], "trial {i}: {d:?}");
        let [.., ub2i, ub2] = {
            let (ub2i, _) = sic_decode(ch.h_ub2 * ch.gamma_ub, ch.h_rb * ch.gamma_rb, p.theta, ch.i_b2);
            [ub2i, protocol::decodes(ch.h_ub2, ch.gamma_ub, p.theta, ch.i_b2)]
        };
        assert!(!ub2i || ub2);
    }
}

#[test]
fn standard_error_shrinks_with_trials() {
    let p = params();
    let scheme = [SchemeSpec::new(Protocol::SelectionRelay)];
    let se = |n| estimate(&p, &scheme, Placement::CellAverage, &McConfig::new(n, 10)).unwrap().schemes[0].throughput.se;
    let ratio = se(40_000) / se(20_000);
    assert!((ratio * std::f64::consts::SQRT_2 - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn direct_success_matches_analytic_at_fixed_position() {
    let p = params();
    let ue = UePolar::new(180.0, 0.5);
    let est = estimate(&p, &[SchemeSpec::new(Protocol::Basic)], Placement::Fixed(ue), &McConfig::new(100_000, 11)).unwrap();
    let exact = p_direct(&p, 180.0).unwrap();
    let m = est.chi.get("ub").unwrap();
    assert!(m.z_score(exact).abs() < 3.0, "{m:?} vs {exact}");
    assert!(est.schemes[0].throughput.z_score(2.0 * exact).abs() < 3.0);
    let chi = chi_expectations(&p, &derive_link_geometry(&p, ue).unwrap()).unwrap();
    for (name, a) in CHI_NAMES.iter().zip(chi.as_array()) {
        let m = est.chi.get(name).unwrap();
        assert!(m.z_score(a).abs() < 4.0, "{name}: {m:?} vs {a}");
    }
}

#[test]
fn zero_packets_signal_infinite_energy() {
    let mut p = params();
    // Noise so strong that nothing is ever decoded.
    p.noise = 1e3;
    let est = estimate(&p, &[SchemeSpec::new(Protocol::Basic)], Placement::Fixed(UePolar::new(300.0, 0.0)), &McConfig::new(1000, 1))
        .unwrap();
    assert_eq!(est.schemes[0].packets, 0);
    assert!(est.schemes[0].energy_per_packet.mean.is_infinite());
}

#[test]
fn voronoi_rejects_relaying_and_fixed_positions() {
    let p = params();
    let cfg = McConfig::new(1000, 1).with_model(DeploymentModel::BsVoronoi);
    let relay = [SchemeSpec::new(Protocol::FeedbackRelay)];
    assert!(matches!(estimate(&p, &relay, Placement::CellAverage, &cfg), Err(Error::Unsupported(_))));
    let basic = [SchemeSpec::new(Protocol::Basic)];
    let fixed = Placement::Fixed(UePolar::new(100.0, 0.0));
    assert!(matches!(estimate(&p, &basic, fixed, &cfg), Err(Error::Unsupported(_))));
}

#[test]
fn rejects_too_few_trials() {
    let p = params();
    assert!(estimate(&p, &all_protocols(), Placement::CellAverage, &McConfig::new(999, 1)).is_err());
}

#[test]
fn frozen_network_keeps_interferers_fixed() {
    let p = params();
    let cfg = McConfig::new(2000, 12).with_frozen(true);
    let ue = UePolar::new(150.0, 0.2);
    let a = estimate(&p, &all_protocols(), Placement::Fixed(ue), &cfg).unwrap();
    let b = estimate(&p, &all_protocols(), Placement::Fixed(ue), &cfg).unwrap();
    assert_eq!(a, b);
    let redrawn = estimate(&p, &all_protocols(), Placement::Fixed(ue), &McConfig::new(2000, 12)).unwrap();
    assert_ne!(a.chi, redrawn.chi);
}

#[test]
fn per_packet_counting_never_counts_fewer_packets() {
    let p = params();
    let schemes: Vec<SchemeSpec<f64>> = Protocol::ALL
        .iter()
        .map(|&pr| SchemeSpec::new(pr).with_sc(crate::model::ScMode::FixedBeta(0.8)))
        .collect();
    let printed = estimate(&p, &schemes, Placement::CellAverage, &McConfig::new(4000, 13)).unwrap();
    let packets =
        estimate(&p, &schemes, Placement::CellAverage, &McConfig::new(4000, 13).with_counting(ScCounting::PerPacket)).unwrap();
    for (a, b) in printed.schemes.iter().zip(&packets.schemes) {
        assert!(b.packets >= a.packets, "{}: {} < {}", a.scheme, b.packets, a.packets);
        assert_eq!(a.relay_transmissions, b.relay_transmissions);
        assert!(a.sc.is_some());
    }
}

#[test]
fn empirical_cdf_is_a_distribution() {
    let samples = [0.3, 0.1, 0.7, 0.5];
    let c = empirical_cdf(&samples, &[0.0, 0.1, 0.4, 0.7, 2.0]);
    assert_eq!(c.probs, vec![0.0, 0.25, 0.5, 1.0, 1.0]);
    assert!((dkw_band(1000, 0.99) - 0.05147).abs() < 1e-4);
}
