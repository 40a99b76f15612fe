//! Monte Carlo routines checked against straight-loop reimplementations that
//! use a different generator.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use vlsf_core::achievability::{design_recipe, remark2_error_bound, simulate_stopping, DesignParams, SimConfig};
use vlsf_core::channel::{optimize_common_input, DMChannel};
use vlsf_core::randwalk::{simulate_walk_grid, simulate_walk_pair, WalkSpec};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn stopping_time_matches_second_simulator() {
    let p = 0.11;
    let w = DMChannel::bsc(p).unwrap();
    let pair = optimize_common_input(&w, &w, 1e-9).unwrap();
    let gamma = 100.0;
    let trials = 200_000;
    let est = simulate_stopping(&pair, &SimConfig::new(gamma, trials, 2024)).unwrap();

    // Uniform input, two conditionally independent flips per use.
    let good = (2.0 * (1.0 - p)).ln();
    let bad = (2.0 * p).ln();
    let mut rng = StdRng::seed_from_u64(99);
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            let (mut s1, mut s2, mut n) = (0.0, 0.0, 0u64);
            let (mut t1, mut t2) = (None, None);
            while t1.is_none() || t2.is_none() {
                n += 1;
                s1 += if rng.random::<f64>() < p { bad } else { good };
                s2 += if rng.random::<f64>() < p { bad } else { good };
                if t1.is_none() && s1 >= gamma {
                    t1 = Some(n);
                }
                if t2.is_none() && s2 >= gamma {
                    t2 = Some(n);
                }
            }
            t1.unwrap().max(t2.unwrap()) as f64
        })
        .collect();
    let (m, se) = mean_and_se(&samples);
    let z = (est.mean_max_tau - m) / (est.std_error.powi(2) + se * se).sqrt();
    assert!(z.abs() < 3.0, "z = {z}: {} vs {m}", est.mean_max_tau);
}

#[test]
fn impostor_frequency_within_error_bound() {
    let w = DMChannel::bsc(0.11).unwrap();
    let pair = optimize_common_input(&w, &w, 1e-9).unwrap();
    for (gamma, seed) in [(2.0, 5u64), (4.0, 6)] {
        let cfg = SimConfig {
            impostor: true,
            ..SimConfig::new(gamma, 50_000, seed)
        };
        let est = simulate_stopping(&pair, &cfg).unwrap();
        // Two codewords, no time sharing.
        let bound = remark2_error_bound(2f64.ln(), gamma, 0.0);
        for s in est.pairwise_error.unwrap() {
            assert!(
                s.mean <= bound + 2.0 * s.std_error,
                "gamma {gamma}: {} > {bound}",
                s.mean
            );
        }
    }
}

#[test]
fn recipe_error_never_exceeds_target() {
    let w = DMChannel::bsc(0.11).unwrap();
    let pair = optimize_common_input(&w, &w, 1e-9).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 200 {
        let eps = rng.random_range(0.001..0.5);
        let l_prime = rng.random_range(1.0 / eps + 1.0..20_000.0);
        let Ok(rec) = design_recipe(&pair, DesignParams::new(l_prime, eps)) else {
            continue;
        };
        // The bound is q + (1 − q)(1 − 1/M̃)/l' and 1/l' = (1 − q)^{-1}(ε − q).
        let exact = eps - (1.0 - rec.q) * (-rec.gamma).exp();
        assert!(rec.eps_bound <= eps + 1e-15, "{rec:?}");
        assert!((rec.eps_bound - exact).abs() <= 1e-12);
        checked += 1;
    }
}

#[test]
fn coin_walks_match_straight_loop() {
    // Increments 1 ± 1 with a fair coin, independently for both walks.
    let spec = WalkSpec::independent(&[(0.0, 0.5), (2.0, 0.5)], &[(0.0, 0.5), (2.0, 0.5)]).unwrap();
    let gamma = 400.0;
    let trials = 20_000;
    let stats = simulate_walk_pair(&spec, gamma, trials, 11).unwrap();
    let mut rng = StdRng::seed_from_u64(12);
    let samples: Vec<f64> = (0..trials)
        .map(|_| {
            let (mut u, mut v) = (0.0, 0.0);
            let mut n = 0u64;
            let (mut t1, mut t2) = (None, None);
            while t1.is_none() || t2.is_none() {
                n += 1;
                u += if rng.random::<bool>() { 2.0 } else { 0.0 };
                v += if rng.random::<bool>() { 2.0 } else { 0.0 };
                if t1.is_none() && u >= gamma {
                    t1 = Some(n);
                }
                if t2.is_none() && v >= gamma {
                    t2 = Some(n);
                }
            }
            t1.unwrap().max(t2.unwrap()) as f64
        })
        .collect();
    let (m, se) = mean_and_se(&samples);
    let z = (stats.mean_max - m) / (stats.std_error.powi(2) + se * se).sqrt();
    assert!(z.abs() < 3.0, "z = {z}: {} vs {m}", stats.mean_max);
}

#[test]
fn walk_statistics_are_ordered() {
    let spec = WalkSpec::new(vec![(1.5, -0.5, 0.25), (0.0, 1.0, 0.25), (0.5, 2.0, 0.5)], 3).unwrap();
    let gammas = [10.0, 50.0, 100.0, 200.0];
    let stats = simulate_walk_grid(&spec, &gammas, 5000, 3).unwrap();
    for w in stats.windows(2) {
        assert!(w[0].mean_max <= w[1].mean_max);
    }
    for s in &stats {
        let lo = s.mean_tau1.max(s.mean_tau2);
        assert!(s.mean_max >= lo - 3.0 * s.std_error);
        assert!(s.mean_max <= s.mean_tau1 + s.mean_tau2 + 3.0 * s.std_error);
        assert!(s.mean_max >= s.gamma / spec.mu_w().max(spec.mu_z()) - 3.0 * s.std_error);
    }
}

#[test]
fn excess_over_wald_grows_sublinearly() {
    let w = DMChannel::bsc(0.11).unwrap();
    let pair = optimize_common_input(&w, &w, 1e-9).unwrap();
    let inc = vlsf_core::randwalk::density_increments(pair.pstar(), pair.w1()).unwrap();
    let spec = WalkSpec::independent(&inc, &inc).unwrap();
    let gammas = [50.0, 200.0, 800.0];
    let stats = simulate_walk_grid(&spec, &gammas, 4000, 8).unwrap();
    let excess: Vec<f64> = stats.iter().map(|s| s.mean_max - s.gamma / spec.mu_w()).collect();
    // Quadrupling γ must less than quadruple the excess.
    assert!(excess[1] / excess[0] < 4.0);
    assert!(excess[2] / excess[1] < 4.0);
}
