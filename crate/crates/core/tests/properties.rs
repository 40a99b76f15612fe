use proptest::prelude::*;

use vlsf_core::achievability::remark2_error_bound;
use vlsf_core::asymptotics::q_tilde_inverse;
use vlsf_core::channel::{channel_statistics, DMChannel, InputDistribution};
use vlsf_core::gauss;
use vlsf_core::randwalk::psi;
use vlsf_core::tail::{symbol_density_pmf, type_tail_prob, CompositionType, Rounding, TailConfig};

/// Random stochastic matrix with the given shape.
fn channel(inputs: usize, outputs: usize) -> impl Strategy<Value = DMChannel> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, outputs), inputs).prop_map(|rows| {
        let rows = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|v| v / s).collect()
            })
            .collect();
        DMChannel::from_rows(rows).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_pmf_keeps_unit_mass(w in channel(2, 3), t in 2usize..12, split in 0.0f64..1.0) {
        let a = ((t as f64 * split) as usize).clamp(1, t - 1);
        let ty = CompositionType::new(vec![a, t - a]);
        for x in 0..2 {
            let law = symbol_density_pmf(&ty, &w, x, 1e-4, Rounding::Up).unwrap();
            prop_assert!((law.total_mass() - 1.0).abs() < 1e-12);
            let pw = law.power(ty.counts()[x], 1 << 20).unwrap();
            prop_assert!((pw.total_mass() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_is_nonincreasing_in_threshold(w in channel(2, 2), t in 1usize..10, a in 0usize..10, l1 in -5.0f64..5.0, dl in 0.0f64..3.0) {
        let a = a.min(t);
        let ty = CompositionType::new(vec![a, t - a]);
        let cfg = TailConfig::with_step(1e-4);
        let hi = type_tail_prob(&ty, &w, l1, &cfg).unwrap().value;
        let lo = type_tail_prob(&ty, &w, l1 + dl, &cfg).unwrap().value;
        prop_assert!(lo <= hi + 1e-15);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&hi));
    }

    #[test]
    fn error_bound_lies_between_q_and_one(log_m in 0.5f64..200.0, gamma in 0.0f64..200.0, q in 0.0f64..1.0) {
        let b = remark2_error_bound(log_m, gamma, q);
        prop_assert!(b >= q - 1e-15 && b <= 1.0);
        let tighter = remark2_error_bound(log_m, gamma + 1.0, q);
        prop_assert!(tighter <= b);
    }

    #[test]
    fn psi_is_even_and_bounded(x in -20.0f64..20.0) {
        let v = psi(x);
        prop_assert_eq!(v, psi(-x));
        prop_assert!(v > 0.0 || x.abs() > 8.0);
        prop_assert!(v <= 1.0);
    }

    #[test]
    fn generalized_quantile_solves_its_equation(eps in 0.001f64..0.95, r1 in 0.3f64..3.0) {
        let r2 = 1.0 / r1;
        let y = q_tilde_inverse(eps, r1, r2).unwrap();
        let t1 = gauss::q(-r1 * y);
        let t2 = gauss::q(-r2 * y);
        prop_assert!((t1 * t2 + eps * (1.0 + t1.min(t2)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_tail(eps in 1e-12f64..0.999_999) {
        let x = gauss::q_inverse(eps);
        prop_assert!((gauss::q(x) - eps).abs() <= 1e-12 + 1e-9 * eps);
    }

    #[test]
    fn mutual_information_is_bounded(w in channel(3, 4), p in prop::collection::vec(0.05f64..1.0, 3)) {
        let s: f64 = p.iter().sum();
        let input = InputDistribution::new(p.into_iter().map(|v| v / s).collect()).unwrap();
        let stats = channel_statistics(&input, &w).unwrap();
        prop_assert!(stats.mutual_information >= -1e-12);
        prop_assert!(stats.mutual_information <= 3f64.ln() + 1e-12);
        prop_assert!(stats.info_variance >= -1e-12);
    }

    #[test]
    fn rows_off_the_simplex_are_rejected(a in 0.0f64..1.0, bump in 1e-6f64..0.5) {
        let ok = vec![0.5, 0.5];
        prop_assert!(DMChannel::from_rows(vec![ok.clone(), vec![a, 1.0 - a]]).is_ok());
        prop_assert!(DMChannel::from_rows(vec![ok.clone(), vec![a, 1.0 - a + bump]]).is_err());
        prop_assert!(DMChannel::from_rows(vec![ok.clone(), vec![-bump, 1.0 + bump]]).is_err());
        prop_assert!(DMChannel::from_rows(vec![ok, vec![1.0]]).is_err());
    }
}
