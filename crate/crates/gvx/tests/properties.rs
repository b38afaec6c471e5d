use gvx::angle::{phi_n_tan, solve_angle_coeffs, truncated_cos_moments};
use gvx::coeffs::{build_moments, ModelParams};
use gvx::exec::Execution;
use gvx::Error;
use gvx::oracle::{mc_draws, sample_gamma};
use gvx::sumsq::{cdf_sumsq, mixture_order, mixture_weights, EvalConfig, Representation};
use gvx::variance::{svar_cdf, Method};
use proptest::prelude::*;

fn params(alpha: f64, n: usize) -> ModelParams {
    ModelParams::new(alpha, n).unwrap()
}

fn cheap() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cheap())]

    #[test]
    fn sumsq_cdf_is_a_cdf(alpha in 0.5f64..3.0, n in 2usize..7, r1 in 0.05f64..4.0, dr in 0.0f64..2.0) {
        let p = params(alpha, n);
        let cfg = EvalConfig::default().with_tol(1e-9);
        let lo = cdf_sumsq(p, r1, &cfg).unwrap();
        let hi = cdf_sumsq(p, r1 + dr, &cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo.value));
        prop_assert!(hi.value + lo.est_error + hi.est_error + 1e-12 >= lo.value);
    }

    #[test]
    fn representations_agree(alpha in 0.3f64..3.0, n in 3usize..7, c in 0.3f64..1.5) {
        let p = params(alpha, n);
        let r = c * (p.alpha_n() * (alpha + 1.0)).sqrt();
        let cfg = EvalConfig::default().with_tol(1e-10);
        let v: Vec<f64> = [Representation::Power, Representation::Mixture, Representation::Legendre]
            .iter()
            .map(|&rep| cdf_sumsq(p, r, &cfg.with_representation(rep)).unwrap().value)
            .collect();
        prop_assert!((v[0] - v[1]).abs() < 1e-8 && (v[1] - v[2]).abs() < 1e-8, "{:?}", v);
    }

    #[test]
    fn variance_routes_agree(alpha in 1usize..4, n in 3usize..6, s in 0.2f64..3.0) {
        let p = params(alpha as f64, n);
        let cfg = EvalConfig { max_j: 400, ..EvalConfig::default().with_tol(1e-10) };
        let a = match svar_cdf(p, s, &cfg, Method::Thm41) {
            Err(Error::Convergence { .. }) => return Ok(()),
            other => other.unwrap(),
        };
        let Ok(b) = svar_cdf(p, s, &cfg, Method::Thm42) else { return Ok(()) };
        prop_assert!((a.value - b.value).abs() < 1e-7, "{} {}", a.value, b.value);
    }

    #[test]
    fn variance_cdf_is_monotone(alpha in 1usize..4, n in 3usize..6, s1 in 0.1f64..3.0, ds in 0.0f64..2.0) {
        let p = params(alpha as f64, n);
        let cfg = EvalConfig::default().with_tol(1e-9);
        let lo = svar_cdf(p, s1, &cfg, Method::Auto).unwrap();
        let hi = svar_cdf(p, s1 + ds, &cfg, Method::Auto).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo.value));
        prop_assert!(hi.value + lo.est_error + hi.est_error + 1e-12 >= lo.value);
    }

    #[test]
    fn cos_moments_decrease(alpha in 0.3f64..4.0, n in 2usize..12) {
        let table = build_moments(params(alpha, n), 60).unwrap();
        let g = table.log_gamma();
        prop_assert!(g[0] <= 1e-12);
        prop_assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn mixture_deficits_shrink(alpha in 0.5f64..3.0, n in 3usize..8) {
        let p = params(alpha, n);
        let cfg = EvalConfig::default();
        let k = mixture_order(p, &cfg);
        let table = build_moments(p, k).unwrap();
        let w = mixture_weights(&table, p.sqrt_n(), k, cfg.tol).unwrap();
        prop_assert!(w.nonnegative);
        prop_assert!(w.deficit.windows(2).all(|d| d[1] <= d[0] + 1e-15));
        prop_assert!(*w.deficit.last().unwrap() < 1e-8);
    }

    #[test]
    fn angle_cdf_is_monotone(alpha in 1u32..4, n in 2usize..6, u in prop::collection::vec(0.0f64..1.0, 2..8)) {
        let p = params(alpha as f64, n);
        let Ok(c) = solve_angle_coeffs(p) else { return Ok(()) };
        let tn = phi_n_tan(p);
        let mut ts: Vec<f64> = u.iter().map(|v| v * tn).collect();
        ts.sort_by(f64::total_cmp);
        let w: Vec<f64> = ts.iter().map(|&t| c.tan_cdf(t).unwrap()).collect();
        prop_assert!(w.iter().all(|v| (-1e-14..=1.0 + 1e-12).contains(v)));
        prop_assert!(w.windows(2).all(|x| x[1] >= x[0] - 1e-13));
    }

    #[test]
    fn truncated_moments_are_bounded(alpha in 1u32..4, n in 2usize..6) {
        let p = params(alpha as f64, n);
        let Ok(c) = solve_angle_coeffs(p) else { return Ok(()) };
        let table = build_moments(p, 40).unwrap();
        let gbar = truncated_cos_moments(&c, &table, 40).unwrap();
        for (k, gb) in gbar.iter().enumerate() {
            let gb = gb.to_f64();
            let g = table.gamma()[k].to_f64();
            prop_assert!(gb >= -1e-12 * g && gb <= g * (1.0 + 1e-12), "k={} {} {}", k, gb, g);
        }
    }

    #[test]
    fn draws_do_not_depend_on_threads(alpha in 0.2f64..5.0, count in 1usize..10_000, seed in any::<u64>()) {
        let a = sample_gamma(alpha, count, seed, Execution::Sequential).unwrap();
        let b = sample_gamma(alpha, count, seed, Execution::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        let longer = sample_gamma(alpha, count + 5000, seed, Execution::Sequential).unwrap();
        prop_assert_eq!(&a[..], &longer[..count]);
    }

    #[test]
    fn sample_identity_holds(alpha in 0.2f64..5.0, n in 2usize..12, seed in any::<u64>()) {
        let draws = mc_draws(params(alpha, n), 200, seed, Execution::Sequential).unwrap();
        prop_assert!(draws.iter().all(|d| d.identity_error(n) < 1e-12));
        prop_assert!(draws.iter().all(|d| d.tan_phi >= 0.0 && d.u * d.u >= 1.0 / n as f64 - 1e-15));
    }
}
