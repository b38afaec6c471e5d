use super::*;

fn p(alpha: f64, n: usize) -> ModelParams {
    ModelParams::new(alpha, n).unwrap()
}

fn cfg() -> EvalConfig {
    EvalConfig::default()
}

const S_AT_2: f64 = 0.98530379;

#[test]
fn reference_value_double_series() {
    let c = cfg().with_representation(Representation::Mixture);
    let r = svar_cdf(p(1.0, 10), 4.0, &c, Method::Thm41).unwrap();
    assert!((r.value - S_AT_2).abs() < 1e-8, "{r:?}");
}

#[test]
fn reference_value_truncated_moments() {
    let r = svar_cdf(p(1.0, 10), 4.0, &cfg(), Method::Thm42).unwrap();
    assert!((r.value - S_AT_2).abs() < 1e-7, "{r:?}");
}

#[test]
fn zero_threshold() {
    for m in [Method::Thm41, Method::Thm42] {
        assert_eq!(svar_cdf(p(1.0, 5), 0.0, &cfg(), m).unwrap().value, 0.0);
    }
}

#[test]
fn series_and_mixture_agree() {
    for (alpha, n, z) in [(0.5, 5, 2.0), (1.0, 10, 36.0)] {
        let params = p(alpha, n);
        let a = svar_cdf_thm41(params, z, &cfg().with_representation(Representation::Power)).unwrap();
        let b = svar_cdf_thm41(params, z, &cfg().with_representation(Representation::Mixture)).unwrap();
        assert_eq!(a.representation, Route::DoubleSeries);
        assert_eq!(b.representation, Route::DoubleMixture);
        assert!((a.value - b.value).abs() < 1e-9, "z={z}: {} vs {}", a.value, b.value);
    }
}

#[test]
fn theorems_agree() {
    for (alpha, n, z) in [(1.0, 5, 2.0), (2.0, 6, 3.0), (1.0, 10, 9.0)] {
        let params = p(alpha, n);
        let a = svar_cdf_thm41(params, z, &cfg()).unwrap();
        let b = svar_cdf_thm42(params, z, &cfg()).unwrap();
        assert!((a.value - b.value).abs() < 1e-9, "α={alpha} n={n} z={z}: {} vs {}", a.value, b.value);
    }
}

#[test]
fn auto_falls_back_for_small_samples() {
    let r = svar_cdf(p(2.0, 4), 0.5 / 3.0, &cfg(), Method::Auto).unwrap();
    let b = svar_cdf_thm42(p(2.0, 4), 0.5, &cfg()).unwrap();
    assert_eq!(r.representation, Route::TruncatedMoments);
    assert!((r.value - b.value).abs() < 1e-14);
}

#[test]
fn pair_is_uniform_angle() {
    // n = 2, α = 1: (x1−x2)²/2 = z with |x1−x2| ~ Exp(1)
    let params = p(1.0, 2);
    for z in [0.1f64, 1.0, 3.0] {
        let want = 1.0 - (-(2.0 * z).sqrt()).exp();
        let b = svar_cdf_thm42(params, z, &cfg()).unwrap();
        assert!((b.value - want).abs() < 1e-10, "z={z}: {} vs {want}", b.value);
    }
}

#[test]
fn exponential_boundary_closed_form() {
    for n in [3, 5, 10] {
        let c = angle::solve_angle_coeffs(p(1.0, n)).unwrap();
        for r in [0.5, 2.0, 6.0] {
            let (a, b) = boundary_terms(&c, r).unwrap();
            let want = exponential_boundary(n, r).unwrap();
            assert!((a + b - want).abs() < 1e-12 * want.max(1e-300).max(1.0), "n={n} r={r}");
        }
    }
}

#[test]
fn truncated_weights_nonnegative_at_upper_scale() {
    for (alpha, n) in [(1.0, 5), (2.0, 3), (1.0, 10)] {
        let params = p(alpha, n);
        let mbar = truncated_cot_sequence(params, 30, 1e-40).unwrap();
        let lam = ((n * (n - 1)) as f64).sqrt();
        let w = truncated_mixture_weights(&mbar, params, lam, 30).unwrap();
        assert!(w.iter().all(|v| !v.is_sign_negative() || v.is_zero()), "α={alpha} n={n}");
    }
}

#[test]
fn rejects_fractional_alpha_for_truncated_route() {
    assert!(svar_cdf_thm42(p(0.5, 4), 1.0, &cfg()).is_err());
}
