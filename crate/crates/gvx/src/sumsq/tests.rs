use super::*;
use crate::specfun::reg_gamma_cdf;

fn p(alpha: f64, n: usize) -> ModelParams {
    ModelParams::new(alpha, n).unwrap()
}

fn with(repr: Representation) -> EvalConfig {
    EvalConfig::default().with_representation(repr)
}

/// Simpson's rule on a smooth integrand.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut s = f(a) + f(b);
    for i in 1..2 * m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn single_variate_is_gamma_cdf() {
    for repr in [Representation::Power, Representation::Mixture, Representation::Legendre] {
        for r in [0.3, 1.0, 2.5, 7.0] {
            let res = cdf_sumsq(p(1.7, 1), r, &with(repr)).unwrap();
            let want = reg_gamma_cdf(1.7, r).unwrap();
            assert!((res.value - want).abs() < 1e-9, "{repr:?} r={r} {} {want}", res.value);
        }
    }
}

#[test]
fn zero_radius_is_zero() {
    for repr in [Representation::Power, Representation::Mixture, Representation::Legendre, Representation::Fourier] {
        assert_eq!(cdf_sumsq(p(2.0, 3), 0.0, &with(repr)).unwrap().value, 0.0);
    }
}

#[test]
fn exponential_pair_matches_quadrature() {
    // Pr{X₁² + X₂² ≤ 1} = ∫₀^{π/2} e^{−sin θ}(1 − e^{−cos θ}) cos θ dθ
    let want = simpson(|t| (-t.sin()).exp() * (1.0 - (-t.cos()).exp()) * t.cos(), 0.0, std::f64::consts::FRAC_PI_2, 2000);
    let got = cdf_sumsq(p(1.0, 2), 1.0, &with(Representation::Power)).unwrap();
    assert!((got.value - want).abs() < 1e-9, "{} {want}", got.value);
}

#[test]
fn mixture_matches_power() {
    let a = cdf_sumsq(p(1.0, 10), 4.0, &with(Representation::Power)).unwrap();
    let b = cdf_sumsq(p(1.0, 10), 4.0, &with(Representation::Mixture)).unwrap();
    assert!((a.value - b.value).abs() < 1e-9, "{a:?} {b:?}");
    assert!(b.certified);
    let c = cdf_sumsq(p(1.0, 10), 4.0, &EvalConfig { lambda_strategy: LambdaStrategy::Moment, ..with(Representation::Mixture) }).unwrap();
    assert!((a.value - c.value).abs() < 1e-9, "{a:?} {c:?}");
}

#[test]
fn legendre_matches_power() {
    for r in [1.0, 2.0, 4.0] {
        let a = cdf_sumsq(p(1.0, 5), r, &with(Representation::Power)).unwrap();
        let b = cdf_sumsq(p(1.0, 5), r, &with(Representation::Legendre)).unwrap();
        assert!((a.value - b.value).abs() < 1e-7, "r={r} {a:?} {b:?}");
    }
}

#[test]
fn fourier_near_median() {
    let params = p(2.0, 3);
    let cfg = with(Representation::Mixture);
    // bisect for the median
    let (mut lo, mut hi) = (0.1, 50.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf_sumsq(params, mid, &cfg).unwrap().value < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f = cdf_sumsq(params, lo, &with(Representation::Fourier)).unwrap();
    assert!((f.value - 0.5).abs() < 1e-5, "{f:?}");
}

#[test]
fn exponential_pair_u_closed_form() {
    let params = p(1.0, 2);
    let table = MomentTable::build(params, 200, legendre_precision(2.0, 1.0, 1e-10, 200)).unwrap();
    let res = cdf_u(&table, 0.9, &EvalConfig::default()).unwrap();
    assert!((res.value - 0.62f64.sqrt()).abs() < 1e-4, "{res:?}");
    assert!(cdf_u(&table, 0.5, &EvalConfig::default()).is_err());
}

#[test]
fn auto_dispatch_choices() {
    let cfg = EvalConfig::default();
    let a = cdf_sumsq(p(1.0, 10), 1.0, &cfg).unwrap();
    assert_eq!(a.representation, Route::Power);
    let b = cdf_sumsq(p(1.0, 10), 30.0, &cfg).unwrap();
    assert_eq!(b.representation, Route::Mixture);
    assert!((b.value - 1.0).abs() < 1e-10);
}

#[test]
fn large_radius_power_uses_multiprecision() {
    let a = cdf_sumsq(p(1.0, 10), 12.0, &with(Representation::Power)).unwrap();
    let b = cdf_sumsq(p(1.0, 10), 12.0, &with(Representation::Mixture)).unwrap();
    assert!((a.value - b.value).abs() < 1e-9, "{a:?} {b:?}");
}

#[test]
fn grid_is_monotone() {
    let radii: Vec<f64> = (1..=60).map(|i| i as f64 * 0.25).collect();
    let v = cdf_sumsq_many(p(0.5, 3), &radii, &EvalConfig::default()).unwrap();
    for w in v.windows(2) {
        assert!(w[1].value >= w[0].value - 1e-12);
    }
}

