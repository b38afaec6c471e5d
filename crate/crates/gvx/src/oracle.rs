//! Independent checks: seeded Monte Carlo samples of the statistics, a
//! quadrature cdf for pairs, and Kolmogorov–Smirnov distances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::angle;
use crate::coeffs::ModelParams;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::sumsq::{self, EvalConfig};
use crate::variance::{self, Method};

/// Samples per random stream. Stream b of the generator seeded with `seed`
/// produces block b, so results do not depend on the thread count.
pub const BLOCK: usize = 4096;

/// Statistics of one sample X₁..Xₙ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Draw {
    /// Z = Σ Xᵢ²
    pub z: f64,
    /// (n−1)S², from the centred sum of squares
    pub svar: f64,
    /// tan Φ, Φ the angle between X and the diagonal
    pub tan_phi: f64,
    /// U = √Z / Y with Y = Σ Xᵢ
    pub u: f64,
    /// Y = Σ Xᵢ
    pub y: f64,
}

impl Draw {
    fn from_sample(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let y: f64 = x.iter().sum();
        let z: f64 = x.iter().map(|v| v * v).sum();
        let mean = y / n;
        let svar: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self {
            z,
            svar,
            tan_phi: (n * svar).sqrt() / y,
            u: z.sqrt() / y,
            y,
        }
    }

    /// |(n−1)s² − (u² − 1/n)y²| relative to Z, the scale of both sides.
    pub fn identity_error(&self, n: usize) -> f64 {
        let rhs = (self.u * self.u - 1.0 / n as f64) * self.y * self.y;
        (self.svar - rhs).abs() / self.z
    }
}

/// `count` gamma(α, 1) variates, `BLOCK` per random stream.
pub fn sample_gamma(alpha: f64, count: usize, seed: u64, mode: Execution) -> Result<Vec<f64>> {
    let dist = Gamma::new(alpha, 1.0).map_err(|e| Error::domain(format!("gamma sampler: {e}")))?;
    let parts = exec::map_range(mode, count.div_ceil(BLOCK), |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let len = BLOCK.min(count - b * BLOCK);
        (0..len).map(|_| dist.sample(&mut rng)).collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Draws `samples` independent samples of size n from gamma(α, 1).
pub fn mc_draws(params: ModelParams, samples: usize, seed: u64, mode: Execution) -> Result<Vec<Draw>> {
    let dist = Gamma::new(params.alpha, 1.0).map_err(|e| Error::domain(format!("gamma sampler: {e}")))?;
    let n = params.n;
    let blocks = samples.div_ceil(BLOCK);
    let parts = exec::map_range(mode, blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let len = BLOCK.min(samples - b * BLOCK);
        let mut x = vec![0.0; n];
        (0..len)
            .map(|_| {
                x.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
                Draw::from_sample(&x)
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Sorted samples of each statistic.
#[derive(Debug, Clone)]
pub struct McStatistics {
    pub params: ModelParams,
    pub z: Vec<f64>,
    pub svar: Vec<f64>,
    pub tan_phi: Vec<f64>,
    pub u: Vec<f64>,
    /// Largest [`Draw::identity_error`] over the samples.
    pub identity_error: f64,
}

/// Draws and sorts the statistics; see [`mc_draws`].
pub fn mc_statistics(params: ModelParams, samples: usize, seed: u64, mode: Execution) -> Result<McStatistics> {
    if samples == 0 {
        return Err(Error::domain("samples must be positive"));
    }
    let draws = mc_draws(params, samples, seed, mode)?;
    let identity_error = draws.iter().map(|d| d.identity_error(params.n)).fold(0.0, f64::max);
    let pick = |f: fn(&Draw) -> f64| {
        let mut v: Vec<f64> = draws.iter().map(f).collect();
        exec::sort_floats(mode, &mut v);
        v
    };
    Ok(McStatistics {
        params,
        z: pick(|d| d.z),
        svar: pick(|d| d.svar),
        tan_phi: pick(|d| d.tan_phi),
        u: pick(|d| d.u),
        identity_error,
    })
}

/// sup |F_N − F| over `sorted` samples, with F evaluated by `cdf`. Only
/// samples up to `upper` take part; the empirical cdf still counts all.
pub fn ks_distance<F: Fn(f64) -> f64>(sorted: &[f64], upper: f64, cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        if x > upper {
            break;
        }
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// 1% critical value of the one-sample KS statistic, 1.63/√N.
pub fn ks_critical(samples: usize) -> f64 {
    1.63 / (samples as f64).sqrt()
}

/// Halvings of the lower tail that get their own node. Below the last one
/// both cdfs are under 2^−13 ≈ 1.2·10⁻⁴, far below the KS critical values.
pub const LOWER_TAIL_HALVINGS: u32 = 13;

/// Cdf interpolated through exact values at sample quantiles, piecewise
/// linear in (ln(x − origin), ln F) so that power-law behaviour at the lower
/// end of the support is reproduced.
#[derive(Debug, Clone)]
pub struct GridCdf {
    pub origin: f64,
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    /// Largest error estimate of the exact values.
    pub max_error: f64,
}

impl GridCdf {
    /// Nodes at `points` quantiles of `sorted` from its minimum up to
    /// `upper`, evaluated by `eval`. The support starts at `origin`.
    pub fn build<F>(sorted: &[f64], origin: f64, upper: f64, points: usize, eval: F) -> Result<Self>
    where
        F: FnOnce(&[f64]) -> Result<Vec<(f64, f64)>>,
    {
        let last = sorted.partition_point(|&x| x <= upper).max(1) - 1;
        // uniform in probability, plus geometric refinement of both tails
        let mut idx: Vec<usize> = (0..=points).map(|i| (i * last) / points).collect();
        for m in 1..usize::BITS {
            if m <= LOWER_TAIL_HALVINGS {
                idx.push(last >> m);
            }
            idx.push(last - (last >> m));
        }
        idx.sort_unstable();
        idx.dedup();
        let mut xs: Vec<f64> = idx.into_iter().map(|i| sorted[i]).filter(|&x| x > origin).collect();
        xs.dedup();
        if xs.is_empty() {
            return Err(Error::domain("no samples above the lower end of the support"));
        }
        let vals = eval(&xs)?;
        let max_error = vals.iter().map(|v| v.1).fold(0.0, f64::max);
        Ok(Self {
            origin,
            fs: vals.into_iter().map(|v| v.0.clamp(0.0, 1.0)).collect(),
            xs,
            max_error,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.origin {
            return 0.0;
        }
        let m = self.xs.len();
        let i = self.xs.partition_point(|&v| v <= x);
        if i == m {
            return self.fs[m - 1];
        }
        if m == 1 {
            return self.fs[0];
        }
        // below the first node extrapolate the first segment
        let j = i.clamp(1, m - 1);
        let (xa, xb) = (self.xs[j - 1], self.xs[j]);
        let (fa, fb) = (self.fs[j - 1], self.fs[j]);
        if fa > 0.5 && fb < 1.0 {
            // upper tail: ln(1 − F) against x
            let (ga, gb) = ((1.0 - fa).ln(), (1.0 - fb).ln());
            return 1.0 - (ga + (gb - ga) * (x - xa) / (xb - xa)).exp();
        }
        let tiny = f64::MIN_POSITIVE;
        let (la, lb) = ((xa - self.origin).ln(), (xb - self.origin).ln());
        let (ga, gb) = (fa.max(tiny).ln(), fb.max(tiny).ln());
        let lx = (x - self.origin).ln();
        (ga + (gb - ga) * (lx - la) / (lb - la)).exp().min(1.0)
    }
}

/// Tanh-sinh rule on [a, b]; tolerates integrable endpoint singularities.
/// Returns the estimate and the change over the last halving of the step.
fn tanh_sinh<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, f: F) -> (f64, f64) {
    let half = (b - a) / 2.0;
    let pi2 = std::f64::consts::FRAC_PI_2;
    let eval = |t: f64| {
        let s = pi2 * t.sinh();
        let c = s.cosh();
        let w = half * pi2 * t.cosh() / (c * c);
        if t == 0.0 {
            return w * f(a + half);
        }
        // distance of the node pair from the endpoints, without cancellation
        let d = half * (-s).exp() / c;
        if d > 0.0 && w > 0.0 {
            w * (f(a + d) + f(b - d))
        } else {
            0.0
        }
    };
    let tmax = 4.0;
    let mut h = 0.5;
    let mut sum: f64 = (0..=((tmax / h) as usize)).map(|i| eval(i as f64 * h)).sum();
    let mut est = sum * h;
    let mut err = f64::INFINITY;
    for _ in 0..10 {
        h /= 2.0;
        let odd: f64 = (0..((tmax / h) as usize / 2)).map(|i| eval((2 * i + 1) as f64 * h)).sum();
        sum += odd;
        let next = sum * h;
        err = (next - est).abs();
        est = next;
        if err < tol * est.abs().max(1e-300) {
            break;
        }
    }
    (est, err)
}

/// Pr{X₁² + X₂² ≤ r²} for two gamma(α) variables as
/// ∫₀ʳ f(x) F(√(r² − x²)) dx, by tanh-sinh quadrature.
pub fn quad_cdf_n2(alpha: f64, r: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("need alpha > 0 and finite r >= 0, got ({alpha}, {r})")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let g = statrs::distribution::Gamma::new(alpha, 1.0).map_err(|e| Error::domain(format!("gamma: {e}")))?;
    // split at r/√2 so each half has one singular endpoint
    let split = r / std::f64::consts::SQRT_2;
    let integrand = |x: f64| {
        let rest = ((r - x) * (r + x)).max(0.0).sqrt();
        g.pdf(x) * g.cdf(rest)
    };
    let (a, ea) = tanh_sinh(0.0, split, 1e-13, integrand);
    let (b, eb) = tanh_sinh(split, r, 1e-13, integrand);
    let v = a + b;
    if ea + eb > 1e-10 {
        return Err(Error::Quadrature { estimate: ea + eb });
    }
    Ok(v)
}

/// One Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, Serialize)]
pub struct KsEntry {
    pub statistic: &'static str,
    /// Upper end of the compared range.
    pub upper: f64,
    pub ks: f64,
    pub critical: f64,
    pub pass: bool,
    pub grid_points: usize,
    /// Largest error estimate of the exact cdf values on the grid.
    pub cdf_error: f64,
    pub seconds: f64,
}

/// Monte Carlo mean against an exact moment.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCheck {
    pub statistic: String,
    pub exact: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// Largest |z-score| accepted for a moment.
pub const MOMENT_Z: f64 = 4.0;
/// Largest accepted identity deviation.
pub const IDENTITY_TOL: f64 = 1e-12;

impl MomentCheck {
    /// Plain mean and standard error of `values`.
    pub fn new(statistic: impl Into<String>, exact: f64, values: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut count, mut sum) = (0usize, 0.0);
        for v in values.clone() {
            count += 1;
            sum += v;
        }
        let mean = sum / count as f64;
        let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
        let se = (ss / (count as f64 - 1.0) / count as f64).sqrt();
        let z_score = (mean - exact) / se;
        Self {
            statistic: statistic.into(),
            exact,
            mc_mean: mean,
            mc_se: se,
            z_score,
            pass: z_score.abs() < MOMENT_Z,
        }
    }
}

/// Cos-power orders k in E((cos Φ)^{αn+k}) = γ_k checked by [`verify`].
pub const MOMENT_ORDERS: [usize; 4] = [0, 1, 2, 5];

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub alpha: f64,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub entries: Vec<KsEntry>,
    pub moments: Vec<MomentCheck>,
    /// Largest relative deviation from (n−1)s² = (u² − 1/n)y².
    pub identity_error: f64,
    pub pass: bool,
}

/// Grid nodes per statistic.
pub const GRID_POINTS: usize = 400;
/// Tolerance for the exact cdf on the KS grid.
pub const GRID_TOL: f64 = 1e-7;

fn pairs(v: Vec<sumsq::SeriesResult>) -> Vec<(f64, f64)> {
    v.into_iter().map(|r| (r.value, r.est_error)).collect()
}

/// Monte Carlo samples against the exact cdfs of Z, (n−1)S², tan Φ on
/// [0, (n−1)^{−1/2}] and U.
pub fn verify(params: ModelParams, samples: usize, seed: u64, mode: Execution) -> Result<VerificationReport> {
    params.require_variance()?;
    let mc = mc_statistics(params, samples, seed, mode)?;
    let cfg = EvalConfig {
        execution: mode,
        ..EvalConfig::default()
    }
    .with_tol(GRID_TOL);
    let n = params.n;
    let critical = ks_critical(samples);
    let mut entries = Vec::new();
    let mut clock = std::time::Instant::now();
    let mut push = |statistic: &'static str, sorted: &[f64], upper: f64, grid: GridCdf| {
        let ks = ks_distance(sorted, upper, |x| grid.eval(x));
        let seconds = clock.elapsed().as_secs_f64();
        clock = std::time::Instant::now();
        entries.push(KsEntry {
            statistic,
            upper,
            ks,
            critical,
            pass: ks < critical,
            grid_points: grid.xs.len(),
            cdf_error: grid.max_error,
            seconds,
        });
    };

    let grid = GridCdf::build(&mc.z, 0.0, f64::INFINITY, GRID_POINTS, |xs| {
        let radii: Vec<f64> = xs.iter().map(|z| z.sqrt()).collect();
        sumsq::cdf_sumsq_many(params, &radii, &cfg).map(pairs)
    })?;
    push("z", &mc.z, f64::INFINITY, grid);

    let grid = GridCdf::build(&mc.svar, 0.0, f64::INFINITY, GRID_POINTS, |xs| {
        let results: Result<Vec<_>> = variance::svar_cdf_many_z(params, xs, &cfg, Method::Auto).into_iter().collect();
        results.map(pairs)
    })?;
    push("svar", &mc.svar, f64::INFINITY, grid);

    let t_n = 1.0 / ((n - 1) as f64).sqrt();
    let grid = GridCdf::build(&mc.tan_phi, 0.0, t_n, GRID_POINTS, |xs| tan_phi_cdf(params, xs, &cfg))?;
    push("tan_phi", &mc.tan_phi, t_n, grid);

    let grid = GridCdf::build(&mc.u, 1.0 / params.sqrt_n(), f64::INFINITY, GRID_POINTS, |xs| u_cdf(params, xs, &cfg))?;
    push("u", &mc.u, f64::INFINITY, grid);

    let moments = moment_checks(params, &mc)?;
    let pass = entries.iter().all(|e| e.pass)
        && moments.iter().all(|m| m.pass)
        && mc.identity_error < IDENTITY_TOL;
    Ok(VerificationReport {
        alpha: params.alpha,
        n,
        samples,
        seed,
        entries,
        moments,
        identity_error: mc.identity_error,
        pass,
    })
}

fn moment_checks(params: ModelParams, mc: &McStatistics) -> Result<Vec<MomentCheck>> {
    let kmax = *MOMENT_ORDERS.iter().max().unwrap_or(&0);
    let table = crate::coeffs::build_moments(params, kmax)?;
    let an = params.alpha_n();
    let sn = params.sqrt_n();
    let mut out: Vec<MomentCheck> = MOMENT_ORDERS
        .iter()
        .map(|&k| {
            let s = an + k as f64;
            // cos Φ = 1/(√n U)
            let values = mc.u.iter().map(move |u| (sn * u).recip().powf(s));
            MomentCheck::new(format!("cos_pow({k})"), table.gamma()[k].to_f64(), values)
        })
        .collect();
    let scale = 1.0 / (params.n - 1) as f64;
    out.push(MomentCheck::new("s2_mean", params.alpha, mc.svar.iter().map(move |v| v * scale)));
    Ok(out)
}

fn u_cdf(params: ModelParams, xs: &[f64], cfg: &EvalConfig) -> Result<Vec<(f64, f64)>> {
    let lo = 1.0 / params.sqrt_n();
    let us: Vec<f64> = xs.iter().map(|u| u.clamp(lo, 1.0)).collect();
    sumsq::cdf_u_many(params, &us, cfg).map(pairs)
}

/// Pr{tan Φ ≤ t}: the angle polynomial for integer α, otherwise through
/// U = √((1 + tan²Φ)/n).
fn tan_phi_cdf(params: ModelParams, xs: &[f64], cfg: &EvalConfig) -> Result<Vec<(f64, f64)>> {
    if params.integer_alpha().is_some() {
        let coeffs = angle::solve_angle_coeffs(params)?;
        return xs
            .iter()
            .map(|&t| coeffs.tan_cdf(t).map(|v| (v, coeffs.residual)))
            .collect();
    }
    let n = params.n as f64;
    let us: Vec<f64> = xs.iter().map(|t| ((1.0 + t * t) / n).sqrt()).collect();
    u_cdf(params, &us, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_sample_mean_and_variance() {
        let x = sample_gamma(2.0, 1_000_000, 11, Execution::Parallel).unwrap();
        let m = MomentCheck::new("mean", 2.0, x.iter().copied());
        assert!((m.mc_mean - 2.0).abs() < 4.0 * (2.0f64 / 1e6).sqrt(), "{m:?}");
        let var = x.iter().map(|v| (v - m.mc_mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!((var - 2.0).abs() < 0.02, "{var}");
        let y = sample_gamma(2.0, 10, 11, Execution::Sequential).unwrap();
        assert_eq!(&x[..10], &y[..]);
        let w = sample_gamma(0.3, 10_000, 3, Execution::Sequential).unwrap();
        assert!(w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn cos_power_moments_match_table() {
        let p = ModelParams::new(1.5, 4).unwrap();
        let mc = mc_statistics(p, 200_000, 5, Execution::Parallel).unwrap();
        for m in moment_checks(p, &mc).unwrap() {
            assert!(m.mc_se > 0.0);
            assert!(m.pass, "{m:?}");
        }
        assert!(mc.u.iter().all(|&u| u >= 0.5 * (1.0 - 1e-15) && u <= 1.0 + 1e-15));
    }

    #[test]
    fn draws_do_not_depend_on_threads() {
        let p = ModelParams::new(1.5, 4).unwrap();
        let a = mc_draws(p, 3 * BLOCK + 17, 7, Execution::Sequential).unwrap();
        let b = mc_draws(p, 3 * BLOCK + 17, 7, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let c = mc_draws(p, 100, 8, Execution::Sequential).unwrap();
        assert_ne!(a[0], c[0]);
    }

    #[test]
    fn identity_holds_on_samples() {
        let p = ModelParams::new(0.5, 6).unwrap();
        let mc = mc_statistics(p, 20_000, 1, Execution::Parallel).unwrap();
        assert!(mc.identity_error < 1e-12, "{}", mc.identity_error);
    }

    #[test]
    fn quadrature_exponential_pair() {
        // X₁² + X₂² ≤ r² for unit exponentials, by direct polar integration
        for r in [0.5f64, 1.0, 3.0] {
            let q = quad_cdf_n2(1.0, r).unwrap();
            let (want, _) = tanh_sinh(0.0, std::f64::consts::FRAC_PI_2, 1e-14, |th| {
                let s = r * (th.cos() + th.sin());
                // ∫₀ʳ ρ e^{−ρ s} dρ
                r * r * (1.0 - (-s).exp() * (1.0 + s)) / (s * s)
            });
            assert!((q - want).abs() < 1e-11, "r={r}: {q} vs {want}");
        }
    }

    #[test]
    fn ks_of_exact_sample_is_small() {
        let sorted: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_distance(&sorted, f64::INFINITY, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
    }

    #[test]
    fn grid_interpolates_linearly() {
        let sorted: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let g = GridCdf::build(&sorted, 0.0, f64::INFINITY, 10, |xs| {
            Ok(xs.iter().map(|x| ((x / 100.0).powi(3), 0.0)).collect())
        })
        .unwrap();
        for x in [0.5, 5.0, 55.5, 99.0] {
            assert!((g.eval(x) - (x / 100.0).powi(3)).abs() < 1e-12, "{x}");
        }
        assert_eq!(g.eval(1e9), 1.0);
        assert_eq!(g.eval(0.0), 0.0);
    }
}
