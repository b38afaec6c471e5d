use rug::ops::Pow;
use rug::{Assign, Float, Integer};

use super::{EvalConfig, Route, SeriesResult};
use crate::accum::Compensated;
use crate::coeffs::{ModelParams, MomentTable};
use crate::error::{Error, Result};
use crate::mp;
use crate::specfun::{shifted_legendre_values, sph_bessel_j, LEGENDRE_MAX_ORDER};

/// Coefficients c_k of f*(x) = n^{−1/2} Σ_k c_k P*_k(x/√n) on (0, √n].
#[derive(Debug, Clone)]
pub struct LegendreCoeffs {
    pub params: ModelParams,
    pub values: Vec<Float>,
    /// Absolute rounding-error estimate of each coefficient.
    pub abs_error: Vec<f64>,
    pub prec: u32,
}

impl LegendreCoeffs {
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64()).collect()
    }
}

/// c_k = (2k+1) n^{αn/2}/Γ(αn) Σ_j p*_{k,j} γ_j/(αn+j) for k up to the
/// table order (at most the Legendre limit), with exact integer p*.
pub fn legendre_coeffs(table: &MomentTable, cfg: &EvalConfig) -> Result<LegendreCoeffs> {
    let kmax = table.order().min(LEGENDRE_MAX_ORDER);
    if kmax < cfg.legendre_kmax.min(LEGENDRE_MAX_ORDER) {
        return Err(Error::TableTooSmall {
            order: cfg.legendre_kmax,
            prec: table.precision(),
        });
    }
    let params = table.params();
    let prec = table.precision();
    let an = params.alpha_n_mp(prec);
    let scale = Float::with_val(prec, params.n).pow(Float::with_val(prec, &an / 2u32))
        / Float::with_val(prec, an.gamma_ref());
    let g: Vec<Float> = table.gamma()[..=kmax]
        .iter()
        .enumerate()
        .map(|(j, v)| Float::with_val(prec, v / Float::with_val(prec, &an + j as u32)))
        .collect();
    let unit = 2f64.powi(-(prec as i32) + 1);
    let scale_f = scale.to_f64();
    let mut values = Vec::with_capacity(kmax + 1);
    let mut abs_error = Vec::with_capacity(kmax + 1);
    let mut tmp = Float::new(prec);
    for k in 0..=kmax {
        let mut acc = Float::with_val(prec, 0);
        let mut abs = Float::with_val(64, 0);
        let mut mag = Integer::from(1);
        for j in 0..=k {
            if j > 0 {
                mag *= ((k - j + 1) * (k + j)) as u64;
                mag.div_exact_mut(&Integer::from(j * j));
            }
            tmp.assign(&g[j] * &mag);
            abs += Float::with_val(64, tmp.abs_ref());
            if (k + j) % 2 == 1 {
                acc -= &tmp;
            } else {
                acc += &tmp;
            }
        }
        acc *= &scale;
        acc *= (2 * k + 1) as u32;
        let err = abs.to_f64() * unit * (k as f64 + 2.0) * scale_f * (2 * k + 1) as f64;
        let mag_c = acc.to_f64().abs();
        if mag_c > 0.0 && err > 1e-6 * mag_c && err > cfg.tol * 1e-6 {
            return Err(Error::TableTooSmall {
                order: table.order(),
                prec: prec + (err / (1e-6 * mag_c)).log2().ceil().max(16.0) as u32 + 32,
            });
        }
        values.push(acc);
        abs_error.push(err);
    }
    Ok(LegendreCoeffs {
        params,
        values,
        abs_error,
        prec,
    })
}

fn uncertified(params: ModelParams) -> bool {
    params.alpha_n().min(params.n as f64) <= 2.0
}

fn flag_region(mut res: SeriesResult, params: ModelParams) -> SeriesResult {
    if uncertified(params) {
        res = res.note("min(alpha*n, n) <= 2: orthogonal series convergence is not established here");
    }
    res
}

/// Tail estimate from a geometric fit to the last three term magnitudes.
fn geometric_tail(last: &[f64]) -> f64 {
    let [a, _, c] = [last[0], last[1], last[2]];
    if c == 0.0 && a == 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return f64::INFINITY;
    }
    let q = (c / a).sqrt();
    if q < 1.0 {
        c * q / (1.0 - q)
    } else {
        f64::INFINITY
    }
}

pub(super) fn legendre_eval(
    coeffs: &LegendreCoeffs,
    table: &MomentTable,
    r: f64,
    cfg: &EvalConfig,
) -> Result<SeriesResult> {
    let params = coeffs.params;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("r must be a nonnegative finite number, got {r}")));
    }
    if r == 0.0 {
        return Ok(SeriesResult::zero(Route::Legendre));
    }
    let prec = coeffs.prec;
    let an = params.alpha_n();
    let kmax = coeffs.order();
    let x = Float::with_val(prec, r * params.sqrt_n() / 2.0);
    let bessel = mp::scaled_mod_sph_bessel(kmax, &x, prec);
    let lead = Float::with_val(prec, r).pow(Float::with_val(prec, an));
    let lead_f = lead.to_f64();
    let mut acc = Float::with_val(prec, 0);
    let mut tmp = Float::new(prec);
    let mut mags = Vec::with_capacity(kmax + 1);
    let mut rounding = 0.0;
    for k in 0..=kmax {
        tmp.assign(&coeffs.values[k] * &bessel[k]);
        mags.push(Float::with_val(64, tmp.abs_ref()).to_f64() * lead_f);
        let b = bessel[k].to_f64().abs();
        rounding += (coeffs.abs_error[k] + coeffs.values[k].to_f64().abs() * 2f64.powi(-(prec as i32) + 4)) * b;
        if k % 2 == 1 {
            acc -= &tmp;
        } else {
            acc += &tmp;
        }
    }
    acc *= &lead;
    rounding *= lead_f;
    let tail = if kmax >= 2 {
        geometric_tail(&mags[kmax - 2..])
    } else {
        f64::INFINITY
    };
    if rounding > cfg.tol * 0.25 {
        return Err(Error::TableTooSmall {
            order: table.order(),
            prec: prec + (rounding / (cfg.tol * 0.25)).log2().ceil() as u32 + 16,
        });
    }
    if tail > cfg.tol * 0.5 {
        if kmax < LEGENDRE_MAX_ORDER {
            return Err(Error::TableTooSmall {
                order: (kmax * 3 / 2 + 10).min(LEGENDRE_MAX_ORDER),
                prec: super::legendre_precision(an, r, cfg.tol, kmax * 3 / 2 + 10),
            });
        }
        return Err(Error::Convergence {
            what: "Legendre series",
            budget: kmax,
        });
    }
    let res = SeriesResult::new(acc.to_f64(), tail + rounding, kmax + 1, Route::Legendre)
        .note(format!("Legendre order {kmax} at {prec} bits"));
    Ok(flag_region(res, params))
}

/// H(r) = r^{αn} Σ_k (−1)^k c_k e^{−x} i_k(x), x = r√n/2.
pub fn cdf_sumsq_legendre(table: &MomentTable, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    let coeffs = legendre_coeffs(table, cfg)?;
    legendre_eval(&coeffs, table, r, cfg)
}

/// Number of Legendre coefficients the Fourier coefficients up to `mmax` need.
pub(crate) fn fourier_legendre_order(mmax: usize) -> usize {
    (std::f64::consts::FRAC_PI_2 * mmax as f64).ceil() as usize + 40
}

/// b_m = (2/√n) Σ_{k: m+k odd} (−1)^{(m+k−1)/2} c_k j_k(mπ/2), m = 1..=mmax
/// (index 0 of the result is b_1).
pub fn fourier_coeffs(coeffs: &LegendreCoeffs, cfg: &EvalConfig) -> Result<Vec<f64>> {
    let mmax = cfg.fourier_mmax;
    let c = coeffs.to_f64();
    let kmax = coeffs.order();
    let sqrt_n = coeffs.params.sqrt_n();
    let mut b = Vec::with_capacity(mmax);
    for m in 1..=mmax {
        let j = sph_bessel_j(kmax, m as f64 * std::f64::consts::FRAC_PI_2)?;
        let mut acc = Compensated::new();
        for k in 0..=kmax {
            if (m + k) % 2 == 1 {
                let s = if ((m + k - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                acc.add(s * c[k] * j[k]);
            }
        }
        b.push(2.0 / sqrt_n * acc.value());
    }
    Ok(b)
}

/// Envelope tail Σ_{m>M} |b_m|/m-type terms from a power-law fit to the last terms.
fn power_law_tail(terms: &[f64]) -> f64 {
    let m = terms.len();
    if m < 8 {
        return f64::INFINITY;
    }
    let lo = m - m / 4;
    let env = |i: usize| terms[i.saturating_sub(3)..=i].iter().cloned().fold(0.0, f64::max);
    let (a, b) = (env(lo), env(m - 1));
    if b == 0.0 {
        return 0.0;
    }
    let p = -(b / a).ln() / ((m as f64) / (lo as f64 + 1.0)).ln();
    if p > 1.05 {
        b * m as f64 / (p - 1.0)
    } else {
        b * m as f64 * 20.0
    }
}

pub(super) fn fourier_eval(b: &[f64], params: ModelParams, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("r must be a nonnegative finite number, got {r}")));
    }
    if r == 0.0 {
        return Ok(SeriesResult::zero(Route::Fourier));
    }
    let sn = params.sqrt_n();
    let n = params.n as f64;
    let lead = r.powf(params.alpha_n());
    let decay = (-r * sn).exp();
    let mut acc = Compensated::new();
    let mut mags = Vec::with_capacity(b.len());
    for (i, bm) in b.iter().enumerate() {
        let m = (i + 1) as f64;
        let mp = m * std::f64::consts::PI;
        let edge = if (i + 1) % 2 == 0 { 1.0 - decay } else { 1.0 + decay };
        let t = lead * mp * sn / (n * r * r + mp * mp) * bm * edge;
        mags.push(t.abs());
        acc.add(t);
    }
    let tail = power_law_tail(&mags);
    let mut res = SeriesResult::new(acc.value(), tail + acc.rounding_bound() + 1e3 * f64::EPSILON * lead, b.len(), Route::Fourier);
    if tail > cfg.tol {
        res = res.note(format!("slow convergence: tail estimate {tail:.2e} exceeds tol"));
    }
    Ok(flag_region(res, params))
}

/// H(r) = r^{αn} Σ_m mπ√n/(nr² + m²π²) b_m (1 − (−1)^m e^{−r√n}).
pub fn cdf_sumsq_fourier(table: &MomentTable, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    let coeffs = legendre_coeffs(table, cfg)?;
    let b = fourier_coeffs(&coeffs, cfg)?;
    fourier_eval(&b, table.params(), r, cfg)
}

/// Pr{U ≤ u} = Γ(αn) u^{αn−1} n^{−1/2} Σ_k c_k P*_k(1/(√n u)) for 1/√n ≤ u ≤ 1.
///
/// The Fourier form Γ(αn) u^{αn−1} Σ_m b_m sin(mπ/(√n u)) is reported in the
/// diagnostics.
pub fn cdf_u(table: &MomentTable, u: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    let params = table.params();
    let lo = 1.0 / params.sqrt_n();
    if !(u >= lo * (1.0 - 1e-15)) || !(u <= 1.0) {
        return Err(Error::domain(format!("u must lie in [1/sqrt(n), 1] = [{lo}, 1], got {u}")));
    }
    if params.n == 1 {
        let mut res = SeriesResult::new(1.0, 0.0, 0, Route::Legendre);
        res.certified = true;
        return Ok(res);
    }
    let coeffs = legendre_coeffs(table, cfg)?;
    cdf_u_with(&coeffs, u, cfg)
}

/// [`cdf_u`] with precomputed coefficients.
pub fn cdf_u_with(coeffs: &LegendreCoeffs, u: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    let params = coeffs.params;
    let an = params.alpha_n();
    let sn = params.sqrt_n();
    let lo = 1.0 / sn;
    if !(u >= lo * (1.0 - 1e-15)) || !(u <= 1.0) {
        return Err(Error::domain(format!("u must lie in [1/sqrt(n), 1] = [{lo}, 1], got {u}")));
    }
    let u = u.max(lo);
    let y = (1.0 / (sn * u)).min(1.0);
    let kmax = coeffs.order();
    let p = shifted_legendre_values(kmax, y);
    let c = coeffs.to_f64();
    let pre = (crate::specfun::lgamma(an) + (an - 1.0) * u.ln()).exp() / sn;
    let mut acc = Compensated::new();
    let mut mags = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let t = pre * c[k] * p[k];
        acc.add(t);
        // |P*_k| ≤ 1, so |c_k| bounds the pointwise term
        mags.push(pre * c[k].abs());
    }
    let tail = power_law_tail(&mags[1..]);
    let mut res = SeriesResult::new(acc.value(), tail + acc.rounding_bound(), kmax + 1, Route::Legendre);
    let mmax = ((kmax.saturating_sub(40)) as f64 / std::f64::consts::FRAC_PI_2) as usize;
    let mmax = mmax.min(cfg.fourier_mmax);
    if mmax >= 1 {
        let fcfg = EvalConfig {
            fourier_mmax: mmax,
            ..*cfg
        };
        let b = fourier_coeffs(coeffs, &fcfg)?;
        let x = 1.0 / u;
        let mut f = Compensated::new();
        for (i, bm) in b.iter().enumerate() {
            f.add(bm * ((i + 1) as f64 * std::f64::consts::PI * x / sn).sin());
        }
        let fv = crate::specfun::lgamma(an).exp() * u.powf(an - 1.0) * f.value();
        res = res.note(format!("fourier form ({mmax} terms): {fv:.12e}"));
    }
    Ok(flag_region(res, params))
}
