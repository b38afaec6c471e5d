//! The cdf of the sample variance: the double series and double mixture for
//! general α, and the truncated-moment route for integer α.

use rug::ops::Pow;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};

use crate::angle::{self, AngleCoefficients};
use crate::coeffs::{differences, ModelParams, MomentTable, MAX_ORDER};
use crate::error::{Error, Result};
use crate::exec;
use crate::mp;
use crate::specfun::{gamma_cdf_ladder, lgamma, reg_gamma_cdf, upper_gamma_ratio};
use crate::sumsq::{EvalConfig, LambdaStrategy, Representation, Route, SeriesResult};

/// Which theorem evaluates the cdf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Double series or double mixture, any α > 0.
    Thm41,
    /// Truncated moments of cot Φ, integer α.
    Thm42,
    #[default]
    Auto,
}

/// Largest amplification (max term / 1) for which auto keeps the double series.
const SERIES_AMPLIFICATION: f64 = 1e6;
/// Outer terms used to fit the tail constant.
const FIT_WINDOW: usize = 10;
/// Blocks in the envelope fit of the outer terms.
const OUTER_BLOCKS: usize = 4;

/// Outer-series result together with the computed outer terms.
#[derive(Debug, Clone)]
pub struct OuterSeries {
    pub result: SeriesResult,
    /// The j-th outer term, j = 0..J.
    pub terms: Vec<f64>,
}

fn check_z(z: f64) -> Result<()> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("threshold must be a nonnegative finite number, got {z}")));
    }
    Ok(())
}

/// Tail of the outer sum from a power-law envelope c i^{−p} fitted to the
/// block maxima of |T_i| over [j/2, j]. The exponent is the larger of the
/// guaranteed decay `p` and the fitted one.
fn outer_tail(terms: &[f64], p: f64) -> (f64, f64, f64) {
    let j = terms.len() - 1;
    let lo = (j / 2).max(1);
    let width = (j + 1 - lo) / OUTER_BLOCKS;
    let mut pts = Vec::with_capacity(OUTER_BLOCKS);
    if width >= 2 {
        for b in 0..OUTER_BLOCKS {
            let (a, z) = (lo + b * width, if b + 1 == OUTER_BLOCKS { j + 1 } else { lo + (b + 1) * width });
            let m = terms[a..z].iter().fold(0.0f64, |m, t| m.max(t.abs()));
            if m > 0.0 {
                pts.push(((((a + z - 1) as f64) / 2.0).ln(), m.ln()));
            }
        }
    }
    let fitted = if pts.len() == OUTER_BLOCKS {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    } else {
        p
    };
    let p = if fitted.is_finite() { fitted.max(p) } else { p };
    let c = (lo..=j).map(|i| terms[i].abs() * (i as f64).powf(p)).fold(0.0, f64::max);
    (c * (j as f64).powf(1.0 - p) / (p - 1.0), p, c)
}

/// Outer length at which the fitted tail drops below tol/2, as a table
/// request, or a convergence failure past the budget.
fn outer_exhausted(terms: &[f64], p: f64, table: &MomentTable, inner: usize, cfg: &EvalConfig) -> Error {
    let (_, q, c) = outer_tail(terms, p);
    let need = (2.0 * c / (cfg.tol * (q - 1.0))).powf(1.0 / (q - 1.0)) * 1.2 + FIT_WINDOW as f64;
    let ceiling = (2 * cfg.max_j + inner + 20).min(MAX_ORDER);
    if table.order() >= ceiling {
        return Error::Convergence {
            what: "outer variance series (raise max_j)",
            budget: cfg.max_j.min((MAX_ORDER - inner) / 2),
        };
    }
    let want = if need.is_finite() { 2.0 * need + inner as f64 + 20.0 } else { f64::INFINITY };
    Error::TableTooSmall {
        order: (want.min(ceiling as f64) as usize).max(table.order() + 40).min(ceiling),
        prec: table.precision(),
    }
}

fn ln_binom_rising(a: f64, j: usize) -> f64 {
    lgamma(a + j as f64) - lgamma(a) - lgamma(j as f64 + 1.0)
}

/// C((αn+k)/2 + j − 1, j) for all k in 0..len, advanced in j.
struct BinomialRows {
    an: Float,
    j: usize,
    values: Vec<Float>,
    prec: u32,
}

impl BinomialRows {
    fn new(an: Float, prec: u32) -> Self {
        Self {
            an,
            j: 0,
            values: Vec::new(),
            prec,
        }
    }

    fn ensure(&mut self, len: usize) {
        while self.values.len() < len {
            let k = self.values.len();
            let v = if k < 2 {
                let a = self.half_shift(k);
                let mut c = Float::with_val(self.prec, 1);
                for i in 0..self.j {
                    c *= Float::with_val(self.prec, &a + i as u32);
                    c /= (i + 1) as u32;
                }
                c
            } else {
                // C(a+1+j−1, j) = C(a+j−1, j)(a+j)/a
                let a = self.half_shift(k - 2);
                let mut c = self.values[k - 2].clone();
                c *= Float::with_val(self.prec, &a + self.j as u32);
                c /= &a;
                c
            };
            self.values.push(v);
        }
    }

    /// (αn + k)/2
    fn half_shift(&self, k: usize) -> Float {
        Float::with_val(self.prec, &self.an + k as u32) / 2u32
    }

    fn advance(&mut self) {
        let j = self.j as u32;
        for k in 0..self.values.len() {
            let a = self.half_shift(k) + j;
            self.values[k] *= a;
            self.values[k] /= j + 1;
        }
        self.j += 1;
    }
}

/// Plan for the inner series of outer index j: number of terms, ln of the
/// largest term, and a bound on the omitted tail.
struct InnerPlan {
    terms: usize,
    log_max: f64,
    tail: f64,
}

fn plan_inner(table: &MomentTable, j: usize, x: f64, log_pre: f64, target: f64, budget: usize) -> Result<InnerPlan> {
    let an = table.params().alpha_n();
    let lx = x.ln();
    let lg = table.log_gamma();
    let mut log_max = f64::NEG_INFINITY;
    for k in 0..=budget {
        let idx = 2 * j + k;
        if idx + 1 >= lg.len() {
            return Err(Error::TableTooSmall {
                order: ((table.order() as f64) * 1.6) as usize + 40,
                prec: table.precision(),
            });
        }
        let a = (an + k as f64) / 2.0;
        let lt = log_pre + ln_binom_rising(a, j) + lg[idx] - (an + k as f64).ln() + k as f64 * lx
            - lgamma(k as f64 + 1.0);
        log_max = log_max.max(lt);
        // |t_{k+1}/t_k| ≤ x/(k+1) · C_{j,k+1}/C_{j,k}, since γ decreases
        let ratio = x / (k as f64 + 1.0)
            * (ln_binom_rising((an + k as f64 + 1.0) / 2.0, j) - ln_binom_rising(a, j)).exp();
        if ratio < 0.5 && k as f64 > x {
            let tail = lt.exp() * ratio / (1.0 - ratio);
            if tail < target {
                return Ok(InnerPlan {
                    terms: k + 1,
                    log_max,
                    tail,
                });
            }
        }
    }
    Err(Error::Convergence {
        what: "inner variance series",
        budget,
    })
}

/// Pr{(n−1)S² ≤ z}: the double power series
/// (r^{αn}/Γ(αn)) Σ_j n^{−j} Σ_k C((αn+k)/2+j−1, j) μ_{2j+k}/(αn+k) (−r)^k/k!, r = √z.
pub fn svar_cdf_series(table: &MomentTable, z: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    svar_series_terms(table, z, cfg).map(|o| o.result)
}

/// [`svar_cdf_series`] together with its outer terms.
pub fn svar_series_terms(table: &MomentTable, z: f64, cfg: &EvalConfig) -> Result<OuterSeries> {
    let params = table.params();
    params.require_variance()?;
    check_z(z)?;
    cfg.validate()?;
    if z == 0.0 {
        return Ok(OuterSeries {
            result: SeriesResult::zero(Route::DoubleSeries),
            terms: Vec::new(),
        });
    }
    let prec = table.precision();
    let an = params.alpha_n();
    let an_mp = params.alpha_n_mp(prec);
    let x = z.sqrt() * params.sqrt_n();
    let p = (params.n as f64 + 1.0) / 2.0;
    let log_pre = an * x.ln() - lgamma(an);
    let xm = Float::with_val(prec, x);
    let pre = Float::with_val(prec, (&xm).pow(Float::with_val(prec, an))) / mp::gamma(prec, an);
    let mut powers: Vec<Float> = vec![Float::with_val(prec, 1)];
    let mut rows = BinomialRows::new(params.alpha_n_mp(prec), prec);
    let mut total = Float::with_val(prec, 0);
    let mut terms = Vec::new();
    let mut inner_tails = 0.0;
    let mut rounding = 0.0;
    let mut tmp = Float::new(prec);
    let unit = 2f64.powi(-(prec as i32) + 4);
    for j in 0..=cfg.max_j {
        let plan = match plan_inner(table, j, x, log_pre, cfg.tol * 1e-3 / (j as f64 + 1.0).powi(2), cfg.max_k) {
            Err(Error::TableTooSmall { .. }) if j >= 2 * FIT_WINDOW => {
                return Err(outer_exhausted(&terms, p, table, table.order().saturating_sub(2 * j), cfg))
            }
            other => other?,
        };
        let need = ((plan.log_max - (cfg.tol * 1e-3).ln()) / std::f64::consts::LN_2).max(0.0) as u32 + 48;
        if need > prec {
            return Err(Error::TableTooSmall {
                order: table.order(),
                prec: need + 32,
            });
        }
        rows.ensure(plan.terms);
        while powers.len() < plan.terms {
            let k = powers.len();
            let mut v = Float::with_val(prec, &powers[k - 1] * &xm);
            v /= k as u32;
            powers.push(v);
        }
        let mut inner = Float::with_val(prec, 0);
        for k in 0..plan.terms {
            tmp.assign(&rows.values[k] * &table.gamma()[2 * j + k]);
            tmp *= &powers[k];
            tmp /= Float::with_val(prec, &an_mp + k as u32);
            if k % 2 == 0 {
                inner += &tmp;
            } else {
                inner -= &tmp;
            }
        }
        inner *= &pre;
        total += &inner;
        let t = inner.to_f64();
        terms.push(t);
        inner_tails += plan.tail;
        rounding += plan.log_max.exp() * plan.terms as f64 * unit;
        rows.advance();
        if j + 1 >= FIT_WINDOW {
            let (tail, fit, _) = outer_tail(&terms, p);
            if tail < cfg.tol * 0.5 {
                let err = tail + inner_tails + rounding;
                let res = SeriesResult::new(total.to_f64(), err, j + 1, Route::DoubleSeries)
                    .note(format!("outer terms {}, tail fit exponent {fit:.2}", j + 1));
                return Ok(OuterSeries { result: res, terms });
            }
        }
    }
    Err(Error::Convergence {
        what: "outer variance series (raise max_j)",
        budget: cfg.max_j,
    })
}

/// Pr{(n−1)S² ≤ z} as Σ_j (λ²/n)^j Σ_k δ_{j,k,λ} C(αn+k−1, k) G_{αn+k}(λr),
/// with δ_{j,·,λ} the iterated differences of
/// ℓ ↦ C((αn+ℓ)/2+j−1, j) μ_{2j+ℓ}/λ^{αn+2j+ℓ}.
pub fn svar_cdf_mixture(table: &MomentTable, z: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    svar_mixture_terms(table, z, cfg).map(|o| o.result)
}

/// [`svar_cdf_mixture`] together with its outer terms.
pub fn svar_mixture_terms(table: &MomentTable, z: f64, cfg: &EvalConfig) -> Result<OuterSeries> {
    let params = table.params();
    params.require_variance()?;
    check_z(z)?;
    cfg.validate()?;
    if z == 0.0 {
        return Ok(OuterSeries {
            result: SeriesResult::zero(Route::DoubleMixture),
            terms: Vec::new(),
        });
    }
    let lambda = cfg.lambda_strategy.resolve(params)?;
    let prec = table.precision();
    let an = params.alpha_n();
    let r = z.sqrt();
    let x = r * params.sqrt_n();
    let xl = lambda * r;
    let p = (params.n as f64 + 1.0) / 2.0;
    let log_pre = an * x.ln() - lgamma(an);
    // (√n/λ)^{αn+ℓ}
    let ratio = Float::with_val(prec, params.sqrt_n()) / lambda;
    let ratio_lead = Float::with_val(prec, (&ratio).pow(Float::with_val(prec, an)));
    let mut rows = BinomialRows::new(params.alpha_n_mp(prec), prec);
    let mut g: Vec<Float> = Vec::new();
    let mut binom: Vec<Float> = Vec::new();
    let mut total = Float::with_val(prec, 0);
    let mut terms = Vec::new();
    let mut inner_tails = 0.0;
    let mut rounding = 0.0;
    let mut kmix = 0usize;
    let unit = 2f64.powi(-(prec as i32) + 4);
    for j in 0..=cfg.max_j {
        let target = cfg.tol * 1e-3 / (j as f64 + 1.0).powi(2);
        let plan = match plan_inner(table, j, x, log_pre, target, cfg.max_k) {
            Err(Error::TableTooSmall { .. }) if j >= 2 * FIT_WINDOW => {
                return Err(outer_exhausted(&terms, p, table, kmix, cfg))
            }
            other => other?,
        };
        kmix = kmix.max(plan.terms + 10);
        let inner = loop {
            if 2 * j + kmix > table.order() {
                if j >= 2 * FIT_WINDOW {
                    return Err(outer_exhausted(&terms, p, table, kmix, cfg));
                }
                return Err(Error::TableTooSmall {
                    order: (2 * j + kmix + 2).max(((table.order() as f64) * 1.6) as usize + 40),
                    prec,
                });
            }
            rows.ensure(kmix + 1);
            let mut scaled = Vec::with_capacity(kmix + 1);
            let mut rp = ratio_lead.clone();
            for l in 0..=kmix {
                let mut v = Float::with_val(prec, &rows.values[l] * &table.gamma()[2 * j + l]);
                v *= &rp;
                scaled.push(v);
                rp *= &ratio;
            }
            let d = differences(&scaled, kmix)?;
            if binom.len() <= kmix {
                binom = mp::rising_binomials(&params.alpha_n_mp(prec), kmix * 2, prec);
            }
            if g.len() <= kmix {
                g = mp::gamma_cdf_ladder(&params.alpha_n_mp(prec), kmix * 2, xl, prec);
            }
            let outer = Float::with_val(prec, lambda * lambda / params.n as f64).pow(j as u32);
            let contrib: Vec<Float> = (0..=kmix)
                .map(|k| {
                    let mut c = Float::with_val(prec, &d.values[k] * &binom[k]);
                    c *= &g[k];
                    c * &outer
                })
                .collect();
            let mags: Vec<f64> = contrib.iter().map(|c| c.to_f64().abs()).collect();
            let stop = (3..=kmix).find(|&k| k as f64 > xl && mags[k - 3..=k].iter().all(|&c| c < target));
            match stop {
                Some(k) => {
                    let scale = outer.to_f64();
                    let err: f64 = (0..=k)
                        .map(|i| (d.abs_error[i] * binom[i].to_f64() + mags[i] * unit) * scale * g[i].to_f64())
                        .sum();
                    if err > target {
                        return Err(Error::TableTooSmall {
                            order: table.order(),
                            prec: prec + (err / target).log2().ceil() as u32 + 32,
                        });
                    }
                    let mut acc = Float::with_val(prec, 0);
                    contrib[..=k].iter().for_each(|c| acc += c);
                    break (acc, mags[k], err);
                }
                None => kmix = kmix * 3 / 2 + 10,
            }
        };
        let (t, tail, round) = inner;
        total += &t;
        terms.push(t.to_f64());
        inner_tails += tail;
        rounding += round;
        rows.advance();
        if j + 1 >= FIT_WINDOW {
            let (tail, fit, _) = outer_tail(&terms, p);
            if tail < cfg.tol * 0.5 {
                let res = SeriesResult::new(total.to_f64(), tail + inner_tails + rounding, j + 1, Route::DoubleMixture)
                    .note(format!("lambda = {lambda}, outer terms {}, tail fit exponent {fit:.2}", j + 1));
                return Ok(OuterSeries { result: res, terms });
            }
        }
    }
    Err(Error::Convergence {
        what: "outer variance mixture (raise max_j)",
        budget: cfg.max_j,
    })
}

/// Table order and precision for the double series or mixture at radius r,
/// from an a priori estimate of the outer length `jmax`.
pub fn thm41_requirements(params: ModelParams, r: f64, cfg: &EvalConfig, jmax: usize) -> (usize, u32) {
    let an = params.alpha_n();
    let x = r * params.sqrt_n();
    let log_pre = an * x.max(1e-300).ln() - lgamma(an);
    let mut order = 0;
    let mut log_max = 0.0f64;
    for j in [0, jmax / 2, jmax] {
        let mut k = 0usize;
        loop {
            let a = (an + k as f64) / 2.0;
            let lt = log_pre + ln_binom_rising(a, j) - (an + k as f64).ln() + k as f64 * x.max(1e-300).ln()
                - lgamma(k as f64 + 1.0);
            log_max = log_max.max(lt);
            if (k as f64) > x && lt < (cfg.tol * 1e-6).ln() || k > cfg.max_k {
                break;
            }
            k += 1;
        }
        order = order.max(2 * j + 2 * k + 20);
    }
    let kmix = order.saturating_sub(2 * jmax);
    let prec = ((log_max - cfg.tol.ln()) / std::f64::consts::LN_2) as u32
        + crate::sumsq::mixture_precision(an, kmix, cfg.tol)
        + 64;
    (order.min(MAX_ORDER), prec)
}

/// Initial outer-length estimate.
fn initial_outer(params: ModelParams) -> usize {
    match params.n {
        2..=4 => 400,
        5..=7 => 200,
        _ => 100,
    }
}

/// Truncated-moment pieces for integer α at one table size.
#[derive(Debug, Clone)]
pub struct TruncatedParts {
    pub coeffs: AngleCoefficients,
    pub gbar: Vec<Float>,
    pub mbar: Vec<Float>,
}

/// Series length, absolute M̄ accuracy per k, table order and precision for
/// the integer-α route at radius r.
pub struct Thm42Plan {
    pub series_terms: usize,
    pub abs_tol: Vec<f64>,
    pub order: usize,
    pub prec: u32,
}

/// ln γ₀ from the closed form of β₀.
fn log_gamma0(params: ModelParams) -> f64 {
    let (a, n) = (params.alpha, params.n as f64);
    let an = params.alpha_n();
    std::f64::consts::LN_2 + lgamma(an) + n * (lgamma(a / 2.0) - std::f64::consts::LN_2 - lgamma(a))
        - lgamma(an / 2.0)
        - an / 2.0 * n.ln()
}

pub fn thm42_plan(params: ModelParams, r: f64, tol: f64) -> Result<Thm42Plan> {
    let an = params.alpha_n();
    let n = params.n as f64;
    let lx = (r * n.sqrt()).max(1e-300).ln();
    let x0 = r * (n * (n - 1.0)).sqrt();
    let half_ln = 0.5 * (n - 1.0).ln();
    // weights X^{αn+k}/(Γ(αn)(αn+k)k!); M̄_k ≤ (n−1)^{(αn+k)/2}
    let mut weights = Vec::new();
    let mut log_max = f64::NEG_INFINITY;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let lw = (an + kf) * lx - lgamma(an) - (an + kf).ln() - lgamma(kf + 1.0);
        let lb = lw + (an + kf) * half_ln;
        weights.push(lw);
        log_max = log_max.max(lb);
        // the evaluator stops once X₀/(k+1) < 1/2 and the tail bound is small
        let q = x0 / (kf + 1.0);
        if q < 0.5 && lb + (q / (1.0 - q)).ln() < (tol * 1e-3).ln() {
            break;
        }
        k += 1;
        if k > MAX_ORDER {
            return Err(Error::Budget {
                what: "truncated-moment series",
                detail: format!("radius {r} needs more than {MAX_ORDER} terms"),
            });
        }
    }
    let kser = weights.len();
    let share = (tol / (4.0 * kser as f64)).ln();
    let abs_tol: Vec<f64> = weights.iter().map(|lw| (share - lw).exp().max(1e-300)).collect();
    let mut order = kser + 2;
    if params.n > 2 {
        let lg0 = log_gamma0(params);
        let lrho = angle::truncation_ratio(params).ln();
        for (k, lw) in weights.iter().enumerate() {
            // γ̄_k ≤ ρ^{k/2} γ₀
            let log_eps = share - lw - lg0 - k as f64 / 2.0 * lrho;
            let j = angle::cot_terms_needed(params, k, log_eps, MAX_ORDER).ok_or(Error::Budget {
                what: "truncated cot moments",
                detail: format!("binomial series at k = {k} exceeds {MAX_ORDER} terms"),
            })?;
            order = order.max(k + 2 * j + 4);
        }
    }
    if order > MAX_ORDER {
        return Err(Error::Budget {
            what: "truncated cot moments",
            detail: format!("needs moment order {order}, limit {MAX_ORDER}"),
        });
    }
    let loss = order as f64 / 2.0 * (n / (n - 1.0)).log2();
    let prec = (loss + (log_max - tol.ln()) / std::f64::consts::LN_2) as u32 + 96;
    Ok(Thm42Plan {
        series_terms: kser,
        abs_tol,
        order,
        prec,
    })
}

/// γ̄ and M̄ from a table built to the plan.
pub fn truncated_parts(coeffs: &AngleCoefficients, table: &MomentTable, plan: &Thm42Plan) -> Result<TruncatedParts> {
    let params = table.params();
    let gbar = angle::truncated_cos_moments(coeffs, table, table.order())?;
    let mbar = (0..plan.series_terms)
        .map(|k| angle::truncated_cot_moment(&gbar, params, k, plan.abs_tol[k]))
        .collect::<Result<Vec<_>>>()?;
    Ok(TruncatedParts {
        coeffs: coeffs.clone(),
        gbar,
        mbar,
    })
}

/// Boundary terms W(t_n)G_{αn}(X₀) + ∫_{X₀}^∞ g_{αn}(x) W(X/x) dx with
/// X = r√n, X₀ = r√(n(n−1)).
pub fn boundary_terms(coeffs: &AngleCoefficients, r: f64) -> Result<(f64, f64)> {
    let params = coeffs.params;
    let an = params.alpha_n();
    let n = params.n as f64;
    let x = r * n.sqrt();
    let x0 = r * (n * (n - 1.0)).sqrt();
    let inner = coeffs.w_at_phi_n * reg_gamma_cdf(an, x0)?;
    if r == 0.0 {
        return Ok((0.0, 0.0));
    }
    let ln_c = lgamma(an) - n * lgamma(params.alpha) - an / 2.0 * n.ln();
    let mut tail = 0.0;
    for (j, a) in coeffs.a.iter().enumerate() {
        let e = n - 1.0 + 2.0 * j as f64;
        let b = (params.alpha - 1.0) * n - 2.0 * j as f64 + 1.0;
        let q = upper_gamma_ratio(b, x0)?;
        if q == 0.0 {
            continue;
        }
        let l = ln_c + e * x.ln() - e.ln() + lgamma(b) + q.ln() - lgamma(an);
        tail += a.signum() * (a.abs().ln() + l).exp();
    }
    Ok((inner, tail))
}

/// The α = 1 closed form (n−1)!/(√n (n(n−1))^{(n−1)/2}) b_{n−1} G_{n−1}(X₀)
/// of the two boundary terms.
pub fn exponential_boundary(n: usize, r: f64) -> Result<f64> {
    let nf = n as f64;
    let x0 = r * (nf * (nf - 1.0)).sqrt();
    let ln_b = (nf - 1.0) / 2.0 * std::f64::consts::PI.ln() - lgamma((nf + 1.0) / 2.0);
    let l = lgamma(nf) - 0.5 * nf.ln() - (nf - 1.0) / 2.0 * (nf * (nf - 1.0)).ln() + ln_b;
    Ok(l.exp() * reg_gamma_cdf(nf - 1.0, x0)?)
}

/// Δ̄_k = Σ_ℓ (−1)^ℓ C(k,ℓ) (√n/λ)^{αn+ℓ} M̄_ℓ, k = 0..=kmax.
pub fn truncated_mixture_weights(mbar: &[Float], params: ModelParams, lambda: f64, kmax: usize) -> Result<Vec<Float>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let prec = mbar.first().map(|v| v.prec()).unwrap_or(64);
    let ratio = Float::with_val(prec, params.sqrt_n()) / lambda;
    let mut rp = Float::with_val(prec, (&ratio).pow(Float::with_val(prec, params.alpha_n())));
    let scaled: Vec<Float> = mbar
        .iter()
        .take(kmax + 1)
        .map(|m| {
            let v = Float::with_val(prec, m * &rp);
            rp *= &ratio;
            v
        })
        .collect();
    Ok(differences(&scaled, kmax)?.values)
}

/// M̄_k for k = 0..=kmax, each to relative accuracy `rel_tol`, with the
/// table and precision sized for it.
pub fn truncated_cot_sequence(params: ModelParams, kmax: usize, rel_tol: f64) -> Result<Vec<Float>> {
    params.require_variance()?;
    let n = params.n as f64;
    let mut order = kmax + 2;
    if params.n > 2 {
        for k in 0..=kmax {
            let j = angle::cot_terms_needed(params, k, rel_tol.ln(), MAX_ORDER).ok_or(Error::Budget {
                what: "truncated cot moments",
                detail: format!("binomial series at k = {k} exceeds {MAX_ORDER} terms"),
            })?;
            order = order.max(k + 2 * j + 4);
        }
    }
    if order > MAX_ORDER {
        return Err(Error::Budget {
            what: "truncated cot moments",
            detail: format!("needs moment order {order}, limit {MAX_ORDER}"),
        });
    }
    let prec = (order as f64 / 2.0 * (n / (n - 1.0)).log2() - rel_tol.log2()) as u32 + 2 * kmax as u32 + 96;
    let coeffs = angle::solve_angle_coeffs(params)?;
    let table = MomentTable::build(params, order, prec)?;
    let gbar = angle::truncated_cos_moments(&coeffs, &table, table.order())?;
    angle::truncated_cot_moments(&gbar, params, kmax, rel_tol)
}

/// The paper's suggested scale √n (M̄₀/(1 − W(t_n)))^{1/(αn)}.
pub fn recommended_lambda(mbar0: f64, w_at_phi_n: f64, params: ModelParams) -> f64 {
    params.sqrt_n() * (mbar0 / (1.0 - w_at_phi_n)).powf(1.0 / params.alpha_n())
}

/// Pr{√(n−1) S ≤ r} for integer α by the truncated-moment series plus the two
/// boundary terms. The mixture form over Δ̄ is reported in the diagnostics.
pub fn svar_cdf_integer_alpha(
    coeffs: &AngleCoefficients,
    table: &MomentTable,
    gbar: &[Float],
    mbar: &[Float],
    r: f64,
    cfg: &EvalConfig,
) -> Result<SeriesResult> {
    let params = table.params();
    params.require_variance()?;
    check_z(r)?;
    let _ = gbar;
    if r == 0.0 {
        return Ok(SeriesResult::zero(Route::TruncatedMoments));
    }
    let prec = mbar.first().map(|v| v.prec()).unwrap_or(table.precision());
    let an = params.alpha_n();
    let an_mp = params.alpha_n_mp(prec);
    let n = params.n as f64;
    let xr = r * n.sqrt();
    let x0 = r * (n * (n - 1.0)).sqrt();
    let xm = Float::with_val(prec, xr);
    let pre = Float::with_val(prec, (&xm).pow(Float::with_val(prec, an))) / mp::gamma(prec, an);
    let mut pw = Float::with_val(prec, 1);
    let mut acc = Float::with_val(prec, 0);
    let mut tmp = Float::new(prec);
    let mut used = None;
    let mut tail = 0.0;
    let mut log_max = f64::NEG_INFINITY;
    for (k, m) in mbar.iter().enumerate() {
        if k > 0 {
            pw *= &xm;
            pw /= k as u32;
        }
        tmp.assign(m * &pw);
        tmp /= Float::with_val(prec, &an_mp + k as u32);
        if k % 2 == 0 {
            acc += &tmp;
        } else {
            acc -= &tmp;
        }
        let t = Float::with_val(64, &tmp * &pre).to_f64().abs();
        log_max = log_max.max(t.ln());
        // M̄_{k+1}/M̄_k ≤ √(n−1), so term ratios are at most X₀/(k+1)
        let q = x0 / (k as f64 + 1.0);
        if q < 0.5 {
            let bound = t * q / (1.0 - q);
            if bound < cfg.tol * 1e-3 {
                used = Some(k + 1);
                tail = bound;
                break;
            }
        }
    }
    let Some(terms) = used else {
        return Err(Error::TableTooSmall {
            order: table.order() * 3 / 2,
            prec,
        });
    };
    acc *= &pre;
    let series = acc.to_f64();
    let (inner, outer) = boundary_terms(coeffs, r)?;
    let rounding = log_max.exp() * terms as f64 * 2f64.powi(-(prec as i32) + 8);
    let mut res = SeriesResult::new(series + inner + outer, tail + rounding + 8.0 * f64::EPSILON, terms, Route::TruncatedMoments)
        .note(format!("series {series:.15e}, boundary {inner:.15e}, tail integral {outer:.15e}"));
    if params.integer_alpha() == Some(1) {
        let closed = exponential_boundary(params.n, r)?;
        res = res.note(format!("closed-form boundary {closed:.15e}"));
    }
    if params.n > 2 && !mbar.is_empty() {
        let lam = recommended_lambda(mbar[0].to_f64(), coeffs.w_at_phi_n, params);
        let kmix = (mbar.len() - 1).min(400);
        if let Ok(w) = truncated_mixture_weights(mbar, params, lam, kmix) {
            let g = gamma_cdf_ladder(an, kmix, lam * r)?;
            let binom = mp::rising_binomials(&params.alpha_n_mp(prec), kmix, prec);
            let mut s = 0.0;
            for k in 0..=kmix {
                let wk = Float::with_val(prec, &w[k] * &binom[k]).to_f64();
                s += wk * g[k];
            }
            res = res.note(format!(
                "mixture form (lambda = {lam:.6}, {} weights): {:.15e}",
                kmix + 1,
                s + inner + outer
            ));
        }
    }
    res.certified = false;
    Ok(res)
}

/// Retry rounds for growing the moment table.
const ROUNDS: usize = 8;

fn thm41_auto_series(params: ModelParams, r: f64) -> bool {
    let an = params.alpha_n();
    let x = r * params.sqrt_n();
    let mut log_max = f64::NEG_INFINITY;
    let mut k = 0usize;
    while (k as f64) < x + 2.0 {
        let kf = k as f64;
        log_max = log_max.max((an + kf) * x.ln() - lgamma(an) - (an + kf).ln() - lgamma(kf + 1.0));
        k += 1;
    }
    log_max < SERIES_AMPLIFICATION.ln()
}

fn thm41_route(params: ModelParams, r: f64, cfg: &EvalConfig) -> Result<bool> {
    match cfg.representation {
        Representation::Power => Ok(true),
        Representation::Mixture => Ok(false),
        Representation::Auto => Ok(thm41_auto_series(params, r)),
        other => Err(Error::domain(format!(
            "representation {other:?} is not available for the sample variance"
        ))),
    }
}

fn thm41_one(table: &MomentTable, z: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    let params = table.params();
    let series = thm41_route(params, z.sqrt(), cfg)?;
    let res = if series {
        svar_cdf_series(table, z, cfg)?
    } else {
        svar_cdf_mixture(table, z, cfg)?
    };
    Ok(match (cfg.representation, series) {
        (Representation::Auto, true) => res.note("auto: double series passed the cancellation precheck"),
        (Representation::Auto, false) => res.note("auto: double series failed the cancellation precheck"),
        _ => res,
    })
}

/// Evaluates `one` at every point, growing a shared table on request.
fn with_shared_table<F>(
    params: ModelParams,
    points: &[f64],
    cfg: &EvalConfig,
    mut order: usize,
    mut prec: u32,
    one: F,
) -> Vec<Result<SeriesResult>>
where
    F: Fn(&MomentTable, f64) -> Result<SeriesResult> + Sync + Send,
{
    let mut out: Vec<Option<Result<SeriesResult>>> = vec![None; points.len()];
    for _ in 0..ROUNDS {
        let pending: Vec<usize> = (0..points.len())
            .filter(|&i| matches!(out[i], None | Some(Err(Error::TableTooSmall { .. }))))
            .collect();
        if pending.is_empty() {
            break;
        }
        let table = match MomentTable::build(params, order.min(MAX_ORDER), prec) {
            Ok(t) => t,
            Err(e) => {
                for i in pending {
                    out[i] = Some(Err(e.clone()));
                }
                break;
            }
        };
        let results = exec::map(cfg.execution, &pending, |&i| one(&table, points[i]));
        for (i, res) in pending.into_iter().zip(results) {
            if let Err(Error::TableTooSmall { order: o, prec: p }) = res {
                order = order.max(o);
                prec = prec.max(p);
            }
            out[i] = Some(res);
        }
    }
    out.into_iter()
        .map(|r| r.unwrap_or(Err(Error::Convergence { what: "table sizing", budget: ROUNDS })))
        .collect()
}

/// The double series or double mixture at each threshold z = (n−1)s².
pub fn svar_thm41_many(params: ModelParams, zs: &[f64], cfg: &EvalConfig) -> Vec<Result<SeriesResult>> {
    if let Err(e) = params.require_variance().and_then(|_| cfg.validate()) {
        return vec![Err(e); zs.len()];
    }
    let rmax = zs.iter().filter(|z| z.is_finite()).fold(0.0f64, |m, &z| m.max(z.max(0.0).sqrt()));
    let (order, prec) = thm41_requirements(params, rmax, cfg, initial_outer(params));
    with_shared_table(params, zs, cfg, order, prec, |table, z| {
        check_z(z)?;
        if z == 0.0 {
            let series = thm41_route(params, 0.0, cfg)?;
            return Ok(SeriesResult::zero(if series { Route::DoubleSeries } else { Route::DoubleMixture }));
        }
        thm41_one(table, z, cfg)
    })
}

/// The truncated-moment route at each threshold z = (n−1)s².
pub fn svar_thm42_many(params: ModelParams, zs: &[f64], cfg: &EvalConfig) -> Vec<Result<SeriesResult>> {
    let setup = params
        .require_variance()
        .and_then(|_| cfg.validate())
        .and_then(|_| match params.integer_alpha() {
            Some(_) => Ok(()),
            None => Err(Error::domain(format!(
                "the truncated-moment route needs integer alpha, got {}",
                params.alpha
            ))),
        })
        .and_then(|_| angle::solve_angle_coeffs(params));
    let coeffs = match setup {
        Ok(c) => c,
        Err(e) => return vec![Err(e); zs.len()],
    };
    let plans: Vec<Result<Option<Thm42Plan>>> = zs
        .iter()
        .map(|&z| {
            check_z(z)?;
            if z == 0.0 {
                Ok(None)
            } else {
                thm42_plan(params, z.sqrt(), cfg.tol).map(Some)
            }
        })
        .collect();
    let mut order = 0;
    let mut prec = 64;
    for p in plans.iter().flatten().flatten() {
        order = order.max(p.order);
        prec = prec.max(p.prec);
    }
    let mut out: Vec<Option<Result<SeriesResult>>> = plans
        .iter()
        .map(|p| match p {
            Err(e) => Some(Err(e.clone())),
            Ok(None) => Some(Ok(SeriesResult::zero(Route::TruncatedMoments))),
            Ok(Some(_)) => None,
        })
        .collect();
    for _ in 0..4 {
        let pending: Vec<usize> = (0..zs.len())
            .filter(|&i| matches!(out[i], None | Some(Err(Error::TableTooSmall { .. } | Error::Cancellation { .. }))))
            .collect();
        if pending.is_empty() {
            break;
        }
        let prepared = MomentTable::build(params, order, prec).and_then(|table| {
            let gbar = angle::truncated_cos_moments(&coeffs, &table, table.order())?;
            Ok((table, gbar))
        });
        let (table, gbar) = match prepared {
            Ok(v) => v,
            Err(Error::Cancellation { .. }) => {
                prec = prec * 3 / 2;
                continue;
            }
            Err(e) => {
                for i in pending {
                    out[i] = Some(Err(e.clone()));
                }
                break;
            }
        };
        let results = exec::map(cfg.execution, &pending, |&i| {
            let plan = plans[i].as_ref().ok().and_then(|p| p.as_ref()).expect("pending points have plans");
            let mbar = (0..plan.series_terms)
                .map(|k| angle::truncated_cot_moment(&gbar, params, k, plan.abs_tol[k]))
                .collect::<Result<Vec<_>>>()?;
            svar_cdf_integer_alpha(&coeffs, &table, &gbar, &mbar, zs[i].sqrt(), cfg)
        });
        for (i, res) in pending.into_iter().zip(results) {
            match &res {
                Err(Error::TableTooSmall { order: o, prec: p }) => {
                    order = order.max(*o);
                    prec = prec.max(*p);
                }
                Err(Error::Cancellation { .. }) => prec = prec * 3 / 2,
                _ => {}
            }
            out[i] = Some(res);
        }
    }
    out.into_iter()
        .map(|r| {
            r.unwrap_or(Err(Error::Budget {
                what: "truncated-moment route",
                detail: format!("table order {order} at {prec} bits was not enough"),
            }))
        })
        .collect()
}

/// Evaluates the integer-α route with tables sized by [`thm42_plan`].
pub fn svar_cdf_thm42(params: ModelParams, z: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    svar_thm42_many(params, &[z], cfg).pop().expect("one point")
}

/// The double series or double mixture with table sizing and retries.
pub fn svar_cdf_thm41(params: ModelParams, z: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    svar_thm41_many(params, &[z], cfg).pop().expect("one point")
}

/// Largest n for which auto prefers the truncated moments when α is an
/// integer: the outer series decays like j^{−(n+1)/2} at best.
const AUTO_TRUNCATED_MAX_N: usize = 5;

fn is_budget_failure(r: &Result<SeriesResult>) -> bool {
    matches!(r, Err(Error::Convergence { .. } | Error::Budget { .. }))
}

/// Pr{(n−1)S² ≤ z} at each z.
pub fn svar_cdf_many_z(params: ModelParams, zs: &[f64], cfg: &EvalConfig, method: Method) -> Vec<Result<SeriesResult>> {
    let integer = params.integer_alpha().is_some();
    match method {
        Method::Thm41 => svar_thm41_many(params, zs, cfg),
        Method::Thm42 => svar_thm42_many(params, zs, cfg),
        Method::Auto if integer && params.n <= AUTO_TRUNCATED_MAX_N => svar_thm42_many(params, zs, cfg)
            .into_iter()
            .map(|r| r.map(|r| r.note("auto: integer alpha with small n, truncated moments")))
            .collect(),
        Method::Auto => {
            let mut out = svar_thm41_many(params, zs, cfg);
            let failed: Vec<usize> = (0..zs.len()).filter(|&i| integer && is_budget_failure(&out[i])).collect();
            if !failed.is_empty() {
                let sub: Vec<f64> = failed.iter().map(|&i| zs[i]).collect();
                for (i, r) in failed.into_iter().zip(svar_thm42_many(params, &sub, cfg)) {
                    out[i] = r.map(|r| r.note("auto: outer series exceeded its budget, used the truncated moments"));
                }
            }
            out
        }
    }
}

/// Pr{S² ≤ s2} at each s2.
pub fn svar_cdf_many(params: ModelParams, s2: &[f64], cfg: &EvalConfig, method: Method) -> Result<Vec<SeriesResult>> {
    params.require_variance()?;
    for &s in s2 {
        check_z(s)?;
    }
    let scale = (params.n.max(2) - 1) as f64;
    let zs: Vec<f64> = s2.iter().map(|s| s * scale).collect();
    svar_cdf_many_z(params, &zs, cfg, method).into_iter().collect()
}

/// Pr{S² ≤ s2}.
pub fn svar_cdf(params: ModelParams, s2: f64, cfg: &EvalConfig, method: Method) -> Result<SeriesResult> {
    svar_cdf_many(params, &[s2], cfg, method).map(|mut v| v.pop().expect("one point"))
}

/// Default λ choice for the double mixture.
pub fn default_lambda() -> LambdaStrategy {
    LambdaStrategy::SqrtN
}

#[cfg(test)]
mod tests;
