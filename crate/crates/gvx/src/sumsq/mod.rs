//! The cdf H(r) = Pr{Z ≤ r²} of the sum of squares in four representations,
//! and the cdf of U.

mod mixture;
mod ortho;
mod power;

pub use mixture::{cdf_sumsq_mixture, mixture_weights, MixtureWeights};
pub use ortho::{
    cdf_sumsq_fourier, cdf_sumsq_legendre, cdf_u, cdf_u_with, fourier_coeffs, legendre_coeffs,
    LegendreCoeffs,
};
pub use power::cdf_sumsq_power;

use serde::{Deserialize, Serialize};

use crate::coeffs::{lambda_star, ModelParams, MomentTable, MAX_ORDER};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::specfun::lgamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Power,
    Mixture,
    Legendre,
    Fourier,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaStrategy {
    /// λ = √n: nonnegative weights, certified error.
    SqrtN,
    /// λ = μ₀^{1/(αn)}, which makes the leading weight 1.
    Moment,
    Fixed(f64),
}

impl LambdaStrategy {
    pub fn resolve(self, params: ModelParams) -> Result<f64> {
        match self {
            LambdaStrategy::SqrtN => Ok(params.sqrt_n()),
            LambdaStrategy::Moment => Ok(lambda_star(params)),
            LambdaStrategy::Fixed(v) if v > 0.0 && v.is_finite() => Ok(v),
            LambdaStrategy::Fixed(v) => Err(Error::domain(format!("lambda must be positive, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Target absolute error.
    pub tol: f64,
    /// Budget for the inner (k) series.
    pub max_k: usize,
    /// Budget for the outer (j) series of the variance cdf.
    pub max_j: usize,
    pub representation: Representation,
    pub lambda_strategy: LambdaStrategy,
    /// Starting Legendre order; the Bessel form extends it while terms matter.
    pub legendre_kmax: usize,
    pub fourier_mmax: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_k: 2000,
            max_j: 5000,
            representation: Representation::Auto,
            lambda_strategy: LambdaStrategy::SqrtN,
            legendre_kmax: 40,
            fourier_mmax: 200,
            execution: Execution::Parallel,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::domain(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_k == 0 || self.max_j == 0 || self.legendre_kmax == 0 || self.fourier_mmax == 0 {
            return Err(Error::domain("term budgets must be positive"));
        }
        if self.max_k > MAX_ORDER {
            return Err(Error::domain(format!("max_k may not exceed {MAX_ORDER}")));
        }
        if let LambdaStrategy::Fixed(v) = self.lambda_strategy {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("lambda must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_representation(mut self, r: Representation) -> Self {
        self.representation = r;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Which formula produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Power,
    Mixture,
    Legendre,
    Fourier,
    DoubleSeries,
    DoubleMixture,
    TruncatedMoments,
    TanPolynomial,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Power => "power",
            Route::Mixture => "mixture",
            Route::Legendre => "legendre",
            Route::Fourier => "fourier",
            Route::DoubleSeries => "double-series",
            Route::DoubleMixture => "double-mixture",
            Route::TruncatedMoments => "truncated-moments",
            Route::TanPolynomial => "tan-polynomial",
        }
    }
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    /// Value clamped to [0, 1].
    pub value: f64,
    pub est_error: f64,
    pub terms_used: usize,
    pub representation: Route,
    /// True when `est_error` is a proven bound.
    pub certified: bool,
    pub diagnostics: Vec<String>,
}

impl SeriesResult {
    pub(crate) fn new(raw: f64, est_error: f64, terms_used: usize, representation: Route) -> Self {
        let value = raw.clamp(0.0, 1.0);
        // clamping can only move the value toward the truth
        let est_error = if est_error.is_finite() { est_error } else { f64::MAX };
        Self {
            value,
            est_error,
            terms_used,
            representation,
            certified: false,
            diagnostics: Vec::new(),
        }
    }

    pub(crate) fn zero(representation: Route) -> Self {
        Self::new(0.0, 0.0, 0, representation)
    }

    pub(crate) fn note(mut self, msg: impl Into<String>) -> Self {
        self.diagnostics.push(msg.into());
        self
    }
}

/// Table order and precision sufficient for evaluating `repr` at radius `r`.
pub fn requirements(params: ModelParams, r: f64, cfg: &EvalConfig, repr: Representation) -> (usize, u32) {
    let an = params.alpha_n();
    let tol = cfg.tol;
    let x = r * params.sqrt_n();
    match repr {
        Representation::Power | Representation::Auto => {
            let (order, log2_max) = power_bound(an, x, tol);
            let prec = (log2_max - tol.log2()).max(0.0) as u32 + 64;
            let (mo, mp) = requirements(params, r, cfg, Representation::Mixture);
            if repr == Representation::Auto {
                (order.max(mo), prec.max(mp))
            } else {
                (order, prec)
            }
        }
        Representation::Mixture => {
            let order = mixture_order(params, cfg);
            let lam = cfg.lambda_strategy.resolve(params).unwrap_or(params.sqrt_n());
            let extra = ((params.sqrt_n() / lam).log2() * (an + order as f64)).max(0.0);
            (order, mixture_precision(an, order, tol) + extra as u32)
        }
        Representation::Legendre => {
            let order = legendre_order_estimate(an, x, r, tol).max(cfg.legendre_kmax);
            (order, legendre_precision(an, r, tol, order))
        }
        Representation::Fourier => {
            let order = cfg.legendre_kmax.max(ortho::fourier_legendre_order(cfg.fourier_mmax));
            (order, legendre_precision(an, 1.0, tol, order))
        }
    }
}

/// Mixture truncation order from the negative-binomial tail of the weights at λ = √n.
pub fn mixture_order(params: ModelParams, cfg: &EvalConfig) -> usize {
    let order = negbin_quantile(params.alpha_n(), 1.0 / params.sqrt_n(), cfg.tol / 20.0);
    match cfg.lambda_strategy.resolve(params) {
        Ok(lam) if (lam - params.sqrt_n()).abs() > 1e-12 * lam => order * 3 / 2 + 20,
        _ => order,
    }
}

pub fn mixture_precision(an: f64, order: usize, tol: f64) -> u32 {
    2 * order as u32 + an.ceil() as u32 + (-tol.log2()).max(0.0) as u32 + 64
}

pub(crate) fn legendre_precision(an: f64, r: f64, tol: f64, order: usize) -> u32 {
    (2.6 * order as f64 + an * r.max(1.0).log2() + (-tol.log2()).max(0.0)) as u32 + 96
}

/// Order K beyond which the power-series terms are below tol·10⁻³, and the
/// log₂ of the largest term bound, from μ_k ≤ n^{(αn+k)/2}.
pub(crate) fn power_bound(an: f64, x: f64, tol: f64) -> (usize, f64) {
    if x == 0.0 {
        return (0, 0.0);
    }
    let target = (tol * 1e-3).ln();
    let mut max_log = f64::NEG_INFINITY;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let l = (an + kf) * x.ln() - lgamma(an) - (an + kf).ln() - lgamma(kf + 1.0);
        max_log = max_log.max(l);
        if kf > x && l < target {
            return (k + 2, max_log / std::f64::consts::LN_2);
        }
        k += 1;
    }
}

/// Smallest K whose negative-binomial(αn, p) upper tail is below `eps`.
pub(crate) fn negbin_quantile(an: f64, p: f64, eps: f64) -> usize {
    let mut log_pmf = an * p.ln();
    let mut cum = 0.0;
    let mut k = 0usize;
    loop {
        cum += log_pmf.exp();
        let kf = k as f64;
        let ratio = (an + kf) / (kf + 1.0) * (1.0 - p);
        let tail_bound = if ratio < 1.0 {
            (log_pmf.exp() * ratio / (1.0 - ratio)).min(1.0 - cum)
        } else {
            1.0
        };
        if (tail_bound < eps || 1.0 - cum < eps * 0.5) && ratio < 1.0 {
            return k + 1;
        }
        log_pmf += ratio.ln();
        k += 1;
        if k > MAX_ORDER {
            return MAX_ORDER;
        }
    }
}

fn legendre_order_estimate(an: f64, x: f64, r: f64, tol: f64) -> usize {
    // terms behave like r^{αn} (2k+1) (x/2)^k / (2k+1)!!
    let xb = x / 2.0;
    let target = (tol * 1e-4).ln() - an * r.max(1.0).ln() - 10.0;
    let mut k = 1usize;
    let mut l = 0.0;
    loop {
        let kf = k as f64;
        l += xb.max(1e-300).ln() - (2.0 * kf + 1.0).ln();
        if kf > xb && l + (2.0 * kf + 1.0).ln() < target {
            return k + 10;
        }
        k += 1;
        if k > MAX_ORDER {
            return MAX_ORDER;
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("r must be a nonnegative finite number, got {r}")));
    }
    Ok(())
}

/// Evaluates H at every radius, building one table for all points.
pub fn cdf_sumsq_many(params: ModelParams, radii: &[f64], cfg: &EvalConfig) -> Result<Vec<SeriesResult>> {
    cfg.validate()?;
    for &r in radii {
        check_radius(r)?;
    }
    let mut order = 0;
    let mut prec = 64;
    for &r in radii {
        let (o, p) = requirements(params, r, cfg, cfg.representation);
        order = order.max(o);
        prec = prec.max(p);
    }
    let mut mix_order = mixture_order(params, cfg);
    let mut last = None;
    for _ in 0..6 {
        if order > cfg.max_k.max(cfg.legendre_kmax) {
            return Err(Error::Budget {
                what: "sum-of-squares series",
                detail: format!("needs order {order}, budget {}", cfg.max_k),
            });
        }
        let table = MomentTable::build(params, order, prec)?;
        let ctx = Context::new(&table, cfg, mix_order.min(order))?;
        let results = exec::map(cfg.execution, radii, |&r| ctx.eval(r));
        match results.iter().find_map(|res| match res {
            Err(Error::TableTooSmall { order, prec }) => Some((*order, *prec)),
            _ => None,
        }) {
            Some((o, p)) => {
                if o > mix_order && matches!(cfg.representation, Representation::Mixture | Representation::Auto) {
                    mix_order = o;
                    prec = prec.max(mixture_precision(params.alpha_n(), o, cfg.tol));
                }
                order = order.max(o);
                prec = prec.max(p);
                last = Some(results);
            }
            None => return results.into_iter().collect(),
        }
    }
    last.expect("at least one attempt").into_iter().collect()
}

/// H(r) with the representation chosen by `cfg`.
pub fn cdf_sumsq(params: ModelParams, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    cdf_sumsq_many(params, &[r], cfg).map(|mut v| v.remove(0))
}

/// Legendre order used for U. At 40 the lower tail is off by ~3·10⁻⁵; at 400
/// the values match the angle polynomial to ~10⁻⁹ for integer α.
pub const U_ORDER: usize = 400;

/// Legendre coefficients for U at order `U_ORDER` or the configured order,
/// whichever is larger.
pub fn u_coeffs(params: ModelParams, cfg: &EvalConfig) -> Result<LegendreCoeffs> {
    cfg.validate()?;
    let cfg = cfg.with_representation(Representation::Legendre);
    let mut order = cfg.legendre_kmax.max(U_ORDER).min(crate::specfun::LEGENDRE_MAX_ORDER);
    let mut prec = legendre_precision(params.alpha_n(), 1.0, cfg.tol, order);
    for _ in 0..6 {
        let table = MomentTable::build(params, order, prec)?;
        match legendre_coeffs(&table, &EvalConfig { legendre_kmax: order, ..cfg }) {
            Err(Error::TableTooSmall { order: o, prec: p }) => {
                order = order.max(o);
                prec = prec.max(p);
            }
            other => return other,
        }
    }
    Err(Error::Convergence {
        what: "Legendre coefficients for U",
        budget: order,
    })
}

/// Pr{U ≤ u} at every point from one set of coefficients.
pub fn cdf_u_many(params: ModelParams, us: &[f64], cfg: &EvalConfig) -> Result<Vec<SeriesResult>> {
    if params.n == 1 {
        return us.iter().map(|&u| cdf_u_trivial(u)).collect();
    }
    let coeffs = u_coeffs(params, cfg)?;
    exec::map(cfg.execution, us, |&u| cdf_u_with(&coeffs, u, cfg)).into_iter().collect()
}

fn cdf_u_trivial(u: f64) -> Result<SeriesResult> {
    if !(u >= 1.0 - 1e-15 && u <= 1.0) {
        return Err(Error::domain(format!("u must equal 1 when n = 1, got {u}")));
    }
    let mut res = SeriesResult::new(1.0, 0.0, 0, Route::Legendre);
    res.certified = true;
    Ok(res)
}

/// Shared per-table state for repeated evaluations.
struct Context<'a> {
    table: &'a MomentTable,
    cfg: &'a EvalConfig,
    weights: Option<MixtureWeights>,
    legendre: Option<LegendreCoeffs>,
    fourier: Option<Vec<f64>>,
}

impl<'a> Context<'a> {
    fn new(table: &'a MomentTable, cfg: &'a EvalConfig, mix_order: usize) -> Result<Self> {
        let params = table.params();
        let weights = match cfg.representation {
            Representation::Mixture | Representation::Auto => Some(mixture_weights(
                table,
                cfg.lambda_strategy.resolve(params)?,
                mix_order,
                cfg.tol,
            )?),
            _ => None,
        };
        let legendre = match cfg.representation {
            Representation::Legendre | Representation::Fourier => Some(legendre_coeffs(table, cfg)?),
            _ => None,
        };
        let fourier = match (&legendre, cfg.representation) {
            (Some(l), Representation::Fourier) => Some(fourier_coeffs(l, cfg)?),
            _ => None,
        };
        Ok(Self {
            table,
            cfg,
            weights,
            legendre,
            fourier,
        })
    }

    fn eval(&self, r: f64) -> Result<SeriesResult> {
        match self.cfg.representation {
            Representation::Power => cdf_sumsq_power(self.table, r, self.cfg),
            Representation::Mixture => self.weights.as_ref().expect("weights").cdf(r, self.cfg),
            Representation::Legendre => {
                ortho::legendre_eval(self.legendre.as_ref().expect("coefficients"), self.table, r, self.cfg)
            }
            Representation::Fourier => ortho::fourier_eval(
                self.fourier.as_ref().expect("coefficients"),
                self.table.params(),
                r,
                self.cfg,
            ),
            Representation::Auto => {
                let pre = power::precheck(self.table, r, self.cfg);
                match pre {
                    Some(res) => Ok(res.note("auto: power series passed the cancellation precheck")),
                    None => self
                        .weights
                        .as_ref()
                        .expect("weights")
                        .cdf(r, self.cfg)
                        .map(|res| res.note("auto: power series failed the cancellation precheck")),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests;
