//! Moment machinery: the β coefficients of (ψ_α(t))ⁿ, the moments μ and γ of
//! cos Φ, λ-scaled moments and their difference weights, and E(U^{2k}).

use rug::ops::Pow;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mp;
use crate::specfun::lgamma;

/// Largest moment order a table may be built to.
pub const MAX_ORDER: usize = 10_000;

/// Shape α of the gamma parent and sample size n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub n: usize,
}

impl ModelParams {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha must be a positive finite number, got {alpha}")));
        }
        if n < 1 {
            return Err(Error::domain("n must be at least 1"));
        }
        Ok(Self { alpha, n })
    }

    pub fn alpha_n(&self) -> f64 {
        self.alpha * self.n as f64
    }

    /// αn rounded once at `prec` bits.
    pub fn alpha_n_mp(&self, prec: u32) -> Float {
        Float::with_val(prec, self.alpha) * self.n as u32
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// α as an integer, when it is one.
    pub fn integer_alpha(&self) -> Option<u32> {
        let r = self.alpha.round();
        if (self.alpha - r).abs() < 1e-12 && r >= 1.0 && r < 1e6 {
            Some(r as u32)
        } else {
            None
        }
    }

    /// Statistics built on S² need at least two observations.
    pub fn require_variance(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain("the sample variance needs n >= 2"));
        }
        Ok(())
    }
}

/// Moments of cos Φ up to a fixed order, held at a fixed working precision
/// together with their (log-magnitude, sign) double images.
#[derive(Debug, Clone)]
pub struct MomentTable {
    params: ModelParams,
    order: usize,
    prec: u32,
    beta_abs: Vec<Float>,
    mu: Vec<Float>,
    gamma: Vec<Float>,
    log_abs_beta: Vec<f64>,
    log_mu: Vec<f64>,
    log_gamma: Vec<f64>,
}

impl MomentTable {
    pub fn params(&self) -> ModelParams {
        self.params
    }

    /// Highest moment index K held.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Working precision in bits.
    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn mu(&self) -> &[Float] {
        &self.mu
    }

    pub fn gamma(&self) -> &[Float] {
        &self.gamma
    }

    /// |β_k|; the sign is (−1)^k.
    pub fn beta_abs(&self) -> &[Float] {
        &self.beta_abs
    }

    pub fn beta_sign(&self, k: usize) -> i8 {
        if k % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn log_mu(&self) -> &[f64] {
        &self.log_mu
    }

    pub fn log_gamma(&self) -> &[f64] {
        &self.log_gamma
    }

    pub fn log_abs_beta(&self) -> &[f64] {
        &self.log_abs_beta
    }

    pub fn satisfies(&self, order: usize, prec: u32) -> bool {
        self.order >= order && self.prec >= prec
    }

    /// Builds a table of order `order` at `prec` bits.
    pub fn build(params: ModelParams, order: usize, prec: u32) -> Result<Self> {
        let beta_abs = build_beta(params, order, prec)?;
        let an = params.alpha_n_mp(prec);
        let n = params.n as f64;
        let two_gamma_an = Float::with_val(prec, an.gamma_ref()) * 2u32;
        let half_an = Float::with_val(prec, &an / 2u32);
        let mut g_even = Float::with_val(prec, half_an.gamma_ref());
        let mut g_odd = Float::with_val(prec, &half_an + 0.5).gamma();
        let mut fact = Float::with_val(prec, 1);
        let sqrt_n = Float::with_val(prec, n).sqrt();
        let mut npow = Float::with_val(prec, n).pow(&half_an);
        let mut mu = Vec::with_capacity(order + 1);
        let mut gamma = Vec::with_capacity(order + 1);
        for (k, b) in beta_abs.iter().enumerate() {
            if k > 0 {
                fact *= k as u32;
                npow *= &sqrt_n;
            }
            let g_half = if k % 2 == 0 { &g_even } else { &g_odd };
            let m = Float::with_val(prec, &two_gamma_an * &fact) * b / g_half;
            gamma.push(Float::with_val(prec, &m / &npow));
            mu.push(m);
            // Γ((αn+k)/2) → Γ((αn+k+2)/2)
            let step = Float::with_val(prec, &an + k as u32) / 2u32;
            if k % 2 == 0 {
                g_even *= &step;
            } else {
                g_odd *= &step;
            }
        }
        let log_abs_beta = beta_abs.iter().map(mp::ln_f64).collect();
        let log_mu = mu.iter().map(mp::ln_f64).collect();
        let log_gamma = gamma.iter().map(mp::ln_f64).collect();
        Ok(Self {
            params,
            order,
            prec,
            beta_abs,
            mu,
            gamma,
            log_abs_beta,
            log_mu,
            log_gamma,
        })
    }
}

/// Precision adequate for weights and projections up to `order`.
pub fn default_precision(params: ModelParams, order: usize) -> u32 {
    128 + 2 * order as u32 + params.alpha_n().ceil() as u32
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Budget {
            what: "moment table",
            detail: format!("order {order} exceeds {MAX_ORDER}"),
        });
    }
    Ok(())
}

/// |β_{α,n,k}| for k = 0..=order: the n-fold convolution of
/// Γ((α+k)/2)/k! scaled by (2Γ(α))^{−n}.
pub fn build_beta(params: ModelParams, order: usize, prec: u32) -> Result<Vec<Float>> {
    check_order(order)?;
    let a = Float::with_val(prec + 16, params.alpha);
    let len = order + 1;
    let work = prec + 16;
    let mut c = Vec::with_capacity(len);
    let mut even = Float::with_val(work, &a / 2u32).gamma();
    let mut odd = (Float::with_val(work, &a + 1u32) / 2u32).gamma();
    for k in 0..len {
        if k % 2 == 0 {
            c.push(even.clone());
            even *= Float::with_val(work, &a + k as u32) / 2u32;
            even /= ((k + 1) * (k + 2)) as u32;
        } else {
            c.push(odd.clone());
            odd *= Float::with_val(work, &a + k as u32) / 2u32;
            odd /= ((k + 1) * (k + 2)) as u32;
        }
    }
    let s = mp::convolution_power(&c, params.n, len, work);
    let scale = (Float::with_val(work, a.gamma_ref()) * 2u32).pow(params.n as u32);
    Ok(s.into_iter()
        .map(|v| Float::with_val(prec, v / &scale))
        .collect())
}

/// Moment table of order `order` at the default precision.
pub fn build_moments(params: ModelParams, order: usize) -> Result<MomentTable> {
    MomentTable::build(params, order, default_precision(params, order))
}

/// μ_{k,λ} = λ^{−(αn+k)} μ_k for k = 0..=order.
pub fn scaled_moments(table: &MomentTable, lambda: f64) -> Result<Vec<Float>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let prec = table.precision();
    let lam = Float::with_val(prec, lambda);
    let inv = Float::with_val(prec, lam.recip_ref());
    let mut p = Float::with_val(prec, lam.pow(Float::with_val(prec, -table.params().alpha_n())));
    let mut out = Vec::with_capacity(table.order() + 1);
    for m in table.mu() {
        out.push(Float::with_val(prec, m * &p));
        p *= &inv;
    }
    Ok(out)
}

/// Alternating difference weights with their error estimates.
#[derive(Debug, Clone)]
pub struct DiffWeights {
    pub values: Vec<Float>,
    pub abs_error: Vec<f64>,
    pub rel_error: Vec<f64>,
}

/// Threshold on the estimated relative error of a difference weight.
pub const DIFF_ALARM: f64 = 1e-6;

/// δ_k = Σ_j (−1)^j C(k,j) μ_{j,λ} for k = 0..=kmax by iterated adjacent
/// differencing at the working precision of the input, without the alarm.
pub fn differences(scaled: &[Float], kmax: usize) -> Result<DiffWeights> {
    if scaled.len() <= kmax {
        return Err(Error::TableTooSmall {
            order: kmax,
            prec: scaled.first().map(|v| v.prec()).unwrap_or(0),
        });
    }
    let prec = scaled[0].prec();
    let (values, scale) = mp::iterated_differences(scaled, kmax, prec);
    let unit = 2f64.powi(-(prec as i32));
    let mut abs_error = Vec::with_capacity(values.len());
    let mut rel_error = Vec::with_capacity(values.len());
    for (k, v) in values.iter().enumerate() {
        // each level at most doubles the absolute rounding error
        let e = scale[k] * unit * 2f64.powi(k as i32 + 1);
        let mag = v.to_f64().abs();
        abs_error.push(e);
        rel_error.push(if mag > 0.0 { e / mag } else if e > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(DiffWeights {
        values,
        abs_error,
        rel_error,
    })
}

/// [`differences`] with a cancellation alarm when any relative error
/// estimate exceeds [`DIFF_ALARM`].
pub fn diff_weights(scaled: &[Float], kmax: usize) -> Result<DiffWeights> {
    let d = differences(scaled, kmax)?;
    if let Some((k, e)) = d
        .rel_error
        .iter()
        .enumerate()
        .find(|(_, e)| **e > DIFF_ALARM)
    {
        return Err(Error::Cancellation {
            what: "difference weights",
            detail: format!("relative error estimate {e:.2e} at k = {k} with {} bits", scaled[0].prec()),
            suggest: "a higher working precision",
        });
    }
    Ok(d)
}

/// λ* = (E U^{−αn})^{1/(αn)} = μ_{α,n,0}^{1/(αn)} in closed form.
pub fn lambda_star(params: ModelParams) -> f64 {
    let a = params.alpha;
    let n = params.n as f64;
    let an = params.alpha_n();
    let ln2 = std::f64::consts::LN_2;
    let log_mu0 = ln2 + lgamma(an) + n * lgamma(a / 2.0) - n * (ln2 + lgamma(a)) - lgamma(an / 2.0);
    (log_mu0 / an).exp()
}

/// E(U^{2k}) for k = 0..=kmax by a log-space n-fold convolution of
/// Γ(α+2m)/(Γ(α) m!).
pub fn u2_moments(params: ModelParams, kmax: usize) -> Result<Vec<f64>> {
    if kmax > 200 {
        return Err(Error::Budget {
            what: "U² moments",
            detail: format!("order {kmax} exceeds 200"),
        });
    }
    let a = params.alpha;
    let len = kmax + 1;
    let d: Vec<f64> = (0..len)
        .map(|m| lgamma(a + 2.0 * m as f64) - lgamma(a) - lgamma(m as f64 + 1.0))
        .collect();
    let s = log_convolution_power(&d, params.n, len);
    let an = params.alpha_n();
    Ok((0..len)
        .map(|k| {
            let kf = k as f64;
            (lgamma(an) + lgamma(kf + 1.0) - lgamma(an + 2.0 * kf) + s[k]).exp()
        })
        .collect())
}

fn log_convolve(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let terms: Vec<f64> = (0..=k).map(|i| a[i] + b[k - i]).collect();
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
        })
        .collect()
}

/// n-fold convolution power of a positive sequence given by its logarithms.
pub fn log_convolution_power(logs: &[f64], n: usize, len: usize) -> Vec<f64> {
    let mut base = logs[..len].to_vec();
    let mut result: Option<Vec<f64>> = None;
    let mut e = n;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => log_convolve(&r, &base, len),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = log_convolve(&base, &base, len);
    }
    result.expect("n >= 1")
}
