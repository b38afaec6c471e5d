use rug::Float;

use super::{EvalConfig, Route, SeriesResult};
use crate::accum::Compensated;
use crate::coeffs::{differences, scaled_moments, ModelParams, MomentTable};
use crate::error::{Error, Result};
use crate::mp;
use crate::specfun::gamma_cdf_ladder;

/// Gamma-mixture weights w_k = δ_{k,λ} C(αn+k−1, k) and their deficits.
#[derive(Debug, Clone)]
pub struct MixtureWeights {
    pub params: ModelParams,
    pub lambda: f64,
    pub weights: Vec<f64>,
    /// deficit[K] = 1 − Σ_{k≤K} w_k, accumulated at working precision.
    pub deficit: Vec<f64>,
    /// All weights nonnegative.
    pub nonnegative: bool,
    /// Σ |w_k|, a scale for rounding in the double sum.
    pub abs_sum: f64,
}

/// Weights for scale λ up to order `kmax`, each accurate to well below `tol`.
pub fn mixture_weights(table: &MomentTable, lambda: f64, kmax: usize, tol: f64) -> Result<MixtureWeights> {
    if kmax > table.order() {
        return Err(Error::TableTooSmall {
            order: kmax,
            prec: table.precision(),
        });
    }
    let params = table.params();
    let prec = table.precision();
    let scaled = scaled_moments(table, lambda)?;
    let d = differences(&scaled, kmax)?;
    let binom = mp::rising_binomials(&params.alpha_n_mp(prec), kmax, prec);
    let worst = d
        .abs_error
        .iter()
        .zip(&binom)
        .map(|(e, b)| e * b.to_f64())
        .fold(0.0, f64::max);
    let limit = tol * 1e-3 / (kmax + 1) as f64;
    if worst > limit {
        return Err(Error::TableTooSmall {
            order: table.order(),
            prec: prec + (worst / limit).log2().ceil() as u32 + 16,
        });
    }
    let mut remaining = Float::with_val(prec, 1);
    let mut weights = Vec::with_capacity(kmax + 1);
    let mut deficit = Vec::with_capacity(kmax + 1);
    let mut nonnegative = true;
    let mut abs_sum = 0.0;
    for (dk, bk) in d.values.iter().zip(&binom) {
        let w = Float::with_val(prec, dk * bk);
        remaining -= &w;
        let wf = w.to_f64();
        nonnegative &= !w.is_sign_negative() || w.is_zero();
        abs_sum += wf.abs();
        weights.push(wf);
        deficit.push(remaining.to_f64());
    }
    Ok(MixtureWeights {
        params,
        lambda,
        weights,
        deficit,
        nonnegative,
        abs_sum,
    })
}

impl MixtureWeights {
    /// Certified weights: nonnegative at λ = √n.
    pub fn is_certified(&self) -> bool {
        self.nonnegative && (self.lambda - self.params.sqrt_n()).abs() <= 1e-12 * self.lambda
    }

    /// Σ_{k≤K} w_k G_{αn+k}(λr) with the smallest K meeting `cfg.tol`.
    pub fn cdf(&self, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::domain(format!("r must be a nonnegative finite number, got {r}")));
        }
        if r == 0.0 {
            return Ok(SeriesResult::zero(Route::Mixture));
        }
        let kmax = self.weights.len() - 1;
        let x = self.lambda * r;
        let g = gamma_cdf_ladder(self.params.alpha_n(), kmax + 1, x)?;
        let certified = self.is_certified();
        let mut acc = Compensated::new();
        for k in 0..=kmax {
            acc.add(self.weights[k] * g[k]);
            let tail = if certified {
                self.deficit[k].max(0.0) * g[k + 1]
            } else {
                // signed weights: deficit plus the size of the last few terms
                let lo = k.saturating_sub(2);
                let recent = (lo..=k).map(|i| (self.weights[i] * g[i]).abs()).fold(0.0, f64::max);
                self.deficit[k].abs() + recent
            };
            if tail < cfg.tol * 0.5 && k >= 2.min(kmax) {
                let rounding = acc.rounding_bound() + 4.0 * f64::EPSILON * self.abs_sum;
                let mut res = SeriesResult::new(acc.value(), tail + rounding, k + 1, Route::Mixture)
                    .note(format!("lambda = {}", self.lambda));
                res.certified = certified;
                if !certified {
                    res = res.note("signed weights: error estimate is heuristic");
                }
                return Ok(res);
            }
        }
        if kmax < cfg.max_k {
            return Err(Error::TableTooSmall {
                order: (2 * kmax + 20).min(cfg.max_k),
                prec: 0,
            });
        }
        Err(Error::Convergence {
            what: "gamma mixture",
            budget: cfg.max_k,
        })
    }
}

/// H(r) = Σ_k δ_{k,λ} C(αn+k−1, k) G_{αn+k}(λr) with λ from `cfg`.
pub fn cdf_sumsq_mixture(table: &MomentTable, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    let lambda = cfg.lambda_strategy.resolve(table.params())?;
    mixture_weights(table, lambda, table.order().min(cfg.max_k), cfg.tol)?.cdf(r, cfg)
}
