use rug::{Assign, Float};

use super::{EvalConfig, Route, SeriesResult};
use crate::accum::Compensated;
use crate::coeffs::MomentTable;
use crate::error::{Error, Result};
use crate::specfun::lgamma;

/// Largest admissible ratio of the biggest term to the result in double.
const DOUBLE_AMPLIFICATION: f64 = 1e6;

struct Plan {
    /// Number of terms needed.
    terms: usize,
    /// Certified bound on the omitted tail.
    tail: f64,
    /// ln of the largest term magnitude.
    log_max: f64,
}

fn log_term(table: &MomentTable, lr: f64, k: usize) -> f64 {
    let an = table.params().alpha_n();
    let kf = k as f64;
    (an + kf) * lr - lgamma(an) + table.log_mu()[k] - (an + kf).ln() - lgamma(kf + 1.0)
}

/// Chooses the truncation point from |t_{k+1}/t_k| ≤ r√n/(k+1).
fn plan(table: &MomentTable, r: f64, cfg: &EvalConfig) -> Result<Plan> {
    let x = r * table.params().sqrt_n();
    let lr = r.ln();
    let budget = cfg.max_k.min(table.order());
    let mut log_max = f64::NEG_INFINITY;
    for k in 0..=budget {
        let lt = log_term(table, lr, k);
        log_max = log_max.max(lt);
        let q = x / (k as f64 + 1.0);
        if q < 0.5 && k + 1 <= table.order() {
            let next = log_term(table, lr, k + 1).exp();
            let tail = next / (1.0 - q);
            if tail < cfg.tol * 1e-2 {
                return Ok(Plan {
                    terms: k + 1,
                    tail,
                    log_max,
                });
            }
        }
    }
    if table.order() < cfg.max_k {
        let (order, _) = super::power_bound(table.params().alpha_n(), x, cfg.tol);
        return Err(Error::TableTooSmall {
            order: order.max(table.order() + 1).min(cfg.max_k),
            prec: table.precision(),
        });
    }
    Err(Error::Convergence {
        what: "power series",
        budget: cfg.max_k,
    })
}

fn double_pass(table: &MomentTable, r: f64, plan: &Plan) -> (f64, Compensated) {
    let lr = r.ln();
    let mut acc = Compensated::new();
    for k in 0..plan.terms {
        let t = log_term(table, lr, k).exp();
        acc.add(if k % 2 == 0 { t } else { -t });
    }
    (acc.value(), acc)
}

/// Double-precision evaluation when its cancellation is acceptable.
pub(super) fn precheck(table: &MomentTable, r: f64, cfg: &EvalConfig) -> Option<SeriesResult> {
    if r == 0.0 {
        return Some(SeriesResult::zero(Route::Power));
    }
    let plan = plan(table, r, cfg).ok()?;
    let (v, acc) = double_pass(table, r, &plan);
    let max = plan.log_max.exp();
    if !(v > 0.0) || max / v > DOUBLE_AMPLIFICATION {
        return None;
    }
    let err = plan.tail + acc.rounding_bound() + 8.0 * f64::EPSILON * acc.abs_sum();
    if err > cfg.tol {
        return None;
    }
    let mut res = SeriesResult::new(v, err, plan.terms, Route::Power);
    res.certified = true;
    Some(res)
}

/// H(r) = r^{αn}/Γ(αn) Σ_k μ_k/(αn+k) (−r)^k/k!.
///
/// Runs in double when the largest term is within 10⁶ of the result and
/// otherwise at a working precision sized to the cancellation.
pub fn cdf_sumsq_power(table: &MomentTable, r: f64, cfg: &EvalConfig) -> Result<SeriesResult> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("r must be a nonnegative finite number, got {r}")));
    }
    if let Some(res) = precheck(table, r, cfg) {
        return Ok(res);
    }
    let plan = plan(table, r, cfg)?;
    let log2_max = plan.log_max / std::f64::consts::LN_2;
    let need = (log2_max - cfg.tol.log2()).max(0.0) as u32 + 64;
    if table.precision() < need {
        return Err(Error::TableTooSmall {
            order: table.order(),
            prec: need,
        });
    }
    let prec = need;
    let an = table.params().alpha_n();
    let an_mp = table.params().alpha_n_mp(prec);
    let rr = Float::with_val(prec, r);
    let mut pw = Float::with_val(prec, 1);
    let mut acc = Float::with_val(prec, 0);
    let mut tmp = Float::new(prec);
    for k in 0..plan.terms {
        if k > 0 {
            pw *= &rr;
            pw /= k as u32;
        }
        tmp.assign(&table.mu()[k] * &pw);
        tmp /= Float::with_val(prec, &an_mp + k as u32);
        if k % 2 == 0 {
            acc += &tmp;
        } else {
            acc -= &tmp;
        }
    }
    let lead = Float::with_val(prec, rr.ln_ref()) * an;
    let lead = Float::with_val(prec, lead.exp_ref()) / Float::with_val(prec, an).gamma();
    acc *= &lead;
    let v = acc.to_f64();
    // rounding: one ulp per term relative to the largest
    let rounding = plan.log_max.exp() * plan.terms as f64 * 2f64.powi(-(prec as i32) + 2);
    let mut res = SeriesResult::new(v, plan.tail + rounding + f64::EPSILON * v.abs(), plan.terms, Route::Power)
        .note(format!("power series evaluated at {prec} bits"));
    res.certified = true;
    Ok(res)
}
