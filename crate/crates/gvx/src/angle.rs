//! Polynomial cdf of tan Φ on [0, (n−1)^{−1/2}] for integer α, and the
//! truncated moments of cos Φ and cot Φ beyond that cone.

use nalgebra::{DMatrix, DVector};
use rug::ops::Pow;
use rug::{Assign, Float};
use serde::Serialize;

use crate::coeffs::{ModelParams, MomentTable};
use crate::error::{Error, Result};
use crate::mp;
use crate::specfun::lgamma;

/// Largest supported system size N + 1.
pub const MAX_SYSTEM: usize = 60;
/// Condition estimate of the rescaled system beyond which the solve is refused.
pub const MAX_CONDITION: f64 = 1e12;
const GRID: usize = 1000;

/// Coefficients a_{2j} of the tan Φ density on the inner cone.
#[derive(Debug, Clone, Serialize)]
pub struct AngleCoefficients {
    pub params: ModelParams,
    /// N = ⌊(α−1)n/2⌋.
    pub big_n: usize,
    pub a: Vec<f64>,
    /// Coefficients from the rescaled double-precision solve with refinement.
    pub a_double: Vec<f64>,
    /// 1-norm condition estimate of the rescaled system.
    pub cond_estimate: f64,
    /// Relative residual of the multiprecision solution.
    pub residual: f64,
    /// W((n−1)^{−1/2}).
    pub w_at_phi_n: f64,
    #[serde(skip)]
    a_mp: Vec<Float>,
    #[serde(skip)]
    prec: u32,
}

/// ln of Γ(αn)/(Γ(α)ⁿ n^{αn/2}).
fn log_norm(params: ModelParams) -> f64 {
    let an = params.alpha_n();
    lgamma(an) - params.n as f64 * lgamma(params.alpha) - an / 2.0 * (params.n as f64).ln()
}

fn norm_mp(params: ModelParams, prec: u32) -> Float {
    let an = params.alpha_n();
    let n = Float::with_val(prec, params.n);
    mp::gamma(prec, an) / mp::gamma(prec, params.alpha).pow(params.n as u32) / n.pow(Float::with_val(prec, an / 2.0))
}

/// Upper end (n−1)^{−1/2} of the polynomial range.
pub fn phi_n_tan(params: ModelParams) -> f64 {
    1.0 / ((params.n - 1) as f64).sqrt()
}

struct System {
    matrix: Vec<Vec<Float>>,
    rhs: Vec<Float>,
    row_scale: Vec<Float>,
    col_scale: Vec<Float>,
}

fn build_system(params: ModelParams, alpha: u32, prec: u32) -> System {
    let n = params.n;
    let big_n = ((alpha as usize - 1) * n) / 2;
    let len = big_n + 1;
    let odd = alpha % 2 == 1;
    let beta = if odd { (alpha - 1) / 2 } else { alpha / 2 } as f64;
    let half = 0.5;
    // e_m = Γ(1/2+β+m)/(2m)! or Γ(1/2+β+m)/(2m+1)!
    let mut e = Vec::with_capacity(len);
    let mut g = mp::gamma(prec, half + beta);
    let mut f = Float::with_val(prec, 1);
    for m in 0..len {
        if m > 0 {
            g *= half + beta + (m - 1) as f64;
            if odd {
                f *= ((2 * m - 1) * (2 * m)) as u32;
            } else {
                f *= ((2 * m) * (2 * m + 1)) as u32;
            }
        }
        e.push(Float::with_val(prec, &g / &f));
    }
    let s = mp::convolution_power(&e, n, len, prec + 16);
    let nf = Float::with_val(prec, n);
    let mut rhs = Vec::with_capacity(len);
    for (m, sm) in s.iter().enumerate() {
        let v = if odd {
            let fact = Float::with_val(prec, rug::Integer::from(rug::Integer::factorial((2 * m) as u32)));
            Float::with_val(prec, 2 * fact * sm) / nf.clone().pow(m as u32)
        } else {
            let fact = Float::with_val(prec, rug::Integer::from(rug::Integer::factorial((2 * m + n) as u32)));
            let p = Float::with_val(prec, nf.clone().pow(Float::with_val(prec, m as f64 + n as f64 / 2.0)));
            Float::with_val(prec, 2 * fact * sm) / p
        };
        rhs.push(v);
    }
    let bn = beta * n as f64;
    let col_scale: Vec<Float> = (0..len).map(|j| mp::gamma(prec, (n as f64 - 1.0) / 2.0 + j as f64)).collect();
    let row_scale: Vec<Float> = (0..len).map(|m| mp::gamma(prec, 0.5 + bn + m as f64)).collect();
    let matrix = (0..len)
        .map(|m| {
            (0..len)
                .map(|j| mp::gamma(prec, 0.5 + bn + m as f64 - j as f64) * &col_scale[j])
                .collect()
        })
        .collect();
    System {
        matrix,
        rhs,
        row_scale,
        col_scale,
    }
}

/// Gaussian elimination with partial pivoting at the precision of the input.
fn solve_mp(a: &[Vec<Float>], b: &[Float]) -> Result<Vec<Float>> {
    let len = b.len();
    let prec = b[0].prec();
    let mut m: Vec<Vec<Float>> = a.to_vec();
    let mut rhs: Vec<Float> = b.to_vec();
    let mut tmp = Float::new(prec);
    for col in 0..len {
        let piv = (col..len)
            .max_by(|&i, &j| m[i][col].clone().abs().partial_cmp(&m[j][col].clone().abs()).unwrap())
            .unwrap();
        if m[piv][col].is_zero() {
            return Err(Error::Conditioning { cond: f64::INFINITY });
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..len {
            let factor = Float::with_val(prec, &m[row][col] / &m[col][col]);
            for k in col..len {
                tmp.assign(&factor * &m[col][k]);
                m[row][k] -= &tmp;
            }
            tmp.assign(&factor * &rhs[col]);
            rhs[row] -= &tmp;
        }
    }
    let mut x = vec![Float::new(prec); len];
    for row in (0..len).rev() {
        let mut acc = rhs[row].clone();
        for k in row + 1..len {
            tmp.assign(&m[row][k] * &x[k]);
            acc -= &tmp;
        }
        x[row] = acc / &m[row][row];
    }
    Ok(x)
}

/// Rescaled double solve with iterative refinement; returns (solution of the
/// rescaled system, 1-norm condition estimate).
fn solve_scaled_double(sys: &System) -> Result<(Vec<f64>, f64)> {
    let len = sys.rhs.len();
    let prec = sys.rhs[0].prec();
    // S_{mj} = A_{mj}/(r_m c_j), y_j = c_j a_j, S y = rhs/r
    let s_mp: Vec<Vec<Float>> = (0..len)
        .map(|m| {
            (0..len)
                .map(|j| Float::with_val(prec, &sys.matrix[m][j] / &sys.row_scale[m]) / &sys.col_scale[j])
                .collect()
        })
        .collect();
    let b_mp: Vec<Float> = (0..len).map(|m| Float::with_val(prec, &sys.rhs[m] / &sys.row_scale[m])).collect();
    let s = DMatrix::from_fn(len, len, |i, j| s_mp[i][j].to_f64());
    let b = DVector::from_fn(len, |i, _| b_mp[i].to_f64());
    let lu = s.clone().lu();
    let mut y = lu.solve(&b).ok_or(Error::Conditioning { cond: f64::INFINITY })?;
    for _ in 0..5 {
        // residual at extended precision
        let r = DVector::from_fn(len, |i, _| {
            let mut acc = b_mp[i].clone();
            for j in 0..len {
                acc -= Float::with_val(prec, &s_mp[i][j] * y[j]);
            }
            acc.to_f64()
        });
        let dy = lu.solve(&r).ok_or(Error::Conditioning { cond: f64::INFINITY })?;
        y += &dy;
        if dy.norm() <= 1e-16 * y.norm() {
            break;
        }
    }
    let inv = lu.try_inverse().ok_or(Error::Conditioning { cond: f64::INFINITY })?;
    let norm1 = |m: &DMatrix<f64>| {
        (0..m.ncols())
            .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Ok((y.iter().cloned().collect(), norm1(&s) * norm1(&inv)))
}

/// Solves the linear system for a_{α,n,2j}, j = 0..=N, at 256 bits.
pub fn solve_angle_coeffs(params: ModelParams) -> Result<AngleCoefficients> {
    solve_angle_coeffs_at(params, 256)
}

/// As [`solve_angle_coeffs`] at a working precision of `prec` bits.
pub fn solve_angle_coeffs_at(params: ModelParams, prec: u32) -> Result<AngleCoefficients> {
    params.require_variance()?;
    let alpha = params
        .integer_alpha()
        .ok_or_else(|| Error::domain(format!("the tan-angle polynomial needs integer alpha, got {}", params.alpha)))?;
    let big_n = ((alpha as usize - 1) * params.n) / 2;
    if big_n + 1 > MAX_SYSTEM {
        return Err(Error::Budget {
            what: "angle coefficient system",
            detail: format!("size {} exceeds {MAX_SYSTEM}", big_n + 1),
        });
    }
    let sys = build_system(params, alpha, prec);
    let (y, cond) = solve_scaled_double(&sys)?;
    if cond > MAX_CONDITION {
        return Err(Error::Conditioning { cond });
    }
    let a_double: Vec<f64> = y
        .iter()
        .zip(&sys.col_scale)
        .map(|(v, c)| (v.abs().ln() - mp::ln_f64(c)).exp() * v.signum())
        .collect();
    let a_mp = solve_mp(&sys.matrix, &sys.rhs)?;
    let mut res_max = Float::with_val(64, 0);
    let mut rhs_max = Float::with_val(64, 0);
    for (m, row) in sys.matrix.iter().enumerate() {
        let mut acc = Float::with_val(prec, -&sys.rhs[m]);
        for (aij, xj) in row.iter().zip(&a_mp) {
            acc += Float::with_val(prec, aij * xj);
        }
        res_max.assign(res_max.clone().max(&Float::with_val(64, acc.abs_ref())));
        rhs_max.assign(rhs_max.clone().max(&Float::with_val(64, sys.rhs[m].abs_ref())));
    }
    let residual = Float::with_val(64, &res_max / &rhs_max).to_f64();
    let a: Vec<f64> = a_mp.iter().map(|v| v.to_f64()).collect();
    let mut out = AngleCoefficients {
        params,
        big_n,
        a,
        a_double,
        cond_estimate: cond,
        residual,
        w_at_phi_n: 0.0,
        a_mp,
        prec,
    };
    let tn = phi_n_tan(params);
    out.w_at_phi_n = out.cdf_unchecked(tn);
    for i in 0..=GRID {
        let t = tn * i as f64 / GRID as f64;
        let w = out.pdf_unchecked(t);
        if w < -1e-12 * out.pdf_unchecked(tn).abs().max(1e-300) {
            return Err(Error::NegativeDensity { t, value: w });
        }
    }
    if !(out.w_at_phi_n >= -1e-14 && out.w_at_phi_n <= 1.0 + 1e-12) {
        return Err(Error::NegativeDensity {
            t: tn,
            value: out.w_at_phi_n,
        });
    }
    Ok(out)
}

impl AngleCoefficients {
    /// Working precision of the multiprecision coefficients.
    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn a_mp(&self) -> &[Float] {
        &self.a_mp
    }

    /// The same coefficients at no less than `prec` bits.
    pub fn at_precision(&self, prec: u32) -> Result<AngleCoefficients> {
        if self.prec >= prec {
            Ok(self.clone())
        } else {
            solve_angle_coeffs_at(self.params, prec)
        }
    }

    fn cdf_unchecked(&self, t: f64) -> f64 {
        let n1 = (self.params.n - 1) as f64;
        let s: f64 = self
            .a
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let e = n1 + 2.0 * j as f64;
                a * t.powf(e) / e
            })
            .sum();
        log_norm(self.params).exp() * s
    }

    fn pdf_unchecked(&self, t: f64) -> f64 {
        let n2 = self.params.n as f64 - 2.0;
        let s: f64 = self
            .a
            .iter()
            .enumerate()
            .map(|(j, a)| a * t.powf(n2 + 2.0 * j as f64))
            .sum();
        log_norm(self.params).exp() * s
    }

    fn check(&self, t: f64) -> Result<()> {
        let tn = phi_n_tan(self.params);
        if !(t >= 0.0) || t > tn * (1.0 + 1e-12) {
            return Err(Error::domain(format!("t must lie in [0, {tn}], got {t}")));
        }
        Ok(())
    }

    /// W(t) = Pr{tan Φ ≤ t} for 0 ≤ t ≤ (n−1)^{−1/2}.
    pub fn tan_cdf(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.cdf_unchecked(t))
    }

    /// w(t) = W'(t) on the same interval.
    pub fn tan_pdf(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.pdf_unchecked(t).max(0.0))
    }
}

/// W(t) on [0, (n−1)^{−1/2}].
pub fn tan_cdf(coeffs: &AngleCoefficients, t: f64) -> Result<f64> {
    coeffs.tan_cdf(t)
}

/// w(t) on [0, (n−1)^{−1/2}].
pub fn tan_pdf(coeffs: &AngleCoefficients, t: f64) -> Result<f64> {
    coeffs.tan_pdf(t)
}

/// Σ_j a_{2j} B((n−1)/2 + j, ((α−1)n+k+1)/2 − j; 1/n) for k = 0..=kmax, by
/// upward recurrence in the second argument from two series starts.
fn beta_sums(params: ModelParams, a: &[Float], kmax: usize, prec: u32) -> Vec<Float> {
    let n = params.n as f64;
    let alpha = params.alpha;
    let x = Float::with_val(prec, n).recip();
    let one_minus = Float::with_val(prec, 1 - &x);
    let mut out: Vec<Float> = vec![Float::with_val(prec, 0); kmax + 1];
    let mut tmp = Float::new(prec);
    for (j, aj) in a.iter().enumerate() {
        let p = Float::with_val(prec, (n - 1.0) / 2.0 + j as f64);
        let xp = Float::with_val(prec, (&x).pow(&p));
        for start in 0..2usize.min(kmax + 1) {
            let q0 = ((alpha - 1.0) * n + start as f64 + 1.0) / 2.0 - j as f64;
            let mut q = Float::with_val(prec, q0);
            let mut b = mp::incomplete_beta(&p, &q, &x, prec);
            let mut pw = Float::with_val(prec, (&one_minus).pow(&q));
            let mut k = start;
            while k <= kmax {
                tmp.assign(aj * &b);
                out[k] += &tmp;
                // (p+q) B(p, q+1) = x^p (1−x)^q + q B(p, q)
                tmp.assign(&xp * &pw);
                b *= &q;
                b += &tmp;
                let pq = Float::with_val(prec, &p + &q);
                b /= &pq;
                pw *= &one_minus;
                q += 1u32;
                k += 2;
            }
        }
    }
    out
}

/// γ̄_k = Ē(cos^{αn+k} Φ) over tan Φ > (n−1)^{−1/2}, k = 0..=kmax, at the
/// precision of the table.
pub fn truncated_cos_moments(coeffs: &AngleCoefficients, table: &MomentTable, kmax: usize) -> Result<Vec<Float>> {
    let params = table.params();
    if coeffs.params != params {
        return Err(Error::domain("angle coefficients and moment table disagree on (alpha, n)"));
    }
    if kmax > table.order() {
        return Err(Error::TableTooSmall {
            order: kmax,
            prec: table.precision(),
        });
    }
    let prec = table.precision();
    if params.n == 2 {
        // φ₂ is the largest angle in the positive orthant: empty region
        return Ok(vec![Float::with_val(prec, 0); kmax + 1]);
    }
    let coeffs = coeffs.at_precision(prec)?;
    let sums = beta_sums(params, coeffs.a_mp(), kmax, prec);
    let half_c = norm_mp(params, prec) / 2u32;
    finish_truncated(table, sums, &half_c, kmax)
}

fn finish_truncated(table: &MomentTable, sums: Vec<Float>, half_c: &Float, kmax: usize) -> Result<Vec<Float>> {
    let prec = table.precision();
    let slack = 2f64.powi(-(prec as i32) + 24);
    let mut out = Vec::with_capacity(kmax + 1);
    for (k, s) in sums.into_iter().enumerate() {
        let g = &table.gamma()[k];
        let v = Float::with_val(prec, g - Float::with_val(prec, half_c * &s));
        if v.is_sign_negative() && !v.is_zero() {
            let ratio = Float::with_val(64, &v / g).to_f64().abs();
            if ratio > slack {
                return Err(Error::Cancellation {
                    what: "truncated cos moments",
                    detail: format!("negative value at k = {k} (relative {ratio:.2e})"),
                    suggest: "a higher working precision",
                });
            }
            out.push(Float::with_val(prec, 0));
        } else {
            out.push(v);
        }
    }
    Ok(out)
}

/// The α = 1 specialization with the closed-form single coefficient
/// a_{1,n,0} = 2π^{(n−1)/2}/Γ((n−1)/2).
pub fn truncated_cos_moments_exponential(table: &MomentTable, kmax: usize) -> Result<Vec<Float>> {
    let params = table.params();
    params.require_variance()?;
    if params.integer_alpha() != Some(1) {
        return Err(Error::domain("the closed form applies to alpha = 1 only"));
    }
    if kmax > table.order() {
        return Err(Error::TableTooSmall {
            order: kmax,
            prec: table.precision(),
        });
    }
    let prec = table.precision();
    if params.n == 2 {
        return Ok(vec![Float::with_val(prec, 0); kmax + 1]);
    }
    let n = params.n;
    let nf = n as f64;
    // (n−1)!/n^{n/2} · π^{(n−1)/2}/Γ((n−1)/2)
    let fact = Float::with_val(prec, rug::Integer::from(rug::Integer::factorial((n - 1) as u32)));
    let pi = Float::with_val(prec, rug::float::Constant::Pi);
    let lead = fact / Float::with_val(prec, Float::with_val(prec, n).pow(Float::with_val(prec, nf / 2.0)))
        * pi.pow(Float::with_val(prec, (nf - 1.0) / 2.0))
        / mp::gamma(prec, (nf - 1.0) / 2.0);
    let one = [Float::with_val(prec, 1)];
    let sums = beta_sums(params, &one, kmax, prec);
    finish_truncated(table, sums, &lead, kmax)
}

/// Geometric ratio bound of γ̄_{k+2}/γ̄_k on the truncated region.
pub fn truncation_ratio(params: ModelParams) -> f64 {
    (params.n as f64 - 1.0) / params.n as f64
}

/// Number of binomial-series terms needed for M̄_k: the smallest J with
/// Σ_{j>J} C(s/2+j−1, j) ρ^j below `eps`, from the bound γ̄_{k+2j} ≤ ρ^j γ̄_k
/// when γ̄_k ≤ 1 is factored out. Returns None if J would exceed `jmax`.
pub fn cot_terms_needed(params: ModelParams, k: usize, log_eps: f64, jmax: usize) -> Option<usize> {
    let rho = truncation_ratio(params);
    let s2 = (params.alpha_n() + k as f64) / 2.0;
    let lr = rho.ln();
    let mut lc = 0.0f64;
    for j in 0..=jmax {
        let jf = j as f64;
        let q = rho * (s2 + jf) / (jf + 1.0);
        if q < 1.0 {
            let tail = lc + jf * lr + (q / (1.0 - q)).ln();
            if tail < log_eps {
                return Some(j);
            }
        }
        lc += ((s2 + jf) / (jf + 1.0)).ln();
    }
    None
}

/// M̄_k = Σ_j C((αn+k)/2 + j − 1, j) γ̄_{k+2j} for k = 0..=kmax.
///
/// Each sum stops when the geometric tail bound (ratio ρ = (n−1)/n) falls
/// below `tol` relative to the partial sum.
pub fn truncated_cot_moments(gbar: &[Float], params: ModelParams, kmax: usize, tol: f64) -> Result<Vec<Float>> {
    params.require_variance()?;
    let prec = gbar.first().map(|v| v.prec()).unwrap_or(64);
    if params.n == 2 {
        return Ok(vec![Float::with_val(prec, 0); kmax + 1]);
    }
    let rho = truncation_ratio(params);
    let an = params.alpha_n();
    let mut out = Vec::with_capacity(kmax + 1);
    let mut tmp = Float::new(prec);
    for k in 0..=kmax {
        let s2 = (an + k as f64) / 2.0;
        let mut c = Float::with_val(prec, 1);
        let mut acc = Float::with_val(prec, 0);
        let mut j = 0usize;
        loop {
            let idx = k + 2 * j;
            if idx >= gbar.len() {
                let need = cot_terms_needed(params, k, tol.ln(), 1_000_000).unwrap_or(j * 2);
                return Err(Error::TableTooSmall {
                    order: (k + 2 * need + 2).max(gbar.len() + 2),
                    prec,
                });
            }
            tmp.assign(&c * &gbar[idx]);
            acc += &tmp;
            let jf = j as f64;
            let q = rho * (s2 + jf) / (jf + 1.0);
            if q < 1.0 && !acc.is_zero() {
                let t = Float::with_val(64, &tmp / &acc).to_f64();
                if t * q / (1.0 - q) < tol {
                    break;
                }
            } else if acc.is_zero() && j > 0 && q < 1.0 {
                break;
            }
            c *= s2 + jf;
            c /= (j + 1) as u32;
            j += 1;
        }
        out.push(acc);
    }
    Ok(out)
}

/// M̄_k alone, with the series stopped once its tail bound is below `abs_tol`.
pub fn truncated_cot_moment(gbar: &[Float], params: ModelParams, k: usize, abs_tol: f64) -> Result<Float> {
    params.require_variance()?;
    let prec = gbar.first().map(|v| v.prec()).unwrap_or(64);
    if params.n == 2 {
        return Ok(Float::with_val(prec, 0));
    }
    let rho = truncation_ratio(params);
    let s2 = (params.alpha_n() + k as f64) / 2.0;
    let mut c = Float::with_val(prec, 1);
    let mut acc = Float::with_val(prec, 0);
    let mut tmp = Float::new(prec);
    let mut j = 0usize;
    loop {
        let idx = k + 2 * j;
        if idx >= gbar.len() {
            let need = cot_terms_needed(params, k, abs_tol.ln(), 1_000_000).unwrap_or(j * 2);
            return Err(Error::TableTooSmall {
                order: (k + 2 * need + 2).max(gbar.len() + 2),
                prec,
            });
        }
        tmp.assign(&c * &gbar[idx]);
        acc += &tmp;
        let jf = j as f64;
        let q = (rho * (s2 + jf) / (jf + 1.0)).max(rho);
        if q < 1.0 && tmp.to_f64() * q / (1.0 - q) < abs_tol {
            return Ok(acc);
        }
        c *= s2 + jf;
        c /= (j + 1) as u32;
        j += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::MomentTable;
    use std::f64::consts::PI;

    fn p(alpha: f64, n: usize) -> ModelParams {
        ModelParams::new(alpha, n).unwrap()
    }

    fn ball_volume(d: f64) -> f64 {
        (d / 2.0 * PI.ln() - lgamma(d / 2.0 + 1.0)).exp()
    }

    #[test]
    fn exponential_single_coefficient() {
        for n in 2..=12 {
            let c = solve_angle_coeffs(p(1.0, n)).unwrap();
            assert_eq!(c.a.len(), 1);
            let want = (n - 1) as f64 * ball_volume((n - 1) as f64);
            assert!(((c.a[0] - want) / want).abs() < 1e-12, "n={n}");
        }
        let c = solve_angle_coeffs(p(1.0, 2)).unwrap();
        assert!((c.a[0] - 2.0).abs() < 1e-14);
        for t in [0.0, 0.3, 1.0] {
            assert!((c.tan_cdf(t).unwrap() - t).abs() < 1e-14);
            assert!((c.tan_pdf(t).unwrap() - 1.0).abs() < 1e-14 || t == 0.0);
        }
    }

    #[test]
    fn exponential_cdf_closed_form() {
        let c = solve_angle_coeffs(p(1.0, 10)).unwrap();
        let t: f64 = 1.0 / 3.0;
        let fact9 = 362_880.0;
        let want = fact9 / 1e5 * ball_volume(9.0) * t.powi(9);
        assert!(((c.tan_cdf(t).unwrap() - want) / want).abs() < 1e-12);
        assert!(c.tan_cdf(0.5).is_err());
    }

    #[test]
    fn double_and_multiprecision_solves_agree() {
        for (alpha, n) in [(2.0, 3), (3.0, 2), (2.0, 5), (4.0, 4), (3.0, 7)] {
            let c = solve_angle_coeffs(p(alpha, n)).unwrap();
            assert!(c.residual < 1e-60);
            assert!(c.cond_estimate < MAX_CONDITION);
            for (x, y) in c.a.iter().zip(&c.a_double) {
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300), "{alpha} {n} {x} {y}");
            }
            assert!(c.w_at_phi_n > 0.0 && c.w_at_phi_n < 1.0);
        }
    }

    #[test]
    fn density_integrates_to_cdf() {
        let c = solve_angle_coeffs(p(2.0, 3)).unwrap();
        let tn = phi_n_tan(c.params);
        let m = 2000;
        let h = tn / (2 * m) as f64;
        let mut s = c.tan_pdf(0.0).unwrap() + c.tan_pdf(tn).unwrap();
        for i in 1..2 * m {
            s += c.tan_pdf(i as f64 * h).unwrap() * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - c.w_at_phi_n).abs() < 1e-12);
    }

    #[test]
    fn general_truncated_moments_match_exponential_form() {
        for n in [3, 5, 10] {
            let par = p(1.0, n);
            let table = MomentTable::build(par, 80, 256).unwrap();
            let c = solve_angle_coeffs(par).unwrap();
            let g = truncated_cos_moments(&c, &table, 80).unwrap();
            let h = truncated_cos_moments_exponential(&table, 80).unwrap();
            for k in 0..=80 {
                let d = Float::with_val(128, &g[k] - &h[k]).to_f64().abs();
                assert!(d <= 1e-12 * h[k].to_f64(), "n={n} k={k}");
                assert!(g[k] <= table.gamma()[k]);
                if k >= 2 {
                    assert!(g[k].to_f64() <= truncation_ratio(par) * g[k - 2].to_f64() * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn pair_has_empty_truncation_region() {
        let par = p(1.0, 2);
        let table = MomentTable::build(par, 20, 128).unwrap();
        let g = truncated_cos_moments_exponential(&table, 20).unwrap();
        assert!(g.iter().all(|v| v.is_zero()));
        let m = truncated_cot_moments(&g, par, 5, 1e-20).unwrap();
        assert!(m.iter().all(|v| v.is_zero()));
    }

    #[test]
    fn cot_moments_need_more_table() {
        let par = p(1.0, 5);
        let table = MomentTable::build(par, 40, 256).unwrap();
        let c = solve_angle_coeffs(par).unwrap();
        let g = truncated_cos_moments(&c, &table, 40).unwrap();
        assert!(matches!(truncated_cot_moments(&g, par, 4, 1e-30), Err(Error::TableTooSmall { .. })));
    }
}
