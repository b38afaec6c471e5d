//! Multiprecision helpers on top of MPFR floats.
//!
//! The moment sequences feed alternating sums (finite differences, Legendre
//! projections, truncated moments) whose cancellation grows with the order,
//! so they are carried at a working precision chosen by the caller.

use rug::ops::Pow;
use rug::{Assign, Float};

pub use rug::Float as Mp;

pub fn mpf(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}

/// Γ(x) for a double argument.
pub fn gamma(prec: u32, x: f64) -> Float {
    Float::with_val(prec, x).gamma()
}

/// (ln|x|, sign) with sign 0 for x = 0.
pub fn log_abs_sign(x: &Float) -> (f64, i8) {
    if x.is_zero() {
        return (f64::NEG_INFINITY, 0);
    }
    let s = if x.is_sign_negative() { -1 } else { 1 };
    let l = Float::with_val(64, x.abs_ref()).ln();
    (l.to_f64(), s)
}

/// ln of a positive float as a double.
pub fn ln_f64(x: &Float) -> f64 {
    log_abs_sign(x).0
}

/// G_{a0+k}(x) for k = 0..=kmax: the series at the top order, then the
/// downward recurrence G_a = G_{a+1} + x^a e^{−x}/Γ(a+1), all terms positive.
pub fn gamma_cdf_ladder(a0: &Float, kmax: usize, x: f64, prec: u32) -> Vec<Float> {
    let mut out = vec![Float::with_val(prec, 0); kmax + 1];
    if x == 0.0 {
        return out;
    }
    let xm = Float::with_val(prec, x);
    let top = Float::with_val(prec, a0 + kmax as u32);
    // x^top e^{−x}/Γ(top+1)
    let mut w = Float::with_val(prec, xm.ln_ref()) * &top - &xm;
    w -= Float::with_val(prec, &top + 1u32).ln_gamma();
    w.exp_mut();
    let mut sum = Float::with_val(prec, 1);
    let mut term = Float::with_val(prec, 1);
    let mut m = 1u32;
    loop {
        let denom = Float::with_val(prec, &top + m);
        term *= &xm;
        term /= &denom;
        sum += &term;
        if denom.to_f64() > 2.0 * x && term.get_exp().unwrap_or(i32::MIN) < sum.get_exp().unwrap_or(0) - prec as i32 - 2 {
            break;
        }
        m += 1;
    }
    out[kmax].assign(&w * &sum);
    for k in (0..kmax).rev() {
        // x^a e^{−x}/Γ(a+1) from the weight one order up
        w *= Float::with_val(prec, a0 + (k as u32 + 1));
        w /= &xm;
        let mut g = Float::with_val(prec, &out[k + 1] + &w);
        if g > 1u32 {
            g.assign(1u32);
        }
        out[k] = g;
    }
    out
}

/// Truncated product of two sequences, entries 0..len.
pub fn convolve(a: &[Float], b: &[Float], len: usize, prec: u32) -> Vec<Float> {
    let mut out = Vec::with_capacity(len);
    let mut tmp = Float::new(prec);
    for k in 0..len {
        let mut acc = Float::new(prec);
        let lo = k.saturating_sub(b.len().saturating_sub(1));
        let hi = k.min(a.len().saturating_sub(1));
        for i in lo..=hi {
            tmp.assign(&a[i] * &b[k - i]);
            acc += &tmp;
        }
        out.push(acc);
    }
    out
}

/// Truncated square of a sequence, using the symmetry of the products.
pub fn square(a: &[Float], len: usize, prec: u32) -> Vec<Float> {
    let mut out = Vec::with_capacity(len);
    let mut tmp = Float::new(prec);
    for k in 0..len {
        let mut acc = Float::new(prec);
        let hi = k.min(a.len().saturating_sub(1));
        let lo = k.saturating_sub(a.len().saturating_sub(1));
        let mut i = lo;
        while i < k - i && i <= hi {
            tmp.assign(&a[i] * &a[k - i]);
            acc += &tmp;
            i += 1;
        }
        acc *= 2u32;
        if k % 2 == 0 && k / 2 < a.len() {
            tmp.assign(a[k / 2].square_ref());
            acc += &tmp;
        }
        out.push(acc);
    }
    out
}

/// n-fold truncated convolution power by square-and-multiply.
pub fn convolution_power(c: &[Float], n: usize, len: usize, prec: u32) -> Vec<Float> {
    assert!(n >= 1);
    let mut base: Vec<Float> = c.iter().take(len).cloned().collect();
    let mut result: Option<Vec<Float>> = None;
    let mut e = n;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base, len, prec),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = square(&base, len, prec);
    }
    result.expect("n >= 1")
}

/// Forward-difference weights δ_k = Σ_j (−1)^j C(k,j) s_j for k ≤ kmax by
/// repeated adjacent differencing. Also returns, for each k, the largest
/// magnitude seen in the difference table at that level (for error estimates).
pub fn iterated_differences(s: &[Float], kmax: usize, prec: u32) -> (Vec<Float>, Vec<f64>) {
    let mut row: Vec<Float> = s[..=kmax].iter().map(|v| Float::with_val(prec, v)).collect();
    let mut out = Vec::with_capacity(kmax + 1);
    let mut scale = Vec::with_capacity(kmax + 1);
    let mut running_max = row.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
    for _ in 0..=kmax {
        out.push(row[0].clone());
        scale.push(running_max);
        let len = row.len();
        if len > 1 {
            let mut m: f64 = 0.0;
            for i in 0..len - 1 {
                let (head, tail) = row.split_at_mut(i + 1);
                head[i] -= &tail[0];
                m = m.max(head[i].to_f64().abs());
            }
            row.pop();
            running_max = running_max.max(m);
        }
    }
    (out, scale)
}

/// Generalized binomial C(a + j − 1, j) for j = 0..=jmax (a real).
pub fn rising_binomials(a: &Float, jmax: usize, prec: u32) -> Vec<Float> {
    let mut out = Vec::with_capacity(jmax + 1);
    let mut v = Float::with_val(prec, 1);
    out.push(v.clone());
    for j in 1..=jmax {
        let f = Float::with_val(prec, a + (j as u32 - 1));
        v *= &f;
        v /= j as u32;
        out.push(v.clone());
    }
    out
}

/// Non-regularized B(a, b; x) for 0 ≤ x < 1 by the hypergeometric series
/// x^a (1−x)^b / a · Σ_i (a+b)_i/(a+1)_i x^i (all terms positive).
pub fn incomplete_beta(a: &Float, b: &Float, x: &Float, prec: u32) -> Float {
    if x.is_zero() {
        return Float::with_val(prec, 0);
    }
    let (af, bf, xf) = (a.to_f64(), b.to_f64(), x.to_f64());
    let tol = 2f64.powi(-(prec as i32) - 8);
    let ab = Float::with_val(prec, a + b);
    let mut term = Float::with_val(prec, 1);
    let mut sum = Float::with_val(prec, 1);
    let mut tmp = Float::new(prec);
    for i in 0u32.. {
        tmp.assign(&ab + i);
        term *= &tmp;
        tmp.assign(a + (i + 1));
        term /= &tmp;
        term *= x;
        sum += &term;
        let next = (af + bf + (i + 1) as f64) / (af + (i + 2) as f64) * xf;
        let r = next.max(xf);
        if r < 1.0 {
            let rel = Float::with_val(53, &term / &sum).to_f64();
            if rel * r / (1.0 - r) < tol {
                break;
            }
        }
    }
    let one_minus = Float::with_val(prec, 1 - x);
    let pre = Float::with_val(prec, x.pow(a)) * Float::with_val(prec, one_minus.pow(b)) / a;
    pre * sum
}

/// e^{−x} i_k(x) for k = 0..=kmax at working precision `prec`.
pub fn scaled_mod_sph_bessel(kmax: usize, x: &Float, prec: u32) -> Vec<Float> {
    let xf = x.to_f64();
    let start = crate::specfun::miller_start_modified(kmax, xf, prec as f64);
    let mut out = vec![Float::new(prec); kmax + 1];
    let mut f_next = Float::with_val(prec, 0);
    let mut f = Float::with_val(prec, 1);
    let inv_x = Float::with_val(prec, x.recip_ref());
    let mut tmp = Float::new(prec);
    for k in (1..=start).rev() {
        if k <= kmax {
            out[k].assign(&f);
        }
        tmp.assign(&f * &inv_x);
        tmp *= (2 * k + 1) as u32;
        tmp += &f_next;
        std::mem::swap(&mut f_next, &mut f);
        std::mem::swap(&mut f, &mut tmp);
    }
    out[0].assign(&f);
    let two_x = Float::with_val(prec, x * 2u32);
    let i0 = -Float::with_val(prec, -&two_x).exp_m1() / &two_x;
    let scale = i0 / &out[0];
    for v in out.iter_mut() {
        *v *= &scale;
    }
    out
}
