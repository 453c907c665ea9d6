//! Small numeric helpers shared by the labeler, detectors and reports.

use alloc::vec::Vec;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn pop_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    libm::sqrt(var)
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `q * (n - 1)`). `None` for empty input.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Whether `x > mean(window) + k * popstd(window)`, decided exactly for
/// integer `k^2` (compared as `d^2 > k^2 (nQ - S^2)` with `d = n x - S > 0`).
pub fn exceeds_mean_k_std(window: &[u32], x: u32, k: f64) -> bool {
    // x > S/n + k*sqrt(nQ - S^2)/n  <=>  d = n*x - S > 0  and  d^2 > k^2 (nQ - S^2)
    let n = window.len() as u128;
    let s: u128 = window.iter().map(|&x| u128::from(x)).sum();
    let q: u128 = window.iter().map(|&x| u128::from(x) * u128::from(x)).sum();
    let nx = n * u128::from(x);
    if nx <= s {
        return false;
    }
    let d = nx - s;
    let var_n2 = n * q - s * s;
    let k2 = k * k;
    if libm::trunc(k2) == k2 && k2 < (1u64 << 53) as f64 {
        if let Some(rhs) = (k2 as u128).checked_mul(var_n2) {
            if let Some(lhs) = d.checked_mul(d) {
                return lhs > rhs;
            }
        }
    }
    (d as f64) * (d as f64) > k2 * var_n2 as f64
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Exact rational with a positive denominator, kept in lowest terms.
/// Arithmetic returns `None` on overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    num: i128,
    den: i128,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub fn new(num: i128, den: i128) -> Option<Ratio> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        let sign = if den < 0 { -1 } else { 1 };
        Some(Ratio {
            num: sign * num / g,
            den: sign * den / g,
        })
    }

    pub fn checked_add(self, other: Ratio) -> Option<Ratio> {
        let g = gcd(self.den, other.den);
        let lhs_scale = other.den / g;
        let rhs_scale = self.den / g;
        let num = self
            .num
            .checked_mul(lhs_scale)?
            .checked_add(other.num.checked_mul(rhs_scale)?)?;
        let den = self.den.checked_mul(lhs_scale)?;
        Ratio::new(num, den)
    }

    /// `value > self`, exactly.
    pub fn is_below_int(self, value: i128) -> Option<bool> {
        Some(value.checked_mul(self.den)? > self.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}
