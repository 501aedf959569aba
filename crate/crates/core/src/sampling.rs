//! Low-level random variate generators shared by the samplers.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

/// Gamma(shape, rate) variate.
pub fn gamma_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma shape and rate must be positive")
        .sample(rng)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard normal truncated to `[a, b]`, exact for any bounds.
///
/// Uses the uniform, exponential and plain-normal rejection proposals of Robert (1995),
/// chosen by the position and width of the interval.
pub fn truncated_std_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    debug_assert!(a < b, "empty truncation interval [{a}, {b}]");
    if a >= 0.0 {
        right_tail(a, b, rng)
    } else if b <= 0.0 {
        -right_tail(-b, -a, rng)
    } else if b - a <= 2.5 {
        loop {
            let x = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (-0.5 * x * x).exp() {
                return x;
            }
        }
    } else {
        loop {
            let x = std_normal(rng);
            if a <= x && x <= b {
                return x;
            }
        }
    }
}

// 0 <= a < b
fn right_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let width = b - a;
    if width <= 1.0 / a.max(1.0) {
        loop {
            let x = a + width * rng.random::<f64>();
            if rng.random::<f64>() <= (0.5 * (a * a - x * x)).exp() {
                return x;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / alpha;
        if x > b {
            continue;
        }
        let d = x - alpha;
        if rng.random::<f64>() <= (-0.5 * d * d).exp() {
            return x;
        }
    }
}

/// n(mean, sd²) truncated to `(lo, hi]`; the result is nudged inside the half-open interval.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    let z = if a < b {
        mean + sd * truncated_std_normal(a, b, rng)
    } else {
        // standardized bounds collapsed (sd negligible next to the cell)
        mean.clamp(lo, hi)
    };
    if z <= lo {
        lo.next_up()
    } else if z > hi {
        hi
    } else {
        z
    }
}

/// One univariate slice-sampling transition (stepping out, then shrinkage).
///
/// `log_density` may return `-inf` outside the support; `lower`/`upper` are hard bounds.
pub fn slice_sample<R, F>(
    x0: f64,
    mut log_density: F,
    width: f64,
    lower: f64,
    upper: f64,
    max_steps: usize,
    rng: &mut R,
) -> f64
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let e: f64 = Exp1.sample(rng);
    let level = log_density(x0) - e;

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let mut j = (max_steps as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = max_steps.saturating_sub(1) - j.min(max_steps.saturating_sub(1));
    while j > 0 && left > lower && log_density(left) > level {
        left -= width;
        j -= 1;
    }
    while k > 0 && right < upper && log_density(right) > level {
        right += width;
        k -= 1;
    }
    left = left.max(lower);
    right = right.min(upper);

    loop {
        let x = left + (right - left) * rng.random::<f64>();
        if log_density(x) > level {
            return x;
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
        if right - left <= f64::EPSILON * x0.abs().max(1.0) {
            return x0;
        }
    }
}
