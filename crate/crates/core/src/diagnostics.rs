//! Normality testing, kernel density estimation and moment summaries of densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_std_normal_cdf, mean, quantile_sorted, sample_variance, std_normal_pdf};

/// Upper 5% point of the adjusted statistic for the composite (mean and sd estimated) normal case.
pub const AD_CRITICAL_05: f64 = 0.752;

pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    /// Raw A² statistic.
    pub a2: f64,
    /// A²·(1 + 0.75/n + 2.25/n²).
    pub a2_adjusted: f64,
    pub reject_at_05: bool,
}

pub fn anderson_darling(values: &[f64]) -> Result<AndersonDarling> {
    let n = values.len();
    if n < 8 {
        return Err(Error::InsufficientData { needed: 8, got: n });
    }
    let m = mean(values);
    let sd = sample_variance(values).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("sample standard deviation is zero".into()));
    }
    let mut z: Vec<f64> = values.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (ln_std_normal_cdf(z[i]) + ln_std_normal_cdf(-z[n - 1 - i])))
        .sum();
    let a2 = -nf - s / nf;
    let a2_adjusted = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    Ok(AndersonDarling { a2, a2_adjusted, reject_at_05: a2_adjusted > AD_CRITICAL_05 })
}

/// A density tabulated on an increasing grid of y values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    /// KDE bandwidth, when the grid came from a kernel estimate.
    pub bandwidth: Option<f64>,
    /// Free-form label of what produced the grid.
    pub source: String,
}

impl DensityGrid {
    pub fn new(y: Vec<f64>, f: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if y.len() != f.len() {
            return Err(Error::Mismatch("grid and density lengths differ".into()));
        }
        if y.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        if f.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("density values must be non-negative".into()));
        }
        Ok(Self { y, f, bandwidth: None, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Trapezoid integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.y, &self.f)
    }

    /// Number of local maxima whose topographic prominence is at least `fraction` of the global maximum.
    pub fn count_modes(&self, fraction: f64) -> usize {
        let top = self.f.iter().copied().fold(0.0, f64::max);
        if top <= 0.0 {
            return 0;
        }
        peak_prominences(&self.f).into_iter().filter(|&(_, p)| p >= fraction * top).count()
    }

    /// Locations of the modes counted by [`DensityGrid::count_modes`].
    pub fn modes(&self, fraction: f64) -> Vec<f64> {
        let top = self.f.iter().copied().fold(0.0, f64::max);
        peak_prominences(&self.f)
            .into_iter()
            .filter(|&(_, p)| top > 0.0 && p >= fraction * top)
            .map(|(i, _)| self.y[i])
            .collect()
    }

    /// Quantile of the grid density after normalizing its trapezoid integral, interpolating
    /// linearly within a grid cell.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut cum = vec![0.0; self.len()];
        for i in 1..self.len() {
            cum[i] = cum[i - 1] + 0.5 * (self.y[i] - self.y[i - 1]) * (self.f[i] + self.f[i - 1]);
        }
        let total = cum[cum.len() - 1];
        if total <= 0.0 {
            return f64::NAN;
        }
        let target = q.clamp(0.0, 1.0) * total;
        let k = cum.partition_point(|&c| c < target);
        if k == 0 {
            return self.y[0];
        }
        if k >= cum.len() {
            return self.y[self.len() - 1];
        }
        let (c0, c1) = (cum[k - 1], cum[k]);
        let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        self.y[k - 1] + t * (self.y[k] - self.y[k - 1])
    }
}

/// Evenly spaced grid of `points` values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
}

pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2).zip(f.windows(2)).map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1])).sum()
}

/// Peak index and prominence for every local maximum (flat tops count once, at their middle).
fn peak_prominences(f: &[f64]) -> Vec<(usize, f64)> {
    let n = f.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if f[i] > f[i - 1] {
            let mut j = i;
            while j + 1 < n && f[j + 1] == f[i] {
                j += 1;
            }
            if j + 1 < n && f[j + 1] < f[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
        .into_iter()
        .map(|p| {
            let h = f[p];
            let mut left_min = h;
            for k in (0..p).rev() {
                if f[k] > h {
                    break;
                }
                left_min = left_min.min(f[k]);
            }
            let mut right_min = h;
            for &v in &f[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            (p, h - left_min.max(right_min))
        })
        .collect()
}

/// Silverman's rule of thumb 0.9·min(sd, IQR/1.34)·n^(−1/5).
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: values.len() });
    }
    let sd = sample_variance(values).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::Degenerate("all values are equal; bandwidth cannot be chosen".into()));
    }
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

/// Gaussian kernel estimate (1/(nh))·Σφ((y−v_i)/h) at a single point.
pub fn kde_at(values: &[f64], h: f64, y: f64) -> f64 {
    values.iter().map(|v| std_normal_pdf((y - v) / h)).sum::<f64>() / (values.len() as f64 * h)
}

/// Gaussian KDE on a grid spanning [min − 3h, max + 3h].
///
/// Without a bandwidth Silverman's rule is used and at least two values are needed; a
/// forced bandwidth makes a single value acceptable.
pub fn gaussian_kde(values: &[f64], bandwidth: Option<f64>, points: usize) -> Result<DensityGrid> {
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Domain(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(values)?,
    };
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if points < 2 {
        return Err(Error::Domain("a density grid needs at least two points".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let y = linspace(lo, hi, points);
    let f = y.iter().map(|&t| kde_at(values, h, t)).collect();
    let mut grid = DensityGrid::new(y, f, "kde")?;
    grid.bandwidth = Some(h);
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub median: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Non-excess kurtosis (3 for a normal).
    pub kurtosis: f64,
}

/// Moments of a tabulated density, renormalized by its trapezoid integral.
pub fn grid_moments(grid: &DensityGrid) -> Result<MomentSummary> {
    if grid.len() < 2 {
        return Err(Error::Degenerate("density grid has fewer than two points".into()));
    }
    let total = grid.integral();
    if !(total > 0.0) {
        return Err(Error::Degenerate("density grid has zero mass".into()));
    }
    let y = &grid.y;
    let moment = |g: &dyn Fn(f64) -> f64| {
        let v: Vec<f64> = y.iter().zip(&grid.f).map(|(&t, &f)| g(t) * f).collect();
        trapezoid(y, &v) / total
    };
    let m = moment(&|t| t);
    let var = moment(&|t| (t - m).powi(2));
    let m3 = moment(&|t| (t - m).powi(3));
    let m4 = moment(&|t| (t - m).powi(4));

    // median from the cumulative trapezoid integral, linear within the cell
    let half = 0.5 * total;
    let mut acc = 0.0;
    let mut median = y[y.len() - 1];
    for k in 1..y.len() {
        let piece = 0.5 * (y[k] - y[k - 1]) * (grid.f[k] + grid.f[k - 1]);
        if acc + piece >= half && piece > 0.0 {
            median = y[k - 1] + (y[k] - y[k - 1]) * (half - acc) / piece;
            break;
        }
        acc += piece;
    }
    Ok(summary(m, median, var, m3, m4))
}

/// Sample moments with the n divisor.
pub fn sample_moments(values: &[f64]) -> Result<MomentSummary> {
    if values.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: values.len() });
    }
    let n = values.len() as f64;
    let m = mean(values);
    let central = |k: i32| values.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(summary(m, quantile_sorted(&sorted, 0.5), central(2), central(3), central(4)))
}

fn summary(mean: f64, median: f64, var: f64, m3: f64, m4: f64) -> MomentSummary {
    let (skewness, kurtosis) = if var > 0.0 { (m3 / var.powf(1.5), m4 / (var * var)) } else { (0.0, 0.0) };
    MomentSummary { mean, median, variance: var, skewness, kurtosis }
}
