//! Numerical and statistical helpers shared by the verification modules.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

/// Mean and population variance, with compensated accumulation in iteration order.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var)
}

pub fn std_normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(z)
}

/// `z` with `P(Z <= z) = p`.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Two-sided critical value `z_{1 - alpha/2}`.
pub fn two_sided_z(alpha: f64) -> f64 {
    std_normal_quantile(1.0 - alpha / 2.0)
}

pub fn two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - std_normal_cdf(z.abs()))
}

pub fn chi_square_sf(stat: f64, df: f64) -> f64 {
    if stat.is_nan() || stat <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df).expect("positive df").cdf(stat)
}

/// Empirical quantile by linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Same as [`quantile_sorted`] but by selection, reordering `scratch`.
pub fn quantile_select(scratch: &mut [f64], q: f64) -> f64 {
    let n = scratch.len();
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, lo_v, upper) = scratch.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_v = *lo_v;
    if frac == 0.0 || upper.is_empty() {
        return lo_v;
    }
    let hi_v = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_v + (hi_v - lo_v) * frac
}

/// Pearson chi-square test of independence on a 2x2 table.
/// Returns `(statistic, p_value)`; a table with an empty margin gives `(0, 1)`.
pub fn chi_square_2x2(table: [[u64; 2]; 2]) -> (f64, f64) {
    let n: u64 = table.iter().flatten().sum();
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if n == 0 || rows.contains(&0) || cols.contains(&0) {
        return (0.0, 1.0);
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] as f64 * cols[j] as f64 / n as f64;
            let d = table[i][j] as f64 - expected;
            stat += d * d / expected;
        }
    }
    (stat, chi_square_sf(stat, 1.0))
}

/// Two-sided Mann-Whitney U test with tie correction (normal approximation).
/// Returns `(z, p_value)`. When every value is tied the test has no power and
/// returns `(0, 1)`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n1 = a.len();
    let n2 = b.len();
    if n1 == 0 || n2 == 0 {
        return (0.0, 1.0);
    }
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|p, q| p.0.total_cmp(&q.0));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let in_a = all[i..j].iter().filter(|p| p.1).count();
        rank_sum_a += avg_rank * in_a as f64;
        let tied = (j - i) as f64;
        tie_term += tied * tied * tied - tied;
        i = j;
    }
    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u = rank_sum_a - n1f * (n1f + 1.0) / 2.0;
    let mean_u = n1f * n2f / 2.0;
    let var_u = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var_u <= 0.0 {
        return (0.0, 1.0);
    }
    let z = (u - mean_u) / var_u.sqrt();
    (z, two_sided_p(z))
}

/// Kolmogorov-Smirnov distance between the empirical law of `sorted` (ascending)
/// and a continuous CDF, taking both one-sided limits at every sample point.
pub fn ks_distance_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let f = cdf(sorted[i]);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

/// Ordinary least squares `y = a + slope * x`; returns `(slope, intercept, slope_stderr)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, stderr)
}

/// Run-level verdict for many per-item checks at level `alpha`: the failing
/// fraction may not exceed `alpha * (1 + 3 * sqrt(alpha / n)) * 2`.
pub fn run_level_pass(failing: usize, n: usize, alpha: f64) -> bool {
    if n == 0 {
        return true;
    }
    let allowed = alpha * (1.0 + 3.0 * (alpha / n as f64).sqrt()) * 2.0;
    failing as f64 / n as f64 <= allowed
}
