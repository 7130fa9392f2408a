//! Estimates with error bars, blocking analysis, jackknife and log-log fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of blocks behind any blocked error bar.
pub const MIN_BLOCKS: usize = 16;

/// A measured value with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Integrated autocorrelation time in units of the sampling stride.
    pub tau: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            tau: 0.0,
            samples: 0,
        }
    }

    /// Binomial proportion with stderr `sqrt(p(1-p)/n)`.
    pub fn binomial(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Estimate::default();
        }
        let p = successes as f64 / trials as f64;
        Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            tau: 0.5,
            samples: trials,
        }
    }

    /// Mean of a (possibly autocorrelated) series with a blocking error bar.
    ///
    /// Block sizes double until the error bar changes by less than 10% over
    /// two consecutive doublings, keeping at least [`MIN_BLOCKS`] blocks. Without a
    /// plateau the largest error bar seen is reported.
    pub fn from_series(series: &[f64]) -> Self {
        let n = series.len();
        if n == 0 {
            return Estimate::default();
        }
        let mean = series.iter().sum::<f64>() / n as f64;
        let naive = block_stderr(series, 1);
        if naive == 0.0 || n < 2 * MIN_BLOCKS {
            return Estimate {
                mean,
                stderr: naive,
                tau: if naive == 0.0 { 0.0 } else { 0.5 },
                samples: n as u64,
            };
        }
        let mut levels = Vec::new();
        let mut size = 1;
        while n / size >= MIN_BLOCKS {
            levels.push(block_stderr(series, size));
            size *= 2;
        }
        let mut chosen = None;
        for w in levels.windows(3) {
            if (w[1] - w[0]).abs() <= 0.1 * w[0] && (w[2] - w[1]).abs() <= 0.1 * w[1] {
                chosen = Some(w[0].max(w[1]).max(w[2]));
                break;
            }
        }
        let stderr = chosen.unwrap_or_else(|| levels.iter().cloned().fold(0.0, f64::max));
        Estimate {
            mean,
            stderr,
            tau: 0.5 * (stderr / naive).powi(2),
            samples: n as u64,
        }
    }

    /// Sample-count weighted merge; associative when applied in a fixed order.
    pub fn merge(parts: &[Estimate]) -> Estimate {
        let total: u64 = parts.iter().map(|e| e.samples).sum();
        if total == 0 {
            return parts.first().copied().unwrap_or_default();
        }
        let t = total as f64;
        let mean = parts.iter().map(|e| e.samples as f64 * e.mean).sum::<f64>() / t;
        let var = parts
            .iter()
            .map(|e| (e.samples as f64 * e.stderr).powi(2))
            .sum::<f64>()
            / (t * t);
        let tau = parts.iter().map(|e| e.samples as f64 * e.tau).sum::<f64>() / t;
        Estimate {
            mean,
            stderr: var.sqrt(),
            tau,
            samples: total,
        }
    }

    /// `(self - other) / combined stderr`; zero when both are exact and equal.
    pub fn z_score(&self, exact: f64) -> f64 {
        let diff = self.mean - exact;
        if self.stderr == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        } else {
            diff / self.stderr
        }
    }

    pub fn within_sigmas(&self, exact: f64, sigmas: f64) -> bool {
        self.z_score(exact).abs() <= sigmas
    }
}

fn block_stderr(series: &[f64], size: usize) -> f64 {
    let nb = series.len() / size;
    if nb < 2 {
        return 0.0;
    }
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(nb)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / nb as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nb - 1) as f64;
    (var / nb as f64).sqrt()
}

/// Delete-one-block jackknife for a statistic of summed block totals.
///
/// `blocks[i]` holds the additive sums collected in block `i`; `stat` maps a
/// vector of totals to the statistic. Returns `(value, stderr)`.
pub fn jackknife<F>(blocks: &[Vec<f64>], stat: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let k = blocks.len();
    let width = blocks.first().map_or(0, Vec::len);
    let mut total = vec![0.0; width];
    for b in blocks {
        for (t, v) in total.iter_mut().zip(b) {
            *t += v;
        }
    }
    let value = stat(&total);
    if k < 2 {
        return (value, 0.0);
    }
    let mut leave = vec![0.0; width];
    let loo: Vec<f64> = blocks
        .iter()
        .map(|b| {
            for i in 0..width {
                leave[i] = total[i] - b[i];
            }
            stat(&leave)
        })
        .collect();
    let m = loo.iter().sum::<f64>() / k as f64;
    let var = (k - 1) as f64 / k as f64 * loo.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    (value, var.sqrt())
}

/// Weighted least-squares fit of `ln y` against `ln x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope.
    pub ci: (f64, f64),
    /// Residuals in log space, one per point.
    pub residuals: Vec<f64>,
    pub chi2: f64,
    /// Quadratic coefficient of a log-log parabola through the same points.
    pub curvature: f64,
    /// Set when `|curvature|` exceeds [`CURVATURE_THRESHOLD`].
    pub curvature_flagged: bool,
    pub points: usize,
    pub note: Option<String>,
}

/// Log-log quadratic coefficient above which data is flagged pre-asymptotic.
pub const CURVATURE_THRESHOLD: f64 = 0.05;

/// Fits `ln y = a + b ln x` with weights from the relative errors `σ_y / y`.
/// Points with zero error get equal weights. Needs at least 4 points spanning
/// a factor 2 in `x`, all `y > 0`.
pub fn loglog_fit(points: &[(f64, f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y, _)) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InsufficientData(format!(
            "non-positive point ({x}, {y}) cannot be fitted on a log scale"
        )));
    }
    let xmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if xmax < 2.0 * xmin {
        return Err(Error::InsufficientData(format!(
            "x range [{xmin}, {xmax}] spans less than one octave"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let rel: Vec<f64> = points.iter().map(|p| p.2 / p.1).collect();
    let weighted = rel.iter().all(|&s| s > 0.0);
    let ws: Vec<f64> = if weighted {
        rel.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; points.len()]
    };
    let (intercept, slope, cov) = weighted_linear(&xs, &ys, &ws);
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - intercept - slope * x)
        .collect();
    let n = points.len();
    let chi2: f64 = residuals.iter().zip(&ws).map(|(r, w)| w * r * r).sum();
    let dof = (n - 2) as f64;
    let slope_var = if weighted {
        cov * (chi2 / dof).max(1.0)
    } else {
        cov * chi2 / dof
    };
    let slope_stderr = slope_var.max(0.0).sqrt();
    let t = student_t_975(n - 2);
    let curvature = quadratic_coefficient(&xs, &ys, &ws);
    Ok(FitResult {
        slope,
        intercept,
        slope_stderr,
        ci: (slope - t * slope_stderr, slope + t * slope_stderr),
        residuals,
        chi2,
        curvature,
        curvature_flagged: curvature.abs() > CURVATURE_THRESHOLD,
        points: n,
        note: None,
    })
}

/// Returns `(a, b, var(b) for unit-variance weights)` of `y = a + b x`.
fn weighted_linear(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64) {
    let s: f64 = ws.iter().sum();
    let sx: f64 = ws.iter().zip(xs).map(|(w, x)| w * x).sum();
    let sy: f64 = ws.iter().zip(ys).map(|(w, y)| w * y).sum();
    let mx = sx / s;
    let my = sy / s;
    let sxx: f64 = ws.iter().zip(xs).map(|(w, x)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = ws
        .iter()
        .zip(xs.iter().zip(ys))
        .map(|(w, (x, y))| w * (x - mx) * (y - my))
        .sum();
    let b = sxy / sxx;
    (my - b * mx, b, 1.0 / sxx)
}

fn quadratic_coefficient(xs: &[f64], ys: &[f64], ws: &[f64]) -> f64 {
    if xs.len() < 3 {
        return 0.0;
    }
    // centre for conditioning
    let s: f64 = ws.iter().sum();
    let mx = ws.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() / s;
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        let t = x - mx;
        let basis = [1.0, t, t * t];
        for i in 0..3 {
            v[i] += w * basis[i] * y;
            for j in 0..3 {
                m[i][j] += w * basis[i] * basis[j];
            }
        }
    }
    solve3(m, v).map_or(0.0, |c| c[2])
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        v.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in 0..3 {
                    m[row][k] -= f * m[col][k];
                }
                v[row] -= f * v[col];
            }
        }
    }
    Some([v[0] / m[0][0], v[1] / m[1][1], v[2] / m[2][2]])
}

fn student_t_975(dof: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(1.96)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn constant_series_has_zero_error() {
        let e = Estimate::from_series(&[0.5; 1000]);
        assert_eq!(e.mean, 0.5);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn blocking_catches_autocorrelation() {
        // AR(1) with phi = 0.9: tau_int = (1 + phi) / (2 (1 - phi)) = 9.5
        let mut rng = stream_rng(11, 0);
        let mut x = 0.0;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let e = Estimate::from_series(&series);
        assert!(e.tau > 6.0 && e.tau < 14.0, "tau = {}", e.tau);
        let naive = block_stderr(&series, 1);
        assert!(e.stderr > 3.0 * naive);
    }

    #[test]
    fn merge_is_count_weighted() {
        let a = Estimate { mean: 1.0, stderr: 0.1, tau: 1.0, samples: 100 };
        let b = Estimate { mean: 2.0, stderr: 0.2, tau: 1.0, samples: 300 };
        let m = Estimate::merge(&[a, b]);
        assert!((m.mean - 1.75).abs() < 1e-15);
        let expect = ((100.0f64 * 0.1).powi(2) + (300.0f64 * 0.2).powi(2)).sqrt() / 400.0;
        assert!((m.stderr - expect).abs() < 1e-15);
        assert_eq!(m.samples, 400);
    }

    #[test]
    fn jackknife_of_a_mean_is_the_standard_error() {
        let data: Vec<f64> = (0..32).map(|i| (i * 7 % 11) as f64).collect();
        let blocks: Vec<Vec<f64>> = data.iter().map(|&x| vec![x, 1.0]).collect();
        let (v, se) = jackknife(&blocks, |t| t[0] / t[1]);
        let m = data.iter().sum::<f64>() / 32.0;
        let sd = (data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 31.0).sqrt();
        assert!((v - m).abs() < 1e-12);
        assert!((se - sd / 32f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_power_laws_fit_exactly() {
        let cube: Vec<(f64, f64, f64)> = [2.0, 4.0, 8.0, 16.0].iter().map(|&r| (r, r * r * r, 0.0)).collect();
        let f = loglog_fit(&cube).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!(!f.curvature_flagged);
        let flat: Vec<(f64, f64, f64)> = [3.0, 5.0, 7.0, 9.0].iter().map(|&r| (r, 4.2, 0.0)).collect();
        assert!(loglog_fit(&flat).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn fit_preconditions() {
        let few = [(1.0, 1.0, 0.0), (2.0, 1.0, 0.0), (4.0, 1.0, 0.0)];
        assert!(loglog_fit(&few).is_err());
        let narrow: Vec<(f64, f64, f64)> = [10.0, 11.0, 12.0, 13.0].iter().map(|&r| (r, r, 0.0)).collect();
        assert!(loglog_fit(&narrow).is_err());
        let negative = [(1.0, 1.0, 0.0), (2.0, -1.0, 0.0), (4.0, 1.0, 0.0), (8.0, 1.0, 0.0)];
        assert!(loglog_fit(&negative).is_err());
    }
}
