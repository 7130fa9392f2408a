//! Lattice sums with power-law two-point inputs on Z^d.
//!
//! The geometry is the Euclidean ball of radius `r` with nearest-neighbour
//! bonds, and `∂V_r` is never stored: boundary points are generated column
//! by column (see [`Sphere`]).

mod field;
mod shells;
mod sphere;
mod sums;
mod tail;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DistanceMode;
use crate::stats::{loglog_fit, FitResult};

pub use shells::LatticeShells;
pub use sphere::Sphere;
pub use sums::{
    boundary_sum, denominator_term1, denominator_term2, numerator_sum, perc_rhs_bound, rhs_lower_bound, scaling_point,
    ScalingPoint, Term2,
};
pub use tail::{tail_bound, unit_sphere_area};

/// `G(x) = ⦀x⦀^exponent` with `⦀x⦀ = max(|x|, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawKernel {
    pub dimension: usize,
    pub exponent: f64,
}

impl PowerLawKernel {
    /// The mean-field kernel `⦀x⦀^{2-d}`.
    pub fn new(dimension: usize) -> Self {
        PowerLawKernel {
            dimension,
            exponent: 2.0 - dimension as f64,
        }
    }

    pub fn with_exponent(dimension: usize, exponent: f64) -> Self {
        PowerLawKernel { dimension, exponent }
    }

    pub fn at(&self, x: &[i64]) -> f64 {
        self.at_norm2(x.iter().map(|v| v * v).sum::<i64>() as f64)
    }

    /// `G` at a point of squared norm `q`.
    pub fn at_norm2(&self, q: f64) -> f64 {
        if q <= 1.0 || self.exponent == 0.0 {
            return 1.0;
        }
        let e = self.exponent;
        if e.fract() == 0.0 && e.abs() < 64.0 {
            q.sqrt().powi(e as i32)
        } else {
            q.powf(0.5 * e)
        }
    }

    /// `a` in `G(x) = |x|^{-a}`, required positive for the far-field bounds.
    fn decay(&self) -> f64 {
        -self.exponent
    }
}

/// `min(1, dist(u)^{-(1+ε)})`; `epsilon = None` is the constant weight 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmWeight {
    pub epsilon: Option<f64>,
    pub mode: DistanceMode,
}

impl ArmWeight {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("ε = {epsilon} must be finite and nonnegative")));
        }
        Ok(ArmWeight {
            epsilon: Some(epsilon),
            mode: DistanceMode::Radial,
        })
    }

    pub fn constant() -> Self {
        ArmWeight {
            epsilon: None,
            mode: DistanceMode::Radial,
        }
    }

    pub fn with_mode(mut self, mode: DistanceMode) -> Self {
        self.mode = mode;
        self
    }

    /// Decay exponent `1 + ε`, zero for the constant weight.
    pub fn power(&self) -> f64 {
        self.epsilon.map_or(0.0, |e| 1.0 + e)
    }

    pub fn weight(&self, sphere: &Sphere, u: &[i64]) -> f64 {
        let Some(eps) = self.epsilon else {
            return 1.0;
        };
        let dist = match self.mode {
            DistanceMode::Radial => {
                let len = (u.iter().map(|v| v * v).sum::<i64>() as f64).sqrt();
                crate::lattice::radial_distance(sphere.radius(), len)
            }
            DistanceMode::Exact => nearest_boundary_distance(sphere, u),
        };
        if dist <= 1.0 {
            1.0
        } else {
            dist.powf(-(1.0 + eps))
        }
    }
}

/// Distance from `u` to `∂V_r`. A search next to the radial projection of
/// `u` gives an upper bound; the columns within that bound are then scanned.
pub fn nearest_boundary_distance(sphere: &Sphere, u: &[i64]) -> f64 {
    let d = u.len();
    let len = (u.iter().map(|v| v * v).sum::<i64>() as f64).sqrt();
    let mut best2 = ((len + sphere.radius() + 2.0).powi(2)).ceil() as i64;
    let mut y = vec![0i64; d];
    for s in [sphere.radius(), sphere.radius() + 1.0] {
        let centre: Vec<i64> = (0..d)
            .map(|k| if len == 0.0 { if k == 0 { s.round() as i64 } else { 0 } } else { (u[k] as f64 / len * s).round() as i64 })
            .collect();
        for_each_offset(d, 1, |off| {
            for k in 0..d {
                y[k] = centre[k] + off[k];
            }
            if sphere.contains(&y) {
                best2 = best2.min(y.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum());
            }
        });
    }
    let p = d - 1;
    let (base, ud) = (&u[..p], u[p]);
    let e = sphere.extent();
    let reach = (best2 as f64).sqrt().floor() as i64;
    let lo: Vec<i64> = base.iter().map(|b| (b - reach).max(-e)).collect();
    let hi: Vec<i64> = base.iter().map(|b| (b + reach).min(e)).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return (best2 as f64).sqrt();
    }
    let mut c = lo.clone();
    loop {
        let q: i64 = c.iter().zip(base).map(|(a, b)| (a - b) * (a - b)).sum();
        if q < best2 {
            if let Some((tlo, thi)) = sphere.fiber(&c) {
                for z in [ud, -ud] {
                    let t = z.clamp(tlo, thi);
                    best2 = best2.min(q + (t - z) * (t - z));
                }
            }
        }
        let mut k = 0;
        while k < p {
            if c[k] < hi[k] {
                c[k] += 1;
                break;
            }
            c[k] = lo[k];
            k += 1;
        }
        if k == p {
            break;
        }
    }
    (best2 as f64).sqrt()
}

fn for_each_offset(d: usize, reach: i64, mut f: impl FnMut(&[i64])) {
    let mut off = vec![-reach; d];
    loop {
        f(&off);
        let mut k = 0;
        while k < d {
            if off[k] < reach {
                off[k] += 1;
                break;
            }
            off[k] = -reach;
            k += 1;
        }
        if k == d {
            return;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumMode {
    Exact,
    StratifiedSampled,
}

/// A lattice sum, exact or estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumEstimate {
    pub value: f64,
    pub mode: SumMode,
    /// Zero in exact mode.
    pub stderr: f64,
    /// Bound on what truncation left out; zero when nothing was dropped.
    pub tail_bound: f64,
    /// Number of summands in the index set that was summed.
    pub terms: u128,
    /// Random draws behind a sampled value.
    pub samples: u64,
}

impl SumEstimate {
    pub fn exact(value: f64, terms: u128) -> Self {
        SumEstimate {
            value,
            mode: SumMode::Exact,
            stderr: 0.0,
            tail_bound: 0.0,
            terms,
            samples: 0,
        }
    }

    pub fn relative_error(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.stderr / self.value.abs()
        }
    }

    /// Sum of independent estimates.
    pub fn add(&self, other: &SumEstimate) -> SumEstimate {
        SumEstimate {
            value: self.value + other.value,
            mode: if self.mode == SumMode::Exact && other.mode == SumMode::Exact {
                SumMode::Exact
            } else {
                SumMode::StratifiedSampled
            },
            stderr: self.stderr.hypot(other.stderr),
            tail_bound: self.tail_bound + other.tail_bound,
            terms: self.terms + other.terms,
            samples: self.samples + other.samples,
        }
    }
}

/// Work limits and sampling parameters for the lattice sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingBudget {
    /// Largest number of kernel evaluations done exactly.
    pub exact_terms: u128,
    /// u draws for the stratified u-sum, pilot excluded.
    pub u_samples: usize,
    /// Boundary draws for the first denominator term.
    pub x_samples: usize,
    /// Column draws per band inside each `S(u)` estimate.
    pub columns: usize,
    /// `U_max = u_max_factor * r`.
    pub u_max_factor: f64,
    pub seed: u64,
}

impl Default for ScalingBudget {
    fn default() -> Self {
        ScalingBudget {
            exact_terms: 50_000_000,
            u_samples: 20_000,
            x_samples: 2_000,
            columns: 16,
            u_max_factor: 8.0,
            seed: 1,
        }
    }
}

impl ScalingBudget {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Forces sampling everywhere.
    pub fn sampled_only(mut self) -> Self {
        self.exact_terms = 0;
        self
    }
}

/// Weighted log-log fit of a series of sums against `r`.
pub fn fit_exponent(series: &[(f64, SumEstimate)]) -> Result<FitResult> {
    if series.iter().any(|(_, s)| !(s.value > 0.0)) {
        return Err(Error::InsufficientData("fit needs positive values".into()));
    }
    let pts: Vec<(f64, f64, f64)> = series.iter().map(|(r, s)| (*r, s.value, s.stderr)).collect();
    loglog_fit(&pts)
}
