//! The numerator, the two denominator terms and the assembled lower bounds.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::field::FieldSampler;
use super::shells::LatticeShells;
use super::sphere::Sphere;
use super::tail::tail_bound;
use super::{ArmWeight, PowerLawKernel, ScalingBudget, SumEstimate, SumMode};
use crate::error::{Error, Result};
use crate::exact::CompensatedSum;
use crate::exec::Exec;
use crate::lattice::symmetry::orbit_size;
use crate::rng::{stream_rng, Rng};

const TERM1_STREAM: u64 = 1 << 40;
const PILOT_STREAM: u64 = 2 << 40;
const MAIN_STREAM: u64 = 3 << 40;
const TERM1_CHUNKS: usize = 16;

fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

fn check(kernel: &PowerLawKernel, sphere: &Sphere) -> Result<()> {
    if kernel.dimension != sphere.dimension() {
        return Err(Error::InvalidArgument(format!(
            "kernel dimension {} against sphere dimension {}",
            kernel.dimension,
            sphere.dimension()
        )));
    }
    Ok(())
}

/// `Σ_{x∈∂V_r} G(x)`, exact.
pub fn boundary_sum(kernel: &PowerLawKernel, sphere: &Sphere) -> Result<SumEstimate> {
    check(kernel, sphere)?;
    let classes = sphere.classes();
    let n: u64 = classes.iter().map(|c| c.1).sum();
    let value = ksum(classes.iter().map(|(x, m)| *m as f64 * kernel.at(x)));
    Ok(SumEstimate::exact(value, n as u128))
}

/// `(Σ_{x∈∂V_r} G(x))²`, exact.
pub fn numerator_sum(kernel: &PowerLawKernel, sphere: &Sphere) -> Result<SumEstimate> {
    let s = boundary_sum(kernel, sphere)?;
    Ok(SumEstimate::exact(s.value * s.value, s.terms * s.terms))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = ksum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = ksum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `Σ_{x,y∈∂V_r} G(x) G(x - y)`: exact when `|∂V_r|²` fits the budget,
/// otherwise `x` uniform on the boundary with sampled `S(x)`.
pub fn denominator_term1(
    kernel: &PowerLawKernel,
    sphere: &Sphere,
    budget: &ScalingBudget,
    exec: Exec,
) -> Result<SumEstimate> {
    check(kernel, sphere)?;
    let classes = sphere.classes();
    let n: u64 = classes.iter().map(|c| c.1).sum();
    let terms = n as u128 * n as u128;
    if terms <= budget.exact_terms {
        let points = sphere.points();
        let f = FieldSampler {
            sphere,
            kernel,
            columns: usize::MAX,
        };
        let parts = exec.map_slice(&classes, |(x, m)| *m as f64 * kernel.at(x) * f.exact(x, &points));
        return Ok(SumEstimate::exact(ksum(parts), terms));
    }
    if budget.x_samples < 2 {
        return Err(Error::InvalidArgument("need at least two boundary draws".into()));
    }
    let mut cumulative = Vec::with_capacity(classes.len());
    let mut acc = 0u64;
    for (_, m) in &classes {
        acc += m;
        cumulative.push(acc);
    }
    let f = FieldSampler {
        sphere,
        kernel,
        columns: budget.columns,
    };
    let per = budget.x_samples.div_ceil(TERM1_CHUNKS);
    let draws: Vec<Vec<f64>> = exec.map_range(TERM1_CHUNKS, |chunk| {
        let mut rng = stream_rng(budget.seed, TERM1_STREAM + chunk as u64);
        (0..per)
            .map(|_| {
                let k = rng.random_range(0..n);
                let x = &classes[cumulative.partition_point(|&c| c <= k)].0;
                kernel.at(x) * f.estimate(x, &mut rng)
            })
            .collect()
    });
    let all: Vec<f64> = draws.into_iter().flatten().collect();
    let (m, se) = mean_and_stderr(&all);
    Ok(SumEstimate {
        value: n as f64 * m,
        mode: SumMode::StratifiedSampled,
        stderr: n as f64 * se,
        tail_bound: 0.0,
        terms,
        samples: all.len() as u64,
    })
}

/// The u-sum split by `|u|`: (i) `|u| < r/2`, (ii) `r/2 <= |u| < 3r/2`,
/// (iii) `|u| >= 3r/2`, truncated at `U_max`; the tail bound sits on case
/// (iii) and on the total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term2 {
    pub total: SumEstimate,
    pub case_i: SumEstimate,
    pub case_ii: SumEstimate,
    pub case_iii: SumEstimate,
    pub u_max: f64,
}

#[derive(Clone, Copy, Debug)]
struct Stratum {
    lo: usize,
    hi: usize,
    case: usize,
    count: u128,
}

/// Integer `n` with `|u|² < ρ²` iff `|u|² < n`.
fn norm2_edge(rho: f64) -> usize {
    (rho * rho).ceil() as usize
}

fn strata(r: f64, u_max: f64, shells: &LatticeShells) -> Vec<Stratum> {
    let mut radii: Vec<(f64, usize)> = vec![(0.0, 0)];
    let mut rho = 1.0;
    while rho < r / 2.0 {
        radii.push((rho, 0));
        rho *= 1.5;
    }
    radii.push((r / 2.0, 1));
    let mut below = Vec::new();
    let mut delta = 1.0;
    while delta < r / 2.0 {
        below.push((r - delta, 1));
        delta *= 2.0;
    }
    below.reverse();
    radii.extend(below);
    radii.push((r, 1));
    let mut delta = 1.0;
    while delta < r / 2.0 {
        radii.push((r + delta, 1));
        delta *= 2.0;
    }
    radii.push((1.5 * r, 2));
    let mut rho = 1.5 * r * 1.5;
    while rho < u_max {
        radii.push((rho, 2));
        rho *= 1.5;
    }
    let top = (u_max * u_max).floor() as usize + 1;
    let mut edges: Vec<(usize, usize)> = radii.iter().map(|&(rho, c)| (norm2_edge(rho).min(top), c)).collect();
    edges.push((top, 2));
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let (lo, case) = w[0];
        let hi = w[1].0;
        if hi > lo {
            let count = shells.count(lo, hi);
            if count > 0 {
                out.push(Stratum { lo, hi, case, count });
            }
        }
    }
    out
}

fn case_of(q: usize, r: f64) -> usize {
    if q < norm2_edge(r / 2.0) {
        0
    } else if q < norm2_edge(1.5 * r) {
        1
    } else {
        2
    }
}

/// `Σ_u G(u) S(u)² w(u)` over `|u| <= U_max`, split by case.
fn u_sum(
    kernel: &PowerLawKernel,
    sphere: &Sphere,
    arm: &ArmWeight,
    budget: &ScalingBudget,
    exec: Exec,
) -> Result<Term2> {
    check(kernel, sphere)?;
    let r = sphere.radius();
    let d = sphere.dimension();
    let factor = if budget.u_max_factor.is_finite() {
        budget.u_max_factor
    } else if arm.epsilon.is_some_and(|e| e > 0.0) {
        8.0
    } else {
        return Err(Error::Divergent(
            "an untruncated u-sum needs an arm weight with ε > 0".into(),
        ));
    };
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument(format!("U_max factor {factor} must be positive")));
    }
    let u_max = factor * r.max(1.0);
    let classes = sphere.classes();
    let n_boundary: u64 = classes.iter().map(|c| c.1).sum();
    let n2 = n_boundary as u128 * n_boundary as u128;
    let shells = LatticeShells::new(d, (u_max * u_max).floor() as usize);
    let u_count = shells.count(0, shells.max_norm2() + 1);
    let symmetry = (1u128 << d) * (1..=d as u128).product::<u128>();
    let tail = match tail_bound(d, kernel.decay(), arm.power(), r, n_boundary as f64, u_max) {
        Ok(b) => b,
        Err(Error::Divergent(msg)) => {
            log::warn!("{msg}; reporting an infinite tail");
            f64::INFINITY
        }
        Err(e) => return Err(e),
    };
    let mut cases = [SumEstimate::exact(0.0, 0); 3];
    let exact_work = (u_count / symmetry + 1) * n_boundary as u128;
    if exact_work <= budget.exact_terms {
        let points = sphere.points();
        let f = FieldSampler {
            sphere,
            kernel,
            columns: usize::MAX,
        };
        let reps = ball_classes(d, shells.max_norm2());
        let parts = exec.map_slice(&reps, |(u, m)| {
            let s = f.exact(u, &points);
            *m as f64 * kernel.at(u) * s * s * arm.weight(sphere, u)
        });
        let mut sums = [Vec::new(), Vec::new(), Vec::new()];
        let mut counts = [0u128; 3];
        for ((u, m), v) in reps.iter().zip(parts) {
            let q = u.iter().map(|x| x * x).sum::<i64>() as usize;
            let c = case_of(q, r);
            sums[c].push(v);
            counts[c] += *m as u128;
        }
        for c in 0..3 {
            cases[c] = SumEstimate::exact(ksum(sums[c].iter().copied()), counts[c] * n2);
        }
    } else {
        let strata = strata(r, u_max, &shells);
        let f = FieldSampler {
            sphere,
            kernel,
            columns: budget.columns,
        };
        let draw = |s: &Stratum, rng: &mut Rng| {
            let u = shells.sample(s.lo, s.hi, rng);
            let a = f.estimate(&u, rng);
            let b = f.estimate(&u, rng);
            kernel.at(&u) * a * b * arm.weight(sphere, &u)
        };
        let h = strata.len();
        let pilot_n = (budget.u_samples / (5 * h)).max(8);
        let pilot = exec.map_range(h, |i| {
            let mut rng = stream_rng(budget.seed, PILOT_STREAM + i as u64);
            let xs: Vec<f64> = (0..pilot_n).map(|_| draw(&strata[i], &mut rng)).collect();
            let (m, se) = mean_and_stderr(&xs);
            (m, se * (pilot_n as f64).sqrt())
        });
        let mass: Vec<f64> = strata
            .iter()
            .zip(&pilot)
            .map(|(s, &(m, sd))| s.count as f64 * if sd > 0.0 { sd } else { 0.1 * m.abs() })
            .collect();
        let mut case_mass = [0.0f64; 3];
        let mut case_strata = [0usize; 3];
        for (s, w) in strata.iter().zip(&mass) {
            case_mass[s.case] += w;
            case_strata[s.case] += 1;
        }
        let live = case_strata.iter().filter(|&&n| n > 0).count().max(1);
        let per_case = budget.u_samples as f64 / live as f64;
        let alloc: Vec<usize> = strata
            .iter()
            .zip(&mass)
            .map(|(s, &w)| {
                let share = if case_mass[s.case] > 0.0 {
                    w / case_mass[s.case]
                } else {
                    1.0 / case_strata[s.case] as f64
                };
                ((share * per_case).round() as usize).max(4)
            })
            .collect();
        let main = exec.map_range(h, |i| {
            let mut rng = stream_rng(budget.seed, MAIN_STREAM + i as u64);
            let xs: Vec<f64> = (0..alloc[i]).map(|_| draw(&strata[i], &mut rng)).collect();
            mean_and_stderr(&xs)
        });
        let mut values = [Vec::new(), Vec::new(), Vec::new()];
        let mut vars = [0.0f64; 3];
        let mut counts = [0u128; 3];
        let mut samples = [0u64; 3];
        for (i, s) in strata.iter().enumerate() {
            let (m, se) = main[i];
            let c = s.case;
            values[c].push(s.count as f64 * m);
            vars[c] += (s.count as f64 * se).powi(2);
            counts[c] += s.count;
            samples[c] += (alloc[i] + pilot_n) as u64;
        }
        for c in 0..3 {
            cases[c] = SumEstimate {
                value: ksum(values[c].iter().copied()),
                mode: SumMode::StratifiedSampled,
                stderr: vars[c].sqrt(),
                tail_bound: 0.0,
                terms: counts[c] * n2,
                samples: samples[c],
            };
        }
    }
    cases[2].tail_bound = tail;
    let total = cases[0].add(&cases[1]).add(&cases[2]);
    Ok(Term2 {
        total,
        case_i: cases[0],
        case_ii: cases[1],
        case_iii: cases[2],
        u_max,
    })
}

/// Canonical classes of `{u : |u|² <= max}` with orbit sizes.
fn ball_classes(d: usize, max: usize) -> Vec<(Vec<i64>, u64)> {
    fn go(x: &mut Vec<i64>, k: usize, q: usize, max: usize, out: &mut Vec<(Vec<i64>, u64)>) {
        if k == x.len() {
            let class: Vec<u32> = x.iter().map(|&v| v as u32).collect();
            out.push((x.clone(), orbit_size(&class)));
            return;
        }
        let cap = if k == 0 { i64::MAX } else { x[k - 1] };
        let mut v = 0i64;
        while v <= cap && q + (v * v) as usize <= max {
            x[k] = v;
            go(x, k + 1, q + (v * v) as usize, max, out);
            v += 1;
        }
        x[k] = 0;
    }
    let mut out = Vec::new();
    go(&mut vec![0; d], 0, 0, max, &mut out);
    out
}

/// `Σ_u Σ_{x,y∈∂V_r} G(u) G(u-x) G(u-y) w(u)` with the case split.
pub fn denominator_term2(
    kernel: &PowerLawKernel,
    sphere: &Sphere,
    arm: &ArmWeight,
    budget: &ScalingBudget,
    exec: Exec,
) -> Result<Term2> {
    u_sum(kernel, sphere, arm, budget, exec)
}

fn ratio(numerator: &SumEstimate, denominator: &SumEstimate) -> SumEstimate {
    let value = numerator.value / denominator.value;
    let with_tail = numerator.value / (denominator.value + denominator.tail_bound);
    SumEstimate {
        value,
        mode: denominator.mode,
        stderr: value * denominator.relative_error(),
        tail_bound: value - with_tail,
        terms: denominator.terms,
        samples: denominator.samples,
    }
}

/// Every quantity at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub r: f64,
    /// `Σ_{x∈∂V_r} G(x)`.
    pub numerator: SumEstimate,
    pub numerator_squared: SumEstimate,
    pub term1: SumEstimate,
    pub term2: Term2,
    /// `numerator² / (term1 + term2)`.
    pub rhs: SumEstimate,
}

pub fn scaling_point(
    kernel: &PowerLawKernel,
    sphere: &Sphere,
    arm: &ArmWeight,
    budget: &ScalingBudget,
    exec: Exec,
) -> Result<ScalingPoint> {
    let numerator = boundary_sum(kernel, sphere)?;
    let numerator_squared = numerator_sum(kernel, sphere)?;
    let term1 = denominator_term1(kernel, sphere, budget, exec)?;
    let term2 = denominator_term2(kernel, sphere, arm, budget, exec)?;
    let rhs = ratio(&numerator_squared, &term1.add(&term2.total));
    Ok(ScalingPoint {
        r: sphere.radius(),
        numerator,
        numerator_squared,
        term1,
        term2,
        rhs,
    })
}

/// `numerator² / (term1 + term2)`.
pub fn rhs_lower_bound(
    kernel: &PowerLawKernel,
    sphere: &Sphere,
    arm: &ArmWeight,
    budget: &ScalingBudget,
    exec: Exec,
) -> Result<SumEstimate> {
    Ok(scaling_point(kernel, sphere, arm, budget, exec)?.rhs)
}

/// `(Σ_x G(x))² / Σ_u Σ_{x,y} G(u) G(u-x) G(u-y)`, the percolation analogue.
pub fn perc_rhs_bound(
    kernel: &PowerLawKernel,
    sphere: &Sphere,
    budget: &ScalingBudget,
    exec: Exec,
) -> Result<SumEstimate> {
    let numerator = numerator_sum(kernel, sphere)?;
    let denominator = u_sum(kernel, sphere, &ArmWeight::constant(), budget, exec)?;
    Ok(ratio(&numerator, &denominator.total))
}
