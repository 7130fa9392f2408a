//! Analytic bound on the u-sum beyond the truncation radius.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Surface area of the unit sphere in R^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Upper bound for `Σ_{|u| > u_max} |u|^{-a} S(u)² w(u)` where
/// `S(u) <= n_boundary (|u| - r - 1)^{-a}` and `w(u) <= (|u| - r - 1)^{-p}`;
/// infinite when `u_max` is too close to `r`.
///
/// Each unit cube around a lattice point `u` lies in `|z| <= |u| + h` with
/// `h = √d / 2`, so the sum is at most
/// `ω_d ∫_{u_max - h}^∞ f(ρ - h) ρ^{d-1} dρ` for the decreasing profile `f`.
pub fn tail_bound(d: usize, a: f64, p: f64, r: f64, n_boundary: f64, u_max: f64) -> Result<f64> {
    let decay = 3.0 * a + p - d as f64;
    if decay <= 0.0 {
        return Err(Error::Divergent(format!(
            "the u-sum tail decays like ρ^{{{:.2}}}; no finite bound",
            -decay - 1.0
        )));
    }
    let h = (d as f64).sqrt() / 2.0;
    let start = u_max - 2.0 * h - r - 1.0;
    if start <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let c = r + 1.0;
    let f = |s: f64| {
        let rho = s + c;
        rho.powf(-a) * s.powf(-2.0 * a - p) * (s + c + h).powf(d as f64 - 1.0)
    };
    let mut total = 0.0;
    let mut lo = start;
    for _ in 0..80 {
        let hi = 2.0 * lo;
        total += simpson(&f, lo, hi, 32);
        lo = hi;
    }
    // f(s) <= C s^{-(1 + decay)} beyond lo, with C read off at lo.
    let remainder = f(lo) * lo / decay;
    Ok(unit_sphere_area(d) * n_boundary * n_boundary * (total + remainder))
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
