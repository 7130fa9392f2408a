//! `∂V_r` for the Euclidean ball of Z^d with nearest-neighbour bonds,
//! handled implicitly through column intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::symmetry::{orbit, orbit_size};

/// `∂V_r = {y : |y| > r, some neighbour of y has norm at most r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    d: usize,
    r: f64,
}

/// Largest `s >= 0` with `s² <= b`, or `None` when `b < 0`.
pub(crate) fn isqrt_floor(b: f64) -> Option<i64> {
    if b < 0.0 {
        return None;
    }
    let mut s = b.sqrt().floor() as i64;
    while (s * s) as f64 > b {
        s -= 1;
    }
    while ((s + 1) * (s + 1)) as f64 <= b {
        s += 1;
    }
    Some(s)
}

impl Sphere {
    pub fn new(d: usize, r: f64) -> Result<Self> {
        if d == 0 || d > 16 {
            return Err(Error::InvalidArgument(format!("dimension {d} outside 1..=16")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidRadii { inner: r, outer: f64::INFINITY });
        }
        Ok(Sphere { d, r })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    fn r2(&self) -> f64 {
        self.r * self.r
    }

    /// Bound on every coordinate of a boundary point.
    pub fn extent(&self) -> i64 {
        self.r.floor() as i64 + 1
    }

    pub fn contains(&self, y: &[i64]) -> bool {
        let q: i64 = y.iter().map(|v| v * v).sum();
        let m = y.iter().map(|v| v.abs()).max().unwrap_or(0);
        q as f64 > self.r2() && (q - 2 * m + 1) as f64 <= self.r2()
    }

    /// Values `t = |y_d|` with `(c, ±t) ∈ ∂V_r`, as an inclusive range.
    /// `c` holds the first `d - 1` coordinates.
    pub fn fiber(&self, c: &[i64]) -> Option<(i64, i64)> {
        let q: i64 = c.iter().map(|v| v * v).sum();
        let m = c.iter().map(|v| v.abs()).max().unwrap_or(0);
        let b = self.r2() - q as f64;
        let lo = match isqrt_floor(b) {
            None => 0,
            Some(s) => s + 1,
        };
        let hi = match isqrt_floor(b) {
            Some(s) if m <= s + 1 => s + 1,
            _ => {
                let s = isqrt_floor(b + (2 * m - 1) as f64)?;
                s.min(m)
            },
        };
        (lo <= hi).then_some((lo, hi))
    }

    /// Canonical classes (coordinates nonnegative, decreasing) with orbit sizes.
    pub fn classes(&self) -> Vec<(Vec<i64>, u64)> {
        let mut out = Vec::new();
        let mut x = vec![0i64; self.d];
        for top in 0..=self.extent() {
            x[0] = top;
            self.descend(&mut x, 1, top * top, top, &mut out);
        }
        out
    }

    fn descend(&self, x: &mut Vec<i64>, k: usize, q: i64, top: i64, out: &mut Vec<(Vec<i64>, u64)>) {
        if (q - 2 * top + 1) as f64 > self.r2() {
            return;
        }
        if k == self.d {
            if q as f64 > self.r2() {
                let class: Vec<u32> = x.iter().map(|&v| v as u32).collect();
                out.push((x.clone(), orbit_size(&class)));
            }
            return;
        }
        let cap = x[k - 1];
        if (q + (self.d - k) as i64 * cap * cap) as f64 <= self.r2() {
            return;
        }
        for v in 0..=cap {
            x[k] = v;
            self.descend(x, k + 1, q + v * v, top, out);
        }
        x[k] = 0;
    }

    /// `|∂V_r|`.
    pub fn count(&self) -> u64 {
        self.classes().iter().map(|c| c.1).sum()
    }

    /// Every boundary point, in lexicographic order.
    pub fn points(&self) -> Vec<Vec<i64>> {
        let mut pts: Vec<Vec<i64>> = self.classes().iter().flat_map(|(x, _)| orbit(x)).collect();
        pts.sort();
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_ball, CouplingSpec, Norm};

    fn brute(d: usize, r: f64) -> Vec<Vec<i64>> {
        let e = r.floor() as i64 + 2;
        let mut out = Vec::new();
        let mut x = vec![-e; d];
        loop {
            let q: i64 = x.iter().map(|v| v * v).sum();
            if q as f64 > r * r {
                let inside = (0..d).any(|i| {
                    [-1, 1].iter().any(|s| {
                        let mut y = x.clone();
                        y[i] += s;
                        (y.iter().map(|v| v * v).sum::<i64>() as f64) <= r * r
                    })
                });
                if inside {
                    out.push(x.clone());
                }
            }
            let mut k = 0;
            while k < d {
                if x[k] < e {
                    x[k] += 1;
                    break;
                }
                x[k] = -e;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        out.sort();
        out
    }

    #[test]
    fn boundary_matches_brute_force_and_fibers() {
        for d in 1..=4 {
            for r in [0.0, 0.5, 1.0, 1.5, 2.0, 2.7, 3.0, 4.2] {
                let s = Sphere::new(d, r).unwrap();
                let b = brute(d, r);
                assert_eq!(s.points(), b, "d={d} r={r}");
                assert_eq!(s.count() as usize, b.len());
                assert!(b.iter().all(|y| s.contains(y)));
                let mut from_fibers = Vec::new();
                let e = s.extent();
                let mut c = vec![-e; d - 1];
                loop {
                    if let Some((lo, hi)) = s.fiber(&c) {
                        for t in lo..=hi {
                            for z in if t == 0 { vec![0] } else { vec![-t, t] } {
                                let mut y = c.clone();
                                y.push(z);
                                from_fibers.push(y);
                            }
                        }
                    }
                    let mut k = 0;
                    while k + 1 < d {
                        if c[k] < e {
                            c[k] += 1;
                            break;
                        }
                        c[k] = -e;
                        k += 1;
                    }
                    if k + 1 >= d {
                        break;
                    }
                }
                from_fibers.sort();
                assert_eq!(from_fibers, b, "fibers d={d} r={r}");
            }
        }
    }

    #[test]
    fn agrees_with_ball_geometry() {
        let c = CouplingSpec::nearest_neighbor(3, 1.0, 0.1).unwrap();
        let g = build_ball(&c, 5.0, 3.5, Norm::Euclidean).unwrap();
        let mut from_ball: Vec<Vec<i64>> = g.boundary().iter().map(|&v| g.vertices()[v].clone()).collect();
        from_ball.sort();
        assert_eq!(Sphere::new(3, 3.5).unwrap().points(), from_ball);
    }

    #[test]
    fn unit_sphere_in_five_dimensions() {
        assert_eq!(Sphere::new(5, 0.0).unwrap().count(), 10);
        assert_eq!(Sphere::new(5, 1.0).unwrap().count(), 50);
    }
}
