//! `S(u) = Σ_{y∈∂V_r} G(u - y)`, exactly or by sampling columns.
//!
//! Columns (the first `d - 1` coordinates) are grouped by their sup-distance
//! from the projection of `u`: the column of `u` itself, then the dyadic
//! bands `[2^{k-1}, 2^k - 1]`. Each band is summed exactly when it has at
//! most `columns` members and otherwise estimated from `columns` uniform
//! draws; along every column the boundary interval is summed exactly.

use rand::Rng as _;

use super::sphere::Sphere;
use super::PowerLawKernel;
use crate::rng::Rng;

pub(crate) struct FieldSampler<'a> {
    pub sphere: &'a Sphere,
    pub kernel: &'a PowerLawKernel,
    pub columns: usize,
}

/// An axis-aligned box of columns, inclusive bounds.
#[derive(Clone, Debug)]
struct ColumnBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl ColumnBox {
    fn size(&self) -> u128 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| if b < a { 0 } else { (b - a + 1) as u128 })
            .product()
    }
}

impl FieldSampler<'_> {
    /// Exact `S(u)` from the list of boundary points.
    pub fn exact(&self, u: &[i64], points: &[Vec<i64>]) -> f64 {
        points
            .iter()
            .map(|y| {
                let q: i64 = u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                self.kernel.at_norm2(q as f64)
            })
            .sum()
    }

    /// Sum of `G(u - y)` over the boundary points in column `c`.
    fn column_sum(&self, u: &[i64], c: &[i64]) -> f64 {
        let Some((lo, hi)) = self.sphere.fiber(c) else {
            return 0.0;
        };
        let q: i64 = c.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
        let ud = u[u.len() - 1];
        let mut s = 0.0;
        for t in lo..=hi {
            let dz = t - ud;
            s += self.kernel.at_norm2((q + dz * dz) as f64);
            if t > 0 {
                let dz = t + ud;
                s += self.kernel.at_norm2((q + dz * dz) as f64);
            }
        }
        s
    }

    /// Unbiased estimate of `S(u)`.
    pub fn estimate(&self, u: &[i64], rng: &mut Rng) -> f64 {
        let p = u.len() - 1;
        let e = self.sphere.extent();
        let base = &u[..p];
        let mut total = if base.iter().all(|v| v.abs() <= e) {
            self.column_sum(u, base)
        } else {
            0.0
        };
        if p == 0 {
            return total;
        }
        let reach = base.iter().map(|v| v.abs() + e).max().unwrap_or(0);
        let mut k = 1u32;
        loop {
            let lo = 1i64 << (k - 1);
            if lo > reach {
                break;
            }
            let hi = (1i64 << k) - 1;
            let boxes = band_boxes(base, lo, hi, e);
            let sizes: Vec<u128> = boxes.iter().map(ColumnBox::size).collect();
            let count: u128 = sizes.iter().sum();
            if count > 0 {
                total += if count <= self.columns as u128 {
                    let mut s = 0.0;
                    let mut c = vec![0i64; p];
                    for b in &boxes {
                        for_each_column(b, &mut c, &mut |c| s += self.column_sum(u, c));
                    }
                    s
                } else {
                    let mut s = 0.0;
                    let mut c = vec![0i64; p];
                    for _ in 0..self.columns {
                        let mut pick = rng.random_range(0..count);
                        let mut i = 0;
                        while pick >= sizes[i] {
                            pick -= sizes[i];
                            i += 1;
                        }
                        for (j, slot) in c.iter_mut().enumerate() {
                            *slot = rng.random_range(boxes[i].lo[j]..=boxes[i].hi[j]);
                        }
                        s += self.column_sum(u, &c);
                    }
                    s * count as f64 / self.columns as f64
                };
            }
            k += 1;
        }
        total
    }
}

/// Columns `c` with `lo <= |c - base|_∞ <= hi` and `|c|_∞ <= e`, as disjoint boxes.
fn band_boxes(base: &[i64], lo: i64, hi: i64, e: i64) -> Vec<ColumnBox> {
    let p = base.len();
    let outer_lo: Vec<i64> = base.iter().map(|b| (b - hi).max(-e)).collect();
    let outer_hi: Vec<i64> = base.iter().map(|b| (b + hi).min(e)).collect();
    let inner_lo: Vec<i64> = base.iter().map(|b| (b - lo + 1).max(-e)).collect();
    let inner_hi: Vec<i64> = base.iter().map(|b| (b + lo - 1).min(e)).collect();
    if (0..p).any(|j| outer_lo[j] > outer_hi[j]) {
        return Vec::new();
    }
    if (0..p).any(|j| inner_lo[j] > inner_hi[j]) {
        return vec![ColumnBox {
            lo: outer_lo,
            hi: outer_hi,
        }];
    }
    let mut out = Vec::new();
    for i in 0..p {
        let mut below = ColumnBox {
            lo: outer_lo.clone(),
            hi: outer_hi.clone(),
        };
        for j in 0..i {
            below.lo[j] = inner_lo[j];
            below.hi[j] = inner_hi[j];
        }
        let mut above = below.clone();
        below.hi[i] = inner_lo[i] - 1;
        above.lo[i] = inner_hi[i] + 1;
        for b in [below, above] {
            if b.size() > 0 {
                out.push(b);
            }
        }
    }
    out
}

fn for_each_column(b: &ColumnBox, c: &mut [i64], f: &mut impl FnMut(&[i64])) {
    if b.size() == 0 {
        return;
    }
    c.copy_from_slice(&b.lo);
    loop {
        f(c);
        let mut j = 0;
        while j < c.len() {
            if c[j] < b.hi[j] {
                c[j] += 1;
                break;
            }
            c[j] = b.lo[j];
            j += 1;
        }
        if j == c.len() {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn bands_partition_the_column_box() {
        let base = [3i64, -1, 0];
        let e = 4;
        let mut seen = std::collections::HashMap::new();
        let mut c = vec![0i64; 3];
        let mut k = 1;
        while (1i64 << (k - 1)) <= 8 {
            for b in band_boxes(&base, 1 << (k - 1), (1 << k) - 1, e) {
                for_each_column(&b, &mut c, &mut |c| *seen.entry(c.to_vec()).or_insert(0) += 1);
            }
            k += 1;
        }
        assert_eq!(seen.len(), 9 * 9 * 9 - 1);
        assert!(seen.values().all(|&n| n == 1));
        assert!(!seen.contains_key(&base.to_vec()));
    }

    #[test]
    fn estimate_is_unbiased() {
        for (d, r, u) in [(3, 4.0, vec![1i64, 2, -3]), (4, 3.5, vec![0, 0, 0, 0]), (5, 3.0, vec![6, 1, 0, 0, 2]), (2, 5.0, vec![5, 1])] {
            let sphere = Sphere::new(d, r).unwrap();
            let kernel = PowerLawKernel::new(d);
            let f = FieldSampler {
                sphere: &sphere,
                kernel: &kernel,
                columns: 4,
            };
            let exact = f.exact(&u, &sphere.points());
            let mut rng = stream_rng(9, d as u64);
            let n = 4000;
            let xs: Vec<f64> = (0..n).map(|_| f.estimate(&u, &mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            assert!((m - exact).abs() < 4.0 * sd / (n as f64).sqrt() + 1e-12, "d={d} {m} vs {exact} sd {sd}");
            let all = FieldSampler { columns: usize::MAX, ..f };
            assert!((all.estimate(&u, &mut rng) - exact).abs() < 1e-9 * exact);
        }
    }
}
