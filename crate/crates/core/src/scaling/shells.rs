//! Exact lattice-point counts in Euclidean shells and uniform sampling
//! from them, via representation counts `r_j(n)` of `n` as a sum of `j`
//! squares.

use rand::Rng as _;

use super::sphere::isqrt_floor;
use crate::rng::Rng;

pub struct LatticeShells {
    d: usize,
    max: usize,
    reps: Vec<Vec<u128>>,
    cumulative: Vec<u128>,
}

impl LatticeShells {
    /// Tables for `|u|² <= max` in dimension `d`.
    pub fn new(d: usize, max: usize) -> Self {
        let mut reps = vec![vec![0u128; max + 1]];
        reps[0][0] = 1;
        for j in 1..=d {
            let prev = &reps[j - 1];
            let mut cur = vec![0u128; max + 1];
            for (n, slot) in cur.iter_mut().enumerate() {
                let mut acc = prev[n];
                let mut t = 1usize;
                while t * t <= n {
                    acc += 2 * prev[n - t * t];
                    t += 1;
                }
                *slot = acc;
            }
            reps.push(cur);
        }
        let mut cumulative = vec![0u128; max + 2];
        for n in 0..=max {
            cumulative[n + 1] = cumulative[n] + reps[d][n];
        }
        LatticeShells {
            d,
            max,
            reps,
            cumulative,
        }
    }

    pub fn max_norm2(&self) -> usize {
        self.max
    }

    /// `r_d(n)`.
    pub fn representations(&self, n: usize) -> u128 {
        self.reps[self.d][n]
    }

    /// Points with `lo <= |u|² < hi`.
    pub fn count(&self, lo: usize, hi: usize) -> u128 {
        let hi = hi.min(self.max + 1);
        if lo >= hi {
            0
        } else {
            self.cumulative[hi] - self.cumulative[lo]
        }
    }

    /// Uniform point with `lo <= |u|² < hi`; the shell must be nonempty.
    pub fn sample(&self, lo: usize, hi: usize, rng: &mut Rng) -> Vec<i64> {
        let hi = hi.min(self.max + 1);
        let k = rng.random_range(self.cumulative[lo]..self.cumulative[hi]);
        let n = self.cumulative.partition_point(|&c| c <= k) - 1;
        self.sample_norm2(n, rng)
    }

    /// Uniform point with `|u|² = n`.
    pub fn sample_norm2(&self, n: usize, rng: &mut Rng) -> Vec<i64> {
        let mut u = Vec::with_capacity(self.d);
        let mut m = n;
        for j in (1..=self.d).rev() {
            let total = self.reps[j][m];
            let mut k = rng.random_range(0..total);
            let top = isqrt_floor(m as f64).unwrap_or(0) as usize;
            let mut chosen = 0i64;
            for t in 0..=top {
                let w = self.reps[j - 1][m - t * t] * if t == 0 { 1 } else { 2 };
                if k < w {
                    chosen = if t > 0 && k >= w / 2 { -(t as i64) } else { t as i64 };
                    break;
                }
                k -= w;
            }
            u.push(chosen);
            m -= (chosen * chosen) as usize;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use std::collections::HashMap;

    #[test]
    fn counts_match_enumeration() {
        let s = LatticeShells::new(3, 30);
        let mut brute = vec![0u128; 31];
        for x in -6i64..=6 {
            for y in -6i64..=6 {
                for z in -6i64..=6 {
                    let n = (x * x + y * y + z * z) as usize;
                    if n <= 30 {
                        brute[n] += 1;
                    }
                }
            }
        }
        for n in 0..=30 {
            assert_eq!(s.representations(n), brute[n], "n={n}");
        }
        assert_eq!(s.count(0, 31), brute.iter().sum::<u128>());
        assert_eq!(LatticeShells::new(4, 5).representations(1), 8);
    }

    #[test]
    fn sampling_is_uniform_on_a_shell() {
        let s = LatticeShells::new(2, 30);
        let mut rng = stream_rng(4, 0);
        let mut seen: HashMap<Vec<i64>, u32> = HashMap::new();
        let total = s.count(20, 26) as u32;
        let draws = 2000 * total;
        for _ in 0..draws {
            let u = s.sample(20, 26, &mut rng);
            let n = (u[0] * u[0] + u[1] * u[1]) as usize;
            assert!((20..26).contains(&n));
            *seen.entry(u).or_default() += 1;
        }
        assert_eq!(seen.len() as u32, total);
        for &c in seen.values() {
            assert!((c as f64 - 2000.0).abs() < 5.0 * 2000f64.sqrt(), "{c}");
        }
    }
}
