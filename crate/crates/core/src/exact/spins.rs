//! Exact spin enumeration on small balls.

use super::EnumBudget;
use crate::graph::Boundary;
use crate::error::{Error, Result};
use crate::exact::sum::CompensatedSum;
use crate::graph::IsingGraph;

/// All `2^n` Boltzmann weights of the non-frozen spins of a ball.
///
/// Bit `k` of a configuration index set means spin `free[k]` is `-1`. In
/// plus mode the boundary spins are frozen to `+1` and do not get a bit.
#[derive(Clone, Debug)]
pub struct SpinEnumeration {
    free: Vec<usize>,
    bit_of: Vec<Option<usize>>,
    weights: Vec<f64>,
    z: f64,
}

impl SpinEnumeration {
    pub fn new(geometry: &IsingGraph, boundary: Boundary, budget: &EnumBudget) -> Result<Self> {
        let n = geometry.len();
        let frozen = |v: usize| boundary == Boundary::Plus && geometry.is_boundary(v);
        let free: Vec<usize> = (0..n).filter(|&v| !frozen(v)).collect();
        if free.len() > budget.spins {
            return Err(Error::EnumerationTooLarge {
                what: "spin configurations (free vertices)",
                size: free.len() as u64,
                budget: budget.spins as u64,
            });
        }
        let mut bit_of = vec![None; n];
        for (k, &v) in free.iter().enumerate() {
            bit_of[v] = Some(k);
        }
        let beta = geometry.beta();
        let h = boundary.field();
        // local field on each free spin from frozen neighbours and the boundary field
        let mut field = vec![0.0; free.len()];
        let mut all_plus = 0.0;
        for b in geometry.bonds() {
            all_plus += b.coupling;
            match (bit_of[b.u], bit_of[b.v]) {
                (Some(k), None) => field[k] += b.coupling,
                (None, Some(k)) => field[k] += b.coupling,
                _ => {}
            }
        }
        if h > 0.0 {
            for &v in geometry.boundary() {
                all_plus += h;
                if let Some(k) = bit_of[v] {
                    field[k] += h;
                }
            }
        }
        // lower-indexed free neighbours of each free spin
        let mut lower: Vec<Vec<(usize, f64)>> = vec![Vec::new(); free.len()];
        for b in geometry.bonds() {
            if let (Some(a), Some(c)) = (bit_of[b.u], bit_of[b.v]) {
                let (lo, hi) = if a < c { (a, c) } else { (c, a) };
                lower[hi].push((lo, b.coupling));
            }
        }
        let upper: Vec<f64> = (0..free.len()).map(|k| upper_sum(&free, k, geometry, &bit_of)).collect();
        let size = 1usize << free.len();
        // energy (as -H, i.e. sum J σσ + h σ) of every configuration
        let mut neg_h = vec![0.0f64; size];
        neg_h[0] = all_plus;
        for mask in 1..size {
            let k = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
            let prev = mask ^ (1 << k);
            // flipping spin k from + to - with only lower bits set in `prev`
            let mut local = field[k];
            for &(w, j) in &lower[k] {
                local += if prev >> w & 1 == 1 { -j } else { j };
            }
            // upper free neighbours are still +
            neg_h[mask] = neg_h[prev] - 2.0 * (local + upper[k]);
        }
        let norm = 0.5f64.powi(n as i32);
        let weights: Vec<f64> = neg_h.iter().map(|e| norm * (beta * e).exp()).collect();
        let z = weights.iter().copied().collect::<CompensatedSum>().value();
        Ok(SpinEnumeration {
            free,
            bit_of,
            weights,
            z,
        })
    }

    /// Partition function including the `2^{-|V_R|}` normalisation.
    pub fn partition(&self) -> f64 {
        self.z
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    /// Mask of the product over a vertex multiset, frozen spins dropped.
    pub fn product_mask(&self, vertices: &[usize]) -> usize {
        let mut mask = 0usize;
        for &v in vertices {
            if let Some(k) = self.bit_of[v] {
                mask ^= 1 << k;
            }
        }
        mask
    }

    /// `<∏ σ_v>` over a multiset of vertices.
    pub fn expectation(&self, vertices: &[usize]) -> f64 {
        let mask = self.product_mask(vertices);
        let mut s = CompensatedSum::new();
        for (cfg, &w) in self.weights.iter().enumerate() {
            if (cfg & mask).count_ones() & 1 == 1 {
                s.add(-w);
            } else {
                s.add(w);
            }
        }
        s.value() / self.z
    }

    /// Every multi-spin correlation at once (Walsh-Hadamard transform).
    pub fn correlation_table(&self) -> CorrelationTable {
        let mut t = self.weights.clone();
        let n = t.len();
        let mut h = 1;
        while h < n {
            for i in (0..n).step_by(2 * h) {
                for j in i..i + h {
                    let a = t[j];
                    let b = t[j + h];
                    t[j] = a + b;
                    t[j + h] = a - b;
                }
            }
            h *= 2;
        }
        let z = t[0];
        for x in &mut t {
            *x /= z;
        }
        CorrelationTable {
            bit_of: self.bit_of.clone(),
            values: t,
        }
    }
}

fn upper_sum(free: &[usize], k: usize, geometry: &IsingGraph, bit_of: &[Option<usize>]) -> f64 {
    let v = free[k];
    geometry
        .neighbors(v)
        .iter()
        .filter_map(|&(w, bi)| match bit_of[w] {
            Some(kw) if kw > k => Some(geometry.bonds()[bi].coupling),
            _ => None,
        })
        .sum()
}

/// `<σ_S>` for every subset `S` of the free spins.
#[derive(Clone, Debug)]
pub struct CorrelationTable {
    bit_of: Vec<Option<usize>>,
    values: Vec<f64>,
}

impl CorrelationTable {
    pub fn expect(&self, vertices: &[usize]) -> f64 {
        let mut mask = 0usize;
        for &v in vertices {
            if let Some(k) = self.bit_of[v] {
                mask ^= 1 << k;
            }
        }
        self.values[mask]
    }
}

/// `Z^h_{r,R}` by spin enumeration.
pub fn spin_partition(geometry: &IsingGraph, boundary: Boundary, budget: &EnumBudget) -> Result<f64> {
    Ok(SpinEnumeration::new(geometry, boundary, budget)?.partition())
}

/// `<∏ σ_v>^h_{r,R}` by spin enumeration.
pub fn spin_expectation(
    geometry: &IsingGraph,
    boundary: Boundary,
    vertices: &[usize],
    budget: &EnumBudget,
) -> Result<f64> {
    Ok(SpinEnumeration::new(geometry, boundary, budget)?.expectation(vertices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_ball, BallGeometry, CouplingSpec, Norm};

    fn line(beta: f64, outer: f64, inner: f64) -> BallGeometry {
        let c = CouplingSpec::nearest_neighbor(1, 1.0, beta).unwrap();
        build_ball(&c, outer, inner, Norm::Euclidean).unwrap()
    }

    #[test]
    fn three_site_chain() {
        let t: f64 = 0.37;
        let g = line(t, 1.0, 0.0);
        let b = EnumBudget::default();
        let z = spin_partition(g.graph(), Boundary::Free, &b).unwrap();
        assert!((z - t.cosh().powi(2)).abs() < 1e-14);
        let ends = spin_expectation(g.graph(), Boundary::Free, &[0, 2], &b).unwrap();
        assert!((ends - t.tanh().powi(2)).abs() < 1e-14);
        let nn = spin_expectation(g.graph(), Boundary::Free, &[0, 1], &b).unwrap();
        assert!((nn - t.tanh()).abs() < 1e-14);
        assert!((spin_expectation(g.graph(), Boundary::Free, &[1, 1], &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn infinite_temperature_is_trivial() {
        let c = CouplingSpec::nearest_neighbor(2, 1.0, 0.0).unwrap();
        let g = build_ball(&c, 2.0, 1.0, Norm::Euclidean).unwrap();
        let b = EnumBudget::default();
        assert!((spin_partition(g.graph(), Boundary::Free, &b).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn plus_boundary_single_site() {
        for d in 1..=3 {
            let t: f64 = 0.21;
            let c = CouplingSpec::nearest_neighbor(d, 1.0, t).unwrap();
            let g = build_ball(&c, 1.0, 0.0, Norm::Euclidean).unwrap();
            let m = spin_expectation(g.graph(), Boundary::Plus, &[g.origin()], &EnumBudget::default()).unwrap();
            assert!((m - (2.0 * d as f64 * t).tanh()).abs() < 1e-14, "d = {d}");
        }
    }

    #[test]
    fn correlation_table_matches_direct_sums() {
        let c = CouplingSpec::nearest_neighbor(2, 1.0, 0.3).unwrap();
        let g = build_ball(&c, 2.0, 1.0, Norm::Euclidean).unwrap();
        let e = SpinEnumeration::new(g.graph(), Boundary::Field(0.7), &EnumBudget::default()).unwrap();
        let t = e.correlation_table();
        for set in [vec![0], vec![1, 5], vec![2, 3, 7], vec![4, 4, 8]] {
            assert!((t.expect(&set) - e.expectation(&set)).abs() < 1e-12, "{set:?}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let c = CouplingSpec::nearest_neighbor(2, 1.0, 0.3).unwrap();
        let g = build_ball(&c, 3.0, 1.0, Norm::Euclidean).unwrap();
        let tight = EnumBudget { spins: 10, ..EnumBudget::default() };
        assert!(matches!(
            SpinEnumeration::new(g.graph(), Boundary::Free, &tight),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }
}
