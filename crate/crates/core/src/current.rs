//! Random-current bond systems, label configurations and support graphs.

use crate::error::{Error, Result};
use crate::graph::{Boundary, IsingGraph};

/// Largest vertex count (ghost included) representable in a support bitmask.
pub const MAX_MASK_VERTICES: usize = 64;

/// Per-bond reduction of a current label to (positivity, parity).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParityState {
    Zero,
    EvenPositive,
    Odd,
}

impl ParityState {
    pub const ALL: [ParityState; 3] = [ParityState::Zero, ParityState::EvenPositive, ParityState::Odd];

    /// Sum of `t^n / n!` over the labels `n` in this class.
    pub fn weight(self, t: f64) -> f64 {
        match self {
            ParityState::Zero => 1.0,
            ParityState::EvenPositive => cosh_minus_one(t),
            ParityState::Odd => t.sinh(),
        }
    }

    pub fn of(n: u32) -> Self {
        if n == 0 {
            ParityState::Zero
        } else if n.is_multiple_of(2) {
            ParityState::EvenPositive
        } else {
            ParityState::Odd
        }
    }
}

/// `cosh t - 1` without cancellation for small `t`.
pub fn cosh_minus_one(t: f64) -> f64 {
    let h = (0.5 * t).sinh();
    2.0 * h * h
}

/// Bonds carrying current labels, each with weight parameter `t_b`.
///
/// Vertex ids are those of the underlying graph; the ghost is `graph.len()`.
/// Ghost bonds `{v, g}` carry `t = βh`. In plus mode the frozen boundary
/// spins are identified with the ghost, so every bond from a free site to a
/// frozen site becomes (part of) a ghost bond.
#[derive(Clone, Debug)]
pub struct BondSystem {
    vertex_count: usize,
    ghost: usize,
    ends: Vec<(usize, usize)>,
    t: Vec<f64>,
    parent: Vec<Option<usize>>,
    frozen: Vec<bool>,
    adjacency: Vec<Vec<(usize, usize)>>,
    log_prefactor: f64,
}

impl BondSystem {
    /// The system whose weights are `w^h_{r,R}` for the given boundary.
    pub fn ising(graph: &IsingGraph, boundary: Boundary) -> Self {
        let n = graph.len();
        let ghost = graph.ghost();
        let beta = graph.beta();
        let mut ends = Vec::new();
        let mut t = Vec::new();
        let mut parent = Vec::new();
        let mut frozen = vec![false; n];
        let mut log_prefactor = 0.0;
        match boundary {
            Boundary::Free | Boundary::Field(_) => {
                for (i, b) in graph.bonds().iter().enumerate() {
                    ends.push((b.u, b.v));
                    t.push(beta * b.coupling);
                    parent.push(Some(i));
                }
                let h = boundary.field();
                if h > 0.0 {
                    for &v in graph.boundary() {
                        ends.push((v, ghost));
                        t.push(beta * h);
                        parent.push(None);
                    }
                }
            }
            Boundary::Plus => {
                for &v in graph.boundary() {
                    frozen[v] = true;
                }
                let mut to_ghost = vec![0.0; n];
                for (i, b) in graph.bonds().iter().enumerate() {
                    match (frozen[b.u], frozen[b.v]) {
                        (false, false) => {
                            ends.push((b.u, b.v));
                            t.push(beta * b.coupling);
                            parent.push(Some(i));
                        }
                        (true, true) => log_prefactor += beta * b.coupling,
                        (true, false) => to_ghost[b.v] += b.coupling,
                        (false, true) => to_ghost[b.u] += b.coupling,
                    }
                }
                for (v, &j) in to_ghost.iter().enumerate() {
                    if j > 0.0 {
                        ends.push((v, ghost));
                        t.push(beta * j);
                        parent.push(None);
                    }
                }
                let frozen_count = frozen.iter().filter(|&&f| f).count();
                log_prefactor -= frozen_count as f64 * std::f64::consts::LN_2;
            }
        }
        Self::assemble(n + 1, ghost, ends, t, parent, frozen, log_prefactor)
    }

    /// The free system on the bonds of `graph` with both ends in `a` (the
    /// weights `W_A`). No ghost bonds.
    pub fn restricted(graph: &IsingGraph, a: &[usize]) -> Self {
        let n = graph.len();
        let mut inside = vec![false; n];
        for &v in a {
            if v < n {
                inside[v] = true;
            }
        }
        let mut ends = Vec::new();
        let mut t = Vec::new();
        let mut parent = Vec::new();
        for (i, b) in graph.bonds().iter().enumerate() {
            if inside[b.u] && inside[b.v] {
                ends.push((b.u, b.v));
                t.push(graph.beta() * b.coupling);
                parent.push(Some(i));
            }
        }
        Self::assemble(n + 1, graph.ghost(), ends, t, parent, vec![false; n], 0.0)
    }

    /// Arbitrary system for tests and small hand-built examples. The last
    /// vertex slot plays the ghost.
    pub fn custom(vertex_count: usize, bonds: &[(usize, usize, f64)]) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidArgument("a bond system needs a vertex".into()));
        }
        let mut ends = Vec::new();
        let mut t = Vec::new();
        for &(u, v, w) in bonds {
            if u == v || u >= vertex_count || v >= vertex_count || !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad bond ({u}, {v}, {w})")));
            }
            ends.push((u.min(v), u.max(v)));
            t.push(w);
        }
        let parent = (0..bonds.len()).map(Some).collect();
        Ok(Self::assemble(
            vertex_count,
            vertex_count - 1,
            ends,
            t,
            parent,
            vec![false; vertex_count - 1],
            0.0,
        ))
    }

    fn assemble(
        vertex_count: usize,
        ghost: usize,
        ends: Vec<(usize, usize)>,
        t: Vec<f64>,
        parent: Vec<Option<usize>>,
        frozen: Vec<bool>,
        log_prefactor: f64,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (i, &(u, v)) in ends.iter().enumerate() {
            adjacency[u].push((v, i));
            adjacency[v].push((u, i));
        }
        BondSystem {
            vertex_count,
            ghost,
            ends,
            t,
            parent,
            frozen,
            adjacency,
            log_prefactor,
        }
    }

    /// Number of vertex slots, ghost included.
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn ghost(&self) -> usize {
        self.ghost
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn ends(&self, bond: usize) -> (usize, usize) {
        self.ends[bond]
    }

    pub fn weight_parameter(&self, bond: usize) -> f64 {
        self.t[bond]
    }

    pub fn weight_parameters(&self) -> &[f64] {
        &self.t
    }

    /// Index of the originating graph bond (`None` for ghost bonds).
    pub fn parent(&self, bond: usize) -> Option<usize> {
        self.parent[bond]
    }

    pub fn is_ghost_bond(&self, bond: usize) -> bool {
        let (u, v) = self.ends[bond];
        u == self.ghost || v == self.ghost
    }

    /// `(neighbour, bond)` pairs.
    pub fn incident(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// `ln(Z_spin / Z_current)`; zero except in plus mode.
    pub fn log_prefactor(&self) -> f64 {
        self.log_prefactor
    }

    pub fn is_frozen(&self, v: usize) -> bool {
        v < self.frozen.len() && self.frozen[v]
    }

    /// Reduces a vertex multiset to its source set: frozen sites map to the
    /// ghost, repeated vertices cancel. Sorted.
    pub fn sources(&self, vertices: &[usize]) -> Result<Vec<usize>> {
        let mut odd = std::collections::BTreeSet::new();
        for &v in vertices {
            if v >= self.vertex_count {
                return Err(Error::InvalidArgument(format!("source {v} outside the system")));
            }
            let w = if self.is_frozen(v) { self.ghost } else { v };
            if !odd.remove(&w) {
                odd.insert(w);
            }
        }
        Ok(odd.into_iter().collect())
    }

    /// Bitmask of a source set (requires at most 64 vertex slots).
    pub fn source_mask(&self, vertices: &[usize]) -> Result<u64> {
        self.require_mask_vertices()?;
        let mut m = 0u64;
        for v in self.sources(vertices)? {
            m |= 1 << v;
        }
        Ok(m)
    }

    pub(crate) fn require_mask_vertices(&self) -> Result<()> {
        if self.vertex_count > MAX_MASK_VERTICES {
            return Err(Error::EnumerationTooLarge {
                what: "vertices in a bitmask",
                size: self.vertex_count as u64,
                budget: MAX_MASK_VERTICES as u64,
            });
        }
        Ok(())
    }

    /// Endpoint mask of every bond.
    #[cfg(test)]
    pub(crate) fn endpoint_masks(&self) -> Vec<u64> {
        self.ends.iter().map(|&(u, v)| (1u64 << u) | (1u64 << v)).collect()
    }

    /// `ln w(n)` of a full label configuration.
    pub fn log_weight(&self, labels: &[u32]) -> f64 {
        labels
            .iter()
            .zip(&self.t)
            .map(|(&n, &t)| {
                if n == 0 {
                    0.0
                } else {
                    n as f64 * t.ln() - ln_factorial(n)
                }
            })
            .sum()
    }
}

/// `ln n!`.
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Integer labels on the bonds of a [`BondSystem`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurrentState {
    labels: Vec<u32>,
}

impl CurrentState {
    pub fn zero(system: &BondSystem) -> Self {
        CurrentState {
            labels: vec![0; system.len()],
        }
    }

    pub fn from_labels(system: &BondSystem, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != system.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} bonds",
                labels.len(),
                system.len()
            )));
        }
        Ok(CurrentState { labels })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, bond: usize) -> u32 {
        self.labels[bond]
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    /// `∂n`: vertices (ghost included) with odd incident label sum.
    pub fn sources(&self, system: &BondSystem) -> Vec<usize> {
        let mut parity = vec![false; system.vertex_count()];
        for (b, &n) in self.labels.iter().enumerate() {
            if n % 2 == 1 {
                let (u, v) = system.ends(b);
                parity[u] ^= true;
                parity[v] ^= true;
            }
        }
        (0..parity.len()).filter(|&v| parity[v]).collect()
    }

    /// Positive bonds as a dense boolean vector.
    pub fn positive(&self) -> Vec<bool> {
        self.labels.iter().map(|&n| n > 0).collect()
    }

    /// Support as a bond bitmask (at most 64 bonds).
    pub fn support_mask(&self) -> Option<u64> {
        if self.labels.len() > 64 {
            return None;
        }
        let mut m = 0u64;
        for (b, &n) in self.labels.iter().enumerate() {
            if n > 0 {
                m |= 1 << b;
            }
        }
        Some(m)
    }

    pub fn parity_states(&self) -> Vec<ParityState> {
        self.labels.iter().map(|&n| ParityState::of(n)).collect()
    }
}

/// Support graph of a current (or of a sum of currents) given as a bond
/// bitmask over a [`BondSystem`] with at most 64 vertex slots.
#[derive(Clone, Copy, Debug)]
pub struct Support<'a> {
    system: &'a BondSystem,
    mask: u64,
}

impl<'a> Support<'a> {
    pub fn new(system: &'a BondSystem, mask: u64) -> Self {
        Support { system, mask }
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn system(&self) -> &BondSystem {
        self.system
    }

    pub fn is_positive(&self, bond: usize) -> bool {
        self.mask >> bond & 1 == 1
    }

    pub fn positive_count(&self) -> u32 {
        self.mask.count_ones()
    }

    /// Vertices reachable from `x` through positive bonds with both ends in
    /// `allowed`. `x` itself is included only if it is allowed.
    pub fn cluster_in(&self, x: usize, allowed: u64) -> u64 {
        if allowed >> x & 1 == 0 {
            return 0;
        }
        let mut seen = 1u64 << x;
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            for &(w, b) in self.system.incident(v) {
                if self.mask >> b & 1 == 1 && allowed >> w & 1 == 1 && seen >> w & 1 == 0 {
                    seen |= 1 << w;
                    frontier |= 1 << w;
                }
            }
        }
        seen
    }

    /// `x ↔ y` through positive bonds (ghost bonds allowed).
    pub fn connected(&self, x: usize, y: usize) -> bool {
        self.cluster_in(x, u64::MAX) >> y & 1 == 1
    }

    /// `x ↔ y in A`: `x = y ∈ A`, or a positive path of bonds inside `A`.
    pub fn connected_in(&self, x: usize, y: usize, allowed: u64) -> bool {
        self.cluster_in(x, allowed) >> y & 1 == 1
    }
}

/// Bitmask of a vertex list.
pub fn vertex_mask(vertices: &[usize]) -> u64 {
    vertices.iter().fold(0u64, |m, &v| m | 1 << v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_weights_sum_to_exponential() {
        for t in [0.0, 1e-9, 0.3, 2.5] {
            let total: f64 = ParityState::ALL.iter().map(|s| s.weight(t)).sum();
            assert!((total - f64::exp(t)).abs() <= 1e-15 * f64::exp(t));
            let series: f64 = (1..40).step_by(2).map(|n| t.powi(n) / (2..=n).map(f64::from).product::<f64>()).sum();
            assert!((ParityState::Odd.weight(t) - series).abs() <= 1e-15 * series.max(1e-300));
        }
        assert!(cosh_minus_one(1e-9) > 0.0);
    }

    #[test]
    fn plus_mode_contracts_frozen_sites() {
        // path 0-1-2 with 0 and 2 on the boundary
        let g = IsingGraph::new(3, &[(0, 1, 1.0), (1, 2, 2.0)], &[0, 2], 1, 0.5).unwrap();
        let s = BondSystem::ising(&g, Boundary::Plus);
        assert_eq!(s.len(), 1);
        assert_eq!(s.ends(0), (1, 3));
        assert!((s.weight_parameter(0) - 1.5).abs() < 1e-15);
        assert_eq!(s.sources(&[1, 0]).unwrap(), vec![1, 3]);
        assert_eq!(s.sources(&[0, 2]).unwrap(), Vec::<usize>::new());
        let f = BondSystem::ising(&g, Boundary::Field(0.2));
        assert_eq!(f.len(), 4);
        assert!(f.is_ghost_bond(3));
    }

    #[test]
    fn sources_and_support() {
        let s = BondSystem::custom(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let c = CurrentState::from_labels(&s, vec![1, 2, 0]).unwrap();
        assert_eq!(c.sources(&s), vec![0, 1]);
        let sup = Support::new(&s, c.support_mask().unwrap());
        assert!(sup.connected(0, 2));
        assert!(!sup.connected(0, 3));
        assert!(sup.connected(3, 3));
        assert!(!sup.connected_in(0, 2, vertex_mask(&[0, 2])));
        assert!(!sup.connected_in(3, 3, vertex_mask(&[0])));
    }
}
