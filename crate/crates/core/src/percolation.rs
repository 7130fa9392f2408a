//! Bond percolation on balls: sampling, exact enumeration and the
//! second-moment correlation inequality.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::exact::{CheckLine, CompensatedSum, Tolerance};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::IsingGraph;
use crate::lattice::BallGeometry;
use crate::rng::stream_rng;
use crate::stats::{jackknife, Estimate, MIN_BLOCKS};

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let gp = self.parent[self.parent[x] as usize];
            self.parent[x] = gp;
            x = gp as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn cluster_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// `p J_b` per bond, rejecting values outside `[0, 1]`.
pub fn bond_probabilities(graph: &IsingGraph, p: f64) -> Result<Vec<f64>> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::InvalidProbability(format!("p = {p}")));
    }
    graph
        .bonds()
        .iter()
        .map(|b| {
            let q = p * b.coupling;
            if (0.0..=1.0).contains(&q) {
                Ok(q)
            } else {
                Err(Error::InvalidProbability(format!("p J = {q} on bond ({}, {})", b.u, b.v)))
            }
        })
        .collect()
}

/// 32-bit thresholds: a bond is occupied when its uniform word is below.
fn thresholds(probs: &[f64]) -> Vec<u64> {
    probs.iter().map(|&q| (q * 4294967296.0).round() as u64).collect()
}

/// One percolation configuration on a graph.
#[derive(Clone, Debug)]
pub struct PercState {
    occupied: Vec<bool>,
    uf: UnionFind,
}

impl PercState {
    /// Occupation from one uniform word per bond: occupied iff
    /// `word < p_b 2^32`. Sharing the words across `p` couples the
    /// configurations monotonically.
    pub fn from_words(graph: &IsingGraph, probs: &[f64], words: &[u32]) -> Self {
        let th = thresholds(probs);
        let mut s = PercState {
            occupied: vec![false; graph.bonds().len()],
            uf: UnionFind::new(graph.len()),
        };
        s.fill(graph, &th, words.iter().copied());
        s
    }

    pub fn sample(graph: &IsingGraph, probs: &[f64], rng: &mut crate::rng::Rng) -> Self {
        let th = thresholds(probs);
        let mut s = PercState {
            occupied: vec![false; graph.bonds().len()],
            uf: UnionFind::new(graph.len()),
        };
        s.resample(graph, &th, rng);
        s
    }

    fn resample(&mut self, graph: &IsingGraph, th: &[u64], rng: &mut crate::rng::Rng) {
        let words = (0..th.len()).map(|_| rng.random::<u32>());
        self.fill(graph, th, words);
    }

    fn fill(&mut self, graph: &IsingGraph, th: &[u64], words: impl Iterator<Item = u32>) {
        self.uf.reset();
        for ((b, (&t, w)), occ) in graph.bonds().iter().zip(th.iter().zip(words)).zip(self.occupied.iter_mut()) {
            *occ = (w as u64) < t;
            if *occ {
                self.uf.union(b.u, b.v);
            }
        }
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn connected(&mut self, x: usize, y: usize) -> bool {
        self.uf.find(x) == self.uf.find(y)
    }

    /// Cluster root of every vertex.
    pub fn roots(&mut self) -> Vec<usize> {
        (0..self.uf.parent.len()).map(|v| self.uf.find(v)).collect()
    }

    /// Recomputes connectivity by breadth-first search over occupied bonds and
    /// compares it with the union-find answer.
    pub fn audit(&mut self, graph: &IsingGraph) -> bool {
        let n = graph.len();
        let mut label = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &(w, b) in graph.neighbors(v) {
                    if self.occupied[b] && label[w] == usize::MAX {
                        label[w] = s;
                        queue.push_back(w);
                    }
                }
            }
        }
        let roots = self.roots();
        let mut map = std::collections::HashMap::new();
        (0..n).all(|v| *map.entry(roots[v]).or_insert(label[v]) == label[v])
            && map.len() == label.iter().collect::<std::collections::HashSet<_>>().len()
    }
}

/// Number of blocks used for batched sampling and jackknife errors.
fn block_count(samples: u64) -> usize {
    (samples as usize).clamp(1, 4 * MIN_BLOCKS)
}

fn block_range(samples: u64, blocks: usize, k: usize) -> u64 {
    let base = samples / blocks as u64;
    base + u64::from((k as u64) < samples % blocks as u64)
}

fn require_nested(geometry: &BallGeometry, radii: &[f64]) -> Result<()> {
    if let Some(&r) = radii.iter().find(|&&r| !(r >= 0.0 && r <= geometry.inner_radius())) {
        return Err(Error::InvalidRadii {
            inner: r,
            outer: geometry.inner_radius(),
        });
    }
    if geometry.boundary().is_empty() {
        return Err(Error::EmptyBoundary);
    }
    Ok(())
}

/// `θ_r = P(o ↔ ∂V_r)` at the inner radius of the geometry.
pub fn sample_theta_r(geometry: &BallGeometry, p: f64, samples: u64, seed: u64) -> Result<Estimate> {
    let r = geometry.inner_radius();
    Ok(sample_theta_nested(geometry, &[r], p, samples, seed, Exec::default())?.remove(0))
}

/// `θ_r` for every radius of a schedule from the same configurations.
///
/// `o ↔ ∂V_r` happens exactly when the cluster of `o` leaves `V_r`, so one
/// cluster per configuration serves every `r` up to the inner radius.
pub fn sample_theta_nested(
    geometry: &BallGeometry,
    radii: &[f64],
    p: f64,
    samples: u64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Estimate>> {
    require_nested(geometry, radii)?;
    let graph = geometry.graph();
    let th = thresholds(&bond_probabilities(graph, p)?);
    let blocks = block_count(samples);
    let o = graph.origin();
    let norm = geometry.norm();
    let counts = exec.map_range(blocks, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let mut state = PercState {
            occupied: vec![false; th.len()],
            uf: UnionFind::new(graph.len()),
        };
        let mut hits = vec![0u64; radii.len()];
        for _ in 0..block_range(samples, blocks, k) {
            state.resample(graph, &th, &mut rng);
            let root = state.uf.find(o);
            let mut escaped = vec![false; radii.len()];
            for v in 0..graph.len() {
                if state.uf.find(v) == root {
                    for (e, &r) in escaped.iter_mut().zip(radii) {
                        if !*e && !norm.within(&geometry.vertices()[v], r) {
                            *e = true;
                        }
                    }
                }
            }
            for (h, e) in hits.iter_mut().zip(&escaped) {
                *h += u64::from(*e);
            }
        }
        hits
    });
    Ok((0..radii.len())
        .map(|i| Estimate::binomial(counts.iter().map(|c| c[i]).sum(), samples))
        .collect())
}

/// `G_p(x, y) = P(x ↔ y)` for each pair; `G(x, x) = 1`.
pub fn sample_two_point_perc(
    geometry: &BallGeometry,
    p: f64,
    pairs: &[(usize, usize)],
    samples: u64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Estimate>> {
    let graph = geometry.graph();
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= graph.len() || y >= graph.len()) {
        return Err(Error::InvalidArgument(format!("pair ({x}, {y}) outside V_R")));
    }
    let th = thresholds(&bond_probabilities(graph, p)?);
    let blocks = block_count(samples);
    let counts = exec.map_range(blocks, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let mut state = PercState {
            occupied: vec![false; th.len()],
            uf: UnionFind::new(graph.len()),
        };
        let mut hits = vec![0u64; pairs.len()];
        for _ in 0..block_range(samples, blocks, k) {
            state.resample(graph, &th, &mut rng);
            for (h, &(x, y)) in hits.iter_mut().zip(pairs) {
                *h += u64::from(state.connected(x, y));
            }
        }
        hits
    });
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            if x == y {
                Estimate::exact(1.0)
            } else {
                Estimate::binomial(counts.iter().map(|c| c[i]).sum(), samples)
            }
        })
        .collect())
}

/// Sampled sides of `θ_r ≥ (Σ_x G(o,x))² / Σ_{u,x,y} G(o,u) G(u,x) G(u,y)`.
///
/// The `u`-sum runs over `V_R` and every `G` is the two-point function of
/// percolation on `V_R`, for which the inequality holds exactly; the part of
/// the `u`-sum outside `V_R` is not estimated (`truncation` records `R`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercCorrelation {
    pub r: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `E[X_r]` and `E[X_r²]` with `X_r` the number of boundary points joined to `o`.
    pub mean_x: Estimate,
    pub mean_x2: Estimate,
    pub truncation: f64,
}

impl PercCorrelation {
    /// `lhs + kσ ≥ rhs`.
    pub fn holds(&self, sigmas: f64) -> bool {
        self.lhs.mean + sigmas * self.lhs.stderr >= self.rhs.mean
    }
}

pub fn perc_correlation_check(
    geometry: &BallGeometry,
    radii: &[f64],
    p: f64,
    samples: u64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<PercCorrelation>> {
    require_nested(geometry, radii)?;
    if samples < MIN_BLOCKS as u64 {
        return Err(Error::InsufficientData(format!("{samples} samples, need {MIN_BLOCKS}")));
    }
    let graph = geometry.graph();
    let n = graph.len();
    let th = thresholds(&bond_probabilities(graph, p)?);
    let blocks = block_count(samples);
    let o = graph.origin();
    let boundaries: Vec<Vec<usize>> = radii.iter().map(|&r| geometry.boundary_at(r)).collect();
    let norm = geometry.norm();
    // per block: theta hits, X sums, X² sums per radius; G(o,u) sums; K_r(u) sums
    struct Block {
        theta: Vec<f64>,
        x1: Vec<f64>,
        x2: Vec<f64>,
        g: Vec<f64>,
        k: Vec<Vec<f64>>,
        count: f64,
    }
    let data = exec.map_range(blocks, |bk| {
        let mut rng = stream_rng(seed, bk as u64);
        let mut state = PercState {
            occupied: vec![false; th.len()],
            uf: UnionFind::new(n),
        };
        let mut out = Block {
            theta: vec![0.0; radii.len()],
            x1: vec![0.0; radii.len()],
            x2: vec![0.0; radii.len()],
            g: vec![0.0; n],
            k: vec![vec![0.0; n]; radii.len()],
            count: 0.0,
        };
        let mut roots = vec![0usize; n];
        let mut per_root = vec![0u32; n];
        let m = block_range(samples, blocks, bk);
        for _ in 0..m {
            state.resample(graph, &th, &mut rng);
            for (v, r) in roots.iter_mut().enumerate() {
                *r = state.uf.find(v);
            }
            let ro = roots[o];
            for v in 0..n {
                if roots[v] == ro {
                    out.g[v] += 1.0;
                }
            }
            for (i, bnd) in boundaries.iter().enumerate() {
                for &x in bnd {
                    per_root[roots[x]] += 1;
                }
                let x = per_root[ro] as f64;
                out.x1[i] += x;
                out.x2[i] += x * x;
                let escaped = (0..n).any(|v| roots[v] == ro && !norm.within(&geometry.vertices()[v], radii[i]));
                out.theta[i] += f64::from(u8::from(escaped));
                for v in 0..n {
                    out.k[i][v] += per_root[roots[v]] as f64;
                }
                for &x in bnd {
                    per_root[roots[x]] = 0;
                }
            }
        }
        out.count = m as f64;
        out
    });
    let mut results = Vec::with_capacity(radii.len());
    for (i, &r) in radii.iter().enumerate() {
        let rows: Vec<Vec<f64>> = data
            .iter()
            .map(|b| {
                let mut row = Vec::with_capacity(4 + 2 * n);
                row.push(b.count);
                row.push(b.theta[i]);
                row.push(b.x1[i]);
                row.push(b.x2[i]);
                row.extend_from_slice(&b.g);
                row.extend_from_slice(&b.k[i]);
                row
            })
            .collect();
        let total = |row: &[f64], j: usize| row[j] / row[0];
        let lhs = jackknife(&rows, |s| total(s, 1));
        let mean_x = jackknife(&rows, |s| total(s, 2));
        let mean_x2 = jackknife(&rows, |s| total(s, 3));
        let rhs = jackknife(&rows, |s| {
            let c = s[0];
            let num = (s[2] / c).powi(2);
            let mut den = CompensatedSum::new();
            for u in 0..n {
                let k = s[4 + n + u] / c;
                den.add(s[4 + u] / c * k * k);
            }
            let den = den.value();
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        });
        let est = |(mean, stderr): (f64, f64)| Estimate {
            mean,
            stderr,
            tau: 0.5,
            samples,
        };
        results.push(PercCorrelation {
            r,
            lhs: est(lhs),
            rhs: est(rhs),
            mean_x: est(mean_x),
            mean_x2: est(mean_x2),
            truncation: geometry.outer_radius(),
        });
    }
    Ok(results)
}

/// Exact percolation quantities from all `2^{|B|}` occupation sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercExact {
    /// `P(o ↔ boundary)`.
    pub theta: f64,
    /// `G(u, v)` for all vertex pairs.
    pub two_point: Vec<Vec<f64>>,
    /// `P(o ↔ x, o ↔ y)` for boundary points `x, y` in boundary order.
    pub joint: Vec<Vec<f64>>,
    pub mean_x: f64,
    pub mean_x2: f64,
}

pub fn exact_percolation(graph: &IsingGraph, p: f64, max_bonds: usize) -> Result<PercExact> {
    let probs = bond_probabilities(graph, p)?;
    let b = graph.bonds().len();
    if b > max_bonds {
        return Err(Error::EnumerationTooLarge {
            what: "percolation bonds",
            size: b as u64,
            budget: max_bonds as u64,
        });
    }
    let n = graph.len();
    if n > 64 {
        return Err(Error::EnumerationTooLarge {
            what: "vertices in a bitmask",
            size: n as u64,
            budget: 64,
        });
    }
    let o = graph.origin();
    let bnd = graph.boundary();
    let mut g = vec![vec![CompensatedSum::new(); n]; n];
    let mut joint = vec![vec![CompensatedSum::new(); bnd.len()]; bnd.len()];
    let (mut theta, mut x1, mut x2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let mut comp = vec![0u64; n];
    for set in 0..(1u64 << b) {
        let mut w = 1.0;
        for (k, &q) in probs.iter().enumerate() {
            w *= if set >> k & 1 == 1 { q } else { 1.0 - q };
        }
        if w == 0.0 {
            continue;
        }
        let mut assigned = 0u64;
        for s in 0..n {
            if assigned >> s & 1 == 1 {
                continue;
            }
            let mut c = 1u64 << s;
            let mut frontier = c;
            while frontier != 0 {
                let v = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                for &(u, bi) in graph.neighbors(v) {
                    if set >> bi & 1 == 1 && c >> u & 1 == 0 {
                        c |= 1 << u;
                        frontier |= 1 << u;
                    }
                }
            }
            assigned |= c;
            let mut m = c;
            while m != 0 {
                let v = m.trailing_zeros() as usize;
                m &= m - 1;
                comp[v] = c;
            }
        }
        for u in 0..n {
            let mut m = comp[u];
            while m != 0 {
                let v = m.trailing_zeros() as usize;
                m &= m - 1;
                g[u][v].add(w);
            }
        }
        let co = comp[o];
        let x = bnd.iter().filter(|&&x| co >> x & 1 == 1).count() as f64;
        if x > 0.0 {
            theta.add(w);
        }
        x1.add(w * x);
        x2.add(w * x * x);
        for (i, &xi) in bnd.iter().enumerate() {
            if co >> xi & 1 == 1 {
                for (j, &yj) in bnd.iter().enumerate() {
                    if co >> yj & 1 == 1 {
                        joint[i][j].add(w);
                    }
                }
            }
        }
    }
    let flat = |m: Vec<Vec<CompensatedSum>>| m.into_iter().map(|r| r.into_iter().map(|c| c.value()).collect()).collect();
    Ok(PercExact {
        theta: theta.value(),
        two_point: flat(g),
        joint: flat(joint),
        mean_x: x1.value(),
        mean_x2: x2.value(),
    })
}

/// Exact `P(o ↔ x, y) ≤ Σ_u G(o,u) G(u,x) G(u,y)` for every pair of
/// boundary points.
pub fn tree_graph_check(graph: &IsingGraph, p: f64, max_bonds: usize) -> Result<Vec<CheckLine>> {
    let ex = exact_percolation(graph, p, max_bonds)?;
    let o = graph.origin();
    let bnd = graph.boundary();
    let mut lines = Vec::new();
    for (i, &x) in bnd.iter().enumerate() {
        for (j, &y) in bnd.iter().enumerate() {
            let rhs = tree_graph_bound(&ex.two_point, o, x, y);
            lines.push(CheckLine::at_most(
                format!("tree-graph-inequality {x} {y}"),
                ex.joint[i][j],
                rhs,
                Tolerance::default(),
            ));
        }
    }
    Ok(lines)
}

/// `Σ_u G(o,u) G(u,x) G(u,y)`.
pub fn tree_graph_bound(g: &[Vec<f64>], o: usize, x: usize, y: usize) -> f64 {
    (0..g.len())
        .map(|u| g[o][u] * g[u][x] * g[u][y])
        .collect::<CompensatedSum>()
        .value()
}

/// Exact `θ ≥ E[X]² / E[X²]` and `θ ≥ (Σ_x G(o,x))² / Σ_{u,x,y} G G G`.
pub fn perc_correlation_exact(graph: &IsingGraph, p: f64, max_bonds: usize) -> Result<Vec<CheckLine>> {
    let ex = exact_percolation(graph, p, max_bonds)?;
    let o = graph.origin();
    let bnd = graph.boundary();
    let tol = Tolerance::default();
    let sum_g: f64 = bnd.iter().map(|&x| ex.two_point[o][x]).sum();
    let mut den = CompensatedSum::new();
    for &x in bnd {
        for &y in bnd {
            den.add(tree_graph_bound(&ex.two_point, o, x, y));
        }
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(vec![
        CheckLine::equal("perc-first-moment", ex.mean_x, sum_g, tol),
        CheckLine::at_least("perc-second-moment", ex.theta, ratio(ex.mean_x.powi(2), ex.mean_x2), tol),
        CheckLine::at_least("perc-correlation-inequality", ex.theta, ratio(sum_g * sum_g, den.value()), tol),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_ball, CouplingSpec, Norm};

    fn line(r: f64, outer: f64) -> BallGeometry {
        let c = CouplingSpec::nearest_neighbor(1, 1.0, 1.0).unwrap();
        build_ball(&c, outer, r, Norm::Euclidean).unwrap()
    }

    #[test]
    fn theta_extremes_and_line() {
        let g = line(3.0, 6.0);
        assert_eq!(sample_theta_r(&g, 0.0, 1000, 1).unwrap().mean, 0.0);
        assert_eq!(sample_theta_r(&g, 1.0, 1000, 1).unwrap().mean, 1.0);
        let p: f64 = 0.8;
        let est = sample_theta_r(&g, p, 40_000, 7).unwrap();
        // either half-line of four bonds reaches the boundary
        let exact = 1.0 - (1.0 - p.powi(4)).powi(2);
        assert!(est.within_sigmas(exact, 3.0), "{est:?} vs {exact}");
        assert!(matches!(sample_theta_r(&g, 1.5, 10, 1), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn union_find_agrees_with_bfs() {
        let c = CouplingSpec::nearest_neighbor(2, 1.0, 1.0).unwrap();
        let g = build_ball(&c, 5.0, 2.0, Norm::Euclidean).unwrap();
        let probs = bond_probabilities(g.graph(), 0.5).unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..200 {
            let mut s = PercState::sample(g.graph(), &probs, &mut rng);
            assert!(s.audit(g.graph()));
        }
    }

    #[test]
    fn exact_single_bond_and_four_cycle() {
        let g = IsingGraph::new(2, &[(0, 1, 1.0)], &[1], 0, 1.0).unwrap();
        let ex = exact_percolation(&g, 0.3, 20).unwrap();
        assert!((ex.two_point[0][1] - 0.3).abs() < 1e-15);
        assert!((ex.theta - 0.3).abs() < 1e-15);
        let c4 = IsingGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)], &[1, 2, 3], 0, 1.0).unwrap();
        let ex = exact_percolation(&c4, 0.5, 20).unwrap();
        // o ↔ 2 through either two-bond path
        assert!((ex.two_point[0][2] - (1.0 - 0.75f64.powi(2))).abs() < 1e-15);
        for l in tree_graph_check(&c4, 0.5, 20).unwrap() {
            assert!(l.passed, "{l}");
        }
        for l in perc_correlation_exact(&c4, 0.5, 20).unwrap() {
            assert!(l.passed, "{l}");
        }
    }
}
