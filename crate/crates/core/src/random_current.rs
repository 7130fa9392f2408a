//! Worm sampling of random currents with prescribed sources.
//!
//! The chain lives on pairs `(n, head, tail)` with `∂n = B △ {head, tail}`
//! and stationary weight proportional to `w(n)`. Head moves shift one unit
//! of current along a bond at the head; relocation moves the closed worm to
//! a uniform vertex. States with `head = tail` are the target measure.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::current::{BondSystem, CurrentState};
use crate::error::{Error, Result};
use crate::exact::{CurrentEnumerator, EnumBudget};
use crate::graph::{Boundary, IsingGraph};
use crate::percolation::UnionFind;
use crate::rng::{stream_rng, Rng};
use crate::stats::{jackknife, Estimate};

/// Worm parameters. `shift_probability + relocation_probability` must be 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WormConfig {
    pub shift_probability: f64,
    pub relocation_probability: f64,
    /// Moves after burn-in.
    pub steps: u64,
    /// Discarded moves; `None` means `max(10^4, 50 * bonds)`.
    pub burn_in: Option<u64>,
    /// Closed states are looked at every `stride` moves.
    pub stride: u64,
    pub seed: u64,
    /// Target `∂n`; frozen vertices are read as the ghost.
    pub sources: Vec<usize>,
}

impl Default for WormConfig {
    fn default() -> Self {
        WormConfig {
            shift_probability: 0.9,
            relocation_probability: 0.1,
            steps: 1_000_000,
            burn_in: None,
            stride: 10,
            seed: 1,
            sources: Vec::new(),
        }
    }
}

impl WormConfig {
    pub fn validate(&self) -> Result<()> {
        let p = [self.shift_probability, self.relocation_probability];
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) || (p[0] + p[1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbability(format!(
                "move probabilities {} and {} must be in [0, 1] and sum to 1",
                p[0], p[1]
            )));
        }
        if self.shift_probability == 0.0 {
            return Err(Error::InvalidProbability("the worm needs head moves".into()));
        }
        if self.steps == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument("steps and stride must be positive".into()));
        }
        Ok(())
    }

    pub fn burn_in_for(&self, system: &BondSystem) -> u64 {
        self.burn_in.unwrap_or_else(|| 10_000u64.max(50 * system.len() as u64))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sources(mut self, sources: &[usize]) -> Self {
        self.sources = sources.to_vec();
        self
    }
}

/// A running worm. As an iterator it yields the closed states found at the
/// stride points of the post-burn-in moves.
pub struct WormChain<'a> {
    system: &'a BondSystem,
    state: CurrentState,
    head: usize,
    tail: usize,
    pinned: bool,
    active: Vec<usize>,
    rng: Rng,
    shift: f64,
    stride: u64,
    remaining: u64,
    proposed: u64,
    accepted: u64,
}

impl<'a> WormChain<'a> {
    /// Starts from a current with `∂n = cfg.sources` and runs the burn-in.
    pub fn new(system: &'a BondSystem, cfg: &WormConfig) -> Result<Self> {
        cfg.validate()?;
        let sources = system.sources(&cfg.sources)?;
        let labels = initial_current(system, &sources)?;
        let active: Vec<usize> = (0..system.vertex_count())
            .filter(|&v| !system.incident(v).is_empty())
            .collect();
        let start = *active
            .first()
            .ok_or_else(|| Error::InvalidArgument("the bond system has no bonds".into()))?;
        let mut chain = WormChain {
            system,
            state: CurrentState::from_labels(system, labels)?,
            head: start,
            tail: start,
            pinned: false,
            active,
            rng: stream_rng(cfg.seed, 0),
            shift: cfg.shift_probability,
            stride: cfg.stride,
            remaining: cfg.steps,
            proposed: 0,
            accepted: 0,
        };
        chain.burn(cfg.burn_in_for(system));
        Ok(chain)
    }

    /// Worm with its tail fixed at `tail` and `∂n = {tail} △ {head}`; no
    /// relocation. Uses stream `stream` of the configured seed.
    pub fn pinned(system: &'a BondSystem, tail: usize, cfg: &WormConfig, stream: u64) -> Result<Self> {
        cfg.validate()?;
        if tail >= system.vertex_count() || system.incident(tail).is_empty() {
            return Err(Error::UnreachableSources(format!("vertex {tail} carries no bonds")));
        }
        let mut chain = WormChain {
            system,
            state: CurrentState::zero(system),
            head: tail,
            tail,
            pinned: true,
            active: vec![tail],
            rng: stream_rng(cfg.seed, stream),
            shift: 1.0,
            stride: cfg.stride,
            remaining: cfg.steps,
            proposed: 0,
            accepted: 0,
        };
        chain.burn(cfg.burn_in_for(system));
        Ok(chain)
    }

    fn with_stream(mut self, seed: u64, stream: u64) -> Self {
        self.rng = stream_rng(seed, stream);
        self
    }

    fn burn(&mut self, moves: u64) {
        for _ in 0..moves {
            self.step();
        }
    }

    pub fn state(&self) -> &CurrentState {
        &self.state
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn tail(&self) -> usize {
        self.tail
    }

    pub fn is_closed(&self) -> bool {
        self.head == self.tail
    }

    /// Fraction of accepted head moves.
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// One move.
    pub fn step(&mut self) {
        if self.pinned || self.rng.random::<f64>() < self.shift {
            self.shift_head();
        } else if self.head == self.tail {
            let v = self.active[self.rng.random_range(0..self.active.len())];
            self.head = v;
            self.tail = v;
        }
    }

    fn shift_head(&mut self) {
        let inc = self.system.incident(self.head);
        let (w, b) = inc[self.rng.random_range(0..inc.len())];
        let up = self.rng.random::<bool>();
        self.proposed += 1;
        let n = self.state.label(b);
        let t = self.system.weight_parameter(b);
        let ratio = if up {
            t / (n + 1) as f64
        } else if n == 0 {
            return;
        } else {
            n as f64 / t
        };
        let ratio = ratio * inc.len() as f64 / self.system.incident(w).len() as f64;
        if ratio >= 1.0 || self.rng.random::<f64>() < ratio {
            let labels = self.state.labels_mut();
            if up {
                labels[b] += 1;
            } else {
                labels[b] -= 1;
            }
            self.head = w;
            self.accepted += 1;
        }
    }

    /// Runs `stride` moves of the remaining budget. False once exhausted.
    pub fn advance(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        let k = self.stride.min(self.remaining);
        for _ in 0..k {
            self.step();
        }
        self.remaining -= k;
        k == self.stride
    }
}

impl Iterator for WormChain<'_> {
    type Item = CurrentState;

    fn next(&mut self) -> Option<CurrentState> {
        while self.advance() {
            if self.is_closed() {
                return Some(self.state.clone());
            }
        }
        None
    }
}

/// A current with `∂n = sources`, built by routing unit currents along
/// spanning-tree paths of the bonds with `t > 0`.
fn initial_current(system: &BondSystem, sources: &[usize]) -> Result<Vec<u32>> {
    let nv = system.vertex_count();
    let mut comp = vec![usize::MAX; nv];
    let mut up: Vec<Option<(usize, usize)>> = vec![None; nv];
    let mut depth = vec![0usize; nv];
    for root in 0..nv {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = root;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, b) in system.incident(v) {
                if comp[w] == usize::MAX && system.weight_parameter(b) > 0.0 {
                    comp[w] = root;
                    up[w] = Some((v, b));
                    depth[w] = depth[v] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut pending: HashMap<usize, usize> = HashMap::new();
    let mut labels = vec![0u32; system.len()];
    for &s in sources {
        match pending.remove(&comp[s]) {
            None => {
                pending.insert(comp[s], s);
            }
            Some(mut a) => {
                let mut b = s;
                while a != b {
                    let x = if depth[a] >= depth[b] { &mut a } else { &mut b };
                    let (p, bond) = up[*x].expect("non-root vertex has a parent");
                    labels[bond] += 1;
                    *x = p;
                }
            }
        }
    }
    if !pending.is_empty() {
        let mut odd: Vec<usize> = pending.into_values().collect();
        odd.sort_unstable();
        return Err(Error::UnreachableSources(format!(
            "sources {sources:?}: a component holds an odd number of them (e.g. vertex {})",
            odd[0]
        )));
    }
    Ok(labels)
}

/// Worm on `system` with `∂n = cfg.sources`; see [`WormChain`].
pub fn worm_sample<'a>(system: &'a BondSystem, cfg: &WormConfig) -> Result<WormChain<'a>> {
    WormChain::new(system, cfg)
}

/// Mean of `f` over the emitted closed states with a blocked error bar.
pub fn worm_estimate<F>(system: &BondSystem, cfg: &WormConfig, f: F) -> Result<Estimate>
where
    F: Fn(&CurrentState) -> f64,
{
    let chain = WormChain::new(system, cfg)?;
    let series: Vec<f64> = chain.map(|s| f(&s)).collect();
    if series.is_empty() {
        return Err(Error::InsufficientData("no closed state was emitted".into()));
    }
    Ok(Estimate::from_series(&series))
}

/// Indicator of `x ↔ y` in the support of `n` (ghost bonds allowed).
pub fn connects(system: &BondSystem, state: &CurrentState, x: usize, y: usize) -> bool {
    let mut uf = UnionFind::new(system.vertex_count());
    for (b, &n) in state.labels().iter().enumerate() {
        if n > 0 {
            let (u, v) = system.ends(b);
            uf.union(u, v);
        }
    }
    uf.find(x) == uf.find(y)
}

/// Estimates from the second-moment chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentStats {
    /// `Σ_{∂n={o,g}, ∂m=∅} w^h(n) w_R(m) X_r(n+m) / (Z^h Z_R)`.
    pub m1: Estimate,
    /// Same with `X_r²`.
    pub m2: Estimate,
    /// `m1² / m2`, a lower bound for `<σ_o>^h_{r,R}`.
    pub ratio: Estimate,
    /// `<σ_o>^h_{r,R} = Z^h_{og} / Z^h`.
    pub magnetization: Estimate,
}

/// `X_r(n+m)` statistics at field `h > 0`.
///
/// A worm pinned at `o` samples `n` (closed at `o` for `∂n = ∅`, head at the
/// ghost for `∂n = {o, g}`); a free worm with `∂m = ∅` supplies `m`, paired
/// by emission index. Errors are delete-one-block jackknife over 32 blocks.
pub fn second_moment_stats(graph: &IsingGraph, h: f64, cfg: &WormConfig) -> Result<SecondMomentStats> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::UnreachableSources(format!(
            "the ghost is unreachable at field {h}; the second-moment chain needs 0 < h < inf"
        )));
    }
    let n_sys = BondSystem::ising(graph, Boundary::Field(h));
    let m_sys = BondSystem::ising(graph, Boundary::Free);
    let o = graph.origin();
    let g = graph.ghost();
    let mut n_chain = WormChain::pinned(&n_sys, o, cfg, 0)?;
    let m_cfg = WormConfig {
        steps: u64::MAX,
        sources: Vec::new(),
        ..cfg.clone()
    };
    let mut m_chain = if m_sys.is_empty() {
        None
    } else {
        Some(WormChain::new(&m_sys, &m_cfg)?.with_stream(cfg.seed, 1))
    };
    let on_boundary: Vec<bool> = (0..graph.len()).map(|v| graph.is_boundary(v)).collect();
    let mut uf = UnionFind::new(graph.len());
    const BLOCKS: usize = 32;
    let records = (cfg.steps / cfg.stride) as usize;
    if records < BLOCKS {
        return Err(Error::InsufficientData(format!(
            "{records} records; need at least {BLOCKS}"
        )));
    }
    let mut blocks = vec![vec![0.0; 4]; BLOCKS];
    let mut i = 0;
    while n_chain.advance() {
        let block = &mut blocks[i * BLOCKS / records];
        i += 1;
        if n_chain.head() == o {
            block[0] += 1.0;
        } else if n_chain.head() == g {
            let m = match m_chain.as_mut() {
                Some(c) => c.next().expect("unbounded chain").labels().to_vec(),
                None => Vec::new(),
            };
            uf.reset();
            for (b, &n) in n_chain.state().labels().iter().enumerate() {
                if n > 0 {
                    if let Some(p) = n_sys.parent(b) {
                        let bond = graph.bonds()[p];
                        uf.union(bond.u, bond.v);
                    }
                }
            }
            for (b, &n) in m.iter().enumerate() {
                if n > 0 {
                    let bond = graph.bonds()[m_sys.parent(b).expect("free system has no ghost bonds")];
                    uf.union(bond.u, bond.v);
                }
            }
            let root = uf.find(o);
            let x = (0..graph.len())
                .filter(|&v| on_boundary[v] && uf.find(v) == root)
                .count() as f64;
            block[1] += 1.0;
            block[2] += x;
            block[3] += x * x;
        }
        if i == records {
            break;
        }
    }
    if blocks.iter().map(|b| b[0]).sum::<f64>() == 0.0 {
        return Err(Error::InsufficientData("the pinned worm never closed".into()));
    }
    let samples = records as u64;
    let est = |stat: &dyn Fn(&[f64]) -> f64| {
        let (mean, stderr) = jackknife(&blocks, |t| if t[0] > 0.0 { stat(t) } else { 0.0 });
        Estimate {
            mean,
            stderr,
            tau: 0.0,
            samples,
        }
    };
    Ok(SecondMomentStats {
        m1: est(&|t| t[2] / t[0]),
        m2: est(&|t| t[3] / t[0]),
        ratio: est(&|t| if t[3] > 0.0 { t[2] * t[2] / (t[3] * t[0]) } else { 0.0 }),
        magnetization: est(&|t| t[1] / t[0]),
    })
}

/// Pearson test of emitted support frequencies against exact weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    /// Pearson statistic divided by `2τ`.
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: u64,
    /// Largest integrated autocorrelation time among the class indicators.
    pub tau: f64,
}

impl ChiSquareTest {
    pub fn rejected(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Compares the frequencies of support classes among the emitted states with
/// the exact law from enumeration. Classes with expected count below 5 are
/// pooled; the statistic is deflated by `2τ` of the class indicators.
pub fn stationarity_test(system: &BondSystem, cfg: &WormConfig, budget: &EnumBudget) -> Result<ChiSquareTest> {
    let sources = system.sources(&cfg.sources)?;
    let table = CurrentEnumerator::new(system, *budget).support_table(&sources)?;
    let total = table.total();
    let chain = WormChain::new(system, cfg)?;
    let masks: Vec<u64> = chain
        .map(|s| s.support_mask().expect("enumerable systems have at most 64 bonds"))
        .collect();
    let n = masks.len();
    if n == 0 {
        return Err(Error::InsufficientData("no closed state was emitted".into()));
    }
    let mut expected: Vec<(u64, f64)> = table.nonzero().into_iter().map(|(m, w)| (m, w / total * n as f64)).collect();
    expected.sort_by(|a, b| b.1.total_cmp(&a.1));
    let bins: Vec<u64> = expected.iter().take_while(|e| e.1 >= 5.0).map(|e| e.0).collect();
    let index: HashMap<u64, usize> = bins.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let pooled = bins.len();
    let mut observed = vec![0u64; pooled + 1];
    for m in &masks {
        observed[*index.get(m).unwrap_or(&pooled)] += 1;
    }
    let mut exp: Vec<f64> = expected[..pooled].iter().map(|e| e.1).collect();
    exp.push(expected[pooled..].iter().map(|e| e.1).sum());
    let tau = bins
        .iter()
        .take(4)
        .map(|&b| {
            let series: Vec<f64> = masks.iter().map(|&m| f64::from(u8::from(m == b))).collect();
            Estimate::from_series(&series).tau
        })
        .fold(0.5, f64::max);
    let mut chi2 = 0.0;
    let mut cells = 0;
    for (o, e) in observed.iter().zip(&exp) {
        if *e > 0.0 {
            chi2 += (*o as f64 - e).powi(2) / e;
            cells += 1;
        } else if *o > 0 {
            chi2 = f64::INFINITY;
        }
    }
    let statistic = chi2 / (2.0 * tau);
    let dof = cells.max(2) - 1;
    let p_value = if statistic.is_finite() {
        1.0 - ChiSquared::new(dof as f64)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .cdf(statistic)
    } else {
        0.0
    };
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
        samples: n as u64,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::CurrentMode;

    fn four_cycle(beta: f64) -> IsingGraph {
        IsingGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)], &[2], 0, beta).unwrap()
    }

    fn cfg(steps: u64, seed: u64, sources: &[usize]) -> WormConfig {
        WormConfig {
            steps,
            seed,
            stride: 5,
            ..WormConfig::default()
        }
        .with_sources(sources)
    }

    #[test]
    fn single_bond_with_sources_is_always_odd() {
        let g = IsingGraph::new(2, &[(0, 1, 1.0)], &[1], 0, 0.7).unwrap();
        let s = BondSystem::ising(&g, Boundary::Free);
        let states: Vec<_> = worm_sample(&s, &cfg(20_000, 3, &[0, 1])).unwrap().collect();
        assert!(states.len() > 100);
        assert!(states.iter().all(|n| n.label(0) % 2 == 1));
        assert!(states.iter().all(|n| n.sources(&s) == vec![0, 1]));
    }

    #[test]
    fn unreachable_sources_are_reported() {
        let g = IsingGraph::new(3, &[(0, 1, 1.0)], &[1], 0, 0.7).unwrap();
        let s = BondSystem::ising(&g, Boundary::Free);
        assert!(matches!(WormChain::new(&s, &cfg(10, 1, &[0, 2])), Err(Error::UnreachableSources(_))));
        assert!(matches!(WormChain::new(&s, &cfg(10, 1, &[0])), Err(Error::UnreachableSources(_))));
        assert!(WormConfig {
            shift_probability: 0.5,
            ..WormConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn mean_current_and_connection_on_a_four_cycle() {
        let g = four_cycle(0.6);
        let s = BondSystem::ising(&g, Boundary::Field(0.4));
        let e = CurrentEnumerator::new(&s, EnumBudget::default());
        let z = e.partition(&[0, 2], CurrentMode::Parity).unwrap();
        let exact_n = e.mean_current(&[0, 2], 1).unwrap();
        let exact_conn = e.event_measure(&[0, 2], |sup| sup.connected(0, 4)).unwrap() / z;
        let c = cfg(400_000, 11, &[0, 2]);
        let n = worm_estimate(&s, &c, |st| st.label(1) as f64).unwrap();
        let conn = worm_estimate(&s, &c, |st| f64::from(u8::from(connects(&s, st, 0, 4)))).unwrap();
        assert!(n.within_sigmas(exact_n, 3.0), "{n:?} vs {exact_n}");
        assert!(conn.within_sigmas(exact_conn, 3.0), "{conn:?} vs {exact_conn}");
    }

    #[test]
    fn chi_square_on_a_triangle_with_ghost() {
        let g = IsingGraph::new(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 0.5)], &[1, 2], 0, 0.8).unwrap();
        let s = BondSystem::ising(&g, Boundary::Field(0.5));
        let t = stationarity_test(&s, &cfg(300_000, 5, &[0, 3]), &EnumBudget::default()).unwrap();
        assert!(!t.rejected(0.01), "{t:?}");
        assert!(t.dof >= 3);
    }

    #[test]
    fn second_moment_against_enumeration() {
        let g = IsingGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)], &[2, 3], 0, 0.5).unwrap();
        let exact = crate::exact::second_moment_exact(&g, Boundary::Field(0.7), &EnumBudget::default()).unwrap();
        let st = second_moment_stats(&g, 0.7, &cfg(1_000_000, 2, &[])).unwrap();
        assert!(st.m1.within_sigmas(exact.m1, 3.0), "{:?} vs {}", st.m1, exact.m1);
        assert!(st.m2.within_sigmas(exact.m2, 3.0), "{:?} vs {}", st.m2, exact.m2);
        assert!(st.magnetization.within_sigmas(exact.magnetization, 3.0));
        assert!(st.ratio.mean <= exact.magnetization + 3.0 * st.ratio.stderr);
        assert!(second_moment_stats(&g, 0.0, &cfg(100, 1, &[])).is_err());
    }
}
