//! Exact current sums.
//!
//! The odd part of a current with prescribed sources is an element of an
//! affine cycle space, enumerated from a spanning forest. Summing the
//! `{zero, even-positive, odd}` bond weights over every labelling whose odd
//! bonds form such a set gives, for each support `S`, the total weight of
//! currents with support exactly `S`; that table is built with a weighted
//! subset-sum transform whose terms are all nonnegative.

use super::sum::CompensatedSum;
use super::EnumBudget;
use crate::current::{cosh_minus_one, BondSystem, Support};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{Boundary, IsingGraph};

const PARALLEL_CHUNK: usize = 1 << 14;

/// How the parity reduction treats zero labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurrentMode {
    /// Three states per bond; the support is tracked.
    Parity,
    /// Two states per bond (odd or even); supports are not available.
    Fast,
}

/// Affine space of odd-bond sets with a prescribed boundary.
#[derive(Clone, Debug)]
pub(crate) struct OddSets {
    pub base: u64,
    pub cycles: Vec<u64>,
}

impl OddSets {
    pub fn count(&self) -> u64 {
        1u64 << self.cycles.len()
    }

    /// Calls `f` once per odd set, in Gray-code order.
    pub fn for_each(&self, mut f: impl FnMut(u64)) {
        let mut cur = self.base;
        f(cur);
        for i in 1..self.count() {
            cur ^= self.cycles[i.trailing_zeros() as usize];
            f(cur);
        }
    }
}

/// `None` when the source set is parity-impossible.
pub(crate) fn odd_sets(system: &BondSystem, sources: u64) -> Result<Option<OddSets>> {
    system.require_mask_vertices()?;
    if system.len() > 64 {
        return Err(Error::EnumerationTooLarge {
            what: "bonds in a bitmask",
            size: system.len() as u64,
            budget: 64,
        });
    }
    let nv = system.vertex_count();
    let mut root_path = vec![0u64; nv];
    let mut component = vec![usize::MAX; nv];
    let mut tree = 0u64;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..nv {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = start;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &(w, b) in system.incident(v) {
                if component[w] == usize::MAX {
                    component[w] = start;
                    root_path[w] = root_path[v] | 1 << b;
                    tree |= 1 << b;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut per_component = vec![0u32; nv];
    let mut base = 0u64;
    let mut rest = sources;
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        per_component[component[v]] += 1;
        base ^= root_path[v];
    }
    if per_component.iter().any(|c| c % 2 == 1) {
        return Ok(None);
    }
    let cycles = (0..system.len())
        .filter(|&b| tree >> b & 1 == 0)
        .map(|b| {
            let (u, v) = system.ends(b);
            1u64 << b ^ root_path[u] ^ root_path[v]
        })
        .collect();
    Ok(Some(OddSets { base, cycles }))
}

fn product_over(mask: u64, values: &[f64]) -> f64 {
    let mut p = 1.0;
    let mut m = mask;
    while m != 0 {
        p *= values[m.trailing_zeros() as usize];
        m &= m - 1;
    }
    p
}

/// Total current weight per support: `values[S] = Σ_{∂n=B, supp n = S} w(n)`.
#[derive(Clone, Debug)]
pub struct SupportTable {
    bonds: usize,
    values: Vec<f64>,
}

impl SupportTable {
    pub fn bonds(&self) -> usize {
        self.bonds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value()
    }

    /// `(support, weight)` for every support of positive weight.
    pub fn nonzero(&self) -> Vec<(u64, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, &w)| (s as u64, w))
            .collect()
    }
}

/// Weight per support of the sum `n + m` of two independent currents.
#[derive(Clone, Debug)]
pub struct PairTable {
    values: Vec<f64>,
}

impl PairTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value()
    }
}

/// Exact current sums over one [`BondSystem`].
#[derive(Clone, Debug)]
pub struct CurrentEnumerator<'a> {
    system: &'a BondSystem,
    budget: EnumBudget,
    exec: Exec,
}

impl<'a> CurrentEnumerator<'a> {
    pub fn new(system: &'a BondSystem, budget: EnumBudget) -> Self {
        CurrentEnumerator {
            system,
            budget,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn system(&self) -> &BondSystem {
        self.system
    }

    fn check_table_budget(&self) -> Result<()> {
        if self.system.len() > self.budget.bonds {
            return Err(Error::EnumerationTooLarge {
                what: "bonds (parity states)",
                size: self.system.len() as u64,
                budget: self.budget.bonds as u64,
            });
        }
        Ok(())
    }

    /// `Σ_{∂n = sources} w(n)` in current normalisation.
    pub fn partition(&self, sources: &[usize], mode: CurrentMode) -> Result<f64> {
        match mode {
            CurrentMode::Parity => Ok(self.support_table(sources)?.total()),
            CurrentMode::Fast => self.fast_partition(sources),
        }
    }

    fn fast_partition(&self, sources: &[usize]) -> Result<f64> {
        let mask = self.system.source_mask(sources)?;
        let Some(sets) = odd_sets(self.system, mask)? else {
            return Ok(0.0);
        };
        if sets.cycles.len() > self.budget.bonds {
            return Err(Error::EnumerationTooLarge {
                what: "independent cycles",
                size: sets.cycles.len() as u64,
                budget: self.budget.bonds as u64,
            });
        }
        let t = self.system.weight_parameters();
        let tanh: Vec<f64> = t.iter().map(|x| x.tanh()).collect();
        let cosh: f64 = t.iter().map(|x| x.cosh()).product();
        let mut s = CompensatedSum::new();
        sets.for_each(|odd| s.add(product_over(odd, &tanh)));
        Ok(cosh * s.value())
    }

    /// Per-support weights of all currents with the given sources.
    pub fn support_table(&self, sources: &[usize]) -> Result<SupportTable> {
        self.check_table_budget()?;
        let mask = self.system.source_mask(sources)?;
        let b = self.system.len();
        let size = 1usize << b;
        let mut values = vec![0.0f64; size];
        let Some(sets) = odd_sets(self.system, mask)? else {
            return Ok(SupportTable { bonds: b, values });
        };
        let t = self.system.weight_parameters();
        let sinh: Vec<f64> = t.iter().map(|x| x.sinh()).collect();
        let even: Vec<f64> = t.iter().map(|&x| cosh_minus_one(x)).collect();
        sets.for_each(|odd| values[odd as usize] = product_over(odd, &sinh));
        for (k, &c) in even.iter().enumerate() {
            let half = 1usize << k;
            let step = |chunk: &mut [f64]| {
                let (lo, hi) = chunk.split_at_mut(half);
                for (h, l) in hi.iter_mut().zip(lo.iter()) {
                    *h += c * *l;
                }
            };
            zeta_step(&mut values, 2 * half, self.exec, step);
        }
        Ok(SupportTable { bonds: b, values })
    }

    /// `Σ_{∂n = sources} w(n) 1{event(supp n)}`.
    pub fn event_measure<F>(&self, sources: &[usize], event: F) -> Result<f64>
    where
        F: Fn(&Support) -> bool + Sync,
    {
        let table = self.support_table(sources)?;
        Ok(weighted_sum(self.system, table.values(), self.exec, |s| if event(s) { 1.0 } else { 0.0 }))
    }

    /// `Σ_{∂n = sources} w(n) n_bond`.
    pub fn label_moment(&self, sources: &[usize], bond: usize) -> Result<f64> {
        if bond >= self.system.len() {
            return Err(Error::InvalidArgument(format!("bond {bond} out of range")));
        }
        let mask = self.system.source_mask(sources)?;
        let Some(sets) = odd_sets(self.system, mask)? else {
            return Ok(0.0);
        };
        let t = self.system.weight_parameters();
        let mut odd_w: Vec<f64> = t.iter().map(|x| x.sinh()).collect();
        let mut even_w: Vec<f64> = t.iter().map(|x| x.cosh()).collect();
        let tb = t[bond];
        odd_w[bond] = tb * tb.cosh();
        even_w[bond] = tb * tb.sinh();
        let all = u64::MAX >> ((64 - self.system.len()) as u32 % 64);
        let all = if self.system.is_empty() { 0 } else { all };
        let mut s = CompensatedSum::new();
        sets.for_each(|odd| s.add(product_over(odd, &odd_w) * product_over(all & !odd, &even_w)));
        Ok(s.value())
    }

    /// Exact `E[n_bond]` under the normalised measure with these sources.
    pub fn mean_current(&self, sources: &[usize], bond: usize) -> Result<f64> {
        let z = self.partition(sources, CurrentMode::Fast)?;
        if z <= 0.0 {
            return Err(Error::UnreachableSources(format!("{sources:?}")));
        }
        Ok(self.label_moment(sources, bond)? / z)
    }

    /// Weights of `n + m` per union support, with `∂n = sources` on this
    /// system and `∂m = other_sources` on `other`. Every bond of `other`
    /// must come from a graph bond present in this system; supports are
    /// expressed in this system's bond indices.
    pub fn pair_table(&self, sources: &[usize], other: &BondSystem, other_sources: &[usize]) -> Result<PairTable> {
        let mut lift = Vec::with_capacity(other.len());
        for b in 0..other.len() {
            let target = other
                .parent(b)
                .and_then(|p| (0..self.system.len()).find(|&c| self.system.parent(c) == Some(p)))
                .ok_or_else(|| Error::InvalidArgument(format!("bond {b} of the second system has no counterpart")))?;
            lift.push(target);
        }
        let first = self.support_table(sources)?.nonzero();
        let second_enum = CurrentEnumerator {
            system: other,
            budget: self.budget,
            exec: self.exec,
        };
        let second: Vec<(u64, f64)> = second_enum
            .support_table(other_sources)?
            .nonzero()
            .into_iter()
            .map(|(s, w)| {
                let mut lifted = 0u64;
                let mut m = s;
                while m != 0 {
                    lifted |= 1 << lift[m.trailing_zeros() as usize];
                    m &= m - 1;
                }
                (lifted, w)
            })
            .collect();
        let pairs = first.len() as u64 * second.len() as u64;
        if pairs > self.budget.pairs {
            return Err(Error::EnumerationTooLarge {
                what: "support pairs",
                size: pairs,
                budget: self.budget.pairs,
            });
        }
        let mut values = vec![0.0f64; 1usize << self.system.len()];
        for &(s1, w1) in &first {
            for &(s2, w2) in &second {
                values[(s1 | s2) as usize] += w1 * w2;
            }
        }
        Ok(PairTable { values })
    }

    /// `Σ_S table[S] f(S)` over a support-indexed table of this system.
    pub fn sum_over_supports<F>(&self, table: &[f64], f: F) -> f64
    where
        F: Fn(&Support) -> f64 + Sync,
    {
        weighted_sum(self.system, table, self.exec, f)
    }
}

fn zeta_step<F>(values: &mut [f64], chunk: usize, exec: Exec, step: F)
where
    F: Fn(&mut [f64]) + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && values.len() >= 2 * PARALLEL_CHUNK {
        use rayon::prelude::*;
        if chunk >= PARALLEL_CHUNK {
            values.par_chunks_mut(chunk).for_each(&step);
        } else {
            values
                .par_chunks_mut(PARALLEL_CHUNK)
                .for_each(|big| big.chunks_mut(chunk).for_each(&step));
        }
        return;
    }
    let _ = exec;
    values.chunks_mut(chunk).for_each(step);
}

fn weighted_sum<F>(system: &BondSystem, table: &[f64], exec: Exec, f: F) -> f64
where
    F: Fn(&Support) -> f64 + Sync,
{
    let chunks = table.len().div_ceil(PARALLEL_CHUNK);
    let partial = exec.map_range(chunks, |c| {
        let lo = c * PARALLEL_CHUNK;
        let hi = (lo + PARALLEL_CHUNK).min(table.len());
        let mut s = CompensatedSum::new();
        for (i, &w) in table[lo..hi].iter().enumerate() {
            if w != 0.0 {
                s.add(w * f(&Support::new(system, (lo + i) as u64)));
            }
        }
        s
    });
    let mut total = CompensatedSum::new();
    for p in &partial {
        total.merge(p);
    }
    total.value()
}

/// `Σ_{∂n = sources} w^h_{r,R}(n)`, on the same normalisation as
/// [`spin_partition`](super::spin_partition).
pub fn current_partition(
    graph: &IsingGraph,
    boundary: Boundary,
    sources: &[usize],
    mode: CurrentMode,
    budget: &EnumBudget,
) -> Result<f64> {
    let system = BondSystem::ising(graph, boundary);
    let z = CurrentEnumerator::new(&system, *budget).partition(sources, mode)?;
    Ok(z * system.log_prefactor().exp())
}

/// `Σ_{∂n = sources} w^h_{r,R}(n) 1{event(supp n)}`, normalised as
/// [`current_partition`].
pub fn current_event_measure<F>(
    graph: &IsingGraph,
    boundary: Boundary,
    sources: &[usize],
    event: F,
    budget: &EnumBudget,
) -> Result<f64>
where
    F: Fn(&Support) -> bool + Sync,
{
    let system = BondSystem::ising(graph, boundary);
    let z = CurrentEnumerator::new(&system, *budget).event_measure(sources, event)?;
    Ok(z * system.log_prefactor().exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::current::ParityState;

    fn single_bond(t: f64) -> BondSystem {
        BondSystem::custom(3, &[(0, 1, t)]).unwrap()
    }

    /// Mixed-radix enumeration of all `3^b` parity states.
    fn brute_force(system: &BondSystem, sources: &[usize]) -> Vec<f64> {
        let b = system.len();
        let want = system.source_mask(sources).unwrap();
        let ends = system.endpoint_masks();
        let mut table = vec![0.0; 1 << b];
        for code in 0..3usize.pow(b as u32) {
            let mut c = code;
            let (mut w, mut support, mut boundary) = (1.0, 0usize, 0u64);
            for k in 0..b {
                let state = ParityState::ALL[c % 3];
                c /= 3;
                w *= state.weight(system.weight_parameter(k));
                if state != ParityState::Zero {
                    support |= 1 << k;
                }
                if state == ParityState::Odd {
                    boundary ^= ends[k];
                }
            }
            if boundary == want {
                table[support] += w;
            }
        }
        table
    }

    #[test]
    fn single_bond_examples() {
        let t: f64 = 0.8;
        let s = single_bond(t);
        let e = CurrentEnumerator::new(&s, EnumBudget::default());
        assert!((e.partition(&[0, 1], CurrentMode::Parity).unwrap() - t.sinh()).abs() < 1e-15);
        assert!((e.partition(&[], CurrentMode::Parity).unwrap() - t.cosh()).abs() < 1e-15);
        assert!((e.partition(&[], CurrentMode::Fast).unwrap() - t.cosh()).abs() < 1e-15);
        assert_eq!(e.partition(&[0], CurrentMode::Parity).unwrap(), 0.0);
        assert_eq!(e.partition(&[0], CurrentMode::Fast).unwrap(), 0.0);
        let conn = |s: &Support| s.connected(0, 1);
        assert!((e.event_measure(&[0, 1], conn).unwrap() - t.sinh()).abs() < 1e-15);
        assert!((e.event_measure(&[], conn).unwrap() - (t.cosh() - 1.0)).abs() < 1e-15);
        assert!((e.event_measure(&[], |_| true).unwrap() - t.cosh()).abs() < 1e-15);
        assert!((e.mean_current(&[0, 1], 0).unwrap() - t / t.tanh()).abs() < 1e-14);
        assert!((e.mean_current(&[], 0).unwrap() - t * t.tanh()).abs() < 1e-14);
    }

    #[test]
    fn table_matches_three_state_enumeration() {
        let s = BondSystem::custom(
            5,
            &[(0, 1, 0.3), (1, 2, 0.7), (2, 3, 0.2), (3, 0, 1.1), (0, 2, 0.5), (3, 4, 0.4), (1, 4, 0.9)],
        )
        .unwrap();
        for sources in [vec![], vec![0, 2], vec![1, 4], vec![0, 1, 2, 3]] {
            let want = brute_force(&s, &sources);
            for exec in [Exec::Sequential, Exec::Parallel] {
                let got = CurrentEnumerator::new(&s, EnumBudget::default())
                    .with_exec(exec)
                    .support_table(&sources)
                    .unwrap();
                for (a, b) in got.values().iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300), "{sources:?}");
                }
            }
            let e = CurrentEnumerator::new(&s, EnumBudget::default());
            let fast = e.partition(&sources, CurrentMode::Fast).unwrap();
            let slow = e.partition(&sources, CurrentMode::Parity).unwrap();
            assert!((fast - slow).abs() < 1e-13 * slow);
        }
    }

    #[test]
    fn pair_table_matches_direct_double_sum() {
        let s = BondSystem::custom(4, &[(0, 1, 0.3), (1, 2, 0.7), (2, 0, 0.2)]).unwrap();
        let e = CurrentEnumerator::new(&s, EnumBudget::default());
        let a = e.support_table(&[0, 1]).unwrap();
        let b = e.support_table(&[]).unwrap();
        let pair = e.pair_table(&[0, 1], &s, &[]).unwrap();
        let mut want = vec![0.0; 8];
        for (i, &x) in a.values().iter().enumerate() {
            for (j, &y) in b.values().iter().enumerate() {
                want[i | j] += x * y;
            }
        }
        for (p, w) in pair.values().iter().zip(&want) {
            assert!((p - w).abs() < 1e-15);
        }
        assert!((pair.total() - a.total() * b.total()).abs() < 1e-14);
    }

    #[test]
    fn budgets_and_bad_sources() {
        let s = single_bond(0.3);
        let tight = EnumBudget {
            bonds: 0,
            ..EnumBudget::default()
        };
        assert!(matches!(
            CurrentEnumerator::new(&s, tight).support_table(&[]),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(CurrentEnumerator::new(&s, EnumBudget::default()).partition(&[7], CurrentMode::Parity).is_err());
    }
}
