//! Markov-chain Monte Carlo for the Ising model on balls.
//!
//! A plus boundary freezes the boundary spins; a finite field is a frozen
//! ghost spin coupled to every boundary site with strength `h`. Cluster
//! moves never flip a frozen spin.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::graph::{Boundary, IsingGraph};
use crate::lattice::BallGeometry;
use crate::percolation::UnionFind;
use crate::rng::{stream_rng, Rng};
use crate::stats::{loglog_fit, Estimate, FitResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Wolff moves.
    SingleClusterFlip,
    /// Swendsen-Wang sweeps with cluster (improved) estimators.
    FullLatticeClusterSweep,
    /// Metropolis sweeps at uniformly random sites.
    LocalFlip,
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single-cluster-flip" | "wolff" => Ok(Sampler::SingleClusterFlip),
            "full-lattice-cluster-sweep" | "swendsen-wang" | "sw" => Ok(Sampler::FullLatticeClusterSweep),
            "local-flip" | "metropolis" => Ok(Sampler::LocalFlip),
            other => Err(Error::config("sampler", format!("unknown sampler {other:?}"))),
        }
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::SingleClusterFlip => "single-cluster-flip",
            Sampler::FullLatticeClusterSweep => "full-lattice-cluster-sweep",
            Sampler::LocalFlip => "local-flip",
        })
    }
}

/// Chain parameters. A sweep is one Swendsen-Wang update, one Metropolis
/// pass, or a fixed number of Wolff clusters chosen during thermalization so
/// that they touch about as many sites as there are free spins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub sampler: Sampler,
    pub thermalization: u64,
    pub measurements: u64,
    pub stride: u64,
    pub seed: u64,
    pub replicas: u32,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            sampler: Sampler::FullLatticeClusterSweep,
            thermalization: 1000,
            measurements: 10_000,
            stride: 1,
            seed: 1,
            replicas: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thermalization == 0 || self.measurements == 0 || self.stride == 0 || self.replicas == 0 {
            return Err(Error::InvalidArgument(
                "chain counts must be positive and the stride at least 1".into(),
            ));
        }
        if self.measurements < self.stride {
            return Err(Error::InvalidArgument("fewer measurement sweeps than the stride".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Spin observable measured along a chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    /// `σ_v`.
    Spin(usize),
    /// `σ_x σ_y`.
    TwoPoint(usize, usize),
}

struct McSystem {
    spins: usize,
    ends: Vec<(usize, usize)>,
    k: Vec<f64>,
    threshold: Vec<u64>,
    adjacency: Vec<Vec<(usize, usize)>>,
    frozen: Vec<bool>,
    free: Vec<usize>,
    anchor: Option<usize>,
}

impl McSystem {
    fn new(graph: &IsingGraph, boundary: Boundary) -> Self {
        let n = graph.len();
        let beta = graph.beta();
        let mut ends: Vec<(usize, usize)> = graph.bonds().iter().map(|b| (b.u, b.v)).collect();
        let mut k: Vec<f64> = graph.bonds().iter().map(|b| beta * b.coupling).collect();
        let mut frozen = vec![false; n];
        let mut spins = n;
        match boundary {
            Boundary::Free => {}
            Boundary::Plus => {
                for &v in graph.boundary() {
                    frozen[v] = true;
                }
            }
            Boundary::Field(h) => {
                let g = graph.ghost();
                spins = n + 1;
                frozen.push(true);
                for &v in graph.boundary() {
                    ends.push((v, g));
                    k.push(beta * h);
                }
            }
        }
        let mut adjacency = vec![Vec::new(); spins];
        for (i, &(u, v)) in ends.iter().enumerate() {
            adjacency[u].push((v, i));
            adjacency[v].push((u, i));
        }
        let threshold = k
            .iter()
            .map(|&kk| ((-(-2.0 * kk).exp_m1()) * 4294967296.0).round() as u64)
            .collect();
        let free = (0..spins).filter(|&v| !frozen[v]).collect();
        let anchor = (0..spins).find(|&v| frozen[v]);
        McSystem {
            spins,
            ends,
            k,
            threshold,
            adjacency,
            frozen,
            free,
            anchor,
        }
    }
}

struct Chain<'a> {
    sys: &'a McSystem,
    sigma: Vec<i8>,
    rng: Rng,
    uf: UnionFind,
    stamp: Vec<u32>,
    generation: u32,
    stack: Vec<usize>,
    cluster_spin: Vec<i8>,
    moves_per_sweep: usize,
    adapting: bool,
    touched: f64,
    moves: f64,
}

impl<'a> Chain<'a> {
    fn new(sys: &'a McSystem, rng: Rng) -> Self {
        Chain {
            sys,
            sigma: vec![1; sys.spins],
            rng,
            uf: UnionFind::new(sys.spins),
            stamp: vec![0; sys.spins],
            generation: 0,
            stack: Vec::new(),
            cluster_spin: vec![0; sys.spins],
            moves_per_sweep: 1,
            adapting: true,
            touched: 0.0,
            moves: 0.0,
        }
    }

    fn bond_open(&mut self, b: usize) -> bool {
        (self.rng.random::<u32>() as u64) < self.sys.threshold[b]
    }

    /// One Swendsen-Wang update; leaves the cluster structure in `uf`.
    fn sw_sweep(&mut self) {
        self.uf.reset();
        if let Some(a) = self.sys.anchor {
            for v in 0..self.sys.spins {
                if self.sys.frozen[v] {
                    self.uf.union(a, v);
                }
            }
        }
        for b in 0..self.sys.ends.len() {
            let (u, v) = self.sys.ends[b];
            if self.sigma[u] == self.sigma[v] && self.bond_open(b) {
                self.uf.union(u, v);
            }
        }
        self.cluster_spin.fill(0);
        if let Some(a) = self.sys.anchor {
            let r = self.uf.find(a);
            self.cluster_spin[r] = 1;
        }
        for v in 0..self.sys.spins {
            let r = self.uf.find(v);
            if self.cluster_spin[r] == 0 {
                self.cluster_spin[r] = if self.rng.random::<bool>() { 1 } else { -1 };
            }
            self.sigma[v] = self.cluster_spin[r];
        }
    }

    /// One Wolff cluster; returns its size (also when attached to a frozen
    /// spin, in which case nothing flips).
    fn wolff_move(&mut self) -> usize {
        let free = &self.sys.free;
        if free.is_empty() {
            return 1;
        }
        let seed = free[self.rng.random_range(0..free.len())];
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        let gen = self.generation;
        let s = self.sigma[seed];
        self.stamp[seed] = gen;
        self.stack.clear();
        self.stack.push(seed);
        let mut members = vec![seed];
        let mut attached = false;
        'grow: while let Some(v) = self.stack.pop() {
            for i in 0..self.sys.adjacency[v].len() {
                let (w, b) = self.sys.adjacency[v][i];
                if self.stamp[w] != gen && self.sigma[w] == s && self.bond_open(b) {
                    if self.sys.frozen[w] {
                        attached = true;
                        break 'grow;
                    }
                    self.stamp[w] = gen;
                    self.stack.push(w);
                    members.push(w);
                }
            }
        }
        if !attached {
            for &v in &members {
                self.sigma[v] = -s;
            }
        }
        members.len()
    }

    /// `moves_per_sweep` Wolff moves. During thermalization the count adapts
    /// to the mean cluster size; it is frozen before measuring starts.
    fn wolff_sweep(&mut self) {
        let mut touched = 0;
        for _ in 0..self.moves_per_sweep {
            touched += self.wolff_move();
        }
        if self.adapting {
            self.touched += touched as f64;
            self.moves += self.moves_per_sweep as f64;
            let mean = self.touched / self.moves;
            self.moves_per_sweep = ((self.sys.free.len() as f64 / mean).round() as usize).max(1);
        }
    }

    /// `|free|` single-spin updates at uniformly random sites.
    fn metropolis_sweep(&mut self) {
        let free = &self.sys.free;
        for _ in 0..free.len() {
            let v = free[self.rng.random_range(0..free.len())];
            let field: f64 = self.sys.adjacency[v]
                .iter()
                .map(|&(w, b)| self.sys.k[b] * self.sigma[w] as f64)
                .sum();
            let delta = 2.0 * self.sigma[v] as f64 * field;
            if delta <= 0.0 || self.rng.random::<f64>() < (-delta).exp() {
                self.sigma[v] = -self.sigma[v];
            }
        }
    }

    fn sweep(&mut self, sampler: Sampler) {
        match sampler {
            Sampler::FullLatticeClusterSweep => self.sw_sweep(),
            Sampler::SingleClusterFlip => self.wolff_sweep(),
            Sampler::LocalFlip => self.metropolis_sweep(),
        }
    }

    fn measure(&mut self, sampler: Sampler, obs: &Observable) -> f64 {
        if sampler == Sampler::FullLatticeClusterSweep {
            // cluster estimators from the bond configuration of the last sweep
            return match *obs {
                Observable::Spin(v) => match self.sys.anchor {
                    Some(a) => f64::from(u8::from(self.uf.find(v) == self.uf.find(a))),
                    None => 0.0,
                },
                Observable::TwoPoint(x, y) => f64::from(u8::from(self.uf.find(x) == self.uf.find(y))),
            };
        }
        match *obs {
            Observable::Spin(v) => self.sigma[v] as f64,
            Observable::TwoPoint(x, y) => (self.sigma[x] * self.sigma[y]) as f64,
        }
    }
}

/// Runs the chain and returns one estimate per observable, replicas merged.
pub fn estimate(
    graph: &IsingGraph,
    boundary: Boundary,
    chain: &ChainConfig,
    observables: &[Observable],
    exec: Exec,
) -> Result<Vec<Estimate>> {
    chain.validate()?;
    for obs in observables {
        let (a, b) = match *obs {
            Observable::Spin(v) => (v, v),
            Observable::TwoPoint(x, y) => (x, y),
        };
        if a >= graph.len() || b >= graph.len() {
            return Err(Error::InvalidArgument(format!("observable {obs:?} outside V_R")));
        }
    }
    let sys = McSystem::new(graph, boundary);
    let per_replica = exec.map_range(chain.replicas as usize, |rep| {
        let mut c = Chain::new(&sys, stream_rng(chain.seed, rep as u64));
        for _ in 0..chain.thermalization {
            c.sweep(chain.sampler);
        }
        c.adapting = false;
        let count = (chain.measurements / chain.stride) as usize;
        let mut series = vec![Vec::with_capacity(count); observables.len()];
        for _ in 0..count {
            for _ in 0..chain.stride {
                c.sweep(chain.sampler);
            }
            for (s, obs) in series.iter_mut().zip(observables) {
                s.push(c.measure(chain.sampler, obs));
            }
        }
        series.iter().map(|s| Estimate::from_series(s)).collect::<Vec<_>>()
    });
    let out: Vec<Estimate> = (0..observables.len())
        .map(|i| {
            let obs = observables[i];
            if let Observable::TwoPoint(x, y) = obs {
                if x == y {
                    return Estimate {
                        samples: per_replica.iter().map(|r| r[i].samples).sum(),
                        ..Estimate::exact(1.0)
                    };
                }
            }
            if let (Observable::Spin(v), Boundary::Plus) = (obs, boundary) {
                if graph.is_boundary(v) {
                    return Estimate::exact(1.0);
                }
            }
            let parts: Vec<Estimate> = per_replica.iter().map(|r| r[i]).collect();
            Estimate::merge(&parts)
        })
        .collect();
    for (e, obs) in out.iter().zip(observables) {
        let window = e.samples as f64 / chain.replicas as f64;
        if e.tau > window / 20.0 {
            log::warn!(
                "observable {obs:?}: autocorrelation time {:.1} exceeds 1/20 of the {} measurements; the chain may not be thermalized",
                e.tau,
                window
            );
        }
    }
    Ok(out)
}

/// `<σ_o>^+_{r,R}`, boundary spins frozen to `+1`.
pub fn estimate_one_arm_plus(geometry: &BallGeometry, chain: &ChainConfig) -> Result<Estimate> {
    if geometry.boundary().is_empty() {
        return Err(Error::EmptyBoundary);
    }
    Ok(estimate(
        geometry.graph(),
        Boundary::Plus,
        chain,
        &[Observable::Spin(geometry.origin())],
        Exec::default(),
    )?
    .remove(0))
}

/// Free-boundary `<σ_xσ_y>_R` for every pair from one chain.
pub fn estimate_two_point(geometry: &BallGeometry, chain: &ChainConfig, pairs: &[(usize, usize)]) -> Result<Vec<Estimate>> {
    let obs: Vec<Observable> = pairs.iter().map(|&(x, y)| Observable::TwoPoint(x, y)).collect();
    estimate(geometry.graph(), Boundary::Free, chain, &obs, Exec::default())
}

/// One row of a Tasaki comparison `<σ_o>^+_{|x|/3} ≥ sqrt(<σ_oσ_x>)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TasakiRow {
    pub distance: f64,
    pub radius: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `(lhs - rhs)` in combined standard errors.
    pub margin: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TasakiReport {
    pub rows: Vec<TasakiRow>,
}

impl TasakiReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated).count()
    }
}

/// Matches every `|x|` with `r = |x|/3` and flags violations beyond three
/// combined standard errors. `min_distance` is usually three coupling
/// ranges; shorter distances are skipped.
pub fn tasaki_check(one_arm: &[(f64, Estimate)], two_point: &[(f64, Estimate)], min_distance: f64) -> Result<TasakiReport> {
    let mut rows = Vec::new();
    for &(x, g) in two_point {
        if x < min_distance {
            continue;
        }
        let Some(&(r, m)) = one_arm.iter().find(|(r, _)| (r - x / 3.0).abs() <= 1e-9 * x.max(1.0)) else {
            continue;
        };
        let root = g.mean.max(0.0).sqrt();
        let rhs = Estimate {
            mean: root,
            stderr: if root > 0.0 { g.stderr / (2.0 * root) } else { g.stderr.sqrt() },
            tau: g.tau,
            samples: g.samples,
        };
        let sigma = (m.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
        let diff = m.mean - rhs.mean;
        let margin = if sigma > 0.0 {
            diff / sigma
        } else if diff >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        rows.push(TasakiRow {
            distance: x,
            radius: r,
            lhs: m,
            rhs,
            margin,
            violated: margin < -3.0,
        });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no (r, |x|) pair with r = |x|/3".into()));
    }
    Ok(TasakiReport { rows })
}

/// Weighted log-log fit of `<σ_o>^+_r` against `r`; the slope estimates `-ρ`.
pub fn estimate_rho(series: &[(f64, Estimate)]) -> Result<FitResult> {
    if let Some((r, e)) = series.iter().find(|(_, e)| e.mean - 3.0 * e.stderr <= 0.0) {
        return Err(Error::InsufficientData(format!(
            "estimate at r = {r} is not positive at 3σ ({} ± {})",
            e.mean, e.stderr
        )));
    }
    let points: Vec<(f64, f64, f64)> = series.iter().map(|(r, e)| (*r, e.mean, e.stderr)).collect();
    let mut fit = loglog_fit(&points)?;
    fit.note = Some(
        "finite-size slope over the measured radii; it cannot tell the liminf in the definition of rho from a limsup"
            .into(),
    );
    Ok(fit)
}
