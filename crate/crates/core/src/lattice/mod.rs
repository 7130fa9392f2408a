//! Balls in Z^d, their boundaries, bond sets and the ghost vertex.

mod coupling;
pub mod symmetry;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use coupling::{CouplingSpec, Norm};
pub(crate) use coupling::odometer;

use crate::error::{Error, Result};
use crate::graph::IsingGraph;

/// A bond `{u, v}` of the ball with `u < v` in canonical vertex order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    pub coupling: f64,
}

/// Which distance to the boundary to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// `min_{x in boundary} |u - x|`.
    Exact,
    /// `max(| r - |u| |, 1)`.
    #[default]
    Radial,
}

/// Immutable geometry of `V_R`, the boundary of `V_r`, the bonds of `V_R`
/// and the ghost bonds attached to the boundary.
///
/// Vertices are in lexicographic order. The ghost vertex has index
/// `vertices().len()`.
#[derive(Clone, Debug)]
pub struct BallGeometry {
    coupling: CouplingSpec,
    norm: Norm,
    outer: f64,
    inner: f64,
    vertices: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    in_inner: Vec<bool>,
    graph: IsingGraph,
}

/// Builds `V_R`, `∂V_r`, `B_R` and the ghost bonds.
pub fn build_ball(coupling: &CouplingSpec, outer: f64, inner: f64, norm: Norm) -> Result<BallGeometry> {
    if !(inner >= 0.0 && inner < outer && outer.is_finite()) {
        return Err(Error::InvalidRadii { inner, outer });
    }
    if coupling.is_degenerate() {
        return Err(Error::DegenerateCoupling("every J vanishes".into()));
    }
    let d = coupling.dimension();
    let m = outer.floor() as i64;
    let mut vertices = Vec::new();
    let mut x = vec![-m; d];
    loop {
        if norm.within(&x, outer) {
            vertices.push(x.clone());
        }
        if !odometer(&mut x, -m, m) {
            break;
        }
    }
    let index: HashMap<Vec<i64>, usize> =
        vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let in_inner: Vec<bool> = vertices.iter().map(|v| norm.within(v, inner)).collect();

    let mut bonds = Vec::new();
    let mut y = vec![0i64; d];
    for (ui, u) in vertices.iter().enumerate() {
        for (e, j) in coupling.offsets() {
            for k in 0..d {
                y[k] = u[k] + e[k];
            }
            if let Some(&vi) = index.get(&y) {
                if vi > ui {
                    bonds.push(Bond { u: ui, v: vi, coupling: *j });
                }
            }
        }
    }
    bonds.sort_by_key(|a| (a.u, a.v));
    let origin = index[&vec![0i64; d]];
    let probe = IsingGraph::from_parts(vertices.len(), bonds, Vec::new(), origin, coupling.beta());
    let boundary: Vec<usize> = (0..vertices.len())
        .filter(|&v| !in_inner[v] && probe.neighbors(v).iter().any(|&(w, _)| in_inner[w]))
        .collect();
    let graph = probe.with_boundary(&boundary);
    Ok(BallGeometry {
        coupling: coupling.clone(),
        norm,
        outer,
        inner,
        vertices,
        index,
        in_inner,
        graph,
    })
}

impl BallGeometry {
    pub fn coupling(&self) -> &CouplingSpec {
        &self.coupling
    }

    pub fn dimension(&self) -> usize {
        self.coupling.dimension()
    }

    pub fn beta(&self) -> f64 {
        self.coupling.beta()
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn origin(&self) -> usize {
        self.graph.origin()
    }

    /// The Ising model of this ball: bonds of `V_R`, field on `∂V_r`.
    pub fn graph(&self) -> &IsingGraph {
        &self.graph
    }

    /// Index reserved for the ghost vertex.
    pub fn ghost(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_inner(&self, v: usize) -> bool {
        self.in_inner[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.graph.is_boundary(v)
    }

    /// `∂V_r` in canonical order.
    pub fn boundary(&self) -> &[usize] {
        self.graph.boundary()
    }

    /// Bonds of `V_R` with positive coupling.
    pub fn bonds(&self) -> &[Bond] {
        self.graph.bonds()
    }

    /// Ghost bonds `{v, g}`, one per boundary vertex, in boundary order.
    pub fn ghost_bonds(&self) -> Vec<(usize, usize)> {
        self.boundary().iter().map(|&v| (v, self.ghost())).collect()
    }

    /// `(neighbour, bond index)` pairs of a vertex.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        self.graph.neighbors(v)
    }

    /// Boundary of `V_s` computed on this `V_R`, for nested-radius schedules.
    pub fn boundary_at(&self, s: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| {
                !self.norm.within(&self.vertices[v], s)
                    && self
                        .neighbors(v)
                        .iter()
                        .any(|&(w, _)| self.norm.within(&self.vertices[w], s))
            })
            .collect()
    }

    pub fn length(&self, v: usize) -> f64 {
        self.norm.length(&self.vertices[v])
    }

    pub fn distance(&self, a: &[i64], b: &[i64]) -> f64 {
        let diff: Vec<i64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.norm.length(&diff)
    }

    /// Line-oriented adjacency dump for debugging.
    pub fn dump_adjacency(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# d={} R={} r={} norm={} vertices={} bonds={} boundary={}",
            self.dimension(),
            self.outer,
            self.inner,
            self.norm,
            self.len(),
            self.bonds().len(),
            self.boundary().len()
        );
        for (i, v) in self.vertices.iter().enumerate() {
            let role = if self.in_inner[i] {
                "inner"
            } else if self.is_boundary(i) {
                "boundary"
            } else {
                "outer"
            };
            let coords: Vec<String> = v.iter().map(|c| c.to_string()).collect();
            let nbrs: Vec<String> = self.neighbors(i).iter().map(|(w, _)| w.to_string()).collect();
            let _ = writeln!(out, "vertex {} {} {} -> {}", i, coords.join(" "), role, nbrs.join(" "));
        }
        for b in self.bonds() {
            let _ = writeln!(out, "bond {} {} {}", b.u, b.v, b.coupling);
        }
        for v in self.boundary() {
            let _ = writeln!(out, "ghost {} {}", v, self.ghost());
        }
        out
    }
}

/// Distance from an arbitrary lattice point to `∂V_r`.
pub fn dist_to_boundary(geometry: &BallGeometry, u: &[i64], mode: DistanceMode) -> f64 {
    match mode {
        DistanceMode::Exact => geometry
            .boundary()
            .iter()
            .map(|&x| geometry.distance(u, &geometry.vertices[x]))
            .fold(f64::INFINITY, f64::min),
        DistanceMode::Radial => radial_distance(geometry.inner, geometry.norm.length(u)),
    }
}

/// `max(| r - |u| |, 1)`.
pub fn radial_distance(r: f64, length: f64) -> f64 {
    (r - length).abs().max(1.0)
}
