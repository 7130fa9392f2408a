//! Finite weighted graphs carrying an Ising model.
//!
//! Every engine (enumeration, cluster Monte Carlo, worm, percolation) works
//! on an [`IsingGraph`]. Balls produce one through
//! [`BallGeometry::graph`](crate::lattice::BallGeometry::graph); tests can
//! build arbitrary small graphs directly.

use crate::error::{Error, Result};
use crate::lattice::Bond;

#[derive(Clone, Debug, PartialEq)]
pub struct IsingGraph {
    n: usize,
    bonds: Vec<Bond>,
    boundary: Vec<usize>,
    on_boundary: Vec<bool>,
    origin: usize,
    beta: f64,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl IsingGraph {
    /// `boundary` lists the sites that carry the boundary field (or are
    /// frozen in plus mode). Bonds are normalised to `u < v` and sorted.
    pub fn new(n: usize, bonds: &[(usize, usize, f64)], boundary: &[usize], origin: usize, beta: f64) -> Result<Self> {
        if origin >= n {
            return Err(Error::InvalidArgument(format!("origin {origin} outside 0..{n}")));
        }
        let mut list = Vec::with_capacity(bonds.len());
        for &(a, b, j) in bonds {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("bad bond ({a}, {b})")));
            }
            if !(j > 0.0 && j.is_finite()) {
                return Err(Error::InvalidArgument(format!("bond ({a}, {b}) needs J > 0, got {j}")));
            }
            list.push(Bond {
                u: a.min(b),
                v: a.max(b),
                coupling: j,
            });
        }
        list.sort_by_key(|x| (x.u, x.v));
        if list.windows(2).any(|w| (w[0].u, w[0].v) == (w[1].u, w[1].v)) {
            return Err(Error::InvalidArgument("duplicate bond".into()));
        }
        let mut bnd: Vec<usize> = boundary.to_vec();
        bnd.sort_unstable();
        bnd.dedup();
        if bnd.iter().any(|&v| v >= n) {
            return Err(Error::InvalidArgument("boundary vertex out of range".into()));
        }
        Ok(Self::from_parts(n, list, bnd, origin, beta))
    }

    pub(crate) fn from_parts(n: usize, bonds: Vec<Bond>, boundary: Vec<usize>, origin: usize, beta: f64) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for (bi, b) in bonds.iter().enumerate() {
            adjacency[b.u].push((b.v, bi));
            adjacency[b.v].push((b.u, bi));
        }
        let mut on_boundary = vec![false; n];
        for &v in &boundary {
            on_boundary[v] = true;
        }
        IsingGraph {
            n,
            bonds,
            boundary,
            on_boundary,
            origin,
            beta,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v < self.n && self.on_boundary[v]
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Index reserved for the ghost vertex.
    pub fn ghost(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        let mut g = self.clone();
        g.beta = beta;
        g
    }

    /// Same graph with a different field-carrying set.
    pub fn with_boundary(&self, boundary: &[usize]) -> Self {
        let mut b = boundary.to_vec();
        b.sort_unstable();
        b.dedup();
        Self::from_parts(self.n, self.bonds.clone(), b, self.origin, self.beta)
    }

    /// Same graph with a different distinguished origin.
    pub fn with_origin(&self, origin: usize) -> Self {
        let mut g = self.clone();
        g.origin = origin;
        g
    }
}

/// Boundary condition on the sites of `∂V_r`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `h = 0`.
    Free,
    /// Finite field `h` coupling each boundary site to the ghost.
    Field(f64),
    /// `h = ∞`: boundary spins frozen to `+1`.
    Plus,
}

impl Boundary {
    /// Finite field strength (zero for free and plus).
    pub fn field(&self) -> f64 {
        match *self {
            Boundary::Field(h) => h,
            _ => 0.0,
        }
    }

    pub fn is_plus(&self) -> bool {
        matches!(self, Boundary::Plus)
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "free" | "0" => Ok(Boundary::Free),
            "plus" | "inf" | "+" => Ok(Boundary::Plus),
            other => {
                let h: f64 = other
                    .parse()
                    .map_err(|_| Error::config("boundary", format!("expected free, plus or a field value, got {other:?}")))?;
                if !(h >= 0.0 && h.is_finite()) {
                    return Err(Error::config("boundary", "field must be finite and nonnegative"));
                }
                Ok(if h == 0.0 { Boundary::Free } else { Boundary::Field(h) })
            }
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Free => write!(f, "free"),
            Boundary::Field(h) => write!(f, "{h}"),
            Boundary::Plus => write!(f, "plus"),
        }
    }
}
