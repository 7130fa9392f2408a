use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::symmetry::canonical_class;
use crate::error::{Error, Result};
use crate::kv::KvFile;

/// Norm used to define balls. Membership is decided on integers wherever the
/// norm allows it, so boundary points are never ambiguous.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Manhattan,
    Max,
}

impl Norm {
    pub fn length(self, x: &[i64]) -> f64 {
        match self {
            Norm::Euclidean => (x.iter().map(|v| v * v).sum::<i64>() as f64).sqrt(),
            Norm::Manhattan => x.iter().map(|v| v.abs()).sum::<i64>() as f64,
            Norm::Max => x.iter().map(|v| v.abs()).max().unwrap_or(0) as f64,
        }
    }

    /// `|x| <= radius`.
    pub fn within(self, x: &[i64], radius: f64) -> bool {
        match self {
            Norm::Euclidean => (x.iter().map(|v| v * v).sum::<i64>() as f64) <= radius * radius,
            _ => self.length(x) <= radius,
        }
    }
}

impl FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Norm::Euclidean),
            "manhattan" | "l1" => Ok(Norm::Manhattan),
            "max" | "linf" | "sup" => Ok(Norm::Max),
            other => Err(Error::config("norm", format!("unknown norm `{other}`"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::Euclidean => "euclidean",
            Norm::Manhattan => "manhattan",
            Norm::Max => "max",
        })
    }
}

/// Translation-invariant, lattice-symmetric, finite-range ferromagnetic
/// coupling together with the inverse temperature.
///
/// Couplings are stored per displacement class (absolute coordinates sorted
/// in decreasing order), so Z^d symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSpec {
    dimension: usize,
    range: u32,
    values: BTreeMap<Vec<u32>, f64>,
    beta: f64,
    offsets: Vec<(Vec<i64>, f64)>,
}

impl CouplingSpec {
    pub fn new(
        dimension: usize,
        range: u32,
        values: BTreeMap<Vec<u32>, f64>,
        beta: f64,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidCoupling("dimension must be positive".into()));
        }
        if range == 0 {
            return Err(Error::InvalidCoupling("range must be positive".into()));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidCoupling(format!("beta must be finite and >= 0, got {beta}")));
        }
        let mut canon = BTreeMap::new();
        for (class, j) in values {
            if class.len() != dimension {
                return Err(Error::InvalidCoupling(format!(
                    "displacement {class:?} does not have {dimension} coordinates"
                )));
            }
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::InvalidCoupling(format!("J{class:?} = {j} must be finite and >= 0")));
            }
            let key = canonical_class(&class.iter().map(|&v| v as i64).collect::<Vec<_>>());
            if key.iter().all(|&v| v == 0) && j != 0.0 {
                return Err(Error::InvalidCoupling("self-coupling J(o,o) must vanish".into()));
            }
            let sq: u64 = key.iter().map(|&v| (v as u64) * (v as u64)).sum();
            if j > 0.0 && sq > (range as u64).pow(2) {
                return Err(Error::InvalidCoupling(format!(
                    "J{key:?} > 0 lies outside the range {range}"
                )));
            }
            canon.insert(key, j);
        }
        let mut spec = CouplingSpec {
            dimension,
            range,
            values: canon,
            beta,
            offsets: Vec::new(),
        };
        spec.offsets = spec.compute_offsets();
        Ok(spec)
    }

    /// Nearest-neighbour coupling `J` on Z^d.
    pub fn nearest_neighbor(dimension: usize, j: f64, beta: f64) -> Result<Self> {
        let mut class = vec![0u32; dimension];
        if dimension > 0 {
            class[0] = 1;
        }
        Self::new(dimension, 1, BTreeMap::from([(class, j)]), beta)
    }

    /// Uniform coupling `J` on every `0 < |x| <= range` (Euclidean).
    pub fn spread_out(dimension: usize, range: u32, j: f64, beta: f64) -> Result<Self> {
        let mut values = BTreeMap::new();
        let m = range as i64;
        let mut x = vec![-m; dimension];
        loop {
            let sq: i64 = x.iter().map(|v| v * v).sum();
            if sq > 0 && sq <= m * m {
                values.insert(canonical_class(&x), j);
            }
            if !odometer(&mut x, -m, m) {
                break;
            }
        }
        Self::new(dimension, range, values, beta)
    }

    /// Loads `dimension`, `range`, `coupling`, `beta` from a key-value file.
    /// The coupling table looks like `1,0:1.0; 1,1:0.25`.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let dimension: usize = kv.parse_required("dimension")?;
        let range: u32 = kv.parse_or("range", 1)?;
        let beta: f64 = kv.parse_required("beta")?;
        let values = match kv.get("coupling") {
            Some(table) => parse_table(table, dimension)?,
            None => {
                let j: f64 = kv.parse_or("j", 1.0)?;
                let mut class = vec![0u32; dimension];
                class[0] = 1;
                BTreeMap::from([(class, j)])
            }
        };
        Self::new(dimension, range, values, beta)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn values(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.values
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.dimension, self.range, self.values.clone(), beta)
    }

    /// `J_{o,x}`.
    pub fn j(&self, x: &[i64]) -> f64 {
        self.values.get(&canonical_class(x)).copied().unwrap_or(0.0)
    }

    /// Displacements with positive coupling, in lexicographic order.
    pub fn offsets(&self) -> &[(Vec<i64>, f64)] {
        &self.offsets
    }

    pub fn is_degenerate(&self) -> bool {
        self.offsets.is_empty()
    }

    fn compute_offsets(&self) -> Vec<(Vec<i64>, f64)> {
        let m = self.range as i64;
        let mut out = Vec::new();
        let mut x = vec![-m; self.dimension];
        loop {
            let j = self.j(&x);
            if j > 0.0 {
                out.push((x.clone(), j));
            }
            if !odometer(&mut x, -m, m) {
                break;
            }
        }
        out
    }
}

fn parse_table(table: &str, dimension: usize) -> Result<BTreeMap<Vec<u32>, f64>> {
    let mut values = BTreeMap::new();
    for entry in table.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (class, j) = entry
            .split_once(':')
            .ok_or_else(|| Error::config("coupling", format!("entry `{entry}` needs `displacement:J`")))?;
        let coords = class
            .split(',')
            .map(|c| c.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::config("coupling", format!("bad displacement `{class}`")))?;
        if coords.len() != dimension {
            return Err(Error::config(
                "coupling",
                format!("displacement `{class}` needs {dimension} coordinates"),
            ));
        }
        let j: f64 = j
            .trim()
            .parse()
            .map_err(|_| Error::config("coupling", format!("bad value in `{entry}`")))?;
        values.insert(canonical_class(&coords), j);
    }
    Ok(values)
}

/// Advances `x` through the cube `[lo, hi]^d` in lexicographic order.
/// Returns false after the last point.
pub(crate) fn odometer(x: &mut [i64], lo: i64, hi: i64) -> bool {
    for i in (0..x.len()).rev() {
        if x[i] < hi {
            x[i] += 1;
            return true;
        }
        x[i] = lo;
    }
    false
}
