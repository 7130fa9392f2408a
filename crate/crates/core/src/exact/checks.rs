//! Exact verification of the identities and inequalities built on currents.

use std::fmt;

use super::currents::{CurrentEnumerator, CurrentMode};
use super::spins::SpinEnumeration;
use super::sum::CompensatedSum;
use super::EnumBudget;
use crate::current::{vertex_mask, BondSystem, Support};
use crate::error::{Error, Result};
use crate::graph::{Boundary, IsingGraph};

/// Comparison tolerance: relative, with an absolute floor.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            relative: 1e-10,
            absolute: 1e-12,
        }
    }
}

impl Tolerance {
    fn slack(&self, a: f64, b: f64) -> f64 {
        (self.relative * a.abs().max(b.abs())).max(self.absolute)
    }
}

/// What a [`CheckLine`] asserts about its two sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Equal,
    /// `lhs ≥ rhs`.
    AtLeast,
    /// `lhs ≤ rhs`.
    AtMost,
}

/// One checked relation with both sides.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl CheckLine {
    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64, tol: Tolerance) -> Self {
        let passed = (lhs - rhs).abs() <= tol.slack(lhs, rhs);
        CheckLine {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::Equal,
            passed,
        }
    }

    pub fn at_least(name: impl Into<String>, lhs: f64, rhs: f64, tol: Tolerance) -> Self {
        let passed = lhs >= rhs - tol.slack(lhs, rhs);
        CheckLine {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::AtLeast,
            passed,
        }
    }

    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, tol: Tolerance) -> Self {
        let passed = lhs <= rhs + tol.slack(lhs, rhs);
        CheckLine {
            name: name.into(),
            lhs,
            rhs,
            relation: Relation::AtMost,
            passed,
        }
    }

    /// `|lhs - rhs| / max(|lhs|, 1)`.
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(1.0)
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::Equal => "==",
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        };
        write!(
            f,
            "{} lhs={:.15e} {} rhs={:.15e} rel={:.3e} {}",
            self.name,
            self.lhs,
            op,
            self.rhs,
            self.discrepancy(),
            if self.passed { "pass" } else { "FAIL" }
        )
    }
}

fn require_finite_field(boundary: Boundary, what: &str) -> Result<()> {
    if boundary.is_plus() {
        return Err(Error::InvalidArgument(format!("{what} needs a finite field")));
    }
    Ok(())
}

fn toggle(set: &[usize], x: usize, y: usize) -> Vec<usize> {
    let mut v = set.to_vec();
    v.push(x);
    v.push(y);
    v
}

/// Both sides of the source-switching identity
///
/// `Σ_{∂n=B, ∂m=∅} w(n) W_A(m) 1{x ↔ y in A} f(n+m)
///   = Σ_{∂n=B△x△y, ∂m=x△y} w(n) W_A(m) f(n+m)`
///
/// with `f` a function of the support of `n + m`. When `x = y` the identity
/// needs `x ∈ A`.
#[allow(clippy::too_many_arguments)]
pub fn verify_switching<F>(
    graph: &IsingGraph,
    boundary: Boundary,
    a: &[usize],
    b: &[usize],
    x: usize,
    y: usize,
    f: F,
    budget: &EnumBudget,
) -> Result<CheckLine>
where
    F: Fn(&Support) -> f64 + Sync,
{
    require_finite_field(boundary, "switching")?;
    let n = graph.len();
    if x >= n || y >= n || a.iter().any(|&v| v >= n) {
        return Err(Error::InvalidArgument("switching vertices must lie in V_R".into()));
    }
    let a_mask = vertex_mask(a);
    if x == y && a_mask >> x & 1 == 0 {
        return Err(Error::InvalidArgument("x = y requires x ∈ A".into()));
    }
    let n_sys = BondSystem::ising(graph, boundary);
    let m_sys = BondSystem::restricted(graph, a);
    let e = CurrentEnumerator::new(&n_sys, *budget);
    let left = e.pair_table(b, &m_sys, &[])?;
    let lhs = e.sum_over_supports(left.values(), |s| if s.connected_in(x, y, a_mask) { f(s) } else { 0.0 });
    let right = e.pair_table(&toggle(b, x, y), &m_sys, &[x, y])?;
    let rhs = e.sum_over_supports(right.values(), &f);
    Ok(CheckLine::equal("switching-identity", lhs, rhs, Tolerance::default()))
}

/// Both sides of the finite-volume correlation inequality
///
/// `<σ_o>^h ≥ (Σ_x <σ_x>^h <σ_oσ_x>)² / (Σ_{x,y} <σ_oσ_x><σ_xσ_y>
///     + Σ_{u,x,y} <σ_oσ_u><σ_uσ_x><σ_uσ_y><σ_uσ_xσ_y>^h)`
///
/// where `x, y` range over `∂V_r`, `u` over `V_R`, and unmarked brackets are
/// free-boundary expectations. With a plus boundary the `h`-brackets are
/// the frozen-spin ones.
pub fn verify_correlation_inequality(graph: &IsingGraph, boundary: Boundary, budget: &EnumBudget) -> Result<CheckLine> {
    let bnd = graph.boundary();
    if bnd.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let free = SpinEnumeration::new(graph, Boundary::Free, budget)?.correlation_table();
    let field = SpinEnumeration::new(graph, boundary, budget)?.correlation_table();
    let o = graph.origin();
    let two = |p: usize, q: usize| free.expect(&[p, q]);
    let mut numerator = CompensatedSum::new();
    for &x in bnd {
        numerator.add(field.expect(&[x]) * two(o, x));
    }
    let numerator = numerator.value().powi(2);
    let mut denominator = CompensatedSum::new();
    for &x in bnd {
        for &y in bnd {
            denominator.add(two(o, x) * two(x, y));
        }
    }
    for u in 0..graph.len() {
        let ou = two(o, u);
        for &x in bnd {
            let ux = two(u, x);
            for &y in bnd {
                denominator.add(ou * ux * two(u, y) * field.expect(&[u, x, y]));
            }
        }
    }
    let denominator = denominator.value();
    let rhs = if denominator > 0.0 { numerator / denominator } else { 0.0 };
    Ok(CheckLine::at_least(
        "finite-volume-correlation-inequality",
        field.expect(&[o]),
        rhs,
        Tolerance::default(),
    ))
}

/// Exact first and second moments of `X_r(n + m)`, the number of boundary
/// points joined to `o` inside `V_R`, for `∂n = {o, g}` under `w^h / Z^h`
/// and `∂m = ∅` under `w_R / Z_R`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SecondMomentExact {
    pub m1: f64,
    pub m2: f64,
    /// `<σ_o>^h_{r,R}`.
    pub magnetization: f64,
    /// `Σ_x <σ_x>^h <σ_oσ_x>_R`.
    pub switched: f64,
}

impl SecondMomentExact {
    pub fn ratio(&self) -> f64 {
        if self.m2 > 0.0 {
            self.m1 * self.m1 / self.m2
        } else {
            0.0
        }
    }

    /// The rewriting of `m1` by switching, and the Schwarz bound.
    pub fn checks(&self) -> Vec<CheckLine> {
        let tol = Tolerance::default();
        vec![
            CheckLine::equal("second-moment-switching", self.m1, self.switched, tol),
            CheckLine::at_least("second-moment-schwarz", self.magnetization, self.ratio(), tol),
        ]
    }
}

pub fn second_moment_exact(graph: &IsingGraph, boundary: Boundary, budget: &EnumBudget) -> Result<SecondMomentExact> {
    require_finite_field(boundary, "the second-moment identity")?;
    if boundary.field() <= 0.0 {
        return Err(Error::InvalidArgument("the second-moment identity needs h > 0".into()));
    }
    let n_sys = BondSystem::ising(graph, boundary);
    let m_sys = BondSystem::ising(graph, Boundary::Free);
    let en = CurrentEnumerator::new(&n_sys, *budget);
    let em = CurrentEnumerator::new(&m_sys, *budget);
    let o = graph.origin();
    let g = graph.ghost();
    let zh = en.partition(&[], CurrentMode::Fast)?;
    let zr = em.partition(&[], CurrentMode::Fast)?;
    let inside = if graph.len() >= 64 { u64::MAX } else { (1u64 << graph.len()) - 1 };
    let bnd = graph.boundary();
    let count = |s: &Support| {
        let c = s.cluster_in(o, inside);
        bnd.iter().filter(|&&x| c >> x & 1 == 1).count() as f64
    };
    let pair = en.pair_table(&[o, g], &m_sys, &[])?;
    let norm = zh * zr;
    let m1 = en.sum_over_supports(pair.values(), count) / norm;
    let m2 = en.sum_over_supports(pair.values(), |s| count(s).powi(2)) / norm;
    let magnetization = en.partition(&[o, g], CurrentMode::Fast)? / zh;
    let mut switched = CompensatedSum::new();
    for &x in bnd {
        let sx = en.partition(&[x, g], CurrentMode::Fast)? / zh;
        let ox = em.partition(&[o, x], CurrentMode::Fast)? / zr;
        switched.add(sx * ox);
    }
    Ok(SecondMomentExact {
        m1,
        m2,
        magnetization,
        switched: switched.value(),
    })
}

/// Spin-side against current-side partition function and two-point
/// functions (and one-point functions when a ghost is present).
pub fn verify_representation(
    graph: &IsingGraph,
    boundary: Boundary,
    pairs: &[(usize, usize)],
    budget: &EnumBudget,
) -> Result<Vec<CheckLine>> {
    let tol = Tolerance::default();
    let spins = SpinEnumeration::new(graph, boundary, budget)?;
    let system = BondSystem::ising(graph, boundary);
    let e = CurrentEnumerator::new(&system, *budget);
    let z_current = e.partition(&[], CurrentMode::Parity)?;
    let mut lines = vec![CheckLine::equal(
        "rc-representation partition",
        spins.partition(),
        z_current * system.log_prefactor().exp(),
        tol,
    )];
    for &(x, y) in pairs {
        let zxy = e.partition(&[x, y], CurrentMode::Parity)?;
        lines.push(CheckLine::equal(
            format!("rc-representation two-point {x} {y}"),
            spins.expectation(&[x, y]),
            zxy / z_current,
            tol,
        ));
    }
    if boundary != Boundary::Free {
        let o = graph.origin();
        let zog = e.partition(&[o, system.ghost()], CurrentMode::Parity)?;
        lines.push(CheckLine::equal(
            format!("rc-representation one-point {o}"),
            spins.expectation(&[o]),
            zog / z_current,
            tol,
        ));
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_ball, CouplingSpec, Norm};

    fn four_cycle(beta: f64) -> IsingGraph {
        IsingGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)], &[2], 0, beta).unwrap()
    }

    #[test]
    fn switching_on_a_four_cycle() {
        let g = four_cycle(0.45);
        let b = EnumBudget::default();
        let all = [0, 1, 2, 3];
        let line = verify_switching(&g, Boundary::Free, &all, &[], 0, 1, |_| 1.0, &b).unwrap();
        assert!(line.passed, "{line}");
        assert!(line.lhs > 0.0);
        let line = verify_switching(&g, Boundary::Field(0.3), &[0, 1, 3], &[1, 4], 0, 3, |s| s.positive_count() as f64, &b)
            .unwrap();
        assert!(line.passed, "{line}");
    }

    #[test]
    fn switching_with_coincident_points() {
        let g = four_cycle(0.45);
        let b = EnumBudget::default();
        let line = verify_switching(&g, Boundary::Free, &[1, 2], &[0, 2], 1, 1, |_| 1.0, &b).unwrap();
        assert!(line.passed);
        let zb = current_total(&g, &[0, 2]);
        let za = {
            let s = BondSystem::restricted(&g, &[1, 2]);
            CurrentEnumerator::new(&s, b).partition(&[], CurrentMode::Parity).unwrap()
        };
        assert!((line.lhs - zb * za).abs() < 1e-13);
        assert!(verify_switching(&g, Boundary::Free, &[2], &[], 1, 1, |_| 1.0, &b).is_err());
    }

    fn current_total(g: &IsingGraph, sources: &[usize]) -> f64 {
        let s = BondSystem::ising(g, Boundary::Free);
        CurrentEnumerator::new(&s, EnumBudget::default())
            .partition(sources, CurrentMode::Parity)
            .unwrap()
    }

    #[test]
    fn correlation_inequality_examples() {
        let b = EnumBudget::default();
        let c = CouplingSpec::nearest_neighbor(1, 1.0, 0.3).unwrap();
        let g = build_ball(&c, 4.0, 2.0, Norm::Euclidean).unwrap();
        let line = verify_correlation_inequality(g.graph(), Boundary::Field(0.5), &b).unwrap();
        assert!(line.passed && line.rhs > 0.0, "{line}");
        let c = CouplingSpec::nearest_neighbor(2, 1.0, 0.4).unwrap();
        let g = build_ball(&c, 2.5, 1.0, Norm::Euclidean).unwrap();
        let line = verify_correlation_inequality(g.graph(), Boundary::Field(1.0), &b).unwrap();
        assert!(line.passed && line.rhs > 0.0, "{line}");
        let line = verify_correlation_inequality(g.graph(), Boundary::Plus, &b).unwrap();
        assert!(line.passed && line.rhs > 0.0, "{line}");
    }

    #[test]
    fn second_moment_on_a_line() {
        let c = CouplingSpec::nearest_neighbor(1, 1.0, 0.6).unwrap();
        let g = build_ball(&c, 3.0, 1.0, Norm::Euclidean).unwrap();
        let s = second_moment_exact(g.graph(), Boundary::Field(0.7), &EnumBudget::default()).unwrap();
        for line in s.checks() {
            assert!(line.passed, "{line}");
        }
        assert!(s.m2 >= s.m1 && s.m1 > 0.0);
    }

    #[test]
    fn representation_holds_for_every_boundary() {
        let c = CouplingSpec::nearest_neighbor(2, 1.0, 0.35).unwrap();
        let g = build_ball(&c, 1.5, 0.0, Norm::Euclidean).unwrap();
        for bc in [Boundary::Free, Boundary::Field(0.4), Boundary::Plus] {
            for line in verify_representation(g.graph(), bc, &[(0, 4), (1, 7)], &EnumBudget::default()).unwrap() {
                assert!(line.passed, "{bc}: {line}");
            }
        }
    }

    #[test]
    fn report_line_format() {
        let line = CheckLine::equal("x", 1.0, 1.0 + 1e-13, Tolerance::default());
        let text = line.to_string();
        assert!(text.starts_with("x lhs=") && text.ends_with("pass"));
        assert!(!CheckLine::at_least("y", 0.5, 0.6, Tolerance::default()).passed);
    }
}
