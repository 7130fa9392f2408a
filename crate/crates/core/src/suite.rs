//! Seeded families of small instances for the verification runs.
//!
//! Every family is a pure function of its seed, so a run over a suite can be
//! repeated row for row.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::current::Support;
use crate::error::Result;
use crate::graph::{Boundary, IsingGraph};
use crate::lattice::{build_ball, CouplingSpec, Norm};
use crate::rng::{stream_rng, Rng};

/// A graph with a boundary condition and the pairs to compare on it.
#[derive(Clone, Debug)]
pub struct SmallInstance {
    pub label: String,
    pub graph: IsingGraph,
    pub boundary: Boundary,
    pub pairs: Vec<(usize, usize)>,
}

/// Function of the support of `n + m` used on both sides of the switching identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupportFunction {
    One,
    PositiveCount,
    Damped(f64),
    Connected(usize, usize),
}

impl SupportFunction {
    pub fn eval(&self, s: &Support) -> f64 {
        match *self {
            SupportFunction::One => 1.0,
            SupportFunction::PositiveCount => s.positive_count() as f64,
            SupportFunction::Damped(k) => (-k * s.positive_count() as f64).exp(),
            SupportFunction::Connected(x, y) => f64::from(u8::from(s.connected(x, y))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SwitchingInstance {
    pub label: String,
    pub graph: IsingGraph,
    pub boundary: Boundary,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub x: usize,
    pub y: usize,
    pub f: SupportFunction,
}

/// One calibration target: an enumerable graph, a boundary condition and a
/// spin observable given by its vertex list (one or two sites).
#[derive(Clone, Debug)]
pub struct CalibrationCase {
    pub label: String,
    pub graph: IsingGraph,
    pub boundary: Boundary,
    pub sites: Vec<usize>,
}

/// Random graph on `n` vertices: a random spanning tree plus extra bonds up
/// to `bonds` in total, couplings in `[0.2, 1.5]`, a nonempty boundary.
pub fn random_graph(rng: &mut Rng, n: usize, bonds: usize, beta: f64) -> IsingGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        edges.push((order[i], parent));
    }
    let mut others: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !edges.iter().any(|&(u, v)| (u.min(v), u.max(v)) == (a, b)))
        .collect();
    others.shuffle(rng);
    let extra = bonds.saturating_sub(edges.len()).min(others.len());
    edges.extend(others.into_iter().take(extra));
    let with_j: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(a, b)| (a, b, rng.random_range(0.2..1.5)))
        .collect();
    let mut boundary: Vec<usize> = (1..n).filter(|_| rng.random_bool(0.5)).collect();
    if boundary.is_empty() {
        boundary.push(n - 1);
    }
    IsingGraph::new(n, &with_j, &boundary, 0, beta).expect("generated graph is valid")
}

fn random_boundary(rng: &mut Rng, allow_plus: bool) -> Boundary {
    match rng.random_range(0..if allow_plus { 3 } else { 2 }) {
        0 => Boundary::Free,
        1 => Boundary::Field(rng.random_range(0.1..1.5)),
        _ => Boundary::Plus,
    }
}

/// `count` random graphs with at most 5 vertices, or up to 8 vertices and
/// at most 12 bonds, under free, field and plus boundaries.
pub fn representation_suite(seed: u64, count: usize) -> Vec<SmallInstance> {
    let mut rng = stream_rng(seed, 0);
    (0..count)
        .map(|i| {
            let (n, bonds) = if i % 2 == 0 {
                let n = rng.random_range(2..=5);
                (n, rng.random_range(n - 1..=n * (n - 1) / 2))
            } else {
                let n = rng.random_range(6..=8);
                (n, rng.random_range(n - 1..=12))
            };
            let beta = rng.random_range(0.05..1.2);
            let graph = random_graph(&mut rng, n, bonds, beta);
            let boundary = random_boundary(&mut rng, true);
            let mut pairs = vec![(0, n - 1)];
            for _ in 0..2 {
                let x = rng.random_range(0..n);
                let y = rng.random_range(0..n);
                pairs.push((x, y));
            }
            SmallInstance {
                label: format!("rep-{i} n={n} bonds={} {boundary}", graph.bonds().len()),
                graph,
                boundary,
                pairs,
            }
        })
        .collect()
}

/// `count` random switching instances on graphs with at most 5 vertices.
pub fn switching_suite(seed: u64, count: usize) -> Vec<SwitchingInstance> {
    let mut rng = stream_rng(seed, 1);
    (0..count)
        .map(|i| {
            let n = rng.random_range(2..=5);
            let bonds = rng.random_range(n - 1..=(n * (n - 1) / 2).min(7));
            let beta = rng.random_range(0.1..1.0);
            let graph = random_graph(&mut rng, n, bonds, beta);
            let boundary = random_boundary(&mut rng, false);
            let g = graph.ghost();
            let mut a: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            let x = rng.random_range(0..n);
            let y = rng.random_range(0..n);
            a.extend([x, y]);
            a.sort_unstable();
            a.dedup();
            let mut pool: Vec<usize> = (0..n).collect();
            if boundary != Boundary::Free {
                pool.push(g);
            }
            pool.shuffle(&mut rng);
            let k = 2 * rng.random_range(0..=pool.len() / 2);
            let mut b: Vec<usize> = pool[..k].to_vec();
            b.sort_unstable();
            let f = match rng.random_range(0..4) {
                0 => SupportFunction::One,
                1 => SupportFunction::PositiveCount,
                2 => SupportFunction::Damped(rng.random_range(0.1..1.0)),
                _ => SupportFunction::Connected(0, rng.random_range(0..n)),
            };
            SwitchingInstance {
                label: format!("switch-{i} n={n} {boundary} A={a:?} B={b:?} x={x} y={y} f={f:?}"),
                graph,
                boundary,
                a,
                b,
                x,
                y,
                f,
            }
        })
        .collect()
}

/// Nearest-neighbour balls in `d = 1, 2` over `β ∈ {0.1, 0.4, 0.8}` and
/// `h ∈ {0.2, 1.0, +∞}`: 27 instances.
pub fn correlation_suite() -> Result<Vec<SmallInstance>> {
    let mut out = Vec::new();
    for (d, outer, inner) in [(1, 4.0, 2.0), (1, 5.0, 1.0), (2, 2.0, 1.0)] {
        for beta in [0.1, 0.4, 0.8] {
            let c = CouplingSpec::nearest_neighbor(d, 1.0, beta)?;
            let ball = build_ball(&c, outer, inner, Norm::Euclidean)?;
            for boundary in [Boundary::Field(0.2), Boundary::Field(1.0), Boundary::Plus] {
                out.push(SmallInstance {
                    label: format!("corr d={d} R={outer} r={inner} beta={beta} {boundary}"),
                    graph: ball.graph().clone(),
                    boundary,
                    pairs: Vec::new(),
                });
            }
        }
    }
    Ok(out)
}

/// Enumerable percolation graphs with at most 20 bonds, all couplings 1.
pub fn percolation_suite() -> Result<Vec<(String, IsingGraph)>> {
    let mut out = Vec::new();
    for (d, outer, inner) in [(1, 6.0, 3.0), (2, 1.5, 0.0), (2, 2.0, 1.0), (3, 1.0, 0.0)] {
        let c = CouplingSpec::nearest_neighbor(d, 1.0, 1.0)?;
        let ball = build_ball(&c, outer, inner, Norm::Euclidean)?;
        out.push((format!("perc d={d} R={outer} r={inner}"), ball.graph().clone()));
    }
    let mut rng = stream_rng(5, 2);
    for i in 0..4 {
        let n = rng.random_range(4..=8);
        let g = random_graph(&mut rng, n, 12, 1.0);
        let unit: Vec<(usize, usize, f64)> = g.bonds().iter().map(|b| (b.u, b.v, 1.0)).collect();
        let g = IsingGraph::new(n, &unit, g.boundary(), 0, 1.0)?;
        out.push((format!("perc random-{i} n={n}"), g));
    }
    Ok(out)
}

/// Ten enumerable geometries with at most 20 bonds including ghost bonds.
pub fn calibration_suite() -> Result<Vec<CalibrationCase>> {
    let ball = |d: usize, outer: f64, inner: f64, beta: f64| -> Result<IsingGraph> {
        let c = CouplingSpec::nearest_neighbor(d, 1.0, beta)?;
        Ok(build_ball(&c, outer, inner, Norm::Euclidean)?.graph().clone())
    };
    let cycle = |n: usize, beta: f64| {
        let bonds: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        IsingGraph::new(n, &bonds, &[n / 2], 0, beta)
    };
    let complete = |n: usize, beta: f64| {
        let bonds: Vec<(usize, usize, f64)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b, 0.7)))
            .collect();
        IsingGraph::new(n, &bonds, &[n - 1], 0, beta)
    };
    let case = |label: &str, graph: IsingGraph, boundary: Boundary, sites: Vec<usize>| CalibrationCase {
        label: label.to_string(),
        graph,
        boundary,
        sites,
    };
    let line = ball(1, 3.0, 2.0, 0.5)?;
    let square = ball(2, 1.5, 0.0, 0.4)?;
    let corners = ball(2, 1.5, 1.0, 0.3)?;
    let cube = ball(3, 1.0, 0.0, 0.3)?;
    let path = ball(1, 2.0, 1.0, 1.0)?;
    let far = |g: &IsingGraph| g.len() - 1;
    Ok(vec![
        case("line d=1 R=3 r=2", line.clone(), Boundary::Field(0.5), vec![line.origin()]),
        case("line d=1 R=3 two-point", line.clone(), Boundary::Free, vec![0, far(&line)]),
        case("square d=2 R=1.5 r=0", square.clone(), Boundary::Field(1.0), vec![square.origin()]),
        case("square d=2 R=1.5 two-point", square.clone(), Boundary::Free, vec![0, far(&square)]),
        case("corners d=2 R=1.5 r=1", corners.clone(), Boundary::Field(0.8), vec![corners.origin()]),
        case("cube d=3 R=1 r=0", cube.clone(), Boundary::Field(0.3), vec![cube.origin()]),
        case("path d=1 R=2 r=1", path.clone(), Boundary::Field(0.6), vec![path.origin()]),
        case("cycle n=6", cycle(6, 0.7)?, Boundary::Field(0.3), vec![0]),
        case("complete n=4", complete(4, 0.4)?, Boundary::Field(0.2), vec![0]),
        case("cycle n=5 two-point", cycle(5, 0.9)?, Boundary::Free, vec![0, 2]),
    ])
}
