//! Acceptance runs. Each test prints one `PASS`/`FAIL` line to stderr.

use std::io::Write;

use onearm::current::BondSystem;
use onearm::exact::{
    spin_expectation, verify_correlation_inequality, verify_representation, verify_switching, EnumBudget,
};
use onearm::ising_mc::{self, estimate_one_arm_plus, estimate_two_point, tasaki_check, ChainConfig, Observable, Sampler};
use onearm::lattice::{build_ball, CouplingSpec, Norm};
use onearm::percolation::{perc_correlation_check, perc_correlation_exact, tree_graph_check};
use onearm::random_current::{second_moment_stats, WormChain, WormConfig};
use onearm::scaling::{fit_exponent, perc_rhs_bound, scaling_point, ArmWeight, PowerLawKernel, ScalingBudget, Sphere};
use onearm::stats::{jackknife, loglog_fit, Estimate};
use onearm::{suite, Boundary, Exec};

fn verdict(name: &str, passed: bool, detail: String) {
    let line = format!("acceptance {name}: {} {detail}", if passed { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(passed, "{line}");
}

fn critical_beta() -> f64 {
    (1.0 + 2f64.sqrt()).ln() / 2.0
}

#[test]
fn spin_and_current_routes_agree() {
    let budget = EnumBudget::default();
    let (mut passed, mut total, mut worst) = (0, 0, 0.0f64);
    let suite = suite::representation_suite(20_261, 50);
    for inst in &suite {
        for line in verify_representation(&inst.graph, inst.boundary, &inst.pairs, &budget).unwrap() {
            total += 1;
            passed += usize::from(line.passed);
            worst = worst.max(line.discrepancy() / line.lhs.abs().max(line.rhs.abs()).max(1e-300));
        }
    }
    verdict(
        "representation",
        suite.len() == 50 && passed == total,
        format!("{passed}/{total} lines on {} geometries, worst relative gap {worst:.2e}", suite.len()),
    );
}

#[test]
fn switching_identity_holds() {
    let budget = EnumBudget::default();
    let (mut passed, mut worst) = (0, 0.0f64);
    let suite = suite::switching_suite(20_262, 100);
    for inst in &suite {
        let f = inst.f;
        let line = verify_switching(&inst.graph, inst.boundary, &inst.a, &inst.b, inst.x, inst.y, move |s| f.eval(s), &budget)
            .unwrap();
        passed += usize::from(line.passed);
        worst = worst.max(line.discrepancy());
    }
    verdict(
        "switching",
        suite.len() == 100 && passed == 100,
        format!("{passed}/{} instances, worst gap {worst:.2e}", suite.len()),
    );
}

#[test]
fn correlation_inequality_holds() {
    let budget = EnumBudget::default();
    let suite = suite::correlation_suite().unwrap();
    let mut dims = std::collections::BTreeSet::new();
    let (mut passed, mut slack) = (0, f64::INFINITY);
    for inst in &suite {
        let line = verify_correlation_inequality(&inst.graph, inst.boundary, &budget).unwrap();
        passed += usize::from(line.passed);
        slack = slack.min(line.lhs - line.rhs);
        dims.insert(inst.label.split_whitespace().find(|w| w.starts_with("d=")).unwrap_or("").to_string());
    }
    verdict(
        "correlation-inequality",
        suite.len() >= 20 && passed == suite.len() && dims.len() >= 2,
        format!("{passed}/{} instances over {dims:?}, smallest lhs - rhs {slack:.2e}", suite.len()),
    );
}

#[test]
fn percolation_inequalities_hold() {
    let (mut exact_pass, mut exact_total) = (0, 0);
    for (_, graph) in suite::percolation_suite().unwrap() {
        assert!(graph.bonds().len() <= 20);
        for p in [0.2, 0.5, 0.8] {
            let lines = perc_correlation_exact(&graph, p, 20)
                .unwrap()
                .into_iter()
                .chain(tree_graph_check(&graph, p, 20).unwrap());
            for line in lines {
                exact_total += 1;
                exact_pass += usize::from(line.passed);
            }
        }
    }
    let coupling = CouplingSpec::nearest_neighbor(2, 1.0, 1.0).unwrap();
    let ball = build_ball(&coupling, 40.0, 32.0, Norm::Euclidean).unwrap();
    let rows = perc_correlation_check(&ball, &[8.0, 16.0, 32.0], 0.5, 100_000, 7, Exec::default()).unwrap();
    let sampled = rows.iter().filter(|c| c.holds(3.0)).count();
    let detail: Vec<String> = rows
        .iter()
        .map(|c| format!("r={} lhs {:.4}±{:.4} rhs {:.2e}", c.r, c.lhs.mean, c.lhs.stderr, c.rhs.mean))
        .collect();
    verdict(
        "percolation",
        exact_pass == exact_total && sampled == rows.len() && rows.len() == 3,
        format!("exact {exact_pass}/{exact_total}, sampled {sampled}/{} ({})", rows.len(), detail.join("; ")),
    );
}

#[test]
fn mean_field_lattice_sums_scale() {
    let radii = [8.0, 12.0, 16.0, 24.0, 32.0, 48.0];
    let kernel = PowerLawKernel::new(5);
    let arm = ArmWeight::new(0.5).unwrap();
    let budget = ScalingBudget {
        u_samples: 20_000,
        columns: 16,
        ..ScalingBudget::default()
    };
    let mut series = vec![Vec::new(); 6];
    let mut worst_rel = 0.0f64;
    for &r in &radii {
        let sphere = Sphere::new(5, r).unwrap();
        let p = scaling_point(&kernel, &sphere, &arm, &budget, Exec::default()).unwrap();
        let terms = [p.numerator, p.term1, p.term2.case_i, p.term2.case_ii, p.term2.case_iii, p.rhs];
        for (s, v) in series.iter_mut().zip(terms) {
            worst_rel = worst_rel.max(v.relative_error());
            s.push((r, v));
        }
    }
    let targets = [
        ("numerator", 1.0, 0.1),
        ("term1", 2.0, 0.2),
        ("case_i", 2.5, 0.3),
        ("case_ii", 3.0, 0.3),
        ("case_iii", 2.5, 0.3),
        ("rhs", -1.0, 0.15),
    ];
    let mut ok = worst_rel <= 0.2;
    let mut parts = Vec::new();
    for ((name, t, tol), s) in targets.iter().zip(&series) {
        let f = fit_exponent(s).unwrap();
        let hit = (f.slope - t).abs() <= *tol;
        ok &= hit;
        parts.push(format!("{name} {:.3}{}", f.slope, if hit { "" } else { " (off target)" }));
    }
    verdict(
        "lattice-sums",
        ok,
        format!("{}, worst relative error {worst_rel:.3}", parts.join(", ")),
    );
}

#[test]
fn percolation_bound_scales() {
    let kernel = PowerLawKernel::new(7);
    let budget = ScalingBudget {
        u_samples: 20_000,
        columns: 16,
        ..ScalingBudget::default()
    };
    let series: Vec<_> = [8.0, 12.0, 16.0, 24.0, 32.0]
        .iter()
        .map(|&r| (r, perc_rhs_bound(&kernel, &Sphere::new(7, r).unwrap(), &budget, Exec::default()).unwrap()))
        .collect();
    let f = fit_exponent(&series).unwrap();
    verdict(
        "percolation-bound",
        (f.slope + 2.0).abs() <= 0.25,
        format!("d=7 rhs slope {:.3} ± {:.3}", f.slope, f.slope_stderr),
    );
}

const SEEDS: u64 = 100;
const SAMPLERS: [Sampler; 3] = [Sampler::FullLatticeClusterSweep, Sampler::SingleClusterFlip, Sampler::LocalFlip];

fn exact_value(case: &suite::CalibrationCase) -> f64 {
    spin_expectation(&case.graph, case.boundary, &case.sites, &EnumBudget::default()).unwrap()
}

fn observable(sites: &[usize]) -> Observable {
    match *sites {
        [v] => Observable::Spin(v),
        [x, y] => Observable::TwoPoint(x, y),
        _ => unreachable!("calibration observables have one or two sites"),
    }
}

/// `Z_{xy} / Z` from a worm pinned at `x` on the free system.
fn pinned_two_point(system: &BondSystem, x: usize, y: usize, cfg: &WormConfig) -> Estimate {
    const BLOCKS: usize = 32;
    let records = (cfg.steps / cfg.stride) as usize;
    let mut blocks = vec![vec![0.0; 2]; BLOCKS];
    let mut chain = WormChain::pinned(system, x, cfg, 0).unwrap();
    let mut i = 0;
    while chain.advance() {
        let block = &mut blocks[i * BLOCKS / records];
        if chain.head() == x {
            block[0] += 1.0;
        } else if chain.head() == y {
            block[1] += 1.0;
        }
        i += 1;
    }
    let (mean, stderr) = jackknife(&blocks, |t| t[1] / t[0]);
    Estimate {
        mean,
        stderr,
        tau: 0.0,
        samples: records as u64,
    }
}

#[test]
fn monte_carlo_matches_enumeration() {
    let cases = suite::calibration_suite().unwrap();
    let (mut mc_pass, mut worm_pass, mut runs) = (0usize, 0usize, 0usize);
    let mut misses = Vec::new();
    for case in &cases {
        let exact = exact_value(case);
        for seed in 0..SEEDS {
            runs += 1;
            let chain = ChainConfig {
                sampler: SAMPLERS[seed as usize % 3],
                thermalization: 200,
                measurements: 4000,
                stride: 1,
                seed: 1000 + seed,
                replicas: 1,
            };
            let mc = ising_mc::estimate(&case.graph, case.boundary, &chain, &[observable(&case.sites)], Exec::default())
                .unwrap()
                .remove(0);
            if mc.within_sigmas(exact, 3.0) {
                mc_pass += 1;
            } else {
                misses.push(format!("mc {} seed {seed} z={:.2}", case.label, mc.z_score(exact)));
            }
            let cfg = WormConfig {
                steps: 200_000,
                seed: 5000 + seed,
                ..WormConfig::default()
            };
            let worm = match (case.boundary, case.sites.as_slice()) {
                (Boundary::Field(h), [o]) => {
                    assert_eq!(*o, case.graph.origin());
                    second_moment_stats(&case.graph, h, &cfg).unwrap().magnetization
                }
                (Boundary::Free, &[x, y]) => pinned_two_point(&BondSystem::ising(&case.graph, Boundary::Free), x, y, &cfg),
                _ => unreachable!("calibration cases are field one-point or free two-point"),
            };
            if worm.within_sigmas(exact, 3.0) {
                worm_pass += 1;
            } else {
                misses.push(format!("worm {} seed {seed} z={:.2}", case.label, worm.z_score(exact)));
            }
        }
    }
    let need = (runs * 99).div_ceil(100);
    verdict(
        "monte-carlo-calibration",
        mc_pass >= need && worm_pass >= need,
        format!(
            "ising_mc {mc_pass}/{runs}, random_current {worm_pass}/{runs} within 3σ (need {need}); misses: {}",
            misses.join(", ")
        ),
    );
}

#[test]
fn critical_square_lattice() {
    let beta = critical_beta();
    let coupling = CouplingSpec::nearest_neighbor(2, 1.0, beta).unwrap();
    let chain = ChainConfig {
        sampler: Sampler::FullLatticeClusterSweep,
        thermalization: 500,
        measurements: 10_000,
        ..ChainConfig::default()
    };
    let ball = build_ball(&coupling, 256.0, 0.0, Norm::Euclidean).unwrap();
    let xs = [4i64, 6, 8, 12, 16, 20, 24];
    let pairs: Vec<(usize, usize)> = xs
        .iter()
        .map(|&x| (ball.index_of(&[-x / 2, 0]).unwrap(), ball.index_of(&[x / 2, 0]).unwrap()))
        .collect();
    let two: Vec<(f64, Estimate)> = xs
        .iter()
        .map(|&x| x as f64)
        .zip(estimate_two_point(&ball, &chain, &pairs).unwrap())
        .collect();
    let pts: Vec<(f64, f64, f64)> = two.iter().map(|(x, e)| (*x, e.mean, e.stderr)).collect();
    let two_fit = loglog_fit(&pts).unwrap();

    let arm_chain = ChainConfig {
        measurements: 20_000,
        ..chain
    };
    let arms: Vec<(f64, Estimate)> = [4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&r| {
            let g = build_ball(&coupling, r + 2.0, r, Norm::Euclidean).unwrap();
            (r, estimate_one_arm_plus(&g, &arm_chain).unwrap())
        })
        .collect();
    let apts: Vec<(f64, f64, f64)> = arms.iter().map(|(r, e)| (*r, e.mean, e.stderr)).collect();
    let arm_fit = loglog_fit(&apts).unwrap();
    let tasaki = tasaki_check(&arms, &two, 12.0).unwrap();

    let two_ok = (two_fit.slope + 0.25).abs() <= 0.05;
    let arm_ok = (-0.18..=-0.08).contains(&arm_fit.slope);
    let tasaki_ok = !tasaki.rows.is_empty() && tasaki.violations() == 0;
    verdict(
        "critical-d2",
        two_ok && arm_ok && tasaki_ok,
        format!(
            "two-point slope {:.3} ± {:.3}, one-arm slope {:.3} ± {:.3}, tasaki {} rows with {} violations",
            two_fit.slope,
            two_fit.slope_stderr,
            arm_fit.slope,
            arm_fit.slope_stderr,
            tasaki.rows.len(),
            tasaki.violations()
        ),
    );
}
