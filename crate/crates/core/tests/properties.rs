use std::collections::BTreeSet;

use onearm::current::BondSystem;
use onearm::exact::{
    spin_expectation, verify_correlation_inequality, verify_representation, verify_switching, CurrentEnumerator,
    CurrentMode, EnumBudget,
};
use onearm::kv::KvFile;
use onearm::lattice::symmetry::{canonical_class, orbit, orbit_size};
use onearm::lattice::{build_ball, CouplingSpec, Norm};
use onearm::percolation::{exact_percolation, perc_correlation_exact, sample_theta_nested};
use onearm::rng::stream_rng;
use onearm::scaling::{denominator_term2, perc_rhs_bound, ArmWeight, LatticeShells, PowerLawKernel, ScalingBudget, Sphere};
use onearm::stats::Estimate;
use onearm::{suite, Boundary, Exec, IsingGraph};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn boundary_of(kind: u8, h: f64) -> Boundary {
    match kind % 3 {
        0 => Boundary::Free,
        1 => Boundary::Field(h),
        _ => Boundary::Plus,
    }
}

fn small_graph(seed: u64, n: usize, extra: usize, beta: f64) -> IsingGraph {
    let max = n * (n - 1) / 2;
    suite::random_graph(&mut stream_rng(seed, 0), n, (n - 1 + extra).min(max), beta)
}

fn box_points(d: usize, m: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (-m..=m).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn norm2(x: &[i64]) -> i64 {
    x.iter().map(|v| v * v).sum()
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn spin_and_current_routes_agree(seed in any::<u64>(), n in 2usize..=6, extra in 0usize..5,
                                     beta in 0.05f64..1.5, kind in 0u8..3, h in 0.05f64..2.0) {
        let g = small_graph(seed, n, extra, beta);
        let boundary = boundary_of(kind, h);
        let pairs = [(0, n - 1), (n / 2, 0)];
        for line in verify_representation(&g, boundary, &pairs, &EnumBudget::default()).unwrap() {
            prop_assert!(line.passed, "{line:?}");
        }
    }

    #[test]
    fn switching_identity_on_random_instances(seed in any::<u64>()) {
        let inst = suite::switching_suite(seed, 1).remove(0);
        let f = inst.f;
        let line = verify_switching(&inst.graph, inst.boundary, &inst.a, &inst.b, inst.x, inst.y,
                                    move |s| f.eval(s), &EnumBudget::default()).unwrap();
        prop_assert!(line.passed, "{}: {line:?}", inst.label);
    }

    #[test]
    fn correlation_inequality_on_random_graphs(seed in any::<u64>(), n in 2usize..=6, extra in 0usize..4,
                                               beta in 0.05f64..1.5, plus in any::<bool>(), h in 0.05f64..2.0) {
        let g = small_graph(seed, n, extra, beta);
        let boundary = if plus { Boundary::Plus } else { Boundary::Field(h) };
        let line = verify_correlation_inequality(&g, boundary, &EnumBudget::default()).unwrap();
        prop_assert!(line.passed, "{line:?}");
    }

    #[test]
    fn ferromagnetic_correlations_lie_in_unit_interval(seed in any::<u64>(), n in 2usize..=6, beta in 0.05f64..1.5,
                                                       h in 0.05f64..2.0, a in 0usize..6, b in 0usize..6) {
        let g = small_graph(seed, n, 2, beta);
        let sites = [a % n, b % n];
        for boundary in [Boundary::Free, Boundary::Field(h), Boundary::Plus] {
            let v = spin_expectation(&g, boundary, &sites, &EnumBudget::default()).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{boundary:?} {v}");
        }
        let weak = spin_expectation(&g, Boundary::Field(h), &sites[..1], &EnumBudget::default()).unwrap();
        let strong = spin_expectation(&g, Boundary::Field(h + 0.5), &sites[..1], &EnumBudget::default()).unwrap();
        prop_assert!(strong >= weak - 1e-12);
    }

    #[test]
    fn percolation_inequalities_on_random_graphs(seed in any::<u64>(), n in 3usize..=7, p in 0.05f64..0.95) {
        let g = small_graph(seed, n, 4, 1.0);
        let unit = IsingGraph::new(
            n,
            &g.bonds().iter().map(|b| (b.u, b.v, 1.0)).collect::<Vec<_>>(),
            g.boundary(),
            g.origin(),
            1.0,
        ).unwrap();
        for line in perc_correlation_exact(&unit, p, 20).unwrap() {
            prop_assert!(line.passed, "{line:?}");
        }
        let ex = exact_percolation(&unit, p, 20).unwrap();
        if ex.mean_x2 > 0.0 {
            prop_assert!(ex.theta >= ex.mean_x * ex.mean_x / ex.mean_x2 - 1e-12);
        }
    }

    #[test]
    fn sphere_matches_brute_force(d in 1usize..=4, r in 0.0f64..5.0) {
        let s = Sphere::new(d, r).unwrap();
        let r2 = r * r;
        let brute: BTreeSet<Vec<i64>> = box_points(d, s.extent())
            .into_iter()
            .filter(|y| norm2(y) as f64 > r2)
            .filter(|y| (0..d).any(|i| [-1, 1].iter().any(|e| {
                let mut z = y.clone();
                z[i] += e;
                norm2(&z) as f64 <= r2
            })))
            .collect();
        let points: BTreeSet<Vec<i64>> = s.points().into_iter().collect();
        prop_assert_eq!(s.count() as usize, brute.len());
        prop_assert_eq!(&points, &brute);
        for y in &brute {
            prop_assert!(s.contains(y));
        }
    }

    #[test]
    fn shell_counts_match_brute_force(d in 1usize..=4, max in 0usize..30) {
        let shells = LatticeShells::new(d, max);
        let m = (max as f64).sqrt().ceil() as i64;
        let pts = box_points(d, m);
        for n in 0..=max {
            let brute = pts.iter().filter(|x| norm2(x) as usize == n).count() as u128;
            prop_assert_eq!(shells.representations(n), brute, "n = {}", n);
        }
        let all = pts.iter().filter(|x| (norm2(x) as usize) < max).count() as u128;
        prop_assert_eq!(shells.count(0, max), all);
    }

    #[test]
    fn orbits_have_the_predicted_size(x in prop::collection::vec(-4i64..=4, 1..=5)) {
        let class = canonical_class(&x);
        let images = orbit(&x);
        let distinct: BTreeSet<Vec<i64>> = images.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), images.len());
        prop_assert_eq!(images.len() as u64, orbit_size(&class));
        for y in &images {
            prop_assert_eq!(canonical_class(y), class.clone());
        }
    }

    #[test]
    fn kv_canonical_form_round_trips(entries in prop::collection::btree_map("[a-z_]{1,8}", "[a-z0-9.,:-]{0,10}", 0..8)) {
        let text: String = entries.iter().map(|(k, v)| format!("  {k} =  {v}  # note\n")).collect();
        let kv = KvFile::parse(&text).unwrap();
        let again = KvFile::parse(&kv.canonical()).unwrap();
        prop_assert_eq!(&again, &kv);
        prop_assert_eq!(kv.entries().count(), entries.len());
    }

    #[test]
    fn merged_estimates_keep_the_pooled_mean(xs in prop::collection::vec(-10.0f64..10.0, 40..200), cut in 20usize..39) {
        let (a, b) = xs.split_at(cut.min(xs.len() - 20));
        let merged = Estimate::merge(&[Estimate::from_series(a), Estimate::from_series(b)]);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!((merged.mean - mean).abs() <= 1e-9);
        prop_assert_eq!(merged.samples as usize, xs.len());
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn parallel_and_sequential_agree(seed in any::<u64>()) {
        let coupling = CouplingSpec::nearest_neighbor(2, 1.0, 0.5).unwrap();
        let ball = build_ball(&coupling, 8.0, 6.0, Norm::Euclidean).unwrap();
        let par = sample_theta_nested(&ball, &[2.0, 4.0, 6.0], 0.5, 512, seed, Exec::Parallel).unwrap();
        let seq = sample_theta_nested(&ball, &[2.0, 4.0, 6.0], 0.5, 512, seed, Exec::Sequential).unwrap();
        prop_assert_eq!(par, seq);

        let budget = ScalingBudget { u_samples: 400, x_samples: 100, ..ScalingBudget::default() }
            .sampled_only()
            .with_seed(seed);
        let kernel = PowerLawKernel::new(5);
        let sphere = Sphere::new(5, 4.0).unwrap();
        let a = perc_rhs_bound(&kernel, &sphere, &budget, Exec::Parallel).unwrap();
        let b = perc_rhs_bound(&kernel, &sphere, &budget, Exec::Sequential).unwrap();
        prop_assert_eq!(a, b);

        let small = build_ball(&coupling, 2.0, 1.0, Norm::Euclidean).unwrap();
        let sys = BondSystem::ising(small.graph(), Boundary::Free);
        let src = [small.origin(), small.len() - 1];
        let za = CurrentEnumerator::new(&sys, EnumBudget::default()).with_exec(Exec::Parallel)
            .partition(&src, CurrentMode::Parity).unwrap();
        let zb = CurrentEnumerator::new(&sys, EnumBudget::default()).with_exec(Exec::Sequential)
            .partition(&src, CurrentMode::Parity).unwrap();
        prop_assert!((za - zb).abs() <= 1e-12 * za.abs());
    }

    #[test]
    fn u_cases_add_up_to_the_total(d in 3usize..=5, r in 1.0f64..4.0, eps in 0.1f64..1.0, sampled in any::<bool>()) {
        let kernel = PowerLawKernel::new(d);
        let sphere = Sphere::new(d, r).unwrap();
        let arm = ArmWeight::new(eps).unwrap();
        let mut budget = ScalingBudget { u_samples: 2000, u_max_factor: 3.0, ..ScalingBudget::default() };
        if sampled {
            budget = budget.sampled_only();
        }
        let t = denominator_term2(&kernel, &sphere, &arm, &budget, Exec::default()).unwrap();
        let sum = t.case_i.value + t.case_ii.value + t.case_iii.value;
        prop_assert!((sum - t.total.value).abs() <= 1e-9 * t.total.value.abs(), "{sum} vs {}", t.total.value);
        prop_assert!(t.case_i.value >= 0.0 && t.case_ii.value > 0.0 && t.case_iii.value >= 0.0);
    }
}
