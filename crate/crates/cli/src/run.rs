//! Dispatch of one experiment to the library and collection of its rows.

use onearm::exact::{
    second_moment_exact, verify_correlation_inequality, verify_representation, verify_switching, CheckLine,
    EnumBudget,
};
use onearm::ising_mc::{estimate_one_arm_plus, estimate_rho, estimate_two_point, tasaki_check, ChainConfig, Sampler};
use onearm::lattice::{build_ball, BallGeometry, DistanceMode, Norm};
use onearm::percolation::{perc_correlation_check, perc_correlation_exact, tree_graph_check};
use onearm::random_current::{second_moment_stats, stationarity_test, WormConfig};
use onearm::scaling::{
    fit_exponent, perc_rhs_bound, scaling_point, ArmWeight, PowerLawKernel, ScalingBudget, Sphere, SumEstimate,
};
use onearm::stats::{loglog_fit, Estimate, FitResult};
use onearm::{suite, Boundary};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Context, HarnessError, Result};
use crate::record::{now, ResultRow, RunRecord, ARTIFACT_VERSION};
use crate::report::{build_report, write_report};

/// Largest `sites × sweeps × replicas` one Monte Carlo run may ask for.
pub const MAX_SITE_UPDATES: f64 = 2e11;
/// Largest worm length.
pub const MAX_WORM_STEPS: u64 = 10_000_000_000;
/// Largest `configurations × bonds` for percolation sampling.
pub const MAX_BOND_SAMPLES: f64 = 2e11;
/// Largest exact enumeration the harness will accept.
pub const MAX_ENUM_BONDS: usize = 26;
pub const MAX_ENUM_SPINS: usize = 28;
/// Largest sampled u-sum and exact lattice-sum sizes.
pub const MAX_U_SAMPLES: usize = 50_000_000;
pub const MAX_EXACT_TERMS: u128 = 1_000_000_000_000;

/// Runs the experiment and appends its record to the configured output.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    let record = run_in_memory(config)?;
    crate::record::append(&config.output(), &record)?;
    Ok(record)
}

/// Runs the experiment without persisting anything.
pub fn run_in_memory(config: &ExperimentConfig) -> Result<RunRecord> {
    let workers = config.workers()?;
    if workers > 0 && !onearm::exec::init_workers(workers) && onearm::exec::worker_count() != workers {
        log::warn!(
            "worker pool already running with {} threads; ignoring workers = {workers}",
            onearm::exec::worker_count()
        );
    }
    let started = now();
    let rows = match config.kind {
        ExperimentKind::VerifyExact => verify_exact(config)?,
        ExperimentKind::IsingArm => ising_arm(config)?,
        ExperimentKind::IsingTwopoint => ising_twopoint(config)?,
        ExperimentKind::Worm => worm(config)?,
        ExperimentKind::Percolation => percolation(config)?,
        ExperimentKind::Scaling => scaling(config)?,
        ExperimentKind::Fit => fit(config)?,
        ExperimentKind::Report => report(config)?,
    };
    Ok(RunRecord {
        config_hash: config.hash(),
        kind: config.kind,
        config: config.params().entries().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        started,
        finished: now(),
        version: ARTIFACT_VERSION.to_string(),
        rows,
    })
}

fn check_row(anchor: &str, label: String, line: &CheckLine) -> ResultRow {
    ResultRow::new(anchor, label)
        .with("check", line.name.clone())
        .num("lhs", line.lhs)
        .num("rhs", line.rhs)
        .num("discrepancy", line.discrepancy())
        .check(line.passed)
}

fn estimate_row(row: ResultRow, e: &Estimate) -> ResultRow {
    row.num("value", e.mean)
        .num("stderr", e.stderr)
        .num("tau", e.tau)
        .with("samples", e.samples)
}

fn fit_row(row: ResultRow, f: &FitResult) -> ResultRow {
    let mut row = row
        .num("slope", f.slope)
        .num("slope_stderr", f.slope_stderr)
        .num("ci_low", f.ci.0)
        .num("ci_high", f.ci.1)
        .num("intercept", f.intercept)
        .num("chi2", f.chi2)
        .num("curvature", f.curvature)
        .with("curvature_flagged", f.curvature_flagged)
        .with("points", f.points);
    if let Some(note) = &f.note {
        row = row.with("note", note.clone());
    }
    row
}

fn enum_budget(config: &ExperimentConfig) -> Result<EnumBudget> {
    let d = EnumBudget::default();
    let b = EnumBudget {
        spins: config.get("enum_spins", d.spins)?,
        bonds: config.get("enum_bonds", d.bonds)?,
        pairs: config.get("enum_pairs", d.pairs)?,
    };
    if b.bonds > MAX_ENUM_BONDS || b.spins > MAX_ENUM_SPINS {
        return Err(HarnessError::Budget(format!(
            "enumeration budget ({} spins, {} bonds) above the limits ({MAX_ENUM_SPINS}, {MAX_ENUM_BONDS})",
            b.spins, b.bonds
        )));
    }
    Ok(b)
}

fn verify_exact(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let seed = config.seed()?;
    let budget = enum_budget(config)?;
    let checks: Vec<String> = config.list("checks")?.unwrap_or_else(|| {
        ["representation", "switching", "correlation", "percolation"]
            .map(String::from)
            .to_vec()
    });
    let mut rows = Vec::new();
    for check in &checks {
        match check.as_str() {
            "representation" => {
                let n = config.get("representation_instances", 50usize)?;
                for inst in suite::representation_suite(seed, n) {
                    let lines = verify_representation(&inst.graph, inst.boundary, &inst.pairs, &budget)
                        .context(|| inst.label.clone())?;
                    for line in lines {
                        rows.push(check_row("rc-representation", inst.label.clone(), &line));
                    }
                }
            }
            "switching" => {
                let n = config.get("switching_instances", 100usize)?;
                for inst in suite::switching_suite(seed, n) {
                    let f = inst.f;
                    let line = verify_switching(
                        &inst.graph,
                        inst.boundary,
                        &inst.a,
                        &inst.b,
                        inst.x,
                        inst.y,
                        move |s| f.eval(s),
                        &budget,
                    )
                    .context(|| inst.label.clone())?;
                    rows.push(check_row("switching-identity", inst.label.clone(), &line));
                }
            }
            "correlation" => {
                for inst in suite::correlation_suite()? {
                    let line = verify_correlation_inequality(&inst.graph, inst.boundary, &budget)
                        .context(|| inst.label.clone())?;
                    rows.push(check_row("correlation-inequality", inst.label.clone(), &line));
                    let small = inst.graph.bonds().len() + inst.graph.boundary().len() <= budget.bonds;
                    if matches!(inst.boundary, Boundary::Field(_)) && small {
                        let sm = second_moment_exact(&inst.graph, inst.boundary, &budget).context(|| inst.label.clone())?;
                        for line in sm.checks() {
                            rows.push(check_row("second-moment-currents", inst.label.clone(), &line));
                        }
                    }
                }
            }
            "percolation" => {
                let ps: Vec<f64> = config.list("perc_p")?.unwrap_or_else(|| vec![0.2, 0.5, 0.8]);
                for (label, graph) in suite::percolation_suite()? {
                    for &p in &ps {
                        let tag = format!("{label} p={p}");
                        for line in perc_correlation_exact(&graph, p, budget.bonds).context(|| tag.clone())? {
                            rows.push(check_row("perc-correlation", tag.clone(), &line));
                        }
                        for line in tree_graph_check(&graph, p, budget.bonds).context(|| tag.clone())? {
                            rows.push(check_row("perc-correlation", tag.clone(), &line));
                        }
                    }
                }
            }
            other => {
                return Err(HarnessError::config(
                    "checks",
                    format!("unknown check {other:?}; use representation, switching, correlation, percolation"),
                ))
            }
        }
    }
    Ok(rows)
}

fn chain(config: &ExperimentConfig) -> Result<ChainConfig> {
    let d = ChainConfig::default();
    let sampler: Sampler = config.get("sampler", d.sampler)?;
    let c = ChainConfig {
        sampler,
        thermalization: config.get("thermalization", d.thermalization)?,
        measurements: config.get("measurements", d.measurements)?,
        stride: config.get("stride", d.stride)?,
        seed: config.seed()?,
        replicas: config.get("replicas", d.replicas)?,
    };
    c.validate().context(|| "chain".into())?;
    Ok(c)
}

fn check_mc_budget(geometry: &BallGeometry, c: &ChainConfig) -> Result<()> {
    let work = geometry.len() as f64 * (c.thermalization + c.measurements) as f64 * c.replicas as f64;
    if work > MAX_SITE_UPDATES {
        return Err(HarnessError::Budget(format!(
            "{work:.2e} site updates exceed the limit {MAX_SITE_UPDATES:.0e}"
        )));
    }
    Ok(())
}

fn norm(config: &ExperimentConfig) -> Result<Norm> {
    config.get("norm", Norm::Euclidean)
}

fn slope_window(row: ResultRow, slope: f64, lo: Option<f64>, hi: Option<f64>) -> ResultRow {
    if lo.is_none() && hi.is_none() {
        return row;
    }
    let ok = lo.is_none_or(|l| slope >= l) && hi.is_none_or(|h| slope <= h);
    let mut row = row;
    if let Some(l) = lo {
        row = row.num("slope_min", l);
    }
    if let Some(h) = hi {
        row = row.num("slope_max", h);
    }
    row.check(ok)
}

fn one_arm_series(config: &ExperimentConfig, radii: &[f64], offset: f64) -> Result<Vec<(f64, Estimate)>> {
    let coupling = config.coupling()?;
    let norm = norm(config)?;
    let c = chain(config)?;
    let mut out = Vec::new();
    for &r in radii {
        let g = build_ball(&coupling, r + offset, r, norm).context(|| format!("ball r = {r}"))?;
        check_mc_budget(&g, &c)?;
        let e = estimate_one_arm_plus(&g, &c).context(|| format!("one-arm r = {r}"))?;
        out.push((r, e));
    }
    Ok(out)
}

fn ising_arm(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let radii: Vec<f64> = config.require_list("radii")?;
    let offset: f64 = config.get("outer_offset", 2.0)?;
    let series = one_arm_series(config, &radii, offset)?;
    let d = config.coupling()?.dimension();
    let mut rows: Vec<ResultRow> = series
        .iter()
        .map(|(r, e)| {
            estimate_row(
                ResultRow::new("one-arm-exponent", format!("one-arm r={r}"))
                    .with("d", d)
                    .num("r", *r)
                    .num("outer", r + offset),
                e,
            )
        })
        .collect();
    if series.len() >= 4 {
        let f = estimate_rho(&series).context(|| "rho fit".into())?;
        let row = fit_row(ResultRow::new("one-arm-exponent", "one-arm slope").with("d", d), &f);
        rows.push(slope_window(
            row,
            f.slope,
            config.optional("slope_min")?,
            config.optional("slope_max")?,
        ));
    }
    Ok(rows)
}

fn ising_twopoint(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let coupling = config.coupling()?;
    let d = coupling.dimension();
    let outer: f64 = config.require("outer")?;
    let xs: Vec<i64> = config.require_list("distances")?;
    let c = chain(config)?;
    let g = build_ball(&coupling, outer, 0.0, norm(config)?).context(|| "two-point ball".into())?;
    check_mc_budget(&g, &c)?;
    let point = |t: i64| {
        let mut p = vec![0i64; d];
        p[0] = t;
        p
    };
    let pairs: Vec<(usize, usize)> = xs
        .iter()
        .map(|&x| {
            let a = g.index_of(&point(-x / 2));
            let b = g.index_of(&point(x / 2));
            a.zip(b)
                .ok_or_else(|| HarnessError::config("distances", format!("|x| = {x} does not fit in R = {outer}")))
        })
        .collect::<Result<_>>()?;
    let est = estimate_two_point(&g, &c, &pairs).context(|| "two-point".into())?;
    let series: Vec<(f64, Estimate)> = xs.iter().map(|&x| x as f64).zip(est).collect();
    let mut rows: Vec<ResultRow> = series
        .iter()
        .map(|(x, e)| {
            estimate_row(
                ResultRow::new("two-point-decay", format!("two-point |x|={x}"))
                    .with("d", d)
                    .num("x", *x)
                    .num("outer", outer),
                e,
            )
        })
        .collect();
    if series.len() >= 4 {
        let pts: Vec<(f64, f64, f64)> = series.iter().map(|(x, e)| (*x, e.mean, e.stderr)).collect();
        let f = loglog_fit(&pts).context(|| "two-point fit".into())?;
        let row = fit_row(ResultRow::new("two-point-decay", "two-point slope").with("d", d), &f);
        rows.push(match (config.optional::<f64>("slope_target")?, config.optional::<f64>("slope_tolerance")?) {
            (Some(t), Some(tol)) => slope_window(row.num("target", t).num("tolerance", tol), f.slope, Some(t - tol), Some(t + tol)),
            _ => row,
        });
    }
    if config.flag("tasaki")? {
        let min_distance: f64 = config.get("tasaki_min_distance", 12.0)?;
        let offset: f64 = config.get("tasaki_outer_offset", 2.0)?;
        let radii: Vec<f64> = xs
            .iter()
            .filter(|&&x| x as f64 >= min_distance && x % 3 == 0)
            .map(|&x| x as f64 / 3.0)
            .collect();
        let arms = one_arm_series(config, &radii, offset)?;
        let report = tasaki_check(&arms, &series, min_distance).context(|| "tasaki".into())?;
        for t in &report.rows {
            rows.push(
                ResultRow::new("tasaki", format!("tasaki |x|={} r={}", t.distance, t.radius))
                    .num("x", t.distance)
                    .num("r", t.radius)
                    .num("lhs", t.lhs.mean)
                    .num("lhs_stderr", t.lhs.stderr)
                    .num("rhs", t.rhs.mean)
                    .num("rhs_stderr", t.rhs.stderr)
                    .num("margin", t.margin)
                    .check(!t.violated),
            );
        }
    }
    Ok(rows)
}

fn worm(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let coupling = config.coupling()?;
    let outer: f64 = config.require("outer")?;
    let inner: f64 = config.require("inner")?;
    let h: f64 = config.require("field")?;
    let g = build_ball(&coupling, outer, inner, norm(config)?).context(|| "worm ball".into())?;
    let d = WormConfig::default();
    let cfg = WormConfig {
        shift_probability: config.get("shift_probability", d.shift_probability)?,
        relocation_probability: 1.0 - config.get("shift_probability", d.shift_probability)?,
        steps: config.get("steps", d.steps)?,
        burn_in: config.optional("burn_in")?,
        stride: config.get("worm_stride", d.stride)?,
        seed: config.seed()?,
        sources: Vec::new(),
    };
    cfg.validate().context(|| "worm".into())?;
    if cfg.steps > MAX_WORM_STEPS {
        return Err(HarnessError::Budget(format!("{} worm steps exceed {MAX_WORM_STEPS}", cfg.steps)));
    }
    let label = format!("worm d={} R={outer} r={inner} h={h}", coupling.dimension());
    let st = second_moment_stats(g.graph(), h, &cfg).context(|| label.clone())?;
    let mut rows = Vec::new();
    for (name, e) in [
        ("m1", st.m1),
        ("m2", st.m2),
        ("ratio", st.ratio),
        ("magnetization", st.magnetization),
    ] {
        rows.push(estimate_row(
            ResultRow::new("second-moment-currents", format!("{label} {name}")).with("quantity", name),
            &e,
        ));
    }
    rows.push(
        ResultRow::new("second-moment-currents", format!("{label} ratio bound"))
            .num("lhs", st.magnetization.mean)
            .num("rhs", st.ratio.mean)
            .check(st.magnetization.mean + 3.0 * st.magnetization.stderr + 3.0 * st.ratio.stderr >= st.ratio.mean),
    );
    if config.flag("compare_exact")? {
        let budget = enum_budget(config)?;
        let system = onearm::current::BondSystem::ising(g.graph(), Boundary::Field(h));
        let chi = stationarity_test(&system, &cfg.clone().with_sources(&[g.origin(), system.ghost()]), &budget)
            .context(|| format!("{label} stationarity"))?;
        rows.push(
            ResultRow::new("finite-volume-expectations", format!("{label} chi-square"))
                .num("statistic", chi.statistic)
                .num("dof", chi.dof as f64)
                .num("p_value", chi.p_value)
                .check(!chi.rejected(0.001)),
        );
        let exact = second_moment_exact(g.graph(), Boundary::Field(h), &budget).context(|| label.clone())?;
        for (name, e, x) in [
            ("m1", st.m1, exact.m1),
            ("m2", st.m2, exact.m2),
            ("magnetization", st.magnetization, exact.magnetization),
        ] {
            rows.push(
                estimate_row(ResultRow::new("finite-volume-expectations", format!("{label} {name} vs exact")), &e)
                    .num("exact", x)
                    .num("z", e.z_score(x))
                    .check(e.within_sigmas(x, 3.0)),
            );
        }
    }
    Ok(rows)
}

fn percolation(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let seed = config.seed()?;
    if config.params().get("mode") == Some("exact") {
        let max_bonds: usize = config.get("max_bonds", 20)?;
        if max_bonds > MAX_ENUM_BONDS {
            return Err(HarnessError::Budget(format!("max_bonds {max_bonds} above {MAX_ENUM_BONDS}")));
        }
        let ps: Vec<f64> = config.list("p")?.unwrap_or_else(|| vec![0.2, 0.5, 0.8]);
        let mut rows = Vec::new();
        for (label, graph) in suite::percolation_suite()? {
            for &p in &ps {
                let tag = format!("{label} p={p}");
                for line in perc_correlation_exact(&graph, p, max_bonds).context(|| tag.clone())? {
                    rows.push(check_row("perc-correlation", tag.clone(), &line));
                }
                for line in tree_graph_check(&graph, p, max_bonds).context(|| tag.clone())? {
                    rows.push(check_row("perc-correlation", tag.clone(), &line));
                }
            }
        }
        return Ok(rows);
    }
    let d: usize = config.require("dimension")?;
    let p: f64 = config.require::<f64>("p")?;
    let outer: f64 = config.require("outer")?;
    let radii: Vec<f64> = config.require_list("radii")?;
    let samples: u64 = config.get("samples", 100_000)?;
    let sigmas: f64 = config.get("sigmas", 3.0)?;
    let coupling = onearm::lattice::CouplingSpec::nearest_neighbor(d, 1.0, 1.0)?;
    let inner = radii.iter().copied().fold(0.0, f64::max);
    let g = build_ball(&coupling, outer, inner, Norm::Euclidean).context(|| "percolation ball".into())?;
    let work = samples as f64 * g.bonds().len() as f64;
    if work > MAX_BOND_SAMPLES {
        return Err(HarnessError::Budget(format!(
            "{work:.2e} bond samples exceed {MAX_BOND_SAMPLES:.0e}"
        )));
    }
    let res = perc_correlation_check(&g, &radii, p, samples, seed, config.exec()?).context(|| "percolation".into())?;
    Ok(res
        .iter()
        .map(|c| {
            ResultRow::new("perc-correlation", format!("perc d={d} p={p} r={}", c.r))
                .with("d", d)
                .num("r", c.r)
                .num("lhs", c.lhs.mean)
                .num("lhs_stderr", c.lhs.stderr)
                .num("rhs", c.rhs.mean)
                .num("rhs_stderr", c.rhs.stderr)
                .num("mean_x", c.mean_x.mean)
                .num("mean_x2", c.mean_x2.mean)
                .num("truncation", c.truncation)
                .with("samples", samples)
                .check(c.holds(sigmas))
        })
        .collect())
}

const TERMS: [&str; 8] = [
    "numerator",
    "numerator_squared",
    "term1",
    "case_i",
    "case_ii",
    "case_iii",
    "term2",
    "rhs",
];

fn scaling(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let d: usize = config.require("dimension")?;
    let radii: Vec<f64> = config.require_list("radii")?;
    let exponent: f64 = config.get("kernel_exponent", 2.0 - d as f64)?;
    let kernel = PowerLawKernel::with_exponent(d, exponent);
    let def = ScalingBudget::default();
    let budget = ScalingBudget {
        exact_terms: config.get("exact_terms", def.exact_terms)?,
        u_samples: config.get("u_samples", def.u_samples)?,
        x_samples: config.get("x_samples", def.x_samples)?,
        columns: config.get("columns", def.columns)?,
        u_max_factor: config.get("u_max_factor", def.u_max_factor)?,
        seed: config.seed()?,
    };
    if budget.u_samples > MAX_U_SAMPLES || budget.x_samples > MAX_U_SAMPLES || budget.exact_terms > MAX_EXACT_TERMS {
        return Err(HarnessError::Budget("lattice-sum sample or term budget above the limits".into()));
    }
    let exec = config.exec()?;
    let max_rel: Option<f64> = config.optional("max_relative_error")?;
    let percolation = config.params().get("model") == Some("percolation");
    let mut series: Vec<Vec<(f64, SumEstimate)>> = vec![Vec::new(); TERMS.len()];
    for &r in &radii {
        let sphere = Sphere::new(d, r).context(|| format!("sphere r = {r}"))?;
        if percolation {
            let rhs = perc_rhs_bound(&kernel, &sphere, &budget, exec).context(|| format!("perc rhs r = {r}"))?;
            series[7].push((r, rhs));
        } else {
            let eps: f64 = config.get("epsilon", 0.5)?;
            let mode = match config.params().get("distance_mode").unwrap_or("radial") {
                "radial" => DistanceMode::Radial,
                "exact" => DistanceMode::Exact,
                other => {
                    return Err(HarnessError::config(
                        "distance_mode",
                        format!("expected radial or exact, got {other:?}"),
                    ))
                }
            };
            let arm = ArmWeight::new(eps).context(|| "epsilon".into())?.with_mode(mode);
            let p = scaling_point(&kernel, &sphere, &arm, &budget, exec).context(|| format!("scaling r = {r}"))?;
            for (i, v) in [
                p.numerator,
                p.numerator_squared,
                p.term1,
                p.term2.case_i,
                p.term2.case_ii,
                p.term2.case_iii,
                p.term2.total,
                p.rhs,
            ]
            .into_iter()
            .enumerate()
            {
                series[i].push((r, v));
            }
        }
    }
    let anchor = |term: &str| if term == "rhs" { "mean-field-bound" } else { "lattice-sums" };
    let mut rows = Vec::new();
    for (term, s) in TERMS.iter().zip(&series) {
        for (r, v) in s {
            let mut row = ResultRow::new(anchor(term), format!("{term} d={d} r={r}"))
                .with("d", d)
                .num("r", *r)
                .with("term", *term)
                .with("mode", serde_json::to_value(v.mode).unwrap_or_default())
                .num("value", v.value)
                .num("stderr", v.stderr)
                .num("tail_bound", v.tail_bound)
                .with("samples", v.samples);
            if let Some(m) = max_rel {
                row = row.num("max_relative_error", m).check(v.relative_error() <= m);
            }
            rows.push(row);
        }
    }
    for (term, s) in TERMS.iter().zip(&series) {
        if s.len() < 4 {
            continue;
        }
        let f = fit_exponent(s).context(|| format!("fit {term}"))?;
        let mut row = fit_row(ResultRow::new(anchor(term), format!("{term} slope d={d}")), &f)
            .with("d", d)
            .with("term", *term);
        if let Some((t, tol)) = config.target(&format!("target_{term}"))? {
            row = slope_window(row.num("target", t).num("tolerance", tol), f.slope, Some(t - tol), Some(t + tol));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn fit(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let x: Vec<f64> = config.require_list("x")?;
    let y: Vec<f64> = config.require_list("y")?;
    let s: Vec<f64> = config.list("stderr")?.unwrap_or_else(|| vec![0.0; x.len()]);
    let pts: Vec<(f64, f64, f64)> = x.iter().zip(&y).zip(&s).map(|((a, b), c)| (*a, *b, *c)).collect();
    let f = loglog_fit(&pts).context(|| "fit".into())?;
    let anchor = config.params().get("anchor").unwrap_or("plumbing").to_string();
    let mut row = fit_row(ResultRow::new(&anchor, "log-log fit"), &f);
    if let Some(t) = config.optional::<f64>("target")? {
        let tol: f64 = config.require("tolerance")?;
        row = slope_window(row.num("target", t).num("tolerance", tol), f.slope, Some(t - tol), Some(t + tol));
    }
    Ok(vec![row])
}

fn report(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let paths: Vec<String> = config.list("records")?.unwrap_or_default();
    let mut records = Vec::new();
    for p in &paths {
        records.extend(crate::record::load(std::path::Path::new(p))?);
    }
    let rep = build_report(&records);
    if let Some(dir) = config.params().get("out_dir") {
        write_report(&rep, std::path::Path::new(dir))?;
    }
    Ok(rep
        .sections
        .iter()
        .map(|s| {
            ResultRow::new("plumbing", format!("section {}", s.anchor))
                .with("anchor", s.anchor.clone())
                .with("rows", s.rows)
                .with("passed", s.passed)
                .with("checked", s.checked)
        })
        .collect())
}

