//! Experiment harness: configs, runs, persisted records and reports.

pub mod config;
pub mod error;
pub mod record;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use record::{ResultRow, RunRecord};
pub use report::{build_report, Report};
pub use run::{run, run_in_memory};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "ONEARM_WORKERS";

/// Exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

pub const USAGE: &str = "usage: onearm <verify|ising|worm|perc|scaling|fit|report> [CONFIG] [key=value ...]";

/// Parses `<subcommand> [config] [key=value ...]`, runs it and returns the
/// exit code. Text for the user goes to `out`.
pub fn main_with_args(args: &[String], out: &mut impl std::io::Write) -> i32 {
    match dispatch(args, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            if matches!(e, HarnessError::Usage(_)) {
                let _ = writeln!(out, "{USAGE}");
            }
            e.exit_code()
        }
    }
}

fn dispatch(args: &[String], out: &mut impl std::io::Write) -> Result<i32> {
    let Some(cmd) = args.first() else {
        return Err(HarnessError::Usage("missing subcommand".into()));
    };
    let kinds = ExperimentKind::for_subcommand(cmd)
        .ok_or_else(|| HarnessError::Usage(format!("unknown subcommand {cmd:?}")))?;
    let rest = &args[1..];
    let (path, overrides) = match rest.first() {
        Some(p) if !p.contains('=') => (Some(p), &rest[1..]),
        _ => (None, rest),
    };
    if let Some(bad) = overrides.iter().find(|o| !o.contains('=')) {
        return Err(HarnessError::Usage(format!("unexpected argument {bad:?}; overrides look like key=value")));
    }
    let mut text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::io(std::path::Path::new(p), e))?,
        None => String::new(),
    };
    if !text.lines().any(|l| l.trim_start().starts_with("kind")) && !overrides.iter().any(|o| o.starts_with("kind")) {
        text.push_str(&format!("\nkind = {}\n", kinds[0]));
    }
    let config = ExperimentConfig::parse(&text, overrides)?;
    if !kinds.contains(&config.kind) {
        return Err(HarnessError::Usage(format!("subcommand {cmd} cannot run kind {}", config.kind)));
    }
    let record = run(&config)?;
    for row in &record.rows {
        let verdict = match row.passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(out, "[{}] {} {}", row.anchor, row.label, verdict);
    }
    if config.kind == ExperimentKind::Report {
        let paths: Vec<String> = config.list("records")?.unwrap_or_default();
        let mut records = Vec::new();
        for p in &paths {
            records.extend(record::load(std::path::Path::new(p))?);
        }
        let _ = write!(out, "{}", build_report(&records).summary());
    }
    let (passed, total) = record.checks();
    let _ = writeln!(
        out,
        "{}: {passed}/{total} checks pass, record {} appended to {}",
        config.kind,
        &record.config_hash[..12],
        config.output().display()
    );
    Ok(if record.all_passed() { EXIT_PASS } else { EXIT_CHECK_FAILED })
}
