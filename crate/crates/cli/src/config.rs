//! Experiment configs: one `key = value` file per run plus `key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use onearm::kv::KvFile;
use onearm::lattice::CouplingSpec;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyExact,
    IsingArm,
    IsingTwopoint,
    Worm,
    Percolation,
    Scaling,
    Fit,
    Report,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::VerifyExact,
        ExperimentKind::IsingArm,
        ExperimentKind::IsingTwopoint,
        ExperimentKind::Worm,
        ExperimentKind::Percolation,
        ExperimentKind::Scaling,
        ExperimentKind::Fit,
        ExperimentKind::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyExact => "verify-exact",
            ExperimentKind::IsingArm => "ising-arm",
            ExperimentKind::IsingTwopoint => "ising-twopoint",
            ExperimentKind::Worm => "worm",
            ExperimentKind::Percolation => "percolation",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Fit => "fit",
            ExperimentKind::Report => "report",
        }
    }

    /// Kinds a CLI subcommand may run, the first being its default.
    pub fn for_subcommand(cmd: &str) -> Option<&'static [ExperimentKind]> {
        Some(match cmd {
            "verify" => &[ExperimentKind::VerifyExact],
            "ising" => &[ExperimentKind::IsingArm, ExperimentKind::IsingTwopoint],
            "worm" => &[ExperimentKind::Worm],
            "perc" => &[ExperimentKind::Percolation],
            "scaling" => &[ExperimentKind::Scaling],
            "fit" => &[ExperimentKind::Fit],
            "report" => &[ExperimentKind::Report],
            _ => return None,
        })
    }

    fn keys(self) -> &'static [&'static str] {
        const COUPLING: &[&str] = &["dimension", "beta", "j", "range", "coupling", "norm"];
        const CHAIN: &[&str] = &["sampler", "thermalization", "measurements", "stride", "replicas"];
        match self {
            ExperimentKind::VerifyExact => &[
                "checks",
                "representation_instances",
                "switching_instances",
                "perc_p",
                "enum_spins",
                "enum_bonds",
                "enum_pairs",
            ],
            ExperimentKind::IsingArm => {
                static K: std::sync::OnceLock<Vec<&'static str>> = std::sync::OnceLock::new();
                K.get_or_init(|| [COUPLING, CHAIN, &["radii", "outer_offset", "slope_min", "slope_max"]].concat())
            }
            ExperimentKind::IsingTwopoint => {
                static K: std::sync::OnceLock<Vec<&'static str>> = std::sync::OnceLock::new();
                K.get_or_init(|| {
                    [
                        COUPLING,
                        CHAIN,
                        &[
                            "outer",
                            "distances",
                            "slope_target",
                            "slope_tolerance",
                            "tasaki",
                            "tasaki_min_distance",
                            "tasaki_outer_offset",
                        ],
                    ]
                    .concat()
                })
            }
            ExperimentKind::Worm => {
                static K: std::sync::OnceLock<Vec<&'static str>> = std::sync::OnceLock::new();
                K.get_or_init(|| {
                    [
                        COUPLING,
                        &[
                            "outer",
                            "inner",
                            "field",
                            "steps",
                            "burn_in",
                            "worm_stride",
                            "shift_probability",
                            "compare_exact",
                            "enum_bonds",
                        ],
                    ]
                    .concat()
                })
            }
            ExperimentKind::Percolation => &["mode", "dimension", "p", "outer", "radii", "samples", "sigmas", "max_bonds"],
            ExperimentKind::Scaling => &[
                "dimension",
                "model",
                "epsilon",
                "kernel_exponent",
                "radii",
                "distance_mode",
                "exact_terms",
                "u_samples",
                "x_samples",
                "columns",
                "u_max_factor",
                "max_relative_error",
                "target_numerator",
                "target_term1",
                "target_case_i",
                "target_case_ii",
                "target_case_iii",
                "target_term2",
                "target_rhs",
            ],
            ExperimentKind::Fit => &["x", "y", "stderr", "target", "tolerance", "anchor"],
            ExperimentKind::Report => &["records", "out_dir"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| HarnessError::config("kind", format!("unknown experiment kind {s:?}")))
    }
}

const COMMON_KEYS: &[&str] = &["kind", "seed", "output", "workers", "exec"];

/// `β_c = ln(1 + √2) / 2` of the nearest-neighbour model on Z² with `J = 1`.
pub fn beta_c_square() -> f64 {
    (1.0 + 2f64.sqrt()).ln() / 2.0
}

/// A validated experiment. The parameters are kept as text; the canonical
/// form (sorted `key=value` lines) is what gets hashed.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    params: KvFile,
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        for o in overrides {
            kv.set_override(o)?;
        }
        Self::from_kv(kv)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, overrides)
    }

    pub fn from_kv(kv: KvFile) -> Result<Self> {
        let kind: ExperimentKind = kv.require("kind")?.parse()?;
        let allowed = kind.keys();
        if let Some((k, _)) = kv.entries().find(|(k, _)| !COMMON_KEYS.contains(k) && !allowed.contains(k)) {
            return Err(HarnessError::config(k, format!("not a {kind} parameter")));
        }
        let cfg = ExperimentConfig { kind, params: kv };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> &KvFile {
        &self.params
    }

    pub fn canonical(&self) -> String {
        self.params.canonical()
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.params.parse_or("seed", 1)?)
    }

    pub fn output(&self) -> PathBuf {
        PathBuf::from(self.params.get("output").unwrap_or("runs.jsonl"))
    }

    /// Worker count from `ONEARM_WORKERS`, else the `workers` key; 0 means
    /// the library default.
    pub fn workers(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(crate::WORKERS_ENV) {
            return v
                .trim()
                .parse()
                .map_err(|_| HarnessError::config(crate::WORKERS_ENV, format!("cannot parse `{v}`")));
        }
        Ok(self.params.parse_or("workers", 0)?)
    }

    pub fn exec(&self) -> Result<onearm::Exec> {
        match self.params.get("exec").unwrap_or("parallel") {
            "parallel" => Ok(onearm::Exec::Parallel),
            "sequential" => Ok(onearm::Exec::Sequential),
            other => Err(HarnessError::config("exec", format!("expected parallel or sequential, got {other:?}"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.params.parse_or(key, default)?)
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        Ok(self.params.parse_required(key)?)
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        Ok(self.params.parse_value(key)?)
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        Ok(self.params.parse_list(key)?)
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        match self.list(key)? {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(HarnessError::config(key, "missing required list")),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.params.get(key) {
            None | Some("false") | Some("no") | Some("0") => Ok(false),
            Some("true") | Some("yes") | Some("1") => Ok(true),
            Some(other) => Err(HarnessError::config(key, format!("expected true or false, got {other:?}"))),
        }
    }

    /// Coupling from the config; `beta = critical` means `β_c` of the square
    /// lattice scaled by `1/J`.
    pub fn coupling(&self) -> Result<CouplingSpec> {
        let mut kv = self.params.clone();
        if kv.get("beta") == Some("critical") {
            let d: usize = kv.parse_required("dimension")?;
            if d != 2 || kv.get("coupling").is_some() || kv.get("range").is_some_and(|r| r != "1") {
                return Err(HarnessError::config(
                    "beta",
                    "`critical` is only known for the nearest-neighbour model in d = 2",
                ));
            }
            let j: f64 = kv.parse_or("j", 1.0)?;
            kv.insert("beta", beta_c_square() / j);
        }
        Ok(CouplingSpec::from_kv(&kv)?)
    }

    /// `(slope, tolerance)` from a `value:tolerance` field.
    pub fn target(&self, key: &str) -> Result<Option<(f64, f64)>> {
        let Some(v) = self.params.get(key) else {
            return Ok(None);
        };
        let parsed = v
            .split_once(':')
            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)));
        match parsed {
            Some((s, t)) if t >= 0.0 => Ok(Some((s, t))),
            _ => Err(HarnessError::config(key, format!("expected `slope:tolerance`, got {v:?}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        self.seed()?;
        self.exec()?;
        match self.kind {
            ExperimentKind::IsingArm => {
                let offset: f64 = self.get("outer_offset", 2.0)?;
                if !(offset > 0.0) {
                    return Err(HarnessError::config("outer_offset", "need r < R, so the offset must be positive"));
                }
                self.radii_nonnegative("radii")?;
            }
            ExperimentKind::IsingTwopoint => {
                let outer: f64 = self.require("outer")?;
                let xs: Vec<i64> = self.require_list("distances")?;
                if let Some(x) = xs.iter().find(|&&x| x <= 0 || x % 2 != 0 || (x / 2) as f64 >= outer) {
                    return Err(HarnessError::config(
                        "distances",
                        format!("|x| = {x} must be positive, even and centred inside R = {outer}"),
                    ));
                }
            }
            ExperimentKind::Worm => {
                let outer: f64 = self.require("outer")?;
                let inner: f64 = self.require("inner")?;
                if !(inner >= 0.0 && inner < outer) {
                    return Err(HarnessError::config("inner", format!("need 0 <= r < R, got r = {inner}, R = {outer}")));
                }
                let h: f64 = self.require("field")?;
                if !(h > 0.0 && h.is_finite()) {
                    return Err(HarnessError::config("field", "the worm needs a finite positive field"));
                }
            }
            ExperimentKind::Percolation => match self.params.get("mode").unwrap_or("sampled") {
                "sampled" => {
                    let outer: f64 = self.require("outer")?;
                    let radii: Vec<f64> = self.require_list("radii")?;
                    if let Some(r) = radii.iter().find(|&&r| !(r >= 0.0 && r < outer)) {
                        return Err(HarnessError::config("radii", format!("need 0 <= r < R, got r = {r}, R = {outer}")));
                    }
                }
                "exact" => {}
                other => return Err(HarnessError::config("mode", format!("expected sampled or exact, got {other:?}"))),
            },
            ExperimentKind::Scaling => {
                self.radii_nonnegative("radii")?;
                match self.params.get("model").unwrap_or("ising") {
                    "ising" | "percolation" => {}
                    other => {
                        return Err(HarnessError::config("model", format!("expected ising or percolation, got {other:?}")))
                    }
                }
                for key in [
                    "target_numerator",
                    "target_term1",
                    "target_case_i",
                    "target_case_ii",
                    "target_case_iii",
                    "target_term2",
                    "target_rhs",
                ] {
                    self.target(key)?;
                }
            }
            ExperimentKind::Fit => {
                let x: Vec<f64> = self.require_list("x")?;
                let y: Vec<f64> = self.require_list("y")?;
                if x.len() != y.len() {
                    return Err(HarnessError::config("y", "x and y need the same length"));
                }
                if let Some(s) = self.list::<f64>("stderr")? {
                    if s.len() != x.len() {
                        return Err(HarnessError::config("stderr", "stderr needs the same length as x"));
                    }
                }
            }
            ExperimentKind::VerifyExact | ExperimentKind::Report => {}
        }
        Ok(())
    }

    fn radii_nonnegative(&self, key: &str) -> Result<()> {
        let radii: Vec<f64> = self.require_list(key)?;
        if let Some(r) = radii.iter().find(|&&r| !(r >= 0.0 && r.is_finite())) {
            return Err(HarnessError::config(key, format!("radius {r} must be finite and nonnegative")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_order_and_whitespace() {
        let a = ExperimentConfig::parse("kind = fit\nx = 1,2,4,8\ny = 1,2,4,8\n", &[]).unwrap();
        let b = ExperimentConfig::parse("y=1,2,4,8\n# comment\nx = 1,2,4,8\nkind=fit", &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig::parse("kind = fit\nx = 1,2,4,8\ny = 1,2,4,8\n", &["seed=2".into()]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn bad_fields_are_named() {
        let err = ExperimentConfig::parse("kind = worm\nouter = 2\ninner = 3\nfield = 1\ndimension=1\nbeta=0.2", &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("`inner`"), "{err}");
        let err = ExperimentConfig::parse("kind = fit\nx=1\ny=1\nbogus = 3", &[]).unwrap_err().to_string();
        assert!(err.contains("`bogus`"), "{err}");
        assert!(ExperimentConfig::parse("kind = nonsense", &[]).is_err());
    }

    #[test]
    fn critical_beta_is_resolved() {
        let c = ExperimentConfig::parse(
            "kind = ising-arm\ndimension = 2\nbeta = critical\nradii = 2,4",
            &[],
        )
        .unwrap();
        assert!((c.coupling().unwrap().beta() - 0.440686793509772).abs() < 1e-12);
    }
}
