//! Named, seeded experiments producing machine-readable reports.

mod closure;
mod example1;
mod identity;
mod probe;
mod rank1;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use std::sync::LazyLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::PhaseSum;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Anchor for checks that exercise the tooling rather than a mathematical claim.
pub const PLUMBING: &str = "plumbing";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub anchor: String,
    pub expected: String,
    pub observed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

impl Check {
    pub fn new(id: &str, anchor: &str, expected: impl Into<String>, observed: impl Into<String>, passed: bool) -> Self {
        Check {
            id: id.into(),
            anchor: anchor.into(),
            expected: expected.into(),
            observed: observed.into(),
            sigma: None,
            passed,
            detail: Value::Null,
        }
    }

    pub fn sigma(mut self, sigma: Option<f64>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    /// The configuration with every default filled in.
    pub config: Value,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub passed: bool,
    pub failing: Vec<String>,
    /// Seconds spent running; the only field allowed to differ between runs.
    pub wall_clock: f64,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// JSON with the wall-clock field zeroed, for byte comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut r = self.clone();
        r.wall_clock = 0.0;
        r.to_json()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check-id", "anchor", "expected", "observed", "sigma", "verdict"])?;
        for c in &self.checks {
            w.write_record([
                c.id.as_str(),
                c.anchor.as_str(),
                c.expected.as_str(),
                c.observed.as_str(),
                &c.sigma.map(|s| format!("{s:.3}")).unwrap_or_default(),
                if c.passed { "pass" } else { "fail" },
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}\n", self.experiment);
        let _ = writeln!(s, "- seed: {}", self.seed);
        let _ = writeln!(s, "- checks: {}", self.checks.len());
        let _ = writeln!(
            s,
            "- overall: {}",
            if self.passed { "pass".to_string() } else { format!("FAIL ({})", self.failing.join(", ")) }
        );
        for n in &self.notes {
            let _ = writeln!(s, "- note: {n}");
        }
        let _ = writeln!(s, "\n## Configuration\n\n```json\n{}\n```", serde_json::to_string_pretty(&self.config).unwrap_or_default());
        for c in &self.checks {
            let _ = writeln!(s, "\n## {}\n", c.id);
            let _ = writeln!(s, "- anchor: {}", c.anchor);
            let _ = writeln!(s, "- expected: {}", c.expected);
            let _ = writeln!(s, "- observed: {}", c.observed);
            if let Some(z) = c.sigma {
                let _ = writeln!(s, "- sigma: {z:.3}");
            }
            let _ = writeln!(s, "- verdict: {}", if c.passed { "pass" } else { "fail" });
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Csv, Format::Markdown];

    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

/// Writes `<out>/<experiment>.<ext>` for each format and returns the paths.
pub fn emit_report(report: &Report, formats: &[Format], out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for &f in formats {
        let body = match f {
            Format::Json => report.to_json()?,
            Format::Csv => report.to_csv()?,
            Format::Markdown => report.to_markdown(),
        };
        let path = out.join(format!("{}.{}", report.experiment, f.extension()));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

/// Context handed to an experiment: the master seed and per-check seeds.
pub struct Ctx {
    pub seed: u64,
}

impl Ctx {
    pub fn seed_for(&self, check: &str) -> u64 {
        derive_seed(self.seed, check)
    }
}

pub struct Outcome {
    pub config: Value,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, config: &Value, ctx: &Ctx) -> Result<Outcome>;
}

#[derive(Default)]
pub struct ExperimentRegistry {
    experiments: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.experiments.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Experiment> {
        self.experiments.get(name).map(|e| e.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.experiments.keys().copied().collect()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register(Box::new(identity::IdentityDisjoint));
        r.register(Box::new(example1::Example1));
        r.register(Box::new(closure::ProductClosure));
        r.register(Box::new(rank1::Rank1Family));
        r.register(Box::new(probe::SpectralProbe));
        r
    }
}

static REGISTRY: LazyLock<ExperimentRegistry> = LazyLock::new(ExperimentRegistry::with_builtins);

pub fn experiment_registry() -> &'static ExperimentRegistry {
    &REGISTRY
}

/// Runs a named experiment. Checks are ordered by id in the report.
pub fn run_experiment(name: &str, config: &Value, seed: u64) -> Result<Report> {
    let exp = experiment_registry().get(name).ok_or_else(|| Error::Unknown {
        what: "experiment",
        name: name.to_string(),
        known: experiment_registry().names().join(", "),
    })?;
    let start = Instant::now();
    let mut outcome = exp.run(config, &Ctx { seed })?;
    outcome.checks.sort_by(|a, b| a.id.cmp(&b.id));
    let failing: Vec<String> = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect();
    Ok(Report {
        experiment: name.to_string(),
        seed,
        config: outcome.config,
        passed: failing.is_empty(),
        failing,
        checks: outcome.checks,
        notes: outcome.notes,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

/// Deserializes a config, reporting failures as spec errors on `config`.
pub(crate) fn parse_config<T: DeserializeOwned + Serialize>(config: &Value) -> Result<(T, Value)> {
    let doc = if config.is_null() { Value::Object(Default::default()) } else { config.clone() };
    let parsed: T = serde_json::from_value(doc).map_err(|e| Error::spec("config", e.to_string()))?;
    let echo = serde_json::to_value(&parsed)?;
    Ok((parsed, echo))
}

pub(crate) fn fmt_complex(z: Complex64) -> String {
    format!("{:.12}{:+.12}i", z.re, z.im)
}

pub(crate) fn fmt_phase(p: &PhaseSum) -> String {
    p.to_string()
}

/// Runs the product-consistency test on `j` and compares the verdict with
/// `expect_refuted`.
pub(crate) fn consistency_check(
    id: &str,
    anchor: &str,
    j: &crate::joinings::Joining,
    degree: i64,
    opts: crate::joinings::ConsistencyOptions,
    expect_refuted: bool,
) -> Result<Check> {
    let r = crate::joinings::product_consistency_test(j, degree, opts)?;
    let expected = if expect_refuted { "refuted" } else { "consistent-with-product" };
    let observed = match r.witnesses.first() {
        Some(w) => format!(
            "{} ({} path, {} characters; witness {} at lag {}: joint {} vs product {})",
            r.verdict,
            r.path,
            r.tested,
            w.character,
            w.lag,
            fmt_complex(Complex64::new(w.joint[0], w.joint[1])),
            fmt_complex(Complex64::new(w.product[0], w.product[1])),
        ),
        None => format!("{} ({} path, {} characters)", r.verdict, r.path, r.tested),
    };
    Ok(Check::new(id, anchor, expected, observed, r.refuted == expect_refuted)
        .sigma(r.max_sigma)
        .detail(r))
}
