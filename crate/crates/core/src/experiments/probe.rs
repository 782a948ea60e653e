//! Spectral report for a user-supplied system and observable.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_config, Check, Ctx, Experiment, Outcome, PLUMBING};
use crate::arith::parse_number;
use crate::error::Result;
use crate::measure::MonteCarlo;
use crate::spectral::{
    correlation_sequence, eigen_report, wiener_atomic_mass, SpectralOptions, EIGENVALUE_THRESHOLD,
    FINITE_FAMILY_NOTE,
};
use crate::system::{build_system, Freq, Observable, SystemSpec};

const HERGLOTZ: &str = "correlations are Fourier coefficients of a positive measure";
const WIENER: &str = "Wiener averages measure the atomic part";
const EIGEN: &str = "an eigenvalue carries a Dirac spectral measure";

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    system: SystemSpec,
    observable: Observable,
    order: usize,
    center: bool,
    /// Extra atom locations added to the search grid.
    candidates: Vec<String>,
    /// Angle of a candidate eigenvalue.
    alpha: Option<String>,
    threshold: f64,
    toeplitz_size: usize,
    samples: usize,
    expect_witnessed: Option<bool>,
    expect_atomic_mass: Option<f64>,
    tolerance: f64,
    precision: Option<u32>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            system: SystemSpec::new("rotation", json!({"alpha": "1/3"})),
            observable: Observable::Character(Freq(vec![1])),
            order: 4096,
            center: false,
            candidates: Vec::new(),
            alpha: None,
            threshold: EIGENVALUE_THRESHOLD,
            toeplitz_size: 64,
            samples: 2000,
            expect_witnessed: None,
            expect_atomic_mass: None,
            tolerance: 1e-9,
            precision: None,
        }
    }
}

pub struct SpectralProbe;

impl Experiment for SpectralProbe {
    fn name(&self) -> &'static str {
        "spectral-probe"
    }

    fn summary(&self) -> &'static str {
        "correlation sequence, Toeplitz check, Wiener atomic mass and optional eigenvalue test for one observable"
    }

    fn run(&self, config: &Value, ctx: &Ctx) -> Result<Outcome> {
        let (cfg, echo): (Config, Value) = parse_config(config)?;
        let sys = build_system(&cfg.system).map_err(|e| e.within("config.system"))?;
        let opts = SpectralOptions {
            mc: MonteCarlo {
                samples: cfg.samples,
                seed: ctx.seed_for("sp.correlations"),
            },
        };
        let c = correlation_sequence(&sys, &cfg.observable, cfg.order, cfg.center, &opts)
            .map_err(|e| e.within("config"))?;
        let mut checks = Vec::new();

        // Sampled sequences get a tolerance of four standard errors.
        let max_se = c.std_err.as_ref().map_or(0.0, |se| se.iter().copied().fold(0.0, f64::max));
        let tol = cfg.tolerance + 4.0 * max_se;
        let head: Vec<[f64; 2]> = c.values.iter().take(16).map(|v| [v.re, v.im]).collect();
        checks.push(
            Check::new(
                "sp.bounded-by-origin",
                HERGLOTZ,
                "values(0) real, nonnegative, and |values(n)| <= values(0)",
                format!("values(0) = {:.12}{:+.12}i", c.values[0].re, c.values[0].im),
                c.bounded_by_origin(tol),
            )
            .detail(json!({"exact": c.is_exact(), "samples": c.samples, "dropped": c.dropped, "head": head})),
        );
        let size = cfg.toeplitz_size.min(c.order + 1);
        let min_eig = c.toeplitz_min_eigenvalue(size)?;
        let toeplitz_tol = cfg.tolerance + 4.0 * max_se * size as f64;
        checks.push(Check::new(
            "sp.toeplitz",
            HERGLOTZ,
            format!("min eigenvalue >= -{toeplitz_tol:.3e} at size {size}"),
            format!("min eigenvalue {min_eig:.3e}"),
            min_eig >= -toeplitz_tol,
        ));

        let candidates = cfg
            .candidates
            .iter()
            .enumerate()
            .map(|(i, s)| parse_number(s, cfg.precision, &format!("config.candidates[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let atoms = wiener_atomic_mass(&c, &candidates)?;
        let v0sq = c.values[0].norm_sqr();
        let consistent = atoms.total_mass >= -tol
            && atoms.total_mass <= v0sq + tol
            && atoms.atoms.iter().all(|a| a.mass <= atoms.total_mass + tol);
        let (expected, passed) = match cfg.expect_atomic_mass {
            Some(m) => (
                format!("total atomic mass {m} within {tol:.3e}"),
                consistent && (atoms.total_mass - m).abs() <= tol,
            ),
            None => ("mass in [0, values(0)^2], atoms below the total".to_string(), consistent),
        };
        checks.push(
            Check::new(
                "sp.atomic-mass",
                if cfg.expect_atomic_mass.is_some() { WIENER } else { PLUMBING },
                expected,
                format!(
                    "total {} ({}), {} atoms on the grid",
                    atoms.total_mass,
                    atoms.exact_total_mass.as_deref().unwrap_or("floating"),
                    atoms.atoms.len()
                ),
                passed,
            )
            .detail(&atoms),
        );

        if let Some(a) = &cfg.alpha {
            let alpha = parse_number(a, cfg.precision, "config.alpha")?;
            let r = eigen_report(&c, &alpha, cfg.threshold);
            let passed = cfg.expect_witnessed.is_none_or(|e| e == r.witnessed);
            checks.push(
                Check::new(
                    "sp.eigenvalue",
                    if cfg.expect_witnessed.is_some() { EIGEN } else { PLUMBING },
                    match cfg.expect_witnessed {
                        Some(true) => "eigenvalue-witnessed".to_string(),
                        Some(false) => "not-witnessed".to_string(),
                        None => "report only".to_string(),
                    },
                    format!("mass {} at angle {}: {}", r.mass, r.alpha, r.verdict),
                    passed,
                )
                .detail(&r),
            );
        }

        Ok(Outcome {
            config: echo,
            checks,
            notes: vec![
                FINITE_FAMILY_NOTE.into(),
                "eigenvalue masses use the rotated average of values(n); the atom of a rotation by α sits at angle -α"
                    .into(),
            ],
        })
    }
}
