//! Two twists joined along a shared base coordinate acquire the rotation by
//! `α` as a common factor, read off from `F(x, y, z) = e(z - y)`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{consistency_check, fmt_phase, parse_config, Check, Ctx, Experiment, Outcome, PLUMBING};
use crate::arith::number::fmt_rat;
use crate::arith::{frac, parse_number};
use crate::cocycle::Cocycle;
use crate::doc::Field;
use crate::error::Result;
use crate::joinings::{
    build_joining_value, capped_family, invariance_check, marginal_check, pushforward_atomless,
    sample_joining, ConsistencyOptions, ONE_SIDED_NOTE,
};
use crate::measure::{parse_measure, MonteCarlo};
use crate::spectral::{detect_eigenvalue, SpectralOptions, FINITE_FAMILY_NOTE};
use crate::system::{Freq, Observable};

const ANCHOR: &str = "twist joining has the rotation by alpha as a factor";
pub const VERDICT: &str = "joint system exhibits rotation factor: outside Erg⊥";

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    alpha: String,
    beta: Value,
    rho: Value,
    order: usize,
    degree: i64,
    lags: usize,
    threshold: f64,
    /// A decimal angle for the exact-orbit check of the sampler.
    decimal_alpha: String,
    precision: u32,
    orbit_samples: usize,
    orbit_steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alpha: "1/5".into(),
            beta: json!({"type": "affine"}),
            rho: json!({"type": "haar"}),
            order: 4096,
            degree: 8,
            lags: 2,
            threshold: crate::spectral::EIGENVALUE_THRESHOLD,
            decimal_alpha: "0.7071067811865475244008443621048490392848".into(),
            precision: 40,
            orbit_samples: 16,
            orbit_steps: 8,
        }
    }
}

pub struct Example1;

impl Experiment for Example1 {
    fn name(&self) -> &'static str {
        "example1"
    }

    fn summary(&self) -> &'static str {
        "joining of T(x, y) = (x, y + β(x)) and R(x, z) = (x, z + β(x) + α) carrying the rotation by α"
    }

    fn run(&self, config: &Value, ctx: &Ctx) -> Result<Outcome> {
        let (cfg, echo): (Config, Value) = parse_config(config)?;
        let precision = Some(cfg.precision);
        let alpha = parse_number(&cfg.alpha, precision, "config.alpha")?;
        let rho = parse_measure(Field::root(&cfg.rho, "config.rho"), precision)?;
        let beta = Cocycle::parse(Field::root(&cfg.beta, "config.beta"), precision)?;
        let triple_doc = |alpha: &str| {
            json!({"kind": "example1-triple", "precision": cfg.precision,
                   "params": {"alpha": alpha, "beta": cfg.beta, "rho": cfg.rho}})
        };
        let j = build_joining_value(&triple_doc(&cfg.alpha)).map_err(|e| e.within("config"))?;
        let mut checks = Vec::new();

        // (a) each component's fibers are rotations by an atomless family of angles
        let mut pre_ok = true;
        for (id, b) in [("e1.a.precondition-T", beta.clone()), ("e1.a.precondition-R", beta.shifted(&alpha))] {
            let (ok, observed) = match pushforward_atomless(&rho, &b) {
                Ok(true) => (true, "β_*ρ atomless".to_string()),
                Ok(false) => (false, "β_*ρ has atoms".to_string()),
                Err(e) => (false, format!("undecided: {e}")),
            };
            pre_ok &= ok;
            checks.push(Check::new(id, ANCHOR, "β_*ρ atomless", observed, ok));
        }

        // (b) marginals and invariance
        let marg = marginal_check(&j, cfg.degree, MonteCarlo::default())?;
        checks.push(
            Check::new(
                "e1.b.marginals",
                ANCHOR,
                "marginals equal the twist measures exactly",
                format!(
                    "{} characters, {} mismatches ({} path)",
                    marg.checked,
                    marg.failures.len(),
                    if marg.exact { "exact" } else { "sampled" }
                ),
                marg.passed,
            )
            .detail(&marg),
        );
        let f = Freq(vec![0, -1, 1]);
        let mut family = capped_family(j.dim(), cfg.degree, 6_000);
        if !family.contains(&f) {
            family.push(f.clone());
        }
        let inv = invariance_check(&j, &family, MonteCarlo::default())?;
        let f_entry = inv.entries.iter().find(|e| e.character == f).expect("F in family");
        checks.push(Check::new(
            "e1.c.invariance",
            ANCHOR,
            "every character integral preserved by P; |∫F∘P| = |∫F|",
            format!(
                "{} of {} characters preserved; F modulus preserved: {}",
                inv.entries.iter().filter(|e| e.passed).count(),
                inv.entries.len(),
                f_entry.modulus_preserved
            ),
            inv.passed && f_entry.modulus_preserved,
        ));

        // F∘P = e(α)F pointwise on sampled points
        let pts = sample_joining(&j, ctx.seed_for("e1.c.equivariance"), cfg.orbit_samples);
        let mut equivariant = true;
        for p in &pts {
            let q = j.joint.apply(p)?;
            let lhs = frac(&(&q[2] - &q[1]));
            let rhs = frac(&(&p[2] - &p[1] + &alpha));
            equivariant &= lhs == rhs;
        }
        checks.push(Check::new(
            "e1.c.equivariance",
            ANCHOR,
            format!("z' - y' = z - y + {} exactly", fmt_rat(&alpha)),
            format!("{} of {} sampled points", if equivariant { pts.len() } else { 0 }, pts.len()),
            equivariant,
        ));

        // (c) eigenvalue mass of F at α on the joining and on the product
        let opts = SpectralOptions::default();
        let obs = Observable::Character(f.clone());
        let eig = detect_eigenvalue(&j.joint, &obs, &alpha, cfg.order, cfg.threshold, &opts)?;
        let exact_one = eig.exact_mass.as_deref() == Some("1");
        checks.push(
            Check::new(
                "e1.d.eigenvalue-mass",
                ANCHOR,
                format!("mass 1 at angle {} (tolerance 1e-9)", fmt_rat(&alpha)),
                format!(
                    "mass {} ({}), {}",
                    eig.mass,
                    if exact_one { "exact" } else { "floating" },
                    eig.verdict
                ),
                (eig.mass - 1.0).abs() <= 1e-9 && eig.witnessed,
            )
            .detail(&eig),
        );
        let product = build_joining_value(&json!({"kind": "product", "components": j.spec.components}))?;
        let lifted = product.lift(&[Freq(vec![0, -1]), Freq(vec![0, 1])]);
        let peig = detect_eigenvalue(
            &product.joint,
            &Observable::Character(lifted),
            &alpha,
            cfg.order,
            cfg.threshold,
            &opts,
        )?;
        let bound = 2.0 / cfg.order as f64;
        checks.push(
            Check::new(
                "e1.d.product-eigenvalue-mass",
                ANCHOR,
                format!("mass 0 within 2/N = {bound:.3e}"),
                format!("mass {:.3e}, {}", peig.mass, peig.verdict),
                peig.mass.abs() <= bound && !peig.witnessed,
            )
            .detail(&peig),
        );

        // The time-zero integral of F does not separate the two measures.
        let at_zero = j.integrate(&f)?.map(|v| fmt_phase(&v)).unwrap_or_else(|| "unavailable".into());
        checks.push(Check::new(
            "e1.e.time-zero-integral",
            PLUMBING,
            "∫F dψ = 0, equal to the product value",
            format!("∫F dψ = {at_zero}"),
            at_zero == "0",
        ));

        let lag_opts = ConsistencyOptions {
            lags: cfg.lags,
            ..Default::default()
        };
        checks.push(consistency_check("e1.e.product-consistency", ANCHOR, &j, 1, lag_opts, true)?);

        // Exact orbits of the sampler at a decimal angle.
        checks.push(decimal_orbits(&cfg, &beta, &triple_doc(&cfg.decimal_alpha), ctx)?);

        let joint_ok = pre_ok && marg.passed && inv.passed && eig.witnessed;
        checks.push(Check::new(
            "e1.f.verdict",
            ANCHOR,
            VERDICT,
            if joint_ok { VERDICT.to_string() } else { "chain incomplete".to_string() },
            joint_ok,
        ));

        Ok(Outcome {
            config: echo,
            checks,
            notes: vec![ONE_SIDED_NOTE.into(), FINITE_FAMILY_NOTE.into()],
        })
    }
}

fn decimal_orbits(cfg: &Config, beta: &Cocycle, doc: &Value, ctx: &Ctx) -> Result<Check> {
    let id = "e1.g.decimal-orbit";
    let alpha = parse_number(&cfg.decimal_alpha, Some(cfg.precision), "config.decimal_alpha")?;
    let j = build_joining_value(doc).map_err(|e| e.within("config"))?;
    let starts = sample_joining(&j, ctx.seed_for(id), cfg.orbit_samples);
    let mut steps = 0usize;
    let mut bad = None;
    for s in &starts {
        let orbit = j.joint.orbit(s, cfg.orbit_steps + 1)?;
        for w in orbit.windows(2) {
            let b = beta.eval(&w[0][0])?;
            let ok = w[1][0] == w[0][0]
                && w[1][1] == frac(&(&w[0][1] + &b))
                && w[1][2] == frac(&(&w[0][2] + &b + &alpha));
            steps += 1;
            if !ok && bad.is_none() {
                bad = Some(format!("{} -> {}", w[0], w[1]));
            }
        }
    }
    Ok(Check::new(
        id,
        PLUMBING,
        format!("z_(n+1) = z_n + β(x) + α exactly at precision {}", cfg.precision),
        match &bad {
            None => format!("{steps} exact steps"),
            Some(b) => format!("mismatch at {b}"),
        },
        bad.is_none(),
    ))
}
