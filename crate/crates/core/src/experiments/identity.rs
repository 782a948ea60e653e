//! An identity map on an atomic measure against an ergodic rotation.

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{consistency_check, fmt_complex, parse_config, Check, Ctx, Experiment, Outcome};
use crate::arith::number::rat;
use crate::arith::{PhaseSum, Rational};
use crate::error::{Error, Result};
use crate::joinings::{build_joining_value, capped_family, invariance_check, ConsistencyOptions, ONE_SIDED_NOTE};
use crate::measure::{character_exact, MonteCarlo};
use crate::system::{build_system, Freq, SystemSpec};

const ANCHOR: &str = "identity maps are disjoint from ergodic systems";

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    /// Measure document for the identity system.
    identity_measure: Value,
    /// Ergodic rotation, as a system document.
    rotation: SystemSpec,
    degree: i64,
    lags: usize,
    /// Length of the ergodic averages.
    order: usize,
    samples: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            identity_measure: json!({
                "type": "mixture",
                "components": [
                    {"weight": "1/2", "measure": {"type": "dirac", "at": "0"}},
                    {"weight": "1/2", "measure": {"type": "dirac", "at": "1/2"}}
                ]
            }),
            rotation: SystemSpec::new(
                "rotation",
                json!({"alpha": "1/3", "measure": {"type": "cyclic", "order": 3}}),
            ),
            degree: 8,
            lags: 4,
            order: 4096,
            samples: 20_000,
        }
    }
}

pub struct IdentityDisjoint;

impl Experiment for IdentityDisjoint {
    fn name(&self) -> &'static str {
        "identity-disjoint"
    }

    fn summary(&self) -> &'static str {
        "identity on an atomic measure joined with an ergodic rotation: every constructible joining is the product"
    }

    fn run(&self, config: &Value, ctx: &Ctx) -> Result<Outcome> {
        let (cfg, echo): (Config, Value) = parse_config(config)?;
        let identity = SystemSpec::new("identity", json!({"measure": cfg.identity_measure}));
        let id_sys = build_system(&identity).map_err(|e| e.within("config.identity_measure"))?;
        let rot_sys = build_system(&cfg.rotation).map_err(|e| e.within("config.rotation"))?;
        if id_sys.dim() != 1 || rot_sys.dim() != 1 {
            return Err(Error::spec("config", "both systems must live on the circle"));
        }
        let components = json!([identity, cfg.rotation]);
        let exact = ConsistencyOptions {
            lags: cfg.lags,
            ..Default::default()
        };
        let mut checks = Vec::new();

        let joinings = [
            ("id.joining.product", json!({"kind": "product", "components": components})),
            (
                "id.joining.rel-indep-trivial",
                json!({"kind": "rel-indep", "components": components,
                       "params": {"factors": ["trivial", "trivial"]}}),
            ),
            (
                "id.joining.rel-indep-identity-factor",
                json!({"kind": "rel-indep", "components": components,
                       "params": {"factors": [{"coordinates": [0]}, "trivial"]}}),
            ),
        ];
        for (id, doc) in &joinings {
            let j = build_joining_value(doc)?;
            checks.push(consistency_check(id, ANCHOR, &j, cfg.degree, exact, false)?);
        }

        // A product-shaped sampler, checked on the sampled path.
        let atoms = product_atoms(&id_sys, &rot_sys)?;
        let sampler = build_joining_value(&json!({
            "kind": "custom-sampler", "components": components, "params": {"atoms": atoms}
        }))?;
        let sampled = ConsistencyOptions {
            samples: cfg.samples,
            seed: ctx.seed_for("id.joining.sampler"),
            force_sampled: true,
            ..Default::default()
        };
        checks.push(consistency_check("id.joining.sampler", ANCHOR, &sampler, cfg.degree, sampled, false)?);

        // A coupling with the right marginals that is not product-shaped
        // cannot be invariant.
        if let Some(skewed) = skewed_atoms(&id_sys, &rot_sys)? {
            let j = build_joining_value(&json!({
                "kind": "custom-sampler", "components": components, "params": {"atoms": skewed}
            }))?;
            let family = capped_family(j.dim(), cfg.degree, 6_000);
            let inv = invariance_check(&j, &family, MonteCarlo::default())?;
            let broken = inv.entries.iter().find(|e| !e.passed).map(|e| e.character.clone());
            checks.push(Check::new(
                "id.coupling.non-product-not-invariant",
                ANCHOR,
                "invariance fails",
                match &broken {
                    Some(k) => format!("invariance fails at character {k}"),
                    None => "invariant on the whole family".into(),
                },
                broken.is_some(),
            ));
        }

        checks.push(von_neumann(&rot_sys, cfg.degree, cfg.order)?);

        Ok(Outcome {
            config: echo,
            checks,
            notes: vec![ONE_SIDED_NOTE.into()],
        })
    }
}

fn atoms_of(sys: &crate::system::System) -> Result<Vec<(Rational, Rational)>> {
    let atoms = sys
        .measure()
        .mixture()
        .atoms()
        .ok_or_else(|| Error::spec("config", "the sampler checks need atomic measures"))?;
    Ok(atoms.into_iter().map(|(p, w)| (p[0].clone(), w)).collect())
}

fn atom_doc(w: &Rational, x: &Rational, y: &Rational) -> Value {
    json!({"weight": w.to_string(), "point": [x.to_string(), y.to_string()]})
}

fn product_atoms(a: &crate::system::System, b: &crate::system::System) -> Result<Vec<Value>> {
    let (xs, ys) = (atoms_of(a)?, atoms_of(b)?);
    Ok(xs
        .iter()
        .flat_map(|(x, wx)| ys.iter().map(move |(y, wy)| atom_doc(&(wx * wy), x, y)))
        .collect())
}

/// Moves mass between two cells of the product coupling while keeping both
/// marginals; `None` when either measure has a single atom.
fn skewed_atoms(a: &crate::system::System, b: &crate::system::System) -> Result<Option<Vec<Value>>> {
    let (xs, ys) = (atoms_of(a)?, atoms_of(b)?);
    if xs.len() < 2 || ys.len() < 2 {
        return Ok(None);
    }
    let mut cells: Vec<Vec<Rational>> = xs
        .iter()
        .map(|(_, wx)| ys.iter().map(|(_, wy)| wx * wy).collect())
        .collect();
    let eps = [&cells[0][0], &cells[0][1], &cells[1][0], &cells[1][1]]
        .into_iter()
        .min()
        .expect("four cells")
        / Rational::from_integer(2.into());
    cells[0][0] += &eps;
    cells[1][1] += &eps;
    cells[0][1] -= &eps;
    cells[1][0] -= &eps;
    let mut out = Vec::new();
    for (i, (x, _)) in xs.iter().enumerate() {
        for (jj, (y, _)) in ys.iter().enumerate() {
            out.push(atom_doc(&cells[i][jj], x, y));
        }
    }
    Ok(Some(out))
}

/// Ergodic averages `(1/N) Σ_{n<N} h(Rⁿ x)` of centered characters `h`,
/// evaluated exactly from every atom of the rotation's measure when it is
/// atomic, otherwise from a few rational starting points.
fn von_neumann(rot: &crate::system::System, degree: i64, order: usize) -> Result<Check> {
    let starts: Vec<Rational> = match rot.measure().mixture().atoms() {
        Some(a) => a.into_iter().map(|(p, _)| p[0].clone()).collect(),
        None => vec![Rational::zero(), rat(1, 7), rat(2, 5)],
    };
    let bound = 2.0 / order as f64;
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for k in (1..=degree).flat_map(|k| [k, -k]) {
        let freq = Freq(vec![k]);
        let mean = rot
            .measure()
            .integrator(&freq)?
            .ok_or_else(|| Error::Unsupported("von Neumann check needs exact integrals".into()))?;
        for x0 in &starts {
            let orbit = rot.orbit(&crate::system::Point(vec![x0.clone()]), order)?;
            let mut sum = PhaseSum::zero();
            for p in &orbit {
                sum.add_assign(&character_exact(&freq, p));
            }
            let centered = sum.sub(&mean.scale(&Rational::from_integer((order as i64).into())));
            let avg = centered.to_complex() / order as f64;
            if avg.norm() > worst {
                worst = avg.norm();
                worst_at = format!("k = {k}, start {x0}: {}", fmt_complex(avg));
            }
        }
    }
    let observed = if worst_at.is_empty() {
        "all averages vanish exactly".to_string()
    } else {
        format!("max |average| = {worst:.3e} ({worst_at})")
    };
    Ok(Check::new(
        "id.von-neumann-averages",
        ANCHOR,
        format!("max |average| <= 2/N = {bound:.3e}"),
        observed,
        worst <= bound,
    ))
}
