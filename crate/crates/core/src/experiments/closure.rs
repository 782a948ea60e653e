//! Spot check of product closure: joinings between a product of two twists
//! and an ergodic rotation.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{consistency_check, parse_config, Check, Ctx, Experiment, Outcome};
use crate::error::{Error, Result};
use crate::joinings::{build_joining_value, ConsistencyOptions, ONE_SIDED_NOTE};
use crate::system::{build_system, SystemSpec};

const ANCHOR: &str = "the class of systems disjoint from ergodic ones is closed under products";

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    first: SystemSpec,
    second: SystemSpec,
    rotation: SystemSpec,
    /// Character degree on the sampled path.
    degree: i64,
    samples: usize,
    /// Character degree and lags on the exact path.
    exact_degree: i64,
    lags: usize,
}

impl Default for Config {
    fn default() -> Self {
        let twist = SystemSpec::new("twist", json!({"rho": {"type": "haar"}, "beta": {"type": "affine"}}));
        Config {
            first: twist.clone(),
            second: twist,
            rotation: SystemSpec::new("rotation", json!({"alpha": "1.4142135623730950488016887242096980785696"}))
                .with_precision(40),
            degree: 1,
            samples: 100_000,
            exact_degree: 2,
            lags: 4,
        }
    }
}

pub struct ProductClosure;

impl Experiment for ProductClosure {
    fn name(&self) -> &'static str {
        "product-closure"
    }

    fn summary(&self) -> &'static str {
        "every constructible joining of T × S with an ergodic rotation passes the product-consistency test"
    }

    fn run(&self, config: &Value, ctx: &Ctx) -> Result<Outcome> {
        let (cfg, echo): (Config, Value) = parse_config(config)?;
        for (name, s) in [("first", &cfg.first), ("second", &cfg.second), ("rotation", &cfg.rotation)] {
            build_system(s).map_err(|e| e.within(&format!("config.{name}")))?;
        }
        let ts = SystemSpec::new("product", json!({"factors": [cfg.first, cfg.second]}));
        let components = json!([ts, cfg.rotation]);
        let first_dim = build_system(&cfg.first)?.dim();

        let joinings = [
            ("pc.product", json!({"kind": "product", "components": components})),
            (
                "pc.rel-indep-base",
                json!({"kind": "rel-indep", "components": components,
                       "params": {"factors": [{"coordinates": [0, first_dim]}, "trivial"]}}),
            ),
            (
                "pc.rel-indep-base-rotation",
                json!({"kind": "rel-indep", "components": components,
                       "params": {"factors": [{"coordinates": [0]}, {"coordinates": [0]}], "base": "product"}}),
            ),
        ];
        let mut checks = Vec::new();
        for (id, doc) in &joinings {
            let j = build_joining_value(doc)?;
            let sampled_id = format!("{id}.sampled");
            let sampled = ConsistencyOptions {
                samples: cfg.samples,
                seed: ctx.seed_for(&sampled_id),
                force_sampled: true,
                ..Default::default()
            };
            checks.push(consistency_check(&sampled_id, ANCHOR, &j, cfg.degree, sampled, false)?);
            if j.exact() {
                let exact = ConsistencyOptions {
                    lags: cfg.lags,
                    ..Default::default()
                };
                checks.push(consistency_check(&format!("{id}.exact"), ANCHOR, &j, cfg.exact_degree, exact, false)?);
            }
        }

        // Coupling the base circle of T diagonally with the rotation is not
        // invariant, so it is not a joining at all.
        let diagonal = build_joining_value(&json!({
            "kind": "rel-indep", "components": components,
            "params": {"factors": [{"coordinates": [0]}, {"coordinates": [0]}], "base": "diagonal"}
        }));
        let (observed, ok) = match diagonal {
            Err(Error::Rejected { character }) => (format!("rejected: invariance fails at {character}"), true),
            Err(e) => (format!("error: {e}"), false),
            Ok(_) => ("accepted".to_string(), false),
        };
        checks.push(Check::new(
            "pc.diagonal-base-rejected",
            ANCHOR,
            "rejected: not invariant",
            observed,
            ok,
        ));

        Ok(Outcome {
            config: echo,
            checks,
            notes: vec![ONE_SIDED_NOTE.into()],
        })
    }
}
