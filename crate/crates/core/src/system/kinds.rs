//! System kinds, registered by name and selected from the `kind` field of a
//! system document.

use std::collections::BTreeMap;
use std::sync::Arc;

use std::sync::LazyLock;
use serde_json::Value;

use crate::arith::number::fmt_rat;
use crate::arith::Rational;
use crate::cocycle::Cocycle;
use crate::doc::Field;
use crate::error::{Error, Result};
use crate::measure::{parse_measure, translation_invariant, Factor, MeasureHandle, Mixture};
use crate::rank1::{rank1_map, Rank1Dynamics, Rank1Param, Rank1Spec, SkewRank1, MAX_DEPTH};
use crate::system::dynamics::{FiberRotation, ProductDynamics, SkewProduct, Translation};
use crate::system::{FiberMap, FiberedSystem, System, SystemSpec};

/// Degree of the character family used to validate invariance at build time.
pub const BUILD_CHECK_DEGREE: i64 = 8;

pub trait SystemKind: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System>;
}

#[derive(Default)]
pub struct SystemRegistry {
    kinds: BTreeMap<&'static str, Box<dyn SystemKind>>,
}

impl SystemRegistry {
    pub fn register(&mut self, kind: Box<dyn SystemKind>) {
        self.kinds.insert(kind.name(), kind);
    }

    pub fn get(&self, name: &str) -> Option<&dyn SystemKind> {
        self.kinds.get(name).map(|k| k.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.kinds.keys().copied().collect()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register(Box::new(RotationKind));
        r.register(Box::new(IdentityKind));
        r.register(Box::new(TwistKind));
        r.register(Box::new(GroupExtensionKind));
        r.register(Box::new(ProductKind));
        r.register(Box::new(FiberedKind));
        r.register(Box::new(Rank1FamilyKind));
        r
    }
}

static REGISTRY: LazyLock<SystemRegistry> = LazyLock::new(SystemRegistry::with_builtins);

pub fn registry() -> &'static SystemRegistry {
    &REGISTRY
}

pub fn build_system(spec: &SystemSpec) -> Result<System> {
    let doc = spec.to_json();
    build_from_field(Field::root(&doc, ""), None)
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

pub(crate) fn build_from_field(f: Field<'_>, inherited: Option<u32>) -> Result<System> {
    f.only_keys(&["kind", "params", "precision"])?;
    let kind_child = f.get("kind")?;
    let kind_field = kind_child.field();
    let name = kind_field.as_str()?;
    let kind = registry().get(name).ok_or_else(|| {
        kind_field.error(format!(
            "unknown system kind `{name}` (known: {})",
            registry().names().join(", ")
        ))
    })?;
    let precision = match f.opt("precision") {
        Some(p) => Some(u32::try_from(p.field().as_u64()?).map_err(|_| p.field().error("precision too large"))?),
        None => inherited,
    };
    let empty = Value::Object(Default::default());
    let params_path = join(f.path(), "params");
    let params_value = f.value().get("params").filter(|v| !v.is_null()).unwrap_or(&empty);
    let params = Field::root(params_value, &params_path);
    if !params_value.is_object() {
        return Err(params.error("expected an object"));
    }
    let spec = SystemSpec {
        kind: name.to_string(),
        params: params_value.clone(),
        precision,
    };
    kind.build(params, precision, spec)
}

fn measure_param(params: Field<'_>, key: &str, precision: Option<u32>) -> Result<Option<Mixture>> {
    params
        .opt(key)
        .map(|c| parse_measure(c.field(), precision))
        .transpose()
}

fn one_dim(m: &Mixture, params: Field<'_>, key: &str) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::spec(
            join(params.path(), key),
            format!("expected a measure on the circle, got dimension {}", m.dim()),
        ));
    }
    Ok(())
}

/// A table cocycle is only usable when the measure lives on its points.
fn check_table_support(beta: &Cocycle, m: &Mixture, field: &str) -> Result<()> {
    let Cocycle::Table(table) = beta else {
        return Ok(());
    };
    let atoms = m
        .atoms()
        .ok_or_else(|| Error::spec(field, "a table cocycle needs an atomic base measure"))?;
    for (p, _) in atoms {
        if !table.contains_key(&p[0]) {
            return Err(Error::spec(
                field,
                format!("table cocycle undefined at atom {}", fmt_rat(&p[0])),
            ));
        }
    }
    Ok(())
}

struct RotationKind;

impl SystemKind for RotationKind {
    fn name(&self) -> &'static str {
        "rotation"
    }
    fn summary(&self) -> &'static str {
        "x ↦ x + α on the circle; params: alpha, measure (default Haar)"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["alpha", "measure"])?;
        let alpha_child = params.get("alpha")?;
        let alpha = alpha_child.field().as_number(precision)?;
        let measure = measure_param(params, "measure", precision)?.unwrap_or_else(|| Mixture::haar(1));
        one_dim(&measure, params, "measure")?;
        if !translation_invariant(&measure, std::slice::from_ref(&alpha), BUILD_CHECK_DEGREE)? {
            return Err(Error::spec(
                join(params.path(), "measure"),
                format!("measure is not invariant under rotation by {}", fmt_rat(&alpha)),
            ));
        }
        System::from_parts(
            spec,
            Arc::new(Translation::new(vec![alpha])),
            MeasureHandle::from_mixture(measure),
        )
    }
}

struct IdentityKind;

impl SystemKind for IdentityKind {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn summary(&self) -> &'static str {
        "identity map; params: measure (default Haar on the circle)"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["measure"])?;
        let measure = measure_param(params, "measure", precision)?.unwrap_or_else(|| Mixture::haar(1));
        let dim = measure.dim();
        System::from_parts(
            spec,
            Arc::new(Translation::identity(dim)),
            MeasureHandle::from_mixture(measure),
        )
    }
}

struct TwistKind;

impl SystemKind for TwistKind {
    fn name(&self) -> &'static str {
        "twist"
    }
    fn summary(&self) -> &'static str {
        "(x, y) ↦ (x, y + β(x)) with measure ρ ⊗ Haar; params: rho (default Haar), beta (default identity)"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["rho", "beta"])?;
        let rho = measure_param(params, "rho", precision)?.unwrap_or_else(|| Mixture::haar(1));
        one_dim(&rho, params, "rho")?;
        let beta = match params.opt("beta") {
            Some(c) => Cocycle::parse(c.field(), precision)?,
            None => Cocycle::identity(),
        };
        check_table_support(&beta, &rho, &join(params.path(), "beta"))?;
        let total = Mixture::product(&[&rho, &Mixture::haar(1)]);
        let base = MeasureHandle::from_mixture(rho);
        let fibers = FiberedSystem {
            description: format!("rotations by β(x) over x ~ {}", base.description()),
            base,
            fiber: FiberMap::RotationBy(beta.clone()),
        };
        Ok(System::from_parts(
            spec,
            Arc::new(FiberRotation::new(beta, vec![Rational::from_integer(0.into())])),
            MeasureHandle::from_mixture(total),
        )?
        .with_fibers(fibers))
    }
}

struct GroupExtensionKind;

impl SystemKind for GroupExtensionKind {
    fn name(&self) -> &'static str {
        "group-extension"
    }
    fn summary(&self) -> &'static str {
        "(x, g) ↦ (Tx, g + φ(x)) over a base system; params: base, cocycle, group (\"circle\" or {\"cyclic\": m})"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["base", "cocycle", "group"])?;
        let base_child = params.get("base")?;
        let base = build_from_field(base_child.field(), precision)?;
        let cocycle_child = params.get("cocycle")?;
        let cocycle = Cocycle::parse(cocycle_child.field(), precision)?;
        let group = match params.opt("group") {
            None => Factor::Haar,
            Some(g) => {
                let gf = g.field();
                match gf.value() {
                    Value::String(s) if s == "circle" => Factor::Haar,
                    Value::Object(_) => {
                        gf.only_keys(&["cyclic"])?;
                        let m = gf.get("cyclic")?.field().as_u64()?;
                        if m == 0 {
                            return Err(gf.error("cyclic order must be at least 1"));
                        }
                        if !cocycle.values_in_cyclic(m) {
                            return Err(cocycle_child
                                .field()
                                .error(format!("cocycle values do not lie in Z/{m}")));
                        }
                        Factor::Cyclic(m)
                    }
                    _ => return Err(gf.error("expected \"circle\" or {\"cyclic\": m}")),
                }
            }
        };
        let base_marginal = base.measure().mixture().marginal(&[0]);
        check_table_support(&cocycle, &base_marginal, cocycle_child.field().path())?;
        let measure = Mixture::product(&[base.measure().mixture(), &Mixture::single(vec![group])]);
        System::from_parts(
            spec,
            Arc::new(SkewProduct::new(base.dynamics().clone(), cocycle)),
            MeasureHandle::from_mixture(measure),
        )
    }
}

struct ProductKind;

impl SystemKind for ProductKind {
    fn name(&self) -> &'static str {
        "product"
    }
    fn summary(&self) -> &'static str {
        "coordinatewise product; params: factors (nonempty list of systems)"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["factors"])?;
        let list = params.get("factors")?;
        let items = list.field().items()?;
        if items.is_empty() {
            return Err(list.field().error("product needs at least one factor"));
        }
        let systems = items
            .iter()
            .map(|c| build_from_field(c.field(), precision))
            .collect::<Result<Vec<_>>>()?;
        product_of(spec, &systems)
    }
}

/// Product system with independent coordinates.
pub fn product_of(spec: SystemSpec, systems: &[System]) -> Result<System> {
    let measures: Vec<&Mixture> = systems.iter().map(|s| s.measure().mixture()).collect();
    System::from_parts(
        spec,
        Arc::new(ProductDynamics::new(
            systems.iter().map(|s| s.dynamics().clone()).collect(),
        )),
        MeasureHandle::from_mixture(Mixture::product(&measures)),
    )
}

struct FiberedKind;

impl SystemKind for FiberedKind {
    fn name(&self) -> &'static str {
        "fibered"
    }
    fn summary(&self) -> &'static str {
        "system over a base measure with fibers {\"rotation-by\": cocycle}, {\"constant\": system} or {\"rank1\": {\"depth\": d}}"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["base", "fiber"])?;
        let base_child = params.get("base")?;
        let base = parse_measure(base_child.field(), precision)?;
        let fiber_child = params.get("fiber")?;
        let ff = fiber_child.field();
        let keys: Vec<&String> = ff
            .value()
            .as_object()
            .ok_or_else(|| ff.error("expected an object"))?
            .keys()
            .collect();
        if keys.len() != 1 {
            return Err(ff.error("expected exactly one of rotation-by, constant, rank1"));
        }
        let handle = MeasureHandle::from_mixture(base.clone());
        match keys[0].as_str() {
            "rotation-by" => {
                one_dim(&base, params, "base")?;
                let c = ff.get("rotation-by")?;
                let beta = Cocycle::parse(c.field(), precision)?;
                check_table_support(&beta, &base, c.field().path())?;
                let total = Mixture::product(&[&base, &Mixture::haar(1)]);
                let fibers = FiberedSystem {
                    description: format!("rotations by β(x) over x ~ {}", handle.description()),
                    base: handle,
                    fiber: FiberMap::RotationBy(beta.clone()),
                };
                Ok(System::from_parts(
                    spec,
                    Arc::new(FiberRotation::new(beta, vec![Rational::from_integer(0.into())])),
                    MeasureHandle::from_mixture(total),
                )?
                .with_fibers(fibers))
            }
            "constant" => {
                let c = ff.get("constant")?;
                let fiber = build_from_field(c.field(), precision)?;
                let total = Mixture::product(&[&base, fiber.measure().mixture()]);
                let dynamics = ProductDynamics::new(vec![
                    Arc::new(Translation::identity(base.dim())),
                    fiber.dynamics().clone(),
                ]);
                let fibers = FiberedSystem {
                    description: format!("constant fiber {} over {}", fiber.spec().kind, handle.description()),
                    base: handle,
                    fiber: FiberMap::Constant(Box::new(fiber)),
                };
                Ok(System::from_parts(spec, Arc::new(dynamics), MeasureHandle::from_mixture(total))?
                    .with_fibers(fibers))
            }
            "rank1" => {
                one_dim(&base, params, "base")?;
                let c = ff.get("rank1")?;
                let cf = c.field();
                cf.only_keys(&["depth"])?;
                let depth = depth_param(cf)?;
                let total = Mixture::product(&[&base, &Mixture::haar(1)]);
                let fibers = FiberedSystem {
                    description: format!("rank-one maps T_a at depth {depth} over a ~ {}", handle.description()),
                    base: handle,
                    fiber: FiberMap::Rank1 { depth },
                };
                Ok(System::from_parts(
                    spec,
                    Arc::new(SkewRank1::new(depth)),
                    MeasureHandle::from_mixture(total),
                )?
                .with_fibers(fibers))
            }
            other => Err(Error::spec(
                join(ff.path(), other),
                "unknown fiber map (expected rotation-by, constant, rank1)",
            )),
        }
    }
}

fn depth_param(f: Field<'_>) -> Result<usize> {
    let d = f.get("depth")?;
    let depth = d.field().as_u64()? as usize;
    if depth == 0 || depth > MAX_DEPTH {
        return Err(d.field().error(format!("depth must be in 1..={MAX_DEPTH}")));
    }
    Ok(depth)
}

struct Rank1FamilyKind;

impl SystemKind for Rank1FamilyKind {
    fn name(&self) -> &'static str {
        "rank1-family"
    }
    fn summary(&self) -> &'static str {
        "rank-one map T_a at a finite stage; params: a (\"p/q\" or {\"digits\": \"0101…\"}), depth"
    }
    fn build(&self, params: Field<'_>, precision: Option<u32>, spec: SystemSpec) -> Result<System> {
        params.only_keys(&["a", "depth"])?;
        let a_child = params.get("a")?;
        let a = Rank1Param::parse(a_child.field(), precision)?;
        let depth = depth_param(params)?;
        if let Rank1Param::Digits(d) = &a {
            if d.len() < depth {
                return Err(a_child.field().error(format!(
                    "{} digits given, depth {depth} needs at least {depth}",
                    d.len()
                )));
            }
        }
        let map = rank1_map(&Rank1Spec { a, depth })?;
        let measure = MeasureHandle::new(
            Mixture::haar(1),
            format!("Lebesgue on the renormalized stage-{depth} tower"),
        );
        System::from_parts(spec, Arc::new(Rank1Dynamics::new(map)), measure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn spec(v: Value) -> SystemSpec {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn unknown_kind_names_the_field() {
        let err = build_system(&spec(json!({"kind": "warp", "params": {}}))).unwrap_err();
        match err {
            Error::Spec { field, reason } => {
                assert_eq!(field, "kind");
                assert!(reason.contains("rotation"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn empty_product_is_rejected() {
        let err = build_system(&spec(json!({"kind": "product", "params": {"factors": []}}))).unwrap_err();
        assert!(matches!(err, Error::Spec { ref field, .. } if field == "params.factors"));
    }

    #[test]
    fn nested_errors_carry_full_path() {
        let err = build_system(&spec(json!({"kind": "product", "params": {"factors": [
            {"kind": "rotation", "params": {"alpha": "1/2"}},
            {"kind": "rotation", "params": {"alpha": "x"}}
        ]}})))
        .unwrap_err();
        assert!(matches!(err, Error::Spec { ref field, .. } if field == "params.factors[1].params.alpha"));
    }

    #[test]
    fn rotation_measure_must_be_invariant() {
        let err = build_system(&spec(json!({"kind": "rotation", "params": {
            "alpha": "1/3", "measure": {"type": "dirac", "at": "0"}
        }})))
        .unwrap_err();
        assert!(matches!(err, Error::Spec { ref field, .. } if field == "params.measure"));
        build_system(&spec(json!({"kind": "rotation", "params": {
            "alpha": "1/3", "measure": {"type": "cyclic", "order": 3}
        }})))
        .unwrap();
    }

    #[test]
    fn cyclic_group_requires_compatible_cocycle() {
        let err = build_system(&spec(json!({"kind": "group-extension", "params": {
            "base": {"kind": "rotation", "params": {"alpha": "1/2"}},
            "cocycle": {"type": "affine", "slope": "0", "offset": "1/3"},
            "group": {"cyclic": 2}
        }})))
        .unwrap_err();
        assert!(matches!(err, Error::Spec { ref field, .. } if field == "params.cocycle"));
    }
}
