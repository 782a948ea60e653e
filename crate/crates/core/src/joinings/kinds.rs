//! Joining kinds, registered by name and selected from the `kind` field of a
//! joining document.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use std::sync::LazyLock;
use serde_json::{json, Value};

use crate::affine::AffineMap;
use crate::arith::number::fmt_rat;
use crate::arith::{PhaseSum, Rational};
use crate::cocycle::Cocycle;
use crate::doc::Field;
use crate::error::{Error, Result};
use crate::joinings::{capped_family, invariance_check, Joining, JoiningSpec};
use crate::measure::{parse_measure, Component, Factor, MeasureHandle, MonteCarlo, Mixture};
use crate::system::dynamics::{FiberRotation, ProductDynamics};
use crate::system::kinds::{build_from_field as build_system_field, product_of};
use crate::system::{build_system, Freq, System, SystemSpec};

/// Characters used to validate constructions at build time.
const BUILD_DEGREE: i64 = 8;
const BUILD_CAP: usize = 6_000;

pub trait JoiningKind: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining>;
}

#[derive(Default)]
pub struct JoiningRegistry {
    kinds: BTreeMap<&'static str, Box<dyn JoiningKind>>,
}

impl JoiningRegistry {
    pub fn register(&mut self, kind: Box<dyn JoiningKind>) {
        self.kinds.insert(kind.name(), kind);
    }

    pub fn get(&self, name: &str) -> Option<&dyn JoiningKind> {
        self.kinds.get(name).map(|k| k.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.kinds.keys().copied().collect()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::default();
        r.register(Box::new(ProductJoining));
        r.register(Box::new(DiagonalJoining));
        r.register(Box::new(GraphJoining));
        r.register(Box::new(OffDiagonalJoining));
        r.register(Box::new(RelIndepJoining));
        r.register(Box::new(Example1Triple));
        r.register(Box::new(CustomSampler));
        r
    }
}

static REGISTRY: LazyLock<JoiningRegistry> = LazyLock::new(JoiningRegistry::with_builtins);

pub fn joining_registry() -> &'static JoiningRegistry {
    &REGISTRY
}

pub fn build_joining(spec: &JoiningSpec) -> Result<Joining> {
    let doc = serde_json::to_value(spec)?;
    build_from_field(Field::root(&doc, ""))
}

pub fn build_joining_value(doc: &Value) -> Result<Joining> {
    build_from_field(Field::root(doc, ""))
}

pub(crate) fn build_from_field(f: Field<'_>) -> Result<Joining> {
    f.only_keys(&["kind", "components", "params", "precision"])?;
    let kind_child = f.get("kind")?;
    let name = kind_child.field().as_str()?;
    let kind = joining_registry().get(name).ok_or_else(|| {
        kind_child.field().error(format!(
            "unknown joining kind `{name}` (known: {})",
            joining_registry().names().join(", ")
        ))
    })?;
    let precision = match f.opt("precision") {
        Some(p) => Some(p.field().as_u64()? as u32),
        None => None,
    };
    let (components, component_specs) = match f.opt("components") {
        Some(list) => {
            let items = list.field().items()?;
            let systems = items
                .iter()
                .map(|c| build_from_field_system(c.field(), precision))
                .collect::<Result<Vec<_>>>()?;
            let specs = systems.iter().map(|s| s.spec().clone()).collect();
            (systems, specs)
        }
        None => (Vec::new(), Vec::new()),
    };
    let empty = Value::Object(Default::default());
    let params_value = f.value().get("params").filter(|v| !v.is_null()).unwrap_or(&empty);
    let params_path = if f.path().is_empty() {
        "params".to_string()
    } else {
        format!("{}.params", f.path())
    };
    let params = Field::root(params_value, &params_path);
    if !params_value.is_object() {
        return Err(params.error("expected an object"));
    }
    let spec = JoiningSpec {
        kind: name.to_string(),
        components: component_specs,
        params: params_value.clone(),
        precision,
    };
    kind.build(spec, params, components)
}

fn build_from_field_system(f: Field<'_>, precision: Option<u32>) -> Result<System> {
    build_system_field(f, precision)
}

fn joint_spec(spec: &JoiningSpec) -> SystemSpec {
    SystemSpec::new("joining", json!({ "joining": spec }))
}

/// One system joined with itself: accepts one component, or two equal ones.
fn self_joined(components: Vec<System>) -> Result<System> {
    match components.len() {
        1 => Ok(components.into_iter().next().expect("one")),
        2 if components[0].spec() == components[1].spec() => {
            Ok(components.into_iter().next().expect("two"))
        }
        2 => Err(Error::spec("components", "both components must be the same system")),
        n => Err(Error::spec(
            "components",
            format!("expected one system (or two equal ones), got {n}"),
        )),
    }
}

fn consecutive(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut start = 0;
    dims.iter()
        .map(|&d| {
            let r: Vec<usize> = (start..start + d).collect();
            start += d;
            r
        })
        .collect()
}

/// Self-joining `(x, G x)_*μ` where `G` is given per affine piece.
fn graph_measure(sys: &System, piece: impl Fn(&Component) -> Result<Option<Component>>) -> Result<Mixture> {
    let comps = sys.affine_components().ok_or_else(|| {
        Error::Unsupported("graph joinings need a system with affine pieces".into())
    })?;
    let mut out = Vec::with_capacity(comps.len());
    for c in &comps {
        let image = piece(c)?.ok_or_else(|| {
            Error::Unsupported("the joining map has no affine form on the measure".into())
        })?;
        out.push(Component {
            weight: c.weight.clone(),
            factors: c.factors.clone(),
            push: AffineMap::stack(&[&c.push, &image.push]),
        });
    }
    Mixture::new(2 * sys.dim(), out)
}

fn self_joining(spec: JoiningSpec, sys: System, measure: Mixture) -> Result<Joining> {
    let d = sys.dim();
    let joint = System::from_parts(
        joint_spec(&spec),
        Arc::new(ProductDynamics::new(vec![sys.dynamics().clone(), sys.dynamics().clone()])),
        MeasureHandle::from_mixture(measure),
    )?;
    Ok(Joining {
        spec,
        components: vec![sys.clone(), sys],
        marginals: consecutive(&[d, d]),
        joint,
        invariance_enforced: true,
    })
}

/// Rejects joinings that fail invariance on the build family.
fn enforce_invariance(j: &Joining) -> Result<()> {
    let family = capped_family(j.dim(), BUILD_DEGREE, BUILD_CAP);
    let r = invariance_check(j, &family, MonteCarlo::default())?;
    match r.entries.into_iter().find(|e| !e.passed) {
        Some(e) => Err(Error::Rejected { character: e.character }),
        None => Ok(()),
    }
}

struct ProductJoining;

impl JoiningKind for ProductJoining {
    fn name(&self) -> &'static str {
        "product"
    }
    fn summary(&self) -> &'static str {
        "independent coupling μ ⊗ ν of the components"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&[])?;
        if components.is_empty() {
            return Err(Error::spec("components", "at least one component is required"));
        }
        let joint = product_of(joint_spec(&spec), &components)?;
        let dims: Vec<usize> = components.iter().map(System::dim).collect();
        Ok(Joining {
            spec,
            marginals: consecutive(&dims),
            components,
            joint,
            invariance_enforced: true,
        })
    }
}

struct DiagonalJoining;

impl JoiningKind for DiagonalJoining {
    fn name(&self) -> &'static str {
        "diagonal"
    }
    fn summary(&self) -> &'static str {
        "(x, x)_*μ for one system joined with itself"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&[])?;
        let sys = self_joined(components)?;
        let d = sys.dim();
        let diag = AffineMap::stack(&[&AffineMap::identity(d), &AffineMap::identity(d)]);
        let measure = sys.measure().mixture().pushforward(&diag)?;
        self_joining(spec, sys, measure)
    }
}

struct GraphJoining;

impl JoiningKind for GraphJoining {
    fn name(&self) -> &'static str {
        "graph"
    }
    fn summary(&self) -> &'static str {
        "(x, Rx)_*μ for a measure-preserving R commuting with T; params: map (system document)"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&["map"])?;
        let sys = self_joined(components)?;
        let map_child = params.get("map")?;
        let r = build_system_field(map_child.field(), spec.precision)?;
        let map_path = map_child.field().path().to_string();
        if r.dim() != sys.dim() {
            return Err(Error::spec(
                map_path,
                format!("map acts on dimension {}, system on {}", r.dim(), sys.dim()),
            ));
        }
        // R acting on T's measure
        let r_on_mu = System::from_parts(r.spec().clone(), r.dynamics().clone(), sys.measure().clone())?;
        let zero = Freq::zero(sys.dim());
        let family = capped_family(sys.dim(), BUILD_DEGREE, BUILD_CAP);
        for k in &family {
            let v = r_on_mu.transfer_integrals(k, &zero, 1)?.ok_or_else(|| {
                Error::Unsupported("graph maps must act affinely on the measure".into())
            })?;
            if !v[0].exact_eq(&v[1]) {
                return Err(Error::Rejected { character: k.clone() });
            }
        }
        check_commutes(&sys, &r, &family).map_err(|e| e.within(&map_path))?;
        let rd = r.dynamics().clone();
        let measure = graph_measure(&sys, |c| {
            Ok(match rd.affine_on(c) {
                Some(m) => Some(c.pushed(&m)?),
                None => None,
            })
        })?;
        self_joining(spec, sys, measure)
    }
}

/// `∫ e(⟨k, RTx - TRx⟩) dμ = 1` for every `k` in the family.
fn check_commutes(sys: &System, r: &System, family: &[Freq]) -> Result<()> {
    let t = sys.dynamics();
    let rd = r.dynamics();
    let comps = sys
        .affine_components()
        .ok_or_else(|| Error::Unsupported("commutation check needs affine pieces".into()))?;
    let unsupported = || Error::Unsupported("commutation check needs affine pieces".into());
    for c in &comps {
        let mt = t.affine_on(c).ok_or_else(unsupported)?;
        let tc = c.pushed(&mt)?;
        let rt = rd.affine_on(&tc).ok_or_else(unsupported)?.compose(&mt)?;
        let mr = rd.affine_on(c).ok_or_else(unsupported)?;
        let rc = c.pushed(&mr)?;
        let tr = t.affine_on(&rc).ok_or_else(unsupported)?.compose(&mr)?;
        let a = rt.compose(&c.push)?;
        let b = tr.compose(&c.push)?;
        for k in family {
            let (ka, pa) = a.pullback(k)?;
            let (kb, pb) = b.pullback(k)?;
            let diff: Vec<i64> = ka.iter().zip(kb.iter()).map(|(x, y)| x - y).collect();
            let v = c.integrate_factors(&diff, pa - pb).ok_or_else(unsupported)?;
            if !v.exact_eq(&PhaseSum::one()) {
                return Err(Error::spec("", format!("map does not commute with T (character {k})")));
            }
        }
    }
    Ok(())
}

struct OffDiagonalJoining;

impl JoiningKind for OffDiagonalJoining {
    fn name(&self) -> &'static str {
        "off-diagonal"
    }
    fn summary(&self) -> &'static str {
        "(x, T^n x)_*μ; params: power n >= 0"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&["power"])?;
        let sys = self_joined(components)?;
        let power = match params.opt("power") {
            Some(p) => p.field().as_u64()? as usize,
            None => 1,
        };
        let t = sys.dynamics().clone();
        let measure = graph_measure(&sys, |c| {
            let mut cur = c.clone();
            for _ in 0..power {
                match t.affine_on(&cur) {
                    Some(m) => cur = cur.pushed(&m)?,
                    None => return Ok(None),
                }
            }
            Ok(Some(cur))
        })?;
        self_joining(spec, sys, measure)
    }
}

struct RelIndepJoining;

fn parse_factor(f: Field<'_>, dim: usize) -> Result<Vec<usize>> {
    match f.value() {
        Value::String(s) if s == "trivial" => Ok(Vec::new()),
        Value::Object(_) => {
            f.only_keys(&["coordinates"])?;
            let list = f.get("coordinates")?;
            let mut coords = Vec::new();
            for item in list.field().items()? {
                let c = item.field().as_u64()? as usize;
                if c >= dim {
                    return Err(item.field().error(format!("coordinate {c} outside dimension {dim}")));
                }
                if coords.contains(&c) {
                    return Err(item.field().error("duplicate coordinate"));
                }
                coords.push(c);
            }
            Ok(coords)
        }
        _ => Err(f.error("expected \"trivial\" or {\"coordinates\": [..]}")),
    }
}

/// The coordinates form a factor when, on every affine piece, their images
/// only read those coordinates.
fn is_factor(sys: &System, coords: &[usize]) -> Result<bool> {
    if coords.is_empty() {
        return Ok(true);
    }
    let comps = sys
        .affine_components()
        .ok_or_else(|| Error::Unsupported("factor check needs affine pieces".into()))?;
    for c in &comps {
        let m = sys.dynamics().affine_on(c).expect("affine piece");
        for &i in coords {
            for j in 0..sys.dim() {
                if m.matrix.get(i, j) != 0 && !coords.contains(&j) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

impl JoiningKind for RelIndepJoining {
    fn name(&self) -> &'static str {
        "rel-indep"
    }
    fn summary(&self) -> &'static str {
        "relatively independent extension over a joining of factors; params: factors [f1, f2] (\"trivial\" or {\"coordinates\": [..]}), base (\"product\" or \"diagonal\")"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&["factors", "base"])?;
        if components.len() != 2 {
            return Err(Error::spec("components", "rel-indep joins exactly two systems"));
        }
        let factors_child = params.get("factors")?;
        let items = factors_child.field().items()?;
        if items.len() != 2 {
            return Err(factors_child.field().error("expected two factor descriptions"));
        }
        let c1 = parse_factor(items[0].field(), components[0].dim())?;
        let c2 = parse_factor(items[1].field(), components[1].dim())?;
        let base_kind = match params.opt("base") {
            Some(b) => b.field().as_str()?.to_string(),
            None => "product".to_string(),
        };
        for (i, (sys, coords)) in components.iter().zip([&c1, &c2]).enumerate() {
            if !is_factor(sys, coords)? {
                return Err(items[i].field().error("coordinates do not span a factor of the system"));
            }
        }
        let split = |sys: &System, coords: &[usize], i: usize| {
            sys.measure().mixture().split_over(coords).ok_or_else(|| {
                items[i]
                    .field()
                    .error("measure does not disintegrate as factor ⊗ common fiber over these coordinates")
            })
        };
        let (b1, f1) = split(&components[0], &c1, 0)?;
        let (b2, f2) = split(&components[1], &c2, 1)?;
        let base = match base_kind.as_str() {
            "product" => Mixture::product(&[&b1, &b2]),
            "diagonal" => {
                if c1.len() != c2.len() || !same_measure(&b1, &b2)? {
                    return Err(Error::spec(
                        format!("{}.base", params.path()),
                        "diagonal base needs the same factor measure on both sides",
                    ));
                }
                let d = c1.len();
                b1.pushforward(&AffineMap::stack(&[&AffineMap::identity(d), &AffineMap::identity(d)]))?
            }
            other => {
                return Err(Error::spec(
                    format!("{}.base", params.path()),
                    format!("unknown base joining `{other}` (expected product or diagonal)"),
                ))
            }
        };
        // source order: c1, c2, rest1, rest2; target order: component 1 then 2
        let (d1, d2) = (components[0].dim(), components[1].dim());
        let rest1: Vec<usize> = (0..d1).filter(|i| !c1.contains(i)).collect();
        let rest2: Vec<usize> = (0..d2).filter(|i| !c2.contains(i)).collect();
        let mut source_of = vec![0usize; d1 + d2];
        let mut pos = 0;
        for &i in &c1 {
            source_of[i] = pos;
            pos += 1;
        }
        for &i in &c2 {
            source_of[d1 + i] = pos;
            pos += 1;
        }
        for &i in &rest1 {
            source_of[i] = pos;
            pos += 1;
        }
        for &i in &rest2 {
            source_of[d1 + i] = pos;
            pos += 1;
        }
        let measure = Mixture::product(&[&base, &f1, &f2]).pushforward(&AffineMap::permutation(&source_of))?;
        let joint = System::from_parts(
            joint_spec(&spec),
            Arc::new(ProductDynamics::new(vec![
                components[0].dynamics().clone(),
                components[1].dynamics().clone(),
            ])),
            MeasureHandle::from_mixture(measure),
        )?;
        let j = Joining {
            spec,
            marginals: consecutive(&[d1, d2]),
            components,
            joint,
            invariance_enforced: true,
        };
        enforce_invariance(&j)?;
        Ok(j)
    }
}

/// Equal integrals on every character of the build family.
fn same_measure(a: &Mixture, b: &Mixture) -> Result<bool> {
    if a.dim() != b.dim() {
        return Ok(false);
    }
    for k in capped_family(a.dim(), BUILD_DEGREE, BUILD_CAP) {
        match (a.integral(&k)?, b.integral(&k)?) {
            (Some(x), Some(y)) if x.exact_eq(&y) => {}
            (Some(_), Some(_)) => return Ok(false),
            _ => return Err(Error::Unsupported("comparing factor measures needs exact integrals".into())),
        }
    }
    Ok(true)
}

struct Example1Triple;

impl JoiningKind for Example1Triple {
    fn name(&self) -> &'static str {
        "example1-triple"
    }
    fn summary(&self) -> &'static str {
        "(x, y, z) with x ~ ρ, y, z ~ Haar under P(x, y, z) = (x, y + β(x), z + β(x) + α); params: alpha, rho, beta, precision"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&["alpha", "rho", "beta", "precision"])?;
        if !components.is_empty() {
            return Err(Error::spec("components", "example1-triple builds its own components"));
        }
        let precision = match params.opt("precision") {
            Some(p) => Some(p.field().as_u64()? as u32),
            None => spec.precision,
        };
        let alpha = params.get("alpha")?.field().as_number(precision)?;
        let rho_doc = params
            .value()
            .get("rho")
            .cloned()
            .unwrap_or_else(|| json!({"type": "haar"}));
        let rho = match params.opt("rho") {
            Some(r) => parse_measure(r.field(), precision)?,
            None => Mixture::haar(1),
        };
        if rho.dim() != 1 {
            return Err(Error::spec(format!("{}.rho", params.path()), "rho must live on the circle"));
        }
        let beta = match params.opt("beta") {
            Some(b) => Cocycle::parse(b.field(), precision)?,
            None => Cocycle::identity(),
        };
        let shifted = beta.shifted(&alpha);
        let twist = |b: &Cocycle| {
            let mut s = SystemSpec::new("twist", json!({"rho": rho_doc, "beta": b.to_json()}));
            s.precision = precision;
            build_system(&s)
        };
        let t = twist(&beta).map_err(|e| e.within(params.path()))?;
        let r = twist(&shifted).map_err(|e| e.within(params.path()))?;
        let measure = Mixture::product(&[&rho, &Mixture::haar(1), &Mixture::haar(1)]);
        let dynamics = FiberRotation::new(beta, vec![Rational::zero(), alpha]);
        let joint = System::from_parts(
            joint_spec(&spec),
            Arc::new(dynamics),
            MeasureHandle::new(measure, format!("ρ ⊗ Haar ⊗ Haar, ρ = {}", rho.describe())),
        )?;
        let mut spec = spec;
        spec.components = vec![t.spec().clone(), r.spec().clone()];
        Ok(Joining {
            spec,
            components: vec![t, r],
            marginals: vec![vec![0, 1], vec![0, 2]],
            joint,
            invariance_enforced: true,
        })
    }
}

struct CustomSampler;

impl JoiningKind for CustomSampler {
    fn name(&self) -> &'static str {
        "custom-sampler"
    }
    fn summary(&self) -> &'static str {
        "finitely many weighted atoms on the product space; params: atoms [{weight, point}]; marginals validated, invariance reported but not enforced"
    }
    fn build(&self, spec: JoiningSpec, params: Field<'_>, components: Vec<System>) -> Result<Joining> {
        params.only_keys(&["atoms"])?;
        if components.is_empty() {
            return Err(Error::spec("components", "at least one component is required"));
        }
        let dims: Vec<usize> = components.iter().map(System::dim).collect();
        let dim: usize = dims.iter().sum();
        let atoms_child = params.get("atoms")?;
        let items = atoms_child.field().items()?;
        if items.is_empty() {
            return Err(atoms_child.field().error("at least one atom is required"));
        }
        let mut comps = Vec::with_capacity(items.len());
        for item in &items {
            let f = item.field();
            f.only_keys(&["weight", "point"])?;
            let weight = f.get("weight")?.field().as_number(spec.precision)?;
            if weight <= Rational::zero() {
                return Err(f.error("weights must be positive"));
            }
            let point_child = f.get("point")?;
            let coords = point_child.field().items()?;
            if coords.len() != dim {
                return Err(point_child
                    .field()
                    .error(format!("expected {dim} coordinates, got {}", coords.len())));
            }
            let factors = coords
                .iter()
                .map(|c| Ok(Factor::Dirac(crate::arith::frac(&c.field().as_number(spec.precision)?))))
                .collect::<Result<Vec<_>>>()?;
            comps.push(Component::product(weight, factors));
        }
        let total: Rational = comps.iter().map(|c| c.weight.clone()).sum();
        if total != Rational::one() {
            return Err(atoms_child
                .field()
                .error(format!("weights sum to {}, expected exactly 1", fmt_rat(&total))));
        }
        let measure = Mixture::new(dim, comps).map_err(|e| e.within(atoms_child.field().path()))?;
        let joint = System::from_parts(
            joint_spec(&spec),
            Arc::new(ProductDynamics::new(components.iter().map(|c| c.dynamics().clone()).collect())),
            MeasureHandle::from_mixture(measure),
        )?;
        let j = Joining {
            spec,
            marginals: consecutive(&dims),
            components,
            joint,
            invariance_enforced: false,
        };
        let report = crate::joinings::marginal_check(&j, BUILD_DEGREE, MonteCarlo::default())?;
        if !report.passed {
            return Err(atoms_child.field().error(format!(
                "marginals differ from the component measures: {}",
                report.failures.first().cloned().unwrap_or_default()
            )));
        }
        Ok(j)
    }
}
