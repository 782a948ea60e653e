//! Invariant measures: finite mixtures of affine images of product measures.
//!
//! A component is `weight · (A, b)_*(ν_1 ⊗ … ⊗ ν_m)` where each `ν_j` is one
//! of Haar on the circle, a Dirac atom, Haar on a finite cyclic subgroup, or
//! a sampled-only continuous law. Products, affine pushforwards and
//! marginals stay inside this family, which covers product measures, graph
//! and diagonal self-joinings and relatively independent extensions alike.
//! Character integrals are exact whenever no sampled-only factor is hit.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::affine::{AffineMap, IntMatrix};
use crate::arith::number::{dyadic, fmt_rat, to_f64};
use crate::arith::{frac, PhaseSum, Rational};
use crate::doc::Field;
use crate::error::{Error, Result};
use crate::system::{Freq, Point};

/// Largest number of atoms enumerated for exact integration of atomic parts.
pub const MAX_ATOMS: usize = 1 << 17;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    Haar,
    Dirac(Rational),
    /// Haar measure on `{0, 1/m, …, (m-1)/m}`.
    Cyclic(u64),
    /// Law of `u²` for `u` uniform on `[0, 1)`: continuous, not Haar, and
    /// integrated by sampling only.
    Quadratic,
}

impl Factor {
    /// `∫ e(k x) dν`, `None` when only a sampled estimate exists.
    pub fn integral(&self, k: i64) -> Option<PhaseSum> {
        match self {
            Factor::Haar => Some(if k == 0 { PhaseSum::one() } else { PhaseSum::zero() }),
            Factor::Dirac(p) => Some(PhaseSum::root(p * BigInt::from(k))),
            Factor::Cyclic(m) => Some(if k.rem_euclid(*m as i64) == 0 {
                PhaseSum::one()
            } else {
                PhaseSum::zero()
            }),
            Factor::Quadratic => (k == 0).then(PhaseSum::one),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Factor::Dirac(_) | Factor::Cyclic(_))
    }

    fn atoms(&self) -> Vec<(Rational, Rational)> {
        match self {
            Factor::Dirac(p) => vec![(p.clone(), Rational::one())],
            Factor::Cyclic(m) => (0..*m)
                .map(|j| {
                    (
                        Rational::new(BigInt::from(j), BigInt::from(*m)),
                        Rational::new(BigInt::one(), BigInt::from(*m)),
                    )
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    fn atom_count(&self) -> Option<u64> {
        match self {
            Factor::Dirac(_) => Some(1),
            Factor::Cyclic(m) => Some(*m),
            _ => None,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Rational {
        match self {
            Factor::Haar => dyadic(rng.random::<u64>(), 64),
            Factor::Dirac(p) => p.clone(),
            Factor::Cyclic(m) => {
                Rational::new(BigInt::from(rng.random_range(0..*m)), BigInt::from(*m))
            }
            Factor::Quadratic => {
                let u = rng.random::<u32>() as u64;
                dyadic(u * u, 64)
            }
        }
    }

    fn sample_f64<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Factor::Haar => rng.random::<f64>(),
            Factor::Dirac(p) => to_f64(p),
            Factor::Cyclic(m) => rng.random_range(0..*m) as f64 / *m as f64,
            Factor::Quadratic => {
                let u: f64 = rng.random();
                u * u
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            Factor::Haar => "Haar".into(),
            Factor::Dirac(p) => format!("δ({})", fmt_rat(p)),
            Factor::Cyclic(m) => format!("Haar(Z/{m})"),
            Factor::Quadratic => "law(u²)".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub weight: Rational,
    pub factors: Vec<Factor>,
    /// From the factor coordinates to the space; rows = dimension of space.
    pub push: AffineMap,
}

impl Component {
    pub fn product(weight: Rational, factors: Vec<Factor>) -> Self {
        let n = factors.len();
        Self {
            weight,
            factors,
            push: AffineMap::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.push.dim_out()
    }

    /// `∫ e(⟨k, x⟩) d(component)` without the weight.
    pub fn integral(&self, k: &Freq) -> Result<Option<PhaseSum>> {
        let (pulled, phase) = self.push.pullback(k)?;
        Ok(self.integrate_factors(&pulled, phase))
    }

    /// `∫ e(⟨k, u⟩ + phase)` over the factor coordinates `u`.
    pub fn integrate_factors(&self, k: &[i64], phase: Rational) -> Option<PhaseSum> {
        let mut acc = Some(PhaseSum::root(phase));
        for (f, &kj) in self.factors.iter().zip(k) {
            match f.integral(kj) {
                Some(v) if v.is_empty() => return Some(PhaseSum::zero()),
                Some(v) => acc = acc.map(|a| a.mul(&v)),
                None => acc = None,
            }
        }
        acc
    }

    /// Splits finite cyclic factors into their atoms, so that every
    /// coordinate reading only atomic factors becomes constant on each
    /// piece. `None` when there is nothing to split or too many pieces.
    pub fn atomize(&self) -> Option<Vec<Component>> {
        if !self.factors.iter().any(|f| matches!(f, Factor::Cyclic(_))) {
            return None;
        }
        let count = self
            .factors
            .iter()
            .map(|f| match f {
                Factor::Cyclic(m) => *m,
                _ => 1,
            })
            .try_fold(1u64, |a, m| a.checked_mul(m))?;
        if count as usize > MAX_ATOMS {
            return None;
        }
        let mut out = vec![self.clone()];
        for (j, f) in self.factors.iter().enumerate() {
            if let Factor::Cyclic(_) = f {
                out = out
                    .into_iter()
                    .flat_map(|c| {
                        f.atoms().into_iter().map(move |(x, w)| {
                            let mut piece = c.clone();
                            piece.weight = &c.weight * w;
                            piece.factors[j] = Factor::Dirac(x);
                            piece
                        })
                    })
                    .collect();
            }
        }
        Some(out)
    }

    /// The component with rows `coords` of the pushforward kept.
    pub fn marginal(&self, coords: &[usize]) -> Component {
        Component {
            weight: self.weight.clone(),
            factors: self.factors.clone(),
            push: self.push.select_rows(coords),
        }
    }

    pub fn pushed(&self, map: &AffineMap) -> Result<Component> {
        Ok(Component {
            weight: self.weight.clone(),
            factors: self.factors.clone(),
            push: map.compose(&self.push)?,
        })
    }

    /// Value of coordinate `i` when it is almost surely constant on this
    /// component (its row only reads Dirac factors).
    pub fn constant_coordinate(&self, i: usize) -> Option<Rational> {
        let row = self.push.matrix.row(i);
        let mut acc = self.push.shift[i].clone();
        for (a, f) in row.iter().zip(&self.factors) {
            if *a == 0 {
                continue;
            }
            match f {
                Factor::Dirac(p) => acc += p * BigInt::from(*a),
                _ => return None,
            }
        }
        Some(frac(&acc))
    }

    pub fn is_atomic(&self) -> bool {
        self.factors.iter().all(Factor::is_atomic)
    }

    pub fn atom_count(&self) -> Option<u64> {
        self.factors
            .iter()
            .try_fold(1u64, |acc, f| f.atom_count().and_then(|c| acc.checked_mul(c)))
    }

    /// `(point, conditional weight)` pairs; weights sum to one.
    pub fn atoms(&self) -> Option<Vec<(Point, Rational)>> {
        if !self.is_atomic() || self.atom_count()? as usize > MAX_ATOMS {
            return None;
        }
        let mut partial: Vec<(Vec<Rational>, Rational)> = vec![(Vec::new(), Rational::one())];
        for f in &self.factors {
            let atoms = f.atoms();
            partial = partial
                .into_iter()
                .flat_map(|(p, w)| {
                    atoms.iter().map(move |(x, v)| {
                        let mut q = p.clone();
                        q.push(x.clone());
                        (q, &w * v)
                    })
                })
                .collect();
        }
        Some(
            partial
                .into_iter()
                .map(|(p, w)| (self.push.apply(&p), w))
                .collect(),
        )
    }

    pub fn has_sampled_only(&self) -> bool {
        self.factors.contains(&Factor::Quadratic)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        let raw: Vec<Rational> = self.factors.iter().map(|f| f.sample(rng)).collect();
        self.push.apply(&raw)
    }

    fn sample_f64<R: Rng>(&self, rng: &mut R, shift: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = self.factors.iter().map(|f| f.sample_f64(rng)).collect();
        self.push.apply_f64(&raw, shift)
    }

    /// Factor indices each output coordinate depends on.
    fn support_of_rows(&self, rows: &[usize]) -> Vec<usize> {
        let mut used: Vec<usize> = rows
            .iter()
            .flat_map(|&i| {
                self.push
                    .matrix
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| **a != 0)
                    .map(|(j, _)| j)
                    .collect::<Vec<_>>()
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// Finite mixture of components on `T^dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mixture {
    dim: usize,
    components: Vec<Component>,
}

impl Mixture {
    pub fn new(dim: usize, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::spec("", "a measure needs at least one component"));
        }
        let total: Rational = components.iter().map(|c| c.weight.clone()).sum();
        if total != Rational::one() {
            return Err(Error::spec(
                "",
                format!("mixture weights sum to {}, not 1", fmt_rat(&total)),
            ));
        }
        if components.iter().any(|c| c.weight <= Rational::zero()) {
            return Err(Error::spec("", "mixture weights must be positive"));
        }
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::spec("", "components live on different spaces"));
        }
        Ok(Self { dim, components })
    }

    pub fn haar(dim: usize) -> Self {
        Self::single(vec![Factor::Haar; dim])
    }

    pub fn single(factors: Vec<Factor>) -> Self {
        let dim = factors.len();
        Self {
            dim,
            components: vec![Component::product(Rational::one(), factors)],
        }
    }

    /// The one-point probability space.
    pub fn point() -> Self {
        Self::single(Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn integral(&self, k: &Freq) -> Result<Option<PhaseSum>> {
        if k.len() != self.dim {
            return Err(Error::Arity {
                expected: self.dim,
                got: k.len(),
            });
        }
        let mut acc = PhaseSum::zero();
        for c in &self.components {
            match c.integral(k)? {
                Some(v) => acc.add_assign(&v.scale(&c.weight)),
                None => return Ok(None),
            }
        }
        Ok(Some(acc))
    }

    pub fn exact_integrals_available(&self) -> bool {
        !self.components.iter().any(Component::has_sampled_only)
    }

    pub fn product(parts: &[&Mixture]) -> Mixture {
        let mut comps: Vec<Component> = vec![Component::product(Rational::one(), Vec::new())];
        for m in parts {
            comps = comps
                .iter()
                .flat_map(|a| {
                    m.components.iter().map(move |b| {
                        let mut factors = a.factors.clone();
                        factors.extend(b.factors.iter().cloned());
                        Component {
                            weight: &a.weight * &b.weight,
                            factors,
                            push: AffineMap::block_diag(&[&a.push, &b.push]),
                        }
                    })
                })
                .collect();
        }
        Mixture {
            dim: parts.iter().map(|m| m.dim).sum(),
            components: comps,
        }
    }

    pub fn pushforward(&self, map: &AffineMap) -> Result<Mixture> {
        assert_eq!(map.dim_in(), self.dim, "pushforward arity");
        Ok(Mixture {
            dim: map.dim_out(),
            components: self
                .components
                .iter()
                .map(|c| c.pushed(map))
                .collect::<Result<_>>()?,
        })
    }

    pub fn marginal(&self, coords: &[usize]) -> Mixture {
        Mixture {
            dim: coords.len(),
            components: self.components.iter().map(|c| c.marginal(coords)).collect(),
        }
    }

    /// Convex combination `Σ w_i m_i`; weights must sum to one.
    pub fn mix(parts: &[(Rational, &Mixture)]) -> Result<Mixture> {
        let dim = parts.first().map_or(0, |(_, m)| m.dim);
        let components = parts
            .iter()
            .filter(|(w, _)| !w.is_zero())
            .flat_map(|(w, m)| {
                m.components.iter().map(move |c| Component {
                    weight: w * &c.weight,
                    ..c.clone()
                })
            })
            .collect();
        Mixture::new(dim, components)
    }

    /// Splits `self` as `base(coords) ⊗ fiber(rest)` when every component is a
    /// product across that split and all components share one fiber law.
    /// Returns `(base measure on coords, fiber measure on the rest)`.
    pub fn split_over(&self, coords: &[usize]) -> Option<(Mixture, Mixture)> {
        let rest: Vec<usize> = (0..self.dim).filter(|i| !coords.contains(i)).collect();
        if coords.is_empty() {
            return Some((Mixture::point(), self.clone()));
        }
        if rest.is_empty() {
            return Some((self.marginal(coords), Mixture::point()));
        }
        let mut fiber: Option<Component> = None;
        let mut base = Vec::new();
        for c in &self.components {
            let a = c.support_of_rows(coords);
            let b = c.support_of_rows(&rest);
            if a.iter().any(|j| b.contains(j)) {
                return None;
            }
            let f = normalize_factors(&c.marginal(&rest));
            match &fiber {
                None => fiber = Some(f),
                Some(prev) if *prev == f => {}
                Some(_) => return None,
            }
            base.push(c.marginal(coords));
        }
        let mut fiber = fiber?;
        fiber.weight = Rational::one();
        Some((
            Mixture {
                dim: coords.len(),
                components: base,
            },
            Mixture {
                dim: rest.len(),
                components: vec![fiber],
            },
        ))
    }

    pub fn atoms(&self) -> Option<Vec<(Point, Rational)>> {
        let mut out = Vec::new();
        for c in &self.components {
            for (p, w) in c.atoms()? {
                out.push((p, w * &c.weight));
            }
        }
        Some(out)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| {
                let base = if c.factors.is_empty() {
                    "pt".to_string()
                } else {
                    c.factors.iter().map(Factor::describe).collect::<Vec<_>>().join("⊗")
                };
                let pushed = if c.push == AffineMap::identity(c.factors.len()) {
                    base
                } else {
                    format!("push({base})")
                };
                if c.weight == Rational::one() {
                    pushed
                } else {
                    format!("{}·{}", fmt_rat(&c.weight), pushed)
                }
            })
            .collect();
        parts.join(" + ")
    }

    fn cumulative_weights(&self) -> Option<(Vec<u64>, u64)> {
        let denom = self
            .components
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.weight.denom()));
        let d = denom.to_u64()?;
        let mut acc = 0u64;
        let mut cum = Vec::with_capacity(self.components.len());
        for c in &self.components {
            acc += (c.weight.numer() * (&denom / c.weight.denom())).to_u64()?;
            cum.push(acc);
        }
        Some((cum, d))
    }

    fn pick<R: Rng>(&self, rng: &mut R, cum: &Option<(Vec<u64>, u64)>) -> usize {
        if self.components.len() == 1 {
            return 0;
        }
        match cum {
            Some((cum, d)) => {
                let u = rng.random_range(0..*d);
                cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
            }
            None => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, c) in self.components.iter().enumerate() {
                    acc += to_f64(&c.weight);
                    if u < acc {
                        return i;
                    }
                }
                self.components.len() - 1
            }
        }
    }
}

/// Reindexes a marginal component so it only mentions the factors it reads;
/// two fibers built from differently numbered factors then compare equal.
fn normalize_factors(c: &Component) -> Component {
    let rows: Vec<usize> = (0..c.dim()).collect();
    let used = c.support_of_rows(&rows);
    let factors = used.iter().map(|&j| c.factors[j].clone()).collect();
    let mut m = IntMatrix::zeros(c.dim(), used.len());
    for i in 0..c.dim() {
        for (jj, &j) in used.iter().enumerate() {
            m.set(i, jj, c.push.matrix.get(i, j));
        }
    }
    Component {
        weight: c.weight.clone(),
        factors,
        push: AffineMap::new(m, c.push.shift.clone()),
    }
}

/// Seeded point stream. Equal seeds give identical streams.
pub struct MeasureSampler {
    mixture: Arc<Mixture>,
    rng: ChaCha8Rng,
    cum: Option<(Vec<u64>, u64)>,
    shifts: Vec<Vec<f64>>,
}

impl MeasureSampler {
    pub fn next_point(&mut self) -> Point {
        let i = self.mixture.pick(&mut self.rng, &self.cum);
        self.mixture.components[i].sample(&mut self.rng)
    }

    pub fn next_f64(&mut self) -> Vec<f64> {
        let i = self.mixture.pick(&mut self.rng, &self.cum);
        self.mixture.components[i].sample_f64(&mut self.rng, &self.shifts[i])
    }
}

impl Iterator for MeasureSampler {
    type Item = Point;
    fn next(&mut self) -> Option<Point> {
        Some(self.next_point())
    }
}

/// Shared handle to an invariant measure: exact integrator where available,
/// seeded sampler always.
#[derive(Clone)]
pub struct MeasureHandle {
    mixture: Arc<Mixture>,
    description: String,
}

impl fmt::Debug for MeasureHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeasureHandle({})", self.description)
    }
}

impl MeasureHandle {
    pub fn new(mixture: Mixture, description: impl Into<String>) -> Self {
        Self {
            mixture: Arc::new(mixture),
            description: description.into(),
        }
    }

    pub fn from_mixture(mixture: Mixture) -> Self {
        let d = mixture.describe();
        Self::new(mixture, d)
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn dim(&self) -> usize {
        self.mixture.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn exact_integrals_available(&self) -> bool {
        self.mixture.exact_integrals_available()
    }

    /// Exact `∫ e(⟨k,x⟩) dμ`, `None` if a sampled-only factor is involved.
    pub fn integrator(&self, k: &Freq) -> Result<Option<PhaseSum>> {
        self.mixture.integral(k)
    }

    pub fn sampler(&self, seed: u64) -> MeasureSampler {
        MeasureSampler {
            mixture: self.mixture.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cum: self.mixture.cumulative_weights(),
            shifts: self
                .mixture
                .components
                .iter()
                .map(|c| c.push.shift_f64())
                .collect(),
        }
    }

    pub fn sample(&self, seed: u64, count: usize) -> Vec<Point> {
        self.sampler(seed).take(count).collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            samples: 20_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CharacterIntegral {
    pub value: Complex64,
    pub exact: Option<PhaseSum>,
    /// Monte Carlo sample count; zero on the exact path.
    pub samples: usize,
    pub std_err: f64,
}

/// `∫ e(⟨k, x⟩) dμ`: exact when possible, otherwise a Monte Carlo estimate
/// with its standard error.
pub fn integrate_character(m: &MeasureHandle, k: &Freq, mc: MonteCarlo) -> Result<CharacterIntegral> {
    if let Some(v) = m.integrator(k)? {
        return Ok(CharacterIntegral {
            value: v.to_complex(),
            exact: Some(v),
            samples: 0,
            std_err: 0.0,
        });
    }
    let mut sampler = m.sampler(mc.seed);
    let values: Vec<Complex64> = (0..mc.samples)
        .map(|_| character_f64(k, &sampler.next_f64()))
        .collect();
    let (mean, se) = mean_and_stderr(&values);
    Ok(CharacterIntegral {
        value: mean,
        exact: None,
        samples: mc.samples,
        std_err: se,
    })
}

pub fn character_f64(k: &[i64], x: &[f64]) -> Complex64 {
    let t: f64 = k.iter().zip(x).map(|(&a, b)| a as f64 * b).sum();
    Complex64::from_polar(1.0, std::f64::consts::TAU * t.rem_euclid(1.0))
}

pub fn character_exact(k: &[i64], x: &[Rational]) -> PhaseSum {
    let t: Rational = k.iter().zip(x).map(|(&a, b)| b * BigInt::from(a)).sum();
    PhaseSum::root(t)
}

/// Sample mean and its standard error, `sqrt(E|z - mean|² / n)`.
pub fn mean_and_stderr(values: &[Complex64]) -> (Complex64, f64) {
    let n = values.len().max(1) as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let var: f64 = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------
// Document form

/// Parses a measure document:
///
/// ```json
/// {"type": "haar", "dim": 1}
/// {"type": "dirac", "at": "1/3"}
/// {"type": "cyclic", "order": 5}
/// {"type": "quadratic"}
/// {"type": "point"}
/// {"type": "product", "factors": [ ... ]}
/// {"type": "mixture", "components": [{"weight": "1/2", "measure": { ... }}, ...]}
/// ```
pub fn parse_measure(f: Field<'_>, precision: Option<u32>) -> Result<Mixture> {
    let kind = f.get("type")?;
    let kind_name = kind.field().as_str()?;
    let single = |fac: Factor| Mixture::single(vec![fac]);
    match kind_name {
        "haar" => {
            f.only_keys(&["type", "dim"])?;
            let dim = match f.opt("dim") {
                Some(d) => d.field().as_u64()? as usize,
                None => 1,
            };
            Ok(Mixture::haar(dim))
        }
        "dirac" => {
            f.only_keys(&["type", "at"])?;
            let at = f.get("at")?;
            let v = at.field().as_number(precision)?;
            Ok(single(Factor::Dirac(frac(&v))))
        }
        "cyclic" => {
            f.only_keys(&["type", "order"])?;
            let order = f.get("order")?;
            let m = order.field().as_u64()?;
            if m == 0 {
                return Err(order.field().error("order must be at least 1"));
            }
            Ok(single(Factor::Cyclic(m)))
        }
        "quadratic" => {
            f.only_keys(&["type"])?;
            Ok(single(Factor::Quadratic))
        }
        "point" => {
            f.only_keys(&["type"])?;
            Ok(Mixture::point())
        }
        "product" => {
            f.only_keys(&["type", "factors"])?;
            let list = f.get("factors")?;
            let items = list.field().items()?;
            if items.is_empty() {
                return Err(list.field().error("product needs at least one factor"));
            }
            let parts = items
                .iter()
                .map(|c| parse_measure(c.field(), precision))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Mixture> = parts.iter().collect();
            Ok(Mixture::product(&refs))
        }
        "mixture" => {
            f.only_keys(&["type", "components"])?;
            let list = f.get("components")?;
            let items = list.field().items()?;
            if items.is_empty() {
                return Err(list.field().error("mixture needs at least one component"));
            }
            let mut parts = Vec::new();
            let mut dim = None;
            for item in &items {
                let w = item.field().get("weight")?;
                let weight = w.field().as_number(precision)?;
                if weight <= Rational::zero() {
                    return Err(w.field().error("weights must be positive"));
                }
                let m = item.field().get("measure")?;
                let measure = parse_measure(m.field(), precision)?;
                match dim {
                    None => dim = Some(measure.dim()),
                    Some(d) if d != measure.dim() => {
                        return Err(m.field().error("components have different dimensions"))
                    }
                    _ => {}
                }
                parts.push((weight, measure));
            }
            let total: Rational = parts.iter().map(|(w, _)| w.clone()).sum();
            if total != Rational::one() {
                return Err(list.field().error(format!(
                    "weights sum to {}, expected exactly 1",
                    fmt_rat(&total)
                )));
            }
            let refs: Vec<(Rational, &Mixture)> = parts.iter().map(|(w, m)| (w.clone(), m)).collect();
            Mixture::mix(&refs).map_err(|e| e.within(list.field().path()))
        }
        other => Err(kind.field().error(format!(
            "unknown measure type `{other}` (expected haar, dirac, cyclic, quadratic, point, product, mixture)"
        ))),
    }
}

/// Document form of product-structured mixtures (no pushforward).
pub fn measure_to_json(m: &Mixture) -> Option<Value> {
    let comp_json = |c: &Component| -> Option<Value> {
        if c.push != AffineMap::identity(c.factors.len()) {
            return None;
        }
        let factors: Vec<Value> = c
            .factors
            .iter()
            .map(|f| match f {
                Factor::Haar => json!({"type": "haar"}),
                Factor::Dirac(p) => json!({"type": "dirac", "at": fmt_rat(p)}),
                Factor::Cyclic(m) => json!({"type": "cyclic", "order": m}),
                Factor::Quadratic => json!({"type": "quadratic"}),
            })
            .collect();
        Some(match factors.len() {
            0 => json!({"type": "point"}),
            1 => factors.into_iter().next().expect("one"),
            _ => json!({"type": "product", "factors": factors}),
        })
    };
    if m.components.len() == 1 {
        return comp_json(&m.components[0]);
    }
    let comps = m
        .components
        .iter()
        .map(|c| Some(json!({"weight": fmt_rat(&c.weight), "measure": comp_json(c)?})))
        .collect::<Option<Vec<_>>>()?;
    Some(json!({"type": "mixture", "components": comps}))
}

/// Is every character `|k|∞ <= degree` integral invariant under translation
/// by `shift`? Used to validate rotation measures.
pub fn translation_invariant(m: &Mixture, shift: &[Rational], degree: i64) -> Result<bool> {
    for k in crate::system::freq_box(m.dim(), degree) {
        if let Some(v) = m.integral(&k)? {
            let moved = v.rotate(&shift.iter().zip(k.iter()).map(|(s, &a)| s * BigInt::from(a)).sum());
            if !moved.exact_eq(&v) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn half_half() -> Mixture {
        let v = json!({"type": "mixture", "components": [
            {"weight": "1/2", "measure": {"type": "dirac", "at": "0"}},
            {"weight": "1/2", "measure": {"type": "dirac", "at": "1/2"}}
        ]});
        parse_measure(Field::root(&v, "m"), None).unwrap()
    }

    #[test]
    fn lebesgue_character_vanishes() {
        let m = Mixture::haar(1);
        assert!(m.integral(&Freq(vec![1])).unwrap().unwrap().is_zero());
        assert!(m.integral(&Freq(vec![0])).unwrap().unwrap().exact_eq(&PhaseSum::one()));
    }

    #[test]
    fn two_point_mixture_first_character_is_zero() {
        let m = half_half();
        let v = m.integral(&Freq(vec![1])).unwrap().unwrap();
        assert!(v.is_zero());
        let v2 = m.integral(&Freq(vec![2])).unwrap().unwrap();
        assert!(v2.exact_eq(&PhaseSum::one()));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let v = json!({"type": "mixture", "components": [
            {"weight": "1/2", "measure": {"type": "haar"}},
            {"weight": "1/3", "measure": {"type": "haar"}}
        ]});
        match parse_measure(Field::root(&v, "params.rho"), None).unwrap_err() {
            Error::Spec { field, reason } => {
                assert_eq!(field, "params.rho.components");
                assert!(reason.contains("5/6"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let m = Mixture::haar(2);
        assert!(matches!(
            m.integral(&Freq(vec![1])),
            Err(Error::Arity { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn diagonal_pushforward_integrates_differences_to_one() {
        let m = Mixture::haar(1);
        let diag = AffineMap::new(IntMatrix::from_rows(vec![vec![1], vec![1]]), vec![rat(0, 1); 2]);
        let d = m.pushforward(&diag).unwrap();
        assert!(d.integral(&Freq(vec![1, -1])).unwrap().unwrap().exact_eq(&PhaseSum::one()));
        assert!(d.integral(&Freq(vec![1, 1])).unwrap().unwrap().is_zero());
    }

    #[test]
    fn sampler_is_deterministic() {
        let h = MeasureHandle::from_mixture(Mixture::product(&[&half_half(), &Mixture::haar(1)]));
        assert_eq!(h.sample(7, 50), h.sample(7, 50));
        assert_ne!(h.sample(7, 50), h.sample(8, 50));
    }

    #[test]
    fn quadratic_falls_back_to_monte_carlo() {
        let h = MeasureHandle::from_mixture(Mixture::single(vec![Factor::Quadratic]));
        assert!(!h.exact_integrals_available());
        let r = integrate_character(&h, &Freq(vec![1]), MonteCarlo { samples: 4000, seed: 3 }).unwrap();
        assert!(r.exact.is_none());
        assert_eq!(r.samples, 4000);
        assert!(r.std_err > 0.0);
        // ∫ e(u²) du over [0,1): Fresnel integrals C(2)/2 + i S(2)/2 evaluated numerically
        let mut acc = Complex64::new(0.0, 0.0);
        let n = 200_000;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            acc += Complex64::from_polar(1.0, std::f64::consts::TAU * u * u);
        }
        acc /= n as f64;
        assert!((r.value - acc).norm() < 5.0 * r.std_err);
    }

    #[test]
    fn split_over_base_coordinate() {
        let rho = half_half();
        let m = Mixture::product(&[&rho, &Mixture::haar(1)]);
        let (base, fiber) = m.split_over(&[0]).unwrap();
        assert_eq!(base.dim(), 1);
        assert_eq!(fiber, Mixture::haar(1));
        let diag = AffineMap::new(IntMatrix::from_rows(vec![vec![1], vec![1]]), vec![rat(0, 1); 2]);
        let coupled = Mixture::haar(1).pushforward(&diag).unwrap();
        assert!(coupled.split_over(&[0]).is_none());
    }
}
