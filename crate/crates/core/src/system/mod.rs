//! Measure-preserving systems: a map, its invariant measure, and the exact
//! engine that pushes characters through affine pieces of the map.

pub mod dynamics;
pub mod kinds;

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affine::AffineMap;
use crate::arith::number::{fmt_rat, to_f64};
use crate::arith::{PhaseSum, Rational};
use crate::cocycle::Cocycle;
use crate::doc::Field;
use crate::error::{Error, Result};
use crate::measure::{character_f64, integrate_character, CharacterIntegral, Component, MeasureHandle, MonteCarlo};
use crate::rank1::Rank1Map;
use crate::seed::derive_seed;

pub use kinds::{build_system, registry, SystemKind, SystemRegistry};

/// Integer frequency vector `k` of the character `x ↦ e(⟨k, x⟩)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Freq(pub Vec<i64>);

impl Deref for Freq {
    type Target = Vec<i64>;
    fn deref(&self) -> &Vec<i64> {
        &self.0
    }
}

impl fmt::Display for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(i64::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl fmt::Debug for Freq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Freq {
    pub fn zero(dim: usize) -> Self {
        Freq(vec![0; dim])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    pub fn neg(&self) -> Self {
        Freq(self.0.iter().map(|k| -k).collect())
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|k| k.abs()).max().unwrap_or(0)
    }
}

/// All frequencies on `T^dim` with `|k|∞ <= degree`, in lexicographic order.
pub fn freq_box(dim: usize, degree: i64) -> Vec<Freq> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v: Vec<i64>| {
                (-degree..=degree).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out.into_iter().map(Freq).collect()
}

/// A point of `T^dim` with exact coordinates in `[0, 1)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point(pub Vec<Rational>);

impl Deref for Point {
    type Target = Vec<Rational>;
    fn deref(&self) -> &Vec<Rational> {
        &self.0
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(fmt_rat).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Point {
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(to_f64).collect()
    }
}

/// Observables used by the spectral engine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// `x ↦ e(⟨k, x⟩)`.
    Character(Freq),
    /// Indicator of level `level` of the stage-`stage` tower of a rank-one map.
    Level { stage: usize, level: u64 },
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Character(k) => write!(f, "e({k}·x)"),
            Observable::Level { stage, level } => write!(f, "1[stage {stage} level {level}]"),
        }
    }
}

/// A transformation of `T^dim`.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Point) -> Result<Point>;
    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// An affine map agreeing with this one on the support of `c`.
    fn affine_on(&self, c: &Component) -> Option<AffineMap>;
    fn rank1(&self) -> Option<&Rank1Map> {
        None
    }
}

/// Declarative system description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
}

impl SystemSpec {
    pub fn new(kind: &str, params: Value) -> Self {
        Self {
            kind: kind.to_string(),
            params,
            precision: None,
        }
    }

    pub fn with_precision(mut self, precision: u32) -> Self {
        self.precision = Some(precision);
        self
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("spec serializes")
    }
}

/// How a fibered system assigns a fiber to each base point.
#[derive(Clone, Debug)]
pub enum FiberMap {
    /// Fiber at `x` is the circle rotation by `β(x)`.
    RotationBy(Cocycle),
    /// The same system over every base point.
    Constant(Box<System>),
    /// Fiber at `a` is the rank-one map `T_a` at the given depth.
    Rank1 { depth: usize },
}

/// A system presented through its decomposition over a base parameter:
/// the total measure is `∫ μ_x̄ dP(x̄)` with fiber dynamics `T_x̄`.
#[derive(Clone, Debug)]
pub struct FiberedSystem {
    pub base: MeasureHandle,
    pub fiber: FiberMap,
    pub description: String,
}

impl FiberedSystem {
    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_at(&self, xbar: &Point) -> Result<System> {
        if xbar.len() != self.base_dim() {
            return Err(Error::Arity {
                expected: self.base_dim(),
                got: xbar.len(),
            });
        }
        match &self.fiber {
            FiberMap::RotationBy(beta) => {
                let alpha = beta.eval(&xbar[0])?;
                build_system(&SystemSpec::new(
                    "rotation",
                    serde_json::json!({"alpha": fmt_rat(&alpha)}),
                ))
            }
            FiberMap::Constant(sys) => Ok((**sys).clone()),
            FiberMap::Rank1 { depth } => build_system(&SystemSpec::new(
                "rank1-family",
                serde_json::json!({"a": fmt_rat(&xbar[0]), "depth": depth}),
            )),
        }
    }
}

#[derive(Clone)]
pub struct System {
    spec: SystemSpec,
    dynamics: Arc<dyn Dynamics>,
    measure: MeasureHandle,
    fibered: Option<Arc<FiberedSystem>>,
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "System({}, {:?}, {})",
            self.spec.kind,
            self.dynamics,
            self.measure.description()
        )
    }
}

impl System {
    pub fn from_parts(spec: SystemSpec, dynamics: Arc<dyn Dynamics>, measure: MeasureHandle) -> Result<Self> {
        if dynamics.dim() != measure.dim() {
            return Err(Error::Arity {
                expected: dynamics.dim(),
                got: measure.dim(),
            });
        }
        Ok(Self {
            spec,
            dynamics,
            measure,
            fibered: None,
        })
    }

    pub fn with_fibers(mut self, fibers: FiberedSystem) -> Self {
        self.fibered = Some(Arc::new(fibers));
        self
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn measure(&self) -> &MeasureHandle {
        &self.measure
    }

    pub fn fibered(&self) -> Option<&FiberedSystem> {
        self.fibered.as_deref()
    }

    pub fn rank1(&self) -> Option<&Rank1Map> {
        self.dynamics.rank1()
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Arity {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (i, c) in x.iter().enumerate() {
            if c.is_negative() || *c >= Rational::from_integer(1.into()) {
                return Err(Error::OutsideSpace(format!(
                    "coordinate {i} of {x} is not in [0, 1)"
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.check_point(x)?;
        self.dynamics.apply(x)
    }

    pub fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.dynamics.apply_f64(x)
    }

    /// `[x, Tx, …, T^{n-1}x]`.
    pub fn orbit(&self, start: &Point, n: usize) -> Result<Vec<Point>> {
        self.check_point(start)?;
        let mut out = Vec::with_capacity(n);
        let mut x = start.clone();
        for i in 0..n {
            if i + 1 < n {
                let next = self.dynamics.apply(&x)?;
                out.push(std::mem::replace(&mut x, next));
            } else {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    pub fn integrate_character(&self, k: &Freq, mc: MonteCarlo) -> Result<CharacterIntegral> {
        integrate_character(&self.measure, k, mc)
    }

    /// Components on which the map is affine; cyclic factors are split into
    /// atoms when that is what it takes. `None` when some part of the
    /// measure has no affine description.
    pub fn affine_components(&self) -> Option<Vec<Component>> {
        let mut out = Vec::new();
        for c in self.measure.mixture().components() {
            if self.dynamics.affine_on(c).is_some() {
                out.push(c.clone());
                continue;
            }
            let pieces = c.atomize()?;
            if pieces.iter().any(|p| self.dynamics.affine_on(p).is_none()) {
                return None;
            }
            out.extend(pieces);
        }
        Some(out)
    }

    /// True when character integrals of the measure and of its images under
    /// the map are computed exactly.
    pub fn exact_integrals_available(&self) -> bool {
        self.measure.exact_integrals_available() && self.affine_components().is_some()
    }

    /// `I(s) = ∫ e(⟨k, T^s x⟩ - ⟨k0, x⟩) dμ` for `s = 0..=steps`, exactly.
    /// `Ok(None)` when the system has no exact path.
    pub fn transfer_integrals(&self, k: &Freq, k0: &Freq, steps: usize) -> Result<Option<Vec<PhaseSum>>> {
        for f in [k, k0] {
            if f.len() != self.dim() {
                return Err(Error::Arity {
                    expected: self.dim(),
                    got: f.len(),
                });
            }
        }
        let Some(comps) = self.affine_components() else {
            return Ok(None);
        };
        let mut totals = vec![PhaseSum::zero(); steps + 1];
        for c in &comps {
            let Some(values) = transfer_on_component(self.dynamics.as_ref(), c, k, k0, steps)? else {
                return Ok(None);
            };
            for (t, v) in totals.iter_mut().zip(values) {
                t.add_assign(&v.scale(&c.weight));
            }
        }
        Ok(Some(totals))
    }

    /// Monte Carlo estimate of `∫ e(⟨k, T^s x⟩ - ⟨k0, x⟩) dμ` for
    /// `s = 0..=steps`, with standard errors. Orbits that leave the domain
    /// of a partially defined map are dropped and counted.
    pub fn transfer_sampled(&self, k: &Freq, k0: &Freq, steps: usize, mc: MonteCarlo) -> Result<SampledTransfer> {
        const CHUNK: usize = 256;
        let chunks = mc.samples.div_ceil(CHUNK);
        // (sums, squared moduli, used, dropped) per chunk
        type Chunk = (Vec<Complex64>, Vec<f64>, usize, usize);
        let parts: Vec<Result<Chunk>> = (0..chunks)
            .into_par_iter()
            .map(|ci| {
                let mut sampler = self.measure.sampler(derive_seed(mc.seed, &format!("chunk:{ci}")));
                let take = CHUNK.min(mc.samples - ci * CHUNK);
                let mut sum = vec![Complex64::zero(); steps + 1];
                let mut sum_sq = vec![0.0; steps + 1];
                let mut used = 0usize;
                let mut dropped = 0usize;
                'orbit: for _ in 0..take {
                    let x0 = sampler.next_f64();
                    let base = character_f64(k0, &x0).conj();
                    let mut x = x0;
                    let mut row = Vec::with_capacity(steps + 1);
                    for s in 0..=steps {
                        row.push(character_f64(k, &x) * base);
                        if s < steps {
                            match self.dynamics.apply_f64(&x) {
                                Ok(y) => x = y,
                                Err(Error::DepthExceeded { .. }) => {
                                    dropped += 1;
                                    continue 'orbit;
                                }
                                Err(e) => return Err(e),
                            }
                        }
                    }
                    used += 1;
                    for (s, v) in row.into_iter().enumerate() {
                        sum[s] += v;
                        sum_sq[s] += v.norm_sqr();
                    }
                }
                Ok((sum, sum_sq, used, dropped))
            })
            .collect();
        let mut sum = vec![Complex64::zero(); steps + 1];
        let mut sum_sq = vec![0.0; steps + 1];
        let (mut used, mut dropped) = (0usize, 0usize);
        for p in parts {
            let (s, q, u, d) = p?;
            for i in 0..=steps {
                sum[i] += s[i];
                sum_sq[i] += q[i];
            }
            used += u;
            dropped += d;
        }
        if used < 2 {
            return Err(Error::Unsupported(format!(
                "only {used} of {} sampled orbits stayed inside the domain",
                mc.samples
            )));
        }
        let n = used as f64;
        let mean: Vec<Complex64> = sum.iter().map(|s| s / n).collect();
        let std_err = mean
            .iter()
            .zip(&sum_sq)
            .map(|(m, q)| (((q / n) - m.norm_sqr()).max(0.0) * n / (n - 1.0) / n).sqrt())
            .collect();
        Ok(SampledTransfer {
            mean,
            std_err,
            used,
            dropped,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SampledTransfer {
    pub mean: Vec<Complex64>,
    pub std_err: Vec<f64>,
    pub used: usize,
    pub dropped: usize,
}

/// Iterates the affine pieces of `dynamics` starting from component `c`:
/// after `s` steps the image measure is `(M_s ∘ … ∘ M_1 ∘ push)_*(factors)`,
/// so the integrand stays a character of the factor coordinates.
fn transfer_on_component(
    dynamics: &dyn Dynamics,
    c: &Component,
    k: &Freq,
    k0: &Freq,
    steps: usize,
) -> Result<Option<Vec<PhaseSum>>> {
    let (k0_pulled, phase0) = c.push.pullback(k0)?;
    let mut cur = c.clone();
    let mut out = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let (kp, phase) = cur.push.pullback(k)?;
        let diff: Vec<i64> = kp.iter().zip(k0_pulled.iter()).map(|(a, b)| a - b).collect();
        let Some(v) = cur.integrate_factors(&diff, phase - &phase0) else {
            return Ok(None);
        };
        out.push(v);
        if s < steps {
            let Some(m) = dynamics.affine_on(&cur) else {
                return Ok(None);
            };
            cur = cur.pushed(&m)?;
        }
    }
    Ok(Some(out))
}

/// Parses a nested system document at `f`, inheriting `precision`.
pub fn parse_system(f: Field<'_>, precision: Option<u32>) -> Result<System> {
    kinds::build_from_field(f, precision)
}

/// Translation `x ↦ x + shift`, exact.
pub fn translate(x: &Point, shift: &[Rational]) -> Point {
    Point(
        x.iter()
            .zip(shift)
            .map(|(a, b)| crate::arith::frac(&(a + b)))
            .collect(),
    )
}

/// `⟨k, x⟩` as an exact phase.
pub fn phase_of(k: &[i64], x: &[Rational]) -> Rational {
    k.iter()
        .zip(x)
        .map(|(&a, b)| b * BigInt::from(a))
        .sum()
}
