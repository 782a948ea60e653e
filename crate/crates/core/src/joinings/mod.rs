//! Joinings: invariant measures on product spaces with prescribed marginals,
//! and one-sided tests of whether a given joining is the product measure.

pub mod kinds;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arith::PhaseSum;
use crate::doc::Field;
use crate::error::{Error, Result};
use crate::measure::{character_f64, mean_and_stderr, MonteCarlo};
use crate::seed::derive_seed;
use crate::system::{freq_box, Freq, Point, System, SystemSpec};

pub use kinds::{build_joining, build_joining_value, joining_registry, JoiningKind, JoiningRegistry};

/// Standardized difference beyond which a sampled comparison is flagged.
pub const SIGMA_BOUND: f64 = 4.0;

/// Note attached to every product-consistency verdict.
pub const ONE_SIDED_NOTE: &str = "one-sided: a consistent verdict only means no tested character \
refutes the product structure of this one joining; it never certifies disjointness";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoiningSpec {
    pub kind: String,
    #[serde(default)]
    pub components: Vec<SystemSpec>,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct Joining {
    pub spec: JoiningSpec,
    pub components: Vec<System>,
    /// Joint coordinates read by each component; shared coordinates allowed.
    pub marginals: Vec<Vec<usize>>,
    pub joint: System,
    /// False for hand-supplied samplers whose invariance is not enforced.
    pub invariance_enforced: bool,
}

impl Joining {
    pub fn dim(&self) -> usize {
        self.joint.dim()
    }

    /// Joint frequency of the product character `f_1 ⊗ … ⊗ f_r`.
    pub fn lift(&self, parts: &[Freq]) -> Freq {
        let mut k = vec![0i64; self.dim()];
        for (p, coords) in parts.iter().zip(&self.marginals) {
            for (&ki, &c) in p.iter().zip(coords) {
                k[c] += ki;
            }
        }
        Freq(k)
    }

    pub fn integrate(&self, k: &Freq) -> Result<Option<PhaseSum>> {
        self.joint.measure().integrator(k)
    }

    pub fn exact(&self) -> bool {
        self.joint.exact_integrals_available()
            && self.components.iter().all(System::exact_integrals_available)
    }

    pub fn component_point(&self, i: usize, x: &Point) -> Point {
        Point(self.marginals[i].iter().map(|&c| x[c].clone()).collect())
    }
}

/// Deterministic point stream of the joint measure.
pub fn sample_joining(j: &Joining, seed: u64, count: usize) -> Vec<Point> {
    j.joint.measure().sample(seed, count)
}

/// Frequencies with `|k|∞ <= degree`, lowering the degree until at most
/// `cap` vectors remain.
pub fn capped_family(dim: usize, degree: i64, cap: usize) -> Vec<Freq> {
    let mut d = degree.max(0);
    while d > 0 && (2 * d as usize + 1).checked_pow(dim as u32).is_none_or(|n| n > cap) {
        d -= 1;
    }
    freq_box(dim, d)
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalReport {
    pub exact: bool,
    pub checked: usize,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Integrates every character supported on one component against the joint
/// measure and against that component's own measure.
pub fn marginal_check(j: &Joining, degree: i64, mc: MonteCarlo) -> Result<MarginalReport> {
    let exact = j.exact();
    let mut failures = Vec::new();
    let mut checked = 0;
    let sampled = if exact {
        Vec::new()
    } else {
        sample_joining(j, mc.seed, mc.samples)
            .iter()
            .map(Point::to_f64)
            .collect()
    };
    for (i, comp) in j.components.iter().enumerate() {
        for k in capped_family(comp.dim(), degree, 20_000) {
            let mut parts: Vec<Freq> = j.components.iter().map(|c| Freq::zero(c.dim())).collect();
            parts[i] = k.clone();
            let lifted = j.lift(&parts);
            checked += 1;
            if exact {
                let joint = j.integrate(&lifted)?.expect("exact joining");
                let own = comp.measure().integrator(&k)?.expect("exact component");
                if !joint.exact_eq(&own) {
                    failures.push(format!("component {i} character {k}: joint {joint} vs {own}"));
                }
            } else {
                let values: Vec<Complex64> = sampled.iter().map(|x| character_f64(&lifted, x)).collect();
                let (mean, se) = mean_and_stderr(&values);
                let own = comp.integrate_character(&k, mc)?;
                let sigma = (se * se + own.std_err * own.std_err).sqrt();
                let diff = (mean - own.value).norm();
                if diff > SIGMA_BOUND * sigma + 1e-12 {
                    failures.push(format!(
                        "component {i} character {k}: {:.3} sigma",
                        diff / sigma.max(f64::MIN_POSITIVE)
                    ));
                }
            }
        }
    }
    Ok(MarginalReport {
        exact,
        checked,
        passed: failures.is_empty(),
        failures,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceEntry {
    pub character: Freq,
    pub before: [f64; 2],
    pub after: [f64; 2],
    pub modulus_preserved: bool,
    pub sigma: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub exact: bool,
    pub entries: Vec<InvarianceEntry>,
    pub passed: bool,
}

/// Compares `∫ f∘(T×S) dλ` with `∫ f dλ` for each character in `family`.
pub fn invariance_check(j: &Joining, family: &[Freq], mc: MonteCarlo) -> Result<InvarianceReport> {
    if family.is_empty() {
        return Err(Error::spec("family", "the character family is empty"));
    }
    let joint = &j.joint;
    let zero = Freq::zero(joint.dim());
    let exact = joint.exact_integrals_available();
    let mut entries = Vec::with_capacity(family.len());
    if exact {
        for k in family {
            let v = joint
                .transfer_integrals(k, &zero, 1)?
                .expect("exact joint system");
            let (before, after) = (&v[0], &v[1]);
            let modulus_preserved = before.norm_sqr().exact_eq(&after.norm_sqr());
            let (b, a) = (before.to_complex(), after.to_complex());
            entries.push(InvarianceEntry {
                character: k.clone(),
                before: [b.re, b.im],
                after: [a.re, a.im],
                modulus_preserved,
                sigma: None,
                passed: before.exact_eq(after),
            });
        }
    } else {
        let points: Vec<Vec<f64>> = sample_joining(j, mc.seed, mc.samples)
            .iter()
            .map(Point::to_f64)
            .collect();
        let images = points
            .iter()
            .map(|x| joint.apply_f64(x))
            .collect::<Result<Vec<_>>>()?;
        for k in family {
            let before: Vec<Complex64> = points.iter().map(|x| character_f64(k, x)).collect();
            let after: Vec<Complex64> = images.iter().map(|x| character_f64(k, x)).collect();
            let diffs: Vec<Complex64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
            let (d, se) = mean_and_stderr(&diffs);
            let (b, _) = mean_and_stderr(&before);
            let (a, _) = mean_and_stderr(&after);
            let z = if se > 0.0 { d.norm() / se } else if d.norm() > 1e-12 { f64::INFINITY } else { 0.0 };
            entries.push(InvarianceEntry {
                character: k.clone(),
                before: [b.re, b.im],
                after: [a.re, a.im],
                modulus_preserved: (a.norm() - b.norm()).abs() <= SIGMA_BOUND * se + 1e-12,
                sigma: Some(z),
                passed: z <= SIGMA_BOUND,
            });
        }
    }
    Ok(InvarianceReport {
        exact,
        passed: entries.iter().all(|e| e.passed),
        entries,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ConsistencyOptions {
    /// Exact path: also compare correlations at lags `1..=lags`.
    pub lags: usize,
    pub samples: usize,
    pub seed: u64,
    /// Use the sampled path even when exact integrals exist.
    pub force_sampled: bool,
    pub max_witnesses: usize,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            lags: 0,
            samples: 100_000,
            seed: 0,
            force_sampled: false,
            max_witnesses: 32,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    /// Joint frequency of the product character.
    pub character: Freq,
    pub parts: Vec<Freq>,
    pub lag: usize,
    pub joint: [f64; 2],
    pub product: [f64; 2],
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub path: String,
    pub degree: i64,
    pub lags: usize,
    pub samples: usize,
    pub tested: usize,
    pub refuted: bool,
    pub verdict: String,
    pub witness_count: usize,
    pub witnesses: Vec<Witness>,
    pub max_sigma: Option<f64>,
    pub note: String,
}

fn product_characters(j: &Joining, degree: i64) -> Vec<Vec<Freq>> {
    let mut out: Vec<Vec<Freq>> = vec![Vec::new()];
    for c in &j.components {
        let family = freq_box(c.dim(), degree);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                family.iter().map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k.clone());
                    p
                })
            })
            .collect();
    }
    out.retain(|parts| parts.iter().any(|k| !k.is_zero()));
    out
}

/// Compares `∫ f_1 ⊗ … ⊗ f_r dλ` with `Π ∫ f_i dμ_i` over all product
/// characters with `|f_i|∞ <= degree`. On the exact path correlations at
/// lags `1..=lags` are compared as well, since the product measure's
/// correlation of `f_1 ⊗ … ⊗ f_r` is the product of the marginal ones.
pub fn product_consistency_test(j: &Joining, degree: i64, opts: ConsistencyOptions) -> Result<ConsistencyReport> {
    if degree < 1 {
        return Err(Error::spec("degree", "degree must be at least 1"));
    }
    let chars = product_characters(j, degree);
    let exact = j.exact() && !opts.force_sampled;
    let mut witnesses: Vec<Witness> = Vec::new();
    let mut max_sigma = None;
    if exact {
        let found = chars
            .par_iter()
            .map(|parts| exact_witnesses(j, parts, opts.lags))
            .collect::<Result<Vec<_>>>()?;
        witnesses.extend(found.into_iter().flatten());
    } else {
        let points: Vec<Vec<f64>> = sample_joining(j, opts.seed, opts.samples)
            .iter()
            .map(Point::to_f64)
            .collect();
        let marginal_mc = MonteCarlo {
            samples: opts.samples,
            seed: derive_seed(opts.seed, "marginals"),
        };
        let found = chars
            .par_iter()
            .map(|parts| {
                let lifted = j.lift(parts);
                let values: Vec<Complex64> = points.iter().map(|x| character_f64(&lifted, x)).collect();
                let (mean, se) = mean_and_stderr(&values);
                let mut product = Complex64::new(1.0, 0.0);
                let mut var = se * se;
                for (c, k) in j.components.iter().zip(parts) {
                    let v = c.integrate_character(k, marginal_mc)?;
                    product *= v.value;
                    var += v.std_err * v.std_err;
                }
                let sigma = var.sqrt();
                let diff = (mean - product).norm();
                let z = if sigma > 0.0 {
                    diff / sigma
                } else if diff > 1e-12 {
                    f64::INFINITY
                } else {
                    0.0
                };
                Ok((
                    z,
                    Witness {
                        character: lifted,
                        parts: parts.clone(),
                        lag: 0,
                        joint: [mean.re, mean.im],
                        product: [product.re, product.im],
                        sigma: Some(z),
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        max_sigma = found.iter().map(|(z, _)| *z).fold(None, |m: Option<f64>, z| {
            Some(m.map_or(z, |m| m.max(z)))
        });
        witnesses.extend(found.into_iter().filter(|(z, _)| *z > SIGMA_BOUND).map(|(_, w)| w));
    }
    let witness_count = witnesses.len();
    witnesses.truncate(opts.max_witnesses);
    let refuted = witness_count > 0;
    Ok(ConsistencyReport {
        path: if exact { "exact".into() } else { "sampled".into() },
        degree,
        lags: if exact { opts.lags } else { 0 },
        samples: if exact { 0 } else { opts.samples },
        tested: chars.len(),
        refuted,
        verdict: if refuted {
            "refuted".into()
        } else {
            "consistent-with-product".into()
        },
        witness_count,
        witnesses,
        max_sigma,
        note: ONE_SIDED_NOTE.into(),
    })
}

fn exact_witnesses(j: &Joining, parts: &[Freq], lags: usize) -> Result<Vec<Witness>> {
    let lifted = j.lift(parts);
    let joint = j
        .joint
        .transfer_integrals(&lifted, &lifted, lags)?
        .expect("exact joint");
    let lag0 = j.integrate(&lifted)?.expect("exact joint");
    let mut product_lag0 = PhaseSum::one();
    let mut product_corr = vec![PhaseSum::one(); lags + 1];
    for (c, k) in j.components.iter().zip(parts) {
        product_lag0 = product_lag0.mul(&c.measure().integrator(k)?.expect("exact component"));
        let corr = c.transfer_integrals(k, k, lags)?.expect("exact component");
        for (p, v) in product_corr.iter_mut().zip(corr) {
            *p = p.mul(&v);
        }
    }
    let mut out = Vec::new();
    let mut push = |lag: usize, a: &PhaseSum, b: &PhaseSum| {
        if !a.exact_eq(b) {
            let (x, y) = (a.to_complex(), b.to_complex());
            out.push(Witness {
                character: lifted.clone(),
                parts: parts.to_vec(),
                lag,
                joint: [x.re, x.im],
                product: [y.re, y.im],
                sigma: None,
            });
        }
    };
    push(0, &lag0, &product_lag0);
    for lag in 1..=lags {
        push(lag, &joint[lag], &product_corr[lag]);
    }
    Ok(out)
}

/// Parses a joining document at `f`.
pub fn parse_joining(f: Field<'_>) -> Result<Joining> {
    kinds::build_from_field(f)
}

/// Whether `β_*ρ` has no atoms, decided exactly for integer-slope affine
/// cocycles: a component of the pushforward is atomless as soon as one of
/// its non-atomic factors reaches the output with a nonzero coefficient.
/// Table cocycles take finitely many values, so their pushforward is atomic.
pub fn pushforward_atomless(rho: &crate::measure::Mixture, beta: &crate::cocycle::Cocycle) -> Result<bool> {
    use crate::affine::{AffineMap, IntMatrix};
    if rho.dim() != 1 {
        return Err(Error::Arity { expected: 1, got: rho.dim() });
    }
    let (slope, offset) = match beta {
        crate::cocycle::Cocycle::Table(_) => return Ok(false),
        c => c.integer_affine().ok_or_else(|| {
            Error::Unsupported("atomlessness is decided for integer slopes only".into())
        })?,
    };
    let map = AffineMap::new(IntMatrix::from_rows(vec![vec![slope]]), vec![offset.clone()]);
    let pushed = rho.pushforward(&map)?;
    Ok(pushed.components().iter().all(|c| {
        c.factors
            .iter()
            .enumerate()
            .any(|(j, f)| !f.is_atomic() && c.push.matrix.get(0, j) != 0)
    }))
}
