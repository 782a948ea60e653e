//! Correlation sequences `n ↦ ⟨f∘T^{-n}, f⟩`, Wiener averages of their
//! squared moduli, eigenvalue masses, and weak-mixing probes.
//!
//! Sign convention: `values(n) = ∫ f∘T^{-n} · conj(f) dμ`, so for a rotation
//! by `α` and `f = e(x)` the sequence is `e(-nα)` and the spectral atom sits
//! at `e^{-2πiα}`. An eigenvalue `λ = e^{2πiα}` (`f∘T = λf`) shows up as mass
//! `(1/N)|Σ values(n) λ^n|`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arith::number::{fmt_rat, to_f64};
use crate::arith::{PhaseSum, Rational};
use crate::error::{Error, Result};
use crate::measure::MonteCarlo;
use crate::seed::derive_seed;
use crate::system::{FiberedSystem, Freq, Observable, System};

pub const DEFAULT_ORDER: usize = 4096;
pub const EIGENVALUE_THRESHOLD: f64 = 0.5;
pub const WEAK_MIXING_THRESHOLD: f64 = 0.05;
/// Largest denominator of the atom-location grid.
pub const GRID_DENOMINATOR: i64 = 64;

/// The finite-family caveat attached to every weak-mixing verdict.
pub const FINITE_FAMILY_NOTE: &str = "finite family of observables and finite order N: \
this can only report no atoms detected among tested observables, never certify weak mixing";

#[derive(Clone, Debug)]
pub struct CorrelationSeq {
    pub observable: Observable,
    pub centered: bool,
    /// Truncation order `N`; lags `0..=N` are stored.
    pub order: usize,
    pub values: Vec<Complex64>,
    pub exact: Option<Vec<PhaseSum>>,
    /// Per-lag standard errors on the sampled path.
    pub std_err: Option<Vec<f64>>,
    pub samples: usize,
    pub dropped: usize,
}

impl CorrelationSeq {
    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// `values(n)` for `|n| <= N`; negative lags are conjugates.
    pub fn value(&self, n: i64) -> Complex64 {
        let v = self.values[n.unsigned_abs() as usize];
        if n < 0 {
            v.conj()
        } else {
            v
        }
    }

    pub fn exact_value(&self, n: i64) -> Option<PhaseSum> {
        let e = &self.exact.as_ref()?[n.unsigned_abs() as usize];
        Some(if n < 0 { e.conj() } else { e.clone() })
    }

    /// `values(0)` real and nonnegative, `|values(n)| <= values(0)`.
    pub fn bounded_by_origin(&self, tol: f64) -> bool {
        let v0 = self.values[0];
        v0.im.abs() <= tol
            && v0.re >= -tol
            && self.values.iter().all(|v| v.norm() <= v0.re + tol)
    }

    /// Smallest eigenvalue of the Hermitian Toeplitz matrix
    /// `H_{ij} = values(i - j)` of the given size, through its real
    /// symmetric embedding `[[A, -B], [B, A]]`.
    pub fn toeplitz_min_eigenvalue(&self, size: usize) -> Result<f64> {
        if size == 0 || size > self.order + 1 {
            return Err(Error::spec(
                "size",
                format!("Toeplitz size must be in 1..={}", self.order + 1),
            ));
        }
        let m = DMatrix::from_fn(2 * size, 2 * size, |r, c| {
            let (bi, i) = (r / size, r % size);
            let (bj, j) = (c / size, c % size);
            let h = self.value(i as i64 - j as i64);
            match (bi, bj) {
                (0, 0) | (1, 1) => h.re,
                (0, 1) => -h.im,
                _ => h.im,
            }
        });
        let eig = m.symmetric_eigen();
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// `{observable, centered, N, exact, min_lag, values: [[re, im], …]}`
    /// over lags `-N..=N`.
    pub fn to_json(&self) -> Value {
        let n = self.order as i64;
        let values: Vec<[f64; 2]> = (-n..=n)
            .map(|i| {
                let v = self.value(i);
                [v.re, v.im]
            })
            .collect();
        let mut out = json!({
            "observable": self.observable,
            "centered": self.centered,
            "N": self.order,
            "exact": self.is_exact(),
            "min_lag": -n,
            "values": values,
        });
        if let Some(se) = &self.std_err {
            out["std_err"] = json!(se);
            out["samples"] = json!(self.samples);
            out["dropped"] = json!(self.dropped);
        }
        out
    }

    /// Rows `n,re,im` for plotting.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "re", "im"])?;
        let n = self.order as i64;
        for i in -n..=n {
            let v = self.value(i);
            w.write_record([i.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub mc: MonteCarlo,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            mc: MonteCarlo {
                samples: 2000,
                seed: 0,
            },
        }
    }
}

pub fn correlation_sequence(
    sys: &System,
    f: &Observable,
    order: usize,
    center: bool,
    opts: &SpectralOptions,
) -> Result<CorrelationSeq> {
    if order < 1 {
        return Err(Error::spec("N", "order must be at least 1"));
    }
    match f {
        Observable::Character(k) => character_sequence(sys, f, k, order, center, opts),
        Observable::Level { stage, level } => {
            let map = sys.rank1().ok_or_else(|| {
                Error::Unsupported("level indicators need a rank-one system".into())
            })?;
            let positions = map.level_positions(*stage, *level)?;
            let exact: Vec<PhaseSum> = map
                .level_autocorrelation(&positions, order, center)
                .into_iter()
                .map(PhaseSum::constant)
                .collect();
            Ok(CorrelationSeq {
                observable: f.clone(),
                centered: center,
                order,
                values: exact.iter().map(PhaseSum::to_complex).collect(),
                exact: Some(exact),
                std_err: None,
                samples: 0,
                dropped: 0,
            })
        }
    }
}

fn character_sequence(
    sys: &System,
    f: &Observable,
    k: &Freq,
    order: usize,
    center: bool,
    opts: &SpectralOptions,
) -> Result<CorrelationSeq> {
    // values(n) = conj ∫ f∘T^n · conj f dμ by invariance of μ
    let exact_mean_sq = if center {
        sys.measure().integrator(k)?.map(|m| m.norm_sqr())
    } else {
        Some(PhaseSum::zero())
    };
    let forward = match exact_mean_sq {
        Some(_) => sys.transfer_integrals(k, k, order)?,
        None => None,
    };
    if let (Some(forward), Some(mean_sq)) = (forward, exact_mean_sq) {
        let exact: Vec<PhaseSum> = forward.iter().map(|v| v.conj().sub(&mean_sq)).collect();
        return Ok(CorrelationSeq {
            observable: f.clone(),
            centered: center,
            order,
            values: exact.iter().map(PhaseSum::to_complex).collect(),
            exact: Some(exact),
            std_err: None,
            samples: 0,
            dropped: 0,
        });
    }
    let sampled = sys.transfer_sampled(k, k, order, opts.mc)?;
    let mean_sq = if center {
        let m = sys.integrate_character(
            k,
            MonteCarlo {
                samples: opts.mc.samples,
                seed: derive_seed(opts.mc.seed, "mean"),
            },
        )?;
        m.value.norm_sqr()
    } else {
        0.0
    };
    Ok(CorrelationSeq {
        observable: f.clone(),
        centered: center,
        order,
        values: sampled.mean.iter().map(|v| v.conj() - mean_sq).collect(),
        exact: None,
        std_err: Some(sampled.std_err),
        samples: sampled.used,
        dropped: sampled.dropped,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectedAtom {
    /// Atom at `e^{2πi·angle}`.
    pub angle: String,
    pub angle_f64: f64,
    /// Squared Fourier mass `|(1/N) Σ values(n) e^{-2πi n angle}|²`.
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomReport {
    pub order: usize,
    /// `(1/N) Σ_{i<N} |values(i)|²`.
    pub total_mass: f64,
    /// Exact value when every entry has a rational modulus.
    pub exact_total_mass: Option<String>,
    /// `total_mass / values(0)²`, the fraction of `|f|²` sitting in atoms.
    pub normalized_mass: f64,
    /// `(prefix length, mass over the prefix)` for `N/4, N/2, N`.
    pub trace: Vec<(usize, f64)>,
    pub atoms: Vec<DetectedAtom>,
    pub grid_denominator: i64,
    pub candidates: Vec<String>,
}

/// Grid `p/q` with `q <= GRID_DENOMINATOR` plus the candidates, deduplicated.
fn atom_grid(candidates: &[Rational]) -> Vec<Rational> {
    let mut grid: Vec<Rational> = Vec::new();
    for q in 1..=GRID_DENOMINATOR {
        for p in 0..q {
            if p.gcd(&q) == 1 {
                grid.push(Rational::new(BigInt::from(p), BigInt::from(q)));
            }
        }
    }
    grid.extend(candidates.iter().map(crate::arith::frac));
    grid.sort();
    grid.dedup();
    grid
}

/// `|(1/N) Σ_{n<N} values(n) e^{-2πi n w}|`.
fn fourier_mass(c: &CorrelationSeq, w: f64, n: usize) -> f64 {
    let step = Complex64::from_polar(1.0, -std::f64::consts::TAU * w);
    let mut rot = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::zero();
    for (i, v) in c.values[..n].iter().enumerate() {
        acc += v * rot;
        rot *= step;
        if i % 256 == 255 {
            rot /= rot.norm();
        }
    }
    acc.norm() / n as f64
}

pub fn wiener_atomic_mass(c: &CorrelationSeq, candidates: &[Rational]) -> Result<AtomReport> {
    let n = c.order;
    if n < 16 {
        return Err(Error::spec("N", "the Wiener average needs N >= 16"));
    }
    let prefix_mass = |m: usize| c.values[..m].iter().map(|v| v.norm_sqr()).sum::<f64>() / m as f64;
    let exact_total_mass = c.exact.as_ref().and_then(|ex| {
        let sum = ex[..n]
            .iter()
            .map(PhaseSum::abs_sqr_rational)
            .sum::<Option<Rational>>()?;
        Some(sum / Rational::from_integer(BigInt::from(n)))
    });
    let total_mass = match &exact_total_mass {
        Some(m) => to_f64(m),
        None => prefix_mass(n),
    };
    let v0 = c.values[0].norm_sqr();
    let normalized_mass = if v0 > 0.0 { total_mass / v0 } else { 0.0 };
    let trace = [n / 4, n / 2, n]
        .into_iter()
        .map(|m| (m, prefix_mass(m)))
        .collect();
    let grid = atom_grid(candidates);
    let masses: Vec<f64> = grid
        .par_iter()
        .map(|w| fourier_mass(c, to_f64(w), n).powi(2))
        .collect();
    let floor = 1e-3 * v0.max(f64::MIN_POSITIVE);
    let mut atoms: Vec<DetectedAtom> = grid
        .iter()
        .zip(masses)
        .filter(|(_, m)| *m >= floor && *m > 4.0 / n as f64 * v0)
        .map(|(w, m)| DetectedAtom {
            angle: fmt_rat(w),
            angle_f64: to_f64(w),
            mass: m,
        })
        .collect();
    atoms.sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.angle.cmp(&b.angle)));
    atoms.truncate(16);
    Ok(AtomReport {
        order: n,
        total_mass,
        exact_total_mass: exact_total_mass.as_ref().map(fmt_rat),
        normalized_mass,
        trace,
        atoms,
        grid_denominator: GRID_DENOMINATOR,
        candidates: candidates.iter().map(fmt_rat).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenReport {
    /// The tested eigenvalue is `e^{2πi·alpha}`.
    pub alpha: String,
    pub order: usize,
    pub mass: f64,
    pub exact_mass: Option<String>,
    pub threshold: f64,
    pub witnessed: bool,
    pub verdict: String,
}

/// `(1/N) |Σ_{n<N} values(n) e^{2πi n α}|`, exact when the sum collapses to
/// at most one phase.
pub fn eigen_mass(c: &CorrelationSeq, alpha: &Rational) -> (f64, Option<Rational>) {
    let n = c.order;
    if let Some(ex) = &c.exact {
        let mut sum = PhaseSum::zero();
        for (i, v) in ex[..n].iter().enumerate() {
            sum.add_assign(&v.rotate(&(alpha * BigInt::from(i))));
        }
        let nn = Rational::from_integer(BigInt::from(n));
        if sum.is_empty() {
            return (0.0, Some(Rational::zero()));
        }
        if let Some((coef, _)) = sum.as_monomial() {
            let m = coef.abs() / nn;
            return (to_f64(&m), Some(m));
        }
        if sum.len() <= 64 && sum.is_zero() {
            return (0.0, Some(Rational::zero()));
        }
        return (sum.to_complex().norm() / n as f64, None);
    }
    (fourier_mass(c, -to_f64(alpha), n), None)
}

pub fn detect_eigenvalue(
    sys: &System,
    f: &Observable,
    alpha: &Rational,
    order: usize,
    threshold: f64,
    opts: &SpectralOptions,
) -> Result<EigenReport> {
    if order < 16 {
        return Err(Error::spec("N", "eigenvalue detection needs N >= 16"));
    }
    let c = correlation_sequence(sys, f, order, false, opts)?;
    Ok(eigen_report(&c, alpha, threshold))
}

pub fn eigen_report(c: &CorrelationSeq, alpha: &Rational, threshold: f64) -> EigenReport {
    let (mass, exact) = eigen_mass(c, alpha);
    let witnessed = mass > threshold;
    EigenReport {
        alpha: fmt_rat(alpha),
        order: c.order,
        mass,
        exact_mass: exact.as_ref().map(fmt_rat),
        threshold,
        witnessed,
        verdict: if witnessed {
            "eigenvalue-witnessed".into()
        } else {
            "not-witnessed".into()
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakMixingEntry {
    pub observable: Observable,
    pub mass: f64,
    pub normalized_mass: f64,
    pub atoms_detected: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakMixingReport {
    pub order: usize,
    pub threshold: f64,
    pub entries: Vec<WeakMixingEntry>,
    pub no_atoms_detected: bool,
    pub verdict: String,
    pub note: String,
}

/// Wiener mass of each centered observable, compared against `threshold`
/// after normalizing by `values(0)²`.
pub fn weak_mixing_test(
    sys: &System,
    family: &[Observable],
    order: usize,
    threshold: f64,
    opts: &SpectralOptions,
) -> Result<WeakMixingReport> {
    if family.is_empty() {
        return Err(Error::spec("family", "the observable family is empty"));
    }
    let entries = family
        .par_iter()
        .map(|f| {
            let c = correlation_sequence(sys, f, order, true, opts)?;
            let r = wiener_atomic_mass(&c, &[])?;
            Ok(WeakMixingEntry {
                observable: f.clone(),
                mass: r.total_mass,
                normalized_mass: r.normalized_mass,
                atoms_detected: r.normalized_mass >= threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let clean = entries.iter().all(|e| !e.atoms_detected);
    Ok(WeakMixingReport {
        order,
        threshold,
        no_atoms_detected: clean,
        verdict: if clean {
            "no atoms detected among tested observables".into()
        } else {
            "atoms detected: not weakly mixing".into()
        },
        note: FINITE_FAMILY_NOTE.into(),
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberScanReport {
    pub alpha: String,
    pub samples: usize,
    pub considered: usize,
    pub witnessed: usize,
    pub witness_fraction: f64,
    /// Fibers whose construction or evaluation failed; excluded above.
    pub failures: usize,
    pub warnings: Vec<String>,
    pub flat: Option<EigenReport>,
}

/// Samples base points, runs [`detect_eigenvalue`] on each fiber, and on
/// the flat system when given. `f` is an observable of the fiber space;
/// characters are lifted to the flat space by padding the base coordinates
/// with zeros.
#[allow(clippy::too_many_arguments)]
pub fn fiber_eigenvalue_scan(
    fs: &FiberedSystem,
    flat: Option<&System>,
    f: &Observable,
    alpha: &Rational,
    samples: usize,
    order: usize,
    threshold: f64,
    seed: u64,
) -> Result<FiberScanReport> {
    let points = fs.base.sample(derive_seed(seed, "base"), samples);
    let outcomes: Vec<Result<bool>> = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let fiber = fs.fiber_at(x)?;
            let opts = SpectralOptions {
                mc: MonteCarlo {
                    samples: 2000,
                    seed: derive_seed(seed, &format!("fiber:{i}")),
                },
            };
            Ok(detect_eigenvalue(&fiber, f, alpha, order, threshold, &opts)?.witnessed)
        })
        .collect();
    let mut warnings = Vec::new();
    let (mut witnessed, mut failures) = (0, 0);
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(true) => witnessed += 1,
            Ok(false) => {}
            Err(e) => {
                failures += 1;
                if warnings.len() < 8 {
                    warnings.push(format!("fiber {i} at {}: {e}", points[i]));
                }
            }
        }
    }
    let considered = samples - failures;
    let flat_report = match (flat, f) {
        (Some(sys), Observable::Character(k)) => {
            let mut lifted = vec![0; fs.base_dim()];
            lifted.extend(k.iter());
            let opts = SpectralOptions {
                mc: MonteCarlo {
                    samples: 2000,
                    seed: derive_seed(seed, "flat"),
                },
            };
            Some(detect_eigenvalue(
                sys,
                &Observable::Character(Freq(lifted)),
                alpha,
                order,
                threshold,
                &opts,
            )?)
        }
        (Some(_), Observable::Level { .. }) => {
            warnings.push("level indicators vary with the fiber; no flat verdict".into());
            None
        }
        (None, _) => None,
    };
    Ok(FiberScanReport {
        alpha: fmt_rat(alpha),
        samples,
        considered,
        witnessed,
        witness_fraction: if considered > 0 {
            witnessed as f64 / considered as f64
        } else {
            0.0
        },
        failures,
        warnings,
        flat: flat_report,
    })
}
