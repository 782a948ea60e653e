//! The rank-one family: words, maps, the dyadic dichotomy, continuity in the
//! parameter and a weak-mixing consistency run.

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_config, Check, Ctx, Experiment, Outcome, PLUMBING};
use crate::arith::number::{fmt_rat, rat};
use crate::arith::{parse_number, Rational};
use crate::error::{Error, Result};
use crate::rank1::{
    agreement_stage, binary_digits, dyadic_equivalence, rank1_map, rank1_word, word_from_digits, Agreement,
    DyadicVerdict, Rank1Map, Rank1Spec,
};
use crate::spectral::{weak_mixing_test, SpectralOptions, FINITE_FAMILY_NOTE};
use crate::system::{build_system, Observable, Point, SystemSpec};

const DICHOTOMY: &str = "rank-one family: dyadic difference decides isomorphism versus disjointness";
const CONTINUITY: &str = "rank-one family: stage maps depend continuously on the parameter";
const CONSTRUCTION: &str = "rank-one family: cutting parameter 3, one spacer steered by a digit";
const MIXING: &str = "rank-one family: weakly mixing members";

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    params: Vec<String>,
    depth: usize,
    word_stages: usize,
    agreement_pairs: Vec<[String; 2]>,
    continuity_prefix: usize,
    order: usize,
    threshold: f64,
    observables: Vec<Observable>,
    /// Base measure of the skew system `S(a, x) = (a, T_a x)`.
    fiber_base: Value,
    fiber_samples: usize,
    fiber_depth: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: vec!["1/4".into(), "3/4".into(), "1/3".into()],
            depth: 12,
            word_stages: 3,
            agreement_pairs: vec![
                ["1/4".into(), "3/4".into()],
                ["1/3".into(), "5/12".into()],
                ["1/3".into(), "1/3".into()],
            ],
            continuity_prefix: 6,
            order: 4096,
            threshold: crate::spectral::WEAK_MIXING_THRESHOLD,
            observables: vec![
                Observable::Level { stage: 2, level: 0 },
                Observable::Level { stage: 3, level: 5 },
                Observable::Level { stage: 4, level: 20 },
            ],
            fiber_base: json!({"type": "cyclic", "order": 7}),
            fiber_samples: 6,
            fiber_depth: 6,
        }
    }
}

pub struct Rank1Family;

impl Experiment for Rank1Family {
    fn name(&self) -> &'static str {
        "rank1-family"
    }

    fn summary(&self) -> &'static str {
        "words, maps, dyadic dichotomy, continuity and weak mixing of the rank-one family T_a"
    }

    fn run(&self, config: &Value, ctx: &Ctx) -> Result<Outcome> {
        let (cfg, echo): (Config, Value) = parse_config(config)?;
        if cfg.depth == 0 || cfg.depth > crate::rank1::MAX_DEPTH {
            return Err(Error::spec("config.depth", format!("depth must be in 1..={}", crate::rank1::MAX_DEPTH)));
        }
        let params = cfg
            .params
            .iter()
            .enumerate()
            .map(|(i, s)| parse_param(s, &format!("config.params[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let mut checks = vec![first_words()];
        for a in &params {
            let tag = fmt_rat(a);
            checks.push(word_counts(a, cfg.word_stages, &tag)?);
            checks.push(itinerary(a, cfg.depth, &tag)?);
            checks.push(pieces(a, cfg.depth, &tag)?);
        }
        for (i, a) in params.iter().enumerate() {
            for b in &params[i + 1..] {
                checks.push(dichotomy(a, b)?);
            }
        }
        for (i, [a, b]) in cfg.agreement_pairs.iter().enumerate() {
            let a = parse_param(a, &format!("config.agreement_pairs[{i}][0]"))?;
            let b = parse_param(b, &format!("config.agreement_pairs[{i}][1]"))?;
            checks.push(agreement(&a, &b, cfg.depth)?);
        }
        checks.push(continuity(cfg.continuity_prefix)?);
        checks.push(skew_fibers(&cfg, ctx)?);
        if !cfg.observables.is_empty() {
            for a in &params {
                checks.push(weak_mixing(a, &cfg)?);
            }
        }
        Ok(Outcome {
            config: echo,
            checks,
            notes: vec![
                FINITE_FAMILY_NOTE.into(),
                "level-indicator correlations are computed on the finite tower; the map is undefined on its top level".into(),
            ],
        })
    }
}

fn parse_param(s: &str, field: &str) -> Result<Rational> {
    let a = parse_number(s, None, field)?;
    if a < Rational::from_integer(0.into()) || a > Rational::one() {
        return Err(Error::spec(field, "parameter must lie in [0, 1]"));
    }
    Ok(a)
}

fn first_words() -> Check {
    let w0 = word_from_digits(&[0]).word_text();
    let w1 = word_from_digits(&[1]).word_text();
    Check::new(
        "r1.words.first-stage",
        CONSTRUCTION,
        "a_1 = 0: T s T T; a_1 = 1: T T s T",
        format!("a_1 = 0: {w0}; a_1 = 1: {w1}"),
        w0 == "T s T T" && w1 == "T T s T",
    )
}

fn word_counts(a: &Rational, stages: usize, tag: &str) -> Result<Check> {
    let spec = Rank1Spec::exact(a.clone(), stages);
    let mut lengths = Vec::new();
    let mut heights = Vec::new();
    let mut spacers = Vec::new();
    let (mut l, mut h, mut s) = (1u64, 1u64, 0u64);
    let mut expected_l = Vec::new();
    let mut expected_h = Vec::new();
    for n in 0..=stages {
        let w = rank1_word(&spec, n)?;
        lengths.push(w.length);
        heights.push(w.height);
        spacers.push(w.spacer_count() == s);
        expected_l.push(l);
        expected_h.push(h);
        l = 3 * l + 1;
        h *= 3;
        s = 3 * s + 1;
    }
    Ok(Check::new(
        &format!("r1.words.{tag}"),
        CONSTRUCTION,
        format!("lengths {expected_l:?}, heights {expected_h:?}, one new spacer per stage"),
        format!("lengths {lengths:?}, heights {heights:?}"),
        lengths == expected_l && heights == expected_h && spacers.iter().all(|&ok| ok),
    ))
}

fn itinerary(a: &Rational, depth: usize, tag: &str) -> Result<Check> {
    let mut bad = None;
    for d in 1..=depth {
        let spec = Rank1Spec::exact(a.clone(), d);
        let map = rank1_map(&spec)?;
        if map.itinerary_from_base()? != rank1_word(&spec, d)?.word {
            bad = Some(d);
            break;
        }
    }
    Ok(Check::new(
        &format!("r1.itinerary.{tag}"),
        CONSTRUCTION,
        format!("base itinerary reads B_d for every depth 1..={depth}"),
        match bad {
            None => format!("coherent through depth {depth}"),
            Some(d) => format!("itinerary differs from B_{d}"),
        },
        bad.is_none(),
    ))
}

/// Pieces tile their supports and the undefined set has measure `1/L_d`,
/// below `(1/3)^(d-1) / 3`.
fn pieces(a: &Rational, depth: usize, tag: &str) -> Result<Check> {
    let mut bad = None;
    for d in 1..=depth {
        let map = rank1_map(&Rank1Spec::exact(a.clone(), d))?;
        let undefined = map.undefined_measure();
        let bound = Rational::new(BigInt::one(), BigInt::from(3u64).pow(d as u32));
        let expected = Rational::new(BigInt::one(), BigInt::from(crate::rank1::stage_length(d)));
        if !map.pieces_partition_exactly() || undefined != expected || undefined > bound {
            bad = Some((d, undefined));
            break;
        }
    }
    Ok(Check::new(
        &format!("r1.pieces.{tag}"),
        CONSTRUCTION,
        format!("exact tiling and undefined measure 1/L_d <= 3^-d for depths 1..={depth}"),
        match &bad {
            None => format!("holds through depth {depth}"),
            Some((d, u)) => format!("fails at depth {d} (undefined measure {})", fmt_rat(u)),
        },
        bad.is_none(),
    ))
}

/// Independent oracle: the tails of the two binary expansions coincide.
fn tails_agree(a: &Rational, b: &Rational) -> bool {
    let (da, db) = (binary_digits(a, 256), binary_digits(b, 256));
    da[128..] == db[128..]
}

fn dichotomy(a: &Rational, b: &Rational) -> Result<Check> {
    let verdict = dyadic_equivalence(&Rank1Spec::exact(a.clone(), 1), &Rank1Spec::exact(b.clone(), 1))?;
    let expected = if tails_agree(a, b) {
        DyadicVerdict::IsomorphicFamily
    } else {
        DyadicVerdict::DisjointFamily
    };
    Ok(Check::new(
        &format!("r1.dichotomy.{}-{}", fmt_rat(a), fmt_rat(b)),
        DICHOTOMY,
        expected.to_string(),
        format!("{verdict} (|a - b| = {})", fmt_rat(&(a - b).abs())),
        verdict == expected,
    ))
}

fn agreement(a: &Rational, b: &Rational, max: usize) -> Result<Check> {
    let got = agreement_stage(&Rank1Spec::exact(a.clone(), max), &Rank1Spec::exact(b.clone(), max), max)?;
    let (da, db) = (binary_digits(a, max), binary_digits(b, max));
    let expected = match da.iter().zip(&db).position(|(x, y)| x != y) {
        Some(i) => Agreement::DifferAt(i + 1),
        None => Agreement::AgreeThrough(max),
    };
    let show = |g: &Agreement| match g {
        Agreement::DifferAt(i) => format!("differ at digit {i}"),
        Agreement::AgreeThrough(n) => format!("agree through stage {n}"),
    };
    Ok(Check::new(
        &format!("r1.agreement.{}-{}", fmt_rat(a), fmt_rat(b)),
        CONTINUITY,
        show(&expected),
        show(&got),
        got == expected,
    ))
}

/// For every digit prefix `p` of length `n <= max`, two rationals in the
/// dyadic interval of `p` have identical stage-`n` words and maps.
fn continuity(max: usize) -> Result<Check> {
    let mut tested = 0usize;
    let mut bad = None;
    'outer: for n in 1..=max {
        let scale = Rational::from_integer(BigInt::one() << n);
        for p in 0u64..(1 << n) {
            let base = Rational::from_integer(p.into());
            let a = (&base + rat(1, 3)) / &scale;
            let b = (&base + rat(5, 7)) / &scale;
            let (sa, sb) = (Rank1Spec::exact(a.clone(), n), Rank1Spec::exact(b.clone(), n));
            let same_word = rank1_word(&sa, n)?.word == rank1_word(&sb, n)?.word;
            let (ma, mb): (Rank1Map, Rank1Map) = (rank1_map(&sa)?, rank1_map(&sb)?);
            let same_map = ma == mb && ma.pieces() == mb.pieces();
            let agree = matches!(agreement_stage(&sa, &sb, n)?, Agreement::AgreeThrough(k) if k == n);
            tested += 1;
            if !(same_word && same_map && agree) {
                bad = Some(format!("{} vs {}", fmt_rat(&a), fmt_rat(&b)));
                break 'outer;
            }
        }
    }
    Ok(Check::new(
        "r1.continuity",
        CONTINUITY,
        format!("identical stage-n words and maps for every prefix of length <= {max}"),
        match &bad {
            None => format!("{tested} prefixes, all identical"),
            Some(s) => format!("mismatch for {s}"),
        },
        bad.is_none(),
    ))
}

/// Fibers of `S(a, x) = (a, T_a x)` at sampled parameters.
fn skew_fibers(cfg: &Config, ctx: &Ctx) -> Result<Check> {
    let id = "r1.skew-fibers";
    let spec = SystemSpec::new(
        "fibered",
        json!({"base": cfg.fiber_base, "fiber": {"rank1": {"depth": cfg.fiber_depth}}}),
    );
    let sys = build_system(&spec).map_err(|e| e.within("config"))?;
    let fs = sys.fibered().expect("fibered system");
    let samples = fs.base.sample(ctx.seed_for(id), cfg.fiber_samples);
    let mut problems = Vec::new();
    let mut pairs = 0usize;
    for (i, a) in samples.iter().enumerate() {
        let fiber = fs.fiber_at(a)?;
        let map = fiber.rank1().expect("rank-one fiber");
        let direct = rank1_map(&Rank1Spec::exact(a[0].clone(), cfg.fiber_depth))?;
        if *map != direct || !map.pieces_partition_exactly() {
            problems.push(format!("fiber at {} differs from T_a", fmt_rat(&a[0])));
        }
        // S acts as T_a on the second coordinate
        let x = Rational::new(BigInt::from(map.cells()[0]) * 2 + 1, BigInt::from(2 * map.levels()));
        let image = sys.apply(&Point(vec![a[0].clone(), x.clone()]))?;
        if image[0] != a[0] || image[1] != map.apply(&x)? {
            problems.push(format!("S(a, x) != (a, T_a x) at a = {}", fmt_rat(&a[0])));
        }
        for b in &samples[i + 1..] {
            pairs += 1;
            let v = dyadic_equivalence(
                &Rank1Spec::exact(a[0].clone(), 1),
                &Rank1Spec::exact(b[0].clone(), 1),
            )?;
            let expected = if tails_agree(&a[0], &b[0]) {
                DyadicVerdict::IsomorphicFamily
            } else {
                DyadicVerdict::DisjointFamily
            };
            if v != expected {
                problems.push(format!("{} vs {}: {v}", fmt_rat(&a[0]), fmt_rat(&b[0])));
            }
        }
    }
    Ok(Check::new(
        id,
        PLUMBING,
        "fibers equal T_a, S(a, x) = (a, T_a x), pairwise verdicts match the digit oracle",
        if problems.is_empty() {
            format!("{} fibers, {pairs} pairs consistent", samples.len())
        } else {
            problems.join("; ")
        },
        problems.is_empty(),
    ))
}

fn weak_mixing(a: &Rational, cfg: &Config) -> Result<Check> {
    let spec = SystemSpec::new("rank1-family", json!({"a": fmt_rat(a), "depth": cfg.depth}));
    let sys = build_system(&spec)?;
    let r = weak_mixing_test(&sys, &cfg.observables, cfg.order, cfg.threshold, &SpectralOptions::default())?;
    let worst = r.entries.iter().map(|e| e.normalized_mass).fold(0.0, f64::max);
    Ok(Check::new(
        &format!("r1.weak-mixing.{}", fmt_rat(a)),
        MIXING,
        format!("normalized Wiener mass < {} for every observable", cfg.threshold),
        format!("max normalized mass {worst:.4}: {}", r.verdict),
        r.no_atoms_detected,
    )
    .detail(&r))
}
