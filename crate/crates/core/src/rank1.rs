//! The rank-one family `T_a`: cutting parameter 3, one spacer per stage,
//! placed over the first column when the stage digit of `a` is 0 and over
//! the second when it is 1.
//!
//! Stage `n` of the tower is tracked on the grid of width `3^-n`: a level is
//! a cell index, `[0, 1)` holds the original material (cells `< 3^n`), and
//! spacers are drawn from the reserve `[1, ∞)` left to right. Cutting a level
//! into three columns sends cell `m` to `3m, 3m + 1, 3m + 2`. After `d`
//! stages all cells lie in `[0, L_d)`, and dividing by `L_d` renormalizes the
//! tower to a probability space on `[0, 1)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::sync::Mutex;
use serde::Serialize;

use crate::affine::AffineMap;
use crate::arith::number::{fmt_rat, is_power_of_two};
use crate::arith::{frac, Rational};
use crate::doc::Field;
use crate::error::{Error, Result};
use crate::measure::Component;
use crate::system::{Dynamics, Point};

/// Deepest construction supported; `L_d` must fit comfortably in memory.
pub const MAX_DEPTH: usize = 16;

/// The parameter `a ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rank1Param {
    Exact(Rational),
    /// A finite prefix `a_1 a_2 …` of the binary expansion.
    Digits(Vec<u8>),
}

impl Rank1Param {
    pub fn parse(f: Field<'_>, precision: Option<u32>) -> Result<Self> {
        if let Some(d) = f.opt("digits") {
            f.only_keys(&["digits"])?;
            let text = d.field().as_str()?;
            let digits = text
                .chars()
                .filter(|c| !c.is_whitespace() && *c != '_')
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(d.field().error(format!("digit `{other}` is not 0 or 1"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            return Ok(Rank1Param::Digits(digits));
        }
        let a = f.as_number(precision)?;
        if a.is_negative() || a > Rational::one() {
            return Err(f.error(format!("parameter {} outside [0, 1]", fmt_rat(&a))));
        }
        Ok(Rank1Param::Exact(a))
    }

    /// The first `n` binary digits `a_1 … a_n`. Rationals use the expansion
    /// not ending in all 1s, except `a = 1` whose only expansion is `.111…`.
    pub fn digits(&self, n: usize) -> Result<Vec<u8>> {
        match self {
            Rank1Param::Digits(d) => {
                if d.len() < n {
                    Err(Error::DepthExceeded { depth: d.len() })
                } else {
                    Ok(d[..n].to_vec())
                }
            }
            Rank1Param::Exact(a) => Ok(binary_digits(a, n)),
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            Rank1Param::Exact(a) => Some(a),
            Rank1Param::Digits(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Rank1Param::Exact(a) => fmt_rat(a),
            Rank1Param::Digits(d) => {
                format!(".{}…", d.iter().map(|b| char::from(b'0' + b)).collect::<String>())
            }
        }
    }
}

/// First `n` binary digits of `a ∈ [0, 1]`.
pub fn binary_digits(a: &Rational, n: usize) -> Vec<u8> {
    if *a == Rational::one() {
        return vec![1; n];
    }
    let mut x = frac(a);
    let two = Rational::from_integer(BigInt::from(2));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        x *= &two;
        if x >= Rational::one() {
            out.push(1);
            x -= Rational::one();
        } else {
            out.push(0);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rank1Spec {
    pub a: Rank1Param,
    pub depth: usize,
}

impl Rank1Spec {
    pub fn exact(a: Rational, depth: usize) -> Self {
        Self {
            a: Rank1Param::Exact(a),
            depth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Letter {
    T,
    S,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Letter::T => "T",
            Letter::S => "s",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerStage {
    pub stage: usize,
    pub word: Vec<Letter>,
    /// Number of `T` letters.
    pub height: u64,
    /// Total number of letters.
    pub length: u64,
}

impl TowerStage {
    /// Letters separated by spaces, e.g. `T s T T`.
    pub fn word_text(&self) -> String {
        self.word
            .iter()
            .map(Letter::to_string)
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn spacer_count(&self) -> u64 {
        self.length - self.height
    }
}

/// `L_n`, the number of levels at stage `n`.
pub fn stage_length(n: usize) -> u64 {
    (0..n).fold(1u64, |l, _| 3 * l + 1)
}

/// The word `B_n`: `B_0 = T`, `B_{n+1} = B_n s B_n B_n` when `a_{n+1} = 0`
/// and `B_n B_n s B_n` when `a_{n+1} = 1`.
pub fn rank1_word(spec: &Rank1Spec, n: usize) -> Result<TowerStage> {
    if n > spec.depth {
        return Err(Error::DepthExceeded { depth: spec.depth });
    }
    let digits = spec.a.digits(n)?;
    Ok(word_from_digits(&digits))
}

pub fn word_from_digits(digits: &[u8]) -> TowerStage {
    let mut word = vec![Letter::T];
    for &d in digits {
        let mut next = Vec::with_capacity(3 * word.len() + 1);
        next.extend_from_slice(&word);
        if d == 0 {
            next.push(Letter::S);
            next.extend_from_slice(&word);
        } else {
            next.extend_from_slice(&word);
            next.push(Letter::S);
        }
        next.extend_from_slice(&word);
        word = next;
    }
    let height = word.iter().filter(|l| **l == Letter::T).count() as u64;
    TowerStage {
        stage: digits.len(),
        length: word.len() as u64,
        height,
        word,
    }
}

/// One translation piece of the stage map: `[lo, hi) ↦ [lo, hi) + shift`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub lo: Rational,
    pub hi: Rational,
    pub shift: Rational,
}

/// The partially defined map at a finite stage. Level `p` of the final
/// tower is the cell `[cells[p] / L, (cells[p] + 1) / L)`; the map raises
/// every level by one and is undefined on the top level.
#[derive(Clone, PartialEq, Eq)]
pub struct Rank1Map {
    depth: usize,
    digits: Vec<u8>,
    cells: Vec<u64>,
    position: Vec<u32>,
}

impl fmt::Debug for Rank1Map {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Rank1Map(depth {}, digits {:?}, {} levels)",
            self.depth,
            self.digits,
            self.cells.len()
        )
    }
}

pub fn rank1_map(spec: &Rank1Spec) -> Result<Rank1Map> {
    if spec.depth == 0 {
        return Err(Error::spec("depth", "depth must be at least 1"));
    }
    if spec.depth > MAX_DEPTH {
        return Err(Error::spec(
            "depth",
            format!("depth {} exceeds the supported maximum {MAX_DEPTH}", spec.depth),
        ));
    }
    let digits = spec.a.digits(spec.depth)?;
    Ok(Rank1Map::from_digits(&digits))
}

impl Rank1Map {
    pub fn from_digits(digits: &[u8]) -> Self {
        let mut cells: Vec<u64> = vec![0];
        let mut cursor: u64 = 1;
        for &d in digits {
            let total = 3 * cells.len() + 1;
            let mut next = Vec::with_capacity(total);
            let spacer = 3 * cursor;
            next.extend(cells.iter().map(|m| 3 * m));
            if d == 0 {
                next.push(spacer);
                next.extend(cells.iter().map(|m| 3 * m + 1));
            } else {
                next.extend(cells.iter().map(|m| 3 * m + 1));
                next.push(spacer);
            }
            next.extend(cells.iter().map(|m| 3 * m + 2));
            cells = next;
            cursor = 3 * cursor + 1;
        }
        let mut position = vec![0u32; cells.len()];
        for (p, &c) in cells.iter().enumerate() {
            position[c as usize] = p as u32;
        }
        Self {
            depth: digits.len(),
            digits: digits.to_vec(),
            cells,
            position,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    /// `L_d`, the number of levels (and of cells).
    pub fn levels(&self) -> u64 {
        self.cells.len() as u64
    }

    /// Cells `< 3^d` come from the original interval, the rest are spacers.
    pub fn material_cells(&self) -> u64 {
        3u64.pow(self.depth as u32)
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn letter_of_cell(&self, cell: u64) -> Letter {
        if cell < self.material_cells() {
            Letter::T
        } else {
            Letter::S
        }
    }

    fn width(&self) -> Rational {
        Rational::new(BigInt::one(), BigInt::from(self.levels()))
    }

    /// Measure of the set where the map is defined.
    pub fn defined_measure(&self) -> Rational {
        Rational::one() - self.width()
    }

    /// Measure of the top level, where the stage map is undefined.
    pub fn undefined_measure(&self) -> Rational {
        self.width()
    }

    /// Pieces on the integer grid: `(lo, hi, shift)` in units of `1/L_d`,
    /// one per non-top level, in tower order.
    pub fn grid_pieces(&self) -> Vec<(u64, u64, i64)> {
        self.cells
            .windows(2)
            .map(|w| (w[0], w[0] + 1, w[1] as i64 - w[0] as i64))
            .collect()
    }

    /// One piece per non-top level, in tower order.
    pub fn pieces(&self) -> Vec<Piece> {
        let l = BigInt::from(self.levels());
        self.grid_pieces()
            .into_iter()
            .map(|(lo, hi, shift)| Piece {
                lo: Rational::new(BigInt::from(lo), l.clone()),
                hi: Rational::new(BigInt::from(hi), l.clone()),
                shift: Rational::new(BigInt::from(shift), l.clone()),
            })
            .collect()
    }

    /// Sources and images each tile their supports: sorted by left endpoint,
    /// consecutive intervals never overlap, all lie in `[0, 1]`, and their
    /// lengths add up to the defined measure. Everything is a multiple of
    /// `1/L_d`, so the check runs on integer numerators.
    pub fn pieces_partition_exactly(&self) -> bool {
        let l = self.levels() as i64;
        let pieces = self.grid_pieces();
        let defined = self.defined_measure() * BigInt::from(l);
        let check = |mut ivs: Vec<(i64, i64)>| {
            ivs.sort_unstable();
            let disjoint = ivs.windows(2).all(|w| w[0].1 <= w[1].0);
            let total: i64 = ivs.iter().map(|(a, b)| b - a).sum();
            let inside = ivs.iter().all(|&(a, b)| a >= 0 && b <= l);
            disjoint && inside && Rational::from_integer(total.into()) == defined
        };
        let sources = pieces.iter().map(|&(lo, hi, _)| (lo as i64, hi as i64)).collect();
        let images = pieces
            .iter()
            .map(|&(lo, hi, s)| (lo as i64 + s, hi as i64 + s))
            .collect();
        let lengths_match = pieces.iter().all(|&(lo, hi, _)| hi > lo);
        lengths_match && check(sources) && check(images)
    }

    fn level_of(&self, x: &Rational) -> Result<usize> {
        if x.is_negative() || *x >= Rational::one() {
            return Err(Error::OutsideSpace(format!("{} not in [0, 1)", fmt_rat(x))));
        }
        let cell = (x * BigInt::from(self.levels()))
            .floor()
            .to_integer()
            .to_usize()
            .expect("cell index fits");
        Ok(self.position[cell] as usize)
    }

    pub fn apply(&self, x: &Rational) -> Result<Rational> {
        let p = self.level_of(x)?;
        if p + 1 == self.cells.len() {
            return Err(Error::DepthExceeded { depth: self.depth });
        }
        let shift = self.cells[p + 1] as i64 - self.cells[p] as i64;
        Ok(x + Rational::new(BigInt::from(shift), BigInt::from(self.levels())))
    }

    pub fn apply_f64(&self, x: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::OutsideSpace(format!("{x} not in [0, 1)")));
        }
        let l = self.levels() as f64;
        let cell = ((x * l) as usize).min(self.cells.len() - 1);
        let p = self.position[cell] as usize;
        if p + 1 == self.cells.len() {
            return Err(Error::DepthExceeded { depth: self.depth });
        }
        let shift = self.cells[p + 1] as f64 - self.cells[p] as f64;
        Ok((x + shift / l).clamp(0.0, 1.0 - f64::EPSILON))
    }

    /// Letters read along the orbit of the base level for `L_d - 1` steps
    /// (the whole tower, including the top). The orbit is driven by the
    /// piece list on the integer grid.
    pub fn itinerary_from_base(&self) -> Result<Vec<Letter>> {
        let mut shift_at: Vec<Option<i64>> = vec![None; self.cells.len()];
        for (lo, _, shift) in self.grid_pieces() {
            shift_at[lo as usize] = Some(shift);
        }
        let mut x = self.cells[0] as i64;
        let mut out = Vec::with_capacity(self.cells.len());
        for step in 0..self.cells.len() {
            out.push(self.letter_of_cell(x as u64));
            if step + 1 < self.cells.len() {
                x += shift_at[x as usize].ok_or(Error::DepthExceeded { depth: self.depth })?;
            }
        }
        Ok(out)
    }

    /// Positions (word indices at this depth) of level `level` of stage `stage`.
    pub fn level_positions(&self, stage: usize, level: u64) -> Result<Vec<u64>> {
        if stage > self.depth {
            return Err(Error::DepthExceeded { depth: self.depth });
        }
        let len = stage_length(stage);
        if level >= len {
            return Err(Error::spec(
                "level",
                format!("stage {stage} has {len} levels, level {level} does not exist"),
            ));
        }
        let mut set = vec![level];
        let mut l = len;
        for &d in &self.digits[stage..] {
            let middle = l + u64::from(d == 0);
            let right = 2 * l + 1;
            set = set
                .iter()
                .flat_map(|&h| [h, h + middle, h + right])
                .collect();
            l = 3 * l + 1;
        }
        set.sort_unstable();
        Ok(set)
    }

    /// Exact centered autocorrelation of the indicator of a set of levels,
    /// `v(n) = (1/L) Σ_{p + n < L} g(p) g(p + n)` with `g = 1_H - |H|/L`:
    /// the correlation of the mean-zero level indicator along the finite
    /// tower. Lags `0..=max_lag`.
    pub fn level_autocorrelation(&self, positions: &[u64], max_lag: usize, centered: bool) -> Vec<Rational> {
        let l = self.levels() as usize;
        let words = l.div_ceil(64);
        let mut bits = vec![0u64; words];
        for &p in positions {
            bits[p as usize / 64] |= 1 << (p % 64);
        }
        let count = positions.len() as i128;
        let li = l as i128;
        // prefix counts for the two boundary sums
        let mut prefix = vec![0i128; l + 1];
        {
            let mut idx = 0usize;
            for p in 0..l {
                if idx < positions.len() && positions[idx] as usize == p {
                    idx += 1;
                }
                prefix[p + 1] = idx as i128;
            }
        }
        let denom = BigInt::from(li).pow(3);
        (0..=max_lag)
            .map(|n| {
                if n >= l {
                    return Rational::zero();
                }
                let overlap = shifted_overlap(&bits, n, l) as i128;
                let raw = li * li * overlap;
                if !centered {
                    return Rational::new(BigInt::from(overlap), BigInt::from(li));
                }
                let head = prefix[l - n];
                let tail = count - prefix[n];
                let value = raw - li * count * (head + tail) + count * count * (li - n as i128);
                Rational::new(BigInt::from(value), denom.clone())
            })
            .collect()
    }
}

/// `#{p < len - n : p ∈ H, p + n ∈ H}` for the bitset `H`.
fn shifted_overlap(bits: &[u64], n: usize, len: usize) -> u64 {
    let words = bits.len();
    let (ws, bs) = (n / 64, n % 64);
    let mut total = 0u64;
    for i in 0..words {
        let j = i + ws;
        if j >= words {
            break;
        }
        let mut shifted = bits[j] >> bs;
        if bs != 0 && j + 1 < words {
            shifted |= bits[j + 1] << (64 - bs);
        }
        let mut v = bits[i] & shifted;
        // keep p < len - n
        let lo = i * 64;
        let limit = len - n;
        if lo + 64 > limit {
            let keep = limit.saturating_sub(lo);
            v &= if keep >= 64 { u64::MAX } else { (1u64 << keep) - 1 };
        }
        total += v.count_ones() as u64;
    }
    total
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DyadicVerdict {
    IsomorphicFamily,
    DisjointFamily,
}

impl fmt::Display for DyadicVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DyadicVerdict::IsomorphicFamily => "isomorphic-family",
            DyadicVerdict::DisjointFamily => "disjoint-family",
        })
    }
}

/// `T_a` and `T_b` are isomorphic exactly when `|a - b|` is a dyadic
/// rational `k/2^l`; otherwise they are disjoint.
pub fn dyadic_equivalence(a: &Rank1Spec, b: &Rank1Spec) -> Result<DyadicVerdict> {
    match (a.a.exact(), b.a.exact()) {
        (Some(x), Some(y)) => {
            let d = (x - y).abs();
            Ok(if d.is_zero() || is_power_of_two(d.denom()) {
                DyadicVerdict::IsomorphicFamily
            } else {
                DyadicVerdict::DisjointFamily
            })
        }
        _ => {
            let n = a.depth.min(b.depth);
            let agree = match agreement_stage(a, b, n)? {
                Agreement::DifferAt(i) => i - 1,
                Agreement::AgreeThrough(n) => n,
            };
            Err(Error::Undecidable { agree_through: agree })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agreement {
    /// 1-based index of the first differing digit.
    DifferAt(usize),
    AgreeThrough(usize),
}

pub fn agreement_stage(a: &Rank1Spec, b: &Rank1Spec, max_stage: usize) -> Result<Agreement> {
    let da = a.a.digits(max_stage)?;
    let db = b.a.digits(max_stage)?;
    Ok(match da.iter().zip(&db).position(|(x, y)| x != y) {
        Some(i) => Agreement::DifferAt(i + 1),
        None => Agreement::AgreeThrough(max_stage),
    })
}

/// `T_a` on `[0, 1)` at a finite stage.
#[derive(Debug)]
pub struct Rank1Dynamics {
    map: Arc<Rank1Map>,
}

impl Rank1Dynamics {
    pub fn new(map: Rank1Map) -> Self {
        Self { map: Arc::new(map) }
    }
}

impl Dynamics for Rank1Dynamics {
    fn dim(&self) -> usize {
        1
    }

    fn apply(&self, x: &Point) -> Result<Point> {
        Ok(Point(vec![self.map.apply(&x[0])?]))
    }

    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.map.apply_f64(x[0])?])
    }

    fn affine_on(&self, _c: &Component) -> Option<AffineMap> {
        None
    }

    fn rank1(&self) -> Option<&Rank1Map> {
        Some(&self.map)
    }
}

/// `S(a, x) = (a, T_a x)` on `[0, 1]²`, the stage maps built lazily and
/// shared between parameters with the same digit prefix.
pub struct SkewRank1 {
    depth: usize,
    cache: Mutex<HashMap<Vec<u8>, Arc<Rank1Map>>>,
}

impl fmt::Debug for SkewRank1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SkewRank1(depth {})", self.depth)
    }
}

impl SkewRank1 {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn map_for(&self, digits: Vec<u8>) -> Arc<Rank1Map> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(digits)
            .or_insert_with_key(|d| Arc::new(Rank1Map::from_digits(d)))
            .clone()
    }
}

impl Dynamics for SkewRank1 {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &Point) -> Result<Point> {
        let map = self.map_for(binary_digits(&x[0], self.depth));
        Ok(Point(vec![x[0].clone(), map.apply(&x[1])?]))
    }

    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut a = x[0];
        let digits = (0..self.depth)
            .map(|_| {
                a *= 2.0;
                if a >= 1.0 {
                    a -= 1.0;
                    1
                } else {
                    0
                }
            })
            .collect();
        let map = self.map_for(digits);
        Ok(vec![x[0], map.apply_f64(x[1])?])
    }

    fn affine_on(&self, _c: &Component) -> Option<AffineMap> {
        None
    }
}

/// CSV of `(source-lo, source-hi, translation)` as `p/q` strings.
pub fn pieces_csv(map: &Rank1Map) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["source-lo", "source-hi", "translation"])?;
    for p in map.pieces() {
        w.write_record([fmt_rat(&p.lo), fmt_rat(&p.hi), fmt_rat(&p.shift)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn spec(a: Rational, depth: usize) -> Rank1Spec {
        Rank1Spec::exact(a, depth)
    }

    #[test]
    fn first_words() {
        assert_eq!(rank1_word(&spec(rat(0, 1), 3), 0).unwrap().word_text(), "T");
        assert_eq!(rank1_word(&spec(rat(1, 4), 3), 1).unwrap().word_text(), "T s T T");
        assert_eq!(rank1_word(&spec(rat(3, 4), 3), 1).unwrap().word_text(), "T T s T");
        assert!(matches!(
            rank1_word(&spec(rat(1, 4), 3), 4),
            Err(Error::DepthExceeded { depth: 3 })
        ));
    }

    #[test]
    fn binary_expansion_convention() {
        assert_eq!(binary_digits(&rat(1, 2), 4), vec![1, 0, 0, 0]);
        assert_eq!(binary_digits(&rat(1, 3), 6), vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(binary_digits(&rat(1, 1), 3), vec![1, 1, 1]);
        assert_eq!(binary_digits(&rat(0, 1), 3), vec![0, 0, 0]);
    }

    #[test]
    fn depth_one_map() {
        let m = rank1_map(&spec(rat(1, 4), 1)).unwrap();
        assert_eq!(m.levels(), 4);
        assert_eq!(m.defined_measure(), rat(3, 4));
        assert_eq!(m.pieces().len(), 3);
        assert!(m.pieces_partition_exactly());
        // a_1 = 0: left column, spacer, middle, right
        assert_eq!(m.cells(), &[0, 3, 1, 2]);
    }

    #[test]
    fn top_level_is_undefined() {
        let m = rank1_map(&spec(rat(1, 4), 2)).unwrap();
        let top = *m.cells().last().unwrap();
        let x = Rational::new(BigInt::from(top), BigInt::from(m.levels()));
        assert!(matches!(m.apply(&x), Err(Error::DepthExceeded { depth: 2 })));
    }

    #[test]
    fn overlap_counts_match_naive() {
        let m = rank1_map(&spec(rat(1, 3), 4)).unwrap();
        let h = m.level_positions(1, 0).unwrap();
        let l = m.levels() as usize;
        let set: std::collections::HashSet<u64> = h.iter().copied().collect();
        let mut bits = vec![0u64; l.div_ceil(64)];
        for &p in &h {
            bits[p as usize / 64] |= 1 << (p % 64);
        }
        for n in [0usize, 1, 5, 63, 64, 65, 100] {
            let naive = (0..l - n)
                .filter(|&p| set.contains(&(p as u64)) && set.contains(&((p + n) as u64)))
                .count() as u64;
            assert_eq!(shifted_overlap(&bits, n, l), naive, "lag {n}");
        }
    }

    #[test]
    fn centered_autocorrelation_matches_direct_sum() {
        let m = rank1_map(&spec(rat(1, 4), 3)).unwrap();
        let h = m.level_positions(1, 2).unwrap();
        let l = m.levels() as i64;
        let mu = rat(h.len() as i64, l);
        let g: Vec<Rational> = (0..l)
            .map(|p| {
                let ind = if h.contains(&(p as u64)) { rat(1, 1) } else { rat(0, 1) };
                ind - &mu
            })
            .collect();
        let v = m.level_autocorrelation(&h, 10, true);
        for n in 0..=10usize {
            let direct: Rational = (0..(l as usize - n)).map(|p| &g[p] * &g[p + n]).sum::<Rational>() / rat(l, 1);
            assert_eq!(v[n], direct, "lag {n}");
        }
    }
}
