//! Affine maps of tori `x ↦ Ax + b (mod 1)` with integer `A` and rational `b`.
//!
//! Characters pull back to characters under such maps:
//! `e(⟨k, Ax + b⟩) = e(⟨k, b⟩) · e(⟨Aᵀk, x⟩)`, which is what makes exact
//! integration of every system in this crate possible.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::{frac, Rational};
use crate::error::{Error, Result};
use crate::system::{Freq, Point};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc: i64 = 0;
                for l in 0..self.cols {
                    let t = self
                        .get(i, l)
                        .checked_mul(other.get(l, j))
                        .ok_or(Error::Overflow("multiplying integer matrices"))?;
                    acc = acc
                        .checked_add(t)
                        .ok_or(Error::Overflow("multiplying integer matrices"))?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `Aᵀk`.
    pub fn transpose_apply(&self, k: &[i64]) -> Result<Vec<i64>> {
        assert_eq!(k.len(), self.rows, "frequency arity");
        let mut out = vec![0i64; self.cols];
        for (i, &ki) in k.iter().enumerate() {
            if ki == 0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let t = ki
                    .checked_mul(self.get(i, j))
                    .ok_or(Error::Overflow("pulling back a character"))?;
                *o = o
                    .checked_add(t)
                    .ok_or(Error::Overflow("pulling back a character"))?;
            }
        }
        Ok(out)
    }

    pub fn block_diag(blocks: &[&IntMatrix]) -> IntMatrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = IntMatrix::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out.set(r0 + i, c0 + j, b.get(i, j));
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> IntMatrix {
        let mut out = IntMatrix::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..self.cols {
                out.set(r, j, self.get(i, j));
            }
        }
        out
    }

    /// Integer inverse of a unimodular square matrix.
    pub fn inverse(&self) -> Option<IntMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        let mut a: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                let mut row: Vec<Rational> = (0..n)
                    .map(|j| Rational::from_integer(BigInt::from(self.get(i, j))))
                    .collect();
                row.extend((0..n).map(|j| {
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                }));
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, pivot);
            let p = a[col][col].clone();
            for v in a[col].iter_mut() {
                *v = &*v / &p;
            }
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    let pivot_row = a[col].clone();
                    for (v, pv) in a[r].iter_mut().zip(pivot_row.iter()) {
                        *v = &*v - &f * pv;
                    }
                }
            }
        }
        let mut out = IntMatrix::zeros(n, n);
        for (i, row) in a.iter().enumerate() {
            for j in 0..n {
                let v = &row[n + j];
                if !v.is_integer() {
                    return None;
                }
                out.set(i, j, v.to_integer().to_i64()?);
            }
        }
        Some(out)
    }
}

/// `x ↦ Ax + b (mod 1)` from `T^cols` to `T^rows`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineMap {
    pub matrix: IntMatrix,
    pub shift: Vec<Rational>,
}

impl AffineMap {
    pub fn new(matrix: IntMatrix, shift: Vec<Rational>) -> Self {
        assert_eq!(matrix.rows(), shift.len(), "shift arity");
        let shift = shift.iter().map(frac).collect();
        Self { matrix, shift }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(IntMatrix::identity(n), vec![Rational::zero(); n])
    }

    pub fn translation(shift: Vec<Rational>) -> Self {
        Self::new(IntMatrix::identity(shift.len()), shift)
    }

    pub fn dim_in(&self) -> usize {
        self.matrix.cols()
    }

    pub fn dim_out(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, x: &[Rational]) -> Point {
        assert_eq!(x.len(), self.dim_in(), "point arity");
        let coords = (0..self.dim_out())
            .map(|i| {
                let mut acc = self.shift[i].clone();
                for (j, xj) in x.iter().enumerate() {
                    let a = self.matrix.get(i, j);
                    if a != 0 {
                        acc += xj * BigInt::from(a);
                    }
                }
                frac(&acc)
            })
            .collect();
        Point(coords)
    }

    pub fn shift_f64(&self) -> Vec<f64> {
        self.shift.iter().map(crate::arith::number::to_f64).collect()
    }

    /// Floating-point image; `shift` is [`AffineMap::shift_f64`], passed in so
    /// hot loops convert it once.
    pub fn apply_f64(&self, x: &[f64], shift: &[f64]) -> Vec<f64> {
        (0..self.dim_out())
            .map(|i| {
                let mut acc = shift[i];
                for (j, xj) in x.iter().enumerate() {
                    acc += self.matrix.get(i, j) as f64 * xj;
                }
                acc.rem_euclid(1.0)
            })
            .collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineMap) -> Result<AffineMap> {
        let matrix = self.matrix.mul(&other.matrix)?;
        let moved = self.apply_linear(&other.shift);
        let shift = moved
            .iter()
            .zip(&self.shift)
            .map(|(m, s)| m + s)
            .collect();
        Ok(AffineMap::new(matrix, shift))
    }

    fn apply_linear(&self, x: &[Rational]) -> Vec<Rational> {
        (0..self.dim_out())
            .map(|i| {
                x.iter()
                    .enumerate()
                    .fold(Rational::zero(), |acc, (j, xj)| {
                        acc + xj * BigInt::from(self.matrix.get(i, j))
                    })
            })
            .collect()
    }

    /// `e(⟨k, ·⟩) ∘ self = e(phase) · e(⟨k', ·⟩)`; returns `(k', phase)`.
    pub fn pullback(&self, k: &Freq) -> Result<(Freq, Rational)> {
        if k.len() != self.dim_out() {
            return Err(Error::Arity {
                expected: self.dim_out(),
                got: k.len(),
            });
        }
        let phase = k
            .iter()
            .zip(&self.shift)
            .fold(Rational::zero(), |acc, (&ki, b)| acc + b * BigInt::from(ki));
        let pulled = self.matrix.transpose_apply(k)?;
        Ok((Freq(pulled), frac(&phase)))
    }

    pub fn inverse(&self) -> Option<AffineMap> {
        let inv = self.matrix.inverse()?;
        let inv_map = AffineMap::new(inv, vec![Rational::zero(); self.dim_in()]);
        let back = inv_map.apply_linear(&self.shift);
        let shift = back.into_iter().map(|v| -v).collect();
        Some(AffineMap::new(inv_map.matrix, shift))
    }

    pub fn block_diag(maps: &[&AffineMap]) -> AffineMap {
        let mats: Vec<&IntMatrix> = maps.iter().map(|m| &m.matrix).collect();
        let shift = maps.iter().flat_map(|m| m.shift.iter().cloned()).collect();
        AffineMap::new(IntMatrix::block_diag(&mats), shift)
    }

    /// `x ↦ (f_1(x), …, f_r(x))` for maps sharing a domain.
    pub fn stack(maps: &[&AffineMap]) -> AffineMap {
        let cols = maps.first().map_or(0, |m| m.dim_in());
        assert!(maps.iter().all(|m| m.dim_in() == cols), "stacked maps share a domain");
        let rows: Vec<Vec<i64>> = maps
            .iter()
            .flat_map(|m| (0..m.dim_out()).map(move |i| m.matrix.row(i).to_vec()))
            .collect();
        let matrix = if rows.is_empty() {
            IntMatrix::zeros(0, cols)
        } else {
            IntMatrix::from_rows(rows)
        };
        let shift = maps.iter().flat_map(|m| m.shift.iter().cloned()).collect();
        AffineMap::new(matrix, shift)
    }

    /// Coordinate permutation: output `i` is input `perm[i]`.
    pub fn permutation(perm: &[usize]) -> AffineMap {
        let mut m = IntMatrix::zeros(perm.len(), perm.len());
        for (i, &j) in perm.iter().enumerate() {
            m.set(i, j, 1);
        }
        AffineMap::new(m, vec![Rational::zero(); perm.len()])
    }

    pub fn select_rows(&self, idx: &[usize]) -> AffineMap {
        AffineMap::new(
            self.matrix.select_rows(idx),
            idx.iter().map(|&i| self.shift[i].clone()).collect(),
        )
    }

    /// Square maps with `A = I`.
    pub fn is_translation(&self) -> bool {
        self.matrix.rows() == self.matrix.cols()
            && self.matrix == IntMatrix::identity(self.matrix.rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    fn twist() -> AffineMap {
        AffineMap::new(
            IntMatrix::from_rows(vec![vec![1, 0], vec![1, 1]]),
            vec![rat(0, 1), rat(1, 5)],
        )
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = twist();
        let inv = t.inverse().unwrap();
        assert_eq!(t.compose(&inv).unwrap(), AffineMap::identity(2));
        assert_eq!(inv.compose(&t).unwrap(), AffineMap::identity(2));
    }

    #[test]
    fn non_unimodular_has_no_integer_inverse() {
        let m = IntMatrix::from_rows(vec![vec![2, 0], vec![0, 1]]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn pullback_matches_pointwise_evaluation() {
        let t = twist();
        let k = Freq(vec![2, -3]);
        let (k2, phase) = t.pullback(&k).unwrap();
        let x = vec![rat(1, 7), rat(3, 11)];
        let tx = t.apply(&x);
        let lhs: Rational = k.iter().zip(tx.iter()).map(|(&a, b)| b * BigInt::from(a)).sum();
        let rhs: Rational = phase
            + k2.iter()
                .zip(x.iter())
                .map(|(&a, b)| b * BigInt::from(a))
                .sum::<Rational>();
        assert_eq!(frac(&lhs), frac(&rhs));
    }
}
