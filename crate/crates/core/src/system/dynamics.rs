//! Concrete maps: translations, fiber rotations, group extensions, products.

use std::sync::Arc;

use num_traits::Zero;

use crate::affine::{AffineMap, IntMatrix};
use crate::arith::number::to_f64;
use crate::arith::{frac, Rational};
use crate::cocycle::Cocycle;
use crate::error::Result;
use crate::measure::Component;
use crate::system::{translate, Dynamics, Point};

/// `x ↦ x + shift`; the identity when `shift = 0`.
#[derive(Debug)]
pub struct Translation {
    shift: Vec<Rational>,
    shift_f64: Vec<f64>,
}

impl Translation {
    pub fn new(shift: Vec<Rational>) -> Self {
        let shift: Vec<Rational> = shift.iter().map(frac).collect();
        let shift_f64 = shift.iter().map(to_f64).collect();
        Self { shift, shift_f64 }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(vec![Rational::zero(); dim])
    }
}

impl Dynamics for Translation {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn apply(&self, x: &Point) -> Result<Point> {
        Ok(translate(x, &self.shift))
    }

    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter()
            .zip(&self.shift_f64)
            .map(|(a, b)| (a + b).rem_euclid(1.0))
            .collect())
    }

    fn affine_on(&self, _c: &Component) -> Option<AffineMap> {
        Some(AffineMap::translation(self.shift.clone()))
    }
}

/// `(x, y_1, …, y_m) ↦ (x, y_1 + β(x) + c_1, …, y_m + β(x) + c_m)`.
///
/// With `m = 1, c = 0` this is the twist `(x, y) ↦ (x, y + β(x))`.
#[derive(Debug)]
pub struct FiberRotation {
    beta: Cocycle,
    offsets: Vec<Rational>,
}

impl FiberRotation {
    pub fn new(beta: Cocycle, offsets: Vec<Rational>) -> Self {
        Self {
            beta,
            offsets: offsets.iter().map(frac).collect(),
        }
    }

    fn matrix(&self, slope: i64) -> IntMatrix {
        let n = self.offsets.len() + 1;
        let mut m = IntMatrix::identity(n);
        for i in 1..n {
            m.set(i, 0, slope);
        }
        m
    }
}

impl Dynamics for FiberRotation {
    fn dim(&self) -> usize {
        self.offsets.len() + 1
    }

    fn apply(&self, x: &Point) -> Result<Point> {
        let b = self.beta.eval(&x[0])?;
        let mut out = vec![x[0].clone()];
        for (y, c) in x[1..].iter().zip(&self.offsets) {
            out.push(frac(&(y + &b + c)));
        }
        Ok(Point(out))
    }

    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let b = self.beta.eval_f64(x[0])?;
        let mut out = vec![x[0]];
        for (y, c) in x[1..].iter().zip(&self.offsets) {
            out.push((y + b + to_f64(c)).rem_euclid(1.0));
        }
        Ok(out)
    }

    fn affine_on(&self, c: &Component) -> Option<AffineMap> {
        if let Some((q, offset)) = self.beta.integer_affine() {
            let mut shift = vec![Rational::zero()];
            shift.extend(self.offsets.iter().map(|o| o + offset));
            return Some(AffineMap::new(self.matrix(q), shift));
        }
        let x0 = c.constant_coordinate(0)?;
        let b = self.beta.eval(&x0).ok()?;
        let mut shift = vec![Rational::zero()];
        shift.extend(self.offsets.iter().map(|o| o + &b));
        Some(AffineMap::translation(shift))
    }
}

/// Group extension `(x, g) ↦ (Tx, g + φ(x₀))` where `x₀` is the first base
/// coordinate and the group is the circle or one of its finite subgroups.
#[derive(Debug)]
pub struct SkewProduct {
    base: Arc<dyn Dynamics>,
    cocycle: Cocycle,
}

impl SkewProduct {
    pub fn new(base: Arc<dyn Dynamics>, cocycle: Cocycle) -> Self {
        Self { base, cocycle }
    }
}

impl Dynamics for SkewProduct {
    fn dim(&self) -> usize {
        self.base.dim() + 1
    }

    fn apply(&self, x: &Point) -> Result<Point> {
        let b = self.base.dim();
        let phi = self.cocycle.eval(&x[0])?;
        let mut out = self.base.apply(&Point(x[..b].to_vec()))?.0;
        out.push(frac(&(&x[b] + phi)));
        Ok(Point(out))
    }

    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let b = self.base.dim();
        let phi = self.cocycle.eval_f64(x[0])?;
        let mut out = self.base.apply_f64(&x[..b])?;
        out.push((x[b] + phi).rem_euclid(1.0));
        Ok(out)
    }

    fn affine_on(&self, c: &Component) -> Option<AffineMap> {
        let b = self.base.dim();
        let base_rows: Vec<usize> = (0..b).collect();
        let base_map = self.base.affine_on(&c.marginal(&base_rows))?;
        let mut m = IntMatrix::zeros(b + 1, b + 1);
        for i in 0..b {
            for j in 0..b {
                m.set(i, j, base_map.matrix.get(i, j));
            }
        }
        m.set(b, b, 1);
        let mut shift = base_map.shift.clone();
        if let Some((q, offset)) = self.cocycle.integer_affine() {
            m.set(b, 0, q);
            shift.push(offset.clone());
        } else {
            let x0 = c.constant_coordinate(0)?;
            shift.push(self.cocycle.eval(&x0).ok()?);
        }
        Some(AffineMap::new(m, shift))
    }
}

/// Coordinatewise product `T_1 × … × T_r` on concatenated coordinates.
#[derive(Debug)]
pub struct ProductDynamics {
    factors: Vec<Arc<dyn Dynamics>>,
}

impl ProductDynamics {
    pub fn new(factors: Vec<Arc<dyn Dynamics>>) -> Self {
        Self { factors }
    }

    fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.factors
            .iter()
            .map(|f| {
                let r = start..start + f.dim();
                start = r.end;
                r
            })
            .collect()
    }
}

impl Dynamics for ProductDynamics {
    fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    fn apply(&self, x: &Point) -> Result<Point> {
        let mut out = Vec::with_capacity(x.len());
        for (f, r) in self.factors.iter().zip(self.ranges()) {
            out.extend(f.apply(&Point(x[r].to_vec()))?.0);
        }
        Ok(Point(out))
    }

    fn apply_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len());
        for (f, r) in self.factors.iter().zip(self.ranges()) {
            out.extend(f.apply_f64(&x[r])?);
        }
        Ok(out)
    }

    fn affine_on(&self, c: &Component) -> Option<AffineMap> {
        let maps = self
            .factors
            .iter()
            .zip(self.ranges())
            .map(|(f, r)| f.affine_on(&c.marginal(&r.collect::<Vec<_>>())))
            .collect::<Option<Vec<_>>>()?;
        let refs: Vec<&AffineMap> = maps.iter().collect();
        Some(AffineMap::block_diag(&refs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::measure::Factor;

    #[test]
    fn twist_affine_form_matches_pointwise() {
        let t = FiberRotation::new(Cocycle::identity(), vec![rat(0, 1)]);
        let c = Component::product(rat(1, 1), vec![Factor::Haar, Factor::Haar]);
        let m = t.affine_on(&c).unwrap();
        let x = Point(vec![rat(1, 3), rat(1, 2)]);
        assert_eq!(m.apply(&x), t.apply(&x).unwrap());
        assert_eq!(t.apply(&x).unwrap(), Point(vec![rat(1, 3), rat(5, 6)]));
    }

    #[test]
    fn non_integer_slope_needs_constant_base() {
        let beta = Cocycle::Affine {
            slope: rat(1, 2),
            offset: rat(0, 1),
        };
        let t = FiberRotation::new(beta, vec![rat(0, 1)]);
        let haar = Component::product(rat(1, 1), vec![Factor::Haar, Factor::Haar]);
        assert!(t.affine_on(&haar).is_none());
        let atom = Component::product(rat(1, 1), vec![Factor::Dirac(rat(1, 2)), Factor::Haar]);
        let m = t.affine_on(&atom).unwrap();
        assert_eq!(m.shift, vec![rat(0, 1), rat(1, 4)]);
    }
}
