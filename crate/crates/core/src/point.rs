//! Dense real vectors used for every iterate and operator value.

use std::ops::{Deref, Index};

use crate::error::{Result, VrviError};

/// A point in R^n.
///
/// `Point::new` rejects NaN/Inf. Arithmetic helpers do not re-check, solvers
/// verify finiteness of every iterate they store.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(VrviError::NonFinite { index });
        }
        Ok(Point(coords))
    }

    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Point(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, factor: f64) -> Point {
        Point(self.0.iter().map(|a| a * factor).collect())
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &Point) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn add_assign(&mut self, other: &Point) {
        self.axpy(1.0, other);
    }

    pub fn scale_mut(&mut self, factor: f64) {
        for a in &mut self.0 {
            *a *= factor;
        }
    }

    /// `a * p + b * q`
    pub fn lincomb(a: f64, p: &Point, b: f64, q: &Point) -> Point {
        debug_assert_eq!(p.dim(), q.dim());
        Point(p.0.iter().zip(&q.0).map(|(x, y)| a * x + b * y).collect())
    }

    /// `a * p + b * q + c * r`
    pub fn lincomb3(a: f64, p: &Point, b: f64, q: &Point, c: f64, r: &Point) -> Point {
        debug_assert!(p.dim() == q.dim() && q.dim() == r.dim());
        Point(
            p.0.iter()
                .zip(&q.0)
                .zip(&r.0)
                .map(|((x, y), z)| a * x + b * y + c * z)
                .collect(),
        )
    }

    /// Concatenates two points, used for primal/dual stacking.
    pub fn concat(&self, other: &Point) -> Point {
        let mut v = Vec::with_capacity(self.dim() + other.dim());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Point(v)
    }

    pub fn slice(&self, start: usize, end: usize) -> Point {
        Point(self.0[start..end].to_vec())
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = VrviError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Point::new(vec![1.0, f64::NAN]),
            Err(VrviError::NonFinite { index: 1 })
        ));
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Point::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn basic_arithmetic() {
        let p = Point::new(vec![3.0, 4.0]).unwrap();
        let q = Point::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(p.norm(), 5.0);
        assert_eq!(p.dot(&q), 3.0);
        assert_eq!(p.dist_sq(&q), 20.0);
        assert_eq!(Point::lincomb(2.0, &p, -1.0, &q).as_slice(), &[5.0, 8.0]);
        let mut r = p.clone();
        r.axpy(0.5, &q);
        assert_eq!(r.as_slice(), &[3.5, 4.0]);
        assert_eq!(p.concat(&q).as_slice(), &[3.0, 4.0, 1.0, 0.0]);
        assert_eq!(p.concat(&q).slice(1, 3).as_slice(), &[4.0, 1.0]);
    }
}
