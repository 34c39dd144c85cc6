//! Individual operator components `H_i` and gradient components `grad g_i`.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::linalg::DenseMatrix;
use crate::point::Point;

/// One summand of a finite-sum operator.
///
/// `eval` is the exact mapping. `sample` is a draw from the component's own
/// stochastic oracle (zeroth-order estimators override it); additive noise
/// from a [`crate::oracle::NoiseModel`] is applied on top of `sample`.
pub trait Component: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Point) -> Point;

    fn sample(&self, x: &Point, _rng: &mut dyn RngCore) -> Point {
        self.eval(x)
    }

    /// Whether `sample` differs from `eval`.
    fn is_stochastic(&self) -> bool {
        false
    }

    /// Function value, for gradient components of a convex `g_i`.
    fn value(&self, _x: &Point) -> Option<f64> {
        None
    }
}

pub type SharedComponent = Arc<dyn Component>;

/// `x -> A x + b`
#[derive(Clone, Debug, PartialEq)]
pub struct AffineComponent {
    pub matrix: DenseMatrix,
    pub offset: Point,
}

impl AffineComponent {
    pub fn new(matrix: DenseMatrix, offset: Point) -> Self {
        assert_eq!(matrix.rows(), matrix.cols(), "affine component must be square");
        assert_eq!(matrix.rows(), offset.dim());
        AffineComponent { matrix, offset }
    }

    pub fn linear(matrix: DenseMatrix) -> Self {
        let n = matrix.rows();
        Self::new(matrix, Point::zeros(n))
    }
}

impl Component for AffineComponent {
    fn dim(&self) -> usize {
        self.offset.dim()
    }

    fn eval(&self, x: &Point) -> Point {
        let mut out = Point::from_vec(self.matrix.matvec(x));
        out.add_assign(&self.offset);
        out
    }
}

/// Gradient of `g(x) = 1/2 x^T Q x + c^T x + k` with `Q` symmetric PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticComponent {
    pub hessian: DenseMatrix,
    pub linear: Point,
    pub constant: f64,
}

impl QuadraticComponent {
    pub fn new(hessian: DenseMatrix, linear: Point, constant: f64) -> Self {
        assert_eq!(hessian.rows(), hessian.cols());
        assert_eq!(hessian.rows(), linear.dim());
        QuadraticComponent {
            hessian,
            linear,
            constant,
        }
    }
}

impl Component for QuadraticComponent {
    fn dim(&self) -> usize {
        self.linear.dim()
    }

    fn eval(&self, x: &Point) -> Point {
        let mut out = Point::from_vec(self.hessian.matvec(x));
        out.add_assign(&self.linear);
        out
    }

    fn value(&self, x: &Point) -> Option<f64> {
        let qx = Point::from_vec(self.hessian.matvec(x));
        Some(0.5 * x.dot(&qx) + self.linear.dot(x) + self.constant)
    }
}

type MapFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type ValueFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Closure-backed component.
#[derive(Clone)]
pub struct FnComponent {
    dim: usize,
    map: MapFn,
    value: Option<ValueFn>,
}

impl fmt::Debug for FnComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnComponent(dim={}, has_value={})", self.dim, self.value.is_some())
    }
}

impl FnComponent {
    pub fn new(dim: usize, map: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        FnComponent {
            dim,
            map: Arc::new(map),
            value: None,
        }
    }

    pub fn gradient(
        dim: usize,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        FnComponent {
            dim,
            map: Arc::new(grad),
            value: Some(Arc::new(value)),
        }
    }
}

impl Component for FnComponent {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Point) -> Point {
        (self.map)(x)
    }

    fn value(&self, x: &Point) -> Option<f64> {
        self.value.as_ref().map(|v| v(x))
    }
}

/// `x -> c * x`, handy for tests and for the perturbation term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub factor: f64,
}

impl Component for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Point) -> Point {
        x.scale(self.factor)
    }

    fn value(&self, x: &Point) -> Option<f64> {
        Some(0.5 * self.factor * x.norm_sq())
    }
}

/// `inner(x) + mu * x`
pub struct PerturbedComponent {
    pub inner: SharedComponent,
    pub mu: f64,
}

impl Component for PerturbedComponent {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &Point) -> Point {
        let mut out = self.inner.eval(x);
        out.axpy(self.mu, x);
        out
    }

    fn sample(&self, x: &Point, rng: &mut dyn RngCore) -> Point {
        let mut out = self.inner.sample(x, rng);
        out.axpy(self.mu, x);
        out
    }

    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }

    fn value(&self, x: &Point) -> Option<f64> {
        self.inner.value(x).map(|v| v + 0.5 * self.mu * x.norm_sq())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_and_gradient() {
        let q = QuadraticComponent::new(
            DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            Point::new(vec![1.0, -1.0]).unwrap(),
            0.5,
        );
        let x = Point::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(q.eval(&x).as_slice(), &[3.0, 1.0]);
        // 0.5 * (2 + 4) + (1 - 2) + 0.5
        assert_eq!(q.value(&x), Some(2.5));
    }

    #[test]
    fn perturbed_adds_mu_x() {
        let base: SharedComponent = Arc::new(ScaledIdentity { dim: 2, factor: 2.0 });
        let p = PerturbedComponent { inner: base, mu: 0.5 };
        let x = Point::new(vec![1.0, -2.0]).unwrap();
        assert_eq!(p.eval(&x).as_slice(), &[2.5, -5.0]);
    }
}
