//! The composite VI instance `F = sum_i H_i + sum_i grad g_i` over a closed convex set.

use crate::error::{check_dim, Result, VrviError};
use crate::oracle::{ComponentFamily, NoiseModel};
use crate::point::Point;
use crate::sets::ConstraintSet;

#[derive(Clone, Debug)]
pub struct CompositeVIProblem {
    pub h: ComponentFamily,
    pub g: ComponentFamily,
    pub set: ConstraintSet,
    /// Strong monotonicity modulus of `H`, if known.
    pub mu_h: Option<f64>,
    pub noise_h: NoiseModel,
    pub noise_g: NoiseModel,
    /// Diameter cap used when the set itself is unbounded.
    pub diameter_cap: Option<f64>,
}

impl CompositeVIProblem {
    pub fn new(h: ComponentFamily, g: ComponentFamily, set: ConstraintSet) -> Result<Self> {
        check_dim(set.dim(), h.dim())?;
        check_dim(set.dim(), g.dim())?;
        if h.is_empty() && g.is_empty() {
            return Err(VrviError::InvalidArgument("problem has no components".into()));
        }
        Ok(CompositeVIProblem {
            h,
            g,
            set,
            mu_h: None,
            noise_h: NoiseModel::none(),
            noise_g: NoiseModel::none(),
            diameter_cap: None,
        })
    }

    pub fn with_mu_h(mut self, mu_h: f64) -> Self {
        self.mu_h = Some(mu_h);
        self
    }

    pub fn with_noise(mut self, noise_h: NoiseModel, noise_g: NoiseModel) -> Self {
        self.noise_h = noise_h;
        self.noise_g = noise_g;
        self
    }

    pub fn with_diameter_cap(mut self, cap: f64) -> Self {
        self.diameter_cap = Some(cap);
        self
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn m1(&self) -> usize {
        self.h.len()
    }

    pub fn m2(&self) -> usize {
        self.g.len()
    }

    pub fn l_h(&self) -> f64 {
        self.h.total_lipschitz()
    }

    pub fn l_g(&self) -> f64 {
        self.g.total_lipschitz()
    }

    /// Set diameter, falling back to the user cap.
    pub fn diameter(&self) -> Option<f64> {
        self.set.diameter().or(self.diameter_cap)
    }

    pub fn h_sum(&self, x: &Point) -> Point {
        self.h.eval_sum(x)
    }

    pub fn g_grad(&self, x: &Point) -> Point {
        self.g.eval_sum(x)
    }

    /// Exact `F(x) = H(x) + grad g(x)`.
    pub fn operator(&self, x: &Point) -> Point {
        let mut out = self.h.eval_sum(x);
        out.add_assign(&self.g.eval_sum(x));
        out
    }

    /// `g(x)`; 0 for an empty g-family, `None` if some component has no value.
    pub fn g_value(&self, x: &Point) -> Option<f64> {
        self.g.value_sum(x)
    }

    pub fn project(&self, p: &Point) -> Point {
        self.set.project_unchecked(p)
    }

    /// Natural residual `||x - P(x - F(x))||`, zero exactly at VI solutions.
    pub fn natural_residual(&self, x: &Point) -> f64 {
        let f = self.operator(x);
        self.project(&x.sub(&f)).dist(x)
    }
}
