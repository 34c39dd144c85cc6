//! Neyman-Pearson classification:
//! `min (1/n0) sum_j phi(x^T xi_0j)  s.t.  (1/n1) sum_j phi(-x^T xi_1j) <= r1,  ||x|| <= lambda`.

use std::sync::Arc;

use crate::component::{FnComponent, SharedComponent};
use crate::constrained::{ConstrainedProgram, FnConstraint, SharedConstraint};
use crate::error::{Result, VrviError};
use crate::linalg::DenseMatrix;
use crate::oracle::ComponentFamily;
use crate::point::Point;
use crate::rng::{stream, stream_rng};
use crate::sets::{gaussian, unit_sphere, ConstraintSet};

use super::libsvm::SparseDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    SmoothedHinge,
    Logistic,
}

impl Loss {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Loss::SmoothedHinge => {
                if t <= 0.0 {
                    0.5 - t
                } else if t < 1.0 {
                    0.5 * (1.0 - t) * (1.0 - t)
                } else {
                    0.0
                }
            }
            // ln(1 + e^{-t}) without overflow
            Loss::Logistic => (-t).max(0.0) + (-t.abs()).exp().ln_1p(),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Loss::SmoothedHinge => (t.clamp(0.0, 1.0)) - 1.0,
            Loss::Logistic => {
                if t >= 0.0 {
                    let e = (-t).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + t.exp())
                }
            }
        }
    }

    /// Bound on `phi''`.
    pub fn curvature(self) -> f64 {
        match self {
            Loss::SmoothedHinge => 1.0,
            Loss::Logistic => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::SmoothedHinge => "smoothed_hinge",
            Loss::Logistic => "logistic",
        }
    }

    pub fn from_name(s: &str) -> Option<Loss> {
        match s {
            "smoothed_hinge" | "hinge" => Some(Loss::SmoothedHinge),
            "logistic" => Some(Loss::Logistic),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpSpec {
    pub n_features: usize,
    pub n0: usize,
    pub n1: usize,
    /// Number of constraint blocks.
    pub m1: usize,
    /// Number of objective blocks.
    pub m2: usize,
    pub loss: Loss,
    pub lambda: f64,
    pub r1: f64,
    pub seed: u64,
    /// Distance of each class mean from the origin.
    pub separation: f64,
}

impl Default for NpSpec {
    fn default() -> Self {
        NpSpec {
            n_features: 50,
            n0: 200,
            n1: 200,
            m1: 10,
            m2: 10,
            loss: Loss::SmoothedHinge,
            lambda: 5.0,
            r1: 0.1,
            seed: 1,
            separation: 1.0,
        }
    }
}

/// Data for one NP program; `class0` feeds the objective, `class1` the constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct NpInstance {
    pub spec: NpSpec,
    pub class0: Vec<Point>,
    pub class1: Vec<Point>,
}

fn blocks(n: usize, m: usize) -> Vec<std::ops::Range<usize>> {
    (0..m).map(|b| b * n / m..(b + 1) * n / m).collect()
}

impl NpInstance {
    pub fn dim(&self) -> usize {
        self.spec.n_features
    }

    pub fn objective_value(&self, x: &Point) -> f64 {
        let n0 = self.class0.len() as f64;
        self.class0
            .iter()
            .map(|xi| self.spec.loss.value(x.dot(xi)))
            .sum::<f64>()
            / n0
    }

    /// `(1/n1) sum_j phi(-x^T xi_1j) - r1`
    pub fn constraint_value(&self, x: &Point) -> f64 {
        let n1 = self.class1.len() as f64;
        self.class1
            .iter()
            .map(|xi| self.spec.loss.value(-x.dot(xi)))
            .sum::<f64>()
            / n1
            - self.spec.r1
    }

    pub fn program(&self) -> Result<ConstrainedProgram> {
        let n = self.dim();
        let loss = self.spec.loss;
        let c = loss.curvature();
        let n0 = self.class0.len() as f64;
        let n1 = self.class1.len() as f64;

        let mut comps: Vec<SharedComponent> = Vec::new();
        let mut lips = Vec::new();
        for r in blocks(self.class0.len(), self.spec.m2) {
            let data: Arc<Vec<Point>> = Arc::new(self.class0[r].to_vec());
            let l = c * data.iter().map(|xi| xi.norm_sq()).sum::<f64>() / n0;
            let (dv, dg) = (data.clone(), data);
            comps.push(Arc::new(FnComponent::gradient(
                n,
                move |x| dv.iter().map(|xi| loss.value(x.dot(xi))).sum::<f64>() / n0,
                move |x: &Point| {
                    let mut g = Point::zeros(n);
                    for xi in dg.iter() {
                        g.axpy(loss.derivative(x.dot(xi)) / n0, xi);
                    }
                    g
                },
            )));
            lips.push(l.max(f64::MIN_POSITIVE));
        }
        let objective = ComponentFamily::new(n, comps, lips)?;

        let share = self.spec.r1 / self.spec.m1 as f64;
        let mut cons: Vec<SharedConstraint> = Vec::new();
        for r in blocks(self.class1.len(), self.spec.m1) {
            let data: Arc<Vec<Point>> = Arc::new(self.class1[r].to_vec());
            let jac_lip = c * data.iter().map(|xi| xi.norm_sq()).sum::<f64>() / n1;
            let jac_bound = data.iter().map(|xi| xi.norm()).sum::<f64>() / n1;
            let (dv, dj) = (data.clone(), data);
            let blk = FnConstraint::new(
                n,
                1,
                move |x| {
                    Point::from_vec(vec![
                        dv.iter().map(|xi| loss.value(-x.dot(xi))).sum::<f64>() / n1 - share,
                    ])
                },
                move |x| {
                    let mut row = Point::zeros(n);
                    for xi in dj.iter() {
                        row.axpy(-loss.derivative(-x.dot(xi)) / n1, xi);
                    }
                    DenseMatrix::from_row_major(1, n, row.into_vec()).expect("finite Jacobian")
                },
            )
            .with_smoothness(jac_lip, jac_bound);
            cons.push(Arc::new(blk));
        }
        ConstrainedProgram::new(objective, cons, ConstraintSet::ball(Point::zeros(n), self.spec.lambda)?)
    }
}

/// Builds an NP instance from Gaussian class-conditional data, or from a
/// dataset (label +1 rows go to the objective, -1 rows to the constraint;
/// `n0`/`n1` are then taken from the data).
pub fn gen_np_classification(spec: &NpSpec, dataset: Option<&SparseDataset>) -> Result<NpInstance> {
    if !(spec.lambda > 0.0) || !(spec.r1 >= 0.0) || !spec.r1.is_finite() || !spec.separation.is_finite() {
        return Err(VrviError::Config(
            "need lambda > 0, finite r1 >= 0 and finite separation".into(),
        ));
    }
    if spec.n_features == 0 || spec.m1 == 0 || spec.m2 == 0 {
        return Err(VrviError::Config("n_features, m1 and m2 must be positive".into()));
    }
    let n = spec.n_features;
    let (class0, class1) = match dataset {
        Some(ds) => {
            if ds.n_features > n {
                return Err(VrviError::DimensionMismatch {
                    expected: n,
                    got: ds.n_features,
                });
            }
            let pos = ds
                .rows
                .iter()
                .filter(|r| r.label > 0.0)
                .map(|r| r.to_dense(n))
                .collect::<Vec<_>>();
            let neg = ds
                .rows
                .iter()
                .filter(|r| r.label < 0.0)
                .map(|r| r.to_dense(n))
                .collect::<Vec<_>>();
            (pos, neg)
        }
        None => {
            let mut rng = stream_rng(spec.seed, stream::INIT);
            let dir = unit_sphere(&mut rng, n);
            let s = 1.0 / (n as f64).sqrt();
            let draw = |rng: &mut rand_chacha::ChaCha8Rng, sign: f64| {
                Point::lincomb(sign * spec.separation, &dir, 1.0, &gaussian(rng, n, s))
            };
            let c0 = (0..spec.n0).map(|_| draw(&mut rng, 1.0)).collect();
            let c1 = (0..spec.n1).map(|_| draw(&mut rng, -1.0)).collect();
            (c0, c1)
        }
    };
    if class0.len() < spec.m2 || class1.len() < spec.m1 {
        return Err(VrviError::Config(format!(
            "need at least m2 = {} objective points and m1 = {} constraint points, got {} and {}",
            spec.m2,
            spec.m1,
            class0.len(),
            class1.len()
        )));
    }
    let mut spec = spec.clone();
    spec.n0 = class0.len();
    spec.n1 = class1.len();
    Ok(NpInstance { spec, class0, class1 })
}
