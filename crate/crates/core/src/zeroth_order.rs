//! Randomized smoothing and two-point zeroth-order gradient estimators, and
//! the KKT operator built from value oracles only.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::component::{Component, SharedComponent};
use crate::constrained::{
    build_kkt_problem, ConstrainedProgram, ConstraintBlock, KktProblem, LipschitzMode, SharedConstraint,
};
use crate::error::{Result, VrviError};
use crate::linalg::DenseMatrix;
use crate::oracle::ComponentFamily;
use crate::point::Point;
use crate::sets::{unit_sphere, ConstraintSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingConfig {
    pub phi: f64,
    pub dim: usize,
}

impl SmoothingConfig {
    pub fn new(phi: f64, dim: usize) -> Result<Self> {
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(VrviError::Config(format!(
                "smoothing radius must be positive, got {phi}"
            )));
        }
        Ok(SmoothingConfig { phi, dim })
    }
}

/// Uniform direction on the unit sphere of `R^n`.
pub fn sphere_sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Point {
    unit_sphere(rng, n)
}

type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// One realization of the oracle noise: `f'(x) = f(x) + offset + <tilt, x>`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseRealization {
    pub offset: f64,
    pub tilt: Option<Point>,
}

/// Unbiased stochastic value oracle for a smooth function.
#[derive(Clone)]
pub struct NoisyScalarOracle {
    dim: usize,
    value: ScalarFn,
    /// Lipschitz constant of the value on the region of interest.
    pub value_lipschitz: f64,
    /// Lipschitz constant of the gradient.
    pub grad_lipschitz: f64,
    /// Standard deviation of the additive offset.
    pub offset_std: f64,
    /// `E ||tilt||^2`, i.e. the variance of the stochastic gradient.
    pub tilt_std: f64,
}

impl fmt::Debug for NoisyScalarOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoisyScalarOracle")
            .field("dim", &self.dim)
            .field("value_lipschitz", &self.value_lipschitz)
            .field("grad_lipschitz", &self.grad_lipschitz)
            .field("offset_std", &self.offset_std)
            .field("tilt_std", &self.tilt_std)
            .finish()
    }
}

impl NoisyScalarOracle {
    pub fn new(
        dim: usize,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        value_lipschitz: f64,
        grad_lipschitz: f64,
    ) -> Self {
        NoisyScalarOracle {
            dim,
            value: Arc::new(value),
            value_lipschitz,
            grad_lipschitz,
            offset_std: 0.0,
            tilt_std: 0.0,
        }
    }

    pub fn with_noise(mut self, offset_std: f64, tilt_std: f64) -> Self {
        self.offset_std = offset_std;
        self.tilt_std = tilt_std;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Noiseless value.
    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> NoiseRealization {
        let offset = if self.offset_std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            self.offset_std * z
        } else {
            0.0
        };
        let tilt = (self.tilt_std > 0.0).then(|| unit_sphere(rng, self.dim).scale(self.tilt_std));
        NoiseRealization { offset, tilt }
    }

    pub fn eval(&self, x: &Point, noise: &NoiseRealization) -> f64 {
        let mut v = self.value(x) + noise.offset;
        if let Some(t) = &noise.tilt {
            v += t.dot(x);
        }
        v
    }

    /// Central finite-difference gradient of the noiseless value.
    pub fn fd_gradient(&self, x: &Point) -> Point {
        let mut out = Vec::with_capacity(self.dim);
        let mut xp = x.clone();
        for i in 0..self.dim {
            let h = 1e-6 * (1.0 + x[i].abs());
            let xi = x[i];
            xp.as_mut_slice()[i] = xi + h;
            let fp = self.value(&xp);
            xp.as_mut_slice()[i] = xi - h;
            let fm = self.value(&xp);
            xp.as_mut_slice()[i] = xi;
            out.push((fp - fm) / (2.0 * h));
        }
        Point::from_vec(out)
    }
}

/// `(n / phi) (f'(x + phi u) - f'(x)) u` with one noise realization shared by
/// both evaluations.
pub fn zo_gradient(oracle: &NoisyScalarOracle, x: &Point, phi: f64, u: &Point, rng: &mut dyn RngCore) -> Point {
    let noise = oracle.draw(rng);
    zo_gradient_with(oracle, x, phi, u, &noise)
}

pub fn zo_gradient_with(oracle: &NoisyScalarOracle, x: &Point, phi: f64, u: &Point, noise: &NoiseRealization) -> Point {
    let n = x.dim() as f64;
    let shifted = Point::lincomb(1.0, x, phi, u);
    let diff = oracle.eval(&shifted, noise) - oracle.eval(x, noise);
    u.scale(n / phi * diff)
}

/// `phi n L / 2`, the bound on `||grad f_phi - grad f||`.
pub fn smoothing_bias_bound(l: f64, phi: f64, n: usize) -> f64 {
    phi * n as f64 * l / 2.0
}

/// `2 n (M^2 + varsigma^2) + phi^2 n^2 L^2 / 2`
pub fn zo_variance_bound(m: f64, varsigma: f64, l: f64, phi: f64, n: usize) -> f64 {
    let n = n as f64;
    2.0 * n * (m * m + varsigma * varsigma) + phi * phi * n * n * l * l / 2.0
}

/// Objective term `g_i` seen through its value oracle.
struct ZoObjective {
    oracle: NoisyScalarOracle,
    phi: f64,
}

impl Component for ZoObjective {
    fn dim(&self) -> usize {
        self.oracle.dim
    }

    fn eval(&self, x: &Point) -> Point {
        self.oracle.fd_gradient(x)
    }

    fn sample(&self, x: &Point, rng: &mut dyn RngCore) -> Point {
        let u = unit_sphere(rng, self.oracle.dim);
        zo_gradient(&self.oracle, x, self.phi, &u, rng)
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn value(&self, x: &Point) -> Option<f64> {
        Some(self.oracle.value(x))
    }
}

/// Constraint block whose rows `h_{j,s}` are only available through value oracles.
#[derive(Clone, Debug)]
pub struct ZoConstraintBlock {
    pub rows: Vec<NoisyScalarOracle>,
    pub phi: f64,
}

impl ConstraintBlock for ZoConstraintBlock {
    fn dim(&self) -> usize {
        self.rows[0].dim
    }

    fn ell(&self) -> usize {
        self.rows.len()
    }

    fn value(&self, x: &Point) -> Point {
        Point::from_vec(self.rows.iter().map(|r| r.value(x)).collect())
    }

    fn jacobian(&self, x: &Point) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = self.rows.iter().map(|r| r.fd_gradient(x).into_vec()).collect();
        DenseMatrix::from_rows(&rows).expect("consistent Jacobian rows")
    }

    /// `sum_s y_s G_{s,phi}(x, u)` with one direction `u` shared by all rows.
    fn jacobian_t_sample(&self, x: &Point, y: &Point, rng: &mut dyn RngCore) -> Point {
        let u = unit_sphere(rng, self.dim());
        let mut out = Point::zeros(self.dim());
        for (s, row) in self.rows.iter().enumerate() {
            let noise = row.draw(rng);
            if y[s] != 0.0 {
                out.axpy(y[s], &zo_gradient_with(row, x, self.phi, &u, &noise));
            }
        }
        out
    }

    fn value_sample(&self, x: &Point, rng: &mut dyn RngCore) -> Point {
        Point::from_vec(self.rows.iter().map(|r| r.eval(x, &r.draw(rng))).collect())
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn smoothness(&self) -> Option<(f64, f64)> {
        let lip = self.rows.iter().map(|r| r.grad_lipschitz.powi(2)).sum::<f64>().sqrt();
        let bound = self.rows.iter().map(|r| r.value_lipschitz.powi(2)).sum::<f64>().sqrt();
        Some((lip, bound))
    }
}

/// A constrained program given by value oracles only.
#[derive(Clone, Debug)]
pub struct ZoProgram {
    pub objective: Vec<NoisyScalarOracle>,
    /// Each block lists its `ell` row oracles.
    pub constraints: Vec<Vec<NoisyScalarOracle>>,
    pub primal_set: ConstraintSet,
}

/// KKT problem whose components are two-point zeroth-order estimators.
pub fn zo_kkt_operator_components(program: &ZoProgram, config: &SmoothingConfig, dual_cap: f64) -> Result<KktProblem> {
    if program.objective.is_empty() {
        return Err(VrviError::Config("missing objective value oracles".into()));
    }
    if program.constraints.iter().any(|b| b.is_empty()) || program.constraints.is_empty() {
        return Err(VrviError::Config("missing constraint value oracles".into()));
    }
    let n = config.dim;
    if program
        .objective
        .iter()
        .chain(program.constraints.iter().flatten())
        .any(|o| o.dim != n)
    {
        return Err(VrviError::Config(
            "value oracle dimension differs from the smoothing dimension".into(),
        ));
    }
    let comps: Vec<SharedComponent> = program
        .objective
        .iter()
        .map(|o| {
            Arc::new(ZoObjective {
                oracle: o.clone(),
                phi: config.phi,
            }) as SharedComponent
        })
        .collect();
    let lips = program.objective.iter().map(|o| o.grad_lipschitz.max(1e-12)).collect();
    let objective = ComponentFamily::new(n, comps, lips)?;
    let blocks: Vec<SharedConstraint> = program
        .constraints
        .iter()
        .map(|rows| {
            Arc::new(ZoConstraintBlock {
                rows: rows.clone(),
                phi: config.phi,
            }) as SharedConstraint
        })
        .collect();
    let cp = ConstrainedProgram::new(objective, blocks, program.primal_set.clone())?;
    build_kkt_problem(&cp, dual_cap, LipschitzMode::ClosedForm)
}

/// Bias and variance levels of the zeroth-order KKT components, worst case
/// over components. `dual_norm` stands in for the largest dual iterate norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoOracleBounds {
    pub delta_h: f64,
    pub sigma_h_sq: f64,
    pub delta_g: f64,
    pub sigma_g_sq: f64,
}

pub fn zo_oracle_bounds(program: &ZoProgram, config: &SmoothingConfig, dual_norm: f64) -> ZoOracleBounds {
    let (phi, n) = (config.phi, config.dim);
    let mut b = ZoOracleBounds {
        delta_h: 0.0,
        sigma_h_sq: 0.0,
        delta_g: 0.0,
        sigma_g_sq: 0.0,
    };
    for rows in &program.constraints {
        let ell = rows.len() as f64;
        let lsum = rows.iter().map(|r| r.grad_lipschitz.powi(2)).sum::<f64>().sqrt();
        b.delta_h = b.delta_h.max(phi * n as f64 * dual_norm / 2.0 * lsum);
        for r in rows {
            let s = zo_variance_bound(r.value_lipschitz, r.tilt_std, r.grad_lipschitz, phi, n);
            b.sigma_h_sq = b
                .sigma_h_sq
                .max(ell * (s * dual_norm * dual_norm + r.offset_std.powi(2)));
        }
    }
    for o in &program.objective {
        b.delta_g = b.delta_g.max(smoothing_bias_bound(o.grad_lipschitz, phi, n));
        b.sigma_g_sq = b.sigma_g_sq.max(zo_variance_bound(
            o.value_lipschitz,
            o.tilt_std,
            o.grad_lipschitz,
            phi,
            n,
        ));
    }
    b
}
