//! Finite-sum constrained programs
//! `min sum_i g_i(x)  s.t.  sum_j h_j(x) <= 0,  x in X`
//! and their Lagrangian (KKT) VI reformulation over `z = (x; y)`.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::component::{Component, PerturbedComponent, SharedComponent};
use crate::error::{check_dim, Result, VrviError};
use crate::linalg::DenseMatrix;
use crate::metrics::{ExtraMetrics, ExtraValues};
use crate::oracle::ComponentFamily;
use crate::point::Point;
use crate::problem::CompositeVIProblem;
use crate::rng::stream_rng;
use crate::sets::ConstraintSet;

/// One vector-valued constraint block `h_j : R^n -> R^ell`.
pub trait ConstraintBlock: Send + Sync {
    fn dim(&self) -> usize;
    fn ell(&self) -> usize;
    fn value(&self, x: &Point) -> Point;
    /// `ell x n` Jacobian.
    fn jacobian(&self, x: &Point) -> DenseMatrix;

    /// Randomized (e.g. zeroth-order) estimate of `J(x)^T y`.
    fn jacobian_t_sample(&self, x: &Point, y: &Point, _rng: &mut dyn RngCore) -> Point {
        Point::new(self.jacobian(x).matvec_t(y)).expect("finite Jacobian")
    }

    /// Randomized estimate of `h(x)`.
    fn value_sample(&self, x: &Point, _rng: &mut dyn RngCore) -> Point {
        self.value(x)
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    /// Constant Jacobian, for affine blocks.
    fn linear_part(&self) -> Option<&DenseMatrix> {
        None
    }

    /// `(Lipschitz constant of the Jacobian, bound on the Jacobian norm)` over the primal set.
    fn smoothness(&self) -> Option<(f64, f64)> {
        None
    }
}

pub type SharedConstraint = Arc<dyn ConstraintBlock>;

/// `h(x) = A x - b`
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub a: DenseMatrix,
    pub b: Point,
}

impl LinearConstraint {
    pub fn new(a: DenseMatrix, b: Point) -> Result<Self> {
        check_dim(a.rows(), b.dim())?;
        Ok(LinearConstraint { a, b })
    }
}

impl ConstraintBlock for LinearConstraint {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn ell(&self) -> usize {
        self.a.rows()
    }

    fn value(&self, x: &Point) -> Point {
        Point::from_vec(self.a.matvec(x)).sub(&self.b)
    }

    fn jacobian(&self, _x: &Point) -> DenseMatrix {
        self.a.clone()
    }

    fn linear_part(&self) -> Option<&DenseMatrix> {
        Some(&self.a)
    }

    fn smoothness(&self) -> Option<(f64, f64)> {
        Some((0.0, self.a.spectral_norm()))
    }
}

type VecFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type JacFn = Arc<dyn Fn(&Point) -> DenseMatrix + Send + Sync>;

/// Closure-backed constraint block.
#[derive(Clone)]
pub struct FnConstraint {
    dim: usize,
    ell: usize,
    value: VecFn,
    jacobian: JacFn,
    smoothness: Option<(f64, f64)>,
}

impl fmt::Debug for FnConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnConstraint(dim={}, ell={})", self.dim, self.ell)
    }
}

impl FnConstraint {
    pub fn new(
        dim: usize,
        ell: usize,
        value: impl Fn(&Point) -> Point + Send + Sync + 'static,
        jacobian: impl Fn(&Point) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        FnConstraint {
            dim,
            ell,
            value: Arc::new(value),
            jacobian: Arc::new(jacobian),
            smoothness: None,
        }
    }

    pub fn with_smoothness(mut self, jacobian_lipschitz: f64, jacobian_bound: f64) -> Self {
        self.smoothness = Some((jacobian_lipschitz, jacobian_bound));
        self
    }
}

impl ConstraintBlock for FnConstraint {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ell(&self) -> usize {
        self.ell
    }

    fn value(&self, x: &Point) -> Point {
        (self.value)(x)
    }

    fn jacobian(&self, x: &Point) -> DenseMatrix {
        (self.jacobian)(x)
    }

    fn smoothness(&self) -> Option<(f64, f64)> {
        self.smoothness
    }
}

#[derive(Clone)]
pub struct ConstrainedProgram {
    /// Gradient components of the `g_i`, each with a value.
    pub objective: ComponentFamily,
    pub constraints: Vec<SharedConstraint>,
    pub primal_set: ConstraintSet,
    pub ell: usize,
}

impl fmt::Debug for ConstrainedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstrainedProgram")
            .field("objective", &self.objective)
            .field("blocks", &self.constraints.len())
            .field("primal_set", &self.primal_set)
            .field("ell", &self.ell)
            .finish()
    }
}

impl ConstrainedProgram {
    pub fn new(
        objective: ComponentFamily,
        constraints: Vec<SharedConstraint>,
        primal_set: ConstraintSet,
    ) -> Result<Self> {
        let n = primal_set.dim();
        check_dim(n, objective.dim())?;
        let ell = constraints.first().map_or(0, |c| c.ell());
        for c in &constraints {
            if c.dim() != n || c.ell() != ell {
                return Err(VrviError::Config(format!(
                    "constraint block has shape {}x{}, expected {ell}x{n}",
                    c.ell(),
                    c.dim()
                )));
            }
        }
        if constraints.is_empty() {
            return Err(VrviError::Config("program needs at least one constraint block".into()));
        }
        Ok(ConstrainedProgram {
            objective,
            constraints,
            primal_set,
            ell,
        })
    }

    pub fn dim(&self) -> usize {
        self.primal_set.dim()
    }

    pub fn constraint_sum(&self, x: &Point) -> Point {
        let mut s = Point::zeros(self.ell);
        for c in &self.constraints {
            s.add_assign(&c.value(x));
        }
        s
    }

    pub fn objective_value(&self, x: &Point) -> f64 {
        self.objective.value_sum(x).unwrap_or(f64::NAN)
    }
}

/// `||max(0, sum_j h_j(x))||_inf`
pub fn constraint_violation(program: &ConstrainedProgram, x: &Point) -> f64 {
    program.constraint_sum(x).iter().fold(0.0, |m, v| m.max(v.max(0.0)))
}

pub fn objective_gap(program: &ConstrainedProgram, x: &Point, f_star: f64) -> f64 {
    program.objective_value(x) - f_star
}

/// `H_j(z) = (J_j(x)^T y; -h_j(x))`
struct KktBlock {
    block: SharedConstraint,
    n: usize,
}

impl KktBlock {
    fn split(&self, z: &Point) -> (Point, Point) {
        (z.slice(0, self.n), z.slice(self.n, z.dim()))
    }
}

impl Component for KktBlock {
    fn dim(&self) -> usize {
        self.n + self.block.ell()
    }

    fn eval(&self, z: &Point) -> Point {
        let (x, y) = self.split(z);
        let top = Point::from_vec(self.block.jacobian(&x).matvec_t(&y));
        top.concat(&self.block.value(&x).scale(-1.0))
    }

    fn sample(&self, z: &Point, rng: &mut dyn RngCore) -> Point {
        let (x, y) = self.split(z);
        let top = self.block.jacobian_t_sample(&x, &y, rng);
        top.concat(&self.block.value_sample(&x, rng).scale(-1.0))
    }

    fn is_stochastic(&self) -> bool {
        self.block.is_stochastic()
    }
}

/// `grad g_i(z) = (grad g_i(x); 0)`
struct LiftedObjective {
    inner: SharedComponent,
    n: usize,
    ell: usize,
}

impl Component for LiftedObjective {
    fn dim(&self) -> usize {
        self.n + self.ell
    }

    fn eval(&self, z: &Point) -> Point {
        self.inner.eval(&z.slice(0, self.n)).concat(&Point::zeros(self.ell))
    }

    fn sample(&self, z: &Point, rng: &mut dyn RngCore) -> Point {
        self.inner
            .sample(&z.slice(0, self.n), rng)
            .concat(&Point::zeros(self.ell))
    }

    fn is_stochastic(&self) -> bool {
        self.inner.is_stochastic()
    }

    fn value(&self, z: &Point) -> Option<f64> {
        self.inner.value(&z.slice(0, self.n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LipschitzMode {
    /// Exact for affine blocks; for smooth blocks uses the declared Jacobian
    /// Lipschitz constant and norm bound.
    ClosedForm,
    /// `1.5 x` the largest observed difference quotient over random feasible pairs.
    Empirical { pairs: usize, seed: u64 },
}

impl LipschitzMode {
    pub fn empirical() -> Self {
        LipschitzMode::Empirical { pairs: 10_000, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct KktProblem {
    pub problem: CompositeVIProblem,
    pub n: usize,
    pub ell: usize,
    pub dual_cap: f64,
}

impl KktProblem {
    pub fn primal(&self, z: &Point) -> Point {
        z.slice(0, self.n)
    }

    pub fn dual(&self, z: &Point) -> Point {
        z.slice(self.n, self.n + self.ell)
    }

    /// Whether some dual coordinate sits at the cap (the cap may be too small).
    pub fn dual_at_cap(&self, z: &Point, tol: f64) -> bool {
        self.dual(z).iter().any(|y| *y >= self.dual_cap - tol)
    }

    pub fn lift(&self, x: &Point, y: &Point) -> Point {
        x.concat(y)
    }

    /// Constraint violation and objective gap of the primal part.
    pub fn metrics_hook(&self, program: &ConstrainedProgram, f_star: Option<f64>) -> ExtraMetrics {
        let program = program.clone();
        let n = self.n;
        Arc::new(move |z: &Point| {
            let x = z.slice(0, n);
            ExtraValues {
                cons_viol: Some(constraint_violation(&program, &x)),
                obj_gap: f_star.map(|f| objective_gap(&program, &x, f)),
            }
        })
    }
}

pub fn build_kkt_problem(program: &ConstrainedProgram, dual_cap: f64, mode: LipschitzMode) -> Result<KktProblem> {
    if !(dual_cap > 0.0 && dual_cap.is_finite()) {
        return Err(VrviError::Config(format!("dual cap must be positive, got {dual_cap}")));
    }
    let n = program.dim();
    let ell = program.ell;
    let dual_set = ConstraintSet::boxed(Point::zeros(ell), Point::filled(ell, dual_cap))?;
    let set = ConstraintSet::product(vec![program.primal_set.clone(), dual_set])?;

    let h_comps: Vec<SharedComponent> = program
        .constraints
        .iter()
        .map(|b| Arc::new(KktBlock { block: b.clone(), n }) as SharedComponent)
        .collect();
    let h_lips = match mode {
        LipschitzMode::ClosedForm => program
            .constraints
            .iter()
            .map(|b| closed_form_lipschitz(b.as_ref(), dual_cap))
            .collect::<Result<Vec<f64>>>()?,
        LipschitzMode::Empirical { pairs, seed } => h_comps
            .iter()
            .enumerate()
            .map(|(j, c)| 1.5 * empirical_lipschitz(c.as_ref(), &set, pairs, seed.wrapping_add(j as u64)))
            .map(|l| l.max(1e-12))
            .collect(),
    };
    let h = ComponentFamily::new(n + ell, h_comps, h_lips)?;
    let g_comps: Vec<SharedComponent> = program
        .objective
        .components()
        .iter()
        .map(|c| {
            Arc::new(LiftedObjective {
                inner: c.clone(),
                n,
                ell,
            }) as SharedComponent
        })
        .collect();
    let g = ComponentFamily::new(n + ell, g_comps, program.objective.lipschitz().to_vec())?;
    let problem = CompositeVIProblem::new(h, g, set)?;
    Ok(KktProblem {
        problem,
        n,
        ell,
        dual_cap,
    })
}

fn closed_form_lipschitz(block: &dyn ConstraintBlock, dual_cap: f64) -> Result<f64> {
    if let Some(a) = block.linear_part() {
        return Ok(a.spectral_norm().max(1e-12));
    }
    let (jac_lip, jac_bound) = block
        .smoothness()
        .ok_or_else(|| VrviError::Config("closed-form Lipschitz constants need declared Jacobian smoothness".into()))?;
    let a = (block.ell() as f64).sqrt() * dual_cap * jac_lip;
    Ok((a * a + 2.0 * jac_bound * jac_bound).sqrt().max(1e-12))
}

/// Largest `||T(z1) - T(z2)|| / ||z1 - z2||` over random feasible pairs.
pub fn empirical_lipschitz(c: &dyn Component, set: &ConstraintSet, pairs: usize, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 11);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let z1 = set.sample(&mut rng, 1.0);
        let z2 = set.sample(&mut rng, 1.0);
        let d = z1.dist(&z2);
        if d > 1e-12 {
            best = best.max(c.eval(&z1).dist(&c.eval(&z2)) / d);
        }
    }
    best
}

/// `F_mu = F + mu z`, with `mu z` folded into H-component `attach_index`.
pub fn perturb(problem: &CompositeVIProblem, mu: f64, attach_index: usize) -> Result<CompositeVIProblem> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(VrviError::InvalidArgument(format!(
            "perturbation must be nonnegative, got {mu}"
        )));
    }
    if attach_index >= problem.m1() {
        return Err(VrviError::InvalidArgument(format!(
            "attach index {attach_index} out of range for {} H-components",
            problem.m1()
        )));
    }
    if mu == 0.0 {
        return Ok(problem.clone());
    }
    let inner = problem.h.component(attach_index).clone();
    let lip = problem.h.lipschitz()[attach_index] + mu;
    let h = problem
        .h
        .with_component(attach_index, Arc::new(PerturbedComponent { inner, mu }), lip)?;
    let mut out = problem.clone();
    out.h = h;
    out.mu_h = Some(mu + problem.mu_h.unwrap_or(0.0));
    Ok(out)
}
