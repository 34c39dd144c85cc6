//! Turns a problem section into a solvable instance.

use vrvi::baselines::{solve_extragradient, ExtragradientParams};
use vrvi::constrained::{build_kkt_problem, perturb, ConstrainedProgram, KktProblem, LipschitzMode};
use vrvi::problems::{
    gen_bilinear_with_quadratic, gen_np_classification, gen_strongly_monotone, load_problem, parse_libsvm, NpInstance,
    StoredProblem,
};
use vrvi::rng::stream;
use vrvi::{CompositeVIProblem, NoiseModel, Point, Result, VrviError};

use crate::config::{ExperimentConfig, ProblemSpec};

pub struct Kkt {
    pub kkt: KktProblem,
    pub program: ConstrainedProgram,
}

pub struct Built {
    /// Problem the solver sees: noise and perturbation applied.
    pub problem: CompositeVIProblem,
    /// Noiseless, unperturbed problem.
    pub base: CompositeVIProblem,
    /// Solution of `base`, when known or computed.
    pub x_star: Option<Point>,
    pub kkt: Option<Kkt>,
    /// Whether the strong monotonicity comes only from the perturbation.
    pub perturbed_only: bool,
}

/// The instance as it would be written by `vrvi gen`.
pub fn stored_instance(spec: &ProblemSpec) -> Result<StoredProblem> {
    Ok(match spec {
        ProblemSpec::StronglyMonotone(s) => StoredProblem::Affine(gen_strongly_monotone(s)?),
        ProblemSpec::Bilinear(b) => {
            StoredProblem::Affine(gen_bilinear_with_quadratic(b.n_x, b.n_y, b.m1, b.m2, b.l_g, b.seed)?)
        }
        ProblemSpec::Np { spec, dataset, .. } => {
            let data = dataset.as_ref().map(parse_libsvm).transpose()?;
            StoredProblem::Np(gen_np_classification(spec, data.as_ref())?)
        }
        ProblemSpec::File { path, .. } => load_problem(path)?,
    })
}

fn dual_cap(spec: &ProblemSpec) -> Result<f64> {
    match spec {
        ProblemSpec::Np { dual_cap, .. }
        | ProblemSpec::File {
            dual_cap: Some(dual_cap),
            ..
        } => Ok(*dual_cap),
        _ => Err(VrviError::Config(
            "problem.dual_cap is required for Neyman-Pearson instances".into(),
        )),
    }
}

fn noise_seed(spec: &ProblemSpec) -> u64 {
    match spec {
        ProblemSpec::StronglyMonotone(s) => s.seed,
        ProblemSpec::Bilinear(b) => b.seed,
        ProblemSpec::Np { spec, .. } => spec.seed,
        ProblemSpec::File { .. } => 0,
    }
}

/// Extragradient reference solution of a noiseless problem.
pub fn reference_solution(problem: &CompositeVIProblem, tol: f64) -> Result<Point> {
    let prm = ExtragradientParams::for_problem(problem, 5_000_000, tol);
    let sol = solve_extragradient(problem, &prm, &Point::zeros(problem.dim()))?;
    if !sol.converged {
        eprintln!("warning: reference solve stopped at residual {:.3e}", sol.residual);
    }
    Ok(sol.x)
}

fn np_kkt(inst: &NpInstance, cap: f64) -> Result<Kkt> {
    let program = inst.program()?;
    let kkt = build_kkt_problem(&program, cap, LipschitzMode::ClosedForm)?;
    Ok(Kkt { kkt, program })
}

/// Builds the instance; for constrained programs the reference solution is
/// only computed when `want_reference` is set.
pub fn build(cfg: &ExperimentConfig, want_reference: bool) -> Result<Built> {
    let (base, x_star, kkt) = match stored_instance(&cfg.problem)? {
        StoredProblem::Affine(inst) => (inst.problem()?, Some(inst.x_star), None),
        StoredProblem::Np(inst) => {
            let k = np_kkt(&inst, dual_cap(&cfg.problem)?)?;
            let base = k.kkt.problem.clone();
            let x_star = if want_reference {
                Some(reference_solution(&base, 1e-10)?)
            } else {
                None
            };
            (base, x_star, Some(k))
        }
    };
    let mut problem = base.clone();
    let n = problem.dim();
    if cfg.noise.bias > 0.0 || cfg.noise.std > 0.0 {
        let seed = noise_seed(&cfg.problem);
        let nh = NoiseModel::new(cfg.noise.bias, cfg.noise.std, problem.m1(), n, seed, stream::NOISE_H)?;
        let ng = NoiseModel::new(cfg.noise.bias, cfg.noise.std, problem.m2(), n, seed, stream::NOISE_G)?;
        problem = problem.with_noise(nh, ng);
    }
    let perturbed_only = problem.mu_h.is_none() && cfg.perturbation > 0.0;
    if cfg.perturbation > 0.0 {
        if problem.m1() == 0 {
            return Err(VrviError::Config("perturbation needs at least one H-component".into()));
        }
        problem = perturb(&problem, cfg.perturbation, 0)?;
    }
    Ok(Built {
        problem,
        base,
        x_star,
        kkt,
        perturbed_only,
    })
}
