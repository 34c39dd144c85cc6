//! Stochastic accelerated variance-reduced extra-point solver for strongly
//! monotone composite VIs.

use rand::Rng;

use crate::error::{DivergedState, Result, VrviError};
use crate::metrics::{q_gap, GapEvaluator, Monitor, TraceRecord};
use crate::oracle::{refresh_snapshot, vr_estimate_batch, SnapshotCache, TheoryConstants};
use crate::point::Point;
use crate::problem::CompositeVIProblem;
use crate::report::ConditionReport;
use crate::rng::SolverRng;
use crate::run::{Recorder, RunOptions, RunOutput, StopReason};

const CHECK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SavrepParams {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub p1: f64,
    pub p2: f64,
    pub mu_h: f64,
    /// Independent single-index estimates averaged per oracle query.
    pub batch: usize,
}

/// Closed-form parameter choice with linear convergence.
pub fn default_params(mu_h: f64, l_h: f64, l_g: f64, m1: usize, m2: usize) -> Result<SavrepParams> {
    if !(mu_h > 0.0 && mu_h.is_finite()) {
        return Err(VrviError::Config(format!("mu_h must be positive, got {mu_h}")));
    }
    if m1 < 2 {
        return Err(VrviError::Config(format!("default parameters need m1 >= 2, got {m1}")));
    }
    if l_h < mu_h {
        return Err(VrviError::Config(format!("L_h = {l_h} is smaller than mu_h = {mu_h}")));
    }
    let p1 = 1.0 / m1 as f64;
    let p2 = if m2 == 0 { 1.0 } else { 1.0 / m2 as f64 };
    let gamma = 0.25 * (p1.sqrt() / l_h).min((p2 / (l_g * mu_h)).sqrt()).min(p1 / mu_h);
    let alpha = (mu_h / (l_g * p2)).sqrt().min(1.0) / 12.0;
    let params = SavrepParams {
        gamma,
        alpha,
        beta: 0.5,
        phi: (1.0 + alpha) * m2 as f64 / 2.0,
        p1,
        p2,
        mu_h,
        batch: 1,
    };
    let report = check_param_constraints(&params, l_h, l_g);
    if !report.is_ok() {
        return Err(VrviError::Config(format!("default parameters violate:\n{report}")));
    }
    Ok(params)
}

/// Variant for tiny `mu_h` (e.g. perturbed KKT systems), where the closed-form
/// `alpha ~ sqrt(mu_h)` freezes the `v` sequence. Drops the `mu_h`-dependent
/// step term and takes the largest `alpha <= 1/2` the inequalities allow
/// (with a 10% margin).
pub fn momentum_params(mu_h: f64, l_h: f64, l_g: f64, m1: usize, m2: usize) -> Result<SavrepParams> {
    let mut p = default_params(mu_h, l_h, l_g, m1, m2)?;
    p.gamma = 0.25 * (p.p1.sqrt() / l_h).min(p.p1 / mu_h);
    let room = 1.0 - p.p1 - 19.0 * p.gamma * mu_h / 12.0;
    let cap = if l_g > 0.0 {
        0.9 * room * p.beta / (p.gamma * l_g * (1.0 + p.beta))
    } else {
        f64::INFINITY
    };
    p.alpha = cap.min(1.0 - p.beta);
    p.phi = (1.0 + p.alpha) * m2 as f64 / 2.0;
    let report = check_param_constraints(&p, l_h, l_g);
    if !report.is_ok() {
        return Err(VrviError::Config(format!("momentum parameters violate:\n{report}")));
    }
    Ok(p)
}

/// Evaluates the step-size and momentum inequalities of the linear rate analysis.
pub fn check_param_constraints(params: &SavrepParams, l_h: f64, l_g: f64) -> ConditionReport {
    let SavrepParams {
        gamma,
        alpha,
        beta,
        p1,
        p2,
        mu_h,
        ..
    } = *params;
    let mut r = ConditionReport::default();
    r.check("gamma > 0", gamma, 0.0);
    r.check("alpha > 0", alpha, 0.0);
    r.check("beta > 0", beta, 0.0);
    r.check("0 < p1 <= 1", p1.min(1.0 - p1 + CHECK_TOL), 0.0);
    r.check("0 < p2 <= 1", p2.min(1.0 - p2 + CHECK_TOL), 0.0);
    r.check("1 - alpha - beta >= 0", 1.0 - alpha - beta, CHECK_TOL);
    r.check(
        "p1 - 2 gamma^2 L_h^2 - gamma mu_h / 3 >= 0",
        p1 - 2.0 * gamma * gamma * l_h * l_h - gamma * mu_h / 3.0,
        CHECK_TOL,
    );
    r.check(
        "1 - p1 - 19 gamma mu_h / 12 - alpha gamma L_g - alpha gamma L_g / beta >= 0",
        1.0 - p1 - 19.0 * gamma * mu_h / 12.0 - alpha * gamma * l_g - alpha * gamma * l_g / beta,
        CHECK_TOL,
    );
    r
}

/// Per-iteration reduction rate of the expected potential under the default parameters.
pub fn contraction_factor(mu_h: f64, l_h: f64, l_g: f64, m1: usize, m2: usize) -> f64 {
    let (m1, m2) = (m1 as f64, m2 as f64);
    let terms = [
        1.0 - mu_h.sqrt() / (24.0 * (l_g * m2).sqrt()),
        1.0 - 1.0 / (24.0 * m2),
        1.0 - mu_h / (48.0 * l_h * m1.sqrt()),
        1.0 - mu_h.sqrt() / (48.0 * (l_g * m2).sqrt()),
        1.0 - 1.0 / (48.0 * m1),
    ];
    terms
        .iter()
        .copied()
        .filter(|t| t.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Stochastic error terms `(Delta_h, Delta_g)` entering the potential recursion.
pub fn stochastic_error_terms(
    params: &SavrepParams,
    problem: &CompositeVIProblem,
    theory: &TheoryConstants,
) -> (f64, f64) {
    let (m1, m2) = (problem.m1() as f64, problem.m2() as f64);
    let (a, mu, g) = (params.alpha, params.mu_h, params.gamma);
    let (nh, ng) = (&problem.noise_h, &problem.noise_g);
    let var_h = nh.std.powi(2) / nh.repeats as f64;
    let var_g = ng.std.powi(2) / ng.repeats as f64;
    let delta_h = a / mu * (m1 * var_h + m1 * m1 * nh.bias_norm.powi(2)) + 2.0 * a * g * theory.sigma_h_tilde_sq;
    let delta_g =
        16.0 * a / mu * (m2 * var_g + m2 * m2 * ng.bias_norm.powi(2)) + 16.0 * a / mu * theory.sigma_g_tilde_sq;
    (delta_h, delta_g)
}

/// `(gamma / (alpha mu_h)) ||F(x0)||^2 + 2 ||x0 - x*||^2`
pub fn initial_distance_measure(
    params: &SavrepParams,
    problem: &CompositeVIProblem,
    x0: &Point,
    x_star: &Point,
) -> f64 {
    params.gamma / (params.alpha * params.mu_h) * problem.operator(x0).norm_sq() + 2.0 * x0.dist_sq(x_star)
}

#[derive(Clone, Debug)]
pub struct SavrepState {
    pub x: Point,
    pub v: Point,
    pub w: Point,
    pub w_bar: Point,
    pub h_cache: SnapshotCache,
    pub g_cache: SnapshotCache,
    pub iter: u64,
    pub h_calls: u64,
    pub g_calls: u64,
    pub w_refreshes: u64,
    pub w_bar_refreshes: u64,
    pub rng: SolverRng,
}

impl SavrepState {
    /// Starts all sequences at the projection of `x0` and fills both caches.
    pub fn new(problem: &CompositeVIProblem, x0: &Point, seed: u64) -> Result<Self> {
        let x = problem.set.project(x0)?;
        let mut rng = SolverRng::new(seed);
        let mut h_calls = 0;
        let mut g_calls = 0;
        let h_cache = refresh_snapshot(&problem.h, &problem.noise_h, &x, &mut rng.noise_h, &mut h_calls);
        let g_cache = refresh_snapshot(&problem.g, &problem.noise_g, &x, &mut rng.noise_g, &mut g_calls);
        Ok(SavrepState {
            v: x.clone(),
            w: x.clone(),
            w_bar: x.clone(),
            x,
            h_cache,
            g_cache,
            iter: 0,
            h_calls,
            g_calls,
            w_refreshes: 0,
            w_bar_refreshes: 0,
            rng,
        })
    }

    pub fn oracle_calls(&self) -> u64 {
        self.h_calls + self.g_calls
    }

    pub(crate) fn diverged(&self) -> VrviError {
        VrviError::Divergence {
            iter: self.iter as usize,
            last_finite: Box::new(DivergedState {
                x: self.x.clone(),
                v: self.v.clone(),
                w: self.w.clone(),
                w_bar: self.w_bar.clone(),
            }),
        }
    }
}

/// Shared extra-point core: returns `(x_half, x_new, v_new)` for the given
/// coefficients without touching the anchors.
pub(crate) fn extra_point_update(
    state: &mut SavrepState,
    problem: &CompositeVIProblem,
    gamma: f64,
    alpha: f64,
    beta: f64,
    p1: f64,
    batch: usize,
) -> Result<(Point, Point, Point)> {
    state.h_cache.ensure_anchor(&state.w)?;
    state.g_cache.ensure_anchor(&state.w_bar)?;
    let c = 1.0 - alpha - beta;
    let x_bar = Point::lincomb(1.0 - p1, &state.x, p1, &state.w);
    let y = Point::lincomb3(c, &state.v, alpha, &state.x, beta, &state.w_bar);
    let g_est = vr_estimate_batch(
        &state.g_cache,
        &problem.g,
        &problem.noise_g,
        batch,
        &y,
        &mut state.rng.zeta,
        &mut state.rng.noise_g,
        &mut state.g_calls,
    );
    let d = state.h_cache.full_sum.add(&g_est);
    let x_half = problem.project(&Point::lincomb(1.0, &x_bar, -gamma, &d));
    let h_est = vr_estimate_batch(
        &state.h_cache,
        &problem.h,
        &problem.noise_h,
        batch,
        &x_half,
        &mut state.rng.xi,
        &mut state.rng.noise_h,
        &mut state.h_calls,
    );
    let d = h_est.add(&g_est);
    let x_new = problem.project(&Point::lincomb(1.0, &x_bar, -gamma, &d));
    let v_new = Point::lincomb3(c, &state.v, alpha, &x_half, beta, &state.w_bar);
    if !(x_new.is_finite() && v_new.is_finite() && x_half.is_finite()) {
        return Err(state.diverged());
    }
    Ok((x_half, x_new, v_new))
}

/// Refreshes `w` (and its cache) with probability `p1`.
pub(crate) fn maybe_refresh_w(state: &mut SavrepState, problem: &CompositeVIProblem, p1: f64) {
    if state.rng.coin_w.random::<f64>() < p1 {
        state.w = state.x.clone();
        state.h_cache = refresh_snapshot(
            &problem.h,
            &problem.noise_h,
            &state.w,
            &mut state.rng.noise_h,
            &mut state.h_calls,
        );
        state.w_refreshes += 1;
    }
}

/// One iteration of the update block.
pub fn step(state: &mut SavrepState, params: &SavrepParams, problem: &CompositeVIProblem) -> Result<()> {
    let (_x_half, x_new, v_new) = extra_point_update(
        state,
        problem,
        params.gamma,
        params.alpha,
        params.beta,
        params.p1,
        params.batch,
    )?;
    state.x = x_new;
    state.v = v_new;
    maybe_refresh_w(state, problem, params.p1);
    if state.rng.coin_w_bar.random::<f64>() < params.p2 {
        state.w_bar = state.v.clone();
        state.g_cache = refresh_snapshot(
            &problem.g,
            &problem.noise_g,
            &state.w_bar,
            &mut state.rng.noise_g,
            &mut state.g_calls,
        );
        state.w_bar_refreshes += 1;
    }
    state.iter += 1;
    Ok(())
}

/// Runs until the oracle budget, the iteration cap or the tolerance is hit.
/// Every trace row is passed to `sink` as soon as it is produced.
pub fn run(
    problem: &CompositeVIProblem,
    params: &SavrepParams,
    opts: &RunOptions,
    monitor: &Monitor,
    sink: &mut dyn FnMut(&TraceRecord),
) -> Result<RunOutput<SavrepState>> {
    if problem.mu_h.is_none() {
        return Err(VrviError::Config("the strongly monotone solver requires mu_h".into()));
    }
    let report = check_param_constraints(params, problem.l_h(), problem.l_g());
    if !report.is_ok() {
        return Err(VrviError::Config(format!("parameters violate:\n{report}")));
    }
    let mut state = SavrepState::new(problem, &opts.start_point(problem), opts.seed)?;
    let every = opts.log_interval.unwrap_or((problem.m1() + problem.m2()).max(1) as u64);
    let mut rec = Recorder::new(monitor, opts.tol, sink);
    let calls = |s: &SavrepState| (s.h_calls, s.g_calls);
    if rec.log(problem, &state.x, 0, 0, calls(&state)) {
        return Ok(RunOutput {
            traces: rec.traces,
            state,
            stop: StopReason::Tolerance,
        });
    }
    let mut last_logged = 0;
    let stop = loop {
        if state.oracle_calls() >= opts.budget {
            break StopReason::Budget;
        }
        if opts.max_iters.is_some_and(|m| state.iter >= m) {
            break StopReason::MaxIters;
        }
        step(&mut state, params, problem)?;
        let reached = rec.dist_reached(&state.x);
        if reached || state.iter % every == 0 {
            last_logged = state.iter;
            if rec.log(problem, &state.x, state.iter, state.w_bar_refreshes, calls(&state)) || reached {
                break StopReason::Tolerance;
            }
        }
    };
    if last_logged != state.iter {
        rec.log(problem, &state.x, state.iter, state.w_bar_refreshes, calls(&state));
    }
    Ok(RunOutput {
        traces: rec.traces,
        state,
        stop,
    })
}

/// `(1 - phi p2) Q(v) + phi Q(w_bar) + (alpha / 2 gamma) [(1 - p1)||x - x*||^2 + ||w - x*||^2]`
pub fn potential(state: &SavrepState, params: &SavrepParams, gap: &GapEvaluator) -> Result<f64> {
    let q_v = q_gap(gap, &state.v)?;
    let q_wb = q_gap(gap, &state.w_bar)?;
    Ok(potential_from_parts(
        params,
        q_v,
        q_wb,
        gap.dist_sq(&state.x),
        gap.dist_sq(&state.w),
    ))
}

pub(crate) fn potential_from_parts(p: &SavrepParams, q_v: f64, q_wb: f64, dx: f64, dw: f64) -> f64 {
    (1.0 - p.phi * p.p2) * q_v + p.phi * q_wb + p.alpha / (2.0 * p.gamma) * ((1.0 - p.p1) * dx + dw)
}
