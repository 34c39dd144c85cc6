//! Deterministic full-operator solvers used to compute reference solutions.

use crate::error::{Result, VrviError};
use crate::metrics::{Monitor, TraceRecord};
use crate::point::Point;
use crate::problem::CompositeVIProblem;
use crate::run::{Recorder, RunOptions, RunOutput, StopReason};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtragradientParams {
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl ExtragradientParams {
    /// Step `0.5 / (L_h + L_g)`; the endpoint `1 / L` stalls on `H(x) = x`.
    pub fn for_problem(problem: &CompositeVIProblem, max_iters: usize, tol: f64) -> Self {
        ExtragradientParams {
            step: 0.5 / (problem.l_h() + problem.l_g()),
            max_iters,
            tol,
        }
    }

    pub fn validate(&self, problem: &CompositeVIProblem) -> Result<()> {
        let limit = 1.0 / (problem.l_h() + problem.l_g());
        if !(self.step > 0.0 && self.step <= limit * (1.0 + 1e-12)) {
            return Err(VrviError::Config(format!(
                "extragradient step {} must lie in (0, 1/(L_h + L_g)] = (0, {limit}]",
                self.step
            )));
        }
        if !(self.tol > 0.0) {
            return Err(VrviError::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSolution {
    pub x: Point,
    /// Natural residual `||x - P(x - F(x))||` of `x` (scaled by the step for
    /// projected gradient).
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Two-projection extragradient on the exact operator. Stops once the natural
/// residual drops below `tol`; otherwise returns the best iterate found.
pub fn solve_extragradient(
    problem: &CompositeVIProblem,
    params: &ExtragradientParams,
    x0: &Point,
) -> Result<BaselineSolution> {
    params.validate(problem)?;
    let s = params.step;
    let mut x = problem.set.project(x0)?;
    let mut best = (problem.natural_residual(&x), x.clone());
    for it in 0..params.max_iters {
        if best.0 <= params.tol {
            return Ok(BaselineSolution {
                x: best.1,
                residual: best.0,
                iters: it,
                converged: true,
            });
        }
        let x_half = problem.project(&Point::lincomb(1.0, &x, -s, &problem.operator(&x)));
        x = problem.project(&Point::lincomb(1.0, &x, -s, &problem.operator(&x_half)));
        if !x.is_finite() {
            return Err(VrviError::Divergence {
                iter: it,
                last_finite: Box::new(crate::error::DivergedState {
                    x: best.1.clone(),
                    v: best.1.clone(),
                    w: best.1.clone(),
                    w_bar: best.1,
                }),
            });
        }
        let r = problem.natural_residual(&x);
        if r < best.0 {
            best = (r, x.clone());
        }
    }
    let converged = best.0 <= params.tol;
    Ok(BaselineSolution {
        x: best.1,
        residual: best.0,
        iters: params.max_iters,
        converged,
    })
}

/// Extragradient as a traced solver. Each iteration costs two full passes,
/// i.e. `2 (m1 + m2)` component calls; `log_interval` defaults to 1.
pub fn run_extragradient(
    problem: &CompositeVIProblem,
    step: f64,
    opts: &RunOptions,
    monitor: &Monitor,
    sink: &mut dyn FnMut(&TraceRecord),
) -> Result<RunOutput<Point>> {
    ExtragradientParams {
        step,
        max_iters: 0,
        tol: 1.0,
    }
    .validate(problem)?;
    let mut x = opts.start_point(problem);
    let (m1, m2) = (problem.m1() as u64, problem.m2() as u64);
    let every = opts.log_interval.unwrap_or(1).max(1);
    let mut rec = Recorder::new(monitor, opts.tol, sink);
    if rec.log(problem, &x, 0, 0, (0, 0)) {
        return Ok(RunOutput {
            state: x,
            traces: rec.traces,
            stop: StopReason::Tolerance,
        });
    }
    let mut iter = 0u64;
    let mut last_logged = 0;
    let calls = |k: u64| (2 * k * m1, 2 * k * m2);
    let stop = loop {
        if 2 * iter * (m1 + m2) >= opts.budget {
            break StopReason::Budget;
        }
        if opts.max_iters.is_some_and(|m| iter >= m) {
            break StopReason::MaxIters;
        }
        let x_half = problem.project(&Point::lincomb(1.0, &x, -step, &problem.operator(&x)));
        let next = problem.project(&Point::lincomb(1.0, &x, -step, &problem.operator(&x_half)));
        iter += 1;
        if !next.is_finite() {
            return Err(VrviError::Divergence {
                iter: iter as usize,
                last_finite: Box::new(crate::error::DivergedState {
                    x: x.clone(),
                    v: x.clone(),
                    w: x.clone(),
                    w_bar: x,
                }),
            });
        }
        x = next;
        let reached = rec.dist_reached(&x);
        if reached || iter % every == 0 {
            last_logged = iter;
            if rec.log(problem, &x, iter, iter, calls(iter)) || reached {
                break StopReason::Tolerance;
            }
        }
    };
    if last_logged != iter {
        rec.log(problem, &x, iter, iter, calls(iter));
    }
    Ok(RunOutput {
        state: x,
        traces: rec.traces,
        stop,
    })
}

/// Projected gradient for `min g(x)` over the set; the H-family must be empty.
pub fn solve_projected_gradient(
    problem: &CompositeVIProblem,
    params: &ExtragradientParams,
    x0: &Point,
) -> Result<BaselineSolution> {
    if !problem.h.is_empty() {
        return Err(VrviError::InvalidArgument(
            "projected gradient needs an empty H-family".into(),
        ));
    }
    if !(params.step > 0.0 && params.step <= 1.0 / problem.l_g() * (1.0 + 1e-12)) {
        return Err(VrviError::Config(format!(
            "step must lie in (0, 1/L_g], got {}",
            params.step
        )));
    }
    let s = params.step;
    let mut x = problem.set.project(x0)?;
    let mut best: Option<(f64, Point)> = None;
    for it in 0..=params.max_iters {
        let next = problem.project(&Point::lincomb(1.0, &x, -s, &problem.g_grad(&x)));
        let r = next.dist(&x) / s;
        if best.as_ref().is_none_or(|b| r < b.0) {
            best = Some((r, x.clone()));
        }
        if r <= params.tol || it == params.max_iters {
            let (residual, xb) = best.expect("at least one iterate");
            return Ok(BaselineSolution {
                x: xb,
                residual,
                iters: it,
                converged: residual <= params.tol,
            });
        }
        x = next;
    }
    unreachable!()
}

/// Largest violation of `<F(x*), x - x*> >= 0` over the given feasible points
/// (returned as a nonpositive number, 0 when none is violated).
pub fn vi_violation(problem: &CompositeVIProblem, x_star: &Point, points: &[Point]) -> f64 {
    let f = problem.operator(x_star);
    points.iter().map(|x| f.dot(&x.sub(x_star))).fold(0.0, f64::min)
}
