//! Options and bookkeeping shared by the solver drivers.

use std::time::Instant;

use crate::metrics::{Monitor, TraceRecord};
use crate::point::Point;
use crate::problem::CompositeVIProblem;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    /// Starting point; projected onto the set. Defaults to the origin.
    pub x0: Option<Point>,
    /// Maximum number of single-component oracle calls (H and g together).
    pub budget: u64,
    /// Stop once `dist_sq <= tol` (known reference) or `res_norm <= tol`.
    pub tol: Option<f64>,
    /// Iterations between trace rows; `None` picks a solver default.
    pub log_interval: Option<u64>,
    pub max_iters: Option<u64>,
}

impl RunOptions {
    pub fn new(seed: u64, budget: u64) -> Self {
        RunOptions {
            seed,
            x0: None,
            budget,
            tol: None,
            log_interval: None,
            max_iters: None,
        }
    }

    pub fn with_x0(mut self, x0: Point) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    pub fn with_log_interval(mut self, every: u64) -> Self {
        self.log_interval = Some(every.max(1));
        self
    }

    pub fn with_max_iters(mut self, iters: u64) -> Self {
        self.max_iters = Some(iters);
        self
    }

    pub(crate) fn start_point(&self, problem: &CompositeVIProblem) -> Point {
        let x0 = self.x0.clone().unwrap_or_else(|| Point::zeros(problem.dim()));
        problem.project(&x0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    MaxIters,
    Tolerance,
}

#[derive(Clone, Debug)]
pub struct RunOutput<S> {
    pub state: S,
    pub traces: Vec<TraceRecord>,
    pub stop: StopReason,
}

/// Emits trace rows and decides on tolerance-based stopping.
pub(crate) struct Recorder<'a> {
    pub monitor: &'a Monitor,
    pub tol: Option<f64>,
    pub sink: &'a mut dyn FnMut(&TraceRecord),
    pub traces: Vec<TraceRecord>,
    start: Instant,
}

impl<'a> Recorder<'a> {
    pub fn new(monitor: &'a Monitor, tol: Option<f64>, sink: &'a mut dyn FnMut(&TraceRecord)) -> Self {
        Recorder {
            monitor,
            tol,
            sink,
            traces: vec![],
            start: Instant::now(),
        }
    }

    /// Cheap per-iteration check when the reference solution is known.
    pub fn dist_reached(&self, x: &Point) -> bool {
        match (&self.monitor.gap, self.tol) {
            (Some(g), Some(tol)) => g.dist_sq(x) <= tol,
            _ => false,
        }
    }

    /// Logs one row and returns whether the tolerance is met.
    pub fn log(&mut self, problem: &CompositeVIProblem, x: &Point, iter: u64, epoch: u64, calls: (u64, u64)) -> bool {
        let mut rec = TraceRecord {
            iter,
            epoch,
            oracle_h_calls: calls.0,
            oracle_g_calls: calls.1,
            dist_sq: None,
            q_gap: None,
            res_norm: None,
            cons_viol: None,
            obj_gap: None,
            wall_ms: 0.0,
        };
        self.monitor.measure(problem, x, &mut rec);
        rec.wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        (self.sink)(&rec);
        let reached = match (self.tol, rec.dist_sq, rec.res_norm) {
            (Some(tol), Some(d), _) => d <= tol,
            (Some(tol), None, Some(r)) => r <= tol,
            _ => false,
        };
        self.traces.push(rec);
        reached
    }
}
