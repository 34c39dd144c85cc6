//! Double-loop variant for merely monotone composite VIs: `w_bar` is the
//! average of the `v` iterates over each epoch of `m2` iterations.

use crate::error::{Result, VrviError};
use crate::metrics::{Monitor, TraceRecord};
use crate::point::Point;
use crate::problem::CompositeVIProblem;
use crate::report::ConditionReport;
use crate::run::{Recorder, RunOptions, RunOutput, StopReason};
use crate::savrep::{extra_point_update, maybe_refresh_w, SavrepState};

const CHECK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SavrepMParams {
    pub q: f64,
    pub p1: f64,
    /// Diameter bound of the feasible set.
    pub omega_z: Option<f64>,
    /// Stochastic error level; 0 for exact oracles.
    pub delta_cap: f64,
    pub l_h: f64,
    pub l_g: f64,
    pub m1: usize,
    pub m2: usize,
    pub batch: usize,
}

impl SavrepMParams {
    /// `q = 3/4`, `p1 = 1/m1` (1/2 when `m1 < 2`) and the problem's diameter.
    pub fn for_problem(problem: &CompositeVIProblem, delta_cap: f64) -> Self {
        SavrepMParams {
            q: 0.75,
            p1: 1.0 / problem.m1().max(2) as f64,
            omega_z: problem.diameter(),
            delta_cap,
            l_h: problem.l_h(),
            l_g: problem.l_g(),
            m1: problem.m1(),
            m2: problem.m2(),
            batch: 1,
        }
    }

    /// Iterations per epoch.
    pub fn epoch_len(&self) -> usize {
        self.m2.max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Coefficients for epoch `s`.
pub fn schedule(s: usize, params: &SavrepMParams) -> Result<EpochCoefficients> {
    let sf = s as f64;
    let noise_term = if params.delta_cap > 0.0 {
        let omega = params.omega_z.ok_or_else(|| {
            VrviError::Config("a diameter bound is required when the stochastic error is positive".into())
        })?;
        (sf + 1.0) * ((sf + 1.0) * params.delta_cap * params.m2 as f64).sqrt() / omega
    } else {
        0.0
    };
    let denom = 24.0 * (params.l_g + (sf + 1.0) * params.l_h * (params.m1 as f64).sqrt()) + noise_term;
    Ok(EpochCoefficients {
        alpha: 2.0 / (sf + 4.0),
        beta: 0.5,
        gamma: (sf + 3.0) / denom,
    })
}

/// `Gamma_0 = 1`, `Gamma_s = (1 - alpha_{s-1}) Gamma_{s-1}` for `s = 0..=n`.
pub fn gamma_products(params: &SavrepMParams, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    for s in 1..=n {
        let a = schedule(s - 1, params)?.alpha;
        out.push((1.0 - a) * out[s - 1]);
    }
    Ok(out)
}

/// Checks the sublinear-rate conditions for epochs `0..epochs`.
pub fn check_conditions(params: &SavrepMParams, epochs: usize) -> Result<ConditionReport> {
    check_conditions_with(params, epochs, |s| schedule(s, params))
}

/// Same as [`check_conditions`] for an arbitrary coefficient sequence.
pub fn check_conditions_with(
    params: &SavrepMParams,
    epochs: usize,
    coeffs: impl Fn(usize) -> Result<EpochCoefficients>,
) -> Result<ConditionReport> {
    if epochs == 0 {
        return Err(VrviError::InvalidArgument("need at least one epoch".into()));
    }
    let mut r = ConditionReport::default();
    r.check("p1 < q", params.q - params.p1, 0.0);
    r.check("q < 1", 1.0 - params.q, 0.0);
    let c: Vec<EpochCoefficients> = (0..epochs).map(&coeffs).collect::<Result<_>>()?;
    let mut big_gamma = vec![1.0];
    for s in 0..epochs {
        big_gamma.push((1.0 - c[s].alpha) * big_gamma[s]);
    }
    for s in 0..epochs {
        let EpochCoefficients { alpha, beta, gamma } = c[s];
        r.check(
            format!("epoch {s}: p1 - 2 gamma^2 L_h^2 >= 0"),
            params.p1 - 2.0 * gamma * gamma * params.l_h * params.l_h,
            CHECK_TOL,
        );
        r.check(
            format!("epoch {s}: q - p1 - alpha gamma L_g - alpha gamma L_g / beta >= 0"),
            params.q - params.p1 - alpha * gamma * params.l_g - alpha * gamma * params.l_g / beta,
            CHECK_TOL,
        );
        r.check(
            format!("epoch {s}: 1 - alpha - beta >= 0"),
            1.0 - alpha - beta,
            CHECK_TOL,
        );
        if s > 0 {
            let prev = c[s - 1];
            let lhs = prev.alpha / (prev.gamma * big_gamma[s]);
            let rhs = alpha / (gamma * big_gamma[s + 1]);
            r.check(
                format!("epoch {s}: alpha/(gamma Gamma) nondecreasing"),
                (rhs - lhs) / rhs.abs().max(1.0),
                CHECK_TOL,
            );
            r.check(
                format!("epoch {s}: beta/(1 - alpha) <= alpha_prev + beta_prev"),
                prev.alpha + prev.beta - beta / (1.0 - alpha),
                CHECK_TOL,
            );
        }
    }
    Ok(r)
}

/// Four-term bound on the expected gap of `w_bar` after `k` iterations.
pub fn rate_bound(params: &SavrepMParams, k: u64, q0: f64) -> Result<f64> {
    let omega = params
        .omega_z
        .ok_or_else(|| VrviError::Config("rate bound needs a diameter".into()))?;
    let (k, m1, m2) = (k as f64, params.m1 as f64, params.epoch_len() as f64);
    let o2 = omega * omega;
    Ok(24.0 * m2 * m2 / (k * k) * q0
        + 48.0 * m2 / (k * k) * params.l_g * o2
        + 48.0 / k * params.l_h * m1.sqrt() * o2
        + 26.0 * omega * params.delta_cap.sqrt() / k.sqrt())
}

#[derive(Clone, Debug)]
pub struct SavrepMState {
    pub inner: SavrepState,
    /// Running sum of the `v` iterates of the current epoch.
    pub v_buffer: Point,
    pub epoch: u64,
    pub inner_index: usize,
    /// Coefficients used in the last completed step.
    pub last_coefficients: Option<EpochCoefficients>,
}

impl SavrepMState {
    pub fn new(problem: &CompositeVIProblem, x0: &Point, seed: u64) -> Result<Self> {
        let inner = SavrepState::new(problem, x0, seed)?;
        Ok(SavrepMState {
            v_buffer: Point::zeros(inner.x.dim()),
            inner,
            epoch: 0,
            inner_index: 0,
            last_coefficients: None,
        })
    }

    pub fn iter(&self) -> u64 {
        self.inner.iter
    }

    pub fn w_bar(&self) -> &Point {
        &self.inner.w_bar
    }
}

pub fn step(state: &mut SavrepMState, params: &SavrepMParams, problem: &CompositeVIProblem) -> Result<()> {
    let c = schedule(state.epoch as usize, params)?;
    let (_x_half, x_new, v_new) = extra_point_update(
        &mut state.inner,
        problem,
        c.gamma,
        c.alpha,
        c.beta,
        params.p1,
        params.batch,
    )?;
    let st = &mut state.inner;
    st.x = x_new;
    st.v = v_new;
    maybe_refresh_w(st, problem, params.p1);
    state.v_buffer.add_assign(&st.v);
    state.inner_index += 1;
    let len = params.epoch_len();
    if state.inner_index == len {
        let avg = Point::new(state.v_buffer.iter().map(|v| v / len as f64).collect())?;
        st.w_bar = avg;
        st.g_cache = crate::oracle::refresh_snapshot(
            &problem.g,
            &problem.noise_g,
            &st.w_bar,
            &mut st.rng.noise_g,
            &mut st.g_calls,
        );
        st.w_bar_refreshes += 1;
        state.v_buffer = Point::zeros(st.x.dim());
        state.inner_index = 0;
        state.epoch += 1;
    }
    st.iter += 1;
    state.last_coefficients = Some(c);
    Ok(())
}

/// Runs whole epochs; rows are logged at epoch boundaries and measure `w_bar`.
/// `opts.log_interval` counts epochs here (default 1).
pub fn run(
    problem: &CompositeVIProblem,
    params: &SavrepMParams,
    opts: &RunOptions,
    monitor: &Monitor,
    sink: &mut dyn FnMut(&TraceRecord),
) -> Result<RunOutput<SavrepMState>> {
    let report = check_conditions(params, 1)?;
    if !report.is_ok() {
        return Err(VrviError::Config(format!("parameters violate:\n{report}")));
    }
    let mut state = SavrepMState::new(problem, &opts.start_point(problem), opts.seed)?;
    let every = opts.log_interval.unwrap_or(1).max(1);
    let mut rec = Recorder::new(monitor, opts.tol, sink);
    let calls = |s: &SavrepMState| (s.inner.h_calls, s.inner.g_calls);
    if rec.log(problem, state.w_bar(), 0, 0, calls(&state)) {
        return Ok(RunOutput {
            traces: rec.traces,
            state,
            stop: StopReason::Tolerance,
        });
    }
    let mut last_logged = 0;
    let stop = loop {
        if state.inner.oracle_calls() >= opts.budget {
            break StopReason::Budget;
        }
        if opts.max_iters.is_some_and(|m| state.iter() >= m) {
            break StopReason::MaxIters;
        }
        step(&mut state, params, problem)?;
        if state.inner_index == 0 && state.epoch % every == 0 {
            last_logged = state.iter();
            if rec.log(problem, state.w_bar(), state.iter(), state.epoch, calls(&state)) {
                break StopReason::Tolerance;
            }
        }
    };
    if last_logged != state.iter() {
        rec.log(problem, state.w_bar(), state.iter(), state.epoch, calls(&state));
    }
    Ok(RunOutput {
        traces: rec.traces,
        state,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::component::{AffineComponent, ScaledIdentity, SharedComponent};
    use crate::linalg::DenseMatrix;
    use crate::oracle::ComponentFamily;
    use crate::sets::ConstraintSet;
    use std::sync::Arc;

    fn base_params(m1: usize, m2: usize) -> SavrepMParams {
        SavrepMParams {
            q: 0.75,
            p1: 1.0 / m1 as f64,
            omega_z: Some(2.0),
            delta_cap: 0.0,
            l_h: 1.0,
            l_g: 1.0,
            m1,
            m2,
            batch: 1,
        }
    }

    #[test]
    fn schedule_examples() {
        let prm = base_params(4, 3);
        let c = schedule(0, &prm).unwrap();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.beta, 0.5);
        assert!((c.gamma - 1.0 / 24.0).abs() < 1e-15);
        assert!((schedule(10, &prm).unwrap().alpha - 2.0 / 14.0).abs() < 1e-15);
        let noisy = SavrepMParams {
            delta_cap: 1.0,
            omega_z: None,
            ..prm
        };
        assert!(matches!(schedule(0, &noisy), Err(VrviError::Config(_))));
        let noisy = SavrepMParams { delta_cap: 1.0, ..prm };
        assert!(schedule(0, &noisy).unwrap().gamma < c.gamma);
    }

    #[test]
    fn gamma_products_match_closed_form() {
        let g = gamma_products(&base_params(4, 3), 60).unwrap();
        for (s, v) in g.iter().enumerate() {
            let s = s as f64;
            assert!((v - 6.0 / ((s + 2.0) * (s + 3.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn default_conditions_hold() {
        for m1 in [2, 3, 8, 50] {
            for (lh, lg) in [(1.0, 1.0), (10.0, 0.1), (0.1, 10.0)] {
                let prm = SavrepMParams {
                    l_h: lh,
                    l_g: lg,
                    ..base_params(m1, 5)
                };
                let r = check_conditions(&prm, 51).unwrap();
                assert!(r.is_ok(), "{r}");
                for s in 0..51 {
                    let c = schedule(s, &prm).unwrap();
                    assert!(prm.p1 + 3.0 * c.alpha * c.gamma * lg <= 0.75);
                }
            }
        }
    }

    #[test]
    fn violations_are_reported() {
        let prm = SavrepMParams {
            q: 0.5,
            p1: 0.5,
            ..base_params(2, 2)
        };
        let r = check_conditions(&prm, 1).unwrap();
        assert!(r.violations().iter().any(|c| c.name.starts_with("epoch 0: q - p1")));
        let prm = base_params(4, 2);
        let r = check_conditions_with(&prm, 2, |_| {
            Ok(EpochCoefficients {
                alpha: 0.6,
                beta: 0.6,
                gamma: 0.01,
            })
        })
        .unwrap();
        assert!(r.violations().iter().any(|c| c.name.ends_with("1 - alpha - beta >= 0")));
        assert!(check_conditions(&prm, 0).is_err());
    }

    fn rotation_problem(m2: usize) -> CompositeVIProblem {
        let rot = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let h = ComponentFamily::new(
            2,
            vec![
                Arc::new(AffineComponent::linear(rot.scale(0.5))) as SharedComponent,
                Arc::new(AffineComponent::linear(rot.scale(0.5))),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let g = ComponentFamily::new(
            2,
            (0..m2)
                .map(|_| Arc::new(ScaledIdentity { dim: 2, factor: 0.1 }) as SharedComponent)
                .collect(),
            vec![0.1; m2],
        )
        .unwrap();
        CompositeVIProblem::new(h, g, ConstraintSet::unit_ball(2)).unwrap()
    }

    #[test]
    fn epoch_average_is_exact() {
        let prob = rotation_problem(3);
        let prm = SavrepMParams::for_problem(&prob, 0.0);
        let mut st = SavrepMState::new(&prob, &Point::new(vec![0.6, 0.3]).unwrap(), 1).unwrap();
        let mut vs = vec![];
        let mut coeffs = vec![];
        for _ in 0..3 {
            step(&mut st, &prm, &prob).unwrap();
            vs.push(st.inner.v.clone());
            coeffs.push(st.last_coefficients.unwrap());
        }
        let mut sum = Point::zeros(2);
        for v in &vs {
            sum.add_assign(v);
        }
        let expect = Point::new(sum.iter().map(|v| v / 3.0).collect()).unwrap();
        assert_eq!(st.inner.w_bar, expect);
        assert_eq!(st.inner.g_cache.anchor, expect);
        assert!(coeffs.windows(2).all(|w| w[0] == w[1]));
        assert!(prob.set.project(&st.inner.w_bar).unwrap().dist(&st.inner.w_bar) <= 1e-12);
        assert_eq!(st.epoch, 1);
    }

    #[test]
    fn single_component_epoch_refreshes_each_step() {
        let prob = rotation_problem(1);
        let prm = SavrepMParams::for_problem(&prob, 0.0);
        let mut st = SavrepMState::new(&prob, &Point::new(vec![0.6, 0.3]).unwrap(), 2).unwrap();
        for k in 1..5 {
            step(&mut st, &prm, &prob).unwrap();
            assert_eq!(st.inner.w_bar, st.inner.v);
            assert_eq!(st.epoch, k);
        }
    }

    #[test]
    fn runs_are_reproducible_and_gap_decreases() {
        let prob = rotation_problem(2);
        let prm = SavrepMParams::for_problem(&prob, 0.0);
        let gap = crate::metrics::GapEvaluator::new(&prob, Point::zeros(2)).unwrap();
        let monitor = Monitor::with_gap(gap);
        let opts = RunOptions::new(4, 40_000).with_x0(Point::new(vec![0.6, 0.8]).unwrap());
        let a = run(&prob, &prm, &opts, &monitor, &mut |_| {}).unwrap();
        let b = run(&prob, &prm, &opts, &monitor, &mut |_| {}).unwrap();
        let strip = |t: &[TraceRecord]| t.iter().map(|r| (r.iter, r.q_gap, r.dist_sq)).collect::<Vec<_>>();
        assert_eq!(strip(&a.traces), strip(&b.traces));
        let first = a.traces[0].q_gap.unwrap();
        let last = a.traces.last().unwrap().q_gap.unwrap();
        assert!(last < 1e-2 * first, "{first} -> {last}");
        let zero = run(&prob, &prm, &RunOptions::new(4, 0), &monitor, &mut |_| {}).unwrap();
        assert_eq!(zero.traces.len(), 1);
    }
}
