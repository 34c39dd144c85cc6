//! Python bindings: build instances, run the solvers, read traces back as
//! lists of dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vrvi::baselines::run_extragradient;
use vrvi::constrained::{build_kkt_problem, perturb, ConstrainedProgram, KktProblem, LipschitzMode};
use vrvi::problems::{
    gen_bilinear_with_quadratic, gen_np_classification, gen_strongly_monotone, load_problem, parse_libsvm,
    save_problem, Loss, NpSpec, SetVariant, StoredProblem, SyntheticSpec,
};
use vrvi::run::{RunOptions, RunOutput, StopReason};
use vrvi::savrep::{check_param_constraints, default_params, momentum_params, SavrepParams};
use vrvi::savrep_m::SavrepMParams;
use vrvi::verify::{run_suite, Suite};
use vrvi::{savrep, savrep_m, CompositeVIProblem, GapEvaluator, Monitor, Point, TraceRecord, VrviError};

fn to_py(e: VrviError) -> PyErr {
    match e {
        VrviError::Io(e) => PyIOError::new_err(e.to_string()),
        e @ VrviError::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn point(v: Vec<f64>) -> PyResult<Point> {
    Point::new(v).map_err(to_py)
}

/// A composite VI instance, optionally with a known solution and, for
/// constrained programs, the data needed to report violation.
#[pyclass(module = "pyvrvi", frozen)]
struct Problem {
    inner: CompositeVIProblem,
    x_star: Option<Point>,
    kkt: Option<(KktProblem, ConstrainedProgram)>,
    stored: Option<StoredProblem>,
}

impl Problem {
    fn from_stored(stored: StoredProblem, dual_cap: f64) -> PyResult<Self> {
        match &stored {
            StoredProblem::Affine(inst) => Ok(Problem {
                inner: inst.problem().map_err(to_py)?,
                x_star: Some(inst.x_star.clone()),
                kkt: None,
                stored: Some(stored),
            }),
            StoredProblem::Np(inst) => {
                let program = inst.program().map_err(to_py)?;
                let kkt = build_kkt_problem(&program, dual_cap, LipschitzMode::ClosedForm).map_err(to_py)?;
                Ok(Problem {
                    inner: kkt.problem.clone(),
                    x_star: None,
                    kkt: Some((kkt, program)),
                    stored: Some(stored),
                })
            }
        }
    }

    fn monitor(&self) -> PyResult<Monitor> {
        let gap = match &self.x_star {
            Some(x) => Some(GapEvaluator::new(&self.inner, x.clone()).map_err(to_py)?),
            None => None,
        };
        let extra = self.kkt.as_ref().map(|(k, p)| k.metrics_hook(p, None));
        Ok(Monitor {
            gap,
            residual: true,
            extra,
        })
    }

    fn options(
        &self,
        seed: u64,
        budget: u64,
        tol: Option<f64>,
        x0: Option<Vec<f64>>,
        log_interval: Option<u64>,
    ) -> PyResult<RunOptions> {
        let mut opts = RunOptions::new(seed, budget);
        opts.tol = tol;
        opts.log_interval = log_interval;
        if let Some(x0) = x0 {
            opts.x0 = Some(point(x0)?);
        }
        Ok(opts)
    }
}

#[pymethods]
impl Problem {
    /// Random strongly monotone affine instance with quadratic `g` terms.
    #[staticmethod]
    #[pyo3(signature = (dim, m1, m2, mu_h, l_h=1.0, l_g=1.0, seed=1, radius=None))]
    #[allow(clippy::too_many_arguments)]
    fn strongly_monotone(
        dim: usize,
        m1: usize,
        m2: usize,
        mu_h: f64,
        l_h: f64,
        l_g: f64,
        seed: u64,
        radius: Option<f64>,
    ) -> PyResult<Self> {
        let mut spec = SyntheticSpec::new(dim, m1, m2, mu_h, l_h, l_g, seed);
        if let Some(radius) = radius {
            spec.set = SetVariant::Ball { radius };
        }
        Problem::from_stored(StoredProblem::Affine(gen_strongly_monotone(&spec).map_err(to_py)?), 0.0)
    }

    /// Monotone bilinear saddle instance on a product of unit balls.
    #[staticmethod]
    #[pyo3(signature = (n_x, n_y, m1, m2, l_g=1.0, seed=1))]
    fn bilinear(n_x: usize, n_y: usize, m1: usize, m2: usize, l_g: f64, seed: u64) -> PyResult<Self> {
        let inst = gen_bilinear_with_quadratic(n_x, n_y, m1, m2, l_g, seed).map_err(to_py)?;
        Problem::from_stored(StoredProblem::Affine(inst), 0.0)
    }

    /// KKT system of a Neyman-Pearson classification program; synthetic data
    /// unless a LIBSVM file is given.
    #[staticmethod]
    #[pyo3(signature = (dual_cap, n_features=50, n=200, m1=10, m2=10, loss="smoothed_hinge", r1=0.1, radius=5.0, seed=1, dataset=None))]
    #[allow(clippy::too_many_arguments)]
    fn neyman_pearson(
        dual_cap: f64,
        n_features: usize,
        n: usize,
        m1: usize,
        m2: usize,
        loss: &str,
        r1: f64,
        radius: f64,
        seed: u64,
        dataset: Option<PathBuf>,
    ) -> PyResult<Self> {
        let loss = Loss::from_name(loss).ok_or_else(|| PyValueError::new_err(format!("unknown loss '{loss}'")))?;
        let spec = NpSpec {
            n_features,
            n0: n,
            n1: n,
            m1,
            m2,
            loss,
            lambda: radius,
            r1,
            seed,
            ..NpSpec::default()
        };
        let data = dataset.map(parse_libsvm).transpose().map_err(to_py)?;
        let inst = gen_np_classification(&spec, data.as_ref()).map_err(to_py)?;
        Problem::from_stored(StoredProblem::Np(inst), dual_cap)
    }

    /// `dual_cap` is needed only for Neyman-Pearson instances.
    #[staticmethod]
    #[pyo3(signature = (path, dual_cap=None))]
    fn load(path: PathBuf, dual_cap: Option<f64>) -> PyResult<Self> {
        let stored = load_problem(&path).map_err(to_py)?;
        if matches!(stored, StoredProblem::Np(_)) && dual_cap.is_none() {
            return Err(PyValueError::new_err(
                "dual_cap is required for Neyman-Pearson instances",
            ));
        }
        Problem::from_stored(stored, dual_cap.unwrap_or(0.0))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let stored = self
            .stored
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("only generated instances can be saved"))?;
        save_problem(&path, stored).map_err(to_py)
    }

    /// Copy with `mu * (x - anchor)` added to the operator.
    fn perturb(&self, mu: f64) -> PyResult<Self> {
        Ok(Problem {
            inner: perturb(&self.inner, mu, 0).map_err(to_py)?,
            x_star: None,
            kkt: self.kkt.clone(),
            stored: None,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn m1(&self) -> usize {
        self.inner.m1()
    }

    #[getter]
    fn m2(&self) -> usize {
        self.inner.m2()
    }

    #[getter]
    fn l_h(&self) -> f64 {
        self.inner.l_h()
    }

    #[getter]
    fn l_g(&self) -> f64 {
        self.inner.l_g()
    }

    #[getter]
    fn mu_h(&self) -> Option<f64> {
        self.inner.mu_h
    }

    #[getter]
    fn x_star(&self) -> Option<Vec<f64>> {
        self.x_star.clone().map(Point::into_vec)
    }

    /// `sum H_i(x) + sum grad g_i(x)`.
    fn operator(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = point(x)?;
        check_len(&self.inner, &x)?;
        Ok(self.inner.operator(&x).into_vec())
    }

    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = point(x)?;
        check_len(&self.inner, &x)?;
        Ok(self.inner.project(&x).into_vec())
    }

    fn residual_norm(&self, x: Vec<f64>) -> PyResult<f64> {
        let x = point(x)?;
        check_len(&self.inner, &x)?;
        Ok(vrvi::residual_norm(&self.inner, &x))
    }

    fn q_gap(&self, x: Vec<f64>) -> PyResult<f64> {
        let x_star = self
            .x_star
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("no reference solution"))?;
        let eval = GapEvaluator::new(&self.inner, x_star.clone()).map_err(to_py)?;
        vrvi::q_gap(&eval, &point(x)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(dim={}, m1={}, m2={}, l_h={:.4}, l_g={:.4}, mu_h={})",
            self.inner.dim(),
            self.inner.m1(),
            self.inner.m2(),
            self.inner.l_h(),
            self.inner.l_g(),
            self.inner.mu_h.map_or_else(|| "None".to_string(), |m| m.to_string())
        )
    }
}

fn check_len(p: &CompositeVIProblem, x: &Point) -> PyResult<()> {
    if x.dim() != p.dim() {
        return Err(to_py(VrviError::DimensionMismatch {
            expected: p.dim(),
            got: x.dim(),
        }));
    }
    Ok(())
}

fn trace_dict<'py>(py: Python<'py>, r: &TraceRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iter", r.iter)?;
    d.set_item("epoch", r.epoch)?;
    d.set_item("oracle_h_calls", r.oracle_h_calls)?;
    d.set_item("oracle_g_calls", r.oracle_g_calls)?;
    d.set_item("dist_sq", r.dist_sq)?;
    d.set_item("q_gap", r.q_gap)?;
    d.set_item("res_norm", r.res_norm)?;
    d.set_item("cons_viol", r.cons_viol)?;
    d.set_item("obj_gap", r.obj_gap)?;
    d.set_item("wall_ms", r.wall_ms)?;
    Ok(d)
}

fn result_dict<'py, S>(py: Python<'py>, out: &RunOutput<S>, x: &Point) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("x", x.as_slice().to_vec())?;
    let stop = match out.stop {
        StopReason::Budget => "budget",
        StopReason::MaxIters => "max_iters",
        StopReason::Tolerance => "tolerance",
    };
    d.set_item("stop", stop)?;
    let traces = out
        .traces
        .iter()
        .map(|r| trace_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("traces", traces)?;
    Ok(d)
}

fn params_dict<'py>(py: Python<'py>, p: &SavrepParams) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in [
        ("gamma", p.gamma),
        ("alpha", p.alpha),
        ("beta", p.beta),
        ("phi", p.phi),
        ("p1", p.p1),
        ("p2", p.p2),
        ("mu_h", p.mu_h),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Step sizes and probabilities of the strongly monotone solver. `momentum`
/// picks the variant suited to very small `mu_h`.
#[pyfunction]
#[pyo3(signature = (mu_h, l_h, l_g, m1, m2, momentum=false))]
fn savrep_params<'py>(
    py: Python<'py>,
    mu_h: f64,
    l_h: f64,
    l_g: f64,
    m1: usize,
    m2: usize,
    momentum: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = if momentum {
        momentum_params(mu_h, l_h, l_g, m1, m2)
    } else {
        default_params(mu_h, l_h, l_g, m1, m2)
    };
    params_dict(py, &p.map_err(to_py)?)
}

/// Runs SAVREP; needs `mu_h` (generated or from `perturb`).
#[pyfunction]
#[pyo3(signature = (problem, budget, seed=1, tol=None, x0=None, log_interval=None, momentum=false))]
#[allow(clippy::too_many_arguments)]
fn solve_savrep<'py>(
    py: Python<'py>,
    problem: &Problem,
    budget: u64,
    seed: u64,
    tol: Option<f64>,
    x0: Option<Vec<f64>>,
    log_interval: Option<u64>,
    momentum: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &problem.inner;
    let mu = p
        .mu_h
        .ok_or_else(|| PyValueError::new_err("problem has no mu_h; call perturb(mu) first"))?;
    let params = if momentum {
        momentum_params(mu, p.l_h(), p.l_g(), p.m1(), p.m2())
    } else {
        default_params(mu, p.l_h(), p.l_g(), p.m1(), p.m2())
    }
    .map_err(to_py)?;
    let report = check_param_constraints(&params, p.l_h(), p.l_g());
    if !report.is_ok() {
        return Err(PyValueError::new_err(format!(
            "parameters violate the step-size conditions: {report:?}"
        )));
    }
    let opts = problem.options(seed, budget, tol, x0, log_interval)?;
    let monitor = problem.monitor()?;
    let out = py
        .detach(|| savrep::run(p, &params, &opts, &monitor, &mut |_| {}))
        .map_err(to_py)?;
    result_dict(py, &out, &out.state.x)
}

/// Runs SAVREP-m on a monotone problem; the returned `x` is the epoch anchor.
#[pyfunction]
#[pyo3(signature = (problem, budget, seed=1, tol=None, x0=None, log_interval=None))]
fn solve_savrep_m<'py>(
    py: Python<'py>,
    problem: &Problem,
    budget: u64,
    seed: u64,
    tol: Option<f64>,
    x0: Option<Vec<f64>>,
    log_interval: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let params = SavrepMParams::for_problem(&problem.inner, 0.0);
    let opts = problem.options(seed, budget, tol, x0, log_interval)?;
    let monitor = problem.monitor()?;
    let out = py
        .detach(|| savrep_m::run(&problem.inner, &params, &opts, &monitor, &mut |_| {}))
        .map_err(to_py)?;
    result_dict(py, &out, &out.state.inner.w_bar)
}

/// Deterministic two-projection extragradient with step `0.5 / (L_h + L_g)`.
#[pyfunction]
#[pyo3(signature = (problem, budget, seed=1, tol=None, x0=None, log_interval=None))]
fn solve_extragradient<'py>(
    py: Python<'py>,
    problem: &Problem,
    budget: u64,
    seed: u64,
    tol: Option<f64>,
    x0: Option<Vec<f64>>,
    log_interval: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &problem.inner;
    let step = 0.5 / (p.l_h() + p.l_g());
    let opts = problem.options(seed, budget, tol, x0, log_interval)?;
    let monitor = problem.monitor()?;
    let out = py
        .detach(|| run_extragradient(p, step, &opts, &monitor, &mut |_| {}))
        .map_err(to_py)?;
    result_dict(py, &out, &out.state)
}

/// Runs a verification suite; returns `(passed, [(condition, slack, holds)])`.
#[pyfunction]
fn verify(suite: &str) -> PyResult<(bool, Vec<(String, f64, bool)>)> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let rep = run_suite(suite).map_err(to_py)?;
    let rows = rep
        .conditions
        .iter()
        .map(|c| (c.name.clone(), c.slack, c.holds))
        .collect();
    Ok((rep.is_ok(), rows))
}

/// Reads a LIBSVM file into `(labels, rows, n_features)`; rows are lists of
/// `(index, value)` with 0-based indices.
#[pyfunction]
fn read_libsvm(path: PathBuf) -> PyResult<(Vec<f64>, Vec<Vec<(usize, f64)>>, usize)> {
    let ds = parse_libsvm(&path).map_err(to_py)?;
    let labels = ds.rows.iter().map(|r| r.label).collect();
    let rows = ds.rows.into_iter().map(|r| r.features).collect();
    Ok((labels, rows, ds.n_features))
}

#[pymodule]
fn pyvrvi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_function(wrap_pyfunction!(savrep_params, m)?)?;
    m.add_function(wrap_pyfunction!(solve_savrep, m)?)?;
    m.add_function(wrap_pyfunction!(solve_savrep_m, m)?)?;
    m.add_function(wrap_pyfunction!(solve_extragradient, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(read_libsvm, m)?)?;
    Ok(())
}
