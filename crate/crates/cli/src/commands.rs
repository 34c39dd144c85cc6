use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use vrvi::baselines::run_extragradient;
use vrvi::metrics::{mean_traces, write_csv, CSV_HEADER};
use vrvi::oracle::compute_theory_constants;
use vrvi::problems::save_problem;
use vrvi::report::ConditionReport;
use vrvi::rng::{stream, stream_rng};
use vrvi::run::RunOptions;
use vrvi::savrep::{default_params, momentum_params};
use vrvi::savrep_m::SavrepMParams;
use vrvi::verify::{injected_violation, run_suite, Suite};
use vrvi::{savrep, savrep_m, CompositeVIProblem, GapEvaluator, Monitor, Point, Result, TraceRecord, VrviError};

use crate::build::{build, stored_instance, Built};
use crate::config::{ExperimentConfig, ProblemSpec, Solver};

/// Final row of one run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub solver: Solver,
    pub seed: u64,
    pub last: TraceRecord,
    pub traces: Vec<TraceRecord>,
}

fn monitor_for(built: &Built, x_star: Option<&Point>) -> Monitor {
    let gap = x_star.and_then(|x| GapEvaluator::new(&built.base, x.clone()).ok());
    let extra = built.kkt.as_ref().map(|k| {
        let f_star = x_star.map(|z| k.program.objective_value(&k.kkt.primal(z)));
        k.kkt.metrics_hook(&k.program, f_star)
    });
    Monitor {
        gap,
        residual: true,
        extra,
    }
}

/// CSV writer that flushes each row, so partial traces survive a divergence.
struct TraceFile {
    out: BufWriter<File>,
    wall_clock: bool,
    error: Option<std::io::Error>,
}

impl TraceFile {
    fn create(path: &Path, wall_clock: bool) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(TraceFile {
            out,
            wall_clock,
            error: None,
        })
    }

    fn push(&mut self, rec: &TraceRecord) {
        let mut rec = rec.clone();
        if !self.wall_clock {
            rec.wall_ms = 0.0;
        }
        if self.error.is_none() {
            if let Err(e) = writeln!(self.out, "{}", rec.to_csv_row()).and_then(|_| self.out.flush()) {
                self.error = Some(e);
            }
        }
    }

    fn finish(mut self) -> Result<()> {
        match self.error.take() {
            Some(e) => Err(e.into()),
            None => Ok(self.out.flush()?),
        }
    }
}

fn strip_wall(traces: &mut [TraceRecord], wall_clock: bool) {
    if !wall_clock {
        traces.iter_mut().for_each(|r| r.wall_ms = 0.0);
    }
}

fn run_one(
    solver: Solver,
    cfg: &ExperimentConfig,
    built: &Built,
    problem: &CompositeVIProblem,
    monitor: &Monitor,
    seed: u64,
    path: &Path,
) -> Result<RunSummary> {
    let mut file = TraceFile::create(path, cfg.wall_clock)?;
    let mut opts = RunOptions::new(seed, cfg.budget);
    opts.tol = cfg.tol;
    opts.log_interval = cfg.log_interval;
    if cfg.random_start {
        opts.x0 = Some(problem.set.sample(&mut stream_rng(seed, stream::INIT), 1.0));
    }
    let mut sink = |r: &TraceRecord| file.push(r);
    let batch = cfg.noise.batch;
    let traces = match solver {
        Solver::Savrep => {
            let mu = problem.mu_h.ok_or_else(|| {
                VrviError::Config("savrep needs a strongly monotone problem or perturbation.mu > 0".into())
            })?;
            let (lh, lg, m1, m2) = (problem.l_h(), problem.l_g(), problem.m1(), problem.m2());
            let mut params = if built.perturbed_only {
                momentum_params(mu, lh, lg, m1, m2)?
            } else {
                default_params(mu, lh, lg, m1, m2)?
            };
            params.batch = batch;
            savrep::run(problem, &params, &opts, monitor, &mut sink)?.traces
        }
        Solver::SavrepM => {
            let theory = compute_theory_constants(&problem.h, &problem.g, &problem.noise_h, &problem.noise_g, 0.75)?;
            let mut params = SavrepMParams::for_problem(problem, theory.delta_cap / batch as f64);
            params.batch = batch;
            savrep_m::run(problem, &params, &opts, monitor, &mut sink)?.traces
        }
        Solver::Extragradient => {
            let step = 0.5 / (problem.l_h() + problem.l_g());
            run_extragradient(problem, step, &opts, monitor, &mut sink)?.traces
        }
    };
    file.finish()?;
    let mut traces = traces;
    strip_wall(&mut traces, cfg.wall_clock);
    let last = traces.last().cloned().expect("every run logs its start");
    Ok(RunSummary {
        solver,
        seed,
        last,
        traces,
    })
}

/// Runs one solver for every seed in parallel; writes `<prefix>seed_<s>.csv`
/// and `<prefix>mean.csv` into the output directory.
fn run_seeds(
    solver: Solver,
    cfg: &ExperimentConfig,
    built: &Built,
    problem: &CompositeVIProblem,
    monitor: &Monitor,
    prefix: &str,
) -> Result<Vec<RunSummary>> {
    let dir = &cfg.output;
    let results: Mutex<Vec<(usize, Result<RunSummary>)>> = Mutex::new(vec![]);
    std::thread::scope(|s| {
        for (k, &seed) in cfg.seeds.iter().enumerate() {
            let results = &results;
            s.spawn(move || {
                let path = dir.join(format!("{prefix}seed_{seed}.csv"));
                let r = run_one(solver, cfg, built, problem, monitor, seed, &path);
                results.lock().expect("no poisoned runs").push((k, r));
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned runs");
    results.sort_by_key(|r| r.0);
    let summaries = results.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;
    let all: Vec<Vec<TraceRecord>> = summaries.iter().map(|s| s.traces.clone()).collect();
    write_csv(
        BufWriter::new(File::create(dir.join(format!("{prefix}mean.csv")))?),
        &mean_traces(&all),
    )?;
    Ok(summaries)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
}

pub fn print_table(rows: &[RunSummary]) {
    println!(
        "{:<14} {:>6} {:>12} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "solver", "seed", "calls", "dist_sq", "q_gap", "res_norm", "cons_viol", "obj_gap"
    );
    for r in rows {
        let l = &r.last;
        println!(
            "{:<14} {:>6} {:>12} {:>11} {:>11} {:>11} {:>11} {:>11}",
            r.solver.name(),
            r.seed,
            l.oracle_calls(),
            fmt_opt(l.dist_sq),
            fmt_opt(l.q_gap),
            fmt_opt(l.res_norm),
            fmt_opt(l.cons_viol),
            fmt_opt(l.obj_gap)
        );
    }
}

fn prepare_output(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output)?;
    std::fs::write(cfg.output.join("config.txt"), cfg.to_text())?;
    Ok(())
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    prepare_output(cfg)?;
    let built = build(cfg, true)?;
    let monitor = monitor_for(&built, built.x_star.as_ref());
    let rows = run_seeds(cfg.solver, cfg, &built, &built.problem, &monitor, "")?;
    print_table(&rows);
    Ok(rows)
}

/// SAVREP on the perturbed KKT system and SAVREP-m on the unperturbed one,
/// both measured against the unperturbed reference.
pub fn cmd_bench_np(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let is_np = match &cfg.problem {
        ProblemSpec::Np { .. } => true,
        ProblemSpec::File { .. } => matches!(stored_instance(&cfg.problem)?, vrvi::problems::StoredProblem::Np(_)),
        _ => false,
    };
    if !is_np {
        return Err(VrviError::Config(
            "bench-np needs problem.kind = np (or a stored NP instance)".into(),
        ));
    }
    if !(cfg.perturbation > 0.0) {
        return Err(VrviError::Config("bench-np needs perturbation.mu > 0".into()));
    }
    prepare_output(cfg)?;
    let built = build(cfg, true)?;
    let monitor = monitor_for(&built, built.x_star.as_ref());
    let mut rows = run_seeds(Solver::Savrep, cfg, &built, &built.problem, &monitor, "savrep_")?;
    let mut unperturbed = built.base.clone();
    unperturbed.noise_h = built.problem.noise_h.clone();
    unperturbed.noise_g = built.problem.noise_g.clone();
    rows.extend(run_seeds(
        Solver::SavrepM,
        cfg,
        &built,
        &unperturbed,
        &monitor,
        "savrep_m_",
    )?);
    print_table(&rows);
    Ok(rows)
}

pub fn cmd_gen(cfg: &ExperimentConfig, out: &PathBuf) -> Result<()> {
    if let ProblemSpec::File { .. } = cfg.problem {
        return Err(VrviError::Config("gen needs a generator kind, not a file".into()));
    }
    save_problem(out, &stored_instance(&cfg.problem)?)
}

/// Runs the suites and prints a table; returns whether everything passed.
pub fn cmd_verify(suites: &[Suite], inject_violation: bool) -> Result<bool> {
    let mut all_ok = true;
    let mut reports: Vec<(String, ConditionReport)> = vec![];
    for &s in suites {
        reports.push((s.name().to_string(), run_suite(s)?));
    }
    if inject_violation {
        reports.push(("injected".into(), injected_violation()?));
    }
    for (name, rep) in &reports {
        for c in &rep.conditions {
            let tag = if c.holds { "pass" } else { "FAIL" };
            println!("{tag}  {name:<13} {} (slack {:.3e})", c.name, c.slack);
        }
        let ok = rep.is_ok();
        all_ok &= ok;
        println!("{name}: {}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(all_ok)
}
