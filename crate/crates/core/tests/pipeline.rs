use std::io::Cursor;

use vrvi::baselines::run_extragradient;
use vrvi::constrained::{build_kkt_problem, constraint_violation, perturb, LipschitzMode};
use vrvi::metrics::{read_csv, write_csv};
use vrvi::problems::{
    gen_np_classification, gen_strongly_monotone, load_problem, save_problem, NpSpec, StoredProblem, SyntheticSpec,
};
use vrvi::run::{RunOptions, StopReason};
use vrvi::savrep::{default_params, momentum_params};
use vrvi::savrep_m::SavrepMParams;
use vrvi::{savrep, savrep_m, GapEvaluator, Monitor, Point, TraceRecord};

#[test]
fn savrep_trace_survives_csv_round_trip() {
    let inst = gen_strongly_monotone(&SyntheticSpec::new(12, 8, 4, 0.2, 1.0, 1.0, 3)).unwrap();
    let prob = inst.problem().unwrap();
    let monitor = Monitor::with_gap(GapEvaluator::new(&prob, inst.x_star.clone()).unwrap());
    let params = default_params(0.2, prob.l_h(), prob.l_g(), 8, 4).unwrap();
    let mut streamed = vec![];
    let out = savrep::run(&prob, &params, &RunOptions::new(9, 20_000), &monitor, &mut |r| {
        streamed.push(r.clone())
    })
    .unwrap();
    assert_eq!(streamed, out.traces);

    let mut buf = vec![];
    write_csv(&mut buf, &out.traces).unwrap();
    assert_eq!(read_csv(Cursor::new(buf)).unwrap(), out.traces);

    let calls: Vec<u64> = out.traces.iter().map(TraceRecord::oracle_calls).collect();
    // evaluations exactly at a snapshot anchor are free, so calls may stall
    assert!(calls.windows(2).all(|w| w[0] <= w[1]));
    assert!(out.traces.last().unwrap().dist_sq.unwrap() < 1e-3 * out.traces[0].dist_sq.unwrap());
}

#[test]
fn solvers_agree_on_the_solution() {
    let inst = gen_strongly_monotone(&SyntheticSpec::new(10, 6, 6, 0.3, 1.0, 2.0, 11)).unwrap();
    let prob = inst.problem().unwrap();
    let monitor = Monitor::with_gap(GapEvaluator::new(&prob, inst.x_star.clone()).unwrap());
    let x0 = Point::new(vec![1.0; 10]).unwrap();
    let opts = RunOptions::new(4, 2_000_000).with_x0(x0).with_tol(1e-12);
    let mut sink = |_: &TraceRecord| {};

    let a = savrep::run(
        &prob,
        &default_params(0.3, prob.l_h(), prob.l_g(), 6, 6).unwrap(),
        &opts,
        &monitor,
        &mut sink,
    )
    .unwrap();
    let b = run_extragradient(&prob, 0.5 / (prob.l_h() + prob.l_g()), &opts, &monitor, &mut sink).unwrap();
    let c = savrep_m::run(
        &prob,
        &SavrepMParams::for_problem(&prob, 0.0),
        &opts.clone().with_tol(1e-8),
        &monitor,
        &mut sink,
    )
    .unwrap();
    assert_eq!(a.stop, StopReason::Tolerance);
    assert_eq!(b.stop, StopReason::Tolerance);
    assert!(a.state.x.dist(&inst.x_star) < 1e-5);
    assert!(b.state.dist(&inst.x_star) < 1e-5);
    assert!(c.state.inner.w_bar.dist(&inst.x_star) < 0.1);
}

#[test]
fn neyman_pearson_pipeline() {
    let spec = NpSpec {
        n_features: 6,
        n0: 40,
        n1: 40,
        m1: 3,
        m2: 4,
        seed: 5,
        ..NpSpec::default()
    };
    let inst = gen_np_classification(&spec, None).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("np.bin");
    save_problem(&path, &StoredProblem::Np(inst.clone())).unwrap();
    let inst = match load_problem(&path).unwrap() {
        StoredProblem::Np(i) => i,
        other => panic!("{other:?}"),
    };

    let program = inst.program().unwrap();
    let kkt = build_kkt_problem(&program, 10.0, LipschitzMode::ClosedForm).unwrap();
    let mu = 1e-3;
    let prob = perturb(&kkt.problem, mu, 0).unwrap();
    let params = momentum_params(mu, prob.l_h(), prob.l_g(), prob.m1(), prob.m2()).unwrap();
    let monitor = Monitor {
        gap: None,
        residual: true,
        extra: Some(kkt.metrics_hook(&program, None)),
    };
    let mut sink = |_: &TraceRecord| {};
    let out = savrep::run(&prob, &params, &RunOptions::new(1, 100_000), &monitor, &mut sink).unwrap();

    let x = kkt.primal(&out.state.x);
    assert!(program.primal_set.contains(&x, 1e-9));
    assert!(constraint_violation(&program, &x) < 1e-2);
    let viol: Vec<f64> = out.traces.iter().map(|r| r.cons_viol.unwrap()).collect();
    assert!(viol.iter().all(|v| *v >= 0.0));
    let res: Vec<f64> = out.traces.iter().map(|r| r.res_norm.unwrap()).collect();
    assert!(res.last().unwrap() < &res[0]);
}
