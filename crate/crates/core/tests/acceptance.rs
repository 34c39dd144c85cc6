//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use vrvi::baselines::{solve_extragradient, ExtragradientParams};
use vrvi::component::{QuadraticComponent, SharedComponent};
use vrvi::constrained::{
    build_kkt_problem, constraint_violation, perturb, ConstrainedProgram, LinearConstraint, LipschitzMode,
    SharedConstraint,
};
use vrvi::oracle::{refresh_snapshot, vr_estimate, vr_estimate_batch, NoiseModel};
use vrvi::problems::{gen_bilinear_with_quadratic, gen_strongly_monotone, SyntheticSpec};
use vrvi::rng::stream_rng;
use vrvi::run::RunOptions;
use vrvi::savrep::{
    check_param_constraints, contraction_factor, default_params, initial_distance_measure, momentum_params, potential,
    SavrepState,
};
use vrvi::savrep_m::{check_conditions, rate_bound, SavrepMParams};
use vrvi::zeroth_order::{smoothing_bias_bound, sphere_sample, zo_gradient, zo_variance_bound, NoisyScalarOracle};
use vrvi::{
    q_gap, savrep, savrep_m, ComponentFamily, CompositeVIProblem, ConstraintSet, DenseMatrix, GapEvaluator, Monitor,
    Point,
};

type Outcome = Result<String, String>;

fn ok_if(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn ac1_linear_rate() -> Outcome {
    let inst = gen_strongly_monotone(&SyntheticSpec::new(50, 20, 20, 0.1, 1.0, 1.0, 1)).map_err(err)?;
    let prob = inst.problem().map_err(err)?;
    let params = default_params(0.1, prob.l_h(), prob.l_g(), 20, 20).map_err(err)?;
    let x0 = Point::zeros(50);
    let d0 = initial_distance_measure(&params, &prob, &x0, &inst.x_star);
    let per = 40.0 + (prob.l_g() * 20.0 / 0.1).sqrt() + prob.l_h() * 20f64.sqrt() / 0.1;
    let budget = (100.0 * per * (d0 / 1e-8).ln()).ceil() as u64;
    let monitor = Monitor {
        gap: Some(GapEvaluator::new(&prob, inst.x_star.clone()).map_err(err)?),
        residual: false,
        extra: None,
    };
    let mut worst = 0u64;
    for seed in 1..=5 {
        let opts = RunOptions::new(seed, budget)
            .with_tol(1e-8)
            .with_log_interval(1_000_000);
        let out = savrep::run(&prob, &params, &opts, &monitor, &mut |_| {}).map_err(err)?;
        let d = out.state.x.dist_sq(&inst.x_star);
        if d > 1e-8 {
            return Err(format!(
                "seed {seed}: dist^2 = {d:.3e} after {} calls (budget {budget})",
                out.state.oracle_calls()
            ));
        }
        worst = worst.max(out.state.oracle_calls());
    }
    Ok(format!(
        "dist^2 <= 1e-8 for seeds 1-5; worst {worst} calls vs budget {budget}"
    ))
}

fn ac2_potential_contraction() -> Outcome {
    let inst = gen_strongly_monotone(&SyntheticSpec::new(50, 20, 20, 0.1, 1.0, 1.0, 1)).map_err(err)?;
    let prob = inst.problem().map_err(err)?;
    let params = default_params(0.1, prob.l_h(), prob.l_g(), 20, 20).map_err(err)?;
    let rho = contraction_factor(0.1, prob.l_h(), prob.l_g(), 20, 20);
    let gap = GapEvaluator::new(&prob, inst.x_star.clone()).map_err(err)?;
    let (seeds, steps) = (200u64, 500usize);
    let mut sums = vec![0.0; steps];
    let x0 = Point::filled(50, 1.0);
    for seed in 1..=seeds {
        let mut st = SavrepState::new(&prob, &x0, seed).map_err(err)?;
        let mut prev = potential(&st, &params, &gap).map_err(err)?;
        for s in sums.iter_mut() {
            savrep::step(&mut st, &params, &prob).map_err(err)?;
            let cur = potential(&st, &params, &gap).map_err(err)?;
            *s += cur / prev;
            prev = cur;
        }
    }
    let (k, worst) = sums
        .iter()
        .map(|s| s / seeds as f64)
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, r)| if r > acc.1 { (k, r) } else { acc },
        );
    ok_if(
        worst <= rho + 0.02,
        format!("max_k mean ratio {worst:.5} (k = {k}) vs contraction factor {rho:.5} + 0.02"),
    )
}

fn ac3_sublinear_envelope() -> Outcome {
    let inst = gen_bilinear_with_quadratic(20, 20, 10, 10, 1.0, 1).map_err(err)?;
    let prob = inst.problem().map_err(err)?;
    let params = SavrepMParams::for_problem(&prob, 0.0);
    let m2 = params.epoch_len() as u64;
    let gap = GapEvaluator::new(&prob, inst.x_star.clone()).map_err(err)?;
    let monitor = Monitor {
        gap: Some(gap.clone()),
        residual: false,
        extra: None,
    };
    let mut worst_ratio: f64 = 0.0;
    let mut worst_slope = f64::NEG_INFINITY;
    for seed in 1..=5 {
        let x0 = prob.set.sample(&mut stream_rng(seed, 99), 1.0);
        let q0 = q_gap(&gap, &prob.project(&x0)).map_err(err)?;
        let opts = RunOptions::new(seed, u64::MAX).with_x0(x0).with_max_iters(200 * m2);
        let out = savrep_m::run(&prob, &params, &opts, &monitor, &mut |_| {}).map_err(err)?;
        let mut pts = vec![];
        for r in &out.traces {
            if r.iter < 5 * m2 || r.iter > 200 * m2 {
                continue;
            }
            let q = r.q_gap.ok_or("missing q_gap")?;
            let b = rate_bound(&params, r.iter, q0).map_err(err)?;
            worst_ratio = worst_ratio.max(q / b);
            if r.iter >= 20 * m2 {
                pts.push(((r.iter as f64).ln(), q.max(f64::MIN_POSITIVE).ln()));
            }
        }
        let n = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        worst_slope = worst_slope.max(slope);
    }
    ok_if(
        worst_ratio <= 1.1 && worst_slope <= -0.9,
        format!("max q_gap / bound = {worst_ratio:.3e} (limit 1.1); last-decade slope {worst_slope:.3} (limit -0.9)"),
    )
}

fn ac4_unbiasedness() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    for m1 in 2..=8 {
        let inst = gen_strongly_monotone(&SyntheticSpec::new(5, m1, 0, 0.2, 2.0, 1.0, m1 as u64)).map_err(err)?;
        let prob = inst.problem().map_err(err)?;
        let mut rng = stream_rng(m1 as u64, 1);
        let w = prob.set.sample(&mut rng, 1.0);
        let x = prob.set.sample(&mut rng, 1.0);
        let mut calls = 0;
        let cache = refresh_snapshot(&prob.h, &NoiseModel::none(), &w, &mut rng, &mut calls);
        let mut mean = Point::zeros(5);
        for i in 0..m1 {
            mean.axpy(
                prob.h.probability(i),
                &vr_estimate(&cache, &prob.h, &NoiseModel::none(), i, &x, &mut rng, &mut calls),
            );
        }
        worst_exact = worst_exact.max(mean.sub(&prob.h_sum(&x)).norm_inf());
    }
    if worst_exact > 1e-12 {
        return Err(format!("exhaustive deviation {worst_exact:.3e} > 1e-12"));
    }
    let inst = gen_strongly_monotone(&SyntheticSpec::new(5, 50, 0, 0.2, 2.0, 1.0, 77)).map_err(err)?;
    let prob = inst.problem().map_err(err)?;
    let noise = NoiseModel::new(0.0, 0.1, 50, 5, 77, 5).map_err(err)?;
    let mut rng = stream_rng(3, 1);
    let mut idx = stream_rng(3, 2);
    let w = prob.set.sample(&mut rng, 1.0);
    let x = prob.set.sample(&mut rng, 1.0);
    let mut calls = 0;
    let cache = refresh_snapshot(&prob.h, &noise, &w, &mut rng, &mut calls);
    let n = 100_000;
    let (mut s1, mut s2) = (vec![0.0; 5], vec![0.0; 5]);
    for _ in 0..n {
        let e = vr_estimate_batch(&cache, &prob.h, &noise, 1, &x, &mut idx, &mut rng, &mut calls);
        for j in 0..5 {
            s1[j] += e[j];
            s2[j] += e[j] * e[j];
        }
    }
    // unbiased for H(x) given any cached realization, since full_sum is their sum
    let target = prob.h_sum(&x);
    let mut worst_z: f64 = 0.0;
    for j in 0..5 {
        let m = s1[j] / n as f64;
        let sd = (s2[j] / n as f64 - m * m).sqrt();
        worst_z = worst_z.max((m - target[j]).abs() / (sd / (n as f64).sqrt()));
    }
    ok_if(
        worst_z <= 4.0,
        format!("exhaustive max deviation {worst_exact:.2e}; Monte-Carlo max |z| = {worst_z:.2} (limit 4)"),
    )
}

fn ac5_zeroth_order() -> Outcome {
    let n = 5;
    let (phi, sigma) = (0.2, 0.3);
    let oracle = NoisyScalarOracle::new(n, |x: &Point| 0.5 * x.norm_sq(), 2.0, 1.0).with_noise(0.5, sigma);
    let x = Point::new(vec![0.7, -0.3, 0.2, 0.5, -0.4]).map_err(err)?;
    let mut rng = stream_rng(5, 3);
    let draws = 1_000_000usize;
    let mut mean = Point::zeros(n);
    let mut sq = vec![0.0; n];
    let mut second = 0.0;
    for _ in 0..draws {
        let u = sphere_sample(&mut rng, n);
        let g = zo_gradient(&oracle, &x, phi, &u, &mut rng);
        second += g.norm_sq();
        for j in 0..n {
            sq[j] += g[j] * g[j];
        }
        mean.add_assign(&g);
    }
    let nd = draws as f64;
    let mean = mean.scale(1.0 / nd);
    let var: f64 = (0..n).map(|j| sq[j] / nd - mean[j] * mean[j]).sum();
    let ci = 4.0 * (var / nd).sqrt();
    let bias = mean.dist(&x);
    let bias_bound = smoothing_bias_bound(1.0, phi, n);
    let second = second / nd;
    let var_bound = zo_variance_bound(x.norm(), sigma, 1.0, phi, n);
    ok_if(
        bias <= bias_bound + ci && second <= var_bound,
        format!("bias {bias:.4} <= {bias_bound} + {ci:.4}; E||G||^2 = {second:.3} <= {var_bound:.3}"),
    )
}

struct SmallProgram {
    program: ConstrainedProgram,
}

fn random_program(k: u64) -> Result<SmallProgram, String> {
    let mut rng = stream_rng(k, 40);
    let n = 2 + (k as usize % 4);
    let ell = 1 + (k as usize % 2);
    let mut comps: Vec<SharedComponent> = vec![];
    let mut lips = vec![];
    let mut unc_num = Point::zeros(n);
    let mut hess = DenseMatrix::zeros(n, n);
    for _ in 0..3 {
        let b =
            DenseMatrix::from_row_major(n, n, (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect()).map_err(err)?;
        let q = b.matmul(&b.transpose()).add(&DenseMatrix::identity(n).scale(0.3));
        let c = Point::new((0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()).map_err(err)?;
        let qc = Point::new(q.matvec(&c)).map_err(err)?;
        unc_num.add_assign(&qc);
        hess = hess.add(&q);
        lips.push(q.spectral_norm());
        comps.push(Arc::new(QuadraticComponent::new(q, qc.scale(-1.0), 0.5 * qc.dot(&c))));
    }
    let x_unc = hess.solve(&unc_num).map_err(err)?;
    let objective = ComponentFamily::new(n, comps, lips).map_err(err)?;
    let mut a = DenseMatrix::zeros(ell, n);
    let mut b = vec![0.0; ell];
    for r in 0..ell {
        let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (j, v) in row.iter().enumerate() {
            a.set(r, j, v / norm);
        }
        let ax: f64 = (0..n).map(|j| a.get(r, j) * x_unc[j]).sum();
        // even programs: first row active; odd programs: all inactive
        b[r] = if k % 2 == 0 && r == 0 { ax - 0.4 } else { ax + 0.4 };
    }
    let e = DenseMatrix::from_row_major(
        ell,
        n,
        (0..ell * n).map(|_| 0.2 * (rng.random::<f64>() - 0.5)).collect(),
    )
    .map_err(err)?;
    let bp = Point::new(b.iter().map(|v| v / 2.0).collect()).map_err(err)?;
    let cons: Vec<SharedConstraint> = vec![
        Arc::new(LinearConstraint::new(a.scale(0.5).add(&e), bp.clone()).map_err(err)?),
        Arc::new(LinearConstraint::new(a.scale(0.5).add(&e.scale(-1.0)), bp).map_err(err)?),
    ];
    let program = ConstrainedProgram::new(objective, cons, ConstraintSet::ball(Point::zeros(n), 3.0).map_err(err)?)
        .map_err(err)?;
    Ok(SmallProgram { program })
}

fn ac6_kkt() -> Outcome {
    let (mut worst_viol, mut worst_gap): (f64, f64) = (0.0, 0.0);
    let mut active = 0;
    for k in 0..20 {
        let prog = random_program(k)?.program;
        let kkt = build_kkt_problem(&prog, 20.0, LipschitzMode::ClosedForm).map_err(err)?;
        let prm = ExtragradientParams::for_problem(&kkt.problem, 2_000_000, 1e-11);
        let reference = solve_extragradient(&kkt.problem, &prm, &Point::zeros(kkt.problem.dim())).map_err(err)?;
        if !reference.converged {
            return Err(format!("program {k}: reference residual {:.2e}", reference.residual));
        }
        if kkt.dual(&reference.x).iter().any(|y| *y > 1e-6) {
            active += 1;
        }
        let x_ref = kkt.primal(&reference.x);
        let f_star = prog.objective_value(&x_ref);
        let pert = perturb(&kkt.problem, 1e-6, 0).map_err(err)?;
        let params = momentum_params(1e-6, pert.l_h(), pert.l_g(), pert.m1(), pert.m2()).map_err(err)?;
        let opts = RunOptions::new(k + 1, 400_000).with_log_interval(u64::MAX);
        let out = savrep::run(&pert, &params, &opts, &Monitor::default(), &mut |_| {}).map_err(err)?;
        let x = kkt.primal(&out.state.x);
        let viol = constraint_violation(&prog, &x);
        let gap = (prog.objective_value(&x) - f_star).abs();
        worst_viol = worst_viol.max(viol);
        worst_gap = worst_gap.max(gap);
    }
    ok_if(
        worst_viol <= 1e-3 && worst_gap <= 1e-3,
        format!("20 programs ({active} with active constraints): max violation {worst_viol:.2e}, max |objective gap| {worst_gap:.2e}"),
    )
}

fn error_bound_program() -> Result<ConstrainedProgram, String> {
    let n = 4;
    let q = DenseMatrix::from_rows(&[
        vec![2.0, 0.3, 0.0, 0.1],
        vec![0.3, 1.5, 0.2, 0.0],
        vec![0.0, 0.2, 1.0, 0.3],
        vec![0.1, 0.0, 0.3, 1.2],
    ])
    .map_err(err)?;
    let c = Point::new(vec![1.0, 1.0, -0.5, 0.8]).map_err(err)?;
    let qc = Point::new(q.matvec(&c)).map_err(err)?;
    let lip = q.spectral_norm();
    let objective = ComponentFamily::new(
        n,
        vec![Arc::new(QuadraticComponent::new(q, qc.scale(-1.0), 0.5 * qc.dot(&c))) as SharedComponent],
        vec![lip],
    )
    .map_err(err)?;
    // x1 + x2 + x4 <= 1 cuts off the unconstrained minimizer c
    let a1 = DenseMatrix::from_rows(&[vec![0.5, 0.5, 0.0, 0.5]]).map_err(err)?;
    let a2 = DenseMatrix::from_rows(&[vec![0.5, 0.5, 0.0, 0.5]]).map_err(err)?;
    let cons: Vec<SharedConstraint> = vec![
        Arc::new(LinearConstraint::new(a1, Point::new(vec![0.5]).map_err(err)?).map_err(err)?),
        Arc::new(LinearConstraint::new(a2, Point::new(vec![0.5]).map_err(err)?).map_err(err)?),
    ];
    ConstrainedProgram::new(objective, cons, ConstraintSet::Whole(n)).map_err(err)
}

fn solve_ref(problem: &CompositeVIProblem) -> Result<Point, String> {
    let prm = ExtragradientParams::for_problem(problem, 5_000_000, 1e-13);
    let sol = solve_extragradient(problem, &prm, &Point::zeros(problem.dim())).map_err(err)?;
    ok_if(sol.converged, format!("reference residual {:.2e}", sol.residual))?;
    Ok(sol.x)
}

fn ac7_perturbation_path() -> Outcome {
    let prog = error_bound_program()?;
    let kkt = build_kkt_problem(&prog, 50.0, LipschitzMode::ClosedForm).map_err(err)?;
    let z_star = solve_ref(&kkt.problem)?;
    let mut dists = vec![];
    for mu in [1e-1, 1e-2, 1e-3, 1e-4] {
        let z = solve_ref(&perturb(&kkt.problem, mu, 0).map_err(err)?)?;
        dists.push(z.dist(&z_star));
    }
    let monotone = dists.windows(2).all(|w| w[1] <= w[0] + 1e-8);
    ok_if(
        monotone,
        format!(
            "||z*(mu) - z*|| over mu = 1e-1..1e-4: {:?}",
            dists.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn plateau(sigma: f64) -> Result<f64, String> {
    let inst = gen_strongly_monotone(&SyntheticSpec::new(10, 5, 5, 0.2, 1.0, 1.0, 8)).map_err(err)?;
    let base = inst.problem().map_err(err)?;
    let params = default_params(0.2, base.l_h(), base.l_g(), 5, 5).map_err(err)?;
    let monitor = Monitor {
        gap: Some(GapEvaluator::new(&base, inst.x_star.clone()).map_err(err)?),
        residual: false,
        extra: None,
    };
    let mut total = 0.0;
    let seeds = 20;
    for seed in 1..=seeds {
        let noise = NoiseModel::new(0.0, sigma, 5, 10, seed, 5).map_err(err)?;
        let prob = base.clone().with_noise(noise, NoiseModel::none());
        let opts = RunOptions::new(seed, u64::MAX)
            .with_max_iters(60_000)
            .with_log_interval(100);
        let out = savrep::run(&prob, &params, &opts, &monitor, &mut |_| {}).map_err(err)?;
        let tail: Vec<f64> = out
            .traces
            .iter()
            .filter(|r| r.iter >= 40_000)
            .filter_map(|r| r.dist_sq)
            .collect();
        total += tail.iter().sum::<f64>() / tail.len() as f64;
    }
    Ok(total / seeds as f64)
}

fn ac8_noise_floor() -> Outcome {
    let hi = plateau(0.1)?;
    let lo = plateau(0.01)?;
    ok_if(
        hi >= 10.0 * lo,
        format!(
            "plateau dist^2: {hi:.3e} (sigma 0.1) vs {lo:.3e} (sigma 0.01), ratio {:.1}",
            hi / lo
        ),
    )
}

fn ac9_param_grid() -> Outcome {
    let mut rng = stream_rng(9, 9);
    let mut failures = vec![];
    for t in 0..100 {
        let mu = 10f64.powf(-4.0 + 4.0 * rng.random::<f64>());
        let lh = mu * 10f64.powf(3.0 * rng.random::<f64>());
        let lg = 10f64.powf(-2.0 + 4.0 * rng.random::<f64>());
        let m1 = rng.random_range(2..=200usize);
        let m2 = rng.random_range(1..=200usize);
        let mut ok = match default_params(mu, lh, lg, m1, m2) {
            Ok(p) => check_param_constraints(&p, lh, lg).is_ok(),
            Err(_) => false,
        };
        let pm = SavrepMParams {
            q: 0.75,
            p1: 1.0 / m1 as f64,
            omega_z: Some(2.0),
            delta_cap: 0.0,
            l_h: lh,
            l_g: lg,
            m1,
            m2,
            batch: 1,
        };
        ok &= check_conditions(&pm, 100).map(|r| r.is_ok()).unwrap_or(false);
        // p1 + 3 alpha_k gamma_k L_g <= 3/4 along the schedule
        ok &= (0..100)
            .all(|s| vrvi::savrep_m::schedule(s, &pm).is_ok_and(|c| pm.p1 + 3.0 * c.alpha * c.gamma * lg <= 0.75));
        if !ok {
            failures.push(t);
        }
    }
    ok_if(
        failures.is_empty(),
        format!("100 tuples checked, failing tuples: {failures:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("AC1 linear rate", ac1_linear_rate),
        ("AC2 potential contraction", ac2_potential_contraction),
        ("AC3 sublinear envelope", ac3_sublinear_envelope),
        ("AC4 estimator unbiasedness", ac4_unbiasedness),
        ("AC5 zeroth-order bias/variance", ac5_zeroth_order),
        ("AC6 KKT correctness", ac6_kkt),
        ("AC7 perturbation monotonicity", ac7_perturbation_path),
        ("AC8 stochastic floor ordering", ac8_noise_floor),
        ("AC9 parameter validators", ac9_param_grid),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.starts_with(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(msg) => println!("[PASS] {name} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.1}s): {msg}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
