//! Property suites runnable outside the test harness.

use std::fmt;
use std::str::FromStr;

use crate::constrained::{build_kkt_problem, LipschitzMode};
use crate::error::{Result, VrviError};
use crate::oracle::{refresh_snapshot, vr_estimate, NoiseModel};
use crate::point::Point;
use crate::problems::{
    certify_constants, gen_bilinear_with_quadratic, gen_np_classification, gen_strongly_monotone, NpSpec, SyntheticSpec,
};
use crate::report::ConditionReport;
use crate::rng::stream_rng;
use crate::savrep::{check_param_constraints, default_params};
use crate::savrep_m::{check_conditions, SavrepMParams};
use crate::sets::ConstraintSet;
use crate::zeroth_order::{smoothing_bias_bound, sphere_sample, zo_gradient, zo_variance_bound, NoisyScalarOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Oracles,
    Projections,
    Monotonicity,
    ZerothOrder,
    Params,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Oracles,
        Suite::Projections,
        Suite::Monotonicity,
        Suite::ZerothOrder,
        Suite::Params,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracles => "oracles",
            Suite::Projections => "projections",
            Suite::Monotonicity => "monotonicity",
            Suite::ZerothOrder => "zeroth_order",
            Suite::Params => "params",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = VrviError;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            VrviError::InvalidArgument(format!(
                "unknown suite '{s}'; expected one of oracles, projections, monotonicity, zeroth_order, params"
            ))
        })
    }
}

pub fn run_suite(suite: Suite) -> Result<ConditionReport> {
    match suite {
        Suite::Oracles => oracles(),
        Suite::Projections => projections(),
        Suite::Monotonicity => monotonicity(),
        Suite::ZerothOrder => zeroth_order(),
        Suite::Params => params(),
    }
}

/// Default SAVREP parameters with the step inflated tenfold; fails the step-size inequality.
pub fn injected_violation() -> Result<ConditionReport> {
    let mut p = default_params(0.1, 1.0, 1.0, 10, 10)?;
    p.gamma *= 10.0;
    Ok(check_param_constraints(&p, 1.0, 1.0))
}

fn oracles() -> Result<ConditionReport> {
    let mut rep = ConditionReport::default();
    let inst = gen_strongly_monotone(&SyntheticSpec::new(4, 6, 5, 0.3, 2.0, 1.0, 9))?;
    let prob = inst.problem()?;
    let mut rng = stream_rng(5, 1);
    for (name, fam) in [("H", &prob.h), ("grad g", &prob.g)] {
        let anchor = prob.set.sample(&mut rng, 1.0);
        let x = prob.set.sample(&mut rng, 1.0);
        let mut calls = 0;
        let cache = refresh_snapshot(fam, &NoiseModel::none(), &anchor, &mut rng, &mut calls);
        rep.check(
            format!("{name}: snapshot costs m calls"),
            -((calls as f64) - fam.len() as f64).abs(),
            0.0,
        );
        let mut mean = Point::zeros(prob.dim());
        for i in 0..fam.len() {
            let est = vr_estimate(&cache, fam, &NoiseModel::none(), i, &x, &mut rng, &mut calls);
            mean.axpy(fam.probability(i), &est);
        }
        let exact = fam.eval_sum(&x);
        rep.check(
            format!("{name}: |E[estimate] - exact| <= 1e-12 (exhaustive)"),
            1e-12 * (1.0 + exact.norm()) - mean.dist(&exact),
            0.0,
        );
        let at_anchor = vr_estimate(&cache, fam, &NoiseModel::none(), 0, &anchor, &mut rng, &mut calls);
        rep.check(
            format!("{name}: estimate at the anchor is the full sum"),
            -at_anchor.dist(&cache.full_sum),
            0.0,
        );
    }
    Ok(rep)
}

fn projections() -> Result<ConditionReport> {
    let mut rep = ConditionReport::default();
    let sets = vec![
        ("ball", ConstraintSet::ball(Point::new(vec![0.5, -1.0, 2.0])?, 1.5)?),
        ("orthant", ConstraintSet::NonnegOrthant(3)),
        (
            "box",
            ConstraintSet::boxed(Point::new(vec![-1.0, 0.0, 0.0])?, Point::new(vec![1.0, 0.5, 3.0])?)?,
        ),
        (
            "product",
            ConstraintSet::product(vec![ConstraintSet::unit_ball(2), ConstraintSet::NonnegOrthant(1)])?,
        ),
        ("whole", ConstraintSet::Whole(3)),
    ];
    let mut rng = stream_rng(3, 2);
    for (name, set) in sets {
        let (mut idem, mut nonexp, mut obtuse) = (0.0f64, f64::INFINITY, f64::INFINITY);
        for _ in 0..500 {
            let a = crate::sets::gaussian(&mut rng, 3, 3.0);
            let b = crate::sets::gaussian(&mut rng, 3, 3.0);
            let pa = set.project(&a)?;
            let pb = set.project(&b)?;
            idem = idem.max(set.project(&pa)?.dist(&pa));
            nonexp = nonexp.min(a.dist(&b) - pa.dist(&pb));
            let y = set.sample(&mut rng, 3.0);
            obtuse = obtuse.min(-a.sub(&pa).dot(&y.sub(&pa)));
        }
        rep.check(format!("{name}: P(P(x)) = P(x)"), -idem, 1e-12);
        rep.check(format!("{name}: ||P(x) - P(y)|| <= ||x - y||"), nonexp, 1e-12);
        rep.check(format!("{name}: <x - P(x), y - P(x)> <= 0"), obtuse, 1e-10);
    }
    Ok(rep)
}

fn monotonicity() -> Result<ConditionReport> {
    let mut rep = ConditionReport::default();
    let named = |rep: &mut ConditionReport, tag: &str, r: ConditionReport| {
        for mut c in r.conditions {
            c.name = format!("{tag}: {}", c.name);
            rep.conditions.push(c);
        }
    };
    let sm = gen_strongly_monotone(&SyntheticSpec::new(10, 5, 5, 0.1, 1.0, 1.0, 1))?.problem()?;
    named(&mut rep, "strongly monotone", certify_constants(&sm, 1000, 1)?);
    let bil = gen_bilinear_with_quadratic(4, 4, 5, 5, 1.0, 2)?.problem()?;
    named(&mut rep, "bilinear", certify_constants(&bil, 1000, 2)?);
    let np = gen_np_classification(
        &NpSpec {
            n_features: 5,
            n0: 40,
            n1: 40,
            m1: 4,
            m2: 4,
            ..NpSpec::default()
        },
        None,
    )?;
    let kkt = build_kkt_problem(&np.program()?, 5.0, LipschitzMode::ClosedForm)?;
    named(&mut rep, "NP KKT", certify_constants(&kkt.problem, 1000, 3)?);
    Ok(rep)
}

fn zeroth_order() -> Result<ConditionReport> {
    let mut rep = ConditionReport::default();
    let n = 5;
    let (phi, sigma, draws) = (0.2, 0.3, 20_000);
    let oracle = NoisyScalarOracle::new(n, |x: &Point| 0.5 * x.norm_sq(), 2.0, 1.0).with_noise(0.5, sigma);
    let x = Point::new(vec![0.4, -0.2, 0.1, 0.3, -0.5])?;
    let mut rng = stream_rng(11, 3);
    let mut mean = Point::zeros(n);
    let mut second = 0.0;
    let mut sq = Point::zeros(n);
    for _ in 0..draws {
        let u = sphere_sample(&mut rng, n);
        let g = zo_gradient(&oracle, &x, phi, &u, &mut rng);
        second += g.norm_sq();
        mean.add_assign(&g);
        sq.add_assign(&Point::new(g.iter().map(|v| v * v).collect())?);
    }
    let nd = draws as f64;
    let mean = mean.scale(1.0 / nd);
    let second = second / nd;
    let var_trace: f64 = sq.iter().zip(mean.iter()).map(|(s, m)| s / nd - m * m).sum();
    let ci = 4.0 * (var_trace / nd).sqrt();
    let bias = mean.dist(&x);
    rep.check(
        "||E[G] - grad f|| <= phi n L / 2 + CI",
        smoothing_bias_bound(1.0, phi, n) + ci - bias,
        0.0,
    );
    let bound = zo_variance_bound(x.norm(), sigma, 1.0, phi, n);
    rep.check(
        "E||G||^2 <= 2n(M^2 + s^2) + phi^2 n^2 L^2 / 2",
        (bound - second) / bound,
        0.0,
    );
    Ok(rep)
}

fn params() -> Result<ConditionReport> {
    let mut rep = ConditionReport::default();
    for &mu in &[1e-4, 1e-2, 0.1, 1.0] {
        for &(lh, lg) in &[(1.0, 1.0), (10.0, 0.5), (2.0, 50.0)] {
            for &(m1, m2) in &[(2, 1), (10, 10), (100, 3)] {
                if mu > lh {
                    continue;
                }
                let tag = format!("mu={mu} L_h={lh} L_g={lg} m1={m1} m2={m2}");
                let p = default_params(mu, lh, lg, m1, m2)?;
                for mut c in check_param_constraints(&p, lh, lg).conditions {
                    c.name = format!("[{tag}] {}", c.name);
                    rep.conditions.push(c);
                }
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
                let r = check_conditions(&pm, 200)?;
                rep.check(
                    format!("[{tag}] sublinear-rate conditions for 200 epochs"),
                    if r.is_ok() { 0.0 } else { -1.0 },
                    0.0,
                );
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for s in Suite::ALL {
            let rep = run_suite(s).unwrap();
            assert!(rep.is_ok(), "{s}:\n{rep}");
            assert!(!rep.conditions.is_empty());
        }
    }

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn injected_violation_names_the_inequality() {
        let rep = injected_violation().unwrap();
        assert!(!rep.is_ok());
        assert!(
            rep.violations().iter().any(|c| c.name.contains("gamma^2 L_h^2")),
            "{rep}"
        );
    }
}
