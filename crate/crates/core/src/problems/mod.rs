//! Instance generators, the Neyman-Pearson builder and dataset I/O.

pub mod libsvm;
pub mod np;
pub mod store;
pub mod synthetic;

pub use libsvm::{parse_libsvm, parse_libsvm_str, serialize_libsvm, SparseDataset, SparseRow};
pub use np::{gen_np_classification, Loss, NpInstance, NpSpec};
pub use store::{decode as decode_stored, encode as encode_stored, load_problem, save_problem, StoredProblem};
pub use synthetic::{
    gen_bilinear_monotone, gen_bilinear_with_quadratic, gen_strongly_monotone, AffineQuadraticInstance, SetVariant,
    SyntheticSpec,
};

use crate::error::Result;
use crate::oracle::ComponentFamily;
use crate::point::Point;
use crate::problem::CompositeVIProblem;
use crate::report::ConditionReport;
use crate::rng::stream_rng;

const CERT_REL_TOL: f64 = 1e-9;

fn sample_pair(problem: &CompositeVIProblem, rng: &mut rand_chacha::ChaCha8Rng) -> (Point, Point) {
    (problem.set.sample(rng, 2.0), problem.set.sample(rng, 2.0))
}

fn family_lipschitz_slack(fam: &ComponentFamily, pairs: &[(Point, Point)]) -> f64 {
    let mut worst = f64::INFINITY;
    for (i, l) in fam.lipschitz().iter().enumerate() {
        let c = fam.component(i);
        for (a, b) in pairs {
            let d = a.dist(b);
            let lhs = c.eval(a).dist(&c.eval(b));
            worst = worst.min((l * d - lhs) / (l * d).max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Randomized pair test of the advertised constants: strong monotonicity of
/// `H` (when `mu_h` is set), per-component Lipschitz constants of both
/// families, and monotonicity of `grad g`. Slacks are relative.
pub fn certify_constants(problem: &CompositeVIProblem, pairs: usize, seed: u64) -> Result<ConditionReport> {
    let mut rng = stream_rng(seed, 21);
    let pts: Vec<(Point, Point)> = (0..pairs).map(|_| sample_pair(problem, &mut rng)).collect();
    let mut rep = ConditionReport::default();
    if let Some(mu) = problem.mu_h {
        let mut worst = f64::INFINITY;
        for (a, b) in &pts {
            let d2 = a.dist_sq(b);
            if d2 > 0.0 {
                let inner = problem.h_sum(a).sub(&problem.h_sum(b)).dot(&a.sub(b));
                worst = worst.min((inner - mu * d2) / (mu * d2));
            }
        }
        rep.check("<H(x) - H(y), x - y> >= mu_h ||x - y||^2", worst, CERT_REL_TOL);
    }
    if !problem.h.is_empty() {
        rep.check(
            "||H_i(x) - H_i(y)|| <= L_h(i) ||x - y||",
            family_lipschitz_slack(&problem.h, &pts),
            CERT_REL_TOL,
        );
    }
    if !problem.g.is_empty() {
        rep.check(
            "||grad g_i(x) - grad g_i(y)|| <= L_g(i) ||x - y||",
            family_lipschitz_slack(&problem.g, &pts),
            CERT_REL_TOL,
        );
        let mut worst = f64::INFINITY;
        for (a, b) in &pts {
            let d2 = a.dist_sq(b);
            if d2 > 0.0 {
                let inner = problem.g_grad(a).sub(&problem.g_grad(b)).dot(&a.sub(b));
                worst = worst.min(inner / (problem.l_g() * d2));
            }
        }
        rep.check("<grad g(x) - grad g(y), x - y> >= 0", worst, CERT_REL_TOL);
    }
    Ok(rep)
}
