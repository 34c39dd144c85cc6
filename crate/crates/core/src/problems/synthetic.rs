//! Random affine/quadratic instances with certified constants and known solutions.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{solve_extragradient, ExtragradientParams};
use crate::component::{AffineComponent, QuadraticComponent, SharedComponent};
use crate::error::{Result, VrviError};
use crate::linalg::DenseMatrix;
use crate::oracle::ComponentFamily;
use crate::point::Point;
use crate::problem::CompositeVIProblem;
use crate::rng::{stream, stream_rng};
use crate::sets::{gaussian, unit_sphere, ConstraintSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SetVariant {
    Whole,
    Ball { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub m1: usize,
    pub m2: usize,
    pub mu_h: f64,
    /// Target `L_h = sum_i L_{h(i)}`.
    pub l_h: f64,
    /// Target `L_g = sum_i L_{g(i)}`.
    pub l_g: f64,
    pub seed: u64,
    pub set: SetVariant,
}

impl SyntheticSpec {
    pub fn new(dim: usize, m1: usize, m2: usize, mu_h: f64, l_h: f64, l_g: f64, seed: u64) -> Self {
        SyntheticSpec {
            dim,
            m1,
            m2,
            mu_h,
            l_h,
            l_g,
            seed,
            set: SetVariant::Whole,
        }
    }
}

/// Instance with `H_i(x) = A_i x + b_i` and `g_i(x) = 1/2 x^T Q_i x + c_i^T x`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineQuadraticInstance {
    pub h_terms: Vec<AffineComponent>,
    pub h_lipschitz: Vec<f64>,
    pub g_terms: Vec<QuadraticComponent>,
    pub g_lipschitz: Vec<f64>,
    pub set: ConstraintSet,
    pub mu_h: Option<f64>,
    pub x_star: Point,
}

impl AffineQuadraticInstance {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn problem(&self) -> Result<CompositeVIProblem> {
        let n = self.dim();
        let h = ComponentFamily::new(
            n,
            self.h_terms
                .iter()
                .map(|c| Arc::new(c.clone()) as SharedComponent)
                .collect(),
            self.h_lipschitz.clone(),
        )?;
        let g = ComponentFamily::new(
            n,
            self.g_terms
                .iter()
                .map(|c| Arc::new(c.clone()) as SharedComponent)
                .collect(),
            self.g_lipschitz.clone(),
        )?;
        let mut p = CompositeVIProblem::new(h, g, self.set.clone())?;
        p.mu_h = self.mu_h;
        Ok(p)
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_row_major(rows, cols, gaussian(rng, rows * cols, 1.0).into_vec()).expect("finite")
}

/// Weights in `[1, 3]` normalized to sum to one.
fn split_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| 1.0 + 2.0 * rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Scales `c` in `a I + c M` so the spectral norm equals `target`.
fn calibrate(a: f64, m: &DenseMatrix, target: f64) -> DenseMatrix {
    let n = m.rows();
    let build = |c: f64| DenseMatrix::identity(n).scale(a).add(&m.scale(c));
    if target <= a * (1.0 + 1e-15) || m.spectral_norm() == 0.0 {
        return build(0.0);
    }
    let mut hi = 1.0;
    while build(hi).spectral_norm() < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if build(mid).spectral_norm() < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build(0.5 * (lo + hi))
}

/// Strongly monotone affine `H` plus convex quadratic `g`, with `F(x*) = 0`
/// at a random `x*` (Whole) or the projected solution (Ball).
pub fn gen_strongly_monotone(spec: &SyntheticSpec) -> Result<AffineQuadraticInstance> {
    let SyntheticSpec {
        dim: n,
        m1,
        m2,
        mu_h,
        l_h,
        l_g,
        seed,
        set,
    } = *spec;
    if m1 < 2 || n < 1 {
        return Err(VrviError::Config("need dim >= 1 and m1 >= 2".into()));
    }
    if !(mu_h > 0.0) || mu_h > l_h {
        return Err(VrviError::Config(format!(
            "infeasible spec: need 0 < mu_h <= L_h, got mu_h = {mu_h}, L_h = {l_h}"
        )));
    }
    if m2 > 0 && !(l_g > 0.0) {
        return Err(VrviError::Config("L_g must be positive when m2 > 0".into()));
    }
    let mut rng = stream_rng(seed, stream::INIT);
    let base = mu_h / m1 as f64;
    let wh = split_weights(&mut rng, m1);
    let mut a_mats = Vec::with_capacity(m1);
    let mut h_lips = Vec::with_capacity(m1);
    for w in &wh {
        let target = base + (l_h - mu_h) * w;
        let g = gaussian_matrix(&mut rng, n, n);
        let skew = g.add(&g.transpose().scale(-1.0));
        let b = gaussian_matrix(&mut rng, n, n);
        let psd = b.matmul(&b.transpose()).scale(1.0 / n as f64);
        let a = calibrate(base, &skew.add(&psd.scale(0.5)), target);
        h_lips.push(a.spectral_norm().max(target));
        a_mats.push(a);
    }
    let wg = split_weights(&mut rng, m2);
    let mut q_mats = Vec::with_capacity(m2);
    let mut g_lips = Vec::with_capacity(m2);
    for w in &wg {
        let b = gaussian_matrix(&mut rng, n, n);
        let bb = b.matmul(&b.transpose());
        let target = l_g * w;
        q_mats.push(bb.scale(target / bb.spectral_norm()));
        g_lips.push(target);
    }

    let anchor = unit_sphere(&mut rng, n);
    // zero-sum shifts so that individual components do not vanish at the anchor
    let mut shifts: Vec<Point> = (0..m1).map(|_| gaussian(&mut rng, n, 0.1)).collect();
    if m1 > 1 {
        let mut mean = Point::zeros(n);
        for s in &shifts {
            mean.add_assign(s);
        }
        let mean = mean.scale(1.0 / m1 as f64);
        for s in &mut shifts {
            *s = s.sub(&mean);
        }
    } else {
        shifts[0] = Point::zeros(n);
    }
    let h_terms: Vec<AffineComponent> = a_mats
        .into_iter()
        .zip(shifts)
        .map(|(a, s)| {
            let b = Point::from_vec(a.matvec(&anchor)).scale(-1.0).add(&s);
            AffineComponent::new(a, b)
        })
        .collect();
    let g_terms: Vec<QuadraticComponent> = q_mats
        .into_iter()
        .map(|q| {
            let c = Point::from_vec(q.matvec(&anchor)).scale(-1.0);
            let k = 0.5 * Point::from_vec(q.matvec(&anchor)).dot(&anchor);
            QuadraticComponent::new(q, c, k)
        })
        .collect();

    let (set, x_star) = match set {
        SetVariant::Whole => (ConstraintSet::Whole(n), anchor),
        SetVariant::Ball { radius } => (ConstraintSet::ball(Point::zeros(n), radius)?, anchor),
    };
    let mut inst = AffineQuadraticInstance {
        h_terms,
        h_lipschitz: h_lips,
        g_terms,
        g_lipschitz: g_lips,
        set,
        mu_h: Some(mu_h),
        x_star,
    };
    if let ConstraintSet::Ball { .. } = inst.set {
        let problem = inst.problem()?;
        let prm = ExtragradientParams::for_problem(&problem, 2_000_000, 1e-12);
        let sol = solve_extragradient(&problem, &prm, &Point::zeros(n))?;
        inst.x_star = sol.x;
    }
    Ok(inst)
}

/// `H_i(x, y) = (B_i y; -B_i^T x) / s` over the product of unit balls, where
/// `s = sum_i ||B_i||` so that `L_h = 1`; optionally `m2` convex quadratics
/// with minimum at the origin and `L_g = l_g`. The solution is the origin.
pub fn gen_bilinear_monotone(n_x: usize, n_y: usize, m1: usize, seed: u64) -> Result<AffineQuadraticInstance> {
    gen_bilinear_with_quadratic(n_x, n_y, m1, 0, 1.0, seed)
}

pub fn gen_bilinear_with_quadratic(
    n_x: usize,
    n_y: usize,
    m1: usize,
    m2: usize,
    l_g: f64,
    seed: u64,
) -> Result<AffineQuadraticInstance> {
    if m1 < 1 || n_x < 1 || n_y < 1 {
        return Err(VrviError::Config("need n_x, n_y, m1 >= 1".into()));
    }
    let n = n_x + n_y;
    let mut rng = stream_rng(seed, stream::INIT);
    let blocks: Vec<DenseMatrix> = (0..m1).map(|_| gaussian_matrix(&mut rng, n_x, n_y)).collect();
    let norms: Vec<f64> = blocks.iter().map(|b| b.spectral_norm()).collect();
    let scale: f64 = norms.iter().sum();
    let h_terms = blocks
        .iter()
        .map(|b| {
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n_x {
                for j in 0..n_y {
                    let v = b.get(i, j) / scale;
                    a.set(i, n_x + j, v);
                    a.set(n_x + j, i, -v);
                }
            }
            AffineComponent::linear(a)
        })
        .collect();
    let h_lipschitz = norms.iter().map(|v| v / scale).collect();
    let wg = split_weights(&mut rng, m2);
    let mut g_terms = vec![];
    let mut g_lipschitz = vec![];
    for w in &wg {
        let b = gaussian_matrix(&mut rng, n, n);
        let bb = b
            .matmul(&b.transpose())
            .add(&DenseMatrix::identity(n).scale(0.1 * n as f64));
        let target = l_g * w;
        g_terms.push(QuadraticComponent::new(
            bb.scale(target / bb.spectral_norm()),
            Point::zeros(n),
            0.0,
        ));
        g_lipschitz.push(target);
    }
    let set = ConstraintSet::product(vec![ConstraintSet::unit_ball(n_x), ConstraintSet::unit_ball(n_y)])?;
    Ok(AffineQuadraticInstance {
        h_terms,
        h_lipschitz,
        g_terms,
        g_lipschitz,
        set,
        mu_h: None,
        x_star: Point::zeros(n),
    })
}
