//! Closed convex constraint sets and their Euclidean projections.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Result, VrviError};
use crate::point::Point;

pub type ProjectionFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

#[derive(Clone)]
pub enum ConstraintSet {
    Whole(usize),
    Ball {
        center: Point,
        radius: f64,
    },
    NonnegOrthant(usize),
    Box {
        lo: Point,
        hi: Point,
    },
    Product(Vec<ConstraintSet>),
    /// User-supplied projection. The caller is responsible for it being the
    /// Euclidean projection onto a closed convex set.
    Custom {
        dim: usize,
        diameter: Option<f64>,
        project: ProjectionFn,
    },
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSet::Whole(n) => write!(f, "Whole({n})"),
            ConstraintSet::Ball { center, radius } => {
                write!(f, "Ball(dim={}, radius={radius})", center.dim())
            }
            ConstraintSet::NonnegOrthant(n) => write!(f, "NonnegOrthant({n})"),
            ConstraintSet::Box { lo, .. } => write!(f, "Box(dim={})", lo.dim()),
            ConstraintSet::Product(blocks) => f.debug_tuple("Product").field(blocks).finish(),
            ConstraintSet::Custom { dim, .. } => write!(f, "Custom({dim})"),
        }
    }
}

/// Custom sets compare equal only when they share the same projection closure.
impl PartialEq for ConstraintSet {
    fn eq(&self, other: &Self) -> bool {
        use ConstraintSet::*;
        match (self, other) {
            (Whole(a), Whole(b)) | (NonnegOrthant(a), NonnegOrthant(b)) => a == b,
            (Ball { center: c1, radius: r1 }, Ball { center: c2, radius: r2 }) => c1 == c2 && r1 == r2,
            (Box { lo: l1, hi: h1 }, Box { lo: l2, hi: h2 }) => l1 == l2 && h1 == h2,
            (Product(a), Product(b)) => a == b,
            (
                Custom {
                    dim: d1, project: p1, ..
                },
                Custom {
                    dim: d2, project: p2, ..
                },
            ) => d1 == d2 && Arc::ptr_eq(p1, p2),
            _ => false,
        }
    }
}

impl ConstraintSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(VrviError::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConstraintSet::Ball { center, radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        ConstraintSet::Ball {
            center: Point::zeros(dim),
            radius: 1.0,
        }
    }

    pub fn boxed(lo: Point, hi: Point) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        if let Some(i) = (0..lo.dim()).find(|&i| lo[i] > hi[i]) {
            return Err(VrviError::InvalidArgument(format!("box bound lo[{i}] > hi[{i}]")));
        }
        Ok(ConstraintSet::Box { lo, hi })
    }

    pub fn product(blocks: Vec<ConstraintSet>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(VrviError::InvalidArgument("product of zero sets".into()));
        }
        Ok(ConstraintSet::Product(blocks))
    }

    pub fn custom(dim: usize, diameter: Option<f64>, project: ProjectionFn) -> Self {
        ConstraintSet::Custom { dim, diameter, project }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Whole(n) | ConstraintSet::NonnegOrthant(n) => *n,
            ConstraintSet::Ball { center, .. } => center.dim(),
            ConstraintSet::Box { lo, .. } => lo.dim(),
            ConstraintSet::Product(blocks) => blocks.iter().map(|b| b.dim()).sum(),
            ConstraintSet::Custom { dim, .. } => *dim,
        }
    }

    /// Upper bound on `sup ||x - y||` over the set, `None` when unbounded.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            ConstraintSet::Whole(_) | ConstraintSet::NonnegOrthant(_) => None,
            ConstraintSet::Ball { radius, .. } => Some(2.0 * radius),
            ConstraintSet::Box { lo, hi } => Some(hi.dist(lo)),
            ConstraintSet::Product(blocks) => blocks
                .iter()
                .map(|b| b.diameter().map(|d| d * d))
                .sum::<Option<f64>>()
                .map(f64::sqrt),
            ConstraintSet::Custom { diameter, .. } => *diameter,
        }
    }

    pub fn project(&self, p: &Point) -> Result<Point> {
        check_dim(self.dim(), p.dim())?;
        Ok(self.project_unchecked(p))
    }

    pub(crate) fn project_unchecked(&self, p: &Point) -> Point {
        match self {
            ConstraintSet::Whole(_) => p.clone(),
            ConstraintSet::Ball { center, radius } => {
                let d = p.dist(center);
                if d <= *radius {
                    p.clone()
                } else {
                    let s = radius / d;
                    Point::lincomb(1.0 - s, center, s, p)
                }
            }
            ConstraintSet::NonnegOrthant(_) => Point::from_vec(p.iter().map(|v| v.max(0.0)).collect()),
            ConstraintSet::Box { lo, hi } => Point::from_vec(
                p.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(v, (l, h))| v.max(*l).min(*h))
                    .collect(),
            ),
            ConstraintSet::Product(blocks) => {
                let mut out = Vec::with_capacity(p.dim());
                let mut start = 0;
                for b in blocks {
                    let end = start + b.dim();
                    out.extend(b.project_unchecked(&p.slice(start, end)).into_vec());
                    start = end;
                }
                Point::from_vec(out)
            }
            ConstraintSet::Custom { project, .. } => project(p),
        }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        p.dim() == self.dim() && self.project_unchecked(p).dist(p) <= tol
    }

    /// Draws a feasible point. Unbounded coordinates use `N(0, scale^2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Point {
        match self {
            ConstraintSet::Whole(n) => gaussian(rng, *n, scale),
            ConstraintSet::NonnegOrthant(n) => {
                Point::from_vec(gaussian(rng, *n, scale).iter().map(|v| v.abs()).collect())
            }
            ConstraintSet::Ball { center, radius } => {
                let n = center.dim();
                let dir = unit_sphere(rng, n);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                Point::lincomb(1.0, center, r, &dir)
            }
            ConstraintSet::Box { lo, hi } => Point::from_vec(
                lo.iter()
                    .zip(hi.iter())
                    .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                    .collect(),
            ),
            ConstraintSet::Product(blocks) => {
                let mut out = Vec::with_capacity(self.dim());
                for b in blocks {
                    out.extend(b.sample(rng, scale).into_vec());
                }
                Point::from_vec(out)
            }
            ConstraintSet::Custom { project, dim, .. } => project(&gaussian(rng, *dim, scale)),
        }
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Point {
    Point::from_vec(
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect::<Vec<f64>>(),
    )
}

/// Uniform direction on the unit sphere in R^n (normalized Gaussian; `+-1` for n = 1).
pub(crate) fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Point {
    if n == 1 {
        return Point::from_vec(vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]);
    }
    loop {
        let g = gaussian(rng, n, 1.0);
        let norm = g.norm();
        if norm > 1e-300 {
            return g.scale(1.0 / norm);
        }
    }
}
