//! Component families, the noisy oracle model, snapshot caches and the
//! variance-reduced estimators built from them.

use std::fmt;

use rand::{Rng, RngCore};

use crate::component::SharedComponent;
use crate::error::{check_dim, Result, VrviError};
use crate::point::Point;
use crate::rng::stream_rng;
use crate::sets::unit_sphere;

/// Indexed list of components with their Lipschitz constants and the
/// Lipschitz-weighted sampling distribution.
#[derive(Clone)]
pub struct ComponentFamily {
    dim: usize,
    components: Vec<SharedComponent>,
    lipschitz: Vec<f64>,
    total_lipschitz: f64,
    cdf: Vec<f64>,
}

impl fmt::Debug for ComponentFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComponentFamily")
            .field("dim", &self.dim)
            .field("len", &self.components.len())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ComponentFamily {
    pub fn new(dim: usize, components: Vec<SharedComponent>, lipschitz: Vec<f64>) -> Result<Self> {
        check_dim(components.len(), lipschitz.len())?;
        for c in &components {
            check_dim(dim, c.dim())?;
        }
        if let Some(l) = lipschitz.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(VrviError::InvalidArgument(format!(
                "Lipschitz constants must be positive and finite, got {l}"
            )));
        }
        let total_lipschitz: f64 = lipschitz.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = lipschitz
            .iter()
            .map(|l| {
                acc += l;
                acc / total_lipschitz
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(ComponentFamily {
            dim,
            components,
            lipschitz,
            total_lipschitz,
            cdf,
        })
    }

    pub fn empty(dim: usize) -> Self {
        ComponentFamily {
            dim,
            components: vec![],
            lipschitz: vec![],
            total_lipschitz: 0.0,
            cdf: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, i: usize) -> &SharedComponent {
        &self.components[i]
    }

    pub fn components(&self) -> &[SharedComponent] {
        &self.components
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// `L = sum_i L_i` (0 for an empty family).
    pub fn total_lipschitz(&self) -> f64 {
        self.total_lipschitz
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Sampling probability `L_i / L`.
    pub fn probability(&self, i: usize) -> f64 {
        self.lipschitz[i] / self.total_lipschitz
    }

    pub fn inv_lipschitz_sum(&self) -> f64 {
        self.lipschitz.iter().map(|l| 1.0 / l).sum()
    }

    /// Exact sum of all components.
    pub fn eval_sum(&self, x: &Point) -> Point {
        let mut out = Point::zeros(self.dim);
        for c in &self.components {
            out.add_assign(&c.eval(x));
        }
        out
    }

    /// Sum of component values, `None` if any component has no value.
    pub fn value_sum(&self, x: &Point) -> Option<f64> {
        self.components.iter().map(|c| c.value(x)).sum()
    }

    /// Replaces component `i`, keeping the sampler consistent.
    pub fn with_component(&self, i: usize, component: SharedComponent, lipschitz: f64) -> Result<Self> {
        let mut comps = self.components.clone();
        let mut lips = self.lipschitz.clone();
        comps[i] = component;
        lips[i] = lipschitz;
        ComponentFamily::new(self.dim, comps, lips)
    }
}

/// Draws `i` with probability `L_i / L` by inverse CDF.
pub fn sample_component<R: Rng + ?Sized>(family: &ComponentFamily, rng: &mut R) -> usize {
    debug_assert!(!family.is_empty());
    let u: f64 = rng.random();
    let i = family.cdf.partition_point(|c| *c <= u);
    i.min(family.len() - 1)
}

/// Additive noise on top of a component's own sample: a fixed bias vector of
/// norm `bias_norm` per component plus `std * u`, `u` uniform on the unit
/// sphere, averaged over `repeats` draws.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub bias_norm: f64,
    pub std: f64,
    pub repeats: usize,
    pub rng_stream_id: u64,
    bias_vectors: Vec<Point>,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            bias_norm: 0.0,
            std: 0.0,
            repeats: 1,
            rng_stream_id: 0,
            bias_vectors: vec![],
        }
    }

    /// Draws the per-component bias directions once from `(seed, rng_stream_id)`.
    pub fn new(bias_norm: f64, std: f64, components: usize, dim: usize, seed: u64, rng_stream_id: u64) -> Result<Self> {
        if !(bias_norm >= 0.0 && std >= 0.0 && bias_norm.is_finite() && std.is_finite()) {
            return Err(VrviError::InvalidArgument(
                "noise bias and std must be nonnegative".into(),
            ));
        }
        let bias_vectors = if bias_norm > 0.0 {
            let mut rng = stream_rng(seed, 1000 + rng_stream_id);
            (0..components)
                .map(|_| unit_sphere(&mut rng, dim).scale(bias_norm))
                .collect()
        } else {
            vec![]
        };
        Ok(NoiseModel {
            bias_norm,
            std,
            repeats: 1,
            rng_stream_id,
            bias_vectors,
        })
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats.max(1);
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.bias_norm == 0.0 && self.std == 0.0
    }

    pub fn bias_vector(&self, i: usize) -> Option<&Point> {
        self.bias_vectors.get(i)
    }

    fn perturb(&self, i: usize, value: &mut Point, rng: &mut dyn RngCore) {
        if let Some(b) = self.bias_vectors.get(i) {
            value.add_assign(b);
        }
        if self.std > 0.0 {
            let scale = self.std / self.repeats as f64;
            for _ in 0..self.repeats {
                value.axpy(scale, &unit_sphere(rng, value.dim()));
            }
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

/// One oracle draw `H'_i(x)`: component sample plus additive noise.
pub fn eval_component_noisy(
    family: &ComponentFamily,
    noise: &NoiseModel,
    i: usize,
    x: &Point,
    rng: &mut dyn RngCore,
) -> Point {
    let c = family.component(i);
    let mut out = if c.is_stochastic() { c.sample(x, rng) } else { c.eval(x) };
    noise.perturb(i, &mut out, rng);
    out
}

/// Anchor point with the oracle realizations taken there.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotCache {
    pub anchor: Point,
    pub full_sum: Point,
    pub per_component: Vec<Point>,
}

impl SnapshotCache {
    pub fn ensure_anchor(&self, expected: &Point) -> Result<()> {
        if &self.anchor != expected {
            return Err(VrviError::StaleSnapshot);
        }
        Ok(())
    }
}

/// Evaluates every component once at `anchor`; costs `family.len()` calls.
pub fn refresh_snapshot(
    family: &ComponentFamily,
    noise: &NoiseModel,
    anchor: &Point,
    rng: &mut dyn RngCore,
    calls: &mut u64,
) -> SnapshotCache {
    let per_component: Vec<Point> = (0..family.len())
        .map(|i| eval_component_noisy(family, noise, i, anchor, rng))
        .collect();
    let mut full_sum = Point::zeros(family.dim());
    for p in &per_component {
        full_sum.add_assign(p);
    }
    *calls += (family.len() * noise.repeats) as u64;
    SnapshotCache {
        anchor: anchor.clone(),
        full_sum,
        per_component,
    }
}

/// `H'(w) + (1/q_i) (H'_i(x) - H'_i(w))`, reusing the cached realization at
/// the anchor. Costs one call unless `x` is the anchor itself.
pub fn vr_estimate(
    cache: &SnapshotCache,
    family: &ComponentFamily,
    noise: &NoiseModel,
    i: usize,
    x: &Point,
    rng: &mut dyn RngCore,
    calls: &mut u64,
) -> Point {
    if family.is_empty() || x == &cache.anchor {
        return cache.full_sum.clone();
    }
    let fresh = eval_component_noisy(family, noise, i, x, rng);
    *calls += noise.repeats as u64;
    let inv_q = 1.0 / family.probability(i);
    let mut out = cache.full_sum.clone();
    out.axpy(inv_q, &fresh);
    out.axpy(-inv_q, &cache.per_component[i]);
    out
}

/// Average of `batch` independent single-index estimates.
pub fn vr_estimate_batch(
    cache: &SnapshotCache,
    family: &ComponentFamily,
    noise: &NoiseModel,
    batch: usize,
    x: &Point,
    index_rng: &mut dyn RngCore,
    noise_rng: &mut dyn RngCore,
    calls: &mut u64,
) -> Point {
    if family.is_empty() {
        return cache.full_sum.clone();
    }
    let batch = batch.max(1);
    if batch == 1 {
        let i = sample_component(family, index_rng);
        return vr_estimate(cache, family, noise, i, x, noise_rng, calls);
    }
    let mut acc = Point::zeros(family.dim());
    for _ in 0..batch {
        let i = sample_component(family, index_rng);
        acc.add_assign(&vr_estimate(cache, family, noise, i, x, noise_rng, calls));
    }
    acc.scale(1.0 / batch as f64)
}

/// Stochastic error constants of the oracle model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryConstants {
    pub sigma_h_tilde_sq: f64,
    pub sigma_g_tilde_sq: f64,
    /// Per-iteration stochastic error of the monotone solver.
    pub delta_cap: f64,
    pub inv_lipschitz_sum_h: f64,
    pub inv_lipschitz_sum_g: f64,
}

pub fn compute_theory_constants(
    h: &ComponentFamily,
    g: &ComponentFamily,
    noise_h: &NoiseModel,
    noise_g: &NoiseModel,
    q: f64,
) -> Result<TheoryConstants> {
    if !(q > 0.0 && q < 1.0) {
        return Err(VrviError::InvalidArgument(format!("q must lie in (0, 1), got {q}")));
    }
    let inv_h = h.inv_lipschitz_sum();
    let inv_g = g.inv_lipschitz_sum();
    let var_h = noise_h.std.powi(2) / noise_h.repeats as f64;
    let var_g = noise_g.std.powi(2) / noise_g.repeats as f64;
    let sigma_h_tilde_sq = 2.0 * h.total_lipschitz() * (var_h + noise_h.bias_norm.powi(2)) * inv_h;
    let sigma_g_tilde_sq = 2.0 * g.total_lipschitz() * (var_g + noise_g.bias_norm.powi(2)) * inv_g;
    let m2 = g.len() as f64;
    let delta_cap = 2.0 * sigma_h_tilde_sq + (2.0 * m2 * var_g + 4.0 * sigma_g_tilde_sq) / (1.0 - q);
    Ok(TheoryConstants {
        sigma_h_tilde_sq,
        sigma_g_tilde_sq,
        delta_cap,
        inv_lipschitz_sum_h: inv_h,
        inv_lipschitz_sum_g: inv_g,
    })
}
