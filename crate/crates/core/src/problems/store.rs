//! Versioned little-endian binary format for generated instances.
//!
//! Layout: magic `VRVI1`, `u32` version, `u8` kind, then the payload.
//! Vectors are a `u64` length followed by `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use crate::component::{AffineComponent, QuadraticComponent};
use crate::error::{Result, VrviError};
use crate::linalg::DenseMatrix;
use crate::point::Point;
use crate::sets::ConstraintSet;

use super::np::{Loss, NpInstance, NpSpec};
use super::synthetic::AffineQuadraticInstance;

pub const MAGIC: &[u8; 5] = b"VRVI1";
pub const VERSION: u32 = 1;

const KIND_AFFINE: u8 = 1;
const KIND_NP: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum StoredProblem {
    Affine(AffineQuadraticInstance),
    Np(NpInstance),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }
    fn matrix(&mut self, m: &DenseMatrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        m.data().iter().for_each(|&x| self.f64(x));
    }
    fn set(&mut self, s: &ConstraintSet) -> Result<()> {
        match s {
            ConstraintSet::Whole(n) => {
                self.u8(0);
                self.u64(*n as u64);
            }
            ConstraintSet::Ball { center, radius } => {
                self.u8(1);
                self.f64s(center);
                self.f64(*radius);
            }
            ConstraintSet::NonnegOrthant(n) => {
                self.u8(2);
                self.u64(*n as u64);
            }
            ConstraintSet::Box { lo, hi } => {
                self.u8(3);
                self.f64s(lo);
                self.f64s(hi);
            }
            ConstraintSet::Product(blocks) => {
                self.u8(4);
                self.u64(blocks.len() as u64);
                for b in blocks {
                    self.set(b)?;
                }
            }
            ConstraintSet::Custom { .. } => {
                return Err(VrviError::InvalidArgument("custom sets cannot be serialized".into()))
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, msg: &str) -> VrviError {
        VrviError::Parse {
            line: 0,
            msg: format!("{msg} at byte {}", self.pos),
        }
    }
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| self.err("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // each element occupies at least one byte
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(self.err("length exceeds input"));
        }
        Ok(n as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn point(&mut self) -> Result<Point> {
        Point::new(self.f64s()?)
    }
    fn matrix(&mut self) -> Result<DenseMatrix> {
        let r = self.len()?;
        let c = self.len()?;
        let n = r.checked_mul(c).ok_or_else(|| self.err("matrix too large"))?;
        if n > self.buf.len() {
            return Err(self.err("matrix exceeds input"));
        }
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        DenseMatrix::from_row_major(r, c, data)
    }
    fn set(&mut self) -> Result<ConstraintSet> {
        Ok(match self.u8()? {
            0 => ConstraintSet::Whole(self.len()?),
            1 => {
                let c = self.point()?;
                ConstraintSet::ball(c, self.f64()?)?
            }
            2 => ConstraintSet::NonnegOrthant(self.len()?),
            3 => {
                let lo = self.point()?;
                ConstraintSet::boxed(lo, self.point()?)?
            }
            4 => {
                let n = self.len()?;
                ConstraintSet::product((0..n).map(|_| self.set()).collect::<Result<_>>()?)?
            }
            t => return Err(self.err(&format!("unknown set tag {t}"))),
        })
    }
}

pub fn encode(problem: &StoredProblem) -> Result<Vec<u8>> {
    let mut w = Writer(MAGIC.to_vec());
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    match problem {
        StoredProblem::Affine(inst) => {
            w.u8(KIND_AFFINE);
            w.set(&inst.set)?;
            w.u64(inst.h_terms.len() as u64);
            for (t, l) in inst.h_terms.iter().zip(&inst.h_lipschitz) {
                w.matrix(&t.matrix);
                w.f64s(&t.offset);
                w.f64(*l);
            }
            w.u64(inst.g_terms.len() as u64);
            for (t, l) in inst.g_terms.iter().zip(&inst.g_lipschitz) {
                w.matrix(&t.hessian);
                w.f64s(&t.linear);
                w.f64(t.constant);
                w.f64(*l);
            }
            w.f64(inst.mu_h.unwrap_or(f64::NAN));
            w.f64s(&inst.x_star);
        }
        StoredProblem::Np(inst) => {
            let s = &inst.spec;
            w.u8(KIND_NP);
            for v in [s.n_features, s.m1, s.m2] {
                w.u64(v as u64);
            }
            w.u8(match s.loss {
                Loss::SmoothedHinge => 0,
                Loss::Logistic => 1,
            });
            for v in [s.lambda, s.r1, s.separation] {
                w.f64(v);
            }
            w.u64(s.seed);
            for class in [&inst.class0, &inst.class1] {
                w.u64(class.len() as u64);
                for p in class {
                    w.f64s(p);
                }
            }
        }
    }
    Ok(w.0)
}

pub fn decode(bytes: &[u8]) -> Result<StoredProblem> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(5).ok() != Some(MAGIC.as_slice()) {
        return Err(VrviError::Parse {
            line: 0,
            msg: "missing VRVI1 header".into(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.err(&format!("unsupported version {version}")));
    }
    let out = match r.u8()? {
        KIND_AFFINE => {
            let set = r.set()?;
            let nh = r.len()?;
            let mut h_terms = Vec::with_capacity(nh);
            let mut h_lipschitz = Vec::with_capacity(nh);
            for _ in 0..nh {
                let m = r.matrix()?;
                let b = r.point()?;
                if m.rows() != m.cols() || m.rows() != b.dim() {
                    return Err(r.err("inconsistent affine term"));
                }
                h_terms.push(AffineComponent::new(m, b));
                h_lipschitz.push(r.f64()?);
            }
            let ng = r.len()?;
            let mut g_terms = Vec::with_capacity(ng);
            let mut g_lipschitz = Vec::with_capacity(ng);
            for _ in 0..ng {
                let q = r.matrix()?;
                let c = r.point()?;
                if q.rows() != q.cols() || q.rows() != c.dim() {
                    return Err(r.err("inconsistent quadratic term"));
                }
                g_terms.push(QuadraticComponent::new(q, c, r.f64()?));
                g_lipschitz.push(r.f64()?);
            }
            let mu = r.f64()?;
            let x_star = r.point()?;
            StoredProblem::Affine(AffineQuadraticInstance {
                h_terms,
                h_lipschitz,
                g_terms,
                g_lipschitz,
                set,
                mu_h: (!mu.is_nan()).then_some(mu),
                x_star,
            })
        }
        KIND_NP => {
            let n_features = r.len()?;
            let m1 = r.len()?;
            let m2 = r.len()?;
            let loss = match r.u8()? {
                0 => Loss::SmoothedHinge,
                1 => Loss::Logistic,
                t => return Err(r.err(&format!("unknown loss tag {t}"))),
            };
            let (lambda, r1, separation) = (r.f64()?, r.f64()?, r.f64()?);
            let seed = r.u64()?;
            let mut classes = Vec::new();
            for _ in 0..2 {
                let n = r.len()?;
                let pts = (0..n).map(|_| r.point()).collect::<Result<Vec<_>>>()?;
                if pts.iter().any(|p| p.dim() != n_features) {
                    return Err(r.err("data point dimension mismatch"));
                }
                classes.push(pts);
            }
            let class1 = classes.pop().expect("two classes");
            let class0 = classes.pop().expect("two classes");
            let spec = NpSpec {
                n_features,
                n0: class0.len(),
                n1: class1.len(),
                m1,
                m2,
                loss,
                lambda,
                r1,
                seed,
                separation,
            };
            StoredProblem::Np(NpInstance { spec, class0, class1 })
        }
        k => return Err(r.err(&format!("unknown problem kind {k}"))),
    };
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes"));
    }
    Ok(out)
}

pub fn save_problem(path: impl AsRef<Path>, problem: &StoredProblem) -> Result<()> {
    let bytes = encode(problem)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<StoredProblem> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}
