//! Path development of piecewise-linear paths into the edge group, and exact
//! level-1/2 signatures for area computations.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::connection::Matrix2Connection;
use crate::crossed::GL0Element;
use crate::error::{Error, Result};
use crate::matrix::{expm, DenseMatrix};

/// A piecewise-linear path given by its ordered vertices.
#[derive(Debug, Clone)]
pub struct PLPath {
    pub vertices: Vec<DVector<f64>>,
}

impl PLPath {
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidArgument("path needs at least one vertex".into()));
        }
        let d = vertices[0].len();
        for v in &vertices {
            if v.len() != d {
                return Err(Error::ShapeMismatch {
                    expected: format!("vertices of dimension {d}"),
                    got: format!("{}", v.len()),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite vertex".into()));
            }
        }
        Ok(PLPath { vertices })
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn reverse(&self) -> PLPath {
        PLPath {
            vertices: self.vertices.iter().rev().cloned().collect(),
        }
    }

    pub fn concat(&self, other: &PLPath) -> PLPath {
        let mut vertices = self.vertices.clone();
        vertices.extend(other.vertices.iter().cloned());
        PLPath { vertices }
    }

    pub fn increments(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.vertices.windows(2).map(|w| &w[1] - &w[0])
    }

    pub fn is_loop(&self, tol: f64) -> bool {
        (self.vertices.last().unwrap() - &self.vertices[0]).norm() <= tol
    }
}

/// Memoizes segment exponentials keyed on the raw bits of the increment.
/// Grid developments reuse the same increments heavily. Inserts are
/// idempotent, so sharing a cache across threads would be sound; here each
/// developer owns its cache.
pub struct SegmentCache<'a> {
    conn: &'a Matrix2Connection,
    cache: HashMap<Vec<u64>, (DenseMatrix, DenseMatrix)>,
}

impl<'a> SegmentCache<'a> {
    pub fn new(conn: &'a Matrix2Connection) -> Self {
        SegmentCache {
            conn,
            cache: HashMap::new(),
        }
    }

    /// Returns `(exp(alpha(delta)), exp(beta(delta)))` for one segment.
    pub fn segment(&mut self, delta: &DVector<f64>) -> Result<(DenseMatrix, DenseMatrix)> {
        let key: Vec<u64> = delta.iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let f = expm(&self.conn.alpha_of(delta.as_slice())?)?;
        let g = expm(&self.conn.beta_of(delta.as_slice())?)?;
        self.cache.insert(key, (f.clone(), g.clone()));
        Ok((f, g))
    }
}

/// Develops a piecewise-linear path into the edge group: the pair of
/// left-to-right products of segment exponentials of alpha and beta.
pub fn develop_pl_pair(conn: &Matrix2Connection, path: &PLPath) -> Result<GL0Element> {
    if path.dim() != conn.d {
        return Err(Error::ShapeMismatch {
            expected: format!("path dimension {}", conn.d),
            got: format!("{}", path.dim()),
        });
    }
    let mut cache = SegmentCache::new(conn);
    let r1 = conn.dims.rows1();
    let r0 = conn.dims.rows0();
    let mut f = DMatrix::identity(r1, r1);
    let mut g = DMatrix::identity(r0, r0);
    for delta in path.increments() {
        if delta.norm() == 0.0 {
            continue;
        }
        let (ef, eg) = cache.segment(&delta)?;
        f = f * ef;
        g = g * eg;
    }
    GL0Element::project(conn.dims, f, g)
}

/// Levels 1 and 2 of the path signature.
#[derive(Debug, Clone)]
pub struct Sig2 {
    pub level1: DVector<f64>,
    pub level2: DMatrix<f64>,
}

impl Sig2 {
    /// Antisymmetric part of the second level; for a loop this is the
    /// signed-area matrix.
    pub fn antisymmetric(&self) -> DMatrix<f64> {
        (&self.level2 - self.level2.transpose()) * 0.5
    }
}

/// Exact level-1/2 signature of a piecewise-linear path via Chen's identity:
/// `S2 = sum_k D_k (x) D_k / 2 + sum_{j<k} D_j (x) D_k`.
pub fn signature_level2(path: &PLPath) -> Result<Sig2> {
    if path.vertices.len() < 2 {
        return Err(Error::InvalidArgument(
            "signature needs at least two vertices".into(),
        ));
    }
    let d = path.dim();
    let mut level1 = DVector::zeros(d);
    let mut level2 = DMatrix::zeros(d, d);
    for delta in path.increments() {
        // Chen: S2 <- S2 + S1 (x) delta + delta (x) delta / 2.
        for i in 0..d {
            for j in 0..d {
                level2[(i, j)] += level1[i] * delta[j] + 0.5 * delta[i] * delta[j];
            }
        }
        level1 += delta;
    }
    Ok(Sig2 { level1, level2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::sample_restricted;
    use crate::testutil::rng;

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    #[test]
    fn constant_path_develops_to_identity() {
        let mut r = rng(40);
        let conn = sample_restricted(1, 0, &mut r);
        let p = PLPath::new(vec![vec2(0.3, 0.4); 3]).unwrap();
        let dev = develop_pl_pair(&conn, &p).unwrap();
        assert!(dev.is_identity(1e-14));
    }

    #[test]
    fn single_segment_is_exponential() {
        let mut r = rng(41);
        let conn = sample_restricted(1, 0, &mut r);
        let v = vec2(0.2, -0.7);
        let p = PLPath::new(vec![vec2(0.0, 0.0), v.clone()]).unwrap();
        let dev = develop_pl_pair(&conn, &p).unwrap();
        let f = expm(&conn.alpha_of(v.as_slice()).unwrap()).unwrap();
        let g = expm(&conn.beta_of(v.as_slice()).unwrap()).unwrap();
        assert!((dev.f - f).norm() < 1e-12);
        assert!((dev.g - g).norm() < 1e-12);
    }

    #[test]
    fn concatenation_multiplies_and_reversal_inverts() {
        let mut r = rng(42);
        let conn = sample_restricted(1, 1, &mut r);
        let verts: Vec<DVector<f64>> = (0..6)
            .map(|_| crate::testutil::random_vector(&mut r, 3, 0.5))
            .collect();
        let path = PLPath::new(verts.clone()).unwrap();
        let left = PLPath::new(verts[..4].to_vec()).unwrap();
        let right = PLPath::new(verts[3..].to_vec()).unwrap();
        let dev = develop_pl_pair(&conn, &path).unwrap();
        let dl = develop_pl_pair(&conn, &left).unwrap();
        let dr = develop_pl_pair(&conn, &right).unwrap();
        assert!(dev.distance(&dl.mul(&dr)) < 1e-11);

        let back = develop_pl_pair(&conn, &path.reverse()).unwrap();
        assert!(back.distance(&dev.inv().unwrap()) < 1e-10);
    }

    #[test]
    fn midpoint_insertion_is_invisible() {
        let mut r = rng(43);
        let conn = sample_restricted(1, 1, &mut r);
        let a = crate::testutil::random_vector(&mut r, 3, 1.0);
        let b = crate::testutil::random_vector(&mut r, 3, 1.0);
        let mid = (&a + &b) * 0.5;
        let direct = PLPath::new(vec![a.clone(), b.clone()]).unwrap();
        let split = PLPath::new(vec![a, mid, b]).unwrap();
        let d1 = develop_pl_pair(&conn, &direct).unwrap();
        let d2 = develop_pl_pair(&conn, &split).unwrap();
        assert!(d1.distance(&d2) < 1e-12);

        let s1 = signature_level2(&direct).unwrap();
        let s2 = signature_level2(&split).unwrap();
        assert!((s1.level2 - s2.level2).norm() < 1e-12);
    }

    #[test]
    fn signature_single_segment_and_rectangle() {
        let v = vec2(0.7, -0.3);
        let p = PLPath::new(vec![vec2(0.0, 0.0), v.clone()]).unwrap();
        let s = signature_level2(&p).unwrap();
        assert!((s.level2.clone() - &v * v.transpose() * 0.5).norm() < 1e-14);

        // Rectangle loop with sides a*e1 then b*e2: signed area a*b.
        let (a, b) = (0.8, 1.3);
        let p = PLPath::new(vec![
            vec2(0.0, 0.0),
            vec2(a, 0.0),
            vec2(a, b),
            vec2(0.0, b),
            vec2(0.0, 0.0),
        ])
        .unwrap();
        let s = signature_level2(&p).unwrap();
        assert!(s.level1.norm() < 1e-14);
        let anti = s.antisymmetric();
        assert!((anti[(0, 1)] - a * b).abs() < 1e-13);
        let sym = (s.level2.clone() + s.level2.transpose()) * 0.5;
        assert!(sym.norm() < 1e-13);
    }

    #[test]
    fn chen_identity_on_random_split() {
        let mut r = rng(44);
        let verts: Vec<DVector<f64>> = (0..7)
            .map(|_| crate::testutil::random_vector(&mut r, 3, 1.0))
            .collect();
        let x = PLPath::new(verts[..4].to_vec()).unwrap();
        let y = PLPath::new(verts[3..].to_vec()).unwrap();
        let sx = signature_level2(&x).unwrap();
        let sy = signature_level2(&y).unwrap();
        let sxy = signature_level2(&x.concat(&y)).unwrap();
        // Repeated junction vertex contributes a zero increment.
        let expect = &sx.level2 + &sx.level1 * sy.level1.transpose() + &sy.level2;
        assert!((sxy.level2 - expect).norm() < 1e-13);
        assert!((sxy.level1 - (&sx.level1 + &sy.level1)).norm() < 1e-14);
    }
}
