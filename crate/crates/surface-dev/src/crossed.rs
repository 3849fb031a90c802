//! The matrix crossed module of invertible chain maps and chain homotopies,
//! together with its Lie algebra: star product, star inverse, star
//! exponential, boundary map and action.
//!
//! Elements of the edge group are pairs `(F, G)` with block forms
//! `F = [[A, 0], [B, C]]` and `G = [[A, D], [0, E]]` sharing the `A` block.
//! Interior elements are single matrices `H = [[A - I, D], [B, U]]` mapping
//! the codomain space into the domain space of the chain complex. The
//! boundary map phi of the complex is `[[I_n, 0], [0, 0]]`, derived from the
//! dimensions and never stored per element.


use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{expm, inverse, phi1_phi2, DenseMatrix};

/// Tolerance for block-pattern checks at construction.
pub const BLOCK_TOL: f64 = 1e-10;

/// Dimensions (n, m, p) of the underlying two-term complex
/// `R^{n+m} -> R^{n+p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModuleDims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl ModuleDims {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        ModuleDims { n, m, p }
    }

    /// Row dimension of interior elements (and of F).
    pub fn rows1(&self) -> usize {
        self.n + self.m
    }

    /// Column dimension of interior elements (and row dimension of G).
    pub fn rows0(&self) -> usize {
        self.n + self.p
    }

    /// Materializes the boundary map `phi = [[I_n, 0], [0, 0]]` of shape
    /// `(n+p) x (n+m)`.
    pub fn phi(&self) -> DenseMatrix {
        let mut phi = DenseMatrix::zeros(self.rows0(), self.rows1());
        for i in 0..self.n {
            phi[(i, i)] = 1.0;
        }
        phi
    }
}

fn block(m: &DenseMatrix, r0: usize, c0: usize, nr: usize, nc: usize) -> DenseMatrix {
    m.view((r0, c0), (nr, nc)).into_owned()
}

fn assemble2x2(
    tl: &DenseMatrix,
    tr: &DenseMatrix,
    bl: &DenseMatrix,
    br: &DenseMatrix,
) -> DenseMatrix {
    let (n0, m0) = (tl.nrows(), tl.ncols());
    let (n1, m1) = (br.nrows(), br.ncols());
    let mut out = DenseMatrix::zeros(n0 + n1, m0 + m1);
    out.view_mut((0, 0), (n0, m0)).copy_from(tl);
    out.view_mut((0, m0), (n0, m1)).copy_from(tr);
    out.view_mut((n0, 0), (n1, m0)).copy_from(bl);
    out.view_mut((n0, m0), (n1, m1)).copy_from(br);
    out
}

/// An invertible chain-map pair `(F, G)`.
#[derive(Debug, Clone)]
pub struct GL0Element {
    pub dims: ModuleDims,
    pub f: DenseMatrix,
    pub g: DenseMatrix,
}

impl GL0Element {
    /// Validates shapes, the zero blocks, the shared `A` block and
    /// invertibility of both components.
    pub fn new(dims: ModuleDims, f: DenseMatrix, g: DenseMatrix) -> Result<Self> {
        let el = GL0Element { dims, f, g };
        el.validate()?;
        Ok(el)
    }

    /// Zeroes the forbidden blocks and copies the `A` block of `F` into `G`
    /// before validating. Useful after long compositions where floating
    /// point drift accumulates.
    pub fn project(dims: ModuleDims, f: DenseMatrix, mut g: DenseMatrix) -> Result<Self> {
        let (n, m, p) = (dims.n, dims.m, dims.p);
        let mut f = f;
        f.view_mut((0, n), (n, m)).fill(0.0);
        g.view_mut((n, 0), (p, n)).fill(0.0);
        let a = block(&f, 0, 0, n, n);
        g.view_mut((0, 0), (n, n)).copy_from(&a);
        GL0Element::new(dims, f, g)
    }

    fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.dims.n, self.dims.m, self.dims.p);
        if self.f.shape() != (n + m, n + m) || self.g.shape() != (n + p, n + p) {
            return Err(Error::ShapeMismatch {
                expected: format!("F {0}x{0}, G {1}x{1}", n + m, n + p),
                got: format!(
                    "F {}x{}, G {}x{}",
                    self.f.nrows(),
                    self.f.ncols(),
                    self.g.nrows(),
                    self.g.ncols()
                ),
            });
        }
        let zero_f = block(&self.f, 0, n, n, m).norm();
        let zero_g = block(&self.g, n, 0, p, n).norm();
        if zero_f > 0.0 || zero_g > 0.0 {
            return Err(Error::BlockPattern {
                context: "GL0 zero blocks".into(),
                residual: zero_f.max(zero_g),
                tol: 0.0,
            });
        }
        let a_mismatch = (block(&self.f, 0, 0, n, n) - block(&self.g, 0, 0, n, n)).norm();
        if a_mismatch > BLOCK_TOL {
            return Err(Error::BlockPattern {
                context: "GL0 shared A block".into(),
                residual: a_mismatch,
                tol: BLOCK_TOL,
            });
        }
        let det_f = self.f.clone().lu().determinant();
        let det_g = self.g.clone().lu().determinant();
        if !(det_f.is_finite() && det_f != 0.0) {
            return Err(Error::Singular { context: "GL0 F".into(), det: det_f });
        }
        if !(det_g.is_finite() && det_g != 0.0) {
            return Err(Error::Singular { context: "GL0 G".into(), det: det_g });
        }
        Ok(())
    }

    pub fn identity(dims: ModuleDims) -> Self {
        GL0Element {
            dims,
            f: DenseMatrix::identity(dims.rows1(), dims.rows1()),
            g: DenseMatrix::identity(dims.rows0(), dims.rows0()),
        }
    }

    pub fn mul(&self, other: &GL0Element) -> GL0Element {
        GL0Element {
            dims: self.dims,
            f: &self.f * &other.f,
            g: &self.g * &other.g,
        }
    }

    pub fn inv(&self) -> Result<GL0Element> {
        Ok(GL0Element {
            dims: self.dims,
            f: inverse(&self.f, "GL0 F inverse")?,
            g: inverse(&self.g, "GL0 G inverse")?,
        })
    }

    /// Frobenius distance to another pair, used for edge-match checks.
    pub fn distance(&self, other: &GL0Element) -> f64 {
        ((&self.f - &other.f).norm_squared() + (&self.g - &other.g).norm_squared()).sqrt()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&GL0Element::identity(self.dims)) <= tol
    }
}

/// A chain-map pair in the edge Lie algebra (same block pattern as
/// [`GL0Element`], no invertibility requirement).
#[derive(Debug, Clone)]
pub struct Gl0Element {
    pub dims: ModuleDims,
    pub x: DenseMatrix,
    pub y: DenseMatrix,
}

impl Gl0Element {
    pub fn new(dims: ModuleDims, x: DenseMatrix, y: DenseMatrix) -> Result<Self> {
        let (n, m, p) = (dims.n, dims.m, dims.p);
        if x.shape() != (n + m, n + m) || y.shape() != (n + p, n + p) {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} and {1}x{1}", n + m, n + p),
                got: format!("{}x{} and {}x{}", x.nrows(), x.ncols(), y.nrows(), y.ncols()),
            });
        }
        let resid = block(&x, 0, n, n, m)
            .norm()
            .max(block(&y, n, 0, p, n).norm())
            .max((block(&x, 0, 0, n, n) - block(&y, 0, 0, n, n)).norm());
        if resid > BLOCK_TOL {
            return Err(Error::BlockPattern {
                context: "gl0 block pattern".into(),
                residual: resid,
                tol: BLOCK_TOL,
            });
        }
        Ok(Gl0Element { dims, x, y })
    }

    pub fn exp(&self) -> Result<GL0Element> {
        GL0Element::project(self.dims, expm(&self.x)?, expm(&self.y)?)
    }

    pub fn commutator(&self, other: &Gl0Element) -> Gl0Element {
        Gl0Element {
            dims: self.dims,
            x: &self.x * &other.x - &other.x * &self.x,
            y: &self.y * &other.y - &other.y * &self.y,
        }
    }
}

/// A chain homotopy from the identity: `H = [[A - I, D], [B, U]]` with
/// `I + H phi` invertible.
#[derive(Debug, Clone)]
pub struct GL1Element {
    pub dims: ModuleDims,
    pub h: DenseMatrix,
}

impl GL1Element {
    pub fn new(dims: ModuleDims, h: DenseMatrix) -> Result<Self> {
        if h.shape() != (dims.rows1(), dims.rows0()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", dims.rows1(), dims.rows0()),
                got: format!("{}x{}", h.nrows(), h.ncols()),
            });
        }
        let n = dims.n;
        let a = block(&h, 0, 0, n, n) + DenseMatrix::identity(n, n);
        let det = a.lu().determinant();
        if n > 0 && !(det.is_finite() && det != 0.0) {
            return Err(Error::Singular {
                context: "GL1 top-left block + I".into(),
                det,
            });
        }
        Ok(GL1Element { dims, h })
    }

    pub fn zero(dims: ModuleDims) -> Self {
        GL1Element {
            dims,
            h: DenseMatrix::zeros(dims.rows1(), dims.rows0()),
        }
    }

    pub fn norm(&self) -> f64 {
        self.h.norm()
    }
}

/// An element of the interior Lie algebra: an unconstrained matrix of the
/// same shape as a chain homotopy.
#[derive(Debug, Clone)]
pub struct Gl1Element {
    pub dims: ModuleDims,
    pub z: DenseMatrix,
}

impl Gl1Element {
    pub fn new(dims: ModuleDims, z: DenseMatrix) -> Result<Self> {
        if z.shape() != (dims.rows1(), dims.rows0()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", dims.rows1(), dims.rows0()),
                got: format!("{}x{}", z.nrows(), z.ncols()),
            });
        }
        Ok(Gl1Element { dims, z })
    }

    pub fn zero(dims: ModuleDims) -> Self {
        Gl1Element {
            dims,
            z: DenseMatrix::zeros(dims.rows1(), dims.rows0()),
        }
    }

    pub fn norm(&self) -> f64 {
        self.z.norm()
    }
}

fn check_dims(a: ModuleDims, b: ModuleDims) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: format!("{a:?}"),
            got: format!("{b:?}"),
        });
    }
    Ok(())
}

/// Group law on interior elements: `H * H' = H + H' + H phi H'`.
pub fn star_mul(h: &GL1Element, h2: &GL1Element) -> Result<GL1Element> {
    check_dims(h.dims, h2.dims)?;
    let phi = h.dims.phi();
    GL1Element::new(h.dims, &h.h + &h2.h + &h.h * &phi * &h2.h)
}

/// Inverse with respect to the star product: `-(I + H phi)^{-1} H`.
pub fn star_inv(h: &GL1Element) -> Result<GL1Element> {
    let phi = h.dims.phi();
    let r1 = h.dims.rows1();
    let lhs = DenseMatrix::identity(r1, r1) + &h.h * &phi;
    let lu = lhs.lu();
    let det = lu.determinant();
    let solved = lu.solve(&h.h).ok_or(Error::Singular {
        context: "star_inv: I + H phi".into(),
        det,
    })?;
    GL1Element::new(h.dims, -solved)
}

/// Lie exponential of the interior algebra, evaluated through its closed
/// block formula: with `Z = [[R, S], [T, U]]`,
/// `exp_*(Z) = [[exp(R) - I, phi1(R) S], [T phi1(R), U + T phi2(R) S]]`.
pub fn star_exp(z: &Gl1Element) -> Result<GL1Element> {
    let (n, m, p) = (z.dims.n, z.dims.m, z.dims.p);
    let r = block(&z.z, 0, 0, n, n);
    let s = block(&z.z, 0, n, n, p);
    let t = block(&z.z, n, 0, m, n);
    let u = block(&z.z, n, n, m, p);
    let (p1, p2) = phi1_phi2(&r)?;
    let tl = expm(&r)? - DenseMatrix::identity(n, n);
    let tr = &p1 * &s;
    let bl = &t * &p1;
    let br = &u + &t * &p2 * &s;
    GL1Element::new(z.dims, assemble2x2(&tl, &tr, &bl, &br))
}

/// Boundary of a group interior element: `(H phi + I, phi H + I)`.
pub fn delta(h: &GL1Element) -> Result<GL0Element> {
    let phi = h.dims.phi();
    let r1 = h.dims.rows1();
    let r0 = h.dims.rows0();
    let f = &h.h * &phi + DenseMatrix::identity(r1, r1);
    let g = &phi * &h.h + DenseMatrix::identity(r0, r0);
    GL0Element::new(h.dims, f, g)
}

/// Boundary of an algebra interior element: `(Z phi, phi Z)`.
pub fn delta_algebra(z: &Gl1Element) -> Result<Gl0Element> {
    let phi = z.dims.phi();
    Gl0Element::new(z.dims, &z.z * &phi, &phi * &z.z)
}

/// Action of the edge group on group interior elements: `F H G^{-1}`.
pub fn act(g: &GL0Element, h: &GL1Element) -> Result<GL1Element> {
    check_dims(g.dims, h.dims)?;
    let ginv = inverse(&g.g, "act: G inverse")?;
    GL1Element::new(h.dims, &g.f * &h.h * ginv)
}

/// Action of the edge group on algebra interior elements (same formula).
pub fn act_algebra(g: &GL0Element, z: &Gl1Element) -> Result<Gl1Element> {
    check_dims(g.dims, z.dims)?;
    let ginv = inverse(&g.g, "act: G inverse")?;
    Gl1Element::new(z.dims, &g.f * &z.z * ginv)
}

/// Infinitesimal action of the edge algebra: `(X, Y) |> Z = X Z - Z Y`.
pub fn act_algebra_infinitesimal(x: &Gl0Element, z: &Gl1Element) -> Result<Gl1Element> {
    check_dims(x.dims, z.dims)?;
    Gl1Element::new(z.dims, &x.x * &z.z - &z.z * &x.y)
}

/// Commutator with respect to the star product:
/// `[Z, Z'] = Z phi Z' - Z' phi Z`.
pub fn star_commutator(z: &Gl1Element, z2: &Gl1Element) -> Result<Gl1Element> {
    check_dims(z.dims, z2.dims)?;
    let phi = z.dims.phi();
    Gl1Element::new(z.dims, &z.z * &phi * &z2.z - &z2.z * &phi * &z.z)
}

/// Random edge-group element with blocks drawn from centered Gaussians of
/// the given scale; the invertible blocks are built as exponentials so
/// membership is exact.
pub fn random_gl0<R: Rng>(dims: ModuleDims, rng: &mut R, scale: f64) -> GL0Element {
    let (n, m, p) = (dims.n, dims.m, dims.p);
    let gauss = |rng: &mut R, r: usize, c: usize| -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            v * scale
        })
    };
    let a = expm(&gauss(rng, n, n)).expect("expm of finite matrix");
    let c = expm(&gauss(rng, m, m)).expect("expm of finite matrix");
    let e = expm(&gauss(rng, p, p)).expect("expm of finite matrix");
    let b = gauss(rng, m, n);
    let d = gauss(rng, n, p);
    let f = assemble2x2(&a, &DenseMatrix::zeros(n, m), &b, &c);
    let g = assemble2x2(&a, &d, &DenseMatrix::zeros(p, n), &e);
    GL0Element::new(dims, f, g).expect("constructed from valid blocks")
}

/// Random interior algebra element with Gaussian entries of the given scale.
pub fn random_gl1_algebra<R: Rng>(dims: ModuleDims, rng: &mut R, scale: f64) -> Gl1Element {
    let z = DenseMatrix::from_fn(dims.rows1(), dims.rows0(), |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        v * scale
    });
    Gl1Element::new(dims, z).expect("shape correct by construction")
}

/// Random interior group element, produced as the star exponential of a
/// random algebra element so membership is exact.
pub fn random_gl1<R: Rng>(dims: ModuleDims, rng: &mut R, scale: f64) -> GL1Element {
    star_exp(&random_gl1_algebra(dims, rng, scale)).expect("star_exp is total")
}
