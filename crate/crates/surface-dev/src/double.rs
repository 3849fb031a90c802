//! Squares of the edge-symmetric double group built from the matrix crossed
//! module, with horizontal/vertical composition, identities and inverses.
//!
//! A square stores its four edges (bottom, right, top, left) and one
//! interior element tied together by the boundary law
//! `delta(E) = x . y . z^{-1} . w^{-1}`.

use crate::crossed::{act, delta, star_inv, star_mul, GL0Element, GL1Element, ModuleDims};
use crate::error::{Error, Result};

/// Default tolerance for boundary-law and edge-match checks.
pub const SQUARE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Square {
    /// Bottom edge.
    pub x: GL0Element,
    /// Right edge.
    pub y: GL0Element,
    /// Top edge.
    pub z: GL0Element,
    /// Left edge.
    pub w: GL0Element,
    /// Interior element.
    pub e: GL1Element,
    /// Boundary-law residual achieved at construction.
    pub residual: f64,
    /// Number of elementary cells this square was composed from. Composite
    /// squares re-validate the boundary law with tolerance scaled by
    /// sqrt(cells), since accumulated error grows diffusively.
    pub cells: usize,
}

/// Boundary-law residual together with the magnitude of the boundary
/// product; validation compares the residual against a tolerance scaled by
/// that magnitude, since developments of strong connections legitimately
/// carry large entries.
fn boundary_residual(
    x: &GL0Element,
    y: &GL0Element,
    z: &GL0Element,
    w: &GL0Element,
    e: &GL1Element,
) -> Result<(f64, f64)> {
    let boundary = x.mul(y).mul(&z.inv()?).mul(&w.inv()?);
    let scale = 1.0 + (boundary.f.norm_squared() + boundary.g.norm_squared()).sqrt();
    Ok((delta(e)?.distance(&boundary), scale))
}

impl Square {
    /// Validates the boundary law within `tol` and stores the achieved
    /// residual.
    pub fn new(
        x: GL0Element,
        y: GL0Element,
        z: GL0Element,
        w: GL0Element,
        e: GL1Element,
        tol: f64,
    ) -> Result<Self> {
        Self::with_cells(x, y, z, w, e, tol, 1)
    }

    pub fn with_cells(
        x: GL0Element,
        y: GL0Element,
        z: GL0Element,
        w: GL0Element,
        e: GL1Element,
        tol: f64,
        cells: usize,
    ) -> Result<Self> {
        let (residual, scale) = boundary_residual(&x, &y, &z, &w, &e)?;
        let scaled = tol * (cells as f64).sqrt() * scale;
        if residual > scaled {
            return Err(Error::BoundaryResidual { residual, tol: scaled });
        }
        Ok(Square { x, y, z, w, e, residual, cells })
    }

    pub fn dims(&self) -> ModuleDims {
        self.e.dims
    }

    /// Horizontal identity `(e, x, e, x; 0)`.
    pub fn identity_h(x: GL0Element) -> Self {
        let dims = x.dims;
        Square {
            x: GL0Element::identity(dims),
            y: x.clone(),
            z: GL0Element::identity(dims),
            w: x,
            e: GL1Element::zero(dims),
            residual: 0.0,
            cells: 1,
        }
    }

    /// Vertical identity `(x, e, x, e; 0)`.
    pub fn identity_v(x: GL0Element) -> Self {
        let dims = x.dims;
        Square {
            x: x.clone(),
            y: GL0Element::identity(dims),
            z: x,
            w: GL0Element::identity(dims),
            e: GL1Element::zero(dims),
            residual: 0.0,
            cells: 1,
        }
    }

    /// Horizontal inverse `(x^{-1}, w, z^{-1}, y; x^{-1} |> E^{-*})`.
    pub fn inverse_h(&self) -> Result<Square> {
        let xinv = self.x.inv()?;
        let e = act(&xinv, &star_inv(&self.e)?)?;
        Ok(Square {
            x: xinv,
            y: self.w.clone(),
            z: self.z.inv()?,
            w: self.y.clone(),
            e,
            residual: self.residual,
            cells: self.cells,
        })
    }

    /// Vertical inverse `(z, y^{-1}, x, w^{-1}; w^{-1} |> E^{-*})`.
    pub fn inverse_v(&self) -> Result<Square> {
        let winv = self.w.inv()?;
        let e = act(&winv, &star_inv(&self.e)?)?;
        Ok(Square {
            x: self.z.clone(),
            y: self.y.inv()?,
            z: self.x.clone(),
            w: winv,
            e,
            residual: self.residual,
            cells: self.cells,
        })
    }
}

/// Horizontal composition: requires the right edge of `s` to match the left
/// edge of `s2`; the composite interior is `(x |> E') * E`.
pub fn hcompose(s: &Square, s2: &Square, tol: f64) -> Result<Square> {
    let mismatch = s.y.distance(&s2.w);
    let edge_scale = 1.0 + (s.y.f.norm_squared() + s.y.g.norm_squared()).sqrt();
    let scaled = tol * ((s.cells + s2.cells) as f64).sqrt() * edge_scale;
    if mismatch > scaled {
        return Err(Error::EdgeMismatch {
            composition: "horizontal",
            residual: mismatch,
            tol: scaled,
        });
    }
    let e = star_mul(&act(&s.x, &s2.e)?, &s.e)?;
    Square::with_cells(
        s.x.mul(&s2.x),
        s2.y.clone(),
        s.z.mul(&s2.z),
        s.w.clone(),
        e,
        tol,
        s.cells + s2.cells,
    )
}

/// Vertical composition: requires the top edge of `s` to match the bottom
/// edge of `s2`; the composite interior is `E * (w |> E')`.
pub fn vcompose(s: &Square, s2: &Square, tol: f64) -> Result<Square> {
    let mismatch = s.z.distance(&s2.x);
    let edge_scale = 1.0 + (s.z.f.norm_squared() + s.z.g.norm_squared()).sqrt();
    let scaled = tol * ((s.cells + s2.cells) as f64).sqrt() * edge_scale;
    if mismatch > scaled {
        return Err(Error::EdgeMismatch {
            composition: "vertical",
            residual: mismatch,
            tol: scaled,
        });
    }
    let e = star_mul(&s.e, &act(&s.w, &s2.e)?)?;
    Square::with_cells(
        s.x.clone(),
        s.y.mul(&s2.y),
        s2.z.clone(),
        s.w.mul(&s2.w),
        e,
        tol,
        s.cells + s2.cells,
    )
}

/// Generates a random valid square: a random interior produced by the star
/// exponential, with the bottom edge corrected to satisfy the boundary law
/// exactly (up to rounding).
pub fn random_square<R: rand::Rng>(dims: ModuleDims, rng: &mut R, scale: f64) -> Result<Square> {
    use crate::crossed::{random_gl0, random_gl1};
    let e = random_gl1(dims, rng, scale);
    let y = random_gl0(dims, rng, scale);
    let z = random_gl0(dims, rng, scale);
    let w = random_gl0(dims, rng, scale);
    // delta(E) = x y z^{-1} w^{-1}  =>  x = delta(E) w z y^{-1}.
    let x = delta(&e)?.mul(&w).mul(&z).mul(&y.inv()?);
    let x = GL0Element::project(dims, x.f, x.g)?;
    Square::new(x, y, z, w, e, SQUARE_TOL)
}
