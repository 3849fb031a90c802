//! Exact matrix surface development of linear cells, basic squares and whole
//! piecewise-linear grids via double-group composition.
//!
//! A linear cell develops by solving the interior block of the development
//! equation with matrix exponentials (the inner integral is one augmented
//! exponential) plus a one-dimensional quadrature. A triangulated cell is
//! the horizontal composite of two half-squares, each solved the same way.
//! Grids develop cell by cell in the cell's translated frame; the global
//! conjugations happen inside the double-group compositions.

use nalgebra::{DMatrix, DVector};

use crate::connection::Matrix2Connection;
use crate::crossed::{star_mul, GL0Element, GL1Element, ModuleDims};
use crate::double::{hcompose, vcompose, Square, SQUARE_TOL};
use crate::error::{Error, Result};
use crate::grid::GridSurface;
use crate::matrix::{expm, integrate_matrix, DenseMatrix};
use crate::path::develop_pl_pair;

/// Quadrature settings for the interior block integral.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Stop refining when two successive composite estimates differ by less
    /// than this in Frobenius norm.
    pub tol: f64,
    /// Hard cap on the panel count.
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            tol: 1e-10,
            max_panels: 1 << 14,
        }
    }
}

/// Triangulation orientation of a cell. The default follows the convention
/// that cells are split along the main diagonal (lower-left to upper-right);
/// mirrored cells (e.g. the reflected half of a fold) split along the
/// anti-diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellOrientation {
    #[default]
    MainDiagonal,
    AntiDiagonal,
}

#[derive(Debug, Clone)]
pub struct CellDevelopment {
    pub square: Square,
    pub residual: f64,
}

struct EdgeData {
    alpha: DenseMatrix,
    beta: DenseMatrix,
    exp_alpha: DenseMatrix,
    exp_beta: DenseMatrix,
}

fn edge_data(conn: &Matrix2Connection, v: &[f64]) -> Result<EdgeData> {
    let alpha = conn.alpha_of(v)?;
    let beta = conn.beta_of(v)?;
    Ok(EdgeData {
        exp_alpha: expm(&alpha)?,
        exp_beta: expm(&beta)?,
        alpha,
        beta,
    })
}

fn blocks_of_h(dims: ModuleDims, r: &DenseMatrix, s: &DenseMatrix, t: &DenseMatrix, u: &DenseMatrix) -> DenseMatrix {
    let (n, m, p) = (dims.n, dims.m, dims.p);
    let mut h = DenseMatrix::zeros(n + m, n + p);
    h.view_mut((0, 0), (n, n)).copy_from(r);
    h.view_mut((0, n), (n, p)).copy_from(s);
    h.view_mut((n, 0), (m, n)).copy_from(t);
    h.view_mut((n, n), (m, p)).copy_from(u);
    h
}

/// Solves the interior equation `dU/dt = Q4_t + B_t Q2_t` on [0, 1] given
/// closures producing the vector field `Q_t` and the bottom-left boundary
/// block `B_t`, and assembles the interior element from the boundary
/// developments at t = 1.
fn solve_interior<FQ, FB>(
    dims: ModuleDims,
    q_at: FQ,
    b_at: FB,
    f1: &DenseMatrix,
    g1: &DenseMatrix,
    opts: QuadratureOptions,
) -> Result<GL1Element>
where
    FQ: Fn(f64) -> Result<DenseMatrix>,
    FB: Fn(f64) -> Result<DenseMatrix>,
{
    let (n, m, p) = (dims.n, dims.m, dims.p);
    let integrand = |t: f64| -> Result<DenseMatrix> {
        let q = q_at(t)?;
        let q2 = q.view((0, n), (n, p)).into_owned();
        let q4 = q.view((n, n), (m, p)).into_owned();
        Ok(q4 + b_at(t)? * q2)
    };
    let (u, _, _) = integrate_matrix(integrand, 0.0, 1.0, opts.tol, opts.max_panels)?;
    let r = f1.view((0, 0), (n, n)).into_owned() - DMatrix::identity(n, n);
    let t_blk = f1.view((n, 0), (m, n)).into_owned();
    let s_blk = g1.view((0, n), (n, p)).into_owned();
    GL1Element::new(dims, blocks_of_h(dims, &r, &s_blk, &t_blk, &u))
}

/// Development of the linear surface `X_{s,t} = a s + b t` over the unit
/// square. The edge blocks are read off the boundary developments; the
/// interior block comes from quadrature of the exponential vector field.
pub fn develop_linear_square(
    conn: &Matrix2Connection,
    a: &DVector<f64>,
    b: &DVector<f64>,
    opts: QuadratureOptions,
) -> Result<GL1Element> {
    if a.len() != conn.d || b.len() != conn.d {
        return Err(Error::ShapeMismatch {
            expected: format!("vectors of length {}", conn.d),
            got: format!("{} and {}", a.len(), b.len()),
        });
    }
    let dims = conn.dims;
    let ea = edge_data(conn, a.as_slice())?;
    let eb = edge_data(conn, b.as_slice())?;
    let gamma_ab = conn.eval_gamma(a.as_slice(), b.as_slice())?.z;

    // J = int_0^1 exp(s alpha_a) gamma_ab exp(-s beta_a) ds.
    let j = crate::matrix::integral_via_expm(&ea.alpha, &gamma_ab, &ea.beta, 1.0)?;

    let exp_alpha_a_inv = expm(&(-&ea.alpha))?;
    let exp_beta_a_inv = expm(&(-&ea.beta))?;
    let f1 = &ea.exp_alpha * expm(&eb.alpha)? * &exp_alpha_a_inv * expm(&(-&eb.alpha))?;
    let g1 = &ea.exp_beta * expm(&eb.beta)? * &exp_beta_a_inv * expm(&(-&eb.beta))?;

    let (n, m) = (dims.n, dims.m);
    let q_at = |t: f64| -> Result<DenseMatrix> {
        Ok(expm(&(&eb.alpha * t))? * &j * expm(&(&eb.beta * -t))?)
    };
    let b_at = |t: f64| -> Result<DenseMatrix> {
        let f_t = &ea.exp_alpha * expm(&(&eb.alpha * t))? * &exp_alpha_a_inv * expm(&(&eb.alpha * -t))?;
        Ok(f_t.view((n, 0), (m, n)).into_owned())
    };
    solve_interior(dims, q_at, b_at, &f1, &g1, opts)
}

/// Development of one triangulated cell with corner values `0`, `a`
/// (bottom-right), `b` (top-left) and `b + c` (top-right), split along the
/// main diagonal. Decomposes into two half-squares composed horizontally;
/// the first has a trivial bottom boundary, so the composite interior is
/// `H(Y) * H(X)`.
pub fn develop_basic_square(
    conn: &Matrix2Connection,
    a: &DVector<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    opts: QuadratureOptions,
) -> Result<GL1Element> {
    if a.len() != conn.d || b.len() != conn.d || c.len() != conn.d {
        return Err(Error::ShapeMismatch {
            expected: format!("vectors of length {}", conn.d),
            got: format!("{}, {} and {}", a.len(), b.len(), c.len()),
        });
    }
    let dims = conn.dims;
    let (n, m) = (dims.n, dims.m);
    let bc = b + c;
    let bprime = &bc - a;

    let ea = edge_data(conn, a.as_slice())?;
    let eb = edge_data(conn, b.as_slice())?;
    let ec = edge_data(conn, c.as_slice())?;
    let ebc = edge_data(conn, bc.as_slice())?;

    // Half-square X: linear with derivative pair (c, b) above the diagonal,
    // horizontally constant below it.
    let h_x = {
        let gamma_cb = conn.eval_gamma(c.as_slice(), b.as_slice())?.z;
        let q_at = |t: f64| -> Result<DenseMatrix> {
            let j_t = crate::matrix::integral_via_expm(&ec.alpha, &gamma_cb, &ec.beta, t)?;
            Ok(expm(&(&eb.alpha * t))? * j_t * expm(&(&eb.beta * -t))?)
        };
        let b_at = |t: f64| -> Result<DenseMatrix> {
            let f_t =
                expm(&(&ebc.alpha * t))? * expm(&(&ec.alpha * -t))? * expm(&(&eb.alpha * -t))?;
            Ok(f_t.view((n, 0), (m, n)).into_owned())
        };
        let f1 = &ebc.exp_alpha * expm(&(-&ec.alpha))? * expm(&(-&eb.alpha))?;
        let g1 = &ebc.exp_beta * expm(&(-&ec.beta))? * expm(&(-&eb.beta))?;
        solve_interior(dims, q_at, b_at, &f1, &g1, opts)?
    };

    // Half-square Y: linear with derivative pair (a, b') below the diagonal,
    // horizontally constant above it; its left edge runs along the diagonal.
    let h_y = {
        let ebp = edge_data(conn, bprime.as_slice())?;
        let gamma_abp = conn.eval_gamma(a.as_slice(), bprime.as_slice())?.z;
        let f1 = &ea.exp_alpha * expm(&ebp.alpha)? * expm(&(-&ebc.alpha))?;
        let g1 = &ea.exp_beta * expm(&ebp.beta)? * expm(&(-&ebc.beta))?;
        let q_at = |t: f64| -> Result<DenseMatrix> {
            let j_u = crate::matrix::integral_via_expm(&ea.alpha, &gamma_abp, &ea.beta, 1.0 - t)?;
            Ok(expm(&(&ebc.alpha * t))? * j_u * expm(&(&ebc.beta * -t))?)
        };
        let b_at = |t: f64| -> Result<DenseMatrix> {
            let f_t = &ea.exp_alpha
                * expm(&(&ebp.alpha * t))?
                * expm(&(&ea.alpha * (t - 1.0)))?
                * expm(&(&ebc.alpha * -t))?;
            Ok(f_t.view((n, 0), (m, n)).into_owned())
        };
        solve_interior(dims, q_at, b_at, &f1, &g1, opts)?
    };

    star_mul(&h_y, &h_x)
}

/// Develops one grid cell in its translated frame and wraps it in a
/// validated square whose edges are the segment developments of the cell
/// boundary.
pub fn develop_cell(
    conn: &Matrix2Connection,
    p00: &DVector<f64>,
    p10: &DVector<f64>,
    p01: &DVector<f64>,
    p11: &DVector<f64>,
    orientation: CellOrientation,
    opts: QuadratureOptions,
    tol: f64,
) -> Result<Square> {
    match orientation {
        CellOrientation::MainDiagonal => {
            let a = p10 - p00;
            let b = p01 - p00;
            let c = p11 - p01;
            let e = develop_basic_square(conn, &a, &b, &c, opts)?;
            let seg = |v: &DVector<f64>| -> Result<GL0Element> {
                GL0Element::project(
                    conn.dims,
                    expm(&conn.alpha_of(v.as_slice())?)?,
                    expm(&conn.beta_of(v.as_slice())?)?,
                )
            };
            Square::new(
                seg(&a)?,
                seg(&(p11 - p10))?,
                seg(&c)?,
                seg(&b)?,
                e,
                tol,
            )
        }
        CellOrientation::AntiDiagonal => {
            // An anti-diagonal cell is the s-reflection of the main-diagonal
            // cell on the mirrored corners, so its square is the horizontal
            // inverse of that development.
            develop_cell(
                conn,
                p10,
                p00,
                p11,
                p01,
                CellOrientation::MainDiagonal,
                opts,
                tol,
            )?
            .inverse_h()
        }
    }
}

/// Options for grid development.
#[derive(Clone)]
pub struct GridDevelopOptions {
    pub quadrature: QuadratureOptions,
    /// Per-cell boundary-law tolerance; composite validations scale it by
    /// sqrt(cells).
    pub tol: f64,
    /// Compose cells rows-first (bottom row left-to-right, then stack rows)
    /// or columns-first. Both agree within tolerance by the interchange law.
    pub columns_first: bool,
    /// Triangulation orientation per cell, indexed by (cell_i, cell_j).
    pub orientation: std::sync::Arc<dyn Fn(usize, usize) -> CellOrientation + Send + Sync>,
}

impl Default for GridDevelopOptions {
    fn default() -> Self {
        GridDevelopOptions {
            quadrature: QuadratureOptions::default(),
            tol: SQUARE_TOL,
            columns_first: false,
            orientation: std::sync::Arc::new(|_, _| CellOrientation::MainDiagonal),
        }
    }
}

/// Develops a whole grid: every cell is developed in its own frame, rows are
/// composed horizontally and the rows vertically (or transposed order when
/// `columns_first` is set). Returns the full-surface square together with
/// its accumulated boundary residual.
pub fn develop_grid(
    conn: &Matrix2Connection,
    grid: &GridSurface,
    opts: &GridDevelopOptions,
) -> Result<CellDevelopment> {
    if grid.dim() != conn.d {
        return Err(Error::ShapeMismatch {
            expected: format!("grid dimension {}", conn.d),
            got: format!("{}", grid.dim()),
        });
    }
    let n_cells = grid.ns() - 1;
    let m_cells = grid.nt() - 1;
    if n_cells == 0 || m_cells == 0 {
        return Err(Error::InvalidArgument("grid needs at least one cell".into()));
    }

    let cell = |i: usize, j: usize| -> Result<Square> {
        develop_cell(
            conn,
            grid.value(i, j),
            grid.value(i + 1, j),
            grid.value(i, j + 1),
            grid.value(i + 1, j + 1),
            (opts.orientation)(i, j),
            opts.quadrature,
            opts.tol,
        )
    };

    let square = if !opts.columns_first {
        let mut rows: Option<Square> = None;
        for j in 0..m_cells {
            let mut row: Option<Square> = None;
            for i in 0..n_cells {
                let s = cell(i, j)?;
                row = Some(match row {
                    None => s,
                    Some(acc) => hcompose(&acc, &s, opts.tol)?,
                });
            }
            let row = row.expect("at least one cell per row");
            rows = Some(match rows {
                None => row,
                Some(acc) => vcompose(&acc, &row, opts.tol)?,
            });
        }
        rows.expect("at least one row")
    } else {
        let mut cols: Option<Square> = None;
        for i in 0..n_cells {
            let mut col: Option<Square> = None;
            for j in 0..m_cells {
                let s = cell(i, j)?;
                col = Some(match col {
                    None => s,
                    Some(acc) => vcompose(&acc, &s, opts.tol)?,
                });
            }
            let col = col.expect("at least one cell per column");
            cols = Some(match cols {
                None => col,
                Some(acc) => hcompose(&acc, &col, opts.tol)?,
            });
        }
        cols.expect("at least one column")
    };

    let residual = square.residual;
    Ok(CellDevelopment { square, residual })
}

/// Stokes residual of a development: distance between the boundary of the
/// interior element and the development of the grid's boundary loop.
pub fn stokes_residual(
    conn: &Matrix2Connection,
    grid: &GridSurface,
    dev: &CellDevelopment,
) -> Result<f64> {
    let boundary = develop_pl_pair(conn, &grid.boundary_loop()?)?;
    Ok(crate::crossed::delta(&dev.square.e)?.distance(&boundary))
}

// ---------------------------------------------------------------------------
// Closed form for linear squares under the flat-A restriction
// ---------------------------------------------------------------------------

/// Whether the connection satisfies the flat-A restriction `[A^i, A^j] = 0`
/// required by the closed-form route.
pub fn has_flat_a(conn: &Matrix2Connection) -> bool {
    conn.r_blocks.iter().all(|r| r.norm() <= 1e-12)
}

/// Closed-form development of a linear square for connections with
/// commuting A blocks: the Magnus expansion of the interior equation
/// terminates after two terms, and each term is a block of an augmented
/// matrix exponential.
pub fn develop_linear_square_magnus(
    conn: &Matrix2Connection,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<GL1Element> {
    if !has_flat_a(conn) {
        return Err(Error::InvalidArgument(
            "closed-form route requires commuting A blocks".into(),
        ));
    }
    let dims = conn.dims;
    let (r1, r0) = (dims.rows1(), dims.rows0());
    let alpha_a = conn.alpha_of(a.as_slice())?;
    let beta_a = conn.beta_of(a.as_slice())?;
    let alpha_b = conn.alpha_of(b.as_slice())?;
    let beta_b = conn.beta_of(b.as_slice())?;
    let gamma_ab = conn.eval_gamma(a.as_slice(), b.as_slice())?.z;
    let phi = dims.phi();

    // J = int_0^1 exp(s alpha_a) gamma exp(-s beta_a) ds.
    let j = crate::matrix::integral_via_expm(&alpha_a, &gamma_ab, &beta_a, 1.0)?;
    // I1 = int_0^1 Q_t dt via one augmented exponential.
    let i1 = crate::matrix::integral_via_expm(&alpha_b, &j, &beta_b, 1.0)?;

    // Second Magnus term: int_{t1 < t2} [Q_{t1}, Q_{t2}]_* = K1 - K2, where
    // each side is a corner block of a three-by-three augmented exponential.
    let jphi = &j * &phi;
    let k2 = {
        let mut aug = DMatrix::zeros(2 * r1 + r0, 2 * r1 + r0);
        aug.view_mut((0, 0), (r1, r1)).copy_from(&(-&alpha_b));
        aug.view_mut((0, r1), (r1, r1)).copy_from(&jphi);
        aug.view_mut((r1, r1), (r1, r1)).copy_from(&(-&alpha_b));
        aug.view_mut((r1, 2 * r1), (r1, r0)).copy_from(&j);
        aug.view_mut((2 * r1, 2 * r1), (r0, r0)).copy_from(&(-&beta_b));
        let e = expm(&aug)?;
        expm(&alpha_b)? * e.view((0, 2 * r1), (r1, r0)).into_owned()
    };
    let phij = &phi * &j;
    let k1 = {
        let mut aug = DMatrix::zeros(2 * r0 + r1, 2 * r0 + r1);
        aug.view_mut((0, 0), (r0, r0)).copy_from(&beta_b);
        aug.view_mut((r0, 0), (r0, r0)).copy_from(&phij);
        aug.view_mut((r0, r0), (r0, r0)).copy_from(&beta_b);
        aug.view_mut((2 * r0, r0), (r1, r0)).copy_from(&j);
        aug.view_mut((2 * r0, 2 * r0), (r1, r1)).copy_from(&alpha_b);
        let e = expm(&aug)?;
        e.view((2 * r0, 0), (r1, r0)).into_owned() * expm(&(-&beta_b))?
    };

    // exp_* of the terminated Magnus series: the only surviving higher term
    // is the reduced square of I1, entering with the series factor 1/2.
    let commutator_term = (k1 - k2) * 0.5;
    let z = &i1 + &commutator_term + &i1 * &phi * &i1 * 0.5;
    GL1Element::new(dims, z)
}
