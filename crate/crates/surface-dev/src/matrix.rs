//! Dense real-matrix primitives used by every other module: the matrix
//! exponential, exponential-based integrals, Frobenius pairings and block
//! assembly/extraction helpers.
//!
//! All numerics are in f64. Values are immutable after construction and all
//! functions here are pure, so concurrent use is safe.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Padé coefficients for the [7/7] diagonal approximant of exp.
/// c_0 = 1, c_{k+1} = c_k (m-k) / ((2m-k)(k+1)) with m = 7.
const PADE7: [f64; 8] = [
    1.0,
    0.5,
    0.11538461538461539,
    0.016025641025641025,
    1.4568764568764568e-3,
    8.741258741258742e-5,
    3.237503237503238e-6,
    5.781255781255781e-8,
];

fn check_finite(m: &DenseMatrix) -> Result<()> {
    for (idx, v) in m.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: idx % m.nrows(),
                col: idx / m.nrows(),
            });
        }
    }
    Ok(())
}

/// Matrix 1-norm (maximum absolute column sum).
fn norm1(m: &DenseMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling-and-squaring with a [7/7] Padé approximant.
/// The input is scaled until its 1-norm is at most 0.5 before the rational
/// approximation is applied.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    check_finite(m)?;

    let nrm = norm1(m);
    let squarings = if nrm <= 0.5 {
        0
    } else {
        (nrm / 0.5).log2().ceil() as u32
    };
    let a = m / 2f64.powi(squarings as i32);

    // p(A) = sum c_k A^k, q(A) = p(-A); exp(A) ~ q(A)^{-1} p(A).
    let eye = DenseMatrix::identity(n, n);
    let mut term = eye.clone();
    let mut p = eye.clone();
    let mut q = eye.clone();
    for (k, &c) in PADE7.iter().enumerate().skip(1) {
        term = &term * &a;
        p += &term * c;
        if k % 2 == 0 {
            q += &term * c;
        } else {
            q -= &term * c;
        }
    }
    let lu = q.lu();
    let mut e = lu.solve(&p).ok_or_else(|| Error::Singular {
        context: "expm Pade denominator".into(),
        det: 0.0,
    })?;
    for _ in 0..squarings {
        e = &e * &e;
    }
    Ok(e)
}

/// Computes `int_0^s exp(rA) C exp(-rB) dr` as a block of one augmented
/// matrix exponential: the (1,2) block of `exp([[-A, C], [0, -B]] s)` equals
/// `exp(-sA)` times the integral.
pub fn integral_via_expm(
    a: &DenseMatrix,
    c: &DenseMatrix,
    b: &DenseMatrix,
    s: f64,
) -> Result<DenseMatrix> {
    let n = a.nrows();
    let m = b.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if b.ncols() != m {
        return Err(Error::NotSquare { rows: b.nrows(), cols: b.ncols() });
    }
    if c.nrows() != n || c.ncols() != m {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{m}"),
            got: format!("{}x{}", c.nrows(), c.ncols()),
        });
    }
    let mut aug = DenseMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-a * s));
    aug.view_mut((0, n), (n, m)).copy_from(&(c * s));
    aug.view_mut((n, n), (m, m)).copy_from(&(-b * s));
    let e = expm(&aug)?;
    let block = e.view((0, n), (n, m)).into_owned();
    Ok(expm(&(a * s))? * block)
}

/// Returns `(phi1(R), phi2(R))` where `phi1(R) = sum_{k>=1} R^{k-1}/k!` and
/// `phi2(R) = sum_{k>=2} R^{k-2}/k!`, computed exactly as blocks of one
/// exponential of a nilpotent bordering of R.
pub fn phi1_phi2(r: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(Error::NotSquare { rows: r.nrows(), cols: r.ncols() });
    }
    if n == 0 {
        return Ok((DenseMatrix::zeros(0, 0), DenseMatrix::zeros(0, 0)));
    }
    let mut aug = DenseMatrix::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(r);
    aug.view_mut((0, n), (n, n))
        .copy_from(&DenseMatrix::identity(n, n));
    aug.view_mut((n, 2 * n), (n, n))
        .copy_from(&DenseMatrix::identity(n, n));
    let e = expm(&aug)?;
    Ok((
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    ))
}

/// Frobenius inner product `sum_ij M1_ij M2_ij`.
pub fn frobenius_inner(m1: &DenseMatrix, m2: &DenseMatrix) -> Result<f64> {
    if m1.shape() != m2.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", m1.nrows(), m1.ncols()),
            got: format!("{}x{}", m2.nrows(), m2.ncols()),
        });
    }
    Ok(m1.iter().zip(m2.iter()).map(|(x, y)| x * y).sum())
}

/// Solves `M x = rhs` by partially pivoted LU and reports the determinant so
/// inverse-dependent callers can monitor conditioning.
pub fn solve_lu(m: &DenseMatrix, rhs: &DenseMatrix, context: &str) -> Result<(DenseMatrix, f64)> {
    let lu = m.clone().lu();
    let det = lu.determinant();
    match lu.solve(rhs) {
        Some(x) if det.is_finite() && det != 0.0 => Ok((x, det)),
        _ => Err(Error::Singular {
            context: context.to_string(),
            det,
        }),
    }
}

pub fn inverse(m: &DenseMatrix, context: &str) -> Result<DenseMatrix> {
    let n = m.nrows();
    solve_lu(m, &DenseMatrix::identity(n, n), context).map(|(x, _)| x)
}

/// 8-point Gauss-Legendre nodes on [-1, 1] (positive half) and weights.
const GL8_NODES: [f64; 4] = [
    0.18343464249564980,
    0.52553240991632899,
    0.79666647741362674,
    0.96028985649753623,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.36268378337836198,
    0.31370664587788729,
    0.22238103445337447,
    0.10122853629037626,
];

/// Composite 8-point Gauss-Legendre quadrature of a matrix-valued function
/// over [lo, hi], doubling the panel count until two successive estimates
/// differ by less than `tol` in Frobenius norm, up to `max_panels`.
///
/// Returns `(integral, last_refinement_change, panels)`.
pub fn integrate_matrix<F>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_panels: usize,
) -> Result<(DenseMatrix, f64, usize)>
where
    F: Fn(f64) -> Result<DenseMatrix>,
{
    let eval_panels = |panels: usize| -> Result<DenseMatrix> {
        let width = (hi - lo) / panels as f64;
        let mut acc: Option<DenseMatrix> = None;
        for p in 0..panels {
            let a = lo + p as f64 * width;
            let mid = a + 0.5 * width;
            let half = 0.5 * width;
            for k in 0..4 {
                for sign in [-1.0, 1.0] {
                    let t = mid + sign * half * GL8_NODES[k];
                    let v = f(t)? * (GL8_WEIGHTS[k] * half);
                    acc = Some(match acc {
                        None => v,
                        Some(s) => s + v,
                    });
                }
            }
        }
        Ok(acc.expect("at least one panel"))
    };

    let mut panels = 1;
    let mut current = eval_panels(panels)?;
    loop {
        let next = eval_panels(panels * 2)?;
        let change = (&next - &current).norm();
        if change < tol {
            return Ok((next, change, panels * 2));
        }
        if panels * 2 >= max_panels {
            return Err(Error::QuadratureNonConvergence {
                panels: panels * 2,
                achieved: change,
                tol,
            });
        }
        current = next;
        panels *= 2;
    }
}
