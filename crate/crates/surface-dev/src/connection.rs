//! Construction, validation, sampling and combination of matrix
//! 2-connections.
//!
//! A connection is the triple (alpha, beta, gamma) of block matrices per
//! coordinate. The free data is (A, B, C, D, E, U); the gamma blocks R, S, T
//! are always derived from the 1-connection, so semiflatness can only fail
//! through the C/E commutator constraints, which are checked at build time.
//!
//! For parametrized surfaces the two parameter coordinates occupy the first
//! two slots (s, t, x_1, ..., x_d); they are ordinary coordinates of
//! R^{d+2} and nothing downstream special-cases them.


use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::crossed::{Gl1Element, ModuleDims};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const COMMUTATOR_TOL: f64 = 1e-10;

/// Index of the pair (i, j), i < j, in lexicographic order among all pairs
/// drawn from `0..d`.
pub fn pair_index(i: usize, j: usize, d: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

pub fn pair_count(d: usize) -> usize {
    d * (d - 1) / 2
}

#[derive(Debug, Clone)]
pub struct Matrix2Connection {
    pub dims: ModuleDims,
    /// Ambient dimension (number of coordinates).
    pub d: usize,
    pub a_blocks: Vec<DenseMatrix>,
    pub b_blocks: Vec<DenseMatrix>,
    pub c_blocks: Vec<DenseMatrix>,
    pub d_blocks: Vec<DenseMatrix>,
    pub e_blocks: Vec<DenseMatrix>,
    /// Free interior blocks, one per coordinate pair i < j.
    pub u_blocks: Vec<DenseMatrix>,
    /// Derived blocks, one per coordinate pair i < j.
    pub r_blocks: Vec<DenseMatrix>,
    pub s_blocks: Vec<DenseMatrix>,
    pub t_blocks: Vec<DenseMatrix>,
}

fn comm(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a * b - b * a
}

impl Matrix2Connection {
    /// Builds a semiflat connection from its free blocks. The derived gamma
    /// blocks are computed here and the commutator constraints on the C and
    /// E blocks are validated.
    #[allow(clippy::too_many_arguments)]
    pub fn build_semiflat(
        dims: ModuleDims,
        d: usize,
        a_blocks: Vec<DenseMatrix>,
        b_blocks: Vec<DenseMatrix>,
        c_blocks: Vec<DenseMatrix>,
        d_blocks: Vec<DenseMatrix>,
        e_blocks: Vec<DenseMatrix>,
        u_blocks: Vec<DenseMatrix>,
    ) -> Result<Self> {
        let (n, m, p) = (dims.n, dims.m, dims.p);
        let expect = |v: &Vec<DenseMatrix>, rows: usize, cols: usize, count: usize, name: &str| {
            if v.len() != count {
                return Err(Error::ShapeMismatch {
                    expected: format!("{count} {name} blocks"),
                    got: format!("{}", v.len()),
                });
            }
            for blk in v {
                if blk.shape() != (rows, cols) {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{name} {rows}x{cols}"),
                        got: format!("{}x{}", blk.nrows(), blk.ncols()),
                    });
                }
            }
            Ok(())
        };
        expect(&a_blocks, n, n, d, "A")?;
        expect(&b_blocks, m, n, d, "B")?;
        expect(&c_blocks, m, m, d, "C")?;
        expect(&d_blocks, n, p, d, "D")?;
        expect(&e_blocks, p, p, d, "E")?;
        expect(&u_blocks, m, p, pair_count(d), "U")?;

        let mut r_blocks = Vec::with_capacity(pair_count(d));
        let mut s_blocks = Vec::with_capacity(pair_count(d));
        let mut t_blocks = Vec::with_capacity(pair_count(d));
        for i in 0..d {
            for j in (i + 1)..d {
                let rc = comm(&c_blocks[i], &c_blocks[j]).norm();
                if rc > COMMUTATOR_TOL {
                    return Err(Error::CommutatorViolation { i, j, residual: rc });
                }
                let re = comm(&e_blocks[i], &e_blocks[j]).norm();
                if re > COMMUTATOR_TOL {
                    return Err(Error::CommutatorViolation { i, j, residual: re });
                }
                r_blocks.push(comm(&a_blocks[i], &a_blocks[j]));
                s_blocks.push(
                    &a_blocks[i] * &d_blocks[j] - &a_blocks[j] * &d_blocks[i]
                        + &d_blocks[i] * &e_blocks[j]
                        - &d_blocks[j] * &e_blocks[i],
                );
                t_blocks.push(
                    &b_blocks[i] * &a_blocks[j] - &b_blocks[j] * &a_blocks[i]
                        + &c_blocks[i] * &b_blocks[j]
                        - &c_blocks[j] * &b_blocks[i],
                );
            }
        }
        Ok(Matrix2Connection {
            dims,
            d,
            a_blocks,
            b_blocks,
            c_blocks,
            d_blocks,
            e_blocks,
            u_blocks,
            r_blocks,
            s_blocks,
            t_blocks,
        })
    }

    pub fn zero(dims: ModuleDims, d: usize) -> Self {
        let (n, m, p) = (dims.n, dims.m, dims.p);
        Matrix2Connection::build_semiflat(
            dims,
            d,
            vec![DenseMatrix::zeros(n, n); d],
            vec![DenseMatrix::zeros(m, n); d],
            vec![DenseMatrix::zeros(m, m); d],
            vec![DenseMatrix::zeros(n, p); d],
            vec![DenseMatrix::zeros(p, p); d],
            vec![DenseMatrix::zeros(m, p); pair_count(d)],
        )
        .expect("zero connection is always valid")
    }

    /// Assembled edge-algebra component `alpha^i = [[A, 0], [B, C]]`.
    pub fn alpha(&self, i: usize) -> DenseMatrix {
        let (n, m) = (self.dims.n, self.dims.m);
        let mut out = DenseMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.a_blocks[i]);
        out.view_mut((n, 0), (m, n)).copy_from(&self.b_blocks[i]);
        out.view_mut((n, n), (m, m)).copy_from(&self.c_blocks[i]);
        out
    }

    /// Assembled edge-algebra component `beta^i = [[A, D], [0, E]]`.
    pub fn beta(&self, i: usize) -> DenseMatrix {
        let (n, p) = (self.dims.n, self.dims.p);
        let mut out = DenseMatrix::zeros(n + p, n + p);
        out.view_mut((0, 0), (n, n)).copy_from(&self.a_blocks[i]);
        out.view_mut((0, n), (n, p)).copy_from(&self.d_blocks[i]);
        out.view_mut((n, n), (p, p)).copy_from(&self.e_blocks[i]);
        out
    }

    /// Assembled interior component `gamma^{ij} = [[R, S], [T, U]]`, i < j.
    pub fn gamma(&self, i: usize, j: usize) -> DenseMatrix {
        let (n, m, p) = (self.dims.n, self.dims.m, self.dims.p);
        let k = pair_index(i, j, self.d);
        let mut out = DenseMatrix::zeros(n + m, n + p);
        out.view_mut((0, 0), (n, n)).copy_from(&self.r_blocks[k]);
        out.view_mut((0, n), (n, p)).copy_from(&self.s_blocks[k]);
        out.view_mut((n, 0), (m, n)).copy_from(&self.t_blocks[k]);
        out.view_mut((n, n), (m, p)).copy_from(&self.u_blocks[k]);
        out
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.d),
                got: format!("{}", v.len()),
            });
        }
        Ok(())
    }

    /// `alpha(v) = sum_i alpha^i v^i`.
    pub fn alpha_of(&self, v: &[f64]) -> Result<DenseMatrix> {
        self.check_vector(v)?;
        let r = self.dims.rows1();
        let mut out = DenseMatrix::zeros(r, r);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                out += self.alpha(i) * vi;
            }
        }
        Ok(out)
    }

    /// `beta(v) = sum_i beta^i v^i`.
    pub fn beta_of(&self, v: &[f64]) -> Result<DenseMatrix> {
        self.check_vector(v)?;
        let r = self.dims.rows0();
        let mut out = DenseMatrix::zeros(r, r);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                out += self.beta(i) * vi;
            }
        }
        Ok(out)
    }

    /// Antisymmetric bilinear evaluation
    /// `gamma(u, v) = sum_{i<j} gamma^{ij} (u^i v^j - u^j v^i)`.
    pub fn eval_gamma(&self, u: &[f64], v: &[f64]) -> Result<Gl1Element> {
        self.check_vector(u)?;
        self.check_vector(v)?;
        let mut out = DenseMatrix::zeros(self.dims.rows1(), self.dims.rows0());
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                let coef = u[i] * v[j] - u[j] * v[i];
                if coef != 0.0 {
                    out += self.gamma(i, j) * coef;
                }
            }
        }
        Gl1Element::new(self.dims, out)
    }

    /// Squared Frobenius norm: sum of squared alpha, beta and gamma
    /// component norms (the shared A block is counted once in alpha and once
    /// in beta).
    pub fn frobenius_norm_squared(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.d {
            total += self.alpha(i).norm_squared() + self.beta(i).norm_squared();
        }
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                total += self.gamma(i, j).norm_squared();
            }
        }
        total
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_squared().sqrt()
    }

    /// Rescales the free blocks in place until the connection norm is at
    /// most `target`. The derived blocks shrink quadratically, so a couple
    /// of passes suffice.
    pub fn rescale_to_norm(mut self, target: f64) -> Self {
        for _ in 0..8 {
            let norm = self.frobenius_norm();
            if norm <= target || norm == 0.0 {
                break;
            }
            let factor = target / norm;
            for blocks in [
                &mut self.a_blocks,
                &mut self.b_blocks,
                &mut self.c_blocks,
                &mut self.d_blocks,
                &mut self.e_blocks,
                &mut self.u_blocks,
            ] {
                for blk in blocks.iter_mut() {
                    *blk *= factor;
                }
            }
            self = Matrix2Connection::build_semiflat(
                self.dims,
                self.d,
                self.a_blocks,
                self.b_blocks,
                self.c_blocks,
                self.d_blocks,
                self.e_blocks,
                self.u_blocks,
            )
            .expect("rescaling preserves the commutator constraints");
        }
        self
    }
}

/// Frobenius distance between two connections of equal dims and ambient
/// dimension, over the alpha, beta and gamma components.
pub fn frobenius_distance(w1: &Matrix2Connection, w2: &Matrix2Connection) -> Result<f64> {
    if w1.dims != w2.dims || w1.d != w2.d {
        return Err(Error::ShapeMismatch {
            expected: format!("dims {:?}, d {}", w1.dims, w1.d),
            got: format!("dims {:?}, d {}", w2.dims, w2.d),
        });
    }
    let mut total = 0.0;
    for i in 0..w1.d {
        total += (w1.alpha(i) - w2.alpha(i)).norm_squared();
        total += (w1.beta(i) - w2.beta(i)).norm_squared();
        for j in (i + 1)..w1.d {
            total += (w1.gamma(i, j) - w2.gamma(i, j)).norm_squared();
        }
    }
    Ok(total.sqrt())
}

/// Samples a restricted connection of dims (n, n, n) on R^{d+2} (the two
/// parameter slots plus d state coordinates). The restricted linear space
/// keeps only `C` for the first parameter coordinate and `E` for the second;
/// every other C and E block is exactly zero, so the commutator constraints
/// hold identically. All free blocks carry independent standard normal
/// entries.
pub fn sample_restricted<R: Rng>(n: usize, d_ambient: usize, rng: &mut R) -> Matrix2Connection {
    sample_restricted_scaled(n, d_ambient, 1.0, rng)
}

/// Restricted sampling with a configurable per-entry standard deviation.
/// `1/sqrt(2n)` keeps the spectral norm of the blocks level-independent,
/// which tames the exponential growth of developments at deeper levels.
pub fn sample_restricted_scaled<R: Rng>(
    n: usize,
    d_ambient: usize,
    entry_std: f64,
    rng: &mut R,
) -> Matrix2Connection {
    let dims = ModuleDims::new(n, n, n);
    let d = d_ambient + 2;
    let gauss = |rng: &mut R| {
        DenseMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * entry_std)
    };
    let a: Vec<_> = (0..d).map(|_| gauss(rng)).collect();
    let b: Vec<_> = (0..d).map(|_| gauss(rng)).collect();
    let mut c = vec![DenseMatrix::zeros(n, n); d];
    c[0] = gauss(rng);
    let dd: Vec<_> = (0..d).map(|_| gauss(rng)).collect();
    let mut e = vec![DenseMatrix::zeros(n, n); d];
    e[1] = gauss(rng);
    let u: Vec<_> = (0..pair_count(d)).map(|_| gauss(rng)).collect();
    Matrix2Connection::build_semiflat(dims, d, a, b, c, dd, e, u)
        .expect("restricted connections satisfy the commutator constraints")
}

/// Connection whose interior form is the curvature of its edge form:
/// dims (n, 0, 0), beta = alpha and gamma^{ij} = [A^i, A^j]. Its surface
/// development reduces to the boundary path development.
pub fn trivial_curvature_connection(
    a_blocks: Vec<DenseMatrix>,
    n: usize,
    d: usize,
) -> Result<Matrix2Connection> {
    let dims = ModuleDims::new(n, 0, 0);
    Matrix2Connection::build_semiflat(
        dims,
        d,
        a_blocks,
        vec![DenseMatrix::zeros(0, n); d],
        vec![DenseMatrix::zeros(0, 0); d],
        vec![DenseMatrix::zeros(n, 0); d],
        vec![DenseMatrix::zeros(0, 0); d],
        vec![DenseMatrix::zeros(0, 0); pair_count(d)],
    )
}

/// Matrix which is 1 on and above the k-th upper diagonal.
pub fn upper_ones(m: usize, k: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, m, |i, j| if j >= i + k { 1.0 } else { 0.0 })
}

/// The separating polynomial connection: dims (0, a+1, b+1) on R^{d+2},
/// with `C^s` the strictly-upper-ones matrix, `E^t` its negative of size
/// b+1, and a single interior block carrying `c a! b!` in entry (a+1, 1)
/// of the (s, x_i) pair. The development integrand entry (1, b+1) is then
/// a polynomial in s and t with leading term `c s^a t^b` (the truncated
/// exponential-series factors contribute only lower-degree terms).
pub fn polynomial_connection(
    a: usize,
    b: usize,
    coord: usize,
    scale: f64,
    d_state: usize,
) -> Result<Matrix2Connection> {
    if coord == 0 || coord > d_state {
        return Err(Error::InvalidArgument(format!(
            "coordinate index {coord} out of range 1..={d_state}"
        )));
    }
    let dims = ModuleDims::new(0, a + 1, b + 1);
    let d = d_state + 2;
    let mut c_blocks = vec![DenseMatrix::zeros(a + 1, a + 1); d];
    c_blocks[0] = upper_ones(a + 1, 1);
    let mut e_blocks = vec![DenseMatrix::zeros(b + 1, b + 1); d];
    e_blocks[1] = -upper_ones(b + 1, 1);
    let mut u_blocks = vec![DenseMatrix::zeros(a + 1, b + 1); pair_count(d)];
    let factorial = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let mut u = DenseMatrix::zeros(a + 1, b + 1);
    u[(a, 0)] = scale * factorial(a) * factorial(b);
    // Pair (s, x_coord): s is slot 0 and x_coord is slot coord + 1.
    u_blocks[pair_index(0, coord + 1, d)] = u;
    Matrix2Connection::build_semiflat(
        dims,
        d,
        vec![DenseMatrix::zeros(0, 0); d],
        vec![DenseMatrix::zeros(a + 1, 0); d],
        c_blocks,
        vec![DenseMatrix::zeros(0, b + 1); d],
        e_blocks,
        u_blocks,
    )
}

/// Direct sum of two connections over the same ambient space: every named
/// block becomes the block diagonal of the two inputs, which realizes the
/// usual embedding after reordering the basis to the standard block layout.
pub fn direct_sum(w1: &Matrix2Connection, w2: &Matrix2Connection) -> Result<Matrix2Connection> {
    if w1.d != w2.d {
        return Err(Error::ShapeMismatch {
            expected: format!("ambient dimension {}", w1.d),
            got: format!("{}", w2.d),
        });
    }
    let dims = ModuleDims::new(
        w1.dims.n + w2.dims.n,
        w1.dims.m + w2.dims.m,
        w1.dims.p + w2.dims.p,
    );
    let diag = |x: &DenseMatrix, y: &DenseMatrix| {
        let mut out = DenseMatrix::zeros(x.nrows() + y.nrows(), x.ncols() + y.ncols());
        out.view_mut((0, 0), x.shape()).copy_from(x);
        out.view_mut((x.nrows(), x.ncols()), y.shape()).copy_from(y);
        out
    };
    let zip = |a: &[DenseMatrix], b: &[DenseMatrix]| -> Vec<DenseMatrix> {
        a.iter().zip(b.iter()).map(|(x, y)| diag(x, y)).collect()
    };
    Matrix2Connection::build_semiflat(
        dims,
        w1.d,
        zip(&w1.a_blocks, &w2.a_blocks),
        zip(&w1.b_blocks, &w2.b_blocks),
        zip(&w1.c_blocks, &w2.c_blocks),
        zip(&w1.d_blocks, &w2.d_blocks),
        zip(&w1.e_blocks, &w2.e_blocks),
        zip(&w1.u_blocks, &w2.u_blocks),
    )
}

/// Embeds an interior element of the first summand and one of the second
/// into the interior space of their direct sum (block-diagonal placement of
/// each named block). Used to compare direct-sum developments.
pub fn embed_interior_pair(
    dims1: ModuleDims,
    h1: &DenseMatrix,
    dims2: ModuleDims,
    h2: &DenseMatrix,
) -> DenseMatrix {
    let dims = ModuleDims::new(dims1.n + dims2.n, dims1.m + dims2.m, dims1.p + dims2.p);
    let mut out = DenseMatrix::zeros(dims.rows1(), dims.rows0());
    let put = |out: &mut DenseMatrix,
               src: &DenseMatrix,
               r0: usize,
               c0: usize,
               rows: usize,
               cols: usize,
               dst_r: usize,
               dst_c: usize| {
        out.view_mut((dst_r, dst_c), (rows, cols))
            .copy_from(&src.view((r0, c0), (rows, cols)).into_owned());
    };
    // R, S, T, U blocks of the first element.
    put(&mut out, h1, 0, 0, dims1.n, dims1.n, 0, 0);
    put(&mut out, h1, 0, dims1.n, dims1.n, dims1.p, 0, dims.n);
    put(&mut out, h1, dims1.n, 0, dims1.m, dims1.n, dims.n, 0);
    put(&mut out, h1, dims1.n, dims1.n, dims1.m, dims1.p, dims.n, dims.n);
    // Second element, offset inside each named block.
    put(&mut out, h2, 0, 0, dims2.n, dims2.n, dims1.n, dims1.n);
    put(&mut out, h2, 0, dims2.n, dims2.n, dims2.p, dims1.n, dims.n + dims1.p);
    put(&mut out, h2, dims2.n, 0, dims2.m, dims2.n, dims.n + dims1.m, dims1.n);
    put(
        &mut out,
        h2,
        dims2.n,
        dims2.n,
        dims2.m,
        dims2.p,
        dims.n + dims1.m,
        dims.n + dims1.p,
    );
    out
}

// ---------------------------------------------------------------------------
// JSON file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DimsFile {
    n: usize,
    m: usize,
    p: usize,
}

#[derive(Serialize, Deserialize)]
struct BlocksFile {
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "D")]
    d: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "E")]
    e: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "U")]
    u: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct ConnectionFile {
    dims: DimsFile,
    d: usize,
    blocks: BlocksFile,
}

fn matrix_to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DenseMatrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "expected {nrows}x{ncols} nested array"
        )));
    }
    Ok(DenseMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Matrix2Connection {
    /// Serializes the free blocks as JSON. Derived blocks are never written.
    pub fn to_json(&self) -> Result<String> {
        let file = ConnectionFile {
            dims: DimsFile {
                n: self.dims.n,
                m: self.dims.m,
                p: self.dims.p,
            },
            d: self.d,
            blocks: BlocksFile {
                a: self.a_blocks.iter().map(matrix_to_rows).collect(),
                b: self.b_blocks.iter().map(matrix_to_rows).collect(),
                c: self.c_blocks.iter().map(matrix_to_rows).collect(),
                d: self.d_blocks.iter().map(matrix_to_rows).collect(),
                e: self.e_blocks.iter().map(matrix_to_rows).collect(),
                u: self.u_blocks.iter().map(matrix_to_rows).collect(),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ConnectionFile = serde_json::from_str(text)?;
        let dims = ModuleDims::new(file.dims.n, file.dims.m, file.dims.p);
        let (n, m, p) = (dims.n, dims.m, dims.p);
        let d = file.d;
        let parse = |v: &[Vec<Vec<f64>>], rows: usize, cols: usize| -> Result<Vec<DenseMatrix>> {
            v.iter().map(|rws| rows_to_matrix(rws, rows, cols)).collect()
        };
        Matrix2Connection::build_semiflat(
            dims,
            d,
            parse(&file.blocks.a, n, n)?,
            parse(&file.blocks.b, m, n)?,
            parse(&file.blocks.c, m, m)?,
            parse(&file.blocks.d, n, p)?,
            parse(&file.blocks.e, p, p)?,
            parse(&file.blocks.u, m, p)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, rng};

    #[test]
    fn zero_connection_valid_and_scalar_case() {
        let w = Matrix2Connection::zero(ModuleDims::new(2, 1, 1), 3);
        assert_eq!(w.frobenius_norm(), 0.0);

        // n = 1 with scalar blocks: commutators vanish automatically.
        let mut r = rng(30);
        let dims = ModuleDims::new(1, 1, 1);
        let blocks = |r: &mut _| (0..2).map(|_| random_matrix(r, 1, 1, 1.0)).collect::<Vec<_>>();
        let w = Matrix2Connection::build_semiflat(
            dims,
            2,
            blocks(&mut r),
            blocks(&mut r),
            blocks(&mut r),
            blocks(&mut r),
            blocks(&mut r),
            vec![random_matrix(&mut r, 1, 1, 1.0)],
        );
        assert!(w.is_ok());
    }

    #[test]
    fn commutator_violation_reported() {
        let dims = ModuleDims::new(0, 2, 1);
        let c1 = DenseMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        let c2 = DenseMatrix::from_row_slice(2, 2, &[0., 0., 1., 0.]);
        let err = Matrix2Connection::build_semiflat(
            dims,
            2,
            vec![DenseMatrix::zeros(0, 0); 2],
            vec![DenseMatrix::zeros(2, 0); 2],
            vec![c1, c2],
            vec![DenseMatrix::zeros(0, 1); 2],
            vec![DenseMatrix::zeros(1, 1); 2],
            vec![DenseMatrix::zeros(2, 1); 1],
        )
        .unwrap_err();
        match err {
            Error::CommutatorViolation { i, j, residual } => {
                assert_eq!((i, j), (0, 1));
                assert!((residual - 2f64.sqrt()).abs() < 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn semiflat_boundary_identity() {
        // delta(gamma^{ij}) = ([alpha^i, alpha^j], [beta^i, beta^j]).
        let mut r = rng(31);
        let w = sample_restricted(2, 2, &mut r);
        let phi = w.dims.phi();
        for i in 0..w.d {
            for j in (i + 1)..w.d {
                let g = w.gamma(i, j);
                let lhs_x = &g * &phi;
                let lhs_y = &phi * &g;
                let ca = comm(&w.alpha(i), &w.alpha(j));
                let cb = comm(&w.beta(i), &w.beta(j));
                assert!((lhs_x - ca).norm() < 1e-10);
                assert!((lhs_y - cb).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn restricted_zero_pattern_and_determinism() {
        let mut r1 = rng(32);
        let mut r2 = rng(32);
        let w1 = sample_restricted(2, 3, &mut r1);
        let w2 = sample_restricted(2, 3, &mut r2);
        assert_eq!(frobenius_distance(&w1, &w2).unwrap(), 0.0);
        for i in 1..w1.d {
            assert_eq!(w1.c_blocks[i].norm(), 0.0);
        }
        for (i, e) in w1.e_blocks.iter().enumerate() {
            if i != 1 {
                assert_eq!(e.norm(), 0.0);
            }
        }
        assert!(w1.c_blocks[0].norm() > 0.0);
    }

    #[test]
    fn eval_gamma_antisymmetric_bilinear() {
        let mut r = rng(33);
        let w = sample_restricted(2, 2, &mut r);
        let d = w.d;
        let v: Vec<f64> = (0..d).map(|i| i as f64 + 0.5).collect();
        assert!(w.eval_gamma(&v, &v).unwrap().norm() < 1e-12);

        // Basis case picks out gamma^{ij}.
        let e0: Vec<f64> = (0..d).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect();
        let e2: Vec<f64> = (0..d).map(|k| if k == 2 { 1.0 } else { 0.0 }).collect();
        let g = w.eval_gamma(&e0, &e2).unwrap();
        assert!((g.z - w.gamma(0, 2)).norm() < 1e-14);

        // Bilinearity against the expansion oracle.
        let u: Vec<f64> = (0..d).map(|i| (i as f64 * 0.73).sin()).collect();
        let vv: Vec<f64> = (0..d).map(|i| (i as f64 * 1.31).cos()).collect();
        let mut oracle = DenseMatrix::zeros(w.dims.rows1(), w.dims.rows0());
        for i in 0..d {
            for j in (i + 1)..d {
                oracle += w.gamma(i, j) * (u[i] * vv[j] - u[j] * vv[i]);
            }
        }
        assert!((w.eval_gamma(&u, &vv).unwrap().z - oracle).norm() < 1e-12);
    }

    #[test]
    fn polynomial_connection_structure() {
        // U_{3,1}^2 = U_{3,2}.
        let u31 = upper_ones(3, 1);
        let u32 = upper_ones(3, 2);
        assert!((&u31 * &u31 - u32).norm() == 0.0);
        assert!((&u31 * &u31 * &u31).norm() == 0.0);

        let w = polynomial_connection(1, 1, 1, 1.0, 1).unwrap();
        assert_eq!(w.dims, ModuleDims::new(0, 2, 2));
        assert_eq!(w.d, 3);
        // Only U^{s, x_1} is nonzero and carries a!b! = 1 at (a+1, 1).
        let g = w.gamma(0, 2);
        assert_eq!(g[(1, 0)], 1.0);
        assert_eq!(g.norm(), 1.0);
        assert_eq!(w.gamma(0, 1).norm(), 0.0);
        assert_eq!(w.gamma(1, 2).norm(), 0.0);
    }

    #[test]
    fn trivial_curvature_blocks() {
        let mut r = rng(34);
        let a: Vec<_> = (0..3).map(|_| random_matrix(&mut r, 2, 2, 0.7)).collect();
        let w = trivial_curvature_connection(a.clone(), 2, 3).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let g = w.gamma(i, j);
                assert!((g - comm(&a[i], &a[j])).norm() < 1e-14);
            }
        }
        // Commuting A blocks give vanishing gamma.
        let diag: Vec<_> = (0..3)
            .map(|k| DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![k as f64, 1.0])))
            .collect();
        let w = trivial_curvature_connection(diag, 2, 3).unwrap();
        assert_eq!(w.gamma(0, 1).norm(), 0.0);
    }

    #[test]
    fn direct_sum_norm_additive() {
        let mut r = rng(35);
        let w1 = sample_restricted(1, 1, &mut r);
        let w2 = sample_restricted(2, 1, &mut r);
        let sum = direct_sum(&w1, &w2).unwrap();
        let expect = w1.frobenius_norm_squared() + w2.frobenius_norm_squared();
        assert!((sum.frobenius_norm_squared() - expect).abs() < 1e-10);

        // omega (+) 0 keeps the original norm.
        let z = Matrix2Connection::zero(ModuleDims::new(1, 1, 1), w1.d);
        let padded = direct_sum(&w1, &z).unwrap();
        assert!((padded.frobenius_norm() - w1.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn metric_axioms() {
        let mut r = rng(36);
        let w1 = sample_restricted(2, 1, &mut r);
        let w2 = sample_restricted(2, 1, &mut r);
        let w3 = sample_restricted(2, 1, &mut r);
        assert_eq!(frobenius_distance(&w1, &w1).unwrap(), 0.0);
        let z = Matrix2Connection::zero(w1.dims, w1.d);
        assert!(
            (frobenius_distance(&w1, &z).unwrap() - w1.frobenius_norm()).abs() < 1e-12
        );
        let d12 = frobenius_distance(&w1, &w2).unwrap();
        let d23 = frobenius_distance(&w2, &w3).unwrap();
        let d13 = frobenius_distance(&w1, &w3).unwrap();
        assert!(d13 <= d12 + d23 + 1e-12);
    }

    #[test]
    fn json_round_trip_drops_derived_blocks() {
        let mut r = rng(37);
        let w = sample_restricted(2, 1, &mut r);
        let text = w.to_json().unwrap();
        assert!(!text.contains("\"R\""));
        let back = Matrix2Connection::from_json(&text).unwrap();
        assert_eq!(frobenius_distance(&w, &back).unwrap(), 0.0);
    }
}
