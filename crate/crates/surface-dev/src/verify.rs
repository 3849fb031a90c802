//! Seeded verification suites behind the `verify` command and the
//! acceptance tests: crossed-module algebra laws, double-group laws, the
//! Stokes and Fubini identities, and functoriality/fold checks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::connection::{sample_restricted, trivial_curvature_connection};
use crate::crossed::{
    act, act_algebra_infinitesimal, delta, delta_algebra, random_gl0, random_gl1,
    random_gl1_algebra, star_commutator, star_exp, star_inv, star_mul, GL0Element, Gl0Element,
    ModuleDims,
};
use crate::double::{hcompose, random_square, vcompose, Square, SQUARE_TOL};
use crate::error::Result;
use crate::grid::GridSurface;
use crate::matrix::expm;
use crate::metric::stream_rng;
use crate::path::develop_pl_pair;
use crate::random::refine_pl;
use crate::surface::{
    develop_grid, develop_linear_square, stokes_residual, CellOrientation, GridDevelopOptions,
    QuadratureOptions,
};
use crate::young::develop_young_both;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {}::{} worst {:.3e} (tol {:.1e})\n",
                if c.passed { "PASS" } else { "FAIL" },
                self.suite,
                c.name,
                c.worst,
                c.tol
            ));
        }
        out
    }
}

struct SuiteBuilder {
    suite: String,
    checks: Vec<Check>,
}

impl SuiteBuilder {
    fn new(name: &str) -> Self {
        SuiteBuilder {
            suite: name.into(),
            checks: Vec::new(),
        }
    }

    fn record(&mut self, name: &str, worst: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            worst,
            tol,
            passed: worst <= tol,
        });
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite: self.suite,
            checks: self.checks,
        }
    }
}

const ALGEBRA_DIMS: [ModuleDims; 4] = [
    ModuleDims { n: 1, m: 1, p: 1 },
    ModuleDims { n: 2, m: 1, p: 3 },
    ModuleDims { n: 0, m: 2, p: 2 },
    ModuleDims { n: 3, m: 0, p: 0 },
];

fn random_gl0_algebra<R: Rng>(dims: ModuleDims, rng: &mut R, scale: f64) -> Gl0Element {
    let (n, m, p) = (dims.n, dims.m, dims.p);
    let g = |rng: &mut R, r: usize, c: usize| {
        DMatrix::from_fn(r, c, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * scale
        })
    };
    let a = g(rng, n, n);
    let mut x = DMatrix::zeros(n + m, n + m);
    x.view_mut((0, 0), (n, n)).copy_from(&a);
    x.view_mut((n, 0), (m, n)).copy_from(&g(rng, m, n));
    x.view_mut((n, n), (m, m)).copy_from(&g(rng, m, m));
    let mut y = DMatrix::zeros(n + p, n + p);
    y.view_mut((0, 0), (n, n)).copy_from(&a);
    y.view_mut((0, n), (n, p)).copy_from(&g(rng, n, p));
    y.view_mut((n, n), (p, p)).copy_from(&g(rng, p, p));
    Gl0Element::new(dims, x, y).expect("valid by construction")
}

/// Crossed-module algebra laws on 100 random instances per dimension
/// tuple: Peiffer relations at group and algebra level, star-group axioms,
/// the one-parameter law and compatibility of the boundary with
/// exponentials. Tolerance 1e-10.
pub fn algebra_suite(seed: u64) -> Result<SuiteReport> {
    let tol = 1e-10;
    let mut b = SuiteBuilder::new("algebra");
    let mut worst = [0.0f64; 8];
    for dims in ALGEBRA_DIMS {
        let mut rng = stream_rng(seed, &[10, dims.n as u64, dims.m as u64, dims.p as u64]);
        for _ in 0..100 {
            let g = random_gl0(dims, &mut rng, 0.35);
            let h1 = random_gl1(dims, &mut rng, 0.45);
            let h2 = random_gl1(dims, &mut rng, 0.45);
            let z1 = random_gl1_algebra(dims, &mut rng, 0.7);
            let z2 = random_gl1_algebra(dims, &mut rng, 0.7);
            let x0 = random_gl0_algebra(dims, &mut rng, 0.6);

            // CM1. delta(g |> h) = g delta(h) g^{-1}.
            let cm1 = delta(&act(&g, &h1)?)?
                .distance(&g.mul(&delta(&h1)?).mul(&g.inv()?));
            // CM2. delta(h1) |> h2 = h1 * h2 * h1^{-*}.
            let cm2 = (act(&delta(&h1)?, &h2)?.h
                - star_mul(&star_mul(&h1, &h2)?, &star_inv(&h1)?)?.h)
                .norm();
            // DCM1. delta((X,Y) |> Z) = [(X,Y), delta(Z)].
            let lhs = delta_algebra(&act_algebra_infinitesimal(&x0, &z1)?)?;
            let rhs = x0.commutator(&delta_algebra(&z1)?);
            let dcm1 = ((lhs.x - rhs.x).norm_squared() + (lhs.y - rhs.y).norm_squared()).sqrt();
            // DCM2. delta(Z1) |> Z2 = [Z1, Z2]_*.
            let dcm2 = (act_algebra_infinitesimal(&delta_algebra(&z1)?, &z2)?.z
                - star_commutator(&z1, &z2)?.z)
                .norm();
            // Group axioms: associativity and inverses.
            let a3 = random_gl1(dims, &mut rng, 0.45);
            let assoc = (star_mul(&star_mul(&h1, &h2)?, &a3)?.h
                - star_mul(&h1, &star_mul(&h2, &a3)?)?.h)
                .norm();
            let inv = star_mul(&h1, &star_inv(&h1)?)?.norm();
            // One-parameter subgroup of the star exponential.
            let (s, t) = (rng.gen::<f64>(), rng.gen::<f64>());
            let zs = crate::crossed::Gl1Element::new(dims, &z1.z * s)?;
            let zt = crate::crossed::Gl1Element::new(dims, &z1.z * t)?;
            let zst = crate::crossed::Gl1Element::new(dims, &z1.z * (s + t))?;
            let one_param =
                (star_mul(&star_exp(&zs)?, &star_exp(&zt)?)?.h - star_exp(&zst)?.h).norm();
            // delta of star_exp equals exp of delta.
            let phi = dims.phi();
            let de = delta(&star_exp(&z1)?)?;
            let boundary_exp = ((de.f - expm(&(&z1.z * &phi))?).norm_squared()
                + (de.g - expm(&(&phi * &z1.z))?).norm_squared())
            .sqrt();

            for (slot, v) in [cm1, cm2, dcm1, dcm2, assoc, inv, one_param, boundary_exp]
                .into_iter()
                .enumerate()
            {
                worst[slot] = worst[slot].max(v);
            }
        }
    }
    let names = [
        "first_peiffer_group",
        "second_peiffer_group",
        "first_peiffer_algebra",
        "second_peiffer_algebra",
        "star_associativity",
        "star_inverse",
        "one_parameter_subgroup",
        "boundary_of_exponential",
    ];
    for (name, w) in names.iter().zip(worst) {
        b.record(name, w, tol);
    }
    Ok(b.finish())
}

/// Double-group laws on 100 random composable configurations: interchange,
/// identity and inverse laws. Tolerance 1e-8.
pub fn double_group_suite(seed: u64) -> Result<SuiteReport> {
    let tol = 1e-8;
    let dims = ModuleDims::new(2, 1, 2);
    let mut b = SuiteBuilder::new("double-group");
    let mut rng = stream_rng(seed, &[20]);
    let mut w_interchange: f64 = 0.0;
    let mut w_identity: f64 = 0.0;
    let mut w_inverse: f64 = 0.0;
    for _ in 0..100 {
        let s1 = random_square(dims, &mut rng, 0.3)?;
        let s2 = attach_right(&s1, &mut rng)?;
        let s3 = attach_top(&s1, &mut rng)?;
        let s4 = {
            let mut s = attach_right(&s3, &mut rng)?;
            // Align the bottom edge with s2's top edge by rebuilding via the
            // boundary law.
            s = reconcile_bottom(&s, &s2.z)?;
            s
        };
        let rows = vcompose(
            &hcompose(&s1, &s2, SQUARE_TOL)?,
            &hcompose(&s3, &s4, SQUARE_TOL)?,
            SQUARE_TOL,
        )?;
        let cols = hcompose(
            &vcompose(&s1, &s3, SQUARE_TOL)?,
            &vcompose(&s2, &s4, SQUARE_TOL)?,
            SQUARE_TOL,
        )?;
        w_interchange = w_interchange
            .max((rows.e.h.clone() - cols.e.h).norm())
            .max(rows.x.distance(&cols.x))
            .max(rows.y.distance(&cols.y))
            .max(rows.z.distance(&cols.z))
            .max(rows.w.distance(&cols.w));

        let idh = Square::identity_h(s1.w.clone());
        let c = hcompose(&idh, &s1, SQUARE_TOL)?;
        w_identity = w_identity.max((c.e.h.clone() - &s1.e.h).norm());
        let idv = Square::identity_v(s1.x.clone());
        let c = vcompose(&idv, &s1, SQUARE_TOL)?;
        w_identity = w_identity.max((c.e.h.clone() - &s1.e.h).norm());

        let c = hcompose(&s1, &s1.inverse_h()?, SQUARE_TOL)?;
        w_inverse = w_inverse.max(c.e.norm());
        let c = vcompose(&s1, &s1.inverse_v()?, SQUARE_TOL)?;
        w_inverse = w_inverse.max(c.e.norm());
    }
    b.record("interchange", w_interchange, tol);
    b.record("identity_laws", w_identity, tol);
    b.record("inverse_laws", w_inverse, tol);
    Ok(b.finish())
}

fn attach_right<R: Rng>(left: &Square, rng: &mut R) -> Result<Square> {
    let dims = left.dims();
    let e = random_gl1(dims, rng, 0.3);
    let y = random_gl0(dims, rng, 0.3);
    let z = random_gl0(dims, rng, 0.3);
    let w = left.y.clone();
    let x = delta(&e)?.mul(&w).mul(&z).mul(&y.inv()?);
    let x = GL0Element::project(dims, x.f, x.g)?;
    Square::new(x, y, z, w, e, SQUARE_TOL)
}

fn attach_top<R: Rng>(below: &Square, rng: &mut R) -> Result<Square> {
    let dims = below.dims();
    let e = random_gl1(dims, rng, 0.3);
    let x = below.z.clone();
    let z = random_gl0(dims, rng, 0.3);
    let w = random_gl0(dims, rng, 0.3);
    let y = x.inv()?.mul(&delta(&e)?).mul(&w).mul(&z);
    let y = GL0Element::project(dims, y.f, y.g)?;
    Square::new(x, y, z, w, e, SQUARE_TOL)
}

fn reconcile_bottom(s: &Square, bottom: &GL0Element) -> Result<Square> {
    // Keep e, z, w; set x to the required bottom edge and solve for y.
    let y = bottom
        .inv()?
        .mul(&delta(&s.e)?)
        .mul(&s.w)
        .mul(&s.z);
    let y = GL0Element::project(s.dims(), y.f, y.g)?;
    Square::new(bottom.clone(), y, s.z.clone(), s.w.clone(), s.e.clone(), SQUARE_TOL)
}

pub struct StokesConfig {
    pub grids: usize,
    pub cells: usize,
    pub dim: usize,
    pub tol: f64,
}

impl Default for StokesConfig {
    fn default() -> Self {
        StokesConfig {
            grids: 20,
            cells: 4,
            dim: 3,
            tol: 1e-6,
        }
    }
}

fn random_grid_values<R: Rng>(rng: &mut R, cells: usize, dim: usize, scale: f64) -> GridSurface {
    GridSurface::from_fn(cells, cells, dim, |_, _| {
        DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * scale)
    })
    .expect("random grid construction")
}

/// Nonabelian Stokes at grid scale: the boundary of the composed interior
/// equals the boundary-loop development, on random PL grids with unit-norm
/// restricted connections.
pub fn stokes_suite(seed: u64, cfg: StokesConfig) -> Result<SuiteReport> {
    let mut b = SuiteBuilder::new("stokes");
    let mut worst: f64 = 0.0;
    for k in 0..cfg.grids {
        let mut rng = stream_rng(seed, &[30, k as u64]);
        let conn = sample_restricted(1, cfg.dim.saturating_sub(2), &mut rng).rescale_to_norm(1.0);
        let grid = random_grid_values(&mut rng, cfg.cells, cfg.dim, 0.5);
        let dev = develop_grid(&conn, &grid, &GridDevelopOptions::default())?;
        worst = worst.max(stokes_residual(&conn, &grid, &dev)?);
    }
    b.record("grid_boundary_law", worst, cfg.tol);
    Ok(b.finish())
}

/// Fubini checks. The theorem's two objects are computed to quadrature
/// accuracy through the exact route: the primary development, and the
/// alternate one realized as the star inverse of the mirrored development
/// of the transposed grid. The exact route must also be independent of the
/// cell composition order. The mutual agreement of the two Young CDE
/// routes is first-order in the mesh, so it carries its own empirically
/// calibrated tolerance at the given refinement.
pub fn fubini_suite(
    seed: u64,
    grids: usize,
    refine: usize,
    tol: f64,
    young_tol: f64,
) -> Result<SuiteReport> {
    let mut b = SuiteBuilder::new("fubini");
    let mut w_alt: f64 = 0.0;
    let mut w_exact: f64 = 0.0;
    let mut w_young: f64 = 0.0;
    for k in 0..grids {
        let mut rng = stream_rng(seed, &[40, k as u64]);
        let conn = sample_restricted(1, 1, &mut rng).rescale_to_norm(1.0);
        let grid = random_grid_values(&mut rng, 4, 3, 0.5);

        // Alternate development through the diagonal reflection: the
        // transposed grid keeps the diagonal split, so the main orientation
        // is the matching triangulation.
        let h = develop_grid(&conn, &grid, &GridDevelopOptions::default())?;
        let h_hat = star_inv(
            &develop_grid(&conn, &grid.reflect_diagonal(), &GridDevelopOptions::default())?
                .square
                .e,
        )?;
        w_alt = w_alt.max((h.square.e.h.clone() - h_hat.h).norm());

        let mut opts = GridDevelopOptions::default();
        opts.columns_first = true;
        let dev_cols = develop_grid(&conn, &grid, &opts)?;
        w_exact = w_exact.max((h.square.e.h.clone() - dev_cols.square.e.h).norm());

        let fine = refine_pl(&grid, refine)?;
        let (hy, hy_alt) = develop_young_both(&conn, &fine)?;
        w_young = w_young.max((hy.h - hy_alt.h).norm());
    }
    b.record("alternate_route", w_alt, tol);
    b.record("exact_composition_order", w_exact, tol);
    b.record("young_routes_agree", w_young, young_tol);
    Ok(b.finish())
}

/// Functoriality and symmetry checks: Young-route composition against the
/// action formula, fold cancellation and the diagonal reflection law.
pub fn functorial_suite(seed: u64) -> Result<SuiteReport> {
    let mut b = SuiteBuilder::new("functorial");
    let mut w_compose: f64 = 0.0;
    let mut w_fold: f64 = 0.0;
    let mut w_reflect: f64 = 0.0;
    for k in 0..5u64 {
        let mut rng = stream_rng(seed, &[50, k]);
        let conn = sample_restricted(1, 1, &mut rng).rescale_to_norm(1.0);

        // Horizontal split: the development of the concatenation matches
        // the double-group composition formula.
        let left = random_grid_values(&mut rng, 2, 3, 0.4);
        let mut right = random_grid_values(&mut rng, 2, 3, 0.4);
        right = align_left_edge(&right, &left);
        let glued = left.concat_h(&right)?;
        let fine = refine_pl(&glued, 32)?;
        let (h_glued, _) = develop_young_both(&conn, &fine)?;
        let h_left = develop_young_both(&conn, &refine_pl(&left, 32)?)?.0;
        let h_right = develop_young_both(&conn, &refine_pl(&right, 32)?)?.0;
        let bottom = develop_pl_pair(
            &conn,
            &bottom_edge_path(&left),
        )?;
        let formula = star_mul(&act(&bottom, &h_right)?, &h_left)?;
        w_compose = w_compose.max((h_glued.h - formula.h).norm());

        // Fold cancellation through the exact route with mirrored
        // triangulation on the reflected half.
        let grid = random_grid_values(&mut rng, 2, 3, 0.4);
        let fold = grid.concat_h(&grid.reflect_s())?;
        let n_cells = grid.ns() - 1;
        let mut opts = GridDevelopOptions::default();
        opts.orientation = std::sync::Arc::new(move |i, _| {
            if i >= n_cells {
                CellOrientation::AntiDiagonal
            } else {
                CellOrientation::MainDiagonal
            }
        });
        let dev = develop_grid(&conn, &fold, &opts)?;
        w_fold = w_fold.max(dev.square.e.norm());

        // Diagonal reflection inverts the development.
        let dev = develop_grid(&conn, &grid, &GridDevelopOptions::default())?;
        let dev_t = develop_grid(&conn, &grid.reflect_diagonal(), &GridDevelopOptions::default())?;
        w_reflect =
            w_reflect.max((dev_t.square.e.h.clone() - star_inv(&dev.square.e)?.h).norm());
    }
    b.record("young_horizontal_composition", w_compose, 1e-5);
    b.record("fold_cancellation", w_fold, 1e-6);
    b.record("diagonal_reflection_inverse", w_reflect, 1e-6);
    Ok(b.finish())
}

fn bottom_edge_path(grid: &GridSurface) -> crate::path::PLPath {
    crate::path::PLPath::new(
        (0..grid.ns()).map(|i| grid.value(i, 0).clone()).collect(),
    )
    .expect("bottom edge")
}

/// Rewrites the left column of `grid` to match the right column of
/// `target`, keeping everything else; used to build strictly composable
/// pairs.
fn align_left_edge(grid: &GridSurface, target: &GridSurface) -> GridSurface {
    let mut values = Vec::with_capacity(grid.ns() * grid.nt());
    for i in 0..grid.ns() {
        for j in 0..grid.nt() {
            if i == 0 {
                values.push(target.value(target.ns() - 1, j).clone());
            } else {
                values.push(grid.value(i, j).clone());
            }
        }
    }
    GridSurface::new(grid.s_knots.clone(), grid.t_knots.clone(), values)
        .expect("aligned grid construction")
}

/// Oracle equivalence between the exact linear-cell route and the Young
/// route on a refined sampling of the same linear surface.
pub fn linear_oracle_suite(seed: u64, cases: usize, cells: usize, tol: f64) -> Result<SuiteReport> {
    let mut b = SuiteBuilder::new("linear-oracle");
    let mut worst: f64 = 0.0;
    for k in 0..cases {
        let mut rng = stream_rng(seed, &[60, k as u64]);
        let conn = sample_restricted(1, 1, &mut rng).rescale_to_norm(1.0);
        let a = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.6);
        let bvec =
            DVector::from_fn(3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.6);
        let exact = develop_linear_square(&conn, &a, &bvec, QuadratureOptions::default())?;
        let grid = GridSurface::linear(&a, &bvec, cells)?;
        let young = crate::young::develop_young(&conn, &grid)?;
        let rel = (exact.h.clone() - &young.h).norm() / exact.h.norm().max(1e-300);
        worst = worst.max(rel);
    }
    b.record("exact_vs_young_relative", worst, tol);
    Ok(b.finish())
}

/// Trivial-module reduction: with the curvature connection the interior
/// development reproduces the boundary path development.
pub fn trivial_module_suite(seed: u64, cases: usize, tol: f64) -> Result<SuiteReport> {
    let mut b = SuiteBuilder::new("trivial-module");
    let mut worst: f64 = 0.0;
    for k in 0..cases {
        let mut rng = stream_rng(seed, &[70, k as u64]);
        let a_blocks: Vec<DMatrix<f64>> = (0..3)
            .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.4))
            .collect();
        let conn = trivial_curvature_connection(a_blocks, 2, 3)?;
        let a = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.7);
        let bvec =
            DVector::from_fn(3, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.7);
        let h = develop_linear_square(&conn, &a, &bvec, QuadratureOptions::default())?;
        let zero = DVector::zeros(3);
        let loop_path = crate::path::PLPath::new(vec![
            zero.clone(),
            a.clone(),
            &a + &bvec,
            bvec.clone(),
            zero,
        ])?;
        let f = develop_pl_pair(&conn, &loop_path)?.f;
        worst = worst.max((h.h - (f - DMatrix::identity(2, 2))).norm());
    }
    b.record("interior_equals_boundary_development", worst, tol);
    Ok(b.finish())
}

/// Exact-route oracle for one randomly sampled parametrized connection:
/// Young development of a linear surface against the closed-form route
/// under the flat-A restriction is covered by `linear_oracle_suite` and the
/// unit tests; this helper runs every suite in sequence.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        algebra_suite(seed)?,
        double_group_suite(seed)?,
        stokes_suite(seed, StokesConfig::default())?,
        fubini_suite(seed, 5, 64, 1e-6, 2.5e-4)?,
        functorial_suite(seed)?,
    ])
}
