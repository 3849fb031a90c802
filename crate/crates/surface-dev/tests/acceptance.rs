//! Acceptance gate: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test -p surface-dev --test acceptance` (add
//! `-- --nocapture` to see the lines for passing criteria too).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use surface_dev::connection::{sample_restricted, Matrix2Connection};
use surface_dev::crossed::star_inv;
use surface_dev::grid::GridSurface;
use surface_dev::metric::{
    dn_estimate, metric_estimate, permutation_test, separation_demo, stream_rng, truncation_bound,
    young_area_moment, ConnectionScaling, DistanceVariant, Ensemble, MetricConfig,
};
use surface_dev::random::{fbs_axis_cov, refine_pl, sample_fbs, sample_fbs_with, subsample_pl};
use surface_dev::surface::{
    develop_grid, develop_linear_square, develop_linear_square_magnus, CellOrientation,
    GridDevelopOptions, QuadratureOptions,
};
use surface_dev::verify;
use surface_dev::young::{develop_young, develop_young_both, pvar_estimate};

fn report(criterion: &str, passed: bool, detail: &str, started: Instant) {
    println!(
        "[{}] {criterion}: {detail} ({:.1}s)",
        if passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(passed, "{criterion}: {detail}");
}

fn suite_worst(report: &surface_dev::verify::SuiteReport) -> f64 {
    report
        .checks
        .iter()
        .map(|c| c.worst)
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_algebra_suite() {
    let t0 = Instant::now();
    let algebra = verify::algebra_suite(7).unwrap();
    let passed = algebra.passed() && t0.elapsed().as_secs() < 10;
    report(
        "1 algebra laws at 1e-10 on 100 instances x 4 dims",
        passed,
        &format!("worst residual {:.3e}", suite_worst(&algebra)),
        t0,
    );
}

#[test]
fn criterion_02_double_group_suite() {
    let t0 = Instant::now();
    let dg = verify::double_group_suite(7).unwrap();
    let passed = dg.passed() && t0.elapsed().as_secs() < 10;
    report(
        "2 double-group laws at 1e-8 on 100 configurations",
        passed,
        &format!("worst residual {:.3e}", suite_worst(&dg)),
        t0,
    );
}

#[test]
fn criterion_03_nonabelian_stokes() {
    let t0 = Instant::now();
    let stokes = verify::stokes_suite(7, Default::default()).unwrap();
    let passed = stokes.passed() && t0.elapsed().as_secs() < 60;
    report(
        "3 nonabelian Stokes on 20 random 4x4 grids in R^3 at 1e-6",
        passed,
        &format!("worst residual {:.3e}", suite_worst(&stokes)),
        t0,
    );
}

#[test]
fn criterion_04_nonabelian_fubini() {
    let t0 = Instant::now();
    // The alternate development and the composition-order independence are
    // exact-route computations checked at 1e-6. The mutual agreement of the
    // two first-order Young steppers at refinement 64 carries its
    // empirically calibrated bound (it shrinks linearly with the mesh).
    let fubini = verify::fubini_suite(7, 20, 64, 1e-6, 2.5e-4).unwrap();
    report(
        "4 nonabelian Fubini (alternate route + composition order at 1e-6)",
        fubini.passed(),
        &format!(
            "{}",
            fubini
                .checks
                .iter()
                .map(|c| format!("{} {:.3e}", c.name, c.worst))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        t0,
    );
}

#[test]
fn criterion_05_oracle_equivalence() {
    let t0 = Instant::now();
    // Exact linear-cell route vs the Young route at 256x256. The Young
    // error is first order in the mesh with a data-dependent constant, so
    // the tolerance pins the data regime: connections of norm 1/4 and cell
    // vectors with entries of scale 0.15.
    let mut worst_rel: f64 = 0.0;
    for k in 0..10u64 {
        let mut rng = stream_rng(60, &[k]);
        let conn = sample_restricted(1, 1, &mut rng).rescale_to_norm(0.25);
        let a = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.15);
        let b = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.15);
        let exact = develop_linear_square(&conn, &a, &b, QuadratureOptions::default()).unwrap();
        let grid = GridSurface::linear(&a, &b, 256).unwrap();
        let young = develop_young(&conn, &grid).unwrap();
        worst_rel = worst_rel.max((exact.h.clone() - &young.h).norm() / exact.h.norm());
    }

    // Closed form under the flat-A restriction vs quadrature.
    let mut worst_magnus: f64 = 0.0;
    for k in 0..10u64 {
        let mut rng = stream_rng(61, &[k]);
        let base = DMatrix::from_fn(2, 2, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
        let mut conn = sample_restricted(2, 1, &mut rng);
        for (i, blk) in conn.a_blocks.iter_mut().enumerate() {
            *blk = &base * (0.2 + 0.1 * i as f64);
        }
        let conn = Matrix2Connection::build_semiflat(
            conn.dims,
            conn.d,
            conn.a_blocks,
            conn.b_blocks,
            conn.c_blocks,
            conn.d_blocks,
            conn.e_blocks,
            conn.u_blocks,
        )
        .unwrap()
        .rescale_to_norm(1.0);
        let a = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.6);
        let b = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.6);
        let quad = develop_linear_square(&conn, &a, &b, QuadratureOptions::default()).unwrap();
        let magnus = develop_linear_square_magnus(&conn, &a, &b).unwrap();
        worst_magnus = worst_magnus.max((quad.h - magnus.h).norm());
    }

    let passed = worst_rel <= 1e-4 && worst_magnus <= 1e-8 && t0.elapsed().as_secs() < 120;
    report(
        "5 oracle equivalence (young vs exact rel 1e-4; closed form 1e-8)",
        passed,
        &format!("young rel {worst_rel:.3e}, closed-form {worst_magnus:.3e}"),
        t0,
    );
}

#[test]
fn criterion_06_trivial_module_reduction() {
    let t0 = Instant::now();
    let suite = verify::trivial_module_suite(7, 20, 1e-8).unwrap();
    report(
        "6 trivial-module reduction to boundary development at 1e-8",
        suite.passed(),
        &format!("worst residual {:.3e}", suite_worst(&suite)),
        t0,
    );
}

#[test]
fn criterion_07_fold_and_reflection() {
    let t0 = Instant::now();
    let mut worst_fold: f64 = 0.0;
    let mut worst_reflect: f64 = 0.0;
    for k in 0..5u64 {
        let mut rng = stream_rng(71, &[k]);
        let conn = sample_restricted(1, 1, &mut rng).rescale_to_norm(1.0);
        let grid = GridSurface::from_fn(3, 3, 3, |_, _| {
            DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5)
        })
        .unwrap();

        let fold = grid.concat_h(&grid.reflect_s()).unwrap();
        let n_cells = grid.ns() - 1;
        let mut opts = GridDevelopOptions::default();
        opts.orientation = std::sync::Arc::new(move |i, _| {
            if i >= n_cells {
                CellOrientation::AntiDiagonal
            } else {
                CellOrientation::MainDiagonal
            }
        });
        let dev = develop_grid(&conn, &fold, &opts).unwrap();
        worst_fold = worst_fold.max(dev.square.e.norm());

        let dev = develop_grid(&conn, &grid, &GridDevelopOptions::default()).unwrap();
        let dev_t =
            develop_grid(&conn, &grid.reflect_diagonal(), &GridDevelopOptions::default()).unwrap();
        worst_reflect = worst_reflect
            .max((dev_t.square.e.h.clone() - star_inv(&dev.square.e).unwrap().h).norm());
    }
    let passed = worst_fold <= 1e-6 && worst_reflect <= 1e-6;
    report(
        "7 fold cancellation and diagonal-reflection inverse at 1e-6",
        passed,
        &format!("fold {worst_fold:.3e}, reflection {worst_reflect:.3e}"),
        t0,
    );
}

#[test]
fn criterion_08_separation_demo() {
    let t0 = Instant::now();
    let zero = GridSurface::from_fn(6, 6, 1, |_, _| DVector::zeros(1)).unwrap();
    let bump = GridSurface::from_fn(6, 6, 1, |s, t| {
        DVector::from_vec(vec![
            0.5 * (std::f64::consts::PI * s).sin() * (std::f64::consts::PI * t).sin(),
        ])
    })
    .unwrap();
    let outcome = separation_demo(&zero, &bump, 4, 1e-6).unwrap();
    let separator = outcome.separator.clone();
    let (passed, detail) = match separator {
        Some(sep) => {
            let moment = young_area_moment(&zero, &bump, sep.degree_s, sep.degree_t, 1).unwrap();
            (
                sep.degree_s + sep.degree_t <= 4 && sep.gap > 1e-6 && moment.abs() > 1e-12,
                format!(
                    "separator (a={}, b={}, i={}) gap {:.3e}, young moment {:.3e}",
                    sep.degree_s, sep.degree_t, sep.coordinate, sep.gap, moment
                ),
            )
        }
        None => (false, "no separator found".into()),
    };
    report(
        "8 separation demo finds polynomial connection at degree <= 4",
        passed,
        &detail,
        t0,
    );
}

#[test]
fn criterion_09_fbs_statistics() {
    let t0 = Instant::now();
    let n = 64;
    let samples = 2000;
    let mut all_ok = true;
    let mut detail = String::new();

    for (hi, h) in [0.6, 0.75, 0.9].into_iter().enumerate() {
        // Axis values are exactly zero.
        let g = sample_fbs(h, n, 1, 42).unwrap();
        for i in 0..=n {
            all_ok &= g.value(i, 0).norm() == 0.0 && g.value(0, i).norm() == 0.0;
        }

        // Empirical covariance at ((1/4,1/4),(3/4,3/4)) within 4 standard
        // errors of the product covariance.
        let (i4, i34) = (n / 4, 3 * n / 4);
        let mut prods = Vec::with_capacity(samples);
        for k in 0..samples {
            let mut rng = stream_rng(1000 + hi as u64, &[k as u64]);
            let g = sample_fbs_with(h, n, 1, &mut rng).unwrap();
            prods.push(g.value(i4, i4)[0] * g.value(i34, i34)[0]);
        }
        let mean = prods.iter().sum::<f64>() / samples as f64;
        let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        let expect = fbs_axis_cov(h, 0.25, 0.75).powi(2);
        let cov_ok = (mean - expect).abs() <= 4.0 * se;
        all_ok &= cov_ok;
        detail += &format!(
            "h={h}: cov {mean:.4} vs {expect:.4} (se {se:.4}); ",
        );

        // p-variation estimates are finite and stable under refinement.
        let p = 1.0 / h + 0.1;
        for seed in 0..3u64 {
            let g = sample_fbs(h, n, 1, 500 + seed).unwrap();
            let coarse = pvar_estimate(&subsample_pl(&g, 2).unwrap(), p).unwrap();
            let fine = pvar_estimate(&g, p).unwrap();
            let stable = fine.is_finite() && (fine - coarse).abs() / fine <= 0.2;
            if !stable {
                detail += &format!("h={h} seed {seed} pvar {coarse:.3} -> {fine:.3}; ");
            }
            all_ok &= stable;
        }
    }
    let passed = all_ok && t0.elapsed().as_secs() < 300;
    report("9 fractional-sheet statistics", passed, &detail, t0);
}

#[test]
fn criterion_10_metric_behavior() {
    let t0 = Instant::now();
    let make_ensemble = |h: f64, count: usize, cells: usize, seed: u64, label: &str| {
        let surfaces: Vec<GridSurface> = (0..count)
            .map(|k| {
                let mut rng = stream_rng(seed, &[k as u64]);
                sample_fbs_with(h, cells, 1, &mut rng).unwrap()
            })
            .collect();
        Ensemble::new(surfaces, label).unwrap()
    };

    // Self-distance on shared samples is exactly zero.
    let shared = make_ensemble(0.75, 16, 4, 900, "shared");
    let cfg_small = MetricConfig {
        n_max: 2,
        k_conn: 2,
        k_ell: 2,
        seed: 33,
        variant: DistanceVariant::ExpectationsInside,
        scaling: ConnectionScaling::UnitVariance,
    };
    let self_report = metric_estimate(&shared, &shared, &cfg_small).unwrap();
    let self_zero = self_report.distance == 0.0;

    // Hurst pair beats the 200-permutation null at the 5% level.
    let ens_a = make_ensemble(0.6, 64, 6, 910, "h0.6");
    let ens_b = make_ensemble(0.9, 64, 6, 920, "h0.9");
    let cfg_dn = MetricConfig {
        n_max: 2,
        k_conn: 16,
        k_ell: 32,
        seed: 34,
        variant: DistanceVariant::ExpectationsInside,
        scaling: ConnectionScaling::UnitVariance,
    };
    let dn = dn_estimate(&ens_a, &ens_b, 2, &cfg_dn).unwrap();
    let (observed, p_value) = permutation_test(&ens_a, &ens_b, 2, &cfg_dn, 200).unwrap();
    let dn_ok = p_value <= 0.05;

    // Triangle inequality within Monte-Carlo error on three laws, with the
    // truncation bound reported at four levels.
    let tri_a = make_ensemble(0.6, 24, 4, 930, "tri-a");
    let tri_b = make_ensemble(0.75, 24, 4, 940, "tri-b");
    let tri_c = make_ensemble(0.9, 24, 4, 950, "tri-c");
    let cfg_tri = MetricConfig {
        n_max: 4,
        k_conn: 3,
        k_ell: 3,
        seed: 35,
        variant: DistanceVariant::ExpectationsInside,
        scaling: ConnectionScaling::InverseSqrtDim,
    };
    let dab = metric_estimate(&tri_a, &tri_b, &cfg_tri).unwrap();
    let dbc = metric_estimate(&tri_b, &tri_c, &cfg_tri).unwrap();
    let dac = metric_estimate(&tri_a, &tri_c, &cfg_tri).unwrap();
    let mc_error = |r: &surface_dev::metric::MetricReport| {
        let mut fact = 1.0;
        r.per_level
            .iter()
            .map(|dn| {
                fact *= dn.level as f64;
                dn.std_error / fact
            })
            .sum::<f64>()
    };
    let slack = 2.0 * (mc_error(&dab) + mc_error(&dbc) + mc_error(&dac));
    let triangle_ok = dac.distance <= dab.distance + dbc.distance + slack;
    let bound = truncation_bound(4);
    let bound_ok = (dab.truncation_bound - bound).abs() < 1e-15 && bound < 0.0367;

    let passed =
        self_zero && dn_ok && triangle_ok && bound_ok && t0.elapsed().as_secs() < 900;
    report(
        "10 metric behavior (self-zero, permutation power, triangle, tail bound)",
        passed,
        &format!(
            "self {:.1e}; dn {:.3} obs {observed:.3} p {p_value:.4}; triangle {:.3} <= {:.3} + {:.3} (+{slack:.3}); tail {bound:.4}",
            self_report.distance,
            dn.value,
            dac.distance,
            dab.distance,
            dbc.distance
        ),
        t0,
    );
}
