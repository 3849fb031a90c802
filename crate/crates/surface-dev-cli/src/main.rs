//! Command-line entry point: sample random surfaces, develop them through
//! either route, run the verification suites, compare ensembles and search
//! for separating polynomial connections.
//!
//! Exit codes: 0 success, 1 numeric failure (diagnostic JSON on stderr),
//! 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use surface_dev::connection::Matrix2Connection;
use surface_dev::crossed::delta;
use surface_dev::error::Error;
use surface_dev::metric::{
    metric_estimate, permutation_test, separation_demo, ConnectionScaling, DistanceVariant,
    Ensemble, MetricConfig,
};
use surface_dev::path::develop_pl_pair;
use surface_dev::random::{load_ensemble_dir, load_grid, parametrize, save_fbs_ensemble};
use surface_dev::surface::{develop_grid, GridDevelopOptions};
use surface_dev::verify;
use surface_dev::young::develop_young;

#[derive(Parser)]
#[command(
    name = "surfdev",
    about = "Matrix surface development of sampled 2D surfaces",
    version
)]
struct Cli {
    /// Worker thread cap; defaults to the logical core count. Results are
    /// independent of this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    Exact,
    Young,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Inside,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaling {
    Unit,
    InvSqrtDim,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Algebra,
    Stokes,
    Fubini,
    Functorial,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an ensemble of fractional Brownian sheets into a directory.
    SampleFbs {
        #[arg(long)]
        hurst: f64,
        /// Cells per axis.
        #[arg(long)]
        grid: usize,
        /// Independent components per node.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Number of surfaces.
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Develop one surface with a connection and write the interior blocks,
    /// boundary holonomies and Stokes residual as JSON.
    Develop {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        connection: PathBuf,
        #[arg(long, value_enum, default_value_t = Route::Exact)]
        route: Route,
        #[arg(long)]
        out: PathBuf,
        /// Lift the surface to its parametrized form before developing.
        #[arg(long, default_value_t = false)]
        parametrized: bool,
    },
    /// Run seeded verification suites; nonzero exit on failure.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Estimate the surface-development metric between two ensembles.
    Metric {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long = "mc-conn", default_value_t = 4)]
        mc_conn: usize,
        #[arg(long = "mc-ell", default_value_t = 4)]
        mc_ell: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Variant::Inside)]
        variant: Variant,
        /// Per-entry std of the Gaussian measure on connections.
        #[arg(long, value_enum, default_value_t = Scaling::Unit)]
        scaling: Scaling,
        /// Optional permutation count for a two-sample significance test at
        /// the highest level.
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for a separating polynomial connection between two surfaces
    /// with equal boundaries.
    Separate {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long = "max-degree", default_value_t = 4)]
        max_degree: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Serialize)]
struct DevelopReport {
    route: &'static str,
    dims: (usize, usize, usize),
    interior: Vec<Vec<f64>>,
    boundary_f: Vec<Vec<f64>>,
    boundary_g: Vec<Vec<f64>>,
    stokes_residual: f64,
}

fn matrix_rows(m: &surface_dev::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::SampleFbs {
            hurst,
            grid,
            dim,
            count,
            seed,
            out,
        } => {
            let manifest = save_fbs_ensemble(&out, "fbs", hurst, grid, dim, count, seed)?;
            println!(
                "wrote {} surfaces ({}x{} cells, dim {}) to {}",
                manifest.count,
                grid,
                grid,
                dim,
                out.display()
            );
            Ok(())
        }
        Command::Develop {
            surface,
            connection,
            route,
            out,
            parametrized,
        } => {
            let grid = load_grid(&surface)?;
            let conn = Matrix2Connection::from_json(&std::fs::read_to_string(&connection)?)?;
            let grid = if parametrized { parametrize(&grid) } else { grid };
            if grid.dim() != conn.d {
                return Err(Error::ShapeMismatch {
                    expected: format!("connection over {} coordinates", conn.d),
                    got: format!("surface with {} components", grid.dim()),
                });
            }
            let boundary = develop_pl_pair(&conn, &grid.boundary_loop()?)?;
            let (h, route_name) = match route {
                Route::Exact => (
                    develop_grid(&conn, &grid, &GridDevelopOptions::default())?.square.e,
                    "exact",
                ),
                Route::Young => (develop_young(&conn, &grid)?, "young"),
            };
            let residual = delta(&h)?.distance(&boundary);
            let report = DevelopReport {
                route: route_name,
                dims: (conn.dims.n, conn.dims.m, conn.dims.p),
                interior: matrix_rows(&h.h),
                boundary_f: matrix_rows(&boundary.f),
                boundary_g: matrix_rows(&boundary.g),
                stokes_residual: residual,
            };
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            println!(
                "developed via {route_name}; Stokes residual {residual:.3e}; wrote {}",
                out.display()
            );
            Ok(())
        }
        Command::Verify { suite, seed } => {
            let reports = match suite {
                Suite::Algebra => vec![
                    verify::algebra_suite(seed)?,
                    verify::double_group_suite(seed)?,
                ],
                Suite::Stokes => vec![verify::stokes_suite(seed, Default::default())?],
                Suite::Fubini => vec![verify::fubini_suite(seed, 5, 64, 1e-6, 2.5e-4)?],
                Suite::Functorial => vec![verify::functorial_suite(seed)?],
                Suite::All => verify::run_all(seed)?,
            };
            let mut all_passed = true;
            for r in &reports {
                print!("{}", r.render());
                all_passed &= r.passed();
            }
            if all_passed {
                Ok(())
            } else {
                Err(Error::InvalidArgument("verification failed".into()))
            }
        }
        Command::Metric {
            a,
            b,
            levels,
            mc_conn,
            mc_ell,
            seed,
            variant,
            scaling,
            permutations,
            out,
        } => {
            let (grids_a, man_a) = load_ensemble_dir(&a)?;
            let (grids_b, man_b) = load_ensemble_dir(&b)?;
            let label_a = man_a.map(|m| m.label).unwrap_or_else(|| a.display().to_string());
            let label_b = man_b.map(|m| m.label).unwrap_or_else(|| b.display().to_string());
            let ens_a = Ensemble::new(grids_a, label_a)?;
            let ens_b = Ensemble::new(grids_b, label_b)?;
            let cfg = MetricConfig {
                n_max: levels,
                k_conn: mc_conn,
                k_ell: mc_ell,
                seed,
                variant: match variant {
                    Variant::Inside => DistanceVariant::ExpectationsInside,
                    Variant::Literal => DistanceVariant::PaperLiteral,
                },
                scaling: match scaling {
                    Scaling::Unit => ConnectionScaling::UnitVariance,
                    Scaling::InvSqrtDim => ConnectionScaling::InverseSqrtDim,
                },
            };
            let report = metric_estimate(&ens_a, &ens_b, &cfg)?;
            let mut doc = serde_json::to_value(&report)?;
            if let Some(n_perms) = permutations {
                let (obs, p) = permutation_test(&ens_a, &ens_b, levels, &cfg, n_perms)?;
                doc["permutation_test"] = serde_json::json!({
                    "level": levels,
                    "observed": obs,
                    "p_value": p,
                    "permutations": n_perms,
                });
            }
            std::fs::write(&out, serde_json::to_string_pretty(&doc)?)?;
            println!(
                "d({}, {}) = {:.6} (+ tail bound {:.4}); wrote {}",
                report.label_a,
                report.label_b,
                report.distance,
                report.truncation_bound,
                out.display()
            );
            Ok(())
        }
        Command::Separate {
            x,
            y,
            max_degree,
            tol,
        } => {
            let gx = load_grid(&x)?;
            let gy = load_grid(&y)?;
            let outcome = separation_demo(&gx, &gy, max_degree, tol)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            match outcome.separator {
                Some(_) => Ok(()),
                None => Err(Error::InvalidArgument(format!(
                    "no separator found up to degree {max_degree}; this does not prove equality"
                ))),
            }
        }
    }
}

fn is_usage_error(err: &Error) -> bool {
    matches!(
        err,
        Error::ShapeMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::IndexOutOfRange { .. }
            | Error::Parse(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = if is_usage_error(&err) { 2u8 } else { 1u8 };
            let diag = serde_json::json!({
                "error": err.to_string(),
                "exit_code": code,
            });
            eprintln!("{}", serde_json::to_string_pretty(&diag).unwrap());
            ExitCode::from(code)
        }
    }
}
