//! Fractional Brownian sheet sampling, piecewise-linear approximation and
//! subsampling, the parametrization lift, and the grid/ensemble file
//! formats.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSurface;

/// Product-form fractional Brownian sheet covariance factor
/// `r_h(u, v) = (u^{2h} + v^{2h} - |u - v|^{2h}) / 2`.
pub fn fbs_axis_cov(h: f64, u: f64, v: f64) -> f64 {
    0.5 * (u.powf(2.0 * h) + v.powf(2.0 * h) - (u - v).abs().powf(2.0 * h))
}

fn chol_cache() -> &'static Mutex<HashMap<(u64, usize), Arc<DMatrix<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<DMatrix<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cholesky factor of the axis covariance on the interior knots of a
/// uniform mesh with `n` cells, cached per (h, n). Retries with escalating
/// diagonal jitter if the matrix is not numerically positive definite.
fn axis_cholesky(h: f64, n: usize) -> Result<Arc<DMatrix<f64>>> {
    let key = (h.to_bits(), n);
    if let Some(hit) = chol_cache().lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let knots: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| fbs_axis_cov(h, knots[i], knots[j]));
    let mut jitter = 0.0;
    for _ in 0..4 {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            let l = Arc::new(chol.l());
            chol_cache().lock().unwrap().insert(key, l.clone());
            return Ok(l);
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 100.0 };
    }
    Err(Error::CholeskyFailure { h })
}

/// Samples a fractional Brownian sheet exactly on a uniform grid with `n`
/// cells per axis and `d` independent components. The grid vanishes on both
/// axes and the nodes carry the exact Gaussian law of the product
/// covariance `r_h(s1, s2) r_h(t1, t2)`. Deterministic per seed.
pub fn sample_fbs(h: f64, n: usize, d: usize, seed: u64) -> Result<GridSurface> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_fbs_with(h, n, d, &mut rng)
}

pub fn sample_fbs_with<R: Rng>(h: f64, n: usize, d: usize, rng: &mut R) -> Result<GridSurface> {
    if !(0.0 < h && h < 1.0) {
        return Err(Error::InvalidArgument(format!("hurst must be in (0,1), got {h}")));
    }
    if n < 1 || d < 1 {
        return Err(Error::InvalidArgument("need n >= 1 and d >= 1".into()));
    }
    let l = axis_cholesky(h, n)?;
    // Per component: V = L G L^T has the Kronecker product covariance.
    let mut comps = Vec::with_capacity(d);
    for _ in 0..d {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        comps.push(&*l * g * l.transpose());
    }
    let knots: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let mut values = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        for j in 0..=n {
            let mut v = DVector::zeros(d);
            if i > 0 && j > 0 {
                for (k, comp) in comps.iter().enumerate() {
                    v[k] = comp[(i - 1, j - 1)];
                }
            }
            values.push(v);
        }
    }
    GridSurface::new(knots.clone(), knots, values)
}

/// Keeps every `factor`-th knot along both axes. The piecewise-linear
/// interpolant of the result agrees with the original at the kept nodes.
pub fn subsample_pl(grid: &GridSurface, factor: usize) -> Result<GridSurface> {
    if factor == 0 {
        return Err(Error::InvalidArgument("factor must be positive".into()));
    }
    let n = grid.ns() - 1;
    let m = grid.nt() - 1;
    if n % factor != 0 || m % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "factor {factor} does not divide cell counts {n}x{m}"
        )));
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let s_knots: Vec<f64> = grid.s_knots.iter().copied().step_by(factor).collect();
    let t_knots: Vec<f64> = grid.t_knots.iter().copied().step_by(factor).collect();
    let mut values = Vec::with_capacity(s_knots.len() * t_knots.len());
    for i in (0..=n).step_by(factor) {
        for j in (0..=m).step_by(factor) {
            values.push(grid.value(i, j).clone());
        }
    }
    GridSurface::new(s_knots, t_knots, values)
}

/// Resamples the piecewise-linear interpolant on a mesh refined by the
/// given factor per cell, evaluating the diagonal-split interpolant at the
/// new nodes. The refined grid represents the same surface.
pub fn refine_pl(grid: &GridSurface, factor: usize) -> Result<GridSurface> {
    if factor == 0 {
        return Err(Error::InvalidArgument("factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let n = grid.ns() - 1;
    let m = grid.nt() - 1;
    let mut s_knots = Vec::with_capacity(n * factor + 1);
    for i in 0..n {
        for k in 0..factor {
            let lam = k as f64 / factor as f64;
            s_knots.push(grid.s_knots[i] * (1.0 - lam) + grid.s_knots[i + 1] * lam);
        }
    }
    s_knots.push(1.0);
    let mut t_knots = Vec::with_capacity(m * factor + 1);
    for j in 0..m {
        for k in 0..factor {
            let lam = k as f64 / factor as f64;
            t_knots.push(grid.t_knots[j] * (1.0 - lam) + grid.t_knots[j + 1] * lam);
        }
    }
    t_knots.push(1.0);

    let eval_cell = |ci: usize, cj: usize, sig: f64, tau: f64| -> DVector<f64> {
        let p00 = grid.value(ci, cj);
        let p10 = grid.value(ci + 1, cj);
        let p01 = grid.value(ci, cj + 1);
        let p11 = grid.value(ci + 1, cj + 1);
        if sig <= tau {
            p00 + (p11 - p01) * sig + (p01 - p00) * tau
        } else {
            p00 + (p10 - p00) * sig + (p11 - p10) * tau
        }
    };

    let ns_new = s_knots.len();
    let nt_new = t_knots.len();
    let mut values = Vec::with_capacity(ns_new * nt_new);
    for (ii, _) in s_knots.iter().enumerate() {
        for (jj, _) in t_knots.iter().enumerate() {
            let (ci, sig) = if ii == ns_new - 1 {
                (n - 1, 1.0)
            } else {
                (ii / factor, (ii % factor) as f64 / factor as f64)
            };
            let (cj, tau) = if jj == nt_new - 1 {
                (m - 1, 1.0)
            } else {
                (jj / factor, (jj % factor) as f64 / factor as f64)
            };
            values.push(eval_cell(ci, cj, sig, tau));
        }
    }
    GridSurface::new(s_knots, t_knots, values)
}

/// The parametrization lift: prepends the parameters to every node value,
/// turning a d-dimensional grid into a (d+2)-dimensional one.
pub fn parametrize(grid: &GridSurface) -> GridSurface {
    let d = grid.dim();
    let mut values = Vec::with_capacity(grid.ns() * grid.nt());
    for i in 0..grid.ns() {
        for j in 0..grid.nt() {
            let mut v = DVector::zeros(d + 2);
            v[0] = grid.s_knots[i];
            v[1] = grid.t_knots[j];
            for k in 0..d {
                v[k + 2] = grid.value(i, j)[k];
            }
            values.push(v);
        }
    }
    GridSurface::new(grid.s_knots.clone(), grid.t_knots.clone(), values)
        .expect("lift preserves grid validity")
}

// ---------------------------------------------------------------------------
// Grid and ensemble files
// ---------------------------------------------------------------------------

/// Writes a grid as text: a `rows,cols,dim` header, optional
/// `knots_s,...` / `knots_t,...` lines when the mesh is not uniform, then
/// one line per node (row-major), each carrying the node's components.
pub fn write_grid<W: Write>(grid: &GridSurface, out: &mut W) -> Result<()> {
    writeln!(out, "{},{},{}", grid.ns(), grid.nt(), grid.dim())?;
    let uniform = |knots: &[f64]| {
        let n = knots.len() - 1;
        knots
            .iter()
            .enumerate()
            .all(|(i, &k)| (k - i as f64 / n as f64).abs() < 1e-15)
    };
    if !uniform(&grid.s_knots) {
        let rendered: Vec<String> = grid.s_knots.iter().map(|k| format!("{k:.17e}")).collect();
        writeln!(out, "knots_s,{}", rendered.join(","))?;
    }
    if !uniform(&grid.t_knots) {
        let rendered: Vec<String> = grid.t_knots.iter().map(|k| format!("{k:.17e}")).collect();
        writeln!(out, "knots_t,{}", rendered.join(","))?;
    }
    for i in 0..grid.ns() {
        for j in 0..grid.nt() {
            let rendered: Vec<String> =
                grid.value(i, j).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", rendered.join(","))?;
        }
    }
    Ok(())
}

pub fn read_grid<R: BufRead>(input: R) -> Result<GridSurface> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty grid file".into()))??;
    let parts: Vec<usize> = header
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        return Err(Error::Parse("header must be rows,cols,dim".into()));
    }
    let (rows, cols, dim) = (parts[0], parts[1], parts[2]);
    let mut s_knots: Vec<f64> = (0..rows).map(|i| i as f64 / (rows - 1) as f64).collect();
    let mut t_knots: Vec<f64> = (0..cols).map(|j| j as f64 / (cols - 1) as f64).collect();
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("knots_s,") {
            s_knots = parse_floats(rest)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("knots_t,") {
            t_knots = parse_floats(rest)?;
            continue;
        }
        let comps = parse_floats(line)?;
        if comps.len() != dim {
            return Err(Error::Parse(format!(
                "node line has {} components, expected {dim}",
                comps.len()
            )));
        }
        values.push(DVector::from_vec(comps));
    }
    GridSurface::new(s_knots, t_knots, values)
}

fn parse_floats(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

pub fn save_grid(grid: &GridSurface, path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_grid(grid, &mut file)
}

pub fn load_grid(path: &Path) -> Result<GridSurface> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_grid(file)
}

/// Ensemble metadata stored next to the grid files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub label: String,
    pub seed: u64,
    pub hurst: f64,
    pub grid: usize,
    pub dim: usize,
    pub count: usize,
    pub files: Vec<String>,
}

/// Samples `count` sheets with split seeds and writes them plus a manifest
/// into `dir`.
pub fn save_fbs_ensemble(
    dir: &Path,
    label: &str,
    h: f64,
    n: usize,
    d: usize,
    count: usize,
    seed: u64,
) -> Result<EnsembleManifest> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let grid = sample_fbs_with(h, n, d, &mut rng)?;
        let name = format!("surface_{k:04}.csv");
        save_grid(&grid, &dir.join(&name))?;
        files.push(name);
    }
    let manifest = EnsembleManifest {
        label: label.to_string(),
        seed,
        hurst: h,
        grid: n,
        dim: d,
        count,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(manifest)
}

pub fn load_ensemble_dir(dir: &Path) -> Result<(Vec<GridSurface>, Option<EnsembleManifest>)> {
    let manifest_path = dir.join("manifest.json");
    if manifest_path.exists() {
        let manifest: EnsembleManifest =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
        let grids = manifest
            .files
            .iter()
            .map(|f| load_grid(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        return Ok((grids, Some(manifest)));
    }
    // Fall back to all .csv files in sorted order.
    let mut names: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no grids found in {}",
            dir.display()
        )));
    }
    let grids = names
        .iter()
        .map(|p| load_grid(p))
        .collect::<Result<Vec<_>>>()?;
    Ok((grids, None))
}
