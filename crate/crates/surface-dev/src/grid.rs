//! Sampled surfaces on rectangular meshes: the grid type, tail paths and
//! boundary loops through the piecewise-linear interpolant.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::path::PLPath;

/// A surface sampled on a rectangular mesh. The piecewise-linear
/// interpolant (triangulated along cell diagonals) is implied everywhere a
/// continuous surface is needed.
#[derive(Debug, Clone)]
pub struct GridSurface {
    /// Strictly increasing knots in [0, 1] for the first parameter, with
    /// endpoints 0 and 1.
    pub s_knots: Vec<f64>,
    /// Knots for the second parameter.
    pub t_knots: Vec<f64>,
    /// Row-major node values: index `i * t_knots.len() + j`.
    values: Vec<DVector<f64>>,
    dim: usize,
}

fn check_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
        return Err(Error::InvalidArgument(
            "knots must start at 0, end at 1 and contain at least two points".into(),
        ));
    }
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("knots must be strictly increasing".into()));
    }
    Ok(())
}

impl GridSurface {
    pub fn new(s_knots: Vec<f64>, t_knots: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        check_knots(&s_knots)?;
        check_knots(&t_knots)?;
        if values.len() != s_knots.len() * t_knots.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} node values", s_knots.len() * t_knots.len()),
                got: format!("{}", values.len()),
            });
        }
        let dim = values[0].len();
        for v in &values {
            if v.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("nodes of dimension {dim}"),
                    got: format!("{}", v.len()),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite node value".into()));
            }
        }
        Ok(GridSurface { s_knots, t_knots, values, dim })
    }

    /// Uniform knots with the given number of cells per axis.
    pub fn from_fn<F>(n_cells: usize, m_cells: usize, dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> DVector<f64>,
    {
        let s_knots: Vec<f64> = (0..=n_cells).map(|i| i as f64 / n_cells as f64).collect();
        let t_knots: Vec<f64> = (0..=m_cells).map(|j| j as f64 / m_cells as f64).collect();
        let mut values = Vec::with_capacity(s_knots.len() * t_knots.len());
        for &s in &s_knots {
            for &t in &t_knots {
                values.push(f(s, t));
            }
        }
        let g = GridSurface::new(s_knots, t_knots, values)?;
        if g.dim() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("dimension {dim}"),
                got: format!("{}", g.dim()),
            });
        }
        Ok(g)
    }

    /// The linear surface `X = a s + b t` sampled on a uniform mesh.
    pub fn linear(a: &DVector<f64>, b: &DVector<f64>, cells: usize) -> Result<Self> {
        GridSurface::from_fn(cells, cells, a.len(), |s, t| a * s + b * t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes along the first parameter.
    pub fn ns(&self) -> usize {
        self.s_knots.len()
    }

    pub fn nt(&self) -> usize {
        self.t_knots.len()
    }

    pub fn value(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.values[i * self.t_knots.len() + j]
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.ns() || j >= self.nt() {
            return Err(Error::IndexOutOfRange {
                context: format!("node ({i},{j}) on a {}x{} grid", self.ns(), self.nt()),
            });
        }
        Ok(())
    }

    /// The tail path to node (i, j): the image of
    /// (0,0) -> (0, t_j) -> (s_i, t_j) through the grid, i.e. the left
    /// column up to row j followed by row j up to column i.
    pub fn tail_path(&self, i: usize, j: usize) -> Result<PLPath> {
        self.check_index(i, j)?;
        let mut vertices = Vec::with_capacity(i + j + 1);
        for jj in 0..=j {
            vertices.push(self.value(0, jj).clone());
        }
        for ii in 1..=i {
            vertices.push(self.value(ii, j).clone());
        }
        PLPath::new(vertices)
    }

    /// The boundary loop of the rectangle [0, s_i] x [0, t_j]: bottom row,
    /// right column, reversed top row, reversed left column.
    pub fn rectangle_loop(&self, i: usize, j: usize) -> Result<PLPath> {
        self.check_index(i, j)?;
        let mut vertices = Vec::with_capacity(2 * (i + j) + 1);
        for ii in 0..=i {
            vertices.push(self.value(ii, 0).clone());
        }
        for jj in 1..=j {
            vertices.push(self.value(i, jj).clone());
        }
        for ii in (0..i).rev() {
            vertices.push(self.value(ii, j).clone());
        }
        for jj in (0..j).rev() {
            vertices.push(self.value(0, jj).clone());
        }
        PLPath::new(vertices)
    }

    /// The full boundary loop of the surface.
    pub fn boundary_loop(&self) -> Result<PLPath> {
        self.rectangle_loop(self.ns() - 1, self.nt() - 1)
    }

    /// Transposes the parameters: the diagonal reflection of the surface.
    pub fn reflect_diagonal(&self) -> GridSurface {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.nt() {
            for i in 0..self.ns() {
                values.push(self.value(i, j).clone());
            }
        }
        GridSurface {
            s_knots: self.t_knots.clone(),
            t_knots: self.s_knots.clone(),
            values,
            dim: self.dim,
        }
    }

    /// Reflects the first parameter: `X^{-h}_{s,t} = X_{1-s,t}`.
    pub fn reflect_s(&self) -> GridSurface {
        let mut values = Vec::with_capacity(self.values.len());
        for i in (0..self.ns()).rev() {
            for j in 0..self.nt() {
                values.push(self.value(i, j).clone());
            }
        }
        let mut s_knots: Vec<f64> = self.s_knots.iter().map(|s| 1.0 - s).collect();
        s_knots.reverse();
        GridSurface {
            s_knots,
            t_knots: self.t_knots.clone(),
            values,
            dim: self.dim,
        }
    }

    /// Glues another grid to the right of this one (horizontal
    /// concatenation), compressing both parameter ranges into [0, 1]. The
    /// shared edge must match exactly.
    pub fn concat_h(&self, other: &GridSurface) -> Result<GridSurface> {
        if self.nt() != other.nt() || self.dim != other.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows of dimension {}", self.nt(), self.dim),
                got: format!("{} rows of dimension {}", other.nt(), other.dim),
            });
        }
        for j in 0..self.nt() {
            if (self.value(self.ns() - 1, j) - other.value(0, j)).norm() > 0.0 {
                return Err(Error::InvalidArgument(
                    "shared edge mismatch in horizontal concatenation".into(),
                ));
            }
        }
        let mut s_knots: Vec<f64> = self.s_knots.iter().map(|s| s / 2.0).collect();
        s_knots.extend(other.s_knots.iter().skip(1).map(|s| 0.5 + s / 2.0));
        let mut values = self.values.clone();
        for i in 1..other.ns() {
            for j in 0..other.nt() {
                values.push(other.value(i, j).clone());
            }
        }
        GridSurface::new(s_knots, self.t_knots.clone(), values)
    }
}
