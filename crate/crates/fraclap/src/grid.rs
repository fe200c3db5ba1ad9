//! Uniform grids on [-R, R]^n and grid functions extended by zero outside.

use crate::error::{FracError, Result};

/// Uniform grid on [-extent, extent]^n with the origin as a node and an odd
/// node count per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    extent: f64,
    half_count: usize, // nodes per axis = 2*half_count + 1
}

impl Grid {
    pub fn new(n: usize, h: f64, extent: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(FracError::Parameter(format!(
                "grid dimension must be 1 or 2, got {n}"
            )));
        }
        if !(h > 0.0) || !(extent > 0.0) {
            return Err(FracError::Parameter(format!(
                "grid spacing and extent must be positive (h={h}, extent={extent})"
            )));
        }
        let ratio = extent / h;
        let half_count = ratio.round() as usize;
        if half_count == 0 || (ratio - half_count as f64).abs() > 1e-9 * ratio.max(1.0) {
            return Err(FracError::Parameter(format!(
                "extent {extent} must be an integer multiple of spacing {h}"
            )));
        }
        Ok(Grid {
            n,
            h,
            extent,
            half_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Nodes per axis (odd).
    pub fn nodes_per_axis(&self) -> usize {
        2 * self.half_count + 1
    }

    /// Total node count.
    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.n as u32)
    }

    /// Coordinate of the axis index i in 0..nodes_per_axis().
    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - self.half_count as f64) * self.h
    }

    /// Coordinates of a flat node id (row-major for n=2).
    pub fn coord(&self, id: usize) -> Vec<f64> {
        match self.n {
            1 => vec![self.axis_coord(id)],
            2 => {
                let m = self.nodes_per_axis();
                vec![self.axis_coord(id / m), self.axis_coord(id % m)]
            }
            _ => unreachable!(),
        }
    }

    /// Flat id of per-axis indices.
    pub fn flat_id(&self, idx: &[usize]) -> usize {
        match self.n {
            1 => idx[0],
            2 => idx[0] * self.nodes_per_axis() + idx[1],
            _ => unreachable!(),
        }
    }

    /// Exact axis index of a coordinate that lies on the grid, if any.
    pub fn axis_index_of(&self, x: f64) -> Option<usize> {
        let s = x / self.h + self.half_count as f64;
        let i = s.round();
        if (s - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.nodes_per_axis() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Ids of nodes strictly inside (-extent, extent)^n.
    pub fn interior_ids(&self) -> Vec<usize> {
        let m = self.nodes_per_axis();
        let mut out = Vec::new();
        match self.n {
            1 => {
                for i in 1..m - 1 {
                    out.push(i);
                }
            }
            2 => {
                for i in 1..m - 1 {
                    for j in 1..m - 1 {
                        out.push(i * m + j);
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    /// Whether a point lies inside the closed extent box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|c| c.abs() <= self.extent + 1e-14)
    }
}

/// Values of a scalar field on a grid; evaluation outside the stored extent
/// returns exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(FracError::Parameter(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(FracError::Input(format!(
                "non-finite value at node {bad}"
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let len = grid.node_count();
        GridFunction {
            grid,
            values: vec![0.0; len],
        }
    }

    /// Sample a field at the grid nodes.
    pub fn sample(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        for id in 0..grid.node_count() {
            values.push(f(&grid.coord(id)));
        }
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value_at(&self, id: usize) -> f64 {
        self.values[id]
    }

    /// Nodal evaluation extended by zero: points off the stored extent give 0,
    /// points on the grid give the stored value exactly.
    pub fn eval_extended(&self, x: &[f64]) -> f64 {
        if !self.grid.contains(x) {
            return 0.0;
        }
        let mut idx = Vec::with_capacity(self.grid.dim());
        for &c in x {
            match self.grid.axis_index_of(c) {
                Some(i) => idx.push(i),
                None => return self.interp_linear(x),
            }
        }
        self.values[self.grid.flat_id(&idx)]
    }

    /// Piecewise-linear interpolation with the exterior-zero convention.
    pub fn interp_linear(&self, x: &[f64]) -> f64 {
        match self.grid.dim() {
            1 => {
                let s = x[0] / self.grid.h + self.grid.half_count as f64;
                let i0 = s.floor();
                let t = s - i0;
                let a = self.node_or_zero(i0 as i64);
                let b = self.node_or_zero(i0 as i64 + 1);
                a * (1.0 - t) + b * t
            }
            _ => {
                // bilinear
                let m = self.grid.nodes_per_axis() as i64;
                let sx = x[0] / self.grid.h + self.grid.half_count as f64;
                let sy = x[1] / self.grid.h + self.grid.half_count as f64;
                let (ix, iy) = (sx.floor(), sy.floor());
                let (tx, ty) = (sx - ix, sy - iy);
                let at = |i: i64, j: i64| -> f64 {
                    if i < 0 || j < 0 || i >= m || j >= m {
                        0.0
                    } else {
                        self.values[(i * m + j) as usize]
                    }
                };
                let (i, j) = (ix as i64, iy as i64);
                at(i, j) * (1.0 - tx) * (1.0 - ty)
                    + at(i + 1, j) * tx * (1.0 - ty)
                    + at(i, j + 1) * (1.0 - tx) * ty
                    + at(i + 1, j + 1) * tx * ty
            }
        }
    }

    /// Cubic (4-point Lagrange) interpolation, 1D only; exact at nodes and
    /// zero outside the extent.
    pub fn interp_cubic(&self, x: f64) -> Result<f64> {
        if self.grid.dim() != 1 {
            return Err(FracError::Parameter(
                "cubic interpolation implemented for 1D grids only".into(),
            ));
        }
        if x.abs() > self.grid.extent {
            return Ok(0.0);
        }
        let s = x / self.grid.h + self.grid.half_count as f64;
        let near = s.round();
        if (s - near).abs() < 1e-9 {
            return Ok(self.node_or_zero(near as i64));
        }
        let i0 = s.floor() as i64;
        let t = s - i0 as f64;
        let vm1 = self.node_or_zero(i0 - 1);
        let v0 = self.node_or_zero(i0);
        let v1 = self.node_or_zero(i0 + 1);
        let v2 = self.node_or_zero(i0 + 2);
        let lm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let l0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let l1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let l2 = (t + 1.0) * t * (t - 1.0) / 6.0;
        Ok(vm1 * lm1 + v0 * l0 + v1 * l1 + v2 * l2)
    }

    fn node_or_zero(&self, i: i64) -> f64 {
        if i < 0 || i as usize >= self.grid.nodes_per_axis() {
            0.0
        } else {
            debug_assert_eq!(self.grid.dim(), 1);
            self.values[i as usize]
        }
    }

    pub fn max_with_node(&self) -> (f64, usize) {
        let mut best = f64::NEG_INFINITY;
        let mut best_id = 0;
        for (id, &v) in self.values.iter().enumerate() {
            if v > best {
                best = v;
                best_id = id;
            }
        }
        (best, best_id)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
