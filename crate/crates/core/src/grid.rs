//! Uniform rectangular grids, nodal fields and the finite-difference
//! operators shared by the elliptic and parabolic solvers.
//!
//! Nodes are ordered lexicographically with `x` fastest: node `(i, j)` has
//! index `j * nx + i`. A 1D grid is stored with `ny = 1`. Faces connect
//! adjacent nodes; x-face `(i, j)` joins `(i, j)` and `(i + 1, j)`, y-face
//! `(i, j)` joins `(i, j)` and `(i, j + 1)`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Axis {
    #[default]
    X,
    Y,
}

/// Uniform grid on `[0, lx]` or `[0, lx] x [0, ly]` with square cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dim: Dim,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl GridSpec {
    pub fn line(nx: usize, lx: f64) -> Result<Self> {
        if nx < 3 {
            return Err(Error::invalid(format!("nx = {nx}: need at least 3 nodes")));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::invalid(format!("lx = {lx} must be positive")));
        }
        Ok(GridSpec {
            dim: Dim::One,
            nx,
            ny: 1,
            lx,
            ly: 0.0,
        })
    }

    pub fn rect(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::invalid(format!(
                "nx = {nx}, ny = {ny}: need at least 3 nodes per axis"
            )));
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::invalid(format!("edge lengths ({lx}, {ly}) must be positive")));
        }
        let hx = lx / (nx - 1) as f64;
        let hy = ly / (ny - 1) as f64;
        if (hx - hy).abs() > 1e-12 * hx {
            return Err(Error::invalid(format!("non-square cells: hx = {hx}, hy = {hy}")));
        }
        Ok(GridSpec {
            dim: Dim::Two,
            nx,
            ny,
            lx,
            ly,
        })
    }

    /// Unit interval with `nx` nodes.
    pub fn unit_line(nx: usize) -> Result<Self> {
        Self::line(nx, 1.0)
    }

    /// Unit square with `n x n` nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rect(n, n, 1.0, 1.0)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Node count along y; 1 for a 1D grid.
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn h(&self) -> f64 {
        self.lx / (self.nx - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        match self.dim {
            Dim::One => self.lx,
            Dim::Two => self.lx * self.ly,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    /// Physical coordinates of a node; `y` is 0 on a 1D grid.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        let h = self.h();
        let x = if i == self.nx - 1 { self.lx } else { i as f64 * h };
        let y = match self.dim {
            Dim::One => 0.0,
            Dim::Two if j == self.ny - 1 => self.ly,
            Dim::Two => j as f64 * h,
        };
        (x, y)
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = self.ij(node);
        i == 0 || i == self.nx - 1 || (self.dim == Dim::Two && (j == 0 || j == self.ny - 1))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&n| self.is_boundary(n))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&n| !self.is_boundary(n))
    }

    /// Nodal quadrature weight: `h^dim`, halved once per axis on which the node sits at an end.
    pub fn weight(&self, node: usize) -> f64 {
        let (i, j) = self.ij(node);
        let h = self.h();
        let mut w = h;
        if i == 0 || i == self.nx - 1 {
            w *= 0.5;
        }
        if self.dim == Dim::Two {
            w *= h;
            if j == 0 || j == self.ny - 1 {
                w *= 0.5;
            }
        }
        w
    }

    pub fn x_face_count(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    pub fn y_face_count(&self) -> usize {
        match self.dim {
            Dim::One => 0,
            Dim::Two => self.nx * (self.ny - 1),
        }
    }

    /// Neighbours of a node as `(neighbour, axis, face index)`.
    pub fn neighbors(&self, node: usize) -> Neighbors {
        let (i, j) = self.ij(node);
        let mut out = Neighbors::default();
        if i > 0 {
            out.push(node - 1, Axis::X, j * (self.nx - 1) + i - 1);
        }
        if i + 1 < self.nx {
            out.push(node + 1, Axis::X, j * (self.nx - 1) + i);
        }
        if self.dim == Dim::Two {
            if j > 0 {
                out.push(node - self.nx, Axis::Y, (j - 1) * self.nx + i);
            }
            if j + 1 < self.ny {
                out.push(node + self.nx, Axis::Y, j * self.nx + i);
            }
        }
        out
    }

    /// The two nodes joined by a face.
    pub fn face_nodes(&self, axis: Axis, face: usize) -> (usize, usize) {
        match axis {
            Axis::X => {
                let (i, j) = (face % (self.nx - 1), face / (self.nx - 1));
                let a = self.index(i, j);
                (a, a + 1)
            }
            Axis::Y => {
                let a = face;
                (a, a + self.nx)
            }
        }
    }

    /// Quadrature weight of a face in the discrete Dirichlet energy.
    ///
    /// In 2D a face lying on a boundary line parallel to it carries half weight.
    pub fn face_weight(&self, axis: Axis, face: usize) -> f64 {
        let h = self.h();
        match self.dim {
            Dim::One => h,
            Dim::Two => {
                let (a, _) = self.face_nodes(axis, face);
                let (i, j) = self.ij(a);
                let on_edge = match axis {
                    Axis::X => j == 0 || j == self.ny - 1,
                    Axis::Y => i == 0 || i == self.nx - 1,
                };
                if on_edge {
                    0.5 * h * h
                } else {
                    h * h
                }
            }
        }
    }

    pub(crate) fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{what}: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Up to four neighbours of a node, without allocation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neighbors {
    items: [(usize, Axis, usize); 4],
    len: usize,
}

impl Neighbors {
    fn push(&mut self, node: usize, axis: Axis, face: usize) {
        self.items[self.len] = (node, axis, face);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Axis, usize)> + '_ {
        self.items[..self.len].iter().copied()
    }
}

/// Nodal scalar values on a grid. Every value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value {} at node {k}", values[k])));
        }
        Ok(Field { grid, values })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Field { grid, values }
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Result<Self> {
        Field::new(grid.clone(), vec![value; grid.node_count()])
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Field::from_parts(grid.clone(), vec![0.0; grid.node_count()])
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.node_count())
            .map(|n| {
                let (x, y) = grid.coords(n);
                f(x, y)
            })
            .collect();
        Field::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max of `|v|` over boundary nodes.
    pub fn boundary_max_abs(&self) -> f64 {
        self.grid.boundary_nodes().fold(0.0, |m, n| m.max(self.values[n].abs()))
    }

    pub fn boundary_range(&self) -> (f64, f64) {
        self.grid
            .boundary_nodes()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
                (lo.min(self.values[n]), hi.max(self.values[n]))
            })
    }

    /// `max |a - b|` over all nodes.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid, "max_abs_diff")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Applies `f` nodewise; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Copy of `self` with boundary node values taken from `bc`.
    pub fn with_boundary_from(&self, bc: &Field) -> Result<Field> {
        self.grid.check_same(&bc.grid, "with_boundary_from")?;
        let mut values = self.values.clone();
        for n in self.grid.boundary_nodes() {
            values[n] = bc.values[n];
        }
        Ok(Field::from_parts(self.grid.clone(), values))
    }

    /// Nodal quadrature of the field over the domain.
    pub fn integrate(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| v * self.grid.weight(n))
            .sum()
    }

    /// CSV rendering: header `x,value` (1D) or `x,y,value` (2D), one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 48);
        match self.grid.dim {
            Dim::One => out.push_str("x,value\n"),
            Dim::Two => out.push_str("x,y,value\n"),
        }
        for (n, v) in self.values.iter().enumerate() {
            let (x, y) = self.grid.coords(n);
            match self.grid.dim {
                Dim::One => writeln!(out, "{x},{v}"),
                Dim::Two => writeln!(out, "{x},{y},{v}"),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// One non-negative coefficient per face; zero marks a degenerate face.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceCoeffs {
    grid: GridSpec,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceCoeffs {
    pub fn new(grid: GridSpec, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.x_face_count() || y.len() != grid.y_face_count() {
            return Err(Error::GridMismatch(format!(
                "face counts ({}, {}) vs expected ({}, {})",
                x.len(),
                y.len(),
                grid.x_face_count(),
                grid.y_face_count()
            )));
        }
        if x.iter().chain(&y).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("face coefficients must be finite and >= 0"));
        }
        Ok(FaceCoeffs { grid, x, y })
    }

    pub fn uniform(grid: &GridSpec, value: f64) -> Result<Self> {
        FaceCoeffs::new(
            grid.clone(),
            vec![value; grid.x_face_count()],
            vec![value; grid.y_face_count()],
        )
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn get(&self, axis: Axis, face: usize) -> f64 {
        match axis {
            Axis::X => self.x[face],
            Axis::Y => self.y[face],
        }
    }

    pub fn x_faces(&self) -> &[f64] {
        &self.x
    }

    pub fn y_faces(&self) -> &[f64] {
        &self.y
    }

    /// Iterates `(axis, face index, coefficient)` over every face.
    pub fn iter(&self) -> impl Iterator<Item = (Axis, usize, f64)> + '_ {
        self.x
            .iter()
            .enumerate()
            .map(|(k, &c)| (Axis::X, k, c))
            .chain(self.y.iter().enumerate().map(|(k, &c)| (Axis::Y, k, c)))
    }

    /// Multiplies every coefficient by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        FaceCoeffs::new(
            self.grid.clone(),
            self.x.iter().map(|c| c * lambda).collect(),
            self.y.iter().map(|c| c * lambda).collect(),
        )
    }
}

/// Five-point (3-point in 1D) Laplacian. Boundary rows return `bc`;
/// interior stencils read boundary neighbours from `bc`.
pub fn laplacian_apply(f: &Field, bc: &Field) -> Result<Field> {
    let grid = &f.grid;
    grid.check_same(&bc.grid, "laplacian_apply")?;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; grid.node_count()];
    for (n, slot) in out.iter_mut().enumerate() {
        if grid.is_boundary(n) {
            *slot = bc.values[n];
            continue;
        }
        let centre = f.values[n];
        let mut acc = 0.0;
        for (m, _, _) in grid.neighbors(n).iter() {
            let v = if grid.is_boundary(m) { bc.values[m] } else { f.values[m] };
            acc += v - centre;
        }
        *slot = acc * inv_h2;
    }
    Field::new(grid.clone(), out)
}

/// Squared gradient magnitude at every node: per axis, the mean of the
/// squared one-sided differences available at that node. Exact for affine data.
pub fn grad_sq(f: &Field, bc: &Field) -> Result<Field> {
    let g = f.with_boundary_from(bc)?;
    Ok(grad_sq_raw(&g))
}

/// `grad_sq` on a field whose boundary values are already in place.
pub(crate) fn grad_sq_raw(g: &Field) -> Field {
    let grid = &g.grid;
    let h = grid.h();
    let vals = &g.values;
    let mut out = vec![0.0; grid.node_count()];
    for (n, slot) in out.iter_mut().enumerate() {
        let mut sum_x = 0.0;
        let mut cnt_x = 0u32;
        let mut sum_y = 0.0;
        let mut cnt_y = 0u32;
        for (m, axis, _) in grid.neighbors(n).iter() {
            let d = (vals[m] - vals[n]) / h;
            match axis {
                Axis::X => {
                    sum_x += d * d;
                    cnt_x += 1;
                }
                Axis::Y => {
                    sum_y += d * d;
                    cnt_y += 1;
                }
            }
        }
        let mut s = sum_x / f64::from(cnt_x.max(1));
        if cnt_y > 0 {
            s += sum_y / f64::from(cnt_y);
        }
        *slot = s;
    }
    Field::from_parts(grid.clone(), out)
}

/// Harmonic mean `2ab/(a+b)` of adjacent nodal values on every face (0 when `a + b = 0`).
pub fn sigma_faces(s: &Field) -> Result<FaceCoeffs> {
    if let Some(k) = s.values.iter().position(|&v| v < 0.0) {
        return Err(Error::invalid(format!(
            "negative conductivity {} at node {k}",
            s.values[k]
        )));
    }
    let grid = &s.grid;
    let mean = |a: f64, b: f64| {
        let sum = a + b;
        if sum == 0.0 {
            0.0
        } else {
            2.0 * a * (b / sum)
        }
    };
    let x = (0..grid.x_face_count())
        .map(|k| {
            let (a, b) = grid.face_nodes(Axis::X, k);
            mean(s.values[a], s.values[b])
        })
        .collect();
    let y = (0..grid.y_face_count())
        .map(|k| {
            let (a, b) = grid.face_nodes(Axis::Y, k);
            mean(s.values[a], s.values[b])
        })
        .collect();
    FaceCoeffs::new(grid.clone(), x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(GridSpec::line(2, 1.0).is_err());
        assert!(GridSpec::line(5, 0.0).is_err());
        assert!(GridSpec::rect(5, 9, 1.0, 1.0).is_err());
        assert!(GridSpec::rect(5, 9, 1.0, 2.0).is_ok());
    }

    #[test]
    fn weights_sum_to_volume() {
        let g = GridSpec::rect(7, 4, 2.0, 1.0).unwrap();
        let total: f64 = (0..g.node_count()).map(|n| g.weight(n)).sum();
        assert!(close(total, 2.0, 1e-14));
        let g = GridSpec::line(11, 3.0).unwrap();
        let total: f64 = (0..g.node_count()).map(|n| g.weight(n)).sum();
        assert!(close(total, 3.0, 1e-14));
    }

    #[test]
    fn laplacian_quadratic_is_two() {
        let g = GridSpec::unit_line(9).unwrap();
        let f = Field::from_fn(&g, |x, _| x * x).unwrap();
        let lap = laplacian_apply(&f, &f).unwrap();
        for n in g.interior_nodes() {
            assert!(close(lap.values()[n], 2.0, 1e-10), "{}", lap.values()[n]);
        }
        assert_eq!(lap.values()[8], 1.0);
    }

    #[test]
    fn laplacian_constant_is_zero() {
        let g = GridSpec::unit_square(6).unwrap();
        let f = Field::constant(&g, 3.5).unwrap();
        let lap = laplacian_apply(&f, &f).unwrap();
        for n in g.interior_nodes() {
            assert_eq!(lap.values()[n], 0.0);
        }
    }

    #[test]
    fn laplacian_spike_hand_values() {
        let g = GridSpec::unit_line(5).unwrap();
        let f = Field::new(g.clone(), vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let bc = Field::zeros(&g);
        let lap = laplacian_apply(&f, &bc).unwrap();
        assert_eq!(&lap.values()[1..4], &[16.0, -32.0, 16.0]);
    }

    #[test]
    fn laplacian_grid_mismatch() {
        let f = Field::zeros(&GridSpec::unit_line(5).unwrap());
        let bc = Field::zeros(&GridSpec::unit_line(6).unwrap());
        assert!(matches!(laplacian_apply(&f, &bc), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn grad_sq_affine_exact() {
        let g = GridSpec::unit_line(11).unwrap();
        let f = Field::from_fn(&g, |x, _| x).unwrap();
        for v in grad_sq(&f, &f).unwrap().values() {
            assert!(close(*v, 1.0, 1e-12));
        }
        let g = GridSpec::unit_square(9).unwrap();
        let f = Field::from_fn(&g, |x, y| x + 2.0 * y).unwrap();
        for v in grad_sq(&f, &f).unwrap().values() {
            assert!(close(*v, 5.0, 1e-12));
        }
        let z = Field::zeros(&g);
        assert!(grad_sq(&z, &z).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn harmonic_faces() {
        let g = GridSpec::unit_line(4).unwrap();
        let s = Field::new(g.clone(), vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        let faces = sigma_faces(&s).unwrap();
        let want = [1.5, 2.4, 0.0];
        for (got, w) in faces.x_faces().iter().zip(want) {
            assert!((got - w).abs() <= 1e-15 * w);
        }
        let ones = sigma_faces(&Field::constant(&g, 1.0).unwrap()).unwrap();
        assert!(ones.x_faces().iter().all(|&c| c == 1.0));
        let neg = Field::new(g, vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        assert!(sigma_faces(&neg).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = GridSpec::unit_line(3).unwrap();
        let f = Field::new(g, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(f.to_csv(), "x,value\n0,0\n0.5,0.5\n1,1\n");
        let g = GridSpec::unit_square(3).unwrap();
        let f = Field::zeros(&g);
        assert!(f.to_csv().starts_with("x,y,value\n0,0,0\n0.5,0,0\n"));
    }

    fn arb_field_2d() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0..10.0f64, 36),
            prop::collection::vec(-10.0..10.0f64, 36),
        )
    }

    proptest! {
        #[test]
        fn laplacian_is_linear((a, b) in arb_field_2d(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
            let g = GridSpec::unit_square(6).unwrap();
            let fa = Field::new(g.clone(), a.clone()).unwrap();
            let fb = Field::new(g.clone(), b.clone()).unwrap();
            let comb = Field::new(g.clone(), a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect()).unwrap();
            let la = laplacian_apply(&fa, &fa).unwrap();
            let lb = laplacian_apply(&fb, &fb).unwrap();
            let lc = laplacian_apply(&comb, &comb).unwrap();
            for n in 0..g.node_count() {
                let expect = alpha * la.values()[n] + beta * lb.values()[n];
                prop_assert!((lc.values()[n] - expect).abs() <= 1e-9 * (1.0 + expect.abs()) * 100.0);
            }
        }

        #[test]
        fn laplacian_is_symmetric((a, b) in arb_field_2d()) {
            let g = GridSpec::unit_square(6).unwrap();
            let zero_bdy = |v: &Vec<f64>| {
                let mut v = v.clone();
                for n in g.boundary_nodes() { v[n] = 0.0; }
                Field::new(g.clone(), v).unwrap()
            };
            let (fa, fb) = (zero_bdy(&a), zero_bdy(&b));
            let z = Field::zeros(&g);
            let la = laplacian_apply(&fa, &z).unwrap();
            let lb = laplacian_apply(&fb, &z).unwrap();
            let dot = |p: &Field, q: &Field| -> f64 {
                g.interior_nodes().map(|n| p.values()[n] * q.values()[n]).sum()
            };
            let (l, r) = (dot(&la, &fb), dot(&fa, &lb));
            prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs()));
        }

        #[test]
        fn grad_sq_nonnegative((a, _) in arb_field_2d()) {
            let g = GridSpec::unit_square(6).unwrap();
            let f = Field::new(g, a).unwrap();
            prop_assert!(grad_sq(&f, &f).unwrap().values().iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn harmonic_face_bounded_by_max(v in prop::collection::vec(0.0..50.0f64, 36)) {
            let g = GridSpec::unit_square(6).unwrap();
            let s = Field::new(g.clone(), v.clone()).unwrap();
            let faces = sigma_faces(&s).unwrap();
            for (axis, k, c) in faces.iter() {
                let (a, b) = g.face_nodes(axis, k);
                prop_assert!(c <= v[a].max(v[b]) * (1.0 + 1e-15));
                prop_assert!(c >= 0.0);
            }
        }
    }
}
