//! Variable-coefficient Dirichlet problem `div(sigma grad phi) = 0` on the
//! grid, its sparse symmetric system, a Jacobi-preconditioned conjugate
//! gradient solver and the Joule heating functionals.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{grad_sq, FaceCoeffs, Field, GridSpec};

/// Faces whose adjacent coefficients sum below this are treated as absent.
pub const DEGENERATE_THRESHOLD: f64 = 1e-300;

/// Largest system handed to the dense fallback.
pub const DENSE_FALLBACK_MAX: usize = 400;

/// Compressed-row sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; entries within a row are sorted by column.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n())
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            for (c, v) in self.row(i) {
                row[c] += v;
            }
        }
        a
    }

    /// Exact pattern-and-value symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Positive diagonal where the row has any coupling, nonpositive
    /// off-diagonals, weak diagonal dominance.
    pub fn has_m_matrix_structure(&self) -> bool {
        (0..self.n).all(|i| {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    diag = v;
                } else if v > 0.0 {
                    return false;
                } else {
                    off -= v;
                }
            }
            diag > 0.0 && diag * (1.0 + 1e-12) >= off
        })
    }
}

/// Sparse SPD system over the unknown (interior) nodes of a grid.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub(crate) matrix: CsrMatrix,
    pub(crate) rhs: Vec<f64>,
    /// Node index of each unknown, lexicographic.
    pub(crate) unknowns: Vec<usize>,
    /// Boundary values reattached to the solution.
    pub(crate) boundary: Field,
    pub(crate) degenerate: Vec<usize>,
}

impl LinearSystem {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn grid(&self) -> &GridSpec {
        self.boundary.grid()
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    /// Node indices whose rows were regularized to identity.
    pub fn degenerate_nodes(&self) -> &[usize] {
        &self.degenerate
    }

    /// Scatters unknown values into a full field with boundary values attached.
    pub fn to_field(&self, x: &[f64]) -> Result<Field> {
        let mut values = self.boundary.values().to_vec();
        for (k, &node) in self.unknowns.iter().enumerate() {
            values[node] = x[k];
        }
        Field::new(self.grid().clone(), values)
    }

    /// Gathers the unknowns of a full field.
    pub fn gather(&self, f: &Field) -> Vec<f64> {
        self.unknowns.iter().map(|&n| f.values()[n]).collect()
    }

    /// `||A x - b|| / ||b||` for the interior part of `f` (absolute when `b = 0`).
    pub fn relative_residual(&self, f: &Field) -> f64 {
        let x = self.gather(f);
        let mut ax = vec![0.0; x.len()];
        self.matrix.matvec(&x, &mut ax);
        let r = norm(&ax.iter().zip(&self.rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
        let b = norm(&self.rhs);
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }

    /// Matrix-Market coordinate dump (1-based indices), rhs appended as comments.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.n(), self.n(), self.matrix.nnz());
        for i in 0..self.n() {
            for (j, v) in self.matrix.row(i) {
                let _ = writeln!(out, "{} {} {v:e}", i + 1, j + 1);
            }
        }
        out.push_str("% rhs\n");
        for b in &self.rhs {
            let _ = writeln!(out, "% {b:e}");
        }
        out
    }
}

/// Value used for an isolated degenerate node: the nearest boundary value
/// (perpendicular projection onto the closest side).
fn boundary_projection(bc: &Field, node: usize) -> f64 {
    let grid = bc.grid();
    let (i, j) = grid.ij(node);
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut best = (i, grid.index(0, j));
    let candidates = [
        (nx - 1 - i, grid.index(nx - 1, j)),
        (if ny > 1 { j } else { usize::MAX }, grid.index(i, 0)),
        (
            if ny > 1 { ny - 1 - j } else { usize::MAX },
            grid.index(i, ny.saturating_sub(1)),
        ),
    ];
    for c in candidates {
        if c.0 < best.0 {
            best = c;
        }
    }
    bc.values()[best.1]
}

/// Assembles `sum_faces sigma_f (phi_i - phi_j) / h^2 = 0` over interior
/// nodes, boundary neighbours moved to the right-hand side.
///
/// Interior nodes whose adjacent faces all vanish get an identity row. Their
/// value comes from `fallback` (typically the previous potential) or, when
/// absent, from the nearest boundary value.
pub fn assemble(faces: &FaceCoeffs, phi_bc: &Field, fallback: Option<&Field>) -> Result<LinearSystem> {
    let grid = faces.grid();
    grid.check_same(phi_bc.grid(), "assemble: faces vs boundary data")?;
    if let Some(f) = fallback {
        grid.check_same(f.grid(), "assemble: fallback field")?;
    }
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let n_nodes = grid.node_count();

    let mut slot = vec![usize::MAX; n_nodes];
    let unknowns: Vec<usize> = grid.interior_nodes().collect();
    for (k, &node) in unknowns.iter().enumerate() {
        slot[node] = k;
    }

    let degenerate_node = |node: usize| -> bool {
        let total: f64 = grid
            .neighbors(node)
            .iter()
            .map(|(_, axis, face)| faces.get(axis, face))
            .sum();
        total <= DEGENERATE_THRESHOLD
    };
    let is_degenerate: Vec<bool> = (0..n_nodes)
        .map(|n| !grid.is_boundary(n) && degenerate_node(n))
        .collect();

    let mut rows = Vec::with_capacity(unknowns.len());
    let mut rhs = Vec::with_capacity(unknowns.len());
    let mut degenerate = Vec::new();
    for &node in &unknowns {
        if is_degenerate[node] {
            degenerate.push(node);
            rows.push(vec![(slot[node], 1.0)]);
            rhs.push(match fallback {
                Some(f) => f.values()[node],
                None => boundary_projection(phi_bc, node),
            });
            continue;
        }
        let mut row = Vec::with_capacity(5);
        let mut diag = 0.0;
        let mut b = 0.0;
        for (m, axis, face) in grid.neighbors(node).iter() {
            if is_degenerate[m] {
                // keeps the matrix symmetric: the neighbour's row is identity
                continue;
            }
            let c = faces.get(axis, face) * inv_h2;
            diag += c;
            if grid.is_boundary(m) {
                b += c * phi_bc.values()[m];
            } else if c != 0.0 {
                row.push((slot[m], -c));
            }
        }
        row.push((slot[node], diag));
        rows.push(row);
        rhs.push(b);
    }
    if !degenerate.is_empty() {
        log::warn!(
            "{} degenerate interior node(s) regularized to identity rows",
            degenerate.len()
        );
    }
    let boundary = phi_bc.clone();
    Ok(LinearSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs,
        unknowns,
        boundary,
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Zero right-hand side; solution is zero.
    Trivial,
    Cg,
    DenseCholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    pub residual: f64,
}

/// Linear solver settings; `max_iter = None` means `10 n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves the system and returns the full field (boundary reattached).
pub fn solve_spd(system: &LinearSystem, settings: &SolverSettings) -> Result<Field> {
    solve_spd_with_stats(system, settings).map(|(f, _)| f)
}

pub fn solve_spd_with_stats(system: &LinearSystem, settings: &SolverSettings) -> Result<(Field, SolveStats)> {
    if !(settings.tol > 0.0) {
        return Err(Error::invalid(format!("tol = {} must be positive", settings.tol)));
    }
    let n = system.n();
    let max_iter = settings.max_iter.unwrap_or(10 * n.max(1));
    let b_norm = norm(&system.rhs);
    if n == 0 || b_norm == 0.0 {
        let x = vec![0.0; n];
        let stats = SolveStats {
            method: SolveMethod::Trivial,
            iterations: 0,
            residual: 0.0,
        };
        return Ok((system.to_field(&x)?, stats));
    }
    match pcg(&system.matrix, &system.rhs, settings.tol, max_iter) {
        Ok((x, iterations, residual)) => Ok((
            system.to_field(&x)?,
            SolveStats {
                method: SolveMethod::Cg,
                iterations,
                residual,
            },
        )),
        Err(err) if n <= DENSE_FALLBACK_MAX => {
            log::warn!("CG failed ({err}); falling back to dense Cholesky for n = {n}");
            let x = dense_cholesky_solve(&system.matrix, &system.rhs)?;
            let r_abs = true_residual(&system.matrix, &system.rhs, &x);
            let residual = r_abs / b_norm;
            if r_abs > (settings.tol * b_norm).max(rounding_floor(&system.matrix, &x, b_norm)) {
                return Err(err);
            }
            Ok((
                system.to_field(&x)?,
                SolveStats {
                    method: SolveMethod::DenseCholesky,
                    iterations: 0,
                    residual,
                },
            ))
        }
        Err(err) => Err(err),
    }
}

/// Residual size reachable in double precision for an iterate `x`:
/// `32 eps (‖A‖∞ ‖x‖ + ‖b‖)`. Tolerances below this cannot be met.
fn rounding_floor(a: &CsrMatrix, x: &[f64], b_norm: f64) -> f64 {
    32.0 * f64::EPSILON * (a.norm_inf() * norm(x) + b_norm)
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; x.len()];
    a.matvec(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    norm(&r)
}

/// Jacobi-preconditioned CG from a zero initial guess. Restarts from the
/// current iterate when the recursively updated residual drifts below the
/// true one, so the returned `x` meets `tol` on the true residual, or the
/// rounding floor when `tol` lies below it.
fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let b_norm = norm(b);
    let inv_diag: Vec<f64> = a.diag().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let a_inf = a.norm_inf();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < max_iter {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut converged_inner = false;
        while iterations < max_iter {
            a.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            let rn = norm(&r);
            if rn <= 0.5 * tol * b_norm || rn <= 0.5 * 32.0 * f64::EPSILON * (a_inf * norm(&x) + b_norm) {
                converged_inner = true;
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        // refresh with the true residual
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let r_abs = norm(&r);
        rel = r_abs / b_norm;
        if rel <= tol || r_abs <= rounding_floor(a, &x, b_norm) {
            return Ok((x, iterations, rel));
        }
        if !converged_inner && iterations < max_iter {
            // breakdown (p'Ap <= 0) without progress
            break;
        }
    }
    Err(Error::LinearNonConvergence {
        iterations,
        residual: rel,
    })
}

/// Dense Cholesky factorization and solve; used as the small-system fallback.
fn dense_cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n();
    let mut l = a.to_dense();
    for j in 0..n {
        let mut d = l[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > 0.0) {
            return Err(Error::SingularMatrix(j));
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let mut s = l[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    Ok(y)
}

/// Joule heating density `sigma |grad phi|^2` at every node.
pub fn joule_density(sigma_nodes: &Field, phi: &Field, phi_bc: &Field) -> Result<Field> {
    sigma_nodes.grid().check_same(phi.grid(), "joule_density")?;
    let g = grad_sq(phi, phi_bc)?;
    let values = sigma_nodes
        .values()
        .iter()
        .zip(g.values())
        .map(|(s, q)| s * q)
        .collect();
    Field::new(phi.grid().clone(), values)
}

/// Discrete `integral sigma |grad phi|^2`: sum over faces of
/// `sigma_f (dphi/h)^2` times the face quadrature weight.
pub fn dirichlet_energy(faces: &FaceCoeffs, phi: &Field) -> Result<f64> {
    let grid = faces.grid();
    grid.check_same(phi.grid(), "dirichlet_energy")?;
    let h = grid.h();
    let v = phi.values();
    Ok(faces
        .iter()
        .map(|(axis, k, c)| {
            let (a, b) = grid.face_nodes(axis, k);
            let d = (v[b] - v[a]) / h;
            c * d * d * grid.face_weight(axis, k)
        })
        .sum())
}
