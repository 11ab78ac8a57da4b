//! Independent reference computations: dense elimination, a forward-Euler
//! integrator, manufactured solutions and convergence studies.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conductivity::ConductivityModel;
use crate::coupler::{run_with_forcing, Forcing, SolverConfig};
use crate::elliptic::{assemble, dirichlet_energy, solve_spd_with_stats, LinearSystem, SolveMethod, SolverSettings};
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::grid::{laplacian_apply, sigma_faces, Dim, FaceCoeffs, Field, GridSpec};
use crate::parabolic::{implicit_euler_step, BoundaryData};

/// Largest system the dense solver accepts.
pub const DENSE_MAX: usize = 400;

/// Gaussian elimination with partial pivoting on the assembled system.
pub fn dense_elliptic_solve(system: &LinearSystem) -> Result<Field> {
    let n = system.n();
    if n > DENSE_MAX {
        return Err(Error::invalid(format!(
            "dense solve limited to n <= {DENSE_MAX}, got {n}"
        )));
    }
    let mut a = system.matrix().to_dense();
    let mut b = system.rhs().to_vec();
    let scale = a.iter().flat_map(|r| r.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax <= scale * 1e-300 || pmax == 0.0 {
            return Err(Error::SingularMatrix(col));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|c| a[i][c] * x[c]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    system.to_field(&x)
}

/// Forward Euler for `u_t = Δu + source(x, y, t)` with the boundary values of
/// `u0` held fixed. Requires `dt_fine <= h²/4`; the step is shrunk so that
/// an integer number of steps lands on `t_final`.
pub fn explicit_reference(
    u0: &Field,
    source: &dyn Fn(f64, f64, f64) -> f64,
    dt_fine: f64,
    t_final: f64,
) -> Result<Field> {
    let grid = u0.grid().clone();
    let h = grid.h();
    if !(dt_fine > 0.0) || dt_fine > h * h / 4.0 * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "explicit step {dt_fine} violates dt <= h^2/4 = {}",
            h * h / 4.0
        )));
    }
    if !(t_final >= 0.0) {
        return Err(Error::invalid("t_final must be nonnegative"));
    }
    let steps = (t_final / dt_fine).ceil() as usize;
    if steps == 0 {
        return Ok(u0.clone());
    }
    let dt = t_final / steps as f64;
    let coords: Vec<(f64, f64)> = (0..grid.node_count()).map(|n| grid.coords(n)).collect();
    let mut u = u0.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let lap = laplacian_apply(&u, u0)?;
        let next: Vec<f64> = (0..grid.node_count())
            .map(|n| {
                if grid.is_boundary(n) {
                    u0.values()[n]
                } else {
                    let (x, y) = coords[n];
                    u.values()[n] + dt * (lap.values()[n] + source(x, y, t))
                }
            })
            .collect();
        u = Field::new(grid.clone(), next)?;
    }
    Ok(u)
}

type Fn3 = fn(f64, f64, f64) -> f64;
type Grad3 = fn(f64, f64, f64) -> (f64, f64);

/// An exact pair `(u, φ)` with analytic derivatives and the forcing that makes
/// it solve the system with added right-hand sides.
#[derive(Clone, Debug)]
pub struct ManufacturedCase {
    pub id: &'static str,
    pub dim: Dim,
    pub sigma: ConductivityModel,
    pub t_final: f64,
    /// The discrete scheme reproduces the pair up to rounding.
    pub exact: bool,
    pub u: Fn3,
    pub u_t: Fn3,
    pub lap_u: Fn3,
    pub grad_u: Grad3,
    pub phi: Fn3,
    pub grad_phi: Grad3,
    pub lap_phi: Fn3,
    /// Added to the Joule source.
    pub heat_forcing: Fn3,
    /// Added to `-div(σ(u) ∇φ)`.
    pub potential_forcing: Fn3,
}

impl ManufacturedCase {
    /// `u = e^{-t} sin(πx)`, `φ = x`, `σ ≡ 1`.
    pub fn sine_decay() -> Self {
        ManufacturedCase {
            id: "sine_decay",
            dim: Dim::One,
            sigma: ConductivityModel::Constant { value: 1.0 },
            t_final: 1.0,
            exact: false,
            u: |x, _, t| (-t).exp() * (PI * x).sin(),
            u_t: |x, _, t| -(-t).exp() * (PI * x).sin(),
            lap_u: |x, _, t| -PI * PI * (-t).exp() * (PI * x).sin(),
            grad_u: |x, _, t| (PI * (-t).exp() * (PI * x).cos(), 0.0),
            phi: |x, _, _| x,
            grad_phi: |_, _, _| (1.0, 0.0),
            lap_phi: |_, _, _| 0.0,
            heat_forcing: |x, _, t| (PI * PI - 1.0) * (-t).exp() * (PI * x).sin() - 1.0,
            potential_forcing: |_, _, _| 0.0,
        }
    }

    /// Steady `u = x(1-x)/2`, `φ = x`, `σ ≡ 1`: no forcing needed, and the
    /// three-point stencil is exact on quadratics.
    pub fn polynomial_steady() -> Self {
        ManufacturedCase {
            id: "polynomial_steady",
            dim: Dim::One,
            sigma: ConductivityModel::Constant { value: 1.0 },
            t_final: 0.5,
            exact: true,
            u: |x, _, _| x * (1.0 - x) / 2.0,
            u_t: |_, _, _| 0.0,
            lap_u: |_, _, _| -1.0,
            grad_u: |x, _, _| (0.5 - x, 0.0),
            phi: |x, _, _| x,
            grad_phi: |_, _, _| (1.0, 0.0),
            lap_phi: |_, _, _| 0.0,
            heat_forcing: |_, _, _| 0.0,
            potential_forcing: |_, _, _| 0.0,
        }
    }

    /// `u = 1 + e^{-t} sin(πx)`, `φ = x`, `σ(s) = e^{-s}`: genuinely coupled.
    pub fn exponential_coupled() -> Self {
        ManufacturedCase {
            id: "exponential_coupled",
            dim: Dim::One,
            sigma: ConductivityModel::ExponentialDecay { rate: 1.0 },
            t_final: 0.5,
            exact: false,
            u: |x, _, t| 1.0 + (-t).exp() * (PI * x).sin(),
            u_t: |x, _, t| -(-t).exp() * (PI * x).sin(),
            lap_u: |x, _, t| -PI * PI * (-t).exp() * (PI * x).sin(),
            grad_u: |x, _, t| (PI * (-t).exp() * (PI * x).cos(), 0.0),
            phi: |x, _, _| x,
            grad_phi: |_, _, _| (1.0, 0.0),
            lap_phi: |_, _, _| 0.0,
            heat_forcing: |x, _, t| {
                let u = 1.0 + (-t).exp() * (PI * x).sin();
                (PI * PI - 1.0) * (-t).exp() * (PI * x).sin() - (-u).exp()
            },
            potential_forcing: |x, _, t| {
                let u = 1.0 + (-t).exp() * (PI * x).sin();
                (-u).exp() * PI * (-t).exp() * (PI * x).cos()
            },
        }
    }

    /// `u = e^{-t} sin(πx) sin(πy)`, `φ = x`, `σ ≡ 1` on the unit square.
    pub fn sine_decay_2d() -> Self {
        ManufacturedCase {
            id: "sine_decay_2d",
            dim: Dim::Two,
            sigma: ConductivityModel::Constant { value: 1.0 },
            t_final: 0.25,
            exact: false,
            u: |x, y, t| (-t).exp() * (PI * x).sin() * (PI * y).sin(),
            u_t: |x, y, t| -(-t).exp() * (PI * x).sin() * (PI * y).sin(),
            lap_u: |x, y, t| -2.0 * PI * PI * (-t).exp() * (PI * x).sin() * (PI * y).sin(),
            grad_u: |x, y, t| {
                let e = PI * (-t).exp();
                (e * (PI * x).cos() * (PI * y).sin(), e * (PI * x).sin() * (PI * y).cos())
            },
            phi: |x, _, _| x,
            grad_phi: |_, _, _| (1.0, 0.0),
            lap_phi: |_, _, _| 0.0,
            heat_forcing: |x, y, t| (2.0 * PI * PI - 1.0) * (-t).exp() * (PI * x).sin() * (PI * y).sin() - 1.0,
            potential_forcing: |_, _, _| 0.0,
        }
    }

    pub fn all() -> Vec<ManufacturedCase> {
        vec![
            Self::sine_decay(),
            Self::polynomial_steady(),
            Self::exponential_coupled(),
            Self::sine_decay_2d(),
        ]
    }

    /// Residuals `(heat, potential)` of the exact pair under the continuous
    /// operators at one point.
    pub fn residuals(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        let u = (self.u)(x, y, t);
        let s = self.sigma.sigma(u)?;
        let sp = self.sigma.sigma_prime(u)?;
        let (ux, uy) = (self.grad_u)(x, y, t);
        let (px, py) = (self.grad_phi)(x, y, t);
        let heat = (self.u_t)(x, y, t) - (self.lap_u)(x, y, t) - s * (px * px + py * py) - (self.heat_forcing)(x, y, t);
        let div = s * (self.lap_phi)(x, y, t) + sp * (ux * px + uy * py);
        let potential = -div - (self.potential_forcing)(x, y, t);
        Ok((heat, potential))
    }

    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        match self.dim {
            Dim::One => GridSpec::unit_line(n),
            Dim::Two => GridSpec::unit_square(n),
        }
    }

    pub fn config(&self, n: usize, dt: f64) -> Result<SolverConfig> {
        let (u, phi) = (self.u, self.phi);
        let bdata = BoundaryData::new(ScalarFn::native(u), ScalarFn::native(phi));
        let mut cfg = SolverConfig::new(self.grid(n)?, self.sigma.clone(), bdata)?;
        cfg.dt = dt;
        cfg.t_final = self.t_final;
        cfg.slab_length = self.t_final.max(1.0);
        cfg.picard_tol = 1e-12;
        cfg.linear = SolverSettings {
            tol: 1e-13,
            max_iter: None,
        };
        cfg.estimates.every = usize::MAX;
        Ok(cfg)
    }

    pub fn forcing(&self) -> Forcing {
        let (h, p) = (self.heat_forcing, self.potential_forcing);
        Forcing {
            heat: Some(ScalarFn::Native(Arc::new(h))),
            potential: Some(ScalarFn::Native(Arc::new(p))),
        }
    }

    /// `max |u_h(T) - u(T)|` over nodes.
    pub fn error(&self, n: usize, dt: f64) -> Result<f64> {
        let cfg = self.config(n, dt)?;
        let traj = run_with_forcing(&cfg, &self.forcing()).map_err(|a| a.error)?;
        let last = traj.final_state().ok_or_else(|| Error::invalid("empty trajectory"))?;
        let exact = Field::from_fn(&cfg.grid, |x, y| (self.u)(x, y, last.t))?;
        last.u.max_abs_diff(&exact)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub case: String,
    /// `(h, dt, error)` with `dt ∝ h²`.
    pub spatial: Vec<(f64, f64, f64)>,
    /// `(dt, error)` on the finest grid.
    pub temporal: Vec<(f64, f64)>,
    pub spatial_order: Option<f64>,
    pub temporal_order: Option<f64>,
    /// All errors at rounding level; orders are not meaningful.
    pub exact: bool,
}

/// Spatial study over `grids` (node counts per axis) with `dt = min(dts) (h/h_coarse)²`,
/// and temporal study over `dts` on the finest grid.
pub fn convergence_study(case: &ManufacturedCase, grids: &[usize], dts: &[f64]) -> Result<ConvergenceReport> {
    if grids.len() < 3 {
        return Err(Error::invalid(format!(
            "convergence study needs at least 3 grid levels, got {}",
            grids.len()
        )));
    }
    if dts.len() < 2 || dts.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("convergence study needs at least 2 positive time steps"));
    }
    let mut grids = grids.to_vec();
    grids.sort_unstable();
    let h_coarse = 1.0 / (grids[0] - 1) as f64;
    let dt_min = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let mut spatial = Vec::new();
    for &n in &grids {
        let h = 1.0 / (n - 1) as f64;
        let dt = dt_min * (h / h_coarse).powi(2);
        spatial.push((h, dt, case.error(n, dt)?));
    }
    let finest = *grids.last().expect("non-empty");
    let mut temporal = Vec::new();
    for &dt in dts {
        temporal.push((dt, case.error(finest, dt)?));
    }
    let exact = spatial.iter().all(|s| s.2 <= 1e-10) && temporal.iter().all(|s| s.1 <= 1e-10);
    let (spatial_order, temporal_order) = if exact {
        (None, None)
    } else {
        let (hs, es): (Vec<f64>, Vec<f64>) = spatial.iter().map(|s| (s.0, s.2)).unzip();
        let (ds, et): (Vec<f64>, Vec<f64>) = temporal.iter().copied().unzip();
        (fit_order(&hs, &es), fit_order(&ds, &et))
    };
    Ok(ConvergenceReport {
        case: case.id.to_string(),
        spatial,
        temporal,
        spatial_order,
        temporal_order,
        exact,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Elliptic,
    Parabolic,
    Mms,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elliptic" => Ok(Suite::Elliptic),
            "parabolic" => Ok(Suite::Parabolic),
            "mms" => Ok(Suite::Mms),
            other => Err(Error::invalid(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub ok: bool,
    pub value: f64,
    pub limit: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

fn check(name: &str, value: f64, ok: bool, limit: &str) -> SuiteCheck {
    SuiteCheck {
        name: name.to_string(),
        ok,
        value,
        limit: limit.to_string(),
    }
}

/// Random conductivity and boundary data on a square grid, seeded.
pub fn random_elliptic_instance(n: usize, seed: u64) -> Result<(FaceCoeffs, Field)> {
    let grid = GridSpec::unit_square(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sig: Vec<f64> = (0..grid.node_count())
        .map(|_| 10f64.powf(rng.gen_range(-3.0..1.0)))
        .collect();
    let bc: Vec<f64> = (0..grid.node_count()).map(|_| rng.gen_range(-2.0..3.0)).collect();
    let faces = sigma_faces(&Field::new(grid.clone(), sig)?)?;
    Ok((faces, Field::new(grid, bc)?))
}

fn elliptic_suite() -> Result<Vec<SuiteCheck>> {
    let tight = SolverSettings {
        tol: 1e-14,
        max_iter: Some(10_000),
    };
    let mut worst_rel = 0.0f64;
    let mut worst_excess = 0.0f64;
    let mut worst_energy = 0.0f64;
    let mut all_cg = true;
    for seed in 0..20u64 {
        let (faces, bc) = random_elliptic_instance(12 + (seed as usize % 9), seed)?;
        let sys = assemble(&faces, &bc, None)?;
        let dense = dense_elliptic_solve(&sys)?;
        let (cg, stats) = solve_spd_with_stats(&sys, &tight)?;
        all_cg &= stats.method == SolveMethod::Cg;
        worst_rel = worst_rel.max(cg.max_abs_diff(&dense)? / dense.max_abs().max(f64::MIN_POSITIVE));
        let (lo, hi) = bc.boundary_range();
        worst_excess = worst_excess.max(cg.max() - hi).max(lo - cg.min());
        let e = dirichlet_energy(&faces, &cg)?;
        let e_bc = dirichlet_energy(&faces, &bc)?;
        worst_energy = worst_energy.max((e - e_bc) / e_bc.max(f64::MIN_POSITIVE));
    }
    let g = GridSpec::unit_line(5)?;
    let bc = Field::from_fn(&g, |x, _| if x == 1.0 { 1.0 } else { 0.0 })?;
    let sys = assemble(&FaceCoeffs::uniform(&g, 1.0)?, &bc, None)?;
    let line = dense_elliptic_solve(&sys)?;
    let line_err = [0.25, 0.5, 0.75]
        .iter()
        .enumerate()
        .map(|(k, v)| (line.values()[k + 1] - v).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        check(
            "cg_vs_dense_relative",
            worst_rel,
            worst_rel <= 1e-10 && all_cg,
            "<= 1e-10",
        ),
        check("max_principle_excess", worst_excess, worst_excess <= 1e-8, "<= 1e-8"),
        check("energy_excess_relative", worst_energy, worst_energy <= 1e-8, "<= 1e-8"),
        check("dense_linear_exactness", line_err, line_err <= 1e-14, "<= 1e-14"),
    ])
}

/// Observed temporal order of the implicit stepper against a fine explicit
/// solution: `u0 = sin(πx)`, constant source, 41 nodes, `T = 0.1`.
pub fn implicit_vs_explicit_order(source: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let g = GridSpec::unit_line(41)?;
    let u0 = Field::from_fn(&g, |x, _| (PI * x).sin())?.with_boundary_from(&Field::zeros(&g))?;
    let t_final = 0.1;
    let h = g.h();
    let reference = explicit_reference(&u0, &|_, _, _| source, h * h / 40.0, t_final)?;
    let src = Field::constant(&g, source)?;
    let zero = Field::zeros(&g);
    let settings = SolverSettings {
        tol: 1e-13,
        max_iter: None,
    };
    let mut rows = Vec::new();
    for steps in [10usize, 20, 40, 80] {
        let dt = t_final / steps as f64;
        let mut u = u0.clone();
        for _ in 0..steps {
            u = implicit_euler_step(&u, &src, dt, &zero, &settings)?;
        }
        rows.push((dt, u.max_abs_diff(&reference)?));
    }
    let (ds, es): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
    let order = fit_order(&ds, &es).unwrap_or(f64::NAN);
    Ok((order, rows))
}

fn parabolic_suite() -> Result<Vec<SuiteCheck>> {
    let sigma0 = ConductivityModel::default().sigma(0.0)?;
    let (order, _) = implicit_vs_explicit_order(sigma0)?;
    let g = GridSpec::unit_line(21)?;
    let zero = Field::zeros(&g);
    let steady = explicit_reference(&zero, &|_, _, _| 1.0, g.h() * g.h() / 4.0, 3.0)?;
    let parabola = Field::from_fn(&g, |x, _| x * (1.0 - x) / 2.0)?;
    let steady_err = steady.max_abs_diff(&parabola)?;
    let zero_run = explicit_reference(&zero, &|_, _, _| 0.0, g.h() * g.h() / 4.0, 1.0)?;
    Ok(vec![
        check("implicit_vs_explicit_order", order, order >= 0.8, ">= 0.8"),
        check("explicit_steady_parabola", steady_err, steady_err <= 1e-6, "<= 1e-6"),
        check(
            "explicit_zero_data",
            zero_run.max_abs(),
            zero_run.max_abs() == 0.0,
            "== 0",
        ),
    ])
}

/// Worst manufactured-forcing residual over 100 seeded space-time points per case.
pub fn forcing_residual_sweep(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in ManufacturedCase::all() {
        for _ in 0..100 {
            let x = rng.gen_range(0.0..1.0);
            let y = if case.dim == Dim::Two {
                rng.gen_range(0.0..1.0)
            } else {
                0.0
            };
            let t = rng.gen_range(0.0..case.t_final);
            let (a, b) = case.residuals(x, y, t)?;
            worst = worst.max(a.abs()).max(b.abs());
        }
    }
    Ok(worst)
}

/// Grids and steps used by the sine-decay study in the verify suite.
pub const MMS_GRIDS: [usize; 5] = [11, 21, 41, 81, 161];
pub const MMS_DTS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

fn mms_suite() -> Result<Vec<SuiteCheck>> {
    let residual = forcing_residual_sweep(7)?;
    let study = convergence_study(&ManufacturedCase::sine_decay(), &MMS_GRIDS, &MMS_DTS)?;
    let so = study.spatial_order.unwrap_or(f64::NAN);
    let to = study.temporal_order.unwrap_or(f64::NAN);
    let poly = convergence_study(&ManufacturedCase::polynomial_steady(), &[5, 9, 17], &[0.1, 0.05])?;
    Ok(vec![
        check("forcing_residual", residual, residual <= 1e-8, "<= 1e-8"),
        check("spatial_order", so, (so - 2.0).abs() <= 0.2, "2.0 +- 0.2"),
        check("temporal_order", to, (to - 1.0).abs() <= 0.15, "1.0 +- 0.15"),
        check(
            "polynomial_exact",
            if poly.exact { 1.0 } else { 0.0 },
            poly.exact,
            "exact",
        ),
    ])
}

pub fn verify_suite(suite: Suite) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Elliptic => elliptic_suite()?,
        Suite::Parabolic => parabolic_suite()?,
        Suite::Mms => mms_suite()?,
    };
    Ok(SuiteReport { suite, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_matches_hand_solution() {
        let g = GridSpec::unit_line(5).unwrap();
        let bc = Field::from_fn(&g, |x, _| if x == 1.0 { 1.0 } else { 0.0 }).unwrap();
        let sys = assemble(&FaceCoeffs::uniform(&g, 1.0).unwrap(), &bc, None).unwrap();
        let f = dense_elliptic_solve(&sys).unwrap();
        for (k, v) in [0.25, 0.5, 0.75].iter().enumerate() {
            assert!((f.values()[k + 1] - v).abs() < 1e-15);
        }
        assert!(sys.relative_residual(&f) <= 1e-12);
    }

    #[test]
    fn dense_returns_regularization_values() {
        let g = GridSpec::unit_line(6).unwrap();
        let bc = Field::from_fn(&g, |x, _| if x < 0.5 { 2.0 } else { 5.0 }).unwrap();
        let sys = assemble(&FaceCoeffs::uniform(&g, 0.0).unwrap(), &bc, None).unwrap();
        let f = dense_elliptic_solve(&sys).unwrap();
        assert_eq!(f.values(), &[2.0, 2.0, 2.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn dense_rejects_large_systems() {
        let g = GridSpec::unit_square(23).unwrap();
        let z = Field::zeros(&g);
        let sys = assemble(&FaceCoeffs::uniform(&g, 1.0).unwrap(), &z, None).unwrap();
        assert!(sys.n() > DENSE_MAX);
        assert!(dense_elliptic_solve(&sys).is_err());
    }

    #[test]
    fn explicit_reference_basics() {
        let g = GridSpec::unit_line(21).unwrap();
        let z = Field::zeros(&g);
        let h2 = g.h() * g.h();
        let u = explicit_reference(&z, &|_, _, _| 0.0, h2 / 4.0, 0.5).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(explicit_reference(&z, &|_, _, _| 0.0, h2 / 3.0, 0.5).is_err());
        let u = explicit_reference(&z, &|_, _, _| 1.0, h2 / 4.0, 3.0).unwrap();
        assert!((u.max() - 0.125).abs() < 1e-6);
    }

    #[test]
    fn manufactured_forcing_is_consistent() {
        assert!(forcing_residual_sweep(11).unwrap() <= 1e-8);
    }

    #[test]
    fn fit_order_of_power_law() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((fit_order(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_order(&xs, &[0.0, 1.0, 2.0]), None);
    }

    #[test]
    fn study_needs_three_levels() {
        let c = ManufacturedCase::sine_decay();
        assert!(convergence_study(&c, &[11, 21], &[0.1, 0.05]).is_err());
    }

    #[test]
    fn polynomial_case_is_exact() {
        let r = convergence_study(&ManufacturedCase::polynomial_steady(), &[5, 9, 17], &[0.1, 0.05]).unwrap();
        assert!(r.exact, "{r:?}");
        assert_eq!(r.spatial_order, None);
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!("mms".parse::<Suite>().unwrap(), Suite::Mms);
        assert!("other".parse::<Suite>().is_err());
    }
}
