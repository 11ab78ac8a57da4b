//! Backward-Euler step of `u_t - Δu = q` with Dirichlet data on the parabolic boundary.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::elliptic::{solve_spd, CsrMatrix, LinearSystem, SolverSettings};
use crate::error::{Error, Result};
use crate::expr::ScalarFn;
use crate::grid::{Field, GridSpec};

static NEGATIVE_SOURCE_WARNED: AtomicBool = AtomicBool::new(false);

/// Temperature data `u0(x, y, t)` (initial slice and lateral boundary) and
/// potential data `phi0(x, y, t)` (lateral boundary).
///
/// The smoothness the existence theory assumes (`∂t u0 ∈ L²`, `Δphi0 ∈ L^∞(L^s)`)
/// is documented but not enforced; only `u0 >= 0` on the parabolic boundary is
/// checked, at config parse time.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub u0: ScalarFn,
    pub phi0: ScalarFn,
}

impl BoundaryData {
    pub fn new(u0: ScalarFn, phi0: ScalarFn) -> Self {
        BoundaryData { u0, phi0 }
    }

    /// `u0(·, t)` at every node; used as the initial field and as boundary data.
    pub fn sample_u0(&self, grid: &GridSpec, t: f64) -> Result<Field> {
        sample(&self.u0, grid, t, "u0")
    }

    /// `phi0(·, t)` at every node; its boundary values are the Dirichlet data and
    /// the full field is the reference extension for the energy inequality.
    pub fn sample_phi0(&self, grid: &GridSpec, t: f64) -> Result<Field> {
        sample(&self.phi0, grid, t, "phi0")
    }
}

fn sample(f: &ScalarFn, grid: &GridSpec, t: f64, name: &str) -> Result<Field> {
    Field::from_fn(grid, |x, y| f.eval(x, y, t)).map_err(|e| Error::invalid(format!("{name} at t = {t}: {e}")))
}

/// Assembles `(I - dt Δ_h) u = u_old + dt * source` over interior nodes.
fn assemble_heat(u_old: &Field, source: &Field, dt: f64, bc_next: &Field) -> LinearSystem {
    let grid = u_old.grid();
    let r = dt / (grid.h() * grid.h());
    let mut slot = vec![usize::MAX; grid.node_count()];
    let unknowns: Vec<usize> = grid.interior_nodes().collect();
    for (k, &n) in unknowns.iter().enumerate() {
        slot[n] = k;
    }
    let mut rows = Vec::with_capacity(unknowns.len());
    let mut rhs = Vec::with_capacity(unknowns.len());
    for &node in &unknowns {
        let nbrs = grid.neighbors(node);
        let mut row = Vec::with_capacity(5);
        let mut b = u_old.values()[node] + dt * source.values()[node];
        for (m, _, _) in nbrs.iter() {
            if grid.is_boundary(m) {
                b += r * bc_next.values()[m];
            } else {
                row.push((slot[m], -r));
            }
        }
        row.push((slot[node], 1.0 + r * nbrs.len() as f64));
        rows.push(row);
        rhs.push(b);
    }
    LinearSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs,
        unknowns,
        boundary: bc_next.clone(),
        degenerate: Vec::new(),
    }
}

/// One backward-Euler step; boundary nodes of the result equal `bc_next`.
pub fn implicit_euler_step(
    u_old: &Field,
    source: &Field,
    dt: f64,
    bc_next: &Field,
    solver: &SolverSettings,
) -> Result<Field> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be positive")));
    }
    let grid = u_old.grid();
    grid.check_same(source.grid(), "implicit_euler_step: source")?;
    grid.check_same(bc_next.grid(), "implicit_euler_step: boundary data")?;
    let smin = source.min();
    if smin < -1e-12 * source.max_abs().max(1.0) {
        if NEGATIVE_SOURCE_WARNED.swap(true, Ordering::Relaxed) {
            log::debug!("negative heat source (min {smin:e})");
        } else {
            log::warn!("negative heat source (min {smin:e}); nonnegativity of u is not guaranteed (reported once)");
        }
    }
    let system = assemble_heat(u_old, source, dt, bc_next);
    solve_spd(&system, solver)
}

/// `max(0, -min u)`: zero exactly when `u >= 0` everywhere.
pub fn comparison_floor(u: &Field) -> f64 {
    (-u.min()).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn settings() -> SolverSettings {
        SolverSettings {
            tol: 1e-12,
            max_iter: None,
        }
    }

    #[test]
    fn zero_and_constant_fixed_points() {
        let g = GridSpec::unit_square(9).unwrap();
        let z = Field::zeros(&g);
        let u = implicit_euler_step(&z, &z, 0.1, &z, &settings()).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));

        let five = Field::constant(&g, 5.0).unwrap();
        let u = implicit_euler_step(&five, &z, 0.37, &five, &settings()).unwrap();
        assert!(u.values().iter().all(|&v| (v - 5.0).abs() < 1e-10));
    }

    #[test]
    fn unit_source_reaches_parabola() {
        let g = GridSpec::unit_line(101).unwrap();
        let z = Field::zeros(&g);
        let one = Field::constant(&g, 1.0).unwrap();
        let mut u = z.clone();
        for _ in 0..200 {
            u = implicit_euler_step(&u, &one, 0.05, &z, &settings()).unwrap();
        }
        let exact = Field::from_fn(&g, |x, _| x * (1.0 - x) / 2.0).unwrap();
        assert!(u.max_abs_diff(&exact).unwrap() < 1e-3);
        assert!((u.values()[50] - 0.125).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_dt() {
        let g = GridSpec::unit_line(5).unwrap();
        let z = Field::zeros(&g);
        assert!(implicit_euler_step(&z, &z, 0.0, &z, &settings()).is_err());
        assert!(implicit_euler_step(&z, &z, f64::NAN, &z, &settings()).is_err());
    }

    #[test]
    fn comparison_floor_examples() {
        let g = GridSpec::unit_line(4).unwrap();
        assert_eq!(comparison_floor(&Field::zeros(&g)), 0.0);
        let u = Field::new(g, vec![0.1, -0.02, 0.3, 0.0]).unwrap();
        assert_eq!(comparison_floor(&u), 0.02);
    }

    #[test]
    fn stable_decay_toward_harmonic_part() {
        // bc-harmonic part of u = x is x itself; deviation must not grow for any dt
        let g = GridSpec::unit_line(21).unwrap();
        let harmonic = Field::from_fn(&g, |x, _| x).unwrap();
        let z = Field::zeros(&g);
        for dt in [1e-4, 0.1, 10.0, 1e4] {
            let mut u = Field::from_fn(&g, |x, _| x + (7.0 * x).sin() * x * (1.0 - x)).unwrap();
            let mut prev = u.max_abs_diff(&harmonic).unwrap();
            for _ in 0..20 {
                u = implicit_euler_step(&u, &z, dt, &harmonic, &settings()).unwrap();
                let dev = u.max_abs_diff(&harmonic).unwrap();
                assert!(dev <= prev * (1.0 + 1e-12) + 1e-13, "dt = {dt}");
                prev = dev;
            }
        }
    }

    proptest! {
        #[test]
        fn nonnegative_data_gives_nonnegative_u(
            u_old in prop::collection::vec(0.0..3.0f64, 49),
            src in prop::collection::vec(0.0..10.0f64, 49),
            bc in prop::collection::vec(0.0..2.0f64, 49),
            dt in 1e-4..1.0f64,
        ) {
            let g = GridSpec::unit_square(7).unwrap();
            let u_old = Field::new(g.clone(), u_old).unwrap();
            let src = Field::new(g.clone(), src).unwrap();
            let bc = Field::new(g, bc).unwrap();
            let u = implicit_euler_step(&u_old, &src, dt, &bc, &settings()).unwrap();
            prop_assert!(comparison_floor(&u) <= 1e-12);
        }
    }
}
