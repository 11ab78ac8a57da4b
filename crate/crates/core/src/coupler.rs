//! The decoupling map B, Picard iteration to its fixed point, and the
//! time-marching driver with slab bookkeeping and a homotopy sweep.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::conductivity::{sigma_field, ConductivityModel, H1Constants};
use crate::elliptic::{assemble, joule_density, solve_spd, LinearSystem, SolverSettings};
use crate::error::{Error, Result};
use crate::estimates::{EstimateMonitor, EstimateParams, EstimateReport};
use crate::expr::ScalarFn;
use crate::grid::{sigma_faces, Field, GridSpec};
use crate::parabolic::{implicit_euler_step, BoundaryData};

/// Values of the clamped part of `v` below this are logged.
const CLAMP_WARN: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputControls {
    /// Write `states_XXXX.csv` every this many steps.
    pub snapshot_every: usize,
    /// Invariant failures become a nonzero exit in the CLI.
    pub strict: bool,
}

impl Default for OutputControls {
    fn default() -> Self {
        OutputControls {
            snapshot_every: 100,
            strict: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub grid: GridSpec,
    pub sigma: ConductivityModel,
    pub h1: H1Constants,
    /// Sampling range and count used when checking `h1` against `sigma`.
    pub h1_s_max: f64,
    pub h1_samples: usize,
    pub bdata: BoundaryData,
    pub dt: f64,
    pub t_final: f64,
    pub slab_length: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear: SolverSettings,
    pub eps_homotopy: Vec<f64>,
    /// Factor applied to the Joule source and to the `u` data; 1 for a plain run.
    pub homotopy: f64,
    pub estimates: EstimateParams,
    pub output: OutputControls,
}

impl SolverConfig {
    /// Defaults: `dt = 1e-3`, `T = 1`, one slab of length 1, Picard tolerance
    /// 1e-9 with 50 iterations, and monitor parameters derived from `σ` and `φ0`.
    pub fn new(grid: GridSpec, sigma: ConductivityModel, bdata: BoundaryData) -> Result<Self> {
        let h1 = sigma.natural_h1();
        let phi0_sup = phi0_boundary_sup(&bdata, &grid, 1.0)?;
        let estimates = EstimateParams::defaults_for(grid.dim(), h1.c1, phi0_sup);
        let h1_s_max = match &sigma {
            ConductivityModel::Tabulated(t) => t.range().1,
            _ => 20.0,
        };
        Ok(SolverConfig {
            grid,
            sigma,
            h1,
            h1_s_max,
            h1_samples: 2001,
            bdata,
            dt: 1e-3,
            t_final: 1.0,
            slab_length: 1.0,
            picard_tol: 1e-9,
            picard_max: 50,
            linear: SolverSettings::default(),
            eps_homotopy: vec![0.25, 0.5, 0.75, 1.0],
            homotopy: 1.0,
            estimates,
            output: OutputControls::default(),
        })
    }

    /// 1D, 41 nodes, default oscillatory `σ`, `φ0 = x`, `u0 = 0`, `dt = 1e-3`, `T = 1`.
    pub fn reference_benchmark() -> Self {
        let grid = GridSpec::unit_line(41).expect("static grid");
        let bdata = BoundaryData::new(
            ScalarFn::parse("0").expect("static expr"),
            ScalarFn::parse("x").expect("static expr"),
        );
        SolverConfig::new(grid, ConductivityModel::default(), bdata).expect("static config")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("slab_length", self.slab_length),
            ("picard_tol", self.picard_tol),
            ("m", self.estimates.m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid(format!("t_final = {} must be >= 0", self.t_final)));
        }
        if self.picard_max == 0 {
            return Err(Error::invalid("picard_max must be at least 1"));
        }
        if !(self.homotopy > 0.0 && self.homotopy <= 1.0) {
            return Err(Error::invalid(format!(
                "homotopy factor {} must lie in (0, 1]",
                self.homotopy
            )));
        }
        let (lo, hi) = EstimateParams::ell_range(self.grid.dim());
        if !(self.estimates.ell > lo && self.estimates.ell < hi) {
            return Err(Error::invalid(format!(
                "[lemma-range] ell = {} must lie in ({lo}, {hi})",
                self.estimates.ell
            )));
        }
        if self.estimates.every == 0 || self.output.snapshot_every == 0 {
            return Err(Error::invalid("report and snapshot cadences must be at least 1"));
        }
        Ok(())
    }

    /// Same configuration at homotopy level `eps`.
    pub fn with_homotopy(&self, eps: f64) -> Self {
        SolverConfig {
            homotopy: eps,
            ..self.clone()
        }
    }

    /// Number of time steps to reach `t_final`.
    pub fn step_count(&self) -> usize {
        if self.t_final == 0.0 {
            0
        } else {
            (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize
        }
    }

    /// Time of step `k`, with the last one clipped to `t_final`.
    pub fn time_of(&self, k: usize) -> f64 {
        if k >= self.step_count() {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }

    pub fn slab_of(&self, t: f64) -> usize {
        (t / self.slab_length + 1e-9).floor() as usize
    }
}

/// `max |φ0(x, t)|` over boundary nodes and `t ∈ [0, t_final]` (11 time samples).
pub fn phi0_boundary_sup(bdata: &BoundaryData, grid: &GridSpec, t_final: f64) -> Result<f64> {
    let mut sup = 0.0f64;
    for k in 0..=10 {
        let t = t_final * k as f64 / 10.0;
        sup = sup.max(bdata.sample_phi0(grid, t)?.boundary_max_abs());
    }
    Ok(sup)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub phi: Field,
    pub picard_iters_last: usize,
    pub slab_index: usize,
}

/// Extra right-hand sides, used by manufactured-solution studies: `heat` is
/// added to the Joule source and `potential` to `-div(σ ∇φ)`.
#[derive(Clone, Debug, Default)]
pub struct Forcing {
    pub heat: Option<ScalarFn>,
    pub potential: Option<ScalarFn>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Trajectory {
    #[serde(skip)]
    pub states: Vec<SimState>,
    pub reports: Vec<EstimateReport>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&SimState> {
        self.states.last()
    }

    pub fn u_sup(&self) -> f64 {
        self.states.iter().map(|s| s.u.max_abs()).fold(0.0, f64::max)
    }

    pub fn phi_sup(&self) -> f64 {
        self.states.iter().map(|s| s.phi.max_abs()).fold(0.0, f64::max)
    }
}

/// A run that stopped early: everything computed so far plus the cause.
#[derive(Debug)]
pub struct Aborted {
    pub partial: Trajectory,
    pub error: Error,
}

impl fmt::Display for Aborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.partial.final_state().map_or(0.0, |s| s.t);
        write!(f, "run aborted after t = {t}: {}", self.error)
    }
}

impl std::error::Error for Aborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Data of one step that does not depend on the Picard iterate.
struct StepData {
    t_next: f64,
    dt: f64,
    phi_bc: Field,
    u_bc: Field,
    heat: Option<Field>,
    potential: Option<Field>,
}

impl StepData {
    fn new(cfg: &SolverConfig, forcing: &Forcing, t_next: f64, dt: f64) -> Result<Self> {
        let grid = &cfg.grid;
        let phi_bc = cfg.bdata.sample_phi0(grid, t_next)?;
        let u_bc = cfg.bdata.sample_u0(grid, t_next)?.map(|v| cfg.homotopy * v)?;
        let sample = |f: &Option<ScalarFn>| {
            f.as_ref()
                .map(|f| Field::from_fn(grid, |x, y| f.eval(x, y, t_next)))
                .transpose()
        };
        Ok(StepData {
            t_next,
            dt,
            phi_bc,
            u_bc,
            heat: sample(&forcing.heat)?,
            potential: sample(&forcing.potential)?,
        })
    }
}

fn sigma_at(cfg: &SolverConfig, v: &Field) -> Result<Field> {
    let floor = -v.min();
    if floor > CLAMP_WARN {
        log::warn!("clamping u below 0 (min {:e}) before evaluating sigma", -floor);
    }
    sigma_field(&cfg.sigma, &v.map(|s| s.max(0.0))?)
}

fn add_potential_forcing(system: &mut LinearSystem, f: &Field) {
    let mut degenerate = vec![false; f.len()];
    for &n in &system.degenerate {
        degenerate[n] = true;
    }
    for (row, &node) in system.unknowns.iter().enumerate() {
        if !degenerate[node] {
            system.rhs[row] += f.values()[node];
        }
    }
}

/// Potential for conductivity `σ(v)` with the step's boundary data.
fn solve_potential(sig: &Field, prev_phi: &Field, step: &StepData, cfg: &SolverConfig) -> Result<Field> {
    let faces = sigma_faces(sig)?;
    let mut system = assemble(&faces, &step.phi_bc, Some(prev_phi))?;
    if let Some(f) = &step.potential {
        add_potential_forcing(&mut system, f);
    }
    solve_spd(&system, &cfg.linear)
}

fn joule_source(sig: &Field, phi: &Field, step: &StepData, cfg: &SolverConfig) -> Result<Field> {
    let q = joule_density(sig, phi, &step.phi_bc)?;
    let values = q
        .values()
        .iter()
        .enumerate()
        .map(|(n, &v)| cfg.homotopy * v + step.heat.as_ref().map_or(0.0, |h| h.values()[n]))
        .collect();
    Field::new(cfg.grid.clone(), values)
}

fn apply_b_step(
    v: &Field,
    u_old: &Field,
    prev_phi: &Field,
    step: &StepData,
    cfg: &SolverConfig,
) -> Result<(Field, Field)> {
    let sig = sigma_at(cfg, v)?;
    let phi = solve_potential(&sig, prev_phi, step, cfg)?;
    let q = joule_source(&sig, &phi, step, cfg)?;
    let u = implicit_euler_step(u_old, &q, step.dt, &step.u_bc, &cfg.linear)?;
    Ok((u, phi))
}

/// One application of B: potential for `σ(v)`, then one implicit heat step
/// from `u_old` with the resulting Joule source. `prev_phi` supplies values
/// on nodes where `σ(v)` vanishes.
pub fn apply_b(
    v: &Field,
    t_next: f64,
    dt: f64,
    u_old: &Field,
    prev_phi: &Field,
    cfg: &SolverConfig,
) -> Result<(Field, Field)> {
    apply_b_forced(v, t_next, dt, u_old, prev_phi, cfg, &Forcing::default())
}

pub fn apply_b_forced(
    v: &Field,
    t_next: f64,
    dt: f64,
    u_old: &Field,
    prev_phi: &Field,
    cfg: &SolverConfig,
    forcing: &Forcing,
) -> Result<(Field, Field)> {
    cfg.grid.check_same(v.grid(), "apply_b: v")?;
    cfg.grid.check_same(u_old.grid(), "apply_b: u_old")?;
    let step = StepData::new(cfg, forcing, t_next, dt)?;
    apply_b_step(v, u_old, prev_phi, &step, cfg)
}

fn picard_to(state: &SimState, t_next: f64, cfg: &SolverConfig, forcing: &Forcing) -> Result<SimState> {
    let dt = t_next - state.t;
    let step = StepData::new(cfg, forcing, t_next, dt)?;
    let mut v = state.u.clone();
    let mut k = 0;
    let u = loop {
        let (u_next, _) = apply_b_step(&v, &state.u, &state.phi, &step, cfg)?;
        let increment = u_next.max_abs_diff(&v)?;
        if k >= 1 && increment <= cfg.picard_tol {
            break u_next;
        }
        if k >= cfg.picard_max {
            return Err(Error::PicardNonConvergence {
                t: t_next,
                dt,
                iterations: k,
                increment,
            });
        }
        v = u_next;
        k += 1;
    };
    let phi = solve_potential(&sigma_at(cfg, &u)?, &state.phi, &step, cfg)?;
    Ok(SimState {
        t: step.t_next,
        u,
        phi,
        picard_iters_last: k,
        slab_index: cfg.slab_of(step.t_next),
    })
}

/// Picard iteration `v^{k+1} = B(v^k)` from `v^0 = u(t)` until
/// `‖v^{k+1} - v^k‖∞ <= picard_tol` (checked from `k = 1`).
pub fn picard_advance(state: &SimState, dt: f64, cfg: &SolverConfig) -> Result<SimState> {
    picard_to(state, state.t + dt, cfg, &Forcing::default())
}

/// Advances to `t_next`, retrying once with two half steps if Picard fails.
pub fn advance(state: &SimState, t_next: f64, cfg: &SolverConfig, forcing: &Forcing) -> Result<SimState> {
    match picard_to(state, t_next, cfg, forcing) {
        Err(e @ Error::PicardNonConvergence { .. }) => {
            log::warn!("{e}; retrying with two half steps");
            let mid = state.t + 0.5 * (t_next - state.t);
            let half = picard_to(state, mid, cfg, forcing)?;
            picard_to(&half, t_next, cfg, forcing)
        }
        other => other,
    }
}

/// State at `t = 0`: `u = homotopy * u0(·, 0)` and the potential for `σ(u)`.
pub fn initial_state(cfg: &SolverConfig, forcing: &Forcing) -> Result<SimState> {
    let u = cfg.bdata.sample_u0(&cfg.grid, 0.0)?.map(|v| cfg.homotopy * v)?;
    let step = StepData::new(cfg, forcing, 0.0, cfg.dt)?;
    let sig = sigma_at(cfg, &u)?;
    let phi = solve_potential(&sig, &step.phi_bc, &step, cfg)?;
    Ok(SimState {
        t: 0.0,
        u,
        phi,
        picard_iters_last: 0,
        slab_index: 0,
    })
}

pub fn run_simulation(cfg: &SolverConfig) -> std::result::Result<Trajectory, Box<Aborted>> {
    run_with_forcing(cfg, &Forcing::default())
}

pub fn run_with_forcing(cfg: &SolverConfig, forcing: &Forcing) -> std::result::Result<Trajectory, Box<Aborted>> {
    let mut traj = Trajectory::default();
    let abort = |traj: Trajectory, error: Error| Box::new(Aborted { partial: traj, error });
    if let Err(e) = cfg.validate() {
        return Err(abort(traj, e));
    }
    let mut monitor = EstimateMonitor::new();
    let state = match initial_state(cfg, forcing) {
        Ok(s) => s,
        Err(e) => return Err(abort(traj, e)),
    };
    let n_steps = cfg.step_count();
    let mut record = |traj: &mut Trajectory, state: SimState, k: usize| -> Result<()> {
        let r = monitor.observe(&state, cfg)?;
        if k.is_multiple_of(cfg.estimates.every) || k == n_steps {
            traj.reports.push(r);
        }
        traj.states.push(state);
        Ok(())
    };
    if let Err(e) = record(&mut traj, state, 0) {
        return Err(abort(traj, e));
    }
    for k in 1..=n_steps {
        let prev = traj.states.last().expect("initial state recorded");
        if prev.slab_index != cfg.slab_of(cfg.time_of(k)) {
            log::debug!("entering slab {} at t = {}", cfg.slab_of(cfg.time_of(k)), prev.t);
        }
        let next = match advance(prev, cfg.time_of(k), cfg, forcing) {
            Ok(s) => s,
            Err(e) => return Err(abort(traj, e)),
        };
        if let Err(e) = record(&mut traj, next, k) {
            return Err(abort(traj, e));
        }
    }
    Ok(traj)
}

/// Residuals of a converged step: relative residual of the potential system
/// for `σ(u)`, and the sup difference between `u` and a fresh heat step from
/// `prev.u` driven by `σ(u) |∇φ|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPointResiduals {
    pub elliptic: f64,
    pub heat: f64,
}

pub fn fixed_point_residuals(
    prev: &SimState,
    state: &SimState,
    cfg: &SolverConfig,
    forcing: &Forcing,
) -> Result<FixedPointResiduals> {
    let step = StepData::new(cfg, forcing, state.t, state.t - prev.t)?;
    let sig = sigma_at(cfg, &state.u)?;
    let faces = sigma_faces(&sig)?;
    let mut system = assemble(&faces, &step.phi_bc, Some(&prev.phi))?;
    if let Some(f) = &step.potential {
        add_potential_forcing(&mut system, f);
    }
    let elliptic = system.relative_residual(&state.phi);
    let q = joule_source(&sig, &state.phi, &step, cfg)?;
    let u_star = implicit_euler_step(&prev.u, &q, step.dt, &step.u_bc, &cfg.linear)?;
    Ok(FixedPointResiduals {
        elliptic,
        heat: u_star.max_abs_diff(&state.u)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HomotopyResult {
    pub eps: f64,
    pub u_sup: f64,
    pub phi_sup: f64,
    pub t_reached: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub final_u: Option<Field>,
}

/// Runs the configuration at each homotopy level in parallel; results come
/// back in the order of `eps_list`.
pub fn homotopy_sweep(cfg: &SolverConfig, eps_list: &[f64]) -> Result<Vec<HomotopyResult>> {
    if let Some(&bad) = eps_list.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::invalid(format!("homotopy level {bad} must lie in (0, 1]")));
    }
    Ok(eps_list
        .par_iter()
        .map(|&eps| {
            let run = run_simulation(&cfg.with_homotopy(eps));
            let (traj, error) = match run {
                Ok(t) => (t, None),
                Err(a) => {
                    let a = *a;
                    (a.partial, Some(a.error.to_string()))
                }
            };
            HomotopyResult {
                eps,
                u_sup: traj.u_sup(),
                phi_sup: traj.phi_sup(),
                t_reached: traj.final_state().map_or(0.0, |s| s.t),
                error,
                final_u: traj.final_state().map(|s| s.u.clone()),
            }
        })
        .collect())
}

/// Minimum of `g(τ) = ε τ^b - τ + c` and the smallness condition
/// `(c + ε) ε^{1/(b-1)} <= (b - 1) / b^{b/(b-1)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlabCriterion {
    pub tau0: f64,
    pub g_min: f64,
    pub cont1_ok: bool,
}

impl SlabCriterion {
    /// Whether an initial gradient norm lies below the minimizer `τ0`.
    pub fn cont2_ok(&self, initial_norm: f64) -> bool {
        initial_norm <= self.tau0
    }
}

pub fn slab_criterion(eps_coef: f64, b: f64, c: f64) -> Result<SlabCriterion> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::invalid(format!("exponent b = {b} must exceed 1")));
    }
    if !(eps_coef > 0.0 && eps_coef.is_finite() && c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("eps_coef and c must be positive"));
    }
    let tau0 = (eps_coef * b).powf(-1.0 / (b - 1.0));
    let g_min = eps_coef * tau0.powf(b) - tau0 + c;
    let lhs = (c + eps_coef) * eps_coef.powf(1.0 / (b - 1.0));
    let rhs = (b - 1.0) / b.powf(b / (b - 1.0));
    Ok(SlabCriterion {
        tau0,
        g_min,
        cont1_ok: lhs <= rhs,
    })
}
