//! A priori functionals evaluated on simulated states, the De Giorgi level
//! sequence, and trajectory-wide invariant checks.

pub mod lemmas;

use serde::{Deserialize, Serialize};

use crate::conductivity::{a2_diagnostic, sigma_field, sigma_prime_field};
use crate::coupler::{SimState, SolverConfig, Trajectory};
use crate::elliptic::dirichlet_energy;
use crate::error::{Error, Result};
use crate::grid::{grad_sq_raw, sigma_faces, Dim, Field};

pub use lemmas::{
    discrete_norm, gronwall_bound, interpolation_check, interpolation_exponent, small_lemma_check, ynb_check,
    InterpolationCheck, SmallLemmaCheck, YnbCheck,
};

/// `log ∫ e^{mu}` above which the moment is reported as overflowed.
pub const OVERFLOW_LOG: f64 = 700.0;

/// Monitor parameters: exponential moment order `m`, the exponent `eps_exp` of
/// `w = e^{eps_exp u}`, the level-set integrability `ell`, and cadence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub m: f64,
    pub eps_exp: f64,
    pub ell: f64,
    /// Report every `every` steps (the final state is always reported).
    pub every: usize,
    pub a2_radii: Vec<usize>,
    pub degiorgi_levels: usize,
}

impl EstimateParams {
    /// `m = 0.5 / (c1 ‖φ0‖²)`, `ℓ = 1 + 1/N`, and `eps_exp` at half of `1 / (2 c1 ℓ ‖φ0‖²)` (capped at 0.5).
    pub fn defaults_for(dim: Dim, c1: f64, phi0_sup: f64) -> Self {
        let p2 = phi0_sup * phi0_sup;
        let m = if p2 > 0.0 { 0.5 / (c1 * p2) } else { 1.0 };
        let ell = 1.0 + 1.0 / dim.as_usize() as f64;
        let eps_exp = if p2 > 0.0 {
            (0.5 / (2.0 * c1 * ell * p2)).min(0.5)
        } else {
            0.5
        };
        EstimateParams {
            m,
            eps_exp,
            ell,
            every: 1,
            a2_radii: vec![1, 2, 4],
            degiorgi_levels: 30,
        }
    }

    /// Admissible `ell` range `(1, (N+2)/N)`.
    pub fn ell_range(dim: Dim) -> (f64, f64) {
        let n = dim.as_usize() as f64;
        (1.0, (n + 2.0) / n)
    }

    /// The exponential-moment threshold `1 / (c1 ‖φ0‖²)`.
    pub fn m_threshold(c1: f64, phi0_sup: f64) -> f64 {
        1.0 / (c1 * phi0_sup * phi0_sup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub t: f64,
    /// `max(0, ‖φ‖∞ - max |φ0| on the boundary)`.
    pub phi_max_defect: f64,
    pub joule_energy: f64,
    /// Energy of the sampled `φ0(·, t)` extension under the same face conductivities.
    pub joule_energy_bc: f64,
    /// `∫ e^{mu}`; `+inf` when overflowed.
    pub exp_moment: f64,
    pub exp_moment_log: f64,
    /// `∫ e^{mu} |∇u|²` at this time.
    pub mixed_moment_rate: f64,
    /// Left-endpoint time integral of the rate since the start of the current slab.
    pub mixed_moment: f64,
    pub grad_u_sup: f64,
    pub grad_phi_sup: f64,
    /// `‖σ'(u)/σ(u) ∇u‖∞`.
    pub coeff_sup: f64,
    pub u_sup: f64,
    pub u_min: f64,
    /// `None` when no configured window fits the grid.
    pub a2_worst: Option<f64>,
    pub picard_iters: usize,
    pub overflow: bool,
}

impl EstimateReport {
    /// Finite entries, nonnegative defect and energy, and the lower bound
    /// `∫ e^{mu} >= |Ω| e^{m min u}`.
    pub fn is_consistent(&self, volume: f64, m: f64) -> bool {
        let finite = [
            self.phi_max_defect,
            self.joule_energy,
            self.joule_energy_bc,
            self.exp_moment,
            self.mixed_moment_rate,
            self.mixed_moment,
            self.grad_u_sup,
            self.grad_phi_sup,
            self.coeff_sup,
            self.u_sup,
        ]
        .iter()
        .all(|v| v.is_finite());
        finite
            && self.phi_max_defect >= 0.0
            && self.joule_energy >= 0.0
            && self.exp_moment >= volume * (m * self.u_min).exp() * (1.0 - 1e-12)
    }
}

/// `log Σ w_i e^{a_i}` without overflow.
fn log_weighted_exp_sum(weights: impl Iterator<Item = f64>, exps: &[f64]) -> f64 {
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    let s: f64 = weights.zip(exps).map(|(w, a)| w * (a - top).exp()).sum();
    top + s.ln()
}

fn clamp_nonneg(u: &Field) -> Result<Field> {
    u.map(|v| v.max(0.0))
}

/// Evaluates every functional on one state.
pub fn report(state: &SimState, cfg: &SolverConfig) -> Result<EstimateReport> {
    let grid = state.u.grid();
    grid.check_same(&cfg.grid, "report: state grid vs config")?;
    let uc = clamp_nonneg(&state.u)?;
    let sig = sigma_field(&cfg.sigma, &uc)?;
    let faces = sigma_faces(&sig)?;
    let phi0 = cfg.bdata.sample_phi0(grid, state.t)?;

    let phi_max_defect = (state.phi.max_abs() - phi0.boundary_max_abs()).max(0.0);
    let joule_energy = dirichlet_energy(&faces, &state.phi)?;
    let joule_energy_bc = dirichlet_energy(&faces, &phi0)?;

    let m = cfg.estimates.m;
    let mu: Vec<f64> = state.u.values().iter().map(|&v| m * v).collect();
    let weights = || (0..grid.node_count()).map(|n| grid.weight(n));
    let exp_moment_log = log_weighted_exp_sum(weights(), &mu);
    let mut overflow = exp_moment_log > OVERFLOW_LOG;
    let exp_moment = if overflow { f64::INFINITY } else { exp_moment_log.exp() };

    let gu = grad_sq_raw(&state.u);
    let gphi = grad_sq_raw(&state.phi);
    let mixed_terms: Vec<f64> = mu
        .iter()
        .zip(gu.values())
        .map(|(a, g)| if *g > 0.0 { a + g.ln() } else { f64::NEG_INFINITY })
        .collect();
    let mixed_log = log_weighted_exp_sum(weights(), &mixed_terms);
    let mixed_moment_rate = if mixed_log > OVERFLOW_LOG {
        overflow = true;
        f64::INFINITY
    } else {
        mixed_log.exp()
    };

    let sp = sigma_prime_field(&cfg.sigma, &uc)?;
    let coeff_sup = sp
        .values()
        .iter()
        .zip(sig.values())
        .zip(gu.values())
        .map(|((d, s), g)| (d / s).abs() * g.sqrt())
        .fold(0.0, f64::max);

    let radii: Vec<usize> = cfg
        .estimates
        .a2_radii
        .iter()
        .copied()
        .filter(|&r| r > 0 && 2 * r <= grid.nx() && (grid.dim() == Dim::One || 2 * r <= grid.ny()))
        .collect();
    let a2_worst = if radii.is_empty() {
        None
    } else {
        Some(a2_diagnostic(&sig, &radii)?)
    };

    Ok(EstimateReport {
        t: state.t,
        phi_max_defect,
        joule_energy,
        joule_energy_bc,
        exp_moment,
        exp_moment_log,
        mixed_moment_rate,
        mixed_moment: 0.0,
        grad_u_sup: gu.max().sqrt(),
        grad_phi_sup: gphi.max().sqrt(),
        coeff_sup,
        u_sup: state.u.max_abs(),
        u_min: state.u.min(),
        a2_worst,
        picard_iters: state.picard_iters_last,
        overflow,
    })
}

/// Accumulates the time-integrated mixed moment across reports, restarting
/// at every slab boundary.
#[derive(Clone, Debug, Default)]
pub struct EstimateMonitor {
    cumulative: f64,
    last: Option<(f64, f64, usize)>,
}

impl EstimateMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Must be called on every state in time order for the integral to be
    /// left-endpoint exact; states that are not reported still need `accumulate`.
    pub fn observe(&mut self, state: &SimState, cfg: &SolverConfig) -> Result<EstimateReport> {
        let mut r = report(state, cfg)?;
        self.advance(state.t, r.mixed_moment_rate, state.slab_index);
        r.mixed_moment = self.cumulative;
        Ok(r)
    }

    fn advance(&mut self, t: f64, rate: f64, slab: usize) {
        match self.last {
            Some((t_prev, rate_prev, slab_prev)) if slab_prev == slab => {
                self.cumulative += rate_prev * (t - t_prev);
            }
            Some(_) => self.cumulative = 0.0,
            None => {}
        }
        self.last = Some((t, rate, slab));
    }
}

/// Space-time samples of a field with left-endpoint time weights.
#[derive(Clone, Debug)]
pub struct SpaceTime {
    pub slices: Vec<Field>,
    pub weights: Vec<f64>,
}

impl SpaceTime {
    /// `slices[k] = f(u(t_k))` with weight `t_{k+1} - t_k`, for all but the final state.
    pub fn from_trajectory(traj: &Trajectory, f: impl Fn(f64) -> f64) -> Result<Self> {
        let states = &traj.states;
        let mut slices = Vec::new();
        let mut weights = Vec::new();
        for w in states.windows(2) {
            slices.push(w[0].u.map(&f)?);
            weights.push(w[1].t - w[0].t);
        }
        Ok(SpaceTime { slices, weights })
    }

    /// `|Q_T|` under the quadrature.
    pub fn measure(&self) -> f64 {
        self.slices
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * s.grid().volume())
            .sum()
    }

    pub fn sup(&self) -> f64 {
        self.slices.iter().map(Field::max_abs).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSequence {
    pub k: f64,
    /// `k_n = k - k / 2^{n+1}`.
    pub levels: Vec<f64>,
    /// `y_n = (∫∫ [(w - k_n)^+]^{2ℓ})^{1/ℓ}`.
    pub y: Vec<f64>,
    /// Quadrature measure of `{w >= k_n}`.
    pub measures: Vec<f64>,
    /// `y_{n_max} <= 1e-6 y_0` with a nonincreasing tail.
    pub decays: bool,
}

pub fn degiorgi_sequence(w: &SpaceTime, k: f64, ell: f64, n_max: usize) -> Result<LevelSequence> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("top level k = {k} must be positive")));
    }
    if w.slices.len() != w.weights.len() {
        return Err(Error::invalid("one time weight per slice required"));
    }
    let dim = w.slices.first().map_or(Dim::One, |s| s.grid().dim());
    let (lo, hi) = EstimateParams::ell_range(dim);
    if !(ell > lo && ell < hi) {
        return Err(Error::invalid(format!(
            "[lemma-range] ell = {ell} must lie in ({lo}, {hi})"
        )));
    }
    let mut levels = Vec::with_capacity(n_max + 1);
    let mut y = Vec::with_capacity(n_max + 1);
    let mut measures = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let kn = k - k / 2f64.powi(n as i32 + 1);
        let mut integral = 0.0;
        let mut measure = 0.0;
        for (slice, &dt) in w.slices.iter().zip(&w.weights) {
            let grid = slice.grid();
            for (node, &v) in slice.values().iter().enumerate() {
                if v >= kn {
                    let wt = dt * grid.weight(node);
                    measure += wt;
                    integral += wt * (v - kn).powf(2.0 * ell);
                }
            }
        }
        levels.push(kn);
        y.push(integral.powf(1.0 / ell));
        measures.push(measure);
    }
    let y0 = y[0];
    let last = *y.last().unwrap_or(&0.0);
    let tail_start = y.len() / 2;
    let monotone_tail = y[tail_start..].windows(2).all(|p| p[1] <= p[0]);
    Ok(LevelSequence {
        k,
        levels,
        y,
        measures,
        decays: last <= 1e-6 * y0 && monotone_tail,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantStatus {
    pub name: String,
    pub ok: bool,
    /// The worst observed value of the monitored quantity.
    pub worst: f64,
    pub limit: f64,
}

/// Trajectory-wide checks: `u >= -1e-12`, φ within its boundary range ± 1e-8,
/// the Joule energy inequality, and finiteness of every report.
pub fn check_invariants(traj: &Trajectory, cfg: &SolverConfig) -> Result<Vec<InvariantStatus>> {
    let mut floor = 0.0f64;
    let mut phi_excess = 0.0f64;
    for s in &traj.states {
        floor = floor.max(-s.u.min());
        let phi0 = cfg.bdata.sample_phi0(s.u.grid(), s.t)?;
        let (lo, hi) = phi0.boundary_range();
        phi_excess = phi_excess.max(s.phi.max() - hi).max(lo - s.phi.min());
    }
    let mut energy_ratio = 0.0f64;
    let mut all_finite = true;
    let volume = cfg.grid.volume();
    for r in &traj.reports {
        let excess = r.joule_energy - r.joule_energy_bc * (1.0 + 1e-8) - 1e-18;
        if excess > 0.0 {
            energy_ratio = energy_ratio.max(r.joule_energy / r.joule_energy_bc.max(f64::MIN_POSITIVE));
        }
        all_finite &= !r.overflow && r.is_consistent(volume, cfg.estimates.m);
    }
    Ok(vec![
        InvariantStatus {
            name: "nonnegativity".into(),
            ok: floor <= 1e-12,
            worst: floor.max(0.0),
            limit: 1e-12,
        },
        InvariantStatus {
            name: "max_principle".into(),
            ok: phi_excess <= 1e-8,
            worst: phi_excess.max(0.0),
            limit: 1e-8,
        },
        InvariantStatus {
            name: "joule_energy".into(),
            ok: energy_ratio == 0.0,
            worst: energy_ratio,
            limit: 1.0 + 1e-8,
        },
        InvariantStatus {
            name: "finite_reports".into(),
            ok: all_finite,
            worst: if all_finite { 0.0 } else { 1.0 },
            limit: 0.0,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn log_sum_matches_direct() {
        let w = [0.5f64, 1.0, 0.5];
        let a = [0.0f64, 1.0, 2.0];
        let direct: f64 = w.iter().zip(&a).map(|(w, a)| w * a.exp()).sum();
        let l = log_weighted_exp_sum(w.iter().copied(), &a);
        assert!((l.exp() - direct).abs() < 1e-14 * direct);
        let huge = [800.0, 0.0];
        assert!((log_weighted_exp_sum([1.0, 1.0].into_iter(), &huge) - 800.0).abs() < 1e-12);
    }

    fn constant_space_time(c: f64, steps: usize) -> SpaceTime {
        let g = GridSpec::unit_square(9).unwrap();
        SpaceTime {
            slices: vec![Field::constant(&g, c).unwrap(); steps],
            weights: vec![0.1; steps],
        }
    }

    #[test]
    fn degiorgi_below_first_level_vanishes() {
        let st = constant_space_time(0.9, 10);
        let s = degiorgi_sequence(&st, 2.0, 1.5, 12).unwrap();
        assert!(s.y.iter().all(|&y| y == 0.0));
        assert!(s.measures.iter().all(|&m| m == 0.0));
        assert!(s.decays);
        assert!(s.levels.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn degiorgi_constant_at_top_level() {
        let k = 3.0;
        let ell = 1.5;
        let st = constant_space_time(k, 10);
        let q = st.measure();
        let s = degiorgi_sequence(&st, k, ell, 20).unwrap();
        for (n, &y) in s.y.iter().enumerate() {
            let d = k / 2f64.powi(n as i32 + 1);
            let exact = q.powf(1.0 / ell) * d * d;
            assert!((y - exact).abs() <= 1e-12 * exact, "n = {n}: {y} vs {exact}");
        }
        assert!(s.measures.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn degiorgi_rejects_bad_arguments() {
        let st = constant_space_time(1.0, 2);
        assert!(degiorgi_sequence(&st, 0.0, 1.5, 3).is_err());
        // (N+2)/N = 2 in two dimensions
        assert!(degiorgi_sequence(&st, 1.0, 2.5, 3).is_err());
        assert!(degiorgi_sequence(&st, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn default_params_are_in_range() {
        for dim in [Dim::One, Dim::Two] {
            let p = EstimateParams::defaults_for(dim, 1.1, 1.0);
            let (lo, hi) = EstimateParams::ell_range(dim);
            assert!(p.ell > lo && p.ell < hi);
            assert!(p.m < EstimateParams::m_threshold(1.1, 1.0));
            assert!(p.eps_exp > 0.0 && p.eps_exp < 1.0);
        }
    }
}
