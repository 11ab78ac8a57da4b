use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::canonical_value;
use crate::coupler::{SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::estimates::{check_invariants, degiorgi_sequence, EstimateParams, InvariantStatus, SpaceTime};
use crate::grid::Dim;

pub const ESTIMATES_HEADER: &str = "t,phi_max_defect,joule_energy,exp_moment_m,grad_u_sup,grad_phi_sup,picard_iters";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MThreshold {
    pub m: f64,
    /// `1 / (c1 ‖φ0‖²)`.
    pub threshold: f64,
    pub below: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeGiorgiSummary {
    pub eps_exp: f64,
    pub ell: f64,
    pub k: f64,
    pub w_sup: f64,
    pub y0: f64,
    pub y_last: f64,
    /// First level index from which every `y_n` vanishes.
    pub zero_from: Option<usize>,
    pub decays: bool,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: Value,
    pub completed: bool,
    pub error: Option<String>,
    pub steps: usize,
    pub t_reached: f64,
    pub snapshots: usize,
    pub picard_iters_max: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub phi_max_defect_max: f64,
    pub exp_moment_sup: f64,
    pub mixed_moment_final: f64,
    pub coeff_sup: f64,
    pub a2_worst: Option<f64>,
    pub m_threshold: MThreshold,
    pub invariants: Vec<InvariantStatus>,
    pub invariants_ok: bool,
    pub degiorgi: Option<DeGiorgiSummary>,
}

impl RunSummary {
    pub fn compute(traj: &Trajectory, cfg: &SolverConfig, error: Option<&Error>) -> Result<Self> {
        let reports = &traj.reports;
        let fold = |f: fn(&crate::estimates::EstimateReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
        let invariants = check_invariants(traj, cfg)?;
        let phi0_sup = crate::coupler::phi0_boundary_sup(&cfg.bdata, &cfg.grid, cfg.t_final)?;
        let threshold = EstimateParams::m_threshold(cfg.h1.c1, phi0_sup);
        let degiorgi = degiorgi_summary(traj, cfg)?;
        Ok(RunSummary {
            config: canonical_value(cfg).unwrap_or(Value::Null),
            completed: error.is_none(),
            error: error.map(ToString::to_string),
            steps: traj.states.len().saturating_sub(1),
            t_reached: traj.final_state().map_or(0.0, |s| s.t),
            snapshots: snapshot_indices(traj, cfg).count(),
            picard_iters_max: traj.states.iter().map(|s| s.picard_iters_last).max().unwrap_or(0),
            u_min: traj.states.iter().map(|s| s.u.min()).fold(f64::INFINITY, f64::min),
            u_max: traj.states.iter().map(|s| s.u.max()).fold(f64::NEG_INFINITY, f64::max),
            phi_max_defect_max: fold(|r| r.phi_max_defect),
            exp_moment_sup: fold(|r| r.exp_moment),
            mixed_moment_final: reports.last().map_or(0.0, |r| r.mixed_moment),
            coeff_sup: fold(|r| r.coeff_sup),
            a2_worst: reports.iter().filter_map(|r| r.a2_worst).reduce(f64::max),
            m_threshold: MThreshold {
                m: cfg.estimates.m,
                threshold,
                below: cfg.estimates.m < threshold,
            },
            invariants_ok: invariants.iter().all(|i| i.ok),
            invariants,
            degiorgi,
        })
    }
}

/// `w = e^{eps_exp u}` with top level `k = 2 max(1, ‖e^{u0}‖∞, ‖w‖∞)`.
fn degiorgi_summary(traj: &Trajectory, cfg: &SolverConfig) -> Result<Option<DeGiorgiSummary>> {
    let Some(first) = traj.states.first() else {
        return Ok(None);
    };
    let eps = cfg.estimates.eps_exp;
    let w = SpaceTime::from_trajectory(traj, |u| (eps * u).exp())?;
    if w.slices.is_empty() {
        return Ok(None);
    }
    let e_u0 = first.u.values().iter().map(|u| u.exp()).fold(0.0, f64::max);
    let w_sup = w.sup();
    let k = 2.0 * 1f64.max(e_u0).max(w_sup);
    let seq = degiorgi_sequence(&w, k, cfg.estimates.ell, cfg.estimates.degiorgi_levels)?;
    let zero_from = (0..seq.y.len()).find(|&n| seq.y[n..].iter().all(|&y| y == 0.0));
    Ok(Some(DeGiorgiSummary {
        eps_exp: eps,
        ell: cfg.estimates.ell,
        k,
        w_sup,
        y0: seq.y[0],
        y_last: *seq.y.last().unwrap_or(&0.0),
        zero_from,
        decays: seq.decays,
    }))
}

fn snapshot_indices<'a>(traj: &'a Trajectory, cfg: &'a SolverConfig) -> impl Iterator<Item = usize> + 'a {
    (0..traj.states.len()).filter(move |k| k % cfg.output.snapshot_every == 0)
}

fn state_csv(traj: &Trajectory, k: usize) -> String {
    let s = &traj.states[k];
    let grid = s.u.grid();
    let two = grid.dim() == Dim::Two;
    let mut out = String::from(if two { "x,y,u,phi\n" } else { "x,u,phi\n" });
    for n in 0..grid.node_count() {
        let (x, y) = grid.coords(n);
        let (u, p) = (s.u.values()[n], s.phi.values()[n]);
        if two {
            let _ = writeln!(out, "{x},{y},{u},{p}");
        } else {
            let _ = writeln!(out, "{x},{u},{p}");
        }
    }
    out
}

fn estimates_csv(traj: &Trajectory) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for r in &traj.reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.t, r.phi_max_defect, r.joule_energy, r.exp_moment, r.grad_u_sup, r.grad_phi_sup, r.picard_iters
        );
    }
    out
}

/// Writes snapshots, `estimates.csv`, `report.json` and `manifest.json`
/// (names, sizes and SHA-256 of the other files) into `dir`.
pub fn write_outputs(traj: &Trajectory, cfg: &SolverConfig, dir: &Path, error: Option<&Error>) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = traj.states.len().saturating_sub(1).to_string().len().max(4);
    let mut files: Vec<(String, String)> = snapshot_indices(traj, cfg)
        .map(|k| (format!("states_{k:0width$}.csv"), state_csv(traj, k)))
        .collect();
    files.push(("estimates.csv".into(), estimates_csv(traj)));
    let summary = RunSummary::compute(traj, cfg, error)?;
    let report = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    files.push(("report.json".into(), report));
    files.sort();

    let mut entries = Vec::with_capacity(files.len());
    for (name, content) in &files {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        entries.push(FileEntry {
            name: name.clone(),
            bytes: content.len(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
        });
    }
    let manifest = Manifest { files: entries };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trajectory_writes_header_only() {
        let cfg = SolverConfig::reference_benchmark();
        let dir = tempfile::tempdir().unwrap();
        let m = write_outputs(&Trajectory::default(), &cfg, dir.path(), None).unwrap();
        let names: Vec<&str> = m.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["estimates.csv", "report.json"]);
        let est = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
        assert_eq!(est, format!("{ESTIMATES_HEADER}\n"));
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn snapshot_count_and_hash_stability() {
        let mut cfg = SolverConfig::reference_benchmark();
        cfg.dt = 0.01;
        cfg.t_final = 0.2;
        cfg.output.snapshot_every = 3;
        let traj = crate::coupler::run_simulation(&cfg).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = write_outputs(&traj, &cfg, a.path(), None).unwrap();
        let traj2 = crate::coupler::run_simulation(&cfg).unwrap();
        let mb = write_outputs(&traj2, &cfg, b.path(), None).unwrap();
        assert_eq!(ma, mb);
        let snaps = ma.files.iter().filter(|f| f.name.starts_with("states_")).count();
        let expected = (cfg.t_final / cfg.dt / cfg.output.snapshot_every as f64 + 1e-9).floor() as usize + 1;
        assert_eq!(snaps, expected);
        let est = fs::read_to_string(a.path().join("estimates.csv")).unwrap();
        assert_eq!(est.lines().count(), 1 + traj.reports.len());
    }
}
