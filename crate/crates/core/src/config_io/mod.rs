//! JSON run configuration: parsing with exhaustive validation, a canonical
//! writer, and the output files of a run.

mod output;

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::conductivity::{verify_h1, ConductivityModel, H1Constants};
use crate::coupler::{phi0_boundary_sup, OutputControls, SolverConfig};
use crate::elliptic::SolverSettings;
use crate::error::{ConfigError, Error, Result, Violation, ViolationTag};
use crate::estimates::EstimateParams;
use crate::expr::{Expr, ScalarFn};
use crate::grid::{Dim, GridSpec};
use crate::parabolic::BoundaryData;

pub use output::{write_outputs, FileEntry, Manifest, RunSummary};

/// Parabolic-boundary samples used to check `u0 >= 0`.
pub const U0_SAMPLES: usize = 1000;

struct Collector {
    violations: Vec<Violation>,
}

impl Collector {
    fn push(&mut self, tag: ViolationTag, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            tag,
            location: location.into(),
            message: message.into(),
        });
    }

    fn section<'a>(
        &mut self,
        root: &'a Map<String, Value>,
        key: &str,
        required: bool,
    ) -> Option<&'a Map<String, Value>> {
        match root.get(key) {
            None => {
                if required {
                    self.push(ViolationTag::Schema, key, "required section is missing");
                }
                None
            }
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                self.push(ViolationTag::Schema, key, "expected an object");
                None
            }
        }
    }

    fn known_keys(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                let loc = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                self.push(
                    ViolationTag::Schema,
                    loc,
                    format!("unknown key; expected one of {}", allowed.join(", ")),
                );
            }
        }
    }

    fn num(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match obj.get(key) {
            None => None,
            Some(Value::Number(n)) => n.as_f64(),
            Some(_) => {
                self.push(ViolationTag::Schema, format!("{path}.{key}"), "expected a number");
                None
            }
        }
    }

    fn req_num(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        if !obj.contains_key(key) {
            self.push(
                ViolationTag::Schema,
                format!("{path}.{key}"),
                "required field is missing",
            );
        }
        self.num(obj, path, key)
    }

    fn count(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<usize> {
        match obj.get(key) {
            None => None,
            Some(v) => match v.as_u64() {
                Some(n) => Some(n as usize),
                None => {
                    self.push(
                        ViolationTag::Schema,
                        format!("{path}.{key}"),
                        "expected a nonnegative integer",
                    );
                    None
                }
            },
        }
    }

    fn string<'a>(&mut self, obj: &'a Map<String, Value>, path: &str, key: &str, required: bool) -> Option<&'a str> {
        match obj.get(key) {
            None => {
                if required {
                    self.push(
                        ViolationTag::Schema,
                        format!("{path}.{key}"),
                        "required field is missing",
                    );
                }
                None
            }
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.push(ViolationTag::Schema, format!("{path}.{key}"), "expected a string");
                None
            }
        }
    }

    fn num_list(&mut self, obj: &Map<String, Value>, path: &str, key: &str) -> Option<Vec<f64>> {
        let loc = format!("{path}.{key}");
        match obj.get(key)? {
            Value::Array(a) => {
                let v: Option<Vec<f64>> = a.iter().map(Value::as_f64).collect();
                if v.is_none() {
                    self.push(ViolationTag::Schema, loc, "expected an array of numbers");
                }
                v
            }
            _ => {
                self.push(ViolationTag::Schema, loc, "expected an array of numbers");
                None
            }
        }
    }

    fn positive(&mut self, tag: ViolationTag, loc: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if x > 0.0 && x.is_finite() => Some(x),
            Some(x) => {
                self.push(tag, loc, format!("{x} must be positive and finite"));
                None
            }
            None => None,
        }
    }
}

fn parse_grid(c: &mut Collector, obj: &Map<String, Value>) -> Option<GridSpec> {
    c.known_keys(obj, "grid", &["dim", "nx", "ny", "lx", "ly"]);
    let dim = c.count(obj, "grid", "dim");
    if !obj.contains_key("dim") {
        c.push(ViolationTag::Schema, "grid.dim", "required field is missing");
    }
    let nx = c.count(obj, "grid", "nx");
    if !obj.contains_key("nx") {
        c.push(ViolationTag::Schema, "grid.nx", "required field is missing");
    }
    let lx = c.num(obj, "grid", "lx").unwrap_or(1.0);
    let made = match dim {
        Some(1) => {
            if obj.contains_key("ny") || obj.contains_key("ly") {
                c.push(ViolationTag::Grid, "grid", "ny/ly are only allowed when dim = 2");
            }
            nx.map(|nx| GridSpec::line(nx, lx))
        }
        Some(2) => {
            let ny = c.count(obj, "grid", "ny");
            if !obj.contains_key("ny") {
                c.push(ViolationTag::Schema, "grid.ny", "required when dim = 2");
            }
            let ly = c.num(obj, "grid", "ly").unwrap_or(1.0);
            match (nx, ny) {
                (Some(nx), Some(ny)) => Some(GridSpec::rect(nx, ny, lx, ly)),
                _ => None,
            }
        }
        Some(d) => {
            c.push(ViolationTag::Grid, "grid.dim", format!("dimension {d} is not 1 or 2"));
            None
        }
        None => None,
    };
    match made? {
        Ok(g) => Some(g),
        Err(e) => {
            c.push(ViolationTag::Grid, "grid", e.to_string());
            None
        }
    }
}

/// Two-column `s,sigma` CSV; a non-numeric first row is taken as a header.
fn read_table(c: &mut Collector, path: &Path) -> Option<Vec<(f64, f64)>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            c.push(ViolationTag::Schema, "sigma.path", format!("{}: {e}", path.display()));
            return None;
        }
    };
    let mut pts = Vec::new();
    let rows = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    for (idx, (line_no, line)) in rows.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => pts.push(p),
            None if idx == 0 && cols.len() == 2 => {}
            None => {
                c.push(
                    ViolationTag::Schema,
                    "sigma.path",
                    format!(
                        "{} line {line_no}: expected two comma-separated numbers",
                        path.display()
                    ),
                );
                return None;
            }
        }
    }
    Some(pts)
}

fn parse_sigma(c: &mut Collector, obj: Option<&Map<String, Value>>, base: Option<&Path>) -> Option<ConductivityModel> {
    let Some(obj) = obj else {
        return Some(ConductivityModel::default());
    };
    let kind = c.string(obj, "sigma", "kind", true)?;
    let built = match kind {
        "constant" => {
            c.known_keys(obj, "sigma", &["kind", "value"]);
            let v = c.req_num(obj, "sigma", "value")?;
            ConductivityModel::constant(v)
        }
        "exponential_decay" => {
            c.known_keys(obj, "sigma", &["kind", "rate"]);
            let r = c.req_num(obj, "sigma", "rate")?;
            ConductivityModel::exponential_decay(r)
        }
        "oscillatory_sine" => {
            c.known_keys(obj, "sigma", &["kind", "c3", "c0", "beta", "gamma"]);
            let ConductivityModel::OscillatorySine { c3, c0, beta, gamma } = ConductivityModel::default() else {
                unreachable!("default law is oscillatory");
            };
            let c3 = c.num(obj, "sigma", "c3").unwrap_or(c3);
            let c0 = c.num(obj, "sigma", "c0").unwrap_or(c0);
            let beta = c.num(obj, "sigma", "beta").unwrap_or(beta);
            let gamma = c.num(obj, "sigma", "gamma").unwrap_or(gamma);
            ConductivityModel::oscillatory(c3, c0, beta, gamma)
        }
        "tabulated" => {
            c.known_keys(obj, "sigma", &["kind", "points", "path"]);
            let pts = match (obj.get("points"), c.string(obj, "sigma", "path", false)) {
                (Some(Value::Array(rows)), None) => {
                    let pts: Option<Vec<(f64, f64)>> = rows
                        .iter()
                        .map(|r| match r.as_array().map(Vec::as_slice) {
                            Some([a, b]) => Some((a.as_f64()?, b.as_f64()?)),
                            _ => None,
                        })
                        .collect();
                    if pts.is_none() {
                        c.push(ViolationTag::Schema, "sigma.points", "expected [[s, sigma], ...]");
                    }
                    pts?
                }
                (None, Some(p)) => {
                    let path = match base {
                        Some(b) => b.join(p),
                        None => PathBuf::from(p),
                    };
                    read_table(c, &path)?
                }
                _ => {
                    c.push(
                        ViolationTag::Schema,
                        "sigma",
                        "tabulated law needs exactly one of points or path",
                    );
                    return None;
                }
            };
            if pts.first().is_some_and(|p| p.0 != 0.0) {
                c.push(
                    ViolationTag::H1,
                    "sigma.points",
                    "table must start at s = 0 (sigma is defined on [0, inf))",
                );
            }
            ConductivityModel::tabulated(&pts)
        }
        other => {
            c.push(
                ViolationTag::Schema,
                "sigma.kind",
                format!("unknown kind {other:?}; expected constant, exponential_decay, oscillatory_sine or tabulated"),
            );
            return None;
        }
    };
    match built {
        Ok(m) => Some(m),
        Err(e) => {
            c.push(ViolationTag::H1, "sigma", e.to_string());
            None
        }
    }
}

fn parse_expr(c: &mut Collector, obj: &Map<String, Value>, key: &str) -> Option<ScalarFn> {
    let src = c.string(obj, "boundary", key, true)?;
    match Expr::parse(src) {
        Ok(e) => Some(ScalarFn::Expr(e)),
        Err(e) => {
            c.push(ViolationTag::Expr, format!("boundary.{key}"), format!("{src:?}: {e}"));
            None
        }
    }
}

/// Sample points `(x, y, t)` on the parabolic boundary: the initial slice and
/// the lateral boundary over `[0, t_final]`.
fn parabolic_boundary_samples(grid: &GridSpec, t_final: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let (lx, ly) = (grid.lx(), grid.ly());
    let half = n / 2;
    let mut pts = Vec::with_capacity(n + grid.node_count());
    match grid.dim() {
        Dim::One => {
            for k in 0..half {
                pts.push((lx * k as f64 / (half - 1) as f64, 0.0, 0.0));
            }
            let per_side = (n - half) / 2;
            for k in 0..per_side {
                let t = t_final * k as f64 / (per_side - 1).max(1) as f64;
                pts.push((0.0, 0.0, t));
                pts.push((lx, 0.0, t));
            }
        }
        Dim::Two => {
            let side = (half as f64).sqrt().ceil() as usize;
            for j in 0..side {
                for i in 0..side {
                    pts.push((
                        lx * i as f64 / (side - 1) as f64,
                        ly * j as f64 / (side - 1) as f64,
                        0.0,
                    ));
                }
            }
            let perimeter = 2.0 * (lx + ly);
            let n_s = 25;
            let n_t = (n - half) / n_s;
            for a in 0..n_s {
                let s = perimeter * a as f64 / n_s as f64;
                let (x, y) = if s < lx {
                    (s, 0.0)
                } else if s < lx + ly {
                    (lx, s - lx)
                } else if s < 2.0 * lx + ly {
                    (2.0 * lx + ly - s, ly)
                } else {
                    (0.0, perimeter - s)
                };
                for b in 0..n_t {
                    pts.push((x, y, t_final * b as f64 / (n_t - 1).max(1) as f64));
                }
            }
        }
    }
    for node in 0..grid.node_count() {
        let (x, y) = grid.coords(node);
        pts.push((x, y, 0.0));
    }
    pts
}

fn check_boundary_data(c: &mut Collector, grid: &GridSpec, t_final: f64, bdata: &BoundaryData) {
    let mut worst: Option<(f64, (f64, f64, f64))> = None;
    let mut non_finite = None;
    for p in parabolic_boundary_samples(grid, t_final, U0_SAMPLES) {
        let v = bdata.u0.eval(p.0, p.1, p.2);
        if !v.is_finite() {
            non_finite.get_or_insert(p);
        } else if v < 0.0 && worst.is_none_or(|(w, _)| v < w) {
            worst = Some((v, p));
        }
    }
    if let Some((v, (x, y, t))) = worst {
        c.push(
            ViolationTag::H2,
            "boundary.u0",
            format!("u0 must be >= 0 on the parabolic boundary; u0({x}, {y}, {t}) = {v}"),
        );
    }
    if let Some((x, y, t)) = non_finite {
        c.push(
            ViolationTag::H2,
            "boundary.u0",
            format!("u0({x}, {y}, {t}) is not finite"),
        );
    }
    for k in 0..=20 {
        let t = t_final * k as f64 / 20.0;
        for node in grid.boundary_nodes() {
            let (x, y) = grid.coords(node);
            if !bdata.phi0.eval(x, y, t).is_finite() {
                c.push(
                    ViolationTag::H2,
                    "boundary.phi0",
                    format!("phi0({x}, {y}, {t}) is not finite"),
                );
                return;
            }
        }
    }
}

/// Parses and validates a configuration. Relative table paths resolve against
/// the current directory.
pub fn parse_config(text: &str) -> Result<SolverConfig> {
    parse_config_with_base(text, None)
}

/// Reads a configuration file; relative table paths resolve against its directory.
pub fn load_config(path: &Path) -> Result<SolverConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_with_base(&text, path.parent())
}

pub fn parse_config_with_base(text: &str, base: Option<&Path>) -> Result<SolverConfig> {
    parse_inner(text, base, true)
}

/// Like [`load_config`] but leaves the H1 bounds unchecked, for callers
/// that want to report the margins themselves.
pub fn load_config_without_h1(path: &Path) -> Result<SolverConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_inner(&text, path.parent(), false)
}

fn parse_inner(text: &str, base: Option<&Path>, check_h1: bool) -> Result<SolverConfig> {
    let mut c = Collector { violations: Vec::new() };
    let root: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            c.push(
                ViolationTag::Schema,
                format!("line {}, column {}", e.line(), e.column()),
                e.to_string(),
            );
            return Err(ConfigError {
                violations: c.violations,
            }
            .into());
        }
    };
    let Some(root) = root.as_object() else {
        c.push(ViolationTag::Schema, "$", "configuration must be a JSON object");
        return Err(ConfigError {
            violations: c.violations,
        }
        .into());
    };
    c.known_keys(
        root,
        "",
        &[
            "grid",
            "sigma",
            "h1",
            "boundary",
            "time",
            "picard",
            "estimates",
            "homotopy",
            "output",
        ],
    );

    let grid = c.section(root, "grid", true).and_then(|g| parse_grid(&mut c, g));
    let sigma_obj = c.section(root, "sigma", false);
    let sigma = parse_sigma(&mut c, sigma_obj, base);

    let bdata = c.section(root, "boundary", true).and_then(|b| {
        c.known_keys(b, "boundary", &["u0", "phi0"]);
        let u0 = parse_expr(&mut c, b, "u0");
        let phi0 = parse_expr(&mut c, b, "phi0");
        Some(BoundaryData::new(u0?, phi0?))
    });

    let (mut dt, mut t_final, mut slab) = (None, None, Some(1.0));
    if let Some(t) = c.section(root, "time", true) {
        c.known_keys(t, "time", &["dt", "t_final", "slab_length"]);
        let v = c.req_num(t, "time", "dt");
        dt = c.positive(ViolationTag::Schema, "time.dt", v);
        t_final = c.req_num(t, "time", "t_final");
        if let Some(tf) = t_final.filter(|tf| !(*tf >= 0.0 && tf.is_finite())) {
            c.push(ViolationTag::Schema, "time.t_final", format!("{tf} must be >= 0"));
            t_final = None;
        }
        if let Some(s) = c.num(t, "time", "slab_length") {
            slab = c.positive(ViolationTag::Schema, "time.slab_length", Some(s));
        }
    }

    let mut picard_tol = Some(1e-9);
    let mut picard_max = Some(50);
    let mut linear = SolverSettings::default();
    if let Some(p) = c.section(root, "picard", false) {
        c.known_keys(p, "picard", &["tol", "max_iter", "linear_tol", "linear_max_iter"]);
        if let Some(v) = c.num(p, "picard", "tol") {
            picard_tol = c.positive(ViolationTag::Schema, "picard.tol", Some(v));
        }
        if let Some(n) = c.count(p, "picard", "max_iter") {
            if n == 0 {
                c.push(ViolationTag::Schema, "picard.max_iter", "must be at least 1");
            }
            picard_max = Some(n);
        }
        if let Some(v) = c.num(p, "picard", "linear_tol") {
            linear.tol = c
                .positive(ViolationTag::Schema, "picard.linear_tol", Some(v))
                .unwrap_or(linear.tol);
        }
        linear.max_iter = c.count(p, "picard", "linear_max_iter");
    }

    let mut h1_given: Option<(Map<String, Value>, bool)> = None;
    if let Some(h) = c.section(root, "h1", false) {
        c.known_keys(h, "h1", &["c0", "c1", "c2", "beta", "gamma", "s_max", "samples"]);
        h1_given = Some((h.clone(), true));
    }

    let est_obj = c.section(root, "estimates", false).cloned();
    if let Some(e) = &est_obj {
        c.known_keys(
            e,
            "estimates",
            &["m", "eps_exp", "ell", "every", "a2_radii", "degiorgi_levels"],
        );
    }
    let hom_obj = c.section(root, "homotopy", false).cloned();
    if let Some(h) = &hom_obj {
        c.known_keys(h, "homotopy", &["eps"]);
    }
    let out_obj = c.section(root, "output", false).cloned();
    let mut output = OutputControls::default();
    if let Some(o) = &out_obj {
        c.known_keys(o, "output", &["snapshot_every", "strict"]);
        if let Some(n) = c.count(o, "output", "snapshot_every") {
            if n == 0 {
                c.push(ViolationTag::Schema, "output.snapshot_every", "must be at least 1");
            }
            output.snapshot_every = n;
        }
        match o.get("strict") {
            None => {}
            Some(Value::Bool(b)) => output.strict = *b,
            Some(_) => c.push(ViolationTag::Schema, "output.strict", "expected a boolean"),
        }
    }

    let eps_homotopy = match &hom_obj {
        Some(h) => {
            let list = c.num_list(h, "homotopy", "eps").unwrap_or_default();
            for (i, e) in list.iter().enumerate() {
                if !(*e > 0.0 && *e <= 1.0) {
                    c.push(
                        ViolationTag::LemmaRange,
                        format!("homotopy.eps[{i}]"),
                        format!("{e} must lie in (0, 1]"),
                    );
                }
            }
            list
        }
        None => vec![0.25, 0.5, 0.75, 1.0],
    };

    if let (Some(g), Some(tf), Some(b)) = (&grid, t_final, &bdata) {
        check_boundary_data(&mut c, g, tf, b);
    }

    // Everything below needs the core pieces.
    let (Some(grid), Some(sigma), Some(bdata), Some(dt), Some(t_final), Some(slab), Some(picard_tol), Some(picard_max)) =
        (grid, sigma, bdata, dt, t_final, slab, picard_tol, picard_max)
    else {
        return Err(ConfigError {
            violations: c.violations,
        }
        .into());
    };

    let natural = sigma.natural_h1();
    let default_s_max = match &sigma {
        ConductivityModel::Tabulated(t) => t.range().1,
        _ => 20.0,
    };
    let (h1, h1_s_max, h1_samples) = match &h1_given {
        Some((h, _)) => {
            let h1 = H1Constants {
                c0: c.num(h, "h1", "c0").unwrap_or(natural.c0),
                c1: c.num(h, "h1", "c1").unwrap_or(natural.c1),
                c2: c.num(h, "h1", "c2").unwrap_or(natural.c2),
                beta: c.num(h, "h1", "beta").unwrap_or(natural.beta),
                gamma: c.num(h, "h1", "gamma").unwrap_or(natural.gamma),
            };
            let s_max = c.num(h, "h1", "s_max").unwrap_or(default_s_max);
            let samples = c.count(h, "h1", "samples").unwrap_or(2001);
            (h1, s_max, samples)
        }
        None => (natural, default_s_max, 2001),
    };
    match verify_h1(&sigma, &h1, h1_s_max, h1_samples) {
        _ if !check_h1 => {}
        Ok(r) => {
            for (name, b) in [
                ("lower bound c0 e^{-beta s} <= sigma", r.lower),
                ("upper bound sigma <= c1", r.upper),
                ("derivative bound |sigma'| <= c2 e^{gamma s}", r.deriv),
            ] {
                if !b.ok {
                    c.push(
                        ViolationTag::H1,
                        "h1",
                        format!("{name} fails at s = {} (margin {:e})", b.worst_s, b.margin),
                    );
                }
            }
        }
        Err(e) => c.push(ViolationTag::H1, "h1", e.to_string()),
    }

    let phi0_sup = phi0_boundary_sup(&bdata, &grid, t_final).unwrap_or(0.0);
    let mut est = EstimateParams::defaults_for(grid.dim(), h1.c1, phi0_sup);
    if let Some(e) = &est_obj {
        if let Some(m) = c.num(e, "estimates", "m") {
            est.m = m;
            if !(m > 0.0 && m.is_finite()) {
                c.push(
                    ViolationTag::LemmaRange,
                    "estimates.m",
                    format!("m = {m} must be positive"),
                );
            }
        }
        if let Some(v) = c.num(e, "estimates", "eps_exp") {
            est.eps_exp = v;
            if !(v > 0.0 && v < 1.0) {
                c.push(
                    ViolationTag::LemmaRange,
                    "estimates.eps_exp",
                    format!("eps_exp = {v} must lie in (0, 1)"),
                );
            }
        }
        if let Some(v) = c.num(e, "estimates", "ell") {
            est.ell = v;
            let (lo, hi) = EstimateParams::ell_range(grid.dim());
            if !(v > lo && v < hi) {
                c.push(
                    ViolationTag::LemmaRange,
                    "estimates.ell",
                    format!("ell = {v} must satisfy {lo} < ell < (N+2)/N = {hi}"),
                );
            }
        }
        if let Some(n) = c.count(e, "estimates", "every") {
            if n == 0 {
                c.push(ViolationTag::Schema, "estimates.every", "must be at least 1");
            }
            est.every = n;
        }
        if let Some(list) = c.num_list(e, "estimates", "a2_radii") {
            if list.iter().any(|r| !(*r >= 1.0 && r.fract() == 0.0)) {
                c.push(
                    ViolationTag::Schema,
                    "estimates.a2_radii",
                    "radii must be positive integers",
                );
            }
            est.a2_radii = list.iter().map(|&r| r as usize).collect();
        }
        if let Some(n) = c.count(e, "estimates", "degiorgi_levels") {
            est.degiorgi_levels = n;
        }
    }
    if phi0_sup > 0.0 && est.m >= EstimateParams::m_threshold(h1.c1, phi0_sup) {
        log::warn!(
            "m = {} is not below 1/(c1 |phi0|^2) = {}; the exponential-moment bound is not expected to hold",
            est.m,
            EstimateParams::m_threshold(h1.c1, phi0_sup)
        );
    }

    if !c.violations.is_empty() {
        return Err(ConfigError {
            violations: c.violations,
        }
        .into());
    }
    Ok(SolverConfig {
        grid,
        sigma,
        h1,
        h1_s_max,
        h1_samples,
        bdata,
        dt,
        t_final,
        slab_length: slab,
        picard_tol,
        picard_max,
        linear,
        eps_homotopy,
        homotopy: 1.0,
        estimates: est,
        output,
    })
}

fn sigma_value(model: &ConductivityModel) -> Value {
    match model {
        ConductivityModel::Constant { value } => json!({"kind": "constant", "value": value}),
        ConductivityModel::ExponentialDecay { rate } => json!({"kind": "exponential_decay", "rate": rate}),
        ConductivityModel::OscillatorySine { c3, c0, beta, gamma } => {
            json!({"kind": "oscillatory_sine", "c3": c3, "c0": c0, "beta": beta, "gamma": gamma})
        }
        ConductivityModel::Tabulated(t) => {
            let pts: Vec<[f64; 2]> = t.points().map(|(s, v)| [s, v]).collect();
            json!({"kind": "tabulated", "points": pts})
        }
    }
}

/// Fully resolved configuration as JSON; every default is written out.
pub fn canonical_value(cfg: &SolverConfig) -> Result<Value> {
    let src = |f: &ScalarFn, name: &str| {
        f.source()
            .ok_or_else(|| Error::invalid(format!("{name} is native code and has no serialized form")))
    };
    let g = &cfg.grid;
    let grid = match g.dim() {
        Dim::One => json!({"dim": 1, "nx": g.nx(), "lx": g.lx()}),
        Dim::Two => json!({"dim": 2, "nx": g.nx(), "ny": g.ny(), "lx": g.lx(), "ly": g.ly()}),
    };
    let mut picard = json!({
        "tol": cfg.picard_tol,
        "max_iter": cfg.picard_max,
        "linear_tol": cfg.linear.tol,
    });
    if let Some(n) = cfg.linear.max_iter {
        picard["linear_max_iter"] = json!(n);
    }
    let e = &cfg.estimates;
    Ok(json!({
        "grid": grid,
        "sigma": sigma_value(&cfg.sigma),
        "h1": {
            "c0": cfg.h1.c0, "c1": cfg.h1.c1, "c2": cfg.h1.c2,
            "beta": cfg.h1.beta, "gamma": cfg.h1.gamma,
            "s_max": cfg.h1_s_max, "samples": cfg.h1_samples,
        },
        "boundary": {"u0": src(&cfg.bdata.u0, "u0")?, "phi0": src(&cfg.bdata.phi0, "phi0")?},
        "time": {"dt": cfg.dt, "t_final": cfg.t_final, "slab_length": cfg.slab_length},
        "picard": picard,
        "estimates": {
            "m": e.m, "eps_exp": e.eps_exp, "ell": e.ell, "every": e.every,
            "a2_radii": e.a2_radii, "degiorgi_levels": e.degiorgi_levels,
        },
        "homotopy": {"eps": cfg.eps_homotopy},
        "output": {"snapshot_every": cfg.output.snapshot_every, "strict": cfg.output.strict},
    }))
}

/// Pretty-printed canonical JSON with sorted keys.
pub fn to_canonical_json(cfg: &SolverConfig) -> Result<String> {
    let v = canonical_value(cfg)?;
    Ok(serde_json::to_string_pretty(&v).expect("JSON values always serialize") + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"dim": 1, "nx": 21},
        "sigma": {"kind": "constant", "value": 1.0},
        "boundary": {"u0": "0", "phi0": "x"},
        "time": {"dt": 0.01, "t_final": 0.1}
    }"#;

    fn violations(text: &str) -> Vec<Violation> {
        match parse_config(text) {
            Err(Error::Config(e)) => e.violations,
            Err(other) => panic!("unexpected error {other}"),
            Ok(_) => panic!("config unexpectedly valid"),
        }
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.grid.nx(), 21);
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.sigma, ConductivityModel::Constant { value: 1.0 });
        assert!((cfg.estimates.m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negative_u0_cites_h2() {
        let v = violations(&MINIMAL.replace(r#""u0": "0""#, r#""u0": "-1""#));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tag, ViolationTag::H2);
        assert!(v[0].to_string().contains("[H2]"));
    }

    #[test]
    fn u0_negative_only_at_late_lateral_times_is_caught() {
        let v = violations(&MINIMAL.replace(r#""u0": "0""#, r#""u0": "x - t""#));
        assert!(v.iter().any(|v| v.tag == ViolationTag::H2));
    }

    #[test]
    fn ell_out_of_range_in_2d() {
        let text = r#"{
            "grid": {"dim": 2, "nx": 9, "ny": 9},
            "boundary": {"u0": "0", "phi0": "x"},
            "time": {"dt": 0.01, "t_final": 0.1},
            "estimates": {"ell": 2.5}
        }"#;
        let v = violations(text);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tag, ViolationTag::LemmaRange);
        assert_eq!(v[0].location, "estimates.ell");
    }

    #[test]
    fn all_violations_are_collected() {
        let text = r#"{
            "grid": {"dim": 1, "nx": 2, "bogus": 1},
            "sigma": {"kind": "oscillatory_sine", "c3": -1},
            "boundary": {"u0": "sin(", "phi0": "x"},
            "time": {"dt": -0.1},
            "homotopy": {"eps": [0.5, 1.5]}
        }"#;
        let v = violations(text);
        let tags: Vec<ViolationTag> = v.iter().map(|v| v.tag).collect();
        for t in [
            ViolationTag::Schema,
            ViolationTag::Grid,
            ViolationTag::H1,
            ViolationTag::Expr,
            ViolationTag::LemmaRange,
        ] {
            assert!(tags.contains(&t), "missing {t} in {v:?}");
        }
        assert!(v.len() >= 6, "{v:?}");
    }

    #[test]
    fn malformed_json_reports_position() {
        let v = violations("{\"grid\": ");
        assert_eq!(v[0].tag, ViolationTag::Schema);
        assert!(v[0].location.starts_with("line 1"));
    }

    #[test]
    fn h1_violation_is_tagged() {
        let text = MINIMAL.replace(
            r#""sigma": {"kind": "constant", "value": 1.0},"#,
            r#""sigma": {"kind": "constant", "value": 1.0}, "h1": {"c0": 2.0, "c1": 1.5, "c2": 1, "beta": 1, "gamma": 1},"#,
        );
        let v = violations(&text);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tag, ViolationTag::H1);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, &text).unwrap();
        let cfg = load_config_without_h1(&path).unwrap();
        assert_eq!(cfg.h1.c0, 2.0);
    }

    #[test]
    fn canonical_form_is_idempotent() {
        for text in [
            MINIMAL.to_string(),
            r#"{"grid": {"dim": 2, "nx": 9, "ny": 5, "lx": 2, "ly": 1},
                "sigma": {"kind": "tabulated", "points": [[0, 1], [1, 0.5], [2, 0.7], [5, 0.2]]},
                "boundary": {"u0": "x*y*(1+t)", "phi0": "2*x - y^2"},
                "time": {"dt": 0.005, "t_final": 0.2, "slab_length": 0.1},
                "picard": {"tol": 1e-10, "max_iter": 20, "linear_tol": 1e-11},
                "estimates": {"every": 5, "a2_radii": [1, 2]},
                "output": {"snapshot_every": 10, "strict": true}}"#
                .to_string(),
            r#"{"grid": {"dim": 1, "nx": 41}, "boundary": {"u0": "0", "phi0": "x"}, "time": {"dt": 0.001, "t_final": 1}}"#.to_string(),
        ] {
            let a = to_canonical_json(&parse_config(&text).unwrap()).unwrap();
            let b = to_canonical_json(&parse_config(&a).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn tabulated_table_from_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sigma.csv"), "s,sigma\n0,1\n1,0.5\n3,0.25\n").unwrap();
        let text = MINIMAL.replace(
            r#"{"kind": "constant", "value": 1.0}"#,
            r#"{"kind": "tabulated", "path": "sigma.csv"}"#,
        );
        let cfg = parse_config_with_base(&text, Some(dir.path())).unwrap();
        assert_eq!(cfg.sigma.kind_name(), "tabulated");
        assert_eq!(cfg.h1_s_max, 3.0);
    }

    #[test]
    fn samples_cover_the_parabolic_boundary() {
        let g = GridSpec::unit_square(5).unwrap();
        let pts = parabolic_boundary_samples(&g, 1.0, U0_SAMPLES);
        assert!(pts.len() >= U0_SAMPLES);
        assert!(pts.iter().any(|p| p.2 == 1.0 && p.0 == 0.0));
        let g = GridSpec::unit_line(5).unwrap();
        let pts = parabolic_boundary_samples(&g, 2.0, U0_SAMPLES);
        assert!(pts.len() >= U0_SAMPLES);
        assert!(pts.iter().any(|p| p.2 == 2.0 && p.0 == 1.0));
    }
}
