use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use thermistor_core::coupler::{homotopy_sweep, run_simulation, slab_criterion};
use thermistor_core::estimates::{check_invariants, gronwall_bound, interpolation_check, small_lemma_check, ynb_check};
use thermistor_core::oracle::{verify_suite, Suite};
use thermistor_core::{
    load_config, load_config_without_h1, verify_h1, write_outputs, Error, Field, GridSpec, ScalarFn,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "thermistor-sim",
    version,
    about = "Thermistor simulator and estimate checkers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots, estimates.csv, report.json and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with code 4 when a monitored invariant fails.
        #[arg(long)]
        strict: bool,
    },
    /// Run the homotopy levels in parallel and print sup norms per level.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated levels in (0, 1]; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Also write the results to DIR/sweep.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the conductivity against its H1 constants on [0, smax].
    CheckH1 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        smax: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Minimizer of g(tau) = E tau^B - tau + C and the slab smallness condition.
    Slab {
        #[arg(long = "eps-coef")]
        eps_coef: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
        /// Initial gradient norm to compare against tau0.
        #[arg(long)]
        initial_norm: Option<f64>,
    },
    /// Numeric checks of the auxiliary inequalities.
    Lemma {
        #[command(subcommand)]
        which: Lemma,
    },
    /// Compare production solvers against the reference oracles.
    Verify {
        #[arg(long)]
        suite: Suite,
    },
}

#[derive(Subcommand)]
enum Lemma {
    /// Bound h(t) <= h0 e^{ct} + int_0^t e^{c(t-s)} g(s) ds on a uniform grid.
    Gronwall {
        #[arg(long)]
        h0: f64,
        #[arg(long)]
        c: f64,
        /// Expression in t.
        #[arg(long, default_value = "0")]
        g: String,
        #[arg(long)]
        t_final: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Iterate y_{n+1} = c b^n y_n^{1+alpha}; y0 defaults to the threshold.
    Ynb {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long, default_value_t = 200)]
        n_max: usize,
    },
    /// Iterate b_k = b0 + lambda b_{k-1}^{1+alpha} and compare with its bound.
    Small {
        #[arg(long)]
        b0: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        k_max: usize,
    },
    /// Check |f|_q <= eps |f|_r + eps^{-mu} |f|_ell on a snapshot column.
    Interp {
        /// A states_XXXX.csv file.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "u")]
        column: String,
        #[arg(long)]
        ell: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        eps: f64,
    },
}

enum Failure {
    Code(u8, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        e if e.is_nonconvergence() => EXIT_NONCONVERGENCE,
        _ => 1,
    }
}

fn print(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("JSON values always serialize")
    );
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn cmd_run(config: &Path, out: &Path, strict: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let (traj, error) = match run_simulation(&cfg) {
        Ok(t) => (t, None),
        Err(aborted) => {
            let a = *aborted;
            (a.partial, Some(a.error))
        }
    };
    let manifest = write_outputs(&traj, &cfg, out, error.as_ref())?;
    let invariants = check_invariants(&traj, &cfg)?;
    print(&json!({
        "out": out.display().to_string(),
        "steps": traj.states.len().saturating_sub(1),
        "t_reached": traj.final_state().map_or(0.0, |s| s.t),
        "u_sup": traj.u_sup(),
        "phi_sup": traj.phi_sup(),
        "files": manifest.files.len(),
        "invariants": to_json(&invariants),
        "error": error.as_ref().map(ToString::to_string),
    }));
    if let Some(e) = error {
        return Err(Failure::Core(e));
    }
    let failed: Vec<&str> = invariants.iter().filter(|i| !i.ok).map(|i| i.name.as_str()).collect();
    if (strict || cfg.output.strict) && !failed.is_empty() {
        return Err(Failure::Code(
            EXIT_VIOLATION,
            format!("invariant violation: {}", failed.join(", ")),
        ));
    }
    Ok(())
}

fn cmd_sweep(config: &Path, eps: Option<Vec<f64>>, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let levels = eps.unwrap_or_else(|| cfg.eps_homotopy.clone());
    let results = homotopy_sweep(&cfg, &levels)?;
    let v = to_json(&results);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Code(1, format!("{}: {e}", dir.display())))?;
        let path = dir.join("sweep.json");
        let text = serde_json::to_string_pretty(&v).expect("JSON values always serialize") + "\n";
        std::fs::write(&path, text).map_err(|e| Failure::Code(1, format!("{}: {e}", path.display())))?;
    }
    print(&v);
    if let Some(r) = results.iter().find(|r| r.error.is_some()) {
        return Err(Failure::Code(
            EXIT_NONCONVERGENCE,
            format!("level {} failed: {}", r.eps, r.error.as_deref().unwrap_or_default()),
        ));
    }
    Ok(())
}

fn cmd_check_h1(config: &Path, smax: Option<f64>, samples: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config_without_h1(config)?;
    let s_max = smax.unwrap_or(cfg.h1_s_max);
    let n = samples.unwrap_or(cfg.h1_samples);
    let report = verify_h1(&cfg.sigma, &cfg.h1, s_max, n)?;
    print(&json!({
        "constants": to_json(&cfg.h1),
        "s_max": s_max,
        "samples": n,
        "report": to_json(&report),
        "ok": report.all_ok(),
    }));
    if !report.all_ok() {
        return Err(Failure::Code(
            EXIT_CONFIG,
            "[H1] conductivity violates its bounds".into(),
        ));
    }
    Ok(())
}

fn cmd_slab(eps_coef: f64, b: f64, c: f64, initial_norm: Option<f64>) -> Result<(), Failure> {
    let s = slab_criterion(eps_coef, b, c)?;
    let mut v = to_json(&s);
    if let Some(x) = initial_norm {
        v["initial_norm"] = json!(x);
        v["cont2_ok"] = json!(s.cont2_ok(x));
    }
    print(&v);
    Ok(())
}

/// Rebuilds a field from a snapshot CSV (`x,[y,]u,phi`).
fn read_snapshot(path: &Path, column: &str) -> Result<Field, Failure> {
    let bad = |msg: String| Failure::Code(EXIT_CONFIG, format!("{}: {msg}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .collect();
    let col = header
        .iter()
        .position(|h| *h == column)
        .ok_or_else(|| bad(format!("no column {column:?}")))?;
    let two = header.contains(&"y");
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| bad(format!("line {}: {e}", k + 2)))?);
    }
    let distinct = |j: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = distinct(0);
    let lx = xs.last().copied().unwrap_or(0.0);
    let grid = if two {
        let ys = distinct(1);
        GridSpec::rect(xs.len(), ys.len(), lx, ys.last().copied().unwrap_or(0.0))?
    } else {
        GridSpec::line(xs.len(), lx)?
    };
    if grid.node_count() != rows.len() {
        return Err(bad("rows do not form a tensor grid".into()));
    }
    Ok(Field::new(grid, rows.iter().map(|r| r[col]).collect())?)
}

fn cmd_lemma(which: Lemma) -> Result<(), Failure> {
    match which {
        Lemma::Gronwall {
            h0,
            c,
            g,
            t_final,
            steps,
        } => {
            if steps == 0 || t_final.is_nan() || t_final <= 0.0 {
                return Err(Failure::Code(EXIT_CONFIG, "need steps >= 1 and t_final > 0".into()));
            }
            let g = ScalarFn::parse(&g)?;
            let t: Vec<f64> = (0..=steps).map(|k| t_final * k as f64 / steps as f64).collect();
            let samples: Vec<f64> = t.iter().map(|&t| g.eval(0.0, 0.0, t)).collect();
            let bound = gronwall_bound(h0, c, &samples, &t)?;
            print(&json!({"t": t, "bound": bound}));
        }
        Lemma::Ynb { c, b, alpha, y0, n_max } => {
            let probe = ynb_check(c, b, alpha, 0.0, 0)?;
            let r = ynb_check(c, b, alpha, y0.unwrap_or(probe.threshold), n_max)?;
            print(&to_json(&r));
        }
        Lemma::Small {
            b0,
            lambda,
            alpha,
            k_max,
        } => {
            let r = small_lemma_check(b0, lambda, alpha, k_max)?;
            print(&to_json(&r));
            if r.within_bound == Some(false) {
                return Err(Failure::Code(EXIT_VIOLATION, "sequence exceeded its bound".into()));
            }
        }
        Lemma::Interp {
            csv,
            column,
            ell,
            q,
            r,
            eps,
        } => {
            let f = read_snapshot(&csv, &column)?;
            let res = interpolation_check(&f, ell, q, r, eps)?;
            print(&to_json(&res));
            if !res.ok {
                return Err(Failure::Code(EXIT_VIOLATION, "interpolation inequality fails".into()));
            }
        }
    }
    Ok(())
}

fn cmd_verify(suite: Suite) -> Result<(), Failure> {
    let report = verify_suite(suite)?;
    print(&to_json(&report));
    if !report.passed() {
        return Err(Failure::Code(EXIT_VIOLATION, format!("suite {suite:?} failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, strict } => cmd_run(&config, &out, strict),
        Command::Sweep { config, eps, out } => cmd_sweep(&config, eps, out.as_deref()),
        Command::CheckH1 { config, smax, samples } => cmd_check_h1(&config, smax, samples),
        Command::Slab {
            eps_coef,
            b,
            c,
            initial_norm,
        } => cmd_slab(eps_coef, b, c, initial_norm),
        Command::Lemma { which } => cmd_lemma(which),
        Command::Verify { suite } => cmd_verify(suite),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Code(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code_for(&e))
        }
    }
}
