//! Run configuration and the text outputs of the `blowup` binary.
//!
//! A configuration can come from a flat `key = value` file and from command
//! line flags with the same names; flags win. Outputs are plain CSV and text
//! so that repeated runs of the same configuration are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use crate::driver::{
    compare_damping, run_with, sweep, BlowupReport, DampingComparison, Outcome, RunOptions,
    RunResult, StepRecord,
};
use crate::mesh::MeshControl;
use crate::problem::{build_sine_profile, check_assumptions, AssumptionReport, InitialData, PdeParams};
use crate::scheme::State;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    CompareDamping,
    Sweep,
}

impl Mode {
    fn as_str(&self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::CompareDamping => "compare-damping",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    Sine,
    /// Two-column `x,u0` file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: PdeParams,
    pub profile: ProfileSource,
    pub amplitude: f64,
    pub control: MeshControl,
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    pub mode: Mode,
    /// Proceed even when the initial profile fails (A1)-(A3) or (A5).
    pub force: bool,
    /// Amplitudes of the sine profiles run in sweep mode.
    pub sweep_amplitudes: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PdeParams::default(),
            profile: ProfileSource::Sine,
            amplitude: 1000.0,
            control: MeshControl::default(),
            snapshot_every: 1000,
            output_dir: PathBuf::from("out"),
            mode: Mode::Single,
            force: false,
            sweep_amplitudes: vec![1.0, 10.0, 100.0, 1000.0],
        }
    }
}

/// Keys accepted in config files, in serialization order.
pub const CONFIG_KEYS: &[&str] = &[
    "p",
    "q",
    "a",
    "b",
    "amplitude",
    "tau",
    "h",
    "M-stop",
    "tau-floor",
    "max-iter",
    "snapshot-every",
    "profile",
    "mode",
    "out",
    "force",
    "sweep-amplitudes",
];

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}' as a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}' as a non-negative integer")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("{key}: cannot parse '{other}' as a boolean"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "p" => self.params.p = parse_f64(key, value)?,
            "q" => self.params.q = parse_f64(key, value)?,
            "a" => self.params.a = parse_f64(key, value)?,
            "b" => self.params.b = parse_f64(key, value)?,
            "amplitude" => self.amplitude = parse_f64(key, value)?,
            "tau" => self.control.tau = parse_f64(key, value)?,
            "h" => self.control.h = parse_f64(key, value)?,
            "M-stop" => self.control.m_stop = parse_f64(key, value)?,
            "tau-floor" => self.control.tau_floor = parse_f64(key, value)?,
            "max-iter" => self.control.n_max = parse_usize(key, value)?,
            "snapshot-every" => self.snapshot_every = parse_usize(key, value)?,
            "profile" => {
                self.profile = match value {
                    "sine" => ProfileSource::Sine,
                    "" => return Err(Error::Config("profile: empty value".into())),
                    path => ProfileSource::File(PathBuf::from(path)),
                }
            }
            "mode" => {
                self.mode = match value {
                    "single" => Mode::Single,
                    "compare-damping" => Mode::CompareDamping,
                    "sweep" => Mode::Sweep,
                    other => {
                        return Err(Error::Config(format!(
                            "mode: expected single, compare-damping or sweep (got '{other}')"
                        )))
                    }
                }
            }
            "out" => self.output_dir = PathBuf::from(value),
            "force" => self.force = parse_bool(key, value)?,
            "sweep-amplitudes" => {
                self.sweep_amplitudes = value
                    .split(',')
                    .map(|v| parse_f64(key, v))
                    .collect::<Result<Vec<_>>>()?
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; blank lines and `#` comments are skipped.
    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_config_str(text)?;
        cfg.validate()
    }

    /// The configuration as `key = value` lines, readable by [`RunConfig::from_config_str`].
    pub fn to_config_string(&self) -> String {
        let profile = match &self.profile {
            ProfileSource::Sine => "sine".to_string(),
            ProfileSource::File(p) => p.display().to_string(),
        };
        let amps: Vec<String> = self.sweep_amplitudes.iter().map(|a| a.to_string()).collect();
        let values = [
            self.params.p.to_string(),
            self.params.q.to_string(),
            self.params.a.to_string(),
            self.params.b.to_string(),
            self.amplitude.to_string(),
            self.control.tau.to_string(),
            self.control.h.to_string(),
            self.control.m_stop.to_string(),
            self.control.tau_floor.to_string(),
            self.control.n_max.to_string(),
            self.snapshot_every.to_string(),
            profile,
            self.mode.as_str().to_string(),
            self.output_dir.display().to_string(),
            self.force.to_string(),
            amps.join(","),
        ];
        let mut out = String::new();
        for (k, v) in CONFIG_KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn validate(self) -> Result<Self> {
        self.params.validate()?;
        self.control.validate()?;
        if self.profile == ProfileSource::Sine && !(self.amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude > 0 violated (got {})",
                self.amplitude
            )));
        }
        if self.mode == Mode::Sweep {
            if self.sweep_amplitudes.is_empty() {
                return Err(Error::Config("sweep-amplitudes must not be empty".into()));
            }
            if let Some(a) = self.sweep_amplitudes.iter().find(|a| !(**a > 0.0)) {
                return Err(Error::InvalidParameter(format!("sweep amplitude > 0 violated (got {a})")));
            }
        }
        Ok(self)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { snapshot_every: self.snapshot_every, ..Default::default() }
    }

    pub fn initial_data(&self) -> Result<InitialData> {
        match &self.profile {
            ProfileSource::Sine => build_sine_profile(self.amplitude),
            ProfileSource::File(path) => read_profile(path),
        }
    }
}

/// Command-line flags. Every flag is also a config-file key.
#[derive(Debug, Parser)]
#[command(name = "blowup", version, about = "Adaptive finite-difference blow-up solver for u_t = u_xx + a|u|^(p-1)u - b|u_x|^q")]
pub struct Cli {
    /// Flat `key = value` config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reaction exponent (p > 1)
    #[arg(long = "p", allow_hyphen_values = true)]
    pub p: Option<String>,
    /// Gradient exponent (1 <= q <= 2p/(p+1))
    #[arg(long = "q", allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Reaction coefficient
    #[arg(long = "a", allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Gradient coefficient (0 disables the gradient term)
    #[arg(long = "b", allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Amplitude of the sine profile
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<String>,
    /// Base time unit
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Base space unit (tau/h^2 < 1/16)
    #[arg(long = "h", allow_hyphen_values = true)]
    pub h: Option<String>,
    /// Blow-up threshold on max |u|
    #[arg(long = "M-stop", allow_hyphen_values = true)]
    pub m_stop: Option<String>,
    /// Smallest admissible time step
    #[arg(long = "tau-floor", allow_hyphen_values = true)]
    pub tau_floor: Option<String>,
    /// Iteration cap
    #[arg(long = "max-iter")]
    pub max_iter: Option<String>,
    /// Write a profile snapshot every this many steps (0 for none)
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<String>,
    /// `sine` or a path to a two-column x,u0 file
    #[arg(long)]
    pub profile: Option<String>,
    /// single, compare-damping or sweep
    #[arg(long)]
    pub mode: Option<String>,
    /// Output directory
    #[arg(long)]
    pub out: Option<String>,
    /// Run even if the initial profile fails the structural assumptions
    #[arg(long)]
    pub force: bool,
    /// Comma-separated sine amplitudes for sweep mode
    #[arg(long = "sweep-amplitudes")]
    pub sweep_amplitudes: Option<String>,
}

impl Cli {
    fn settings(&self) -> Vec<(&'static str, &str)> {
        let flags = [
            ("p", &self.p),
            ("q", &self.q),
            ("a", &self.a),
            ("b", &self.b),
            ("amplitude", &self.amplitude),
            ("tau", &self.tau),
            ("h", &self.h),
            ("M-stop", &self.m_stop),
            ("tau-floor", &self.tau_floor),
            ("max-iter", &self.max_iter),
            ("snapshot-every", &self.snapshot_every),
            ("profile", &self.profile),
            ("mode", &self.mode),
            ("out", &self.out),
            ("sweep-amplitudes", &self.sweep_amplitudes),
        ];
        let mut out: Vec<(&'static str, &str)> =
            flags.into_iter().filter_map(|(k, v)| v.as_deref().map(|v| (k, v))).collect();
        if self.force {
            out.push(("force", "true"));
        }
        out
    }

    pub fn into_config(self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_config_str(&text)?;
        }
        for (k, v) in self.settings() {
            cfg.set(k, v)?;
        }
        cfg.validate()
    }
}

/// Parses command-line arguments (without the program name) into a validated config.
pub fn parse_config<I, S>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("blowup")).chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cli.into_config()
}

/// Reads a two-column `x,u0` file. A non-numeric first line is taken as a header.
pub fn read_profile(path: &Path) -> Result<InitialData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut xs, mut us) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(x), Some(u)) = (cols.next(), cols.next()) else {
            return Err(Error::Config(format!("{}:{}: expected two columns", path.display(), i + 1)));
        };
        match (x.parse::<f64>(), u.parse::<f64>()) {
            (Ok(x), Ok(u)) => {
                xs.push(x);
                us.push(u);
            }
            _ if xs.is_empty() && i == 0 => continue,
            _ => {
                return Err(Error::Config(format!("{}:{}: cannot parse '{line}'", path.display(), i + 1)))
            }
        }
    }
    InitialData::tabulated(xs, us).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const HISTORY_HEADER: &str = "n,t_n,tau_n,h_n,N_n,M_n";

pub fn format_history(history: &[StepRecord]) -> String {
    let mut out = String::with_capacity(96 * (history.len() + 1));
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            r.n, r.t_n, r.tau_n, r.h_n, r.n_interior, r.m_n
        );
    }
    out
}

pub fn write_history(history: &[StepRecord], path: &Path) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Config("refusing to write an empty history".into()));
    }
    write_text(path, &format_history(history))
}

/// Writes `profile_<n>.csv` (columns `x,u`) per snapshot plus `index.csv`
/// (columns `file,n,t_n`) into `dir`. Returns the profile paths.
pub fn write_snapshots(states: &[State], dir: &Path) -> Result<Vec<PathBuf>> {
    if states.is_empty() {
        return Err(Error::Config("no snapshots to write".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::from("file,n,t_n\n");
    let mut paths = Vec::with_capacity(states.len());
    for s in states {
        let name = format!("profile_{}.csv", s.step());
        let mut body = String::from("x,u\n");
        for (x, u) in s.grid().nodes().zip(s.values()) {
            let _ = writeln!(body, "{x:.16e},{u:.16e}");
        }
        let path = dir.join(&name);
        write_text(&path, &body)?;
        let _ = writeln!(index, "{name},{},{:.16e}", s.step(), s.time());
        paths.push(path);
    }
    write_text(&dir.join("index.csv"), &index)?;
    Ok(paths)
}

pub fn format_report(report: &BlowupReport) -> String {
    let mut out = String::new();
    let p = &report.params;
    let _ = writeln!(out, "outcome: {}", report.outcome);
    let _ = writeln!(out, "stop reason: {}", report.stop);
    let _ = writeln!(out, "parameters: p = {}, q = {}, a = {}, b = {}", p.p, p.q, p.a, p.b);
    let _ = writeln!(out, "M_0: {:.6e}", report.m0);
    let _ = writeln!(out, "final M_n: {:.6e}", report.m_final);
    let _ = writeln!(out, "steps: {}", report.n_stop);
    let _ = writeln!(out, "accumulated time: {:.10e}", report.t_stop);
    match report.outcome {
        Outcome::Blowup => {
            let _ = writeln!(out, "T_star lower bound 1/((p-1) M_0^(p-1)): {:.10e}", report.t_star_lower_bound);
            match report.t_star {
                Some(t) => {
                    let _ = writeln!(out, "T_star (numerical): {t:.10e}");
                }
                None => out.push_str("T_star (numerical): unavailable\n"),
            }
            let _ = writeln!(out, "theoretical rate exponent 1/(p-1): {}", p.rate_exponent());
            match report.rate {
                Some(f) => {
                    let _ = writeln!(out, "fitted rate exponent: {:.6}", f.exponent);
                    let _ = writeln!(out, "fitted C: {:.6}", f.c);
                    let _ = writeln!(out, "fit points: {}", f.points);
                }
                None => out.push_str("rate fit: unavailable\n"),
            }
            let _ = writeln!(out, "growth exponent r: {:.6}", report.r_exponent);
            match report.rho_min {
                Some(r) => {
                    let _ = writeln!(out, "guaranteed growth ratio rho_min: {r:.12}");
                }
                None => out.push_str("guaranteed growth ratio rho_min: unavailable\n"),
            }
        }
        Outcome::Decay => out.push_str("the solution decays; no blow-up time or rate fit\n"),
        Outcome::Inconclusive => out.push_str("neither blow-up nor decay was established\n"),
    }
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

pub fn write_report(report: &BlowupReport, path: &Path) -> Result<()> {
    write_text(path, &format_report(report))
}

pub fn format_comparison(cmp: &DampingComparison) -> String {
    let mut out = String::from("== with gradient term ==\n");
    out.push_str(&format_report(&cmp.damped_report));
    out.push_str("\n== without gradient term (b = 0) ==\n");
    out.push_str(&format_report(&cmp.undamped_report));
    out.push_str("\n== comparison ==\n");
    let _ = writeln!(out, "steps: with = {}, without = {}", cmp.damped.n_stop(), cmp.undamped.n_stop());
    let _ = writeln!(
        out,
        "accumulated time: with = {:.16e}, without = {:.16e}",
        cmp.damped.t_stop(),
        cmp.undamped.t_stop()
    );
    let _ = writeln!(out, "n_stop(b=0) <= n_stop(b): {}", cmp.fewer_iterations());
    let _ = writeln!(out, "T_star(b=0) <= T_star(b): {}", cmp.less_time());
    let _ = writeln!(out, "verdict: {}", cmp.verdict());
    out
}

fn format_assumptions(r: &AssumptionReport) -> String {
    let mut out = String::from("initial data assumptions:\n");
    for (name, ok) in [
        ("(A1) nonnegative and nonconstant", r.nonnegative_nonconstant),
        ("(A2) symmetric", r.symmetric),
        ("(A3) strictly increasing on [-1,0]", r.increasing_left),
        ("(A4) large data", r.large),
        ("(A5) zero boundary values", r.boundary_zero),
    ] {
        let _ = writeln!(out, "  {name}: {}", if ok { "pass" } else { "fail" });
    }
    out
}

fn write_run(result: &RunResult, report: &BlowupReport, dir: &Path, preamble: &str) -> Result<()> {
    if !result.history.is_empty() {
        write_history(&result.history, &dir.join("history.csv"))?;
    }
    if !result.snapshots.is_empty() {
        write_snapshots(&result.snapshots, &dir.join("snapshots"))?;
    }
    write_text(&dir.join("report.txt"), &format!("{preamble}{}", format_report(report)))
}

fn checked_data(cfg: &RunConfig) -> Result<(InitialData, AssumptionReport)> {
    let data = cfg.initial_data()?;
    let grid = crate::driver::initial_state(&data, &cfg.params, &cfg.control)?.grid().to_owned();
    let report = check_assumptions(&data, &grid);
    if !report.structural_ok() && !cfg.force {
        return Err(Error::Config(format!(
            "initial profile fails {}; pass --force to run anyway",
            report.failures().join(", ")
        )));
    }
    Ok((data, report))
}

/// Runs the configured experiment and writes its outputs under `cfg.output_dir`.
/// Returns the text written to the top-level `report.txt`.
pub fn execute(cfg: &RunConfig) -> Result<String> {
    let out = &cfg.output_dir;
    let options = cfg.run_options();
    match cfg.mode {
        Mode::Single => {
            let (data, assumptions) = checked_data(cfg)?;
            let result = run_with(&data, &cfg.params, &cfg.control, &options)?;
            let report = BlowupReport::from_run(&result, &cfg.params, &cfg.control);
            let pre = format_assumptions(&assumptions);
            write_run(&result, &report, out, &pre)?;
            Ok(format!("{pre}{}", format_report(&report)))
        }
        Mode::CompareDamping => {
            let (data, assumptions) = checked_data(cfg)?;
            let cmp = compare_damping(&data, &cfg.params, &cfg.control, &options)?;
            write_run(&cmp.damped, &cmp.damped_report, &out.join("with_gradient"), "")?;
            write_run(&cmp.undamped, &cmp.undamped_report, &out.join("without_gradient"), "")?;
            let text = format!("{}{}", format_assumptions(&assumptions), format_comparison(&cmp));
            write_text(&out.join("report.txt"), &text)?;
            Ok(text)
        }
        Mode::Sweep => {
            let profiles = cfg
                .sweep_amplitudes
                .iter()
                .map(|&a| build_sine_profile(a))
                .collect::<Result<Vec<_>>>()?;
            let results = sweep(&profiles, &cfg.params, &cfg.control, &options);
            let mut summary = String::from("amplitude,outcome,n_stop,t_stop,T_star\n");
            for (amp, result) in cfg.sweep_amplitudes.iter().zip(results) {
                let result = result?;
                let report = BlowupReport::from_run(&result, &cfg.params, &cfg.control);
                write_run(&result, &report, &out.join(format!("amp_{amp}")), "")?;
                let t_star = report.t_star.map(|t| format!("{t:.10e}")).unwrap_or_default();
                let _ = writeln!(
                    summary,
                    "{amp},{},{},{:.10e},{t_star}",
                    report.outcome, report.n_stop, report.t_stop
                );
            }
            write_text(&out.join("report.txt"), &summary)?;
            Ok(summary)
        }
    }
}
