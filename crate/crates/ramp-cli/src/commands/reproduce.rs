//! Figure-reproduction presets: canned parameter sets that regenerate the
//! data behind the four standard figures as CSV files plus a manifest.
//!
//! `desk` scale keeps every preset in the minutes range on a laptop by
//! running the finite-size solver at N = 10⁴; `full` scale uses the
//! original sizes (N = 20000–25000) and denser grids.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;

use ramp_core::amp::{amp_run, AmpConfig};
use ramp_core::instance::{generate, NoiseModel};
use ramp_core::phase::{classify, find_transition, SweepAxis, TransitionKind};
use ramp_core::prior::SignalPrior;
use ramp_core::replica::{scan_potential, GridSpec, ReplicaParams};
use ramp_core::state_evolution::de_run;

use crate::config::Settings;
use crate::output::{amp_report_csv, de_csv, fmt_f64, potential_csv, write_atomic, OutputHeader};
use crate::CliError;

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// One of fig1, fig2, fig3, fig4.
    pub figure: String,
    /// desk (laptop-sized runs) or full (original sizes).
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    /// Base seed for the finite-size runs.
    #[arg(long)]
    pub seed: Option<u64>,
}

struct ManifestRow {
    file: String,
    params: String,
    seconds: f64,
    status: String,
}

struct Preset<'a> {
    dir: PathBuf,
    header: OutputHeader,
    rows: Vec<ManifestRow>,
    failures: usize,
    settings: &'a Settings,
}

impl<'a> Preset<'a> {
    fn new(dir: &str, settings: &'a Settings, seed: u64) -> Result<Self, CliError> {
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let header =
            OutputHeader { command: "reproduce", config: settings.echo(), seed };
        Ok(Preset { dir, header, rows: Vec::new(), failures: 0, settings })
    }

    fn emit(
        &mut self,
        file: &str,
        params: String,
        work: impl FnOnce(&OutputHeader) -> Result<String, CliError>,
    ) {
        let started = Instant::now();
        let mut header = self.header.clone();
        header.config = self.settings.echo();
        let status = match work(&header).and_then(|text| {
            write_atomic(&self.dir.join(file), &text)
        }) {
            Ok(()) => "ok".to_string(),
            Err(e) => {
                self.failures += 1;
                eprintln!("ramp: warning: {file}: {e}");
                format!("failed: {e}")
            }
        };
        self.rows.push(ManifestRow {
            file: file.to_string(),
            params,
            seconds: started.elapsed().as_secs_f64(),
            status,
        });
    }

    fn finish(self) -> Result<usize, CliError> {
        let mut s = self.header.render_for_manifest();
        let _ = writeln!(s, "file,params,seconds,status");
        for r in &self.rows {
            let _ = writeln!(s, "{},\"{}\",{:.3},\"{}\"", r.file, r.params, r.seconds, r.status);
        }
        write_atomic(&self.dir.join("manifest.csv"), &s)?;
        Ok(self.failures)
    }
}

impl OutputHeader {
    fn render_for_manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ramp {}", crate::output::TOOL_VERSION);
        let _ = writeln!(s, "# cmd: {}", self.command);
        let mut line = String::from("# config:");
        for (k, v) in &self.config {
            let _ = write!(line, " {k}={v}");
        }
        let _ = writeln!(s, "{line}");
        let _ = writeln!(s, "# seed: {}", self.seed);
        s
    }
}

pub fn run_reproduce(args: &ReproduceArgs, settings: &mut Settings) -> Result<(), CliError> {
    let scale = settings.resolve("scale", args.scale.clone(), "desk".to_string())?;
    let out_dir = settings.resolve(
        "out_dir",
        args.out_dir.clone(),
        format!("reproduce_{}", args.figure),
    )?;
    let seed = settings.resolve("seed", args.seed, 1)?;
    settings.record("figure", args.figure.clone());
    let full = match scale.as_str() {
        "desk" => false,
        "full" => true,
        other => {
            return Err(CliError::Usage(format!(
                "unknown scale `{other}` (expected desk or full)"
            )))
        }
    };

    let mut preset = Preset::new(&out_dir, settings, seed)?;
    match args.figure.as_str() {
        "fig1" => fig1(&mut preset, full),
        "fig2" => fig2(&mut preset, full, seed),
        "fig3" => fig3(&mut preset, full),
        "fig4" => fig4(&mut preset, full, seed),
        other => return Err(CliError::Usage(format!("unknown figure `{other}`"))),
    }
    let failures = preset.finish()?;
    if failures > 0 {
        eprintln!("ramp: warning: {failures} preset runs failed; see manifest.csv");
    }
    Ok(())
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Potential curves across the trapping transition: alpha = 0.5,
/// eta = 1e-4, delta = 1e-10, densities spread around the spinodal.
fn fig1(preset: &mut Preset, full: bool) {
    let points = if full { 512 } else { 256 };
    for rho in [0.1, 0.2, 0.25, 0.3, 0.33, 0.4] {
        let file = format!("potential_rho{rho}.csv");
        preset.emit(
            &file,
            format!("alpha=0.5 rho={rho} delta=1e-10 eta=1e-4 points={points}"),
            |header| {
                let params = ReplicaParams::new(0.5, rho, 1e-10, 1e-4)?;
                let curve = scan_potential(&params, &GridSpec { points, e_min: None })?;
                Ok(potential_csv(header, &curve))
            },
        );
    }
}

/// Best achievable MSE and the trapped branch against eta, finite-size
/// solver points, and the two transition lines in the (rho, eta) plane.
fn fig2(preset: &mut Preset, full: bool, seed: u64) {
    let n_eta = if full { 25 } else { 13 };
    for rho in [0.1, 0.2, 0.3, 0.4] {
        let file = format!("line_rho{rho}.csv");
        preset.emit(
            &file,
            format!("alpha=0.5 rho={rho} delta=1e-10 eta=1e-8..1 points={n_eta}"),
            |header| {
                let mut s = header_with(header);
                let _ = writeln!(s, "eta,bayes_mse,amp_mse_predicted,class");
                for eta in logspace(1e-8, 1.0, n_eta) {
                    let params = ReplicaParams::new(0.5, rho, 1e-10, eta)?;
                    let pt = classify(&params)?;
                    let _ = writeln!(
                        s,
                        "{},{},{},{}",
                        fmt_f64(eta),
                        fmt_f64(pt.bayes_mse),
                        fmt_f64(pt.amp_mse_predicted),
                        pt.class.as_str()
                    );
                }
                Ok(s)
            },
        );
    }

    let n = if full { 20_000 } else { 10_000 };
    preset.emit(
        "amp_points.csv",
        format!("alpha=0.5 n={n} seed={seed} rho in {{0.1,0.3}} eta in {{1e-6,1e-4,1e-2}}"),
        |header| {
            let mut s = header_with(header);
            let _ = writeln!(s, "rho,eta,n,seed,mse");
            for rho in [0.1, 0.3] {
                for eta in [1e-6, 1e-4, 1e-2] {
                    let inst = generate(
                        n,
                        0.5,
                        SignalPrior::new(rho)?,
                        NoiseModel::new(1e-10, eta)?,
                        seed,
                    )?;
                    let cfg = AmpConfig { max_iters: 300, ..Default::default() };
                    let report = amp_run(&inst, inst.prior(), &cfg, Some(inst.signal()))?;
                    let mse = report.mse_per_iter.last().copied().unwrap_or(f64::NAN);
                    let _ = writeln!(
                        s,
                        "{},{},{n},{seed},{}",
                        fmt_f64(rho),
                        fmt_f64(eta),
                        fmt_f64(mse)
                    );
                }
            }
            Ok(s)
        },
    );

    let n_inset = if full { 11 } else { 6 };
    preset.emit(
        "inset_lines.csv",
        format!("alpha=0.5 delta=1e-10 eta=1e-8..1e-3 points={n_inset}"),
        |header| {
            let mut s = header_with(header);
            let _ = writeln!(s, "axis_value,critical_value,kind");
            for eta in logspace(1e-8, 1e-3, n_inset) {
                let base = ReplicaParams::new(0.5, 0.2, 1e-10, eta)?;
                let spin = find_transition(
                    TransitionKind::Spinodal,
                    SweepAxis::Rho,
                    &base,
                    (0.1, 0.45),
                    1e-3,
                )?;
                let _ = writeln!(s, "{},{},spinodal", fmt_f64(eta), fmt_f64(spin));
                let first = find_transition(
                    TransitionKind::FirstOrder,
                    SweepAxis::Rho,
                    &base,
                    (spin - 0.02, 0.499),
                    1e-3,
                )?;
                let _ = writeln!(s, "{},{},first_order", fmt_f64(eta), fmt_f64(first));
            }
            Ok(s)
        },
    );
}

/// Phase diagram in the (M/N, K/M) plane: noiseless and noisy transition
/// lines.
fn fig3(preset: &mut Preset, full: bool) {
    let alphas = if full { linspace(0.05, 0.95, 19) } else { linspace(0.05, 0.95, 12) };
    for (name, delta, eta) in [("noiseless", 0.0, 0.0), ("noisy", 1e-4, 1e-6)] {
        let file = format!("lines_{name}.csv");
        let alphas = alphas.clone();
        preset.emit(
            &file,
            format!("delta={delta} eta={eta} alpha grid of {}", alphas.len()),
            |header| {
                let mut s = header_with(header);
                let _ = writeln!(s, "axis_value,critical_value,kind");
                for &alpha in &alphas {
                    let base = ReplicaParams::new(alpha, 0.5 * alpha, delta, eta)?;
                    let bracket = (0.02 * alpha, 0.999 * alpha);
                    match find_transition(
                        TransitionKind::Spinodal,
                        SweepAxis::Rho,
                        &base,
                        bracket,
                        1e-3,
                    ) {
                        Ok(v) => {
                            let _ = writeln!(s, "{},{},spinodal", fmt_f64(alpha), fmt_f64(v));
                        }
                        Err(e) => {
                            let _ = writeln!(s, "# spinodal not bracketed at alpha={alpha}: {e}");
                        }
                    }
                    match find_transition(
                        TransitionKind::FirstOrder,
                        SweepAxis::Rho,
                        &base,
                        bracket,
                        1e-3,
                    ) {
                        Ok(v) => {
                            let _ = writeln!(s, "{},{},first_order", fmt_f64(alpha), fmt_f64(v));
                        }
                        Err(e) => {
                            let _ = writeln!(s, "# first_order not bracketed at alpha={alpha}: {e}");
                        }
                    }
                }
                Ok(s)
            },
        );
    }
}

/// Solver MSE trajectories against the density-evolution prediction at
/// rho = 0.1 for three noise settings.
fn fig4(preset: &mut Preset, full: bool, seed: u64) {
    let n = if full { 25_000 } else { 10_000 };
    let iters = 30;
    for (i, (delta, eta)) in [(1e-10, 1e-4), (1e-8, 1e-2), (0.0, 0.0)].iter().enumerate() {
        let (delta, eta) = (*delta, *eta);
        preset.emit(
            &format!("de_case{i}.csv"),
            format!("alpha=0.5 rho=0.1 delta={delta} eta={eta} iters={iters}"),
            |header| {
                let params = ReplicaParams::new(0.5, 0.1, delta, eta)?;
                let traj = de_run(&params, iters, 1e-300)?;
                Ok(de_csv(header, &traj))
            },
        );
        preset.emit(
            &format!("amp_case{i}.csv"),
            format!("alpha=0.5 rho=0.1 delta={delta} eta={eta} n={n} seed={seed} iters={iters}"),
            |header| {
                let inst = generate(
                    n,
                    0.5,
                    SignalPrior::new(0.1)?,
                    NoiseModel::new(delta, eta)?,
                    seed,
                )?;
                let cfg = AmpConfig { max_iters: iters, tol: 1e-300, ..Default::default() };
                let report = amp_run(&inst, inst.prior(), &cfg, Some(inst.signal()))?;
                Ok(amp_report_csv(header, &report))
            },
        );
    }
}

fn header_with(header: &OutputHeader) -> String {
    header.render_for_manifest()
}

/// Path helper kept for tests.
pub fn manifest_path(dir: &str) -> PathBuf {
    Path::new(dir).join("manifest.csv")
}
