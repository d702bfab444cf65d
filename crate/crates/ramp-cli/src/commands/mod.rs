//! Implementations behind the CLI subcommands. Each takes its clap args
//! plus the config-file settings, resolves the final values (flag beats
//! file beats default), runs the library and writes CSV artifacts.

pub mod reproduce;

use std::path::PathBuf;

use clap::Args;

use ramp_core::amp::{amp_run, AmpConfig, VarianceRule};
use ramp_core::instance::{generate, NoiseModel, ProblemInstance};
use ramp_core::phase::{sweep_phase_diagram, SweepAxis, SweepColumn, SweepSpec};
use ramp_core::prior::SignalPrior;
use ramp_core::replica::{scan_potential, GridSpec, ReplicaParams};
use ramp_core::state_evolution::de_run;

use crate::config::Settings;
use crate::instance_io::{load_instance, save_instance};
use crate::output::{
    amp_report_csv, de_csv, estimate_csv, phase_points_csv, potential_csv,
    transition_lines_csv, write_atomic, OutputHeader,
};
use crate::CliError;

fn parse_rule(raw: &str) -> Result<VarianceRule, CliError> {
    match raw {
        "robust" => Ok(VarianceRule::Robust),
        "mu-amp" => Ok(VarianceRule::MatrixUncertainty),
        "known-noise" => Ok(VarianceRule::KnownNoise),
        other => Err(CliError::Usage(format!(
            "unknown variance rule `{other}` (expected robust, mu-amp or known-noise)"
        ))),
    }
}

#[derive(Args, Debug)]
pub struct AmpArgs {
    /// Signal length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sampling rate M/N.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Density of nonzero signal components.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Measurement-noise variance.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Matrix-uncertainty level.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Residual-variance rule: robust, mu-amp or known-noise.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Convergence threshold on the mean-square estimate change.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Weight of the previous iterate blended into each update, in [0, 1).
    #[arg(long)]
    pub damping: Option<f64>,
    /// Trajectory CSV path.
    #[arg(long)]
    pub out: Option<String>,
    /// Final-estimate CSV path.
    #[arg(long)]
    pub estimate_out: Option<String>,
    /// Load the instance from a container file instead of generating.
    #[arg(long)]
    pub instance_in: Option<PathBuf>,
    /// Save the generated instance to a container file.
    #[arg(long)]
    pub instance_out: Option<PathBuf>,
}

pub fn run_amp(args: &AmpArgs, settings: &mut Settings) -> Result<(), CliError> {
    let n = settings.resolve("n", args.n, 1000)?;
    let alpha = settings.resolve("alpha", args.alpha, 0.5)?;
    let rho = settings.resolve("rho", args.rho, 0.1)?;
    let delta = settings.resolve("delta", args.delta, 0.0)?;
    let eta = settings.resolve("eta", args.eta, 0.0)?;
    let seed = settings.resolve("seed", args.seed, 0)?;
    let rule_name = settings.resolve("rule", args.rule.clone(), "robust".to_string())?;
    let max_iters = settings.resolve("max_iters", args.max_iters, 1000)?;
    let tol = settings.resolve("tol", args.tol, 1e-12)?;
    let damping = settings.resolve("damping", args.damping, 0.0)?;
    let out = settings.resolve("out", args.out.clone(), "amp_report.csv".to_string())?;
    let estimate_out =
        settings.resolve("estimate_out", args.estimate_out.clone(), "amp_estimate.csv".to_string())?;

    let rule = parse_rule(&rule_name)?;
    let cfg = AmpConfig { rule, max_iters, tol, damping };
    cfg.validate()?;

    let inst: ProblemInstance = match &args.instance_in {
        Some(path) => {
            let inst = load_instance(path).map_err(|e| CliError::Io(e.to_string()))?;
            // the file's parameters are authoritative; re-echo them
            settings.record("n", inst.n().to_string());
            settings.record("alpha", format!("{}", inst.m() as f64 / inst.n() as f64));
            settings.record("rho", format!("{}", inst.prior().rho()));
            settings.record("delta", format!("{}", inst.noise().delta()));
            settings.record("eta", format!("{}", inst.noise().eta()));
            settings.record("seed", inst.seed().to_string());
            inst
        }
        None => {
            let prior = SignalPrior::new(rho)?;
            let noise = NoiseModel::new(delta, eta)?;
            generate(n, alpha, prior, noise, seed)?
        }
    };
    if let Some(path) = &args.instance_out {
        save_instance(&inst, path).map_err(|e| CliError::Io(e.to_string()))?;
    }

    let prior = *inst.prior();
    let report = amp_run(&inst, &prior, &cfg, Some(inst.signal()))?;
    if !report.converged {
        eprintln!(
            "ramp: warning: solver did not reach tol={tol:e} within {max_iters} iterations"
        );
    }

    let header =
        OutputHeader { command: "amp", config: settings.echo(), seed: inst.seed() };
    write_atomic(out.as_ref(), &amp_report_csv(&header, &report))?;
    write_atomic(estimate_out.as_ref(), &estimate_csv(&header, &report.final_estimate))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct PotentialArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Log-spaced grid size (>= 64).
    #[arg(long)]
    pub points: Option<usize>,
    /// Lower grid edge (default max(1e-12, delta/10)).
    #[arg(long)]
    pub e_min: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run_potential(args: &PotentialArgs, settings: &mut Settings) -> Result<(), CliError> {
    let alpha = settings.resolve("alpha", args.alpha, 0.5)?;
    let rho = settings.resolve("rho", args.rho, 0.1)?;
    let delta = settings.resolve("delta", args.delta, 0.0)?;
    let eta = settings.resolve("eta", args.eta, 0.0)?;
    let points = settings.resolve("points", args.points, 256)?;
    let e_min = settings.resolve_opt("e_min", args.e_min)?;
    let out = settings.resolve("out", args.out.clone(), "potential.csv".to_string())?;
    let seed = settings.resolve("seed", None, 0)?;

    let params = ReplicaParams::new(alpha, rho, delta, eta)?;
    let curve = scan_potential(&params, &GridSpec { points, e_min })?;
    let header = OutputHeader { command: "potential", config: settings.echo(), seed };
    write_atomic(out.as_ref(), &potential_csv(&header, &curve))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct DeArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative fixed-point tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run_de(args: &DeArgs, settings: &mut Settings) -> Result<(), CliError> {
    let alpha = settings.resolve("alpha", args.alpha, 0.5)?;
    let rho = settings.resolve("rho", args.rho, 0.1)?;
    let delta = settings.resolve("delta", args.delta, 0.0)?;
    let eta = settings.resolve("eta", args.eta, 0.0)?;
    let max_iters = settings.resolve("max_iters", args.max_iters, 500)?;
    let tol = settings.resolve("tol", args.tol, 1e-10)?;
    let out = settings.resolve("out", args.out.clone(), "de_trajectory.csv".to_string())?;
    let seed = settings.resolve("seed", None, 0)?;

    let params = ReplicaParams::new(alpha, rho, delta, eta)?;
    let traj = de_run(&params, max_iters, tol)?;
    let header = OutputHeader { command: "de", config: settings.echo(), seed };
    write_atomic(out.as_ref(), &de_csv(&header, &traj))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    /// Fixed parameters, e.g. `delta=1e-4,eta=1e-6`.
    #[arg(long)]
    pub fix: Option<String>,
    /// Two axis specs `axis:start:stop:count[:log]`, outer first, e.g.
    /// `alpha:0.05:1:20,rho_over_alpha:0.05:1:20`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Relative bisection resolution for the transition lines.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Classify the grid only; skip line refinement.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub points_out: Option<String>,
    #[arg(long)]
    pub lines_out: Option<String>,
}

fn axis_values(start: f64, stop: f64, count: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if count == 0 {
        return Err(CliError::Usage("grid count must be at least 1".into()));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if log {
        if start <= 0.0 || stop <= 0.0 {
            return Err(CliError::Usage("log-spaced grid needs positive endpoints".into()));
        }
        let ratio = (stop / start).ln() / (count - 1) as f64;
        Ok((0..count).map(|i| start * (ratio * i as f64).exp()).collect())
    } else {
        let step = (stop - start) / (count - 1) as f64;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    }
}

struct GridAxis {
    name: String,
    values: Vec<f64>,
}

fn parse_grid_axis(spec: &str) -> Result<GridAxis, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 && parts.len() != 5 {
        return Err(CliError::Usage(format!(
            "grid axis `{spec}`: expected axis:start:stop:count[:log]"
        )));
    }
    let log = match parts.get(4) {
        None => false,
        Some(&"log") => true,
        Some(other) => {
            return Err(CliError::Usage(format!("grid axis `{spec}`: unknown flag `{other}`")))
        }
    };
    let parse_f = |s: &str| -> Result<f64, CliError> {
        s.parse().map_err(|_| CliError::Usage(format!("grid axis `{spec}`: bad number `{s}`")))
    };
    let start = parse_f(parts[1])?;
    let stop = parse_f(parts[2])?;
    let count: usize = parts[3]
        .parse()
        .map_err(|_| CliError::Usage(format!("grid axis `{spec}`: bad count `{}`", parts[3])))?;
    Ok(GridAxis { name: parts[0].to_string(), values: axis_values(start, stop, count, log)? })
}

fn sweep_axis(name: &str) -> Result<SweepAxis, CliError> {
    match name {
        "alpha" => Ok(SweepAxis::Alpha),
        "rho" => Ok(SweepAxis::Rho),
        "delta" => Ok(SweepAxis::Delta),
        "eta" => Ok(SweepAxis::Eta),
        other => Err(CliError::Usage(format!("unknown sweep axis `{other}`"))),
    }
}

pub fn run_phase(args: &PhaseArgs, settings: &mut Settings) -> Result<(), CliError> {
    let fix = settings.resolve("fix", args.fix.clone(), String::new())?;
    let grid = settings.resolve(
        "grid",
        args.grid.clone(),
        "alpha:0.1:0.9:9,rho_over_alpha:0.1:0.9:9".to_string(),
    )?;
    let resolution = settings.resolve("resolution", args.resolution, 1e-3)?;
    let refine = !args.no_refine;
    settings.record("refine", refine.to_string());
    let points_out =
        settings.resolve("points_out", args.points_out.clone(), "phase_points.csv".to_string())?;
    let lines_out =
        settings.resolve("lines_out", args.lines_out.clone(), "phase_lines.csv".to_string())?;
    let seed = settings.resolve("seed", None, 0)?;

    // fixed parameters over neutral defaults
    let (mut alpha, mut rho, mut delta, mut eta) = (0.5, 0.1, 0.0, 0.0);
    if !fix.is_empty() {
        for pair in fix.split(',') {
            let Some((k, v)) = pair.split_once('=') else {
                return Err(CliError::Usage(format!("--fix entry `{pair}`: expected key=value")));
            };
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--fix `{pair}`: bad number `{v}`")))?;
            match k.trim() {
                "alpha" => alpha = value,
                "rho" => rho = value,
                "delta" => delta = value,
                "eta" => eta = value,
                other => {
                    return Err(CliError::Usage(format!("--fix: unknown parameter `{other}`")))
                }
            }
        }
    }
    let base = ReplicaParams::new(alpha, rho, delta, eta)?;

    let axes: Vec<&str> = grid.split(',').collect();
    if axes.len() != 2 {
        return Err(CliError::Usage("grid needs exactly two axis specs".into()));
    }
    let outer = parse_grid_axis(axes[0])?;
    let inner = parse_grid_axis(axes[1])?;
    let outer_axis = sweep_axis(&outer.name)?;
    let relative_inner = inner.name == "rho_over_alpha";
    let inner_axis = if relative_inner { SweepAxis::Rho } else { sweep_axis(&inner.name)? };
    if relative_inner && outer_axis != SweepAxis::Alpha {
        return Err(CliError::Usage(
            "rho_over_alpha requires the outer axis to be alpha".into(),
        ));
    }

    let columns: Vec<SweepColumn> = outer
        .values
        .iter()
        .map(|&ov| SweepColumn {
            outer_value: ov,
            inner_values: inner
                .values
                .iter()
                .map(|&iv| if relative_inner { iv * ov } else { iv })
                .collect(),
        })
        .collect();

    let spec = SweepSpec {
        base,
        outer_axis,
        inner_axis,
        columns,
        resolution,
        refine_lines: refine,
    };
    let outcome = sweep_phase_diagram(&spec)?;
    let failures: usize = outcome
        .points
        .iter()
        .map(|col| col.iter().filter(|c| c.is_err()).count())
        .sum();
    if failures > 0 {
        eprintln!("ramp: warning: {failures} grid points failed; see the points file");
    }

    let header = OutputHeader { command: "phase", config: settings.echo(), seed };
    write_atomic(points_out.as_ref(), &phase_points_csv(&header, &spec, &outcome))?;
    write_atomic(
        lines_out.as_ref(),
        &transition_lines_csv(&header, &[&outcome.spinodal, &outcome.first_order]),
    )?;
    Ok(())
}
