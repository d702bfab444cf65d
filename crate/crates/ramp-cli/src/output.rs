//! CSV output formats and atomic file writes.
//!
//! Every output file starts with comment lines carrying the tool version,
//! the fully resolved configuration and the seed, so a result can be
//! traced back to the exact run that produced it. Floats are printed with
//! the shortest round-trip representation, which makes identical runs
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use ramp_core::amp::AmpReport;
use ramp_core::phase::{PhasePoint, SweepOutcome, SweepSpec, TransitionLine};
use ramp_core::replica::PotentialCurve;
use ramp_core::state_evolution::{DeStatus, DeTrajectory};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest round-trip float formatting, scientific outside [1e-4, 1e6).
/// Identical runs produce byte-identical files.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if (1e-4..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Header block prepended to every output file.
#[derive(Debug, Clone)]
pub struct OutputHeader {
    pub command: &'static str,
    /// Fully resolved `key=value` pairs, sorted by key.
    pub config: Vec<(String, String)>,
    pub seed: u64,
}

impl OutputHeader {
    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# ramp {TOOL_VERSION}");
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

/// Write via a temp file in the destination directory plus rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| CliError::Io(format!("cannot create temp file near {}: {e}", path.display())))?;
    std::fs::write(tmp.path(), contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

/// Solver trajectory: `t, mse, v_mean, delta_a`, one row per sweep.
pub fn amp_report_csv(header: &OutputHeader, report: &AmpReport) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "# converged: {}", report.converged);
    let _ = writeln!(s, "# iterations: {}", report.iterations);
    let _ = writeln!(s, "t,mse,v_mean,delta_a");
    for t in 0..report.iterations {
        let mse = report.mse_per_iter.get(t).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            s,
            "{},{},{},{}",
            t + 1,
            fmt_f64(mse),
            fmt_f64(report.v_mean_per_iter[t]),
            fmt_f64(report.delta_a_per_iter[t])
        );
    }
    s
}

/// Final estimate: `i, estimate`.
pub fn estimate_csv(header: &OutputHeader, estimate: &[f64]) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "i,estimate");
    for (i, v) in estimate.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt_f64(*v));
    }
    s
}

/// Potential curve: `E, phi` rows plus a trailing maxima comment block.
pub fn potential_csv(header: &OutputHeader, curve: &PotentialCurve) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "E,phi");
    for (e, p) in curve.grid.iter().zip(&curve.phi) {
        let _ = writeln!(s, "{},{}", fmt_f64(*e), fmt_f64(*p));
    }
    let _ = writeln!(s, "# maxima:");
    for m in &curve.maxima {
        let _ = writeln!(
            s,
            "# maximum: e={} phi={} boundary={}",
            fmt_f64(m.e),
            fmt_f64(m.phi),
            m.boundary
        );
    }
    if curve.plateau {
        let _ = writeln!(s, "# plateau: true");
    }
    s
}

fn de_status_str(status: DeStatus) -> &'static str {
    match status {
        DeStatus::Converged => "converged",
        DeStatus::MaxItersReached => "max_iters",
        DeStatus::Oscillating => "oscillating",
        DeStatus::Degenerate => "degenerate",
    }
}

/// Density-evolution trajectory: `t, E` with t starting at 0; row t
/// aligns with solver-report row t for overlays.
pub fn de_csv(header: &OutputHeader, traj: &DeTrajectory) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "# fixed_point: {}", fmt_f64(traj.fixed_point));
    let _ = writeln!(s, "# status: {}", de_status_str(traj.status));
    let _ = writeln!(s, "t,E");
    for (t, e) in traj.e_seq.iter().enumerate() {
        let _ = writeln!(s, "{t},{}", fmt_f64(*e));
    }
    s
}

/// Phase map: `alpha, rho, delta, eta, class, bayes_mse, amp_mse`. Failed
/// grid points are kept as rows with class `error`.
pub fn phase_points_csv(
    header: &OutputHeader,
    spec: &SweepSpec,
    outcome: &SweepOutcome,
) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "alpha,rho,delta,eta,class,bayes_mse,amp_mse");
    for (col, cells) in spec.columns.iter().zip(&outcome.points) {
        for (inner, cell) in col.inner_values.iter().zip(cells) {
            match cell {
                Ok(pt) => {
                    let p = &pt.params;
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        fmt_f64(p.alpha()),
                        fmt_f64(p.rho()),
                        fmt_f64(p.delta()),
                        fmt_f64(p.eta()),
                        pt.class.as_str(),
                        fmt_f64(pt.bayes_mse),
                        fmt_f64(pt.amp_mse_predicted)
                    );
                }
                Err(msg) => {
                    let _ = writeln!(
                        s,
                        "# point failed at {}={} {}={}: {msg}",
                        spec.outer_axis.as_str(),
                        col.outer_value,
                        spec.inner_axis.as_str(),
                        inner
                    );
                    let _ = writeln!(s, ",,,,error,nan,nan");
                }
            }
        }
    }
    s
}

/// Single classified point as one CSV row (same columns as the sweep).
pub fn phase_point_csv(header: &OutputHeader, pt: &PhasePoint) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "alpha,rho,delta,eta,class,bayes_mse,amp_mse");
    let p = &pt.params;
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{}",
        fmt_f64(p.alpha()),
        fmt_f64(p.rho()),
        fmt_f64(p.delta()),
        fmt_f64(p.eta()),
        pt.class.as_str(),
        fmt_f64(pt.bayes_mse),
        fmt_f64(pt.amp_mse_predicted)
    );
    s
}

/// Transition lines: `axis_value, critical_value, kind`.
pub fn transition_lines_csv(header: &OutputHeader, lines: &[&TransitionLine]) -> String {
    let mut s = header.render();
    let _ = writeln!(s, "axis_value,critical_value,kind");
    for line in lines {
        for (axis_value, critical) in &line.points {
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt_f64(*axis_value),
                fmt_f64(*critical),
                line.kind.as_str()
            );
        }
    }
    s
}
