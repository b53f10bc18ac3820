//! Command-line front end: file-based system ingestion, classification,
//! trajectory export, batch flow maps, and the verification suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
//! 3 numeric failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{
    embedded_distance, flow_map, integrate_extremal, BlowupState, ExtremalTrajectory,
    IntegratorConfig, TerminationReason,
};
use crate::specfile::SystemSpecFile;
use crate::system::ControlSystem;
use crate::verify::{run_suite, VerifyOptions};

#[derive(Parser, Debug)]
#[command(
    name = "extremal-kit",
    version,
    about = "Classification and integration of time-optimal extremals for \
             control-affine systems on R^3 with disk-valued controls"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify the switching behavior over a state-space point.
    Classify(ClassifyArgs),
    /// Integrate one extremal and export the trajectory as CSV.
    Integrate(IntegrateArgs),
    /// Integrate a family of shrinking perturbations and report each final
    /// state with its deviation from the unperturbed reference run.
    Flowmap(FlowmapArgs),
    /// Run the cross-validation suite and report per-check results.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct SpecArgs {
    /// System description file (JSON).
    #[arg(long, value_name = "PATH")]
    pub spec: PathBuf,
    /// Override a declared parameter, e.g. --param alpha=2. Repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
}

impl SpecArgs {
    fn load(&self) -> Result<(SystemSpecFile, ControlSystem)> {
        let file = SystemSpecFile::read(&self.spec)?;
        let overrides = parse_param_overrides(&self.params)?;
        let sys = file.resolve(&overrides)?;
        Ok((file, sys))
    }
}

fn parse_param_overrides(raw: &[String]) -> Result<std::collections::BTreeMap<String, f64>> {
    raw.iter()
        .map(|entry| {
            let (name, value) = entry.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!(
                    "parameter override '{entry}' is not of the form NAME=VALUE"
                ))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("parameter value in '{entry}' is not a number"))
            })?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

/// Stepper and collar tolerances, all defaulting to the library values.
#[derive(Args, Debug)]
pub struct TolArgs {
    /// Relative local error tolerance of the adaptive stepper.
    #[arg(long, value_name = "TOL")]
    pub rel_tol: Option<f64>,
    /// Absolute local error tolerance of the adaptive stepper.
    #[arg(long, value_name = "TOL")]
    pub abs_tol: Option<f64>,
    /// Integrate with this fixed step instead of adaptive control;
    /// output files are then byte-identical across runs.
    #[arg(long, value_name = "H")]
    pub fixed_step: Option<f64>,
    /// Upper bound on the adaptive step size.
    #[arg(long, value_name = "H")]
    pub max_step: Option<f64>,
    /// Radius below which the collar logic takes over.
    #[arg(long, value_name = "EPS")]
    pub eps_switch: Option<f64>,
    /// Radius at which the outgoing branch restarts after a capture.
    #[arg(long, value_name = "EPS")]
    pub eps_restart: Option<f64>,
    /// Angular capture window around the incoming equilibrium.
    #[arg(long, value_name = "TOL")]
    pub angle_tol: Option<f64>,
    /// Drift bound for monitored conserved quantities.
    #[arg(long, value_name = "TOL")]
    pub drift_tol: Option<f64>,
}

impl TolArgs {
    fn config(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::default();
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        cfg.fixed_step = self.fixed_step.or(cfg.fixed_step);
        if let Some(v) = self.max_step {
            cfg.max_step = v;
        }
        if let Some(v) = self.eps_switch {
            cfg.eps_switch = v;
        }
        if let Some(v) = self.eps_restart {
            cfg.eps_restart = v;
        }
        if let Some(v) = self.angle_tol {
            cfg.angle_tol = v;
        }
        if let Some(v) = self.drift_tol {
            cfg.drift_tol = v;
        }
        cfg
    }
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Base point in state space, defaults to the origin.
    #[arg(
        long,
        num_args = 3,
        value_names = ["X1", "X2", "X3"],
        allow_negative_numbers = true,
        default_values_t = [0.0, 0.0, 0.0]
    )]
    pub point: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Initial chart state, comma-separated.
    #[arg(long, value_name = "RHO,THETA,H3,X1,X2,X3", allow_hyphen_values = true)]
    pub init: String,
    /// Integration horizon.
    #[arg(long, value_name = "T", allow_negative_numbers = true)]
    pub tmax: f64,
    /// Trajectory output file (CSV).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Args, Debug)]
pub struct FlowmapArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Reference initial chart state, comma-separated.
    #[arg(long, value_name = "RHO,THETA,H3,X1,X2,X3", allow_hyphen_values = true)]
    pub init: String,
    /// Integration horizon.
    #[arg(long, value_name = "T", allow_negative_numbers = true)]
    pub tmax: f64,
    /// Grid output file (CSV).
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Number of shrinking perturbations.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    /// Largest perturbation; successive rows halve it.
    #[arg(long, default_value_t = 0.125)]
    pub radius: f64,
    /// Seed for the perturbation direction.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub tol: TolArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Optional system file: parsed, parameter-resolved, and echoed into
    /// the report. The numeric checks themselves run on the built-in
    /// families they have frozen expected values for.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Override a declared parameter of --spec. Repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Search over the widened candidate control family.
    #[arg(long)]
    pub wide: bool,
    /// Test hook: deliberately flip the bracket sign inside the Poisson
    /// check; the suite must then fail.
    #[arg(long)]
    pub inject_poisson_sign_flip: bool,
    /// Initial conditions in the switching Monte Carlo.
    #[arg(long, default_value_t = 1000)]
    pub mc_runs: usize,
    /// Trajectories pooled into the envelope fit.
    #[arg(long, default_value_t = 100)]
    pub envelope_runs: usize,
    /// Extremal endpoints attacked by the time-optimality search.
    #[arg(long, default_value_t = 2)]
    pub search_targets: usize,
    /// Simulation budget per search target.
    #[arg(long, default_value_t = 20_000)]
    pub search_budget: usize,
}

/// Map a library error onto the exit-code contract: spec, input, and file
/// problems are usage errors; everything else is a numeric failure.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::SpecFile(_) | Error::InvalidInput(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

/// Honor `EXTREMAL_KIT_THREADS` by capping the global worker pool. Must run
/// before any parallel work.
pub fn configure_threads_from_env() -> Result<()> {
    match std::env::var("EXTREMAL_KIT_THREADS") {
        Ok(raw) => {
            let n: usize = raw.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "EXTREMAL_KIT_THREADS = '{raw}' is not a positive integer"
                ))
            })?;
            if n == 0 {
                return Err(Error::InvalidInput(
                    "EXTREMAL_KIT_THREADS must be at least 1".into(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidInput(format!("thread pool setup failed: {e}")))
        }
        Err(_) => Ok(()),
    }
}

/// Normalize a float for rendering: collapses negative zero so reports and
/// files never print "-0".
fn num(v: f64) -> f64 {
    v + 0.0
}

fn parse_init(raw: &str) -> Result<BlowupState> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 6 {
        return Err(Error::InvalidInput(format!(
            "--init needs 6 comma-separated numbers (rho,theta,h3,x1,x2,x3), got {}",
            parts.len()
        )));
    }
    let mut vals = [0.0f64; 6];
    for (slot, part) in vals.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("--init component '{}' is not a number", part.trim()))
        })?;
    }
    Ok(BlowupState::from_array(&vals))
}

fn render_classification(name: &str, report: &crate::classify::ClassificationReport) -> String {
    let mut out = String::new();
    let p = report.point;
    out.push_str(&format!("system: {name}\n"));
    out.push_str(&format!("point: {} {} {}\n", num(p[0]), num(p[1]), num(p[2])));
    let lb = report.lambda_bar;
    out.push_str(&format!(
        "lambda_bar: {} {} {}\n",
        num(lb[0]),
        num(lb[1]),
        num(lb[2])
    ));
    out.push_str(&format!("r: {}\n", num(report.r)));
    out.push_str(&format!("h01: {}\n", num(report.h01)));
    out.push_str(&format!("h02: {}\n", num(report.h02)));
    out.push_str(&format!("h12: {}\n", num(report.h12)));
    out.push_str(&format!("phi: {}\n", num(report.phi)));
    out.push_str(&format!("case: {:?}\n", report.case));
    if let (Some(tm), Some(tp)) = (report.theta_minus, report.theta_plus) {
        out.push_str(&format!("theta_minus: {}\n", num(tm)));
        out.push_str(&format!("theta_plus: {}\n", num(tp)));
    }
    if let (Some(um), Some(up)) = (report.u_minus, report.u_plus) {
        out.push_str(&format!("u_minus: {} {}\n", num(um.u1), num(um.u2)));
        out.push_str(&format!("u_plus: {} {}\n", num(up.u1), num(up.u2)));
    }
    out
}

/// Trajectory CSV: sample rows in time order with switch rows (event = 1)
/// spliced in at the crossing times.
fn trajectory_csv(traj: &ExtremalTrajectory) -> String {
    let mut rows: Vec<(f64, u8, String)> = Vec::with_capacity(traj.samples.len() + 1);
    for s in &traj.samples {
        rows.push((
            s.t,
            0,
            format!(
                "{},{},{},{},{},{},{},{},{},0",
                num(s.t),
                num(s.state.x[0]),
                num(s.state.x[1]),
                num(s.state.x[2]),
                num(s.state.rho),
                num(s.state.theta),
                num(s.state.h3),
                num(s.u.u1),
                num(s.u.u2)
            ),
        ));
    }
    for ev in &traj.events {
        rows.push((
            ev.t,
            1,
            format!(
                "{},{},{},{},0,{},{},{},{},1",
                num(ev.t),
                num(ev.x[0]),
                num(ev.x[1]),
                num(ev.x[2]),
                num(ev.theta_out),
                num(ev.h3),
                num(ev.u_out.u1),
                num(ev.u_out.u2)
            ),
        ));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = String::from("t,x1,x2,x3,rho,theta,h3,u1,u2,event\n");
    for (_, _, line) in rows {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn run_classify(args: &ClassifyArgs) -> Result<()> {
    let (file, sys) = args.spec.load()?;
    let point = [args.point[0], args.point[1], args.point[2]];
    let report = crate::classify::classify_point(&sys, &point)?;
    print!("{}", render_classification(&file.name, &report));
    Ok(())
}

fn run_integrate(args: &IntegrateArgs) -> Result<()> {
    let (_, sys) = args.spec.load()?;
    let init = parse_init(&args.init)?;
    let config = args.tol.config();
    let traj = integrate_extremal(&sys, &init, args.tmax, &config)?;
    std::fs::write(&args.out, trajectory_csv(&traj))?;
    println!("termination: {:?}", traj.termination);
    println!("final_time: {}", num(traj.final_time));
    println!("samples: {}", traj.samples.len());
    println!("switchings: {}", traj.count_switchings());
    for ev in &traj.events {
        println!(
            "switch t={}: u_in ({} {}) -> u_out ({} {})",
            num(ev.t),
            num(ev.u_in.u1),
            num(ev.u_in.u2),
            num(ev.u_out.u1),
            num(ev.u_out.u2)
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn termination_code(reason: &TerminationReason) -> u8 {
    match reason {
        TerminationReason::ReachedTmax => 0,
        TerminationReason::LimitCaseHold => 1,
        TerminationReason::DegeneratePoint => 2,
    }
}

fn run_flowmap(args: &FlowmapArgs) -> Result<()> {
    let (_, sys) = args.spec.load()?;
    let center = parse_init(&args.init)?;
    if !(args.radius > 0.0) {
        return Err(Error::InvalidInput("--radius must be positive".into()));
    }
    let mut config = args.tol.config();
    config.record_samples = false;
    let reference = integrate_extremal(&sys, &center, args.tmax, &config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dir = loop {
        let mut v = [0.0f64; 6];
        for c in &mut v {
            *c = rng.gen_range(-1.0..1.0);
        }
        let n = v.iter().map(|c| c * c).fold(0.0, |a, b| a + b).sqrt();
        if n > 0.1 {
            break v.map(|c| c / n);
        }
    };
    let base = center.to_array();
    let mut offsets = Vec::with_capacity(args.grid);
    let mut inits = Vec::with_capacity(args.grid);
    for j in 0..args.grid {
        let offset = args.radius * 0.5f64.powi(j as i32);
        let mut y = base;
        for i in 0..6 {
            y[i] += offset * dir[i];
        }
        offsets.push(offset);
        inits.push(BlowupState::from_array(&y));
    }
    let results = flow_map(&sys, &inits, args.tmax, &config);

    let mut out = String::from("k,offset,rho,theta,h3,x1,x2,x3,deviation,status\n");
    let rf = &reference.final_state;
    out.push_str(&format!(
        "0,0,{},{},{},{},{},{},0,{}\n",
        num(rf.rho),
        num(rf.theta),
        num(rf.h3),
        num(rf.x[0]),
        num(rf.x[1]),
        num(rf.x[2]),
        termination_code(&reference.termination)
    ));
    let mut max_dev = 0.0f64;
    for (j, (offset, result)) in offsets.iter().zip(&results).enumerate() {
        match result {
            Ok(traj) => {
                let s = &traj.final_state;
                let dev = embedded_distance(s, rf);
                max_dev = max_dev.max(dev);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    j + 1,
                    num(*offset),
                    num(s.rho),
                    num(s.theta),
                    num(s.h3),
                    num(s.x[0]),
                    num(s.x[1]),
                    num(s.x[2]),
                    num(dev),
                    termination_code(&traj.termination)
                ));
            }
            Err(e) => {
                out.push_str(&format!(
                    "{},{},NaN,NaN,NaN,NaN,NaN,NaN,NaN,3\n",
                    j + 1,
                    num(*offset)
                ));
                eprintln!("row {}: {e}", j + 1);
            }
        }
    }
    std::fs::write(&args.out, out)?;
    println!("rows: {}", args.grid + 1);
    println!("max_deviation: {}", num(max_dev));
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Returns true when the whole suite passed.
fn run_verify(args: &VerifyArgs) -> Result<bool> {
    let mut spec_note = None;
    if let Some(path) = &args.spec {
        let file = SystemSpecFile::read(path)?;
        let overrides = parse_param_overrides(&args.params)?;
        file.resolve(&overrides)?;
        spec_note = Some((path.clone(), file.name));
    }
    let opts = VerifyOptions {
        seed: args.seed,
        mc_runs: args.mc_runs,
        envelope_runs: args.envelope_runs,
        search_targets: args.search_targets,
        search_budget: args.search_budget,
        wide_search: args.wide,
        inject_poisson_sign_flip: args.inject_poisson_sign_flip,
    };
    let report = run_suite(&opts);
    if let Some((path, name)) = spec_note {
        println!("# spec {} ({name}) parsed and resolved", path.display());
    }
    for (key, value) in &report.environment {
        println!("# {key} = {value}");
    }
    for c in &report.checks {
        println!(
            "{} {} measured={:e} tolerance={:e} :: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            num(c.measured),
            num(c.tolerance),
            c.detail
        );
    }
    let passed = report.passed();
    println!("suite: {}", if passed { "PASS" } else { "FAIL" });
    Ok(passed)
}

/// Dispatch a parsed invocation; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Classify(args) => run_classify(args).map(|()| true),
        Command::Integrate(args) => run_integrate(args).map(|()| true),
        Command::Flowmap(args) => run_flowmap(args).map(|()| true),
        Command::Verify(args) => run_verify(args),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::drift_family;

    #[test]
    fn init_string_round_trips() {
        let s = parse_init("0.5, -0.5235987755982988, 1.0, 0, 0, 0").unwrap();
        assert_eq!(s.rho, 0.5);
        assert_eq!(s.h3, 1.0);
        assert!(parse_init("1,2,3").is_err());
        assert!(parse_init("1,2,3,4,5,banana").is_err());
    }

    #[test]
    fn param_overrides_parse() {
        let got = parse_param_overrides(&["alpha=2".into(), " beta = 0.5 ".into()]).unwrap();
        assert_eq!(got.get("alpha"), Some(&2.0));
        assert_eq!(got.get("beta"), Some(&0.5));
        assert!(parse_param_overrides(&["alpha".into()]).is_err());
        assert!(parse_param_overrides(&["alpha=x".into()]).is_err());
    }

    #[test]
    fn trajectory_csv_has_the_pinned_header_and_event_rows() {
        let sys = drift_family(2.0);
        let init = BlowupState::new(0.5, -std::f64::consts::PI / 6.0, 1.0, [0.0; 3]);
        let traj = integrate_extremal(&sys, &init, 0.5, &IntegratorConfig::default()).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,x2,x3,rho,theta,h3,u1,u2,event");
        let event_rows: Vec<&str> = csv.lines().filter(|l| l.ends_with(",1")).collect();
        assert_eq!(event_rows.len(), 1);
        let fields: Vec<&str> = event_rows[0].split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[4], "0");
        // Rows are in time order.
        let ts: Vec<f64> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn negative_zero_never_reaches_the_output() {
        assert_eq!(format!("{}", num(-0.0)), "0");
        assert_eq!(format!("{}", num(-1.5)), "-1.5");
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code_for(&Error::SpecFile("x".into())), 2);
        assert_eq!(exit_code_for(&Error::InvalidInput("x".into())), 2);
        assert_eq!(
            exit_code_for(&Error::IntegrationFailure("x".into())),
            3
        );
        assert_eq!(
            exit_code_for(&Error::ChartSingular { rho: 0.0 }),
            3
        );
    }
}
