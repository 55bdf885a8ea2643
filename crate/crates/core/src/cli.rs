//! Command-line front end: `preprocess`, `solve`, `simulate`, `check`.
//!
//! Exit codes: 0 success, 1 unreadable or invalid input, 2 infeasible (or a
//! checked solution with violations), 3 time limit without any schedule,
//! 4 stalled simulation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::ids::{RouteId, StreetId};
use crate::net::{Band, Network, Step};
use crate::prep::{simplify, PrepOptions, PrepReport};
use crate::routes::{candidate_routes, enumerate_routes, Route, RouteBounds};
use crate::scenario::{load, Scenario};
use crate::schedule::{build_instance, check_schedule, objective, Candidate, Instance, Vehicle};
use crate::sim::{render_kpi_table, run_scenario, Demand, DemandKind, KpiReport, Policy, PolicyKind, SimConfig, SimError};
use crate::solver::{export_asp_facts, import_asp_model, render_asp_model, solve_exact, SolveError, SolveStatus};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("instance is infeasible")]
    Infeasible,
    #[error("time limit reached before any feasible schedule was found")]
    Timeout,
    #[error("{0}")]
    Stalled(String),
    #[error("{0} rule violation(s)")]
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Infeasible | CliError::Violations(_) => 2,
            CliError::Timeout => 3,
            CliError::Stalled(_) => 4,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Simplified network, its report, and the demand mapped onto it.
pub fn prepare(scenario: &Scenario) -> Result<(Network, PrepReport, Vec<Demand>), CliError> {
    let (network, report) = simplify(&scenario.raw, &scenario.bands, &PrepOptions::default()).map_err(input)?;
    let map = |v: &Demand, s: &StreetId| -> Result<StreetId, CliError> {
        report
            .resolve(s)
            .cloned()
            .ok_or_else(|| CliError::Input(format!("vehicle {}: street {s} is not drivable after simplification", v.id)))
    };
    let mut demand = Vec::with_capacity(scenario.demand.len());
    for d in &scenario.demand {
        let kind = match &d.kind {
            DemandKind::Simulated(Some(route)) => {
                let mut mapped: Vec<StreetId> = Vec::new();
                for s in route {
                    let m = map(d, s)?;
                    if mapped.last() != Some(&m) {
                        mapped.push(m);
                    }
                }
                DemandKind::Simulated(Some(mapped))
            }
            k => k.clone(),
        };
        demand.push(Demand {
            id: d.id.clone(),
            origin: map(d, &d.origin)?,
            destination: map(d, &d.destination)?,
            arrival: d.arrival,
            kind,
        });
    }
    Ok((network, report, demand))
}

/// Instance for the vehicles arriving first. Simulated vehicles among them
/// drive their fixed (or shortest) route at free-flow times.
pub fn first_batch_instance(scenario: &Scenario, network: &Network, demand: &[Demand]) -> Result<Instance, CliError> {
    let q = scenario.quantum;
    let Some(t0) = demand.iter().map(|d| d.arrival).min() else {
        return build_instance(network, Vec::new(), q).map_err(input);
    };
    let batch: Vec<&Demand> = demand.iter().filter(|d| d.arrival == t0).collect();
    let mut fixed: Vec<Vehicle> = Vec::new();
    let mut candidates: Vec<(&Demand, Vec<Route>)> = Vec::new();
    for d in &batch {
        match &d.kind {
            DemandKind::Controlled => {
                let routes = candidate_routes(network, &d.origin, &d.destination, &scenario.search)
                    .map_err(input)?
                    .into_iter()
                    .enumerate()
                    .map(|(k, r)| r.with_id(format!("{}_r{k}", d.id)))
                    .collect();
                candidates.push((d, routes));
            }
            DemandKind::Simulated(route) => {
                let r = match route {
                    Some(streets) => Route::from_streets(network, RouteId::new(format!("{}_fixed", d.id)), streets.clone())
                        .map_err(input)?,
                    None => enumerate_routes(network, &d.origin, &d.destination, 1)
                        .map_err(input)?
                        .remove(0)
                        .with_id(format!("{}_fixed", d.id)),
                };
                r.validate(network).map_err(|e| CliError::Input(format!("vehicle {}: {e}", d.id)))?;
                let mut t: Step = 0;
                let times = r
                    .streets
                    .iter()
                    .map(|s| {
                        let i = network.index_of(s).expect("validated route");
                        let d = network.travel_steps(i, Band::Low, q);
                        t += d;
                        (t - d, t)
                    })
                    .collect();
                fixed.push(Vehicle::simulated(d.id.clone(), r, times));
            }
        }
    }
    let mut vehicles = fixed.clone();
    for (i, (d, routes)) in candidates.iter().enumerate() {
        let mut others: Vec<&Route> = fixed.iter().map(|v| &v.candidates[0].route).collect();
        others.extend(
            candidates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, (_, r))| &r[0]),
        );
        let cands = routes
            .iter()
            .map(|r| Candidate {
                bounds: RouteBounds::compute(network, r, &others, q),
                route: r.clone(),
            })
            .collect();
        vehicles.push(Vehicle::controlled(d.id.clone(), cands));
    }
    build_instance(network, vehicles, q).map_err(input)
}

pub fn cmd_preprocess(path: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = load(path).map_err(input)?;
    let (network, report) = simplify(&scenario.raw, &scenario.bands, &PrepOptions::default()).map_err(input)?;
    let mut dump = String::new();
    dump.push_str(&format!(
        "# {} streets, {} links, {} roundabouts\n",
        network.streets().len(),
        network.links().len(),
        network.roundabouts().len()
    ));
    for (i, s) in network.streets().iter().enumerate() {
        dump.push_str(&format!(
            "street {} {} {} length={} lanes={} capacity={}",
            s.id,
            s.from,
            s.to,
            s.length,
            s.lanes,
            network.capacity(i)
        ));
        if let Some(r) = &s.roundabout {
            dump.push_str(&format!(" roundabout={r}"));
        }
        dump.push('\n');
    }
    for (a, b) in network.links() {
        dump.push_str(&format!("link {a} {b}\n"));
    }
    for r in network.roundabouts() {
        dump.push_str(&format!("roundabout {} capacity={} members={}\n", r.id, r.capacity, r.members.len()));
    }
    dump.push_str("# report\n");
    dump.push_str(&report.to_string());
    match output {
        Some(p) => write_file(p, &dump),
        None => out.write_all(dump.as_bytes()).map_err(input),
    }
}

pub struct SolveArgs<'a> {
    pub scenario: &'a Path,
    pub time_limit: Option<f64>,
    pub seed: Option<u64>,
    pub portfolio: bool,
    pub export_facts: Option<&'a Path>,
    pub output: Option<&'a Path>,
}

/// Prints a summary as `%` comment lines followed by the model atoms, so the
/// whole output can be fed to `check`.
pub fn cmd_solve(args: &SolveArgs<'_>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut scenario = load(args.scenario).map_err(input)?;
    if let Some(t) = args.time_limit {
        if !(t > 0.0) {
            return Err(CliError::Input("--time-limit must be positive".into()));
        }
        scenario.solver.time_limit = Duration::from_secs_f64(t);
    }
    if let Some(s) = args.seed {
        scenario.solver.seed = s;
    }
    if args.portfolio {
        let limit = scenario.solver.time_limit;
        scenario.solver = crate::solver::SolverConfig::portfolio().with_time_limit(limit).with_seed(scenario.solver.seed);
    }
    let (network, _, demand) = prepare(&scenario)?;
    let instance = first_batch_instance(&scenario, &network, &demand)?;
    if let Some(p) = args.export_facts {
        write_file(p, &export_asp_facts(&instance))?;
    }
    let result = match solve_exact(&instance, &scenario.solver) {
        Ok(r) => r,
        Err(SolveError::Infeasible) => return Err(CliError::Infeasible),
        Err(SolveError::TimeoutNoIncumbent) => return Err(CliError::Timeout),
        Err(e) => return Err(input(e)),
    };
    let status = match result.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::FeasibleTimeout => "feasible-timeout",
        SolveStatus::Infeasible => "infeasible",
    };
    let model = render_asp_model(&result.schedule);
    let mut text = format!("% status: {status}\n% objective: {}\n% nodes: {}\n", result.objective, result.nodes_explored);
    for v in &result.schedule.vehicles {
        let steps: Vec<String> = v.times.iter().map(|t| format!("{}[{},{})", t.street, t.enter, t.exit)).collect();
        text.push_str(&format!("% {} {}: {}\n", v.vehicle, v.route, steps.join(" ")));
    }
    text.push_str(&model);
    if let Some(p) = args.output {
        write_file(p, &model)?;
    }
    out.write_all(text.as_bytes()).map_err(input)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Optimized,
    Shortest,
    Both,
}

pub struct SimulateArgs<'a> {
    pub scenario: &'a Path,
    pub policy: PolicyArg,
    pub runs: u32,
    pub csv: Option<&'a Path>,
    pub log: Option<&'a Path>,
}

/// Averaged KPIs per policy over `runs` runs seeded `seed`, `seed + 1`, ...
pub fn cmd_simulate(args: &SimulateArgs<'_>, out: &mut dyn Write) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Input("--runs must be at least 1".into()));
    }
    let scenario = load(args.scenario).map_err(input)?;
    let (network, _, demand) = prepare(&scenario)?;
    let kinds: &[PolicyKind] = match args.policy {
        PolicyArg::Optimized => &[PolicyKind::Optimized],
        PolicyArg::Shortest => &[PolicyKind::Shortest],
        PolicyArg::Both => &[PolicyKind::Optimized, PolicyKind::Shortest],
    };
    let mut csv = format!("policy,run,{}\n", KpiReport::csv_header());
    let mut log = String::new();
    let mut columns = Vec::new();
    for &kind in kinds {
        let policy = Policy {
            kind,
            solver: scenario.solver.clone(),
            search: scenario.search.clone(),
            quantum: scenario.quantum,
        };
        let mut reports = Vec::new();
        for run in 0..args.runs {
            let config = SimConfig {
                seed: scenario.seed + run as u64,
                ..SimConfig::default()
            };
            let outcome = run_scenario(&network, &demand, &policy, &config).map_err(|e| match e {
                SimError::Stalled { .. } => CliError::Stalled(e.to_string()),
                e => input(e),
            })?;
            csv.push_str(&format!("{},{run},{}\n", kind.name(), outcome.kpis.csv_row()));
            log.push_str(&format!("# {} run {run}\n{}", kind.name(), outcome.log));
            reports.push(outcome.kpis);
        }
        columns.push((kind.name(), KpiReport::mean(&reports)));
    }
    if let Some(p) = args.csv {
        write_file(p, &csv)?;
    }
    if let Some(p) = args.log {
        write_file(p, &log)?;
    }
    let cols: Vec<(&str, &KpiReport)> = columns.iter().map(|(n, r)| (*n, r)).collect();
    out.write_all(render_kpi_table(&cols).as_bytes()).map_err(input)
}

/// Checks a model file against the scenario's first-batch instance.
pub fn cmd_check(scenario: &Path, solution: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let sc = load(scenario).map_err(input)?;
    let (network, _, demand) = prepare(&sc)?;
    let instance = first_batch_instance(&sc, &network, &demand)?;
    let text = fs::read_to_string(solution).map_err(|e| CliError::Input(format!("cannot read {}: {e}", solution.display())))?;
    let schedule = import_asp_model(&text, &instance).map_err(input)?;
    let violations = check_schedule(&instance, &schedule);
    let mut text = String::new();
    for v in &violations {
        text.push_str(&format!("{v}\n"));
    }
    if violations.is_empty() {
        text.push_str(&format!("feasible, objective {}\n", objective(&instance, &schedule)));
    }
    out.write_all(text.as_bytes()).map_err(input)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violations(violations.len()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "urbanflow", version, about = "Route and schedule vehicles through an urban network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simplify the network and print it with the simplification report.
    Preprocess {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Optimize routes and times for the first arriving vehicles.
    Solve {
        scenario: PathBuf,
        /// Seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the bound-tightening strategy in parallel.
        #[arg(long)]
        portfolio: bool,
        /// Write the instance as facts.
        #[arg(long)]
        export_facts: Option<PathBuf>,
        /// Write the solution atoms.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate the whole demand and print averaged KPIs.
    Simulate {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1)]
        runs: u32,
        /// Per-run KPIs.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Event log of every run.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Check a solution file against the scenario's rules.
    Check { scenario: PathBuf, solution: PathBuf },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Preprocess { scenario, output } => cmd_preprocess(scenario, output.as_deref(), out),
        Command::Solve {
            scenario,
            time_limit,
            seed,
            portfolio,
            export_facts,
            output,
        } => cmd_solve(
            &SolveArgs {
                scenario,
                time_limit: *time_limit,
                seed: *seed,
                portfolio: *portfolio,
                export_facts: export_facts.as_deref(),
                output: output.as_deref(),
            },
            out,
        ),
        Command::Simulate {
            scenario,
            policy,
            runs,
            csv,
            log,
        } => cmd_simulate(
            &SimulateArgs {
                scenario,
                policy: *policy,
                runs: *runs,
                csv: csv.as_deref(),
                log: log.as_deref(),
            },
            out,
        ),
        Command::Check { scenario, solution } => cmd_check(scenario, solution, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
