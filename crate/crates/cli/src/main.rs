//! `cmsir`: simulate SIR epidemics on configuration-model graphs, solve the
//! limit equations and compare the two.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on invalid input.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cmsir_core::epidemic_sim::{
    r0_criterion, run_simulation, DegreeSpec, InitialCondition, Rates, Selection, SimParams,
};
use cmsir_core::harness::{
    convergence_report_with_measures, matching_limit_init, replica_seeds, run_replicas, Column, ComparisonWindow,
    HorizonRule,
};
use cmsir_core::io::{meta_path, write_atomic, RunMetadata};
use cmsir_core::limit_odes::{
    miller_theta_ode, solve_measures, solve_volz, write_snapshots, GeneratingFn, LimitInit, LimitTrajectory,
    SolverConfig, VolzState,
};
use cmsir_core::{Error, Result};

/// Relative output paths are resolved against this directory when it is set.
const OUT_DIR_VAR: &str = "CMSIR_OUT_DIR";

#[derive(Parser)]
#[command(name = "cmsir", version, about = "SIR epidemics on configuration-model graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one stochastic epidemic and write its trajectory.
    Simulate(SimulateArgs),
    /// Integrate a deterministic limit system.
    Solve(SolveArgs),
    /// Compare replicated simulations with the limit at several population sizes.
    Converge(ConvergeArgs),
    /// Print the branching criterion of a degree law.
    R0(DegreeArgs),
}

#[derive(Args, Clone)]
struct DegreeArgs {
    /// poisson:λ[:kmax], geometric:q[:kmax], powerlaw:α:kmin:kmax,
    /// explicit:k=w,... or file:<path.json>
    #[arg(long, default_value = "poisson:5")]
    degree: String,
    /// Truncation level overriding the one in --degree.
    #[arg(long)]
    kmax: Option<u32>,
}

impl DegreeArgs {
    fn resolve(&self) -> Result<DegreeSpec> {
        let spec: DegreeSpec = self.degree.parse()?;
        let spec = match self.kmax {
            Some(k) => spec.with_kmax(k),
            None => spec,
        };
        spec.pmf()?;
        Ok(spec)
    }
}

#[derive(Args, Clone, Copy)]
struct RateArgs {
    /// Infection rate per infectious-susceptible edge.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Removal rate per infective.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Uniform,
    SizeBiased,
}

#[derive(Args, Clone, Copy)]
struct InitArgs {
    /// Initially infected fraction.
    #[arg(long, default_value_t = 0.01)]
    i0: f64,
    /// How initial infectives are chosen.
    #[arg(long, value_enum, default_value = "uniform")]
    selection: SelectionArg,
    /// Pair initial-infective half-edges among themselves and drop I-I edges.
    #[arg(long)]
    pair_initial: bool,
}

impl InitArgs {
    fn resolve(&self) -> Result<InitialCondition> {
        let selection = match self.selection {
            SelectionArg::Uniform => Selection::Uniform,
            SelectionArg::SizeBiased => Selection::SizeBiased,
        };
        let init = InitialCondition {
            i0: self.i0,
            selection,
            pair_initial: self.pair_initial,
        };
        init.validate()?;
        Ok(init)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    degree: DegreeArgs,
    /// Number of individuals.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[command(flatten)]
    rates: RateArgs,
    #[command(flatten)]
    init: InitArgs,
    /// Base seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End of the time window.
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Spacing of recorded rows.
    #[arg(long, default_value_t = 0.05)]
    grid: f64,
    /// Trajectory CSV; relative paths go under $CMSIR_OUT_DIR when set.
    #[arg(long, default_value = "traj.csv")]
    out: PathBuf,
    /// Also write the degree measures at every recorded time (JSON lines).
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Validate the configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Solver {
    Volz,
    Measures,
    Miller,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(value_enum)]
    which: Solver,
    #[command(flatten)]
    degree: DegreeArgs,
    #[command(flatten)]
    rates: RateArgs,
    #[command(flatten)]
    init: InitArgs,
    /// Initial infectious edge fraction; the susceptible measure is the degree law.
    #[arg(long = "pI0", conflicts_with = "init_file")]
    p_i0: Option<f64>,
    /// Initial measures as JSON: {"mu_S": [...], "mu_IS": [...], "mu_RS": [...]}.
    #[arg(long = "init")]
    init_file: Option<PathBuf>,
    /// RK4 step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// End of the time window.
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Stop once the infectious edge mass falls below this.
    #[arg(long, default_value_t = 1e-6)]
    eps_is: f64,
    /// Keep every stride-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Defaults to <which>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Measure snapshots (JSON lines); measures solver only.
    #[arg(long)]
    snapshots: Option<PathBuf>,
    /// Validate the configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum HorizonArg {
    Bound,
    Crossing,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    degree: DegreeArgs,
    /// Population sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
    n: Vec<usize>,
    /// Replicas per population size.
    #[arg(long, default_value_t = 50)]
    reps: usize,
    #[command(flatten)]
    rates: RateArgs,
    #[command(flatten)]
    init: InitArgs,
    /// Base seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End of the time window.
    #[arg(long, default_value_t = 5.0)]
    t_max: f64,
    /// Spacing of recorded rows, shared by all replicas.
    #[arg(long, default_value_t = 0.01)]
    grid: f64,
    /// Time step of the limit solver.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// Infectious edge level defining the comparison horizon.
    #[arg(long, default_value_t = 0.01)]
    eps_prime: f64,
    /// bound: analytic lower bound on the hitting time; crossing: hitting time of the limit.
    #[arg(long, value_enum, default_value = "bound")]
    horizon: HorizonArg,
    /// Compared columns, comma separated (S, I, R, N_S, N_IS, N_RS).
    #[arg(long, value_delimiter = ',', value_parser = parse_column, default_value = "I,S,N_IS")]
    columns: Vec<Column>,
    /// Also compare the degree measures mu_S, mu_IS, mu_RS in L1 distance at
    /// grid times. Records measure snapshots in every replica.
    #[arg(long)]
    measure_distances: bool,
    /// Report CSV; relative paths go under $CMSIR_OUT_DIR when set.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// Validate the configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

fn parse_column(s: &str) -> std::result::Result<Column, String> {
    s.parse::<Column>().map_err(|e| e.to_string())
}

fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_with_meta<C: Serialize>(
    path: &Path,
    meta: &RunMetadata<C>,
    fill: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    write_atomic(path, fill)?;
    meta.write(&meta_path(path))?;
    println!("wrote {} and {}", path.display(), meta_path(path).display());
    Ok(())
}

fn dry_run<C: Serialize>(config: &C) -> Result<()> {
    println!("configuration valid");
    println!("{}", serde_json::to_string_pretty(config)?);
    Ok(())
}

#[derive(Serialize)]
struct SimulateConfig {
    degree: DegreeSpec,
    n: usize,
    init: InitialCondition,
    params: SimParams,
    out: PathBuf,
    snapshots: Option<PathBuf>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let params = SimParams {
        r: args.rates.r,
        beta: args.rates.beta,
        t_max: args.t_max,
        seed: args.seed,
        record_grid: args.grid,
        snapshot_measures: args.snapshots.is_some(),
    };
    params.validate()?;
    if args.n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let config = SimulateConfig {
        degree: args.degree.resolve()?,
        n: args.n,
        init: args.init.resolve()?,
        params,
        out: output_path(&args.out),
        snapshots: args.snapshots.as_deref().map(output_path),
    };
    if args.dry_run {
        return dry_run(&config);
    }
    let traj = run_simulation(&config.degree, config.n, config.init, &config.params)?;
    println!(
        "simulated {} events, termination {:?}, {} capped infections",
        traj.events, traj.termination, traj.capped_infections
    );
    let mut meta = RunMetadata::new("simulate", Some(config.params.seed), &config);
    if traj.capped_infections > 0 {
        meta.notes
            .push(format!("{} infections hit the self-loop cap", traj.capped_infections));
    }
    write_with_meta(&config.out, &meta, |w| traj.write_csv(w))?;
    if let Some(path) = &config.snapshots {
        write_with_meta(path, &meta, |w| traj.write_snapshots(w))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveConfig {
    solver: Solver,
    /// Degree law of the graph; absent when initial measures come from a file.
    degree: Option<DegreeSpec>,
    rates: Rates,
    init: LimitInit,
    solver_config: SolverConfig,
    out: PathBuf,
    snapshots: Option<PathBuf>,
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let rates = Rates {
        r: args.rates.r,
        beta: args.rates.beta,
    };
    rates.validate()?;
    let solver_config = SolverConfig {
        dt: args.dt,
        eps_is: args.eps_is,
        t_max: args.t_max,
        record_stride: args.stride,
    };
    solver_config.validate()?;
    if args.snapshots.is_some() && args.which != Solver::Measures {
        return Err(Error::Config(
            "--snapshots is only available for the measures solver".into(),
        ));
    }
    let (degree, init) = match (&args.init_file, args.p_i0) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            (None, LimitInit::from_json_str(&text)?)
        }
        (None, Some(p_i0)) => {
            let spec = args.degree.resolve()?;
            let init = LimitInit::from_p_i0(&spec.as_measure()?, p_i0)?;
            (Some(spec), init)
        }
        (None, None) => {
            let spec = args.degree.resolve()?;
            let init = matching_limit_init(&spec, args.init.resolve()?)?;
            (Some(spec), init)
        }
    };
    init.validate()?;
    let default_name = match args.which {
        Solver::Volz => "volz.csv",
        Solver::Measures => "measures.csv",
        Solver::Miller => "miller.csv",
    };
    let config = SolveConfig {
        solver: args.which,
        degree,
        rates,
        init,
        solver_config,
        out: output_path(args.out.as_deref().unwrap_or(Path::new(default_name))),
        snapshots: args.snapshots.as_deref().map(output_path),
    };
    if args.dry_run {
        return dry_run(&config);
    }

    let mut notes = Vec::new();
    let mut snapshots = None;
    let traj: LimitTrajectory = match config.solver {
        Solver::Volz => {
            let g = GeneratingFn::from_measure(&config.init.mu_s0)?;
            solve_volz(&g, VolzState::initial(&config.init)?, rates, &config.solver_config)?.trajectory(&g)
        }
        Solver::Measures => {
            let sol = solve_measures(&config.init, rates, &config.solver_config)?;
            if sol.clamped_mass > 0.0 {
                notes.push(format!("clamped {:e} of negative measure mass", sol.clamped_mass));
            }
            if config.snapshots.is_some() {
                snapshots = Some(sol.snapshots());
            }
            sol.trajectory()
        }
        Solver::Miller => {
            let psi = match &config.degree {
                Some(spec) => Some(GeneratingFn::from_measure(&spec.as_measure()?)?),
                None => None,
            };
            let sol = miller_theta_ode(&config.init, psi.as_ref(), rates, &config.solver_config)?;
            if let Some(caveat) = sol.caveat {
                println!("caveat: {caveat}");
                notes.push(caveat);
            }
            sol.trajectory
        }
    };
    println!("solved to t = {} ({:?})", traj.t_end(), traj.stop);
    let mut meta = RunMetadata::new("solve", None, &config);
    meta.notes = notes;
    write_with_meta(&config.out, &meta, |w| traj.write_csv(w))?;
    if let (Some(path), Some(snaps)) = (&config.snapshots, &snapshots) {
        write_with_meta(path, &meta, |w| write_snapshots(snaps, w))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergeConfig {
    degree: DegreeSpec,
    n: Vec<usize>,
    reps: usize,
    init: InitialCondition,
    params: SimParams,
    limit_solver: SolverConfig,
    /// Solver of the limit: measures when measure distances are requested, else volz.
    limit_system: Solver,
    eps_prime: f64,
    horizon: HorizonRule,
    columns: Vec<&'static str>,
    out: PathBuf,
}

fn cmd_converge(args: ConvergeArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(Error::Config("--reps must be at least 1".into()));
    }
    if args.n.is_empty() || args.n.contains(&0) {
        return Err(Error::Config("--n needs one or more positive sizes".into()));
    }
    if args.columns.is_empty() {
        return Err(Error::Config("--columns needs at least one column".into()));
    }
    let mut columns = args.columns.clone();
    if args.measure_distances {
        columns.extend(Column::MEASURES.into_iter().filter(|c| !args.columns.contains(c)));
    } else if let Some(c) = columns.iter().find(|c| c.is_measure()) {
        return Err(Error::Config(format!("column {} needs --measure-distances", c.name())));
    }
    let params = SimParams {
        r: args.rates.r,
        beta: args.rates.beta,
        t_max: args.t_max,
        seed: args.seed,
        record_grid: args.grid,
        snapshot_measures: args.measure_distances,
    };
    params.validate()?;
    // Keep limit snapshots on the recording grid when it is a multiple of dt.
    let per_grid = args.grid / args.dt;
    let record_stride = if args.measure_distances && (per_grid - per_grid.round()).abs() < 1e-6 {
        (per_grid.round() as usize).max(1)
    } else {
        1
    };
    let limit_solver = SolverConfig {
        dt: args.dt,
        t_max: args.t_max,
        record_stride,
        ..SolverConfig::default()
    };
    limit_solver.validate()?;
    let config = ConvergeConfig {
        degree: args.degree.resolve()?,
        n: args.n,
        reps: args.reps,
        init: args.init.resolve()?,
        params,
        limit_solver,
        limit_system: if args.measure_distances {
            Solver::Measures
        } else {
            Solver::Volz
        },
        eps_prime: args.eps_prime,
        horizon: match args.horizon {
            HorizonArg::Bound => HorizonRule::Bound,
            HorizonArg::Crossing => HorizonRule::Crossing,
        },
        columns: columns.iter().map(|c| c.name()).collect(),
        out: output_path(&args.out),
    };
    let limit_init = matching_limit_init(&config.degree, config.init)?;
    let g = GeneratingFn::from_measure(&limit_init.mu_s0)?;
    if args.dry_run {
        cmsir_core::limit_odes::horizon_bound(
            &limit_init.mu_s0,
            limit_init.mu_is0.first_moment(),
            config.eps_prime,
            params.r,
            params.beta,
        )?;
        return dry_run(&config);
    }

    let (limit, limit_snapshots) = if args.measure_distances {
        let sol = solve_measures(&limit_init, params.rates(), &config.limit_solver)?;
        (sol.trajectory(), sol.snapshots())
    } else {
        let sol = solve_volz(
            &g,
            VolzState::initial(&limit_init)?,
            params.rates(),
            &config.limit_solver,
        )?;
        (sol.trajectory(&g), Vec::new())
    };
    let window = ComparisonWindow::new(&limit_init, &limit, &params, config.eps_prime, config.horizon)?;
    println!("comparison window [0, {}], tau_bar = {}", window.t_end, window.tau_bar);
    let mut notes = Vec::new();
    if window.t_end < params.record_grid {
        let note = format!(
            "comparison window [0, {}] holds only t = 0 on a grid of {}; use a finer --grid or --horizon crossing",
            window.t_end, params.record_grid
        );
        println!("note: {note}");
        notes.push(note);
    }
    let trajectories = run_replicas(&config.degree, config.init, &params, &config.n, config.reps)?;
    println!("ran {} replicas", trajectories.len());
    let report = convergence_report_with_measures(&trajectories, &limit, &limit_snapshots, window, &columns)?;

    #[derive(Serialize)]
    struct Manifest<'a> {
        #[serde(flatten)]
        config: &'a ConvergeConfig,
        window: ComparisonWindow,
        replicas: Vec<cmsir_core::harness::ReplicaSeed>,
    }
    let manifest = Manifest {
        config: &config,
        window,
        replicas: replica_seeds(&trajectories),
    };
    let mut meta = RunMetadata::new("converge", Some(params.seed), manifest);
    meta.notes = notes;
    write_with_meta(&config.out, &meta, |w| report.write_csv(w))
}

fn cmd_r0(args: DegreeArgs) -> Result<()> {
    let spec = args.resolve()?;
    let r0 = r0_criterion(&spec)?;
    let regime = if (r0 - 1.0).abs() <= 1e-12 {
        "critical"
    } else if r0 > 1.0 {
        "supercritical"
    } else {
        "subcritical"
    };
    println!("{r0} {regime}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Converge(a) => cmd_converge(a),
        Command::R0(a) => cmd_r0(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
