use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use twoarm::acceptance::{run_suite, Suite};
use twoarm::bandit::{parse_path_csv, simulate_path, BanditParams};
use twoarm::bounds::{
    failure_lb_constant, interior_mass_certified, moment_ub, success_lb_theorem2, BoundReport, Direction, Horizon,
    MomentSide,
};
use twoarm::config::{Command as ConfigCommand, ExperimentConfig, OutputFormat};
use twoarm::montecarlo::{records_to_csv, run_batch, simulate_batch, Batch};
use twoarm::operator::{absorption_solve, OperatorParams, SolverConfig};
use twoarm::polya::{exact_replay, urn_bandit_equivalence, urn_path};
use twoarm::stopping::{monitor, MonitorOutcome, StopRule};
use twoarm::StepSchedule;

const SEED_ENV: &str = "TWOARM_SEED";
const REPLAY_STEPS: u64 = 100;

#[derive(Parser, Debug)]
#[command(name = "twoarm", version, about = "Two-armed bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate one path and write it as CSV (or a JSON summary).
    Simulate,
    /// Monte Carlo estimate of the limit classes.
    Mc,
    /// Closed-form bounds for the configured parameters.
    Bounds,
    /// Solve for the constant-step absorption probability.
    Solve,
    /// Pólya urn path and its equivalence with the bandit.
    Polya,
    /// Run the stopping rule over a recorded or simulated path.
    Stop {
        /// CSV of `n,x` rows; `-` reads standard input.
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Fallibility class of the schedule for the configured p_B.
    Classify,
    /// Run the acceptance suite.
    Accept {
        #[arg(long, value_enum, default_value_t = SuiteArg::Quick)]
        suite: SuiteArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (default: config, then $TWOARM_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<FormatArg>,
    #[arg(long, global = true)]
    p_a: Option<f64>,
    #[arg(long, global = true)]
    p_b: Option<f64>,
    #[arg(long, global = true)]
    x0: Option<f64>,
    /// `constant:γ`, `power_i:C,α`, `ratio_form:C,α,p` or a JSON object.
    #[arg(long, global = true)]
    schedule: Option<StepSchedule>,
    /// Horizon N.
    #[arg(long = "steps", short = 'N', global = true)]
    horizon: Option<u64>,
    /// Number of paths M.
    #[arg(long = "paths", short = 'M', global = true)]
    paths: Option<u64>,
    #[arg(long, global = true)]
    thin: Option<u64>,
    #[arg(long, global = true)]
    level: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    urn_r: Option<u64>,
    #[arg(long, global = true)]
    urn_b: Option<u64>,
    #[arg(long, global = true)]
    eps_zero: Option<f64>,
    #[arg(long, global = true)]
    eps_one: Option<f64>,
    #[arg(long, global = true, num_args = 2, value_names = ["LO", "HI"])]
    interior_band: Option<Vec<f64>>,
    #[arg(long, global = true)]
    require_monotone_tail: bool,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let (mut cfg, seed_in_file) = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let raw: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let has_seed = raw.get("seed").is_some();
            (ExperimentConfig::from_json(&text)?, has_seed)
        }
        None => (ExperimentConfig::default(), false),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    } else if !seed_in_file {
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not a u64"))?;
        }
    }
    macro_rules! set {
        ($flag:ident => $($field:tt)+) => {
            if let Some(v) = common.$flag.clone() {
                cfg.$($field)+ = v;
            }
        };
    }
    set!(p_a => params.p_a);
    set!(p_b => params.p_b);
    set!(x0 => params.x0);
    set!(schedule => schedule);
    set!(horizon => horizon);
    set!(paths => paths);
    set!(level => level);
    set!(epsilon => epsilon);
    set!(grid_points => grid_points);
    set!(tol => tol);
    set!(max_iter => max_iter);
    set!(urn_r => urn.r);
    set!(urn_b => urn.b);
    set!(eps_zero => classifier.eps_zero);
    set!(eps_one => classifier.eps_one);
    if let Some(t) = common.thin {
        cfg.thin = Some(t);
    }
    if let Some(g) = common.gamma {
        cfg.gamma = Some(g);
    }
    if let Some(w) = common.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &common.output {
        cfg.output = Some(o.display().to_string());
    }
    if let Some(f) = common.format {
        cfg.format = Some(match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        });
    }
    if let Some(band) = &common.interior_band {
        cfg.classifier.interior_band = [band[0], band[1]];
    }
    if common.require_monotone_tail {
        cfg.classifier.require_monotone_tail = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn command_of(cmd: &Cmd) -> ConfigCommand {
    match cmd {
        Cmd::Simulate => ConfigCommand::Simulate,
        Cmd::Mc => ConfigCommand::Mc,
        Cmd::Bounds => ConfigCommand::Bounds,
        Cmd::Solve => ConfigCommand::Solve,
        Cmd::Polya => ConfigCommand::Polya,
        Cmd::Stop { .. } => ConfigCommand::Stop,
        Cmd::Classify => ConfigCommand::Classify,
        Cmd::Accept { .. } => ConfigCommand::Accept,
    }
}

/// The constant step used by `bounds` and `solve`.
fn constant_gamma(cfg: &ExperimentConfig) -> Result<f64> {
    match (cfg.gamma, &cfg.schedule) {
        (Some(g), _) => Ok(g),
        (None, StepSchedule::Constant { gamma }) => Ok(*gamma),
        _ => bail!("this command needs a constant step: pass --gamma or a constant schedule"),
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn simulate(cfg: &ExperimentConfig) -> Result<String> {
    let thin = cfg.thin.unwrap_or_else(|| twoarm::bandit::default_thin(cfg.horizon));
    let t = simulate_path(&cfg.params, &cfg.schedule, cfg.horizon, cfg.seed, thin)?;
    Ok(match cfg.format {
        Some(OutputFormat::Json) => t.summary_json() + "\n",
        _ => t.to_csv(),
    })
}

fn mc(cfg: &ExperimentConfig) -> Result<String> {
    let batch = Batch {
        params: &cfg.params,
        schedule: &cfg.schedule,
        horizon: cfg.horizon,
        paths: cfg.paths,
        master_seed: cfg.seed,
    };
    Ok(match cfg.format {
        Some(OutputFormat::Csv) => records_to_csv(&simulate_batch(&batch, &cfg.classifier)?),
        _ => run_batch(&batch, &cfg.classifier, cfg.level)?.to_json() + "\n",
    })
}

fn bounds(cfg: &ExperimentConfig) -> Result<String> {
    let BanditParams { p_a, p_b, x0 } = cfg.params;
    let mut reports = Vec::new();
    let gamma = match (cfg.gamma, &cfg.schedule) {
        (Some(g), _) => Some(g),
        (None, StepSchedule::Constant { gamma }) => Some(*gamma),
        _ => None,
    };
    if let Some(g) = gamma {
        if p_b > 0.0 {
            let v = failure_lb_constant(x0, p_b, g)?;
            reports.push(BoundReport::new(
                "failure_lb_constant",
                json!({"x": x0, "p_b": p_b, "gamma": g}),
                v,
                Direction::LowerBoundsFailure,
            ));
        }
        if p_a > p_b && x0 > 0.0 {
            let v = success_lb_theorem2(x0, p_a, p_b, g)?;
            reports.push(BoundReport::new(
                "success_lb_theorem2",
                json!({"x": x0, "p_a": p_a, "p_b": p_b, "gamma": g}),
                v,
                Direction::LowerBoundsSuccess,
            ));
        }
    }
    if p_a == p_b {
        let horizon = Horizon::Finite(cfg.horizon);
        let finite = interior_mass_certified(x0, p_a, &cfg.schedule, horizon)?;
        reports.push(BoundReport::new(
            "interior_mass",
            json!({"x": x0, "p_a": p_a, "schedule": cfg.schedule, "N": cfg.horizon}),
            finite.value,
            Direction::ExactIdentity,
        ));
        let limit = interior_mass_certified(x0, p_a, &cfg.schedule, Horizon::Limit)?;
        reports.push(BoundReport::new(
            "interior_mass_limit",
            json!({"x": x0, "p_a": p_a, "schedule": cfg.schedule, "lo": limit.lo, "hi": limit.hi, "terms": limit.terms}),
            limit.value,
            Direction::ExactIdentity,
        ));
        if p_a == 1.0 {
            for m in 0..4u32 {
                for (side, name) in [
                    (MomentSide::XInfinity, "moment_ub_x"),
                    (MomentSide::OneMinusXInfinity, "moment_ub_one_minus_x"),
                ] {
                    match moment_ub(x0, &cfg.schedule, m, side) {
                        Ok(v) => reports.push(BoundReport::new(
                            name,
                            json!({"x": x0, "schedule": cfg.schedule, "m": m}),
                            v,
                            Direction::UpperBoundsMoment,
                        )),
                        Err(twoarm::Error::NotApplicable(_)) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
    }
    if reports.is_empty() {
        bail!("no bound applies to these parameters");
    }
    pretty(&reports)
}

fn solve(cfg: &ExperimentConfig) -> Result<String> {
    let g = constant_gamma(cfg)?;
    let p = OperatorParams::new(g, cfg.params.p_a, cfg.params.p_b)?;
    let sol = absorption_solve(
        &p,
        &SolverConfig {
            grid_points: cfg.grid_points,
            tol: cfg.tol,
            max_iter: cfg.max_iter,
        },
    )?;
    Ok(match cfg.format {
        Some(OutputFormat::Csv) => sol.u.to_csv("u"),
        _ => {
            let mut report: Value = serde_json::from_str(&sol.report_json())?;
            report["x0"] = json!(cfg.params.x0);
            report["u_x0"] = json!(sol.at(cfg.params.x0));
            pretty(&report)?
        }
    })
}

fn polya(cfg: &ExperimentConfig) -> Result<String> {
    let (r, b) = (cfg.urn.r, cfg.urn.b);
    Ok(match cfg.format {
        Some(OutputFormat::Json) => {
            let gap = urn_bandit_equivalence(r, b, cfg.horizon, cfg.seed)?;
            let replay = exact_replay(r, b, cfg.horizon.min(REPLAY_STEPS), cfg.seed)?;
            pretty(&json!({
                "r": r,
                "b": b,
                "N": cfg.horizon,
                "seed": cfg.seed,
                "max_discrepancy": gap,
                "exact_replay": replay,
            }))?
        }
        _ => urn_path(r, b, cfg.horizon, cfg.seed)?.to_csv(),
    })
}

fn stop(cfg: &ExperimentConfig, path: Option<&PathBuf>) -> Result<String> {
    let outcome = match path {
        Some(p) => {
            let text = if p.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s)?;
                s
            } else {
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            };
            monitor(&parse_path_csv(&text)?, &cfg.schedule, cfg.epsilon)?
        }
        None => StopRule::new(&cfg.schedule, cfg.epsilon, cfg.horizon)?.run_simulated(
            &cfg.params,
            &cfg.schedule,
            cfg.seed,
            0,
        )?,
    };
    let v = match outcome {
        MonitorOutcome::Certified(c) => json!({
            "n": c.n,
            "x_n": c.x_n,
            "bound": c.bound,
            "target": c.target,
            "epsilon": c.epsilon,
        }),
        MonitorOutcome::RanOut { horizon, last_bound } => json!({
            "certified": false,
            "horizon": horizon,
            "last_bound": last_bound,
            "epsilon": cfg.epsilon,
        }),
    };
    pretty(&v)
}

fn classify(cfg: &ExperimentConfig) -> Result<String> {
    let class = cfg.schedule.classify(cfg.params.p_b)?;
    Ok(match cfg.format {
        Some(OutputFormat::Json) => {
            let diag = cfg
                .schedule
                .diagnostics_fallibility(cfg.params.p_b, cfg.horizon.max(10))
                .ok();
            pretty(&json!({
                "schedule": cfg.schedule,
                "p_b": cfg.params.p_b,
                "class": class.to_string(),
                "diagnostics": diag,
            }))?
        }
        _ => format!("{class}\n"),
    })
}

fn emit(cfg: &ExperimentConfig, text: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {path}")),
        None => {
            let mut out = io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = load_config(&cli.common)?;
    cfg.command = Some(command_of(&cli.command));
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("starting worker pool")?;
    }
    let text = match &cli.command {
        Cmd::Simulate => simulate(&cfg)?,
        Cmd::Mc => mc(&cfg)?,
        Cmd::Bounds => bounds(&cfg)?,
        Cmd::Solve => solve(&cfg)?,
        Cmd::Polya => polya(&cfg)?,
        Cmd::Stop { path } => stop(&cfg, path.as_ref())?,
        Cmd::Classify => classify(&cfg)?,
        Cmd::Accept { suite } => {
            let suite = match suite {
                SuiteArg::Quick => Suite::Quick,
                SuiteArg::Full => Suite::Full,
            };
            let results = run_suite(suite);
            let mut text = String::new();
            for r in &results {
                text.push_str(&r.line());
                text.push('\n');
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            text.push_str(&format!("{} passed, {failed} failed\n", results.len() - failed));
            emit(&cfg, &text)?;
            return Ok(failed == 0);
        }
    };
    emit(&cfg, &text)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
