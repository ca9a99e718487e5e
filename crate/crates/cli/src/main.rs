//! `mehler`: densities, semigroup and resolvent actions, seminorm estimates
//! and the experiment suite from the command line.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mehler_core::criteria::{self, Profile, SuiteOptions};
use mehler_core::experiments::{ExperimentReport, Verdict};
use mehler_core::measures::density_of;
use mehler_core::semigroup::{apply_mehler, resolvent};
use mehler_core::seminorms::{
    dyadic, flow_seminorm, holder_seminorm, refined, resolvent_holder, semigroup_holder, sup_estimate,
    zygmund_seminorm, FlowOptions,
};

use config::{ConfigError, InputFunction, RunConfig, SeminormKind, OUT_DIR_ENV};
use output::{report_json, summary_csv, Output};

#[derive(Parser, Debug)]
#[command(name = "mehler", version, about = "Numerical laboratory for Mehler semigroups on R^N")]
struct Cli {
    /// TOML file merged over the bundled defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the environment and the config file).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for the random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Record wall times in reports (outputs are then no longer reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SpecArgs {
    /// Stability index s in (0, 1].
    #[arg(long)]
    s: Option<f64>,
    /// Drift matrix, row-major, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    /// Diffusion matrix, row-major, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    q: Option<Vec<f64>>,
    /// Points per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Half width of the box on every axis.
    #[arg(long = "R")]
    half_width: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Density of μ_t on the grid, as CSV.
    Density {
        #[command(flatten)]
        spec: SpecArgs,
        /// Time t > 0.
        #[arg(long)]
        t: Option<f64>,
    },
    /// P_t f on the grid, as CSV.
    Apply {
        #[command(flatten)]
        spec: SpecArgs,
        /// Time t > 0.
        #[arg(long)]
        t: Option<f64>,
        /// Input: const1, cos, gaussian-bump, step, rational or weierstrass.
        #[arg(long)]
        f: Option<String>,
        /// Weierstrass exponent β (with --f weierstrass).
        #[arg(long)]
        beta: Option<f64>,
    },
    /// R(λ, L) f on the grid, as CSV.
    Resolvent {
        #[command(flatten)]
        spec: SpecArgs,
        /// λ > 0.
        #[arg(long)]
        lambda: Option<f64>,
        /// Input: const1, cos, gaussian-bump, step, rational or weierstrass.
        #[arg(long)]
        f: Option<String>,
        /// Weierstrass exponent β (with --f weierstrass).
        #[arg(long)]
        beta: Option<f64>,
    },
    /// A seminorm estimate, as JSON.
    Seminorm {
        #[command(flatten)]
        spec: SpecArgs,
        /// sup, holder, zygmund, semigroup-holder, resolvent-holder or flow.
        #[arg(long)]
        kind: Option<String>,
        /// Input: const1, cos, gaussian-bump, step, rational or weierstrass.
        #[arg(long)]
        f: Option<String>,
        /// Exponent α of the seminorm.
        #[arg(long)]
        alpha: Option<f64>,
        /// Weierstrass exponent β (with --f weierstrass).
        #[arg(long)]
        beta: Option<f64>,
    },
    /// One named experiment, as JSON. Without a name, lists the catalog.
    Experiment {
        name: Option<String>,
        #[arg(long)]
        quick: bool,
    },
    /// Every experiment, with per-report JSON and a summary CSV.
    Suite {
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Core(mehler_core::Error),
    Io(PathBuf, std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<mehler_core::Error> for CliError {
    fn from(e: mehler_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_precondition() => 3,
            _ => 2,
        }
    }

    fn describe(&self) -> String {
        match self {
            CliError::Config(e) => format!("ConfigError: {e}"),
            CliError::Core(e) => {
                let msg = e.to_string();
                if msg.starts_with(e.name()) {
                    msg
                } else {
                    format!("{}: {msg}", e.name())
                }
            }
            CliError::Io(p, e) => format!("IoError: {}: {e}", p.display()),
        }
    }
}

fn apply_spec_args(cfg: &mut RunConfig, args: &SpecArgs) {
    if let Some(s) = args.s {
        cfg.spec.s = s;
    }
    if let Some(a) = &args.a {
        cfg.spec.a = a.clone();
    }
    if let Some(q) = &args.q {
        cfg.spec.q = q.clone();
    }
    if let Some(n) = args.n {
        cfg.grid.points = vec![n];
    }
    if let Some(r) = args.half_width {
        cfg.grid.half_width = vec![r];
    }
}

/// Merges flag overrides into the configuration.
fn configure(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.output_dir = PathBuf::from(dir);
        }
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Density { spec, t } => {
            apply_spec_args(&mut cfg, spec);
            if let Some(t) = t {
                cfg.density.t = *t;
            }
        }
        Command::Apply { spec, t, f, beta } => {
            apply_spec_args(&mut cfg, spec);
            cfg.apply.t = t.unwrap_or(cfg.apply.t);
            cfg.apply.f = f.clone().unwrap_or(cfg.apply.f);
            cfg.apply.beta = beta.or(cfg.apply.beta);
        }
        Command::Resolvent { spec, lambda, f, beta } => {
            apply_spec_args(&mut cfg, spec);
            cfg.resolvent.lambda = lambda.unwrap_or(cfg.resolvent.lambda);
            cfg.resolvent.f = f.clone().unwrap_or(cfg.resolvent.f);
            cfg.resolvent.beta = beta.or(cfg.resolvent.beta);
        }
        Command::Seminorm {
            spec,
            kind,
            f,
            alpha,
            beta,
        } => {
            apply_spec_args(&mut cfg, spec);
            cfg.seminorm.kind = kind.clone().unwrap_or(cfg.seminorm.kind);
            cfg.seminorm.f = f.clone().unwrap_or(cfg.seminorm.f);
            cfg.seminorm.alpha = alpha.or(cfg.seminorm.alpha);
            cfg.seminorm.beta = beta.or(cfg.seminorm.beta);
        }
        Command::Experiment { quick, .. } | Command::Suite { quick } => {
            cfg.suite.quick |= *quick;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn suite_options(cfg: &RunConfig, timed: bool) -> SuiteOptions {
    SuiteOptions {
        profile: if cfg.suite.quick { Profile::Quick } else { Profile::Full },
        seed: cfg.seed,
        timed,
    }
}

fn verdict_code(verdicts: impl IntoIterator<Item = Verdict>) -> u8 {
    let mut code = 0;
    for v in verdicts {
        match v {
            Verdict::Fail => return 1,
            Verdict::Inconclusive => code = 3,
            Verdict::Pass => {}
        }
    }
    code
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = configure(cli)?;
    let out = Output::new(&cfg);
    let spec = cfg.semigroup_spec()?;
    let grid = cfg.grid_for(&spec)?;
    match &cli.command {
        Command::Density { .. } => {
            let t = cfg.density.t;
            let d = density_of(&spec, t, &grid)?;
            let meta = out.metadata(
                "density",
                &[
                    ("t", t),
                    ("mass", d.mass),
                    ("tail_mass", d.tail_mass),
                    ("min_value", d.min_value),
                    ("symmetry_residual", d.symmetry_residual),
                ],
            );
            out.write("density.csv", &d.to_csv(&meta))?;
        }
        Command::Apply { .. } => {
            let f = InputFunction::parse("apply.f", &cfg.apply.f, cfg.apply.beta)?.sample(&grid)?;
            let u = apply_mehler(&spec, cfg.apply.t, &f)?;
            let meta = out.metadata("apply", &[("t", cfg.apply.t)]);
            out.write("apply.csv", &u.to_csv(&meta))?;
        }
        Command::Resolvent { .. } => {
            let f = InputFunction::parse("resolvent.f", &cfg.resolvent.f, cfg.resolvent.beta)?.sample(&grid)?;
            let u = resolvent(&spec, cfg.resolvent.lambda, &f)?;
            let meta = out.metadata("resolvent", &[("lambda", cfg.resolvent.lambda)]);
            out.write("resolvent.csv", &u.to_csv(&meta))?;
        }
        Command::Seminorm { .. } => {
            let s = &cfg.seminorm;
            let kind = SeminormKind::parse(&s.kind)?;
            let input = InputFunction::parse("seminorm.f", &s.f, s.beta)?;
            let alpha = match (kind.needs_alpha(), s.alpha) {
                (true, None) => return Err(ConfigError::new("seminorm.alpha", "required for this kind").into()),
                (_, a) => a.unwrap_or(0.5),
            };
            let t_set = s.t_set.clone().unwrap_or_else(|| dyadic(-8, -1));
            let lambda_set = s.lambda_set.clone().unwrap_or_else(|| dyadic(0, 13));
            let pointwise = |x: &[f64]| input.eval(x);
            let est = match kind {
                SeminormKind::Sup => sup_estimate(&input.sample(&grid)?),
                SeminormKind::Holder => refined(&pointwise, &grid, |g| holder_seminorm(g, alpha))?,
                SeminormKind::Zygmund => refined(&pointwise, &grid, |g| Ok(zygmund_seminorm(g)))?,
                SeminormKind::SemigroupHolder => semigroup_holder(&spec, &input.sample(&grid)?, alpha, &t_set)?,
                SeminormKind::ResolventHolder => resolvent_holder(&spec, &input.sample(&grid)?, alpha, &lambda_set)?,
                SeminormKind::Flow => flow_seminorm(&spec, &pointwise, alpha, &t_set, &FlowOptions::default())?,
            };
            let value = serde_json::to_value(&est).expect("estimate serializes");
            out.write("seminorm.json", &out.json_with_hash(value))?;
        }
        Command::Experiment { name: None, .. } => {
            for e in criteria::catalog() {
                println!("{}\t{}", e.criterion, e.name);
            }
            return Ok(0);
        }
        Command::Experiment { name: Some(name), .. } => {
            let entry = criteria::find(name)?;
            let report = entry.run(&suite_options(&cfg, cli.timings));
            out.write(&format!("{name}.json"), &report_json(&out, &report))?;
            println!("{} {}", report.verdict.as_str().to_uppercase(), report.name);
            return Ok(verdict_code([report.verdict]));
        }
        Command::Suite { .. } => {
            let opts = suite_options(&cfg, cli.timings);
            let catalog = criteria::catalog();
            let reports: Vec<(u32, ExperimentReport)> = {
                use rayon::prelude::*;
                catalog.par_iter().map(|e| (e.criterion, e.run(&opts))).collect()
            };
            for (_, r) in &reports {
                out.write(&format!("reports/{}.json", r.name), &report_json(&out, r))?;
            }
            out.write("summary.csv", &summary_csv(&out, &reports, cli.timings))?;
            for (id, title) in criteria::CRITERIA {
                let verdict = criterion_verdict(reports.iter().filter(|(c, _)| *c == id).map(|(_, r)| r.verdict));
                println!("criterion {id} ({title}): {}", verdict.as_str().to_uppercase());
            }
            return Ok(verdict_code(reports.iter().map(|(_, r)| r.verdict)));
        }
    }
    Ok(0)
}

fn criterion_verdict(verdicts: impl Iterator<Item = Verdict>) -> Verdict {
    match verdict_code(verdicts) {
        0 => Verdict::Pass,
        1 => Verdict::Fail,
        _ => Verdict::Inconclusive,
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(path.to_path_buf(), e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.describe());
            ExitCode::from(e.exit_code())
        }
    }
}
