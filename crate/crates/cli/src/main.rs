use std::path::PathBuf;
use std::process::ExitCode;

use bergman_cli::config::{parse_list, parse_number, CliError, Experiment, ExperimentConfig, Format, Level};
use bergman_cli::report::{emit, render};
use clap::Parser;

/// Two-weight Bergman projection experiments on the Hartogs triangle.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on a
/// configuration error.
#[derive(Debug, Parser)]
#[command(name = "bergman-lab", version)]
struct Args {
    /// Experiment to run. Optional when --config names one.
    #[arg(value_enum)]
    experiment: Option<Experiment>,
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight, e.g. constant:1, power:a=1,b=0, sharp:s=0.1,p=2
    #[arg(long)]
    weight: Option<String>,
    #[arg(long, conflicts_with = "p_grid")]
    p: Option<String>,
    /// Comma-separated exponents; fractions such as 4/3+0.05 are accepted.
    #[arg(long)]
    p_grid: Option<String>,
    #[arg(long)]
    s_grid: Option<String>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long = "A")]
    a: Option<String>,
    /// Tent grid as I_max,angles
    #[arg(long)]
    grid: Option<String>,
    /// Relative tolerance of the quadrature.
    #[arg(long)]
    quad: Option<String>,
    #[arg(long)]
    kmax: Option<u32>,
    #[arg(long)]
    shifts: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Tree dump to check (tree-verify).
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Suite level (verify).
    #[arg(long, value_enum)]
    level: Option<Level>,
    /// Record wall time in the report.
    #[arg(long)]
    timing: bool,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut c = ExperimentConfig::from_json(&text)?;
            if let Some(e) = args.experiment {
                c.experiment = e;
            }
            c
        }
        None => ExperimentConfig::new(
            args.experiment.ok_or_else(|| CliError::Config("name an experiment or pass --config".into()))?,
        ),
    };
    if let Some(w) = &args.weight {
        cfg.weight = Some(w.clone());
    }
    if let Some(p) = &args.p {
        cfg.p = Some(parse_number(p)?);
        cfg.p_grid = None;
    }
    if let Some(g) = &args.p_grid {
        cfg.p_grid = Some(parse_list(g)?);
        cfg.p = None;
    }
    if let Some(g) = &args.s_grid {
        cfg.s_grid = Some(parse_list(g)?);
    }
    cfg.m = args.m.or(cfg.m);
    cfg.n = args.n.or(cfg.n);
    if let Some(a) = &args.a {
        cfg.a = Some(parse_number(a)?);
    }
    if let Some(g) = &args.grid {
        let parts: Vec<&str> = g.split(',').collect();
        let bad = || CliError::Config(format!("--grid expects I_max,angles, got `{g}`"));
        if parts.len() != 2 {
            return Err(bad());
        }
        cfg.grid.i_max = parts[0].trim().parse().map_err(|_| bad())?;
        cfg.grid.angles = parts[1].trim().parse().map_err(|_| bad())?;
    }
    if let Some(q) = &args.quad {
        cfg.quad.rel_tol = parse_number(q)?;
    }
    cfg.kmax = args.kmax.unwrap_or(cfg.kmax);
    if let Some(s) = &args.shifts {
        cfg.shifts = parse_list(s)?;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    cfg.format = args.format.unwrap_or(cfg.format);
    if args.dump.is_some() {
        cfg.dump = args.dump.clone();
    }
    cfg.level = args.level.unwrap_or(cfg.level);
    cfg.timing |= args.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = build_config(&args).and_then(|cfg| {
        let report = bergman_cli::run(&cfg)?;
        match &cfg.out {
            Some(path) => emit(&report, path, cfg.format)?,
            None => print!("{}", render(&report, cfg.format)),
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            for q in report.failures() {
                eprintln!("FAIL {}: {:?} (expected {})", q.name, q.value, q.expected.as_deref().unwrap_or("-"));
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("bergman-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
