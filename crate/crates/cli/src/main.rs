//! Experiment runner for the pricing-game solver library.
//!
//! Subcommands: solve, sweep, oracle, lifecycle, plotdata. Populations,
//! sweeps and cohorts are described by a key = value config file (see
//! docs/format.md at the repository root). Exit codes: 0 on success, 1 on
//! usage or configuration errors, 2 on numerical failures.

use premia::config::{self, CohortFormat, ExperimentConfig, LifecycleSettings};
use premia::sweep::{format_sig, parse_csv, plot_series, run_sweep, to_csv, SweepRow, SWEEP_HEADER};
use premia::{
    baseline, dictatorial, mc_region_masses, region_masses, spne, EquilibriumKind,
    EquilibriumResult, PopulationMeasure, Premium, PricePair, SolverOptions,
};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
premia - equilibrium solver for the producer/insurer pricing game

USAGE:
    premia <command> [options]

COMMANDS:
    solve       compute one equilibrium (spne, dictatorial or baseline)
    sweep       solve across a family of populations, emit a CSV table
    oracle      compare quadrature region masses against Monte Carlo
    lifecycle   reduce a multi-period cohort to (p, psi) atoms, optionally solve
    plotdata    turn a sweep CSV into plot-ready JSON series

OPTIONS:
    --config <path>    experiment configuration file
    --kind <name>      spne | dictatorial | baseline (default from config, else spne)
    --seed <u64>       Monte Carlo seed (default 42 or [oracle] seed)
    --out <path>       output path; solve writes <path>.json and <path>.csv
    --grid <n>         outer search grid size
    --mc-n <n>         Monte Carlo sample count
    --solve            lifecycle only: smooth the reduced atoms and run spne
    --radius <real>    smoothing radius for atomic populations

plotdata takes the sweep CSV as a positional argument:
    premia plotdata results.csv --out series.json
";

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }
    fn from_lib(err: premia::Error) -> Self {
        CliError {
            code: if err.is_numeric() { 2 } else { 1 },
            message: err.to_string(),
        }
    }
}

impl From<premia::Error> for CliError {
    fn from(err: premia::Error) -> Self {
        CliError::from_lib(err)
    }
}

impl From<config::ConfigError> for CliError {
    fn from(err: config::ConfigError) -> Self {
        CliError::usage(format!("config error: {err}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::usage(format!("io error: {err}"))
    }
}

#[derive(Default)]
struct Flags {
    config: Option<PathBuf>,
    kind: Option<EquilibriumKind>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    grid: Option<usize>,
    mc_n: Option<usize>,
    solve: bool,
    radius: Option<f64>,
    positional: Vec<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, CliError> {
    let mut flags = Flags::default();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value_for = |name: &str| -> Result<String, CliError> {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::usage(format!("{name} needs a value")))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(PathBuf::from(value_for("--config")?)),
            "--kind" => {
                let name = value_for("--kind")?;
                flags.kind = Some(config::parse_kind(&name).ok_or_else(|| {
                    CliError::usage(format!("unknown kind '{name}' (spne | dictatorial | baseline)"))
                })?);
            }
            "--seed" => {
                flags.seed = Some(
                    value_for("--seed")?
                        .parse()
                        .map_err(|_| CliError::usage("--seed needs an unsigned integer"))?,
                )
            }
            "--out" => flags.out = Some(PathBuf::from(value_for("--out")?)),
            "--grid" => {
                flags.grid = Some(
                    value_for("--grid")?
                        .parse()
                        .map_err(|_| CliError::usage("--grid needs a positive integer"))?,
                )
            }
            "--mc-n" => {
                flags.mc_n = Some(
                    value_for("--mc-n")?
                        .parse()
                        .map_err(|_| CliError::usage("--mc-n needs a positive integer"))?,
                )
            }
            "--solve" => flags.solve = true,
            "--radius" => {
                flags.radius = Some(
                    value_for("--radius")?
                        .parse()
                        .map_err(|_| CliError::usage("--radius needs a number"))?,
                )
            }
            other if other.starts_with("--") => {
                return Err(CliError::usage(format!("unknown option '{other}'")))
            }
            other => flags.positional.push(other.to_string()),
        }
    }
    Ok(flags)
}

fn load_config(flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| CliError::usage("missing --config <path>"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(config::parse(&text)?)
}

fn solver_options(cfg: &ExperimentConfig, flags: &Flags) -> SolverOptions {
    let mut opts = cfg.solver.apply(SolverOptions::default());
    if let Some(grid) = flags.grid {
        opts.outer_grid = grid;
    }
    opts
}

fn build_population(cfg: &ExperimentConfig, flags: &Flags) -> Result<PopulationMeasure, CliError> {
    let mut spec = cfg
        .population
        .clone()
        .ok_or_else(|| CliError::usage("config has no [population] section"))?;
    if flags.radius.is_some() {
        spec.radius = flags.radius;
    }
    let pm = spec.build()?;
    if pm.is_atomic() {
        // equilibrium searches need a density; hint at the smoothing path
        // before the solver rejects the measure
        if !matches!(flags.kind, Some(EquilibriumKind::NoInsuranceBaseline))
            && cfg.solver.kind != Some(EquilibriumKind::NoInsuranceBaseline)
        {
            return Err(CliError::usage(
                "population is atomic; pass --radius (or set radius in [population]) to smooth \
                 it before an equilibrium solve",
            ));
        }
    }
    Ok(pm)
}

fn kind_name(kind: EquilibriumKind) -> &'static str {
    match kind {
        EquilibriumKind::SubgamePerfect => "spne",
        EquilibriumKind::Dictatorial => "dictatorial",
        EquilibriumKind::NoInsuranceBaseline => "baseline",
    }
}

fn equilibrium_summary(eq: &EquilibriumResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind:      {}", kind_name(eq.kind));
    let _ = writeln!(s, "theta:     {}", format_sig(eq.theta));
    let premium = match eq.premium {
        Premium::Quoted(x) => format_sig(x),
        Premium::NoEntry => "no entry".to_string(),
    };
    let _ = writeln!(s, "premium:   {premium}");
    let _ = writeln!(
        s,
        "shares:    insured {}  out-of-pocket {}  no-access {}",
        format_sig(eq.masses.insured),
        format_sig(eq.masses.out_of_pocket),
        format_sig(eq.masses.no_access)
    );
    let _ = writeln!(
        s,
        "profits:   producer {}  insurer {}",
        format_sig(eq.profits.producer),
        format_sig(eq.profits.insurer)
    );
    for note in &eq.diagnostics.notes {
        let _ = writeln!(s, "note:      {note}");
    }
    s
}

fn equilibrium_csv(eq: &EquilibriumResult) -> String {
    let premium = eq.premium.quoted().unwrap_or(f64::INFINITY);
    let cells = [
        eq.theta,
        premium,
        eq.masses.insured,
        eq.masses.out_of_pocket,
        eq.masses.no_access,
        eq.profits.insurer,
        eq.profits.producer,
    ];
    let mut line = kind_name(eq.kind).to_string();
    for c in cells {
        line.push(',');
        line.push_str(&format_sig(c));
    }
    format!("kind,theta,premium,a,t,o,p_i,p_p\n{line}\n")
}

fn write_or_print(out: &Option<PathBuf>, ext: &str, content: &str) -> Result<(), CliError> {
    match out {
        Some(base) => {
            let path = if ext.is_empty() {
                base.clone()
            } else {
                let mut p = base.clone();
                let file = format!(
                    "{}.{ext}",
                    p.file_name().map(|f| f.to_string_lossy()).unwrap_or_default()
                );
                p.set_file_name(file);
                p
            };
            std::fs::write(&path, content)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_solve(flags: &Flags) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let opts = solver_options(&cfg, flags);
    let pm = build_population(&cfg, flags)?;
    let kind = flags
        .kind
        .or(cfg.solver.kind)
        .unwrap_or(EquilibriumKind::SubgamePerfect);
    let eq = match kind {
        EquilibriumKind::SubgamePerfect => spne(&pm, &opts)?,
        EquilibriumKind::Dictatorial => dictatorial(&pm, &opts)?,
        EquilibriumKind::NoInsuranceBaseline => baseline(&pm, &opts)?,
    };
    print!("{}", equilibrium_summary(&eq));
    let json = serde_json::to_string_pretty(&eq).expect("equilibrium serializes");
    if flags.out.is_some() {
        write_or_print(&flags.out, "json", &json)?;
        write_or_print(&flags.out, "csv", &equilibrium_csv(&eq))?;
    } else {
        println!("{json}");
    }
    Ok(())
}

fn cmd_sweep(flags: &Flags) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let opts = solver_options(&cfg, flags);
    let spec = cfg
        .population
        .clone()
        .ok_or_else(|| CliError::usage("config has no [population] section"))?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::usage("config has no [sweep] section"))?;
    let kind = flags
        .kind
        .or(cfg.solver.kind)
        .unwrap_or(EquilibriumKind::SubgamePerfect);
    let outcome = run_sweep(&spec, sweep.param, &sweep.values, kind, &opts)?;
    for (value, message) in &outcome.failures {
        eprintln!("point {value} failed: {message}");
    }
    write_or_print(&flags.out, "", &to_csv(&outcome.rows))?;
    Ok(())
}

fn cmd_oracle(flags: &Flags) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let pm = build_population(&cfg, flags)?;
    let grid = flags.grid.unwrap_or(cfg.oracle.grid).max(1);
    let n = flags.mc_n.unwrap_or(cfg.oracle.mc_n);
    let seed = flags.seed.unwrap_or(cfg.oracle.seed);
    let r = pm.incidence();

    let mut out = String::from(
        "theta,premium,a,t,o,a_mc,t_mc,o_mc,se_a,se_t,se_o,max_dev_sigma\n",
    );
    let mut worst = 0.0f64;
    for i in 0..grid {
        let q = (i as f64 + 1.0) / (grid as f64 + 1.0);
        let theta = pm.psi_quantile(q)?.max(1e-9);
        for j in 0..grid {
            let frac = (j as f64 + 0.5) / grid as f64;
            let premium = theta * (r + (1.0 - r) * frac);
            let prices = PricePair::new(theta, premium)?;
            let quad = region_masses(&pm, &prices)?;
            let point_seed = seed ^ ((i as u64) << 32) ^ j as u64;
            let (mc, se) = mc_region_masses(&pm, &prices, n, point_seed)?;
            let dev = [
                (quad.insured - mc.insured, se[0]),
                (quad.out_of_pocket - mc.out_of_pocket, se[1]),
                (quad.no_access - mc.no_access, se[2]),
            ]
            .iter()
            .map(|(d, s)| if *s > 0.0 { d.abs() / s } else { 0.0 })
            .fold(0.0f64, f64::max);
            worst = worst.max(dev);
            let cells = [
                theta,
                premium,
                quad.insured,
                quad.out_of_pocket,
                quad.no_access,
                mc.insured,
                mc.out_of_pocket,
                mc.no_access,
                se[0],
                se[1],
                se[2],
                dev,
            ];
            let line: Vec<String> = cells.iter().map(|&x| format_sig(x)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
    }
    write_or_print(&flags.out, "", &out)?;
    eprintln!("max deviation: {} sigma over {}x{grid} price pairs, n = {n}", format_sig(worst), grid);
    Ok(())
}

fn load_cohort_atoms(
    lc: &LifecycleSettings,
    config_dir: Option<&std::path::Path>,
) -> Result<Vec<(f64, f64, f64)>, CliError> {
    if let Some(path) = &lc.cohort_path {
        let mut p = PathBuf::from(path);
        if p.is_relative() {
            if let Some(dir) = config_dir {
                p = dir.join(p);
            }
        }
        let text = std::fs::read_to_string(&p)
            .map_err(|e| CliError::usage(format!("cannot read cohort {}: {e}", p.display())))?;
        return Ok(match lc.format {
            CohortFormat::SinglePeriod => config::parse_single_period_csv(&text)?,
            CohortFormat::Multi => {
                let agents = config::parse_cohort_csv(&text)?;
                premia::lifecycle::cohort_atoms(&agents, lc.period)?
            }
        });
    }
    if let Some(spec) = &lc.cohort {
        let agents = spec.build()?;
        return Ok(premia::lifecycle::cohort_atoms(&agents, lc.period)?);
    }
    Err(CliError::usage(
        "lifecycle config needs either cohort = <csv path> or an inline parametric cohort",
    ))
}

fn cmd_lifecycle(flags: &Flags) -> Result<(), CliError> {
    let cfg = load_config(flags)?;
    let lc = cfg
        .lifecycle
        .clone()
        .ok_or_else(|| CliError::usage("config has no [lifecycle] section"))?;
    let config_dir = flags.config.as_ref().and_then(|p| p.parent());
    let atoms = load_cohort_atoms(&lc, config_dir)?;

    let mut out = String::from("p,psi,weight\n");
    for (p, psi, w) in &atoms {
        let _ = writeln!(out, "{},{},{}", format_sig(*p), format_sig(*psi), format_sig(*w));
    }
    write_or_print(&flags.out, "", &out)?;

    let incidence = cfg
        .population
        .as_ref()
        .map(|p| p.incidence)
        .filter(|r| r.is_finite())
        .unwrap_or(0.3);
    let pm = PopulationMeasure::planar_atoms(atoms, incidence)?;

    if flags.solve {
        let radius = flags
            .radius
            .or(lc.radius)
            .unwrap_or_else(|| 1e-3 * pm.psi_scale());
        let smoothed = pm.smooth_atoms(radius)?;
        let opts = solver_options(&cfg, flags);
        let eq = spne(&smoothed, &opts)?;
        print!("{}", equilibrium_summary(&eq));
        if flags.out.is_some() {
            let json = serde_json::to_string_pretty(&eq).expect("equilibrium serializes");
            write_or_print(&flags.out, "json", &json)?;
        }
    }
    Ok(())
}

fn cmd_plotdata(flags: &Flags) -> Result<(), CliError> {
    let path = flags
        .positional
        .first()
        .ok_or_else(|| CliError::usage("plotdata needs a sweep CSV path"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {path}: {e}")))?;
    let rows: Vec<SweepRow> = parse_csv(&text)?;
    let _ = SWEEP_HEADER; // format documented in docs/format.md
    let param = flags
        .positional
        .get(1)
        .cloned()
        .unwrap_or_else(|| "param".to_string());
    let series = plot_series(&param, &rows);
    let json = serde_json::to_string_pretty(&series).expect("series serialize");
    write_or_print(&flags.out, "", &json)?;
    Ok(())
}

fn run() -> Result<(), CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        return Err(CliError::usage(USAGE));
    };
    let flags = parse_flags(&args[1..])?;
    match command.as_str() {
        "solve" => cmd_solve(&flags),
        "sweep" => cmd_sweep(&flags),
        "oracle" => cmd_oracle(&flags),
        "lifecycle" => cmd_lifecycle(&flags),
        "plotdata" => cmd_plotdata(&flags),
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::usage(format!(
            "unknown command '{other}'\n\n{USAGE}"
        ))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.message);
            ExitCode::from(err.code)
        }
    }
}
