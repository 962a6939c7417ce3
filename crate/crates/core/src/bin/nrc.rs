use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nrc_core::bounds::{self, BoundInputs};
use nrc_core::harness::output::{write_case, write_json};
use nrc_core::harness::{run_case, run_sweep, Axis, CaseConfig, CaseOutcome, Format, Mode, Verdict};
use nrc_core::problem::validate;
use nrc_core::sobolev::{analytic_upper, estimate_rayleigh, ConstantKind, SobolevRegistry};

#[derive(Parser)]
#[command(name = "nrc", version, about = "Solve and check a-priori bounds for mixed boundary parabolic problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory; nothing is written without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Term cap of the maximum-principle series.
    #[arg(long, global = true)]
    max_terms: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check assumptions and report the active regimes.
    Validate { config: PathBuf },
    /// Solve and report norms.
    Solve { config: PathBuf },
    /// Evaluate closed-form bounds without solving.
    Bounds { config: PathBuf },
    /// Solve, measure and compare against every applicable bound.
    Verify { config: PathBuf },
    /// Run the Cartesian product of axis values.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`; key is a shorthand (bsharp, escale, ell, dt, m, ...) or a dotted config path.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        /// Pipeline run per case.
        #[arg(long, value_enum, default_value = "verify")]
        mode: ModeArg,
    },
    /// Estimate the embedding constants the config needs.
    Sobolev { config: PathBuf },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Validate,
    Bounds,
    Solve,
    Verify,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Validate => Mode::Validate,
            ModeArg::Bounds => Mode::Bounds,
            ModeArg::Solve => Mode::Solve,
            ModeArg::Verify => Mode::Verify,
        }
    }
}

fn load(path: &PathBuf, c: &Common) -> Result<CaseConfig, String> {
    let mut cfg = CaseConfig::load(path).map_err(|e| e.to_string())?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.max_terms {
        cfg.registry.series.max_terms = t;
    }
    if let Some(f) = c.format {
        cfg.outputs.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    Ok(cfg)
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into())
}

fn print_case(o: &CaseOutcome) {
    let r = &o.report;
    println!("case {} ({:?})", r.case, r.mode);
    for s in r.stages.iter().filter(|s| !s.ok) {
        println!("  stage {} failed: {}", s.name, s.error.as_deref().unwrap_or(""));
    }
    if let Some(v) = &r.validation {
        let regimes: Vec<String> = r.regimes.iter().map(|g| g.to_string()).collect();
        println!("  regimes: {}", regimes.join(", "));
        for c in v.failed() {
            println!("  assumption {}: {}", c.name, c.detail);
        }
    }
    if let Some(n) = &r.norms {
        println!(
            "  norms: |u|_2,inf={:.6e} |u|_1,inf={:.6e} |grad u|_2={:.6e} sup={:.6e} min={:.6e}",
            n.l2_linf, n.l1_linf, n.grad_l2, n.sup, n.inf
        );
    }
    if let Some(b) = &r.bounds {
        for e in &b.entries {
            let vals: Vec<String> = e.values.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
            println!("  bound {} [{:?}] {}", e.id, e.applicability, vals.join(" "));
            if let Some(reason) = &e.reason {
                println!("    {reason}");
            }
        }
    }
    for row in &r.rows {
        let verdict = format!("{:?}", row.verdict).to_lowercase();
        println!(
            "  {:<12} {:<40} measured={} bound={} ratio={}",
            verdict,
            row.id,
            fmt(row.measured),
            fmt(row.bound),
            fmt(row.ratio)
        );
        if row.verdict == Verdict::Violated {
            for c in &row.constants {
                println!("    {} = {:.6e} ({})", c.symbol, c.value, c.provenance);
            }
            if let Some(n) = &row.note {
                println!("    {n}");
            }
        }
    }
}

fn run_single(path: &PathBuf, mode: Mode, c: &Common) -> Result<i32, String> {
    let cfg = load(path, c)?;
    let outcome = run_case(&cfg, mode);
    if let Some(dir) = &c.out {
        write_case(dir, &outcome, cfg.outputs.format, cfg.outputs.fields, cfg.outputs.mesh).map_err(|e| e.to_string())?;
    }
    if !c.quiet {
        print_case(&outcome);
    }
    Ok(outcome.report.exit_code())
}

fn run_sweep_cmd(path: &PathBuf, axes: &[String], mode: Mode, c: &Common) -> Result<i32, String> {
    let cfg = load(path, c)?;
    let axes: Vec<Axis> = axes.iter().map(|a| Axis::parse(a)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let res = run_sweep(&cfg, &axes, mode);
    let keys: Vec<String> = axes.iter().map(|a| a.key.clone()).collect();
    let csv = res.summary_csv(&keys);
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir.join("cases")).map_err(|e| e.to_string())?;
        std::fs::write(dir.join("summary.csv"), &csv).map_err(|e| e.to_string())?;
        for case in &res.cases {
            write_json(&dir.join("cases").join(format!("{}.json", case.label)), case).map_err(|e| e.to_string())?;
        }
    }
    if !c.quiet {
        print!("{csv}");
        for case in res.cases.iter().filter(|c| c.error.is_some()) {
            println!("# {} failed: {}", case.label, case.error.as_deref().unwrap_or(""));
        }
    }
    Ok(res.exit_code())
}

fn run_sobolev(path: &PathBuf, c: &Common) -> Result<i32, String> {
    let cfg = load(path, c)?;
    let spec = cfg.problem.to_spec().map_err(|e| e.to_string())?;
    let mesh = cfg.discretization.mesh(&spec.domain).map_err(|e| e.to_string())?;
    let validation = validate(&spec, &mesh, &cfg.sampling);
    let inp = BoundInputs::from_problem(&spec, &mesh, &validation, &cfg.sampling).map_err(|e| e.to_string())?;
    let mut reg = SobolevRegistry::new(&spec.domain);
    let mut opts = cfg.registry.estimator;
    opts.seed = opts.seed.wrapping_add(cfg.seed);
    let mut keys = bounds::required_constants(&inp);
    if keys.is_empty() {
        keys.push((ConstantKind::Sp, spec.p, None));
    }
    if !c.quiet {
        println!("kind,p,q,numeric_lower,analytic_upper,converged");
    }
    for (kind, p, q) in keys {
        let est = estimate_rayleigh(&mesh, kind, p, q, &opts, None).map_err(|e| e.to_string())?;
        let up = analytic_upper(&spec.domain, kind, p, q).map_err(|e| e.to_string())?;
        if let Some(v) = up {
            reg.add_analytic(&spec.domain, kind, p, q).map_err(|e| e.to_string())?;
            let _ = v;
        }
        if !c.quiet {
            println!(
                "{},{},{},{:.8e},{},{}",
                kind,
                p,
                q.map(|x| x.to_string()).unwrap_or_default(),
                est.estimate.value,
                fmt(up),
                est.estimate.converged
            );
        }
        reg.insert(est.estimate).map_err(|e| e.to_string())?;
    }
    let issues = reg.consistency();
    for i in &issues {
        eprintln!("inconsistent: {i}");
    }
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        reg.save(&dir.join("registry.txt")).map_err(|e| e.to_string())?;
    }
    Ok(if issues.is_empty() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let res = match &cli.command {
        Command::Validate { config } => run_single(config, Mode::Validate, c),
        Command::Solve { config } => run_single(config, Mode::Solve, c),
        Command::Bounds { config } => run_single(config, Mode::Bounds, c),
        Command::Verify { config } => run_single(config, Mode::Verify, c),
        Command::Sweep { config, axes, mode } => run_sweep_cmd(config, axes, (*mode).into(), c),
        Command::Sobolev { config } => run_sobolev(config, c),
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
